use serde::{Deserialize, Serialize};

use crate::domain::{Difficulty, Layout};

/// Dashboard interaction, published on `behavior.events`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorEvent {
    #[serde(default)]
    pub session_id: String,
    #[serde(flatten)]
    pub kind: BehaviorKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BehaviorKind {
    LayoutSwitch {
        layout: Layout,
    },
    QuestionShown {
        question_id: String,
        /// Labelled difficulty, if the question source knows it.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        difficulty: Option<Difficulty>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        layout: Option<Layout>,
    },
    AnswerSubmitted {
        question_id: String,
        correct: bool,
        reaction_time_ms: f64,
    },
}

impl BehaviorEvent {
    pub fn new(session_id: impl Into<String>, kind: BehaviorKind) -> Self {
        Self { session_id: session_id.into(), kind }
    }
}

// Serde buffers internally tagged variants, which hides the failing field
// from path tracking. These mirrors of the variant bodies are deserialized
// on their own to recover it.
#[derive(Deserialize)]
#[allow(dead_code)]
struct LayoutSwitchBody {
    layout: Layout,
}

#[derive(Deserialize)]
#[allow(dead_code)]
struct QuestionShownBody {
    question_id: String,
    #[serde(default)]
    difficulty: Option<Difficulty>,
    #[serde(default)]
    layout: Option<Layout>,
}

#[derive(Deserialize)]
#[allow(dead_code)]
struct AnswerSubmittedBody {
    question_id: String,
    correct: bool,
    reaction_time_ms: f64,
}

#[derive(Deserialize)]
#[allow(dead_code)]
struct SessionField {
    #[serde(default)]
    session_id: String,
}

/// `(path, message)` of the first problem in a `behavior.events` payload.
pub(crate) fn behavior_error(v: &serde_json::Value) -> Option<(String, String)> {
    fn body<T: serde::de::DeserializeOwned>(v: &serde_json::Value) -> Option<(String, String)> {
        serde_path_to_error::deserialize::<_, T>(v).err().map(|e| (e.path().to_string(), e.inner().to_string()))
    }
    if !v.is_object() {
        return Some((".".into(), "expected an object".into()));
    }
    if let Some(e) = body::<SessionField>(v) {
        return Some(e);
    }
    match v.get("kind").map(|k| k.as_str()) {
        None => Some(("kind".into(), "missing field `kind`".into())),
        Some(None) => Some(("kind".into(), "expected a string".into())),
        Some(Some("layout_switch")) => body::<LayoutSwitchBody>(v),
        Some(Some("question_shown")) => body::<QuestionShownBody>(v),
        Some(Some("answer_submitted")) => body::<AnswerSubmittedBody>(v),
        Some(Some(other)) => Some((
            "kind".into(),
            format!("unknown kind `{other}`, expected layout_switch, question_shown or answer_submitted"),
        )),
    }
}

/// Frames a dashboard may send over the socket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientFrame {
    Behavior { payload: serde_json::Value },
}

/// Sent back when a client frame cannot be accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ErrorFrame {
    Error { message: String },
}

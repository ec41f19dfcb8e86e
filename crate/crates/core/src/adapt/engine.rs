use std::collections::{BTreeMap, HashMap};
use std::future::Future;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::catalogue::{AdaptationOperation, AdaptationStrategy, Catalogue};
use crate::domain::{Action, Difficulty, Layout};
use crate::gateway::broker::now_ms;
use crate::gateway::{BehaviorEvent, BehaviorKind, Broker, GatewayError, Topic};
use crate::rl::StrategyRequest;

/// Payload of `adaptation.config`: the complete declared adaptation for one
/// layout. Operations are absolute, so applying a config twice is a no-op.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationConfig {
    pub config_id: String,
    pub session_id: String,
    pub layout: Layout,
    pub strategy: AdaptationStrategy,
    pub operations: Vec<AdaptationOperation>,
    pub issued_at_ms: u64,
    /// Epoch whose workload estimate led to this config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger_epoch: Option<u64>,
}

/// Stamps catalogue lookups with per-session ids.
#[derive(Debug, Clone)]
pub struct AdaptationEngine {
    catalogue: Arc<Catalogue>,
    counters: HashMap<String, u64>,
}

impl AdaptationEngine {
    pub fn new(catalogue: Arc<Catalogue>) -> Self {
        Self { catalogue, counters: HashMap::new() }
    }

    pub fn catalogue(&self) -> &Catalogue {
        &self.catalogue
    }

    /// Never fails: the catalogue was checked for totality when it was built.
    pub fn resolve(&mut self, session_id: &str, layout: Layout, action: Action, trigger_epoch: Option<u64>) -> AdaptationConfig {
        let counter = self.counters.entry(session_id.to_string()).or_insert(0);
        *counter += 1;
        AdaptationConfig {
            config_id: format!("{session_id}-{:06}", *counter),
            session_id: session_id.to_string(),
            layout,
            strategy: AdaptationStrategy::from_action(action),
            operations: self.catalogue.operations(layout, action).to_vec(),
            issued_at_ms: now_ms(),
            trigger_epoch,
        }
    }
}

/// Body of `GET /api/state`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurrentState {
    pub session_active: bool,
    pub session_id: Option<String>,
    pub layout: Option<Layout>,
    pub strategy: Option<AdaptationStrategy>,
    pub question_id: Option<String>,
    pub difficulty: Option<Difficulty>,
    pub config_id: Option<String>,
    pub operations: Vec<AdaptationOperation>,
}

/// Shared snapshot written by the config-publish path and read by HTTP.
#[derive(Debug, Clone, Default)]
pub struct StateStore(Arc<RwLock<CurrentState>>);

impl StateStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn current_state(&self) -> CurrentState {
        self.0.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn update(&self, f: impl FnOnce(&mut CurrentState)) {
        f(&mut self.0.write().unwrap_or_else(|e| e.into_inner()));
    }

    pub fn begin_session(&self, session_id: &str, layout: Layout) {
        self.update(|s| {
            *s = CurrentState {
                session_active: true,
                session_id: Some(session_id.to_string()),
                layout: Some(layout),
                ..Default::default()
            }
        });
    }

    pub fn end_session(&self) {
        self.update(|s| s.session_active = false);
    }

    pub fn apply_config(&self, cfg: &AdaptationConfig) {
        self.update(|s| {
            s.layout = Some(cfg.layout);
            s.strategy = Some(cfg.strategy);
            s.config_id = Some(cfg.config_id.clone());
            s.operations = cfg.operations.clone();
        });
    }

    pub fn apply_behavior(&self, event: &BehaviorEvent) {
        self.update(|s| match &event.kind {
            BehaviorKind::LayoutSwitch { layout } => s.layout = Some(*layout),
            BehaviorKind::QuestionShown { question_id, difficulty, layout } => {
                s.question_id = Some(question_id.clone());
                s.difficulty = *difficulty;
                if let Some(l) = layout {
                    s.layout = Some(*l);
                }
            }
            BehaviorKind::AnswerSubmitted { .. } => {}
        });
    }
}

/// What a dashboard shows after applying configs: a map from (target,
/// property) to value. Used to check that application is idempotent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeclaredView {
    pub layout: Option<Layout>,
    pub config_id: Option<String>,
    pub properties: BTreeMap<(String, String), serde_json::Value>,
}

impl DeclaredView {
    /// Replace the declared overrides with exactly those in `cfg`.
    pub fn apply(&mut self, cfg: &AdaptationConfig) {
        self.layout = Some(cfg.layout);
        self.config_id = Some(cfg.config_id.clone());
        self.properties =
            cfg.operations.iter().map(|op| ((op.target.clone(), op.property.clone()), op.value.clone())).collect();
    }
}

/// Subscribe now and return the task that turns `strategy.request` into
/// `adaptation.config`, keeping `store` in sync. The task ends when the
/// broker closes.
pub fn engine_task(
    broker: &Broker,
    mut engine: AdaptationEngine,
    store: StateStore,
) -> Result<impl Future<Output = ()> + Send + 'static, GatewayError> {
    let mut requests = broker.subscribe(Topic::StrategyRequest, None)?;
    let mut behavior = broker.subscribe(Topic::BehaviorEvents, None)?;
    let broker = broker.clone();
    Ok(async move {
        let mut behavior_open = true;
        loop {
            tokio::select! {
                env = requests.recv() => {
                    let Some(env) = env else { break };
                    let req: StrategyRequest = match env.decode() {
                        Ok(r) => r,
                        Err(e) => {
                            tracing::warn!(error = %e, "dropping malformed strategy request");
                            continue;
                        }
                    };
                    let cfg = engine.resolve(&req.session_id, req.layout, req.action, Some(req.epoch_index));
                    match broker.publish(Topic::AdaptationConfig, &cfg) {
                        Ok(_) => store.apply_config(&cfg),
                        Err(GatewayError::Closed) => break,
                        Err(e) => tracing::error!(error = %e, "adaptation config rejected"),
                    }
                }
                env = behavior.recv(), if behavior_open => match env {
                    Some(env) => match env.decode::<BehaviorEvent>() {
                        Ok(ev) => store.apply_behavior(&ev),
                        Err(e) => tracing::warn!(error = %e, "ignoring malformed behavior event"),
                    },
                    None => behavior_open = false,
                },
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Attribute, StrategyKind};

    #[test]
    fn resolve_stamps_ids_and_copies_catalogue_entry() {
        let mut engine = AdaptationEngine::new(Arc::new(Catalogue::builtin()));
        let a = engine.resolve("s1", Layout::Graph, Action::Partial(Attribute::Color), Some(4));
        let b = engine.resolve("s1", Layout::Graph, Action::NoAdaptation, None);
        let c = engine.resolve("s2", Layout::Graph, Action::NoAdaptation, None);
        assert_eq!((a.config_id.as_str(), b.config_id.as_str(), c.config_id.as_str()), ("s1-000001", "s1-000002", "s2-000001"));
        assert!(a.operations.iter().all(|op| op.property == "fill_color"));
        assert!(a.operations.iter().any(|op| op.target == "node.clique"));
        assert!(b.operations.is_empty());
        assert_eq!(b.strategy.kind, StrategyKind::None);
        assert!(crate::gateway::Topic::AdaptationConfig.validate(&serde_json::to_value(&a).unwrap()).is_ok());
    }

    #[test]
    fn declared_view_is_idempotent() {
        let mut engine = AdaptationEngine::new(Arc::new(Catalogue::builtin()));
        let full = engine.resolve("s", Layout::Timeline, Action::FullAdaptation, None);
        let mut once = DeclaredView::default();
        once.apply(&full);
        let mut twice = once.clone();
        twice.apply(&full);
        assert_eq!(once, twice);
        let none = engine.resolve("s", Layout::Timeline, Action::NoAdaptation, None);
        twice.apply(&none);
        assert!(twice.properties.is_empty());
    }

    #[test]
    fn state_store_tracks_question_and_config() {
        let store = StateStore::new();
        assert!(!store.current_state().session_active);
        store.begin_session("s", Layout::Distribution);
        store.apply_behavior(&BehaviorEvent::new(
            "s",
            BehaviorKind::QuestionShown { question_id: "q7".into(), difficulty: Some(Difficulty::High), layout: None },
        ));
        let mut engine = AdaptationEngine::new(Arc::new(Catalogue::builtin()));
        store.apply_config(&engine.resolve("s", Layout::Distribution, Action::FullAdaptation, Some(0)));
        let st = store.current_state();
        assert!(st.session_active);
        assert_eq!(st.question_id.as_deref(), Some("q7"));
        assert_eq!(st.difficulty, Some(Difficulty::High));
        assert_eq!(st.strategy.unwrap().kind, StrategyKind::Full);
        store.end_session();
        assert!(!store.current_state().session_active);
    }
}

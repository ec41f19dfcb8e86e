//! Online side of the agent: assemble the state from the live topics and
//! ask the active layout's table for a greedy action.

use std::collections::HashMap;
use std::future::Future;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{QTable, RlError, State};
use crate::adapt::AdaptationConfig;
use crate::domain::{Action, Difficulty, Layout, StrategyKind};
use crate::gateway::{BehaviorEvent, BehaviorKind, Broker, GatewayError, Topic};
use crate::mwl::MwlEstimate;

/// Payload of `strategy.request`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRequest {
    pub session_id: String,
    pub epoch_index: u64,
    pub layout: Layout,
    pub action: Action,
}

/// One table per layout.
#[derive(Debug, Clone)]
pub struct AgentPool {
    tables: Vec<QTable>,
}

impl AgentPool {
    pub fn new(tables: Vec<QTable>) -> Result<Self, RlError> {
        let mut slots: Vec<Option<QTable>> = vec![None; Layout::ALL.len()];
        for t in tables {
            let i = t.layout.index();
            if slots[i].replace(t).is_some() {
                return Err(RlError::Model(format!("two tables for layout {}", Layout::ALL[i])));
            }
        }
        let tables = slots
            .into_iter()
            .zip(Layout::ALL)
            .map(|(t, l)| t.ok_or_else(|| RlError::Model(format!("no table for layout {l}"))))
            .collect::<Result<_, _>>()?;
        Ok(Self { tables })
    }

    pub fn load<P: AsRef<Path>>(paths: impl IntoIterator<Item = P>) -> Result<Self, RlError> {
        AgentPool::new(paths.into_iter().map(QTable::load).collect::<Result<_, _>>()?)
    }

    pub fn table(&self, layout: Layout) -> &QTable {
        &self.tables[layout.index()]
    }

    pub fn choose(&self, layout: Layout, state: State) -> Action {
        self.table(layout).greedy(state)
    }
}

/// Where question difficulty comes from. The default trusts the label on
/// the `question_shown` event.
pub trait DifficultyProvider: Send + Sync {
    fn difficulty(&self, question_id: &str, labelled: Option<Difficulty>) -> Option<Difficulty>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LabelledDifficulty;

impl DifficultyProvider for LabelledDifficulty {
    fn difficulty(&self, _question_id: &str, labelled: Option<Difficulty>) -> Option<Difficulty> {
        labelled
    }
}

/// Fixed lookup by question id, falling back to the label.
#[derive(Debug, Clone, Default)]
pub struct DifficultyTable(pub HashMap<String, Difficulty>);

impl DifficultyProvider for DifficultyTable {
    fn difficulty(&self, question_id: &str, labelled: Option<Difficulty>) -> Option<Difficulty> {
        self.0.get(question_id).copied().or(labelled)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct SessionView {
    layout: Layout,
    difficulty: Difficulty,
    strategy: StrategyKind,
}

/// Tracks layout, difficulty and on-screen strategy per session.
pub struct StateAssembler {
    defaults: SessionView,
    sessions: HashMap<String, SessionView>,
    provider: Box<dyn DifficultyProvider>,
}

impl StateAssembler {
    pub fn new(layout: Layout, difficulty: Difficulty, provider: Box<dyn DifficultyProvider>) -> Self {
        Self {
            defaults: SessionView { layout, difficulty, strategy: StrategyKind::None },
            sessions: HashMap::new(),
            provider,
        }
    }

    fn view(&mut self, session: &str) -> &mut SessionView {
        let defaults = self.defaults;
        self.sessions.entry(session.to_string()).or_insert(defaults)
    }

    pub fn on_behavior(&mut self, event: &BehaviorEvent) {
        match &event.kind {
            BehaviorKind::LayoutSwitch { layout } => self.view(&event.session_id).layout = *layout,
            BehaviorKind::QuestionShown { question_id, difficulty, layout } => {
                let d = self.provider.difficulty(question_id, *difficulty);
                let v = self.view(&event.session_id);
                if let Some(d) = d {
                    v.difficulty = d;
                }
                if let Some(l) = layout {
                    v.layout = *l;
                }
            }
            BehaviorKind::AnswerSubmitted { .. } => {}
        }
    }

    pub fn on_config(&mut self, cfg: &AdaptationConfig) {
        let v = self.view(&cfg.session_id);
        v.layout = cfg.layout;
        v.strategy = cfg.strategy.kind;
    }

    pub fn assemble(&mut self, estimate: &MwlEstimate) -> (Layout, State) {
        let v = *self.view(&estimate.session_id);
        (v.layout, State { mwl: estimate.category, difficulty: v.difficulty, current_strategy: v.strategy })
    }
}

/// Subscribe now and return the serving task. Each `mwl.estimate` yields one
/// `strategy.request`. Ends when the broker closes.
pub fn serve(
    broker: &Broker,
    pool: AgentPool,
    mut assembler: StateAssembler,
) -> Result<impl Future<Output = ()> + Send + 'static, GatewayError> {
    let mut estimates = broker.subscribe(Topic::MwlEstimate, None)?;
    let mut behavior = broker.subscribe(Topic::BehaviorEvents, None)?;
    let mut configs = broker.subscribe(Topic::AdaptationConfig, None)?;
    let broker = broker.clone();
    Ok(async move {
        let (mut behavior_open, mut configs_open) = (true, true);
        loop {
            tokio::select! {
                biased;
                env = behavior.recv(), if behavior_open => match env {
                    Some(env) => match env.decode::<BehaviorEvent>() {
                        Ok(ev) => assembler.on_behavior(&ev),
                        Err(e) => tracing::warn!(error = %e, seq = env.seq, "rejected behavior event"),
                    },
                    None => behavior_open = false,
                },
                env = configs.recv(), if configs_open => match env {
                    Some(env) => {
                        if let Ok(cfg) = env.decode::<AdaptationConfig>() {
                            assembler.on_config(&cfg);
                        }
                    }
                    None => configs_open = false,
                },
                env = estimates.recv() => {
                    let Some(env) = env else { break };
                    let est: MwlEstimate = match env.decode() {
                        Ok(e) => e,
                        Err(e) => {
                            tracing::warn!(error = %e, "dropping malformed estimate");
                            continue;
                        }
                    };
                    let (layout, state) = assembler.assemble(&est);
                    let req = StrategyRequest {
                        session_id: est.session_id.clone(),
                        epoch_index: est.epoch_index,
                        layout,
                        action: pool.choose(layout, state),
                    };
                    if let Err(e) = broker.publish(Topic::StrategyRequest, &req) {
                        if e == GatewayError::Closed {
                            break;
                        }
                        tracing::error!(error = %e, "strategy request rejected");
                    }
                }
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::MwlCategory;

    #[test]
    fn pool_needs_one_table_per_layout() {
        assert!(AgentPool::new(vec![QTable::zeros(Layout::Graph)]).is_err());
        assert!(AgentPool::new(vec![QTable::zeros(Layout::Graph), QTable::zeros(Layout::Graph)]).is_err());
        let pool = AgentPool::new(Layout::ALL.iter().rev().map(|&l| QTable::zeros(l)).collect()).unwrap();
        assert_eq!(pool.table(Layout::Timeline).layout, Layout::Timeline);
    }

    #[test]
    fn assembler_follows_behavior() {
        let mut table = DifficultyTable::default();
        table.0.insert("q2".into(), Difficulty::Low);
        let mut asm = StateAssembler::new(Layout::Graph, Difficulty::Low, Box::new(table));
        asm.on_behavior(&BehaviorEvent::new("s", BehaviorKind::LayoutSwitch { layout: Layout::Timeline }));
        asm.on_behavior(&BehaviorEvent::new(
            "s",
            BehaviorKind::QuestionShown { question_id: "q1".into(), difficulty: Some(Difficulty::High), layout: None },
        ));
        let est = |s: &str| MwlEstimate {
            session_id: s.into(),
            epoch_index: 0,
            bands: crate::dsp::PerBand::from_fn(|_| crate::mwl::BandCategory::High),
            index: 2.0,
            category: MwlCategory::High,
        };
        let (layout, state) = asm.assemble(&est("s"));
        assert_eq!(layout, Layout::Timeline);
        assert_eq!(state, State { mwl: MwlCategory::High, difficulty: Difficulty::High, current_strategy: StrategyKind::None });
        asm.on_behavior(&BehaviorEvent::new(
            "s",
            BehaviorKind::QuestionShown { question_id: "q2".into(), difficulty: Some(Difficulty::High), layout: None },
        ));
        assert_eq!(asm.assemble(&est("s")).1.difficulty, Difficulty::Low);
        assert_eq!(asm.assemble(&est("other")).0, Layout::Graph);
    }

    #[test]
    fn request_wire_format() {
        let r = StrategyRequest { session_id: "s".into(), epoch_index: 3, layout: Layout::Graph, action: Action::FullAdaptation };
        assert_eq!(
            serde_json::to_value(&r).unwrap(),
            serde_json::json!({"session_id": "s", "epoch_index": 3, "layout": "graph", "action": "full_adaptation"})
        );
    }
}

//! In-process topic broker and the WebSocket/HTTP bridge the dashboard uses.
//!
//! Every topic carries a gap-free sequence number. Publishers never block:
//! each subscriber has a bounded queue and is disconnected when it overflows.

pub mod broker;
pub mod messages;
pub mod metrics;
pub mod ws;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use broker::{Broker, BrokerConfig, Subscription};
pub use messages::{BehaviorEvent, BehaviorKind, ClientFrame};
pub use metrics::{LatencySummary, MetricsSnapshot, TopicMetrics};
pub use ws::{router, serve_http, ERROR_CLOSE_SLOW_CLIENT};

#[derive(Debug, Error, PartialEq)]
pub enum GatewayError {
    #[error("unknown topic '{0}'")]
    UnknownTopic(String),
    #[error("invalid payload for {topic} at '{path}': {message}")]
    Schema { topic: Topic, path: String, message: String },
    #[error("seq {requested} on {topic} is no longer retained; oldest available is {oldest}")]
    Range { topic: Topic, requested: u64, oldest: u64 },
    #[error("gateway is closed")]
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Topic {
    EegEpoch,
    BandPower,
    MwlEstimate,
    BehaviorEvents,
    StrategyRequest,
    AdaptationConfig,
}

impl Topic {
    pub const ALL: [Topic; 6] = [
        Topic::EegEpoch,
        Topic::BandPower,
        Topic::MwlEstimate,
        Topic::BehaviorEvents,
        Topic::StrategyRequest,
        Topic::AdaptationConfig,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Topic::EegEpoch => "biosignals.eeg.epoch",
            Topic::BandPower => "features.bandpower",
            Topic::MwlEstimate => "mwl.estimate",
            Topic::BehaviorEvents => "behavior.events",
            Topic::StrategyRequest => "strategy.request",
            Topic::AdaptationConfig => "adaptation.config",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Deserialize `payload` into the topic's typed message, reporting the
    /// offending field path on failure.
    pub fn validate(self, payload: &serde_json::Value) -> Result<(), GatewayError> {
        fn check<T: serde::de::DeserializeOwned>(topic: Topic, v: &serde_json::Value) -> Result<(), GatewayError> {
            serde_path_to_error::deserialize::<_, T>(v).map(drop).map_err(|e| GatewayError::Schema {
                topic,
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })
        }
        match self {
            Topic::EegEpoch => check::<crate::ingest::EegEpoch>(self, payload),
            Topic::BandPower => check::<crate::dsp::FeatureVector>(self, payload),
            Topic::MwlEstimate => check::<crate::mwl::MwlEstimate>(self, payload),
            Topic::BehaviorEvents => check::<BehaviorEvent>(self, payload).map_err(|e| {
                match messages::behavior_error(payload) {
                    Some((path, message)) => GatewayError::Schema { topic: self, path, message },
                    None => e,
                }
            }),
            Topic::StrategyRequest => check::<crate::rl::StrategyRequest>(self, payload),
            Topic::AdaptationConfig => check::<crate::adapt::AdaptationConfig>(self, payload),
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Topic {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Topic::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| GatewayError::UnknownTopic(s.to_string()))
    }
}

impl Serialize for Topic {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Topic {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One delivered message. `seq` is per topic, starting at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub topic: Topic,
    pub seq: u64,
    pub timestamp_ms: u64,
    pub session_id: String,
    pub payload: serde_json::Value,
}

impl Envelope {
    pub fn decode<T: serde::de::DeserializeOwned>(&self) -> Result<T, serde_json::Error> {
        T::deserialize(&self.payload)
    }
}

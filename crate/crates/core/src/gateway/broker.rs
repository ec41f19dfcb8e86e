use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use futures::Stream;
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;

use super::metrics::{LatencyTracker, MetricsSnapshot, TopicMetrics};
use super::{Envelope, GatewayError, Topic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BrokerConfig {
    /// Messages kept per topic for `from_seq` replay.
    pub retention: usize,
    /// Queue length per subscriber before it is disconnected.
    pub subscriber_buffer: usize,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        Self { retention: 1024, subscriber_buffer: 4096 }
    }
}

struct Subscriber {
    tx: mpsc::Sender<Arc<Envelope>>,
    overflowed: Arc<AtomicBool>,
}

#[derive(Default)]
struct TopicState {
    next_seq: u64,
    retained: VecDeque<Arc<Envelope>>,
    subscribers: Vec<Subscriber>,
    published: u64,
    delivered: u64,
    dropped_subscribers: u64,
}

struct Inner {
    config: BrokerConfig,
    topics: Vec<Mutex<TopicState>>,
    latency: Mutex<LatencyTracker>,
    closed: AtomicBool,
}

/// Cheap to clone; all clones share the same topics.
#[derive(Clone)]
pub struct Broker {
    inner: Arc<Inner>,
}

impl Default for Broker {
    fn default() -> Self {
        Broker::new(BrokerConfig::default())
    }
}

impl Broker {
    pub fn new(config: BrokerConfig) -> Self {
        let topics = Topic::ALL.iter().map(|_| Mutex::new(TopicState { next_seq: 1, ..Default::default() })).collect();
        Broker {
            inner: Arc::new(Inner {
                config: BrokerConfig { subscriber_buffer: config.subscriber_buffer.max(1), ..config },
                topics,
                latency: Mutex::new(LatencyTracker::default()),
                closed: AtomicBool::new(false),
            }),
        }
    }

    pub fn config(&self) -> &BrokerConfig {
        &self.inner.config
    }

    fn topic(&self, topic: Topic) -> MutexGuard<'_, TopicState> {
        self.inner.topics[topic.index()].lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn publish<T: Serialize>(&self, topic: Topic, payload: &T) -> Result<u64, GatewayError> {
        let value = serde_json::to_value(payload).map_err(|e| GatewayError::Schema {
            topic,
            path: String::new(),
            message: e.to_string(),
        })?;
        self.publish_value(topic, value)
    }

    /// Publish by topic name, as a remote client would.
    pub fn publish_named(&self, topic: &str, payload: serde_json::Value) -> Result<u64, GatewayError> {
        self.publish_value(topic.parse()?, payload)
    }

    /// Validate, assign the next seq and hand the envelope to every current
    /// subscriber. Rejected payloads leave the seq untouched.
    pub fn publish_value(&self, topic: Topic, payload: serde_json::Value) -> Result<u64, GatewayError> {
        if self.is_closed() {
            return Err(GatewayError::Closed);
        }
        topic.validate(&payload)?;
        let session_id = payload.get("session_id").and_then(|v| v.as_str()).unwrap_or_default().to_string();
        self.track_latency(topic, &session_id, &payload);

        let mut state = self.topic(topic);
        let seq = state.next_seq;
        state.next_seq += 1;
        state.published += 1;
        let env = Arc::new(Envelope { topic, seq, timestamp_ms: now_ms(), session_id, payload });
        if self.inner.config.retention > 0 {
            if state.retained.len() == self.inner.config.retention {
                state.retained.pop_front();
            }
            state.retained.push_back(env.clone());
        }

        let mut delivered = 0;
        let mut dropped = 0;
        state.subscribers.retain(|sub| match sub.tx.try_send(env.clone()) {
            Ok(()) => {
                delivered += 1;
                true
            }
            Err(mpsc::error::TrySendError::Full(_)) => {
                sub.overflowed.store(true, Ordering::Release);
                dropped += 1;
                false
            }
            Err(mpsc::error::TrySendError::Closed(_)) => false,
        });
        state.delivered += delivered;
        state.dropped_subscribers += dropped;
        if dropped > 0 {
            tracing::warn!(%topic, dropped, "disconnected slow subscribers");
        }
        Ok(seq)
    }

    fn track_latency(&self, topic: Topic, session: &str, payload: &serde_json::Value) {
        let key = match topic {
            Topic::EegEpoch => payload.get("epoch_index"),
            Topic::AdaptationConfig => payload.get("trigger_epoch"),
            _ => None,
        };
        let Some(epoch) = key.and_then(|v| v.as_u64()) else { return };
        let mut tracker = self.inner.latency.lock().unwrap_or_else(|e| e.into_inner());
        if topic == Topic::EegEpoch {
            tracker.mark(session, epoch);
        } else {
            tracker.observe(session, epoch);
        }
    }

    /// Live subscription, or with `from_seq` a replay of the retained backlog
    /// starting at that seq followed by live messages.
    pub fn subscribe(&self, topic: Topic, from_seq: Option<u64>) -> Result<Subscription, GatewayError> {
        if self.is_closed() {
            return Err(GatewayError::Closed);
        }
        let mut state = self.topic(topic);
        let mut backlog = Vec::new();
        let mut skip_below = 0;
        if let Some(from) = from_seq {
            let oldest = state.retained.front().map_or(state.next_seq, |e| e.seq);
            if from < oldest {
                return Err(GatewayError::Range { topic, requested: from, oldest });
            }
            backlog.extend(state.retained.iter().filter(|e| e.seq >= from).cloned());
            skip_below = from;
        }
        let (tx, rx) = mpsc::channel(self.inner.config.subscriber_buffer + backlog.len());
        for env in backlog {
            tx.try_send(env).expect("capacity covers the backlog");
        }
        let overflowed = Arc::new(AtomicBool::new(false));
        state.subscribers.push(Subscriber { tx, overflowed: overflowed.clone() });
        Ok(Subscription { topic, rx, overflowed, skip_below })
    }

    /// Reject further publishes and end every subscription once drained.
    pub fn close(&self) {
        self.inner.closed.store(true, Ordering::Release);
        for topic in Topic::ALL {
            self.topic(topic).subscribers.clear();
        }
    }

    pub fn is_closed(&self) -> bool {
        self.inner.closed.load(Ordering::Acquire)
    }

    pub fn metrics(&self) -> MetricsSnapshot {
        let topics = Topic::ALL
            .into_iter()
            .map(|topic| {
                let s = self.topic(topic);
                TopicMetrics {
                    topic,
                    published: s.published,
                    delivered: s.delivered,
                    subscribers: s.subscribers.iter().filter(|sub| !sub.tx.is_closed()).count(),
                    dropped_subscribers: s.dropped_subscribers,
                    retained: s.retained.len(),
                    next_seq: s.next_seq,
                }
            })
            .collect();
        let latency = self.inner.latency.lock().unwrap_or_else(|e| e.into_inner()).summary();
        MetricsSnapshot { topics, latency }
    }
}

pub struct Subscription {
    topic: Topic,
    rx: mpsc::Receiver<Arc<Envelope>>,
    overflowed: Arc<AtomicBool>,
    skip_below: u64,
}

impl Subscription {
    pub fn topic(&self) -> Topic {
        self.topic
    }

    /// `None` once the broker closed or this subscriber was disconnected for
    /// overflowing; [`Subscription::overflowed`] tells the two apart.
    pub async fn recv(&mut self) -> Option<Arc<Envelope>> {
        loop {
            let env = self.rx.recv().await?;
            if env.seq >= self.skip_below {
                return Some(env);
            }
        }
    }

    /// Blocking variant for use outside an async runtime.
    pub fn blocking_recv(&mut self) -> Option<Arc<Envelope>> {
        loop {
            let env = self.rx.blocking_recv()?;
            if env.seq >= self.skip_below {
                return Some(env);
            }
        }
    }

    pub fn try_recv(&mut self) -> Option<Arc<Envelope>> {
        loop {
            let env = self.rx.try_recv().ok()?;
            if env.seq >= self.skip_below {
                return Some(env);
            }
        }
    }

    pub fn overflowed(&self) -> bool {
        self.overflowed.load(Ordering::Acquire)
    }

    pub fn into_stream(self) -> impl Stream<Item = Arc<Envelope>> {
        futures::stream::unfold(self, |mut sub| async move { sub.recv().await.map(|env| (env, sub)) })
    }
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

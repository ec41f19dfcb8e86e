use std::collections::{HashMap, VecDeque};
use std::time::Instant;

use serde::Serialize;

use super::Topic;

/// Upper bucket edges in milliseconds; the last bucket is open-ended.
pub const LATENCY_BUCKETS_MS: [f64; 11] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0];

const MAX_PENDING: usize = 4096;
const MAX_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Serialize)]
pub struct TopicMetrics {
    pub topic: Topic,
    pub published: u64,
    pub delivered: u64,
    pub subscribers: usize,
    pub dropped_subscribers: u64,
    pub retained: usize,
    pub next_seq: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Bucket {
    /// `None` for the overflow bucket.
    pub le_ms: Option<f64>,
    pub count: u64,
}

/// Epoch publish to adaptation publish, matched on (session, epoch index).
#[derive(Debug, Clone, Serialize)]
pub struct LatencySummary {
    pub count: u64,
    pub p50_ms: Option<f64>,
    pub p99_ms: Option<f64>,
    pub max_ms: Option<f64>,
    pub histogram: Vec<Bucket>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsSnapshot {
    pub topics: Vec<TopicMetrics>,
    pub latency: LatencySummary,
}

impl MetricsSnapshot {
    pub fn topic(&self, topic: Topic) -> &TopicMetrics {
        &self.topics[topic.index()]
    }
}

#[derive(Default)]
pub(crate) struct LatencyTracker {
    pending: HashMap<(String, u64), Instant>,
    order: VecDeque<(String, u64)>,
    samples: VecDeque<f64>,
    buckets: [u64; LATENCY_BUCKETS_MS.len() + 1],
    count: u64,
}

impl LatencyTracker {
    pub(crate) fn mark(&mut self, session: &str, epoch: u64) {
        let key = (session.to_string(), epoch);
        if self.pending.insert(key.clone(), Instant::now()).is_none() {
            self.order.push_back(key);
        }
        while self.order.len() > MAX_PENDING {
            if let Some(old) = self.order.pop_front() {
                self.pending.remove(&old);
            }
        }
    }

    /// Only the first adaptation for an epoch counts.
    pub(crate) fn observe(&mut self, session: &str, epoch: u64) {
        if let Some(start) = self.pending.remove(&(session.to_string(), epoch)) {
            self.record(start.elapsed().as_secs_f64() * 1000.0);
        }
    }

    pub(crate) fn record(&mut self, ms: f64) {
        let bucket = LATENCY_BUCKETS_MS.iter().position(|&edge| ms <= edge).unwrap_or(LATENCY_BUCKETS_MS.len());
        self.buckets[bucket] += 1;
        self.count += 1;
        if self.samples.len() == MAX_SAMPLES {
            self.samples.pop_front();
        }
        self.samples.push_back(ms);
    }

    pub(crate) fn summary(&self) -> LatencySummary {
        let mut sorted: Vec<f64> = self.samples.iter().copied().collect();
        sorted.sort_by(f64::total_cmp);
        let histogram = self
            .buckets
            .iter()
            .enumerate()
            .map(|(i, &count)| Bucket { le_ms: LATENCY_BUCKETS_MS.get(i).copied(), count })
            .collect();
        LatencySummary {
            count: self.count,
            p50_ms: nearest_rank(&sorted, 0.50),
            p99_ms: nearest_rank(&sorted, 0.99),
            max_ms: sorted.last().copied(),
            histogram,
        }
    }
}

/// Nearest-rank percentile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (p * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EegEpoch, EpochSource, IngestError, EPOCH_SECONDS};
use crate::gateway::{Broker, GatewayError, Topic};

/// How fast epochs are emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pacing {
    /// One epoch per epoch length of wall clock.
    Realtime,
    Fixed(Duration),
    #[default]
    Unpaced,
}

impl Pacing {
    pub fn interval(self) -> Option<Duration> {
        match self {
            Pacing::Realtime => Some(Duration::from_secs(EPOCH_SECONDS as u64)),
            Pacing::Fixed(d) => Some(d),
            Pacing::Unpaced => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub attempts: u32,
    /// Doubled after every failed attempt.
    pub base_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { attempts: 5, base_backoff_ms: 50 }
    }
}

async fn publish_with_retry(broker: &Broker, epoch: &EegEpoch, retry: RetryPolicy) -> Result<u64, IngestError> {
    let mut backoff = Duration::from_millis(retry.base_backoff_ms);
    let mut attempt = 0;
    loop {
        attempt += 1;
        match broker.publish(Topic::EegEpoch, epoch) {
            Ok(seq) => return Ok(seq),
            Err(e @ GatewayError::Closed) if attempt < retry.attempts.max(1) => {
                tracing::warn!(attempt, error = %e, "gateway unavailable, backing off");
                tokio::time::sleep(backoff).await;
                backoff *= 2;
            }
            Err(GatewayError::Closed) => {
                return Err(IngestError::GatewayUnreachable { attempts: attempt, last_error: GatewayError::Closed.to_string() })
            }
            Err(e) => return Err(IngestError::InvalidEpoch(e.to_string())),
        }
    }
}

/// Publish every epoch from `source` on `biosignals.eeg.epoch` in order and
/// return how many were sent. Source errors stop the stream.
pub async fn publish_epochs<S: EpochSource>(
    source: S,
    broker: &Broker,
    pacing: Pacing,
    retry: RetryPolicy,
) -> Result<u64, IngestError> {
    publish_epochs_with(source, broker, pacing, retry, |_| Ok(())).await
}

/// As [`publish_epochs`], calling `before` just ahead of each publish (the
/// live loop uses it to announce questions).
pub async fn publish_epochs_with<S: EpochSource>(
    mut source: S,
    broker: &Broker,
    pacing: Pacing,
    retry: RetryPolicy,
    mut before: impl FnMut(&EegEpoch) -> Result<(), IngestError>,
) -> Result<u64, IngestError> {
    let mut ticker = pacing.interval().map(|d| {
        let mut t = tokio::time::interval(d);
        t.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        t
    });
    let mut sent = 0;
    let mut last_index: Option<u64> = None;
    while let Some(epoch) = source.next_epoch() {
        let epoch = epoch?;
        if let Some(prev) = last_index.filter(|&prev| epoch.epoch_index <= prev) {
            return Err(IngestError::InvalidEpoch(format!("epoch_index {} does not follow {prev}", epoch.epoch_index)));
        }
        if let Some(t) = ticker.as_mut() {
            t.tick().await;
        }
        before(&epoch)?;
        publish_with_retry(broker, &epoch, retry).await?;
        last_index = Some(epoch.epoch_index);
        sent += 1;
    }
    Ok(sent)
}

//! Temporal scoping: policies that decide when recalculation happens and
//! which rating window each run consumes.
//!
//! Four strategies are supported. `Lifetime` recomputes over the whole
//! history (with an exponential recency weighting) and therefore tolerates
//! backdated records; `Incremental` recalculates on every transaction;
//! `UpToDate` uses fixed calendar-like windows aligned to the origin so that
//! independent agencies produce identical windows; `BlockedIncremental` cuts
//! the stream into fixed-size transaction blocks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{compute_period, DifferentialResult, EngineError};
use crate::model::{EngineConfig, RatingRecord, ReputationState, Timestamp};

/// When and over which windows to recalculate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ScopingPolicy {
    /// One full recomputation over all ratings, each weighted by
    /// `2^(-(t_n - t) / half_life)`. An absent half-life means no decay.
    Lifetime {
        #[serde(default = "no_decay")]
        half_life: f64,
    },
    /// One window per transaction time.
    Incremental,
    /// Fixed-width windows of `window` ticks aligned to the origin.
    UpToDate { window: u64 },
    /// Windows of `block_size` consecutive transactions.
    BlockedIncremental { block_size: usize },
}

fn no_decay() -> f64 {
    f64::INFINITY
}

impl ScopingPolicy {
    pub fn validate(&self) -> Result<(), ScopingError> {
        match *self {
            ScopingPolicy::Lifetime { half_life } => {
                if !(half_life > 0.0) {
                    return Err(ScopingError::InvalidHalfLife(half_life));
                }
            }
            ScopingPolicy::Incremental => {}
            ScopingPolicy::UpToDate { window } => {
                if window == 0 {
                    return Err(ScopingError::InvalidWindow);
                }
            }
            ScopingPolicy::BlockedIncremental { block_size } => {
                if block_size == 0 {
                    return Err(ScopingError::InvalidBlockSize);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScopingError {
    #[error("records are not sorted by (time, from, to, kind) at index {0}")]
    UnsortedInput(usize),
    #[error("record at index {index} is timestamped {time}, not after origin {origin}")]
    RecordBeforeOrigin {
        index: usize,
        time: Timestamp,
        origin: Timestamp,
    },
    #[error("up-to-date window must be at least 1 tick")]
    InvalidWindow,
    #[error("block size must be at least 1")]
    InvalidBlockSize,
    #[error("lifetime half-life {0} must be positive")]
    InvalidHalfLife(f64),
}

/// One recalculation window: the period end and the records it consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Window<'a> {
    pub end: Timestamp,
    pub records: &'a [RatingRecord],
}

fn check_stream(
    records: &[RatingRecord],
    origin: Timestamp,
) -> Result<(), ScopingError> {
    for (i, r) in records.iter().enumerate() {
        if r.time <= origin {
            return Err(ScopingError::RecordBeforeOrigin {
                index: i,
                time: r.time,
                origin,
            });
        }
        if i > 0 && records[i - 1].sort_key() > r.sort_key() {
            return Err(ScopingError::UnsortedInput(i));
        }
    }
    Ok(())
}

/// Split a time-ordered record stream into recalculation windows.
///
/// Every record lands in exactly one window and window ends strictly
/// increase. `UpToDate` emits empty windows for gaps so that no-evidence
/// decay still runs; the record-defined modes cannot produce empty windows.
/// Records sharing a tick never straddle a window boundary: `Incremental`
/// folds them into one window and `BlockedIncremental` extends a block until
/// the tick changes.
pub fn partition<'a>(
    records: &'a [RatingRecord],
    policy: &ScopingPolicy,
    origin: Timestamp,
) -> Result<Vec<Window<'a>>, ScopingError> {
    policy.validate()?;
    check_stream(records, origin)?;
    if records.is_empty() {
        return Ok(Vec::new());
    }

    let windows = match *policy {
        ScopingPolicy::Lifetime { .. } => vec![Window {
            end: records[records.len() - 1].time,
            records,
        }],
        ScopingPolicy::Incremental => {
            let mut out = Vec::new();
            let mut start = 0;
            for i in 1..=records.len() {
                if i == records.len() || records[i].time != records[start].time {
                    out.push(Window {
                        end: records[start].time,
                        records: &records[start..i],
                    });
                    start = i;
                }
            }
            out
        }
        ScopingPolicy::UpToDate { window } => {
            let index_of = |t: Timestamp| (t.ticks() - origin.ticks() - 1) / window;
            let last_index = index_of(records[records.len() - 1].time);
            let mut out = Vec::new();
            let mut start = 0;
            for idx in 0..=last_index {
                let end = Timestamp(origin.ticks() + (idx + 1) * window);
                let mut stop = start;
                while stop < records.len() && index_of(records[stop].time) == idx {
                    stop += 1;
                }
                out.push(Window {
                    end,
                    records: &records[start..stop],
                });
                start = stop;
            }
            out
        }
        ScopingPolicy::BlockedIncremental { block_size } => {
            let mut out = Vec::new();
            let mut start = 0;
            while start < records.len() {
                let mut stop = (start + block_size).min(records.len());
                // never split records that share the block's closing tick
                while stop < records.len() && records[stop].time == records[stop - 1].time {
                    stop += 1;
                }
                out.push(Window {
                    end: records[stop - 1].time,
                    records: &records[start..stop],
                });
                start = stop;
            }
            out
        }
    };
    Ok(windows)
}

/// The state and differential produced by one window of a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowOutcome {
    pub end: Timestamp,
    pub state: ReputationState,
    pub differential: DifferentialResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleOutcome {
    pub final_state: ReputationState,
    pub windows: Vec<WindowOutcome>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error(transparent)]
    Scoping(#[from] ScopingError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Run the engine over a full record stream under a scoping policy,
/// starting from an empty state anchored at `origin`.
///
/// Non-lifetime modes fold [`compute_period`] over the partition. Lifetime
/// mode performs a single full recomputation in which each record's weight is
/// additionally multiplied by `2^(-(t_n - t) / half_life)`; re-running it
/// after inserting a backdated record is equivalent to having received the
/// record in order.
pub fn run_schedule(
    records: &[RatingRecord],
    policy: &ScopingPolicy,
    config: &EngineConfig,
    origin: Timestamp,
) -> Result<ScheduleOutcome, ScheduleError> {
    config.validate().map_err(EngineError::Config)?;
    let windows = partition(records, policy, origin)?;
    let mut state = ReputationState::genesis(origin);
    let mut log = Vec::with_capacity(windows.len());

    if let ScopingPolicy::Lifetime { half_life } = *policy {
        if let Some(window) = windows.first() {
            let t_n = window.end;
            let weighted: Vec<RatingRecord> = window
                .records
                .iter()
                .map(|r| {
                    let age = t_n.since(r.time) as f64;
                    let mut r = r.clone();
                    r.weight *= (-age / half_life).exp2();
                    r
                })
                .collect();
            let out = compute_period(&weighted, &state, t_n, config)?;
            state = out.state.clone();
            log.push(WindowOutcome {
                end: t_n,
                state: out.state,
                differential: out.differential,
            });
        }
        return Ok(ScheduleOutcome {
            final_state: state,
            windows: log,
        });
    }

    for window in &windows {
        let out = compute_period(window.records, &state, window.end, config)?;
        state = out.state.clone();
        log.push(WindowOutcome {
            end: window.end,
            state: out.state,
            differential: out.differential,
        });
    }
    Ok(ScheduleOutcome {
        final_state: state,
        windows: log,
    })
}

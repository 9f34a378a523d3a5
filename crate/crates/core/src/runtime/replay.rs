use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{InteractionEvent, LoggedEvent, RuntimeError, SessionState};

/// One line of a session log.
///
/// `Tick` means "advance until `tick_index` equals `tick`". Writers emit one
/// after each executed tick, but a log with gaps replays the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    Event {
        ordinal: u64,
        tick: u64,
        event: InteractionEvent,
    },
    Tick {
        tick: u64,
    },
}

impl From<&LoggedEvent> for LogRecord {
    fn from(e: &LoggedEvent) -> Self {
        LogRecord::Event {
            ordinal: e.ordinal,
            tick: e.tick,
            event: e.event.clone(),
        }
    }
}

impl LogRecord {
    pub fn tick(&self) -> u64 {
        match self {
            LogRecord::Event { tick, .. } | LogRecord::Tick { tick } => *tick,
        }
    }
}

/// Replays `records` onto `session`, ticking up to each record's tick before
/// applying it. Ordinals must strictly increase and ticks must never go
/// down, otherwise the log is rejected before anything runs.
pub fn replay(session: SessionState, records: &[LogRecord]) -> Result<SessionState, RuntimeError> {
    check_monotonic(&session, records)?;
    let mut s = session;
    for r in records {
        while s.tick_index() < r.tick() {
            s.tick()?;
        }
        if let LogRecord::Event { ordinal, event, .. } = r {
            s.apply_event_with_ordinal(*ordinal, event.clone())?;
        }
    }
    Ok(s)
}

fn check_monotonic(s: &SessionState, records: &[LogRecord]) -> Result<(), RuntimeError> {
    let mut last_ordinal = s.event_log().last().map_or(0, |e| e.ordinal);
    let mut last_tick = s.tick_index();
    for (index, r) in records.iter().enumerate() {
        if r.tick() < last_tick {
            return Err(RuntimeError::NonMonotonicLog { index });
        }
        last_tick = r.tick();
        if let LogRecord::Event { ordinal, .. } = r {
            if *ordinal <= last_ordinal {
                return Err(RuntimeError::NonMonotonicLog { index });
            }
            last_ordinal = *ordinal;
        }
    }
    Ok(())
}

/// Every record needed to rebuild `s` from a fresh load.
pub fn records_of(s: &SessionState) -> Vec<LogRecord> {
    let mut out = Vec::new();
    let mut tick = 0;
    for e in s.event_log() {
        if e.tick > tick {
            tick = e.tick;
            out.push(LogRecord::Tick { tick });
        }
        out.push(LogRecord::from(e));
    }
    if s.tick_index() > tick {
        out.push(LogRecord::Tick {
            tick: s.tick_index(),
        });
    }
    out
}

//! Trial execution.
//!
//! Experiments describe one trial as a function of its index and let an
//! executor run them. Results always come back in index order, so a
//! parallel executor produces the same report as the sequential one.

use alloc::vec::Vec;

pub trait TrialExecutor: Sync {
    fn map<T, F>(&self, trials: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;
}

/// Runs trials one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl TrialExecutor for Sequential {
    fn map<T, F>(&self, trials: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        (0..trials).map(f).collect()
    }
}

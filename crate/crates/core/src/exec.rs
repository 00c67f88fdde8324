//! Execution-mode switch for the data-parallel inner loops.
//!
//! Independent units of work (ABC forward simulations, grid cells,
//! multi-seed fits) run either sequentially or on the rayon pool. The
//! `parallel` cargo feature controls whether rayon is compiled in at all;
//! with the feature disabled, [`ExecMode::Parallel`] silently degrades to
//! sequential execution so callers never need to care.
//!
//! Results are always returned in input order, so the two modes are
//! bit-for-bit interchangeable.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How to run a batch of independent work items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    /// Plain in-order iteration on the calling thread.
    Sequential,
    /// Rayon work-stealing pool (requires the `parallel` feature; falls
    /// back to sequential otherwise).
    #[default]
    Parallel,
}

impl ExecMode {
    /// Whether this mode will actually fan out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

/// Map `f` over `0..n`, collecting results in index order.
pub fn map_indexed<R, F>(mode: ExecMode, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// Fallible variant of [`map_indexed`]; short-circuits on the first error
/// (in parallel mode some later items may already have run).
pub fn try_map_indexed<R, E, F>(mode: ExecMode, n: usize, f: F) -> Result<Vec<R>, E>
where
    R: Send,
    E: Send,
    F: Fn(usize) -> Result<R, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_preserve_order() {
        let seq = map_indexed(ExecMode::Sequential, 100, |i| i * i);
        let par = map_indexed(ExecMode::Parallel, 100, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq[7], 49);
    }

    #[test]
    fn try_map_propagates_errors() {
        let r: Result<Vec<usize>, String> = try_map_indexed(ExecMode::Parallel, 10, |i| {
            if i == 5 {
                Err("boom".to_string())
            } else {
                Ok(i)
            }
        });
        assert!(r.is_err());
    }
}

/// Cooperative wall-clock limit checked inside long-running fits.
#[derive(Debug, Clone, Copy)]
pub struct Deadline(std::time::Instant);

impl Deadline {
    pub fn after(limit: std::time::Duration) -> Self {
        Deadline(std::time::Instant::now() + limit)
    }

    pub fn after_secs(secs: f64) -> Self {
        Deadline::after(std::time::Duration::from_secs_f64(secs))
    }

    pub fn expired(&self) -> bool {
        std::time::Instant::now() >= self.0
    }
}

/// `Ok` unless the optional deadline has passed.
pub fn check_deadline(deadline: Option<Deadline>) -> crate::Result<()> {
    match deadline {
        Some(d) if d.expired() => Err(crate::CoreError::Timeout),
        _ => Ok(()),
    }
}

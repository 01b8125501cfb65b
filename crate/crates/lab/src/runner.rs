//! Thread-per-batch execution of the core's Monte-Carlo batches.

use skewtorus_core::measure::BatchRunner;

/// Runs every job on its own scoped thread.
///
/// Results come back in job order, and each job owns its random stream, so
/// the output equals that of [`skewtorus_core::measure::Sequential`].
#[derive(Clone, Copy, Debug, Default)]
pub struct Threaded;

impl BatchRunner for Threaded {
    fn run<T, F>(&self, jobs: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        if jobs <= 1 {
            return (0..jobs).map(&job).collect();
        }
        let job = &job;
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..jobs).map(|w| s.spawn(move || job(w))).collect();
            handles.into_iter().map(|h| h.join().expect("batch thread panicked")).collect()
        })
    }
}

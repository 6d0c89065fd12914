//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (default) the batch helpers fan out over
//! rayon's pool. Without it, or when [`Execution::Sequential`] is requested,
//! they run in order on the calling thread. Results are always returned in
//! input order, so callers see identical output either way.

/// How batch work is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Apply `f` to every item, handing each finished result to `sink` as it
    /// completes. `sink` runs under a lock, so it is the single writer.
    pub fn for_each_with_sink<T, R, F, S>(self, items: &[T], f: F, sink: S)
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
        S: FnMut(R) + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                let sink = std::sync::Mutex::new(sink);
                items.par_iter().for_each(|item| {
                    let r = f(item);
                    let mut guard = sink.lock().unwrap_or_else(|e| e.into_inner());
                    (guard)(r);
                });
            }
            _ => {
                let mut sink = sink;
                for item in items {
                    sink(f(item));
                }
            }
        }
    }
}

/// Run `op` inside a pool limited to `jobs` threads (0 = rayon default).
pub fn with_jobs<R: Send>(jobs: usize, op: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if jobs > 0 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
                return pool.install(op);
            }
        }
        op()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        op()
    }
}

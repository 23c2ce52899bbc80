//! Data-parallel trial execution with a sequential fallback.
//!
//! Every Monte-Carlo loop in the crate is indexed: trial `i` derives its own
//! seed, computes independently, and results are collected in index order.
//! That makes the parallel and sequential paths return identical bytes, so
//! the `parallel` feature only changes wall-clock time.

/// Map `f` over `0..count`, in parallel when the `parallel` feature is
/// enabled, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn run_indexed<T: Send>(count: usize, f: impl Fn(usize) -> T + Send + Sync) -> Vec<T> {
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_indexed<T: Send>(count: usize, f: impl Fn(usize) -> T + Send + Sync) -> Vec<T> {
    run_indexed_seq(count, f)
}

/// Sequential variant, always available; the bench suite compares the two.
pub fn run_indexed_seq<T: Send>(count: usize, f: impl Fn(usize) -> T + Send + Sync) -> Vec<T> {
    (0..count).map(f).collect()
}

/// Size the global worker pool (e.g. from an env override). Results do not
/// depend on the thread count; this only affects wall-clock time. Calling
/// it more than once, or after the pool started, is a silent no-op.
#[cfg(feature = "parallel")]
pub fn configure_threads(threads: usize) {
    if threads == 0 {
        return;
    }
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_threads: usize) {}

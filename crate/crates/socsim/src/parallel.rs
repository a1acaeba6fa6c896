//! Data-parallel execution of independent experiment points.
//!
//! Every sweep point owns its state and derives its RNG from (seed, index),
//! so parallel and sequential execution produce identical results; outputs
//! are collected in input order either way. The `parallel` feature selects
//! rayon for `map_points`; the sequential path stays available for
//! comparison and benchmarking.

/// Map `f` over points, in parallel when the `parallel` feature is enabled.
/// Result order always matches input order.
pub fn map_points<I, T, F>(points: Vec<I>, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        points.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        points.into_iter().map(f).collect()
    }
}

/// Always-sequential twin of `map_points`.
pub fn map_points_sequential<I, T, F>(points: Vec<I>, f: F) -> Vec<T>
where
    F: Fn(I) -> T,
{
    points.into_iter().map(f).collect()
}

//! Aligns independent schemes on a worker pool.

use rayon::prelude::*;
use subalign_core::bpe::SegmentationScheme;
use subalign_core::corpus::AlignmentSet;
use subalign_core::optimizer::SchemeAligner;

/// Runs batches of schemes on `workers` threads. Results come back in input
/// order, so output does not depend on scheduling.
pub struct ParallelSchemes<S> {
    inner: S,
    pool: rayon::ThreadPool,
}

impl<S: SchemeAligner + Sync> ParallelSchemes<S> {
    pub fn new(inner: S, workers: usize) -> crate::Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| crate::Error::Usage(format!("cannot start {workers} workers: {e}")))?;
        Ok(Self { inner, pool })
    }
}

impl<S: SchemeAligner + Sync> SchemeAligner for ParallelSchemes<S> {
    fn align_scheme(&self, scheme: SegmentationScheme) -> subalign_core::Result<AlignmentSet> {
        self.inner.align_scheme(scheme)
    }

    fn align_schemes(&self, schemes: &[SegmentationScheme]) -> Vec<subalign_core::Result<AlignmentSet>> {
        if self.pool.current_num_threads() <= 1 {
            return self.inner.align_schemes(schemes);
        }
        self.pool.install(|| schemes.par_iter().map(|&s| self.inner.align_scheme(s)).collect())
    }
}

//! Probabilistic content placement: each SBS caches the requested content
//! independently with probability `c_f`.

use rand::Rng;

use crate::geometry::PointSet;
use crate::num::Real;
use crate::params::SystemParams;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CachePartition<T> {
    /// In-cluster SBSs holding the content; these serve jointly.
    pub caching_in: PointSet<T>,
    /// In-cluster SBSs without the content; these interfere.
    pub noncaching_in: PointSet<T>,
    /// Every SBS outside the collaboration disk.
    pub all_out: PointSet<T>,
}

/// Probability that exactly `kappa` caching SBSs fall inside the cluster.
pub fn caching_count_pmf<T: Real>(kappa: usize, p: &SystemParams<T>) -> T {
    poisson_pmf(kappa, p.mean_cache_count())
}

pub(crate) fn poisson_pmf<T: Real>(kappa: usize, mean: T) -> T {
    if mean <= T::zero() {
        return if kappa == 0 { T::one() } else { T::zero() };
    }
    let k = T::from_usize_lossy(kappa);
    (k * mean.ln() - mean - ln_factorial(kappa)).exp()
}

pub(crate) fn ln_factorial<T: Real>(n: usize) -> T {
    T::lit(statrs::function::factorial::ln_factorial(n as u64))
}

/// Independent thinning of in-cluster points into caching / non-caching sets.
pub fn thin_in_cluster<T: Real, R: Rng + ?Sized>(
    points: &PointSet<T>,
    c_f: T,
    rng: &mut R,
) -> CachePartition<T> {
    let mut caching = Vec::new();
    let mut non = Vec::new();
    let c = c_f.as_f64();
    for r in points.iter() {
        // c_f = 1 and c_f = 0 never consume randomness
        let keep = if c >= 1.0 {
            true
        } else if c <= 0.0 {
            false
        } else {
            rng.random::<f64>() < c
        };
        if keep {
            caching.push(r);
        } else {
            non.push(r);
        }
    }
    CachePartition {
        caching_in: PointSet::new(caching),
        noncaching_in: PointSet::new(non),
        all_out: PointSet::empty(),
    }
}

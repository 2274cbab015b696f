//! Single-Gamma approximation of the CoMP desired-signal power.

use crate::error::{Error, Result};
use crate::num::{KahanSum, Real};
use crate::params::SystemParams;

/// Gamma law matched to `Σ ζ_i ω_i²` on its first two moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaApprox<T> {
    /// Matched (real) shape.
    pub k_eq: T,
    /// Integer shape bound `m κ >= k_eq`.
    pub k_int: usize,
    /// Matched scale.
    pub theta: T,
}

impl<T: Real> GammaApprox<T> {
    pub fn mean(&self) -> T {
        self.k_eq * self.theta
    }

    pub fn variance(&self) -> T {
        self.k_eq * self.theta * self.theta
    }
}

/// Each `ζ_i ω_i²` is Gamma(m, η ζ_i / m); the sum is replaced by
/// Gamma(k_eq, θ) with `k_eq = m (Σζ)² / Σζ²` and `θ = (η/m) Σζ² / Σζ`.
pub fn moment_match_gamma<T: Real>(zetas: &[T], p: &SystemParams<T>) -> Result<GammaApprox<T>> {
    if zetas.is_empty() {
        return Err(Error::Domain("moment matching needs at least one server".into()));
    }
    if let Some(z) = zetas.iter().find(|z| !(**z > T::zero() && z.is_finite())) {
        return Err(Error::Domain(format!("path gain {z} is not positive")));
    }
    let (k_eq, theta) = match_shape_scale(zetas, p.m_nakagami, p.eta_spread);
    Ok(GammaApprox {
        k_eq,
        k_int: p.m_nakagami as usize * zetas.len(),
        theta,
    })
}

#[inline]
pub(crate) fn match_shape_scale<T: Real>(zetas: &[T], m: u32, eta: T) -> (T, T) {
    let mut s1 = KahanSum::new();
    let mut s2 = KahanSum::new();
    for &z in zetas {
        s1.add(z);
        s2.add(z * z);
    }
    let (s1, s2) = (s1.value(), s2.value());
    let m = T::from_u32(m).unwrap();
    (m * s1 * s1 / s2, eta / m * s2 / s1)
}

/// `P(J > x)` for `J ~ Gamma(k_int, θ)` with integer shape:
/// `Σ_{j<k} (x/θ)^j / j! · e^{-x/θ}`.
pub fn gamma_ccdf_series<T: Real>(x: T, k_int: usize, theta: T) -> T {
    assert!(k_int >= 1, "integer shape must be >= 1");
    if x <= T::zero() {
        return T::one();
    }
    let z = x / theta;
    if z.is_infinite() {
        return T::zero();
    }
    // terms e^{-z} z^j / j! peak near j = z; sum in log space from the largest
    let ln_z = z.ln();
    let mut ln_terms = Vec::with_capacity(k_int);
    let mut ln_t = -z;
    for j in 0..k_int {
        if j > 0 {
            ln_t = ln_t + ln_z - T::from_usize_lossy(j).ln();
        }
        ln_terms.push(ln_t);
    }
    let peak = ln_terms.iter().copied().fold(T::neg_infinity(), T::max);
    if peak < T::lit(-745.0) {
        return T::zero();
    }
    let mut acc = KahanSum::new();
    for t in ln_terms {
        acc.add((t - peak).exp());
    }
    (peak.exp() * acc.value()).min(T::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_nakagami_power;
    use crate::rng::substream;

    fn params() -> SystemParams<f64> {
        SystemParams::table_i()
    }

    #[test]
    fn equal_gains_match_exactly() {
        let p = params();
        let z = 3.2e-9;
        let g = moment_match_gamma(&[z; 4], &p).unwrap();
        assert!((g.k_eq - 12.0).abs() < 1e-12);
        assert_eq!(g.k_int, 12);
        assert!((g.theta / (2.0 * z / 3.0) - 1.0).abs() < 1e-12);
        let g1 = moment_match_gamma(&[z], &p).unwrap();
        assert!((g1.k_eq - 3.0).abs() < 1e-12);
        assert!((g1.theta / (2.0 * z / 3.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_or_nonpositive_is_error() {
        let p = params();
        assert!(moment_match_gamma::<f64>(&[], &p).is_err());
        assert!(moment_match_gamma(&[1e-9, 0.0], &p).is_err());
    }

    #[test]
    fn first_moment_preserved_and_shape_bounded() {
        let p = params();
        let zs = [5.4e-9, 1.1e-9, 3.0e-10, 7.7e-11];
        let g = moment_match_gamma(&zs, &p).unwrap();
        let total: f64 = zs.iter().sum();
        assert!((g.mean() / (p.eta_spread * total) - 1.0).abs() < 1e-14);
        assert!(g.k_eq <= g.k_int as f64);
    }

    #[test]
    fn matched_moments_agree_with_fading_draws() {
        let p = params();
        let zs = [4.1e-9, 9.5e-10, 2.2e-9];
        let g = moment_match_gamma(&zs, &p).unwrap();
        let mut rng = substream(31, 0);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                zs.iter()
                    .map(|z| z * sample_nakagami_power(p.m_nakagami, p.eta_spread, &mut rng))
                    .sum()
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean / g.mean() - 1.0).abs() < 0.01);
        assert!((var / g.variance() - 1.0).abs() < 0.01);
    }

    #[test]
    fn series_edge_cases() {
        assert_eq!(gamma_ccdf_series(0.0, 5, 1.0), 1.0);
        for x in [0.1, 1.0, 7.5] {
            assert!((gamma_ccdf_series(x, 1, 2.0_f64) - (-x / 2.0).exp()).abs() < 1e-15);
        }
        assert_eq!(gamma_ccdf_series(1e6, 3, 1.0_f64), 0.0);
        let far = gamma_ccdf_series(850.0, 40, 1.0_f64);
        assert!(far > 0.0 && far < 1e-300);
        let f = gamma_ccdf_series(9.0_f32, 9, 1.0);
        assert!((f - 0.455_652_6).abs() < 1e-5);
    }
}

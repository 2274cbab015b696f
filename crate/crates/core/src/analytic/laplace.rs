//! Laplace transform of the aggregate interference and its derivatives.
//!
//! With `L(ϖ) = exp(S(ϖ))`, the exponent is a sum over the in-cluster
//! non-caching field on `[0, R_c]` and the out-of-cluster field beyond `R_c`:
//!
//! ```text
//! S(ϖ) = -Σ_regions 2πλ ∫ Σ_{b∈{LoS,NLoS}} P_b(v) (1 - δ_b(v, ϖ)) v dv,
//! δ_b = (1 + c_b ϖ)^-m,   c_b = η P_t ζ_b(v) / m.
//! ```
//!
//! Derivatives of every order come from one quadrature pass because the
//! kernel derivatives are closed-form. Two normalisations are offered: raw
//! derivatives `S^(j)(ϖ)`, and the scaled terms `s_j = (-ϖ)^j / j! · S^(j)(ϖ)`,
//! which are non-negative for `j >= 1` and never underflow at high order.

use crate::channel::LinkModel;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::params::{BlockageDenominator, SystemParams};

use super::quadrature::{integrate_panels, ErrorNorm, VectorIntegrand};

/// Derivatives of the interference Laplace transform at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceEval<T> {
    pub varpi: T,
    /// `[L(ϖ), L'(ϖ), …, L^(n)(ϖ)]`.
    pub values: Vec<T>,
    /// `[S(ϖ), S'(ϖ), …, S^(n)(ϖ)]` with `L = exp(S)`.
    pub exponent_derivs: Vec<T>,
}

/// Source of the scaled exponent terms `s_0 = S(ϖ)`, `s_j = (-ϖ)^j/j! S^(j)(ϖ)`.
pub trait LaplaceExponents<T>: Sync {
    fn scaled_exponents(&self, varpi: T, n_terms: usize) -> Result<Vec<T>>;
}

/// Interference that is a known constant `I₀`: `L(ϖ) = e^{-ϖ I₀}`.
#[derive(Debug, Clone, Copy)]
pub struct FixedInterference<T>(pub T);

impl<T: Real> LaplaceExponents<T> for FixedInterference<T> {
    fn scaled_exponents(&self, varpi: T, n_terms: usize) -> Result<Vec<T>> {
        let mut s = vec![T::zero(); n_terms];
        if n_terms > 0 {
            s[0] = -varpi * self.0;
        }
        if n_terms > 1 {
            s[1] = varpi * self.0;
        }
        Ok(s)
    }
}

/// PPP interference field seen by one receiver.
#[derive(Debug, Clone)]
pub struct InterferenceField<T> {
    link: LinkModel<T>,
    m: u32,
    /// `η P_t / m`.
    coef: T,
    r_cluster: T,
    /// `2π λ` inside and outside the cluster, per m².
    weight_in: T,
    weight_out: T,
    outer: T,
    /// Whether the field continues beyond `outer` (tail bound applies).
    unbounded: bool,
    breakpoints: Vec<T>,
    tol: T,
}

#[derive(Clone, Copy)]
enum Kernel {
    Scaled,
    Raw,
}

struct Integrand<'a, T> {
    field: &'a InterferenceField<T>,
    varpi: T,
    dim: usize,
    kernel: Kernel,
}

impl<T: Real> InterferenceField<T> {
    /// Field seen by the aerial receiver at `p.h_ue`, in-cluster intensity
    /// `(1 - c_f) λ_b`, integrated to `v_max` with a bound on the remainder.
    pub fn new(p: &SystemParams<T>) -> Self {
        Self::with_in_cluster_intensity(p, p.lambda_noncaching_m2())
    }

    /// As [`Self::new`] with an explicit in-cluster interferer intensity per m².
    pub fn with_in_cluster_intensity(p: &SystemParams<T>, lambda_in: T) -> Self {
        Self::build(p, p.h_ue, p.m_nakagami, lambda_in, p.numerics.v_max, true)
    }

    /// Field restricted to the disk of radius `outer`, with no remainder.
    pub fn truncated(p: &SystemParams<T>, lambda_in: T, outer: T) -> Self {
        Self::build(p, p.h_ue, p.m_nakagami, lambda_in, outer, false)
    }

    fn build(p: &SystemParams<T>, h_rx: T, m: u32, lambda_in: T, outer: T, unbounded: bool) -> Self {
        let link = LinkModel::new(p, h_rx, outer);
        let two_pi = T::lit(2.0) * T::PI();
        let mut breakpoints = vec![T::zero(), p.r_cluster.min(outer), outer];
        breakpoints.extend(link.gain_breakpoints().into_iter().filter(|&r| r < outer));
        // LoS probability is constant between building crossings
        let mut count = 1usize;
        loop {
            let r = link.crossing_distance(count);
            if r >= outer || link.los_probability(r) == T::zero() {
                if r < outer {
                    breakpoints.push(r);
                }
                break;
            }
            breakpoints.push(r);
            count += 1;
        }
        breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breakpoints.dedup();
        Self {
            link,
            m,
            coef: p.eta_spread * p.p_tx / T::from_u32(m).unwrap(),
            r_cluster: p.r_cluster,
            weight_in: two_pi * lambda_in,
            weight_out: two_pi * p.lambda_out_m2(),
            outer,
            unbounded,
            breakpoints,
            tol: p.numerics.quad_tolerance,
        }
    }

    pub fn outer_radius(&self) -> T {
        self.outer
    }

    pub fn link(&self) -> &LinkModel<T> {
        &self.link
    }

    fn integrate(&self, varpi: T, dim: usize, kernel: Kernel) -> Result<Vec<T>> {
        let f = Integrand {
            field: self,
            varpi,
            dim,
            kernel,
        };
        // scaled terms only ever enter as a nonnegative measure, so their
        // summed error is what matters; raw derivatives are checked one by one
        let norm = match kernel {
            Kernel::Scaled => ErrorNorm::L1,
            Kernel::Raw => ErrorNorm::PerComponent,
        };
        let r = integrate_panels(&f, &self.breakpoints, self.tol, norm);
        let slack = self.tol * T::lit(10.0);
        let bad = match norm {
            ErrorNorm::L1 => {
                let sum = |v: &[T]| v.iter().fold(T::zero(), |a, x| a + x.abs());
                sum(&r.abs_err) > slack * sum(&r.values) && sum(&r.abs_err) > T::min_positive_value()
            }
            ErrorNorm::PerComponent => r
                .values
                .iter()
                .zip(&r.abs_err)
                .take(2)
                .any(|(v, e)| *e > slack * v.abs() && *e > T::min_positive_value()),
        };
        if bad {
            return Err(Error::Accuracy(format!(
                "interference quadrature did not reach relative tolerance {} at varpi = {varpi}",
                self.tol
            )));
        }
        let residual = self.tail_bound(varpi);
        if residual > self.tol {
            return Err(Error::Accuracy(format!(
                "interference beyond v_max = {} m is uncertain by up to {residual:e} in the Laplace \
                 exponent (tolerance {}); increase v_max",
                self.outer, self.tol
            )));
        }
        let mut values = r.values;
        let rate = self.tail_rate();
        values[0] = values[0] + rate * varpi;
        if dim > 1 {
            values[1] = values[1]
                + match kernel {
                    Kernel::Scaled => rate * varpi,
                    Kernel::Raw => -rate,
                };
        }
        Ok(values)
    }

    /// Scaled exponent terms `s_0..s_{n_terms-1}`.
    pub fn scaled_exponents(&self, varpi: T, n_terms: usize) -> Result<Vec<T>> {
        let n_terms = n_terms.max(1);
        if varpi <= T::zero() {
            return Ok(vec![T::zero(); n_terms]);
        }
        let mut v = self.integrate(varpi, n_terms, Kernel::Scaled)?;
        v[0] = -v[0];
        Ok(v)
    }

    /// `[S(ϖ), S'(ϖ), …, S^(n)(ϖ)]`.
    pub fn exponent_derivatives(&self, varpi: T, n: usize) -> Result<Vec<T>> {
        if varpi < T::zero() {
            return Err(Error::Domain(format!("varpi must be >= 0 (got {varpi})")));
        }
        let mut v = self.integrate(varpi, n + 1, Kernel::Raw)?;
        v[0] = -v[0];
        Ok(v)
    }

    /// First-order estimate of `|S(ϖ)|` from interferers beyond the outer
    /// radius: every far link is taken as NLoS and `1 - δ ≈ m c ϖ`.
    ///
    /// The same amount enters `s_1`; higher scaled terms are second order.
    pub fn tail_estimate(&self, varpi: T) -> T {
        if varpi <= T::zero() {
            return T::zero();
        }
        self.tail_rate() * varpi
    }

    fn tail_rate(&self) -> T {
        if !self.unbounded || self.weight_out == T::zero() {
            return T::zero();
        }
        let p = self.link.params();
        self.weight_out * p.eta_spread * p.p_tx * self.far_gain() * p.a_nlos * power_tail(self.outer, p.alpha_nlos)
    }

    /// Bound on the error left after adding [`Self::tail_estimate`], for
    /// `S(ϖ)` and for every scaled term.
    pub fn tail_bound(&self, varpi: T) -> T {
        if !self.unbounded || varpi <= T::zero() || self.weight_out == T::zero() {
            return T::zero();
        }
        let p = self.link.params();
        let v = self.outer;
        let mf = T::from_u32(self.m).unwrap();
        let g_max = p.g_main.max(p.g_side);
        // 1 - δ_b <= m c_b ϖ = η P_t ζ_b ϖ, and d >= v
        let lead = self.weight_out * varpi * p.eta_spread * p.p_tx * g_max;
        let los = |alpha: T| power_tail(v, alpha).min(self.geometric_los_tail(v, alpha));
        let blocked = lead * (p.a_los * los(p.alpha_los) + p.a_nlos * los(p.alpha_nlos));
        // 0 <= m x - (1 - (1+x)^-m) <= m(m+1)/2 x², likewise for the order-1 term
        let x_coef = varpi * self.coef * g_max * p.a_nlos;
        let second = self.weight_out * mf * (mf + T::one()) * x_coef * x_coef
            * power_tail(v, T::lit(2.0) * p.alpha_nlos);
        // the estimate uses u^-α for d^-α and the far-field gain everywhere
        let dh = self.link.h_rx() - p.h_sbs;
        let slant = self.tail_estimate(varpi) * p.alpha_nlos * dh * dh / (v * v);
        let gain_gap = if self.link.gain_breakpoints().iter().any(|&b| b >= v) {
            self.tail_estimate(varpi) * g_max / self.far_gain()
        } else {
            T::zero()
        };
        blocked + second + slant + gain_gap
    }

    fn far_gain(&self) -> T {
        self.link.gain(self.outer * T::lit(2.0))
    }

    /// `∫_v^∞ u^{1-α} P_l(u) du` bounded through `P_l(u) <= q^{-3/2} e^{-μ u}`.
    fn geometric_los_tail(&self, v: T, alpha: T) -> T {
        let p = self.link.params();
        if p.blockage_denominator != BlockageDenominator::BuildingsPlusOne || alpha < T::one() {
            return T::infinity();
        }
        let h_rx = self.link.h_rx();
        let (lo, hi) = if h_rx >= p.h_sbs { (p.h_sbs, h_rx) } else { (h_rx, p.h_sbs) };
        let two_c2 = T::lit(2.0) * p.bldg_height_scale * p.bldg_height_scale;
        let mut best = T::infinity();
        let steps = 64;
        for i in 1..steps {
            let (cap, frac) = if hi == lo {
                (lo, T::one())
            } else {
                let cap = lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(steps);
                // share of the equally spaced obstacle heights lying at or below `cap`
                let frac = if h_rx >= p.h_sbs {
                    (cap - p.h_sbs) / (h_rx - p.h_sbs)
                } else {
                    T::one() - (p.h_sbs - cap) / (p.h_sbs - h_rx)
                };
                (cap, frac)
            };
            let q = T::one() - (-(cap * cap) / two_c2).exp();
            if !(q > T::zero() && q < T::one()) {
                continue;
            }
            let mu = -q.ln() * frac * self.link.crossing_rate();
            let bound = q.powf(T::lit(-1.5)) * v.powf(T::one() - alpha) * (-mu * v).exp() / mu;
            best = best.min(bound);
            if hi == lo {
                break;
            }
        }
        best
    }
}

/// `∫_v^∞ u^{1-α} du`.
fn power_tail<T: Real>(v: T, alpha: T) -> T {
    if alpha <= T::lit(2.0) {
        T::infinity()
    } else {
        v.powf(T::lit(2.0) - alpha) / (alpha - T::lit(2.0))
    }
}

impl<T: Real> LaplaceExponents<T> for InterferenceField<T> {
    fn scaled_exponents(&self, varpi: T, n_terms: usize) -> Result<Vec<T>> {
        InterferenceField::scaled_exponents(self, varpi, n_terms)
    }
}

impl<T: Real> VectorIntegrand<T> for Integrand<'_, T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, v: T, out: &mut [T]) {
        for o in out.iter_mut() {
            *o = T::zero();
        }
        let field = self.field;
        let weight = if v < field.r_cluster {
            field.weight_in
        } else {
            field.weight_out
        };
        if weight == T::zero() {
            return;
        }
        let p_los = field.link.los_probability(v);
        for (is_los, prob) in [(true, p_los), (false, T::one() - p_los)] {
            if prob <= T::zero() {
                continue;
            }
            let w = weight * v * prob;
            let c = field.coef * field.link.zeta(v, is_los);
            match self.kernel {
                Kernel::Scaled => scaled_terms(field.m, c * self.varpi, w, out),
                Kernel::Raw => raw_terms(field.m, c, self.varpi, w, out),
            }
        }
    }
}

/// Adds `w (1 - (1+x)^-m)` to `out[0]` and `w C(m+j-1, j) x^j (1+x)^{-m-j}` to `out[j]`.
#[inline]
fn scaled_terms<T: Real>(m: u32, x: T, w: T, out: &mut [T]) {
    let mf = T::from_u32(m).unwrap();
    let log_base = -mf * x.ln_1p();
    out[0] = out[0] - w * log_base.exp_m1();
    let y = x / (T::one() + x);
    let mut t = log_base.exp();
    let floor = T::epsilon() * T::epsilon() * T::epsilon();
    let mut first = T::zero();
    for (j, o) in out.iter_mut().enumerate().skip(1) {
        let jf = T::from_usize_lossy(j);
        t = t * y * (mf + jf - T::one()) / jf;
        if j == 1 {
            first = t;
        }
        if t <= floor * first || t == T::zero() {
            break;
        }
        *o = *o + w * t;
    }
}

/// Adds `w (1 - δ)` to `out[0]` and `w ∂^j δ / ∂ϖ^j` to `out[j]`.
#[inline]
fn raw_terms<T: Real>(m: u32, c: T, varpi: T, w: T, out: &mut [T]) {
    let mf = T::from_u32(m).unwrap();
    let x = c * varpi;
    let log_base = -mf * x.ln_1p();
    out[0] = out[0] - w * log_base.exp_m1();
    let ratio = -c / (T::one() + x);
    let mut t = log_base.exp();
    for (j, o) in out.iter_mut().enumerate().skip(1) {
        t = t * ratio * (mf + T::from_usize_lossy(j) - T::one());
        *o = *o + w * t;
    }
}

/// Laplace transform of the aggregate interference at `varpi`.
pub fn laplace_interference<T: Real>(varpi: T, p: &SystemParams<T>, in_cluster_intensity: T) -> Result<T> {
    if varpi == T::zero() {
        return Ok(T::one());
    }
    let field = InterferenceField::with_in_cluster_intensity(p, in_cluster_intensity);
    Ok(field.scaled_exponents(varpi, 1)?[0].exp())
}

/// `L` and its first `n` derivatives at `varpi`, via
/// `L^(k+1) = Σ_i C(k, i) S^(i+1) L^(k-i)`.
pub fn laplace_derivatives<T: Real>(
    varpi: T,
    n: usize,
    p: &SystemParams<T>,
    in_cluster_intensity: T,
) -> Result<LaplaceEval<T>> {
    let field = InterferenceField::with_in_cluster_intensity(p, in_cluster_intensity);
    laplace_derivatives_of(&field, varpi, n)
}

pub fn laplace_derivatives_of<T: Real>(field: &InterferenceField<T>, varpi: T, n: usize) -> Result<LaplaceEval<T>> {
    let s = field.exponent_derivatives(varpi, n)?;
    let mut values = Vec::with_capacity(n + 1);
    values.push(s[0].exp());
    for k in 0..n {
        let mut acc = T::zero();
        let mut binom = T::one();
        for i in 0..=k {
            acc = acc + binom * s[i + 1] * values[k - i];
            binom = binom * T::from_usize_lossy(k - i) / T::from_usize_lossy(i + 1);
        }
        values.push(acc);
    }
    Ok(LaplaceEval {
        varpi,
        values,
        exponent_derivs: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ground_table() -> SystemParams<f64> {
        let mut p = SystemParams::table_i().ground_variant();
        p.numerics.v_max = 100_000.0;
        p
    }

    #[test]
    fn zero_argument_is_one() {
        let p = ground_table();
        assert_eq!(laplace_interference(0.0, &p, 0.0).unwrap(), 1.0);
        let e = laplace_derivatives(0.0, 3, &p, p.lambda_noncaching_m2()).unwrap();
        assert_eq!(e.values[0], 1.0);
        // L'(0) = -E[I] < 0
        assert!(e.values[1] < 0.0 && e.values[2] > 0.0 && e.values[3] < 0.0);
    }

    #[test]
    fn full_caching_removes_in_cluster_factor() {
        let p = ground_table();
        let varpi = 1e9;
        let with_zero = InterferenceField::with_in_cluster_intensity(&p, 0.0);
        let trunc = InterferenceField::truncated(&p, 0.0, p.r_cluster);
        assert_eq!(trunc.scaled_exponents(varpi, 1).unwrap()[0], 0.0);
        let l = with_zero.scaled_exponents(varpi, 1).unwrap()[0];
        assert!(l < 0.0);
    }

    #[test]
    fn scaled_and_raw_agree() {
        let p = ground_table();
        let field = InterferenceField::new(&p);
        let varpi = 3e8;
        let s = field.scaled_exponents(varpi, 6).unwrap();
        let raw = field.exponent_derivatives(varpi, 5).unwrap();
        assert!((s[0] / raw[0] - 1.0).abs() < 1e-12);
        let mut fact = 1.0;
        for j in 1..6 {
            fact *= j as f64;
            let from_raw = (-varpi).powi(j as i32) / fact * raw[j];
            assert!((s[j] / from_raw - 1.0).abs() < 1e-7, "order {j}");
        }
    }

    #[test]
    fn aerial_tail_needs_long_range() {
        let mut p = SystemParams::<f64>::table_i();
        p.numerics.v_max = 50_000.0;
        let short = InterferenceField::new(&p);
        assert!(short.tail_bound(1e9) > 1e-3);
        assert!(matches!(short.scaled_exponents(1e9, 2), Err(Error::Accuracy(_))));
        p.numerics.v_max = 1_000_000.0;
        let long = InterferenceField::new(&p);
        assert!(long.tail_bound(1e10) < 1e-8, "{}", long.tail_bound(1e10));
    }

    #[test]
    fn literal_nakagami_denominator_has_no_geometric_tail() {
        let mut p = SystemParams::<f64>::table_i();
        p.blockage_denominator = BlockageDenominator::NakagamiPlusOne;
        let field = InterferenceField::new(&p);
        assert!(field.tail_bound(1e9) > 1e-3);
    }
}

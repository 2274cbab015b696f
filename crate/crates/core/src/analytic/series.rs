//! Truncated Laplace series `F_k(ϖ) = Σ_{j<k} (-ϖ)^j / j! · L^(j)(ϖ)`.
//!
//! With `L = exp(S)` the terms `a_j = (-ϖ)^j / j! · L^(j)` are the
//! coefficients of `t ↦ L(ϖ(1 - t))`, a compound-Poisson law. They satisfy
//! `a_0 = e^{s_0}`, `a_n = (1/n) Σ_{i=1}^{n} i s_i a_{n-i}` with every
//! `s_i >= 0`, so partial sums are monotone and free of cancellation.
//! `F_k` is also `E[Q(k, ϖ I)]`, whence `dF_k / d ln ϖ = -k a_k`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::num::{KahanSum, Real};

use super::laplace::{LaplaceEval, LaplaceExponents};

/// Ceiling on partial-sum magnitude relative to the result.
const CANCELLATION_GUARD: f64 = 1e6;

/// `a_0..a_{n-1}` from the scaled exponents `s_0..s_{n-1}`.
pub fn mixed_poisson_pmf<T: Real>(s: &[T]) -> Vec<T> {
    let n = s.len();
    if n == 0 {
        return Vec::new();
    }
    let limit = T::max_value().sqrt() / T::from_usize_lossy(n * n + 1);
    let mut b = Vec::with_capacity(n);
    b.push(T::one());
    let mut log_scale = T::zero();
    for k in 1..n {
        let mut acc = KahanSum::new();
        for i in 1..=k {
            acc.add(T::from_usize_lossy(i) * s[i] * b[k - i]);
        }
        let v = acc.value() / T::from_usize_lossy(k);
        b.push(v);
        if v > limit {
            for x in b.iter_mut() {
                *x = *x / v;
            }
            log_scale = log_scale + v.ln();
        }
    }
    b.into_iter()
        .map(|x| {
            if x > T::zero() {
                (s[0] + log_scale + x.ln()).exp()
            } else {
                T::zero()
            }
        })
        .collect()
}

/// `[F_1, …, F_{k_max}]` and `[a_0, …, a_{k_max}]` at `varpi`.
pub fn series_values<T: Real, E: LaplaceExponents<T> + ?Sized>(
    exponents: &E,
    varpi: T,
    k_max: usize,
) -> Result<(Vec<T>, Vec<T>)> {
    let (f, a, _) = series_with_exponent(exponents, varpi, k_max)?;
    Ok((f, a))
}

/// As [`series_values`], also returning `S(ϖ)`.
fn series_with_exponent<T: Real, E: LaplaceExponents<T> + ?Sized>(
    exponents: &E,
    varpi: T,
    k_max: usize,
) -> Result<(Vec<T>, Vec<T>, T)> {
    if varpi <= T::zero() {
        let mut a = vec![T::zero(); k_max + 1];
        a[0] = T::one();
        return Ok((vec![T::one(); k_max], a, T::zero()));
    }
    let s = exponents.scaled_exponents(varpi, k_max + 1)?;
    let a = mixed_poisson_pmf(&s);
    let mut acc = KahanSum::new();
    let mut f = Vec::with_capacity(k_max);
    for &aj in a.iter().take(k_max) {
        acc.add(aj);
        f.push(acc.value().min(T::one()));
    }
    Ok((f, a, s[0]))
}

/// `Σ_{j<k} (-ϖ)^j / j! · L^(j)(ϖ)` summed term by term from raw derivatives.
///
/// Fails when the running sum grows beyond the cancellation guard relative
/// to the result.
pub fn series_from_derivatives<T: Real>(eval: &LaplaceEval<T>, k: usize) -> Result<T> {
    if k == 0 || k > eval.values.len() {
        return Err(Error::Domain(format!(
            "series length {k} needs derivatives up to order {}",
            k.saturating_sub(1)
        )));
    }
    let mut acc = KahanSum::new();
    let mut coef = T::one();
    let mut peak = T::zero();
    for (j, &d) in eval.values.iter().take(k).enumerate() {
        if j > 0 {
            coef = coef * (-eval.varpi) / T::from_usize_lossy(j);
        }
        acc.add(coef * d);
        peak = peak.max(acc.value().abs());
    }
    let result = acc.value();
    if peak > T::lit(CANCELLATION_GUARD) * result.abs() {
        return Err(Error::Accuracy(format!(
            "series partial sums reach {peak:e} for a result of {result:e}"
        )));
    }
    Ok(result)
}

/// Something that yields `F_k(ϖ)`.
pub trait SeriesEvaluator<T>: Sync {
    /// Largest supported `k`.
    fn k_max(&self) -> usize;
    fn series(&self, varpi: T, k: usize) -> Result<T>;
}

fn check_k(k: usize, k_max: usize) -> Result<()> {
    if k == 0 || k > k_max {
        return Err(Error::Domain(format!("series length {k} outside 1..={k_max}")));
    }
    Ok(())
}

/// Evaluates the exponents afresh at every call.
#[derive(Debug, Clone)]
pub struct DirectSeries<E> {
    exponents: E,
    k_max: usize,
}

impl<E> DirectSeries<E> {
    pub fn new(exponents: E, k_max: usize) -> Self {
        Self { exponents, k_max }
    }

    pub fn exponents(&self) -> &E {
        &self.exponents
    }
}

impl<T: Real, E: LaplaceExponents<T>> SeriesEvaluator<T> for DirectSeries<E> {
    fn k_max(&self) -> usize {
        self.k_max
    }

    fn series(&self, varpi: T, k: usize) -> Result<T> {
        check_k(k, self.k_max)?;
        let (f, _) = series_values(&self.exponents, varpi, k)?;
        Ok(f[k - 1])
    }
}

/// `F_1..F_{k_max}` tabulated on a grid in `ln ϖ` and interpolated with
/// cubic Hermite polynomials using the exact slopes. Queries outside the
/// grid fall back to direct evaluation.
#[derive(Debug, Clone)]
pub struct TabulatedSeries<E> {
    direct: DirectSeries<E>,
    nodes: Vec<Node>,
    max_interp_error: f64,
}

/// One grid node; stored in `f64` whatever the scalar.
#[derive(Debug, Clone)]
struct Node {
    x: f64,
    /// `S(ϖ)` at the node.
    s0: f64,
    f: Vec<f64>,
    slope: Vec<f64>,
}

const INITIAL_SPACING: f64 = 0.5;
const MIN_SPACING: f64 = 1e-4;

impl<E> TabulatedSeries<E> {
    /// Number of grid nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest midpoint discrepancy accepted while building.
    pub fn max_interp_error(&self) -> f64 {
        self.max_interp_error
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        Some((self.nodes.first()?.x.exp(), self.nodes.last()?.x.exp()))
    }
}

impl<E> TabulatedSeries<E> {
    /// Tabulates over `[varpi_lo, varpi_hi]`, refining until the Hermite
    /// interpolant is within `interp_tol` of direct evaluation at every
    /// interval midpoint. `quad_tol` is the relative accuracy of the exponents.
    pub fn build<T: Real>(
        exponents: E,
        k_max: usize,
        varpi_lo: T,
        varpi_hi: T,
        interp_tol: f64,
        quad_tol: f64,
    ) -> Result<Self>
    where
        E: LaplaceExponents<T>,
    {
        if !(varpi_lo > T::zero() && varpi_hi >= varpi_lo && varpi_hi.is_finite()) {
            return Err(Error::Domain(format!(
                "table range [{varpi_lo}, {varpi_hi}] must be positive and ordered"
            )));
        }
        let direct = DirectSeries::new(exponents, k_max);
        let x_lo = varpi_lo.as_f64().ln();
        let x_hi = varpi_hi.as_f64().ln().max(x_lo + MIN_SPACING);
        let n = ((x_hi - x_lo) / INITIAL_SPACING).ceil().max(1.0) as usize;
        let xs: Vec<f64> = (0..=n)
            .map(|i| x_lo + (x_hi - x_lo) * i as f64 / n as f64)
            .collect();
        let initial: Vec<Node> = xs
            .par_iter()
            .map(|&x| eval_node::<T, E>(&direct, x))
            .collect::<Result<_>>()?;

        let mut nodes = Vec::with_capacity(initial.len() * 2);
        let mut max_err = 0.0_f64;
        let mut iter = initial.into_iter();
        let mut left = iter.next().expect("at least one node");
        for right in iter {
            left = refine::<T, E>(&direct, left, right, interp_tol, quad_tol, &mut nodes, &mut max_err)?;
        }
        nodes.push(left);
        Ok(Self {
            direct,
            nodes,
            max_interp_error: max_err,
        })
    }
}

fn eval_node<T: Real, E: LaplaceExponents<T>>(direct: &DirectSeries<E>, x: f64) -> Result<Node> {
    let (f, a, s0) = series_with_exponent(&direct.exponents, T::lit(x.exp()), direct.k_max)?;
    Ok(Node {
        x,
        s0: s0.as_f64(),
        f: f.iter().map(|v| v.as_f64()).collect(),
        slope: (1..=direct.k_max).map(|k| -(k as f64) * a[k].as_f64()).collect(),
    })
}

/// Pushes `left` and every node inserted between it and `right`; returns
/// `right` as the next left end.
///
/// A midpoint passes when the interpolant is within `tol` plus the noise of
/// direct evaluation itself: a relative quadrature error `q` in `S` moves
/// `F_k` by about `q |S| F_k`.
fn refine<T: Real, E: LaplaceExponents<T>>(
    direct: &DirectSeries<E>,
    left: Node,
    right: Node,
    tol: f64,
    quad_tol: f64,
    out: &mut Vec<Node>,
    max_err: &mut f64,
) -> Result<Node> {
    let xm = 0.5 * (left.x + right.x);
    let mid = eval_node::<T, E>(direct, xm)?;
    let noise = 10.0 * quad_tol * (1.0 + mid.s0.abs());
    let mut worst = 0.0_f64;
    let mut ok = true;
    for k in 0..mid.f.len() {
        let err = (hermite(&left, &right, k, xm) - mid.f[k]).abs();
        worst = worst.max(err);
        ok &= err <= tol + noise * mid.f[k];
    }
    if ok || right.x - left.x <= MIN_SPACING {
        *max_err = max_err.max(worst);
        out.push(left);
        return Ok(right);
    }
    let mid = refine::<T, E>(direct, left, mid, tol, quad_tol, out, max_err)?;
    refine::<T, E>(direct, mid, right, tol, quad_tol, out, max_err)
}

#[inline]
fn hermite(l: &Node, r: &Node, k: usize, x: f64) -> f64 {
    let h = r.x - l.x;
    let t = (x - l.x) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * l.f[k] + h10 * h * l.slope[k] + h01 * r.f[k] + h11 * h * r.slope[k]
}

impl<T: Real, E: LaplaceExponents<T>> SeriesEvaluator<T> for TabulatedSeries<E> {
    fn k_max(&self) -> usize {
        self.direct.k_max
    }

    fn series(&self, varpi: T, k: usize) -> Result<T> {
        check_k(k, self.direct.k_max)?;
        if varpi <= T::zero() {
            return Ok(T::one());
        }
        let x = varpi.as_f64().ln();
        let (first, last) = (&self.nodes[0], &self.nodes[self.nodes.len() - 1]);
        // endpoints pass through exp/ln, so allow a rounding's worth of slack
        let slack = 1e-12 * (1.0 + x.abs());
        if !(x >= first.x - slack && x <= last.x + slack) || self.nodes.len() < 2 {
            return self.direct.series(varpi, k);
        }
        let i = self.nodes.partition_point(|n| n.x <= x).clamp(1, self.nodes.len() - 1);
        let x = x.clamp(first.x, last.x);
        let v = hermite(&self.nodes[i - 1], &self.nodes[i], k - 1, x);
        Ok(T::lit(v.clamp(0.0, 1.0)))
    }
}

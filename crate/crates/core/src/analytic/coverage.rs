//! Coverage upper bound: expectation of the conditional coverage over the
//! number of caching SBSs and their distances.

use rand::Rng;
use rayon::prelude::*;

use crate::caching::caching_count_pmf;
use crate::channel::LinkModel;
use crate::error::{Error, Result};
use crate::geometry::link_distance;
use crate::num::{KahanSum, Real};
use crate::params::SystemParams;
use crate::rng::{substream, tagged_seed, StreamRng};

use super::gamma::match_shape_scale;
use super::laplace::InterferenceField;
use super::series::{DirectSeries, SeriesEvaluator, TabulatedSeries};

const GEOMETRY_TAG: u64 = 0x6765_6f6d;
const ASSIGNMENT_TAG: u64 = 0x6173_6769;

/// Absolute accuracy of the tabulated series.
const TABLE_TOLERANCE: f64 = 1e-7;

/// Analytic coverage at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticEstimate<T> {
    /// SIR threshold, linear.
    pub theta: T,
    pub value: T,
    /// Standard error from the Monte Carlo average over distances.
    pub std_error: T,
}

/// Conditional coverage given the serving distances.
pub struct ConditionalCoverage<'a, T, S> {
    params: &'a SystemParams<T>,
    link: LinkModel<T>,
    series: &'a S,
}

impl<'a, T: Real, S: SeriesEvaluator<T>> ConditionalCoverage<'a, T, S> {
    pub fn new(params: &'a SystemParams<T>, series: &'a S) -> Self {
        Self {
            params,
            link: LinkModel::new(params, params.h_ue, params.r_cluster),
            series,
        }
    }

    /// Coverage at each threshold in `thetas`. LoS assignments are enumerated
    /// when the server count is at most the enumeration cap and sampled with
    /// `rng` otherwise.
    pub fn evaluate<R: Rng + ?Sized>(&self, r_list: &[T], thetas: &[T], rng: &mut R) -> Result<Vec<T>> {
        let p = self.params;
        let kappa = r_list.len();
        if kappa == 0 {
            return Err(Error::Domain("conditional coverage needs at least one server".into()));
        }
        for &r in r_list {
            if !(r >= T::zero() && r <= p.r_cluster) {
                return Err(Error::Domain(format!(
                    "serving distance {r} m outside [0, {}]",
                    p.r_cluster
                )));
            }
            let d = link_distance(r, p.h_ue, p.h_sbs);
            if !(d >= T::one()) {
                return Err(Error::Domain(format!(
                    "link distance {d} m is below the 1 m reference distance"
                )));
            }
        }
        let k = p.m_nakagami as usize * kappa;
        if k > self.series.k_max() {
            return Err(Error::Domain(format!(
                "{kappa} servers need series length {k} beyond {}",
                self.series.k_max()
            )));
        }
        let links: Vec<(T, T, T)> = r_list
            .iter()
            .map(|&r| (self.link.los_probability(r), self.link.zeta(r, true), self.link.zeta(r, false)))
            .collect();
        let scale = T::from_usize_lossy(kappa) * p.p_tx;
        let mut acc = vec![KahanSum::new(); thetas.len()];
        let mut zetas = vec![T::zero(); kappa];
        let add = |zetas: &[T], weight: T, acc: &mut [KahanSum<T>]| -> Result<()> {
            let (_, theta) = match_shape_scale(zetas, p.m_nakagami, p.eta_spread);
            for (a, &th) in acc.iter_mut().zip(thetas) {
                let f = self.series.series(th / (scale * theta), k)?;
                a.add(weight * f);
            }
            Ok(())
        };

        if kappa <= p.numerics.config_enum_cap {
            for mask in 0u64..(1u64 << kappa) {
                let mut weight = T::one();
                for (i, &(pl, zl, zn)) in links.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        weight = weight * pl;
                        zetas[i] = zl;
                    } else {
                        weight = weight * (T::one() - pl);
                        zetas[i] = zn;
                    }
                }
                if weight > T::zero() {
                    add(&zetas, weight, &mut acc)?;
                }
            }
            Ok(acc.iter().map(|a| a.value().min(T::one())).collect())
        } else {
            let draws = p.numerics.assignment_draws.max(1);
            for _ in 0..draws {
                for (i, &(pl, zl, zn)) in links.iter().enumerate() {
                    zetas[i] = if T::lit(rng.random::<f64>()) < pl { zl } else { zn };
                }
                add(&zetas, T::one(), &mut acc)?;
            }
            let n = T::from_usize_lossy(draws);
            Ok(acc.iter().map(|a| (a.value() / n).min(T::one())).collect())
        }
    }
}

/// Conditional coverage for servers at `r_list` and threshold `theta` (linear).
pub fn conditional_coverage<T: Real>(r_list: &[T], p: &SystemParams<T>, theta: T) -> Result<T> {
    p.validate()?;
    let field = InterferenceField::new(p);
    let series = DirectSeries::new(field, (p.m_nakagami as usize * r_list.len()).max(1));
    let cond = ConditionalCoverage::new(p, &series);
    let mut rng = substream(tagged_seed(p.numerics.rng_seed, ASSIGNMENT_TAG), 0);
    Ok(cond.evaluate(r_list, &[theta], &mut rng)?[0])
}

/// Smallest and largest path gain over `[0, R_c]`, both branches.
fn zeta_range<T: Real>(link: &LinkModel<T>, r_c: T) -> (T, T) {
    let mut rs = vec![T::zero(), r_c];
    for b in link.gain_breakpoints() {
        if b < r_c {
            for f in [T::one() - T::lit(1e-9), T::one(), T::one() + T::lit(1e-9)] {
                rs.push((b * f).min(r_c));
            }
        }
    }
    let mut lo = T::infinity();
    let mut hi = T::zero();
    for r in rs {
        for los in [true, false] {
            let z = link.zeta(r, los);
            lo = lo.min(z);
            hi = hi.max(z);
        }
    }
    (lo, hi)
}

/// Analytic coverage at each threshold in `thetas` (linear).
pub fn coverage_curve<T: Real>(p: &SystemParams<T>, thetas: &[T]) -> Result<Vec<AnalyticEstimate<T>>> {
    p.validate()?;
    let zero = |&theta: &T| AnalyticEstimate {
        theta,
        value: T::zero(),
        std_error: T::zero(),
    };
    if p.c_f <= T::zero() || thetas.is_empty() {
        return Ok(thetas.iter().map(zero).collect());
    }
    let kappa_max = p.kappa_max();
    let m = p.m_nakagami as usize;
    let link = LinkModel::new(p, p.h_ue, p.r_cluster);
    let (z_lo, z_hi) = zeta_range(&link, p.r_cluster);
    let positive: Vec<T> = thetas.iter().copied().filter(|t| *t > T::zero()).collect();
    let field = InterferenceField::new(p);
    let unit = p.p_tx * p.eta_spread / T::from_usize_lossy(m);
    let series = if positive.is_empty() {
        None
    } else {
        let th_lo = positive.iter().copied().fold(T::infinity(), T::min);
        let th_hi = positive.iter().copied().fold(T::zero(), T::max);
        let lo = th_lo / (T::from_usize_lossy(kappa_max) * unit * z_hi) * T::lit(0.99);
        let hi = th_hi / (unit * z_lo) * T::lit(1.01);
        Some(TabulatedSeries::build(
            field,
            m * kappa_max,
            lo,
            hi,
            TABLE_TOLERANCE,
            p.numerics.quad_tolerance.as_f64(),
        )?)
    };
    let Some(series) = series else {
        // every threshold is non-positive: coverage is P(κ >= 1)
        let covered = T::one() - caching_count_pmf(0, p);
        return Ok(thetas
            .iter()
            .map(|&theta| AnalyticEstimate {
                theta,
                value: covered,
                std_error: T::zero(),
            })
            .collect());
    };

    let cond = ConditionalCoverage::new(p, &series);
    let n_geom = p.numerics.n_geom.max(2);
    let geom_seed = tagged_seed(p.numerics.rng_seed, GEOMETRY_TAG);
    let nt = thetas.len();
    let mut value = vec![KahanSum::new(); nt];
    let mut var = vec![KahanSum::new(); nt];
    for kappa in 1..=kappa_max {
        let weight = caching_count_pmf(kappa, p);
        if weight == T::zero() {
            continue;
        }
        let draws: Vec<Vec<T>> = (0..n_geom)
            .into_par_iter()
            .map(|d| {
                let mut rng: StreamRng = substream(geom_seed, ((kappa as u64) << 32) + d as u64);
                let r_list: Vec<T> = (0..kappa)
                    .map(|_| p.r_cluster * T::lit(rng.random::<f64>()).sqrt())
                    .collect();
                cond.evaluate(&r_list, thetas, &mut rng)
            })
            .collect::<Result<_>>()?;
        let n = T::from_usize_lossy(n_geom);
        for t in 0..nt {
            let mean = draws.iter().map(|d| d[t]).collect::<KahanSum<T>>().value() / n;
            let ss = draws
                .iter()
                .map(|d| (d[t] - mean) * (d[t] - mean))
                .collect::<KahanSum<T>>()
                .value()
                / (n - T::one());
            value[t].add(weight * mean);
            var[t].add(weight * weight * ss / n);
        }
    }
    Ok(thetas
        .iter()
        .enumerate()
        .map(|(t, &theta)| AnalyticEstimate {
            theta,
            value: value[t].value().min(T::one()),
            std_error: var[t].value().max(T::zero()).sqrt(),
        })
        .collect())
}

/// Analytic coverage bound at one threshold (linear).
pub fn coverage_probability<T: Real>(p: &SystemParams<T>, theta: T) -> Result<T> {
    Ok(coverage_curve(p, &[theta])?[0].value)
}

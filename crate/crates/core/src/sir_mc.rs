//! Monte Carlo SIR engine for the serving schemes and coverage estimation.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, Gamma};

use crate::analytic::gamma::moment_match_gamma;
use crate::channel::{sample_nakagami_power, LinkModel, LinkState};
use crate::error::{Error, Result};
use crate::geometry::poisson_count;
use crate::num::Real;
use crate::params::SystemParams;
use crate::rng::{substream, tagged_seed};
use crate::stats::{density_histogram, ks_distance, ks_pvalue, wilson_interval};

const GROUND_TAG: u64 = 0x6772_6e64;
const PDF_TAG: u64 = 0x7064_6667;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Coherent joint transmission from every caching SBS in the cluster.
    CompExact,
    /// Joint transmission with the desired power replaced by `κ Σ ζ ω²`.
    CompCauchy,
    /// Nearest caching SBS serves; every other SBS interferes.
    NearestSbs,
    /// Joint transmission to a handset on the ground.
    GroundUser,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::CompExact,
        Scheme::CompCauchy,
        Scheme::NearestSbs,
        Scheme::GroundUser,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::CompExact => "comp-exact",
            Scheme::CompCauchy => "comp-cauchy",
            Scheme::NearestSbs => "nearest-sbs",
            Scheme::GroundUser => "ground-user",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirSample<T> {
    pub scheme: Scheme,
    pub sir: T,
    pub kappa: usize,
    pub desired_power: T,
    pub interference_power: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageEstimate<T> {
    pub p_hat: f64,
    pub n_trials: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    /// SIR threshold, linear.
    pub threshold: T,
}

impl<T> CoverageEstimate<T> {
    fn from_count(successes: usize, n_trials: usize, threshold: T) -> Self {
        let (ci_low, ci_high) = wilson_interval(successes, n_trials);
        Self {
            p_hat: successes as f64 / n_trials.max(1) as f64,
            n_trials,
            ci_low,
            ci_high,
            threshold,
        }
    }
}

/// One sampled world as seen by the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization<T> {
    /// Caching SBSs inside the collaboration disk.
    pub servers: Vec<LinkState<T>>,
    /// `P_t Σ ζ γ` over non-caching in-cluster and all out-of-cluster SBSs.
    pub interference: T,
}

/// Per-receiver sampler; holds the link model so repeated draws stay cheap.
#[derive(Debug, Clone)]
pub struct WorldSampler<T> {
    link: LinkModel<T>,
    mean_in: f64,
    mean_out: f64,
    r_c2: T,
    r_w2: T,
}

impl<T: Real> WorldSampler<T> {
    /// Sampler for a receiver at `p.h_ue` with fading order `p.m_nakagami`.
    pub fn new(p: &SystemParams<T>) -> Self {
        let window = p.numerics.r_sim_window.max(p.r_cluster);
        let r_c2 = p.r_cluster * p.r_cluster;
        let r_w2 = window * window;
        Self {
            link: LinkModel::new(p, p.h_ue, window),
            mean_in: (p.lambda_b_m2() * T::PI() * r_c2).as_f64(),
            mean_out: (p.lambda_out_m2() * T::PI() * (r_w2 - r_c2)).as_f64(),
            r_c2,
            r_w2,
        }
    }

    pub fn link(&self) -> &LinkModel<T> {
        &self.link
    }

    fn params(&self) -> &SystemParams<T> {
        self.link.params()
    }

    /// Radius drawn uniformly by area in `[sqrt(lo2), sqrt(hi2)]`.
    #[inline]
    fn radius<R: Rng + ?Sized>(&self, lo2: T, hi2: T, rng: &mut R) -> T {
        (lo2 + (hi2 - lo2) * T::lit(rng.random::<f64>())).sqrt()
    }

    #[inline]
    fn interferer<R: Rng + ?Sized>(&self, r: T, rng: &mut R) -> T {
        let p = self.params();
        let is_los = T::lit(rng.random::<f64>()) < self.link.los_probability(r);
        self.link.zeta(r, is_los) * sample_nakagami_power(p.m_nakagami, p.eta_spread, rng)
    }

    /// Draws one world: in-cluster PPP thinned by `c_f`, out-of-cluster PPP up
    /// to the simulation window, per-link LoS state and fading.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> NetworkRealization<T> {
        let p = self.params();
        let c_f = p.c_f.as_f64();
        let mut servers = Vec::new();
        let mut sum = T::zero();
        for _ in 0..poisson_count(self.mean_in, rng) {
            let r = self.radius(T::zero(), self.r_c2, rng);
            let caching = c_f >= 1.0 || (c_f > 0.0 && rng.random::<f64>() < c_f);
            if caching {
                servers.push(self.link.sample_link(r, p.m_nakagami, rng));
            } else {
                sum = sum + self.interferer(r, rng);
            }
        }
        sum = sum + self.interference_outside(rng);
        NetworkRealization {
            servers,
            interference: p.p_tx * sum,
        }
    }

    /// `Σ ζ γ` over the out-of-cluster field, without the transmit power.
    fn interference_outside<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let mut sum = T::zero();
        for _ in 0..poisson_count(self.mean_out, rng) {
            let r = self.radius(self.r_c2, self.r_w2, rng);
            sum = sum + self.interferer(r, rng);
        }
        sum
    }

    /// Aggregate interference `P_t Σ ζ γ` from a field whose in-cluster part
    /// has intensity `lambda_in` per m².
    pub fn sample_interference<R: Rng + ?Sized>(&self, lambda_in: T, rng: &mut R) -> T {
        let mut sum = T::zero();
        let mean_in = (lambda_in * T::PI() * self.r_c2).as_f64();
        for _ in 0..poisson_count(mean_in, rng) {
            let r = self.radius(T::zero(), self.r_c2, rng);
            sum = sum + self.interferer(r, rng);
        }
        sum = sum + self.interference_outside(rng);
        self.params().p_tx * sum
    }
}

/// SIR of `world` under `scheme`; the ground scheme composes like `CompExact`.
pub fn compose_sir<T: Real>(world: &NetworkRealization<T>, scheme: Scheme, p_tx: T) -> SirSample<T> {
    let kappa = world.servers.len();
    let mut interference = world.interference;
    let desired = if kappa == 0 {
        T::zero()
    } else {
        match scheme {
            Scheme::CompExact | Scheme::GroundUser => {
                let amp: T = world.servers.iter().map(|s| s.zeta.sqrt() * s.amp_fading).sum();
                p_tx * amp * amp
            }
            Scheme::CompCauchy => {
                let pow: T = world.servers.iter().map(|s| s.zeta * s.pow_fading).sum();
                p_tx * T::from_usize_lossy(kappa) * pow
            }
            Scheme::NearestSbs => {
                let (best, _) = world
                    .servers
                    .iter()
                    .enumerate()
                    .fold((0, T::infinity()), |acc, (i, s)| if s.r < acc.1 { (i, s.r) } else { acc });
                for (i, s) in world.servers.iter().enumerate() {
                    if i != best {
                        interference = interference + p_tx * s.zeta * s.pow_fading;
                    }
                }
                let s = &world.servers[best];
                p_tx * s.zeta * s.pow_fading
            }
        }
    };
    let sir = if kappa == 0 {
        T::zero()
    } else if interference > T::zero() {
        desired / interference
    } else {
        T::infinity()
    };
    SirSample {
        scheme,
        sir,
        kappa,
        desired_power: desired,
        interference_power: interference,
    }
}

/// Samples one world and composes its SIR.
pub fn simulate_realization<T: Real, R: Rng + ?Sized>(p: &SystemParams<T>, scheme: Scheme, rng: &mut R) -> SirSample<T> {
    let q = receiver_params(p, scheme);
    let world = WorldSampler::new(&q).sample(rng);
    compose_sir(&world, scheme, p.p_tx)
}

fn receiver_params<T: Real>(p: &SystemParams<T>, scheme: Scheme) -> SystemParams<T> {
    if scheme == Scheme::GroundUser {
        p.ground_variant()
    } else {
        p.clone()
    }
}

/// Coverage of every scheme at every threshold from one set of trials.
///
/// Aerial schemes share worlds; trial `t` draws from stream `t` of `seed`
/// (ground worlds use a derived seed), so results do not depend on
/// scheduling. Returns `[scheme][threshold]`.
pub fn simulate_curve<T: Real>(
    p: &SystemParams<T>,
    schemes: &[Scheme],
    thetas: &[T],
    n_trials: usize,
    seed: u64,
) -> Result<Vec<Vec<CoverageEstimate<T>>>> {
    p.validate()?;
    if n_trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    let aerial_needed = schemes.iter().any(|s| *s != Scheme::GroundUser);
    let ground_needed = schemes.contains(&Scheme::GroundUser);
    let aerial = aerial_needed.then(|| WorldSampler::new(p));
    let ground = ground_needed.then(|| WorldSampler::new(&p.ground_variant()));
    let ground_seed = tagged_seed(seed, GROUND_TAG);

    let sirs: Vec<Vec<T>> = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let aw = aerial.as_ref().map(|s| s.sample(&mut substream(seed, t)));
            let gw = ground.as_ref().map(|s| s.sample(&mut substream(ground_seed, t)));
            schemes
                .iter()
                .map(|&scheme| {
                    let world = if scheme == Scheme::GroundUser { &gw } else { &aw };
                    compose_sir(world.as_ref().expect("world sampled"), scheme, p.p_tx).sir
                })
                .collect()
        })
        .collect();

    Ok(schemes
        .iter()
        .enumerate()
        .map(|(i, _)| {
            thetas
                .iter()
                .map(|&th| {
                    let hits = sirs.iter().filter(|s| s[i] > th).count();
                    CoverageEstimate::from_count(hits, n_trials, th)
                })
                .collect()
        })
        .collect())
}

/// `P(SIR > theta)` for one scheme.
pub fn estimate_coverage<T: Real>(
    p: &SystemParams<T>,
    scheme: Scheme,
    theta: T,
    n_trials: usize,
    seed: u64,
) -> Result<CoverageEstimate<T>> {
    Ok(simulate_curve(p, &[scheme], &[theta], n_trials, seed)?[0][0])
}

/// Histogram of the desired-signal gain against its moment-matched Gamma.
#[derive(Debug, Clone, PartialEq)]
pub struct GainPdf<T> {
    /// Path gains of the fixed serving set.
    pub zetas: Vec<T>,
    pub bin_centers: Vec<T>,
    pub empirical_density: Vec<T>,
    pub matched_density: Vec<T>,
    pub k_eq: T,
    pub theta: T,
    pub ks_distance: f64,
    pub ks_pvalue: f64,
}

/// Gain distribution for servers with fixed path gains `zetas`: `n` fading
/// draws of `Σ ζ_i ω_i²` compared with Gamma(k_eq, θ).
pub fn gain_pdf_for_servers<T: Real>(
    p: &SystemParams<T>,
    zetas: &[T],
    n: usize,
    bins: usize,
    seed: u64,
) -> Result<GainPdf<T>> {
    if n == 0 || bins == 0 {
        return Err(Error::Domain("gain histogram needs realizations and bins".into()));
    }
    let g = moment_match_gamma(zetas, p)?;
    let theta = g.theta.as_f64();
    let gamma = Gamma::new(g.k_eq.as_f64(), 1.0).map_err(|e| Error::Domain(e.to_string()))?;
    let mut sample: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            zetas
                .iter()
                .map(|&z| z.as_f64() * sample_nakagami_power(p.m_nakagami, p.eta_spread.as_f64(), &mut rng))
                .sum::<f64>()
                / theta
        })
        .collect();
    // upper edge: six matched standard deviations past the mean
    let k = g.k_eq.as_f64();
    let hi = k + 6.0 * k.sqrt();
    let (centers, density) = density_histogram(&sample, 0.0, hi, bins);
    let d = ks_distance(&mut sample, |x| gamma.cdf(x));
    Ok(GainPdf {
        zetas: zetas.to_vec(),
        bin_centers: centers.iter().map(|&c| T::lit(c * theta)).collect(),
        empirical_density: density.iter().map(|&v| T::lit(v / theta)).collect(),
        matched_density: centers.iter().map(|&c| T::lit(gamma.pdf(c) / theta)).collect(),
        k_eq: g.k_eq,
        theta: g.theta,
        ks_distance: d,
        ks_pvalue: ks_pvalue(d, n),
    })
}

/// Gain distribution for the serving set of one sampled world; LoS states and
/// distances stay fixed while fading varies.
///
/// The world is the first whose server count reaches the mean caching count
/// (rounded, at least one), so the set is typical rather than a lone server.
pub fn empirical_gain_pdf<T: Real>(
    p: &SystemParams<T>,
    n_realizations: usize,
    bins: usize,
    seed: u64,
) -> Result<GainPdf<T>> {
    p.validate()?;
    if p.c_f <= T::zero() {
        return Err(Error::Domain("no SBS caches the content (c_f = 0)".into()));
    }
    let sampler = WorldSampler::new(p);
    let pdf_seed = tagged_seed(seed, PDF_TAG);
    let want = (p.mean_cache_count().as_f64().round() as usize).max(1);
    let mut world = None;
    for i in 0..10_000u64 {
        let w = sampler.sample(&mut substream(pdf_seed, i));
        if w.servers.len() >= want {
            world = Some(w);
            break;
        }
    }
    let world = world
        .ok_or_else(|| Error::Domain(format!("no world with {want} caching SBSs in 10^4 draws")))?;
    let zetas: Vec<T> = world.servers.iter().map(|s| s.zeta).collect();
    gain_pdf_for_servers(p, &zetas, n_realizations, bins, seed)
}

//! Link-level channel model: down-tilted antenna pattern, building-crossing
//! LoS probability, LoS/NLoS path gain and Nakagami-m fading.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::link_distance;
use crate::num::Real;
use crate::params::{BlockageDenominator, SystemParams};

/// One sampled SBS-to-receiver link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState<T> {
    pub is_los: bool,
    pub r: T,
    /// Antenna gain times path loss, linear.
    pub zeta: T,
    pub amp_fading: T,
    pub pow_fading: T,
}

/// Mainlobe or sidelobe gain of an SBS at horizontal distance `r` towards a
/// receiver at altitude `h_rx`.
pub fn antenna_gain<T: Real>(r: T, p: &SystemParams<T>, h_rx: T) -> T {
    let (upper_tan, lower_tan) = beam_edge_tans(p);
    gain_from_tans(r, p, h_rx, upper_tan, lower_tan)
}

/// `(tan(tilt + beam/2), tan(tilt - beam/2))`.
fn beam_edge_tans<T: Real>(p: &SystemParams<T>) -> (T, T) {
    let half = p.theta_beam / T::lit(2.0);
    (
        (p.theta_tilt + half).to_radians().tan(),
        (p.theta_tilt - half).to_radians().tan(),
    )
}

#[inline]
fn gain_from_tans<T: Real>(r: T, p: &SystemParams<T>, h_rx: T, upper_tan: T, lower_tan: T) -> T {
    let low = p.h_sbs - r * upper_tan;
    let high = p.h_sbs - r * lower_tan;
    if low < h_rx && h_rx < high {
        p.g_main
    } else {
        p.g_side
    }
}

/// Composite antenna gain and path loss `A_v G(r) d^-alpha_v`.
pub fn path_gain<T: Real>(r: T, is_los: bool, p: &SystemParams<T>, h_rx: T) -> Result<T> {
    let d = link_distance(r, h_rx, p.h_sbs);
    if !(d >= T::one()) {
        return Err(Error::Domain(format!(
            "link distance {d} m is below the 1 m reference distance"
        )));
    }
    let (a, alpha) = branch(p, is_los);
    Ok(a * antenna_gain(r, p, h_rx) * d.powf(-alpha))
}

#[inline]
fn branch<T: Real>(p: &SystemParams<T>, is_los: bool) -> (T, T) {
    if is_los {
        (p.a_los, p.alpha_los)
    } else {
        (p.a_nlos, p.alpha_nlos)
    }
}

/// Number of buildings crossed over horizontal distance `r`.
#[inline]
pub fn buildings_crossed<T: Real>(r: T, p: &SystemParams<T>) -> usize {
    (r * p.crossing_rate()).floor().to_usize().unwrap_or(usize::MAX)
}

/// LoS probability towards the aerial receiver at `p.h_ue`.
pub fn los_probability<T: Real>(r: T, p: &SystemParams<T>) -> T {
    los_probability_at(r, p, p.h_ue)
}

/// LoS probability for a receiver at altitude `h_rx`.
///
/// A link crossing no building is LoS with certainty.
pub fn los_probability_at<T: Real>(r: T, p: &SystemParams<T>, h_rx: T) -> T {
    los_probability_for_count(buildings_crossed(r, p), p, h_rx)
}

pub(crate) fn los_probability_for_count<T: Real>(count: usize, p: &SystemParams<T>, h_rx: T) -> T {
    if count == 0 {
        return T::one();
    }
    let dh = h_rx - p.h_sbs;
    let denom = match p.blockage_denominator {
        BlockageDenominator::BuildingsPlusOne => T::from_usize_lossy(count + 1),
        BlockageDenominator::NakagamiPlusOne => T::from_u32(p.m_nakagami + 1).unwrap(),
    };
    let two_c2 = T::lit(2.0) * p.bldg_height_scale * p.bldg_height_scale;
    let mut prob = T::one();
    for n in 0..count {
        let h = p.h_sbs + dh * (T::from_usize_lossy(n) + T::lit(0.5)) / denom;
        prob = prob * (T::one() - (-(h * h) / two_c2).exp());
        if prob == T::zero() {
            break;
        }
    }
    prob
}

/// Channel gain power `ω²` ~ Gamma(m, η/m), drawn as a sum of `m` exponentials.
pub fn sample_nakagami_power<T: Real, R: Rng + ?Sized>(m: u32, eta: T, rng: &mut R) -> T {
    let mut log_sum = 0.0_f64;
    let mut prod = 1.0_f64;
    for _ in 0..m {
        // (0, 1]: keeps the logarithm finite
        let u = 1.0 - rng.random::<f64>();
        prod *= u;
        if prod < 1e-280 {
            log_sum += prod.ln();
            prod = 1.0;
        }
    }
    log_sum += prod.ln();
    eta / T::from_u32(m).unwrap() * T::lit(-log_sum)
}

/// Nakagami-m amplitude `ω` with spread `η`.
pub fn sample_nakagami_amplitude<T: Real, R: Rng + ?Sized>(m: u32, eta: T, rng: &mut R) -> T {
    sample_nakagami_power(m, eta, rng).sqrt()
}

/// Precomputed per-receiver channel: antenna tangents and a LoS-probability
/// table indexed by buildings crossed.
#[derive(Debug, Clone)]
pub struct LinkModel<T> {
    params: SystemParams<T>,
    h_rx: T,
    upper_tan: T,
    lower_tan: T,
    crossing_rate: T,
    los_table: Vec<T>,
}

impl<T: Real> LinkModel<T> {
    /// Link model for a receiver at `h_rx`, tabulating LoS probability out to `r_max`.
    pub fn new(params: &SystemParams<T>, h_rx: T, r_max: T) -> Self {
        let (upper_tan, lower_tan) = beam_edge_tans(params);
        let max_count = buildings_crossed(r_max, params).saturating_add(1);
        let mut los_table = Vec::with_capacity(max_count + 1);
        for count in 0..=max_count {
            let v = los_probability_for_count(count, params, h_rx);
            los_table.push(v);
            if v == T::zero() {
                break;
            }
        }
        Self {
            params: params.clone(),
            h_rx,
            upper_tan,
            lower_tan,
            crossing_rate: params.crossing_rate(),
            los_table,
        }
    }

    pub fn params(&self) -> &SystemParams<T> {
        &self.params
    }

    pub fn h_rx(&self) -> T {
        self.h_rx
    }

    #[inline]
    pub fn gain(&self, r: T) -> T {
        gain_from_tans(r, &self.params, self.h_rx, self.upper_tan, self.lower_tan)
    }

    #[inline]
    pub fn los_probability(&self, r: T) -> T {
        let count = (r * self.crossing_rate).floor().to_usize().unwrap_or(usize::MAX);
        match self.los_table.get(count) {
            Some(&v) => v,
            // table stops early once the product underflows to zero
            None if self.los_table.last() == Some(&T::zero()) => T::zero(),
            None => los_probability_for_count(count, &self.params, self.h_rx),
        }
    }

    /// Path gain with the link distance clamped to the 1 m reference distance.
    #[inline]
    pub fn zeta(&self, r: T, is_los: bool) -> T {
        let dh = self.h_rx - self.params.h_sbs;
        let d2 = (r * r + dh * dh).max(T::one());
        let (a, alpha) = branch(&self.params, is_los);
        a * self.gain(r) * d2.powf(-alpha / T::lit(2.0))
    }

    /// Horizontal distances at which the antenna gain switches branch.
    pub fn gain_breakpoints(&self) -> Vec<T> {
        let p = &self.params;
        let mut out = Vec::new();
        for t in [self.upper_tan, self.lower_tan] {
            if t != T::zero() {
                let r = (p.h_sbs - self.h_rx) / t;
                if r > T::zero() && r.is_finite() {
                    out.push(r);
                }
            }
        }
        out
    }

    /// Distance at which `count` buildings start to be crossed.
    pub fn crossing_distance(&self, count: usize) -> T {
        T::from_usize_lossy(count) / self.crossing_rate
    }

    pub fn crossing_rate(&self) -> T {
        self.crossing_rate
    }

    /// Draws LoS state and fading for an SBS at horizontal distance `r`.
    pub fn sample_link<R: Rng + ?Sized>(&self, r: T, m: u32, rng: &mut R) -> LinkState<T> {
        let is_los = T::lit(rng.random::<f64>()) < self.los_probability(r);
        let amp_fading = sample_nakagami_amplitude(m, self.params.eta_spread, rng);
        LinkState {
            is_los,
            r,
            zeta: self.zeta(r, is_los),
            amp_fading,
            pow_fading: amp_fading * amp_fading,
        }
    }
}

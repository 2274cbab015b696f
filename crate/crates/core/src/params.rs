//! Network, channel and numerical-control parameters.
//!
//! Gains and path-loss constants are held as linear power ratios; the config
//! file accepts either the linear key or its `_db` twin. Densities keep the
//! per-km² unit of the config file and are converted to per-m² by accessor.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::caching::poisson_pmf;
use crate::error::{Error, Result};
use crate::num::{db_to_linear, Real};

/// Which count enters the height denominator of the building-crossing LoS law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlockageDenominator {
    /// `p + 1`, with `p` the number of buildings crossed.
    #[default]
    BuildingsPlusOne,
    /// `m + 1` with `m` the Nakagami shape, i.e. the literal symbol reuse.
    NakagamiPlusOne,
}

impl BlockageDenominator {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BuildingsPlusOne => "p_plus_1",
            Self::NakagamiPlusOne => "m_plus_1",
        }
    }
}

impl FromStr for BlockageDenominator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "p_plus_1" => Ok(Self::BuildingsPlusOne),
            "m_plus_1" => Ok(Self::NakagamiPlusOne),
            other => Err(format!(
                "unknown blockage_denominator `{other}` (expected p_plus_1 or m_plus_1)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Numerics<T> {
    /// Outer radius of the simulated interferer field, m.
    pub r_sim_window: T,
    /// Truncation of the cache-count sum; `None` picks the smallest valid value.
    pub kappa_max: Option<usize>,
    pub n_trials: usize,
    pub quad_tolerance: T,
    /// Outer radius of the analytic interference integral, m.
    pub v_max: T,
    /// Largest server count whose LoS assignments are enumerated exhaustively.
    pub config_enum_cap: usize,
    pub rng_seed: u64,
    /// Serving-distance draws per cache count in the analytic expectation.
    pub n_geom: usize,
    /// LoS-assignment draws used above `config_enum_cap`.
    pub assignment_draws: usize,
}

impl<T: Real> Default for Numerics<T> {
    fn default() -> Self {
        Self {
            r_sim_window: T::lit(10_000.0),
            kappa_max: None,
            n_trials: 10_000,
            quad_tolerance: T::lit(1e-8),
            v_max: T::lit(1_000_000.0),
            config_enum_cap: 12,
            rng_seed: 1,
            n_geom: 2000,
            assignment_draws: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams<T> {
    pub alpha_los: T,
    pub alpha_nlos: T,
    /// LoS path-loss constant at 1 m, linear.
    pub a_los: T,
    /// NLoS path-loss constant at 1 m, linear.
    pub a_nlos: T,
    pub g_main: T,
    pub g_side: T,
    pub m_nakagami: u32,
    pub eta_spread: T,
    pub h_sbs: T,
    /// Aerial receiver altitude, m.
    pub h_ue: T,
    pub bldg_area_fraction: T,
    /// Buildings per km².
    pub bldg_density: T,
    /// Rayleigh scale of building heights, m.
    pub bldg_height_scale: T,
    /// Collaboration radius, m.
    pub r_cluster: T,
    /// SBS intensity, per km².
    pub lambda_b: T,
    /// SIR threshold, linear.
    pub sir_threshold: T,
    /// Antenna down-tilt, degrees.
    pub theta_tilt: T,
    /// Vertical beamwidth, degrees.
    pub theta_beam: T,
    pub c_f: T,
    pub p_tx: T,
    /// Ground receiver altitude, m.
    pub h_ground: T,
    /// Nakagami shape used for the ground receiver.
    pub m_ground: u32,
    pub blockage_denominator: BlockageDenominator,
    /// Out-of-cluster interferer intensity per km²; `None` means `lambda_b`.
    pub lambda_out: Option<T>,
    pub numerics: Numerics<T>,
}

impl<T: Real> Default for SystemParams<T> {
    fn default() -> Self {
        Self::table_i()
    }
}

impl<T: Real> SystemParams<T> {
    /// The reference deployment: suburban blockage, 20 SBS/km², 200 m clusters.
    pub fn table_i() -> Self {
        Self {
            alpha_los: T::lit(2.09),
            alpha_nlos: T::lit(3.75),
            a_los: db_to_linear(T::lit(-41.1)),
            a_nlos: db_to_linear(T::lit(-32.9)),
            g_main: db_to_linear(T::lit(10.0)),
            g_side: db_to_linear(T::lit(-3.01)),
            m_nakagami: 3,
            eta_spread: T::lit(2.0),
            h_sbs: T::lit(30.0),
            h_ue: T::lit(100.0),
            bldg_area_fraction: T::lit(0.3),
            bldg_density: T::lit(200.0),
            bldg_height_scale: T::lit(15.0),
            r_cluster: T::lit(200.0),
            lambda_b: T::lit(20.0),
            sir_threshold: T::one(),
            theta_tilt: T::lit(8.0),
            theta_beam: T::lit(30.0),
            c_f: T::one(),
            p_tx: T::one(),
            h_ground: T::lit(1.5),
            m_ground: 1,
            blockage_denominator: BlockageDenominator::default(),
            lambda_out: None,
            numerics: Numerics::default(),
        }
    }

    /// SBS intensity per m².
    pub fn lambda_b_m2(&self) -> T {
        self.lambda_b * T::lit(1e-6)
    }

    /// Intensity of out-of-cluster interferers per m².
    pub fn lambda_out_m2(&self) -> T {
        self.lambda_out.unwrap_or(self.lambda_b) * T::lit(1e-6)
    }

    /// Intensity of SBSs caching the content, per m².
    pub fn lambda_caching_m2(&self) -> T {
        self.c_f * self.lambda_b_m2()
    }

    /// Intensity of SBSs not caching the content, per m².
    pub fn lambda_noncaching_m2(&self) -> T {
        (T::one() - self.c_f) * self.lambda_b_m2()
    }

    pub fn cluster_area(&self) -> T {
        T::PI() * self.r_cluster * self.r_cluster
    }

    /// Mean number of caching SBSs inside the collaboration disk.
    pub fn mean_cache_count(&self) -> T {
        self.lambda_caching_m2() * self.cluster_area()
    }

    /// Smallest cache-count truncation whose Poisson tail mass is below 1e-9.
    pub fn min_kappa_max(&self) -> usize {
        let mu = self.mean_cache_count().as_f64().max(0.0);
        let mut k = mu.ceil() as usize;
        loop {
            let tail: f64 = (k + 1..k + 400).map(|j| poisson_pmf(j, mu)).sum();
            if tail < 1e-9 {
                return k;
            }
            k += 1;
        }
    }

    pub fn kappa_max(&self) -> usize {
        self.numerics
            .kappa_max
            .unwrap_or_else(|| self.min_kappa_max().max(1))
    }

    /// Buildings per m² times the area fraction, square-rooted and scaled so
    /// that `floor(r * crossing_rate)` counts buildings crossed over `r` metres.
    pub fn crossing_rate(&self) -> T {
        (self.bldg_area_fraction * self.bldg_density).sqrt() / T::lit(1000.0)
    }

    /// Same deployment seen by a handset on the ground.
    pub fn ground_variant(&self) -> Self {
        let mut p = self.clone();
        p.h_ue = self.h_ground;
        p.m_nakagami = self.m_ground;
        p
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let mut positive = |name: &str, x: T| {
            if !(x.is_finite() && x > T::zero()) {
                bad.push(format!("{name} must be finite and > 0 (got {x})"));
            }
        };
        positive("alpha_los", self.alpha_los);
        positive("alpha_nlos", self.alpha_nlos);
        positive("a_los", self.a_los);
        positive("a_nlos", self.a_nlos);
        positive("g_main", self.g_main);
        positive("g_side", self.g_side);
        positive("eta_spread", self.eta_spread);
        positive("h_sbs", self.h_sbs);
        positive("h_ue", self.h_ue);
        positive("bldg_area_fraction", self.bldg_area_fraction);
        positive("bldg_density", self.bldg_density);
        positive("bldg_height_scale", self.bldg_height_scale);
        positive("r_cluster", self.r_cluster);
        positive("lambda_b", self.lambda_b);
        positive("sir_threshold", self.sir_threshold);
        positive("theta_beam", self.theta_beam);
        positive("p_tx", self.p_tx);
        positive("h_ground", self.h_ground);
        positive("r_sim_window", self.numerics.r_sim_window);
        positive("quad_tolerance", self.numerics.quad_tolerance);
        positive("v_max", self.numerics.v_max);
        if let Some(l) = self.lambda_out {
            positive("lambda_out", l);
        }
        if !self.theta_tilt.is_finite() {
            bad.push("theta_tilt must be finite".into());
        }
        if !(self.alpha_los < self.alpha_nlos) {
            bad.push(format!(
                "alpha_los ({}) must be < alpha_nlos ({})",
                self.alpha_los, self.alpha_nlos
            ));
        }
        if !(self.c_f >= T::zero() && self.c_f <= T::one()) {
            bad.push(format!("c_f must lie in [0, 1] (got {})", self.c_f));
        }
        if self.bldg_area_fraction > T::one() {
            bad.push("bldg_area_fraction must be <= 1".into());
        }
        if self.m_nakagami < 1 {
            bad.push("m_nakagami must be an integer >= 1".into());
        }
        if self.m_ground < 1 {
            bad.push("m_ground must be an integer >= 1".into());
        }
        if !(self.numerics.r_sim_window > self.r_cluster) {
            bad.push(format!(
                "r_sim_window ({}) must exceed r_cluster ({})",
                self.numerics.r_sim_window, self.r_cluster
            ));
        }
        if !(self.numerics.v_max > self.r_cluster) {
            bad.push(format!(
                "v_max ({}) must exceed r_cluster ({})",
                self.numerics.v_max, self.r_cluster
            ));
        }
        if let Some(k) = self.numerics.kappa_max {
            let mu = self.mean_cache_count().as_f64().max(0.0);
            let need = mu.ceil() + 8.0 * mu.sqrt();
            if (k as f64) < need {
                bad.push(format!("kappa_max ({k}) must be >= {need:.3}"));
            }
        }
        if self.numerics.n_trials == 0 {
            bad.push("n_trials must be >= 1".into());
        }
        if self.numerics.n_geom == 0 {
            bad.push("n_geom must be >= 1".into());
        }
        if self.numerics.assignment_draws == 0 {
            bad.push("assignment_draws must be >= 1".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    /// Reads a flat key/value config file. Absent keys keep their defaults.
    pub fn load_config(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_str(&text)
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0);
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })?;
        let mut p = Self::table_i();
        let mut seen_db: Vec<&str> = Vec::new();
        for (key, value) in &table {
            let line = line_of_key(text, key);
            let perr = |message: String| Error::Parse { line, message };
            let number = || -> Result<f64> {
                match value {
                    toml::Value::Float(f) => Ok(*f),
                    toml::Value::Integer(i) => Ok(*i as f64),
                    other => Err(perr(format!(
                        "`{key}` expects a number, found {}",
                        other.type_str()
                    ))),
                }
            };
            let integer = || -> Result<u64> {
                match value {
                    toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
                    _ => Err(perr(format!("`{key}` expects a non-negative integer"))),
                }
            };
            if let Some(base) = key.strip_suffix("_db") {
                if table.contains_key(base) {
                    return Err(perr(format!("both `{base}` and `{key}` are set")));
                }
                seen_db.push(base);
                let lin = db_to_linear(T::lit(number()?));
                match base {
                    "a_los" => p.a_los = lin,
                    "a_nlos" => p.a_nlos = lin,
                    "g_main" => p.g_main = lin,
                    "g_side" => p.g_side = lin,
                    "sir_threshold" => p.sir_threshold = lin,
                    _ => return Err(perr(format!("unknown key `{key}`"))),
                }
                continue;
            }
            match key.as_str() {
                "m_nakagami" => p.m_nakagami = integer()? as u32,
                "m_ground" => p.m_ground = integer()? as u32,
                "kappa_max" => p.numerics.kappa_max = Some(integer()? as usize),
                "n_trials" => p.numerics.n_trials = integer()? as usize,
                "config_enum_cap" => p.numerics.config_enum_cap = integer()? as usize,
                // TOML integers stop at i64::MAX; larger seeds are quoted
                "rng_seed" => {
                    p.numerics.rng_seed = match value.as_str() {
                        Some(text) => text
                            .parse()
                            .map_err(|_| perr(format!("`rng_seed` expects an integer, found \"{text}\"")))?,
                        None => integer()?,
                    }
                }
                "n_geom" => p.numerics.n_geom = integer()? as usize,
                "assignment_draws" => p.numerics.assignment_draws = integer()? as usize,
                "blockage_denominator" => {
                    let s = value
                        .as_str()
                        .ok_or_else(|| perr("`blockage_denominator` expects a string".into()))?;
                    p.blockage_denominator = s.parse().map_err(perr)?;
                }
                k => {
                    let x = T::lit(number()?);
                    if !p.set_real(k, x) {
                        return Err(perr(format!("unknown key `{k}`")));
                    }
                }
            }
        }
        p.validate()?;
        Ok(p)
    }

    /// Sets a real-valued field by its config key. Returns false for unknown keys.
    pub fn set_real(&mut self, key: &str, x: T) -> bool {
        let slot = match key {
            "alpha_los" => &mut self.alpha_los,
            "alpha_nlos" => &mut self.alpha_nlos,
            "a_los" => &mut self.a_los,
            "a_nlos" => &mut self.a_nlos,
            "g_main" => &mut self.g_main,
            "g_side" => &mut self.g_side,
            "eta_spread" => &mut self.eta_spread,
            "h_sbs" => &mut self.h_sbs,
            "h_ue" => &mut self.h_ue,
            "bldg_area_fraction" => &mut self.bldg_area_fraction,
            "bldg_density" => &mut self.bldg_density,
            "bldg_height_scale" => &mut self.bldg_height_scale,
            "r_cluster" => &mut self.r_cluster,
            "lambda_b" => &mut self.lambda_b,
            "sir_threshold" => &mut self.sir_threshold,
            "theta_tilt" => &mut self.theta_tilt,
            "theta_beam" => &mut self.theta_beam,
            "c_f" => &mut self.c_f,
            "p_tx" => &mut self.p_tx,
            "h_ground" => &mut self.h_ground,
            "r_sim_window" => &mut self.numerics.r_sim_window,
            "quad_tolerance" => &mut self.numerics.quad_tolerance,
            "v_max" => &mut self.numerics.v_max,
            "lambda_out" => {
                self.lambda_out = Some(x);
                return true;
            }
            _ => return false,
        };
        *slot = x;
        true
    }

    /// Serialises every field in the config format, linear units.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let mut real = |k: &str, x: T| {
            let _ = writeln!(s, "{k} = {:?}", x.as_f64());
        };
        real("alpha_los", self.alpha_los);
        real("alpha_nlos", self.alpha_nlos);
        real("a_los", self.a_los);
        real("a_nlos", self.a_nlos);
        real("g_main", self.g_main);
        real("g_side", self.g_side);
        real("eta_spread", self.eta_spread);
        real("h_sbs", self.h_sbs);
        real("h_ue", self.h_ue);
        real("bldg_area_fraction", self.bldg_area_fraction);
        real("bldg_density", self.bldg_density);
        real("bldg_height_scale", self.bldg_height_scale);
        real("r_cluster", self.r_cluster);
        real("lambda_b", self.lambda_b);
        real("sir_threshold", self.sir_threshold);
        real("theta_tilt", self.theta_tilt);
        real("theta_beam", self.theta_beam);
        real("c_f", self.c_f);
        real("p_tx", self.p_tx);
        real("h_ground", self.h_ground);
        real("r_sim_window", self.numerics.r_sim_window);
        real("quad_tolerance", self.numerics.quad_tolerance);
        real("v_max", self.numerics.v_max);
        if let Some(l) = self.lambda_out {
            real("lambda_out", l);
        }
        let _ = writeln!(s, "m_nakagami = {}", self.m_nakagami);
        let _ = writeln!(s, "m_ground = {}", self.m_ground);
        let _ = writeln!(s, "n_trials = {}", self.numerics.n_trials);
        let _ = writeln!(s, "config_enum_cap = {}", self.numerics.config_enum_cap);
        if i64::try_from(self.numerics.rng_seed).is_ok() {
            let _ = writeln!(s, "rng_seed = {}", self.numerics.rng_seed);
        } else {
            let _ = writeln!(s, "rng_seed = \"{}\"", self.numerics.rng_seed);
        }
        let _ = writeln!(s, "n_geom = {}", self.numerics.n_geom);
        let _ = writeln!(s, "assignment_draws = {}", self.numerics.assignment_draws);
        if let Some(k) = self.numerics.kappa_max {
            let _ = writeln!(s, "kappa_max = {k}");
        }
        let _ = writeln!(
            s,
            "blockage_denominator = \"{}\"",
            self.blockage_denominator.as_str()
        );
        s
    }
}

fn line_of_key(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_file_gives_defaults() {
        let p = SystemParams::<f64>::from_config_str("").unwrap();
        assert_eq!(p, SystemParams::table_i());
        assert!((p.a_los - 10f64.powf(-4.11)).abs() < 1e-18);
        assert!((p.g_side - 0.5001).abs() < 1e-4);
        assert!((p.mean_cache_count() - 2.5133).abs() < 1e-3);
        assert_eq!(p.kappa_max(), 17);
        let tail = 1.0 - (0..=17).map(|k| crate::caching::caching_count_pmf(k, &p)).sum::<f64>();
        assert!(tail < 1e-9);
    }

    #[test]
    fn out_of_range_caching_probability_is_named() {
        let err = SystemParams::<f64>::from_config_str("c_f = 1.5").unwrap_err();
        match err {
            Error::Validation(list) => assert!(list.iter().any(|m| m.contains("c_f"))),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn single_key_override() {
        let p = SystemParams::<f64>::from_config_str("r_cluster = 500").unwrap();
        let mut q = SystemParams::table_i();
        q.r_cluster = 500.0;
        assert_eq!(p, q);
    }

    #[test]
    fn db_keys_are_converted() {
        let p = SystemParams::<f64>::from_config_str("sir_threshold_db = 10\ng_main_db = 0").unwrap();
        assert!((p.sir_threshold - 10.0).abs() < 1e-12);
        assert_eq!(p.g_main, 1.0);
        assert!(SystemParams::<f64>::from_config_str("g_main = 1\ng_main_db = 0").is_err());
    }

    #[test]
    fn parse_errors_carry_line() {
        match SystemParams::<f64>::from_config_str("c_f = 1\nr_cluster = = 3\n").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
        match SystemParams::<f64>::from_config_str("c_f = 1\n\nbogus = 3\n").unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("bogus"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn invariants_are_all_reported() {
        let text = "alpha_los = 4\nr_sim_window = 100\nkappa_max = 3\n";
        match SystemParams::<f64>::from_config_str(text).unwrap_err() {
            Error::Validation(list) => {
                assert!(list.iter().any(|m| m.contains("alpha_los")));
                assert!(list.iter().any(|m| m.contains("r_sim_window")));
                assert!(list.iter().any(|m| m.contains("kappa_max")));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn f32_defaults_match() {
        let p = SystemParams::<f32>::table_i();
        assert!(p.validate().is_ok());
        assert!((p.a_nlos - 10f32.powf(-3.29)).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn dump_round_trips(
            c_f in 0.0f64..=1.0,
            r_cluster in 10.0f64..900.0,
            lambda_b in 0.5f64..80.0,
            h_ue in 35.0f64..300.0,
            a_los_db in -60.0f64..-20.0,
            m in 1u32..6,
            seed in any::<u64>(),
            kappa in proptest::option::of(200usize..400),
            nakagami_denominator in any::<bool>(),
        ) {
            let mut p = SystemParams::<f64>::table_i();
            p.c_f = c_f;
            p.r_cluster = r_cluster;
            p.lambda_b = lambda_b;
            p.h_ue = h_ue;
            p.a_los = db_to_linear(a_los_db);
            p.m_nakagami = m;
            p.numerics.rng_seed = seed;
            p.numerics.kappa_max = kappa;
            if nakagami_denominator {
                p.blockage_denominator = BlockageDenominator::NakagamiPlusOne;
            }
            prop_assume!(p.validate().is_ok());
            let q = SystemParams::<f64>::from_config_str(&p.dump()).unwrap();
            prop_assert_eq!(p, q);
        }
    }
}

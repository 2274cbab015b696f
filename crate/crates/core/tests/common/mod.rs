//! Checks shared by the property tests and the acceptance harness. Each
//! returns a one-line summary on success.
#![allow(dead_code)]

use aerocomp::analytic::{
    coverage_curve, conditional_coverage, gamma_ccdf_series, laplace_derivatives_of, ConditionalCoverage,
    DirectSeries, InterferenceField,
};
use aerocomp::caching::{caching_count_pmf, thin_in_cluster};
use aerocomp::channel::{sample_nakagami_power, LinkModel};
use aerocomp::geometry::{sample_bpp_disk, sample_ppp_annulus, PointSet};
use aerocomp::rng::substream;
use aerocomp::sir_mc::{simulate_curve, WorldSampler};
use aerocomp::stats::{ks_distance, ks_pvalue};
use aerocomp::{Params, Scheme};
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Gamma};
use statrs::function::gamma::gamma_ur;

pub type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Small simulation window so Monte Carlo and the truncated field agree.
pub const WINDOW: f64 = 2000.0;

pub fn windowed() -> Params {
    let mut p = Params::table_i();
    p.numerics.r_sim_window = WINDOW;
    p
}

pub fn bpp_distances() -> Check {
    let r_c = 200.0;
    let mut rng = substream(101, 0);
    let mut d: Vec<f64> = sample_bpp_disk(20_000, r_c, &mut rng).iter().collect();
    ensure(d.iter().all(|&r| (0.0..=r_c).contains(&r)), || "BPP point outside the disk".into())?;
    let ks = ks_distance(&mut d, |r| (r / r_c).powi(2));
    let pv = ks_pvalue(ks, d.len());
    ensure(pv > 0.01, || format!("BPP radial law rejected: KS {ks:.4}, p {pv:.4}"))?;
    Ok(format!("BPP radial KS p = {pv:.3}"))
}

pub fn ppp_annulus() -> Check {
    let (lam, a, b) = (20e-6, 200.0, 3000.0);
    let expected = lam * std::f64::consts::PI * (b * b - a * a);
    let mut counts = Vec::new();
    let mut pooled = Vec::new();
    for i in 0..2000 {
        let pts: PointSet<f64> = sample_ppp_annulus(lam, a, b, &mut substream(102, i));
        counts.push(pts.len() as f64);
        if i < 100 {
            pooled.extend(pts.iter());
        }
    }
    let (m, se) = mean_se(&counts);
    ensure((m - expected).abs() < 4.0 * se, || format!("PPP count mean {m:.3} vs {expected:.3} (se {se:.3})"))?;
    let var = counts.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (counts.len() as f64 - 1.0);
    ensure((var / m - 1.0).abs() < 0.15, || format!("PPP count dispersion {:.3}, expected 1", var / m))?;
    ensure(pooled.iter().all(|&r| r >= a && r <= b), || "PPP point outside the annulus".into())?;
    let ks = ks_distance(&mut pooled, |r| (r * r - a * a) / (b * b - a * a));
    let pv = ks_pvalue(ks, pooled.len());
    ensure(pv > 0.01, || format!("PPP radial law rejected: KS {ks:.4}, p {pv:.4}"))?;
    Ok(format!("PPP count mean {m:.2} (expected {expected:.2}), radial KS p = {pv:.3}"))
}

pub fn nakagami_power() -> Check {
    let mut worst: f64 = 1.0;
    for (m, eta) in [(1u32, 1.0), (3, 2.0), (8, 0.5)] {
        let mut rng = substream(103, m as u64);
        let mut xs: Vec<f64> = (0..20_000).map(|_| sample_nakagami_power(m, eta, &mut rng)).collect();
        let g = Gamma::new(m as f64, m as f64 / eta).unwrap();
        let ks = ks_distance(&mut xs, |x| g.cdf(x));
        let pv = ks_pvalue(ks, xs.len());
        ensure(pv > 0.01, || format!("Nakagami power m={m}, eta={eta} rejected: p {pv:.4}"))?;
        worst = worst.min(pv);
    }
    Ok(format!("Nakagami power vs Gamma(m, eta/m): smallest KS p = {worst:.3}"))
}

pub fn los_sampling() -> Check {
    let p = Params::table_i();
    let link = LinkModel::new(&p, p.h_ue, 5000.0);
    let n = 20_000;
    for (i, r) in [30.0, 150.0, 400.0, 1200.0].into_iter().enumerate() {
        let mut rng = substream(104, i as u64);
        let mut hits = 0usize;
        for _ in 0..n {
            let s = link.sample_link(r, p.m_nakagami, &mut rng);
            ensure(s.zeta == link.zeta(r, s.is_los), || "link gain disagrees with its LoS state".into())?;
            ensure((s.amp_fading * s.amp_fading - s.pow_fading).abs() <= 1e-12 * s.pow_fading.max(1.0), || {
                "amplitude and power fading disagree".into()
            })?;
            hits += s.is_los as usize;
        }
        let q = link.los_probability(r);
        let f = hits as f64 / n as f64;
        let se = (q * (1.0 - q) / n as f64).sqrt().max(1e-9);
        ensure((f - q).abs() <= 4.0 * se, || format!("LoS frequency {f:.4} vs {q:.4} at r = {r}"))?;
    }
    Ok("LoS frequencies within 4 SE of the model at 4 distances".into())
}

pub fn thinning_and_counts() -> Check {
    let pts = PointSet::new((0..100_000).map(|i| i as f64 * 1e-3).collect());
    let part = thin_in_cluster(&pts, 0.3, &mut substream(105, 0));
    let n = pts.len() as f64;
    let f = part.caching_in.len() as f64 / n;
    ensure(part.caching_in.len() + part.noncaching_in.len() == pts.len(), || "thinning lost points".into())?;
    ensure((f - 0.3).abs() < 4.0 * (0.21 / n).sqrt(), || format!("thinning kept {f:.4}, expected 0.3"))?;
    let all = thin_in_cluster(&pts, 1.0, &mut substream(105, 1));
    ensure(all.noncaching_in.is_empty(), || "c_f = 1 dropped points".into())?;

    let mut p = windowed();
    p.c_f = 0.6;
    let sampler = WorldSampler::new(&p);
    let draws = 20_000;
    let mut hist = [0usize; 9];
    for t in 0..draws {
        let k = sampler.sample(&mut substream(106, t)).servers.len();
        if k < hist.len() {
            hist[k] += 1;
        }
    }
    for (k, &h) in hist.iter().enumerate() {
        let q: f64 = caching_count_pmf(k, &p);
        let f = h as f64 / draws as f64;
        let se = (q * (1.0 - q) / draws as f64).sqrt();
        ensure((f - q).abs() <= 4.0 * se + 1e-4, || format!("P(kappa = {k}): {f:.4} vs {q:.4}"))?;
    }
    Ok(format!("thinning fraction {f:.4}; caching counts match Poisson(mean {:.3})", p.mean_cache_count()))
}

pub fn gamma_ccdf_oracle() -> Check {
    let mut worst: f64 = 0.0;
    for k in 1..=60usize {
        for i in 0..=80 {
            let z = 0.01 * 1.1f64.powi(i);
            let theta = 2.5;
            let ours = gamma_ccdf_series(z * theta, k, theta);
            let oracle = gamma_ur(k as f64, z);
            worst = worst.max((ours - oracle).abs());
        }
    }
    ensure(worst <= 1e-10, || format!("Gamma tail differs from the incomplete-gamma oracle by {worst:e}"))?;
    Ok(format!("Gamma tail vs incomplete gamma, k <= 60: max error {worst:.1e}"))
}

/// Laplace argument at which `S(ϖ)` reaches `target` (negative), by bisection in `ln ϖ`.
pub fn varpi_where(field: &InterferenceField<f64>, target: f64) -> f64 {
    let s = |w: f64| field.exponent_derivatives(w, 0).unwrap()[0];
    let (mut lo, mut hi) = (1.0f64.ln(), 1e16f64.ln());
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if s(mid.exp()) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

pub fn laplace_monte_carlo() -> Check {
    let p = windowed();
    let lam_in = p.lambda_noncaching_m2();
    let field = InterferenceField::truncated(&p, lam_in, WINDOW);
    let sampler = WorldSampler::new(&p);
    let n = 20_000u64;
    let interference: Vec<f64> = (0..n)
        .map(|t| sampler.sample_interference(lam_in, &mut substream(107, t)))
        .collect();
    let mut report = Vec::new();
    for target in [-0.2, -1.0, -3.0] {
        let w = varpi_where(&field, target);
        let analytic = field.exponent_derivatives(w, 0).map_err(|e| e.to_string())?[0].exp();
        let xs: Vec<f64> = interference.iter().map(|&i| (-w * i).exp()).collect();
        let (mc, se) = mean_se(&xs);
        ensure((mc - analytic).abs() <= 3.0 * se, || {
            format!("L({w:e}) = {analytic:.5} but Monte Carlo gives {mc:.5} +- {se:.5}")
        })?;
        report.push(format!("{:.1}SE", (mc - analytic).abs() / se));
    }
    Ok(format!("Laplace transform vs Monte Carlo: deviations {}", report.join(", ")))
}

fn precise() -> Params {
    let mut p = windowed();
    p.numerics.quad_tolerance = 1e-12;
    p
}

pub fn derivatives_finite_difference() -> Check {
    let p = precise();
    let field = InterferenceField::truncated(&p, p.lambda_noncaching_m2(), WINDOW);
    let mut worst: f64 = 0.0;
    for target in [-0.5, -2.0] {
        let w = varpi_where(&field, target);
        let h = 1e-2 * w;
        let at = |x: f64| laplace_derivatives_of(&field, x, 5).unwrap().values;
        let (c, p1, m1, p2, m2) = (at(w), at(w + h), at(w - h), at(w + 2.0 * h), at(w - 2.0 * h));
        for k in 1..=5 {
            let fd = (-p2[k - 1] + 8.0 * p1[k - 1] - 8.0 * m1[k - 1] + m2[k - 1]) / (12.0 * h);
            let rel = (fd - c[k]).abs() / c[k].abs();
            ensure(rel < 1e-5, || format!("order {k} at {w:e}: analytic {:e}, finite difference {fd:e}", c[k]))?;
            worst = worst.max(rel);
        }
    }
    Ok(format!("derivatives vs finite differences, orders 1-5: max relative error {worst:.1e}"))
}

pub fn derivative_signs() -> Check {
    let p = precise();
    let field = InterferenceField::new(&p);
    for target in [-0.05, -1.0, -10.0] {
        let w = varpi_where(&field, target);
        let d = laplace_derivatives_of(&field, w, 30).map_err(|e| e.to_string())?.values;
        for (k, v) in d.iter().enumerate() {
            let signed = if k % 2 == 0 { *v } else { -*v };
            ensure(signed > 0.0 && signed.is_finite(), || format!("(-1)^{k} L^({k})({w:e}) = {signed:e}"))?;
        }
    }
    Ok("derivative signs alternate through order 30 at 3 points".into())
}

/// `Σ_{j<m} (-s)^j / j! L^(j)(s)` for one server of path gain `zeta`.
fn single_server_closed_form(field: &InterferenceField<f64>, p: &Params, zeta: f64, theta: f64) -> f64 {
    let m = p.m_nakagami as usize;
    let s = theta * m as f64 / (p.p_tx * p.eta_spread * zeta);
    let d = laplace_derivatives_of(field, s, m - 1).unwrap().values;
    let mut term = 1.0;
    let mut acc = 0.0;
    for (j, v) in d.iter().enumerate() {
        if j > 0 {
            term *= -s / j as f64;
        }
        acc += term * v;
    }
    acc
}

pub fn single_server_closed_form_check() -> Check {
    let mut p = Params::table_i();
    p.numerics.quad_tolerance = 1e-11;
    let field = InterferenceField::new(&p);
    let link = LinkModel::new(&p, p.h_ue, p.r_cluster);
    let mut worst: f64 = 0.0;
    for r in [0.0, 40.0, 120.0, 199.0] {
        for theta in [0.01, 0.1, 1.0] {
            let q = link.los_probability(r);
            let exact = q * single_server_closed_form(&field, &p, link.zeta(r, true), theta)
                + (1.0 - q) * single_server_closed_form(&field, &p, link.zeta(r, false), theta);
            let ours = conditional_coverage(&[r], &p, theta).map_err(|e| e.to_string())?;
            worst = worst.max((ours - exact).abs());
        }
    }
    ensure(worst <= 1e-8, || format!("single-server coverage differs from closed form by {worst:e}"))?;
    Ok(format!("single-server conditional coverage vs closed form: max error {worst:.1e}"))
}

pub fn two_server_conditional() -> Check {
    let p = windowed();
    let lam_in = p.lambda_noncaching_m2();
    let field = InterferenceField::truncated(&p, lam_in, WINDOW);
    let series = DirectSeries::new(field, 2 * p.m_nakagami as usize);
    let cond = ConditionalCoverage::new(&p, &series);
    let r_list = [50.0, 150.0];
    let thetas = [0.03, 0.1, 0.3];
    let analytic = cond
        .evaluate(&r_list, &thetas, &mut substream(108, 0))
        .map_err(|e| e.to_string())?;

    let sampler = WorldSampler::new(&p);
    let link = sampler.link().clone();
    let m = p.m_nakagami as f64;
    let n = 20_000usize;
    // per trial: exact Cauchy SIR, and the SIR with the desired power drawn
    // from Gamma(m kappa, matched scale) as the bound assumes
    let (cauchy, modelled): (Vec<f64>, Vec<f64>) = (0..n as u64)
        .map(|t| {
            let mut rng = substream(109, t);
            let links: Vec<_> = r_list.iter().map(|&r| link.sample_link(r, p.m_nakagami, &mut rng)).collect();
            let desired: f64 = links.iter().map(|s| s.zeta * s.pow_fading).sum();
            let (s1, s2) = links.iter().fold((0.0, 0.0), |(a, b), s| (a + s.zeta, b + s.zeta * s.zeta));
            let scale = p.eta_spread / m * s2 / s1;
            let shape = m * r_list.len() as f64;
            let j: f64 = rng.sample(rand_distr::Gamma::new(shape, scale).unwrap());
            let i = sampler.sample_interference(lam_in, &mut rng);
            let k = r_list.len() as f64 * p.p_tx;
            (k * desired / i, k * j / i)
        })
        .unzip();
    let frac = |xs: &[f64], th: f64| xs.iter().filter(|&&s| s > th).count() as f64 / n as f64;
    let se = |q: f64| (q * (1.0 - q) / n as f64).sqrt();
    let mut report = Vec::new();
    for (t, &theta) in thetas.iter().enumerate() {
        let (c, g) = (frac(&cauchy, theta), frac(&modelled, theta));
        ensure(analytic[t] >= c - 3.0 * se(c), || {
            format!("theta {theta}: analytic {:.4} below Cauchy Monte Carlo {c:.4}", analytic[t])
        })?;
        ensure((analytic[t] - g).abs() <= 3.0 * se(g), || {
            format!("theta {theta}: analytic {:.4}, Gamma-model Monte Carlo {g:.4} +- {:.4}", analytic[t], se(g))
        })?;
        report.push(format!("{:.3}/{g:.3}/{c:.3}", analytic[t]));
    }
    Ok(format!(
        "two-server conditional (analytic/model Monte Carlo/Cauchy Monte Carlo): {}",
        report.join(", ")
    ))
}

pub fn determinism() -> Check {
    let p = windowed();
    let schemes = Scheme::ALL;
    let thetas = [0.1, 1.0];
    let run = || simulate_curve(&p, &schemes, &thetas, 400, 77).unwrap();
    let a = run();
    let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(run);
    let c = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
    ensure(a == b && b == c, || "simulation depends on the worker count".into())?;
    let other = simulate_curve(&p, &schemes, &thetas, 400, 78).unwrap();
    ensure(other != a, || "different seeds gave identical simulations".into())?;

    let mut g = Params::table_i().ground_variant();
    g.numerics.n_geom = 60;
    let curve = |seed: u64| {
        let mut q = g.clone();
        q.numerics.rng_seed = seed;
        coverage_curve(&q, &[0.5, 2.0]).unwrap()
    };
    let (x, y) = (curve(5), curve(5));
    ensure(x == y, || "analytic curve is not reproducible".into())?;
    ensure(curve(6) != x, || "analytic curve ignores the seed".into())?;

    let mut rng_a = substream(9, 3);
    let mut rng_b = substream(9, 3);
    ensure(
        (0..100).all(|_| rng_a.random::<u64>() == rng_b.random::<u64>()),
        || "substreams are not reproducible".into(),
    )?;
    Ok("simulation and analytic outputs reproducible across seeds and worker counts".into())
}

pub type NamedCheck = (&'static str, fn() -> Check);

pub const PROPERTY_SUITE: [NamedCheck; 12] = [
    ("bpp distances", bpp_distances),
    ("ppp annulus", ppp_annulus),
    ("nakagami power", nakagami_power),
    ("los sampling", los_sampling),
    ("thinning and counts", thinning_and_counts),
    ("gamma tail oracle", gamma_ccdf_oracle),
    ("laplace monte carlo", laplace_monte_carlo),
    ("finite differences", derivatives_finite_difference),
    ("derivative signs", derivative_signs),
    ("single-server closed form", single_server_closed_form_check),
    ("two-server conditional", two_server_conditional),
    ("determinism", determinism),
];

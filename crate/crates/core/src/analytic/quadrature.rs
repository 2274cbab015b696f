//! Adaptive Gauss–Kronrod (7/15) quadrature for vector-valued integrands
//! over a sequence of panels whose endpoints are known discontinuities.

use crate::num::Real;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const MAX_DEPTH: usize = 40;

/// How the error budget is shared between components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNorm {
    /// Each component meets `rel_tol` relative to its own magnitude.
    PerComponent,
    /// The summed error meets `rel_tol` relative to the L1 norm of the result.
    L1,
}

/// Integrand returning `dim` components at once.
pub trait VectorIntegrand<T> {
    fn dim(&self) -> usize;
    /// Overwrites `out[..dim]` with the integrand at `x`.
    fn eval(&self, x: T, out: &mut [T]);
}

impl<T, F> VectorIntegrand<T> for (usize, F)
where
    F: Fn(T, &mut [T]),
{
    fn dim(&self) -> usize {
        self.0
    }

    fn eval(&self, x: T, out: &mut [T]) {
        (self.1)(x, out)
    }
}

#[derive(Debug, Clone)]
pub struct QuadResult<T> {
    pub values: Vec<T>,
    pub abs_err: Vec<T>,
    /// Panels that hit the subdivision limit without meeting their budget.
    pub unconverged: usize,
    pub evaluations: usize,
}

struct Rule<T> {
    xgk: [T; 8],
    wg: [T; 4],
    wgk: [T; 8],
}

impl<T: Real> Rule<T> {
    fn new() -> Self {
        Self {
            xgk: XGK.map(T::lit),
            wg: WG.map(T::lit),
            wgk: WGK.map(T::lit),
        }
    }
}

struct Workspace<T> {
    fx: Vec<T>,
    gauss: Vec<T>,
}

/// Integrates over `[breakpoints[0], breakpoints[last]]`, one panel per
/// consecutive breakpoint pair, until every component's estimated error is at
/// most `rel_tol` times its magnitude.
pub fn integrate_panels<T: Real, F: VectorIntegrand<T>>(
    f: &F,
    breakpoints: &[T],
    rel_tol: T,
    norm: ErrorNorm,
) -> QuadResult<T> {
    let dim = f.dim();
    let rule = Rule::new();
    let mut ws = Workspace {
        fx: vec![T::zero(); dim],
        gauss: vec![T::zero(); dim],
    };
    let panels: Vec<(T, T)> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1]))
        .collect();
    let n_panels = panels.len().max(1);

    let mut first: Vec<(Vec<T>, Vec<T>)> = Vec::with_capacity(panels.len());
    let mut totals = vec![T::zero(); dim];
    let mut evaluations = 0;
    for &(a, b) in &panels {
        let mut k = vec![T::zero(); dim];
        let mut e = vec![T::zero(); dim];
        gk15(f, a, b, &rule, &mut ws, &mut k, &mut e);
        evaluations += 15;
        for c in 0..dim {
            totals[c] = totals[c] + k[c];
        }
        first.push((k, e));
    }

    let share = T::from_usize_lossy(n_panels);
    let half = T::lit(0.5);
    let mut values = vec![T::zero(); dim];
    let mut abs_err = vec![T::zero(); dim];
    let mut unconverged = 0;
    let mut budget = vec![T::zero(); dim];
    let dim_t = T::from_usize_lossy(dim.max(1));
    let l1 = |v: &[T]| v.iter().fold(T::zero(), |acc, x| acc + x.abs());
    let total_l1 = l1(&totals);
    for (&(a, b), (k, e)) in panels.iter().zip(first) {
        match norm {
            ErrorNorm::PerComponent => {
                for c in 0..dim {
                    budget[c] = rel_tol * half * (k[c].abs() + totals[c].abs() / share);
                }
            }
            ErrorNorm::L1 => {
                let b = rel_tol * half * (l1(&k) + total_l1 / share) / dim_t;
                budget.iter_mut().for_each(|x| *x = b);
            }
        }
        refine(
            f,
            a,
            b,
            k,
            e,
            &budget,
            norm,
            0,
            &rule,
            &mut ws,
            &mut values,
            &mut abs_err,
            &mut unconverged,
            &mut evaluations,
        );
    }
    QuadResult {
        values,
        abs_err,
        unconverged,
        evaluations,
    }
}

#[allow(clippy::too_many_arguments)]
fn refine<T: Real, F: VectorIntegrand<T>>(
    f: &F,
    a: T,
    b: T,
    kron: Vec<T>,
    err: Vec<T>,
    budget: &[T],
    norm: ErrorNorm,
    depth: usize,
    rule: &Rule<T>,
    ws: &mut Workspace<T>,
    values: &mut [T],
    abs_err: &mut [T],
    unconverged: &mut usize,
    evaluations: &mut usize,
) {
    let tiny = T::min_positive_value();
    let ok = match norm {
        ErrorNorm::PerComponent => err
            .iter()
            .zip(budget)
            .all(|(&e, &bgt)| e <= bgt || bgt <= tiny && e <= tiny),
        ErrorNorm::L1 => {
            let (e, bgt) = err
                .iter()
                .zip(budget)
                .fold((T::zero(), T::zero()), |(se, sb), (&e, &b)| (se + e, sb + b));
            e <= bgt || bgt <= tiny && e <= tiny
        }
    };
    if ok || depth >= MAX_DEPTH {
        if !ok {
            *unconverged += 1;
        }
        for c in 0..values.len() {
            values[c] = values[c] + kron[c];
            abs_err[c] = abs_err[c] + err[c];
        }
        return;
    }
    let mid = a + (b - a) * T::lit(0.5);
    let dim = values.len();
    let child_budget: Vec<T> = budget.iter().map(|&x| x * T::lit(0.5)).collect();
    for (lo, hi) in [(a, mid), (mid, b)] {
        let mut k = vec![T::zero(); dim];
        let mut e = vec![T::zero(); dim];
        gk15(f, lo, hi, rule, ws, &mut k, &mut e);
        *evaluations += 15;
        refine(
            f,
            lo,
            hi,
            k,
            e,
            &child_budget,
            norm,
            depth + 1,
            rule,
            ws,
            values,
            abs_err,
            unconverged,
            evaluations,
        );
    }
}

fn gk15<T: Real, F: VectorIntegrand<T>>(
    f: &F,
    a: T,
    b: T,
    rule: &Rule<T>,
    ws: &mut Workspace<T>,
    kron: &mut [T],
    err: &mut [T],
) {
    let center = (a + b) * T::lit(0.5);
    let half = (b - a) * T::lit(0.5);
    let dim = kron.len();
    for c in 0..dim {
        kron[c] = T::zero();
        ws.gauss[c] = T::zero();
    }
    f.eval(center, &mut ws.fx);
    for c in 0..dim {
        kron[c] = ws.fx[c] * rule.wgk[7];
        ws.gauss[c] = ws.fx[c] * rule.wg[3];
    }
    for j in 0..7 {
        let dx = half * rule.xgk[j];
        for x in [center - dx, center + dx] {
            f.eval(x, &mut ws.fx);
            for c in 0..dim {
                kron[c] = kron[c] + ws.fx[c] * rule.wgk[j];
                if j % 2 == 1 {
                    ws.gauss[c] = ws.gauss[c] + ws.fx[c] * rule.wg[j / 2];
                }
            }
        }
    }
    for c in 0..dim {
        kron[c] = kron[c] * half;
        err[c] = (kron[c] - ws.gauss[c] * half).abs();
    }
}

/// Scalar convenience wrapper.
pub fn integrate<T: Real>(f: impl Fn(T) -> T, breakpoints: &[T], rel_tol: T) -> (T, T) {
    let g = (1usize, |x: T, out: &mut [T]| out[0] = f(x));
    let r = integrate_panels(&g, breakpoints, rel_tol, ErrorNorm::PerComponent);
    (r.values[0], r.abs_err[0])
}

//! Scalar root finding, line search and adaptive quadrature.
//!
//! Everything here is derivative-free and works on closures over `f64`.

use crate::error::{Error, Result};

const MAX_BISECTIONS: usize = 400;
const MAX_EXPANSIONS: usize = 200;
const MAX_QUAD_DEPTH: u32 = 48;

/// Grows `hi` geometrically from `start` until `pred(hi)` holds.
pub fn expand_upper<F>(start: f64, factor: f64, mut pred: F) -> Result<f64>
where
    F: FnMut(f64) -> bool,
{
    let mut hi = start;
    for _ in 0..MAX_EXPANSIONS {
        if pred(hi) {
            return Ok(hi);
        }
        hi *= factor;
        if !hi.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence {
        routine: "expand_upper",
        detail: format!("no bracket found up to {hi}"),
    })
}

/// Outcome of a bisection: the final bracket plus the point returned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    pub lo: f64,
    pub hi: f64,
    pub x: f64,
    pub iterations: usize,
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
///
/// `f(lo)` and `f(hi)` must not share a strict sign. Stops when
/// `|f(mid)| <= f_tol(mid)` or when the bracket is no wider than `x_tol`.
pub fn bisect<F, T>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64, mut f_tol: T) -> Result<Bisection>
where
    F: FnMut(f64) -> Result<f64>,
    T: FnMut(f64) -> f64,
{
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(Bisection { lo, hi: lo, x: lo, iterations: 0 });
    }
    if f_hi == 0.0 {
        return Ok(Bisection { lo: hi, hi, x: hi, iterations: 0 });
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NonConvergence {
            routine: "bisect",
            detail: format!("no sign change on [{lo}, {hi}] (f = {f_lo}, {f_hi})"),
        });
    }
    let lo_positive = f_lo > 0.0;
    for it in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= x_tol || mid <= lo || mid >= hi {
            return Ok(Bisection { lo, hi, x: mid, iterations: it });
        }
        let fm = f(mid)?;
        if fm.abs() <= f_tol(mid) {
            return Ok(Bisection { lo, hi, x: mid, iterations: it });
        }
        if (fm > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence {
        routine: "bisect",
        detail: format!("bracket [{lo}, {hi}] after {MAX_BISECTIONS} halvings"),
    })
}

/// Golden-section search for a minimum of `f` on `[a, b]`. Returns `(x_min, f_min)`.
pub fn golden_section<F>(mut f: F, mut a: f64, mut b: f64, x_tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > x_tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let (fa, fb) = (f(a)?, f(b)?);
    // endpoints matter when the minimum sits on the boundary of the bracket
    let best = [(a, fa), (c, fc), (d, fd), (b, fb)]
        .into_iter()
        .fold((f64::NAN, f64::INFINITY), |acc, p| if p.1 < acc.1 { p } else { acc });
    Ok(best)
}

/// Minimizes `f` over `[lo, hi]`: a uniform scan locates the best cell, then
/// golden-section refines inside the neighbouring cells.
pub fn scan_then_golden<F>(mut f: F, lo: f64, hi: f64, cells: usize, x_tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let cells = cells.max(2);
    let step = (hi - lo) / cells as f64;
    let mut best = (lo, f(lo)?);
    let mut best_idx = 0;
    for j in 1..=cells {
        let x = lo + step * j as f64;
        let v = f(x)?;
        if v < best.1 {
            best = (x, v);
            best_idx = j;
        }
    }
    let a = lo + step * best_idx.saturating_sub(1) as f64;
    let b = (lo + step * (best_idx + 1) as f64).min(hi);
    let refined = golden_section(&mut f, a, b, x_tol)?;
    Ok(if refined.1 <= best.1 { refined } else { best })
}

// Kronrod 15-point nodes (nonnegative half) and weights, with the embedded Gauss 7-point weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod_15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn adapt<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    let (value, err) = gauss_kronrod_15(f, a, b);
    if err <= tol || (b - a) <= f64::EPSILON * a.abs().max(1.0) {
        return Ok(value);
    }
    if depth >= MAX_QUAD_DEPTH {
        return Err(Error::NonConvergence {
            routine: "integrate",
            detail: format!("error estimate {err:e} on [{a}, {b}] at max depth"),
        });
    }
    let mid = 0.5 * (a + b);
    Ok(adapt(f, a, mid, 0.5 * tol, depth + 1)? + adapt(f, mid, b, 0.5 * tol, depth + 1)?)
}

/// Adaptive Gauss–Kronrod (7/15) quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    adapt(&mut f, a, b, tol, 0)
}

/// Integral of `f` over `[a, ∞)` via the map `y = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, tol: f64) -> Result<f64> {
    integrate(
        |t| {
            let s = 1.0 - t;
            f(a + t / s) / (s * s)
        },
        0.0,
        1.0,
        tol,
    )
}

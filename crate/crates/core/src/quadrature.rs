//! Globally adaptive 15-point Gauss–Kronrod quadrature.
//!
//! Finite pieces are integrated directly. Semi-infinite pieces use the
//! substitution `z = a·t^{-k}` with `k = 2/(p-1)` for integrands decaying
//! like `|z|^{-p}`, which maps the tail onto `(0, 1]` with a smooth
//! integrand vanishing at `t = 0`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
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
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and budget for the adaptive driver.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-300, max_intervals: 4000 }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

/// Integral estimate with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

/// Result of a single 15-point rule over `[a, b]`.
#[derive(Debug, Clone, Copy)]
pub struct Rule {
    pub value: f64,
    pub error: f64,
}

/// One Gauss–Kronrod 7/15 evaluation with the QUADPACK error heuristic.
pub fn gk15<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> Rule {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = resk * h;
    let resabs = resabs * h.abs();
    let resasc = resasc * h.abs();
    let mut err = ((resk - resg) * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Rule { value, error: err }
}

#[derive(Debug, Clone, Copy)]
enum Piece {
    Direct,
    /// `z = a·t^{-k}` on `t ∈ (0, 1]`, `a > 0`.
    Upper {
        a: f64,
        k: f64,
    },
    /// `z = -a·t^{-k}` on `t ∈ (0, 1]`, `a > 0`.
    Lower {
        a: f64,
        k: f64,
    },
}

struct Segment {
    piece: Piece,
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn eval_piece<F: FnMut(f64) -> f64>(f: &mut F, piece: Piece, t: f64) -> f64 {
    match piece {
        Piece::Direct => f(t),
        Piece::Upper { a, k } | Piece::Lower { a, k } => {
            let z = a * t.powf(-k);
            if !z.is_finite() {
                return 0.0;
            }
            let z = if matches!(piece, Piece::Lower { .. }) { -z } else { z };
            let fz = f(z);
            if fz == 0.0 {
                return 0.0;
            }
            let v = fz * a * k * t.powf(-k - 1.0);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        }
    }
}

fn run<F: FnMut(f64) -> f64>(mut f: F, pieces: Vec<(Piece, f64, f64)>, opts: QuadOptions) -> Result<Quadrature> {
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut bad_point: Option<f64> = None;
    let rule = |f: &mut F, piece: Piece, lo: f64, hi: f64, bad: &mut Option<f64>| {
        gk15(
            |t| {
                let v = eval_piece(f, piece, t);
                if !v.is_finite() && bad.is_none() {
                    *bad = Some(t);
                }
                v
            },
            lo,
            hi,
        )
    };
    for (piece, lo, hi) in pieces {
        if hi <= lo {
            continue;
        }
        let r = rule(&mut f, piece, lo, hi, &mut bad_point);
        total += r.value;
        total_err += r.error;
        heap.push(Segment { piece, lo, hi, value: r.value, error: r.error });
    }
    if let Some(t) = bad_point {
        return Err(Error::NumericDomain { z: vec![t] });
    }
    let mut count = heap.len();
    let mut frozen_err = 0.0;
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err + frozen_err <= target {
            break;
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.lo + seg.hi);
        if count >= opts.max_intervals {
            heap.push(seg);
            let err = total_err + frozen_err;
            return Err(Error::QuadratureNonConvergence { estimate: total, error: err });
        }
        if !(mid > seg.lo && mid < seg.hi) || (seg.hi - seg.lo) <= 4.0 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE)
        {
            // Interval cannot be split further; keep its contribution as is.
            total_err -= seg.error;
            frozen_err += seg.error;
            continue;
        }
        let left = rule(&mut f, seg.piece, seg.lo, mid, &mut bad_point);
        let right = rule(&mut f, seg.piece, mid, seg.hi, &mut bad_point);
        if let Some(t) = bad_point {
            return Err(Error::NumericDomain { z: vec![t] });
        }
        total += left.value + right.value - seg.value;
        total_err += left.error + right.error - seg.error;
        heap.push(Segment { piece: seg.piece, lo: seg.lo, hi: mid, value: left.value, error: left.error });
        heap.push(Segment { piece: seg.piece, lo: mid, hi: seg.hi, value: right.value, error: right.error });
        count += 1;
        if heap.is_empty() {
            break;
        }
    }
    // Recompute sums from the leaves to shed accumulated rounding.
    let mut value = 0.0;
    let mut error = frozen_err;
    for s in heap.iter() {
        value += s.value;
        error += s.error;
    }
    if heap.is_empty() {
        value = total;
    }
    Ok(Quadrature { value, error, intervals: count })
}

fn sorted_breaks(breaks: &[f64]) -> Result<Vec<f64>> {
    if breaks.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidArgument("quadrature breakpoints must be finite".into()));
    }
    let mut b: Vec<f64> = breaks.to_vec();
    b.sort_by(|x, y| x.total_cmp(y));
    b.dedup();
    Ok(b)
}

/// `∫ f` over `[breaks.first(), breaks.last()]`, split at every breakpoint.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, breaks: &[f64], opts: QuadOptions) -> Result<Quadrature> {
    let b = sorted_breaks(breaks)?;
    if b.len() < 2 {
        return Ok(Quadrature { value: 0.0, error: 0.0, intervals: 0 });
    }
    let pieces = b.windows(2).map(|w| (Piece::Direct, w[0], w[1])).collect();
    run(f, pieces, opts)
}

fn tail_power(decay: f64) -> Result<f64> {
    if !(decay > 1.0) {
        return Err(Error::InvalidArgument(format!("tail decay exponent {decay} must exceed 1")));
    }
    Ok(2.0 / (decay - 1.0))
}

/// `∫_a^∞ f` for `a > 0` with `f(z) = O(z^{-decay})`, `decay > 1`.
/// Extra breakpoints above `a` are honoured on the finite part.
pub fn integrate_upper_tail<F: FnMut(f64) -> f64>(f: F, a: f64, decay: f64, opts: QuadOptions) -> Result<Quadrature> {
    integrate_with_tails(f, &[a], false, true, decay, opts)
}

/// `∫_{-∞}^{∞} f`. The finite part spans the breakpoints; the tails start at
/// the outermost breakpoints, which must straddle zero.
pub fn integrate_line<F: FnMut(f64) -> f64>(f: F, breaks: &[f64], decay: f64, opts: QuadOptions) -> Result<Quadrature> {
    integrate_with_tails(f, breaks, true, true, decay, opts)
}

/// `∫_{b_0}^{∞} f` with breakpoints; the upper tail starts at the largest
/// breakpoint, which must be positive.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(
    f: F,
    breaks: &[f64],
    decay: f64,
    opts: QuadOptions,
) -> Result<Quadrature> {
    integrate_with_tails(f, breaks, false, true, decay, opts)
}

fn integrate_with_tails<F: FnMut(f64) -> f64>(
    f: F,
    breaks: &[f64],
    lower: bool,
    upper: bool,
    decay: f64,
    opts: QuadOptions,
) -> Result<Quadrature> {
    let b = sorted_breaks(breaks)?;
    if b.is_empty() {
        return Err(Error::InvalidArgument("no breakpoints".into()));
    }
    let k = tail_power(decay)?;
    let mut pieces: Vec<(Piece, f64, f64)> = b.windows(2).map(|w| (Piece::Direct, w[0], w[1])).collect();
    if upper {
        let a = *b.last().unwrap();
        if a <= 0.0 {
            return Err(Error::InvalidArgument("upper tail must start at a positive point".into()));
        }
        pieces.push((Piece::Upper { a, k }, 0.0, 1.0));
    }
    if lower {
        let a = b[0];
        if a >= 0.0 {
            return Err(Error::InvalidArgument("lower tail must start at a negative point".into()));
        }
        pieces.push((Piece::Lower { a: -a, k }, 0.0, 1.0));
    }
    run(f, pieces, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| 3.0 * x * x, &[0.0, 2.0], QuadOptions::default()).unwrap();
        assert_relative_eq!(q.value, 8.0, max_relative = 1e-14);
    }

    #[test]
    fn inverse_sqrt_singularity() {
        let q = integrate(|x| 1.0 / x.sqrt(), &[0.0, 1.0], QuadOptions::rel(1e-10)).unwrap();
        assert_relative_eq!(q.value, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn power_tail() {
        let q = integrate_upper_tail(|z| z.powi(-2), 1.0, 2.0, QuadOptions::rel(1e-12)).unwrap();
        assert_relative_eq!(q.value, 1.0, max_relative = 1e-11);
        let q = integrate_upper_tail(|z| z.powf(-2.5), 0.5, 2.5, QuadOptions::rel(1e-12)).unwrap();
        assert_relative_eq!(q.value, 0.5f64.powf(-1.5) / 1.5, max_relative = 1e-11);
    }

    #[test]
    fn whole_line_with_kink() {
        // min(|z|^-2, |z-1|^-2) has total mass 4.
        let f = |z: f64| (z.abs().powi(-2)).min((z - 1.0).abs().powi(-2));
        let q = integrate_line(f, &[-1.0, 0.0, 0.5, 1.0, 2.0], 2.0, QuadOptions::rel(1e-12)).unwrap();
        assert_relative_eq!(q.value, 4.0, max_relative = 1e-10);
    }

    #[test]
    fn gaussian_on_line() {
        let q = integrate_line(|z| (-z * z / 2.0).exp(), &[-1.0, 1.0], 3.0, QuadOptions::rel(1e-12)).unwrap();
        assert_relative_eq!(q.value, (2.0 * std::f64::consts::PI).sqrt(), max_relative = 1e-11);
    }

    #[test]
    fn budget_exhaustion_reports_estimate() {
        let opts = QuadOptions { rel_tol: 1e-15, abs_tol: 0.0, max_intervals: 3 };
        let err = integrate(|x| (1.0 / x).sin(), &[1e-3, 1.0], opts).unwrap_err();
        assert!(matches!(err, Error::QuadratureNonConvergence { .. }));
    }

    #[test]
    fn nan_is_reported() {
        let err = integrate(|x| if x > 0.5 { f64::NAN } else { 1.0 }, &[0.0, 1.0], QuadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NumericDomain { .. }));
    }
}

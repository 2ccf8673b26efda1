//! Uniformity functionals, the box norm, cube counts and progression discrepancy.
//!
//! The box norm is taken over the lattice basis `e1 = (1, 0)`, `e2 = (0, -1)`.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{self, CorrelationMethod};
use crate::tolerance;
use crate::zn::{self, box_counts, ratio, Arity, ComplexField, GridBox, GridSet, Rational};

pub const BASIS_E1: (i64, i64) = (1, 0);
pub const BASIS_E2: (i64, i64) = (0, -1);

/// Largest `N^(2 * arity)` for which the direct autocorrelation is also evaluated.
const DIRECT_WORK_LIMIT: usize = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `N^3` on `Z_N`.
    Line,
    /// `N^6` on `Z_N x Z_N`.
    Plane,
    /// `|E1|^2 |E2|^2` for a box.
    Box,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityReport {
    pub functional: f64,
    pub normalization: Normalization,
    pub minimal_alpha: f64,
    pub denominator: f64,
    /// The functional recomputed from fourth moments of the transform.
    pub spectral_functional: f64,
    /// Relative gap between the direct and spectral evaluations, when both ran.
    pub method_agreement: Option<f64>,
}

fn autocorrelation_report(f: &ComplexField) -> Result<UniformityReport> {
    f.check_disk()?;
    let n = f.modulus();
    let dims = f.arity().dims();
    let spectrum = fourier::dft(f);
    let spectral = spectrum.fourth_moment() / n.pow(dims) as f64;
    let direct = if n.pow(2 * dims) <= DIRECT_WORK_LIMIT {
        Some(fourier::cross_correlation(f, f, CorrelationMethod::Direct)?.energy())
    } else {
        None
    };
    let functional = direct.unwrap_or(spectral);
    let agreement = direct.map(|d| (d - spectral).abs() / d.abs().max(spectral.abs()).max(f64::MIN_POSITIVE));
    if let Some(gap) = agreement {
        if gap > tolerance::FUNCTIONAL_AGREEMENT && functional > 1e-12 {
            return Err(Error::Numerical(format!("direct and spectral functionals differ by {gap:e}")));
        }
    }
    let (normalization, denominator) = match f.arity() {
        Arity::One => (Normalization::Line, (n as f64).powi(3)),
        Arity::Two => (Normalization::Plane, (n as f64).powi(6)),
    };
    Ok(UniformityReport {
        functional,
        normalization,
        minimal_alpha: functional / denominator,
        denominator,
        spectral_functional: spectral,
        method_agreement: agreement,
    })
}

/// `sum_k |sum_s f(s) conj f(s - k)|^2` over `Z_N`, normalized by `N^3`.
pub fn alpha_uniformity_1d(f: &ComplexField) -> Result<UniformityReport> {
    if f.arity() != Arity::One {
        return Err(Error::ArityMismatch);
    }
    autocorrelation_report(f)
}

/// The two-dimensional functional over shifts in `Z_N x Z_N`, normalized by `N^6`.
pub fn alpha_uniformity_2d(f: &ComplexField) -> Result<UniformityReport> {
    if f.arity() != Arity::Two {
        return Err(Error::ArityMismatch);
    }
    autocorrelation_report(f)
}

/// Box-norm fourth power normalized by `|E1|^2 |E2|^2`.
pub fn alpha_uniformity_box(f: &ComplexField, bx: &GridBox) -> Result<UniformityReport> {
    let norm = box_norm(f, bx)?;
    let denominator = (bx.size() as f64).powi(2);
    Ok(UniformityReport {
        functional: norm.fourth_power,
        normalization: Normalization::Box,
        minimal_alpha: norm.fourth_power / denominator,
        denominator,
        spectral_functional: norm.dual_fourth_power,
        method_agreement: Some(
            (norm.fourth_power - norm.dual_fourth_power).abs() / norm.fourth_power.abs().max(1.0),
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxNormValue {
    pub value: f64,
    pub fourth_power: f64,
    pub dual_fourth_power: f64,
}

fn shift(n: usize, s: (usize, usize), v: (i64, i64), t: usize) -> (usize, usize) {
    let n_i = n as i64;
    let t = t as i64;
    let k = (s.0 as i64 + t * v.0).rem_euclid(n_i);
    let m = (s.1 as i64 + t * v.1).rem_euclid(n_i);
    (k as usize, m as usize)
}

/// `sum_{s, p, q} f00(s) conj f10(s + p e1) conj f01(s + q e2) f11(s + p e1 + q e2)`.
///
/// With all four arguments equal this is the box-norm fourth power over the whole grid.
pub fn box_inner_product(f00: &ComplexField, f01: &ComplexField, f10: &ComplexField, f11: &ComplexField) -> Result<Complex64> {
    for g in [f01, f10, f11] {
        f00.same_shape(g)?;
    }
    if f00.arity() != Arity::Two {
        return Err(Error::ArityMismatch);
    }
    let n = f00.modulus();
    let total = (0..n * n)
        .into_par_iter()
        .map(|i| {
            let s = (i / n, i % n);
            let a = f00.at2(s.0, s.1);
            if a.is_zero() {
                return Complex64::zero();
            }
            let mut acc = Complex64::zero();
            for p in 0..n {
                let sp = shift(n, s, BASIS_E1, p);
                let b = f10.at2(sp.0, sp.1).conj();
                if b.is_zero() {
                    continue;
                }
                for q in 0..n {
                    let sq = shift(n, s, BASIS_E2, q);
                    let spq = shift(n, sp, BASIS_E2, q);
                    acc += b * f01.at2(sq.0, sq.1).conj() * f11.at2(spq.0, spq.1);
                }
            }
            a * acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(total)
}

/// `sum_{m, p} |sum_k f(k, m) conj f(k, p)|^2`.
pub fn dual_fourth_power(f: &ComplexField) -> f64 {
    let n = f.modulus();
    let mut total = 0.0;
    for m in 0..n {
        for p in 0..n {
            let s: Complex64 = (0..n).map(|k| f.at2(k, m) * f.at2(k, p).conj()).sum();
            total += s.norm_sqr();
        }
    }
    total
}

fn real_part(z: Complex64, what: &str) -> Result<f64> {
    if z.im.abs() > tolerance::BOX_IMAGINARY * (1.0 + z.re.abs()) {
        return Err(Error::Numerical(format!("{what} has imaginary part {:e}", z.im)));
    }
    if z.re < -tolerance::INEQUALITY {
        return Err(Error::Numerical(format!("{what} is negative: {:e}", z.re)));
    }
    Ok(z.re.max(0.0))
}

pub fn box_norm(f: &ComplexField, bx: &GridBox) -> Result<BoxNormValue> {
    if f.arity() != Arity::Two {
        return Err(Error::ArityMismatch);
    }
    if f.modulus() != bx.modulus() {
        return Err(Error::ModulusMismatch { left: f.modulus(), right: bx.modulus() });
    }
    let n = f.modulus();
    for k in 0..n {
        for m in 0..n {
            if !bx.contains(k, m) && !f.at2(k, m).is_zero() {
                return Err(Error::OutsideBox { k, m });
            }
        }
    }
    let primal = real_part(box_inner_product(f, f, f, f)?, "box-norm fourth power")?;
    let dual = dual_fourth_power(f);
    if (primal - dual).abs() > tolerance::BOX_DUAL * primal.max(1.0) {
        return Err(Error::Numerical(format!("primal {primal} and dual {dual} box-norm forms disagree")));
    }
    Ok(BoxNormValue { value: primal.powf(0.25), fourth_power: primal, dual_fourth_power: dual })
}

/// Exact box-norm fourth power of the balanced box function of `A`, with its normalized value.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactBoxUniformity {
    pub fourth_power: Rational,
    pub alpha: Rational,
}

/// Row bitmasks over the box columns, one per box row.
fn row_masks(a: &GridSet, bx: &GridBox) -> Vec<Vec<u64>> {
    let words = bx.width().div_ceil(64);
    let mut masks = vec![vec![0u64; words]; bx.height()];
    for (k, m) in a.iter() {
        if let (Some(i), Some(j)) = (bx.xs().position(k), bx.ys().position(m)) {
            masks[j][i / 64] |= 1 << (i % 64);
        }
    }
    masks
}

fn intersection(a: &[u64], b: &[u64]) -> u64 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as u64).sum()
}

/// Since `sum_k (chi(k,m) - c_m/w)(chi(k,p) - c_p/w) = |A_m & A_p| - c_m c_p / w`,
/// the fourth power is `sum_{m,p} (w |A_m & A_p| - c_m c_p)^2 / w^2`.
pub fn box_uniformity_exact(a: &GridSet, bx: &GridBox) -> Result<ExactBoxUniformity> {
    let (rows, _) = box_counts(a, bx)?;
    let masks = row_masks(a, bx);
    let w = bx.width() as i128;
    let h = masks.len();
    let acc: BigInt = (0..h)
        .into_par_iter()
        .map(|m| {
            let mut part = BigInt::zero();
            for p in 0..h {
                let d = w * intersection(&masks[m], &masks[p]) as i128 - rows[m] as i128 * rows[p] as i128;
                part += BigInt::from(d * d);
            }
            part
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let fourth_power = Rational::new(acc, BigInt::from(w * w));
    let alpha = &fourth_power / ratio(bx.size() * bx.size(), 1);
    Ok(ExactBoxUniformity { fourth_power, alpha })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CubeMethod {
    Brute,
    Spectral,
}

/// Number of quadruples `s, s + u e2, s + r e1, s + u e2 + r e1` inside `A`,
/// degenerate ones (`u = 0` or `r = 0`) included.
pub fn count_cubes(a: &GridSet, method: CubeMethod) -> u64 {
    let n = a.modulus();
    match method {
        CubeMethod::Brute => {
            let pts = a.points();
            pts.par_iter()
                .map(|&s| {
                    let mut c = 0u64;
                    for u in 0..n {
                        let su = shift(n, s, BASIS_E2, u);
                        if !a.contains(su.0, su.1) {
                            continue;
                        }
                        for r in 0..n {
                            let sr = shift(n, s, BASIS_E1, r);
                            let sur = shift(n, su, BASIS_E1, r);
                            if a.contains(sr.0, sr.1) && a.contains(sur.0, sur.1) {
                                c += 1;
                            }
                        }
                    }
                    c
                })
                .sum()
        }
        CubeMethod::Spectral => {
            let masks = row_masks(a, &GridBox::full(n));
            (0..n)
                .into_par_iter()
                .map(|m| (0..n).map(|p| intersection(&masks[m], &masks[p]).pow(2)).sum::<u64>())
                .sum()
        }
    }
}

/// Cubes with `u != 0` and `r != 0`.
pub fn count_nondegenerate_cubes(a: &GridSet) -> u64 {
    let n = a.modulus();
    let masks = row_masks(a, &GridBox::full(n));
    let mut total = 0u64;
    for m in 0..n {
        for p in 0..n {
            if m != p {
                let c = intersection(&masks[m], &masks[p]);
                total += c * c.saturating_sub(1);
            }
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyReport {
    pub discrepancy: f64,
    pub bound: f64,
    pub alpha: f64,
    pub holds: bool,
}

/// Minimal 2-D alpha of `chi_A - delta`.
pub fn set_alpha_2d(a: &GridSet) -> Result<f64> {
    Ok(alpha_uniformity_2d(&ComplexField::balanced_2d(a))?.minimal_alpha)
}

pub fn progression_discrepancy(a: &GridSet, p: &GridBox) -> Result<DiscrepancyReport> {
    let alpha = set_alpha_2d(a)?;
    progression_discrepancy_with_alpha(a, p, alpha)
}

/// As [`progression_discrepancy`] with the set's 2-D alpha supplied by the caller.
pub fn progression_discrepancy_with_alpha(a: &GridSet, p: &GridBox, alpha: f64) -> Result<DiscrepancyReport> {
    if a.modulus() != p.modulus() {
        return Err(Error::ModulusMismatch { left: a.modulus(), right: p.modulus() });
    }
    for axis in [p.xs(), p.ys()] {
        if axis.is_empty() || !axis.is_cyclic_interval() {
            return Err(Error::InvalidParameter("box sides must be nonempty step-1 intervals".into()));
        }
    }
    let n = a.modulus();
    let inside = a.count_in_box(p);
    let expected = ratio(a.len() * p.size(), n * n);
    let discrepancy = zn::to_f64(&zn::abs(&(ratio(inside, 1) - expected)));
    let bound = 16.0 * alpha.powf(0.25) * (n * n) as f64;
    Ok(DiscrepancyReport { discrepancy, bound, alpha, holds: discrepancy <= bound + tolerance::DISCREPANCY_SLACK })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubeBounds {
    pub cubes: u64,
    pub lower: f64,
    pub lower_holds: bool,
    /// Box-uniformity of the balanced box function.
    pub alpha: f64,
    pub upper_applicable: bool,
    pub upper: Option<f64>,
    pub upper_holds: Option<bool>,
}

/// Cube count against `delta^4 N^4` and, on the full grid with balanced rows,
/// against `(delta + 2 alpha^(1/4))^4 N^4`.
pub fn cube_bounds_report(a: &GridSet, bx: &GridBox) -> Result<CubeBounds> {
    let n = a.modulus();
    let cubes = count_cubes(a, CubeMethod::Spectral);
    let size = BigInt::from(a.len());
    let n2 = BigInt::from(n * n);
    // delta^4 N^4 = |A|^4 / N^4
    let lower_exact = Rational::new(size.pow(4), n2.pow(2));
    let lower_holds = Rational::from_integer(BigInt::from(cubes)) >= lower_exact;
    let exact = box_uniformity_exact(a, bx)?;
    let profile = zn::marginal_profile(a, bx)?;
    let full = bx.width() == n && bx.height() == n;
    let upper_applicable = full && profile.row_deviation <= &exact.alpha * ratio(n, 1);
    let alpha = zn::to_f64(&exact.alpha);
    let delta = zn::to_f64(&profile.delta);
    let upper = upper_applicable.then(|| (delta + 2.0 * alpha.powf(0.25)).powi(4) * (n as f64).powi(4));
    Ok(CubeBounds {
        cubes,
        lower: lower_exact.to_f64().unwrap_or(f64::NAN),
        lower_holds,
        alpha,
        upper_applicable,
        upper,
        upper_holds: upper.map(|u| tolerance::at_most(cubes as f64, u)),
    })
}

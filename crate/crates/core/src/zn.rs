//! Sets over `Z_N` and `Z_N x Z_N`, boxes, marginal densities and balanced functions.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance;

pub type Rational = num_rational::BigRational;

/// `num / den` as an exact rational.
pub fn ratio(num: usize, den: usize) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn ratio_i(num: i128, den: i128) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Closest rational to a finite nonnegative float, exact in binary.
pub fn from_f64(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::InvalidParameter(format!("{x} is not finite")))
}

pub fn abs(q: &Rational) -> Rational {
    q.abs()
}

/// A subset of `Z_N`, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LineSet {
    modulus: usize,
    members: Vec<usize>,
}

impl LineSet {
    pub fn new(modulus: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::ZeroModulus);
        }
        let mut members: Vec<usize> = members.into_iter().collect();
        if let Some(&value) = members.iter().find(|&&v| v >= modulus) {
            return Err(Error::ResidueOutOfRange { value, modulus });
        }
        members.sort_unstable();
        members.dedup();
        Ok(Self { modulus, members })
    }

    pub fn full(modulus: usize) -> Self {
        Self { modulus, members: (0..modulus).collect() }
    }

    pub fn empty(modulus: usize) -> Self {
        Self { modulus, members: Vec::new() }
    }

    /// `{start, start + 1, ..., start + len - 1}` reduced mod `N`.
    pub fn interval(modulus: usize, start: usize, len: usize) -> Result<Self> {
        if len > modulus {
            return Err(Error::InvalidParameter(format!("interval length {len} exceeds modulus {modulus}")));
        }
        Self::new(modulus, (0..len).map(|i| (start + i) % modulus))
    }

    pub fn modulus(&self) -> usize {
        self.modulus
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members.binary_search(&x).is_ok()
    }

    /// Rank of `x` among the members.
    pub fn position(&self, x: usize) -> Option<usize> {
        self.members.binary_search(&x).ok()
    }

    pub fn density(&self) -> Rational {
        ratio(self.len(), self.modulus)
    }

    pub fn indicator(&self) -> Vec<bool> {
        let mut out = vec![false; self.modulus];
        for &x in &self.members {
            out[x] = true;
        }
        out
    }

    /// True when the members form `{a, a+1, ..., a+l-1}` mod `N` for some `a`.
    pub fn is_cyclic_interval(&self) -> bool {
        let n = self.modulus;
        let len = self.len();
        if len == 0 || len == n {
            return true;
        }
        // exactly one member whose predecessor is absent
        let starts = self.members.iter().filter(|&&x| !self.contains((x + n - 1) % n)).count();
        starts == 1
    }

    pub fn is_subset(&self, other: &LineSet) -> bool {
        self.members.iter().all(|&x| other.contains(x))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Storage {
    /// Bit `k * N + m` is set when `(k, m)` is a member.
    Dense(Vec<u64>),
    /// Sorted lexicographically.
    Sparse(Vec<(u32, u32)>),
}

/// A subset of `Z_N x Z_N`.
///
/// Large sets are held as a bit matrix and small ones as a sorted point list;
/// the choice is invisible to callers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSet {
    modulus: usize,
    len: usize,
    storage: Storage,
}

impl GridSet {
    pub fn new(modulus: usize, points: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::ZeroModulus);
        }
        if modulus > u32::MAX as usize {
            return Err(Error::InvalidParameter(format!("modulus {modulus} too large")));
        }
        let mut pts = Vec::new();
        for (k, m) in points {
            if k >= modulus || m >= modulus {
                return Err(Error::PointOutOfRange { k, m, modulus });
            }
            pts.push((k as u32, m as u32));
        }
        pts.sort_unstable();
        pts.dedup();
        Ok(Self::from_sorted(modulus, pts))
    }

    fn from_sorted(modulus: usize, pts: Vec<(u32, u32)>) -> Self {
        let len = pts.len();
        if len * 64 > modulus * modulus {
            let mut bits = vec![0u64; (modulus * modulus).div_ceil(64)];
            for (k, m) in pts {
                let i = k as usize * modulus + m as usize;
                bits[i / 64] |= 1 << (i % 64);
            }
            Self { modulus, len, storage: Storage::Dense(bits) }
        } else {
            Self { modulus, len, storage: Storage::Sparse(pts) }
        }
    }

    pub fn from_predicate(modulus: usize, mut member: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut pts = Vec::new();
        for k in 0..modulus {
            for m in 0..modulus {
                if member(k, m) {
                    pts.push((k, m));
                }
            }
        }
        Self::new(modulus, pts)
    }

    pub fn empty(modulus: usize) -> Self {
        Self { modulus, len: 0, storage: Storage::Sparse(Vec::new()) }
    }

    pub fn full(modulus: usize) -> Self {
        Self::from_box(&GridBox::full(modulus))
    }

    pub fn from_box(bx: &GridBox) -> Self {
        let pts = bx
            .xs()
            .iter()
            .flat_map(|k| bx.ys().iter().map(move |m| (k as u32, m as u32)))
            .collect();
        Self::from_sorted(bx.modulus(), pts)
    }

    pub fn modulus(&self) -> usize {
        self.modulus
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    /// `|A| / N^2`.
    pub fn density(&self) -> Rational {
        ratio(self.len, self.modulus * self.modulus)
    }

    pub fn contains(&self, k: usize, m: usize) -> bool {
        if k >= self.modulus || m >= self.modulus {
            return false;
        }
        match &self.storage {
            Storage::Dense(bits) => {
                let i = k * self.modulus + m;
                bits[i / 64] >> (i % 64) & 1 == 1
            }
            Storage::Sparse(pts) => pts.binary_search(&(k as u32, m as u32)).is_ok(),
        }
    }

    /// Members in lexicographic order.
    pub fn iter(&self) -> Box<dyn Iterator<Item = (usize, usize)> + '_> {
        match &self.storage {
            Storage::Dense(bits) => {
                let n = self.modulus;
                Box::new(bits.iter().enumerate().flat_map(move |(w, &word)| {
                    let mut word = word;
                    std::iter::from_fn(move || {
                        if word == 0 {
                            return None;
                        }
                        let b = word.trailing_zeros() as usize;
                        word &= word - 1;
                        let i = w * 64 + b;
                        Some((i / n, i % n))
                    })
                }))
            }
            Storage::Sparse(pts) => Box::new(pts.iter().map(|&(k, m)| (k as usize, m as usize))),
        }
    }

    pub fn points(&self) -> Vec<(usize, usize)> {
        self.iter().collect()
    }

    /// Row-major indicator, index `k * N + m`.
    pub fn indicator(&self) -> Vec<bool> {
        let mut out = vec![false; self.modulus * self.modulus];
        for (k, m) in self.iter() {
            out[k * self.modulus + m] = true;
        }
        out
    }

    pub fn intersect_box(&self, bx: &GridBox) -> GridSet {
        let pts = self.iter().filter(|&(k, m)| bx.contains(k, m)).map(|(k, m)| (k as u32, m as u32)).collect();
        Self::from_sorted(self.modulus, pts)
    }

    pub fn count_in_box(&self, bx: &GridBox) -> usize {
        if self.len <= bx.size() {
            self.iter().filter(|&(k, m)| bx.contains(k, m)).count()
        } else {
            bx.xs().iter().map(|k| bx.ys().iter().filter(|&m| self.contains(k, m)).count()).sum()
        }
    }

    /// First member outside the box, if any.
    pub fn first_outside(&self, bx: &GridBox) -> Option<(usize, usize)> {
        self.iter().find(|&(k, m)| !bx.contains(k, m))
    }

    /// Set of `k` with `(k, m)` a member, for each row `m`.
    pub fn rows(&self) -> Vec<Vec<usize>> {
        let mut rows = vec![Vec::new(); self.modulus];
        for (k, m) in self.iter() {
            rows[m].push(k);
        }
        rows
    }
}

/// A product `xs x ys` of two subsets of `Z_N`; `xs` holds the first coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridBox {
    xs: LineSet,
    ys: LineSet,
}

impl GridBox {
    pub fn new(xs: LineSet, ys: LineSet) -> Result<Self> {
        if xs.modulus() != ys.modulus() {
            return Err(Error::ModulusMismatch { left: xs.modulus(), right: ys.modulus() });
        }
        Ok(Self { xs, ys })
    }

    pub fn full(modulus: usize) -> Self {
        Self { xs: LineSet::full(modulus), ys: LineSet::full(modulus) }
    }

    pub fn xs(&self) -> &LineSet {
        &self.xs
    }

    pub fn ys(&self) -> &LineSet {
        &self.ys
    }

    pub fn modulus(&self) -> usize {
        self.xs.modulus()
    }

    pub fn width(&self) -> usize {
        self.xs.len()
    }

    pub fn height(&self) -> usize {
        self.ys.len()
    }

    pub fn size(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, k: usize, m: usize) -> bool {
        self.xs.contains(k) && self.ys.contains(m)
    }

    pub fn require_nonempty(&self) -> Result<()> {
        if self.xs.is_empty() || self.ys.is_empty() {
            Err(Error::EmptyAxis)
        } else {
            Ok(())
        }
    }
}

/// Densities of a set relative to a box, all exact.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalProfile {
    /// `|E1|`
    pub width: usize,
    /// `|E2|`
    pub height: usize,
    pub size: usize,
    pub delta: Rational,
    /// Row `m` maps to `|{k in E1 : (k, m) in A}| / |E1|`.
    pub row_density: BTreeMap<usize, Rational>,
    /// Column `k` maps to `|{m in E2 : (k, m) in A}| / |E2|`.
    pub col_density: BTreeMap<usize, Rational>,
    pub row_deviation: Rational,
    pub col_deviation: Rational,
}

/// Integer row and column counts of `A` inside `bx`, in the order of the box members.
pub(crate) fn box_counts(a: &GridSet, bx: &GridBox) -> Result<(Vec<usize>, Vec<usize>)> {
    if a.modulus() != bx.modulus() {
        return Err(Error::ModulusMismatch { left: a.modulus(), right: bx.modulus() });
    }
    bx.require_nonempty()?;
    let mut rows = vec![0usize; bx.height()];
    let mut cols = vec![0usize; bx.width()];
    for (k, m) in a.iter() {
        match (bx.xs().position(k), bx.ys().position(m)) {
            (Some(i), Some(j)) => {
                cols[i] += 1;
                rows[j] += 1;
            }
            _ => return Err(Error::OutsideBox { k, m }),
        }
    }
    Ok((rows, cols))
}

/// `sum_i (c_i * other - total)^2 / (width * height)^2`, exactly.
fn deviation(counts: &[usize], other: usize, total: usize, width: usize, height: usize) -> Rational {
    let mut acc = BigInt::zero();
    for &c in counts {
        let d = BigInt::from(c as i128 * other as i128 - total as i128);
        acc += &d * &d;
    }
    let den = BigInt::from(width as u128 * height as u128);
    Rational::new(acc, &den * &den)
}

pub fn marginal_profile(a: &GridSet, bx: &GridBox) -> Result<MarginalProfile> {
    let (rows, cols) = box_counts(a, bx)?;
    let (w, h) = (bx.width(), bx.height());
    let size = a.len();
    Ok(MarginalProfile {
        width: w,
        height: h,
        size,
        delta: ratio(size, w * h),
        row_density: bx.ys().iter().zip(&rows).map(|(m, &c)| (m, ratio(c, w))).collect(),
        col_density: bx.xs().iter().zip(&cols).map(|(k, &c)| (k, ratio(c, h))).collect(),
        row_deviation: deviation(&rows, h, size, w, h),
        col_deviation: deviation(&cols, w, size, w, h),
    })
}

/// How the marginal thresholds scale with `alpha1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarginalScale {
    /// Deviation at most `alpha1^2 * |E|`.
    Quadratic,
    /// Deviation at most `alpha1 * |E|`.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MarginalCheck {
    pub rows_hold: bool,
    pub cols_hold: bool,
}

impl MarginalCheck {
    pub fn both(&self) -> bool {
        self.rows_hold && self.cols_hold
    }
}

pub fn marginal_uniformity_check(profile: &MarginalProfile, alpha1: &Rational, scale: MarginalScale) -> MarginalCheck {
    let factor = match scale {
        MarginalScale::Quadratic => alpha1 * alpha1,
        MarginalScale::Linear => alpha1.clone(),
    };
    let rows_bound = &factor * ratio(profile.height, 1);
    let cols_bound = &factor * ratio(profile.width, 1);
    MarginalCheck { rows_hold: profile.row_deviation <= rows_bound, cols_hold: profile.col_deviation <= cols_bound }
}

/// Smallest `alpha1` passing both quadratic marginal conditions.
pub fn measured_marginal_alpha(profile: &MarginalProfile) -> f64 {
    let r = to_f64(&profile.row_deviation) / profile.height as f64;
    let c = to_f64(&profile.col_deviation) / profile.width as f64;
    r.max(c).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arity {
    One,
    Two,
}

impl Arity {
    pub fn dims(self) -> u32 {
        match self {
            Arity::One => 1,
            Arity::Two => 2,
        }
    }
}

/// A complex function on `Z_N` or `Z_N x Z_N`; two-dimensional values are stored at `k * N + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    arity: Arity,
    modulus: usize,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(arity: Arity, modulus: usize, values: Vec<Complex64>) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::ZeroModulus);
        }
        let expected = modulus.pow(arity.dims());
        if values.len() != expected {
            return Err(Error::ShapeMismatch { got: values.len(), expected });
        }
        Ok(Self { arity, modulus, values })
    }

    /// As [`ComplexField::new`], rejecting any value outside the closed unit disk.
    pub fn disk_valued(arity: Arity, modulus: usize, values: Vec<Complex64>) -> Result<Self> {
        let field = Self::new(arity, modulus, values)?;
        field.check_disk()?;
        Ok(field)
    }

    pub fn zeros(arity: Arity, modulus: usize) -> Self {
        Self { arity, modulus, values: vec![Complex64::zero(); modulus.pow(arity.dims())] }
    }

    pub fn from_fn_1d(modulus: usize, f: impl Fn(usize) -> Complex64) -> Self {
        Self { arity: Arity::One, modulus, values: (0..modulus).map(f).collect() }
    }

    pub fn from_fn_2d(modulus: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let values = (0..modulus * modulus).map(|i| f(i / modulus, i % modulus)).collect();
        Self { arity: Arity::Two, modulus, values }
    }

    pub fn indicator_1d(set: &LineSet) -> Self {
        let ind = set.indicator();
        Self::from_fn_1d(set.modulus(), |k| Complex64::new(if ind[k] { 1.0 } else { 0.0 }, 0.0))
    }

    pub fn indicator_2d(set: &GridSet) -> Self {
        let ind = set.indicator();
        let n = set.modulus();
        Self::from_fn_2d(n, |k, m| Complex64::new(if ind[k * n + m] { 1.0 } else { 0.0 }, 0.0))
    }

    /// `chi_A - |A|/N` on `Z_N`.
    pub fn balanced_1d(set: &LineSet) -> Self {
        let d = set.len() as f64 / set.modulus() as f64;
        let mut f = Self::indicator_1d(set);
        f.values.iter_mut().for_each(|v| v.re -= d);
        f
    }

    /// `chi_A - |A|/N^2` on `Z_N x Z_N`.
    pub fn balanced_2d(set: &GridSet) -> Self {
        let n = set.modulus();
        let d = set.len() as f64 / (n * n) as f64;
        let mut f = Self::indicator_2d(set);
        f.values.iter_mut().for_each(|v| v.re -= d);
        f
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn modulus(&self) -> usize {
        self.modulus
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn at(&self, k: usize) -> Complex64 {
        self.values[k]
    }

    pub fn at2(&self, k: usize, m: usize) -> Complex64 {
        self.values[k * self.modulus + m]
    }

    pub fn check_disk(&self) -> Result<()> {
        for (index, v) in self.values.iter().enumerate() {
            let magnitude = v.norm();
            if magnitude > 1.0 + tolerance::DISK || !magnitude.is_finite() {
                return Err(Error::OutsideDisk { index, magnitude });
            }
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &ComplexField) -> Result<()> {
        if self.arity != other.arity {
            return Err(Error::ArityMismatch);
        }
        if self.modulus != other.modulus {
            return Err(Error::ModulusMismatch { left: self.modulus, right: other.modulus });
        }
        Ok(())
    }

    /// `sum |f|^2`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    /// `sum f * conj(g)`.
    pub fn inner(&self, other: &ComplexField) -> Complex64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum()
    }

    pub fn sub(&self, other: &ComplexField) -> Result<ComplexField> {
        self.same_shape(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { values, ..self.clone() })
    }

    pub fn add(&self, other: &ComplexField) -> Result<ComplexField> {
        self.same_shape(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { values, ..self.clone() })
    }
}

/// `(chi_A(k, m) - delta_m)` on the box and `0` off it.
pub fn balanced_box_function(a: &GridSet, bx: &GridBox) -> Result<ComplexField> {
    let (rows, _) = box_counts(a, bx)?;
    let n = bx.modulus();
    let w = bx.width() as f64;
    let mut values = vec![Complex64::zero(); n * n];
    for (j, m) in bx.ys().iter().enumerate() {
        let dm = rows[j] as f64 / w;
        for k in bx.xs().iter() {
            let chi = if a.contains(k, m) { 1.0 } else { 0.0 };
            values[k * n + m] = Complex64::new(chi - dm, 0.0);
        }
    }
    ComplexField::new(Arity::Two, n, values)
}

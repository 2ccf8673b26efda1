//! Progression partitions, right squares, and the energy-increment loop that
//! regularizes a set into squares on which it is uniform.

use std::collections::HashMap;

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier;
use crate::profile::ProfileName;
use crate::tolerance;
use crate::uniformity::{self, box_uniformity_exact};
use crate::zn::{self, ratio, ComplexField, GridBox, GridSet, LineSet, Rational};

/// `{start, start + diff, ..., start + (len - 1) diff}` as integers in `[0, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Progression {
    pub start: usize,
    pub diff: usize,
    pub len: usize,
}

impl Progression {
    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).map(move |i| self.start + i * self.diff)
    }
}

/// `{a + i d} x {b + j d}` for `i, j < t`, coordinates reduced mod `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RightSquare {
    pub a: usize,
    pub b: usize,
    pub d: usize,
    pub t: usize,
}

impl RightSquare {
    pub fn whole(modulus: usize) -> Self {
        RightSquare { a: 0, b: 0, d: 1, t: modulus }
    }

    pub fn size(&self) -> usize {
        self.t * self.t
    }

    pub fn xs(&self, modulus: usize) -> Vec<usize> {
        (0..self.t).map(|i| (self.a + i * self.d) % modulus).collect()
    }

    pub fn ys(&self, modulus: usize) -> Vec<usize> {
        (0..self.t).map(|j| (self.b + j * self.d) % modulus).collect()
    }

    /// Point of local coordinates `(i, j)`.
    pub fn point(&self, modulus: usize, i: usize, j: usize) -> (usize, usize) {
        ((self.a + i * self.d) % modulus, (self.b + j * self.d) % modulus)
    }

    pub fn points(&self, modulus: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.t).flat_map(move |i| (0..self.t).map(move |j| self.point(modulus, i, j)))
    }

    pub fn to_box(&self, modulus: usize) -> Result<GridBox> {
        GridBox::new(LineSet::new(modulus, self.xs(modulus))?, LineSet::new(modulus, self.ys(modulus))?)
    }

    /// `t >= 1`, `d >= 1`, and the `t` multiples of `d` are distinct mod `N`.
    pub fn is_valid(&self, modulus: usize) -> bool {
        self.t >= 1 && self.d >= 1 && self.t <= modulus / gcd(self.d % modulus, modulus)
    }

    /// Local copy of `set` on `Z_t x Z_t`.
    pub fn localize(&self, set: &GridSet) -> GridSet {
        let n = set.modulus();
        GridSet::from_predicate(self.t, |i, j| {
            let (k, m) = self.point(n, i, j);
            set.contains(k, m)
        })
        .expect("local coordinates lie in [0, t)")
    }

    /// The square of local coordinates `inner` inside `self`, in global coordinates.
    pub fn compose(&self, inner: &RightSquare) -> RightSquare {
        RightSquare { a: self.a + inner.a * self.d, b: self.b + inner.b * self.d, d: self.d * inner.d, t: inner.t }
    }

    fn normalized(self, modulus: usize) -> Self {
        RightSquare { a: self.a % modulus, b: self.b % modulus, d: if self.t == 1 { 1 } else { self.d }, t: self.t }
    }

    pub fn count(&self, set: &GridSet) -> usize {
        let n = set.modulus();
        self.points(n).filter(|&(k, m)| set.contains(k, m)).count()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `min(x, N - x)` for `x` reduced mod `N`.
fn circular_magnitude(x: i128, n: usize) -> usize {
    let r = x.rem_euclid(n as i128) as usize;
    r.min(n - r)
}

/// Shortest arc of `Z_N` containing every marked residue, as max minus min of
/// the best lift: `N` minus the largest cyclic gap.
pub fn circular_diameter(marked: &[bool]) -> usize {
    let n = marked.len();
    let present: Vec<usize> = (0..n).filter(|&i| marked[i]).collect();
    let (Some(&first), Some(&last)) = (present.first(), present.last()) else { return 0 };
    let mut gap = first + n - last;
    for w in present.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    n - gap
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApChecks {
    pub is_partition: bool,
    pub common_difference: bool,
    pub length_spread: usize,
    pub count: usize,
    /// `8 N^(4/3) / s^(2/3)`.
    pub count_bound: f64,
    pub count_within_bound: bool,
    /// Largest diameter of `phi(P_i x P_j)` over all pairs.
    pub max_diameter: usize,
    pub diameter_within_s: bool,
}

impl ApChecks {
    pub fn all_hold(&self) -> bool {
        self.is_partition
            && self.common_difference
            && self.length_spread <= 1
            && self.count_within_bound
            && self.diameter_within_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApPartition {
    pub modulus: usize,
    pub r1: i64,
    pub r2: i64,
    pub s: usize,
    /// Side count of the pigeonhole grid.
    pub grid: usize,
    /// Common difference.
    pub difference: usize,
    pub progressions: Vec<Progression>,
    pub checks: ApChecks,
}

/// Splits `Z_N` into progressions of one common difference on whose pairwise
/// products `(x, y) -> r1 x + r2 y` spreads over an arc of length at most `s`.
pub fn ap_partition(modulus: usize, r1: i64, r2: i64, s: usize) -> Result<ApPartition> {
    let n = modulus;
    if n == 0 {
        return Err(Error::ZeroModulus);
    }
    if r1 == 0 && r2 == 0 {
        return Err(Error::InvalidParameter("the linear form must be nonzero".into()));
    }
    if s == 0 || s > n {
        return Err(Error::InvalidParameter(format!("s = {s} must lie in [1, {n}]")));
    }
    let grid = (((n * n) as f64 / s as f64).cbrt() / 2.0).ceil().max(1.0) as usize;
    let cell = |x: usize| x * grid / n;
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    let mut difference = 0;
    for j in 0..=grid * grid {
        let p = ((j as i128 * r1 as i128).rem_euclid(n as i128) as usize, (j as i128 * r2 as i128).rem_euclid(n as i128) as usize);
        if let Some(&i) = seen.get(&(cell(p.0), cell(p.1))) {
            difference = j - i;
            break;
        }
        seen.insert((cell(p.0), cell(p.1)), j);
    }
    debug_assert!(difference > 0, "pigeonhole guarantees a collision");
    let u = difference;
    let step = circular_magnitude(u as i128 * r1 as i128, n) + circular_magnitude(u as i128 * r2 as i128, n);
    let classes = u.min(n);
    let longest = n.div_ceil(u);
    let max_len = s.checked_div(step).map_or(longest, |q| (q + 1).min(longest));
    let pieces = longest.div_ceil(max_len);
    let mut progressions = Vec::with_capacity(classes * pieces);
    for c in 0..classes {
        let q = (n - c).div_ceil(u);
        let (base, extra) = (q / pieces, q % pieces);
        let mut offset = 0;
        for p in 0..pieces {
            let len = base + usize::from(p < extra);
            if len > 0 {
                progressions.push(Progression { start: c + offset * u, diff: u, len });
            }
            offset += len;
        }
    }
    let checks = check_ap_partition(n, r1, r2, s, u, &progressions);
    Ok(ApPartition { modulus: n, r1, r2, s, grid, difference: u, progressions, checks })
}

/// Diameter of `{i (u r1) + j (u r2) : i < l1, j < l2}` in `Z_N`.
fn shape_diameter(n: usize, a: i128, b: i128, l1: usize, l2: usize) -> usize {
    let mut marked = vec![false; n];
    for i in 0..l1 as i128 {
        let base = (i * a).rem_euclid(n as i128);
        for j in 0..l2 as i128 {
            marked[((base + j * b).rem_euclid(n as i128)) as usize] = true;
        }
    }
    circular_diameter(&marked)
}

fn check_ap_partition(n: usize, r1: i64, r2: i64, s: usize, u: usize, progressions: &[Progression]) -> ApChecks {
    let mut hits = vec![0u32; n];
    for p in progressions {
        for x in p.members() {
            if x < n {
                hits[x] += 1;
            } else {
                hits[0] += 2;
            }
        }
    }
    let lengths: Vec<usize> = progressions.iter().map(|p| p.len).collect();
    let (lo, hi) = (lengths.iter().min().copied().unwrap_or(0), lengths.iter().max().copied().unwrap_or(0));
    let count_bound = 8.0 * (n as f64).powf(4.0 / 3.0) / (s as f64).powf(2.0 / 3.0);
    // phi(P_i x P_j) is a translate of a set fixed by the two lengths.
    let (a, b) = (u as i128 * r1 as i128, u as i128 * r2 as i128);
    let mut distinct: Vec<usize> = lengths.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let mut max_diameter = 0;
    for &l1 in &distinct {
        for &l2 in &distinct {
            max_diameter = max_diameter.max(shape_diameter(n, a, b, l1, l2));
        }
    }
    ApChecks {
        is_partition: hits.iter().all(|&h| h == 1),
        common_difference: progressions.iter().all(|p| p.diff == u),
        length_spread: hi - lo,
        count: progressions.len(),
        count_bound,
        count_within_bound: progressions.len() as f64 <= count_bound * (1.0 + 1e-12),
        max_diameter,
        diameter_within_s: max_diameter <= s,
    }
}

/// Squares and an exceptional set that together partition a parent square.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SquareFamily {
    pub modulus: usize,
    pub squares: Vec<RightSquare>,
    pub omega: Vec<(usize, usize)>,
}

impl SquareFamily {
    /// Squares disjoint, each valid, and together with `omega` covering `parent` exactly.
    pub fn partitions(&self, parent: &RightSquare) -> bool {
        let n = self.modulus;
        let mut hits = vec![0u8; n * n];
        let mut bump = |k: usize, m: usize| {
            hits[k * n + m] = hits[k * n + m].saturating_add(1);
        };
        for sq in &self.squares {
            if !sq.is_valid(n) {
                return false;
            }
            sq.points(n).for_each(|(k, m)| bump(k, m));
        }
        self.omega.iter().for_each(|&(k, m)| bump(k, m));
        let mut inside = vec![false; n * n];
        parent.points(n).for_each(|(k, m)| inside[k * n + m] = true);
        hits.iter().zip(&inside).all(|(&h, &i)| h == u8::from(i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementReport {
    pub family: SquareFamily,
    pub frequency: (usize, usize),
    /// `|hat chi_A(r)| / N^2`.
    pub alpha: f64,
    pub s: usize,
    pub progression_count: usize,
    pub side: usize,
    /// `(1/r) sum_j (delta_{S_j} - delta)^2`.
    #[serde(serialize_with = "serialize_rational")]
    pub mean_square_deviation: Rational,
    /// `alpha^2 / 16`.
    pub deviation_bound: f64,
    /// `N >= 2^100 / alpha^10`.
    pub bound_applicable: bool,
    pub bound_holds: Option<bool>,
    pub omega_size: usize,
    /// `2 M^2 ceil(N / M)`.
    pub omega_accounting_bound: usize,
    pub omega_within_accounting: bool,
    /// `N^(11/6)`.
    pub omega_asymptotic_bound: f64,
    pub omega_within_asymptotic: bool,
    pub is_partition: bool,
}

fn serialize_rational<S: serde::Serializer>(q: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

fn serialize_points<S: serde::Serializer>(set: &GridSet, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(set.iter())
}

fn transform_at(a: &GridSet, r: (usize, usize)) -> f64 {
    fourier::dft(&ComplexField::indicator_2d(a)).at2(r.0, r.1).norm()
}

/// Refines `Z_N^2` into equal right squares along the level lines of the character at `freq`.
pub fn right_square_partition(a: &GridSet, freq: (usize, usize)) -> Result<RefinementReport> {
    let n = a.modulus();
    let magnitude = if (freq.0 % n, freq.1 % n) == (0, 0) { 0.0 } else { transform_at(a, freq) };
    refine_with(a, freq, magnitude, None)
}

/// As [`right_square_partition`] with a known coefficient magnitude, and `s` enlarged
/// until at most `max_squares` squares appear.
fn refine_with(a: &GridSet, freq: (usize, usize), magnitude: f64, max_squares: Option<usize>) -> Result<RefinementReport> {
    let n = a.modulus();
    let freq = (freq.0 % n, freq.1 % n);
    if freq == (0, 0) {
        return Err(Error::InvalidParameter("refinement frequency must be nonzero".into()));
    }
    let nn = (n * n) as f64;
    let alpha = magnitude / nn;
    if alpha <= tolerance::NONZERO_COEFFICIENT {
        return Err(Error::InvalidParameter(format!("coefficient at {freq:?} vanishes")));
    }
    let mut s = ((alpha * n as f64) / (4.0 * std::f64::consts::PI)).ceil().clamp(1.0, n as f64) as usize;
    let ap = loop {
        let ap = ap_partition(n, freq.0 as i64, freq.1 as i64, s)?;
        match max_squares {
            Some(cap) if ap.progressions.len().pow(2) > cap && s < n => s = (2 * s).min(n),
            _ => break ap,
        }
    };
    let side = ap.progressions.iter().map(|p| p.len).min().unwrap_or(0);
    let mut omega = Vec::new();
    let mut trimmed = Vec::with_capacity(ap.progressions.len());
    for p in &ap.progressions {
        let cut = p.len - side;
        trimmed.push(Progression { start: p.start + cut * p.diff, diff: p.diff, len: side });
        (0..cut).for_each(|i| omega.push(p.start + i * p.diff));
    }
    let mut squares = Vec::with_capacity(trimmed.len().pow(2));
    for p in &trimmed {
        for q in &trimmed {
            squares.push(RightSquare { a: p.start, b: q.start, d: p.diff, t: side }.normalized(n));
        }
    }
    squares.sort_unstable();
    let mut omega_points = Vec::new();
    let mut shaved = vec![false; n];
    omega.iter().for_each(|&x| shaved[x] = true);
    for k in 0..n {
        for m in 0..n {
            if shaved[k] || shaved[m] {
                omega_points.push((k, m));
            }
        }
    }
    let delta = a.density();
    let mut acc = Rational::zero();
    for sq in &squares {
        let d = ratio(sq.count(a), sq.size()) - &delta;
        acc += &d * &d;
    }
    let mean_square_deviation = acc / ratio(squares.len().max(1), 1);
    let deviation_bound = alpha * alpha / 16.0;
    let bound_applicable = (n as f64).log2() >= 100.0 - 10.0 * alpha.log2();
    let m = ap.progressions.len();
    let omega_accounting_bound = 2 * m * m * n.div_ceil(m);
    let omega_asymptotic_bound = (n as f64).powf(11.0 / 6.0);
    let family = SquareFamily { modulus: n, squares, omega: omega_points };
    let is_partition = family.partitions(&RightSquare::whole(n));
    let omega_size = family.omega.len();
    Ok(RefinementReport {
        frequency: freq,
        alpha,
        s,
        progression_count: m,
        side,
        bound_holds: bound_applicable.then(|| zn::to_f64(&mean_square_deviation) >= deviation_bound),
        mean_square_deviation,
        deviation_bound,
        bound_applicable,
        omega_size,
        omega_accounting_bound,
        omega_within_accounting: omega_size <= omega_accounting_bound,
        omega_asymptotic_bound,
        omega_within_asymptotic: (omega_size as f64) < omega_asymptotic_bound,
        is_partition,
        family,
    })
}

/// Nonzero frequency of largest coefficient of the balanced function of `set`, with its magnitude.
#[cfg(test)]
fn refinement_direction(set: &GridSet) -> Option<((usize, usize), f64)> {
    let t = set.modulus();
    let spectrum = fourier::dft(&ComplexField::balanced_2d(set));
    spectrum.argmax_nonzero().map(|(i, v)| ((i / t, i % t), v))
}

/// Refines a square of a larger grid by working in its local coordinates.
pub fn refine_square(w: &GridSet, cell: &RightSquare, freq: (usize, usize)) -> Result<SquareFamily> {
    let local = cell.localize(w);
    let report = right_square_partition(&local, freq)?;
    Ok(lift_family(w.modulus(), cell, &report.family))
}

fn lift_family(n: usize, cell: &RightSquare, local: &SquareFamily) -> SquareFamily {
    let mut squares: Vec<RightSquare> = local.squares.iter().map(|s| cell.compose(s).normalized(n)).collect();
    squares.sort_unstable();
    let omega = local.omega.iter().map(|&(i, j)| cell.point(n, i, j)).collect();
    SquareFamily { modulus: n, squares, omega }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyState {
    pub iteration: usize,
    pub cells: usize,
    #[serde(serialize_with = "serialize_rational")]
    pub energy: Rational,
    #[serde(skip)]
    pub cell_densities: Vec<Rational>,
    pub within_bound: bool,
}

impl EnergyState {
    pub fn energy_f64(&self) -> f64 {
        zn::to_f64(&self.energy)
    }
}

/// `sum_j |W & C_j|^2 / |C_j|`.
pub fn energy_of_family(squares: &[RightSquare], w: &GridSet) -> EnergyState {
    let n = w.modulus();
    let mut energy = Rational::zero();
    let mut cell_densities = Vec::with_capacity(squares.len());
    for sq in squares {
        let c = sq.count(w);
        energy += ratio(c * c, sq.size());
        cell_densities.push(ratio(c, sq.size()));
    }
    let within_bound = energy <= ratio(n * n, 1);
    EnergyState { iteration: 0, cells: squares.len(), energy, cell_densities, within_bound }
}

/// Terms of `|E2|^2 = |E1|^2 + |E2 - E1|^2 + 2 (E1, E2 - E1)` for the cell-density functions of two families.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyDecomposition {
    #[serde(serialize_with = "serialize_rational")]
    pub coarse: Rational,
    #[serde(serialize_with = "serialize_rational")]
    pub fine: Rational,
    #[serde(serialize_with = "serialize_rational")]
    pub difference: Rational,
    #[serde(serialize_with = "serialize_rational")]
    pub cross: Rational,
    pub holds: bool,
}

/// Cell density at every point, zero off the family.
fn density_field(squares: &[RightSquare], w: &GridSet) -> (Vec<usize>, Vec<Rational>) {
    let n = w.modulus();
    let mut owner = vec![usize::MAX; n * n];
    let mut dens = Vec::with_capacity(squares.len());
    for (i, sq) in squares.iter().enumerate() {
        sq.points(n).for_each(|(k, m)| owner[k * n + m] = i);
        dens.push(ratio(sq.count(w), sq.size()));
    }
    (owner, dens)
}

pub fn energy_decomposition(coarse: &[RightSquare], fine: &[RightSquare], w: &GridSet) -> EnergyDecomposition {
    let (o1, d1) = density_field(coarse, w);
    let (o2, d2) = density_field(fine, w);
    let mut pairs: HashMap<(usize, usize), usize> = HashMap::new();
    for (a, b) in o1.iter().zip(&o2) {
        *pairs.entry((*a, *b)).or_default() += 1;
    }
    let value = |d: &[Rational], i: usize| if i == usize::MAX { Rational::zero() } else { d[i].clone() };
    let (mut e1, mut e2, mut diff, mut cross) = (Rational::zero(), Rational::zero(), Rational::zero(), Rational::zero());
    for (&(i, j), &count) in &pairs {
        let c = ratio(count, 1);
        let x = value(&d1, i);
        let y = value(&d2, j);
        let g = &y - &x;
        e1 += &c * &x * &x;
        e2 += &c * &y * &y;
        diff += &c * &g * &g;
        cross += &c * &x * &g;
    }
    let holds = e2 == &e1 + &diff + &cross * ratio(2, 1);
    EnergyDecomposition { coarse: e1, fine: e2, difference: diff, cross, holds }
}

/// `alpha(s) = K s^rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLaw {
    pub coefficient: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub fn new(coefficient: f64, exponent: f64) -> Result<Self> {
        if !(coefficient > 0.0 && coefficient <= 1.0 && exponent >= 4.0) {
            return Err(Error::InvalidParameter(format!(
                "power law needs K in (0, 1] and rho >= 4, got K = {coefficient}, rho = {exponent}"
            )));
        }
        Ok(PowerLaw { coefficient, exponent })
    }

    pub fn at(&self, s: f64) -> f64 {
        self.coefficient * s.powf(self.exponent)
    }
}

/// Limits of the loop that replace the size thresholds of the asymptotic argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunLimits {
    pub min_side: usize,
    pub max_squares: usize,
}

impl RunLimits {
    pub fn for_profile(profile: ProfileName) -> Self {
        match profile {
            ProfileName::Toy | ProfileName::Paper => RunLimits { min_side: 4, max_squares: 64 },
        }
    }
}

/// Weighted power-mean inequality over the cells refined in one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderCheck {
    /// `sum_j |C_j| alpha(delta_j)`.
    pub lhs: f64,
    /// `K (sum_j delta_j |C_j|)^rho / (sum_j |C_j|)^(rho - 1)`.
    pub rhs: f64,
    pub holds: bool,
}

fn holder_check(cells: &[(usize, f64)], law: &PowerLaw) -> HolderCheck {
    let lhs: f64 = cells.iter().map(|&(size, d)| size as f64 * law.at(d)).sum();
    let mass: f64 = cells.iter().map(|&(size, d)| size as f64 * d).sum();
    let total: f64 = cells.iter().map(|&(size, _)| size as f64).sum();
    let rhs = law.coefficient * mass.powf(law.exponent) / total.powf(law.exponent - 1.0);
    HolderCheck { lhs, rhs, holds: rhs <= lhs * (1.0 + 1e-9) + 1e-300 }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub cells: usize,
    pub energy: f64,
    #[serde(skip)]
    pub exact_energy: Rational,
    /// `|W & Omega|` so far.
    pub bad_mass: usize,
    pub refined_cells: usize,
    /// `|W|` restricted to cells failing their uniformity target.
    pub nonuniform_mass: usize,
    /// `|W| = sum |W & cell| + |W & Omega|`.
    pub accounting_holds: bool,
    /// Against the next family, when this iteration refined.
    pub decomposition: Option<EnergyDecomposition>,
    pub holder: Option<HolderCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunOutcome {
    /// Non-uniform mass fell below `eps N^2`.
    Converged,
    /// No cell could be refined with an energy gain.
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyRun {
    pub profile: ProfileName,
    pub law: PowerLaw,
    pub epsilon: f64,
    pub limits: RunLimits,
    pub outcome: RunOutcome,
    /// Uniform cells of side at least the minimum where `W` has density at least `eps`.
    pub squares: Vec<RightSquare>,
    #[serde(skip)]
    pub square_densities: Vec<Rational>,
    /// `W` minus the union of `squares`.
    #[serde(serialize_with = "serialize_points")]
    pub bad: GridSet,
    pub trace: Vec<IterationTrace>,
    /// `|W| = sum |W & P_i| + |B|`.
    pub accounting_holds: bool,
}

#[derive(Debug, Clone)]
struct CellStatus {
    count: usize,
    uniform: bool,
    direction: Option<((usize, usize), f64)>,
}

fn cell_status(w: &GridSet, cell: &RightSquare, law: &PowerLaw) -> CellStatus {
    let local = cell.localize(w);
    let t = cell.t as f64;
    let count = local.len();
    let delta = count as f64 / (t * t);
    let spectrum = fourier::dft(&ComplexField::balanced_2d(&local));
    // By Parseval the autocorrelation functional equals sum |F|^4 / t^2.
    let alpha = spectrum.fourth_moment() / t.powi(8);
    let uniform = alpha <= law.at(delta) * (1.0 + 1e-12);
    let direction = if uniform {
        None
    } else {
        spectrum.argmax_nonzero().map(|(i, v)| ((i / cell.t, i % cell.t), v))
    };
    CellStatus { count, uniform, direction }
}

/// Refines non-uniform cells until their total `W`-mass drops below `eps N^2`.
pub fn energy_increment_run(
    w: &GridSet,
    epsilon: f64,
    law: PowerLaw,
    profile: ProfileName,
    max_iters: usize,
) -> Result<EnergyRun> {
    energy_increment_run_with(w, epsilon, law, profile, RunLimits::for_profile(profile), max_iters)
}

pub fn energy_increment_run_with(
    w: &GridSet,
    epsilon: f64,
    law: PowerLaw,
    profile: ProfileName,
    limits: RunLimits,
    max_iters: usize,
) -> Result<EnergyRun> {
    let n = w.modulus();
    let delta = zn::to_f64(&w.density());
    if !(epsilon > 0.0 && epsilon <= delta * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!("eps = {epsilon} must lie in (0, {delta}]")));
    }
    if max_iters == 0 {
        return Err(Error::InvalidParameter("at least one iteration is required".into()));
    }
    let mut cells = vec![RightSquare::whole(n)];
    let mut omega = vec![false; n * n];
    let mut trace = Vec::new();
    let mut outcome = RunOutcome::MaxIterations;
    let mut statuses;
    let mut iteration = 1;
    loop {
        statuses = cells.iter().map(|c| cell_status(w, c, &law)).collect::<Vec<_>>();
        let state = energy_of_family(&cells, w);
        let bad_mass = w.iter().filter(|&(k, m)| omega[k * n + m]).count();
        let covered: usize = statuses.iter().map(|s| s.count).sum();
        let refinable: Vec<usize> =
            (0..cells.len()).filter(|&i| !statuses[i].uniform && cells[i].t >= limits.min_side).collect();
        let nonuniform_mass = refinable.iter().map(|&i| statuses[i].count).sum();
        let mut entry = IterationTrace {
            iteration,
            cells: cells.len(),
            energy: state.energy_f64(),
            exact_energy: state.energy.clone(),
            bad_mass,
            refined_cells: 0,
            nonuniform_mass,
            accounting_holds: covered + bad_mass == w.len(),
            decomposition: None,
            holder: None,
        };
        if (nonuniform_mass as f64) < epsilon * (n * n) as f64 {
            outcome = RunOutcome::Converged;
            trace.push(entry);
            break;
        }
        if iteration > max_iters {
            trace.push(entry);
            break;
        }
        let mut next = Vec::with_capacity(cells.len());
        let mut refined = Vec::new();
        let mut new_omega = Vec::new();
        for (i, cell) in cells.iter().enumerate() {
            let status = &statuses[i];
            let attempt = match status.direction {
                Some((freq, magnitude)) if cell.t >= limits.min_side => {
                    let local = cell.localize(w);
                    refine_with(&local, freq, magnitude, Some(limits.max_squares)).ok()
                }
                _ => None,
            };
            let accepted = attempt.filter(|r| {
                let before = ratio(status.count * status.count, cell.size());
                let after = energy_of_family(&r.family.squares, &cell.localize(w)).energy;
                after > before
            });
            match accepted {
                Some(r) => {
                    let lifted = lift_family(n, cell, &r.family);
                    refined.push((cell.size(), status.count as f64 / cell.size() as f64));
                    new_omega.extend(lifted.omega);
                    next.extend(lifted.squares);
                }
                None => next.push(*cell),
            }
        }
        if refined.is_empty() {
            outcome = RunOutcome::Stalled;
            trace.push(entry);
            break;
        }
        next.sort_unstable();
        entry.refined_cells = refined.len();
        entry.decomposition = Some(energy_decomposition(&cells, &next, w));
        entry.holder = Some(holder_check(&refined, &law));
        trace.push(entry);
        new_omega.into_iter().for_each(|(k, m)| omega[k * n + m] = true);
        cells = next;
        iteration += 1;
    }
    let mut squares = Vec::new();
    let mut square_densities = Vec::new();
    let mut kept = vec![false; n * n];
    for (cell, status) in cells.iter().zip(&statuses) {
        let density = ratio(status.count, cell.size());
        if status.uniform && cell.t >= limits.min_side && zn::to_f64(&density) >= epsilon {
            cell.points(n).for_each(|(k, m)| kept[k * n + m] = true);
            squares.push(*cell);
            square_densities.push(density);
        }
    }
    let bad = GridSet::new(n, w.iter().filter(|&(k, m)| !kept[k * n + m]))?;
    let covered: usize = squares.iter().map(|s| s.count(w)).sum();
    Ok(EnergyRun {
        profile,
        law,
        epsilon,
        limits,
        outcome,
        accounting_holds: covered + bad.len() == w.len(),
        squares,
        square_densities,
        bad,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideUniformity {
    pub relative_size: f64,
    pub measured_alpha: f64,
    /// `K^(1/2) gamma^(rho/2)`.
    pub target: f64,
    pub meets_target: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocatedSquare {
    pub square: RightSquare,
    pub r1: LineSet,
    pub r2: LineSet,
    #[serde(serialize_with = "serialize_rational")]
    pub density: Rational,
    pub meets_floor: bool,
    pub side1: SideUniformity,
    pub side2: SideUniformity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocateResult {
    pub epsilon: f64,
    #[serde(serialize_with = "serialize_rational")]
    pub base_density: Rational,
    /// `delta - 4 zeta`.
    pub floor: f64,
    pub found: Option<LocatedSquare>,
    pub run: EnergyRun,
}

fn side_uniformity(r: &LineSet, positions: &[usize], law: &PowerLaw) -> Result<SideUniformity> {
    let t = positions.len();
    let local = LineSet::new(t, positions.iter().enumerate().filter(|(_, &x)| r.contains(x)).map(|(i, _)| i))?;
    let gamma = local.len() as f64 / t as f64;
    let measured = uniformity::alpha_uniformity_1d(&ComplexField::balanced_1d(&local))?.minimal_alpha;
    let target = law.coefficient.sqrt() * gamma.powf(law.exponent / 2.0);
    Ok(SideUniformity { relative_size: gamma, measured_alpha: measured, target, meets_target: measured <= target * (1.0 + 1e-12) })
}

/// Regularizes `W1 x W2` and returns the surviving square where `A` is densest relative to `W`.
pub fn uniform_rectangle_locate(
    w1: &LineSet,
    w2: &LineSet,
    a: &GridSet,
    zeta: f64,
    law: PowerLaw,
    profile: ProfileName,
    max_iters: usize,
) -> Result<LocateResult> {
    let n = a.modulus();
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::InvalidParameter(format!("zeta = {zeta} must lie in (0, 1)")));
    }
    let bx = GridBox::new(w1.clone(), w2.clone())?;
    if let Some((k, m)) = a.first_outside(&bx) {
        return Err(Error::OutsideBox { k, m });
    }
    bx.require_nonempty()?;
    let w = GridSet::from_box(&bx);
    let beta = (w1.len() * w2.len()) as f64 / (n * n) as f64;
    let epsilon = zeta * beta;
    let run = energy_increment_run(&w, epsilon, law, profile, max_iters)?;
    let base_density = ratio(a.len(), w.len());
    let floor = zn::to_f64(&base_density) - 4.0 * zeta;
    let mut best: Option<(Rational, RightSquare)> = None;
    for sq in &run.squares {
        let d = ratio(sq.count(a), sq.count(&w));
        if best.as_ref().is_none_or(|(b, _)| &d > b) {
            best = Some((d, *sq));
        }
    }
    let found = match best {
        None => None,
        Some((density, square)) => {
            let xs = square.xs(n);
            let ys = square.ys(n);
            let r1 = LineSet::new(n, xs.iter().copied().filter(|&x| w1.contains(x)))?;
            let r2 = LineSet::new(n, ys.iter().copied().filter(|&y| w2.contains(y)))?;
            Some(LocatedSquare {
                square,
                meets_floor: zn::to_f64(&density) >= floor,
                density,
                side1: side_uniformity(&r1, &xs, &law)?,
                side2: side_uniformity(&r2, &ys, &law)?,
                r1,
                r2,
            })
        }
    };
    Ok(LocateResult { epsilon, base_density, floor, found, run })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaturationCheck {
    #[serde(serialize_with = "serialize_rational")]
    pub lhs: Rational,
    #[serde(serialize_with = "serialize_rational")]
    pub rhs: Rational,
    pub holds: bool,
}

/// `|f_A|^4 <= 4 |E1|^2 |E2|^2 delta^2 (1 - delta)` for the balanced box function.
pub fn saturation_bound_check(a: &GridSet, bx: &GridBox) -> Result<SaturationCheck> {
    let lhs = box_uniformity_exact(a, bx)?.fourth_power;
    let delta = ratio(a.len(), bx.size());
    let area = ratio(bx.size() * bx.size(), 1);
    let rhs = ratio(4, 1) * area * &delta * &delta * (ratio(1, 1) - &delta);
    let slack = &rhs * zn::from_f64(1e-6)?;
    Ok(SaturationCheck { holds: lhs <= &rhs + slack, lhs, rhs })
}

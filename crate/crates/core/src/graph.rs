//! The bipartite graph of a set inside a box, its Gram matrix `T = M M'`, the
//! eigenvalue criteria for uniformity, and the density-increment search.
//!
//! Row `i` of the adjacency matrix `M` is the `i`-th member of `xs`, column `j`
//! the `j`-th member of `ys`; `M[i][j] = 1` when that point lies in the set.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::profile::{IncrementConstants, ProfileName};
use crate::tolerance;
use crate::uniformity::box_uniformity_exact;
use crate::zn::{
    self, marginal_profile, marginal_uniformity_check, ratio, GridBox, GridSet, LineSet, MarginalProfile,
    MarginalScale, Rational,
};

fn require_square(bx: &GridBox) -> Result<usize> {
    if bx.width() != bx.height() {
        return Err(Error::NotSquare { width: bx.width(), height: bx.height() });
    }
    bx.require_nonempty()?;
    Ok(bx.width())
}

/// `adj[i][j]` for `xs[i]`, `ys[j]`; fails when a member lies outside the box.
fn adjacency(a: &GridSet, bx: &GridBox) -> Result<Vec<Vec<bool>>> {
    if let Some((k, m)) = a.first_outside(bx) {
        return Err(Error::OutsideBox { k, m });
    }
    Ok(bx.xs().iter().map(|k| bx.ys().iter().map(|m| a.contains(k, m)).collect()).collect())
}

fn gram(adj: &[Vec<bool>]) -> Vec<Vec<u64>> {
    let n = adj.len();
    let mut t = vec![vec![0u64; n]; n];
    for p in 0..n {
        for q in p..n {
            let c = adj[p].iter().zip(&adj[q]).filter(|(x, y)| **x && **y).count() as u64;
            t[p][q] = c;
            t[q][p] = c;
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub n: usize,
    pub size: usize,
    pub delta: f64,
    /// Descending.
    pub mu: Vec<f64>,
    /// `vectors[i]` belongs to `mu[i]`, scaled to squared length `n`.
    pub vectors: Vec<Vec<f64>>,
    /// The leading vector has nonnegative entries after sign alignment.
    pub perron_aligned: bool,
    /// `|u_1 - (1, ..., 1)|^2`.
    pub deviation: f64,
    pub trace: f64,
    pub trace_of_square: f64,
    /// `sum_{p,q} |A_p & A_q|^2`, computed from integer counts.
    pub intersection_energy: u128,
    /// Largest `|(u_i, u_j)|`, `i != j`.
    pub max_overlap: f64,
}

impl SpectralReport {
    pub fn trace_holds(&self) -> bool {
        tolerance::within(self.trace, self.size as f64, tolerance::SPECTRAL_TRACE, (self.size as f64).max(1.0))
    }

    pub fn trace_of_square_holds(&self) -> bool {
        let expected = self.intersection_energy as f64;
        tolerance::within(self.trace_of_square, expected, tolerance::SPECTRAL_TRACE, expected.max(1.0))
    }

    pub fn orthogonal(&self) -> bool {
        self.max_overlap <= tolerance::SPECTRAL_TRACE * self.n as f64
    }
}

fn align_sign(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    let tiny = 1e-9 * v.len() as f64;
    let flip = if sum < -tiny {
        true
    } else if sum <= tiny {
        v.iter().find(|x| x.abs() > 1e-9).is_some_and(|x| *x < 0.0)
    } else {
        false
    };
    if flip {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn gram_spectrum(a: &GridSet, bx: &GridBox) -> Result<SpectralReport> {
    require_square(bx)?;
    let adj = adjacency(a, bx)?;
    Ok(spectrum_of(&adj, a.len()))
}

fn spectrum_of(adj: &[Vec<bool>], size: usize) -> SpectralReport {
    let n = adj.len();
    let t = gram(adj);
    let intersection_energy = t.iter().flatten().map(|&c| (c as u128) * (c as u128)).sum();
    let matrix = DMatrix::from_fn(n, n, |i, j| t[i][j] as f64);
    let eig = SymmetricEigen::new(matrix);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap_or(Ordering::Equal).then(i.cmp(&j))
    });
    let scale = (n as f64).sqrt();
    let mut mu = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for &i in &order {
        mu.push(eig.eigenvalues[i]);
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().map(|x| x * scale).collect();
        align_sign(&mut v);
        vectors.push(v);
    }
    let deviation = vectors.first().map_or(0.0, |u| u.iter().map(|x| (x - 1.0).powi(2)).sum());
    let perron_aligned = vectors.first().is_some_and(|u| u.iter().all(|&x| x >= -tolerance::EIGEN_CLAMP * scale));
    let mut max_overlap: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = vectors[i].iter().zip(&vectors[j]).map(|(x, y)| x * y).sum();
            max_overlap = max_overlap.max(d.abs());
        }
    }
    let trace = mu.iter().sum();
    let trace_of_square = mu.iter().map(|m| m * m).sum();
    for m in mu.iter_mut() {
        if *m < 0.0 && *m >= -tolerance::EIGEN_CLAMP * (n as f64).max(1.0) {
            *m = 0.0;
        }
    }
    SpectralReport {
        n,
        size,
        delta: size as f64 / (n * n) as f64,
        mu,
        vectors,
        perron_aligned,
        deviation,
        trace,
        trace_of_square,
        intersection_energy,
        max_overlap,
    }
}

/// A checked implication: whether its premise held, and if so whether its conclusion did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckVerdict {
    pub hypothesis: bool,
    pub conclusion: Option<bool>,
    /// Right side minus left side of the conclusion; positive when it holds.
    pub margin: Option<f64>,
}

impl CheckVerdict {
    fn evaluate(hypothesis: bool, lhs: f64, rhs: f64) -> Self {
        if !hypothesis {
            return CheckVerdict { hypothesis, conclusion: None, margin: None };
        }
        CheckVerdict { hypothesis, conclusion: Some(tolerance::at_most(lhs, rhs)), margin: Some(rhs - lhs) }
    }

    /// A conclusion failed while its premise held.
    pub fn violated(&self) -> bool {
        self.conclusion == Some(false)
    }
}

/// Parameters left as `None` are measured from the set itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SpectralCheckParams {
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub marginal_alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralChecks {
    pub n: usize,
    pub delta: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub deviation: f64,
    pub measured_box_alpha: f64,
    pub measured_marginal_alpha: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub marginal_alpha: f64,
    /// `mu_1 >= delta^2 n^2`.
    pub mu1_lower: CheckVerdict,
    /// `mu_1 <= delta^2 n^2 + (2 eps + alpha1^2) n^2` when `u_1` is close to constant.
    pub mu1_upper: CheckVerdict,
    /// Uniform sets have `mu_2 <= (alpha^(1/2) + 4 eps^(1/2) + 4 alpha1^(1/2)) n^2`.
    pub forward: CheckVerdict,
    /// `mu_2 <= eta n^2` forces box uniformity at level `eta + 16 eps + 16 alpha1`.
    pub converse: CheckVerdict,
}

/// Nudges a measured quantity up so that it satisfies its own defining inequality.
fn inflate(x: f64) -> f64 {
    x * (1.0 + 1e-12) + 1e-15
}

pub fn spectral_uniformity_check(a: &GridSet, bx: &GridBox, params: SpectralCheckParams) -> Result<SpectralChecks> {
    let report = gram_spectrum(a, bx)?;
    let profile = marginal_profile(a, bx)?;
    let n = report.n as f64;
    let n2 = n * n;
    let delta = report.delta;
    let box_alpha = zn::to_f64(&box_uniformity_exact(a, bx)?.alpha);
    let measured_marginal = inflate(zn::measured_marginal_alpha(&profile));
    let measured_epsilon = inflate((report.deviation / n).sqrt());

    let marginal_alpha = params.marginal_alpha.unwrap_or(measured_marginal);
    let marginal_ok = tolerance::at_most(measured_marginal, marginal_alpha * (1.0 + 1e-12));
    let epsilon = params.epsilon.unwrap_or(measured_epsilon);
    let close = epsilon < 1.0 && tolerance::at_most(report.deviation, epsilon * epsilon * n);
    let alpha = params.alpha.unwrap_or(inflate(box_alpha));

    let mu1 = report.mu[0];
    let mu2 = report.mu.get(1).copied().unwrap_or(0.0);
    let eta = inflate(mu2.max(0.0) / n2);

    Ok(SpectralChecks {
        n: report.n,
        delta,
        mu1,
        mu2,
        deviation: report.deviation,
        measured_box_alpha: box_alpha,
        measured_marginal_alpha: measured_marginal,
        alpha,
        epsilon,
        marginal_alpha,
        mu1_lower: CheckVerdict::evaluate(true, delta * delta * n2, mu1 + tolerance::SPECTRAL_TRACE * n2),
        mu1_upper: CheckVerdict::evaluate(
            close && marginal_ok,
            mu1,
            (delta * delta + 2.0 * epsilon + marginal_alpha * marginal_alpha) * n2,
        ),
        forward: CheckVerdict::evaluate(
            close && marginal_ok && tolerance::at_most(box_alpha, alpha),
            mu2,
            (alpha.sqrt() + 4.0 * epsilon.sqrt() + 4.0 * marginal_alpha.sqrt()) * n2,
        ),
        converse: CheckVerdict::evaluate(close && marginal_ok, box_alpha, eta + 16.0 * epsilon + 16.0 * marginal_alpha),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSetPartition {
    /// Index classes, ordered by grid cell.
    pub classes: Vec<Vec<usize>>,
    pub centers: Vec<Complex64>,
    pub alpha: f64,
    pub xi: f64,
    /// `4 / (alpha xi)^2`.
    pub count_bound: f64,
    pub within_count_bound: bool,
}

/// Groups the indices of `v` by a square grid of side `xi / sqrt 2` over the disk of radius `1 / alpha`.
///
/// `lambda` and `d_bound` are the eigenvalue and entry bound of the matrix that
/// `v` is an eigenvector of; they certify that `v` fits in the disk.
pub fn level_set_partition(v: &[Complex64], alpha: f64, xi: f64, d_bound: f64, lambda: f64) -> Result<LevelSetPartition> {
    if !(xi > 0.0 && xi < 0.5) {
        return Err(Error::InvalidParameter(format!("cell diameter {xi} must lie in (0, 1/2)")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("level {alpha} must lie in (0, 1)")));
    }
    let n = v.len() as f64;
    if lambda.abs() < alpha * n * d_bound {
        return Err(Error::InvalidParameter(format!(
            "eigenvalue {lambda} is below alpha * n * D = {}",
            alpha * n * d_bound
        )));
    }
    let radius = 1.0 / alpha;
    if let Some((index, x)) = v.iter().enumerate().find(|(_, x)| x.norm() > radius + tolerance::LEVEL_SET_RADIUS) {
        return Err(Error::OutsideDisk { index, magnitude: x.norm() });
    }
    let side = xi / std::f64::consts::SQRT_2;
    let mut cells: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, x) in v.iter().enumerate() {
        let key = ((x.re / side).floor() as i64, (x.im / side).floor() as i64);
        cells.entry(key).or_default().push(i);
    }
    let mut classes = Vec::with_capacity(cells.len());
    let mut centers = Vec::with_capacity(cells.len());
    for ((cx, cy), members) in cells {
        let mid = Complex64::new((cx as f64 + 0.5) * side, (cy as f64 + 0.5) * side);
        let center = if mid.norm() <= radius {
            mid
        } else {
            let x = v[members[0]];
            if x.norm() > radius {
                x * (radius / x.norm())
            } else {
                x
            }
        };
        classes.push(members);
        centers.push(center);
    }
    for (members, c) in classes.iter().zip(&centers) {
        if let Some(&j) = members.iter().find(|&&j| (v[j] - c).norm() > xi + 1e-12) {
            return Err(Error::Numerical(format!("index {j} lies farther than {xi} from its center")));
        }
    }
    let count_bound = 4.0 / (alpha * xi).powi(2);
    Ok(LevelSetPartition {
        within_count_bound: classes.len() as f64 <= count_bound,
        classes,
        centers,
        alpha,
        xi,
        count_bound,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensitySplit {
    /// Cells with `|A & Q_i| < (delta - eta) |Q_i|`.
    pub bad: Vec<usize>,
    /// `sum_{i not bad} |A & Q_i|`.
    pub lhs: Rational,
    /// `delta sum_{i not bad} |Q_i| + eta sum_{i bad} |Q_i|`.
    pub rhs: Rational,
    pub holds: bool,
}

/// Splits the cells of a partition by how far `A` falls below its mean density in them.
pub fn density_split(a: &GridSet, cells: &[GridSet], eta: &Rational) -> Result<DensitySplit> {
    if !eta.is_positive() {
        return Err(Error::InvalidParameter("eta must be positive".into()));
    }
    let n = a.modulus();
    let mut owner = vec![usize::MAX; n * n];
    for (i, cell) in cells.iter().enumerate() {
        if cell.modulus() != n {
            return Err(Error::ModulusMismatch { left: n, right: cell.modulus() });
        }
        for (k, m) in cell.iter() {
            if owner[k * n + m] != usize::MAX {
                return Err(Error::InvalidPartition(format!("cells {} and {i} share ({k}, {m})", owner[k * n + m])));
            }
            owner[k * n + m] = i;
        }
    }
    let ambient: usize = cells.iter().map(GridSet::len).sum();
    if ambient == 0 {
        return Err(Error::InvalidPartition("the cells are empty".into()));
    }
    let mut hits = vec![0usize; cells.len()];
    for (k, m) in a.iter() {
        match owner[k * n + m] {
            usize::MAX => return Err(Error::InvalidPartition(format!("({k}, {m}) lies outside every cell"))),
            i => hits[i] += 1,
        }
    }
    let delta = ratio(a.len(), ambient);
    let floor = &delta - eta;
    let mut bad = Vec::new();
    let mut lhs = Rational::zero();
    let mut good_mass = 0usize;
    let mut bad_mass = 0usize;
    for (i, cell) in cells.iter().enumerate() {
        if ratio(hits[i], 1) < &floor * ratio(cell.len(), 1) {
            bad.push(i);
            bad_mass += cell.len();
        } else {
            lhs += ratio(hits[i], 1);
            good_mass += cell.len();
        }
    }
    let rhs = &delta * ratio(good_mass, 1) + eta * ratio(bad_mass, 1);
    Ok(DensitySplit { holds: lhs >= rhs, bad, lhs, rhs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IncrementKind {
    Uniform,
    Increment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IncrementRoute {
    /// Density is zero or one.
    Trivial,
    /// Measured box uniformity is within the requested level.
    MeasuredUniform,
    MarginalRows,
    MarginalColumns,
    /// Level sets of the second eigenvector.
    SpectralSecond,
    /// Level sets of the leading eigenvector.
    SpectralFirst,
    /// Carving a rectangle into near-squares.
    Carve,
    /// Densest single row, column, or column support.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementResult {
    pub kind: IncrementKind,
    pub route: IncrementRoute,
    pub profile: ProfileName,
    #[serde(serialize_with = "serialize_rational")]
    pub base_density: Rational,
    pub g1: LineSet,
    pub g2: LineSet,
    /// `|A & (g1 x g2)|`.
    pub count: usize,
    #[serde(serialize_with = "serialize_rational")]
    pub new_density: Rational,
    #[serde(serialize_with = "serialize_rational")]
    pub density_gain: Rational,
    pub gain_floor: f64,
    pub size_floor: f64,
    pub meets_gain_floor: bool,
    pub meets_size_floor: bool,
    pub measured_alpha: Option<f64>,
}

fn serialize_rational<S: serde::Serializer>(q: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

impl IncrementResult {
    /// Recounts `A` in `g1 x g2` and confirms the recorded density, and for
    /// increments that it exceeds the base density.
    pub fn verify(&self, a: &GridSet) -> bool {
        let count = a.iter().filter(|&(k, m)| self.g1.contains(k) && self.g2.contains(m)).count();
        let area = self.g1.len() * self.g2.len();
        if count != self.count || area == 0 || ratio(count, area) != self.new_density {
            return false;
        }
        match self.kind {
            IncrementKind::Increment => self.new_density > self.base_density,
            IncrementKind::Uniform => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Candidate {
    g1: LineSet,
    g2: LineSet,
    count: usize,
}

impl Candidate {
    fn measure(a: &GridSet, g1: LineSet, g2: LineSet) -> Self {
        let count = a.iter().filter(|&(k, m)| g1.contains(k) && g2.contains(m)).count();
        Candidate { g1, g2, count }
    }

    fn from_members(a: &GridSet, xs: &[usize], ys: &[usize]) -> Self {
        let n = a.modulus();
        let line = |v: &[usize]| LineSet::new(n, v.iter().copied()).expect("members are residues");
        Self::measure(a, line(xs), line(ys))
    }

    fn density(&self) -> Rational {
        ratio(self.count, self.g1.len() * self.g2.len())
    }

    fn min_side(&self) -> usize {
        self.g1.len().min(self.g2.len())
    }
}

/// Positive gain first, then the size floor, then the gain, then the smaller sides lexicographically.
fn best_candidate(candidates: Vec<Candidate>, delta: &Rational, size_floor: f64) -> Option<Candidate> {
    let key = |c: &Candidate| (c.min_side() as f64 >= size_floor, c.density());
    candidates
        .into_iter()
        .filter(|c| !c.g1.is_empty() && !c.g2.is_empty() && &c.density() > delta)
        .min_by(|x, y| {
            let (fx, dx) = key(x);
            let (fy, dy) = key(y);
            fy.cmp(&fx)
                .then_with(|| dy.cmp(&dx))
                .then_with(|| x.g1.members().cmp(y.g1.members()))
                .then_with(|| x.g2.members().cmp(y.g2.members()))
        })
}

struct Search<'a> {
    a: &'a GridSet,
    delta: Rational,
    consts: &'a IncrementConstants,
}

impl Search<'_> {
    fn finish(
        &self,
        kind: IncrementKind,
        route: IncrementRoute,
        c: Candidate,
        gain_floor: f64,
        size_floor: f64,
        measured_alpha: Option<f64>,
    ) -> IncrementResult {
        let new_density = c.density();
        let density_gain = &new_density - &self.delta;
        IncrementResult {
            kind,
            route,
            profile: self.consts.profile,
            meets_gain_floor: zn::to_f64(&density_gain) >= gain_floor,
            meets_size_floor: c.min_side() as f64 >= size_floor,
            base_density: self.delta.clone(),
            g1: c.g1,
            g2: c.g2,
            count: c.count,
            new_density,
            density_gain,
            gain_floor,
            size_floor,
            measured_alpha,
        }
    }

    fn uniform(&self, bx: &GridBox, route: IncrementRoute, measured_alpha: Option<f64>) -> IncrementResult {
        let c = Candidate { g1: bx.xs().clone(), g2: bx.ys().clone(), count: self.a.len() };
        self.finish(IncrementKind::Uniform, route, c, self.consts.gain_floor, self.consts.size_floor, measured_alpha)
    }
}

/// Rows (or columns) far from the mean density, following the marginal argument at level `zeta`.
fn marginal_candidate(
    a: &GridSet,
    bx: &GridBox,
    profile: &MarginalProfile,
    zeta: &Rational,
) -> Option<(IncrementRoute, Candidate)> {
    let check = marginal_uniformity_check(profile, zeta, MarginalScale::Quadratic);
    if check.both() {
        return None;
    }
    let half = zeta / ratio(2, 1);
    let quarter_sq = zeta * zeta / ratio(4, 1);
    let (route, densities, axis, other) = if !check.rows_hold {
        (IncrementRoute::MarginalRows, &profile.row_density, bx.ys(), bx.xs())
    } else {
        (IncrementRoute::MarginalColumns, &profile.col_density, bx.xs(), bx.ys())
    };
    let upper = &profile.delta + &half;
    let lower = &profile.delta - &half;
    let plus: Vec<usize> = densities.iter().filter(|(_, d)| **d > upper).map(|(&i, _)| i).collect();
    let minus: Vec<usize> = densities.iter().filter(|(_, d)| **d < lower).map(|(&i, _)| i).collect();
    let threshold = &quarter_sq * ratio(axis.len(), 1);
    let complement = || -> Vec<usize> { axis.iter().filter(|i| minus.binary_search(i).is_err()).collect() };
    let chosen = if !plus.is_empty() && ratio(plus.len(), 1) >= threshold {
        plus.clone()
    } else if !minus.is_empty() && ratio(minus.len(), 1) >= threshold {
        complement()
    } else if !plus.is_empty() {
        plus.clone()
    } else if !minus.is_empty() {
        complement()
    } else {
        return None;
    };
    let n = a.modulus();
    let chosen = LineSet::new(n, chosen).expect("members are residues");
    let c = match route {
        IncrementRoute::MarginalRows => Candidate::measure(a, other.clone(), chosen),
        _ => Candidate::measure(a, chosen, other.clone()),
    };
    Some((route, c))
}

/// The marginal step on its own: `None` when both marginal conditions hold at level `zeta`.
pub fn marginal_increment(a: &GridSet, bx: &GridBox, zeta: f64, profile: ProfileName) -> Result<Option<IncrementResult>> {
    let prof = marginal_profile(a, bx)?;
    let consts = IncrementConstants::rectangle(profile, zeta.clamp(f64::MIN_POSITIVE, 0.5), bx.width(), bx.height())?;
    let search = Search { a, delta: prof.delta.clone(), consts: &consts };
    let zeta_q = zn::from_f64(zeta)?;
    Ok(marginal_candidate(a, bx, &prof, &zeta_q).map(|(route, c)| {
        let side = bx.width().min(bx.height()) as f64;
        let gain = IncrementConstants::marginal_gain(zeta);
        search.finish(IncrementKind::Increment, route, c, gain, gain * side, None)
    }))
}

/// Candidate boxes from the level sets of one eigenvector of the Gram matrix.
fn level_set_candidates(
    a: &GridSet,
    bx: &GridBox,
    adj: &[Vec<bool>],
    report: &SpectralReport,
    which: usize,
    consts: &IncrementConstants,
) -> Result<Vec<Candidate>> {
    let n = report.n;
    let Some(&mu) = report.mu.get(which) else { return Ok(Vec::new()) };
    let n2 = (n * n) as f64;
    let level = (mu / n2 * (1.0 - 1e-9)).min(1.0 - 1e-9);
    if level <= 0.0 {
        return Ok(Vec::new());
    }
    let v: Vec<Complex64> = report.vectors[which].iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let partition = level_set_partition(&v, level, consts.level_step, n as f64, mu)?;
    let xs = bx.xs().members();
    let ys = bx.ys().members();
    let total = a.len();
    let area = bx.size();
    let mut out = Vec::new();
    for class in &partition.classes {
        if (class.len() as f64) < consts.bad_class_floor {
            continue;
        }
        // J+ holds the columns where sum over the class of (chi - delta) is nonnegative.
        let rows: Vec<usize> = (0..ys.len())
            .filter(|&j| {
                let hits = class.iter().filter(|&&i| adj[i][j]).count();
                hits * area >= total * class.len()
            })
            .map(|j| ys[j])
            .collect();
        if rows.is_empty() {
            continue;
        }
        let g1: Vec<usize> = class.iter().map(|&i| xs[i]).collect();
        out.push(Candidate::from_members(a, &g1, &rows));
    }
    Ok(out)
}

fn spectral_candidates(
    a: &GridSet,
    bx: &GridBox,
    consts: &IncrementConstants,
    delta: &Rational,
) -> Result<(IncrementRoute, Vec<Candidate>)> {
    let adj = adjacency(a, bx)?;
    let report = spectrum_of(&adj, a.len());
    let n = report.n as f64;
    let near_constant = report.deviation <= consts.alpha * consts.alpha * n / 36.0;
    let (first, second) = if near_constant && report.n > 1 { (1, 0) } else { (0, 1) };
    let route_of = |w: usize| if w == 1 { IncrementRoute::SpectralSecond } else { IncrementRoute::SpectralFirst };
    let primary = level_set_candidates(a, bx, &adj, &report, first, consts)?;
    if primary.iter().any(|c| &c.density() > delta) {
        return Ok((route_of(first), primary));
    }
    let secondary = level_set_candidates(a, bx, &adj, &report, second, consts)?;
    Ok((route_of(second), secondary))
}

/// `sum_{m,p} (sum_k g(k,m) g(k,p))^2` with `g = chi_A - delta` on `xs x ys`.
fn shifted_fourth_power(a: &GridSet, xs: &[usize], ys: &[usize], delta: f64) -> f64 {
    let rows: Vec<Vec<f64>> =
        ys.iter().map(|&m| xs.iter().map(|&k| if a.contains(k, m) { 1.0 - delta } else { -delta }).collect()).collect();
    let mut acc = 0.0;
    for r in &rows {
        for s in &rows {
            let dot: f64 = r.iter().zip(s).map(|(x, y)| x * y).sum();
            acc += dot * dot;
        }
    }
    acc
}

/// Splits the longer side into consecutive chunks whose lengths lie between half and all of the shorter side.
fn chunks(long: &[usize], short: usize) -> Vec<Vec<usize>> {
    if long.len() <= 2 * short {
        return vec![long.to_vec()];
    }
    let mut out: Vec<Vec<usize>> = long.chunks(short).map(<[usize]>::to_vec).collect();
    let rem = long.len() % short;
    if rem != 0 && 2 * rem < short {
        let tail = out.pop().expect("remainder chunk");
        let last = out.pop().expect("full chunk");
        let merged: Vec<usize> = last.into_iter().chain(tail).collect();
        let mid = merged.len() / 2;
        out.push(merged[..mid].to_vec());
        out.push(merged[mid..].to_vec());
    }
    out
}

type Piece = (Vec<usize>, Vec<usize>);

/// One carving step on a piece whose sides differ by at most a factor of two.
fn carve_once(piece: Piece) -> (Vec<Piece>, Vec<Piece>) {
    let (xs, ys) = piece;
    let x_long = xs.len() >= ys.len();
    let (long, short) = if x_long { (xs, ys) } else { (ys, xs) };
    let orient = |l: Vec<usize>, s: Vec<usize>| if x_long { (l, s) } else { (s, l) };
    let (p, q) = (long.len(), short.len());
    if p == q {
        return (vec![orient(long, short)], Vec::new());
    }
    if q < 2 {
        return (Vec::new(), vec![orient(long, short)]);
    }
    if 2 * p >= 3 * q {
        let square = orient(long[..q].to_vec(), short.clone());
        let rest = orient(long[q..].to_vec(), short);
        return (vec![square], vec![rest]);
    }
    let h = q / 2;
    let (q1, q2) = short.split_at(h);
    let (p1, p2) = long.split_at(h);
    let mut squares = vec![orient(p1.to_vec(), q1.to_vec())];
    let mut rects = vec![orient(p2.to_vec(), short.clone())];
    if q2.len() == h {
        squares.push(orient(p1.to_vec(), q2.to_vec()));
    } else {
        rects.push(orient(p1.to_vec(), q2.to_vec()));
    }
    (squares, rects)
}

fn carve_candidates(a: &GridSet, bx: &GridBox, consts: &IncrementConstants, delta: &Rational) -> Result<Vec<Candidate>> {
    let d = zn::to_f64(delta);
    let alpha = consts.alpha;
    let xs = bx.xs().members().to_vec();
    let ys = bx.ys().members().to_vec();
    let x_long = xs.len() >= ys.len();
    let (long, short) = if x_long { (&xs, &ys) } else { (&ys, &xs) };
    let orient = |l: &[usize]| if x_long { (l.to_vec(), short.clone()) } else { (short.clone(), l.to_vec()) };
    let mut candidates = Vec::new();

    let parts = chunks(long, short.len());
    let mut chosen = orient(long);
    if parts.len() > 1 {
        let norms: Vec<f64> = parts
            .iter()
            .map(|z| {
                let (px, py) = orient(z);
                shifted_fourth_power(a, &px, &py, d)
            })
            .collect();
        let mut calm = Vec::new();
        let mut best = 0;
        for (i, z) in parts.iter().enumerate() {
            let scale = (z.len() * short.len()) as f64;
            if norms[i] < alpha * scale * scale / 16.0 {
                calm.extend_from_slice(z);
            }
            let normalized = norms[i] / (scale * scale);
            if normalized > norms[best] / ((parts[best].len() * short.len()) as f64).powi(2) {
                best = i;
            }
            let (px, py) = orient(z);
            candidates.push(Candidate::from_members(a, &px, &py));
        }
        if !calm.is_empty() && calm.len() < long.len() {
            calm.sort_unstable();
            let (px, py) = orient(&calm);
            candidates.push(Candidate::from_members(a, &px, &py));
        }
        chosen = orient(&parts[best]);
    }

    let rounds = (2.0 * (1.0 / alpha).log2()).ceil().clamp(1.0, 32.0) as usize;
    let mut squares: Vec<Piece> = Vec::new();
    let mut rects = vec![chosen];
    for _ in 0..rounds {
        if rects.is_empty() {
            break;
        }
        let mut next = Vec::new();
        for r in rects {
            let (s, rest) = carve_once(r);
            let stuck = s.is_empty() && rest.len() == 1;
            squares.extend(s);
            if stuck {
                candidates.push(Candidate::from_members(a, &rest[0].0, &rest[0].1));
            } else {
                next.extend(rest);
            }
        }
        rects = next;
    }
    for (px, py) in &rects {
        candidates.push(Candidate::from_members(a, px, py));
    }
    let mut focus: Option<(f64, usize)> = None;
    for (i, (px, py)) in squares.iter().enumerate() {
        candidates.push(Candidate::from_members(a, px, py));
        let norm = shifted_fourth_power(a, px, py, d);
        if focus.is_none_or(|(b, _)| norm > b) {
            focus = Some((norm, i));
        }
    }
    if let Some((_, i)) = focus {
        let (px, py) = &squares[i];
        let n = a.modulus();
        let sq = GridBox::new(LineSet::new(n, px.iter().copied())?, LineSet::new(n, py.iter().copied())?)?;
        let inner = a.intersect_box(&sq);
        let sub = IncrementConstants::square(consts.profile, alpha, px.len())?;
        let found = find_density_increment_with(&inner, &sq, &sub)?;
        if found.kind == IncrementKind::Increment {
            candidates.push(Candidate::measure(a, found.g1, found.g2));
        }
    }
    Ok(candidates)
}

/// First index of largest density.
fn densest(dens: &BTreeMap<usize, Rational>) -> Option<(usize, &Rational)> {
    dens.iter().fold(None, |acc, (&i, d)| match acc {
        Some((_, b)) if b >= d => acc,
        _ => Some((i, d)),
    })
}

fn fallback_candidate(a: &GridSet, bx: &GridBox, profile: &MarginalProfile, delta: &Rational) -> Candidate {
    let n = a.modulus();
    if let Some((m, d)) = densest(&profile.row_density) {
        if d > delta {
            return Candidate::measure(a, bx.xs().clone(), LineSet::new(n, [m]).expect("residue"));
        }
    }
    if let Some((k, d)) = densest(&profile.col_density) {
        if d > delta {
            return Candidate::measure(a, LineSet::new(n, [k]).expect("residue"), bx.ys().clone());
        }
    }
    let (k, _) = a.iter().next().expect("nonempty set");
    let support: Vec<usize> = a.iter().filter(|&(x, _)| x == k).map(|(_, m)| m).collect();
    Candidate::measure(a, LineSet::new(n, [k]).expect("residue"), LineSet::new(n, support).expect("residues"))
}

/// Finds `G1 x G2` inside `bx` on which `A` is strictly denser, or reports `A` uniform at level `alpha`.
pub fn find_density_increment(a: &GridSet, bx: &GridBox, alpha: f64, profile: ProfileName) -> Result<IncrementResult> {
    let consts = IncrementConstants::for_box(profile, alpha, bx)?;
    find_density_increment_with(a, bx, &consts)
}

pub fn find_density_increment_with(a: &GridSet, bx: &GridBox, consts: &IncrementConstants) -> Result<IncrementResult> {
    let prof = marginal_profile(a, bx)?;
    let delta = prof.delta.clone();
    let search = Search { a, delta: delta.clone(), consts };
    if delta.is_zero() || delta.is_one() {
        return Ok(search.uniform(bx, IncrementRoute::Trivial, None));
    }
    let zeta = zn::from_f64(consts.marginal_alpha)?;
    if let Some((route, c)) = marginal_candidate(a, bx, &prof, &zeta) {
        let gain = IncrementConstants::marginal_gain(consts.marginal_alpha);
        let side = bx.width().min(bx.height()) as f64;
        return Ok(search.finish(IncrementKind::Increment, route, c, gain, gain * side, None));
    }
    let exact = box_uniformity_exact(a, bx)?;
    let measured = Some(zn::to_f64(&exact.alpha));
    if exact.alpha <= zn::from_f64(consts.alpha)? {
        return Ok(search.uniform(bx, IncrementRoute::MeasuredUniform, measured));
    }
    let (route, candidates) = if bx.width() == bx.height() {
        spectral_candidates(a, bx, consts, &delta)?
    } else {
        (IncrementRoute::Carve, carve_candidates(a, bx, consts, &delta)?)
    };
    let (route, chosen) = match best_candidate(candidates, &delta, consts.size_floor) {
        Some(c) => (route, c),
        None => (IncrementRoute::Fallback, fallback_candidate(a, bx, &prof, &delta)),
    };
    Ok(search.finish(IncrementKind::Increment, route, chosen, consts.gain_floor, consts.size_floor, measured))
}

//! Corners `(k, m), (k + d, m), (k, m + d)`, the trilinear corner sum, and
//! corner-free sets built from progression-free sets of integers.

use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uniformity::{BASIS_E1, BASIS_E2};
use crate::zn::{self, box_counts, ratio, ComplexField, GridBox, GridSet, LineSet, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CornerMode {
    /// Integer grid `[0, N)^2`, no wraparound, `d` in `1..N`.
    Grid,
    /// Arithmetic mod `N`, `d` in `Z_N \ {0}`.
    Cyclic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CornerWitness {
    pub k: usize,
    pub m: usize,
    pub d: usize,
}

impl CornerWitness {
    pub fn points(&self, modulus: usize, mode: CornerMode) -> [(usize, usize); 3] {
        let (k, m, d) = (self.k, self.m, self.d);
        match mode {
            CornerMode::Grid => [(k, m), (k + d, m), (k, m + d)],
            CornerMode::Cyclic => [(k, m), ((k + d) % modulus, m), (k, (m + d) % modulus)],
        }
    }

    /// True when `d > 0`, all three points lie in the domain, and all are members.
    pub fn verify(&self, a: &GridSet, mode: CornerMode) -> bool {
        let n = a.modulus();
        if self.d == 0 || self.d >= n {
            return false;
        }
        self.points(n, mode).iter().all(|&(k, m)| k < n && m < n && a.contains(k, m))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CornerCount {
    pub count: u64,
    /// Lexicographically smallest `(k, m, d)`.
    pub witness: Option<CornerWitness>,
}

fn corners_with_difference(a: &GridSet, mode: CornerMode, d: usize) -> (u64, Option<CornerWitness>) {
    let n = a.modulus();
    let mut count = 0;
    let mut first = None;
    for (k, m) in a.iter() {
        let w = CornerWitness { k, m, d };
        let hit = match mode {
            CornerMode::Grid => k + d < n && m + d < n && a.contains(k + d, m) && a.contains(k, m + d),
            CornerMode::Cyclic => a.contains((k + d) % n, m) && a.contains(k, (m + d) % n),
        };
        if hit {
            count += 1;
            first.get_or_insert(w);
        }
    }
    (count, first)
}

pub fn count_corners(a: &GridSet, mode: CornerMode) -> CornerCount {
    let n = a.modulus();
    let per_d: Vec<(u64, Option<CornerWitness>)> =
        (1..n).into_par_iter().map(|d| corners_with_difference(a, mode, d)).collect();
    CornerCount {
        count: per_d.iter().map(|p| p.0).sum(),
        witness: per_d.iter().filter_map(|p| p.1).min(),
    }
}

/// Reference enumeration running over points first and differences second.
pub fn count_corners_pointwise(a: &GridSet, mode: CornerMode) -> u64 {
    let n = a.modulus();
    let mut count = 0;
    for k in 0..n {
        for m in 0..n {
            if !a.contains(k, m) {
                continue;
            }
            for d in 1..n {
                let w = CornerWitness { k, m, d };
                if w.points(n, mode).iter().all(|&(x, y)| x < n && y < n && a.contains(x, y)) {
                    count += 1;
                }
            }
        }
    }
    count
}

fn step(n: usize, s: (usize, usize), v: (i64, i64), t: usize) -> (usize, usize) {
    let t = t as i64;
    let n_i = n as i64;
    (((s.0 as i64 + t * v.0).rem_euclid(n_i)) as usize, ((s.1 as i64 + t * v.1).rem_euclid(n_i)) as usize)
}

/// `sum_{s, r} h(s) g(s + r (e1 + e2)) f(s + r e2)`.
///
/// With `e2 = (0, -1)` the three points are `(k, m)`, `(k + r, m - r)` and
/// `(k, m - r)`: a corner based at `(k, m - r)` with difference `r`.
pub fn trilinear_corner_sum(h: &ComplexField, g: &ComplexField, f: &ComplexField) -> Result<Complex64> {
    h.same_shape(g)?;
    h.same_shape(f)?;
    if h.arity() != zn::Arity::Two {
        return Err(Error::ArityMismatch);
    }
    let n = h.modulus();
    let diag = (BASIS_E1.0 + BASIS_E2.0, BASIS_E1.1 + BASIS_E2.1);
    let mut total = Complex64::zero();
    for k in 0..n {
        for m in 0..n {
            let hv = h.at2(k, m);
            if hv.is_zero() {
                continue;
            }
            for r in 0..n {
                let a = step(n, (k, m), diag, r);
                let b = step(n, (k, m), BASIS_E2, r);
                total += hv * g.at2(a.0, a.1) * f.at2(b.0, b.1);
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrilinearReport {
    /// Triples `s in Q1`, `s + r e in Q2`, `s + r e2 in A`.
    pub total: u64,
    /// `delta * #{(s, r) : s in Q1, s + r e in Q2}`.
    pub main: f64,
    /// Weighted row deviations `delta_row - delta` at the third point.
    pub marginal: f64,
    /// The balanced box function of `A` summed at the third point.
    pub uniform: f64,
}

impl TrilinearReport {
    pub fn residual(&self) -> f64 {
        self.main + self.marginal + self.uniform - self.total as f64
    }
}

/// Splits the trilinear count of `Q1, Q2, A` into density, row-deviation and balanced parts.
pub fn decompose(q1: &GridSet, q2: &GridSet, a: &GridSet, bx: &GridBox) -> Result<TrilinearReport> {
    for s in [q1, q2] {
        if s.modulus() != a.modulus() {
            return Err(Error::ModulusMismatch { left: s.modulus(), right: a.modulus() });
        }
        if let Some((k, m)) = s.iter().find(|&(k, m)| !a.contains(k, m)) {
            return Err(Error::InvalidParameter(format!("({k}, {m}) is in a sub-family but not in A")));
        }
    }
    let (rows, _) = box_counts(a, bx)?;
    let balanced = zn::balanced_box_function(a, bx)?;
    let n = a.modulus();
    let w = bx.width();
    let diag = (BASIS_E1.0 + BASIS_E2.0, BASIS_E1.1 + BASIS_E2.1);
    let mut total = 0u64;
    let mut pairs = 0usize;
    let mut third_rows = vec![0usize; n];
    let mut uniform = 0.0;
    for (k, m) in q1.iter() {
        for r in 0..n {
            let p2 = step(n, (k, m), diag, r);
            if !q2.contains(p2.0, p2.1) {
                continue;
            }
            let p3 = step(n, (k, m), BASIS_E2, r);
            pairs += 1;
            third_rows[p3.1] += 1;
            uniform += balanced.at2(p3.0, p3.1).re;
            if a.contains(p3.0, p3.1) {
                total += 1;
            }
        }
    }
    let delta = ratio(a.len(), bx.size());
    let main = &delta * ratio(pairs, 1);
    let mut marginal = Rational::zero();
    for (j, row) in bx.ys().iter().enumerate() {
        if third_rows[row] > 0 {
            marginal += (ratio(rows[j], w) - &delta) * ratio(third_rows[row], 1);
        }
    }
    Ok(TrilinearReport { total, main: zn::to_f64(&main), marginal: zn::to_f64(&marginal), uniform })
}

/// A progression-free subset of `{1..K}`, stored in a [`LineSet`] of modulus `K`
/// whose member `i` stands for the integer `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BehrendSet {
    pub set: LineSet,
    /// Digits are drawn from `0..digit_bound` in base `2 * digit_bound - 1`.
    pub digit_bound: usize,
    pub dimension: usize,
    /// Squared radius of the chosen sphere; `None` when every digit vector is kept.
    pub radius_sq: Option<usize>,
    /// `log |A| / log K`.
    pub achieved_exponent: f64,
    /// `1 - log 2 / log log K`, where defined.
    pub target_exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehrendGrid {
    pub digit_bounds: std::ops::RangeInclusive<usize>,
    pub dimensions: std::ops::RangeInclusive<usize>,
}

impl Default for BehrendGrid {
    fn default() -> Self {
        Self { digit_bounds: 2..=12, dimensions: 2..=8 }
    }
}

fn behrend_candidate(k: usize, d: usize, n: usize) -> (Vec<usize>, Option<usize>) {
    let base = 2 * d - 1;
    let limit = base.checked_pow(n as u32).map_or(k, |p| p.min(k));
    let mut by_radius: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    let mut all = Vec::new();
    'outer: for x in 0..limit {
        let mut y = x;
        let mut r = 0;
        for _ in 0..n {
            let digit = y % base;
            if digit >= d {
                continue 'outer;
            }
            r += digit * digit;
            y /= base;
        }
        all.push(x);
        by_radius.entry(r).or_default().push(x);
    }
    if d == 2 {
        // with digits in {0, 1}, a + c = 2b forces a = b = c digitwise
        return (all, None);
    }
    let mut best: Option<(usize, Vec<usize>)> = None;
    for (r, xs) in by_radius {
        if best.as_ref().is_none_or(|(_, b)| xs.len() > b.len()) {
            best = Some((r, xs));
        }
    }
    best.map_or((Vec::new(), None), |(r, xs)| (xs, Some(r)))
}

pub fn behrend_construct(k: usize) -> Result<BehrendSet> {
    behrend_construct_with(k, &BehrendGrid::default())
}

/// Scans the digit bound and dimension grid and keeps the largest sphere slice.
///
/// Digits below `d` in base `2d - 1` add without carries, so `x + z = 2y`
/// holds digitwise; on a sphere strict convexity then forces `x = y = z`.
pub fn behrend_construct_with(k: usize, grid: &BehrendGrid) -> Result<BehrendSet> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    let mut best: Option<(Vec<usize>, usize, usize, Option<usize>)> = None;
    for d in grid.digit_bounds.clone() {
        if d < 2 {
            continue;
        }
        let base = 2 * d - 1;
        for n in grid.dimensions.clone() {
            // a leading digit that is always zero repeats the previous dimension
            if n > *grid.dimensions.start() && base.checked_pow(n as u32 - 1).is_none_or(|p| p >= k) {
                break;
            }
            let (xs, r) = behrend_candidate(k, d, n);
            if best.as_ref().is_none_or(|b| xs.len() > b.0.len()) {
                best = Some((xs, d, n, r));
            }
        }
    }
    let (xs, d, n, r) = best.unwrap_or_else(|| (vec![0], 2, 1, None));
    let set = LineSet::new(k, xs)?;
    let kf = k as f64;
    let achieved = if k > 1 { (set.len() as f64).ln() / kf.ln() } else { 1.0 };
    let target = (kf.ln().ln() > 0.0).then(|| 1.0 - std::f64::consts::LN_2 / kf.ln().ln());
    Ok(BehrendSet { set, digit_bound: d, dimension: n, radius_sq: r, achieved_exponent: achieved, target_exponent: target })
}

/// True when no `x < y < z` in the set satisfy `x + z = 2y` as integers.
pub fn is_three_ap_free(set: &LineSet) -> bool {
    first_three_ap(set).is_none()
}

pub fn first_three_ap(set: &LineSet) -> Option<(usize, usize, usize)> {
    let xs = set.members();
    for (i, &x) in xs.iter().enumerate() {
        for &y in &xs[i + 1..] {
            let z = 2 * y - x;
            if z < set.modulus() && set.contains(z) {
                return Some((x, y, z));
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedRule {
    /// Row `i` carries the set translated by `i`.
    Translation,
    /// Lattice points `k e1 + m e2` with `k = a - m`, read in grid coordinates.
    LatticeDifference,
}

/// Places a progression-free `A1` in `{1..K}` on `K` parallel diagonals of the
/// `N x N` grid, `N = 3K`; a corner would force a progression in `A1`.
pub fn embed_corner_free(a1: &LineSet, n: usize, rule: EmbedRule) -> Result<GridSet> {
    if n == 0 || !n.is_multiple_of(3) {
        return Err(Error::InvalidParameter(format!("N = {n} is not a positive multiple of 3")));
    }
    let k = n / 3;
    if a1.modulus() != k {
        return Err(Error::ModulusMismatch { left: a1.modulus(), right: k });
    }
    if let Some((x, y, z)) = first_three_ap(a1) {
        return Err(Error::InvalidParameter(format!("input contains the progression {}, {}, {}", x + 1, y + 1, z + 1)));
    }
    let mut pts = Vec::with_capacity(a1.len() * k);
    for a in a1.iter() {
        for i in 0..k {
            pts.push(match rule {
                EmbedRule::Translation => (a + k + i, i),
                // lattice row m sits at grid row K - 1 - m, since e2 points down
                EmbedRule::LatticeDifference => (a + 2 * k - 1 - i, k - 1 - i),
            });
        }
    }
    GridSet::new(n, pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zn::Arity;
    use proptest::prelude::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn greedy_ap_free(rng: &mut ChaCha8Rng, k: usize) -> LineSet {
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(rng);
        let mut chosen = LineSet::empty(k);
        for x in order {
            let next = LineSet::new(k, chosen.iter().chain([x])).unwrap();
            if is_three_ap_free(&next) {
                chosen = next;
            }
        }
        chosen
    }

    // Oracle: every triple x < y < z checked against x + z = 2y.
    fn ap_free_oracle(set: &LineSet) -> bool {
        let xs = set.members();
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                for l in j + 1..xs.len() {
                    if xs[i] + xs[l] == 2 * xs[j] {
                        return false;
                    }
                }
            }
        }
        true
    }

    #[test]
    fn small_grid_corner() {
        // 1-based {(1,1),(2,1),(1,2)} in a 2 x 2 grid
        let a = GridSet::new(2, [(0, 0), (1, 0), (0, 1)]).unwrap();
        let c = count_corners(&a, CornerMode::Grid);
        assert_eq!(c.count, 1);
        assert_eq!(c.witness, Some(CornerWitness { k: 0, m: 0, d: 1 }));
        assert!(c.witness.unwrap().verify(&a, CornerMode::Grid));
    }

    #[test]
    fn empty_and_diagonal_have_no_corners() {
        assert_eq!(count_corners(&GridSet::empty(5), CornerMode::Grid).count, 0);
        for n in [1, 4, 9] {
            let diag = GridSet::new(n, (0..n).map(|i| (i, i))).unwrap();
            let c = count_corners(&diag, CornerMode::Grid);
            assert_eq!(c.count, 0);
            assert_eq!(c.witness, None);
        }
    }

    #[test]
    fn cyclic_mode_sees_wraparound() {
        let a = GridSet::new(3, [(2, 2), (0, 2), (2, 0)]).unwrap();
        assert_eq!(count_corners(&a, CornerMode::Grid).count, 0);
        let c = count_corners(&a, CornerMode::Cyclic);
        assert_eq!(c.count, 1);
        assert_eq!(c.witness, Some(CornerWitness { k: 2, m: 2, d: 1 }));
    }

    #[test]
    fn full_grid_corner_counts() {
        let n = 7;
        let full = GridSet::full(n);
        // sum over d of (n - d)^2
        let expected: u64 = (1..n as u64).map(|d| (n as u64 - d).pow(2)).sum();
        assert_eq!(count_corners(&full, CornerMode::Grid).count, expected);
        assert_eq!(count_corners(&full, CornerMode::Cyclic).count, (n * n * (n - 1)) as u64);
    }

    #[test]
    fn trilinear_full_and_zero() {
        let n = 5;
        let one = ComplexField::from_fn_2d(n, |_, _| Complex64::new(1.0, 0.0));
        let zero = ComplexField::zeros(Arity::Two, n);
        assert!((trilinear_corner_sum(&one, &one, &one).unwrap().re - 125.0).abs() < 1e-12);
        assert_eq!(trilinear_corner_sum(&one, &zero, &one).unwrap(), Complex64::zero());
    }

    #[test]
    fn trilinear_of_indicator_counts_cyclic_corners() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let a = GridSet::from_predicate(7, |_, _| rng.gen_bool(0.4)).unwrap();
            let chi = ComplexField::indicator_2d(&a);
            let s = trilinear_corner_sum(&chi, &chi, &chi).unwrap().re;
            let corners = count_corners(&a, CornerMode::Cyclic).count;
            assert_eq!(s.round() as u64, a.len() as u64 + corners);
        }
    }

    #[test]
    fn decomposition_sums_to_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 8;
        for _ in 0..20 {
            let bx = GridBox::new(
                LineSet::new(n, (0..n).filter(|_| rng.gen_bool(0.7))).unwrap(),
                LineSet::new(n, (0..n).filter(|_| rng.gen_bool(0.7))).unwrap(),
            )
            .unwrap();
            if bx.size() == 0 {
                continue;
            }
            let a = GridSet::from_predicate(n, |_, _| rng.gen_bool(0.6)).unwrap().intersect_box(&bx);
            let q1 = GridSet::new(n, a.iter().filter(|_| rng.gen_bool(0.5))).unwrap();
            let q2 = GridSet::new(n, a.iter().filter(|_| rng.gen_bool(0.5))).unwrap();
            let rep = decompose(&q1, &q2, &a, &bx).unwrap();
            // oracle: direct triple loop with explicit coordinates
            let mut total = 0;
            for (k, m) in q1.iter() {
                for r in 0..n {
                    if q2.contains((k + r) % n, (m + n - r) % n) && a.contains(k, (m + n - r) % n) {
                        total += 1;
                    }
                }
            }
            assert_eq!(rep.total, total);
            assert!(rep.residual().abs() <= 1e-8 * (rep.total as f64).max(1.0));
        }
    }

    #[test]
    fn behrend_small_cases() {
        let two = behrend_construct(2).unwrap();
        assert_eq!(two.set.members(), &[0, 1]);
        let nine = behrend_construct(9).unwrap();
        assert!(nine.set.len() >= 4);
        assert!(ap_free_oracle(&nine.set));
        assert_eq!(behrend_construct(1).unwrap().set.members(), &[0]);
        assert!(behrend_construct(0).is_err());
    }

    #[test]
    fn behrend_is_progression_free_and_deterministic() {
        for k in [3, 10, 27, 50, 100, 243, 500, 1000] {
            let b = behrend_construct(k).unwrap();
            assert!(ap_free_oracle(&b.set), "K = {k}");
            assert_eq!(b, behrend_construct(k).unwrap());
        }
    }

    #[test]
    fn behrend_large_k_passes_checker() {
        let b = behrend_construct(10_000).unwrap();
        assert!(is_three_ap_free(&b.set));
        assert!(b.set.len() > 100);
    }

    #[test]
    fn embedding_examples() {
        let single = embed_corner_free(&LineSet::new(1, [0]).unwrap(), 3, EmbedRule::Translation).unwrap();
        assert_eq!(single.points(), vec![(1, 0)]);
        let pair = embed_corner_free(&LineSet::new(2, [0, 1]).unwrap(), 6, EmbedRule::Translation).unwrap();
        assert_eq!(pair.len(), 4);
        assert_eq!(count_corners_pointwise(&pair, CornerMode::Grid), 0);
        assert!(embed_corner_free(&LineSet::new(2, [0, 1]).unwrap(), 7, EmbedRule::Translation).is_err());
        assert!(embed_corner_free(&LineSet::new(3, [0, 1, 2]).unwrap(), 9, EmbedRule::Translation).is_err());
    }

    #[test]
    fn embedding_rules_agree_and_are_corner_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let k = rng.gen_range(1..=30);
            let a1 = greedy_ap_free(&mut rng, k);
            let t = embed_corner_free(&a1, 3 * k, EmbedRule::Translation).unwrap();
            let l = embed_corner_free(&a1, 3 * k, EmbedRule::LatticeDifference).unwrap();
            assert_eq!(t, l);
            assert_eq!(t.len(), a1.len() * k);
            assert_eq!(count_corners(&t, CornerMode::Grid).count, 0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn enumerations_agree(seed in any::<u64>(), n in 1usize..10, p in 0.1f64..0.9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = GridSet::from_predicate(n, |_, _| rng.gen_bool(p)).unwrap();
            for mode in [CornerMode::Grid, CornerMode::Cyclic] {
                let c = count_corners(&a, mode);
                prop_assert_eq!(c.count, count_corners_pointwise(&a, mode));
                if let Some(w) = c.witness {
                    prop_assert!(w.verify(&a, mode));
                } else {
                    prop_assert_eq!(c.count, 0);
                }
            }
        }

        #[test]
        fn checker_matches_oracle(bits in proptest::collection::vec(any::<bool>(), 1..40)) {
            let set = LineSet::new(bits.len(), bits.iter().enumerate().filter(|p| *p.1).map(|p| p.0)).unwrap();
            prop_assert_eq!(is_three_ap_free(&set), ap_free_oracle(&set));
        }
    }
}

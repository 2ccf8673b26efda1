//! Randomized self-check suite.
//!
//! Each check draws its inputs from a ChaCha stream selected by the seed and the
//! check's position, so one seed fixes every report byte for byte.

use std::ops::Range;

use num_complex::Complex64;
use num_traits::{Signed, Zero};
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corners::{
    behrend_construct, count_corners, count_corners_pointwise, decompose, embed_corner_free, is_three_ap_free,
    trilinear_corner_sum, CornerMode, EmbedRule,
};
use crate::driver::{corner_hunt, DEFAULT_MAX_STEPS};
use crate::fourier::{self, cross_correlation, CorrelationMethod};
use crate::graph::{
    density_split, find_density_increment, gram_spectrum, level_set_partition, spectral_uniformity_check,
    IncrementKind, SpectralCheckParams,
};
use crate::partition::{
    ap_partition, energy_increment_run, energy_of_family, right_square_partition, saturation_bound_check, PowerLaw,
    RightSquare,
};
use crate::profile::{ConstantsProfile, ProfileName};
use crate::tolerance;
use crate::uniformity::{
    alpha_uniformity_1d, alpha_uniformity_box, box_inner_product, box_norm, count_cubes, cube_bounds_report,
    progression_discrepancy_with_alpha, set_alpha_2d, CubeMethod,
};
use crate::zn::{
    self, balanced_box_function, marginal_profile, marginal_uniformity_check, ratio, Arity, ComplexField, GridBox,
    GridSet, LineSet, MarginalScale, Rational,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Every check, in report order.
pub const CHECKS: &[&str] = &[
    "marginal-sums",
    "balanced-row-sums",
    "marginal-monotone",
    "parseval",
    "inner-product",
    "correlation-energy",
    "inverse-round-trip",
    "fourier-fourth-moment",
    "max-coefficient-bound",
    "uniformity-from-max-coefficient",
    "correlation-with-uniform",
    "progression-discrepancy",
    "cube-lower-bound",
    "cube-count-methods",
    "box-cauchy-schwarz",
    "box-triangle",
    "box-norm-duality",
    "row-deviation-box-norm",
    "cube-upper-bound",
    "corner-enumerations",
    "embedding-corner-free",
    "trilinear-decomposition",
    "trilinear-bound",
    "dense-uniform-corner",
    "matrix-vector-bound",
    "spectral-trace",
    "spectral-trace-of-square",
    "leading-eigenvalue-lower",
    "leading-eigenvalue-upper",
    "spectral-forward",
    "spectral-converse",
    "level-sets",
    "density-split",
    "increment-soundness",
    "progression-partition",
    "right-square-partition",
    "energy-decomposition",
    "energy-increases",
    "energy-accounting",
    "energy-bounded",
    "holder-step",
    "box-norm-saturation",
    "hunt-witness",
    "hunt-monotone",
    "hunt-replay",
];

/// One report line.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckLine {
    #[serde(rename = "schema_version")]
    pub schema_version: u32,
    pub lemma: String,
    pub trials: usize,
    pub hypothesis_satisfied: usize,
    pub conclusion_held: usize,
    /// Smallest slack over trials whose hypothesis held; negative means a failure.
    pub worst_margin: Option<f64>,
}

impl CheckLine {
    /// A conclusion failed while its hypothesis held.
    pub fn failed(&self) -> bool {
        self.conclusion_held < self.hypothesis_satisfied
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Outcome {
    hypothesis: bool,
    held: bool,
    margin: f64,
}

impl Outcome {
    fn vacuous() -> Self {
        Outcome { hypothesis: false, held: false, margin: 0.0 }
    }

    fn exact(held: bool) -> Self {
        Outcome { hypothesis: true, held, margin: if held { 0.0 } else { -1.0 } }
    }

    /// `lhs <= rhs` up to the shared inequality slack.
    fn at_most(lhs: f64, rhs: f64) -> Self {
        let scale = rhs.abs().max(lhs.abs()).max(1.0);
        let slack = tolerance::INEQUALITY * (1.0 + rhs.abs());
        Outcome { hypothesis: true, held: tolerance::at_most(lhs, rhs), margin: (rhs + slack - lhs) / scale }
    }

    /// `|a - b| <= tol * max(|a|, |b|, 1)`.
    fn close(a: f64, b: f64, tol: f64) -> Self {
        let scale = a.abs().max(b.abs()).max(1.0);
        let err = (a - b).abs() / scale;
        Outcome { hypothesis: true, held: err <= tol, margin: tol - err }
    }

    fn given(self, hypothesis: bool) -> Self {
        if hypothesis {
            self
        } else {
            Outcome::vacuous()
        }
    }

    fn and(self, other: Outcome) -> Self {
        Outcome {
            hypothesis: self.hypothesis && other.hypothesis,
            held: self.held && other.held,
            margin: self.margin.min(other.margin),
        }
    }
}

#[derive(Debug, Default)]
struct Tally {
    trials: usize,
    hypothesis: usize,
    held: usize,
    worst: Option<f64>,
}

impl Tally {
    fn add(&mut self, o: Outcome) {
        self.trials += 1;
        if o.hypothesis {
            self.hypothesis += 1;
            if o.held {
                self.held += 1;
            }
            self.worst = Some(self.worst.map_or(o.margin, |w| w.min(o.margin)));
        }
    }

    fn line(self, lemma: &str) -> CheckLine {
        CheckLine {
            schema_version: SCHEMA_VERSION,
            lemma: lemma.to_string(),
            trials: self.trials,
            hypothesis_satisfied: self.hypothesis,
            conclusion_held: self.held,
            worst_margin: self.worst,
        }
    }
}

/// Trial counts.
#[derive(Debug, Clone, Copy)]
struct Budget {
    quick: bool,
}

impl Budget {
    fn trials(&self, full: usize) -> usize {
        if self.quick {
            (full / 10).max(3)
        } else {
            full
        }
    }
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, density: Range<f64>) -> GridSet {
    let p = rng.gen_range(density);
    GridSet::from_predicate(n, |_, _| rng.gen_bool(p)).expect("residues")
}

fn random_line(rng: &mut ChaCha8Rng, n: usize, p: f64) -> LineSet {
    let mut members: Vec<usize> = (0..n).filter(|_| rng.gen_bool(p)).collect();
    if members.is_empty() {
        members.push(rng.gen_range(0..n));
    }
    LineSet::new(n, members).expect("residues")
}

fn random_box(rng: &mut ChaCha8Rng, n: usize) -> GridBox {
    GridBox::new(random_line(rng, n, 0.6), random_line(rng, n, 0.6)).expect("same modulus")
}

fn random_interval_box(rng: &mut ChaCha8Rng, n: usize) -> GridBox {
    let side = |rng: &mut ChaCha8Rng| LineSet::interval(n, rng.gen_range(0..n), rng.gen_range(1..=n)).expect("interval");
    let xs = side(rng);
    GridBox::new(xs, side(rng)).expect("same modulus")
}

fn set_in_box(rng: &mut ChaCha8Rng, bx: &GridBox, density: Range<f64>) -> GridSet {
    let p = rng.gen_range(density);
    GridSet::from_predicate(bx.modulus(), |k, m| bx.contains(k, m) && rng.gen_bool(p)).expect("residues")
}

fn disk_value(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(rng.gen_range(0.0..1.0f64).sqrt(), rng.gen_range(0.0..std::f64::consts::TAU))
}

fn disk_field(rng: &mut ChaCha8Rng, arity: Arity, n: usize) -> ComplexField {
    let values = (0..n.pow(arity.dims())).map(|_| disk_value(rng)).collect();
    ComplexField::new(arity, n, values).expect("shape")
}

fn box_field(rng: &mut ChaCha8Rng, bx: &GridBox) -> ComplexField {
    let n = bx.modulus();
    let values = (0..n * n)
        .map(|i| if bx.contains(i / n, i % n) { disk_value(rng) } else { Complex64::zero() })
        .collect();
    ComplexField::new(Arity::Two, n, values).expect("shape")
}

fn arity_for(i: usize) -> Arity {
    if i.is_multiple_of(2) {
        Arity::One
    } else {
        Arity::Two
    }
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, xs: &[T]) -> T {
    *xs.choose(rng).expect("nonempty choices")
}

fn sq_sum(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn scale_of(f: &ComplexField) -> f64 {
    (f.modulus() as f64).powi(f.arity().dims() as i32)
}

// zn

fn marginal_sums(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(200) {
        let n = rng.gen_range(2..14);
        let bx = random_box(rng, n);
        let a = set_in_box(rng, &bx, 0.0..1.0);
        let p = marginal_profile(&a, &bx).expect("box");
        let rows: Rational = p.row_density.values().sum();
        let cols: Rational = p.col_density.values().sum();
        let size = ratio(a.len(), 1);
        t.add(Outcome::exact(rows * ratio(p.width, 1) == size && cols * ratio(p.height, 1) == size));
    }
    t
}

fn balanced_row_sums(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(200) {
        let n = rng.gen_range(2..14);
        let bx = random_box(rng, n);
        let a = set_in_box(rng, &bx, 0.0..1.0);
        let p = marginal_profile(&a, &bx).expect("box");
        let f = balanced_box_function(&a, &bx).expect("box");
        let mut exact = true;
        let mut worst = 0.0f64;
        for m in bx.ys().iter() {
            let dm = &p.row_density[&m];
            let s: Rational = bx.xs().iter().map(|k| ratio(usize::from(a.contains(k, m)), 1) - dm).sum();
            exact &= s.is_zero();
            let fs: f64 = bx.xs().iter().map(|k| f.at2(k, m).re).sum();
            worst = worst.max(fs.abs());
        }
        t.add(Outcome::exact(exact).and(Outcome::close(worst, 0.0, 1e-9)));
    }
    t
}

fn marginal_monotone(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(200) {
        let n = rng.gen_range(2..14);
        let bx = random_box(rng, n);
        let a = set_in_box(rng, &bx, 0.0..1.0);
        let p = marginal_profile(&a, &bx).expect("box");
        let lo = zn::from_f64(rng.gen_range(0.0..1.0)).expect("finite");
        let hi = &lo + zn::from_f64(rng.gen_range(0.0..1.0)).expect("finite");
        let scale = if rng.gen_bool(0.5) { MarginalScale::Quadratic } else { MarginalScale::Linear };
        let (c1, c2) = (marginal_uniformity_check(&p, &lo, scale), marginal_uniformity_check(&p, &hi, scale));
        let ok = (!c1.rows_hold || c2.rows_hold) && (!c1.cols_hold || c2.cols_hold);
        t.add(Outcome::exact(ok).given(c1.rows_hold || c1.cols_hold));
    }
    t
}

// fourier

const FOURIER_MODULI: [usize; 4] = [8, 12, 16, 64];

fn fourier_modulus(rng: &mut ChaCha8Rng, arity: Arity) -> usize {
    match arity {
        Arity::One => pick(rng, &FOURIER_MODULI),
        Arity::Two => pick(rng, &FOURIER_MODULI[..3]),
    }
}

fn parseval(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for i in 0..2 * b.trials(200) {
        let arity = arity_for(i);
        let n = fourier_modulus(rng, arity);
        let f = disk_field(rng, arity, n);
        let lhs = scale_of(&f) * sq_sum(f.values());
        let rhs = fourier::dft(&f).energy();
        t.add(Outcome::close(lhs, rhs, tolerance::PARSEVAL));
    }
    t
}

fn inner_product(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for i in 0..2 * b.trials(200) {
        let arity = arity_for(i);
        let n = fourier_modulus(rng, arity);
        let (f, g) = (disk_field(rng, arity, n), disk_field(rng, arity, n));
        let lhs = f.inner(&g) * scale_of(&f);
        let (fh, gh) = (fourier::dft(&f), fourier::dft(&g));
        let rhs: Complex64 = fh.coeffs().iter().zip(gh.coeffs()).map(|(x, y)| x * y.conj()).sum();
        let scale = (lhs.norm().max(rhs.norm())).max(scale_of(&f));
        let err = (lhs - rhs).norm() / scale;
        t.add(Outcome { hypothesis: true, held: err <= tolerance::PARSEVAL, margin: tolerance::PARSEVAL - err });
    }
    t
}

fn correlation_energy(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for i in 0..2 * b.trials(200) {
        let arity = arity_for(i);
        let n = match arity {
            Arity::One => pick(rng, &FOURIER_MODULI),
            Arity::Two => pick(rng, &FOURIER_MODULI[..2]),
        };
        let (f, g) = (disk_field(rng, arity, n), disk_field(rng, arity, n));
        let cc = cross_correlation(&f, &g, CorrelationMethod::Direct).expect("shape");
        let lhs = scale_of(&f) * sq_sum(cc.values());
        let (fh, gh) = (fourier::dft(&f), fourier::dft(&g));
        let rhs: f64 = fh.coeffs().iter().zip(gh.coeffs()).map(|(x, y)| x.norm_sqr() * y.norm_sqr()).sum();
        t.add(Outcome::close(lhs, rhs, tolerance::PARSEVAL));
    }
    t
}

fn inverse_round_trip(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for i in 0..2 * b.trials(200) {
        let arity = arity_for(i);
        let n = fourier_modulus(rng, arity);
        let f = disk_field(rng, arity, n);
        let back = fourier::inverse(&fourier::dft(&f));
        let diff: Vec<Complex64> = f.values().iter().zip(back.values()).map(|(x, y)| x - y).collect();
        let err = (sq_sum(&diff) / sq_sum(f.values()).max(f64::MIN_POSITIVE)).sqrt();
        t.add(Outcome { hypothesis: true, held: err <= tolerance::ROUND_TRIP, margin: tolerance::ROUND_TRIP - err });
    }
    t
}

// uniformity

fn line_field(rng: &mut ChaCha8Rng) -> ComplexField {
    let n = rng.gen_range(2..40);
    disk_field(rng, Arity::One, n)
}

fn fourier_fourth_moment(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(200) {
        let f = line_field(rng);
        let n4 = (f.modulus() as f64).powi(4);
        let alpha = alpha_uniformity_1d(&f).expect("disk").minimal_alpha;
        let moment = fourier::dft(&f).fourth_moment();
        t.add(Outcome::close(moment, alpha * n4, tolerance::FUNCTIONAL_AGREEMENT).and(Outcome::at_most(moment, alpha * n4)));
    }
    t
}

fn max_coefficient_bound(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(200) {
        let f = line_field(rng);
        let n = f.modulus() as f64;
        let alpha = alpha_uniformity_1d(&f).expect("disk").minimal_alpha;
        let max = fourier::dft(&f).coeffs().iter().map(|z| z.norm()).fold(0.0, f64::max);
        let bound = alpha.powf(0.25) * n;
        let scale = bound.max(1.0);
        let err = (max - bound) / scale;
        t.add(Outcome { hypothesis: true, held: err <= 1e-6, margin: -err });
    }
    t
}

fn uniformity_from_max_coefficient(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(200) {
        let f = line_field(rng);
        let n = f.modulus() as f64;
        let level = fourier::dft(&f).coeffs().iter().map(|z| z.norm()).fold(0.0, f64::max) / n;
        let alpha = alpha_uniformity_1d(&f).expect("disk").minimal_alpha;
        t.add(Outcome::at_most(alpha, level * level));
    }
    t
}

fn correlation_with_uniform(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(200) {
        let f = line_field(rng);
        let n = f.modulus();
        let g = disk_field(rng, Arity::One, n);
        let alpha = alpha_uniformity_1d(&f).expect("disk").minimal_alpha;
        let cc = cross_correlation(&f, &g, CorrelationMethod::Direct).expect("shape");
        let sf: Complex64 = f.values().iter().sum();
        let sg: Complex64 = g.values().iter().sum();
        let lhs = (sq_sum(cc.values()) - sf.norm_sqr() * sg.norm_sqr() / n as f64).abs();
        let rhs = alpha.sqrt() * (n * n) as f64 * sq_sum(g.values());
        t.add(Outcome::at_most(lhs, rhs));
    }
    t
}

fn progression_discrepancy(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(50) {
        let a = random_set(rng, 16, 0.05..0.95);
        let alpha = set_alpha_2d(&a).expect("disk");
        for _ in 0..b.trials(100) {
            let bx = random_interval_box(rng, 16);
            let r = progression_discrepancy_with_alpha(&a, &bx, alpha).expect("interval box");
            t.add(Outcome::at_most(r.discrepancy, r.bound));
        }
    }
    t
}

fn cube_lower_bound(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(500) {
        let n = pick(rng, &[6, 8, 12]);
        let a = random_set(rng, n, 0.0..1.0);
        let r = cube_bounds_report(&a, &GridBox::full(n)).expect("full box");
        t.add(Outcome::exact(r.lower_holds));
    }
    t
}

fn cube_count_methods(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(500) {
        let n = pick(rng, &[6, 8, 12]);
        let a = random_set(rng, n, 0.0..1.0);
        t.add(Outcome::exact(count_cubes(&a, CubeMethod::Brute) == count_cubes(&a, CubeMethod::Spectral)));
    }
    t
}

fn box_cauchy_schwarz(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(200) {
        let fs: Vec<ComplexField> = (0..4).map(|_| disk_field(rng, Arity::Two, 8)).collect();
        let lhs = box_inner_product(&fs[0], &fs[1], &fs[2], &fs[3]).expect("shape").norm();
        let rhs: f64 = fs.iter().map(|f| box_inner_product(f, f, f, f).expect("shape").re.max(0.0).powf(0.25)).product();
        t.add(Outcome::at_most(lhs, rhs));
    }
    t
}

fn box_triangle(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(500) {
        let n = rng.gen_range(2..10);
        let bx = random_box(rng, n);
        let (f, g) = (box_field(rng, &bx), box_field(rng, &bx));
        let sum = f.add(&g).expect("shape");
        let lhs = box_norm(&sum, &bx).expect("box").value;
        let rhs = box_norm(&f, &bx).expect("box").value + box_norm(&g, &bx).expect("box").value;
        let margin = rhs + tolerance::TRIANGLE_SLACK - lhs;
        t.add(Outcome { hypothesis: true, held: margin >= 0.0, margin: margin / rhs.max(1.0) });
    }
    t
}

fn box_norm_duality(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(200) {
        let n = rng.gen_range(2..=16);
        let bx = random_box(rng, n);
        let f = box_field(rng, &bx);
        let primal = box_inner_product(&f, &f, &f, &f).expect("shape");
        let dual = crate::uniformity::dual_fourth_power(&f);
        t.add(Outcome::close(primal.re, dual, tolerance::BOX_DUAL).and(Outcome::close(primal.im, 0.0, tolerance::BOX_IMAGINARY)));
    }
    t
}

fn row_deviation_box_norm(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(200) {
        let n = rng.gen_range(2..10);
        let bx = random_box(rng, n);
        let a = set_in_box(rng, &bx, 0.0..1.0);
        let p = marginal_profile(&a, &bx).expect("box");
        let dev = |m: usize| &p.row_density[&m] - &p.delta;
        // sum_{m, p} (sum_{k in E1} g(k, m) g(k, p))^2 with g(k, m) = delta_m - delta
        let mut fourth = Rational::zero();
        for m in bx.ys().iter() {
            for q in bx.ys().iter() {
                let s: Rational = bx.xs().iter().map(|_| dev(m) * dev(q)).sum();
                fourth += &s * &s;
            }
        }
        let w = ratio(bx.width(), 1);
        let inner: Rational = bx.ys().iter().map(|m| dev(m) * dev(m)).sum();
        let closed = &w * &w * &inner * &inner;
        let g = ComplexField::from_fn_2d(n, |k, m| {
            if bx.contains(k, m) {
                Complex64::new(zn::to_f64(&dev(m)), 0.0)
            } else {
                Complex64::zero()
            }
        });
        let float = box_norm(&g, &bx).expect("box").fourth_power;
        t.add(Outcome::exact(fourth == closed).and(Outcome::close(float, zn::to_f64(&closed), 1e-9)));
    }
    t
}

fn cube_upper_bound(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(500) {
        let n = pick(rng, &[6, 8, 12]);
        // Equal row counts make the row-deviation premise hold.
        let per_row = rng.gen_range(0..=n);
        let a = if rng.gen_bool(0.5) {
            let mut pts = Vec::new();
            for m in 0..n {
                let mut ks: Vec<usize> = (0..n).collect();
                ks.shuffle(rng);
                pts.extend(ks[..per_row].iter().map(|&k| (k, m)));
            }
            GridSet::new(n, pts).expect("residues")
        } else {
            random_set(rng, n, 0.0..1.0)
        };
        let r = cube_bounds_report(&a, &GridBox::full(n)).expect("full box");
        let o = match (r.upper, r.upper_holds) {
            (Some(upper), Some(_)) => Outcome::at_most(r.cubes as f64, upper),
            _ => Outcome::vacuous(),
        };
        t.add(o);
    }
    t
}

// corners

fn corner_enumerations(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(200) {
        let n = rng.gen_range(1..14);
        let a = random_set(rng, n, 0.0..1.0);
        let ok = [CornerMode::Grid, CornerMode::Cyclic].iter().all(|&mode| {
            let c = count_corners(&a, mode);
            c.count == count_corners_pointwise(&a, mode) && c.witness.is_none_or(|w| w.verify(&a, mode))
        });
        t.add(Outcome::exact(ok));
    }
    t
}

fn greedy_ap_free(rng: &mut ChaCha8Rng, k: usize) -> LineSet {
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);
    let mut chosen: Vec<usize> = Vec::new();
    for x in order {
        chosen.push(x);
        if !is_three_ap_free(&LineSet::new(k, chosen.iter().copied()).expect("residues")) {
            chosen.pop();
        }
    }
    LineSet::new(k, chosen).expect("residues")
}

fn embedding_corner_free(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(100) {
        let k = rng.gen_range(1..=60);
        let a1 = greedy_ap_free(rng, k);
        let rule = if rng.gen_bool(0.5) { EmbedRule::Translation } else { EmbedRule::LatticeDifference };
        let a = embed_corner_free(&a1, 3 * k, rule).expect("progression-free input");
        t.add(Outcome::exact(count_corners(&a, CornerMode::Grid).count == 0 && a.len() == a1.len() * k));
    }
    t
}

fn trilinear_decomposition(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(200) {
        let n = rng.gen_range(2..10);
        let bx = random_box(rng, n);
        let a = set_in_box(rng, &bx, 0.1..1.0);
        let sub = |rng: &mut ChaCha8Rng| GridSet::new(n, a.iter().filter(|_| rng.gen_bool(0.6))).expect("residues");
        let q1 = sub(rng);
        let q2 = sub(rng);
        let r = decompose(&q1, &q2, &a, &bx).expect("nested sets");
        let total = r.total as f64;
        t.add(Outcome::close(r.main + r.marginal + r.uniform, total, 1e-8));
    }
    t
}

fn trilinear_bound(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    let n = 8;
    for _ in 0..b.trials(200) {
        let bx = if rng.gen_bool(0.5) { GridBox::full(n) } else { random_box(rng, n) };
        let (h, g, f) = (box_field(rng, &bx), box_field(rng, &bx), box_field(rng, &bx));
        let alpha = alpha_uniformity_box(&f, &bx).expect("box").minimal_alpha;
        let (b1, b2) = (bx.width() as f64 / n as f64, bx.height() as f64 / n as f64);
        let level = 2f64.powi(-12) * alpha.powi(3) * b1.powi(24) * b2.powi(24);
        let side_alpha = |e: &LineSet| alpha_uniformity_1d(&ComplexField::balanced_1d(e)).expect("disk").minimal_alpha;
        let hypothesis = side_alpha(bx.xs()) <= level && side_alpha(bx.ys()) <= level;
        let sum = trilinear_corner_sum(&h, &g, &f).expect("shape").norm();
        let bound = 2.0 * alpha.powf(0.25) * b1 * b1 * b2 * b2 * (n as f64).powi(3);
        t.add(Outcome::at_most(sum, bound).given(hypothesis));
    }
    t
}

fn dense_uniform_corner(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(100) {
        let n = rng.gen_range(4..13);
        let bx = random_box(rng, n);
        let a = set_in_box(rng, &bx, 0.2..1.0);
        if a.is_empty() {
            t.add(Outcome::vacuous());
            continue;
        }
        let r = decompose(&a, &a, &a, &bx).expect("nested sets");
        let delta = a.len() as f64 / bx.size() as f64;
        let (b1, b2) = (bx.width() as f64 / n as f64, bx.height() as f64 / n as f64);
        let nondegenerate = r.total as f64 - a.len() as f64;
        let threshold = 1e-27 * delta.powi(11) * b1 * b1 * b2 * b2 * (n as f64).powi(3);
        let hypothesis = nondegenerate >= threshold && threshold > 1.0;
        let found = count_corners(&a, CornerMode::Cyclic).witness.is_some();
        t.add(Outcome::exact(found).given(hypothesis));
    }
    t
}

// graph

fn matrix_vector_bound(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(200) {
        let n = rng.gen_range(1..=16);
        let c: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cv: Vec<f64> = c.iter().map(|row| row.iter().zip(&v).map(|(x, y)| x * y).sum()).collect();
        let lhs: f64 = cv.iter().map(|x| x * x).sum();
        let rhs = v.iter().map(|x| x * x).sum::<f64>() * c.iter().flatten().map(|x| x * x).sum::<f64>();
        t.add(Outcome::at_most(lhs, rhs));
    }
    t
}

fn spectral_set(rng: &mut ChaCha8Rng) -> GridSet {
    let n = pick(rng, &[8, 16, 32]);
    random_set(rng, n, 0.0..1.0)
}

fn spectral_trace(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(200) {
        let a = spectral_set(rng);
        let r = gram_spectrum(&a, &GridBox::full(a.modulus())).expect("square");
        t.add(Outcome::close(r.trace, a.len() as f64, tolerance::SPECTRAL_TRACE));
    }
    t
}

fn spectral_trace_of_square(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(200) {
        let a = spectral_set(rng);
        let r = gram_spectrum(&a, &GridBox::full(a.modulus())).expect("square");
        t.add(Outcome::close(r.trace_of_square, r.intersection_energy as f64, tolerance::SPECTRAL_TRACE));
    }
    t
}

fn leading_eigenvalue_lower(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(200) {
        let a = spectral_set(rng);
        let n2 = (a.modulus() * a.modulus()) as f64;
        let r = gram_spectrum(&a, &GridBox::full(a.modulus())).expect("square");
        t.add(Outcome::at_most(r.delta * r.delta * n2 - tolerance::SPECTRAL_TRACE * n2, r.mu[0]));
    }
    t
}

fn spectral_verdicts(rng: &mut ChaCha8Rng, b: Budget, which: usize) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(100) {
        let n = pick(rng, &[8, 16]);
        let a = random_set(rng, n, 0.05..0.95);
        let c = spectral_uniformity_check(&a, &GridBox::full(n), SpectralCheckParams::default()).expect("square");
        let v = [c.mu1_upper, c.forward, c.converse][which];
        let o = match (v.conclusion, v.margin) {
            (Some(held), Some(m)) => Outcome { hypothesis: true, held, margin: m / (n * n) as f64 },
            _ => Outcome::vacuous(),
        };
        t.add(o);
    }
    t
}

fn level_sets(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(100) {
        let a = spectral_set(rng);
        let n = a.modulus();
        let r = gram_spectrum(&a, &GridBox::full(n)).expect("square");
        let which = rng.gen_range(0..2.min(r.mu.len()));
        let mu = r.mu[which];
        let alpha = (mu / (n * n) as f64 * (1.0 - 1e-9)).min(0.999);
        if alpha <= 0.0 {
            t.add(Outcome::vacuous());
            continue;
        }
        let xi = rng.gen_range(0.05..0.49);
        let v: Vec<Complex64> = r.vectors[which].iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let o = match level_set_partition(&v, alpha, xi, n as f64, mu) {
            Ok(p) => {
                let mut seen = vec![0u8; n];
                p.classes.iter().flatten().for_each(|&i| seen[i] += 1);
                let cover = seen.iter().all(|&s| s == 1);
                let near = p.classes.iter().zip(&p.centers).all(|(cl, c)| cl.iter().all(|&i| (v[i] - c).norm() <= xi + 1e-12));
                let inside = p.centers.iter().all(|c| c.norm() <= 1.0 / alpha + tolerance::LEVEL_SET_RADIUS);
                let count = p.classes.len() as f64;
                Outcome::exact(cover && near && inside).and(Outcome::at_most(count, p.count_bound))
            }
            Err(_) => Outcome::exact(false),
        };
        t.add(o);
    }
    t
}

fn density_split_check(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(200) {
        let n = rng.gen_range(2..12);
        let cells_count = rng.gen_range(1..6);
        let labels: Vec<usize> = (0..n * n).map(|_| rng.gen_range(0..cells_count)).collect();
        let cells: Vec<GridSet> = (0..cells_count)
            .map(|c| GridSet::new(n, (0..n * n).filter(|&i| labels[i] == c).map(|i| (i / n, i % n))).expect("residues"))
            .filter(|c| !c.is_empty())
            .collect();
        let a = random_set(rng, n, 0.0..1.0);
        let eta = zn::from_f64(rng.gen_range(0.01..0.5)).expect("finite");
        let s = density_split(&a, &cells, &eta).expect("partition");
        let scale = ratio(n * n, 1);
        let margin = zn::to_f64(&((&s.lhs - &s.rhs) / scale));
        t.add(Outcome { hypothesis: true, held: s.holds, margin });
    }
    t
}

fn increment_soundness(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(100) {
        let n = rng.gen_range(8..20);
        let bx = if rng.gen_bool(0.5) { GridBox::full(n) } else { random_box(rng, n) };
        let (w, h) = (rng.gen_range(1..=bx.width()), rng.gen_range(1..=bx.height()));
        let dense: Vec<usize> = bx.xs().members()[..w].to_vec();
        let tall: Vec<usize> = bx.ys().members()[..h].to_vec();
        let background = rng.gen_range(0.05..0.6);
        let a = GridSet::from_predicate(n, |k, m| {
            bx.contains(k, m) && (dense.contains(&k) && tall.contains(&m) && rng.gen_bool(0.9) || rng.gen_bool(background))
        })
        .expect("residues");
        let alpha = rng.gen_range(0.001..0.2);
        let r = find_density_increment(&a, &bx, alpha, ProfileName::Toy).expect("valid box");
        let sound = r.verify(&a)
            && match r.kind {
                IncrementKind::Increment => r.new_density > r.base_density,
                IncrementKind::Uniform => true,
            };
        t.add(Outcome::exact(sound));
    }
    t
}

// partition

fn progression_partition(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(50) {
        let n = if rng.gen_bool(0.5) { rng.gen_range(1..200) } else { rng.gen_range(200..=10_000) };
        let (mut r1, mut r2) = (rng.gen_range(-(n as i64)..n as i64), rng.gen_range(-(n as i64)..n as i64));
        if r1 == 0 && r2 == 0 {
            r1 = 1;
            r2 = rng.gen_range(0..n as i64);
        }
        let s = rng.gen_range(1..=n);
        let p = ap_partition(n, r1, r2, s).expect("valid parameters");
        let c = &p.checks;
        let margin = (p.s as f64 - c.max_diameter as f64).min(c.count_bound - c.count as f64) / n as f64;
        t.add(Outcome { hypothesis: true, held: c.all_hold(), margin });
    }
    t
}

fn right_square_checks(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(100) {
        let n = rng.gen_range(2..24);
        let a = random_set(rng, n, 0.05..0.95);
        let Some((i, _)) = fourier::dft(&ComplexField::balanced_2d(&a)).argmax_nonzero() else {
            t.add(Outcome::vacuous());
            continue;
        };
        let o = match right_square_partition(&a, (i / n, i % n)) {
            Ok(r) => {
                let shaped = r.family.squares.iter().all(|s| s.is_valid(n) && s.t == r.side);
                Outcome::exact(r.is_partition && shaped && r.omega_within_accounting)
            }
            Err(_) => Outcome::vacuous(),
        };
        t.add(o);
    }
    t
}

/// Energy runs shared by the energy checks.
fn energy_runs(rng: &mut ChaCha8Rng, b: Budget) -> Vec<(GridSet, crate::partition::EnergyRun)> {
    (0..b.trials(20).max(5))
        .map(|_| {
            let law = PowerLaw::new(pick(rng, &[0.01, 0.001]), pick(rng, &[4.0, 6.0, 8.0])).expect("valid law");
            let n = 32;
            let w = if rng.gen_bool(0.5) {
                random_set(rng, n, 0.2..0.8)
            } else {
                let dens: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
                GridSet::from_predicate(n, |k, m| rng.gen_bool(dens[2 * (k / 16) + m / 16])).expect("residues")
            };
            let w = if w.is_empty() { GridSet::full(n) } else { w };
            let delta = zn::to_f64(&w.density());
            let run = energy_increment_run(&w, delta * rng.gen_range(0.05..0.5), law, ProfileName::Toy, 5).expect("valid run");
            (w, run)
        })
        .collect()
}

fn energy_checks(rng: &mut ChaCha8Rng, b: Budget) -> [Tally; 5] {
    let mut out: [Tally; 5] = Default::default();
    for (w, run) in energy_runs(rng, b) {
        let n2 = (w.modulus() * w.modulus()) as f64;
        for (i, step) in run.trace.iter().enumerate() {
            match &step.decomposition {
                Some(d) => {
                    let scale = zn::to_f64(&d.fine).abs().max(1.0);
                    let gap = zn::to_f64(&(&d.fine - &d.coarse - &d.difference - &d.cross * ratio(2, 1)).abs()) / scale;
                    out[0].add(Outcome { hypothesis: true, held: d.holds && gap <= 1e-9, margin: 1e-9 - gap });
                }
                None => out[0].add(Outcome::vacuous()),
            }
            let refined = step.refined_cells > 0;
            let gain = run.trace.get(i + 1).map(|next| zn::to_f64(&(&next.exact_energy - &step.exact_energy)));
            out[1].add(match gain {
                Some(g) => Outcome { hypothesis: true, held: g > 0.0, margin: g / n2 },
                None => Outcome::vacuous(),
            }.given(refined));
            out[2].add(Outcome::exact(step.accounting_holds));
            out[3].add(Outcome::at_most(step.energy, n2));
            out[4].add(match step.holder {
                Some(h) => Outcome::at_most(h.rhs, h.lhs),
                None => Outcome::vacuous(),
            });
        }
        out[2].add(Outcome::exact(run.accounting_holds));
        let squares: Vec<RightSquare> = run.squares.clone();
        out[3].add(Outcome::exact(energy_of_family(&squares, &w).within_bound));
    }
    out
}

fn box_norm_saturation(rng: &mut ChaCha8Rng, b: Budget) -> Tally {
    let mut t = Tally::default();
    for _ in 0..b.trials(500) {
        let side = pick(rng, &[8, 12]);
        let n = side + rng.gen_range(0..4);
        let start = (rng.gen_range(0..n), rng.gen_range(0..n));
        let bx = GridBox::new(
            LineSet::interval(n, start.0, side).expect("interval"),
            LineSet::interval(n, start.1, side).expect("interval"),
        )
        .expect("same modulus");
        let a = set_in_box(rng, &bx, 0.0..1.0);
        let s = saturation_bound_check(&a, &bx).expect("box");
        let scale = zn::to_f64(&s.rhs).max(1.0);
        t.add(Outcome { hypothesis: true, held: s.holds, margin: zn::to_f64(&(&s.rhs - &s.lhs)) / scale });
    }
    t
}

// driver

fn hunt_checks(rng: &mut ChaCha8Rng, b: Budget) -> [Tally; 3] {
    let mut out: [Tally; 3] = Default::default();
    let profile = ConstantsProfile::toy();
    let n = if b.quick { 24 } else { 48 };
    let mut sets: Vec<GridSet> = (0..b.trials(50)).map(|_| random_set(rng, n, 0.3..0.6)).collect();
    for k in [10, 20] {
        if let Ok(bs) = behrend_construct(k) {
            sets.push(embed_corner_free(&bs.set, 3 * k, EmbedRule::Translation).expect("progression-free input"));
        }
    }
    for a in &sets {
        let hunt = corner_hunt(a, &profile, DEFAULT_MAX_STEPS).expect("nonempty set");
        let witness = match hunt.found_corner() {
            Some(w) => {
                let pts = w.points(a.modulus(), CornerMode::Grid);
                let n = a.modulus();
                Outcome::exact(w.d > 0 && pts.iter().all(|&(k, m)| k < n && m < n && a.contains(k, m)))
            }
            None => Outcome::exact(count_corners(a, CornerMode::Grid).count == 0 || hunt.trace.len() >= hunt.max_steps)
                .given(false),
        };
        out[0].add(witness);
        out[1].add(Outcome::exact(hunt.densities_monotone() && hunt.boxes_shrink()));
        out[2].add(Outcome::exact(hunt.replays(a)));
    }
    out
}

fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs every check; `quick` cuts trial counts roughly tenfold.
pub fn run_suite(seed: u64, quick: bool) -> Vec<CheckLine> {
    let b = Budget { quick };
    type Check = fn(&mut ChaCha8Rng, Budget) -> Tally;
    let single: &[(&str, Check)] = &[
        ("marginal-sums", marginal_sums),
        ("balanced-row-sums", balanced_row_sums),
        ("marginal-monotone", marginal_monotone),
        ("parseval", parseval),
        ("inner-product", inner_product),
        ("correlation-energy", correlation_energy),
        ("inverse-round-trip", inverse_round_trip),
        ("fourier-fourth-moment", fourier_fourth_moment),
        ("max-coefficient-bound", max_coefficient_bound),
        ("uniformity-from-max-coefficient", uniformity_from_max_coefficient),
        ("correlation-with-uniform", correlation_with_uniform),
        ("progression-discrepancy", progression_discrepancy),
        ("cube-lower-bound", cube_lower_bound),
        ("cube-count-methods", cube_count_methods),
        ("box-cauchy-schwarz", box_cauchy_schwarz),
        ("box-triangle", box_triangle),
        ("box-norm-duality", box_norm_duality),
        ("row-deviation-box-norm", row_deviation_box_norm),
        ("cube-upper-bound", cube_upper_bound),
        ("corner-enumerations", corner_enumerations),
        ("embedding-corner-free", embedding_corner_free),
        ("trilinear-decomposition", trilinear_decomposition),
        ("trilinear-bound", trilinear_bound),
        ("dense-uniform-corner", dense_uniform_corner),
        ("matrix-vector-bound", matrix_vector_bound),
        ("spectral-trace", spectral_trace),
        ("spectral-trace-of-square", spectral_trace_of_square),
        ("leading-eigenvalue-lower", leading_eigenvalue_lower),
        ("leading-eigenvalue-upper", |r, b| spectral_verdicts(r, b, 0)),
        ("spectral-forward", |r, b| spectral_verdicts(r, b, 1)),
        ("spectral-converse", |r, b| spectral_verdicts(r, b, 2)),
        ("level-sets", level_sets),
        ("density-split", density_split_check),
        ("increment-soundness", increment_soundness),
        ("progression-partition", progression_partition),
        ("right-square-partition", right_square_checks),
    ];
    let mut lines: Vec<CheckLine> = single
        .iter()
        .enumerate()
        .map(|(i, (name, check))| check(&mut stream(seed, i), b).line(name))
        .collect();
    let energy = energy_checks(&mut stream(seed, single.len()), b);
    let names = ["energy-decomposition", "energy-increases", "energy-accounting", "energy-bounded", "holder-step"];
    lines.extend(energy.into_iter().zip(names).map(|(t, name)| t.line(name)));
    lines.push(box_norm_saturation(&mut stream(seed, single.len() + 1), b).line("box-norm-saturation"));
    let hunts = hunt_checks(&mut stream(seed, single.len() + 2), b);
    lines.extend(hunts.into_iter().zip(["hunt-witness", "hunt-monotone", "hunt-replay"]).map(|(t, name)| t.line(name)));
    lines
}

/// One JSON object per line.
pub fn render(lines: &[CheckLine]) -> String {
    let mut out = String::new();
    for line in lines {
        out.push_str(&serde_json::to_string(line).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_matches_report() {
        let lines = run_suite(7, true);
        let names: Vec<&str> = lines.iter().map(|l| l.lemma.as_str()).collect();
        assert_eq!(names, CHECKS);
    }

    #[test]
    fn quick_suite_passes() {
        let lines = run_suite(1, true);
        for l in &lines {
            assert!(!l.failed(), "{l:?}");
            assert!(l.trials > 0, "{l:?}");
        }
    }

    #[test]
    fn same_seed_same_report() {
        assert_eq!(render(&run_suite(3, true)), render(&run_suite(3, true)));
    }

    #[test]
    fn tally_counts_only_premised_margins() {
        let mut t = Tally::default();
        t.add(Outcome::vacuous());
        t.add(Outcome::at_most(1.0, 2.0));
        t.add(Outcome::at_most(3.0, 2.0));
        let l = t.line("x");
        assert_eq!((l.trials, l.hypothesis_satisfied, l.conclusion_held), (3, 2, 1));
        assert!(l.failed());
        assert!(l.worst_margin.unwrap() < 0.0);
    }
}

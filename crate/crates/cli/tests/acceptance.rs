//! Acceptance criteria. Each criterion prints one PASS/FAIL line with its runtime.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cornerlab::corners::{self, CornerMode, EmbedRule};
use cornerlab::driver::{corner_hunt, DEFAULT_MAX_STEPS};
use cornerlab::fourier;
use cornerlab::graph::{self, IncrementKind};
use cornerlab::partition::{self, PowerLaw, RunLimits};
use cornerlab::profile::{ConstantsProfile, ProfileName};
use cornerlab::uniformity::{self, CubeMethod};
use cornerlab::zn::{self, ratio};
use cornerlab::{Arity, ComplexField, GridBox, GridSet, LineSet};

type Verdict = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Verdict);

fn rng_for(criterion: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_0000 + criterion)
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, density: std::ops::Range<f64>) -> GridSet {
    let p = rng.gen_range(density);
    GridSet::from_predicate(n, |_, _| rng.gen_bool(p)).unwrap()
}

fn disk(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(rng.gen_range(0.0..1.0f64).sqrt(), rng.gen_range(0.0..std::f64::consts::TAU))
}

fn field(rng: &mut ChaCha8Rng, arity: Arity, n: usize) -> ComplexField {
    let len = n.pow(arity.dims());
    ComplexField::new(arity, n, (0..len).map(|_| disk(rng)).collect()).unwrap()
}

fn box_field(rng: &mut ChaCha8Rng, bx: &GridBox) -> ComplexField {
    let n = bx.modulus();
    let v = (0..n * n).map(|i| if bx.contains(i / n, i % n) { disk(rng) } else { Complex64::new(0.0, 0.0) }).collect();
    ComplexField::new(Arity::Two, n, v).unwrap()
}

fn random_axis(rng: &mut ChaCha8Rng, n: usize) -> LineSet {
    let mut xs: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
    if xs.is_empty() {
        xs.push(rng.gen_range(0..n));
    }
    LineSet::new(n, xs).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn norm_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `k -> sum_s f(s) conj g(s - k)`, summed directly.
fn direct_correlation(f: &ComplexField, g: &ComplexField) -> Vec<Complex64> {
    let n = f.modulus();
    match f.arity() {
        Arity::One => (0..n)
            .map(|k| (0..n).map(|s| f.values()[s] * g.values()[(s + n - k) % n].conj()).sum())
            .collect(),
        Arity::Two => {
            let (fv, gv) = (f.values(), g.values());
            (0..n * n)
                .map(|kk| {
                    let (k1, k2) = (kk / n, kk % n);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for s1 in 0..n {
                        let row_f = &fv[s1 * n..(s1 + 1) * n];
                        let row_g = &gv[((s1 + n - k1) % n) * n..((s1 + n - k1) % n + 1) * n];
                        for s2 in 0..n {
                            acc += row_f[s2] * row_g[(s2 + n - k2) % n].conj();
                        }
                    }
                    acc
                })
                .collect()
        }
    }
}

fn fourier_identities() -> Verdict {
    let mut rng = rng_for(1);
    let moduli = [8, 12, 16, 64];
    let mut worst = 0.0f64;
    for arity in [Arity::One, Arity::Two] {
        for trial in 0..200 {
            let n = moduli[trial % moduli.len()];
            let scale = (n as f64).powi(arity.dims() as i32);
            let (f, g) = (field(&mut rng, arity, n), field(&mut rng, arity, n));
            let (fh, gh) = (fourier::dft(&f), fourier::dft(&g));
            let parseval = rel_err(scale * norm_sq(f.values()), norm_sq(fh.coeffs()));
            let physical: Complex64 = f.values().iter().zip(g.values()).map(|(x, y)| x * y.conj()).sum::<Complex64>() * scale;
            let spectral: Complex64 = fh.coeffs().iter().zip(gh.coeffs()).map(|(x, y)| x * y.conj()).sum();
            let inner = (physical - spectral).norm() / physical.norm().max(spectral.norm()).max(scale);
            let corr = rel_err(
                scale * norm_sq(&direct_correlation(&f, &g)),
                fh.coeffs().iter().zip(gh.coeffs()).map(|(x, y)| x.norm_sqr() * y.norm_sqr()).sum(),
            );
            for (name, err) in [("Parseval", parseval), ("inner product", inner), ("correlation", corr)] {
                if err > 1e-6 {
                    return Err(format!("{name} off by {err:e} at N = {n}, arity {arity:?}"));
                }
                worst = worst.max(err);
            }
        }
    }
    Ok(format!("800 fields, worst relative error {worst:.2e}"))
}

fn box_norms() -> Verdict {
    let mut rng = rng_for(2);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(2..=16);
        let bx = GridBox::new(random_axis(&mut rng, n), random_axis(&mut rng, n)).unwrap();
        let f = box_field(&mut rng, &bx);
        let primal = uniformity::box_inner_product(&f, &f, &f, &f).unwrap();
        let dual = uniformity::dual_fourth_power(&f);
        let err = rel_err(primal.re, dual);
        if err > 1e-8 {
            return Err(format!("primal {} vs dual {dual} at N = {n}", primal.re));
        }
        worst = worst.max(err);
    }
    let mut tightest = f64::INFINITY;
    for _ in 0..500 {
        let n = rng.gen_range(2..=12);
        let bx = GridBox::new(random_axis(&mut rng, n), random_axis(&mut rng, n)).unwrap();
        let (f, g) = (box_field(&mut rng, &bx), box_field(&mut rng, &bx));
        let norm = |h: &ComplexField| uniformity::box_norm(h, &bx).unwrap().value;
        let slack = norm(&f) + norm(&g) - norm(&f.add(&g).unwrap());
        if slack < -1e-9 {
            return Err(format!("triangle inequality fails by {slack:e}"));
        }
        tightest = tightest.min(slack);
    }
    Ok(format!("duality worst {worst:.2e}; triangle tightest slack {tightest:.3e}"))
}

fn cube_bounds() -> Verdict {
    let mut rng = rng_for(3);
    let mut applicable = 0;
    for trial in 0..500 {
        let n = [6, 8, 12][trial % 3];
        let a = if trial % 2 == 0 {
            random_set(&mut rng, n, 0.0..1.0)
        } else {
            let per_row = rng.gen_range(0..=n);
            let mut pts = Vec::new();
            for m in 0..n {
                let mut ks: Vec<usize> = (0..n).collect();
                ks.shuffle(&mut rng);
                pts.extend(ks[..per_row].iter().map(|&k| (k, m)));
            }
            GridSet::new(n, pts).unwrap()
        };
        let brute = uniformity::count_cubes(&a, CubeMethod::Brute);
        let spectral = uniformity::count_cubes(&a, CubeMethod::Spectral);
        if brute != spectral {
            return Err(format!("brute {brute} vs spectral {spectral}"));
        }
        // cubes >= delta^4 N^4  <=>  cubes N^4 >= |A|^4
        let size = a.len() as u128;
        if (brute as u128) * (n as u128).pow(4) < size.pow(4) {
            return Err(format!("cube count {brute} below delta^4 N^4 for |A| = {size}, N = {n}"));
        }
        let report = uniformity::cube_bounds_report(&a, &GridBox::full(n)).unwrap();
        if let Some(upper) = report.upper {
            applicable += 1;
            if brute as f64 > upper * (1.0 + 1e-9) {
                return Err(format!("cube count {brute} above upper bound {upper}"));
            }
        }
    }
    Ok(format!("500 sets, upper bound applicable on {applicable}"))
}

fn discrepancy() -> Verdict {
    let mut rng = rng_for(4);
    let n = 16;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let a = random_set(&mut rng, n, 0.05..0.95);
        let alpha = uniformity::set_alpha_2d(&a).unwrap();
        for _ in 0..100 {
            let interval = |rng: &mut ChaCha8Rng| LineSet::interval(n, rng.gen_range(0..n), rng.gen_range(1..=n)).unwrap();
            let xs = interval(&mut rng);
            let p = GridBox::new(xs, interval(&mut rng)).unwrap();
            let inside = a.iter().filter(|&(k, m)| p.contains(k, m)).count() as f64;
            let gap = (inside - a.len() as f64 * p.size() as f64 / (n * n) as f64).abs();
            let bound = 16.0 * alpha.powf(0.25) * (n * n) as f64;
            let report = uniformity::progression_discrepancy_with_alpha(&a, &p, alpha).unwrap();
            if gap > bound + 1e-6 || !report.holds || (report.discrepancy - gap).abs() > 1e-9 {
                return Err(format!("discrepancy {gap} vs bound {bound}"));
            }
            worst = worst.max(gap / bound.max(f64::MIN_POSITIVE));
        }
    }
    Ok(format!("5000 boxes, largest discrepancy/bound {worst:.3}"))
}

fn spectral_identities() -> Verdict {
    let mut rng = rng_for(5);
    for trial in 0..200 {
        let n = [8, 16, 32][trial % 3];
        let a = random_set(&mut rng, n, 0.0..1.0);
        let r = graph::gram_spectrum(&a, &GridBox::full(n)).unwrap();
        let rows: Vec<Vec<bool>> = (0..n).map(|m| (0..n).map(|k| a.contains(k, m)).collect()).collect();
        let mut energy = 0.0;
        for p in &rows {
            for q in &rows {
                let c = p.iter().zip(q).filter(|(x, y)| **x && **y).count() as f64;
                energy += c * c;
            }
        }
        let trace: f64 = r.mu.iter().sum();
        let square: f64 = r.mu.iter().map(|m| m * m).sum();
        let delta = a.len() as f64 / (n * n) as f64;
        let n2 = (n * n) as f64;
        if rel_err(trace, a.len() as f64) > 1e-6 && !a.is_empty() {
            return Err(format!("trace {trace} vs {}", a.len()));
        }
        if rel_err(square, energy) > 1e-6 && energy > 0.0 {
            return Err(format!("trace of square {square} vs {energy}"));
        }
        if r.mu[0] < delta * delta * n2 - 1e-6 * n2 {
            return Err(format!("mu1 = {} below delta^2 n^2 = {}", r.mu[0], delta * delta * n2));
        }
    }
    Ok("200 sets".into())
}

fn planted_set(rng: &mut ChaCha8Rng, n: usize) -> GridSet {
    let (w, h) = (rng.gen_range(2..=n / 2), rng.gen_range(2..=n / 2));
    let (x0, y0) = (rng.gen_range(0..n), rng.gen_range(0..n));
    let background = rng.gen_range(0.05..0.5);
    GridSet::from_predicate(n, |k, m| {
        let inside = (k + n - x0) % n < w && (m + n - y0) % n < h;
        rng.gen_bool(if inside { 0.95 } else { background })
    })
    .unwrap()
}

fn increment_soundness() -> Verdict {
    let mut rng = rng_for(6);
    let (mut increments, mut uniform) = (0, 0);
    let mut tested = 0;
    while tested < 100 {
        let n = rng.gen_range(8..=24);
        let a = planted_set(&mut rng, n);
        let bx = GridBox::full(n);
        let alpha = rng.gen_range(0.0005..0.01);
        let measured = zn::to_f64(&uniformity::box_uniformity_exact(&a, &bx).unwrap().alpha);
        if measured <= alpha {
            continue;
        }
        tested += 1;
        let r = graph::find_density_increment(&a, &bx, alpha, ProfileName::Toy).unwrap();
        match r.kind {
            IncrementKind::Uniform => uniform += 1,
            IncrementKind::Increment => {
                let count = a.iter().filter(|&(k, m)| r.g1.contains(k) && r.g2.contains(m)).count();
                let area = r.g1.len() * r.g2.len();
                let exact = area > 0 && count == r.count && r.new_density == ratio(count, area);
                // count / area > |A| / N^2
                if !exact || count * n * n <= a.len() * area {
                    return Err(format!("unsound increment: {count}/{area} against {}/{}", a.len(), n * n));
                }
                increments += 1;
            }
        }
    }
    Ok(format!("{increments} verified increments, {uniform} uniform verdicts"))
}

/// `N` minus the largest cyclic gap between the sorted residues.
fn arc_diameter(mut values: Vec<usize>, n: usize) -> usize {
    values.sort_unstable();
    values.dedup();
    let mut gap = values[0] + n - values[values.len() - 1];
    for w in values.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    n - gap
}

fn progression_partitions() -> Verdict {
    let mut rng = rng_for(7);
    let mut largest = 0;
    for trial in 0..50 {
        let n = if trial % 2 == 0 { rng.gen_range(1..=10_000) } else { rng.gen_range(1..=300) };
        let ni = n as i64;
        let (r1, r2) = loop {
            let pair = (rng.gen_range(-ni..ni.max(1)), rng.gen_range(-ni..ni.max(1)));
            if pair != (0, 0) {
                break pair;
            }
            if n == 1 {
                break (1, 0);
            }
        };
        let s = rng.gen_range(1..=n);
        let p = partition::ap_partition(n, r1, r2, s).map_err(|e| e.to_string())?;
        let mut hits = vec![0u8; n];
        for prog in &p.progressions {
            for i in 0..prog.len {
                let x = prog.start + i * prog.diff;
                if x >= n {
                    return Err(format!("member {x} escapes Z_{n}"));
                }
                hits[x] += 1;
            }
        }
        if hits.iter().any(|&h| h != 1) {
            return Err(format!("not a partition of Z_{n}"));
        }
        let diff = p.progressions[0].diff;
        if p.progressions.iter().any(|q| q.diff != diff) {
            return Err("differences disagree".into());
        }
        let lens: Vec<usize> = p.progressions.iter().map(|q| q.len).collect();
        if lens.iter().max().unwrap() - lens.iter().min().unwrap() > 1 {
            return Err("lengths spread by more than one".into());
        }
        let count = p.progressions.len() as f64;
        if count > 8.0 * (n as f64).powf(4.0 / 3.0) / (s as f64).powf(2.0 / 3.0) {
            return Err(format!("{count} progressions exceed the count bound"));
        }
        let image = |x: &partition::Progression, y: &partition::Progression| {
            let mut v = Vec::with_capacity(x.len * y.len);
            for i in 0..x.len {
                for j in 0..y.len {
                    let (a, b) = ((x.start + i * x.diff) as i128, (y.start + j * y.diff) as i128);
                    v.push((a * r1 as i128 + b * r2 as i128).rem_euclid(n as i128) as usize);
                }
            }
            arc_diameter(v, n)
        };
        // one representative pair per length pair, plus random pairs
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for i in 0..p.progressions.len() {
            for j in 0..p.progressions.len() {
                let (x, y) = (&p.progressions[i], &p.progressions[j]);
                if !pairs.iter().any(|&(a, b)| p.progressions[a].len == x.len && p.progressions[b].len == y.len) {
                    pairs.push((i, j));
                }
            }
            if pairs.len() == 4 {
                break;
            }
        }
        for _ in 0..20 {
            pairs.push((rng.gen_range(0..p.progressions.len()), rng.gen_range(0..p.progressions.len())));
        }
        for (i, j) in pairs {
            let d = image(&p.progressions[i], &p.progressions[j]);
            if d > s {
                return Err(format!("diameter {d} exceeds s = {s} at N = {n}"));
            }
        }
        largest = largest.max(n);
    }
    Ok(format!("50 configurations, largest N = {largest}"))
}

fn energy_machinery() -> Verdict {
    let mut rng = rng_for(8);
    let n = 32;
    let law = PowerLaw::new(0.01, 4.0).unwrap();
    let mut refining_steps = 0;
    let mut worst = 0.0f64;
    for run_index in 0..20 {
        let w = if run_index % 2 == 0 {
            let dens: Vec<f64> = (0..4).map(|_| rng.gen_range(0.05..0.95)).collect();
            GridSet::from_predicate(n, |k, m| rng.gen_bool(dens[2 * (k / 16) + m / 16])).unwrap()
        } else {
            random_set(&mut rng, n, 0.2..0.8)
        };
        let delta = zn::to_f64(&w.density());
        let run = partition::energy_increment_run_with(
            &w,
            delta * rng.gen_range(0.05..0.5),
            law,
            ProfileName::Toy,
            RunLimits::for_profile(ProfileName::Toy),
            5,
        )
        .map_err(|e| e.to_string())?;
        for (i, step) in run.trace.iter().enumerate() {
            if !step.accounting_holds {
                return Err(format!("accounting fails at iteration {}", step.iteration));
            }
            let Some(d) = &step.decomposition else { continue };
            let residual = &d.fine - &d.coarse - &d.difference - &d.cross * ratio(2, 1);
            let err = zn::to_f64(&zn::abs(&residual)) / zn::to_f64(&d.fine).abs().max(1.0);
            if err > 1e-9 || d.coarse != step.exact_energy {
                return Err(format!("decomposition residual {err:e} at iteration {}", step.iteration));
            }
            worst = worst.max(err);
            if step.refined_cells > 0 {
                refining_steps += 1;
                let next = run.trace.get(i + 1).ok_or("refinement without a following iteration")?;
                if d.fine != next.exact_energy || next.exact_energy <= step.exact_energy {
                    return Err(format!("energy did not increase after iteration {}", step.iteration));
                }
            }
        }
        let mut owner = vec![0u8; n * n];
        for sq in &run.squares {
            for (k, m) in sq.points(n) {
                owner[k * n + m] += 1;
            }
        }
        let covered = w.iter().filter(|&(k, m)| owner[k * n + m] == 1).count();
        if owner.iter().any(|&o| o > 1) || covered + run.bad.len() != w.len() {
            return Err("final family does not account for W".into());
        }
    }
    if refining_steps == 0 {
        return Err("no run refined a cell".into());
    }
    Ok(format!("20 runs, {refining_steps} refining steps, worst residual {worst:.1e}"))
}

fn behrend_lower_bound() -> Verdict {
    let k = 100;
    let n = 3 * k;
    let b = corners::behrend_construct(k).map_err(|e| e.to_string())?;
    let a = corners::embed_corner_free(&b.set, n, EmbedRule::Translation).map_err(|e| e.to_string())?;
    if a.len() != b.set.len() * k {
        return Err(format!("size {} is not |A1| * {k} = {}", a.len(), b.set.len() * k));
    }
    let mut member = vec![false; n * n];
    for (x, y) in a.iter() {
        member[x * n + y] = true;
    }
    let mut triples = 0u64;
    for x in 0..n {
        for y in 0..n {
            for d in 1..n {
                triples += 1;
                if x + d < n && y + d < n && member[x * n + y] && member[(x + d) * n + y] && member[x * n + y + d] {
                    return Err(format!("corner at ({x}, {y}) with d = {d}"));
                }
            }
        }
    }
    let nf = n as f64;
    let target = nf.powf(2.0 - 2f64.ln() / nf.ln().ln()) / 9.0;
    Ok(format!(
        "|A1| = {}, |A| = {}, density {:.4}, target size {target:.0} (information only), {triples} triples",
        b.set.len(),
        a.len(),
        a.len() as f64 / (nf * nf)
    ))
}

fn saturation() -> Verdict {
    let mut rng = rng_for(10);
    for trial in 0..500 {
        let side = if trial % 2 == 0 { 8 } else { 12 };
        let n = side + rng.gen_range(0..4);
        let bx = GridBox::new(
            LineSet::interval(n, rng.gen_range(0..n), side).unwrap(),
            LineSet::interval(n, rng.gen_range(0..n), side).unwrap(),
        )
        .unwrap();
        let p = rng.gen_range(0.0..1.0);
        let a = GridSet::from_predicate(n, |k, m| bx.contains(k, m) && rng.gen_bool(p)).unwrap();
        // w f = w chi - c_m on the box; the primal cube sum of w f is w^4 |f|^4
        let w = bx.width() as i64;
        let mut scaled = vec![0i64; n * n];
        for m in bx.ys().iter() {
            let c = bx.xs().iter().filter(|&k| a.contains(k, m)).count() as i64;
            for k in bx.xs().iter() {
                scaled[k * n + m] = w * i64::from(a.contains(k, m)) - c;
            }
        }
        let at = |k: usize, m: usize| scaled[(k % n) * n + (m % n)];
        let mut cube = 0i64;
        for k in 0..n {
            for m in 0..n {
                if at(k, m) == 0 {
                    continue;
                }
                for r in 0..n {
                    for u in 0..n {
                        let down = (m + n - u) % n;
                        cube += at(k, m) * at(k, down) * at(k + r, m) * at(k + r, down);
                    }
                }
            }
        }
        let (size, area) = (a.len() as i128, bx.size() as i128);
        // cube / w^4 <= 4 size^2 (area - size) / area
        let holds = cube as i128 * area <= 4 * size * size * (area - size) * (w as i128).pow(4);
        let report = partition::saturation_bound_check(&a, &bx).unwrap();
        if !holds || report.lhs != ratio(cube as usize, w.pow(4) as usize) || !report.holds {
            return Err(format!("saturation fails for |A| = {size} on a {side}x{side} box"));
        }
    }
    Ok("500 sets".into())
}

fn driver_hunts() -> Verdict {
    let mut rng = rng_for(11);
    let profile = ConstantsProfile::toy();
    let n = 48;
    let mut steps = 0;
    for _ in 0..50 {
        let a = loop {
            let a = random_set(&mut rng, n, 0.3..0.6);
            if a.len() * 10 >= 3 * n * n {
                break a;
            }
        };
        let hunt = corner_hunt(&a, &profile, DEFAULT_MAX_STEPS).map_err(|e| e.to_string())?;
        let w = hunt.found_corner().ok_or_else(|| format!("no corner on a set of density {:.3}", a.len() as f64 / (n * n) as f64))?;
        let pts = [(w.k, w.m), (w.k + w.d, w.m), (w.k, w.m + w.d)];
        if w.d == 0 || pts.iter().any(|&(x, y)| x >= n || y >= n || !a.contains(x, y)) {
            return Err(format!("bad witness {w:?}"));
        }
        steps += hunt.trace.len();
    }
    for k in [10, 16, 20] {
        let b = corners::behrend_construct(k).map_err(|e| e.to_string())?;
        let a = corners::embed_corner_free(&b.set, 3 * k, EmbedRule::Translation).map_err(|e| e.to_string())?;
        let hunt = corner_hunt(&a, &profile, DEFAULT_MAX_STEPS).map_err(|e| e.to_string())?;
        if hunt.found_corner().is_some() || corners::count_corners(&a, CornerMode::Grid).count != 0 {
            return Err(format!("corner reported on the Behrend embedding with K = {k}"));
        }
    }
    Ok(format!("50 verified corners in {steps} recorded steps; 3 Behrend embeddings corner-free"))
}

fn determinism() -> Verdict {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_cornerlab"))
            .args(["verify", "--seed", "1"])
            .output()
            .map_err(|e| e.to_string())
    };
    let (first, second) = (run()?, run()?);
    if first.stdout.is_empty() || first.stdout != second.stdout {
        return Err("reports differ".into());
    }
    Ok(format!("{} bytes, exit {:?}", first.stdout.len(), first.status.code()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("fourier identities", 10, fourier_identities),
        ("box-norm duality and triangle inequality", 30, box_norms),
        ("cube bounds", 60, cube_bounds),
        ("progression discrepancy", 60, discrepancy),
        ("spectral identities", 60, spectral_identities),
        ("increment soundness", 120, increment_soundness),
        ("progression partitions", 60, progression_partitions),
        ("energy machinery", 120, energy_machinery),
        ("corner-free lower bound", 60, behrend_lower_bound),
        ("saturation bound", 30, saturation),
        ("corner hunt", 120, driver_hunts),
        ("determinism", 60, determinism),
    ];
    let mut failures = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*limit);
        let (status, detail) = match (&verdict, in_time) {
            (Ok(d), true) => ("PASS", d.clone()),
            (Ok(d), false) => ("FAIL", format!("over time limit; {d}")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failures += 1;
        }
        println!("criterion {:>2} {status} {name} ({:.2}s / {limit}s): {detail}", i + 1, elapsed.as_secs_f64());
    }
    println!("{} of 12 criteria passed", 12 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

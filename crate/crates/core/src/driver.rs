//! The density-increment loop: alternate between marginal increments, direct
//! corner search on uniform boxes, spectral increments and regularization,
//! recording every step.

use serde::Serialize;

use crate::corners::{count_corners, CornerMode, CornerWitness};
use crate::error::{Error, Result};
use crate::graph::{find_density_increment_with, marginal_increment, IncrementKind, IncrementResult, IncrementRoute};
use crate::partition::{uniform_rectangle_locate, PowerLaw};
use crate::profile::{ConstantsProfile, IncrementConstants, ProfileName};
use crate::uniformity::box_uniformity_exact;
use crate::zn::{self, marginal_profile, marginal_uniformity_check, ratio, GridBox, GridSet, LineSet, MarginalScale, Rational};

pub const DEFAULT_MAX_STEPS: usize = 64;

/// Energy-run iterations spent on each regularization.
const REGULARIZE_ITERATIONS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    MarginalIncrement,
    UniformCornerFound,
    SpectralIncrement,
    Regularize,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::MarginalIncrement => "marginal-increment",
            Branch::UniformCornerFound => "uniform-corner-found",
            Branch::SpectralIncrement => "spectral-increment",
            Branch::Regularize => "regularize",
        }
    }

    pub fn is_increment(self) -> bool {
        matches!(self, Branch::MarginalIncrement | Branch::SpectralIncrement)
    }
}

/// State after one step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub step: usize,
    pub branch: Branch,
    pub route: Option<IncrementRoute>,
    pub profile: ProfileName,
    pub width: usize,
    pub height: usize,
    /// Side lengths relative to the previous box.
    pub gamma1: f64,
    pub gamma2: f64,
    /// Side lengths relative to `N`.
    pub beta1: f64,
    pub beta2: f64,
    #[serde(serialize_with = "serialize_rational")]
    pub previous_density: Rational,
    #[serde(serialize_with = "serialize_rational")]
    pub density: Rational,
    /// Box uniformity measured on the box this step started from.
    pub measured_alpha: Option<f64>,
    pub xs: LineSet,
    pub ys: LineSet,
}

fn serialize_rational<S: serde::Serializer>(q: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

impl IterationRecord {
    pub fn density_f64(&self) -> f64 {
        zn::to_f64(&self.density)
    }

    /// Recounts `A` in the recorded box.
    pub fn replay(&self, a: &GridSet) -> Rational {
        let count = a.iter().filter(|&(k, m)| self.xs.contains(k) && self.ys.contains(m)).count();
        ratio(count, self.width * self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum HuntOutcome {
    Corner { witness: CornerWitness },
    IncrementExhausted,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hunt {
    pub modulus: usize,
    pub profile: ProfileName,
    pub max_steps: usize,
    pub outcome: HuntOutcome,
    pub trace: Vec<IterationRecord>,
}

impl Hunt {
    pub fn found_corner(&self) -> Option<CornerWitness> {
        match self.outcome {
            HuntOutcome::Corner { witness } => Some(witness),
            _ => None,
        }
    }

    /// Increment steps never lower the density, and strictly raise it under the toy profile.
    pub fn densities_monotone(&self) -> bool {
        self.trace.iter().all(|r| match r.branch {
            b if b.is_increment() && self.profile == ProfileName::Toy => r.density > r.previous_density,
            Branch::UniformCornerFound => r.density == r.previous_density,
            _ => r.density >= r.previous_density,
        })
    }

    pub fn boxes_shrink(&self) -> bool {
        self.trace.windows(2).all(|w| w[1].width <= w[0].width && w[1].height <= w[0].height)
    }

    pub fn replays(&self, a: &GridSet) -> bool {
        self.trace.iter().all(|r| r.replay(a) == r.density)
    }
}

struct Cursor<'a> {
    a: &'a GridSet,
    profile: &'a ConstantsProfile,
    bx: GridBox,
    inside: GridSet,
    density: Rational,
    max_steps: usize,
    trace: Vec<IterationRecord>,
}

impl Cursor<'_> {
    fn record(&mut self, branch: Branch, route: Option<IncrementRoute>, next: GridBox, measured_alpha: Option<f64>) {
        let n = self.a.modulus() as f64;
        let inside = self.a.intersect_box(&next);
        let density = ratio(inside.len(), next.size());
        self.trace.push(IterationRecord {
            step: self.trace.len() + 1,
            branch,
            route,
            profile: self.profile.name,
            width: next.width(),
            height: next.height(),
            gamma1: next.width() as f64 / self.bx.width() as f64,
            gamma2: next.height() as f64 / self.bx.height() as f64,
            beta1: next.width() as f64 / n,
            beta2: next.height() as f64 / n,
            previous_density: self.density.clone(),
            density: density.clone(),
            measured_alpha,
            xs: next.xs().clone(),
            ys: next.ys().clone(),
        });
        self.bx = next;
        self.inside = inside;
        self.density = density;
    }

    fn too_small(&self) -> bool {
        self.bx.width().min(self.bx.height()) < self.profile.min_side
    }

    fn delta(&self) -> f64 {
        zn::to_f64(&self.density)
    }

    /// Applies an increment, then tries to tidy the new box into uniform sides.
    fn advance(&mut self, branch: Branch, inc: &IncrementResult, measured: Option<f64>) -> Result<()> {
        let next = GridBox::new(inc.g1.clone(), inc.g2.clone())?;
        self.record(branch, Some(inc.route), next, measured);
        if !self.too_small() && self.trace.len() < self.max_steps {
            self.regularize()?;
        }
        Ok(())
    }

    fn regularize(&mut self) -> Result<()> {
        let delta = self.delta();
        let zeta = self.profile.zeta.at(delta);
        if !(zeta > 0.0 && zeta < 1.0) || self.inside.is_empty() {
            return Ok(());
        }
        let law = PowerLaw::new(self.profile.law_coefficient, self.profile.law_exponent)?;
        let located = match uniform_rectangle_locate(
            self.bx.xs(),
            self.bx.ys(),
            &self.inside,
            zeta,
            law,
            self.profile.name,
            REGULARIZE_ITERATIONS,
        ) {
            Ok(l) => l,
            Err(Error::InvalidParameter(_)) => return Ok(()),
            Err(e) => return Err(e),
        };
        let Some(found) = located.found else { return Ok(()) };
        if found.r1.len().min(found.r2.len()) < self.profile.min_side {
            return Ok(());
        }
        let next = GridBox::new(found.r1, found.r2)?;
        let count = self.inside.count_in_box(&next);
        if ratio(count, next.size()) >= self.density && next != self.bx {
            self.record(Branch::Regularize, None, next, None);
        }
        Ok(())
    }
}

/// Level below a measured uniformity, so that the increment search runs.
fn below(measured: f64) -> f64 {
    (measured / 2.0).clamp(f64::MIN_POSITIVE, 0.5)
}

/// Runs the density-increment loop on `A` until a corner turns up, no increment
/// remains, or `max_steps` steps have been taken.
pub fn corner_hunt(a: &GridSet, profile: &ConstantsProfile, max_steps: usize) -> Result<Hunt> {
    if a.is_empty() {
        return Err(Error::InvalidParameter("corner hunt needs a nonempty set".into()));
    }
    let n = a.modulus();
    let bx = GridBox::full(n);
    let mut cur = Cursor { a, profile, inside: a.clone(), density: a.density(), bx, max_steps, trace: Vec::new() };
    let outcome = loop {
        if cur.trace.len() >= max_steps {
            break HuntOutcome::MaxSteps;
        }
        if cur.too_small() {
            break HuntOutcome::IncrementExhausted;
        }
        let delta = cur.delta();
        let marginal_alpha = profile.marginal_alpha.at(delta);
        let prof = marginal_profile(&cur.inside, &cur.bx)?;
        let check = marginal_uniformity_check(&prof, &zn::from_f64(marginal_alpha)?, MarginalScale::Quadratic);
        if !check.both() {
            match marginal_increment(&cur.inside, &cur.bx, marginal_alpha, profile.name)? {
                Some(inc) if inc.verify(&cur.inside) && inc.kind == IncrementKind::Increment => {
                    cur.advance(Branch::MarginalIncrement, &inc, None)?;
                    continue;
                }
                _ => {}
            }
        }
        let measured = zn::to_f64(&box_uniformity_exact(&cur.inside, &cur.bx)?.alpha);
        let uniform_level = profile.uniformity_alpha.at(delta);
        let uniform = measured <= uniform_level;
        if uniform {
            if let Some(witness) = count_corners(&cur.inside, CornerMode::Grid).witness {
                if witness.verify(a, CornerMode::Grid) {
                    let same = cur.bx.clone();
                    cur.record(Branch::UniformCornerFound, None, same, Some(measured));
                    break HuntOutcome::Corner { witness };
                }
            }
        }
        let level = if uniform { below(measured) } else { uniform_level.clamp(f64::MIN_POSITIVE, 0.5) };
        let mut consts = IncrementConstants::for_box(profile.name, level, &cur.bx)?;
        consts.marginal_alpha = marginal_alpha;
        let inc = find_density_increment_with(&cur.inside, &cur.bx, &consts)?;
        if inc.kind != IncrementKind::Increment || !inc.verify(&cur.inside) {
            break HuntOutcome::IncrementExhausted;
        }
        let branch = match inc.route {
            IncrementRoute::MarginalRows | IncrementRoute::MarginalColumns => Branch::MarginalIncrement,
            _ => Branch::SpectralIncrement,
        };
        cur.advance(branch, &inc, Some(measured))?;
    };
    Ok(Hunt { modulus: n, profile: profile.name, max_steps, outcome, trace: cur.trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corners::{behrend_construct, embed_corner_free, EmbedRule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(n: usize, p: f64, seed: u64) -> GridSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GridSet::from_predicate(n, |_, _| rng.gen_bool(p)).unwrap()
    }

    /// Corner search independent of the library counter.
    fn has_corner(a: &GridSet) -> bool {
        let n = a.modulus();
        a.iter().any(|(k, m)| (1..n - k.max(m)).any(|d| a.contains(k + d, m) && a.contains(k, m + d)))
    }

    #[test]
    fn full_grid_has_a_corner_at_once() {
        let a = GridSet::full(16);
        let hunt = corner_hunt(&a, &ConstantsProfile::toy(), DEFAULT_MAX_STEPS).unwrap();
        let w = hunt.found_corner().unwrap();
        assert!(w.verify(&a, CornerMode::Grid));
        assert_eq!(hunt.trace.len(), 1);
        assert_eq!(hunt.trace[0].branch, Branch::UniformCornerFound);
    }

    #[test]
    fn empty_set_is_rejected() {
        assert!(corner_hunt(&GridSet::empty(8), &ConstantsProfile::toy(), 4).is_err());
    }

    #[test]
    fn random_dense_set_yields_verified_corner() {
        let a = random_set(48, 0.4, 11);
        let hunt = corner_hunt(&a, &ConstantsProfile::toy(), DEFAULT_MAX_STEPS).unwrap();
        let w = hunt.found_corner().expect("corner");
        let [p, q, r] = w.points(48, CornerMode::Grid);
        assert!(w.d > 0 && a.contains(p.0, p.1) && a.contains(q.0, q.1) && a.contains(r.0, r.1));
        assert!(hunt.replays(&a));
    }

    #[test]
    fn behrend_embedding_never_reports_a_corner() {
        let a1 = behrend_construct(20).unwrap().set;
        let a = embed_corner_free(&a1, 60, EmbedRule::Translation).unwrap();
        assert!(!has_corner(&a));
        let hunt = corner_hunt(&a, &ConstantsProfile::toy(), DEFAULT_MAX_STEPS).unwrap();
        assert_eq!(hunt.outcome, HuntOutcome::IncrementExhausted);
        assert!(hunt.trace.iter().any(|r| r.branch.is_increment()));
        assert!(hunt.densities_monotone());
        assert!(hunt.boxes_shrink());
        assert!(hunt.replays(&a));
    }

    #[test]
    fn step_cap_is_respected() {
        let a1 = behrend_construct(20).unwrap().set;
        let a = embed_corner_free(&a1, 60, EmbedRule::Translation).unwrap();
        let hunt = corner_hunt(&a, &ConstantsProfile::toy(), 1).unwrap();
        assert_eq!(hunt.outcome, HuntOutcome::MaxSteps);
        assert_eq!(hunt.trace.len(), 1);
    }

    #[test]
    fn hunts_are_deterministic() {
        let a = random_set(24, 0.2, 12);
        let p = ConstantsProfile::toy();
        assert_eq!(corner_hunt(&a, &p, 16).unwrap(), corner_hunt(&a, &p, 16).unwrap());
    }
}

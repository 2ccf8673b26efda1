//! Constants profiles.
//!
//! The `paper` profile carries the literal constants of the density-increment
//! argument. They are far below anything observable at grid sizes that fit in
//! memory, so every verdict computed against them is reported, never asserted.
//! The `toy` profile keeps the same shapes with constants that let every branch
//! fire at `n <= 64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zn::GridBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileName {
    Toy,
    Paper,
}

impl ProfileName {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileName::Toy => "toy",
            ProfileName::Paper => "paper",
        }
    }
}

impl std::str::FromStr for ProfileName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy" => Ok(ProfileName::Toy),
            "paper" => Ok(ProfileName::Paper),
            other => Err(Error::InvalidParameter(format!("unknown profile '{other}'"))),
        }
    }
}

/// `10^log10_coefficient * x^exponent`, kept in log form so that tiny values survive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerRule {
    pub log10_coefficient: f64,
    pub exponent: f64,
}

impl PowerRule {
    pub const fn new(log10_coefficient: f64, exponent: f64) -> Self {
        PowerRule { log10_coefficient, exponent }
    }

    pub fn log10_at(&self, x: f64) -> f64 {
        self.log10_coefficient + self.exponent * x.log10()
    }

    /// May underflow to zero.
    pub fn at(&self, x: f64) -> f64 {
        10f64.powf(self.log10_at(x))
    }
}

/// Thresholds used by one density-increment search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementConstants {
    pub profile: ProfileName,
    /// Uniformity level below which no increment is sought.
    pub alpha: f64,
    /// Marginal level used for the row and column conditions.
    pub marginal_alpha: f64,
    /// Guaranteed density gain.
    pub gain_floor: f64,
    /// Guaranteed side length, absolute.
    pub size_floor: f64,
    /// Level classes smaller than this are discarded.
    pub bad_class_floor: f64,
    /// Diameter of the level-set cells.
    pub level_step: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("uniformity level {alpha} must lie in (0, 1)")))
    }
}

impl IncrementConstants {
    /// Constants for an `n x n` square.
    pub fn square(profile: ProfileName, alpha: f64, n: usize) -> Result<Self> {
        check_alpha(alpha)?;
        let n = n as f64;
        Ok(match profile {
            ProfileName::Toy => Self::toy(alpha, n),
            ProfileName::Paper => IncrementConstants {
                profile,
                alpha,
                marginal_alpha: 2f64.powi(-56) * alpha.powi(20),
                gain_floor: 2f64.powi(-200) * alpha.powi(60),
                size_floor: 2f64.powi(-200) * alpha.powi(60) * n,
                bad_class_floor: 2f64.powi(-16) * alpha.powi(8) * n,
                level_step: alpha / 16.0,
            },
        })
    }

    /// Constants for a box whose sides need not agree.
    pub fn rectangle(profile: ProfileName, alpha: f64, width: usize, height: usize) -> Result<Self> {
        check_alpha(alpha)?;
        let side = width.min(height) as f64;
        Ok(match profile {
            ProfileName::Toy => Self::toy(alpha, side),
            ProfileName::Paper => IncrementConstants {
                profile,
                alpha,
                marginal_alpha: alpha / 10.0,
                gain_floor: 2f64.powi(-500) * alpha.powi(70),
                size_floor: 2f64.powi(-500) * alpha.powi(70) * side,
                bad_class_floor: 2f64.powi(-16) * alpha.powi(8) * side,
                level_step: alpha / 16.0,
            },
        })
    }

    /// Square constants for square boxes, rectangle constants otherwise.
    pub fn for_box(profile: ProfileName, alpha: f64, bx: &GridBox) -> Result<Self> {
        if bx.width() == bx.height() {
            Self::square(profile, alpha, bx.width())
        } else {
            Self::rectangle(profile, alpha, bx.width(), bx.height())
        }
    }

    fn toy(alpha: f64, side: f64) -> Self {
        let size_floor = alpha * side / 16.0;
        IncrementConstants {
            profile: ProfileName::Toy,
            alpha,
            marginal_alpha: alpha / 10.0,
            gain_floor: alpha.powi(3) / 64.0,
            size_floor,
            bad_class_floor: size_floor,
            level_step: 0.25,
        }
    }

    /// Gain guaranteed by the marginal step at level `zeta`.
    pub fn marginal_gain(zeta: f64) -> f64 {
        zeta.powi(3) / 8.0
    }
}

/// Closed forms in the density `delta` driving the corner hunt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsProfile {
    pub name: ProfileName,
    pub marginal_alpha: PowerRule,
    pub uniformity_alpha: PowerRule,
    pub zeta: PowerRule,
    pub gain_floor: PowerRule,
    /// Relative to the shorter side of the current box.
    pub size_floor: PowerRule,
    /// Least admissible `N`, as a rule in `delta` (sides of relative size one).
    pub modulus_threshold: PowerRule,
    /// Refinement law `K s^rho` for the regularization step.
    pub law_coefficient: f64,
    pub law_exponent: f64,
    /// Smallest box side still searched.
    pub min_side: usize,
}

impl ConstantsProfile {
    pub fn toy() -> Self {
        ConstantsProfile {
            name: ProfileName::Toy,
            marginal_alpha: PowerRule::new(-2f64.log10(), 1.0),
            uniformity_alpha: PowerRule::new(-4f64.log10(), 2.0),
            zeta: PowerRule::new(-8f64.log10(), 1.0),
            gain_floor: PowerRule::new(-4096f64.log10(), 3.0),
            size_floor: PowerRule::new(-16f64.log10(), 1.0),
            modulus_threshold: PowerRule::new(0.0, -1.0),
            law_coefficient: 0.25,
            law_exponent: 4.0,
            min_side: 2,
        }
    }

    pub fn paper() -> Self {
        ConstantsProfile {
            name: ProfileName::Paper,
            marginal_alpha: PowerRule::new(-108.0, 44.0),
            uniformity_alpha: PowerRule::new(-108.0, 44.0),
            zeta: PowerRule::new(-10000.0, 3500.0),
            gain_floor: PowerRule::new(-10000.0, 3500.0),
            size_floor: PowerRule::new(-10000.0, 3500.0),
            modulus_threshold: PowerRule::new(10.0, -4.0),
            law_coefficient: 1.0,
            law_exponent: 48.0,
            min_side: 2,
        }
    }

    pub fn named(name: ProfileName) -> Self {
        match name {
            ProfileName::Toy => Self::toy(),
            ProfileName::Paper => Self::paper(),
        }
    }
}

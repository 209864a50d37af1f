//! The `(I, s, m, k)` description of a diffusion and the verdict types shared
//! by the analysis modules.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{Interval, MeasureComponent, MeasureError, RadonMeasure};
use crate::scale::{ScaleError, ScaleFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("scale: {0}")]
    Scale(#[from] ScaleError),
    #[error("speed measure has no mass on {0}")]
    SpeedGap(Interval),
    #[error("degenerate interval {0}")]
    Degenerate(Interval),
}

/// Three-valued verdict; `Unknown` means certified bounds did not separate
/// the cases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriBool {
    Yes,
    No,
    Unknown,
}

impl TriBool {
    pub fn from_bool(b: bool) -> Self {
        if b {
            TriBool::Yes
        } else {
            TriBool::No
        }
    }

    pub fn and(self, other: TriBool) -> TriBool {
        match (self, other) {
            (TriBool::No, _) | (_, TriBool::No) => TriBool::No,
            (TriBool::Yes, TriBool::Yes) => TriBool::Yes,
            _ => TriBool::Unknown,
        }
    }

    pub fn not(self) -> TriBool {
        match self {
            TriBool::Yes => TriBool::No,
            TriBool::No => TriBool::Yes,
            TriBool::Unknown => TriBool::Unknown,
        }
    }
}

/// A decision that may carry the reason for a negative answer, or admit
/// that the question falls outside the decidable algebra.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum Verdict {
    Yes,
    No(String),
    Unsupported(String),
}

impl Verdict {
    pub fn is_yes(&self) -> bool {
        matches!(self, Verdict::Yes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// A diffusion on `interval` with scale `s`, speed `m` and killing `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    pub interval: Interval,
    pub scale: ScaleFunction,
    pub speed: RadonMeasure,
    pub killing: RadonMeasure,
}

impl DiffusionSpec {
    pub fn new(interval: Interval, scale: ScaleFunction, speed: RadonMeasure, killing: RadonMeasure) -> Result<Self, SpecError> {
        let spec = DiffusionSpec { interval, scale, speed, killing };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        self.interval.validate()?;
        if self.interval.is_degenerate() {
            return Err(SpecError::Degenerate(self.interval));
        }
        self.scale.validate_on(&self.interval)?;
        self.speed.validate_on(&self.interval)?;
        self.killing.validate_on(&self.interval)?;
        if let Some(gap) = self.speed.support_gap(&self.interval) {
            return Err(SpecError::SpeedGap(gap));
        }
        Ok(())
    }

    /// Standard Brownian motion on the line.
    pub fn brownian_line() -> Self {
        DiffusionSpec {
            interval: Interval::real_line(),
            scale: ScaleFunction::identity(),
            speed: RadonMeasure::lebesgue(),
            killing: RadonMeasure::zero(),
        }
    }

    /// Reflecting Brownian motion on `[0, 1]`.
    pub fn brownian_unit() -> Self {
        DiffusionSpec {
            interval: Interval::closed(0.0, 1.0),
            scale: ScaleFunction::identity_on(0.0, 1.0),
            speed: RadonMeasure::single(MeasureComponent::lebesgue_on(0.0, 1.0)),
            killing: RadonMeasure::zero(),
        }
    }

    /// `[0, 1]` with scale `x + c(x)` and Lebesgue speed.
    pub fn cantor_scale() -> Self {
        DiffusionSpec {
            interval: Interval::closed(0.0, 1.0),
            scale: ScaleFunction::lebesgue_plus_cantor(),
            speed: RadonMeasure::single(MeasureComponent::lebesgue_on(0.0, 1.0)),
            killing: RadonMeasure::zero(),
        }
    }

    /// Scale `ds = 1_G dy` with Lebesgue speed: on `(0, ∞)` for the
    /// positive-rational windows, on the line for the signed variant.
    pub fn rational_windows(signed: bool) -> Self {
        let (interval, speed) = if signed {
            (Interval::real_line(), RadonMeasure::lebesgue())
        } else {
            (
                Interval::open(0.0, f64::INFINITY),
                RadonMeasure::single(MeasureComponent::lebesgue_on(0.0, f64::INFINITY)),
            )
        };
        DiffusionSpec { interval, scale: ScaleFunction::rational_windows(signed), speed, killing: RadonMeasure::zero() }
    }

    pub fn is_strongly_local(&self) -> bool {
        self.killing.is_zero()
    }

    /// A fixed interior point.
    pub fn probe_point(&self) -> f64 {
        let (a, b) = (self.interval.lo, self.interval.hi);
        match (a.is_finite(), b.is_finite()) {
            (true, true) => 0.5 * (a + b),
            (true, false) => a + 1.0,
            (false, true) => b - 1.0,
            (false, false) => 0.0,
        }
    }

    pub fn endpoint(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.interval.lo,
            Side::Right => self.interval.hi,
        }
    }

    pub fn endpoint_included(&self, side: Side) -> bool {
        match side {
            Side::Left => self.interval.lo_included,
            Side::Right => self.interval.hi_included,
        }
    }

    /// Image under `x -> -x` (scale `-s(-x)`); the right endpoint becomes the left.
    pub fn reflect(&self) -> Self {
        DiffusionSpec {
            interval: self.interval.reflect(),
            scale: self.scale.reflect(),
            speed: self.speed.reflect(),
            killing: self.killing.reflect(),
        }
    }

    /// The same diffusion with scale `α s + β`.
    pub fn with_affine_scale(&self, alpha: f64, beta: f64) -> Self {
        DiffusionSpec { scale: self.scale.affine(alpha, beta), ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_specs_validate() {
        for s in [
            DiffusionSpec::brownian_line(),
            DiffusionSpec::brownian_unit(),
            DiffusionSpec::cantor_scale(),
            DiffusionSpec::rational_windows(false),
            DiffusionSpec::rational_windows(true),
        ] {
            s.validate().unwrap();
        }
    }

    #[test]
    fn literal_windows_not_increasing_on_line() {
        let mut s = DiffusionSpec::rational_windows(false);
        s.interval = Interval::real_line();
        s.speed = RadonMeasure::lebesgue();
        assert!(matches!(s.validate(), Err(SpecError::Scale(ScaleError::NotStrictlyIncreasing(_)))));
    }

    #[test]
    fn speed_gap_rejected() {
        let mut s = DiffusionSpec::brownian_unit();
        s.speed = RadonMeasure::single(MeasureComponent::density(vec![0.0, 0.4, 0.6, 1.0], vec![1.0, 0.0, 1.0]));
        assert_eq!(s.validate(), Err(SpecError::SpeedGap(Interval::open(0.4, 0.6))));
    }
}

//! Intervals, Radon measures built from a small component algebra, and
//! certified-error arithmetic on them.

mod approx;
pub mod cantor;
mod component;
mod interval;
mod pwa;
pub mod rationals;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use approx::Approx;
pub use cantor::cantor_function;
pub use component::MeasureComponent;
pub(crate) use component::power_integral;
pub use interval::{Interval, IntervalSet};
pub use pwa::{AffinePiece, PiecewiseLinear};
pub use rationals::{enumerate_rationals, Rational};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("invalid function: {0}")]
    InvalidFunction(String),
    #[error("invalid measure component: {0}")]
    InvalidComponent(String),
    #[error("integral diverges: {0}")]
    NonIntegrable(String),
    #[error("measure is not Radon on {0}")]
    NotRadon(String),
}

/// `IntervalSet::canonicalize` as a free function.
pub fn canonicalize(pieces: impl IntoIterator<Item = Interval>) -> IntervalSet {
    IntervalSet::canonicalize(pieces)
}

/// A finite formal sum of [`MeasureComponent`]s.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RadonMeasure {
    pub components: Vec<MeasureComponent>,
}

impl RadonMeasure {
    pub fn new(components: Vec<MeasureComponent>) -> Result<Self, MeasureError> {
        let m = RadonMeasure { components };
        m.validate()?;
        Ok(m)
    }

    pub fn zero() -> Self {
        RadonMeasure::default()
    }

    pub fn lebesgue() -> Self {
        RadonMeasure { components: vec![MeasureComponent::lebesgue_on(f64::NEG_INFINITY, f64::INFINITY)] }
    }

    pub fn single(c: MeasureComponent) -> Self {
        RadonMeasure { components: vec![c] }
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        self.components.iter().try_for_each(|c| c.validate())
    }

    /// Checks finiteness of mass on compact subsets of `i`.
    pub fn validate_on(&self, i: &Interval) -> Result<(), MeasureError> {
        self.validate()?;
        for c in &self.components {
            if let MeasureComponent::PowerDensity { anchor, exponent, support, .. } = c {
                if *exponent <= -1.0 && i.contains(*anchor) && support.closure_contains(*anchor) {
                    return Err(MeasureError::NotRadon(format!("{i}: power singularity at {anchor}")));
                }
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
            || self.components.iter().all(|c| match c {
                MeasureComponent::LebesgueDensity { values, .. } => values.iter().all(|v| *v == 0.0),
                _ => false,
            })
    }

    pub fn has_atoms(&self) -> bool {
        self.components.iter().any(|c| c.is_atom())
    }

    /// `μ(J)` with error at most `tol`, or a certified infinite verdict.
    pub fn mass(&self, j: &Interval, tol: f64) -> Approx {
        let n = self.components.len().max(1) as f64;
        let mut acc = Approx::ZERO;
        for c in &self.components {
            acc = acc + c.mass(j, tol / n);
            if acc.is_infinite() {
                return Approx::infinite();
            }
        }
        acc
    }

    /// `∫_J g dμ` for piecewise-affine `g`.
    pub fn integrate_kernel(&self, g: &PiecewiseLinear, j: &Interval, tol: f64) -> Result<Approx, MeasureError> {
        let pieces = g.pieces_on(j);
        let share = tol / (self.components.len().max(1) * pieces.len().max(1)) as f64;
        let mut acc = Approx::ZERO;
        for c in &self.components {
            for p in &pieces {
                let v = c.integrate_affine(p, share)?;
                acc = acc + v;
                if acc.value.is_nan() {
                    return Err(MeasureError::NonIntegrable("opposite infinite contributions".into()));
                }
            }
        }
        Ok(acc)
    }

    /// Union of the open intervals carrying positive Lebesgue-type density.
    pub fn open_support(&self) -> IntervalSet {
        IntervalSet::canonicalize(self.components.iter().flat_map(|c| c.open_support()))
    }

    /// First open subinterval of `i` that carries no mass, if any.
    pub fn support_gap(&self, i: &Interval) -> Option<Interval> {
        if i.is_degenerate() {
            let hit = self.components.iter().any(|c| matches!(c, MeasureComponent::Atom { location, .. } if *location == i.lo));
            return if hit { None } else { Some(*i) };
        }
        self.open_support()
            .complement_in(&i.interior())
            .pieces()
            .iter()
            .find(|p| p.length() > 0.0)
            .map(|p| p.interior())
    }

    /// Every open subinterval of `i` has positive mass.
    pub fn is_fully_supported(&self, i: &Interval) -> bool {
        self.support_gap(i).is_none()
    }

    pub fn reflect(&self) -> Self {
        RadonMeasure { components: self.components.iter().map(|c| c.reflect()).collect() }
    }

    pub fn scaled(&self, k: f64) -> Self {
        RadonMeasure { components: self.components.iter().map(|c| c.scaled(k)).collect() }
    }

    pub fn plus(&self, other: &RadonMeasure) -> Self {
        let mut components = self.components.clone();
        components.extend(other.components.iter().cloned());
        RadonMeasure { components }
    }

    /// Structural normal form: all densities merged into one, atoms merged by
    /// location, remaining components sorted.
    pub fn canonical(&self) -> Self {
        let mut densities = Vec::new();
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut rest = Vec::new();
        for c in &self.components {
            match c {
                MeasureComponent::LebesgueDensity { .. } => densities.push(c),
                MeasureComponent::Atom { location, mass } => match atoms.iter_mut().find(|(l, _)| l == location) {
                    Some(a) => a.1 += mass,
                    None => atoms.push((*location, *mass)),
                },
                _ => rest.push(c.clone()),
            }
        }
        let mut out = Vec::new();
        if let Some(d) = merge_densities(&densities) {
            out.push(d);
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.extend(atoms.into_iter().map(|(location, mass)| MeasureComponent::Atom { location, mass }));
        rest.sort_by_cached_key(|c| serde_json::to_string(c).unwrap_or_default());
        out.extend(rest);
        RadonMeasure { components: out }
    }
}

fn merge_densities(ds: &[&MeasureComponent]) -> Option<MeasureComponent> {
    let mut breaks: Vec<f64> = ds
        .iter()
        .flat_map(|d| match d {
            MeasureComponent::LebesgueDensity { breakpoints, .. } => breakpoints.clone(),
            _ => Vec::new(),
        })
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    if breaks.len() < 2 {
        return None;
    }
    let mut bp = vec![breaks[0]];
    let mut vals: Vec<f64> = Vec::new();
    for w in breaks.windows(2) {
        let mid = match (w[0].is_finite(), w[1].is_finite()) {
            (true, true) => 0.5 * (w[0] + w[1]),
            (false, true) => w[1] - 1.0,
            (true, false) => w[0] + 1.0,
            (false, false) => 0.0,
        };
        let v: f64 = ds.iter().map(|d| d.density_at(mid).unwrap_or(0.0)).sum();
        if vals.last() == Some(&v) {
            *bp.last_mut().unwrap() = w[1];
        } else {
            vals.push(v);
            bp.push(w[1]);
        }
    }
    while vals.first() == Some(&0.0) {
        vals.remove(0);
        bp.remove(0);
    }
    while vals.last() == Some(&0.0) {
        vals.pop();
        bp.pop();
    }
    if vals.is_empty() {
        return None;
    }
    Some(MeasureComponent::LebesgueDensity { breakpoints: bp, values: vals })
}

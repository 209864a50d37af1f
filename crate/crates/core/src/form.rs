//! Dirichlet forms of a diffusion: energy, form-domain membership, the unit
//! contraction and regular subspaces.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffusion::{DiffusionSpec, Side, TriBool, Verdict};
use crate::measure::{Approx, Interval, MeasureComponent, MeasureError, PiecewiseLinear, RadonMeasure};
use crate::scale::{restrict_scale, MarkedSet, ScaleError, ScaleFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("{0}")]
    Unsupported(String),
    #[error("I or m differ between the two specs: {0}")]
    MismatchedBase(String),
}

/// Piecewise-constant coefficient: `values[i]` on `[breakpoints[i], breakpoints[i+1])`,
/// zero outside. An empty coefficient is identically zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepCoeff {
    #[serde(with = "crate::serde_ext::ext_f64_vec")]
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepCoeff {
    pub fn zero() -> Self {
        StepCoeff::default()
    }

    pub fn constant(c: f64) -> Self {
        StepCoeff { breakpoints: vec![f64::NEG_INFINITY, f64::INFINITY], values: vec![c] }
    }

    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self, MeasureError> {
        let c = StepCoeff { breakpoints, values };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        if self.breakpoints.is_empty() && self.values.is_empty() {
            return Ok(());
        }
        PiecewiseLinear::step(self.breakpoints.clone(), self.values.clone()).map(|_| ())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    fn as_function(&self) -> Option<PiecewiseLinear> {
        if self.is_zero() {
            return None;
        }
        PiecewiseLinear::step(self.breakpoints.clone(), self.values.clone()).ok()
    }

    pub fn at(&self, x: f64) -> f64 {
        self.as_function().map_or(0.0, |f| f.eval(x))
    }

    /// `sup |f|` over `j`.
    pub fn sup_abs_on(&self, j: &Interval) -> f64 {
        self.as_function()
            .map(|f| f.pieces_on(j).iter().map(|p| p.intercept.abs()).fold(0.0, f64::max))
            .unwrap_or(0.0)
    }

    /// Pointwise product on the merged breakpoints.
    pub fn product(&self, other: &StepCoeff) -> StepCoeff {
        if self.is_zero() || other.is_zero() {
            return StepCoeff::zero();
        }
        let lo = self.breakpoints[0].max(other.breakpoints[0]);
        let hi = self.breakpoints.last().unwrap().min(*other.breakpoints.last().unwrap());
        if lo >= hi {
            return StepCoeff::zero();
        }
        let mut cuts: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(other.breakpoints.iter())
            .copied()
            .filter(|b| *b >= lo && *b <= hi)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let values = cuts.windows(2).map(|w| self.at(w[0]) * other.at(w[0])).collect();
        let values = fix_left_infinite(&cuts, values, |x| self.at(x) * other.at(x));
        StepCoeff { breakpoints: cuts, values }.simplified()
    }

    /// Merges equal neighbours and trims zero ends.
    pub fn simplified(mut self) -> StepCoeff {
        if self.values.is_empty() {
            return StepCoeff::zero();
        }
        let mut bp = vec![self.breakpoints[0]];
        let mut vals: Vec<f64> = Vec::new();
        for (i, v) in self.values.iter().enumerate() {
            if vals.last() == Some(v) {
                *bp.last_mut().unwrap() = self.breakpoints[i + 1];
            } else {
                vals.push(*v);
                bp.push(self.breakpoints[i + 1]);
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
            return StepCoeff::zero();
        }
        self.breakpoints = bp;
        self.values = vals;
        self
    }

    fn scaled(&self, k: f64) -> StepCoeff {
        StepCoeff { breakpoints: self.breakpoints.clone(), values: self.values.iter().map(|v| v * k).collect() }
    }
}

/// `at(w[0])` is wrong on a piece starting at `-inf`; re-sample those.
fn fix_left_infinite(cuts: &[f64], mut values: Vec<f64>, f: impl Fn(f64) -> f64) -> Vec<f64> {
    if let (Some(first), Some(second)) = (cuts.first(), cuts.get(1)) {
        if first.is_infinite() {
            values[0] = f(if second.is_finite() { second - 1.0 } else { 0.0 });
        }
    }
    values
}

/// `u(x) = base_val + Σ_i ∫_{base_x}^{x} coeffs[i] d(component i of ds)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormFunction {
    pub base_x: f64,
    pub base_val: f64,
    pub coeffs: Vec<StepCoeff>,
}

impl FormFunction {
    pub fn constant(c: f64, components: usize) -> Self {
        FormFunction { base_x: 0.0, base_val: c, coeffs: vec![StepCoeff::zero(); components] }
    }

    /// The scale function itself, shifted so that `u(base_x) = base_val`.
    pub fn of_scale(s: &ScaleFunction) -> Self {
        FormFunction {
            base_x: s.base_x,
            base_val: s.base_val,
            coeffs: vec![StepCoeff::constant(1.0); s.ds.components.len()],
        }
    }

    pub fn coeff(&self, i: usize) -> StepCoeff {
        self.coeffs.get(i).cloned().unwrap_or_default()
    }

    pub fn validate(&self, s: &ScaleFunction) -> Result<(), FormError> {
        if self.coeffs.len() > s.ds.components.len() {
            return Err(FormError::Unsupported(format!(
                "{} coefficients for {} scale components",
                self.coeffs.len(),
                s.ds.components.len()
            )));
        }
        if !self.base_x.is_finite() || !self.base_val.is_finite() {
            return Err(FormError::Unsupported("non-finite base".into()));
        }
        for c in &self.coeffs {
            c.validate()?;
        }
        Ok(())
    }

    /// Signed `∫_{(x,y)} Σ f_i d(comp_i)` for `x <= y`.
    pub fn increment(&self, s: &ScaleFunction, x: f64, y: f64, tol: f64) -> Result<Approx, MeasureError> {
        if x >= y {
            return Ok(Approx::ZERO);
        }
        let j = Interval::open(x, y);
        let active: Vec<_> = s
            .ds
            .components
            .iter()
            .enumerate()
            .filter_map(|(i, c)| self.coeff(i).as_function().map(|f| (c, f)))
            .collect();
        let share = tol / active.len().max(1) as f64;
        let mut acc = Approx::ZERO;
        for (c, f) in active {
            acc = acc + RadonMeasure::single(c.clone()).integrate_kernel(&f, &j, share)?;
            if acc.value.is_nan() {
                return Err(MeasureError::NonIntegrable("u has no limit".into()));
            }
        }
        Ok(acc)
    }

    /// Certified `u(x)`; limits at endpoints.
    pub fn eval(&self, s: &ScaleFunction, x: f64, tol: f64) -> Result<Approx, MeasureError> {
        let b = Approx::exact(self.base_val);
        if x >= self.base_x {
            Ok(b + self.increment(s, self.base_x, x, tol)?)
        } else {
            Ok(b - self.increment(s, x, self.base_x, tol)?)
        }
    }

    /// Upper bound on the oscillation of `u` over `j`.
    pub fn variation_bound(&self, s: &ScaleFunction, j: &Interval, tol: f64) -> f64 {
        s.ds
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let f = self.coeff(i).sup_abs_on(j);
                if f == 0.0 {
                    0.0
                } else {
                    f * c.mass(j, tol).hi()
                }
            })
            .sum()
    }

    /// Coefficient-wise linear combination `a u + b w`; `None` unless both
    /// share a base point.
    pub fn combine(&self, a: f64, other: &FormFunction, b: f64) -> Option<FormFunction> {
        if self.base_x != other.base_x {
            return None;
        }
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|i| {
                let (p, q) = (self.coeff(i), other.coeff(i));
                linear_combination(&p, a, &q, b)
            })
            .collect();
        Some(FormFunction { base_x: self.base_x, base_val: a * self.base_val + b * other.base_val, coeffs })
    }

    /// True when `u` is piecewise linear: only density components carry
    /// nonzero coefficients.
    fn is_piecewise_linear(&self, s: &ScaleFunction) -> bool {
        s.ds.components
            .iter()
            .enumerate()
            .all(|(i, c)| self.coeff(i).is_zero() || matches!(c, MeasureComponent::LebesgueDensity { .. }))
    }

    /// Breakpoints of `u` when it is piecewise linear.
    fn knots(&self, s: &ScaleFunction) -> Vec<f64> {
        let mut k: Vec<f64> = self.coeffs.iter().flat_map(|c| c.breakpoints.iter().copied()).collect();
        for c in &s.ds.components {
            if let MeasureComponent::LebesgueDensity { breakpoints, .. } = c {
                k.extend(breakpoints.iter().copied());
            }
        }
        k.retain(|x| x.is_finite());
        k.push(self.base_x);
        k
    }
}

fn linear_combination(p: &StepCoeff, a: f64, q: &StepCoeff, b: f64) -> StepCoeff {
    if q.is_zero() {
        return p.scaled(a).simplified();
    }
    if p.is_zero() {
        return q.scaled(b).simplified();
    }
    let mut cuts: Vec<f64> = p.breakpoints.iter().chain(q.breakpoints.iter()).copied().collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let f = |x: f64| a * p.at(x) + b * q.at(x);
    let values = cuts.windows(2).map(|w| f(w[0])).collect();
    let values = fix_left_infinite(&cuts, values, f);
    StepCoeff { breakpoints: cuts, values }.simplified()
}

/// `E(u, v) = Σ_i ∫ f_i g_i d(comp_i) + ∫ u v dk`.
pub fn energy(spec: &DiffusionSpec, u: &FormFunction, v: &FormFunction, tol: f64) -> Result<Approx, FormError> {
    let s = &spec.scale;
    let i_set = &spec.interval;
    let mut acc = Approx::ZERO;
    let n = s.ds.components.len();
    let share = tol / (2 * n.max(1)) as f64;
    for (i, c) in s.ds.components.iter().enumerate() {
        let prod = u.coeff(i).product(&v.coeff(i));
        if let Some(f) = prod.as_function() {
            acc = acc + RadonMeasure::single(c.clone()).integrate_kernel(&f, i_set, share)?;
        }
    }
    if !spec.killing.is_zero() {
        acc = acc + killing_term(spec, u, v, tol / 2.0)?;
    }
    Ok(acc)
}

fn killing_term(spec: &DiffusionSpec, u: &FormFunction, v: &FormFunction, tol: f64) -> Result<Approx, FormError> {
    let s = &spec.scale;
    let k = &spec.killing;
    let share = tol / k.components.len().max(1) as f64;
    let point_tol = share / 8.0;
    let mut acc = Approx::ZERO;
    for c in &k.components {
        match c {
            MeasureComponent::Atom { location, mass } => {
                if !spec.interval.contains(*location) {
                    continue;
                }
                let uu = u.eval(s, *location, point_tol)?;
                let vv = v.eval(s, *location, point_tol)?;
                acc = acc + (uu * vv).scale(*mass);
            }
            MeasureComponent::LebesgueDensity { breakpoints, .. }
                if u.is_piecewise_linear(s) && v.is_piecewise_linear(s) =>
            {
                let mut cuts = u.knots(s);
                cuts.extend(v.knots(s));
                cuts.extend(breakpoints.iter().copied());
                cuts.push(spec.interval.lo);
                cuts.push(spec.interval.hi);
                cuts.retain(|x| spec.interval.closure_contains(*x) || x.is_infinite());
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                for w in cuts.windows(2) {
                    let (p, q) = (w[0], w[1]);
                    let mid = if p.is_finite() && q.is_finite() {
                        0.5 * (p + q)
                    } else if p.is_finite() {
                        p + 1.0
                    } else if q.is_finite() {
                        q - 1.0
                    } else {
                        0.0
                    };
                    let rho = c.density_at(mid).unwrap_or(0.0);
                    if rho == 0.0 {
                        continue;
                    }
                    if !(p.is_finite() && q.is_finite()) {
                        let (u1, v1) = (u.eval(s, mid, point_tol)?, v.eval(s, mid, point_tol)?);
                        let (u2, v2) = (u.eval(s, mid + 1.0, point_tol)?, v.eval(s, mid + 1.0, point_tol)?);
                        if u1 == u2 && v1 == v2 {
                            let w = u1 * v1;
                            if w.value != 0.0 || w.error != 0.0 {
                                return Ok(Approx::exact(w.value.signum() * f64::INFINITY));
                            }
                            continue;
                        }
                        return Err(FormError::Unsupported("u v is unbounded on an infinite killing piece".into()));
                    }
                    // uv is quadratic on [p, q]: Simpson's rule is exact.
                    let (up, uq) = (u.eval(s, p, point_tol)?, u.eval(s, q, point_tol)?);
                    let (vp, vq) = (v.eval(s, p, point_tol)?, v.eval(s, q, point_tol)?);
                    let (um, vm) = ((up + uq).scale(0.5), (vp + vq).scale(0.5));
                    let simpson = up * vp + (um * vm).scale(4.0) + uq * vq;
                    acc = acc + simpson.scale(rho * (q - p) / 6.0) + Approx::new(0.0, 4.0 * f64::EPSILON * (q - p).abs());
                }
            }
            _ => acc = acc + cell_quadrature(spec, c, u, v, share)?,
        }
    }
    Ok(acc)
}

/// `∫ u v dc` over bounded support by cell sums with an oscillation bound.
fn cell_quadrature(
    spec: &DiffusionSpec,
    c: &MeasureComponent,
    u: &FormFunction,
    v: &FormFunction,
    tol: f64,
) -> Result<Approx, FormError> {
    let s = &spec.scale;
    let hull = c
        .hull()
        .map(|h| h.intersect(&spec.interval))
        .filter(|h| !h.is_empty())
        .ok_or_else(|| FormError::Unsupported("empty killing component".into()))?;
    if !hull.is_bounded() {
        return Err(FormError::Unsupported("singular killing component with unbounded support".into()));
    }
    let mut cells = 64usize;
    loop {
        let h = (hull.hi - hull.lo) / cells as f64;
        let mut acc = Approx::ZERO;
        for i in 0..cells {
            let lo = hull.lo + i as f64 * h;
            let hi = if i + 1 == cells { hull.hi } else { lo + h };
            let cell = Interval::new(lo, hi, true, i + 1 == cells).unwrap_or(Interval::closed(lo, hi));
            let mass = c.mass(&cell, tol / (4.0 * cells as f64));
            if mass.hi() == 0.0 {
                continue;
            }
            let (uc, vc) = (u.eval(s, lo, tol)?, v.eval(s, lo, tol)?);
            let (du, dv) = (u.variation_bound(s, &cell, tol), v.variation_bound(s, &cell, tol));
            let su = Approx::new(uc.value, uc.error + du);
            let sv = Approx::new(vc.value, vc.error + dv);
            acc = acc + su * sv * mass;
        }
        if acc.error <= tol || cells >= 1 << 14 {
            return Ok(acc);
        }
        cells *= 4;
    }
}

/// `a` is a regular boundary: not in `I`, `s(a)` finite and `m + k` finite near `a`.
pub fn regular_boundary(spec: &DiffusionSpec, side: Side) -> TriBool {
    if spec.endpoint_included(side) {
        return TriBool::No;
    }
    let a = spec.endpoint(side);
    if spec.scale.eval(a, 1e-9).is_infinite() {
        return TriBool::No;
    }
    let c = spec.probe_point();
    let near = match side {
        Side::Left => Interval::open(a, c),
        Side::Right => Interval::open(c, a),
    };
    let mass = spec.speed.mass(&near, 1e-9) + spec.killing.mass(&near, 1e-9);
    TriBool::from_bool(!mass.is_infinite())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainVariant {
    Full,
    ZeroBoundary,
}

fn midpoint(p: f64, q: f64) -> f64 {
    match (p.is_finite(), q.is_finite()) {
        (true, true) => 0.5 * (p + q),
        (true, false) => p + 1.0,
        (false, true) => q - 1.0,
        (false, false) => 0.0,
    }
}

fn sorted_cuts(mut cuts: Vec<f64>) -> Vec<f64> {
    cuts.retain(|x| !x.is_nan());
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts
}

/// Merged piecewise-constant Lebesgue density of a scale measure (windows
/// with a finite cutoff included), plus the remaining Lebesgue-type
/// components that have no piecewise-constant form.
struct LebesguePart {
    density: Option<MeasureComponent>,
    exotic: Vec<MeasureComponent>,
}

impl LebesguePart {
    fn of(ds: &RadonMeasure) -> Self {
        let mut dens = Vec::new();
        let mut exotic = Vec::new();
        for c in &ds.components {
            match c {
                MeasureComponent::LebesgueDensity { .. } => dens.push(c.clone()),
                MeasureComponent::RationalWindows { .. } => match c.as_density() {
                    Some(d) => dens.push(d),
                    None => exotic.push(c.clone()),
                },
                MeasureComponent::PowerDensity { .. } => exotic.push(c.clone()),
                _ => {}
            }
        }
        let density = RadonMeasure { components: dens }.canonical().components.into_iter().next();
        LebesguePart { density, exotic }
    }

    fn density_at(&self, x: f64) -> f64 {
        self.density.as_ref().and_then(|d| d.density_at(x)).unwrap_or(0.0)
    }

    fn exotic_at(&self, x: f64) -> Vec<String> {
        let mut v: Vec<String> = self
            .exotic
            .iter()
            .filter(|c| c.open_support().iter().any(|p| p.contains(x)))
            .map(|c| serde_json::to_string(c).unwrap_or_default())
            .collect();
        v.sort();
        v
    }

    fn cuts(&self) -> Vec<f64> {
        let mut cuts = Vec::new();
        if let Some(MeasureComponent::LebesgueDensity { breakpoints, .. }) = &self.density {
            cuts.extend(breakpoints.iter().copied());
        }
        for c in &self.exotic {
            for p in c.open_support() {
                cuts.push(p.lo);
                cuts.push(p.hi);
            }
        }
        cuts
    }
}

fn cantor_parts(ds: &RadonMeasure) -> Vec<(Interval, f64)> {
    ds.components
        .iter()
        .filter_map(|c| match c {
            MeasureComponent::CantorCopy { support, weight } => Some((*support, *weight)),
            _ => None,
        })
        .collect()
}

fn overlaps(a: &Interval, b: &Interval) -> bool {
    let o = a.interior().intersect(&b.interior());
    !o.is_empty() && o.length() > 0.0
}

/// Can `du` (over `s_u`) be written as `g ds` with `g ∈ L²(ds)`?
fn rewrite_over(spec_s: &ScaleFunction, s_u: &ScaleFunction, u: &FormFunction, within: &Interval) -> Verdict {
    let target = LebesguePart::of(&spec_s.ds);
    let target_cantor = cantor_parts(&spec_s.ds);
    for (j, comp) in s_u.ds.components.iter().enumerate() {
        let f = u.coeff(j);
        if f.is_zero() {
            continue;
        }
        match comp {
            MeasureComponent::Atom { .. } => return Verdict::Unsupported("atom in the scale of u".into()),
            MeasureComponent::CantorCopy { support, weight: _ } => {
                if target_cantor.iter().any(|(s, _)| s == support) {
                    continue;
                }
                if target_cantor.iter().any(|(s, _)| overlaps(s, support)) {
                    return Verdict::Unsupported("comparing non-identical overlapping Cantor copies".into());
                }
                return Verdict::No(format!(
                    "du has a Cantor part on {support} that is singular with respect to ds"
                ));
            }
            _ => {
                if spec_s.ds.components.contains(comp) {
                    continue;
                }
                // Lebesgue-type part of du: f ρ_u dλ against ρ_s dλ (+ exotic parts).
                let source = LebesguePart::of(&RadonMeasure::single(comp.clone()));
                let mut cuts = source.cuts();
                cuts.extend(target.cuts());
                cuts.extend(f.breakpoints.iter().copied());
                cuts.push(within.lo);
                cuts.push(within.hi);
                let cuts = sorted_cuts(cuts.into_iter().filter(|x| within.closure_contains(*x) || x.is_infinite()).collect());
                for w in cuts.windows(2) {
                    let (p, q) = (w[0], w[1]);
                    let x = midpoint(p, q);
                    if !within.contains(x) {
                        continue;
                    }
                    let fx = f.at(x);
                    let present = fx != 0.0
                        && (source.density_at(x) > 0.0 || !source.exotic_at(x).is_empty());
                    if !present {
                        continue;
                    }
                    let rho_s = target.density_at(x);
                    let target_exotic = !target.exotic_at(x).is_empty();
                    if rho_s == 0.0 {
                        if target_exotic {
                            return Verdict::Unsupported(format!("du/ds on ({p}, {q}) involves non-piecewise densities"));
                        }
                        return Verdict::No(format!("du charges ({p}, {q}) where ds has no absolutely continuous part"));
                    }
                    // ∫ (f ρ_u)² / ρ_s over the piece.
                    let sq = square_integral(comp, fx, rho_s, p, q);
                    if sq.is_infinite() {
                        if target_exotic {
                            return Verdict::Unsupported(format!("du/ds on ({p}, {q}) involves non-piecewise densities"));
                        }
                        return Verdict::No(format!("du/ds is not square-integrable on ({p}, {q})"));
                    }
                }
            }
        }
    }
    Verdict::Yes
}

/// `∫_p^q (f ρ_c)² / ρ_s dλ` for a Lebesgue-type component `c`.
fn square_integral(c: &MeasureComponent, f: f64, rho_s: f64, p: f64, q: f64) -> f64 {
    let k = f * f / rho_s;
    match c {
        MeasureComponent::PowerDensity { anchor, exponent, coeff, support } => {
            let piece = support.intersect(&Interval::open(p, q));
            if piece.is_empty() {
                return 0.0;
            }
            let (du, dv) = if support.lo >= *anchor {
                (piece.lo - anchor, piece.hi - anchor)
            } else {
                (anchor - piece.hi, anchor - piece.lo)
            };
            k * coeff * coeff * crate::measure::power_integral(2.0 * exponent, du, dv)
        }
        MeasureComponent::RationalWindows { weight, .. } => {
            // 1_G ≤ 1 and λ(G) ≤ 1
            k * weight * weight * (q - p).min(1.0)
        }
        _ => {
            let rho = c.density_at(midpoint(p, q)).unwrap_or(0.0);
            k * rho * rho * (q - p)
        }
    }
}

fn vanishes_near(u: &FormFunction, side: Side, a: f64) -> bool {
    u.coeffs.iter().filter(|c| !c.is_zero()).all(|c| match side {
        Side::Left => c.breakpoints[0] > a,
        Side::Right => *c.breakpoints.last().unwrap() < a,
    })
}

/// Whether `u`, given over the scale `s_u`, lies in the form domain of `spec`.
pub fn membership(spec: &DiffusionSpec, s_u: &ScaleFunction, u: &FormFunction, variant: DomainVariant) -> Verdict {
    let tol = 1e-9;
    match rewrite_over(&spec.scale, s_u, u, &spec.interval) {
        Verdict::Yes => {}
        other => return other,
    }
    // u ∈ L²(m + k), side by side around the probe point.
    let c = spec.probe_point();
    let mk = spec.speed.plus(&spec.killing);
    for side in [Side::Left, Side::Right] {
        let a = spec.endpoint(side);
        let near = match side {
            Side::Left => Interval::open(a, c),
            Side::Right => Interval::open(c, a),
        };
        let heavy = mk.mass(&near, tol).is_infinite();
        let ua = match u.eval(s_u, a, tol) {
            Ok(v) => v,
            Err(e) => return Verdict::Unsupported(format!("u has no limit at {a}: {e}")),
        };
        if ua.is_infinite() {
            if heavy {
                return Verdict::No(format!("u is unbounded near {a} where m + k has infinite mass"));
            }
            return Verdict::Unsupported(format!("u is unbounded near {a}"));
        }
        if heavy {
            if ua.abs_hi() > 0.0 && ua.value.abs() > ua.error {
                return Verdict::No(format!("u tends to {} at {a} where m + k has infinite mass", ua.value));
            }
            if !vanishes_near(u, side, a) {
                return Verdict::Unsupported(format!("cannot certify square-integrability of u near {a}"));
            }
        }
    }
    if variant == DomainVariant::ZeroBoundary {
        for side in [Side::Left, Side::Right] {
            if regular_boundary(spec, side) != TriBool::Yes {
                continue;
            }
            let a = spec.endpoint(side);
            let ua = match u.eval(s_u, a, 1e-12) {
                Ok(v) => v,
                Err(e) => return Verdict::Unsupported(e.to_string()),
            };
            if ua.value.abs() > ua.error {
                return Verdict::No(format!("u({a}) = {} but {a} is a regular boundary", ua.value));
            }
            if ua.error > 0.0 {
                return Verdict::Unsupported(format!("cannot certify u({a}) = 0"));
            }
        }
    }
    Verdict::Yes
}

/// Structural points of `u` over `s`: coefficient breakpoints and the
/// breakpoints of each scale component.
fn structure_points(s: &ScaleFunction, u: &FormFunction) -> Vec<f64> {
    let mut k: Vec<f64> = u.coeffs.iter().flat_map(|c| c.breakpoints.iter().copied()).collect();
    for c in &s.ds.components {
        match c {
            MeasureComponent::LebesgueDensity { breakpoints, .. } => k.extend(breakpoints.iter().copied()),
            MeasureComponent::CantorCopy { support, .. } | MeasureComponent::PowerDensity { support, .. } => {
                k.push(support.lo);
                k.push(support.hi);
            }
            _ => {}
        }
    }
    k.push(u.base_x);
    k.push(f64::NEG_INFINITY);
    k.push(f64::INFINITY);
    sorted_cuts(k)
}

struct Contraction<'a> {
    s: &'a ScaleFunction,
    u: &'a FormFunction,
    tol: f64,
    /// `(lo, hi, keep)` in increasing order.
    cells: Vec<(f64, f64, bool)>,
}

impl Contraction<'_> {
    fn value(&self, x: f64) -> Result<Approx, MeasureError> {
        self.u.eval(self.s, x, self.tol * 1e-3)
    }

    /// Signs of the coefficients active on `(p, q)`: `(has positive, has negative)`.
    fn signs(&self, p: f64, q: f64) -> (bool, bool) {
        let x = midpoint(p, q);
        let j = Interval::open(p, q);
        let mut pos = false;
        let mut neg = false;
        for (i, c) in self.s.ds.components.iter().enumerate() {
            let f = self.u.coeff(i).at(x);
            if f == 0.0 || c.mass(&j, self.tol).hi() == 0.0 {
                continue;
            }
            if f > 0.0 {
                pos = true;
            } else {
                neg = true;
            }
        }
        (pos, neg)
    }

    /// Range classification of `[lo, hi]` against `[0, 1]` with slack `tol`.
    fn classify(&self, lo: f64, hi: f64) -> Option<bool> {
        if lo >= -self.tol && hi <= 1.0 + self.tol {
            Some(true)
        } else if hi <= self.tol || lo >= 1.0 - self.tol {
            Some(false)
        } else {
            None
        }
    }

    /// Point in `(p, q)` where the monotone `u` crosses `level`.
    fn crossing(&self, mut p: f64, mut q: f64, level: f64, increasing: bool) -> Result<f64, MeasureError> {
        let below = |v: f64| if increasing { v < level } else { v > level };
        if p.is_infinite() {
            let mut step = 1.0;
            let mut x = q - step;
            while below(self.value(x)?.value) == below(self.value(q)?.value) && step < 1e300 {
                step *= 2.0;
                x = q - step;
            }
            p = x;
        }
        if q.is_infinite() {
            let mut step = 1.0;
            let mut x = p + step;
            while below(self.value(x)?.value) == below(self.value(p)?.value) && step < 1e300 {
                step *= 2.0;
                x = p + step;
            }
            q = x;
        }
        for _ in 0..200 {
            let mid = 0.5 * (p + q);
            if mid <= p || mid >= q || self.u.variation_bound(self.s, &Interval::open(p, q), self.tol) <= self.tol * 1e-3 {
                break;
            }
            if below(self.value(mid)?.value) {
                p = mid;
            } else {
                q = mid;
            }
        }
        Ok(0.5 * (p + q))
    }

    fn process(&mut self, p: f64, q: f64, depth: u32) -> Result<(), MeasureError> {
        let (up, uq) = (self.value(p)?, self.value(q)?);
        let (pos, neg) = self.signs(p, q);
        if !(pos && neg) {
            let (lo, hi) = (up.value.min(uq.value), up.value.max(uq.value));
            if let Some(keep) = self.classify(lo, hi) {
                self.cells.push((p, q, keep));
                return Ok(());
            }
            let increasing = uq.value > up.value;
            let level = if lo < 0.0 && hi > 0.0 { 0.0 } else { 1.0 };
            let x = self.crossing(p, q, level, increasing)?;
            if x <= p || x >= q || depth >= 60 {
                let keep = self.value(midpoint(p, q))?.value;
                self.cells.push((p, q, keep > 0.0 && keep < 1.0));
                return Ok(());
            }
            self.process(p, x, depth + 1)?;
            return self.process(x, q, depth + 1);
        }
        if p.is_infinite() || q.is_infinite() {
            return Err(MeasureError::NonIntegrable("u oscillates on an unbounded cell".into()));
        }
        let var = self.u.variation_bound(self.s, &Interval::open(p, q), self.tol);
        if let Some(keep) = self.classify(up.value - var, up.value + var) {
            self.cells.push((p, q, keep));
            return Ok(());
        }
        let mid = 0.5 * (p + q);
        if depth >= 40 || mid <= p || mid >= q {
            let v = self.value(mid)?.value;
            self.cells.push((p, q, v > 0.0 && v < 1.0));
            return Ok(());
        }
        self.process(p, mid, depth + 1)?;
        self.process(mid, q, depth + 1)
    }
}

/// `(0 ∨ u) ∧ 1`: coefficients are zeroed outside `{0 < u < 1}`, with
/// crossing points located by bisection.
pub fn unit_contraction(s: &ScaleFunction, u: &FormFunction, tol: f64) -> Result<FormFunction, FormError> {
    let points = structure_points(s, u);
    let mut c = Contraction { s, u, tol, cells: Vec::new() };
    for w in points.windows(2) {
        c.process(w[0], w[1], 0)?;
    }
    let mut cuts = vec![c.cells[0].0];
    cuts.extend(c.cells.iter().map(|cell| cell.1));
    let coeffs = (0..s.ds.components.len())
        .map(|i| {
            let f = u.coeff(i);
            if f.is_zero() {
                return StepCoeff::zero();
            }
            let values =
                c.cells.iter().map(|&(p, q, keep)| if keep { f.at(midpoint(p, q)) } else { 0.0 }).collect();
            StepCoeff { breakpoints: cuts.clone(), values }.simplified()
        })
        .collect();
    let base = c.value(u.base_x)?.value.clamp(0.0, 1.0);
    Ok(FormFunction { base_x: u.base_x, base_val: base, coeffs })
}

/// Whether `sub` is a regular subspace of `sup`: same killing measure and
/// `d(sub.s) = 1_B d(sup.s)` for a Borel set `B`, decided on the component
/// algebra.
pub fn is_regular_subspace(sub: &DiffusionSpec, sup: &DiffusionSpec) -> Result<Verdict, FormError> {
    if sub.interval != sup.interval {
        return Err(FormError::MismatchedBase(format!("intervals {} and {}", sub.interval, sup.interval)));
    }
    if sub.speed.canonical() != sup.speed.canonical() {
        return Err(FormError::MismatchedBase("speed measures differ".into()));
    }
    if sub.killing.canonical() != sup.killing.canonical() {
        return Ok(Verdict::No("killing measures differ".into()));
    }
    let within = &sup.interval;
    // Singular parts: every Cantor copy of sub must be one of sup's.
    let (c_sub, c_sup) = (cantor_parts(&sub.scale.ds), cantor_parts(&sup.scale.ds));
    for (support, w) in &c_sub {
        if overlaps(support, within) || within.is_degenerate() {
            match c_sup.iter().find(|(s, _)| s == support) {
                Some((_, w1)) if w1 == w => {}
                Some((_, w1)) => {
                    return Ok(Verdict::No(format!(
                        "density {} on the Cantor copy over {support}",
                        w / w1
                    )))
                }
                None if c_sup.iter().any(|(s, _)| overlaps(s, support)) => {
                    return Ok(Verdict::Unsupported("overlapping non-identical Cantor copies".into()))
                }
                None => return Ok(Verdict::No(format!("Cantor copy over {support} is singular with respect to sup"))),
            }
        }
    }
    // Lebesgue-type parts, piece by piece.
    let (l_sub, l_sup) = (LebesguePart::of(&sub.scale.ds), LebesguePart::of(&sup.scale.ds));
    let mut cuts = l_sub.cuts();
    cuts.extend(l_sup.cuts());
    cuts.push(within.lo);
    cuts.push(within.hi);
    let cuts = sorted_cuts(cuts.into_iter().filter(|x| within.closure_contains(*x) || x.is_infinite()).collect());
    for w in cuts.windows(2) {
        let x = midpoint(w[0], w[1]);
        if !within.contains(x) {
            continue;
        }
        let (d2, d1) = (l_sub.density_at(x), l_sup.density_at(x));
        let (e2, e1) = (l_sub.exotic_at(x), l_sup.exotic_at(x));
        let piece = format!("({}, {})", w[0], w[1]);
        let ok = if e1.is_empty() && e2.is_empty() {
            d2 == 0.0 || d2 == d1
        } else if e1 == e2 {
            d2 == d1
        } else if e2.is_empty() {
            d2 == 0.0
        } else if e1.is_empty() {
            // sub carries weight·1_G (or a power law) where sup has a constant density
            let single_window = l_sub.exotic.iter().filter(|c| c.open_support().iter().any(|p| p.contains(x))).all(
                |c| matches!(c, MeasureComponent::RationalWindows { weight, .. } if *weight == d1),
            );
            e2.len() == 1 && d2 == 0.0 && single_window
        } else {
            return Ok(Verdict::Unsupported(format!("different non-piecewise densities on {piece}")));
        };
        if !ok {
            return Ok(Verdict::No(format!("d(sub.s)/d(sup.s) is not 0 or 1 on {piece}")));
        }
    }
    Ok(Verdict::Yes)
}

/// `(I, s₀, m, k)` with `ds₀ = 1_{A^c} ds`.
pub fn subspace_from_set(sup: &DiffusionSpec, a: &MarkedSet) -> Result<DiffusionSpec, ScaleError> {
    let scale = restrict_scale(&sup.scale, a, &sup.interval)?;
    Ok(DiffusionSpec { scale, ..sup.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::IntervalSet;

    fn cantor_fn() -> FormFunction {
        FormFunction { base_x: 0.0, base_val: 0.0, coeffs: vec![StepCoeff::zero(), StepCoeff::constant(1.0)] }
    }

    fn unit_open() -> DiffusionSpec {
        DiffusionSpec {
            interval: Interval::open(0.0, 1.0),
            ..DiffusionSpec::brownian_unit()
        }
    }

    #[test]
    fn energy_of_cantor_scale_examples() {
        let spec = DiffusionSpec::cantor_scale();
        let s = FormFunction::of_scale(&spec.scale);
        let e = energy(&spec, &s, &s, 1e-9).unwrap();
        assert!((e.value - 2.0).abs() <= 1e-9 && e.error <= 1e-9, "{e}");
        let c = cantor_fn();
        let e = energy(&spec, &c, &c, 1e-9).unwrap();
        assert!((e.value - 1.0).abs() <= 1e-9, "{e}");
        let k = FormFunction::constant(3.0, 2);
        assert_eq!(energy(&spec, &k, &k, 1e-9).unwrap().value, 0.0);
    }

    #[test]
    fn regular_boundary_examples() {
        assert_eq!(regular_boundary(&DiffusionSpec::brownian_line(), Side::Left), TriBool::No);
        assert_eq!(regular_boundary(&DiffusionSpec::brownian_line(), Side::Right), TriBool::No);
        assert_eq!(regular_boundary(&unit_open(), Side::Left), TriBool::Yes);
        assert_eq!(regular_boundary(&DiffusionSpec::brownian_unit(), Side::Left), TriBool::No);
    }

    #[test]
    fn cantor_function_membership() {
        let c = cantor_fn();
        let s_u = ScaleFunction::lebesgue_plus_cantor();
        assert_eq!(membership(&DiffusionSpec::cantor_scale(), &s_u, &c, DomainVariant::Full), Verdict::Yes);
        let v = membership(&DiffusionSpec::brownian_unit(), &s_u, &c, DomainVariant::Full);
        assert!(matches!(v, Verdict::No(_)), "{v:?}");
    }

    #[test]
    fn boundary_clause() {
        let spec = unit_open();
        let u = FormFunction::of_scale(&spec.scale);
        assert_eq!(membership(&spec, &spec.scale, &u, DomainVariant::Full), Verdict::Yes);
        let v = membership(&spec, &spec.scale, &u, DomainVariant::ZeroBoundary);
        assert!(matches!(v, Verdict::No(_)), "{v:?}");
    }

    #[test]
    fn contraction_clips_slope_two() {
        let spec = DiffusionSpec::brownian_unit();
        let u = FormFunction { base_x: 0.0, base_val: 0.0, coeffs: vec![StepCoeff::new(vec![0.0, 1.0], vec![2.0]).unwrap()] };
        let eu = energy(&spec, &u, &u, 1e-12).unwrap();
        assert!((eu.value - 4.0).abs() < 1e-12);
        let v = unit_contraction(&spec.scale, &u, 1e-12).unwrap();
        let ev = energy(&spec, &v, &v, 1e-12).unwrap();
        assert!((ev.value - 2.0).abs() < 1e-9, "{ev}");
        let top = v.eval(&spec.scale, 0.9, 1e-12).unwrap();
        assert!((top.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn contraction_of_constant() {
        let spec = DiffusionSpec::brownian_unit();
        let u = FormFunction::constant(5.0, 1);
        let v = unit_contraction(&spec.scale, &u, 1e-12).unwrap();
        assert_eq!(v.base_val, 1.0);
        assert!(v.coeffs.iter().all(StepCoeff::is_zero));
    }

    #[test]
    fn subspace_examples() {
        let sub = DiffusionSpec::brownian_unit();
        let sup = DiffusionSpec::cantor_scale();
        assert_eq!(is_regular_subspace(&sub, &sup).unwrap(), Verdict::Yes);
        let double = sub.with_affine_scale(2.0, 0.0);
        assert!(matches!(is_regular_subspace(&double, &sub).unwrap(), Verdict::No(_)));
        let mut half = sup.clone();
        half.scale.ds.components[1] = MeasureComponent::CantorCopy { support: Interval::closed(0.0, 1.0), weight: 0.5 };
        assert!(matches!(is_regular_subspace(&half, &sup).unwrap(), Verdict::No(_)));
        assert!(matches!(
            is_regular_subspace(&DiffusionSpec::brownian_line(), &sup),
            Err(FormError::MismatchedBase(_))
        ));
    }

    #[test]
    fn windows_scale_is_subspace_of_brownian() {
        let mut sub = DiffusionSpec::rational_windows(true);
        sub.speed = RadonMeasure::lebesgue();
        assert_eq!(is_regular_subspace(&sub, &DiffusionSpec::brownian_line()).unwrap(), Verdict::Yes);
    }

    #[test]
    fn constructor_examples() {
        let sup = DiffusionSpec::cantor_scale();
        let sub = subspace_from_set(&sup, &MarkedSet::cantor(Interval::closed(0.0, 1.0))).unwrap();
        assert_eq!(sub.scale.ds, DiffusionSpec::brownian_unit().scale.ds);
        assert_eq!(is_regular_subspace(&sub, &sup).unwrap(), Verdict::Yes);
        let same = subspace_from_set(&sup, &MarkedSet::default()).unwrap();
        assert_eq!(same, sup);
        let a = MarkedSet::from_intervals(IntervalSet::canonicalize([Interval::open(0.2, 0.3)]));
        let line = DiffusionSpec::brownian_line();
        assert!(matches!(subspace_from_set(&line, &a), Err(ScaleError::ConstantOnGap(_))));
    }
}

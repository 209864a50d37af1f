//! Endpoint classification, dissipativity, recurrence and mean exit times.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffusion::{DiffusionSpec, Side, TriBool};
use crate::measure::cantor::GAMMA;
use crate::measure::{Approx, Interval, MeasureComponent, MeasureError, PiecewiseLinear, RadonMeasure};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Mass tolerances tried in turn until a dissipativity verdict separates.
pub const TOL_LADDER: [f64; 4] = [1e-3, 1e-6, 1e-9, 1e-12];

/// Explicit ladder cells before the power-law envelope takes over.
const MIN_CELLS: u32 = 40;
const MAX_CELLS: u32 = 1000;
const SUBCELLS: u32 = 16;

/// Exponent used to dominate exponentially thin window tails.
const WINDOW_DECAY: f64 = 64.0;

const EPS: f64 = f64::EPSILON;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundaryError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("points must satisfy a < x < b inside the interval: {0}")]
    BadPoints(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryClass {
    /// Finite endpoint belonging to the interval.
    First,
    /// Excluded endpoint with `|s| = ∞` there.
    Second,
    /// Excluded endpoint with finite scale limit.
    Third,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointReport {
    pub class: BoundaryClass,
    pub dissipative: TriBool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub left: EndpointReport,
    pub right: EndpointReport,
    pub recurrent: TriBool,
    pub transient: TriBool,
    pub conservative: TriBool,
    pub strongly_local: bool,
}

/// Certified enclosure `[lo, hi]` of a nonnegative quantity; `hi` may be
/// infinite when only a lower bound is known.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    #[serde(with = "crate::serde_ext::ext_f64")]
    pub lo: f64,
    #[serde(with = "crate::serde_ext::ext_f64")]
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Self {
        Bracket { lo: lo.max(0.0), hi }
    }

    pub fn from_approx(a: Approx) -> Self {
        if a.is_infinite() {
            Bracket { lo: f64::INFINITY, hi: f64::INFINITY }
        } else {
            Bracket::new(a.lo(), a.hi())
        }
    }

    pub fn is_finite(&self) -> bool {
        self.hi.is_finite()
    }

    pub fn is_infinite(&self) -> bool {
        self.lo == f64::INFINITY
    }

    /// `Yes` when certainly finite, `No` when certainly infinite.
    pub fn finiteness(&self) -> TriBool {
        if self.is_finite() {
            TriBool::Yes
        } else if self.is_infinite() {
            TriBool::No
        } else {
            TriBool::Unknown
        }
    }

    pub fn add(self, o: Bracket) -> Bracket {
        Bracket { lo: down(self.lo + o.lo), hi: up(self.hi + o.hi) }
    }
}

fn up(x: f64) -> f64 {
    if x.is_finite() {
        x + 2.0 * EPS * x.abs() + f64::MIN_POSITIVE
    } else {
        x
    }
}

fn down(x: f64) -> f64 {
    if x.is_finite() {
        (x - 2.0 * EPS * x.abs()).max(0.0)
    } else {
        x
    }
}

/// Product of two nonnegative enclosures.
fn product(a: Approx, b: Approx) -> Bracket {
    let lo = if a.is_infinite() || b.is_infinite() { 0.0 } else { down(a.lo().max(0.0) * b.lo().max(0.0)) };
    let hi = if a.is_infinite() || b.is_infinite() { f64::INFINITY } else { up(a.hi() * b.hi()) };
    Bracket::new(lo, hi)
}

fn open_closed(lo: f64, hi: f64) -> Interval {
    Interval { lo, hi, lo_included: false, hi_included: true }
}

/// Constant-density pieces `(lo, hi, ρ)` covering `(lo, hi)`, or `None` when
/// a component other than a piecewise-constant density charges it.
fn density_pieces(mu: &RadonMeasure, lo: f64, hi: f64, tol: f64) -> Option<Vec<(f64, f64, f64)>> {
    let j = Interval::open(lo, hi);
    let mut dens = Vec::new();
    for c in &mu.components {
        let c = c.as_density().unwrap_or_else(|| c.clone());
        match c {
            MeasureComponent::LebesgueDensity { .. } => dens.push(c),
            _ if c.mass(&j, tol).hi() > 0.0 => return None,
            _ => {}
        }
    }
    let mut knots = vec![lo, hi];
    for d in &dens {
        if let MeasureComponent::LebesgueDensity { breakpoints, .. } = d {
            knots.extend(breakpoints.iter().filter(|b| **b > lo && **b < hi));
        }
    }
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let pieces = knots
        .windows(2)
        .map(|w| {
            let mid = if w[0].is_finite() { 0.5 * (w[0] + w[1]) } else { w[1] - 1.0 };
            let rho: f64 = dens.iter().map(|d| d.density_at(mid).unwrap_or(0.0)).sum();
            (w[0], w[1], rho)
        })
        .collect();
    Some(pieces)
}

/// `z -> μ((lo, z))` from density pieces, with a pointwise error bound per
/// piece. The first piece vanishes exactly at `lo`.
fn cdf_pl(pieces: &[(f64, f64, f64)]) -> (PiecewiseLinear, Vec<f64>) {
    let mut breaks = vec![pieces[0].0];
    let (mut slopes, mut intercepts, mut etas) = (Vec::new(), Vec::new(), Vec::new());
    let mut acc = Approx::ZERO;
    for (i, &(k0, k1, rho)) in pieces.iter().enumerate() {
        let b = if i == 0 { -(rho * k0) } else { acc.value - rho * k0 };
        slopes.push(rho);
        intercepts.push(b);
        etas.push(acc.error + 2.0 * EPS * (acc.value.abs() + rho * k0.abs()));
        acc = acc + (Approx::exact(k1) - Approx::exact(k0)).scale(rho);
        breaks.push(k1);
    }
    (PiecewiseLinear::new(breaks, slopes, intercepts).expect("finite knots"), etas)
}

/// `y -> μ((y, hi))` from density pieces; the first piece may be unbounded.
fn tail_pl(pieces: &[(f64, f64, f64)]) -> (PiecewiseLinear, Vec<f64>) {
    let n = pieces.len();
    let mut slopes = vec![0.0; n];
    let mut intercepts = vec![0.0; n];
    let mut etas = vec![0.0; n];
    let mut acc = Approx::ZERO;
    for i in (0..n).rev() {
        let (k0, k1, rho) = pieces[i];
        slopes[i] = -rho;
        intercepts[i] = acc.value + rho * k1;
        etas[i] = acc.error + 2.0 * EPS * (acc.value.abs() + rho * k1.abs());
        if k0.is_finite() {
            acc = acc + (Approx::exact(k1) - Approx::exact(k0)).scale(rho);
        }
    }
    let mut breaks: Vec<f64> = pieces.iter().map(|p| p.0).collect();
    breaks.push(pieces[n - 1].1);
    (PiecewiseLinear::new(breaks, slopes, intercepts).expect("finite coefficients"), etas)
}

/// `∫_{(lo, hi)} g dν` plus the representation error of `g`.
fn integrate_pl(nu: &RadonMeasure, g: &(PiecewiseLinear, Vec<f64>), lo: f64, hi: f64, tol: f64) -> Bracket {
    let (pl, etas) = g;
    let v = match nu.integrate_kernel(pl, &Interval::open(lo, hi), tol) {
        Ok(v) => v,
        Err(_) => return Bracket::new(0.0, f64::INFINITY),
    };
    if v.is_infinite() {
        return Bracket::from_approx(v);
    }
    let mut slack = 0.0;
    for (w, eta) in pl.breaks().windows(2).zip(etas) {
        if *eta == 0.0 {
            continue;
        }
        let on = Interval { lo: w[0], hi: w[1], lo_included: w[0].is_finite(), hi_included: w[1].is_finite() };
        let mass = nu.mass(&on.intersect(&Interval::open(lo, hi)), tol);
        // A piece of infinite mass is the one touching the endpoint, where
        // the integrand is represented exactly.
        if !mass.is_infinite() {
            slack += eta * mass.hi();
        }
    }
    let b = Bracket::from_approx(v + Approx::new(0.0, slack));
    Bracket::new(b.lo, up(b.hi))
}

/// `up * τ^exp` and `low * τ^exp` bound a quantity at ladder scale `τ`.
#[derive(Clone, Copy, Debug)]
struct Term {
    up: f64,
    low: f64,
    exp: f64,
}

impl Term {
    fn new(up: f64, low: f64, exp: f64) -> Self {
        Term { up, low, exp }
    }

    fn infinite() -> Self {
        Term { up: f64::INFINITY, low: f64::INFINITY, exp: 0.0 }
    }
}

/// Envelopes beyond the last explicit ladder point: of the distribution
/// function `μ((a, x_j))` and of the cell masses `μ(C_j)`.
#[derive(Default)]
struct Envelope {
    cdf: Vec<Term>,
    cell: Vec<Term>,
}

impl Envelope {
    fn push(&mut self, cdf: Term, cell: Term) {
        self.cdf.push(cdf);
        self.cell.push(cell);
    }
}

/// Points `x_0 = c > x_1 > ...` accumulating at the left endpoint `a`:
/// halving distances when `a` is finite, doubling steps when `a = -∞`.
struct Ladder {
    a: f64,
    c: f64,
    cells: u32,
}

impl Ladder {
    fn tau(&self, j: u32) -> f64 {
        if self.a.is_finite() {
            (self.c - self.a) * 0.5f64.powi(j as i32)
        } else {
            2f64.powi(j as i32)
        }
    }

    fn point(&self, j: u32) -> f64 {
        if j == 0 {
            self.c
        } else if self.a.is_finite() {
            self.a + self.tau(j)
        } else {
            self.c - (self.tau(j) - 1.0)
        }
    }

    fn ratio(&self) -> f64 {
        if self.a.is_finite() {
            0.5
        } else {
            2.0
        }
    }

    /// Chooses the number of cells so that the tail region holds no
    /// breakpoint of either measure.
    fn new(mu: &RadonMeasure, nu: &RadonMeasure, a: f64, c: f64) -> Option<Ladder> {
        let mut pts = structural_points(mu);
        pts.extend(structural_points(nu));
        let mut l = Ladder { a, c, cells: MIN_CELLS };
        if a.is_finite() {
            let first = pts.iter().copied().filter(|p| *p > a).fold(f64::INFINITY, f64::min);
            while l.point(l.cells) >= first {
                l.cells += 1;
                if l.cells > MAX_CELLS {
                    return None;
                }
            }
            (l.point(l.cells) > a).then_some(l)
        } else {
            let lowest = pts.iter().copied().fold(f64::INFINITY, f64::min);
            let reach = anchor_reach(mu, c).max(anchor_reach(nu, c));
            while l.point(l.cells) >= lowest || l.tau(l.cells) < (4.0 * (reach + 1.0)).max(128.0) {
                l.cells += 1;
                if l.cells > MAX_CELLS {
                    return None;
                }
            }
            Some(l)
        }
    }
}

fn structural_points(mu: &RadonMeasure) -> Vec<f64> {
    let mut out = Vec::new();
    for c in &mu.components {
        match c {
            MeasureComponent::LebesgueDensity { breakpoints, .. } => out.extend(breakpoints),
            MeasureComponent::Atom { location, .. } => out.push(*location),
            MeasureComponent::CantorCopy { support, .. } => out.extend([support.lo, support.hi]),
            MeasureComponent::RationalWindows { .. } => out.push(0.0),
            MeasureComponent::PowerDensity { anchor, support, .. } => out.extend([*anchor, support.lo, support.hi]),
        }
    }
    out.retain(|p| p.is_finite());
    out
}

/// Largest distance from `c` to the anchor of a power density.
fn anchor_reach(mu: &RadonMeasure, c: f64) -> f64 {
    mu.components
        .iter()
        .filter_map(|k| match k {
            MeasureComponent::PowerDensity { anchor, .. } => Some((anchor - c).abs()),
            _ => None,
        })
        .fold(0.0, f64::max)
}

/// Envelopes of `mu` on the tail region of the ladder, or `None` when a
/// component there is outside the supported shapes.
fn envelope(mu: &RadonMeasure, l: &Ladder) -> Option<Envelope> {
    let tau = l.tau(l.cells);
    let mut env = Envelope::default();
    for comp in &mu.components {
        if l.a.is_finite() {
            finite_envelope(comp, l.a, tau, &mut env)?;
        } else {
            infinite_envelope(comp, l.c, tau, &mut env)?;
        }
    }
    Some(env)
}

/// Tail region `(a, a + τ_J]`, scale `τ` = distance to `a`.
fn finite_envelope(comp: &MeasureComponent, a: f64, tau: f64, env: &mut Envelope) -> Option<()> {
    let edge = a + tau;
    match comp {
        MeasureComponent::LebesgueDensity { .. } => {
            let rho = comp.density_at(a + 0.5 * tau)?;
            if rho > 0.0 {
                env.push(Term::new(rho, rho, 1.0), Term::new(0.5 * rho, 0.5 * rho, 1.0));
            }
        }
        MeasureComponent::Atom { location, .. } => {
            if *location > a && *location <= edge {
                return None;
            }
        }
        MeasureComponent::CantorCopy { support, weight } => {
            if support.hi <= a || support.lo >= edge {
                return Some(());
            }
            if support.lo > a {
                return None;
            }
            let k = weight * (support.hi - support.lo).powf(-GAMMA);
            let low = if support.lo == a { 0.5 * k } else { 0.0 };
            env.push(Term::new(2.0 * k, low, GAMMA), Term::new(2.0 * k, 0.0, GAMMA));
        }
        MeasureComponent::RationalWindows { weight, .. } => {
            env.push(Term::new(*weight, 0.0, 1.0), Term::new(0.5 * weight, 0.0, 1.0));
        }
        MeasureComponent::PowerDensity { anchor, exponent: p, coeff: k, support } => {
            if support.hi <= a || support.lo >= edge {
                return Some(());
            }
            if support.lo > a {
                return None;
            }
            if *anchor == a {
                let q = p + 1.0;
                let cdf = if q > 0.0 { Term::new(k / q, k / q, q) } else { Term::infinite() };
                let cell = if q == 0.0 {
                    let v = k * std::f64::consts::LN_2;
                    Term::new(up(v), down(v), 0.0)
                } else {
                    let v = k * (1.0 - 0.5f64.powf(q)) / q;
                    Term::new(up(v), down(v), q)
                };
                env.push(cdf, cell);
            } else if *anchor < a || *anchor >= edge {
                let d1 = k * (a - anchor).abs().powf(*p);
                let d2 = k * (edge - anchor).abs().powf(*p);
                let (hi, lo) = (up(d1.max(d2)), down(d1.min(d2)));
                env.push(Term::new(hi, lo, 1.0), Term::new(0.5 * hi, 0.5 * lo, 1.0));
            } else {
                return None;
            }
        }
    }
    Some(())
}

/// Tail region `(-∞, c - (τ_J - 1)]`, scale `τ = 2^j`: ladder point `j` is at
/// distance `τ - 1` from `c` and cell `j` has length `τ`.
fn infinite_envelope(comp: &MeasureComponent, c: f64, tau: f64, env: &mut Envelope) -> Option<()> {
    match comp {
        MeasureComponent::LebesgueDensity { breakpoints, values } => {
            if breakpoints[0] == f64::NEG_INFINITY && values[0] > 0.0 {
                let rho = values[0];
                env.push(Term::infinite(), Term::new(rho, rho, 1.0));
            }
        }
        MeasureComponent::Atom { .. } | MeasureComponent::CantorCopy { .. } => {}
        MeasureComponent::RationalWindows { signed, reflected, weight, .. } => {
            if *signed || *reflected {
                // Window n lies in |x| <= n + 1, so the mass beyond distance
                // R from the origin is at most w 2^(2-R).
                let log2k = -tau + WINDOW_DECAY * tau.log2() + 3.0 + c.abs();
                let u = (weight * log2k.exp2()).max(f64::MIN_POSITIVE);
                env.push(Term::new(u, 0.0, -WINDOW_DECAY), Term::new(u, 0.0, -WINDOW_DECAY));
            }
        }
        MeasureComponent::PowerDensity { exponent: p, coeff: k, support, .. } => {
            if support.lo > f64::NEG_INFINITY {
                return Some(());
            }
            // Distances to the anchor stay within [τ/4, 3τ].
            let (m4, m3) = (0.25f64.powf(*p), 3f64.powf(*p));
            let cell = Term::new(up(k * m4.max(m3)), down(k * m4.min(m3)), p + 1.0);
            let q = p + 1.0;
            let cdf = if q < 0.0 {
                let (n4, n3) = (0.25f64.powf(q), 3f64.powf(q));
                Term::new(up(k * n4.max(n3) / -q), down(k * n4.min(n3) / -q), q)
            } else {
                Term::infinite()
            };
            env.push(cdf, cell);
        }
    }
    Some(())
}

/// `Σ_{m>=0} (τ ratio^m)^e`.
fn geometric(tau: f64, ratio: f64, e: f64) -> f64 {
    let q = ratio.powf(e);
    if q >= 1.0 {
        return f64::INFINITY;
    }
    tau.powf(e) / (1.0 - q)
}

/// Enclosure of `∫∫_{a<y<z<=x_J} μ(dy) ν(dz)` from the envelopes.
fn tail_bracket(mu: &Envelope, nu: &Envelope, l: &Ladder) -> Bracket {
    let (tau, r) = (l.tau(l.cells), l.ratio());
    let (mut lo, mut hi) = (0.0, 0.0);
    for f in &mu.cdf {
        for g in &nu.cell {
            let e = f.exp + g.exp;
            if f.up > 0.0 && g.up > 0.0 {
                hi += up(f.up * g.up * up(geometric(tau, r, e)));
            }
            if f.low > 0.0 && g.low > 0.0 {
                lo += down(f.low * g.low * r.powf(f.exp) * down(geometric(tau, r, e)));
            }
        }
    }
    Bracket::new(lo, hi.max(lo))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Route {
    /// `∫ μ((a, z)) ν(dz)`
    Cdf,
    /// `∫ ν((y, c)) μ(dy)`
    Tail,
}

/// `∫∫_{a<y<z<c} μ(dy) ν(dz)` over a ladder of cells toward `a`, with
/// monotone bounds on each explicit cell and envelopes past the last one.
fn ladder_integral(mu: &RadonMeasure, nu: &RadonMeasure, a: f64, c: f64, route: Route, tol: f64) -> Bracket {
    let unknown = Bracket::new(0.0, f64::INFINITY);
    let Some(l) = Ladder::new(mu, nu, a, c) else {
        return unknown;
    };
    let (Some(emu), Some(enu)) = (envelope(mu, &l), envelope(nu, &l)) else {
        return unknown;
    };
    let share = tol / (4.0 * (l.cells * SUBCELLS) as f64);
    let mut total = tail_bracket(&emu, &enu, &l);
    for j in 0..l.cells {
        let (near, far) = (l.point(j + 1), l.point(j));
        let h = (far - near) / SUBCELLS as f64;
        for i in 0..SUBCELLS {
            let lo_pt = if i == 0 { near } else { near + h * i as f64 };
            let hi_pt = if i + 1 == SUBCELLS { far } else { near + h * (i + 1) as f64 };
            let piece = if j == 0 && i + 1 == SUBCELLS { Interval::open(lo_pt, hi_pt) } else { open_closed(lo_pt, hi_pt) };
            let b = match route {
                Route::Cdf => {
                    let cell = nu.mass(&piece, share);
                    let lo = mu.mass(&Interval::open(a, lo_pt), share);
                    let hi = mu.mass(&Interval::open(a, hi_pt), share);
                    Bracket::new(product(lo, cell).lo, product(hi, cell).hi)
                }
                Route::Tail => {
                    let cell = mu.mass(&piece, share);
                    let lo = nu.mass(&Interval::open(hi_pt, c), share);
                    let hi = nu.mass(&Interval::open(lo_pt, c), share);
                    Bracket::new(product(lo, cell).lo, product(hi, cell).hi)
                }
            };
            total = total.add(b);
        }
    }
    if route == Route::Tail {
        let edge = l.point(l.cells);
        let rest = product(nu.mass(&Interval::open(edge, c), share), mu.mass(&open_closed(a, edge), share));
        total = total.add(rest);
    }
    total
}

fn left_view(spec: &DiffusionSpec, side: Side, c: f64) -> (DiffusionSpec, f64) {
    match side {
        Side::Left => (spec.clone(), c),
        Side::Right => (spec.reflect(), -c),
    }
}

/// `∫ |s(x) - s(e)| m(dx)` between the endpoint `e` on `side` and the
/// interior point `c`.
pub fn dissipativity_integral(spec: &DiffusionSpec, side: Side, c: f64, tol: f64) -> Bracket {
    let (sp, c) = left_view(spec, side, c);
    let a = sp.interval.lo;
    let (ds, m) = (&sp.scale.ds, &sp.speed);
    if a.is_finite() {
        if let Some(p) = density_pieces(ds, a, c, tol) {
            return integrate_pl(m, &cdf_pl(&p), a, c, tol);
        }
    }
    ladder_integral(ds, m, a, c, Route::Cdf, tol)
}

/// The same quantity as [`dissipativity_integral`], computed as
/// `∫ m(between x and c) ds(dx)`.
pub fn dissipativity_integral_via_speed(spec: &DiffusionSpec, side: Side, c: f64, tol: f64) -> Bracket {
    let (sp, c) = left_view(spec, side, c);
    let a = sp.interval.lo;
    let (ds, m) = (&sp.scale.ds, &sp.speed);
    if let Some(p) = density_pieces(m, a, c, tol) {
        return integrate_pl(ds, &tail_pl(&p), a, c, tol);
    }
    ladder_integral(ds, m, a, c, Route::Tail, tol)
}

fn decide(f: impl Fn(f64) -> Bracket) -> TriBool {
    for tol in TOL_LADDER {
        let v = f(tol).finiteness();
        if v != TriBool::Unknown {
            return v;
        }
    }
    TriBool::Unknown
}

pub fn endpoint_class(spec: &DiffusionSpec, side: Side) -> BoundaryClass {
    let e = spec.endpoint(side);
    if e.is_finite() && spec.endpoint_included(side) {
        return BoundaryClass::First;
    }
    let c = spec.probe_point();
    let j = match side {
        Side::Left => Interval::open(e, c),
        Side::Right => Interval::open(c, e),
    };
    if spec.scale.ds.mass(&j, DEFAULT_TOL).is_infinite() {
        BoundaryClass::Second
    } else {
        BoundaryClass::Third
    }
}

/// Whether a third-class endpoint is reached in finite expected time.
/// Endpoints of the other classes are never dissipative.
pub fn is_dissipative(spec: &DiffusionSpec, side: Side) -> TriBool {
    if endpoint_class(spec, side) != BoundaryClass::Third {
        return TriBool::No;
    }
    let c = spec.probe_point();
    decide(|tol| dissipativity_integral(spec, side, c, tol))
}

/// [`is_dissipative`] through the speed-measure route.
pub fn is_dissipative_via_speed(spec: &DiffusionSpec, side: Side) -> TriBool {
    if endpoint_class(spec, side) != BoundaryClass::Third {
        return TriBool::No;
    }
    let c = spec.probe_point();
    decide(|tol| dissipativity_integral_via_speed(spec, side, c, tol))
}

pub fn classify_endpoint(spec: &DiffusionSpec, side: Side) -> EndpointReport {
    let class = endpoint_class(spec, side);
    let dissipative = if class == BoundaryClass::Third { is_dissipative(spec, side) } else { TriBool::No };
    EndpointReport { class, dissipative }
}

fn recurrent_from(spec: &DiffusionSpec, left: &EndpointReport, right: &EndpointReport) -> TriBool {
    TriBool::from_bool(
        spec.killing.is_zero() && left.class != BoundaryClass::Third && right.class != BoundaryClass::Third,
    )
}

fn conservative_from(spec: &DiffusionSpec, left: &EndpointReport, right: &EndpointReport) -> TriBool {
    if !spec.killing.is_zero() {
        return TriBool::No;
    }
    left.dissipative.not().and(right.dissipative.not())
}

pub fn classify(spec: &DiffusionSpec) -> BoundaryReport {
    let left = classify_endpoint(spec, Side::Left);
    let right = classify_endpoint(spec, Side::Right);
    let recurrent = recurrent_from(spec, &left, &right);
    BoundaryReport {
        left,
        right,
        recurrent,
        // The speed measure charges every open subinterval, so the process is
        // irreducible and transience is the negation of recurrence.
        transient: recurrent.not(),
        conservative: conservative_from(spec, &left, &right),
        strongly_local: spec.is_strongly_local(),
    }
}

/// No killing, and every endpoint is either included or at infinite scale distance.
pub fn is_recurrent(spec: &DiffusionSpec) -> TriBool {
    recurrent_from(spec, &classify_endpoint(spec, Side::Left), &classify_endpoint(spec, Side::Right))
}

/// No killing and no dissipative endpoint.
pub fn is_conservative(spec: &DiffusionSpec) -> TriBool {
    conservative_from(spec, &classify_endpoint(spec, Side::Left), &classify_endpoint(spec, Side::Right))
}

/// `M(x) (s(x) - s(e))` along points `x_k` converging to the endpoint `e`,
/// where `M(x)` is the speed mass between `x` and the probe point.
pub fn limit_ms(spec: &DiffusionSpec, side: Side, n: usize) -> Vec<(f64, Approx)> {
    let (sp, c) = left_view(spec, side, spec.probe_point());
    let a = sp.interval.lo;
    let sign = if side == Side::Left { 1.0 } else { -1.0 };
    let mut out = Vec::new();
    for k in 1..=n {
        let x = if a.is_finite() { a + (c - a) * 0.5f64.powi(k as i32) } else { c - 2f64.powi(k as i32) };
        if x <= a || out.last().is_some_and(|(p, _)| *p == sign * x) {
            break;
        }
        let m = sp.speed.mass(&Interval::open(x, c), DEFAULT_TOL);
        let s = sp.scale.ds.mass(&Interval::open(a, x), DEFAULT_TOL);
        let v = if m.is_infinite() || s.is_infinite() { Approx::infinite() } else { m * s };
        out.push((sign * x, v));
    }
    out
}

/// `∫_{(lo, hi)} μ((lo, z)) ν(dz)` on a bounded interval.
pub(crate) fn pair_bounded(mu: &RadonMeasure, nu: &RadonMeasure, lo: f64, hi: f64, tol: f64) -> Bracket {
    if let Some(p) = density_pieces(mu, lo, hi, tol) {
        return integrate_pl(nu, &cdf_pl(&p), lo, hi, tol);
    }
    if let Some(p) = density_pieces(nu, lo, hi, tol) {
        return integrate_pl(mu, &tail_pl(&p), lo, hi, tol);
    }
    let mut best = Bracket::new(0.0, f64::INFINITY);
    for n in [64usize, 256, 1024, 4096] {
        let share = tol / (4.0 * n as f64);
        let h = (hi - lo) / n as f64;
        let mut total = Bracket::new(0.0, 0.0);
        for i in 0..n {
            let x0 = lo + h * i as f64;
            let x1 = if i + 1 == n { hi } else { lo + h * (i + 1) as f64 };
            let cell = if i + 1 == n { Interval::open(x0, x1) } else { open_closed(x0, x1) };
            let cell = nu.mass(&cell, share);
            let f0 = mu.mass(&Interval::open(lo, x0), share);
            let f1 = mu.mass(&Interval::open(lo, x1), share);
            total = total.add(Bracket::new(product(f0, cell).lo, product(f1, cell).hi));
        }
        best = total;
        if best.hi - best.lo <= tol {
            break;
        }
    }
    best
}

/// Expected exit time from `(a, b)` started at `x`, as the integral of the
/// Green kernel `2 (s(x∧z) - s(a)) (s(b) - s(x∨z)) / (s(b) - s(a))` against `m`.
pub fn mean_exit_time(spec: &DiffusionSpec, a: f64, x: f64, b: f64, tol: f64) -> Result<Approx, BoundaryError> {
    let i = &spec.interval;
    if !(a < x && x < b && a.is_finite() && b.is_finite() && i.closure_contains(a) && i.closure_contains(b)) {
        return Err(BoundaryError::BadPoints(format!("a = {a}, x = {x}, b = {b} in {i}")));
    }
    if !spec.killing.is_zero() {
        return Err(BoundaryError::Unsupported("mean exit time with killing".into()));
    }
    let (ds, m) = (&spec.scale.ds, &spec.speed);
    let share = tol / 8.0;
    let left = pair_bounded(ds, m, a, x, share);
    let right = pair_bounded(&ds.reflect(), &m.reflect(), -b, -x, share);
    if !left.is_finite() || !right.is_finite() {
        return Err(BoundaryError::Unsupported("could not bound the Green integral".into()));
    }
    let sa = ds.mass(&Interval::open(a, x), share);
    let sb = ds.mass(&Interval::open(x, b), share);
    let atom: f64 = m
        .components
        .iter()
        .map(|c| match c {
            MeasureComponent::Atom { location, mass } if *location == x => *mass,
            _ => 0.0,
        })
        .sum();
    let (sa_lo, sa_hi) = (sa.lo().max(0.0), sa.hi());
    let (sb_lo, sb_hi) = (sb.lo().max(0.0), sb.hi());
    // Weights sb/(sa+sb), sa/(sa+sb) and the harmonic term sa sb/(sa+sb) are
    // monotone in each argument.
    let wl = (down(sb_lo / up(sa_hi + sb_lo)), up(sb_hi / down(sa_lo + sb_hi)));
    let wr = (down(sa_lo / up(sb_hi + sa_lo)), up(sa_hi / down(sb_lo + sa_hi)));
    let harm = |p: f64, q: f64| if p == 0.0 || q == 0.0 { 0.0 } else { 1.0 / (1.0 / p + 1.0 / q) };
    let h = (down(harm(sa_lo, sb_lo)), up(harm(sa_hi, sb_hi)));
    let lo = 2.0 * down(wl.0 * left.lo + wr.0 * right.lo + h.0 * atom);
    let hi = 2.0 * up(wl.1 * left.hi + wr.1 * right.hi + h.1 * atom);
    Ok(Approx::from_bounds(down(lo), up(hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::ScaleFunction;

    fn power_speed(p: f64) -> DiffusionSpec {
        DiffusionSpec {
            interval: Interval::new(0.0, 1.0, false, true).unwrap(),
            scale: ScaleFunction::identity_on(0.0, 1.0),
            speed: RadonMeasure::single(MeasureComponent::PowerDensity {
                anchor: 0.0,
                exponent: p,
                coeff: 1.0,
                support: Interval::closed(0.0, 1.0),
            }),
            killing: RadonMeasure::zero(),
        }
    }

    fn power_scale_at_infinity(p: f64) -> DiffusionSpec {
        DiffusionSpec {
            interval: Interval::new(1.0, f64::INFINITY, true, false).unwrap(),
            scale: ScaleFunction::new(
                1.0,
                0.0,
                RadonMeasure::single(MeasureComponent::PowerDensity {
                    anchor: 0.0,
                    exponent: p,
                    coeff: 1.0,
                    support: Interval::new(1.0, f64::INFINITY, true, false).unwrap(),
                }),
            ),
            speed: RadonMeasure::single(MeasureComponent::lebesgue_on(1.0, f64::INFINITY)),
            killing: RadonMeasure::zero(),
        }
    }

    #[test]
    fn brownian_classes() {
        let r = classify(&DiffusionSpec::brownian_line());
        assert_eq!(r.left.class, BoundaryClass::Second);
        assert_eq!(r.right.class, BoundaryClass::Second);
        assert_eq!(r.recurrent, TriBool::Yes);
        assert_eq!(r.conservative, TriBool::Yes);
        let r = classify(&DiffusionSpec::brownian_unit());
        assert_eq!((r.left.class, r.right.class), (BoundaryClass::First, BoundaryClass::First));
        assert_eq!(r.transient, TriBool::No);
    }

    #[test]
    fn rational_windows_both_routes() {
        for signed in [false, true] {
            let s = DiffusionSpec::rational_windows(signed);
            for side in [Side::Left, Side::Right] {
                assert_eq!(endpoint_class(&s, side), BoundaryClass::Third, "{signed} {side:?}");
                assert_eq!(is_dissipative(&s, side), TriBool::Yes, "{signed} {side:?}");
                assert_eq!(is_dissipative_via_speed(&s, side), TriBool::Yes, "{signed} {side:?}");
            }
            assert_eq!(is_recurrent(&s), TriBool::No);
            assert_eq!(is_conservative(&s), TriBool::No);
        }
    }

    #[test]
    fn first_moment_of_windows_at_most_two() {
        let s = DiffusionSpec::rational_windows(false);
        let v = dissipativity_integral(&s, Side::Right, 1e-9, 1e-9);
        let w = dissipativity_integral_via_speed(&s, Side::Right, 1e-9, 1e-9);
        assert!(v.hi <= 2.0 && w.hi <= 2.0, "{v:?} {w:?}");
        assert!(v.lo <= w.hi && w.lo <= v.hi, "{v:?} {w:?}");
    }

    #[test]
    fn singular_speed_at_finite_endpoint() {
        for (p, expect) in [(-2.0, TriBool::No), (-1.5, TriBool::Yes), (-1.0, TriBool::Yes), (0.5, TriBool::Yes)] {
            let s = power_speed(p);
            assert_eq!(endpoint_class(&s, Side::Left), BoundaryClass::Third);
            assert_eq!(is_dissipative(&s, Side::Left), expect, "p = {p}");
            assert_eq!(is_dissipative_via_speed(&s, Side::Left), expect, "p = {p}");
        }
    }

    #[test]
    fn power_scale_at_infinity_threshold() {
        for (p, expect) in [(-3.0, TriBool::Yes), (-1.5, TriBool::No), (-2.5, TriBool::Yes)] {
            let s = power_scale_at_infinity(p);
            assert_eq!(endpoint_class(&s, Side::Right), BoundaryClass::Third);
            assert_eq!(is_dissipative(&s, Side::Right), expect, "p = {p}");
            assert_eq!(is_dissipative_via_speed(&s, Side::Right), expect, "p = {p}");
        }
    }

    #[test]
    fn limit_ms_vanishes_for_dissipative() {
        let s = power_speed(-1.5);
        let seq = limit_ms(&s, Side::Left, 60);
        assert!(seq.last().unwrap().1.hi() < 1e-4);
    }

    #[test]
    fn brownian_exit_time() {
        let t = mean_exit_time(&DiffusionSpec::brownian_line(), -1.0, 0.3, 1.0, 1e-12).unwrap();
        assert!(t.contains(1.3 * 0.7), "{t}");
        assert!(t.error < 1e-12);
    }
}

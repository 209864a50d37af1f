//! Seeded simulation of a diffusion as a symmetric walk in natural scale,
//! with speed-measure time increments and an exponential killing clock.

use std::collections::HashMap;
use std::sync::RwLock;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::{dissipativity_integral, pair_bounded, Bracket};
use crate::diffusion::{DiffusionSpec, Side};
use crate::measure::{Approx, Interval, MeasureComponent, RadonMeasure};

/// Two-sided normal quantile for 99% confidence.
pub const Z99: f64 = 2.5758;

const TOL: f64 = 1e-12;
/// Largest grid denominator tried when aligning the start point.
const MAX_ALIGN: u64 = 4096;
/// Nodes precomputed around the start on an unbounded side.
const WINDOW: i64 = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error("points must satisfy a <= x <= b within the closure of {0}")]
    BadPoints(Interval),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Grid step in natural scale.
    pub step_h: f64,
    pub max_steps: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(step_h: f64, seed: u64) -> Self {
        SimConfig { step_h, max_steps: 10_000_000, seed }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    HitLeft,
    HitRight,
    Killed,
    Censored,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub terminal: Terminal,
    pub lifetime: f64,
    pub steps: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingEstimate {
    pub p_hat: f64,
    /// Half-width of the 99% binomial confidence interval.
    pub ci: f64,
    /// Uncensored paths used.
    pub n: u64,
    pub censored: u64,
    /// More than 1% of the paths were censored.
    pub flagged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub censored: u64,
    pub flagged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    pub fraction: f64,
    pub n: u64,
    /// Paths stopped by `max_steps` before the horizon (counted as alive).
    pub censored: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum End {
    Absorb,
    Reflect,
}

#[derive(Clone, Copy, Debug)]
struct Node {
    time: f64,
    kill: f64,
}

/// Grid `y_k = y0 + k h` in natural scale with optional end nodes.
struct Walk<'a> {
    spec: &'a DiffusionSpec,
    y0: f64,
    h: f64,
    lo: Option<(i64, End, f64)>,
    hi: Option<(i64, End, f64)>,
    base: i64,
    table: Vec<Node>,
    extra: RwLock<HashMap<i64, Node>>,
}

fn mid(b: Bracket) -> f64 {
    if b.is_finite() {
        0.5 * (b.lo + b.hi)
    } else if b.is_infinite() {
        f64::INFINITY
    } else {
        f64::NAN
    }
}

fn atom_at(mu: &RadonMeasure, x: f64) -> f64 {
    mu.components
        .iter()
        .map(|c| match c {
            MeasureComponent::Atom { location, mass } if *location == x => *mass,
            _ => 0.0,
        })
        .sum()
}

/// Best rational `j / K` for `r` with `K` a multiple of a small convergent
/// denominator and at least `k_min`; plain rounding if no convergent fits.
fn align(r: f64, k_min: u64) -> (u64, u64) {
    let (mut h1, mut h2) = (1u64, 0u64);
    let (mut q1, mut q2) = (0u64, 1u64);
    let mut x = r;
    for _ in 0..64 {
        let a = x.floor();
        if a > MAX_ALIGN as f64 {
            break;
        }
        let a = a as u64;
        let (h, q) = (a * h1 + h2, a * q1 + q2);
        if q > MAX_ALIGN {
            break;
        }
        if (r - h as f64 / q as f64).abs() <= 1e-9 {
            let k = q * k_min.div_ceil(q);
            return (h * (k / q), k);
        }
        (h2, h1, q2, q1) = (h1, h, q1, q);
        let frac = x - a as f64;
        if frac < 1e-15 {
            break;
        }
        x = 1.0 / frac;
    }
    ((r * k_min as f64).round() as u64, k_min)
}

impl<'a> Walk<'a> {
    fn new(spec: &'a DiffusionSpec, y0: f64, h: f64, lo: Option<(i64, End, f64)>, hi: Option<(i64, End, f64)>, k0: i64) -> Result<Self, SimError> {
        let mut w = Walk { spec, y0, h, lo, hi, base: 0, table: Vec::new(), extra: RwLock::new(HashMap::new()) };
        let kmin = lo.map_or(k0 - WINDOW, |l| l.0);
        let kmax = hi.map_or(k0 + WINDOW, |h| h.0);
        let xs: Vec<f64> = (kmin - 1..=kmax + 1).into_par_iter().map(|k| w.x_of(k)).collect();
        let nodes: Vec<Node> = (kmin..=kmax)
            .into_par_iter()
            .map(|k| {
                let i = (k - kmin + 1) as usize;
                w.kernels(k, xs[i - 1], xs[i], xs[i + 1])
            })
            .collect();
        if let Some(bad) = nodes.iter().position(|n| n.time.is_nan() || n.kill.is_nan()) {
            return Err(SimError::Infeasible(format!("could not bound the time kernel at node {}", kmin + bad as i64)));
        }
        w.base = kmin;
        w.table = nodes;
        Ok(w)
    }

    fn x_of(&self, k: i64) -> f64 {
        if let Some((kl, _, x)) = self.lo {
            if k == kl {
                return x;
            }
            if k < kl {
                return f64::NAN;
            }
        }
        if let Some((kh, _, x)) = self.hi {
            if k == kh {
                return x;
            }
            if k > kh {
                return f64::NAN;
            }
        }
        let y = self.y0 + k as f64 * self.h;
        let within = &self.spec.interval;
        self.spec.scale.inverse(y, TOL * (1.0 + y.abs()), within).map_or(f64::NAN, |a| a.value)
    }

    fn with_speed(&self, mu: &RadonMeasure) -> DiffusionSpec {
        DiffusionSpec { speed: mu.clone(), ..self.spec.clone() }
    }

    /// `∫_{(lo, hi)} (s(z) - s(lo)) μ(dz)`.
    fn left_part(&self, mu: &RadonMeasure, lo: f64, hi: f64) -> f64 {
        if lo.is_finite() {
            mid(pair_bounded(&self.spec.scale.ds, mu, lo, hi, TOL))
        } else {
            mid(dissipativity_integral(&self.with_speed(mu), Side::Left, hi, TOL))
        }
    }

    /// `∫_{(lo, hi)} (s(hi) - s(z)) μ(dz)`.
    fn right_part(&self, mu: &RadonMeasure, lo: f64, hi: f64) -> f64 {
        if hi.is_finite() {
            mid(pair_bounded(&self.spec.scale.ds.reflect(), &mu.reflect(), -hi, -lo, TOL))
        } else {
            mid(dissipativity_integral(&self.with_speed(mu), Side::Right, lo, TOL))
        }
    }

    /// `∫ (h - |s(z) - y_k|) μ(dz)` over the two neighbouring cells, doubled
    /// on the one-sided cell of a reflecting node.
    fn kernel(&self, mu: &RadonMeasure, k: i64, xm: f64, x: f64, xp: f64) -> f64 {
        let atom = self.h * atom_at(mu, x);
        if self.lo.is_some_and(|l| l.0 == k && l.1 == End::Reflect) {
            return 2.0 * (self.right_part(mu, x, xp) + atom);
        }
        if self.hi.is_some_and(|h| h.0 == k && h.1 == End::Reflect) {
            return 2.0 * (self.left_part(mu, xm, x) + atom);
        }
        if self.is_absorbing(k) {
            return 0.0;
        }
        self.left_part(mu, xm, x) + self.right_part(mu, x, xp) + atom
    }

    fn kernels(&self, k: i64, xm: f64, x: f64, xp: f64) -> Node {
        let time = self.kernel(&self.spec.speed, k, xm, x, xp);
        let kill = if self.spec.killing.is_zero() { 0.0 } else { self.kernel(&self.spec.killing, k, xm, x, xp) };
        Node { time, kill }
    }

    fn is_absorbing(&self, k: i64) -> bool {
        self.lo.is_some_and(|l| l.0 == k && l.1 == End::Absorb) || self.hi.is_some_and(|h| h.0 == k && h.1 == End::Absorb)
    }

    fn node(&self, k: i64) -> Node {
        let i = k - self.base;
        if i >= 0 && (i as usize) < self.table.len() {
            return self.table[i as usize];
        }
        if let Some(n) = self.extra.read().expect("node cache").get(&k) {
            return *n;
        }
        let n = self.kernels(k, self.x_of(k - 1), self.x_of(k), self.x_of(k + 1));
        self.extra.write().expect("node cache").insert(k, n);
        n
    }

    fn run(&self, k0: i64, rng: &mut ChaCha8Rng, horizon: f64, max_steps: u64) -> PathResult {
        let threshold = -(1.0 - rng.gen::<f64>()).ln();
        let (mut k, mut t, mut clock, mut steps) = (k0, 0.0, 0.0, 0u64);
        let (mut bits, mut left) = (0u64, 0u32);
        loop {
            if let Some((kl, End::Absorb, _)) = self.lo {
                if k == kl {
                    return PathResult { terminal: Terminal::HitLeft, lifetime: t, steps };
                }
            }
            if let Some((kh, End::Absorb, _)) = self.hi {
                if k == kh {
                    return PathResult { terminal: Terminal::HitRight, lifetime: t, steps };
                }
            }
            if t >= horizon || steps >= max_steps {
                return PathResult { terminal: Terminal::Censored, lifetime: t, steps };
            }
            let node = self.node(k);
            if node.kill > 0.0 && clock + node.kill >= threshold {
                let frac = (threshold - clock) / node.kill;
                return PathResult { terminal: Terminal::Killed, lifetime: t + frac * node.time, steps };
            }
            clock += node.kill;
            t += node.time;
            steps += 1;
            if left == 0 {
                bits = rng.next_u64();
                left = 64;
            }
            let up = bits & 1 == 1;
            bits >>= 1;
            left -= 1;
            k += if self.lo.is_some_and(|l| l.0 == k) {
                1
            } else if self.hi.is_some_and(|h| h.0 == k) {
                -1
            } else if up {
                1
            } else {
                -1
            };
        }
    }

    fn paths(&self, k0: i64, n: u64, cfg: &SimConfig, horizon: f64) -> Vec<PathResult> {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(i);
                self.run(k0, &mut rng, horizon, cfg.max_steps)
            })
            .collect()
    }
}

fn scale_at(spec: &DiffusionSpec, x: f64) -> f64 {
    spec.scale.eval(x, TOL).value
}

fn hitting_walk<'a>(spec: &'a DiffusionSpec, a: f64, x: f64, b: f64, cfg: &SimConfig) -> Result<(Walk<'a>, i64), SimError> {
    let i = spec.interval;
    if !(a < b && a <= x && x <= b && a.is_finite() && b.is_finite() && i.closure_contains(a) && i.closure_contains(b)) {
        return Err(SimError::BadPoints(i));
    }
    let (sa, sb, sx) = (scale_at(spec, a), scale_at(spec, b), scale_at(spec, x));
    let delta = sb - sa;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(SimError::Infeasible(format!("scale increment {delta} on [{a}, {b}]")));
    }
    if !(cfg.step_h > 0.0) || 2.0 * cfg.step_h > delta {
        return Err(SimError::Infeasible(format!("step {} too coarse for scale increment {delta}", cfg.step_h)));
    }
    let r = ((sx - sa) / delta).clamp(0.0, 1.0);
    let (j, k) = align(r, (delta / cfg.step_h).ceil() as u64);
    let k = k as i64;
    let walk = Walk::new(spec, sa, delta / k as f64, Some((0, End::Absorb, a)), Some((k, End::Absorb, b)), j as i64)?;
    Ok((walk, j as i64))
}

fn end_rule(spec: &DiffusionSpec, side: Side) -> End {
    if spec.endpoint_included(side) {
        End::Reflect
    } else {
        End::Absorb
    }
}

/// Walk over all of `I`: reflecting at included endpoints, absorbing at
/// excluded endpoints of finite scale, unbounded where the scale diverges.
fn whole_walk<'a>(spec: &'a DiffusionSpec, x0: f64, cfg: &SimConfig) -> Result<(Walk<'a>, i64), SimError> {
    let i = spec.interval;
    if !i.contains(x0) || !(cfg.step_h > 0.0) {
        return Err(SimError::BadPoints(i));
    }
    let (s_lo, s_hi, sx) = (scale_at(spec, i.lo), scale_at(spec, i.hi), scale_at(spec, x0));
    let h = cfg.step_h;
    let lo_end = |k| (k, end_rule(spec, Side::Left), i.lo);
    let hi_end = |k| (k, end_rule(spec, Side::Right), i.hi);
    let clamp_start = |k: i64, lo: Option<i64>, hi: Option<i64>| {
        let k = lo.map_or(k, |l| k.max(l + i64::from(!i.lo_included)));
        hi.map_or(k, |u| k.min(u - i64::from(!i.hi_included)))
    };
    let (walk, k0) = match (s_lo.is_finite(), s_hi.is_finite()) {
        (true, true) => {
            let k = (((s_hi - s_lo) / h).round() as i64).max(2);
            let hg = (s_hi - s_lo) / k as f64;
            let k0 = clamp_start(((sx - s_lo) / hg).round() as i64, Some(0), Some(k));
            (Walk::new(spec, s_lo, hg, Some(lo_end(0)), Some(hi_end(k)), k0)?, k0)
        }
        (true, false) => {
            let k0 = clamp_start(((sx - s_lo) / h).round() as i64, Some(0), None);
            (Walk::new(spec, s_lo, h, Some(lo_end(0)), None, k0)?, k0)
        }
        (false, true) => {
            let k0 = clamp_start(((sx - s_hi) / h).round() as i64, None, Some(0));
            (Walk::new(spec, s_hi, h, None, Some(hi_end(0)), k0)?, k0)
        }
        (false, false) => (Walk::new(spec, sx, h, None, None, 0)?, 0),
    };
    Ok((walk, k0))
}

/// One path from `x0` until it leaves `(a, b)` or is killed.
pub fn simulate_path(spec: &DiffusionSpec, x0: f64, a: f64, b: f64, cfg: &SimConfig) -> Result<PathResult, SimError> {
    simulate_paths(spec, x0, a, b, 1, cfg).map(|mut v| v.remove(0))
}

/// `n` independent paths; path `i` uses stream `i` of the seeded generator.
pub fn simulate_paths(spec: &DiffusionSpec, x0: f64, a: f64, b: f64, n: u64, cfg: &SimConfig) -> Result<Vec<PathResult>, SimError> {
    let (walk, k0) = hitting_walk(spec, a, x0, b, cfg)?;
    Ok(walk.paths(k0, n, cfg, f64::INFINITY))
}

pub fn estimate_hitting(spec: &DiffusionSpec, a: f64, x: f64, b: f64, n: u64, cfg: &SimConfig) -> Result<HittingEstimate, SimError> {
    let (walk, k0) = hitting_walk(spec, a, x, b, cfg)?;
    if x == a || x == b {
        let p_hat = if x == b { 1.0 } else { 0.0 };
        return Ok(HittingEstimate { p_hat, ci: 0.0, n, censored: 0, flagged: false });
    }
    let paths = walk.paths(k0, n, cfg, f64::INFINITY);
    let censored = paths.iter().filter(|p| p.terminal == Terminal::Censored).count() as u64;
    let hits = paths.iter().filter(|p| p.terminal == Terminal::HitRight).count() as u64;
    let used = n - censored;
    let p_hat = if used == 0 { f64::NAN } else { hits as f64 / used as f64 };
    let ci = Z99 * (p_hat * (1.0 - p_hat) / used as f64).sqrt();
    Ok(HittingEstimate { p_hat, ci, n: used, censored, flagged: censored * 100 > n })
}

/// Mean time to leave `(a, b)` (or be killed) over uncensored paths.
pub fn estimate_exit_time(spec: &DiffusionSpec, a: f64, x: f64, b: f64, n: u64, cfg: &SimConfig) -> Result<ExitEstimate, SimError> {
    let paths = simulate_paths(spec, x, a, b, n, cfg)?;
    let times: Vec<f64> = paths.iter().filter(|p| p.terminal != Terminal::Censored).map(|p| p.lifetime).collect();
    let censored = n - times.len() as u64;
    let m = times.len() as f64;
    let mean = times.iter().sum::<f64>() / m;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    Ok(ExitEstimate { mean, stderr: (var / m).sqrt(), n: times.len() as u64, censored, flagged: censored * 100 > n })
}

/// Fraction of paths from `x` still alive at time `horizon`.
pub fn estimate_survival(spec: &DiffusionSpec, x: f64, horizon: f64, n: u64, cfg: &SimConfig) -> Result<SurvivalEstimate, SimError> {
    let (walk, k0) = whole_walk(spec, x, cfg)?;
    let paths = walk.paths(k0, n, cfg, horizon);
    let alive: Vec<&PathResult> = paths.iter().filter(|p| p.terminal == Terminal::Censored).collect();
    let censored = alive.iter().filter(|p| p.lifetime < horizon).count() as u64;
    Ok(SurvivalEstimate { fraction: alive.len() as f64 / n as f64, n, censored })
}

/// `(s(x) - s(a)) / (s(b) - s(a))` with certified bounds.
pub fn hitting_formula(spec: &DiffusionSpec, a: f64, x: f64, b: f64, tol: f64) -> Approx {
    let ds = &spec.scale.ds;
    let num = ds.mass(&Interval::open(a, x), tol);
    let den = ds.mass(&Interval::open(a, b), tol);
    if x <= a {
        return Approx::ZERO;
    }
    if x >= b {
        return Approx::exact(1.0);
    }
    let lo = (num.lo() / den.hi()).clamp(0.0, 1.0);
    let hi = (num.hi() / den.lo()).clamp(0.0, 1.0);
    Approx::from_bounds(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alignment_hits_thirds() {
        let (j, k) = align(1.0 / 3.0, 100);
        assert_eq!((j, k), (34, 102));
        assert_eq!(align(0.5, 7), (4, 8));
        let (j, k) = align(std::f64::consts::FRAC_1_SQRT_2, 64);
        assert_eq!(k, 64);
        assert_eq!(j, 45);
    }

    #[test]
    fn brownian_hitting_near_linear() {
        let spec = DiffusionSpec::brownian_unit();
        let est = estimate_hitting(&spec, 0.0, 0.25, 1.0, 20_000, &SimConfig::new(1.0 / 64.0, 7)).unwrap();
        assert!((est.p_hat - 0.25).abs() <= est.ci + 1e-3, "{est:?}");
        assert!(!est.flagged);
    }

    #[test]
    fn endpoints_are_exact() {
        let spec = DiffusionSpec::cantor_scale();
        let cfg = SimConfig::new(1.0 / 64.0, 1);
        assert_eq!(estimate_hitting(&spec, 0.0, 0.0, 1.0, 10, &cfg).unwrap().p_hat, 0.0);
        assert_eq!(estimate_hitting(&spec, 0.0, 1.0, 1.0, 10, &cfg).unwrap().p_hat, 1.0);
    }

    #[test]
    fn brownian_exit_time_quarter() {
        let spec = DiffusionSpec::brownian_unit();
        let est = estimate_exit_time(&spec, 0.0, 0.5, 1.0, 4000, &SimConfig::new(1.0 / 32.0, 3)).unwrap();
        assert!((est.mean - 0.25).abs() <= 0.005 + 4.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn same_seed_same_paths() {
        let spec = DiffusionSpec::cantor_scale();
        let cfg = SimConfig::new(1.0 / 32.0, 11);
        let a = simulate_paths(&spec, 1.0 / 3.0, 0.0, 1.0, 50, &cfg).unwrap();
        let b = simulate_paths(&spec, 1.0 / 3.0, 0.0, 1.0, 50, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn killing_atom_shortens_life() {
        let mut spec = DiffusionSpec::brownian_unit();
        spec.killing = RadonMeasure::single(MeasureComponent::Atom { location: 0.5, mass: 50.0 });
        let paths = simulate_paths(&spec, 0.5, 0.0, 1.0, 500, &SimConfig::new(1.0 / 16.0, 5)).unwrap();
        let killed = paths.iter().filter(|p| p.terminal == Terminal::Killed).count();
        assert!(killed > 400, "{killed}");
    }

    #[test]
    fn reflecting_walk_survives() {
        let spec = DiffusionSpec::brownian_unit();
        let s = estimate_survival(&spec, 0.5, 2.0, 200, &SimConfig::new(1.0 / 16.0, 9)).unwrap();
        assert_eq!(s.fraction, 1.0);
    }

    #[test]
    fn formula_for_cantor_third() {
        let p = hitting_formula(&DiffusionSpec::cantor_scale(), 0.0, 1.0 / 3.0, 1.0, 1e-12);
        assert!((p.value - 5.0 / 12.0).abs() < 1e-9, "{p}");
    }
}

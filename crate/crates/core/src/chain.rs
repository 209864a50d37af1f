//! Finite continuous-time chains: irreducibility, resolvents, detailed-balance
//! cones, and birth–death discretizations of a diffusion.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::{mean_exit_time, pair_bounded, BoundaryError};
use crate::diffusion::DiffusionSpec;
use crate::measure::{Interval, MeasureComponent, RadonMeasure};

/// Relative tolerance for closing a cycle of detailed-balance ratios.
const CYCLE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
    #[error("only the zero measure satisfies detailed balance")]
    EmptyCone,
    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
}

#[derive(Serialize, Deserialize)]
struct ChainFile {
    q: Vec<Vec<f64>>,
}

/// Generator `Q` of a chain on `n` states. Off-diagonal entries are jump
/// rates; the deficit of a row sum below zero is the killing rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainFile", into = "ChainFile")]
pub struct FiniteChain {
    q: DMatrix<f64>,
}

impl TryFrom<ChainFile> for FiniteChain {
    type Error = ChainError;

    fn try_from(f: ChainFile) -> Result<Self, ChainError> {
        let n = f.q.len();
        if f.q.iter().any(|r| r.len() != n) {
            return Err(ChainError::InvalidGenerator("generator must be square".into()));
        }
        FiniteChain::new(DMatrix::from_fn(n, n, |i, j| f.q[i][j]))
    }
}

impl From<FiniteChain> for ChainFile {
    fn from(c: FiniteChain) -> Self {
        let n = c.n();
        ChainFile { q: (0..n).map(|i| (0..n).map(|j| c.q[(i, j)]).collect()).collect() }
    }
}

impl FiniteChain {
    pub fn new(q: DMatrix<f64>) -> Result<Self, ChainError> {
        if q.nrows() != q.ncols() || q.nrows() == 0 {
            return Err(ChainError::InvalidGenerator("generator must be square and nonempty".into()));
        }
        let c = FiniteChain { q };
        for i in 0..c.n() {
            for j in 0..c.n() {
                let v = c.q[(i, j)];
                if !v.is_finite() || (i != j && v < 0.0) {
                    return Err(ChainError::InvalidGenerator(format!("entry ({i}, {j}) = {v}")));
                }
            }
            let out: f64 = c.off_diagonal(i).map(|(_, v)| v).sum();
            if -c.q[(i, i)] < out * (1.0 - 1e-12) {
                return Err(ChainError::InvalidGenerator(format!("row {i} sums to a positive value")));
            }
        }
        Ok(c)
    }

    /// Generator from jump rates and killing rates.
    pub fn from_rates(rates: &DMatrix<f64>, killing: &[f64]) -> Result<Self, ChainError> {
        let n = rates.nrows();
        let mut q = rates.clone();
        for i in 0..n {
            q[(i, i)] = 0.0;
            let out: f64 = q.row(i).iter().sum();
            q[(i, i)] = -(out + killing.get(i).copied().unwrap_or(0.0));
        }
        FiniteChain::new(q)
    }

    /// Birth–death chain with `up[i]` from `i` to `i+1` and `down[i]` from
    /// `i+1` to `i`.
    pub fn birth_death(up: &[f64], down: &[f64], killing: &[f64]) -> Result<Self, ChainError> {
        let n = up.len() + 1;
        let mut r = DMatrix::zeros(n, n);
        for i in 0..up.len() {
            r[(i, i + 1)] = up[i];
            r[(i + 1, i)] = down[i];
        }
        FiniteChain::from_rates(&r, killing)
    }

    /// Two chains side by side with no transitions between them.
    pub fn disjoint_union(&self, other: &FiniteChain) -> FiniteChain {
        let (n, m) = (self.n(), other.n());
        let mut q = DMatrix::zeros(n + m, n + m);
        q.view_mut((0, 0), (n, n)).copy_from(&self.q);
        q.view_mut((n, n), (m, m)).copy_from(&other.q);
        FiniteChain { q }
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.q[(i, j)]
    }

    pub fn killing_rate(&self, i: usize) -> f64 {
        let out: f64 = self.off_diagonal(i).map(|(_, v)| v).sum();
        (-self.q[(i, i)] - out).max(0.0)
    }

    /// Probability that the first jump out of `i` goes to `j`, ignoring killing.
    pub fn jump_probability(&self, i: usize, j: usize) -> f64 {
        let out: f64 = self.off_diagonal(i).map(|(_, v)| v).sum();
        if i == j || out == 0.0 {
            0.0
        } else {
            self.q[(i, j)] / out
        }
    }

    fn off_diagonal(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n()).filter(move |j| *j != i).map(move |j| (j, self.q[(i, j)]))
    }

    fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            for (j, v) in self.off_diagonal(i) {
                if v > 0.0 && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    }
}

/// Strong connectivity of the graph of positive rates.
pub fn is_irreducible(chain: &FiniteChain) -> bool {
    (0..chain.n()).all(|i| chain.reachable_from(i).into_iter().all(|r| r))
}

/// `U^α = (αI - Q)^{-1}` by elimination that never subtracts: pivots are
/// rebuilt from row slacks, so zero entries are exact zeros and all other
/// entries are positive.
pub fn resolvent(chain: &FiniteChain, alpha: f64) -> DMatrix<f64> {
    assert!(alpha > 0.0 && alpha.is_finite(), "resolvent needs α > 0");
    let n = chain.n();
    let mut off = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { chain.q[(i, j)] });
    let mut slack: Vec<f64> = (0..n).map(|i| alpha + chain.killing_rate(i)).collect();
    let mut pivot = vec![0.0; n];
    let mut mult = DMatrix::zeros(n, n);
    for k in 0..n {
        let p = slack[k] + (k + 1..n).map(|j| off[(k, j)]).sum::<f64>();
        pivot[k] = p;
        for i in k + 1..n {
            let l = off[(i, k)] / p;
            if l == 0.0 {
                continue;
            }
            mult[(i, k)] = l;
            slack[i] += l * slack[k];
            for j in k + 1..n {
                if j != i {
                    off[(i, j)] += l * off[(k, j)];
                }
            }
        }
    }
    let mut u = DMatrix::zeros(n, n);
    let mut y = vec![0.0; n];
    for c in 0..n {
        for i in 0..n {
            let e = if i == c { 1.0 } else { 0.0 };
            y[i] = e + (0..i).map(|k| mult[(i, k)] * y[k]).sum::<f64>();
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| off[(i, j)] * u[(j, c)]).sum();
            u[(i, c)] = (y[i] + s) / pivot[i];
        }
    }
    u
}

/// Equivalent characterizations of irreducibility, evaluated separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lemma21Report {
    pub irreducible: bool,
    /// Every entry of `U^α` is positive.
    pub resolvent_positive: bool,
    /// Each `U^α 1_{j}` vanishes identically or is positive everywhere.
    pub columns_zero_or_positive: bool,
    /// All rows of `U^α` have the same support.
    pub rows_equivalent: bool,
    pub consistent: bool,
}

pub fn lemma21_report(chain: &FiniteChain, alpha: f64) -> Lemma21Report {
    let u = resolvent(chain, alpha);
    let n = chain.n();
    let irreducible = is_irreducible(chain);
    let resolvent_positive = u.iter().all(|v| *v > 0.0);
    let columns_zero_or_positive = (0..n).all(|c| {
        let col = u.column(c);
        col.iter().all(|v| *v > 0.0) || col.iter().all(|v| *v == 0.0)
    });
    let support = |i: usize| -> Vec<bool> { (0..n).map(|j| u[(i, j)] > 0.0).collect() };
    let first = support(0);
    let rows_equivalent = (1..n).all(|i| support(i) == first);
    let clauses = [irreducible, resolvent_positive, columns_zero_or_positive, rows_equivalent];
    Lemma21Report {
        irreducible,
        resolvent_positive,
        columns_zero_or_positive,
        rows_equivalent,
        consistent: clauses.iter().all(|c| *c == irreducible),
    }
}

/// Extreme rays of the cone of nonnegative solutions of `π_i Q_ij = π_j Q_ji`,
/// each normalized to total mass one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureCone {
    pub basis: Vec<Vec<f64>>,
}

impl MeasureCone {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }
}

pub fn symmetrizing_basis(chain: &FiniteChain) -> Result<MeasureCone, ChainError> {
    let n = chain.n();
    let q = |i: usize, j: usize| chain.q[(i, j)];
    // A one-way edge forces zero mass at its source, and zero mass spreads
    // to every state that jumps into a zero state.
    let mut zero = vec![false; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for i in 0..n {
        if (0..n).any(|j| j != i && q(i, j) > 0.0 && q(j, i) == 0.0) {
            zero[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(j) = queue.pop_front() {
        for i in 0..n {
            if i != j && !zero[i] && q(i, j) > 0.0 {
                zero[i] = true;
                queue.push_back(i);
            }
        }
    }
    let mut seen = zero.clone();
    let mut basis = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut pi = vec![0.0; n];
        pi[start] = 1.0;
        seen[start] = true;
        let mut consistent = true;
        let mut members = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if j == i || q(i, j) == 0.0 {
                    continue;
                }
                let cand = pi[i] * q(i, j) / q(j, i);
                if pi[j] > 0.0 {
                    if (pi[j] - cand).abs() > CYCLE_TOL * pi[j].max(cand) {
                        consistent = false;
                    }
                } else {
                    pi[j] = cand;
                    seen[j] = true;
                    members.push(j);
                    queue.push_back(j);
                }
            }
        }
        if consistent {
            let total: f64 = members.iter().map(|i| pi[*i]).sum();
            pi.iter_mut().for_each(|v| *v /= total);
            basis.push(pi);
        }
    }
    if basis.is_empty() {
        return Err(ChainError::EmptyCone);
    }
    Ok(MeasureCone { basis })
}

fn check_grid(spec: &DiffusionSpec, grid: &[f64]) -> Result<(), ChainError> {
    if grid.len() < 3 {
        return Err(ChainError::DegenerateGrid("need at least three points".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(ChainError::DegenerateGrid("points must be strictly increasing".into()));
    }
    if let Some(x) = grid.iter().find(|x| !x.is_finite() || !spec.interval.closure_contains(**x)) {
        return Err(ChainError::DegenerateGrid(format!("{x} is not a finite point of {}", spec.interval)));
    }
    Ok(())
}

/// Reruns `f` with an absolute tolerance scaled to the magnitude it
/// returned, until the error is within `tol` relative to the value.
fn relative(tol: f64, f: impl Fn(f64) -> (f64, f64)) -> (f64, f64) {
    let (mut v, mut e) = f(tol);
    for _ in 0..3 {
        if !(v.is_finite() && v > 0.0) || e <= tol * v {
            break;
        }
        (v, e) = f(tol * v / 4.0);
    }
    (v, e)
}

/// Scale increments `s(x_{i+1}) - s(x_i)` along the grid, to relative
/// accuracy `tol`.
pub fn scale_increments(spec: &DiffusionSpec, grid: &[f64], tol: f64) -> Result<Vec<f64>, ChainError> {
    check_grid(spec, grid)?;
    let mut out = Vec::with_capacity(grid.len() - 1);
    for w in grid.windows(2) {
        let (d, err) = relative(tol, |t| {
            let a = spec.scale.ds.mass(&Interval::open(w[0], w[1]), t);
            (a.value, a.error)
        });
        if !d.is_finite() || d <= 0.0 || err >= d {
            return Err(ChainError::DegenerateGrid(format!("scale increment {d} ± {err} on ({}, {})", w[0], w[1])));
        }
        out.push(d);
    }
    Ok(out)
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

/// `∫ φ_i dμ` where `φ_i` is the grid hat function that is affine in the
/// scale coordinate, equal to one at `x_i` and zero at the neighbours.
fn hat_integrals(
    spec: &DiffusionSpec,
    mu: &RadonMeasure,
    grid: &[f64],
    deltas: &[f64],
    tol: f64,
) -> Result<Vec<f64>, ChainError> {
    let ds = &spec.scale.ds;
    let (ds_r, mu_r) = (ds.reflect(), mu.reflect());
    let n = grid.len();
    let mid = |pair: &dyn Fn(f64) -> crate::boundary::Bracket| -> Result<f64, ChainError> {
        let (v, _) = relative(tol, |t| {
            let b = pair(t);
            if b.is_finite() {
                (0.5 * (b.lo + b.hi), 0.5 * (b.hi - b.lo))
            } else {
                (f64::INFINITY, f64::INFINITY)
            }
        });
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ChainError::Boundary(BoundaryError::Unsupported("unbounded cell integral".into())))
        }
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut v = atom_at(mu, grid[i]);
        if i > 0 {
            v += mid(&|t| pair_bounded(ds, mu, grid[i - 1], grid[i], t))? / deltas[i - 1];
        }
        if i + 1 < n {
            v += mid(&|t| pair_bounded(&ds_r, &mu_r, -grid[i + 1], -grid[i], t))? / deltas[i];
        }
        out.push(v);
    }
    Ok(out)
}

/// Speed masses attached to the grid states: twice the hat-function
/// integrals of `m`. The discretized chain is reversible with respect to
/// these weights.
pub fn grid_speed_masses(spec: &DiffusionSpec, grid: &[f64], tol: f64) -> Result<Vec<f64>, ChainError> {
    let deltas = scale_increments(spec, grid, tol)?;
    Ok(hat_integrals(spec, &spec.speed, grid, &deltas, tol)?.into_iter().map(|v| 2.0 * v).collect())
}

/// Birth–death chain on the grid: jump probabilities are the two-point
/// hitting probabilities of the diffusion, holding times its mean exit
/// times from neighbouring cells, killing rates the ratio of hat-function
/// integrals of `k` and `m`. The outer grid points reflect. `tol` is relative
/// to each computed increment, cell integral and exit time.
pub fn discretize(spec: &DiffusionSpec, grid: &[f64], tol: f64) -> Result<FiniteChain, ChainError> {
    let deltas = scale_increments(spec, grid, tol)?;
    let n = grid.len();
    let masses: Vec<f64> = hat_integrals(spec, &spec.speed, grid, &deltas, tol)?.iter().map(|v| 2.0 * v).collect();
    let killing = if spec.killing.is_zero() {
        vec![0.0; n]
    } else {
        let k = hat_integrals(spec, &spec.killing, grid, &deltas, tol)?;
        k.iter().zip(&masses).map(|(k, m)| 2.0 * k / m).collect()
    };
    let unkilled = DiffusionSpec { killing: RadonMeasure::zero(), ..spec.clone() };
    let mut up = vec![0.0; n - 1];
    let mut down = vec![0.0; n - 1];
    up[0] = 1.0 / (deltas[0] * masses[0]);
    down[n - 2] = 1.0 / (deltas[n - 2] * masses[n - 1]);
    for i in 1..n - 1 {
        let p = deltas[i - 1] / (deltas[i - 1] + deltas[i]);
        let exit = |t| mean_exit_time(&unkilled, grid[i - 1], grid[i], grid[i + 1], t).map(|a| (a.value, a.error));
        let first = exit(tol)?;
        let tau = if first.1 <= tol * first.0 { first.0 } else { relative(tol, |t| exit(t).unwrap_or((f64::NAN, 0.0))).0 };
        up[i] = p / tau;
        down[i - 1] = (1.0 - p) / tau;
    }
    FiniteChain::birth_death(&up, &down, &killing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn chain(rows: &[&[f64]]) -> FiniteChain {
        let n = rows.len();
        FiniteChain::new(DMatrix::from_fn(n, n, |i, j| rows[i][j])).unwrap()
    }

    #[test]
    fn irreducibility_examples() {
        assert!(is_irreducible(&FiniteChain::birth_death(&[1.0, 2.0], &[3.0, 1.0], &[]).unwrap()));
        let flip = FiniteChain::birth_death(&[1.0], &[1.0], &[]).unwrap();
        assert!(!is_irreducible(&flip.disjoint_union(&flip)));
        let one_way = chain(&[&[-1.0, 1.0, 0.0], &[0.0, -1.0, 1.0], &[0.0, 1.0, -1.0]]);
        assert!(!is_irreducible(&one_way));
    }

    #[test]
    fn resolvent_examples() {
        let zero = FiniteChain::new(DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(resolvent(&zero, 2.0), DMatrix::identity(3, 3) * 0.5);
        let flip = FiniteChain::birth_death(&[1.0], &[1.0], &[]).unwrap();
        let u = resolvent(&flip, 1.0);
        let want = DMatrix::from_row_slice(2, 2, &[2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]);
        assert_relative_eq!(u, want, epsilon = 1e-15);
        let killed = chain(&[&[-1.0]]);
        assert_eq!(resolvent(&killed, 1.0)[(0, 0)], 0.5);
    }

    #[test]
    fn lemma_clauses() {
        let bd = FiniteChain::birth_death(&[1.0, 1.0], &[1.0, 1.0], &[]).unwrap();
        let r = lemma21_report(&bd, 1.0);
        assert!(r.irreducible && r.resolvent_positive && r.columns_zero_or_positive && r.rows_equivalent && r.consistent);
        let flip = FiniteChain::birth_death(&[1.0], &[1.0], &[]).unwrap();
        let r = lemma21_report(&flip.disjoint_union(&flip), 1.0);
        assert!(!r.irreducible && !r.resolvent_positive && !r.columns_zero_or_positive && !r.rows_equivalent);
        assert!(r.consistent);
    }

    #[test]
    fn cone_examples() {
        let bd = FiniteChain::birth_death(&[1.0, 1.0], &[1.0, 1.0], &[]).unwrap();
        let c = symmetrizing_basis(&bd).unwrap();
        assert_eq!(c.dimension(), 1);
        for v in &c.basis[0] {
            assert_relative_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
        }
        let flip = FiniteChain::birth_death(&[1.0], &[1.0], &[]).unwrap();
        assert_eq!(symmetrizing_basis(&flip.disjoint_union(&flip)).unwrap().dimension(), 2);
        let cycle = chain(&[&[-3.0, 1.0, 2.0], &[2.0, -3.0, 1.0], &[1.0, 2.0, -3.0]]);
        assert_eq!(symmetrizing_basis(&cycle), Err(ChainError::EmptyCone));
    }

    #[test]
    fn brownian_grid_rates() {
        let h = 0.125;
        let grid: Vec<f64> = (0..=8).map(|i| i as f64 * h).collect();
        let c = discretize(&DiffusionSpec::brownian_unit(), &grid, 1e-12).unwrap();
        for i in 1..8 {
            assert_relative_eq!(c.jump_probability(i, i + 1), 0.5, epsilon = 1e-15);
            assert_relative_eq!(c.rate(i, i + 1), 1.0 / (2.0 * h * h), max_relative = 1e-12);
        }
    }

    #[test]
    fn cantor_grid_jump() {
        let grid = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        let c = discretize(&DiffusionSpec::cantor_scale(), &grid, 1e-12).unwrap();
        assert_relative_eq!(c.jump_probability(1, 2), 5.0 / 7.0, max_relative = 1e-9);
    }

    #[test]
    fn killing_atom_lands_on_its_state() {
        let mut s = DiffusionSpec::brownian_unit();
        s.killing = RadonMeasure::single(MeasureComponent::Atom { location: 0.3, mass: 1.0 });
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        let c = discretize(&s, &grid, 1e-12).unwrap();
        assert!(c.killing_rate(1) > 0.0 && c.killing_rate(2) > 0.0);
        assert_eq!(c.killing_rate(3), 0.0);
    }
}

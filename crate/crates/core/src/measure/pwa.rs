use super::interval::Interval;
use super::MeasureError;

/// A piecewise-affine function: on `[breaks[i], breaks[i+1])` it equals
/// `slopes[i] * x + intercepts[i]`; it is zero outside `[breaks[0], breaks[n]]`.
///
/// The outer breaks may be infinite. Continuity is not required; the
/// integration primitives only ever see one affine piece at a time.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    breaks: Vec<f64>,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
}

/// One affine piece restricted to an interval.
#[derive(Clone, Copy, Debug)]
pub struct AffinePiece {
    pub on: Interval,
    pub slope: f64,
    pub intercept: f64,
}

impl AffinePiece {
    pub fn at(&self, x: f64) -> f64 {
        if self.slope == 0.0 {
            self.intercept
        } else {
            self.slope * x + self.intercept
        }
    }

    /// Upper bound of `|g|` on the piece; infinite on unbounded pieces with
    /// nonzero slope.
    pub fn sup_abs(&self) -> f64 {
        self.at(self.on.lo).abs().max(self.at(self.on.hi).abs())
    }
}

impl PiecewiseLinear {
    pub fn new(breaks: Vec<f64>, slopes: Vec<f64>, intercepts: Vec<f64>) -> Result<Self, MeasureError> {
        if breaks.len() < 2 || slopes.len() != breaks.len() - 1 || intercepts.len() != slopes.len() {
            return Err(MeasureError::InvalidFunction("length mismatch".into()));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(MeasureError::InvalidFunction("breaks must be strictly increasing".into()));
        }
        if slopes.iter().chain(intercepts.iter()).any(|v| !v.is_finite()) {
            return Err(MeasureError::InvalidFunction("non-finite coefficient".into()));
        }
        Ok(PiecewiseLinear { breaks, slopes, intercepts })
    }

    pub fn affine(slope: f64, intercept: f64) -> Self {
        PiecewiseLinear {
            breaks: vec![f64::NEG_INFINITY, f64::INFINITY],
            slopes: vec![slope],
            intercepts: vec![intercept],
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::affine(0.0, c)
    }

    /// Linear interpolation through `(xs[i], ys[i])`, zero outside the knots.
    pub fn from_knots(xs: &[f64], ys: &[f64]) -> Result<Self, MeasureError> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(MeasureError::InvalidFunction("need at least two knots".into()));
        }
        let mut slopes = Vec::with_capacity(xs.len() - 1);
        let mut intercepts = Vec::with_capacity(xs.len() - 1);
        for i in 0..xs.len() - 1 {
            let k = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
            slopes.push(k);
            intercepts.push(ys[i] - k * xs[i]);
        }
        Self::new(xs.to_vec(), slopes, intercepts)
    }

    /// Piecewise-constant function with `values[i]` on `[breaks[i], breaks[i+1])`.
    pub fn step(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self, MeasureError> {
        let n = values.len();
        Self::new(breaks, vec![0.0; n], values)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.slopes.len();
        if x < self.breaks[0] || x > self.breaks[n] {
            return 0.0;
        }
        let i = match self.breaks.partition_point(|b| *b <= x) {
            0 => 0,
            k => (k - 1).min(n - 1),
        };
        if self.slopes[i] == 0.0 {
            self.intercepts[i]
        } else {
            self.slopes[i] * x + self.intercepts[i]
        }
    }

    /// Affine pieces clipped to `j`. Pieces are half-open `[b_i, b_{i+1})`
    /// except the last, which keeps its finite right endpoint.
    pub fn pieces_on(&self, j: &Interval) -> Vec<AffinePiece> {
        let n = self.slopes.len();
        let mut out = Vec::new();
        for i in 0..n {
            let last = i + 1 == n;
            let on = Interval {
                lo: self.breaks[i],
                hi: self.breaks[i + 1],
                lo_included: self.breaks[i].is_finite(),
                hi_included: last && self.breaks[i + 1].is_finite(),
            };
            let on = on.intersect(j);
            if on.is_empty() {
                continue;
            }
            out.push(AffinePiece { on, slope: self.slopes[i], intercept: self.intercepts[i] });
        }
        out
    }

    pub fn mirror(&self) -> Self {
        let n = self.slopes.len();
        let breaks = self.breaks.iter().rev().map(|b| -b).collect();
        let slopes = (0..n).rev().map(|i| -self.slopes[i]).collect();
        let intercepts = (0..n).rev().map(|i| self.intercepts[i]).collect();
        PiecewiseLinear { breaks, slopes, intercepts }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knots_interpolate() {
        let g = PiecewiseLinear::from_knots(&[0.0, 1.0, 3.0], &[0.0, 2.0, 0.0]).unwrap();
        assert_eq!(g.eval(0.5), 1.0);
        assert_eq!(g.eval(2.0), 1.0);
        assert_eq!(g.eval(3.0), 0.0);
        assert_eq!(g.eval(4.0), 0.0);
    }

    #[test]
    fn pieces_are_clipped() {
        let g = PiecewiseLinear::affine(1.0, 0.0);
        let p = g.pieces_on(&Interval::open(0.0, 1.0));
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].on, Interval::open(0.0, 1.0));
    }
}

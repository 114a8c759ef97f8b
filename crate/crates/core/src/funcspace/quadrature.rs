//! Composite midpoint quadrature on tensor grids.
//!
//! Node values are computed independently (optionally in parallel) and then
//! reduced in a fixed pairwise order, so serial and parallel runs agree
//! bit for bit.

use rayon::prelude::*;

use super::Cube;
use crate::error::{DomainError, Error, Result};

/// Node count below which sampling stays on the calling thread.
const PAR_THRESHOLD: usize = 4096;

/// A real-valued function on ℝⁿ that quadrature can sample.
pub trait RealFn: Sync {
    /// Number of coordinates the function reads.
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64]) -> Result<f64, DomainError>;

    /// Jump locations along `axis` that quadrature cells should align to.
    fn breakpoints(&self, _axis: usize) -> Vec<f64> {
        Vec::new()
    }
}

impl<T: RealFn + ?Sized> RealFn for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> Result<f64, DomainError> {
        (**self).eval(x)
    }
    fn breakpoints(&self, axis: usize) -> Vec<f64> {
        (**self).breakpoints(axis)
    }
}

/// Wraps a plain closure as a [`RealFn`].
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> RealFn for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> Result<f64, DomainError> {
        Ok((self.f)(x))
    }
}

/// `a - b`.
pub struct Difference<A, B>(pub A, pub B);

impl<A: RealFn, B: RealFn> RealFn for Difference<A, B> {
    fn dim(&self) -> usize {
        self.0.dim().max(self.1.dim())
    }
    fn eval(&self, x: &[f64]) -> Result<f64, DomainError> {
        Ok(self.0.eval(x)? - self.1.eval(x)?)
    }
    fn breakpoints(&self, axis: usize) -> Vec<f64> {
        let mut v = self.0.breakpoints(axis);
        v.extend(self.1.breakpoints(axis));
        v
    }
}

/// `scale * f + offset`.
pub struct Affine<A> {
    pub f: A,
    pub scale: f64,
    pub offset: f64,
}

impl<A: RealFn> RealFn for Affine<A> {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn eval(&self, x: &[f64]) -> Result<f64, DomainError> {
        Ok(self.scale * self.f.eval(x)? + self.offset)
    }
    fn breakpoints(&self, axis: usize) -> Vec<f64> {
        self.f.breakpoints(axis)
    }
}

/// `x ↦ f(x - shift)`.
pub struct Shifted<A> {
    pub f: A,
    pub shift: Vec<f64>,
}

impl<A: RealFn> RealFn for Shifted<A> {
    fn dim(&self) -> usize {
        self.f.dim().max(self.shift.len())
    }
    fn eval(&self, x: &[f64]) -> Result<f64, DomainError> {
        let y: Vec<f64> = x.iter().zip(&self.shift).map(|(a, s)| a - s).collect();
        self.f.eval(&y)
    }
    fn breakpoints(&self, axis: usize) -> Vec<f64> {
        let s = self.shift.get(axis).copied().unwrap_or(0.0);
        self.f.breakpoints(axis).into_iter().map(|b| b + s).collect()
    }
}

/// Pointwise absolute value.
pub struct Abs<A>(pub A);

impl<A: RealFn> RealFn for Abs<A> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, x: &[f64]) -> Result<f64, DomainError> {
        Ok(self.0.eval(x)?.abs())
    }
    fn breakpoints(&self, axis: usize) -> Vec<f64> {
        self.0.breakpoints(axis)
    }
}

/// Pairwise summation in a fixed order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// One axis of a tensor grid: node coordinates and cell widths.
#[derive(Debug, Clone)]
pub struct AxisRule {
    pub nodes: Vec<f64>,
    pub widths: Vec<f64>,
}

impl AxisRule {
    /// `res` midpoint cells on `[lo, hi]`, or `res` cells per piece when
    /// interior breakpoints split the interval.
    pub fn midpoint(lo: f64, hi: f64, res: usize, breaks: &[f64]) -> AxisRule {
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|b| *b > lo && *b < hi).collect();
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup();
        let mut edges = Vec::with_capacity(cuts.len() + 2);
        edges.push(lo);
        edges.extend(cuts);
        edges.push(hi);
        let mut nodes = Vec::with_capacity(res * (edges.len() - 1));
        let mut widths = Vec::with_capacity(nodes.capacity());
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let h = (b - a) / res as f64;
            for i in 0..res {
                nodes.push(a + (i as f64 + 0.5) * h);
                widths.push(h);
            }
        }
        AxisRule { nodes, widths }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Product of per-axis midpoint rules; axis 0 varies fastest.
#[derive(Debug, Clone)]
pub struct TensorGrid {
    pub axes: Vec<AxisRule>,
}

impl TensorGrid {
    pub fn on_box(lo: &[f64], hi: &[f64], res: usize) -> TensorGrid {
        TensorGrid {
            axes: lo
                .iter()
                .zip(hi)
                .map(|(a, b)| AxisRule::midpoint(*a, *b, res, &[]))
                .collect(),
        }
    }

    /// Grid on a cube, aligned to the breakpoints `f` declares.
    pub fn for_cube<F: RealFn + ?Sized>(f: &F, q: &Cube, res: usize) -> TensorGrid {
        TensorGrid {
            axes: (0..q.dim())
                .map(|i| AxisRule::midpoint(q.lo(i), q.hi(i), res, &f.breakpoints(i)))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(AxisRule::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes node `idx` into `buf` and returns its cell volume.
    pub fn node(&self, mut idx: usize, buf: &mut [f64]) -> f64 {
        let mut w = 1.0;
        for (k, axis) in self.axes.iter().enumerate() {
            let i = idx % axis.len();
            idx /= axis.len();
            buf[k] = axis.nodes[i];
            w *= axis.widths[i];
        }
        w
    }

    pub fn weights(&self) -> Vec<f64> {
        let mut buf = vec![0.0; self.dim()];
        (0..self.len()).map(|i| self.node(i, &mut buf)).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut buf = vec![0.0; self.dim()];
        (0..self.len())
            .map(|i| {
                self.node(i, &mut buf);
                buf.clone()
            })
            .collect()
    }

    /// Evaluates `f` at every node, in node order.
    pub fn sample<F: RealFn + ?Sized>(&self, f: &F) -> Result<Vec<f64>> {
        let dim = self.dim();
        let eval = |buf: &mut Vec<f64>, i: usize| {
            self.node(i, buf);
            f.eval(buf)
        };
        let raw: Vec<Result<f64, DomainError>> = if self.len() < PAR_THRESHOLD {
            let mut buf = vec![0.0; dim];
            (0..self.len()).map(|i| eval(&mut buf, i)).collect()
        } else {
            (0..self.len())
                .into_par_iter()
                .map_init(|| vec![0.0; dim], eval)
                .collect()
        };
        // first failure in node order, so errors are deterministic too
        raw.into_iter().map(|r| r.map_err(Error::from)).collect()
    }

    /// `Σ w_i v_i / Σ w_i` with fixed-order reduction.
    pub fn weighted_mean(&self, values: &[f64]) -> f64 {
        let w = self.weights();
        let num: Vec<f64> = w.iter().zip(values).map(|(a, b)| a * b).collect();
        pairwise_sum(&num) / pairwise_sum(&w)
    }
}

/// Midpoint estimate of `f_Q`, the average of `f` over `Q`.
pub fn cube_average<F: RealFn + ?Sized>(f: &F, q: &Cube, resolution: usize) -> Result<f64> {
    check_resolution(resolution)?;
    check_dim(f, q)?;
    let grid = TensorGrid::for_cube(f, q, resolution);
    let values = grid.sample(f)?;
    Ok(grid.weighted_mean(&values))
}

pub(crate) fn check_resolution(resolution: usize) -> Result<()> {
    if resolution < 2 {
        return Err(Error::precondition(format!(
            "resolution must be at least 2, got {resolution}"
        )));
    }
    Ok(())
}

pub(crate) fn check_dim<F: RealFn + ?Sized>(f: &F, q: &Cube) -> Result<()> {
    if f.dim() > q.dim() {
        return Err(Error::precondition(format!(
            "function reads {} coordinates but the cube is {}-dimensional",
            f.dim(),
            q.dim()
        )));
    }
    Ok(())
}

/// Default points per axis for a given dimension.
pub fn default_resolution(dim: usize) -> usize {
    if dim <= 1 {
        64
    } else {
        32
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=order {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[order - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

//! Vector `A_p` weights, their combined weight, and weighted `L^p` norms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DomainError, DomainKind, Error, Result};
use crate::funcspace::quadrature::{check_dim, check_resolution, pairwise_sum, AxisRule, TensorGrid};
use crate::funcspace::{parse_function, Cube, FunctionSpec, RealFn};
use crate::oscillation::lattice;

/// A pair `(w₁, w₂)` with exponents `p₁, p₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorWeight {
    pub w1: FunctionSpec,
    pub w2: FunctionSpec,
    pub p1: f64,
    pub p2: f64,
}

/// Hölder conjugate `q' = q/(q-1)`.
pub fn conjugate(q: f64) -> f64 {
    q / (q - 1.0)
}

impl VectorWeight {
    pub fn new(w1: FunctionSpec, w2: FunctionSpec, p1: f64, p2: f64) -> Result<Self> {
        for (name, p) in [("p1", p1), ("p2", p2)] {
            if !(p > 1.0 && p <= 16.0) {
                return Err(Error::precondition(format!("{name} must lie in (1, 16], got {p}")));
            }
        }
        Ok(VectorWeight { w1, w2, p1, p2 })
    }

    /// `1/p = 1/p₁ + 1/p₂`.
    pub fn p(&self) -> f64 {
        1.0 / (1.0 / self.p1 + 1.0 / self.p2)
    }

    pub fn dim(&self) -> usize {
        self.w1.dim().max(self.w2.dim())
    }

    /// `w = w₁^{p/p₁} w₂^{p/p₂}` at one point.
    pub fn combined_at(&self, x: &[f64]) -> Result<f64> {
        let (a, b) = (positive(&self.w1, x)?, positive(&self.w2, x)?);
        let p = self.p();
        Ok(a.powf(p / self.p1) * b.powf(p / self.p2))
    }

    /// `w` as a function.
    pub fn combined(&self) -> CombinedWeight<'_> {
        CombinedWeight(self)
    }
}

pub struct CombinedWeight<'a>(&'a VectorWeight);

impl RealFn for CombinedWeight<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, x: &[f64]) -> Result<f64, DomainError> {
        self.0.combined_at(x).map_err(|e| match e {
            Error::Domain(d) => d,
            _ => DomainError::new(DomainKind::NonPositiveWeight, x),
        })
    }

    fn breakpoints(&self, axis: usize) -> Vec<f64> {
        let mut b = self.0.w1.breakpoints(axis);
        b.extend(self.0.w2.breakpoints(axis));
        b
    }
}

fn positive(w: &dyn RealFn, x: &[f64]) -> Result<f64> {
    let v = w.eval(x)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(DomainError::new(DomainKind::NonPositiveWeight, x).into())
    }
}

/// `(δ² + |x|²)^{a/2}`, the regularized power weight.
pub fn power_weight(dim: usize, a: f64, delta: f64) -> FunctionSpec {
    let norm: Vec<String> = (1..=dim).map(|i| format!("x{i}*x{i}")).collect();
    let text = format!("pow({:?} + {}, {:?})", delta * delta, norm.join(" + "), a / 2.0);
    parse_function(&text).expect("weight expression").with_dim(dim)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub p1: f64,
    pub p2: f64,
    pub p: f64,
    pub constant: f64,
    pub argmax: Cube,
    pub scan_size: usize,
    pub resolution: usize,
}

/// Cubes of side `2^j` for `j` from -3 up to the full extent, centred on
/// lattices inside `[-extent, extent]^n`.
pub fn default_ap_cubes(dim: usize, extent: f64) -> Result<Vec<Cube>> {
    if !(extent > 0.0) {
        return Err(Error::precondition("extent must be positive"));
    }
    let per_axis = if dim <= 1 { 64.0 } else { 12.0 };
    let mut out = Vec::new();
    let top = (2.0 * extent).log2().floor() as i32;
    for j in -3..=top {
        let s = 2f64.powi(j);
        let reach = extent - s / 2.0;
        if reach < 0.0 {
            continue;
        }
        let spacing = (s / 2.0).max(2.0 * reach / per_axis);
        for c in lattice(dim, reach, spacing) {
            out.push(Cube::new(c, s / 2.0)?);
        }
    }
    Ok(out)
}

fn check_cubes(cubes: &[Cube], dim: usize) -> Result<()> {
    if cubes.is_empty() {
        return Err(Error::precondition("cube scan is empty"));
    }
    if let Some(q) = cubes.iter().find(|q| q.dim() < dim) {
        return Err(Error::precondition(format!("cube {q:?} has fewer than {dim} dimensions")));
    }
    Ok(())
}

fn cube_grid(w: &VectorWeight, q: &Cube, res: usize) -> TensorGrid {
    TensorGrid::for_cube(&w.combined(), q, res)
}

/// `sup_Q ⨍w · (⨍w₁^{1-p₁'})^{p/p₁'} · (⨍w₂^{1-p₂'})^{p/p₂'}` over `cubes`.
pub fn vector_ap_constant(vw: &VectorWeight, cubes: &[Cube], resolution: usize) -> Result<WeightReport> {
    check_resolution(resolution)?;
    check_cubes(cubes, vw.dim())?;
    let p = vw.p();
    let (c1, c2) = (conjugate(vw.p1), conjugate(vw.p2));
    let vals: Vec<Result<f64>> = cubes
        .par_iter()
        .map(|q| {
            let grid = cube_grid(vw, q, resolution);
            let w1 = grid.sample(&vw.w1)?;
            let w2 = grid.sample(&vw.w2)?;
            let mut buf = vec![0.0; grid.dim()];
            for (i, (a, b)) in w1.iter().zip(&w2).enumerate() {
                if !(*a > 0.0 && *b > 0.0) {
                    grid.node(i, &mut buf);
                    return Err(DomainError::new(DomainKind::NonPositiveWeight, &buf).into());
                }
            }
            let comb: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a.powf(p / vw.p1) * b.powf(p / vw.p2)).collect();
            let d1: Vec<f64> = w1.iter().map(|a| a.powf(1.0 - c1)).collect();
            let d2: Vec<f64> = w2.iter().map(|b| b.powf(1.0 - c2)).collect();
            Ok(grid.weighted_mean(&comb) * grid.weighted_mean(&d1).powf(p / c1) * grid.weighted_mean(&d2).powf(p / c2))
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in vals.into_iter().enumerate() {
        let v = v?;
        if v > best.0 {
            best = (v, i);
        }
    }
    Ok(WeightReport {
        p1: vw.p1,
        p2: vw.p2,
        p,
        constant: best.0,
        argmax: cubes[best.1].clone(),
        scan_size: cubes.len(),
        resolution,
    })
}

/// Scalar `[w]_{A_q}` lower bound: `sup_Q ⨍w (⨍w^{1-q'})^{q-1}`.
pub fn scalar_ap_constant(w: &dyn RealFn, q_exp: f64, cubes: &[Cube], resolution: usize) -> Result<f64> {
    check_resolution(resolution)?;
    check_cubes(cubes, w.dim())?;
    if !(q_exp > 1.0) {
        return Err(Error::precondition("A_q exponent must exceed 1"));
    }
    let c = conjugate(q_exp);
    let vals: Vec<Result<f64>> = cubes
        .par_iter()
        .map(|q| {
            let grid = TensorGrid::for_cube(w, q, resolution);
            let v = grid.sample(w)?;
            if let Some(i) = v.iter().position(|a| !(*a > 0.0)) {
                let mut buf = vec![0.0; grid.dim()];
                grid.node(i, &mut buf);
                return Err(DomainError::new(DomainKind::NonPositiveWeight, &buf).into());
            }
            let dual: Vec<f64> = v.iter().map(|a| a.powf(1.0 - c)).collect();
            Ok(grid.weighted_mean(&v) * grid.weighted_mean(&dual).powf(q_exp - 1.0))
        })
        .collect();
    let mut m = f64::NEG_INFINITY;
    for v in vals {
        m = m.max(v?);
    }
    Ok(m)
}

/// `(∫_E |h|^p w)^{1/p}` by midpoint quadrature on `region`.
pub fn weighted_lp_norm(h: &dyn RealFn, w: &dyn RealFn, p: f64, region: &Cube, resolution: usize) -> Result<f64> {
    check_resolution(resolution)?;
    check_dim(h, region)?;
    check_dim(w, region)?;
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::precondition(format!("p must be positive, got {p}")));
    }
    let grid = TensorGrid {
        axes: (0..region.dim())
            .map(|a| {
                let mut b = h.breakpoints(a);
                b.extend(w.breakpoints(a));
                AxisRule::midpoint(region.lo(a), region.hi(a), resolution, &b)
            })
            .collect(),
    };
    let hv = grid.sample(h)?;
    let wv = grid.sample(w)?;
    let weights = grid.weights();
    let mut buf = vec![0.0; grid.dim()];
    let mut terms = Vec::with_capacity(hv.len());
    for i in 0..hv.len() {
        if !(wv[i] > 0.0) {
            grid.node(i, &mut buf);
            return Err(DomainError::new(DomainKind::NonPositiveWeight, &buf).into());
        }
        terms.push(weights[i] * hv[i].abs().powf(p) * wv[i]);
    }
    Ok(pairwise_sum(&terms).powf(1.0 / p))
}

/// The same norm for values already sampled at midpoint nodes of cells of
/// volume `cell_volume`.
pub fn weighted_lp_norm_samples(
    points: &[Vec<f64>],
    values: &[f64],
    cell_volume: f64,
    w: &dyn RealFn,
    p: f64,
) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::precondition(format!("p must be positive, got {p}")));
    }
    if points.len() != values.len() {
        return Err(Error::precondition("points and values differ in length"));
    }
    let mut terms = Vec::with_capacity(values.len());
    for (x, v) in points.iter().zip(values) {
        let wx = positive(w, x)?;
        terms.push(cell_volume * v.abs().powf(p) * wx);
    }
    Ok(pairwise_sum(&terms).powf(1.0 / p))
}

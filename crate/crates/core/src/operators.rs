//! Quadrature realizations of `T`, `T_η`, the commutators `[b,T]₁`,
//! `[b,T]₂`, the bilinear maximal operator `ℳ`, and the truncation gap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DomainError, DomainKind, Error, Result};
use crate::funcspace::quadrature::{check_resolution, pairwise_sum, TensorGrid};
use crate::funcspace::{cube_average, Cube, RealFn};
use crate::kernels::BilinearKernel;

/// A function with a declared (closed) support box.
#[derive(Clone, Copy)]
pub struct Supported<'a> {
    pub f: &'a dyn RealFn,
    pub support: &'a Cube,
    pub id: &'a str,
}

impl<'a> Supported<'a> {
    pub fn new(f: &'a dyn RealFn, support: &'a Cube, id: &'a str) -> Self {
        Supported { f, support, id }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureBox {
    pub y_lo: Vec<f64>,
    pub y_hi: Vec<f64>,
    pub z_lo: Vec<f64>,
    pub z_hi: Vec<f64>,
}

/// Values of an operator at evaluation points, with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorOutput {
    pub operator: String,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub quadrature_box: QuadratureBox,
    pub resolution: usize,
    pub kernel_id: String,
    pub b_id: Option<String>,
    pub f_id: String,
    pub g_id: String,
}

impl OperatorOutput {
    /// `x1,...,xn,value` rows.
    pub fn to_csv(&self) -> String {
        let n = self.points.first().map_or(1, Vec::len);
        let mut out: String = (1..=n).map(|i| format!("x{i},")).collect();
        out.push_str("value\n");
        for (p, v) in self.points.iter().zip(&self.values) {
            for c in p {
                out.push_str(&format!("{c},"));
            }
            out.push_str(&format!("{v}\n"));
        }
        out
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Default per-axis node count on each support box.
pub fn default_operator_resolution(dim: usize) -> usize {
    if dim <= 1 {
        48
    } else {
        24
    }
}

struct Plan {
    ys: Vec<Vec<f64>>,
    zs: Vec<Vec<f64>>,
    /// `w_i f(y_i)`
    wf: Vec<f64>,
    /// `w_j g(z_j)`
    wg: Vec<f64>,
}

impl Plan {
    fn new(f: Supported<'_>, g: Supported<'_>, resolution: usize) -> Result<Self> {
        let gy = TensorGrid::for_cube(f.f, f.support, resolution);
        let gz = TensorGrid::for_cube(g.f, g.support, resolution);
        let fy = gy.sample(f.f)?;
        let gz_vals = gz.sample(g.f)?;
        let wf = gy.weights().iter().zip(&fy).map(|(w, v)| w * v).collect();
        let wg = gz.weights().iter().zip(&gz_vals).map(|(w, v)| w * v).collect();
        Ok(Plan { ys: gy.points(), zs: gz.points(), wf, wg })
    }

    /// `Σ_i a_i Σ_j c_j(i) K(x, y_i, z_j)` in fixed order, where `outer`
    /// scales row `i` and `inner` scales column `j`.
    fn sum<K, A, C>(&self, x: &[f64], kernel: K, outer: A, inner: C) -> f64
    where
        K: Fn(&[f64], &[f64], &[f64]) -> f64,
        A: Fn(usize) -> f64,
        C: Fn(usize) -> f64,
    {
        let mut rows = Vec::with_capacity(self.ys.len());
        let mut row = Vec::with_capacity(self.zs.len());
        for (i, y) in self.ys.iter().enumerate() {
            let a = outer(i);
            if a == 0.0 {
                continue;
            }
            row.clear();
            for (j, z) in self.zs.iter().enumerate() {
                let c = inner(j);
                if c != 0.0 {
                    row.push(c * kernel(x, y, z));
                }
            }
            rows.push(a * pairwise_sum(&row));
        }
        pairwise_sum(&rows)
    }
}

fn check_inputs(k: &BilinearKernel, f: Supported<'_>, g: Supported<'_>, xs: &[Vec<f64>]) -> Result<()> {
    let n = k.dim;
    if f.support.dim() != n || g.support.dim() != n {
        return Err(Error::precondition(format!("support boxes must have dimension {n}")));
    }
    if f.f.dim() > n || g.f.dim() > n {
        return Err(Error::precondition("input functions read more coordinates than the kernel dimension"));
    }
    for x in xs {
        if x.len() != n {
            return Err(Error::precondition(format!("evaluation point {x:?} must have {n} coordinates")));
        }
        if k.truncation_eta.is_none() && !k.is_bounded() && in_closed(f.support, x) && in_closed(g.support, x) {
            return Err(Error::precondition(format!(
                "untruncated singular kernel {} evaluated at {x:?} inside both supports; truncate with eta > 0",
                k.id()
            )));
        }
    }
    Ok(())
}

fn in_closed(q: &Cube, x: &[f64]) -> bool {
    (0..q.dim()).all(|a| x[a] >= q.lo(a) && x[a] <= q.hi(a))
}

#[allow(clippy::too_many_arguments)]
fn output(
    op: &str,
    k: &BilinearKernel,
    b: Option<&str>,
    f: Supported<'_>,
    g: Supported<'_>,
    xs: &[Vec<f64>],
    values: Vec<f64>,
    resolution: usize,
) -> OperatorOutput {
    let n = k.dim;
    OperatorOutput {
        operator: op.to_string(),
        points: xs.to_vec(),
        values,
        quadrature_box: QuadratureBox {
            y_lo: (0..n).map(|a| f.support.lo(a)).collect(),
            y_hi: (0..n).map(|a| f.support.hi(a)).collect(),
            z_lo: (0..n).map(|a| g.support.lo(a)).collect(),
            z_hi: (0..n).map(|a| g.support.hi(a)).collect(),
        },
        resolution,
        kernel_id: k.id(),
        b_id: b.map(str::to_string),
        f_id: f.id.to_string(),
        g_id: g.id.to_string(),
    }
}

fn finite(v: f64, x: &[f64]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DomainError::new(DomainKind::NonFinite, x).into())
    }
}

/// `T(f,g)(x) = ∫∫ K(x,y,z) f(y) g(z) dy dz` by tensor midpoint
/// quadrature over the two support boxes.
pub fn apply_t(
    k: &BilinearKernel,
    f: Supported<'_>,
    g: Supported<'_>,
    xs: &[Vec<f64>],
    resolution: usize,
) -> Result<OperatorOutput> {
    check_resolution(resolution)?;
    check_inputs(k, f, g, xs)?;
    let plan = Plan::new(f, g, resolution)?;
    let values: Vec<Result<f64>> = xs
        .par_iter()
        .map(|x| {
            let v = plan.sum(x, |x, y, z| k.eval(x, y, z), |i| plan.wf[i], |j| plan.wg[j]);
            finite(v, x)
        })
        .collect();
    let values = values.into_iter().collect::<Result<_>>()?;
    Ok(output("T", k, None, f, g, xs, values, resolution))
}

/// Which argument the symbol moves onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    First,
    Second,
}

impl Slot {
    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            1 => Ok(Slot::First),
            2 => Ok(Slot::Second),
            _ => Err(Error::precondition(format!("commutator index must be 1 or 2, got {i}"))),
        }
    }
}

/// Both evaluations of `[b,T]_i(f,g)` and their agreement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutatorOutput {
    /// Quadrature of `∫∫ [b(x) - b(·)] K f g`.
    pub integrand: OperatorOutput,
    /// `b(x)·T(f,g)(x) - T(bf, g)(x)` (or `T(f, bg)` for `i = 2`).
    pub operator_form: Vec<f64>,
    pub max_relative_difference: f64,
    pub consistent: bool,
}

/// `[b,T]_i(f,g)` in integrand form plus the operator-form cross-check.
#[allow(clippy::too_many_arguments)]
pub fn commutator(
    slot: Slot,
    b: &dyn RealFn,
    b_id: &str,
    k: &BilinearKernel,
    f: Supported<'_>,
    g: Supported<'_>,
    xs: &[Vec<f64>],
    resolution: usize,
) -> Result<CommutatorOutput> {
    check_resolution(resolution)?;
    check_inputs(k, f, g, xs)?;
    if b.dim() > k.dim {
        return Err(Error::precondition("b reads more coordinates than the kernel dimension"));
    }
    let plan = Plan::new(f, g, resolution)?;
    let moving: Vec<f64> = match slot {
        Slot::First => plan.ys.iter().map(|y| b.eval(y)).collect::<std::result::Result<_, _>>()?,
        Slot::Second => plan.zs.iter().map(|z| b.eval(z)).collect::<std::result::Result<_, _>>()?,
    };
    let kern = |x: &[f64], y: &[f64], z: &[f64]| k.eval(x, y, z);
    let pairs: Vec<Result<(f64, f64)>> = xs
        .par_iter()
        .map(|x| {
            let bx = b.eval(x)?;
            let integrand = match slot {
                Slot::First => plan.sum(x, kern, |i| (bx - moving[i]) * plan.wf[i], |j| plan.wg[j]),
                Slot::Second => plan.sum(x, kern, |i| plan.wf[i], |j| (bx - moving[j]) * plan.wg[j]),
            };
            let t = plan.sum(x, kern, |i| plan.wf[i], |j| plan.wg[j]);
            let moved = match slot {
                Slot::First => plan.sum(x, kern, |i| moving[i] * plan.wf[i], |j| plan.wg[j]),
                Slot::Second => plan.sum(x, kern, |i| plan.wf[i], |j| moving[j] * plan.wg[j]),
            };
            Ok((finite(integrand, x)?, finite(bx * t - moved, x)?))
        })
        .collect();
    let pairs: Vec<(f64, f64)> = pairs.into_iter().collect::<Result<_>>()?;
    let scale = pairs.iter().fold(0.0f64, |m, p| m.max(p.0.abs()));
    let max_rel = pairs
        .iter()
        .map(|(a, b)| if scale == 0.0 { (a - b).abs() } else { (a - b).abs() / scale })
        .fold(0.0, f64::max);
    let op = match slot {
        Slot::First => "[b,T]_1",
        Slot::Second => "[b,T]_2",
    };
    Ok(CommutatorOutput {
        integrand: output(op, k, Some(b_id), f, g, xs, pairs.iter().map(|p| p.0).collect(), resolution),
        operator_form: pairs.iter().map(|p| p.1).collect(),
        max_relative_difference: max_rel,
        consistent: max_rel <= 1e-6,
    })
}

/// Cubes containing `x` over which `ℳ` is maximized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalScan {
    pub sides: Vec<f64>,
    /// Offsets per side: `x` sits at fraction `(a + ½)/alignments` of the cube.
    pub alignments: usize,
    pub centered_radii: Vec<f64>,
    pub resolution: usize,
}

impl Default for MaximalScan {
    fn default() -> Self {
        MaximalScan {
            sides: (-6..=6).map(|j| 2f64.powi(j)).collect(),
            alignments: 4,
            centered_radii: (-6..=6).map(|j| 2f64.powi(j) / 2.0).collect(),
            resolution: 64,
        }
    }
}

impl MaximalScan {
    pub fn cubes(&self, x: &[f64]) -> Result<Vec<Cube>> {
        let mut out = Vec::new();
        for &s in &self.sides {
            for a in 0..self.alignments {
                let frac = (a as f64 + 0.5) / self.alignments as f64;
                let lo: Vec<f64> = x.iter().map(|c| c - frac * s).collect();
                out.push(Cube::from_corner(&lo, s)?);
            }
        }
        for &r in &self.centered_radii {
            out.push(Cube::new(x.to_vec(), r)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalValue {
    pub value: f64,
    pub argmax: Cube,
    pub cubes_scanned: usize,
}

/// Lower bound for `ℳ(f,g)(x) = sup_{Q∋x} ⨍_Q|f| ⨍_Q|g|` over the scan.
pub fn bilinear_maximal(f: &dyn RealFn, g: &dyn RealFn, x: &[f64], scan: &MaximalScan) -> Result<MaximalValue> {
    check_resolution(scan.resolution)?;
    let cubes = scan.cubes(x)?;
    if cubes.is_empty() {
        return Err(Error::precondition("maximal-function scan is empty"));
    }
    let af = crate::funcspace::quadrature::Abs(f);
    let ag = crate::funcspace::quadrature::Abs(g);
    let vals: Vec<Result<f64>> = cubes
        .par_iter()
        .map(|q| Ok(cube_average(&af, q, scan.resolution)? * cube_average(&ag, q, scan.resolution)?))
        .collect();
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in vals.into_iter().enumerate() {
        let v = v?;
        if v > best.0 {
            best = (v, i);
        }
    }
    Ok(MaximalValue { value: best.0, argmax: cubes[best.1].clone(), cubes_scanned: cubes.len() })
}

/// `sup |∇b|` over a lattice of `region` by central differences.
pub fn gradient_sup(b: &dyn RealFn, region: &Cube, points_per_axis: usize) -> Result<f64> {
    let n = region.dim();
    let grid = TensorGrid::on_box(
        &(0..n).map(|a| region.lo(a)).collect::<Vec<_>>(),
        &(0..n).map(|a| region.hi(a)).collect::<Vec<_>>(),
        points_per_axis.max(1),
    );
    let h = 1e-5 * (1.0 + region.half_side());
    let pts = grid.points();
    let vals: Vec<Result<f64>> = pts
        .par_iter()
        .map(|p| {
            let mut sq = 0.0;
            let mut q = p.clone();
            for a in 0..n {
                q[a] = p[a] + h;
                let up = b.eval(&q)?;
                q[a] = p[a] - h;
                let down = b.eval(&q)?;
                q[a] = p[a];
                let d = (up - down) / (2.0 * h);
                sq += d * d;
            }
            Ok(sq.sqrt())
        })
        .collect();
    let mut m = 0.0f64;
    for v in vals {
        m = m.max(v?);
    }
    Ok(m)
}

/// Per-`η` row of the truncation-gap report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationGapRow {
    pub eta: f64,
    pub gaps: Vec<f64>,
    pub maximal: Vec<f64>,
    pub sup_gap: f64,
    /// `sup_x gap(x) / (η ‖∇b‖∞ ℳ(f,g)(x))`.
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationGapReport {
    pub kernel_id: String,
    pub b_id: String,
    pub points: Vec<Vec<f64>>,
    pub gradient_sup: f64,
    pub resolution: usize,
    pub rows: Vec<TruncationGapRow>,
    /// Log-log slope of `sup gap` against `η`.
    pub slope: f64,
    pub constant_ratio: f64,
}

/// `|[b,T]₁(f,g)(x) - [b,T_η]₁(f,g)(x)|` through the difference kernel
/// `K·φ₁(2s/η)`, integrated over `[x-η, x+η]^{2n}`.
pub fn truncation_gap_at(
    b: &dyn RealFn,
    k: &BilinearKernel,
    eta: f64,
    f: &dyn RealFn,
    g: &dyn RealFn,
    x: &[f64],
    resolution: usize,
) -> Result<f64> {
    let lo: Vec<f64> = x.iter().map(|c| c - eta).collect();
    let hi: Vec<f64> = x.iter().map(|c| c + eta).collect();
    let grid = TensorGrid::on_box(&lo, &hi, resolution);
    let w = grid.weights();
    let pts = grid.points();
    let bx = b.eval(x)?;
    let fy: Vec<f64> = pts.iter().map(|p| f.eval(p)).collect::<std::result::Result<_, _>>()?;
    let gz: Vec<f64> = pts.iter().map(|p| g.eval(p)).collect::<std::result::Result<_, _>>()?;
    let by: Vec<f64> = pts.iter().map(|p| b.eval(p)).collect::<std::result::Result<_, _>>()?;
    let mut rows = Vec::with_capacity(pts.len());
    let mut row = Vec::with_capacity(pts.len());
    for (i, y) in pts.iter().enumerate() {
        let a = (bx - by[i]) * fy[i] * w[i];
        if a == 0.0 {
            continue;
        }
        row.clear();
        for (j, z) in pts.iter().enumerate() {
            let c = gz[j] * w[j];
            if c != 0.0 {
                row.push(c * k.cut_part(eta, x, y, z));
            }
        }
        rows.push(a * pairwise_sum(&row));
    }
    Ok(pairwise_sum(&rows).abs())
}

/// Truncation gap versus `η·M(f,g)` across `η`.
#[allow(clippy::too_many_arguments)]
pub fn truncation_gap(
    b: &dyn RealFn,
    b_id: &str,
    k: &BilinearKernel,
    etas: &[f64],
    f: &dyn RealFn,
    g: &dyn RealFn,
    xs: &[Vec<f64>],
    resolution: usize,
    scan: &MaximalScan,
) -> Result<TruncationGapReport> {
    check_resolution(resolution)?;
    if k.truncation_eta.is_some() {
        return Err(Error::precondition("truncation_gap takes the untruncated kernel"));
    }
    if etas.is_empty() || xs.is_empty() {
        return Err(Error::precondition("eta list and evaluation points must be non-empty"));
    }
    if let Some(e) = etas.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
        return Err(Error::precondition(format!("eta must lie in (0, 1], got {e}")));
    }
    if resolution % 2 == 1 {
        return Err(Error::precondition("truncation_gap needs an even resolution so no node sits at x"));
    }
    let n = k.dim;
    // gradient over the union of η-boxes
    let eta_max = etas.iter().cloned().fold(0.0, f64::max);
    let lo: Vec<f64> = (0..n).map(|a| xs.iter().map(|x| x[a]).fold(f64::INFINITY, f64::min) - eta_max).collect();
    let hi: Vec<f64> = (0..n).map(|a| xs.iter().map(|x| x[a]).fold(f64::NEG_INFINITY, f64::max) + eta_max).collect();
    let region = Cube::from_bounds(&lo, &hi).or_else(|_| {
        let c: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let half = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (b - a)).fold(0.0, f64::max);
        Cube::new(c, half)
    })?;
    let grad = gradient_sup(b, &region, if n == 1 { 4001 } else { 201 })?;
    let maximal: Vec<Result<f64>> = xs.par_iter().map(|x| Ok(bilinear_maximal(f, g, x, scan)?.value)).collect();
    let maximal: Vec<f64> = maximal.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &eta in etas {
        let gaps: Vec<Result<f64>> =
            xs.par_iter().map(|x| truncation_gap_at(b, k, eta, f, g, x, resolution)).collect();
        let gaps: Vec<f64> = gaps.into_iter().collect::<Result<_>>()?;
        let sup_gap = gaps.iter().cloned().fold(0.0, f64::max);
        let constant = gaps
            .iter()
            .zip(&maximal)
            .map(|(gp, m)| if *gp == 0.0 { 0.0 } else { gp / (eta * grad * m) })
            .fold(0.0, f64::max);
        rows.push(TruncationGapRow { eta, gaps, maximal: maximal.clone(), sup_gap, constant });
    }
    let slope = crate::kernels::loglog_slope(
        &rows.iter().map(|r| r.eta).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.sup_gap).collect::<Vec<_>>(),
    );
    let cmax = rows.iter().map(|r| r.constant).fold(0.0, f64::max);
    let cmin = rows.iter().map(|r| r.constant).fold(f64::INFINITY, f64::min);
    Ok(TruncationGapReport {
        kernel_id: k.id(),
        b_id: b_id.to_string(),
        points: xs.to_vec(),
        gradient_sup: grad,
        resolution,
        rows,
        slope,
        constant_ratio: if cmin > 0.0 { cmax / cmin } else { f64::INFINITY },
    })
}

//! Fréchet–Kolmogorov diagnostics for finite families of commutator
//! outputs, with the tail (`L₁`–`L₃`) and translation (`L₄`, `L₅`) splits.
//!
//! A finite family can only give evidence for compactness; every report
//! says so in its `note`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::quadrature::{check_resolution, pairwise_sum, TensorGrid};
use crate::funcspace::{parse_function, Cube, FunctionSpec, Interpolation, RealFn, SampledFunction};
use crate::kernels::{loglog_slope, separation, tail_constant_scaling, BilinearKernel, CutoffSplit};
use crate::operators::{apply_t, commutator, gradient_sup, Slot, Supported};
use crate::weights::{weighted_lp_norm, VectorWeight};

pub const FINITE_FAMILY_NOTE: &str =
    "finite-family evidence only: the three conditions are checked on the listed members, not on an infinite set";

/// Uniform cell-centred grid `origin + (i + ½)·spacing`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputGrid {
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub counts: Vec<usize>,
}

impl OutputGrid {
    /// Cells covering `[-half_width, half_width]^n`.
    pub fn centered(dim: usize, half_width: f64, spacing: f64) -> Result<Self> {
        if dim == 0 || !(half_width > 0.0 && spacing > 0.0) {
            return Err(Error::precondition("grid needs positive dimension, half-width and spacing"));
        }
        let per = (2.0 * half_width / spacing).round().max(1.0) as usize;
        Ok(OutputGrid { origin: vec![-half_width; dim], spacing, counts: vec![per; dim] })
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..self.len())
            .map(|mut idx| {
                (0..n)
                    .map(|k| {
                        let i = idx % self.counts[k];
                        idx /= self.counts[k];
                        self.origin[k] + (i as f64 + 0.5) * self.spacing
                    })
                    .collect()
            })
            .collect()
    }
}

/// Grid samples of a finite family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub grid: OutputGrid,
    pub ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub note: String,
}

impl Family {
    /// Samples plain functions on the grid.
    pub fn from_functions(grid: OutputGrid, members: &[(&dyn RealFn, String)]) -> Result<Self> {
        let pts = grid.points();
        let mut values = Vec::with_capacity(members.len());
        for (f, _) in members {
            let v: Vec<Result<f64>> = pts.par_iter().map(|p| Ok(f.eval(p)?)).collect();
            values.push(v.into_iter().collect::<Result<Vec<f64>>>()?);
        }
        Ok(Family {
            grid,
            ids: members.iter().map(|m| m.1.clone()).collect(),
            values,
            note: FINITE_FAMILY_NOTE.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One dictionary entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputPair {
    pub id: String,
    pub f: FunctionSpec,
    pub f_support: Cube,
    pub g: FunctionSpec,
    pub g_support: Cube,
}

/// Resolution used to normalize and to check normalization.
const NORM_RESOLUTION: usize = 256;

fn norm_resolution(dim: usize) -> usize {
    if dim <= 1 {
        NORM_RESOLUTION
    } else {
        64
    }
}

fn bump_text(center: &[f64], radius: f64) -> String {
    if center.len() == 1 {
        return format!("bump((x1 - ({:?}))/{:?})", center[0], radius);
    }
    let terms: Vec<String> = center
        .iter()
        .enumerate()
        .map(|(i, c)| format!("((x{k} - ({c:?}))/{radius:?})*((x{k} - ({c:?}))/{radius:?})", k = i + 1))
        .collect();
    format!("bump(sqrt({}))", terms.join(" + "))
}

/// `c·bump((x - center)/radius)` with `‖·‖_{L^p_w} = 1`.
pub fn normalized_bump(center: &[f64], radius: f64, w: &dyn RealFn, p: f64) -> Result<(FunctionSpec, Cube)> {
    let dim = center.len();
    let raw = parse_function(&bump_text(center, radius))?.with_dim(dim);
    let support = Cube::new(center.to_vec(), radius)?;
    let norm = weighted_lp_norm(&raw, w, p, &support, norm_resolution(dim))?;
    if !(norm > 0.0) {
        return Err(Error::precondition("bump has zero norm"));
    }
    let f = parse_function(&format!("{:?}*{}", 1.0 / norm, bump_text(center, radius)))?.with_dim(dim);
    Ok((f, support))
}

/// Eight bump pairs at varied centres and scales, normalized in
/// `L^{p₁}_{w₁} × L^{p₂}_{w₂}`.
pub fn bump_dictionary(dim: usize, vw: &VectorWeight) -> Result<Vec<InputPair>> {
    let specs: [(f64, f64, f64, f64); 8] = [
        (0.0, 1.0, 0.0, 1.0),
        (1.0, 0.5, -1.0, 0.5),
        (-2.0, 1.5, 0.5, 1.0),
        (2.5, 1.0, 2.0, 2.0),
        (-1.0, 2.0, -1.5, 1.5),
        (0.5, 0.75, 0.0, 2.0),
        (3.0, 2.0, -3.0, 2.0),
        (-3.5, 1.0, -2.5, 0.75),
    ];
    specs
        .iter()
        .enumerate()
        .map(|(i, &(cf, rf, cg, rg))| {
            let mut center_f = vec![0.0; dim];
            let mut center_g = vec![0.0; dim];
            center_f[0] = cf;
            center_g[0] = cg;
            let (f, f_support) = normalized_bump(&center_f, rf, &vw.w1, vw.p1)?;
            let (g, g_support) = normalized_bump(&center_g, rg, &vw.w2, vw.p2)?;
            Ok(InputPair { id: format!("pair{i}"), f, f_support, g, g_support })
        })
        .collect()
}

/// `[b,T_η]₁(f,g)` on the grid for every dictionary pair.
pub fn commutator_family(
    b: &dyn RealFn,
    b_id: &str,
    k_eta: &BilinearKernel,
    dictionary: &[InputPair],
    vw: &VectorWeight,
    grid: &OutputGrid,
    resolution: usize,
) -> Result<Family> {
    if k_eta.truncation_eta.is_none() {
        return Err(Error::precondition("commutator_family needs a truncated kernel (eta > 0)"));
    }
    if grid.dim() != k_eta.dim {
        return Err(Error::precondition("grid dimension differs from the kernel's"));
    }
    let res = norm_resolution(grid.dim());
    for pair in dictionary {
        let nf = weighted_lp_norm(&pair.f, &vw.w1, vw.p1, &pair.f_support, res)?;
        let ng = weighted_lp_norm(&pair.g, &vw.w2, vw.p2, &pair.g_support, res)?;
        if nf > 1.0 + 1e-9 || ng > 1.0 + 1e-9 {
            return Err(Error::precondition(format!(
                "input pair {} is not normalized: norms {nf}, {ng}",
                pair.id
            )));
        }
    }
    let pts = grid.points();
    let mut values = Vec::with_capacity(dictionary.len());
    for pair in dictionary {
        let out = commutator(
            Slot::First,
            b,
            b_id,
            k_eta,
            Supported::new(&pair.f, &pair.f_support, "f"),
            Supported::new(&pair.g, &pair.g_support, "g"),
            &pts,
            resolution,
        )?;
        values.push(out.integrand.values);
    }
    Ok(Family {
        grid: grid.clone(),
        ids: dictionary.iter().map(|p| p.id.clone()).collect(),
        values,
        note: FINITE_FAMILY_NOTE.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkTolerances {
    pub bound_cap: f64,
    /// Tail tolerance as a fraction of `bounded_sup`.
    pub tail_rel: f64,
    /// Modulus tolerance as a fraction of `bounded_sup`.
    pub modulus_rel: f64,
}

impl Default for FkTolerances {
    fn default() -> Self {
        FkTolerances { bound_cap: 1e3, tail_rel: 1e-2, modulus_rel: 1e-2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkVerdict {
    pub bounded: bool,
    pub vanishes_at_infinity: bool,
    pub equicontinuous: bool,
}

impl FkVerdict {
    pub fn all(&self) -> bool {
        self.bounded && self.vanishes_at_infinity && self.equicontinuous
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactnessReport {
    pub family_size: usize,
    pub p: f64,
    pub bounded_sup: f64,
    /// `(A, sup over the family of ‖F‖_{L^p_w(|x|>A)})`.
    pub tail_norms: Vec<(f64, f64)>,
    /// `(|t|, sup over the family and axis directions of ‖F(·+t) - F‖)`.
    pub modulus: Vec<(f64, f64)>,
    pub tolerances: FkTolerances,
    pub verdict: FkVerdict,
    pub note: String,
}

impl CompactnessReport {
    /// Tail and modulus curves as two CSV tables.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("curve,parameter,value\n");
        for (a, v) in &self.tail_norms {
            out.push_str(&format!("tail,{a},{v}\n"));
        }
        for (t, v) in &self.modulus {
            out.push_str(&format!("modulus,{t},{v}\n"));
        }
        out
    }
}

/// Measures the three conditions on the grid samples of `family`.
pub fn fk_check(
    family: &Family,
    w: &dyn RealFn,
    p: f64,
    a_list: &[f64],
    t_list: &[f64],
    tol: &FkTolerances,
) -> Result<CompactnessReport> {
    if family.is_empty() {
        return Err(Error::precondition("family is empty"));
    }
    if !(p > 0.0) {
        return Err(Error::precondition("p must be positive"));
    }
    if a_list.is_empty() || a_list.windows(2).any(|x| x[1] <= x[0]) {
        return Err(Error::precondition("A list must be non-empty and increasing"));
    }
    if t_list.is_empty() || t_list.windows(2).any(|x| x[1].abs() >= x[0].abs()) {
        return Err(Error::precondition("t list must be non-empty and decreasing in |t|"));
    }
    let grid = &family.grid;
    let n = grid.dim();
    let pts = grid.points();
    let vol = grid.cell_volume();
    let wv: Vec<f64> = pts
        .iter()
        .map(|x| {
            let v = w.eval(x)?;
            if v > 0.0 {
                Ok(v)
            } else {
                Err(crate::error::DomainError::new(crate::error::DomainKind::NonPositiveWeight, x).into())
            }
        })
        .collect::<Result<_>>()?;
    let radius: Vec<f64> = pts.iter().map(|x| x.iter().map(|c| c * c).sum::<f64>().sqrt()).collect();
    let norm_where = |vals: &[f64], keep: &dyn Fn(usize) -> bool| {
        let terms: Vec<f64> = (0..vals.len())
            .map(|i| if keep(i) { vol * vals[i].abs().powf(p) * wv[i] } else { 0.0 })
            .collect();
        pairwise_sum(&terms).powf(1.0 / p)
    };
    let bounded_sup = family.values.iter().map(|v| norm_where(v, &|_| true)).fold(0.0, f64::max);
    let tail_norms: Vec<(f64, f64)> = a_list
        .iter()
        .map(|&a| {
            let m = family.values.iter().map(|v| norm_where(v, &|i| radius[i] > a)).fold(0.0, f64::max);
            (a, m)
        })
        .collect();
    let samplers: Vec<SampledFunction> = family
        .values
        .iter()
        .map(|v| SampledFunction::new(v.clone(), grid.origin.clone(), grid.spacing, grid.counts.clone(), Interpolation::Multilinear))
        .collect::<Result<_>>()?;
    let mut modulus = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let mut worst = 0.0f64;
        for axis in 0..n {
            for sgn in [1.0, -1.0] {
                for (s, v) in samplers.iter().zip(&family.values) {
                    let diffs: Vec<Result<f64>> = pts
                        .par_iter()
                        .map(|x| {
                            let mut y = x.clone();
                            y[axis] += sgn * t.abs();
                            Ok(s.eval(&y)?)
                        })
                        .collect();
                    let shifted: Vec<f64> = diffs.into_iter().collect::<Result<_>>()?;
                    let d: Vec<f64> = shifted.iter().zip(v).map(|(a, b)| a - b).collect();
                    worst = worst.max(norm_where(&d, &|_| true));
                }
            }
        }
        modulus.push((t.abs(), worst));
    }
    let tail_last = tail_norms.last().map_or(0.0, |x| x.1);
    let mod_last = modulus.last().map_or(0.0, |x| x.1);
    let verdict = FkVerdict {
        bounded: bounded_sup <= tol.bound_cap,
        vanishes_at_infinity: tail_last <= tol.tail_rel * bounded_sup,
        equicontinuous: mod_last <= tol.modulus_rel * bounded_sup,
    };
    Ok(CompactnessReport {
        family_size: family.len(),
        p,
        bounded_sup,
        tail_norms,
        modulus,
        tolerances: *tol,
        verdict,
        note: family.note.clone(),
    })
}

/// `sup |∇b|` over lattice points with `|ξ| ≥ r_in` inside `[-r_out, r_out]^n`.
pub fn gradient_sup_beyond(b: &dyn RealFn, dim: usize, r_in: f64, r_out: f64, points_per_axis: usize) -> Result<f64> {
    if !(r_out > r_in) {
        return Err(Error::precondition("outer radius must exceed inner radius"));
    }
    let lo = vec![-r_out; dim];
    let hi = vec![r_out; dim];
    let grid = TensorGrid::on_box(&lo, &hi, points_per_axis);
    let h = 1e-5 * (1.0 + r_out);
    let pts: Vec<Vec<f64>> =
        grid.points().into_iter().filter(|p| p.iter().map(|c| c * c).sum::<f64>().sqrt() >= r_in).collect();
    let vals: Vec<Result<f64>> = pts
        .par_iter()
        .map(|p| {
            let mut q = p.clone();
            let mut sq = 0.0;
            for a in 0..dim {
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailDecomposition {
    pub a: f64,
    pub points: Vec<Vec<f64>>,
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    pub l3: Vec<f64>,
    pub commutator: Vec<f64>,
    /// `sup |∇b|` over `|ξ| ≥ A/2 - 1`, used by `L₁` and `L₂`.
    pub gradient_far: f64,
    /// `sup |∇b|` over the region reached by the segments, used by `L₃`.
    pub gradient_global: f64,
    /// `sup_s φ₃(s)/s`, the size constant of `𝒦₃`.
    pub k3_constant: f64,
    /// `‖∇b‖∞ · C₃(A) · ‖f‖ ‖g‖`.
    pub l3_bound: f64,
    pub dominated: bool,
}

/// The `φ₁/φ₂/φ₃` split of `[b,T_η]₁(f,g)(x)` at points beyond `A`.
#[allow(clippy::too_many_arguments)]
pub fn tail_decomposition(
    b: &dyn RealFn,
    k_eta: &BilinearKernel,
    pair: &InputPair,
    vw: &VectorWeight,
    a: f64,
    xs: &[Vec<f64>],
    resolution: usize,
) -> Result<TailDecomposition> {
    check_resolution(resolution)?;
    let split = CutoffSplit::new(a)?;
    let n = k_eta.dim;
    if xs.is_empty() {
        return Err(Error::precondition("no evaluation points"));
    }
    if let Some(x) = xs.iter().find(|x| x.iter().map(|c| c * c).sum::<f64>().sqrt() <= a) {
        return Err(Error::precondition(format!("evaluation point {x:?} is not beyond A = {a}")));
    }
    let x_max = xs.iter().map(|x| x.iter().map(|c| c * c).sum::<f64>().sqrt()).fold(0.0, f64::max);
    let reach = x_max + pair.f_support.half_side() + (0..n).map(|i| pair.f_support.center()[i].abs()).fold(0.0, f64::max);
    let ppa = if n == 1 { 8001 } else { 201 };
    let gradient_far = gradient_sup_beyond(b, n, (a / 2.0 - 1.0).max(0.0), reach + 1.0, ppa)?;
    let region = Cube::centered(n, reach + 1.0)?;
    let gradient_global = gradient_sup(b, &region, ppa)?;
    let gy = TensorGrid::for_cube(&pair.f, &pair.f_support, resolution);
    let gz = TensorGrid::for_cube(&pair.g, &pair.g_support, resolution);
    let (ys, zs) = (gy.points(), gz.points());
    let fy = gy.sample(&pair.f)?;
    let gzv = gz.sample(&pair.g)?;
    let wy = gy.weights();
    let wz = gz.weights();
    let comm = commutator(
        Slot::First,
        b,
        "b",
        k_eta,
        Supported::new(&pair.f, &pair.f_support, "f"),
        Supported::new(&pair.g, &pair.g_support, "g"),
        xs,
        resolution,
    )?
    .integrand
    .values;
    let parts: Vec<[f64; 3]> = xs
        .par_iter()
        .map(|x| {
            let mut acc = [Vec::new(), Vec::new(), Vec::new()];
            for (i, y) in ys.iter().enumerate() {
                let a_i = wy[i] * fy[i].abs();
                if a_i == 0.0 {
                    continue;
                }
                let dxy = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
                let mut rows = [Vec::new(), Vec::new(), Vec::new()];
                for (j, z) in zs.iter().enumerate() {
                    let c = wz[j] * gzv[j].abs();
                    if c == 0.0 {
                        continue;
                    }
                    let s = separation(x, y, z);
                    let base = c * dxy * k_eta.eval(x, y, z).abs();
                    rows[0].push(base * split.phi1(s));
                    rows[1].push(base * split.phi2(s));
                    rows[2].push(base * split.phi3(s));
                }
                for k in 0..3 {
                    acc[k].push(a_i * pairwise_sum(&rows[k]));
                }
            }
            [pairwise_sum(&acc[0]), pairwise_sum(&acc[1]), pairwise_sum(&acc[2])]
        })
        .collect();
    let l1: Vec<f64> = parts.iter().map(|p| gradient_far * p[0]).collect();
    let l2: Vec<f64> = parts.iter().map(|p| gradient_far * p[1]).collect();
    let l3: Vec<f64> = parts.iter().map(|p| gradient_global * p[2]).collect();
    let dominated = (0..xs.len()).all(|i| l1[i] + l2[i] + l3[i] >= comm[i].abs() * (1.0 - 1e-9));
    let k3_constant = tail_constant_scaling(&[a], 20000)?[0].size_constant;
    let res = norm_resolution(n);
    let nf = weighted_lp_norm(&pair.f, &vw.w1, vw.p1, &pair.f_support, res)?;
    let ng = weighted_lp_norm(&pair.g, &vw.w2, vw.p2, &pair.g_support, res)?;
    Ok(TailDecomposition {
        a,
        points: xs.to_vec(),
        l1,
        l2,
        l3,
        commutator: comm,
        gradient_far,
        gradient_global,
        k3_constant,
        l3_bound: gradient_global * k3_constant * nf * ng,
        dominated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationRow {
    pub t: Vec<f64>,
    pub t_norm: f64,
    pub l4: Vec<f64>,
    pub l5: Vec<f64>,
    pub sup_l4: f64,
    pub sup_l5: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationReport {
    pub eta: f64,
    pub points: Vec<Vec<f64>>,
    pub rows: Vec<TranslationRow>,
    /// Log-log slopes of `sup L₄`, `sup L₅` against `|t|`.
    pub slope_l4: f64,
    pub slope_l5: f64,
}

/// `L₄ = |b(x) - b(x+t)|·|T_η(f,g)(x)|` and
/// `L₅ = |∫∫ [b(x+t) - b(y)][K_η(x,y,z) - K_η(x+t,y,z)] f g|`.
pub fn translation_continuity(
    b: &dyn RealFn,
    k_eta: &BilinearKernel,
    pair: &InputPair,
    ts: &[Vec<f64>],
    xs: &[Vec<f64>],
    resolution: usize,
) -> Result<TranslationReport> {
    check_resolution(resolution)?;
    let eta = k_eta
        .truncation_eta
        .ok_or_else(|| Error::precondition("translation_continuity needs a truncated kernel"))?;
    let n = k_eta.dim;
    for t in ts {
        let norm = t.iter().map(|c| c * c).sum::<f64>().sqrt();
        if t.len() != n || norm >= eta / 8.0 {
            return Err(Error::precondition(format!("|t| must be below eta/8 = {}, got {t:?}", eta / 8.0)));
        }
    }
    let sf = Supported::new(&pair.f, &pair.f_support, "f");
    let sg = Supported::new(&pair.g, &pair.g_support, "g");
    let t_eta = apply_t(k_eta, sf, sg, xs, resolution)?.values;
    let gy = TensorGrid::for_cube(&pair.f, &pair.f_support, resolution);
    let gz = TensorGrid::for_cube(&pair.g, &pair.g_support, resolution);
    let (ys, zs) = (gy.points(), gz.points());
    let wf: Vec<f64> = gy.weights().iter().zip(gy.sample(&pair.f)?).map(|(w, v)| w * v).collect();
    let wg: Vec<f64> = gz.weights().iter().zip(gz.sample(&pair.g)?).map(|(w, v)| w * v).collect();
    let by: Vec<f64> = ys.iter().map(|y| b.eval(y)).collect::<std::result::Result<_, _>>()?;
    let mut rows = Vec::with_capacity(ts.len());
    for t in ts {
        let vals: Vec<Result<(f64, f64)>> = xs
            .par_iter()
            .enumerate()
            .map(|(ix, x)| {
                let xt: Vec<f64> = x.iter().zip(t).map(|(a, b)| a + b).collect();
                let (bx, bxt) = (b.eval(x)?, b.eval(&xt)?);
                let l4 = (bx - bxt).abs() * t_eta[ix].abs();
                let mut acc = Vec::with_capacity(ys.len());
                let mut row = Vec::with_capacity(zs.len());
                for (i, y) in ys.iter().enumerate() {
                    let a = (bxt - by[i]) * wf[i];
                    if a == 0.0 {
                        continue;
                    }
                    row.clear();
                    for (j, z) in zs.iter().enumerate() {
                        if wg[j] != 0.0 {
                            row.push(wg[j] * (k_eta.eval(x, y, z) - k_eta.eval(&xt, y, z)));
                        }
                    }
                    acc.push(a * pairwise_sum(&row));
                }
                Ok((l4, pairwise_sum(&acc).abs()))
            })
            .collect();
        let vals: Vec<(f64, f64)> = vals.into_iter().collect::<Result<_>>()?;
        let l4: Vec<f64> = vals.iter().map(|v| v.0).collect();
        let l5: Vec<f64> = vals.iter().map(|v| v.1).collect();
        rows.push(TranslationRow {
            t: t.clone(),
            t_norm: t.iter().map(|c| c * c).sum::<f64>().sqrt(),
            sup_l4: l4.iter().cloned().fold(0.0, f64::max),
            sup_l5: l5.iter().cloned().fold(0.0, f64::max),
            l4,
            l5,
        });
    }
    let tn: Vec<f64> = rows.iter().map(|r| r.t_norm).collect();
    let slope = |v: Vec<f64>| if rows.len() >= 2 && v.iter().all(|x| *x > 0.0) { loglog_slope(&tn, &v) } else { f64::NAN };
    Ok(TranslationReport {
        eta,
        points: xs.to_vec(),
        slope_l4: slope(rows.iter().map(|r| r.sup_l4).collect()),
        slope_l5: slope(rows.iter().map(|r| r.sup_l5).collect()),
        rows,
    })
}

/// Largest `|K_η(x,y,z) - K_η(x+t,y,z)|` over random triples with
/// `s < η/4`, which must be exactly zero when `|t| < η/8`.
pub fn plateau_violation(k_eta: &BilinearKernel, t: &[f64], samples: usize, seed: u64) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let eta = k_eta
        .truncation_eta
        .ok_or_else(|| Error::precondition("plateau check needs a truncated kernel"))?;
    let n = k_eta.dim;
    let mut rng = rand_xoshiro::SplitMix64::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    for _ in 0..samples {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let s = rng.random_range(0.0..eta / 4.0);
        let split: f64 = rng.random();
        for k in 0..n {
            let dir = if n == 1 { 1.0 } else { rng.random_range(-1.0..1.0) };
            y[k] = x[k] + dir * split * s / (n as f64).sqrt();
            z[k] = x[k] - dir * (1.0 - split) * s / (n as f64).sqrt();
        }
        if separation(&x, &y, &z) >= eta / 4.0 {
            continue;
        }
        let xt: Vec<f64> = x.iter().zip(t).map(|(a, b)| a + b).collect();
        worst = worst.max((k_eta.eval(&x, &y, &z) - k_eta.eval(&xt, &y, &z)).abs());
    }
    Ok(worst)
}

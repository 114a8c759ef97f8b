//! The dyadic approximation pipeline: oscillation thresholds, the disjoint
//! dyadic family, the piecewise-constant projection `g_ε`, its mollification
//! `h_ε`, and the derivative-decay and BMO-error probes.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DomainError, DomainKind, Error, Result};
use crate::funcspace::quadrature::{check_resolution, gauss_legendre, pairwise_sum, Difference};
use crate::funcspace::{cube_average, Cube, RealFn};
use crate::oscillation::{bmo_norm_estimate, lattice, mean_oscillation, scan_max, BmoEstimate};

fn pow2(j: i32) -> f64 {
    2f64.powi(j)
}

/// Scan grids used to certify the thresholds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdScan {
    pub dim: usize,
    /// Dense lattice for the small-scale stage covers `[-L, L]^n`.
    pub small_half_width: f64,
    /// Translation stages scan centres in `[-region, region]^n`.
    pub region: f64,
    pub max_centers_per_axis: usize,
    pub resolution: usize,
    /// Lowest `j0` tried before giving up.
    pub j0_floor: i32,
}

impl ThresholdScan {
    pub fn default_for(dim: usize) -> Self {
        ThresholdScan {
            dim,
            small_half_width: if dim <= 1 { 50.0 } else { 8.0 },
            region: if dim <= 1 { 1e4 } else { 256.0 },
            max_centers_per_axis: if dim <= 1 { 4097 } else { 129 },
            resolution: crate::funcspace::default_resolution(dim).min(32),
            j0_floor: -16,
        }
    }

    fn validate(&self) -> Result<()> {
        check_resolution(self.resolution)?;
        if self.dim == 0 {
            return Err(Error::precondition("scan dimension must be positive"));
        }
        if !(self.region > 1.0 && self.small_half_width > 0.0) {
            return Err(Error::precondition("scan region must exceed 1 and small_half_width must be positive"));
        }
        if self.max_centers_per_axis < 3 {
            return Err(Error::precondition("max_centers_per_axis must be at least 3"));
        }
        if self.j0_floor > -1 {
            return Err(Error::precondition("j0_floor must be <= -1"));
        }
        Ok(())
    }

    fn centers(&self, half_width: f64, spacing: f64) -> Vec<Vec<f64>> {
        let min_spacing = 2.0 * half_width / (self.max_centers_per_axis - 1) as f64;
        lattice(self.dim, half_width, spacing.max(min_spacing))
    }
}

/// One certification scan behind a threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certification {
    /// `"j0"` or `"k=<k>"`.
    pub stage: String,
    pub threshold: i32,
    /// Cube half-side(s) scanned.
    pub half_sides: Vec<f64>,
    pub bound: f64,
    pub max_oscillation: f64,
    pub argmax_center: Vec<f64>,
    pub centers_scanned: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    pub epsilon: f64,
    pub j0: i32,
    /// `jk[0]` is the first translation threshold, and so on.
    pub jk: Vec<i32>,
    pub certifications: Vec<Certification>,
}

impl ThresholdSchedule {
    /// A schedule without scans, for building families directly.
    pub fn manual(epsilon: f64, j0: i32, jk: Vec<i32>) -> Result<Self> {
        let s = ThresholdSchedule { epsilon, j0, jk, certifications: Vec::new() };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::precondition("epsilon must be positive"));
        }
        if self.j0 > -1 {
            return Err(Error::precondition(format!("j0 must be <= -1, got {}", self.j0)));
        }
        if self.jk.is_empty() {
            return Err(Error::precondition("schedule needs at least one generation"));
        }
        let mut prev = self.j0;
        for &j in &self.jk {
            if j <= prev {
                return Err(Error::precondition(format!(
                    "thresholds must increase strictly: {} then {j}",
                    prev
                )));
            }
            prev = j;
        }
        Ok(())
    }

    pub fn k_max(&self) -> usize {
        self.jk.len()
    }
}

/// Greedy thresholds: the largest `j0` and the smallest `j(ε;k)` that the
/// scans certify.
pub fn select_thresholds<F: RealFn + ?Sized>(
    f: &F,
    epsilon: f64,
    scan: &ThresholdScan,
    k_max: usize,
) -> Result<ThresholdSchedule> {
    scan.validate()?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::precondition("epsilon must be positive"));
    }
    if k_max == 0 {
        return Err(Error::precondition("k_max must be at least 1"));
    }
    let mut certs = Vec::new();

    // stage 0: all cubes with side < 2^{j0+1}
    let mut j0 = None;
    let mut last_fail = None;
    for j in (scan.j0_floor..=-1).rev() {
        let top = pow2(j + 1);
        let sides = [top * (1.0 - 1.0 / 1024.0), 0.75 * top, 0.5 * top];
        let mut centers = scan.centers(scan.small_half_width, top / 4.0);
        centers.extend(scan.centers(scan.region - top, top));
        let cubes: Vec<Cube> = sides
            .iter()
            .flat_map(|s| centers.iter().map(move |c| Cube::new(c.clone(), s / 2.0)))
            .collect::<Result<_>>()?;
        let (max, i) = scan_max(&cubes, |q| mean_oscillation(f, q, scan.resolution))?;
        let cert = Certification {
            stage: "j0".into(),
            threshold: j,
            half_sides: sides.iter().map(|s| s / 2.0).collect(),
            bound: epsilon,
            max_oscillation: max,
            argmax_center: cubes[i].center().to_vec(),
            centers_scanned: cubes.len(),
        };
        if max < epsilon {
            certs.push(cert);
            j0 = Some(j);
            break;
        }
        last_fail = Some((cubes[i].clone(), max));
    }
    let j0 = match j0 {
        Some(j) => j,
        None => {
            let (witness, value) = last_fail.expect("at least one j0 candidate");
            return Err(Error::ConditionNotMet { stage: "j0".into(), witness, value, bound: epsilon });
        }
    };

    let max_j = scan.region.log2().floor() as i32;
    let mut jk: Vec<i32> = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let half = pow2(j0 + k as i32);
        let bound = pow2(k as i32 * j0) * epsilon;
        let centers = scan.centers(scan.region, half);
        let cubes: Vec<Cube> =
            centers.iter().map(|c| Cube::new(c.clone(), half)).collect::<Result<_>>()?;
        let osc: Vec<Result<f64>> =
            cubes.par_iter().map(|q| mean_oscillation(f, q, scan.resolution)).collect();
        let osc: Vec<f64> = osc.into_iter().collect::<Result<_>>()?;
        let norms: Vec<f64> =
            centers.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        let worst_beyond = |r: f64| {
            let mut best: Option<(f64, usize, usize)> = None;
            let mut count = 0;
            for (i, (&v, &nr)) in osc.iter().zip(&norms).enumerate() {
                if nr >= r {
                    count += 1;
                    if best.is_none_or(|b| v > b.0) {
                        best = Some((v, i, 0));
                    }
                }
            }
            best.map(|(v, i, _)| (v, i, count))
        };
        let start = jk.last().copied().unwrap_or(j0) + 1;
        let mut chosen = None;
        let mut fail = None;
        for j in start..=max_j {
            match worst_beyond(pow2(j)) {
                Some((v, i, count)) if v >= bound => fail = Some((v, i, count)),
                Some((v, i, count)) => {
                    chosen = Some((j, v, i, count));
                    break;
                }
                None => break,
            }
        }
        let stage = format!("k={k}");
        match chosen {
            Some((j, v, i, count)) => {
                certs.push(Certification {
                    stage,
                    threshold: j,
                    half_sides: vec![half],
                    bound,
                    max_oscillation: v,
                    argmax_center: centers[i].clone(),
                    centers_scanned: count,
                });
                jk.push(j);
            }
            None => {
                let (value, i) = match fail {
                    Some((v, i, _)) => (v, i),
                    None => {
                        return Err(Error::precondition(format!(
                            "scan region {} too small for stage {stage}",
                            scan.region
                        )))
                    }
                };
                return Err(Error::ConditionNotMet {
                    stage,
                    witness: cubes[i].clone(),
                    value,
                    bound,
                });
            }
        }
    }
    let schedule = ThresholdSchedule { epsilon, j0, jk, certifications: certs };
    schedule.validate()?;
    Ok(schedule)
}

/// One generation: dyadic cubes of side `2^level` tiling
/// `[-2^outer, 2^outer)^n` minus `[-2^inner, 2^inner)^n`.
#[derive(Debug, Clone)]
pub struct Generation {
    pub k: usize,
    pub level: i32,
    pub inner: Option<i32>,
    pub outer: i32,
    /// Integer lower-corner indices `m`; the cube is `2^level·([0,1)^n + m)`.
    pub indices: Vec<Vec<i64>>,
    /// Dense map from the enclosing box to positions in `indices`.
    table: Vec<u32>,
    per_axis: i64,
}

const HOLE: u32 = u32::MAX;

impl Generation {
    fn build(k: usize, level: i32, inner: Option<i32>, outer: i32, dim: usize) -> Result<Self> {
        if let Some(i) = inner {
            if i < level {
                return Err(Error::precondition(format!(
                    "annulus boundary 2^{i} is not aligned to side 2^{level}"
                )));
            }
        }
        if outer < level {
            return Err(Error::precondition(format!(
                "outer boundary 2^{outer} is not aligned to side 2^{level}"
            )));
        }
        let half = 1i64 << (outer - level).min(62);
        let per_axis = 2 * half;
        let total = (per_axis as u128).pow(dim as u32);
        if total > 50_000_000 {
            return Err(Error::precondition(format!(
                "generation {k} would hold {total} cells; reduce the schedule"
            )));
        }
        let hole = inner.map(|i| 1i64 << (i - level));
        let mut table = vec![HOLE; total as usize];
        let mut indices = Vec::new();
        for flat in 0..total as usize {
            let mut r = flat as i64;
            let mut m = Vec::with_capacity(dim);
            for _ in 0..dim {
                m.push(r % per_axis - half);
                r /= per_axis;
            }
            let in_hole = hole.is_some_and(|h| m.iter().all(|&v| v >= -h && v < h));
            if !in_hole {
                table[flat] = indices.len() as u32;
                indices.push(m);
            }
        }
        Ok(Generation { k, level, inner, outer, indices, table, per_axis })
    }

    pub fn side(&self) -> f64 {
        pow2(self.level)
    }

    pub fn cube(&self, i: usize) -> Cube {
        let s = self.side();
        let corner: Vec<f64> = self.indices[i].iter().map(|&m| m as f64 * s).collect();
        Cube::from_corner(&corner, s).expect("dyadic cube")
    }

    fn locate(&self, x: &[f64]) -> Option<usize> {
        let s = self.side();
        let half = self.per_axis / 2;
        let mut flat = 0i64;
        for k in (0..x.len()).rev() {
            let m = (x[k] / s).floor() as i64;
            if m < -half || m >= half {
                return None;
            }
            flat = flat * self.per_axis + (m + half);
        }
        match self.table[flat as usize] {
            HOLE => None,
            i => Some(i as usize),
        }
    }
}

/// The family `𝓕` with (optionally) the projected values `g_Q = f_Q`.
#[derive(Debug, Clone)]
pub struct DyadicApproximation {
    pub schedule: ThresholdSchedule,
    pub dim: usize,
    pub generations: Vec<Generation>,
    /// Per generation, aligned with `indices`; empty until projected.
    pub g_values: Vec<Vec<f64>>,
    pub resolution: Option<usize>,
}

/// Builds the skeleton: generation `k` has side `2^{j0+k-1}`.
pub fn build_family(schedule: &ThresholdSchedule, dim: usize) -> Result<DyadicApproximation> {
    schedule.validate()?;
    if dim == 0 {
        return Err(Error::precondition("dimension must be positive"));
    }
    let mut generations = Vec::with_capacity(schedule.k_max());
    for (i, &outer) in schedule.jk.iter().enumerate() {
        let inner = if i == 0 { None } else { Some(schedule.jk[i - 1]) };
        generations.push(Generation::build(i + 1, schedule.j0 + i as i32, inner, outer, dim)?);
    }
    Ok(DyadicApproximation {
        schedule: schedule.clone(),
        dim,
        generations,
        g_values: Vec::new(),
        resolution: None,
    })
}

impl DyadicApproximation {
    /// Half-width `2^{jk_max}` of the covered box.
    pub fn coverage(&self) -> f64 {
        pow2(*self.schedule.jk.last().expect("validated schedule"))
    }

    pub fn cube_count(&self) -> usize {
        self.generations.iter().map(|g| g.indices.len()).sum()
    }

    pub fn cubes(&self) -> impl Iterator<Item = Cube> + '_ {
        self.generations.iter().flat_map(|g| (0..g.indices.len()).map(move |i| g.cube(i)))
    }

    pub fn is_filled(&self) -> bool {
        !self.g_values.is_empty()
    }

    /// `(generation, index)` of the cube containing `x`, if covered.
    pub fn locate(&self, x: &[f64]) -> Option<(usize, usize)> {
        if x.len() < self.dim {
            return None;
        }
        let x = &x[..self.dim];
        for (gi, g) in self.generations.iter().enumerate() {
            let b = pow2(g.outer);
            if x.iter().all(|&v| v >= -b && v < b) {
                return g.locate(x).map(|i| (gi, i));
            }
        }
        None
    }

    /// `g_ε(x)`; an error outside the covered box.
    pub fn g(&self, x: &[f64]) -> Result<f64, DomainError> {
        if !self.is_filled() {
            return Err(DomainError::new(DomainKind::OutsideCoverage, x));
        }
        match self.locate(x) {
            Some((gi, i)) => Ok(self.g_values[gi][i]),
            None => Err(DomainError::new(DomainKind::OutsideCoverage, x)),
        }
    }

    /// `g_ε` at the nearest covered point, with a flag when clamped.
    fn g_clamped(&self, x: &[f64]) -> (f64, bool) {
        if let Some((gi, i)) = self.locate(x) {
            return (self.g_values[gi][i], false);
        }
        let b = self.coverage();
        let inside = b * (1.0 - 1e-12);
        let y: Vec<f64> = x.iter().map(|v| v.clamp(-b, inside)).collect();
        let (gi, i) = self.locate(&y).expect("clamped point is covered");
        (self.g_values[gi][i], true)
    }

    /// Cubes as JSON-friendly records.
    fn data(&self) -> ApproximationData {
        ApproximationData {
            schedule: self.schedule.clone(),
            dim: self.dim,
            resolution: self.resolution,
            generations: self
                .generations
                .iter()
                .enumerate()
                .map(|(gi, g)| {
                    let s = g.side();
                    GenerationData {
                        k: g.k,
                        side: s,
                        cubes: g
                            .indices
                            .iter()
                            .map(|m| CubeRecord { corner: m.iter().map(|&v| v as f64 * s).collect(), side: s })
                            .collect(),
                        g_values: self.g_values.get(gi).cloned().unwrap_or_default(),
                    }
                })
                .collect(),
        }
    }

    fn from_data(d: ApproximationData) -> Result<Self> {
        let mut approx = build_family(&d.schedule, d.dim)?;
        if d.generations.len() != approx.generations.len() {
            return Err(Error::precondition("generation count does not match the schedule"));
        }
        let mut g_values = Vec::new();
        for (g, gd) in approx.generations.iter().zip(&d.generations) {
            let s = g.side();
            if gd.side != s || gd.cubes.len() != g.indices.len() {
                return Err(Error::precondition(format!("generation {} does not match the schedule", g.k)));
            }
            for (m, rec) in g.indices.iter().zip(&gd.cubes) {
                let ok = rec.side == s && rec.corner.iter().zip(m).all(|(c, &v)| *c == v as f64 * s);
                if !ok {
                    return Err(Error::precondition(format!("cube list of generation {} is out of order", g.k)));
                }
            }
            if !gd.g_values.is_empty() {
                if gd.g_values.len() != g.indices.len() {
                    return Err(Error::precondition("g_values length mismatch"));
                }
                g_values.push(gd.g_values.clone());
            }
        }
        if !g_values.is_empty() && g_values.len() != approx.generations.len() {
            return Err(Error::precondition("g_values missing for some generations"));
        }
        approx.g_values = g_values;
        approx.resolution = d.resolution;
        Ok(approx)
    }
}

#[derive(Serialize, Deserialize)]
struct CubeRecord {
    corner: Vec<f64>,
    side: f64,
}

#[derive(Serialize, Deserialize)]
struct GenerationData {
    k: usize,
    side: f64,
    cubes: Vec<CubeRecord>,
    g_values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ApproximationData {
    schedule: ThresholdSchedule,
    dim: usize,
    resolution: Option<usize>,
    generations: Vec<GenerationData>,
}

impl Serialize for DyadicApproximation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.data().serialize(s)
    }
}

impl<'de> Deserialize<'de> for DyadicApproximation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let data = ApproximationData::deserialize(d)?;
        DyadicApproximation::from_data(data).map_err(serde::de::Error::custom)
    }
}

impl RealFn for DyadicApproximation {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Result<f64, DomainError> {
        self.g(x)
    }

    fn breakpoints(&self, axis: usize) -> Vec<f64> {
        // multiples of the finest side cover every cube face
        let s = pow2(self.schedule.j0);
        let b = self.coverage();
        let m = (b / s) as i64;
        let _ = axis;
        (-m..=m).map(|i| i as f64 * s).collect()
    }
}

/// Fills `g_Q = cube_average(f, Q)` for every cube of the family.
pub fn project_simple<F: RealFn + ?Sized>(
    f: &F,
    skeleton: &DyadicApproximation,
    resolution: usize,
) -> Result<DyadicApproximation> {
    check_resolution(resolution)?;
    if f.dim() > skeleton.dim {
        return Err(Error::precondition("function dimension exceeds the family's"));
    }
    let mut out = skeleton.clone();
    out.g_values = skeleton
        .generations
        .iter()
        .map(|g| {
            let vals: Vec<Result<f64>> = (0..g.indices.len())
                .into_par_iter()
                .map(|i| cube_average(f, &g.cube(i), resolution))
                .collect();
            vals.into_iter().collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    out.resolution = Some(resolution);
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdjacencyJump {
    pub max_jump: f64,
    pub witness: Option<(Cube, Cube)>,
    pub pairs_checked: usize,
}

/// `max |g_Q - g_Q'|` over all pairs of family cubes with touching
/// closures.
pub fn adjacency_jump(approx: &DyadicApproximation) -> Result<AdjacencyJump> {
    if !approx.is_filled() {
        return Err(Error::precondition("approximation has no g values"));
    }
    if approx.cube_count() == 0 {
        return Err(Error::precondition("family is empty"));
    }
    let n = approx.dim;
    let dirs: Vec<Vec<i32>> = (0..3usize.pow(n as u32))
        .map(|mut c| {
            (0..n)
                .map(|_| {
                    let d = (c % 3) as i32 - 1;
                    c /= 3;
                    d
                })
                .collect()
        })
        .filter(|d: &Vec<i32>| d.iter().any(|&v| v != 0))
        .collect();
    let items: Vec<(usize, usize)> = approx
        .generations
        .iter()
        .enumerate()
        .flat_map(|(gi, g)| (0..g.indices.len()).map(move |i| (gi, i)))
        .collect();
    // neighbours are at most one level finer, so two probes per free axis
    // at ±side/4 hit every touching cube
    let per_cube: Vec<(f64, usize, Option<(usize, usize)>)> = items
        .par_iter()
        .map(|&(gi, i)| {
            let g = &approx.generations[gi];
            let q = g.cube(i);
            let h = q.half_side();
            let mine = approx.g_values[gi][i];
            let mut best = (0.0f64, 0usize, None);
            let mut p = vec![0.0; n];
            for d in &dirs {
                let free: Vec<usize> = (0..n).filter(|&a| d[a] == 0).collect();
                for mask in 0..(1usize << free.len()) {
                    for a in 0..n {
                        p[a] = q.center()[a] + d[a] as f64 * (h + h / 4.0);
                    }
                    for (b, &a) in free.iter().enumerate() {
                        let sgn = if (mask >> b) & 1 == 1 { 1.0 } else { -1.0 };
                        p[a] = q.center()[a] + sgn * h / 2.0;
                    }
                    if let Some((gj, j)) = approx.locate(&p) {
                        best.1 += 1;
                        let jump = (approx.g_values[gj][j] - mine).abs();
                        if jump > best.0 || best.2.is_none() {
                            best = (jump.max(best.0), best.1, if jump >= best.0 { Some((gj, j)) } else { best.2 });
                        }
                    }
                }
            }
            best
        })
        .collect();
    let mut out = AdjacencyJump { max_jump: 0.0, witness: None, pairs_checked: 0 };
    let mut best_idx = None;
    for (idx, (jump, count, nb)) in per_cube.iter().enumerate() {
        out.pairs_checked += count;
        if nb.is_some() && (best_idx.is_none() || *jump > out.max_jump) {
            out.max_jump = *jump;
            best_idx = Some((idx, nb.unwrap()));
        }
    }
    if let Some((idx, (gj, j))) = best_idx {
        let (gi, i) = items[idx];
        out.witness = Some((approx.generations[gi].cube(i), approx.generations[gj].cube(j)));
    }
    Ok(out)
}

/// Unnormalized `exp(-1/(1-|x|²))` on the unit ball.
pub fn bump_profile(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// `c_n` with `∫ c_n·exp(-1/(1-|x|²)) dx = 1`, by radial Gauss–Legendre.
pub fn mollifier_constant(n: usize) -> f64 {
    static CACHE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = CACHE.get_or_init(|| (0..=4).map(radial_normalizer).collect());
    if n < table.len() {
        table[n]
    } else {
        radial_normalizer(n)
    }
}

fn radial_normalizer(n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (nodes, weights) = gauss_legendre(20);
    let pieces = 256;
    let mut terms = Vec::with_capacity(pieces * nodes.len());
    for p in 0..pieces {
        let a = p as f64 / pieces as f64;
        let h = 1.0 / pieces as f64;
        for (t, w) in nodes.iter().zip(&weights) {
            let r = a + h * (t + 1.0) / 2.0;
            terms.push(w * h / 2.0 * r.powi(n as i32 - 1) * bump_profile(r * r));
        }
    }
    let radial = pairwise_sum(&terms);
    // surface area of the unit sphere in ℝⁿ
    let nf = n as f64;
    let area = 2.0 * std::f64::consts::PI.powf(nf / 2.0) / gamma_half_integer(nf / 2.0);
    1.0 / (area * radial)
}

/// `Γ(x)` for `x` a positive integer or half-integer.
fn gamma_half_integer(x: f64) -> f64 {
    let mut v = if x.fract() == 0.0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut k = if x.fract() == 0.0 { 1.0 } else { 0.5 };
    while k < x {
        v *= k;
        k += 1.0;
    }
    v
}

/// The normalized mollifier `φ_r(u) = r^{-n} c_n exp(-1/(1-|u/r|²))`.
pub fn mollifier(u: &[f64], r: f64) -> f64 {
    let n = u.len();
    let r2 = u.iter().map(|v| v * v).sum::<f64>() / (r * r);
    mollifier_constant(n) * bump_profile(r2) / r.powi(n as i32)
}

/// `h_ε = g_ε ∗ φ_{2^{j0}}`, by Gauss–Legendre on the sub-boxes where
/// `g_ε` is constant.
///
/// Points whose ball leaves the covered box use the nearest covered value;
/// such evaluations are counted in [`Mollified::extension_hits`].
#[derive(Debug)]
pub struct Mollified<'a> {
    approx: &'a DyadicApproximation,
    radius: f64,
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    extension_hits: AtomicUsize,
}

/// Wraps a filled approximation as its mollification.
pub fn mollify(approx: &DyadicApproximation) -> Result<Mollified<'_>> {
    Mollified::with_order(approx, 16)
}

impl<'a> Mollified<'a> {
    pub fn with_order(approx: &'a DyadicApproximation, order: usize) -> Result<Self> {
        if !approx.is_filled() {
            return Err(Error::precondition("approximation has no g values"));
        }
        if order < 2 {
            return Err(Error::precondition("quadrature order must be at least 2"));
        }
        let (nodes, weights) = gauss_legendre(order);
        Ok(Mollified {
            approx,
            radius: pow2(approx.schedule.j0),
            order,
            nodes,
            weights,
            extension_hits: AtomicUsize::new(0),
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn extension_hits(&self) -> usize {
        self.extension_hits.load(Ordering::Relaxed)
    }

    pub fn approximation(&self) -> &DyadicApproximation {
        self.approx
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = self.approx.dim;
        let r = self.radius;
        // pieces of [x - r, x + r] between multiples of r
        let pieces: Vec<Vec<(f64, f64)>> = x[..n]
            .iter()
            .map(|&c| {
                let (lo, hi) = (c - r, c + r);
                let mut cuts = vec![lo];
                let mut m = (lo / r).floor() + 1.0;
                while m * r < hi {
                    cuts.push(m * r);
                    m += 1.0;
                }
                cuts.push(hi);
                cuts.windows(2).map(|w| (w[0], w[1])).filter(|(a, b)| b > a).collect()
            })
            .collect();
        let (g0, clamped0) = self.approx.g_clamped(x);
        let mut clamped = clamped0;
        let counts: Vec<usize> = pieces.iter().map(Vec::len).collect();
        let boxes: usize = counts.iter().product();
        let q = self.order;
        let nodes_per_box = q.pow(n as u32);
        let mut mass_terms = Vec::with_capacity(boxes * nodes_per_box);
        let mut diff_terms = Vec::with_capacity(boxes);
        let mut y = vec![0.0; n];
        let mut mid = vec![0.0; n];
        for b in 0..boxes {
            let mut rb = b;
            let mut sel = Vec::with_capacity(n);
            for k in 0..n {
                sel.push(pieces[k][rb % counts[k]]);
                rb /= counts[k];
                mid[k] = 0.5 * (sel[k].0 + sel[k].1);
            }
            let (gb, c) = self.approx.g_clamped(&mid);
            clamped |= c;
            let mut box_mass = Vec::with_capacity(nodes_per_box);
            for node in 0..nodes_per_box {
                let mut rn = node;
                let mut w = 1.0;
                for k in 0..n {
                    let i = rn % q;
                    rn /= q;
                    let (a, bb) = sel[k];
                    let h = 0.5 * (bb - a);
                    y[k] = a + h * (self.nodes[i] + 1.0);
                    w *= h * self.weights[i];
                }
                let u: Vec<f64> = (0..n).map(|k| x[k] - y[k]).collect();
                box_mass.push(w * mollifier(&u, r));
            }
            let m = pairwise_sum(&box_mass);
            mass_terms.push(m);
            diff_terms.push((gb - g0) * m);
        }
        if clamped {
            self.extension_hits.fetch_add(1, Ordering::Relaxed);
        }
        let mass = pairwise_sum(&mass_terms);
        g0 + pairwise_sum(&diff_terms) / mass
    }
}

impl RealFn for Mollified<'_> {
    fn dim(&self) -> usize {
        self.approx.dim
    }

    fn eval(&self, x: &[f64]) -> Result<f64, DomainError> {
        if x.len() < self.approx.dim {
            return Err(DomainError::new(DomainKind::MissingCoordinate, x));
        }
        Ok(self.value(x))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivativeProfile {
    pub alpha: Vec<usize>,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub step: f64,
    pub points_per_sphere: usize,
}

fn sphere_points(n: usize, r: f64) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![r], vec![-r]],
        2 => (0..64)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
                vec![r * t.cos(), r * t.sin()]
            })
            .collect(),
        _ => crate::oscillation::axis_directions(n)
            .into_iter()
            .map(|d| d.into_iter().map(|v| v * r).collect())
            .collect(),
    }
}

/// `D^α f(x)` by tensor central differences with step `h`.
pub fn finite_difference<F: RealFn + ?Sized>(f: &F, x: &[f64], alpha: &[usize], h: f64) -> Result<f64> {
    let mut stencil: Vec<(Vec<f64>, f64)> = vec![(x.to_vec(), 1.0)];
    for (axis, &order) in alpha.iter().enumerate() {
        let taps: &[(f64, f64)] = match order {
            0 => continue,
            1 => &[(1.0, 0.5), (-1.0, -0.5)],
            2 => &[(1.0, 1.0), (0.0, -2.0), (-1.0, 1.0)],
            _ => return Err(Error::precondition("derivative orders above 2 per axis are not supported")),
        };
        let scale = h.powi(order as i32);
        stencil = stencil
            .into_iter()
            .flat_map(|(p, w)| {
                taps.iter().map(move |&(off, c)| {
                    let mut q = p.clone();
                    q[axis] += off * h;
                    (q, w * c / scale)
                })
            })
            .collect();
    }
    let terms: Vec<f64> = stencil
        .iter()
        .map(|(p, w)| f.eval(p).map(|v| w * v))
        .collect::<std::result::Result<_, _>>()?;
    Ok(pairwise_sum(&terms))
}

/// Max `|D^α h_ε|` over the sphere of each radius, step `2^{j0}/8`.
pub fn derivative_decay(h: &Mollified<'_>, alpha: &[usize], radii: &[f64]) -> Result<DerivativeProfile> {
    let n = h.approx.dim;
    let order: usize = alpha.iter().sum();
    if alpha.len() != n || !(1..=2).contains(&order) {
        return Err(Error::precondition(format!(
            "multi-index must have {n} entries and order 1 or 2"
        )));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) || radii.is_empty() {
        return Err(Error::precondition("radii must be strictly increasing"));
    }
    let step = h.radius / 8.0;
    let margin = h.radius + 2.0 * step;
    let limit = h.approx.coverage() - margin;
    if let Some(r) = radii.iter().find(|&&r| r > limit) {
        return Err(Error::precondition(format!(
            "radius {r} is within the mollification margin of the coverage boundary {}",
            h.approx.coverage()
        )));
    }
    let mut values = Vec::with_capacity(radii.len());
    let mut per = 0;
    for &r in radii {
        let pts = sphere_points(n, r);
        per = pts.len();
        let vals: Vec<Result<f64>> =
            pts.par_iter().map(|p| finite_difference(h, p, alpha, step).map(f64::abs)).collect();
        let mut m = 0.0f64;
        for v in vals {
            m = m.max(v?);
        }
        values.push(m);
    }
    Ok(DerivativeProfile { alpha: alpha.to_vec(), radii: radii.to_vec(), values, step, points_per_sphere: per })
}

/// Test cubes in the three side regimes: below `2^{j0}`, in
/// `[2^{j0}, 2^{j0+1})`, and in each coarser generation band. Centres sweep
/// the covered box, with extra centres straddling every annulus boundary.
pub fn regime_cubes(approx: &DyadicApproximation, max_centers_per_side: usize) -> Result<Vec<Cube>> {
    let j0 = approx.schedule.j0;
    let mut sides = vec![0.5 * pow2(j0), 0.75 * pow2(j0), pow2(j0), 1.5 * pow2(j0)];
    for k in 2..=approx.schedule.k_max() {
        let s = pow2(j0 + k as i32 - 1);
        sides.push(s);
        sides.push(1.5 * s);
    }
    let b = approx.coverage();
    let n = approx.dim;
    let mut out = Vec::new();
    for s in sides {
        let half = s / 2.0;
        let reach = b - half;
        if reach <= 0.0 {
            continue;
        }
        let per_axis = ((max_centers_per_side as f64).powf(1.0 / n as f64).floor() as usize).max(3);
        let spacing = (s / 2.0).max(2.0 * reach / (per_axis - 1) as f64);
        let mut centers = lattice(n, reach, spacing);
        for &j in &approx.schedule.jk {
            let edge = pow2(j);
            for i in -4..=4 {
                let c = edge + i as f64 * s / 4.0;
                if c.abs() <= reach {
                    for axis in 0..n {
                        for sgn in [1.0, -1.0] {
                            let mut p = vec![0.0; n];
                            p[axis] = sgn * c;
                            centers.push(p);
                        }
                    }
                }
            }
        }
        for c in centers {
            out.push(Cube::new(c, half)?);
        }
    }
    Ok(out)
}

/// Lower bound for `‖f - g_ε‖_BMO` (or `‖f - h_ε‖_BMO`) over `cubes`.
pub fn approximation_error<F: RealFn + ?Sized>(
    f: &F,
    approx: &DyadicApproximation,
    mollified: bool,
    cubes: &[Cube],
    resolution: usize,
) -> Result<BmoEstimate> {
    let b = approx.coverage();
    if let Some(q) = cubes.iter().find(|q| (0..q.dim()).any(|a| q.lo(a) < -b || q.hi(a) > b)) {
        return Err(Error::precondition(format!("cube {q:?} leaves the covered box")));
    }
    if mollified {
        let h = mollify(approx)?;
        bmo_norm_estimate(&Difference(f, &h), cubes, resolution)
    } else {
        bmo_norm_estimate(&Difference(f, approx), cubes, resolution)
    }
}

/// `sup |g_ε - h_ε|` over a uniform grid of the covered box minus the
/// mollification margin.
pub fn mollification_gap(h: &Mollified<'_>, points_per_axis: usize) -> Result<(f64, Vec<f64>)> {
    let approx = h.approx;
    let reach = approx.coverage() - 2.0 * h.radius;
    if reach <= 0.0 {
        return Err(Error::precondition("covered box is too small for the mollifier"));
    }
    let spacing = 2.0 * reach / (points_per_axis.max(2) - 1) as f64;
    let pts = lattice(approx.dim, reach, spacing);
    let (v, i) = scan_max(&pts, |p| Ok((approx.g(p)? - h.value(p)).abs()))?;
    Ok((v, pts[i].clone()))
}

/// End-to-end results for one `ε`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineReport {
    pub epsilon: f64,
    pub schedule: ThresholdSchedule,
    pub cube_count: usize,
    pub coverage: f64,
    pub adjacency: AdjacencyJump,
    pub approximation_error: BmoEstimate,
    pub mollified_error: BmoEstimate,
    pub mollification_gap: f64,
    pub mollification_gap_at: Vec<f64>,
    pub derivative_profiles: Vec<DerivativeProfile>,
    pub extension_hits: usize,
    pub observed_constant: f64,
    pub resolution: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub epsilon: f64,
    pub k_max: usize,
    pub scan: ThresholdScan,
    pub resolution: usize,
    pub test_centers_per_side: usize,
    pub gap_points_per_axis: usize,
    pub derivative_radii: Vec<f64>,
}

impl PipelineConfig {
    pub fn default_for(dim: usize, epsilon: f64, k_max: usize) -> Self {
        PipelineConfig {
            epsilon,
            k_max,
            scan: ThresholdScan::default_for(dim),
            resolution: crate::funcspace::default_resolution(dim),
            test_centers_per_side: if dim <= 1 { 2001 } else { 400 },
            gap_points_per_axis: if dim <= 1 { 20001 } else { 201 },
            derivative_radii: vec![10.0, 100.0, 1000.0],
        }
    }
}

/// Thresholds, family, projection, mollification and all probes.
pub fn run_pipeline<F: RealFn + ?Sized>(f: &F, cfg: &PipelineConfig) -> Result<(DyadicApproximation, PipelineReport)> {
    let schedule = select_thresholds(f, cfg.epsilon, &cfg.scan, cfg.k_max)?;
    let skeleton = build_family(&schedule, cfg.scan.dim)?;
    let approx = project_simple(f, &skeleton, cfg.resolution)?;
    let adjacency = adjacency_jump(&approx)?;
    let cubes = regime_cubes(&approx, cfg.test_centers_per_side)?;
    let err = approximation_error(f, &approx, false, &cubes, cfg.resolution)?;
    let merr = approximation_error(f, &approx, true, &cubes, cfg.resolution)?;
    let h = mollify(&approx)?;
    let (gap, at) = mollification_gap(&h, cfg.gap_points_per_axis)?;
    let n = cfg.scan.dim;
    let radii: Vec<f64> = cfg
        .derivative_radii
        .iter()
        .copied()
        .filter(|&r| r < approx.coverage() - 2.0 * h.radius())
        .collect();
    let mut profiles = Vec::new();
    if !radii.is_empty() {
        let mut first = vec![0; n];
        first[0] = 1;
        let mut second = vec![0; n];
        second[0] = 2;
        profiles.push(derivative_decay(&h, &first, &radii)?);
        profiles.push(derivative_decay(&h, &second, &radii)?);
    }
    let report = PipelineReport {
        epsilon: cfg.epsilon,
        cube_count: approx.cube_count(),
        coverage: approx.coverage(),
        observed_constant: err.value / cfg.epsilon,
        schedule,
        adjacency,
        approximation_error: err,
        mollified_error: merr,
        mollification_gap: gap,
        mollification_gap_at: at,
        derivative_profiles: profiles,
        extension_hits: h.extension_hits(),
        resolution: cfg.resolution,
    };
    Ok((approx, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{catalog, parse_function, TensorGrid};

    fn family(j0: i32, jk: Vec<i32>, n: usize) -> DyadicApproximation {
        build_family(&ThresholdSchedule::manual(0.5, j0, jk).unwrap(), n).unwrap()
    }

    #[test]
    fn family_counts() {
        assert_eq!(family(-1, vec![1], 1).cube_count(), 8);
        assert_eq!(family(-1, vec![1], 2).cube_count(), 64);
        let f = family(-1, vec![1, 2], 1);
        assert_eq!(f.generations[0].indices.len(), 8);
        assert_eq!(f.generations[1].indices.len(), 4);
        let outer: Vec<f64> = (0..4).map(|i| f.generations[1].cube(i).lo(0)).collect();
        assert_eq!(outer, vec![-4.0, -3.0, 2.0, 3.0]);
    }

    #[test]
    fn family_matches_exhaustive_enumeration() {
        // oracle: every dyadic cube of the generation side meeting the annulus
        let fam = family(-2, vec![0, 2, 3], 2);
        for g in &fam.generations {
            let s = g.side();
            let outer = pow2(g.outer);
            let inner = g.inner.map(pow2).unwrap_or(0.0);
            let m = (outer / s) as i64;
            let mut want = 0;
            for a in -m..m {
                for b in -m..m {
                    let (x, y) = (a as f64 * s, b as f64 * s);
                    let inside_hole = x >= -inner && x + s <= inner && y >= -inner && y + s <= inner;
                    if !inside_hole {
                        want += 1;
                    }
                }
            }
            assert_eq!(g.indices.len(), want);
        }
    }

    #[test]
    fn partition_and_lookup() {
        let fam = family(-2, vec![0, 1, 3], 2);
        let b = fam.coverage();
        let vol: f64 = fam.cubes().map(|q| q.volume()).sum();
        assert_eq!(vol, (2.0 * b).powi(2));
        let cubes: Vec<Cube> = fam.cubes().collect();
        for i in (0..cubes.len()).step_by(7) {
            for j in (i + 1..cubes.len()).step_by(5) {
                let (p, q) = (&cubes[i], &cubes[j]);
                let overlap = (0..2).all(|a| p.lo(a) < q.hi(a) && q.lo(a) < p.hi(a));
                assert!(!overlap);
            }
        }
        for q in &cubes {
            let (gi, i) = fam.locate(q.center()).unwrap();
            assert_eq!(&fam.generations[gi].cube(i), q);
            let corner: Vec<f64> = (0..2).map(|a| q.lo(a)).collect();
            assert_eq!(fam.locate(&corner), Some((gi, i)));
        }
        assert!(fam.locate(&[b, 0.0]).is_none());
        assert!(fam.locate(&[-b, -b]).is_some());
    }

    #[test]
    fn projection_of_identity() {
        let f = parse_function("x1").unwrap();
        let a = project_simple(&f, &family(-1, vec![1], 1), 8).unwrap();
        let want: Vec<f64> = (0..8).map(|i| -1.75 + 0.5 * i as f64).collect();
        assert_eq!(a.g_values[0], want);
        assert_eq!(a.g(&[0.1]).unwrap(), 0.25);
        assert!(a.g(&[2.0]).is_err());
        let j = adjacency_jump(&a).unwrap();
        assert!((j.max_jump - 0.5).abs() < 1e-15);
        assert!(j.witness.is_some());
    }

    #[test]
    fn constant_pipeline_pieces() {
        let f = parse_function("3").unwrap();
        let s = select_thresholds(&f, 0.1, &ThresholdScan::default_for(1), 4).unwrap();
        assert_eq!(s.j0, -1);
        assert_eq!(s.jk, vec![0, 1, 2, 3]);
        let a = project_simple(&f, &build_family(&s, 1).unwrap(), 4).unwrap();
        assert!(a.g_values.iter().flatten().all(|&v| v == 3.0));
        assert_eq!(adjacency_jump(&a).unwrap().max_jump, 0.0);
        let h = mollify(&a).unwrap();
        for x in [-7.9, -0.3, 0.0, 0.49, 5.5] {
            assert_eq!(h.eval(&[x]).unwrap(), 3.0);
        }
        let p = derivative_decay(&h, &[1], &[1.0, 2.0, 4.0]).unwrap();
        assert!(p.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sine_fails_translation_stage() {
        let f = catalog::sin_product(1);
        let scan = ThresholdScan { region: 2000.0, ..ThresholdScan::default_for(1) };
        match select_thresholds(&f, 0.1, &scan, 3) {
            Err(Error::ConditionNotMet { stage, value, bound, .. }) => {
                assert_eq!(stage, "k=1");
                assert!(value >= bound);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn smoothed_log_schedule_exists() {
        let f = catalog::smoothed_log(1);
        let s = select_thresholds(&f, 0.5, &ThresholdScan::default_for(1), 6).unwrap();
        assert_eq!(s.j0, -1);
        assert!(s.jk.windows(2).all(|w| w[1] > w[0]));
        assert!(pow2(*s.jk.last().unwrap()) <= 1e4);
        assert_eq!(s.certifications.len(), 7);
        for c in &s.certifications {
            assert!(c.max_oscillation < c.bound);
        }
    }

    #[test]
    fn mollifier_mass_and_moments() {
        // oracle: tensor midpoint grid over the support box
        for (n, res) in [(1usize, 20000usize), (2, 600)] {
            let r = 0.25;
            let lo = vec![-r; n];
            let hi = vec![r; n];
            let grid = TensorGrid::on_box(&lo, &hi, res);
            let w = grid.weights();
            let pts = grid.points();
            let mass: f64 = pts.iter().zip(&w).map(|(p, w)| w * mollifier(p, r)).sum();
            assert!((mass - 1.0).abs() < 1e-6, "n={n} {mass}");
            for axis in 0..n {
                let m1: f64 = pts.iter().zip(&w).map(|(p, w)| w * p[axis] * mollifier(p, r)).sum();
                assert!(m1.abs() < 1e-6);
            }
        }
        let u = [0.3, -0.2];
        assert_eq!(mollifier(&u, 1.0), mollifier(&[-0.3, 0.2], 1.0));
    }

    #[test]
    fn staircase_mollification_gap() {
        let f = parse_function("x1").unwrap();
        let a = project_simple(&f, &family(-1, vec![1, 2, 3], 1), 8).unwrap();
        let jump = adjacency_jump(&a).unwrap().max_jump;
        let h = mollify(&a).unwrap();
        let (gap, _) = mollification_gap(&h, 4001).unwrap();
        assert!(gap <= jump + 1e-12, "{gap} {jump}");
        assert!(gap > 0.2);
        let small = project_simple(&f, &family(-1, vec![1], 1), 8).unwrap();
        let inner = mollify(&small).unwrap();
        assert!(mollification_gap(&inner, 801).unwrap().0 <= 0.5 + 1e-12);
    }

    #[test]
    fn g_reproduces_family_averages() {
        let f = parse_function("sin(x1) + x1*x1/10").unwrap();
        let a = project_simple(&f, &family(-2, vec![0, 2], 1), 16).unwrap();
        for (gi, g) in a.generations.iter().enumerate() {
            for i in 0..g.indices.len() {
                let avg = cube_average(&a, &g.cube(i), 8).unwrap();
                assert!((avg - a.g_values[gi][i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn json_reload_is_bit_exact() {
        let f = catalog::smoothed_log(1);
        let a = project_simple(&f, &family(-1, vec![1, 3, 4], 1), 16).unwrap();
        let text = serde_json::to_string(&a).unwrap();
        let b: DyadicApproximation = serde_json::from_str(&text).unwrap();
        assert_eq!(a.g_values, b.g_values);
        let (ha, hb) = (mollify(&a).unwrap(), mollify(&b).unwrap());
        for i in 0..200 {
            let x = -15.9 + 0.159 * i as f64;
            assert_eq!(a.g(&[x]).unwrap().to_bits(), b.g(&[x]).unwrap().to_bits());
            assert_eq!(ha.eval(&[x]).unwrap().to_bits(), hb.eval(&[x]).unwrap().to_bits());
        }
        let two = project_simple(&catalog::smoothed_log(2), &family(-1, vec![0, 1], 2), 4).unwrap();
        let back: DyadicApproximation = serde_json::from_str(&serde_json::to_string(&two).unwrap()).unwrap();
        assert_eq!(two.g_values, back.g_values);
    }

    #[test]
    fn extension_is_flagged() {
        let f = parse_function("x1").unwrap();
        let a = project_simple(&f, &family(-1, vec![1], 1), 4).unwrap();
        let h = mollify(&a).unwrap();
        assert_eq!(h.extension_hits(), 0);
        h.eval(&[1.9]).unwrap();
        assert_eq!(h.extension_hits(), 1);
        assert!(derivative_decay(&h, &[1], &[1.8]).is_err());
    }

    #[test]
    fn finite_difference_orders() {
        let f = parse_function("x1*x1*x1 + x1*x2").unwrap();
        let p = [1.5, -0.5];
        assert!((finite_difference(&f, &p, &[1, 0], 1e-4).unwrap() - (3.0 * 2.25 - 0.5)).abs() < 1e-6);
        assert!((finite_difference(&f, &p, &[2, 0], 1e-3).unwrap() - 9.0).abs() < 1e-4);
        assert!((finite_difference(&f, &p, &[1, 1], 1e-3).unwrap() - 1.0).abs() < 1e-6);
    }
}

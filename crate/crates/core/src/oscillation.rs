//! Mean oscillation, BMO lower bounds, and the limit-condition scanners
//! that separate VMO, XMO and CMO.
//!
//! Every scan is a finite-sample diagnostic: it reports what the scanned
//! cubes show, never a certificate of membership in a function space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::quadrature::{check_dim, check_resolution, pairwise_sum};
use crate::funcspace::{Cube, RealFn, TensorGrid};

/// `𝒪(f; Q) = ⨍_Q |f - f_Q|` on the midpoint grid used by
/// [`crate::funcspace::cube_average`].
pub fn mean_oscillation<F: RealFn + ?Sized>(f: &F, q: &Cube, resolution: usize) -> Result<f64> {
    check_resolution(resolution)?;
    check_dim(f, q)?;
    let grid = TensorGrid::for_cube(f, q, resolution);
    let values = grid.sample(f)?;
    Ok(oscillation_of_samples(&grid, &values))
}

pub(crate) fn oscillation_of_samples(grid: &TensorGrid, values: &[f64]) -> f64 {
    let w = grid.weights();
    let total = pairwise_sum(&w);
    // shift by a sample so constants give exactly zero
    let v0 = values[0];
    let wv: Vec<f64> = w.iter().zip(values).map(|(a, b)| a * (b - v0)).collect();
    let mean = pairwise_sum(&wv) / total;
    let dev: Vec<f64> = w.iter().zip(values).map(|(a, b)| a * (b - v0 - mean).abs()).collect();
    pairwise_sum(&dev) / total
}

/// Maximum of `value(cube)` over a family with lowest-index tie-breaking.
pub(crate) fn scan_max<T, G>(items: &[T], value: G) -> Result<(f64, usize)>
where
    T: Sync,
    G: Fn(&T) -> Result<f64> + Sync,
{
    if items.is_empty() {
        return Err(Error::precondition("scan family is empty"));
    }
    let vals: Vec<Result<f64>> = items.par_iter().map(&value).collect();
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in vals.into_iter().enumerate() {
        let v = v?;
        if v > best.0 {
            best = (v, i);
        }
    }
    Ok(best)
}

/// Largest mean oscillation over a finite family: a lower bound for the
/// BMO norm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BmoEstimate {
    pub value: f64,
    pub argmax: Cube,
    pub cube_count: usize,
    /// Always `true`: a finite scan only bounds the norm from below.
    pub lower_bound: bool,
}

pub fn bmo_norm_estimate<F: RealFn + ?Sized>(
    f: &F,
    cubes: &[Cube],
    resolution: usize,
) -> Result<BmoEstimate> {
    check_resolution(resolution)?;
    let (value, i) = scan_max(cubes, |q| mean_oscillation(f, q, resolution))?;
    Ok(BmoEstimate {
        value,
        argmax: cubes[i].clone(),
        cube_count: cubes.len(),
        lower_bound: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    SmallScale,
    Translation,
    LargeScale,
    Annulus,
}

/// Sup of the mean oscillation over a scanned family, per parameter value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OscillationProfile {
    pub kind: ProfileKind,
    pub parameter: Vec<f64>,
    pub value: Vec<f64>,
    pub argmax_center: Vec<Vec<f64>>,
    pub argmax_side: Vec<f64>,
    pub cube_count: Vec<usize>,
    pub resolution: usize,
}

impl OscillationProfile {
    fn new(kind: ProfileKind, resolution: usize) -> Self {
        OscillationProfile {
            kind,
            parameter: Vec::new(),
            value: Vec::new(),
            argmax_center: Vec::new(),
            argmax_side: Vec::new(),
            cube_count: Vec::new(),
            resolution,
        }
    }

    fn push<F: RealFn + ?Sized>(&mut self, f: &F, param: f64, cubes: &[Cube]) -> Result<()> {
        let est = bmo_norm_estimate(f, cubes, self.resolution)?;
        self.parameter.push(param);
        self.value.push(est.value);
        self.argmax_center.push(est.argmax.center().to_vec());
        self.argmax_side.push(est.argmax.side());
        self.cube_count.push(cubes.len());
        Ok(())
    }

    /// Value at the last (finest or farthest) parameter.
    pub fn last_value(&self) -> f64 {
        *self.value.last().expect("profiles are never empty")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter,value,argmax_center,argmax_side,cube_count\n");
        for i in 0..self.parameter.len() {
            let center = self.argmax_center[i]
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(";");
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.parameter[i], self.value[i], center, self.argmax_side[i], self.cube_count[i]
            ));
        }
        out
    }
}

fn check_monotone(xs: &[f64], increasing: bool, what: &str) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::precondition(format!("{what} list is empty")));
    }
    for w in xs.windows(2) {
        let ok = if increasing { w[1] > w[0] } else { w[1] < w[0] };
        if !ok {
            return Err(Error::precondition(format!(
                "{what} must be strictly {}",
                if increasing { "increasing" } else { "decreasing" }
            )));
        }
    }
    Ok(())
}

fn cubes_of_volume(volume: f64, centers: &[Vec<f64>]) -> Result<Vec<Cube>> {
    if centers.is_empty() {
        return Err(Error::precondition("no scan centers"));
    }
    let dim = centers[0].len();
    let half = volume.powf(1.0 / dim as f64) / 2.0;
    centers.iter().map(|c| Cube::new(c.clone(), half)).collect()
}

/// For each volume `a` (strictly decreasing): the max over `centers` of the
/// oscillation on the cube of volume `a` at that center.
pub fn small_scale_profile<F: RealFn + ?Sized>(
    f: &F,
    scales: &[f64],
    centers: &[Vec<f64>],
    resolution: usize,
) -> Result<OscillationProfile> {
    check_monotone(scales, false, "scales")?;
    if scales.iter().any(|a| *a <= 0.0) {
        return Err(Error::precondition("scales must be positive"));
    }
    let mut p = OscillationProfile::new(ProfileKind::SmallScale, resolution);
    for &a in scales {
        p.push(f, a, &cubes_of_volume(a, centers)?)?;
    }
    Ok(p)
}

/// Same scan as [`small_scale_profile`] with strictly increasing volumes.
pub fn large_scale_profile<F: RealFn + ?Sized>(
    f: &F,
    scales: &[f64],
    centers: &[Vec<f64>],
    resolution: usize,
) -> Result<OscillationProfile> {
    check_monotone(scales, true, "scales")?;
    if scales.iter().any(|a| *a <= 0.0) {
        return Err(Error::precondition("scales must be positive"));
    }
    let mut p = OscillationProfile::new(ProfileKind::LargeScale, resolution);
    for &a in scales {
        p.push(f, a, &cubes_of_volume(a, centers)?)?;
    }
    Ok(p)
}

/// `max_d 𝒪(f; Q + r·d)` for each radius `r`, over unit directions `d`.
pub fn translation_profile<F: RealFn + ?Sized>(
    f: &F,
    q: &Cube,
    directions: &[Vec<f64>],
    radii: &[f64],
    resolution: usize,
) -> Result<OscillationProfile> {
    translation_profile_multi(f, std::slice::from_ref(q), directions, radii, resolution)
}

/// Translation scan over several base cubes at once.
pub fn translation_profile_multi<F: RealFn + ?Sized>(
    f: &F,
    bases: &[Cube],
    directions: &[Vec<f64>],
    radii: &[f64],
    resolution: usize,
) -> Result<OscillationProfile> {
    check_monotone(radii, true, "radii")?;
    if directions.is_empty() {
        return Err(Error::precondition("no translation directions"));
    }
    for d in directions {
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::precondition(format!("direction {d:?} is not a unit vector")));
        }
    }
    let mut p = OscillationProfile::new(ProfileKind::Translation, resolution);
    for &r in radii {
        let cubes: Vec<Cube> = bases
            .iter()
            .flat_map(|q| {
                directions.iter().map(move |d| {
                    let t: Vec<f64> = d.iter().map(|v| r * v).collect();
                    q.translate(&t)
                })
            })
            .collect();
        p.push(f, r, &cubes)?;
    }
    Ok(p)
}

/// For each `R`: the max oscillation over probe cubes disjoint from the
/// closed cube `Q(0, R)`.
pub fn annulus_profile<F: RealFn + ?Sized>(
    f: &F,
    radii: &[f64],
    probes: &[Vec<Cube>],
    resolution: usize,
) -> Result<OscillationProfile> {
    check_monotone(radii, true, "annulus radii")?;
    if probes.len() != radii.len() {
        return Err(Error::precondition("one probe set per radius is required"));
    }
    let mut p = OscillationProfile::new(ProfileKind::Annulus, resolution);
    for (&r, set) in radii.iter().zip(probes) {
        if let Some(bad) = set.iter().find(|q| q.meets_closed_origin_cube(r)) {
            return Err(Error::precondition(format!(
                "probe cube {bad:?} intersects Q(0, {r})"
            )));
        }
        let mut sides: Vec<f64> = set.iter().map(Cube::side).collect();
        sides.sort_by(|a, b| a.total_cmp(b));
        sides.dedup();
        if sides.len() < 2 {
            return Err(Error::precondition(format!(
                "probe set at R = {r} must contain several side lengths"
            )));
        }
        p.push(f, r, set)?;
    }
    Ok(p)
}

/// Probe cubes beyond `Q(0, R)`: lattice cubes of sides 1, 4 and 16 along
/// every axis in both directions, plus the exponential intervals
/// `[e^k, e^{k+1}]` (scaled along each axis) with `e^k > R`.
pub fn default_annulus_probes(dim: usize, r: f64) -> Result<Vec<Cube>> {
    let gap = 1e-6 * r.max(1.0);
    let mut out = Vec::new();
    let mut along_axes = |lo: f64, side: f64| -> Result<()> {
        for axis in 0..dim {
            for sign in [1.0, -1.0] {
                let mut c = vec![0.0; dim];
                c[axis] = sign * (lo + side / 2.0);
                out.push(Cube::new(c, side / 2.0)?);
            }
        }
        Ok(())
    };
    for side in [1.0, 4.0, 16.0] {
        for j in 0..4 {
            along_axes(r + gap + j as f64 * side, side)?;
        }
    }
    let mut k = r.max(1.0).ln().floor();
    while k.exp() <= r {
        k += 1.0;
    }
    for step in 0..3 {
        let lo = (k + step as f64).exp();
        let hi = (k + step as f64 + 1.0).exp();
        along_axes(lo, hi - lo)?;
    }
    Ok(out)
}

/// Tolerances for the classification booleans.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tolerances {
    pub small_scale: f64,
    pub translation: f64,
    pub large_scale: f64,
    pub annulus: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            small_scale: 1e-2,
            translation: 1e-2,
            large_scale: 1e-2,
            annulus: 1e-2,
        }
    }
}

/// Scale and radius grids for [`classify`]. Volumes are given for the
/// small- and large-scale scans; base cubes for the translation scan are
/// origin-centred with the listed sides.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanConfig {
    pub dim: usize,
    /// Scan centers lie on a lattice covering `[-half_width, half_width]^n`.
    pub half_width: f64,
    pub center_spacing: f64,
    pub small_scales: Vec<f64>,
    pub large_scales: Vec<f64>,
    pub translation_sides: Vec<f64>,
    pub translation_radii: Vec<f64>,
    pub annulus_radii: Vec<f64>,
    pub resolution: usize,
}

impl ScanConfig {
    pub fn default_for(dim: usize) -> Self {
        let (half_width, spacing) = if dim <= 1 { (50.0, 0.5) } else { (8.0, 1.0) };
        ScanConfig {
            dim,
            half_width,
            center_spacing: spacing,
            small_scales: (0..=8).map(|k| 2f64.powi(-k * dim as i32)).collect(),
            large_scales: (2..=10).step_by(2).map(|k| 2f64.powi(k * dim as i32)).collect(),
            translation_sides: vec![0.5, 1.0, 2.0],
            translation_radii: vec![10.0, 100.0, 1000.0, 10000.0],
            annulus_radii: vec![10.0, 100.0, 1000.0],
            resolution: crate::funcspace::default_resolution(dim),
        }
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        lattice(self.dim, self.half_width, self.center_spacing)
    }

    pub fn directions(&self) -> Vec<Vec<f64>> {
        axis_directions(self.dim)
    }
}

/// Points `k·spacing` inside `[-half_width, half_width]^n`.
pub fn lattice(dim: usize, half_width: f64, spacing: f64) -> Vec<Vec<f64>> {
    let m = (half_width / spacing).floor() as i64;
    let per_axis: Vec<f64> = (-m..=m).map(|k| k as f64 * spacing).collect();
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                per_axis.iter().map(move |&c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

/// `±e_i` for every axis.
pub fn axis_directions(dim: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; dim];
            d[i] = s;
            out.push(d);
        }
    }
    out
}

/// Finite-scan evidence for the VMO / XMO / CMO limit conditions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnosis {
    /// Always "numerical diagnostic": finite scans cannot prove membership.
    pub label: String,
    pub vmo_smallscale_ok: bool,
    pub xmo_translation_ok: bool,
    pub cmo_largescale_ok: bool,
    /// Decay away from the origin; reported only, no conclusion is drawn.
    pub annulus_ok: bool,
    pub tolerances: Tolerances,
    pub small_scale: OscillationProfile,
    pub translation: OscillationProfile,
    pub large_scale: OscillationProfile,
    pub annulus: OscillationProfile,
}

pub fn classify<F: RealFn + ?Sized>(f: &F, tol: &Tolerances, scan: &ScanConfig) -> Result<Diagnosis> {
    let centers = scan.centers();
    let small = small_scale_profile(f, &scan.small_scales, &centers, scan.resolution)?;
    let large = large_scale_profile(f, &scan.large_scales, &centers, scan.resolution)?;
    let bases = scan
        .translation_sides
        .iter()
        .map(|s| Cube::centered(scan.dim, s / 2.0))
        .collect::<Result<Vec<_>>>()?;
    let translation = translation_profile_multi(
        f,
        &bases,
        &scan.directions(),
        &scan.translation_radii,
        scan.resolution,
    )?;
    let probes = scan
        .annulus_radii
        .iter()
        .map(|&r| default_annulus_probes(scan.dim, r))
        .collect::<Result<Vec<_>>>()?;
    let annulus = annulus_profile(f, &scan.annulus_radii, &probes, scan.resolution)?;
    Ok(Diagnosis {
        label: "numerical diagnostic".into(),
        vmo_smallscale_ok: small.last_value() < tol.small_scale,
        xmo_translation_ok: translation.last_value() < tol.translation,
        cmo_largescale_ok: large.last_value() < tol.large_scale,
        annulus_ok: annulus.last_value() < tol.annulus,
        tolerances: tol.clone(),
        small_scale: small,
        translation,
        large_scale: large,
        annulus,
    })
}

//! Bilinear Calderón–Zygmund kernels, smooth cutoffs, truncation, and
//! sampled verification of the size, regularity and decay bounds.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `σ(u) = exp(-1/u)` for `u > 0`, else 0.
fn sigma(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// Smooth step: 0 for `u ≤ 0`, 1 for `u ≥ 1`, `S(u) + S(1-u) = 1`.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = sigma(u);
        a / (a + sigma(1.0 - u))
    }
}

/// `φ₁(t) = S(2 - t)`: 1 on `[0, 1]`, 0 on `[2, ∞)`.
pub fn phi1(t: f64) -> f64 {
    smooth_step(2.0 - t)
}

/// [`phi1`] with the domain check.
pub fn cutoff_phi1(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::precondition(format!("cutoff argument must be >= 0, got {t}")));
    }
    Ok(phi1(t))
}

/// Sup of `|S'|`, attained at `u = 1/2`.
pub const SMOOTH_STEP_SLOPE: f64 = 2.0;

/// The split `1 - φ₁ = φ₂ + φ₃` with `φ₃(t) = S(t - A/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSplit {
    a: f64,
}

impl CutoffSplit {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 4.0 && a.is_finite()) {
            return Err(Error::precondition(format!("split parameter A must exceed 4, got {a}")));
        }
        Ok(CutoffSplit { a })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn phi1(&self, t: f64) -> f64 {
        phi1(t)
    }

    /// 1 on `[2, A/2]`, 0 on `[0, 1]` and on `[A/2 + 1, ∞)`.
    pub fn phi2(&self, t: f64) -> f64 {
        1.0 - phi1(t) - self.phi3(t)
    }

    /// 0 on `[0, A/2]`, 1 on `[A/2 + 1, ∞)`.
    pub fn phi3(&self, t: f64) -> f64 {
        smooth_step(t - self.a / 2.0)
    }
}

/// Closed-form kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelForm {
    /// `(1 + |x-y|² + |x-z|²)^{-(n+1)}`.
    Reference,
    /// `(x₁ - y₁) / (|x-y|² + |x-z|²)^{(2n+1)/2}`, homogeneous of degree `-2n`.
    Riesz,
    /// `φ₃(s) / s^{2n+1}` with `s = |x-y| + |x-z|`.
    TailK3 { a: f64 },
}

/// `|x-y| + |x-z|`.
pub fn separation(x: &[f64], y: &[f64], z: &[f64]) -> f64 {
    dist(x, y) + dist(x, z)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()
}

/// A kernel together with its declared bound constants and an optional
/// truncation `K_η = K·(1 - φ₁(2s/η))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilinearKernel {
    pub form: KernelForm,
    pub dim: usize,
    pub declared_size_c: f64,
    pub declared_reg_c: f64,
    /// `None` when the kernel has no extra decay for `s > 1`.
    pub declared_decay_c: Option<f64>,
    pub truncation_eta: Option<f64>,
}

fn check_kernel_dim(n: usize) -> Result<()> {
    if n == 0 || n > 3 {
        return Err(Error::precondition(format!("kernel dimension must be 1, 2 or 3, got {n}")));
    }
    Ok(())
}

impl BilinearKernel {
    /// The smooth reference kernel. Constants are the closed-form sups
    /// along `|x-y| = |x-z|`, rounded up by a quarter.
    pub fn reference(n: usize) -> Result<Self> {
        check_kernel_dim(n)?;
        let nf = n as f64;
        let size = (2.0 * nf).powf(nf) / (1.0 + nf).powf(nf + 1.0);
        let m = nf + 1.0;
        let reg = 2.0 * m * (2.0 * m).powf(m) / (m + 1.0).powf(m + 1.0);
        Ok(BilinearKernel {
            form: KernelForm::Reference,
            dim: n,
            declared_size_c: 1.25 * size,
            declared_reg_c: 1.25 * reg,
            declared_decay_c: Some(2f64.powi(n as i32 + 1)),
            truncation_eta: None,
        })
    }

    /// The singular kernel used for the truncation-gap scaling.
    pub fn riesz(n: usize) -> Result<Self> {
        check_kernel_dim(n)?;
        let nf = n as f64;
        let size = 2f64.powf(nf + 0.5);
        Ok(BilinearKernel {
            form: KernelForm::Riesz,
            dim: n,
            declared_size_c: size,
            declared_reg_c: size * (1.0 + (2.0 * nf + 1.0) * 2f64.sqrt()),
            declared_decay_c: None,
            truncation_eta: None,
        })
    }

    /// The tail kernel `𝒦₃`; its size constant is at most `2/A`.
    pub fn tail_k3(n: usize, a: f64) -> Result<Self> {
        check_kernel_dim(n)?;
        CutoffSplit::new(a)?;
        let nf = n as f64;
        Ok(BilinearKernel {
            form: KernelForm::TailK3 { a },
            dim: n,
            declared_size_c: 2.0 / a,
            declared_reg_c: 2.0 * SMOOTH_STEP_SLOPE + 2.0 * (2.0 * nf + 1.0) * 2.0 / a,
            declared_decay_c: None,
            truncation_eta: None,
        })
    }

    /// `K_η`; declared constants are inherited.
    pub fn truncate(&self, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::precondition(format!("truncation eta must be positive, got {eta}")));
        }
        if self.truncation_eta.is_some() {
            return Err(Error::precondition("kernel is already truncated"));
        }
        let mut k = self.clone();
        k.truncation_eta = Some(eta);
        Ok(k)
    }

    /// Whether `K(x, ·, ·)` is locally integrable without truncation.
    pub fn is_bounded(&self) -> bool {
        matches!(self.form, KernelForm::Reference)
    }

    /// Whether `K(x,y,z) = K(x,z,y)`.
    pub fn is_symmetric(&self) -> bool {
        !matches!(self.form, KernelForm::Riesz)
    }

    /// Short provenance label.
    pub fn id(&self) -> String {
        let base = match self.form {
            KernelForm::Reference => format!("reference(n={})", self.dim),
            KernelForm::Riesz => format!("riesz(n={})", self.dim),
            KernelForm::TailK3 { a } => format!("tail_k3(n={},A={})", self.dim, a),
        };
        match self.truncation_eta {
            Some(eta) => format!("{base}|eta={eta}"),
            None => base,
        }
    }

    /// The untruncated kernel.
    pub fn base_eval(&self, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
        let n = self.dim as f64;
        match self.form {
            KernelForm::Reference => (1.0 + dist2(x, y) + dist2(x, z)).powf(-(n + 1.0)),
            KernelForm::Riesz => {
                let r2 = dist2(x, y) + dist2(x, z);
                if r2 == 0.0 {
                    0.0
                } else {
                    (x[0] - y[0]) / r2.powf(n + 0.5)
                }
            }
            KernelForm::TailK3 { a } => {
                let s = separation(x, y, z);
                let p3 = smooth_step(s - a / 2.0);
                if p3 == 0.0 {
                    0.0
                } else {
                    p3 / s.powf(2.0 * n + 1.0)
                }
            }
        }
    }

    /// `K` or `K_η`.
    pub fn eval(&self, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
        match self.truncation_eta {
            None => self.base_eval(x, y, z),
            Some(eta) => {
                let cut = 1.0 - phi1(2.0 * separation(x, y, z) / eta);
                if cut == 0.0 {
                    0.0
                } else {
                    cut * self.base_eval(x, y, z)
                }
            }
        }
    }

    /// `K - K_η = K·φ₁(2s/η)`, supported on `s ≤ η`.
    pub fn cut_part(&self, eta: f64, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
        let c = phi1(2.0 * separation(x, y, z) / eta);
        if c == 0.0 {
            0.0
        } else {
            c * self.base_eval(x, y, z)
        }
    }
}

/// Random and swept sample triples for [`verify_bounds`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplePlan {
    pub random_samples: usize,
    /// Deterministic log-uniform sweep along two fixed configurations.
    pub sweep_samples: usize,
    pub s_min: f64,
    pub s_max: f64,
    pub seed: u64,
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan {
            random_samples: 20_000,
            sweep_samples: 4096,
            s_min: 1e-3,
            s_max: 1e3,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheck {
    pub measured: f64,
    pub declared: Option<f64>,
    pub passed: bool,
    /// `[x, y, z]` at the sup.
    pub witness: Vec<Vec<f64>>,
    pub witness_separation: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub kernel: String,
    pub dim: usize,
    pub seed: u64,
    /// `sup |K|·s^{2n}`.
    pub size: BoundCheck,
    /// `sup |∂K|·s^{2n+1}` over all `3n` first partials.
    pub regularity: BoundCheck,
    /// `sup |K|·s^{2n+2}` over `s > 1`.
    pub decay: BoundCheck,
    pub all_passed: bool,
}

fn unit_vector(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if r > 1e-3 && r <= 1.0 {
            return v.into_iter().map(|a| a / r).collect();
        }
    }
}

fn triple_at(x: &[f64], s: f64, lambda: f64, d1: &[f64], d2: &[f64]) -> [Vec<f64>; 3] {
    let y = x.iter().zip(d1).map(|(a, d)| a + lambda * s * d).collect();
    let z = x.iter().zip(d2).map(|(a, d)| a + (1.0 - lambda) * s * d).collect();
    [x.to_vec(), y, z]
}

/// Sample triples with `s` log-uniform in `[s_min, s_max]`.
pub fn sample_triples(n: usize, plan: &SamplePlan) -> Result<Vec<[Vec<f64>; 3]>> {
    if !(plan.s_min > 0.0 && plan.s_max > plan.s_min) {
        return Err(Error::precondition("sample plan needs 0 < s_min < s_max"));
    }
    let (l0, l1) = (plan.s_min.ln(), plan.s_max.ln());
    let mut rng = SplitMix64::seed_from_u64(plan.seed);
    let mut out = Vec::with_capacity(plan.random_samples + 2 * plan.sweep_samples);
    for _ in 0..plan.random_samples {
        let s = (l0 + (l1 - l0) * rng.random::<f64>()).exp();
        let lambda: f64 = rng.random();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d1 = unit_vector(&mut rng, n);
        let d2 = unit_vector(&mut rng, n);
        out.push(triple_at(&x, s, lambda, &d1, &d2));
    }
    let mut e = vec![0.0; n];
    e[0] = 1.0;
    let minus: Vec<f64> = e.iter().map(|v| -v).collect();
    let x = vec![0.0; n];
    for i in 0..plan.sweep_samples {
        let u = (i as f64 + 0.5) / plan.sweep_samples as f64;
        let s = (l0 + (l1 - l0) * u).exp();
        // equal split on opposite sides, and equal split on the same side
        out.push(triple_at(&x, s, 0.5, &minus, &e));
        out.push(triple_at(&x, s, 0.5, &e, &e));
    }
    Ok(out)
}

fn max_partial(k: &BilinearKernel, t: &[Vec<f64>; 3], s: f64) -> f64 {
    let h = (1e-3 * s).max(1e-4);
    let mut p = t.clone();
    let mut best = 0.0f64;
    for which in 0..3 {
        for i in 0..k.dim {
            let orig = p[which][i];
            p[which][i] = orig + h;
            let up = k.eval(&p[0], &p[1], &p[2]);
            p[which][i] = orig - h;
            let dn = k.eval(&p[0], &p[1], &p[2]);
            p[which][i] = orig;
            best = best.max(((up - dn) / (2.0 * h)).abs());
        }
    }
    best
}

fn check(measured: f64, declared: Option<f64>, witness: &[Vec<f64>; 3], samples: usize) -> BoundCheck {
    let passed = declared.is_none_or(|d| measured <= d * (1.0 + 1e-9));
    BoundCheck {
        measured,
        declared,
        passed,
        witness: witness.to_vec(),
        witness_separation: separation(&witness[0], &witness[1], &witness[2]),
        samples,
    }
}

/// Measured sup of the three scaled bounds over the sample plan.
pub fn verify_bounds(k: &BilinearKernel, plan: &SamplePlan) -> Result<VerificationReport> {
    use rayon::prelude::*;
    let triples = sample_triples(k.dim, plan)?;
    let n2 = 2.0 * k.dim as f64;
    let rows: Vec<(f64, f64, f64, f64)> = triples
        .par_iter()
        .map(|t| {
            let s = separation(&t[0], &t[1], &t[2]);
            let v = k.eval(&t[0], &t[1], &t[2]).abs();
            let size = v * s.powf(n2);
            let reg = max_partial(k, t, s) * s.powf(n2 + 1.0);
            let decay = if s > 1.0 { v * s.powf(n2 + 2.0) } else { 0.0 };
            (s, size, reg, decay)
        })
        .collect();
    let argmax = |pick: fn(&(f64, f64, f64, f64)) -> f64| {
        let mut best = (0.0, 0usize);
        for (i, r) in rows.iter().enumerate() {
            if pick(r) > best.0 {
                best = (pick(r), i);
            }
        }
        best
    };
    let (size, i_size) = argmax(|r| r.1);
    let (reg, i_reg) = argmax(|r| r.2);
    let (decay, i_decay) = argmax(|r| r.3);
    let decay_samples = rows.iter().filter(|r| r.0 > 1.0).count();
    let size = check(size, Some(k.declared_size_c), &triples[i_size], rows.len());
    let regularity = check(reg, Some(k.declared_reg_c), &triples[i_reg], rows.len());
    let decay = check(decay, k.declared_decay_c, &triples[i_decay], decay_samples);
    let all_passed = size.passed && regularity.passed && decay.passed;
    Ok(VerificationReport {
        kernel: k.id(),
        dim: k.dim,
        seed: plan.seed,
        size,
        regularity,
        decay,
        all_passed,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

/// Log-log slope of `|K|` along `y = x - s/2·e₁`, `z = x + s/2·e₁`.
pub fn decay_slope(k: &BilinearKernel, s_list: &[f64]) -> Result<f64> {
    if s_list.len() < 2 || s_list.iter().any(|s| *s <= 0.0) {
        return Err(Error::precondition("decay slope needs at least two positive separations"));
    }
    let x = vec![0.0; k.dim];
    let vals: Vec<f64> = s_list
        .iter()
        .map(|&s| {
            let mut y = x.clone();
            let mut z = x.clone();
            y[0] -= s / 2.0;
            z[0] += s / 2.0;
            k.eval(&x, &y, &z).abs()
        })
        .collect();
    Ok(loglog_slope(s_list, &vals))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailConstantRow {
    pub a: f64,
    /// Measured `sup φ₃(s)/s`, the size constant of `𝒦₃`.
    pub size_constant: f64,
    /// `size_constant · A`; roughly constant when the constant is `O(1/A)`.
    pub times_a: f64,
}

/// Size constant of `𝒦₃` by a dense sweep of `s` over its transition and
/// plateau onset, for each `A`.
pub fn tail_constant_scaling(a_list: &[f64], sweep: usize) -> Result<Vec<TailConstantRow>> {
    a_list
        .iter()
        .map(|&a| {
            let split = CutoffSplit::new(a)?;
            let lo = a / 2.0;
            let hi = a / 2.0 + 2.0;
            let c = (0..=sweep)
                .map(|i| {
                    let s = lo + (hi - lo) * i as f64 / sweep as f64;
                    split.phi3(s) / s
                })
                .fold(0.0, f64::max);
            Ok(TailConstantRow { a, size_constant: c, times_a: c * a })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_values() {
        let k = BilinearKernel::reference(1).unwrap();
        for x in [-3.0, 0.0, 2.5] {
            assert_eq!(k.eval(&[x], &[x], &[x]), 1.0);
        }
        assert_eq!(k.eval(&[0.0], &[1.0], &[0.0]), 0.25);
        let v = k.eval(&[0.0], &[-5.0], &[5.0]);
        assert_relative_eq!(v, 51f64.powi(-2), max_relative = 1e-15);
        assert!((v - 3.845e-4).abs() < 1e-7);
        let k2 = BilinearKernel::reference(2).unwrap();
        assert_eq!(k2.eval(&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]), 1.0);
    }

    #[test]
    fn symmetry_and_translation_invariance() {
        let k = BilinearKernel::reference(2).unwrap();
        let (x, y, z) = ([0.3, -1.2], [2.0, 0.7], [-0.4, 0.1]);
        assert_eq!(k.eval(&x, &y, &z), k.eval(&x, &z, &y));
        // powers of two keep the translated differences exact
        let t = [4.0, -8.0];
        let sh = |p: &[f64; 2]| [p[0] + t[0], p[1] + t[1]];
        let (x, y, z) = ([0.25, -1.5], [2.0, 0.75], [-0.5, 0.125]);
        assert_eq!(k.eval(&x, &y, &z), k.eval(&sh(&x), &sh(&y), &sh(&z)));
    }

    #[test]
    fn phi1_plateaus() {
        assert_eq!(cutoff_phi1(0.5).unwrap(), 1.0);
        assert_eq!(cutoff_phi1(1.0).unwrap(), 1.0);
        assert_eq!(cutoff_phi1(3.0).unwrap(), 0.0);
        assert_eq!(cutoff_phi1(2.0).unwrap(), 0.0);
        assert_eq!(cutoff_phi1(1.5).unwrap(), 0.5);
        assert!(cutoff_phi1(-0.1).is_err());
        let mut prev = 1.0;
        for i in 0..=400 {
            let v = phi1(i as f64 / 100.0);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn smooth_step_slope_constant() {
        let h = 1e-6;
        let d = (smooth_step(0.5 + h) - smooth_step(0.5 - h)) / (2.0 * h);
        assert!((d - 2.0).abs() < 1e-6);
        let max = (1..1000)
            .map(|i| {
                let u = i as f64 / 1000.0;
                (smooth_step(u + h) - smooth_step(u - h)) / (2.0 * h)
            })
            .fold(0.0, f64::max);
        assert!(max <= SMOOTH_STEP_SLOPE + 1e-6);
    }

    #[test]
    fn split_plateaus_and_partition() {
        let s = CutoffSplit::new(10.0).unwrap();
        assert_eq!((s.phi2(3.0), s.phi3(3.0)), (1.0, 0.0));
        assert_eq!((s.phi2(7.0), s.phi3(7.0)), (0.0, 1.0));
        assert_eq!(s.phi2(0.5), 0.0);
        for i in 0..2000 {
            let t = i as f64 / 100.0;
            let (a, b, c) = (s.phi1(t), s.phi2(t), s.phi3(t));
            assert!((a + b + c - 1.0).abs() < 1e-12);
            for v in [a, b, c] {
                assert!((0.0..=1.0).contains(&v), "{t}");
            }
        }
        assert!(CutoffSplit::new(4.0).is_err());
    }

    #[test]
    fn truncation_plateaus() {
        let k = BilinearKernel::reference(1).unwrap();
        assert!(k.truncate(0.0).is_err());
        for eta in [1.0, 0.5, 0.125] {
            let t = k.truncate(eta).unwrap();
            // s = eta/4 and s = 2 eta
            assert_eq!(t.eval(&[0.0], &[eta / 8.0], &[-eta / 8.0]), 0.0);
            let (y, z) = ([eta], [-eta]);
            assert_eq!(t.eval(&[0.0], &y, &z), k.eval(&[0.0], &y, &z));
        }
        assert!(k.truncate(0.5).unwrap().truncate(0.25).is_err());
    }

    #[test]
    fn truncated_never_exceeds_untruncated() {
        let k = BilinearKernel::reference(1).unwrap();
        let t = k.truncate(0.5).unwrap();
        let plan = SamplePlan { random_samples: 100_000, sweep_samples: 0, ..Default::default() };
        for p in sample_triples(1, &plan).unwrap() {
            assert!(t.eval(&p[0], &p[1], &p[2]).abs() <= k.eval(&p[0], &p[1], &p[2]).abs());
        }
    }

    #[test]
    fn cut_part_complements_truncation() {
        let k = BilinearKernel::riesz(1).unwrap();
        let t = k.truncate(0.5).unwrap();
        for s in [0.1, 0.3, 0.4, 0.45, 0.6] {
            let (x, y, z) = ([0.0], [s * 0.7], [-s * 0.3]);
            let sum = t.eval(&x, &y, &z) + k.cut_part(0.5, &x, &y, &z);
            assert_relative_eq!(sum, k.eval(&x, &y, &z), max_relative = 1e-14);
        }
    }

    #[test]
    fn reference_passes_verification() {
        for n in [1, 2] {
            let k = BilinearKernel::reference(n).unwrap();
            let r = verify_bounds(&k, &SamplePlan::default()).unwrap();
            assert!(r.all_passed, "{r:?}");
            assert!(r.size.measured > 0.4);
        }
    }

    #[test]
    fn reference_regularity_sup_matches_closed_form() {
        // 2(n+1)(2(n+1))^{n+1}/(n+2)^{n+2} at n = 1
        let k = BilinearKernel::reference(1).unwrap();
        let r = verify_bounds(&k, &SamplePlan::default()).unwrap();
        assert!((r.regularity.measured - 64.0 / 27.0).abs() < 1e-2, "{}", r.regularity.measured);
        assert!((r.size.measured - 0.5).abs() < 1e-3);
    }

    #[test]
    fn reference_decay_slope() {
        let k = BilinearKernel::reference(1).unwrap();
        let slope = decay_slope(&k, &[10.0, 20.0, 40.0]).unwrap();
        assert!((slope + 4.0).abs() < 0.05, "{slope}");
        let slope = decay_slope(&k, &[10.0, 100.0, 1000.0]).unwrap();
        assert!((slope + 4.0).abs() < 0.05, "{slope}");
        let k2 = BilinearKernel::reference(2).unwrap();
        assert!((decay_slope(&k2, &[10.0, 100.0, 1000.0]).unwrap() + 6.0).abs() < 0.05);
    }

    #[test]
    fn tail_constant_is_order_one_over_a() {
        let rows = tail_constant_scaling(&[8.0, 16.0, 32.0], 20_000).unwrap();
        for r in &rows {
            assert!(r.size_constant <= 2.0 / r.a);
        }
        let ratio = rows[0].size_constant / rows[1].size_constant;
        assert!((ratio - 2.0).abs() <= 0.2, "{ratio}");
    }

    #[test]
    fn riesz_is_homogeneous() {
        let k = BilinearKernel::riesz(1).unwrap();
        let (x, y, z) = ([0.0], [0.3], [-0.7]);
        let v = k.eval(&x, &y, &z);
        let w = k.eval(&x, &[0.6], &[-1.4]);
        assert_relative_eq!(w, v / 4.0, max_relative = 1e-14);
        let r = verify_bounds(&k, &SamplePlan::default()).unwrap();
        assert!(r.size.passed && r.regularity.passed);
    }

    #[test]
    fn truncated_regularity_is_eta_independent() {
        let k = BilinearKernel::reference(1).unwrap();
        let plan = SamplePlan::default();
        let c: Vec<f64> = [1.0, 0.5, 0.25]
            .iter()
            .map(|&eta| {
                let r = verify_bounds(&k.truncate(eta).unwrap(), &plan).unwrap();
                assert!(r.all_passed, "{r:?}");
                r.regularity.measured
            })
            .collect();
        let max = c.iter().cloned().fold(0.0, f64::max);
        let min = c.iter().cloned().fold(f64::INFINITY, f64::min);
        eprintln!("{c:?}");
        assert!(max / min <= 1.5);
    }
}

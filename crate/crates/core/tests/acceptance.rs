//! Acceptance suite. Runs every criterion at its stated tolerance and
//! prints one PASS/FAIL line per criterion.
//!
//! `cargo test --test acceptance -- 3 7` runs a subset.

use std::f64::consts::{E, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use xmo_core::approximation::{
    build_family, mollifier, mollify, project_simple, run_pipeline, PipelineConfig, PipelineReport,
    ThresholdSchedule,
};
use xmo_core::compactness::{
    bump_dictionary, commutator_family, fk_check, translation_continuity, Family, FkTolerances,
    OutputGrid,
};
use xmo_core::funcspace::quadrature::Difference;
use xmo_core::funcspace::{catalog, cube_average, parse_function, Cube, FunctionSpec, RealFn};
use xmo_core::kernels::{decay_slope, verify_bounds, BilinearKernel, SamplePlan};
use xmo_core::operators::{apply_t, truncation_gap, MaximalScan, Supported};
use xmo_core::oscillation::{classify, mean_oscillation, ScanConfig, Tolerances};
use xmo_core::weights::{power_weight, vector_ap_constant, weighted_lp_norm, VectorWeight};

type Check = fn() -> (bool, String);

fn f(text: &str) -> FunctionSpec {
    parse_function(text).unwrap().with_dim(1)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c1_sine_constant() -> (bool, String) {
    let s = catalog::sin_product(1);
    let want = 2.0 / PI;
    let mut worst: f64 = 0.0;
    for k in 1..=3 {
        let q = Cube::new(vec![2.0 * k as f64 * PI], PI / 2.0).unwrap();
        let v = mean_oscillation(&s, &q, 4096).unwrap();
        worst = worst.max((v - want).abs());
    }
    (worst <= 1e-3, format!("max |O(sin;I_k) - 2/pi| = {worst:.2e} (tol 1e-3)"))
}

fn c2_log_averages() -> (bool, String) {
    let log = catalog::log_abs(1);
    let osc_want = 2.0 / (E - 1.0) * ((1.0 / (E - 1.0)).exp() - E / (E - 1.0));
    let (mut avg_err, mut osc_err): (f64, f64) = (0.0, 0.0);
    for k in 1..=3 {
        let k = k as f64;
        let q = Cube::from_bounds(&[k.exp()], &[(k + 1.0).exp()]).unwrap();
        let avg = cube_average(&log, &q, 4096).unwrap();
        avg_err = avg_err.max((avg - (k + 1.0 / (E - 1.0))).abs());
        osc_err = osc_err.max((mean_oscillation(&log, &q, 4096).unwrap() - osc_want).abs());
    }
    (
        avg_err <= 1e-3 && osc_err <= 1e-3,
        format!("average error {avg_err:.2e}, oscillation error {osc_err:.2e} (tol 1e-3)"),
    )
}

fn c3_lower_bound() -> (bool, String) {
    let s = catalog::sin_product(1);
    let q = Cube::new(vec![2.0 * PI], PI / 2.0).unwrap();
    let suite = ["0", "5", "x1/1000", "0.3*sin(x1/3)", "0.35*x1 - pow(x1 - 6, 2)/200"];
    let bound = 4.0 / (PI * PI);
    let mut min_osc = f64::INFINITY;
    let mut max_slope: f64 = 0.0;
    for text in suite {
        let g = f(text);
        // oracle: central differences over I_1
        for i in 0..=2000 {
            let x = q.lo(0) + q.side() * i as f64 / 2000.0;
            let h = 1e-5;
            let d = (g.eval(&[x + h]).unwrap() - g.eval(&[x - h]).unwrap()) / (2.0 * h);
            max_slope = max_slope.max(d.abs());
        }
        min_osc = min_osc.min(mean_oscillation(&Difference(&s, &g), &q, 4096).unwrap());
    }
    let floor = 1.0 / (2.0 * PI) - 1e-3;
    (
        max_slope < bound && min_osc >= floor,
        format!("min O(sin-g;I_1) = {min_osc:.5} >= {floor:.5}; max |g'| = {max_slope:.4} < {bound:.4}"),
    )
}

fn c4_classifier() -> (bool, String) {
    let tol = Tolerances::default();
    let scan = ScanConfig::default_for(1);
    let sine = classify(&catalog::sin_product(1), &tol, &scan).unwrap();
    let log = classify(&catalog::smoothed_log(1), &tol, &scan).unwrap();
    let bump = classify(&catalog::bump(1), &tol, &scan).unwrap();
    let ok = sine.vmo_smallscale_ok
        && !sine.xmo_translation_ok
        && log.vmo_smallscale_ok
        && log.xmo_translation_ok
        && !log.cmo_largescale_ok
        && bump.vmo_smallscale_ok
        && bump.xmo_translation_ok
        && bump.cmo_largescale_ok;
    let flags = |d: &xmo_core::oscillation::Diagnosis| {
        format!("{}{}{}", d.vmo_smallscale_ok as u8, d.xmo_translation_ok as u8, d.cmo_largescale_ok as u8)
    };
    (
        ok,
        format!("(vmo,xmo,cmo): sin {} log {} bump {}", flags(&sine), flags(&log), flags(&bump)),
    )
}

fn pipelines() -> &'static Vec<PipelineReport> {
    static RUNS: OnceLock<Vec<PipelineReport>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let log = catalog::smoothed_log(1);
        [0.5, 0.25]
            .iter()
            .map(|&eps| run_pipeline(&log, &PipelineConfig::default_for(1, eps, 6)).unwrap().1)
            .collect()
    })
}

fn c5_approximation() -> (bool, String) {
    let runs = pipelines();
    let c = runs.iter().map(|r| r.observed_constant).fold(0.0, f64::max);
    let gaps_ok = runs.iter().all(|r| r.mollification_gap <= r.adjacency.max_jump + 1e-12);
    let detail = runs
        .iter()
        .map(|r| {
            format!(
                "eps={}: err {:.4} gap {:.4} <= jump {:.4}",
                r.epsilon, r.approximation_error.value, r.mollification_gap, r.adjacency.max_jump
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    (c <= 10.0 && gaps_ok, format!("C = {c:.3} (<= 10); {detail}"))
}

fn c6_derivative_decay() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in pipelines() {
        for p in &r.derivative_profiles {
            let monotone = p.values.windows(2).all(|w| w[1] <= w[0]);
            let last = *p.values.last().unwrap();
            ok &= monotone && last < 1e-2;
            parts.push(format!(
                "eps={} |a|={}: {}",
                r.epsilon,
                p.alpha.iter().sum::<usize>(),
                p.values.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(" > ")
            ));
        }
    }
    (ok, format!("radii 10,100,1000 (end < 1e-2): {}", parts.join("; ")))
}

fn c7_kernel_bounds() -> (bool, String) {
    let k = BilinearKernel::reference(1).unwrap();
    let plan = SamplePlan::default();
    let base = verify_bounds(&k, &plan).unwrap();
    let slope = decay_slope(&k, &[10.0, 100.0, 1000.0]).unwrap();
    let mut reg = Vec::new();
    let mut truncated_ok = true;
    for eta in [1.0, 0.5, 0.25] {
        let r = verify_bounds(&k.truncate(eta).unwrap(), &plan).unwrap();
        truncated_ok &= r.all_passed;
        reg.push(r.regularity.measured);
    }
    let ratio = reg.iter().cloned().fold(0.0, f64::max) / reg.iter().cloned().fold(f64::INFINITY, f64::min);
    (
        base.all_passed && (slope + 4.0).abs() <= 0.05 && truncated_ok && ratio <= 1.5,
        format!(
            "bounds passed {}; decay slope {slope:.4} (-4 +/- 0.05); truncated regularity {:?} ratio {ratio:.3} (<= 1.5)",
            base.all_passed && truncated_ok,
            reg.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    )
}

fn c8_truncation_gap() -> (bool, String) {
    let b = catalog::smoothed_log(1);
    let g = f("bump(x1/2)");
    let xs = vec![vec![0.5], vec![-0.8], vec![1.0]];
    let etas = [0.5, 0.25, 0.125];
    let scan = MaximalScan::default();
    let riesz = BilinearKernel::riesz(1).unwrap();
    let r = truncation_gap(&b, "smoothed_log", &riesz, &etas, &g, &g, &xs, 48, &scan).unwrap();
    let reference = BilinearKernel::reference(1).unwrap();
    let info = truncation_gap(&b, "smoothed_log", &reference, &etas, &g, &g, &xs, 48, &scan).unwrap();
    (
        (r.slope - 1.0).abs() <= 0.2 && r.constant_ratio <= 2.0,
        format!(
            "singular kernel slope {:.3} (1 +/- 0.2), constant ratio {:.3} (<= 2); bounded reference kernel slope {:.3} (informational)",
            r.slope, r.constant_ratio, info.slope
        ),
    )
}

fn unit_vector_weight() -> VectorWeight {
    VectorWeight::new(f("1"), f("1"), 4.0, 4.0).unwrap()
}

fn c9_translation() -> (bool, String) {
    let vw = unit_vector_weight();
    let dict = bump_dictionary(1, &vw).unwrap();
    let k = BilinearKernel::reference(1).unwrap().truncate(0.25).unwrap();
    let b = catalog::smoothed_log(1);
    let ts: Vec<Vec<f64>> = [0.02, 0.01, 0.005].iter().map(|t| vec![*t]).collect();
    let xs: Vec<Vec<f64>> = (0..41).map(|i| vec![-5.0 + 0.25 * i as f64]).collect();
    let r = translation_continuity(&b, &k, &dict[0], &ts, &xs, 48).unwrap();
    let sups: Vec<String> = r.rows.iter().map(|row| format!("{:.3e}/{:.3e}", row.sup_l4, row.sup_l5)).collect();
    (
        (r.slope_l4 - 1.0).abs() <= 0.2 && (r.slope_l5 - 2.0).abs() <= 0.3,
        format!(
            "L4 slope {:.3} (1 +/- 0.2), L5 slope {:.3} (2 +/- 0.3); sup L4/L5 at |t|=0.02,0.01,0.005: {}",
            r.slope_l4,
            r.slope_l5,
            sups.join(", ")
        ),
    )
}

fn c10_compactness() -> (bool, String) {
    let one = f("1");
    let tol = FkTolerances::default();
    let zero = f("0");
    let fam = Family::from_functions(OutputGrid::centered(1, 10.0, 0.25).unwrap(), &[(&zero, "0".into())]).unwrap();
    let z = fk_check(&fam, &one, 2.0, &[5.0], &[0.1, 0.01], &tol).unwrap();

    let bumps: Vec<FunctionSpec> = (0..9).map(|k| f(&format!("bump(x1 - {})", 10 * k))).collect();
    let members: Vec<(&dyn RealFn, String)> =
        bumps.iter().enumerate().map(|(k, b)| (b as &dyn RealFn, format!("c{}", 10 * k))).collect();
    let fam = Family::from_functions(OutputGrid::centered(1, 100.0, 0.125).unwrap(), &members).unwrap();
    let far = fk_check(&fam, &one, 2.0, &[10.0, 20.0, 40.0], &[0.1, 0.01], &tol).unwrap();

    let vw = unit_vector_weight();
    let dict = bump_dictionary(1, &vw).unwrap();
    let k = BilinearKernel::reference(1).unwrap().truncate(0.25).unwrap();
    let b = catalog::smoothed_log(1);
    let grid = OutputGrid::centered(1, 40.0, 1.0 / 32.0).unwrap();
    let fam = commutator_family(&b, "smoothed_log", &k, &dict, &vw, &grid, 48).unwrap();
    let c = fk_check(&fam, &vw.combined(), vw.p(), &[5.0, 10.0, 20.0], &[0.1, 0.03, 0.01], &tol).unwrap();

    let tail = c.tail_norms.last().unwrap().1 / c.bounded_sup;
    let modulus = c.modulus.last().unwrap().1 / c.bounded_sup;
    (
        z.verdict.all() && !far.verdict.vanishes_at_infinity && c.verdict.all(),
        format!(
            "zero family {}; far translates (ii) {}; commutator family (i,ii,iii) = ({},{},{}), sup {:.3}, tail/sup {:.2e} at A=20, modulus/sup {:.2e} at |t|=0.01 (tol 1e-2)",
            z.verdict.all(),
            far.verdict.vanishes_at_infinity,
            c.verdict.bounded,
            c.verdict.vanishes_at_infinity,
            c.verdict.equicontinuous,
            c.bounded_sup,
            tail,
            modulus
        ),
    )
}

// Independent brute-force integrators: plain midpoint loops at 4x the
// library resolution, no breakpoint alignment, no pairwise summation.

fn brute_mean_1d(g: &dyn Fn(f64) -> f64, lo: f64, hi: f64, m: usize) -> f64 {
    let h = (hi - lo) / m as f64;
    (0..m).map(|i| g(lo + (i as f64 + 0.5) * h)).sum::<f64>() / m as f64
}

fn brute_mean_2d(g: &dyn Fn(f64, f64) -> f64, q: &Cube, m: usize) -> f64 {
    let h = q.side() / m as f64;
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            acc += g(q.lo(0) + (i as f64 + 0.5) * h, q.lo(1) + (j as f64 + 0.5) * h);
        }
    }
    acc / (m * m) as f64
}

fn c11_oracle_equivalence() -> (bool, String) {
    const N: usize = 64;
    const M: usize = 4 * N;
    let mut worst: f64 = 0.0;
    let mut track = |name: &str, lib: f64, brute: f64, worst_name: &mut String| {
        let e = rel(lib, brute);
        if e > worst {
            worst = e;
            *worst_name = name.to_string();
        }
    };
    let mut worst_name = String::new();

    let funcs = ["exp(-x1*x1) + 0.5", "2 + sin(3*x1) + x1*x1/4", "exp(x1/3)*(2 + cos(x1))"];
    let cubes = [
        Cube::from_bounds(&[0.0], &[1.0]).unwrap(),
        Cube::from_bounds(&[-2.0], &[1.5]).unwrap(),
        Cube::new(vec![1.5], 1.0).unwrap(),
    ];
    for text in funcs {
        let g = f(text);
        let e = |x: f64| g.eval(&[x]).unwrap();
        for q in &cubes {
            let avg = brute_mean_1d(&e, q.lo(0), q.hi(0), M);
            track("cube_average", cube_average(&g, q, N).unwrap(), avg, &mut worst_name);
            let osc = brute_mean_1d(&|x| (e(x) - avg).abs(), q.lo(0), q.hi(0), M);
            track("mean_oscillation", mean_oscillation(&g, q, N).unwrap(), osc, &mut worst_name);
        }
    }

    let g2 = parse_function("2 + sin(x1)*cos(2*x2)").unwrap();
    let e2 = |x: f64, y: f64| g2.eval(&[x, y]).unwrap();
    for q in [Cube::from_bounds(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), Cube::new(vec![-1.0, 2.0], 1.5).unwrap()] {
        let avg = brute_mean_2d(&e2, &q, M);
        track("cube_average 2d", cube_average(&g2, &q, N).unwrap(), avg, &mut worst_name);
        let osc = brute_mean_2d(&|x, y| (e2(x, y) - avg).abs(), &q, M);
        track("mean_oscillation 2d", mean_oscillation(&g2, &q, N).unwrap(), osc, &mut worst_name);
    }

    let k = BilinearKernel::reference(1).unwrap().truncate(0.5).unwrap();
    let bump = f("bump(2*x1 - 1)");
    let gauss = f("exp(-x1*x1)");
    let unit = Cube::from_bounds(&[0.0], &[1.0]).unwrap();
    let wide = Cube::from_bounds(&[-1.0], &[1.0]).unwrap();
    for x in [3.0, 0.5, -0.7] {
        let out = apply_t(&k, Supported::new(&bump, &unit, "bump"), Supported::new(&gauss, &wide, "gauss"), &[vec![x]], N)
            .unwrap()
            .values[0];
        let (hy, hz) = (1.0 / M as f64, 2.0 / M as f64);
        let mut acc = 0.0;
        for i in 0..M {
            let y = (i as f64 + 0.5) * hy;
            for j in 0..M {
                let z = -1.0 + (j as f64 + 0.5) * hz;
                acc += k.eval(&[x], &[y], &[z]) * bump.eval(&[y]).unwrap() * gauss.eval(&[z]).unwrap() * hy * hz;
            }
        }
        track("apply_t", out, acc, &mut worst_name);
    }

    let w = power_weight(1, 0.5, 1.0);
    let h = f("exp(-x1*x1)");
    let region = Cube::new(vec![0.0], 2.0).unwrap();
    for p in [2.0, 3.0] {
        let lib = weighted_lp_norm(&h, &w, p, &region, N).unwrap();
        let m = brute_mean_1d(
            &|x| h.eval(&[x]).unwrap().abs().powf(p) * w.eval(&[x]).unwrap(),
            -2.0,
            2.0,
            M,
        );
        track("weighted_lp_norm", lib, (4.0 * m).powf(1.0 / p), &mut worst_name);
    }

    let (w1, w2) = (power_weight(1, 0.5, 1.0), power_weight(1, -0.4, 1.0));
    let vw = VectorWeight::new(w1.clone(), w2.clone(), 2.0, 3.0).unwrap();
    let (c1, c2) = (2.0, 1.5);
    let p = vw.p();
    for q in [Cube::new(vec![0.0], 1.0).unwrap(), Cube::new(vec![5.0], 2.0).unwrap()] {
        let lib = vector_ap_constant(&vw, std::slice::from_ref(&q), N).unwrap().constant;
        let a = |x: f64| w1.eval(&[x]).unwrap();
        let b = |x: f64| w2.eval(&[x]).unwrap();
        let m0 = brute_mean_1d(&|x| a(x).powf(p / 2.0) * b(x).powf(p / 3.0), q.lo(0), q.hi(0), M);
        let m1 = brute_mean_1d(&|x| a(x).powf(1.0 - c1), q.lo(0), q.hi(0), M);
        let m2 = brute_mean_1d(&|x| b(x).powf(1.0 - c2), q.lo(0), q.hi(0), M);
        track("vector_ap_constant", lib, m0 * m1.powf(p / c1) * m2.powf(p / c2), &mut worst_name);
    }

    let schedule = ThresholdSchedule::manual(0.5, -1, vec![1, 2, 3]).unwrap();
    let skeleton = build_family(&schedule, 1).unwrap();
    for text in ["x1 + 10", "exp(x1/4)", "1 + 0.5*log(1 + x1*x1)"] {
        let g = f(text);
        let approx = project_simple(&g, &skeleton, 8).unwrap();
        let moll = mollify(&approx).unwrap();
        let r = moll.radius();
        for x in [0.3, 1.7, -2.2, 3.1] {
            // dense midpoint on the mollifier ball
            let m = 4 * 1024;
            let hstep = 2.0 * r / m as f64;
            let brute: f64 = (0..m)
                .map(|i| {
                    let u = -r + (i as f64 + 0.5) * hstep;
                    approx.g(&[x - u]).unwrap() * mollifier(&[u], r) * hstep
                })
                .sum();
            track("mollify", moll.eval(&[x]).unwrap(), brute, &mut worst_name);
        }
    }

    (
        worst <= 1e-3,
        format!("worst relative difference {worst:.2e} in {worst_name} (tol 1e-3)"),
    )
}

fn main() {
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(u32, &str, u64, Check); 11] = [
        (1, "sine oscillation constant", 1, c1_sine_constant),
        (2, "log averages and oscillation", 1, c2_log_averages),
        (3, "1/(2 pi) lower bound", 1, c3_lower_bound),
        (4, "classifier separation", 30, c4_classifier),
        (5, "approximation pipeline", 120, c5_approximation),
        (6, "derivative decay", 60, c6_derivative_decay),
        (7, "kernel bound suite", 30, c7_kernel_bounds),
        (8, "truncation gap scaling", 300, c8_truncation_gap),
        (9, "L4/L5 scaling", 300, c9_translation),
        (10, "Frechet-Kolmogorov harness", 600, c10_compactness),
        (11, "oracle equivalence", 300, c11_oracle_equivalence),
    ];
    let mut failed = Vec::new();
    let mut ran = 0;
    for (id, name, budget, check) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        let (ok, detail) = result.unwrap_or_else(|_| (false, "panicked".to_string()));
        let in_time = elapsed <= Duration::from_secs(budget);
        let pass = ok && in_time;
        if !pass {
            failed.push(id);
        }
        println!(
            "{} criterion {id:>2} {name}: {detail} [{:.2}s / {budget}s{}]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", over budget" }
        );
    }
    println!("{} of {ran} criteria passed", ran - failed.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}

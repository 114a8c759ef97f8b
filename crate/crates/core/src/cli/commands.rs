use serde::Serialize;
use serde_json::{json, Value};

use super::config::{field_error, reason, RunConfig};
use super::Outcome;
use crate::approximation::{run_pipeline, PipelineConfig};
use crate::compactness::{
    bump_dictionary, commutator_family, fk_check, Family, FkTolerances, OutputGrid,
};
use crate::error::{Error, Result};
use crate::funcspace::{catalog, parse_function, Cube, FunctionSpec, RealFn};
use crate::kernels::{decay_slope, verify_bounds, BilinearKernel, SamplePlan};
use crate::operators::{commutator, default_operator_resolution, Slot, Supported};
use crate::oscillation::{
    annulus_profile, axis_directions, classify, default_annulus_probes, large_scale_profile,
    lattice, small_scale_profile, translation_profile, OscillationProfile, ScanConfig,
    Tolerances,
};
use crate::weights::{default_ap_cubes, vector_ap_constant, VectorWeight};

pub(super) fn dispatch(mut cfg: RunConfig) -> Result<(RunConfig, Outcome)> {
    let outcome = match cfg.command.as_str() {
        "oscillation" => oscillation(&mut cfg)?,
        "approx" => approx(&mut cfg)?,
        "kernel-verify" => kernel_verify(&mut cfg)?,
        "commutator" => run_commutator(&mut cfg)?,
        "weights" => weights(&mut cfg)?,
        "compactness" => compactness(&mut cfg)?,
        other => return Err(Error::precondition(format!("unknown command `{other}`"))),
    };
    Ok((cfg, outcome))
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn dim(cfg: &RunConfig) -> Result<usize> {
    let n = cfg.count("dim")?;
    if n == 0 {
        return Err(field_error("dim", "must be at least 1"));
    }
    Ok(n)
}

fn function(cfg: &RunConfig, key: &str, dim: usize) -> Result<FunctionSpec> {
    let text = cfg.text(key)?;
    catalog::resolve(&text, dim).map_err(|e| match e {
        Error::Domain(_) => e,
        other => field_error(key, &reason(&other)),
    })
}

fn kernel(cfg: &mut RunConfig, dim: usize) -> Result<BilinearKernel> {
    let base = match cfg.text("kernel")?.as_str() {
        "reference" => BilinearKernel::reference(dim),
        "riesz" => BilinearKernel::riesz(dim),
        "tail_k3" => BilinearKernel::tail_k3(dim, cfg.positive("a")?),
        other => return Err(field_error("kernel", &format!("unknown kernel `{other}`"))),
    }
    .map_err(|e| field_error("kernel", &reason(&e)))?;
    match cfg.opt_number("eta")? {
        Some(eta) => base.truncate(eta).map_err(|e| field_error("eta", &reason(&e))),
        None => Ok(base),
    }
}

fn centred_cube_text(dim: usize, half: f64) -> String {
    vec![format!("[{},{}]", -half, half); dim].join("x")
}

fn profile_rows(name: &str, p: &OscillationProfile, out: &mut String) {
    for line in p.to_csv().lines().skip(1) {
        out.push_str(name);
        out.push(',');
        out.push_str(line);
        out.push('\n');
    }
}

fn oscillation(cfg: &mut RunConfig) -> Result<Outcome> {
    let n = dim(cfg)?;
    let f = function(cfg, "f", n)?;
    let defaults = ScanConfig::default_for(n);
    cfg.fill("resolution", defaults.resolution);
    cfg.fill("half_width", defaults.half_width);
    cfg.fill("spacing", defaults.center_spacing);
    let res = cfg.count("resolution")?;
    let half_width = cfg.positive("half_width")?;
    let spacing = cfg.positive("spacing")?;
    let tol = cfg.positive("tol")?;
    let mode = cfg.text("mode")?;
    let centers = || lattice(n, half_width, spacing);
    let (report, csv) = match mode.as_str() {
        "classify" => {
            cfg.fill("radii", join(&defaults.translation_radii));
            let scan = ScanConfig {
                half_width,
                center_spacing: spacing,
                translation_radii: cfg.list("radii")?,
                resolution: res,
                ..defaults
            };
            let tols = Tolerances {
                small_scale: tol,
                translation: tol,
                large_scale: tol,
                annulus: tol,
            };
            let d = classify(&f, &tols, &scan)?;
            let mut csv = String::from("profile,parameter,value,argmax_center,argmax_side,cube_count\n");
            profile_rows("small_scale", &d.small_scale, &mut csv);
            profile_rows("translation", &d.translation, &mut csv);
            profile_rows("large_scale", &d.large_scale, &mut csv);
            profile_rows("annulus", &d.annulus, &mut csv);
            (to_value(&d)?, csv)
        }
        "small" => {
            cfg.fill("scales", join(&defaults.small_scales));
            let p = small_scale_profile(&f, &cfg.list("scales")?, &centers(), res)?;
            (to_value(&p)?, p.to_csv())
        }
        "large" => {
            cfg.fill("scales", join(&defaults.large_scales));
            let p = large_scale_profile(&f, &cfg.list("scales")?, &centers(), res)?;
            (to_value(&p)?, p.to_csv())
        }
        "translation" => {
            cfg.fill("cube", centred_cube_text(n, 0.5));
            cfg.fill("radii", join(&defaults.translation_radii));
            let q = cfg.cube("cube", n)?;
            let p = translation_profile(&f, &q, &axis_directions(n), &cfg.list("radii")?, res)?;
            (to_value(&p)?, p.to_csv())
        }
        "annulus" => {
            cfg.fill("radii", join(&defaults.annulus_radii));
            let radii = cfg.list("radii")?;
            let probes = radii
                .iter()
                .map(|&r| default_annulus_probes(n, r))
                .collect::<Result<Vec<_>>>()?;
            let p = annulus_profile(&f, &radii, &probes, res)?;
            (to_value(&p)?, p.to_csv())
        }
        other => return Err(field_error("mode", &format!("unknown mode `{other}`"))),
    };
    Ok(Outcome { report, csv })
}

fn approx(cfg: &mut RunConfig) -> Result<Outcome> {
    let n = dim(cfg)?;
    let f = function(cfg, "f", n)?;
    let eps = cfg.positive("eps")?;
    let kmax = cfg.count("kmax")?;
    let mut pc = PipelineConfig::default_for(n, eps, kmax);
    cfg.fill("resolution", pc.resolution);
    cfg.fill("test_centers", pc.test_centers_per_side);
    cfg.fill("gap_points", pc.gap_points_per_axis);
    pc.resolution = cfg.count("resolution")?;
    pc.test_centers_per_side = cfg.count("test_centers")?;
    pc.gap_points_per_axis = cfg.count("gap_points")?;
    pc.derivative_radii = cfg.list("radii")?;
    let (_, report) = run_pipeline(&f, &pc)?;
    let mut csv = String::from("alpha,radius,value\n");
    for p in &report.derivative_profiles {
        let alpha = p.alpha.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(";");
        for (r, v) in p.radii.iter().zip(&p.values) {
            csv.push_str(&format!("{alpha},{r},{v}\n"));
        }
    }
    Ok(Outcome {
        report: to_value(&report)?,
        csv,
    })
}

fn kernel_verify(cfg: &mut RunConfig) -> Result<Outcome> {
    let n = dim(cfg)?;
    let k = kernel(cfg, n)?;
    let plan = SamplePlan {
        random_samples: cfg.count("samples")?,
        sweep_samples: cfg.count("sweep")?,
        s_min: cfg.positive("s_min")?,
        s_max: cfg.positive("s_max")?,
        seed: cfg.seed()?,
    };
    let v = verify_bounds(&k, &plan)?;
    let slope = decay_slope(&k, &cfg.list("decay_s")?)?;
    let mut csv = String::from("bound,measured,declared,passed,samples\n");
    for (name, b) in [("size", &v.size), ("regularity", &v.regularity), ("decay", &v.decay)] {
        let declared = b.declared.map(|d| d.to_string()).unwrap_or_default();
        csv.push_str(&format!("{name},{},{declared},{},{}\n", b.measured, b.passed, b.samples));
    }
    let report = json!({
        "verification": to_value(&v)?,
        "decay_slope": slope,
        "expected_decay_slope": -(2.0 * n as f64 + 2.0),
    });
    Ok(Outcome { report, csv })
}

fn support(cfg: &mut RunConfig, key: &str, n: usize) -> Result<Cube> {
    cfg.fill(key, centred_cube_text(n, 1.0));
    cfg.cube(key, n)
}

fn run_commutator(cfg: &mut RunConfig) -> Result<Outcome> {
    let n = dim(cfg)?;
    let b = function(cfg, "b", n)?;
    let k = kernel(cfg, n)?;
    let f = function(cfg, "f", n)?;
    let g = function(cfg, "g", n)?;
    let fs = support(cfg, "f_support", n)?;
    let gs = support(cfg, "g_support", n)?;
    let slot_index = cfg.count("slot")?;
    let slot = Slot::from_index(slot_index).map_err(|e| field_error("slot", &reason(&e)))?;
    let xs = cfg.points("points", n)?;
    cfg.fill("resolution", default_operator_resolution(n));
    let res = cfg.count("resolution")?;
    let (f_id, g_id, b_id) = (f.to_string(), g.to_string(), b.to_string());
    let out = commutator(
        slot,
        &b,
        &b_id,
        &k,
        Supported::new(&f, &fs, &f_id),
        Supported::new(&g, &gs, &g_id),
        &xs,
        res,
    )?;
    let header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let mut csv = format!("{},integrand,operator_form\n", header.join(","));
    for ((x, a), o) in out.integrand.points.iter().zip(&out.integrand.values).zip(&out.operator_form) {
        csv.push_str(&format!("{},{a},{o}\n", join(x)));
    }
    Ok(Outcome {
        report: to_value(&out)?,
        csv,
    })
}

fn vector_weight(cfg: &RunConfig, n: usize) -> Result<VectorWeight> {
    let w1 = function(cfg, "w1", n)?;
    let w2 = function(cfg, "w2", n)?;
    let p1 = cfg.number("p1")?;
    let p2 = cfg.number("p2")?;
    VectorWeight::new(w1, w2, p1, p2).map_err(|e| match e {
        Error::Domain(_) => e,
        other => {
            let msg = reason(&other);
            field_error(if msg.contains("p2") { "p2" } else { "p1" }, &msg)
        }
    })
}

fn weights(cfg: &mut RunConfig) -> Result<Outcome> {
    let n = dim(cfg)?;
    let vw = vector_weight(cfg, n)?;
    cfg.fill("resolution", crate::funcspace::default_resolution(n));
    let res = cfg.count("resolution")?;
    let cubes = default_ap_cubes(n, cfg.positive("extent")?)?;
    let r = vector_ap_constant(&vw, &cubes, res)?;
    let csv = format!("p1,p2,p,constant\n{},{},{},{}\n", r.p1, r.p2, r.p, r.constant);
    Ok(Outcome {
        report: to_value(&r)?,
        csv,
    })
}

fn far_translate_text(n: usize, c: f64) -> String {
    if n == 1 {
        return format!("bump(x1 - {c:?})");
    }
    let mut terms = vec![format!("(x1 - {c:?})*(x1 - {c:?})")];
    terms.extend((2..=n).map(|i| format!("x{i}*x{i}")));
    format!("bump(sqrt({}))", terms.join(" + "))
}

fn compactness(cfg: &mut RunConfig) -> Result<Outcome> {
    let n = dim(cfg)?;
    let vw = vector_weight(cfg, n)?;
    let grid = OutputGrid::centered(n, cfg.positive("half_width")?, cfg.positive("spacing")?)?;
    let family = match cfg.text("family")?.as_str() {
        "commutator" => {
            let b = function(cfg, "b", n)?;
            let b_id = b.to_string();
            let k = kernel(cfg, n)?;
            cfg.fill("resolution", default_operator_resolution(n));
            let res = cfg.count("resolution")?;
            let dict = bump_dictionary(n, &vw)?;
            commutator_family(&b, &b_id, &k, &dict, &vw, &grid, res)?
        }
        "zero" => {
            let zero = parse_function("0")?.with_dim(n);
            Family::from_functions(grid, &[(&zero, "0".to_string())])?
        }
        "far_translate" => {
            let members = (0..9)
                .map(|k| parse_function(&far_translate_text(n, 10.0 * k as f64)).map(|f| f.with_dim(n)))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<(&dyn RealFn, String)> = members
                .iter()
                .enumerate()
                .map(|(k, f)| (f as &dyn RealFn, format!("bump at {}", 10 * k)))
                .collect();
            Family::from_functions(grid, &refs)?
        }
        other => return Err(field_error("family", &format!("unknown family `{other}`"))),
    };
    let tol = FkTolerances {
        bound_cap: cfg.positive("bound_cap")?,
        tail_rel: cfg.positive("tail_rel")?,
        modulus_rel: cfg.positive("modulus_rel")?,
    };
    let w = vw.combined();
    let r = fk_check(&family, &w, vw.p(), &cfg.list("a_list")?, &cfg.list("t_list")?, &tol)?;
    Ok(Outcome {
        report: to_value(&r)?,
        csv: r.to_csv(),
    })
}

//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use quasiproj::analysis::{fit_rate, modulus, ModulusOptions, NormDomain, Region, Source};
use quasiproj::cli::experiments::{
    moduli_property_checks, per_variable_ap, power_ap_constants, run, run_apply, run_jackson, run_rate,
    run_sampling_mixed, run_sampling_tail,
};
use quasiproj::cli::{build_artifacts, validate_hypotheses, ExperimentConfig, RawConfig};
use quasiproj::compat::{check_strict, detect_weak_order};
use quasiproj::fourier;
use quasiproj::kernels::{BandLimitedKernel, DualFunctional};
use quasiproj::signals::Signal;
use quasiproj::weights::{check_w_alpha_membership, Weight};

type Check = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Check);

fn config(pairs: &[(&str, &str)]) -> ExperimentConfig {
    let mut raw = RawConfig::default();
    for (k, v) in pairs {
        raw.set(k, v).unwrap();
    }
    ExperimentConfig::resolve(&raw).unwrap()
}

fn num(v: &Value, path: &[&str]) -> f64 {
    let mut cur = v;
    for p in path {
        cur = &cur[*p];
    }
    cur.as_f64().unwrap_or(f64::NAN)
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn c1_reconstruction() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (dim, tol) in [(1usize, 1e-6), (2, 1e-4)] {
        for dual in ["dirac", "fn:flat_top:0.3:0.45"] {
            let d = dim.to_string();
            let cfg = config(&[
                ("experiment", "reconstruction"),
                ("dim", &d),
                ("kernel", "flat_top:0.25:0.45"),
                ("dual", dual),
                ("signal", "bandlimited:0.2"),
                ("j_list", "0..2"),
            ]);
            let want_points = if dim == 1 { 1 << 13 } else { 1 << 9 };
            if cfg.grid_points != want_points {
                return Err(format!("d={dim}: grid has {} points", cfg.grid_points));
            }
            let t = Instant::now();
            let out = run_apply(&cfg).map_err(err)?;
            let secs = t.elapsed().as_secs_f64();
            let e = num(&out.result, &["max_interior_error"]);
            ok &= e <= tol && secs < 30.0;
            parts.push(format!("d={dim} {dual}: {e:.2e} ({secs:.1}s)"));
        }
    }
    Ok((ok, parts.join(", ")))
}

fn rate_of(pairs: &[(&str, &str)]) -> Result<(f64, f64, f64), String> {
    let t = Instant::now();
    let out = run_rate(&config(pairs)).map_err(err)?;
    let curve = out.curve.ok_or("no curve")?;
    Ok((curve.fitted_slope, curve.r2, t.elapsed().as_secs_f64()))
}

fn c2_saturated_rate() -> Check {
    let (slope, r2, secs) = rate_of(&[
        ("experiment", "strict_rate"),
        ("kernel", "flat_top:0.25:0.45"),
        ("weight", "poly:0.25"),
        ("signal", "matern_like:1"),
        ("j_list", "1..6"),
    ])?;
    let ok = (1.2..=1.8).contains(&slope) && r2 >= 0.98 && secs < 60.0;
    Ok((ok, format!("slope {slope:.3} (theory 1.5), r² {r2:.4}, {secs:.1}s")))
}

fn c3_smooth_rate() -> Check {
    let (s1, r1, _) = rate_of(&[
        ("experiment", "weak_rate"),
        ("kernel", "weak:1:0.25:0.45"),
        ("n", "1"),
        ("signal", "matern_like:1"),
        ("j_list", "1..6"),
    ])?;
    let (s2, r2, _) = rate_of(&[
        ("experiment", "weak_rate"),
        ("kernel", "weak:2:0.25:0.45"),
        ("n", "2"),
        ("signal", "matern_like:3"),
        ("j_list", "1..6"),
    ])?;
    let ok = (0.8..=1.2).contains(&s1) && (1.7..=2.3).contains(&s2);
    Ok((
        ok,
        format!("n=1 slope {s1:.3} (r² {r1:.4}, theory 1.0); n=2, a=3 slope {s2:.3} (r² {r2:.4}, theory 2.0)"),
    ))
}

fn c4_tail_stability() -> Check {
    let cfg = config(&[
        ("experiment", "sampling_tail"),
        ("weight", "bandlimited:0.25:0.125"),
        ("j_list", "1..5"),
    ]);
    if !cfg.weight().map_err(err)?.is_band_limited() {
        return Err("weight is not band-limited".into());
    }
    let out = run_sampling_tail(&cfg).map_err(err)?;
    let r = &out.result["error_q_over_tail"];
    let spread = num(r, &["max_over_min"]);
    let last = num(r, &["last_over_median"]);
    Ok((
        spread <= 4.0 && last <= 1.5,
        format!("error^2/tail max/min {spread:.3}, last/median {last:.3}"),
    ))
}

fn c5_mixed_bound() -> Check {
    let cfg = config(&[
        ("experiment", "sampling_mixed"),
        ("kernel", "weak:2:0.25:0.45"),
        ("weight", "poly:0.25"),
        ("p", "2"),
        ("j_list", "1..5"),
    ]);
    let out = run_sampling_mixed(&cfg).map_err(err)?;
    if out.result["weak_order"] != 2 {
        return Err(format!("kernel order {}", out.result["weak_order"]));
    }
    let c = &out.result["constants"];
    let spread = num(c, &["spread"]);
    let curve = out.curve.ok_or("no curve")?;
    let bounds = curve.bounds.clone().ok_or("no bounds")?;
    let below = curve.errors.iter().zip(&bounds).all(|(e, b)| *e <= *b * (1.0 + 1e-12));
    let single = num(&out.result, &["single_term_ratios", "modulus_only", "max_over_min"]);
    Ok((
        spread <= 4.0 && below,
        format!(
            "C1 {:.3e}, C2 {:.3e}, ratio max/min {spread:.3}, error ≤ bound: {below} (modulus term alone: max/min {single:.2})",
            num(c, &["c1"]),
            num(c, &["c2"])
        ),
    ))
}

fn c6_compatibility() -> Check {
    let mut ok = true;
    let mut orders = Vec::new();
    for n in 1..=3 {
        let k = BandLimitedKernel::weak(1, n, 0.25, 0.45).map_err(err)?;
        let got = detect_weak_order(&k, &DualFunctional::Dirac, 6, 0.04, 1e-6).map_err(err)?.order;
        ok &= got == n;
        orders.push(format!("{n}→{got}"));
    }
    let flat = BandLimitedKernel::flat_top(1, 0.25, 0.45).map_err(err)?;
    let sinc = BandLimitedKernel::sinc_tensor(1).map_err(err)?;
    let s_sinc = check_strict(&sinc, &DualFunctional::Dirac, 0.25, 33, 1e-12).map_err(err)?.pass;
    let s_flat = check_strict(&flat, &DualFunctional::Dirac, 0.25, 33, 1e-12).map_err(err)?.pass;
    let s_box = check_strict(&flat, &DualFunctional::BoxAverage, 0.25, 33, 1e-12).map_err(err)?.pass;
    ok &= s_sinc && s_flat && !s_box;
    Ok((
        ok,
        format!("weak orders {}; strict sinc/dirac {s_sinc}, flat/dirac {s_flat}, flat/box {s_box}", orders.join(" ")),
    ))
}

/// `sup` of `‖Δ_δ^n f‖_{2,1/w}` over 10⁴ evenly spread `δ ∈ (−h, h)`, summed directly on the nodes.
fn dense_modulus(f: &dyn Fn(f64) -> f64, w: &Weight, n: u32, h: f64, dom: &NormDomain) -> f64 {
    let step = dom.step();
    let nodes: Vec<f64> = (0..dom.points)
        .map(|i| -dom.halfwidth + step * i as f64)
        .filter(|x| x.abs() <= 0.5 * dom.halfwidth)
        .collect();
    let binom: Vec<f64> = (0..=n).map(|k| (1..=k).fold(1.0, |c, i| c * (n + 1 - i) as f64 / i as f64)).collect();
    let inv_w: Vec<f64> = nodes.iter().map(|&x| 1.0 / w.eval(&[x])).collect();
    let samples = 10_000;
    let mut best: f64 = 0.0;
    for s in 0..samples {
        let delta = -h + 2.0 * h * (s as f64 + 0.5) / samples as f64;
        let mut acc = 0.0;
        for (x, iw) in nodes.iter().zip(&inv_w) {
            let mut diff = 0.0;
            for k in 0..=n {
                let sign = if (n - k).is_multiple_of(2) { 1.0 } else { -1.0 };
                diff += sign * binom[k as usize] * f(x + k as f64 * delta);
            }
            acc += (diff * iw).powi(2);
        }
        best = best.max((acc * step).sqrt());
    }
    best
}

fn c7_moduli() -> Check {
    let cfg = config(&[("experiment", "moduli_props"), ("j_list", "1..3")]);
    let checks = moduli_property_checks(&cfg).map_err(err)?;
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} {}", c.property, c.signal))
        .collect();
    let w = Weight::polynomial(1, 0.25).map_err(err)?;
    let dom = NormDomain::new(1, 16.0, 2048, Region::Interior).map_err(err)?;
    let opts = ModulusOptions::standard(dom.clone(), 7);
    type Closed = (&'static str, Signal, Box<dyn Fn(f64) -> f64>);
    let cases: Vec<Closed> = vec![
        ("gaussian:0.5", Signal::gaussian(1, 0.5).map_err(err)?, Box::new(|x: f64| (-PI * 4.0 * x * x).exp())),
        ("gaussian:1", Signal::gaussian(1, 1.0).map_err(err)?, Box::new(|x: f64| (-PI * x * x).exp())),
        (
            "two-sided exponential",
            Signal::custom("laplace", 1, |x| Complex64::new((-2.0 * PI * x[0].abs()).exp(), 0.0)),
            Box::new(|x: f64| (-2.0 * PI * x.abs()).exp()),
        ),
        (
            "growing oscillation",
            Signal::custom("osc", 1, |x| Complex64::new((1.0 + x[0] * x[0]).powf(0.1) * (3.0 * x[0]).cos(), 0.0)),
            Box::new(|x: f64| (1.0 + x * x).powf(0.1) * (3.0 * x).cos()),
        ),
    ];
    let mut worst: f64 = 0.0;
    for (_, sig, closed) in &cases {
        for n in [1u32, 2] {
            for h in [0.5, 0.125] {
                let sampled = modulus(Source::Signal(sig), n, h, 2.0, &w, &opts).map_err(err)?.value;
                let dense = dense_modulus(closed.as_ref(), &w, n, h, &dom);
                worst = worst.max((sampled - dense).abs() / dense);
            }
        }
    }
    let ok = failed.is_empty() && worst <= 0.02;
    Ok((
        ok,
        format!(
            "{}/{} property checks hold{}; worst deviation from dense sup {:.3}%",
            checks.len() - failed.len(),
            checks.len(),
            if failed.is_empty() { String::new() } else { format!(" (failed: {})", failed.join("; ")) },
            100.0 * worst
        ),
    ))
}

fn c8_jackson() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for signal in ["gaussian:1", "matern_like:1"] {
        for n in ["1", "2"] {
            let out = run_jackson(&config(&[
                ("experiment", "jackson"),
                ("signal", signal),
                ("n", n),
                ("j_list", "0..5"),
            ]))
            .map_err(err)?;
            let r = &out.result["ratio"];
            let ratios: Vec<f64> = r["ratios"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap_or(f64::NAN)).collect();
            let last = num(r, &["last_over_median"]);
            let bounded = ratios.iter().all(|v| v.is_finite() && *v >= 0.0);
            ok &= bounded && last <= 2.0;
            parts.push(format!("{signal} n={n}: last/median {last:.3}"));
        }
    }
    Ok((ok, parts.join(", ")))
}

fn c9_weights() -> Check {
    let mut defect: f64 = 0.0;
    let mut passes = true;
    for (d, grid) in [
        (1usize, (-40..=40).map(|i| vec![0.37 * i as f64]).collect::<Vec<_>>()),
        (2, (-7..=7).flat_map(|i| (-7..=7).map(move |k| vec![0.9 * i as f64, 1.3 * k as f64])).collect()),
    ] {
        for alpha in [0.25, 0.5, 0.9] {
            let w = Weight::polynomial(d, alpha).map_err(err)?;
            let m = check_w_alpha_membership(&w, &grid, 1e-12);
            passes &= m.passes;
            defect = defect.max(m.evenness_defect).max(m.submult_defect).max(m.dominant_defect);
        }
    }
    let stable = power_ap_constants(0.5, 2.0, 0.0).map_err(err)?;
    let s_hi = stable.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s_lo = stable.iter().cloned().fold(f64::INFINITY, f64::min);
    let stable_ok = s_hi.is_finite() && s_hi / s_lo <= 1.01;
    let divergent: Vec<f64> = [1e-2, 1e-4, 1e-6]
        .iter()
        .map(|&eps| power_ap_constants(1.5, 2.0, eps).map(|v| v.into_iter().fold(0.0, f64::max)))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let divergent_ok = divergent.windows(2).all(|p| p[1] >= 5.0 * p[0]);
    let pv = per_variable_ap(&Weight::polynomial(2, 0.25).map_err(err)?, 2.0).map_err(err)?;
    let consistent = pv.max_axis_constant.is_finite()
        && pv.max_axis_constant <= 1.05 * pv.rectangle_constant
        && pv.rectangle_constant <= 1.05 * pv.max_axis_constant.powi(2);
    let ok = passes && defect <= 1e-12 && stable_ok && divergent_ok && consistent;
    Ok((
        ok,
        format!(
            "membership defect {defect:.1e}; |x|^1/2 A_2 {s_lo:.6}..{s_hi:.6}; |x|^3/2 A_2 by cutoff {:.1} / {:.1} / {:.1}; per-variable {:.4} vs rectangle {:.4}",
            divergent[0], divergent[1], divergent[2], pv.max_axis_constant, pv.rectangle_constant
        ),
    ))
}

fn c10_plumbing() -> Check {
    let js: Vec<u32> = (1..=6).collect();
    let mut fit_err: f64 = 0.0;
    for (s, lambda, log) in [(1.5, 2.0, false), (0.7, 3.0, false), (2.25, 2.0, true)] {
        let e: Vec<f64> = js
            .iter()
            .map(|&j| 0.37 * if log { (j as f64).sqrt() } else { 1.0 } * f64::powf(lambda, -s * j as f64))
            .collect();
        fit_err = fit_err.max((fit_rate(&e, &js, lambda, log).map_err(err)?.slope - s).abs());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = ArrayD::from_shape_fn(IxDyn(&[64, 32]), |_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let back = fourier::inverse(&fourier::forward(&data, 5.0), 5.0);
    let round = data.iter().zip(back.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);

    let mut dual_err: f64 = 0.0;
    for dim in [1usize, 2] {
        let g = Signal::gaussian(dim, 1.0).map_err(err)?.sample_to_grid(8.0, 256).map_err(err)?;
        let spec = g.spectrum();
        let nodes = spec.axis_nodes();
        for (ix, v) in spec.samples().indexed_iter() {
            let r2: f64 = (0..dim).map(|a| nodes[ix[a]].powi(2)).sum();
            dual_err = dual_err.max((v - Complex64::new((-PI * r2).exp(), 0.0)).norm());
        }
    }

    let mut identical = true;
    for pairs in [
        vec![("experiment", "strict_rate"), ("j_list", "1..3"), ("grid.points", "2048")],
        vec![("experiment", "reconstruction"), ("j_list", "0..1")],
        vec![("experiment", "moduli_props"), ("j_list", "1")],
    ] {
        let cfg = config(&pairs);
        let hyps = validate_hypotheses(&cfg);
        let dir = std::path::Path::new("out");
        let a = build_artifacts(&cfg, &hyps, false, &run(&cfg).map_err(err)?, dir, true).map_err(err)?;
        let b = build_artifacts(&cfg, &hyps, false, &run(&cfg).map_err(err)?, dir, true).map_err(err)?;
        identical &= a.files == b.files;
    }
    let ok = fit_err <= 1e-10 && round <= 1e-10 && dual_err <= 1e-8 && identical;
    Ok((
        ok,
        format!("slope error {fit_err:.1e}; FFT round trip {round:.1e}; Gaussian self-duality {dual_err:.1e}; reruns byte-identical: {identical}"),
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("exact reconstruction of band-limited signals", c1_reconstruction),
        ("sampling rate, saturated case", c2_saturated_rate),
        ("sampling rate, smooth case", c3_smooth_rate),
        ("tail-bound ratio stability", c4_tail_stability),
        ("mixed modulus and tail bound", c5_mixed_bound),
        ("compatibility detection", c6_compatibility),
        ("modulus properties and dense oracle", c7_moduli),
        ("Jackson ratio", c8_jackson),
        ("weights audit", c9_weights),
        ("plumbing exactness", c10_plumbing),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

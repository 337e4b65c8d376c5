//! Experiment runners behind the `qproj` subcommands.

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Experiment, ExperimentConfig, WeightSpec};
use crate::analysis::{
    anisotropic_modulus, best_approx_band_grid, error_curve, fit_bound_constants, modulus, modulus_pair,
    tail_bound, ModulusOptions, NormDomain, RateReport, Region, Source, SpectrumSource, TheoryCase,
};
use crate::compat::{audit, detect_weak_order, CompatOptions};
use crate::error::{invalid, Result};
use crate::kernels::DualFunctional;
use crate::qproj::{apply_operator, ErrorBudget, OperatorOptions};
use crate::signals::{GridSignal, Signal};
use crate::weights::{
    ap_per_variable, ap_rectangle_constant, check_dilation_stability, check_w_alpha_membership,
    dyadic_rectangles, ApOptions, Rect, Weight,
};

/// Everything an experiment produced, before anything is written.
#[derive(Debug, Default)]
pub struct Outcome {
    pub result: Value,
    pub curve: Option<RateReport>,
    pub budgets: Vec<ErrorBudget>,
    pub warnings: Vec<String>,
    pub grid: Option<GridSignal>,
}

fn operator_options(cfg: &ExperimentConfig) -> OperatorOptions {
    OperatorOptions {
        tol: cfg.tol,
        ..Default::default()
    }
}

fn modulus_options(cfg: &ExperimentConfig) -> Result<ModulusOptions> {
    Ok(ModulusOptions {
        dirs: cfg.modulus_dirs,
        seed: cfg.seed,
        domain: NormDomain::new(cfg.dim, cfg.grid_halfwidth, cfg.modulus_points, Region::Interior)?,
    })
}

fn interior_max_error(truth: &GridSignal, approx: &GridSignal) -> f64 {
    let l = truth.halfwidth();
    let nodes = truth.axis_nodes();
    truth
        .samples()
        .indexed_iter()
        .filter(|(ix, _)| (0..truth.dim()).all(|a| nodes[ix[a]].abs() <= 0.5 * l))
        .map(|(ix, v)| (v - approx.samples()[ix]).norm())
        .fold(0.0, f64::max)
}

fn budget_warnings(budgets: &[ErrorBudget], js: &[u32], out: &mut Vec<String>) {
    for (b, j) in budgets.iter().zip(js) {
        if b.under_truncated {
            out.push(format!("UNDER-TRUNCATED coefficient lattice at j={j}"));
        }
    }
}

fn monotonicity_warning(errors: &[f64], out: &mut Vec<String>) {
    if let Some(i) = (1..errors.len()).find(|&i| errors[i] > 1.02 * errors[i - 1]) {
        out.push(format!("error curve increases at position {i} beyond 2% noise"));
    }
}

/// `Q_j f` for every configured `j`, with the interior error against `f`.
pub fn run_apply(cfg: &ExperimentConfig) -> Result<Outcome> {
    let phi = cfg.kernel()?;
    let dual = cfg.dual()?;
    let m = cfg.dilation()?;
    let w = cfg.weight()?;
    let f = cfg.signal.build(cfg.dim, &w, cfg.seed)?;
    let truth = f.sample_to_grid(cfg.grid_halfwidth, cfg.grid_points)?;
    let opts = operator_options(cfg);
    let mut per_j = Vec::new();
    let mut out = Outcome::default();
    let mut worst: f64 = 0.0;
    for &j in &cfg.j_list {
        let q = apply_operator(&f, &phi, &dual, &m, j, cfg.grid_halfwidth, cfg.grid_points, &opts)?;
        let err = interior_max_error(&truth, &q.grid);
        worst = worst.max(err);
        per_j.push(json!({ "j": j, "max_interior_error": err, "coefficients": q.lattice.coeffs.len() }));
        out.budgets.push(q.budget);
        out.grid = Some(q.grid);
    }
    budget_warnings(&out.budgets, &cfg.j_list, &mut out.warnings);
    out.result = json!({ "per_j": per_j, "max_interior_error": worst });
    Ok(out)
}

fn theory_case(cfg: &ExperimentConfig, order: Option<u32>, a: Option<f64>) -> TheoryCase {
    TheoryCase::classify(order, cfg.dim, cfg.p, a.unwrap_or(f64::INFINITY))
}

/// Sampling error curve `‖f − Q_j f‖_{p,1/w}` and its fitted rate.
pub fn run_rate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let phi = cfg.kernel()?;
    let dual = DualFunctional::Dirac;
    let m = cfg.dilation()?;
    let w = cfg.weight()?;
    let f = cfg.signal.build(cfg.dim, &w, cfg.seed)?;
    let order = if cfg.experiment == Experiment::StrictRate {
        None
    } else {
        Some(detect_weak_order(&phi, &dual, 6, 0.04, 1e-6)?.order)
    };
    let case = theory_case(cfg, order, cfg.signal.decay());
    let curve = error_curve(
        &f,
        &phi,
        &dual,
        &m,
        &cfg.j_list,
        cfg.p,
        &w,
        cfg.grid_halfwidth,
        cfg.grid_points,
        &operator_options(cfg),
    )?;
    let errors: Vec<f64> = curve.iter().map(|c| c.error).collect();
    let mut out = Outcome {
        budgets: curve.iter().map(|c| c.budget.clone()).collect(),
        ..Default::default()
    };
    let report = RateReport::new(cfg.j_list.clone(), errors.clone(), None, cfg.lambda(), case)?;
    budget_warnings(&out.budgets, &cfg.j_list, &mut out.warnings);
    monotonicity_warning(&errors, &mut out.warnings);
    if report.poor_fit {
        out.warnings.push(format!("poor rate fit: r² = {:.4}", report.r2));
    }
    out.result = json!({ "weak_order": order, "rate": &report });
    out.curve = Some(report);
    Ok(out)
}

/// Tail integral for `F(w^{-1} f)`, closed form when available, FFT of sampled `f/w` otherwise.
fn tail_for(f: &Signal, w: &Weight, cfg: &ExperimentConfig, j: u32, delta: f64) -> Result<f64> {
    let m = cfg.dilation()?;
    if f.has_base_spectrum() {
        return tail_bound(SpectrumSource::Signal(f), &m, j, cfg.gamma, cfg.q(), cfg.p, delta);
    }
    let g = f.sample_to_grid(cfg.grid_halfwidth, cfg.grid_points)?;
    let nodes = g.axis_nodes();
    let mut s = g.samples().clone();
    let mut x = vec![0.0; cfg.dim];
    for (ix, v) in s.indexed_iter_mut() {
        for (a, xi) in x.iter_mut().enumerate() {
            *xi = nodes[ix[a]];
        }
        *v /= w.eval(&x);
    }
    tail_bound(SpectrumSource::Grid(&g.with_samples(s)?), &m, j, cfg.gamma, cfg.q(), cfg.p, delta)
}

fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Summary of a sequence of ratios that should stay bounded without a trend.
#[derive(Debug, Clone, Serialize)]
pub struct RatioStability {
    pub ratios: Vec<f64>,
    pub max_over_min: f64,
    pub last_over_median: f64,
}

impl RatioStability {
    pub fn new(ratios: Vec<f64>) -> Self {
        Self {
            max_over_min: spread(&ratios),
            last_over_median: ratios.last().copied().unwrap_or(f64::NAN) / median(&ratios),
            ratios,
        }
    }
}

/// `‖f − Q_j f‖^q` against the spectral tail integral, for a band-limited weight.
pub fn run_sampling_tail(cfg: &ExperimentConfig) -> Result<Outcome> {
    let phi = cfg.kernel()?;
    let m = cfg.dilation()?;
    let w = cfg.weight()?;
    let f = cfg.signal.build(cfg.dim, &w, cfg.seed)?;
    let delta = cfg.delta.unwrap_or(phi.flat_radius());
    let curve = error_curve(
        &f,
        &phi,
        &DualFunctional::Dirac,
        &m,
        &cfg.j_list,
        cfg.p,
        &w,
        cfg.grid_halfwidth,
        cfg.grid_points,
        &operator_options(cfg),
    )?;
    let errors: Vec<f64> = curve.iter().map(|c| c.error).collect();
    let q = cfg.q();
    let tails = cfg
        .j_list
        .iter()
        .map(|&j| tail_for(&f, &w, cfg, j, delta))
        .collect::<Result<Vec<f64>>>()?;
    if tails.iter().any(|t| !(*t > 0.0)) {
        return Err(invalid("spectral tail vanishes for some j; the ratio is undefined"));
    }
    let stability = RatioStability::new(errors.iter().zip(&tails).map(|(e, t)| e.powf(q) / t).collect());
    let bounds: Vec<f64> = tails.iter().map(|t| t.powf(1.0 / q)).collect();
    let case = theory_case(cfg, None, cfg.signal.decay());
    let report = RateReport::new(cfg.j_list.clone(), errors.clone(), Some(bounds), cfg.lambda(), case)?;
    let mut out = Outcome {
        budgets: curve.iter().map(|c| c.budget.clone()).collect(),
        ..Default::default()
    };
    budget_warnings(&out.budgets, &cfg.j_list, &mut out.warnings);
    monotonicity_warning(&errors, &mut out.warnings);
    out.result = json!({
        "delta": delta,
        "q": q,
        "tail": tails,
        "error_q_over_tail": stability,
        "rate": &report,
    });
    out.curve = Some(report);
    Ok(out)
}

/// Terms of the mixed bound at one `j`.
#[derive(Debug, Clone, Serialize)]
pub struct MixedTerms {
    pub j: u32,
    /// `∑_{ν=0}^n ‖M^{-j}‖^{νq} ω_{n−ν}(f, ‖M^{-j}‖)^q`.
    pub modulus_sum: f64,
    /// Spectral tail over `|M^{-j}ξ| ≥ 1/2`.
    pub tail: f64,
}

pub fn mixed_terms(f: &Signal, w: &Weight, cfg: &ExperimentConfig, n: u32) -> Result<Vec<MixedTerms>> {
    let m = cfg.dilation()?;
    let opts = modulus_options(cfg)?;
    let q = cfg.q();
    cfg.j_list
        .iter()
        .map(|&j| {
            let h = m.op_norm_inverse_power(j);
            let mut s = 0.0;
            for nu in 0..=n {
                let om = modulus(Source::Signal(f), n - nu, h, cfg.p, w, &opts)?.value;
                s += h.powf(nu as f64 * q) * om.powf(q);
            }
            Ok(MixedTerms {
                j,
                modulus_sum: s,
                tail: tail_for(f, w, cfg, j, 1.0)?,
            })
        })
        .collect()
}

/// Error of the weakly compatible sampling operator against the modulus and tail terms.
pub fn run_sampling_mixed(cfg: &ExperimentConfig) -> Result<Outcome> {
    let phi = cfg.kernel()?;
    let m = cfg.dilation()?;
    let w = cfg.weight()?;
    let f = cfg.signal.build(cfg.dim, &w, cfg.seed)?;
    let n = detect_weak_order(&phi, &DualFunctional::Dirac, 6, 0.04, 1e-6)?.order;
    let curve = error_curve(
        &f,
        &phi,
        &DualFunctional::Dirac,
        &m,
        &cfg.j_list,
        cfg.p,
        &w,
        cfg.grid_halfwidth,
        cfg.grid_points,
        &operator_options(cfg),
    )?;
    let errors: Vec<f64> = curve.iter().map(|c| c.error).collect();
    let q = cfg.q();
    let terms = mixed_terms(&f, &w, cfg, n)?;
    let lhs: Vec<f64> = errors.iter().map(|e| e.powf(q)).collect();
    let s1: Vec<f64> = terms.iter().map(|t| t.modulus_sum).collect();
    let s2: Vec<f64> = terms.iter().map(|t| t.tail).collect();
    let fit = fit_bound_constants(&lhs, &s1, &s2)?;
    let scale = fit.ratios.iter().cloned().fold(0.0, f64::max);
    let bounds: Vec<f64> = (0..lhs.len())
        .map(|i| (scale * (fit.c1 * s1[i] + fit.c2 * s2[i])).powf(1.0 / q))
        .collect();
    let per_term = json!({
        "modulus_only": RatioStability::new(lhs.iter().zip(&s1).map(|(e, s)| e / s).collect()),
        "tail_only": RatioStability::new(lhs.iter().zip(&s2).map(|(e, s)| e / s).collect()),
    });
    let case = theory_case(cfg, Some(n), cfg.signal.decay());
    let report = RateReport::new(cfg.j_list.clone(), errors.clone(), Some(bounds), cfg.lambda(), case)?;
    let mut out = Outcome {
        budgets: curve.iter().map(|c| c.budget.clone()).collect(),
        ..Default::default()
    };
    budget_warnings(&out.budgets, &cfg.j_list, &mut out.warnings);
    monotonicity_warning(&errors, &mut out.warnings);
    out.result = json!({
        "weak_order": n,
        "q": q,
        "terms": terms,
        "constants": fit,
        "single_term_ratios": per_term,
        "rate": &report,
    });
    out.curve = Some(report);
    Ok(out)
}

/// Band-limited approximation surrogate against the anisotropic modulus.
pub fn run_jackson(cfg: &ExperimentConfig) -> Result<Outcome> {
    let m = cfg.dilation()?;
    let w = cfg.weight()?;
    let f = cfg.signal.build(cfg.dim, &w, cfg.seed)?;
    let grid = f.sample_to_grid(cfg.grid_halfwidth, cfg.grid_points)?;
    let opts = modulus_options(cfg)?;
    let mut errs = Vec::new();
    let mut moduli = Vec::new();
    for &j in &cfg.j_list {
        let sigma = (cfg.dim as f64).sqrt() * cfg.lambda().powi(j as i32);
        errs.push(best_approx_band_grid(&grid, sigma, cfg.p, &w)?);
        moduli.push(anisotropic_modulus(Source::Signal(&f), cfg.n, &m.power(j as i32), cfg.p, &w, &opts)?.value);
    }
    let stability = RatioStability::new(errs.iter().zip(&moduli).map(|(e, o)| e / o).collect());
    let mut out = Outcome::default();
    let curve = if errs.iter().all(|e| *e > 0.0) && cfg.j_list.len() >= 3 {
        let case = theory_case(cfg, Some(cfg.n), cfg.signal.decay());
        Some(RateReport::new(cfg.j_list.clone(), errs.clone(), Some(moduli.clone()), cfg.lambda(), case)?)
    } else {
        out.warnings.push("approximation error vanished; no rate fitted".into());
        None
    };
    out.result = json!({
        "approximation_error": errs,
        "anisotropic_modulus": moduli,
        "ratio": stability,
    });
    out.curve = curve;
    Ok(out)
}

/// One inequality check with its two sides.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyCheck {
    pub property: String,
    pub signal: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

fn check(property: &str, signal: &str, lhs: f64, rhs: f64, slack: f64) -> PropertyCheck {
    PropertyCheck {
        property: property.into(),
        signal: signal.into(),
        lhs,
        rhs,
        pass: lhs <= rhs * (1.0 + slack) + 1e-300,
    }
}

/// Six signals of different smoothness and growth for the modulus properties.
pub fn modulus_test_signals(dim: usize, w: &Weight, seed: u64) -> Result<Vec<(String, Signal)>> {
    Ok(vec![
        ("gaussian:1".into(), Signal::gaussian(dim, 1.0)?),
        ("gaussian:0.5".into(), Signal::gaussian(dim, 0.5)?),
        ("bandlimited:0.4".into(), Signal::bandlimited(dim, 0.4, seed)?),
        ("matern:1".into(), Signal::matern_base(dim, 1.0)?),
        ("matern:3".into(), Signal::matern_base(dim, 3.0)?),
        ("matern_like:1".into(), Signal::matern_like(dim, 1.0, w)?),
    ])
}

const MODULUS_SLACK: f64 = 0.05;

/// Subadditivity, boundedness and step scaling of the weighted modulus, plus `Ω ≤ ω`.
pub fn moduli_property_checks(cfg: &ExperimentConfig) -> Result<Vec<PropertyCheck>> {
    let w = cfg.weight()?;
    let m = cfg.dilation()?;
    let opts = modulus_options(cfg)?;
    let signals = modulus_test_signals(cfg.dim, &w, cfg.seed)?;
    let n = cfg.n;
    let p = cfg.p;
    let mut checks = Vec::new();
    let one = Complex64::new(1.0, 0.0);
    let ev = |f: &Signal, h: f64| modulus(Source::Signal(f), n, h, p, &w, &opts).map(|v| v.value);
    for &j in &cfg.j_list {
        let h = m.op_norm_inverse_power(j);
        let values = signals.iter().map(|(_, f)| ev(f, h)).collect::<Result<Vec<f64>>>()?;
        for i in 0..signals.len() {
            let k = (i + 1) % signals.len();
            let sum = Signal::combination(&[(one, &signals[i].1), (one, &signals[k].1)])?;
            let label = format!("{}+{} h={h}", signals[i].0, signals[k].0);
            checks.push(check("subadditivity", &label, ev(&sum, h)?, values[i] + values[k], MODULUS_SLACK));
        }
        // ‖f(·+t)‖ ≤ c_w 2^{α/2} ‖f‖ for |t| ≤ 1, applied n times
        let c = (1.0 + w.c_w() * 2f64.powf(0.5 * w.alpha())).powi(n as i32);
        for ((name, f), v) in signals.iter().zip(&values) {
            let norm = modulus(Source::Signal(f), 0, h, p, &w, &opts)?.value;
            checks.push(check("boundedness", &format!("{name} h={h}"), *v, c * norm, MODULUS_SLACK));
            for lam in [2u32, 3] {
                let big = ev(f, lam as f64 * h)?;
                // Δ_{mδ}^n is a combination of m^n translates of Δ_δ^n by at most n(m−1)|δ|
                let mut shift = vec![0.0; cfg.dim];
                shift[0] = n as f64 * (lam - 1) as f64 * h;
                let rhs = w.dominant(&shift) * (1.0 + lam as f64).powi(n as i32) * v;
                checks.push(check(&format!("scaling lambda={lam}"), &format!("{name} h={h}"), big, rhs, MODULUS_SLACK));
            }
            let (aniso, iso) = modulus_pair(Source::Signal(f), n, &m, j, p, &w, &opts)?;
            checks.push(check("anisotropic below isotropic", &format!("{name} j={j}"), aniso.value, iso.value, 0.0));
        }
    }
    Ok(checks)
}

pub fn run_moduli_props(cfg: &ExperimentConfig) -> Result<Outcome> {
    let checks = moduli_property_checks(cfg)?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    let mut out = Outcome::default();
    if failed > 0 {
        out.warnings.push(format!("{failed} modulus property checks failed"));
    }
    out.result = json!({ "checks": checks, "failed": failed, "slack": MODULUS_SLACK });
    Ok(out)
}

/// `|x|^{1/2}`-type constants on centred intervals `[−2^k, 2^k]`, graded towards the origin.
pub fn power_ap_constants(power: f64, p: f64, inner_cutoff: f64) -> Result<Vec<f64>> {
    let rects: Vec<Rect> = (0..=6).map(|k| Rect::centered(&[0.0], &[2f64.powi(k + 1)])).collect();
    let opts = ApOptions {
        grade_levels: Some(40),
        inner_cutoff,
        ..Default::default()
    };
    Ok(ap_rectangle_constant(&|x: &[f64]| x[0].abs().powf(power), p, &rects, &opts)?.per_rect)
}

/// Per-variable and rectangle `A_p` constants of `w^{-p}` in two dimensions.
#[derive(Debug, Clone, Serialize)]
pub struct PerVariableAp {
    pub rectangle_constant: f64,
    pub axis_constants: Vec<f64>,
    pub max_axis_constant: f64,
}

pub fn per_variable_ap(w: &Weight, p: f64) -> Result<PerVariableAp> {
    if w.dim() != 2 {
        return Err(invalid("per-variable A_p audit needs a two-dimensional weight"));
    }
    let w_pow = |x: &[f64]| w.eval(x).powf(-p);
    let opts = ApOptions::default();
    let rects = dyadic_rectangles(2, -2..=5, 8.0, 2);
    let full = ap_rectangle_constant(&w_pow, p, &rects, &opts)?.constant;
    let intervals = dyadic_rectangles(1, -2..=5, 8.0, 2);
    let frozen: Vec<Vec<f64>> = [-40.0, -8.0, 0.0, 3.0, 16.0, 64.0].iter().map(|&t| vec![0.0, t]).collect();
    let mut axis = ap_per_variable(&w_pow, p, 0, &frozen, &intervals, &opts)?;
    let frozen: Vec<Vec<f64>> = frozen.iter().map(|v| vec![v[1], 0.0]).collect();
    axis.extend(ap_per_variable(&w_pow, p, 1, &frozen, &intervals, &opts)?);
    Ok(PerVariableAp {
        rectangle_constant: full,
        max_axis_constant: axis.iter().cloned().fold(0.0, f64::max),
        axis_constants: axis,
    })
}

pub fn run_weights_audit(cfg: &ExperimentConfig) -> Result<Outcome> {
    let w = cfg.weight()?;
    let grid: Vec<Vec<f64>> = match cfg.dim {
        1 => (-40..=40).map(|i| vec![0.37 * i as f64]).collect(),
        2 => (-7..=7).flat_map(|i| (-7..=7).map(move |k| vec![0.9 * i as f64, 1.3 * k as f64])).collect(),
        _ => (-3..=3)
            .flat_map(|i| (-3..=3).flat_map(move |k| (-3..=3).map(move |l| vec![i as f64, 1.3 * k as f64, 0.7 * l as f64])))
            .collect(),
    };
    let membership = check_w_alpha_membership(&w, &grid, 1e-12);
    let dilation = check_dilation_stability(&w, &cfg.dilation()?, 6, &grid);
    let mut out = Outcome::default();
    if !membership.passes {
        out.warnings.push("weight fails the sampled W^α conditions".into());
    }
    let stable = power_ap_constants(0.5, 2.0, 0.0)?;
    let divergent = [1e-2, 1e-4, 1e-6]
        .iter()
        .map(|&eps| power_ap_constants(1.5, 2.0, eps).map(|v| v.into_iter().fold(0.0, f64::max)))
        .collect::<Result<Vec<f64>>>()?;
    let w2 = cfg.weight.build(2, 2.0 * cfg.grid_halfwidth)?;
    let per_var = match cfg.weight {
        WeightSpec::Unit | WeightSpec::Poly { .. } => Some(per_variable_ap(&w2, cfg.p)?),
        WeightSpec::BandLimited { .. } => {
            out.warnings.push("per-variable A_p audit skipped for convolved weights".into());
            None
        }
    };
    out.result = json!({
        "membership": membership,
        "dilation_constant": dilation,
        "ap_sqrt_abs_x": stable,
        "ap_three_halves_abs_x_by_cutoff": divergent,
        "per_variable": per_var,
    });
    Ok(out)
}

pub fn run_compat_audit(cfg: &ExperimentConfig) -> Result<Outcome> {
    let phi = cfg.kernel()?;
    let dual = cfg.dual()?;
    let delta = cfg.delta.unwrap_or(phi.flat_radius().max(1e-3));
    let report = audit(&phi, &dual, delta, &CompatOptions::default())?;
    Ok(Outcome {
        result: serde_json::to_value(&report)?,
        ..Default::default()
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.experiment {
        Experiment::Reconstruction => run_apply(cfg),
        Experiment::StrictRate | Experiment::WeakRate => run_rate(cfg),
        Experiment::SamplingTail => run_sampling_tail(cfg),
        Experiment::SamplingMixed => run_sampling_mixed(cfg),
        Experiment::Jackson => run_jackson(cfg),
        Experiment::ModuliProps => run_moduli_props(cfg),
        Experiment::WeightsAudit => run_weights_audit(cfg),
        Experiment::CompatAudit => run_compat_audit(cfg),
    }
}

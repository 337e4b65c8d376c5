//! Machine-checkable hypotheses of each experiment.

use serde::Serialize;

use super::config::{Experiment, ExperimentConfig, SignalSpec, WeightSpec};
use crate::compat::{check_strict, detect_weak_order};
use crate::kernels::{DualFunctional, Smoothness};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Assumed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Hypothesis {
    pub name: String,
    pub status: Status,
    /// The condition as stated for the result being exercised.
    pub citation: String,
    /// Numeric surrogate or measured quantity behind the verdict.
    pub value: Option<f64>,
}

fn hyp(name: &str, ok: bool, citation: &str, value: Option<f64>) -> Hypothesis {
    Hypothesis {
        name: name.into(),
        status: if ok { Status::Pass } else { Status::Fail },
        citation: citation.into(),
        value,
    }
}

fn assumed(name: &str, citation: &str, value: Option<f64>) -> Hypothesis {
    Hypothesis {
        name: name.into(),
        status: Status::Assumed,
        citation: citation.into(),
        value,
    }
}

/// `w^{-p} ∈ A_p`: for `(1+|x|²)^{α/2}` this is `pα < d`; other weights are assumed.
fn ap_hypothesis(cfg: &ExperimentConfig) -> Hypothesis {
    let d = cfg.dim as f64;
    let citation = "w^{-p} ∈ A_p";
    match cfg.weight {
        WeightSpec::Unit => hyp("w^-p in A_p", true, citation, Some(0.0)),
        WeightSpec::Poly { alpha } => hyp("w^-p in A_p", cfg.p * alpha < d, citation, Some(cfg.p * alpha)),
        WeightSpec::BandLimited { alpha, .. } => assumed(
            "w^-p in A_p",
            "w^{-p} ∈ A_p (inherited from the unconvolved weight when pα < d)",
            Some(cfg.p * alpha),
        ),
    }
}

fn alpha_unit_interval(cfg: &ExperimentConfig) -> Hypothesis {
    let a = cfg.weight.alpha();
    let ok = matches!(cfg.weight, WeightSpec::Unit) || (a > 0.0 && a < 1.0);
    hyp("alpha in (0,1)", ok, "w ∈ W^α for some α ∈ (0,1)", Some(a))
}

fn p_at_least_two(cfg: &ExperimentConfig) -> Hypothesis {
    hyp("p in [2,inf)", cfg.p >= 2.0 && cfg.p.is_finite(), "2 ≤ p < ∞", Some(cfg.p))
}

fn p_at_least_one(cfg: &ExperimentConfig) -> Hypothesis {
    hyp("p in [1,inf)", cfg.p >= 1.0 && cfg.p.is_finite(), "1 ≤ p < ∞", Some(cfg.p))
}

fn gamma_above(cfg: &ExperimentConfig) -> Hypothesis {
    let bound = cfg.dim as f64 / cfg.p;
    hyp("gamma > d/p", cfg.gamma > bound, "γ > d/p", Some(cfg.gamma))
}

fn decay_known(cfg: &ExperimentConfig) -> Hypothesis {
    match cfg.signal.decay() {
        Some(a) => hyp(
            "spectral decay of f/w",
            a > 0.0,
            "F(w^{-1}f)(ξ) = O(|ξ|^{-d-a}) with a > 0, F(w^{-1}f) ∈ L_q",
            Some(a),
        ),
        None => match cfg.signal {
            SignalSpec::Gaussian { .. } | SignalSpec::BandLimited { .. } | SignalSpec::Zero => assumed(
                "spectral decay of f/w",
                "F(w^{-1}f)(ξ) = O(|ξ|^{-d-a}) with a > 0 (faster than any power for this signal)",
                None,
            ),
            _ => hyp("spectral decay of f/w", false, "F(w^{-1}f)(ξ) = O(|ξ|^{-d-a})", None),
        },
    }
}

fn smooth_weight(cfg: &ExperimentConfig) -> Hypothesis {
    match cfg.weight {
        WeightSpec::Unit | WeightSpec::Poly { .. } => hyp(
            "w smooth with |D^b w| <= c w",
            true,
            "w ∈ C^∞ and |D^β w(x)| ≤ c_{w,β} w(x)",
            None,
        ),
        WeightSpec::BandLimited { .. } => assumed(
            "w smooth with |D^b w| <= c w",
            "w ∈ C^∞ and |D^β w(x)| ≤ c_{w,β} w(x) (convolution of an admissible weight)",
            None,
        ),
    }
}

fn support_in_cube(cfg: &ExperimentConfig, margin: f64) -> Hypothesis {
    let citation = if margin > 0.0 {
        "supp φ̂ ⊂ (−1+δ/2, 1−δ/2)^d"
    } else {
        "supp φ̂ ⊂ (−1, 1)^d"
    };
    match cfg.kernel() {
        Ok(k) => {
            let s = k.support_halfwidth();
            hyp("kernel spectrum support", s < 1.0 - margin, citation, Some(s))
        }
        Err(_) => hyp("kernel spectrum support", false, citation, None),
    }
}

fn delta_for(cfg: &ExperimentConfig) -> f64 {
    cfg.delta
        .or_else(|| cfg.kernel().ok().map(|k| k.flat_radius()))
        .unwrap_or(0.0)
}

fn strict_dirac(cfg: &ExperimentConfig, delta: f64) -> Hypothesis {
    let citation = "φ strictly compatible with the Dirac delta-function with respect to δ";
    let res = cfg
        .kernel()
        .and_then(|k| check_strict(&k, &DualFunctional::Dirac, delta, 33, 1e-12));
    match res {
        Ok(s) => hyp("strict compatibility with Dirac", s.pass, citation, Some(s.defect)),
        Err(_) => hyp("strict compatibility with Dirac", false, citation, None),
    }
}

fn weak_dirac(cfg: &ExperimentConfig) -> Hypothesis {
    let citation = "φ weakly compatible of order n with the Dirac delta-function";
    let res = cfg
        .kernel()
        .and_then(|k| detect_weak_order(&k, &DualFunctional::Dirac, cfg.n.max(6), 0.04, 1e-6));
    match res {
        Ok(w) => hyp(
            "weak compatibility of order n",
            w.order >= cfg.n,
            citation,
            Some(w.order as f64),
        ),
        Err(_) => hyp("weak compatibility of order n", false, citation, None),
    }
}

fn smooth_near_origin(cfg: &ExperimentConfig) -> Hypothesis {
    let citation = "φ̂ ∈ C^r(B_ε) for some integer r > n + d + pα";
    match cfg.kernel() {
        Ok(k) => {
            let need = cfg.n as f64 + cfg.dim as f64 + cfg.p * cfg.weight.alpha();
            let ok = match k.smoothness_class() {
                Smoothness::Infinite => true,
                Smoothness::Finite(r) => k.profile().smooth_radius() > 0.0 || r as f64 > need,
            };
            hyp("kernel spectrum smooth near 0", ok, citation, Some(need))
        }
        Err(_) => hyp("kernel spectrum smooth near 0", false, citation, None),
    }
}

/// All hypotheses of the experiment, each checked where a computation exists.
pub fn validate_hypotheses(cfg: &ExperimentConfig) -> Vec<Hypothesis> {
    let mut out = Vec::new();
    match cfg.experiment {
        Experiment::Reconstruction => {
            let delta = delta_for(cfg);
            let citation = "φ and φ̃ strictly compatible with respect to δ";
            let strict = cfg
                .kernel()
                .and_then(|k| cfg.dual().and_then(|d| check_strict(&k, &d, delta, 33, 1e-12)));
            out.push(match strict {
                Ok(s) => hyp("strict compatibility", s.pass, citation, Some(s.defect)),
                Err(_) => hyp("strict compatibility", false, citation, None),
            });
            let band = match cfg.signal {
                SignalSpec::BandLimited { radius, .. } => Some(radius),
                SignalSpec::Zero => Some(0.0),
                _ => None,
            };
            out.push(hyp(
                "signal band inside flat region",
                band.is_some_and(|r| r <= delta),
                "supp f̂ ⊂ B_δ, where θ ≡ 1",
                band,
            ));
        }
        Experiment::StrictRate | Experiment::WeakRate => {
            out.push(p_at_least_two(cfg));
            out.push(alpha_unit_interval(cfg));
            out.push(ap_hypothesis(cfg));
            out.push(smooth_weight(cfg));
            out.push(support_in_cube(cfg, 0.0));
            if cfg.experiment == Experiment::StrictRate {
                out.push(strict_dirac(cfg, delta_for(cfg)));
            } else {
                out.push(weak_dirac(cfg));
                out.push(smooth_near_origin(cfg));
            }
            out.push(decay_known(cfg));
        }
        Experiment::SamplingTail => {
            let delta = delta_for(cfg);
            out.push(p_at_least_two(cfg));
            out.push(alpha_unit_interval(cfg));
            out.push(ap_hypothesis(cfg));
            out.push(hyp("delta in (0,1/2)", delta > 0.0 && delta < 0.5, "δ ∈ (0, 1/2)", Some(delta)));
            let wr = match cfg.weight {
                WeightSpec::BandLimited { band, .. } => Some(band * (cfg.dim as f64).sqrt()),
                WeightSpec::Unit => Some(0.0),
                WeightSpec::Poly { .. } => None,
            };
            out.push(hyp(
                "weight band-limited",
                wr.is_some_and(|r| r <= 0.5 * delta),
                "supp ŵ ⊂ B_{δ/2}",
                wr,
            ));
            out.push(strict_dirac(cfg, delta));
            out.push(support_in_cube(cfg, 0.5 * delta));
            out.push(decay_known(cfg));
            out.push(gamma_above(cfg));
        }
        Experiment::SamplingMixed => {
            out.push(p_at_least_two(cfg));
            out.push(alpha_unit_interval(cfg));
            out.push(ap_hypothesis(cfg));
            out.push(smooth_weight(cfg));
            out.push(smooth_near_origin(cfg));
            out.push(weak_dirac(cfg));
            out.push(support_in_cube(cfg, 0.0));
            out.push(decay_known(cfg));
            out.push(gamma_above(cfg));
        }
        Experiment::Jackson | Experiment::ModuliProps => {
            out.push(p_at_least_one(cfg));
            let a = cfg.weight.alpha();
            out.push(hyp(
                "alpha > 0",
                matches!(cfg.weight, WeightSpec::Unit) || a > 0.0,
                "w ∈ W^α for some α > 0",
                Some(a),
            ));
            out.push(hyp("n >= 1", cfg.n >= 1, "n ∈ N", Some(cfg.n as f64)));
        }
        Experiment::WeightsAudit => {
            let a = cfg.weight.alpha();
            out.push(hyp(
                "alpha > 0",
                matches!(cfg.weight, WeightSpec::Unit) || a > 0.0,
                "w ∈ W^α for some α > 0",
                Some(a),
            ));
            out.push(p_at_least_one(cfg));
        }
        Experiment::CompatAudit => {
            out.push(hyp(
                "kernel and dual parse",
                cfg.kernel().is_ok() && cfg.dual().is_ok(),
                "φ ∈ B and φ̃ a tempered distribution",
                None,
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::RawConfig;

    fn cfg(lines: &str) -> ExperimentConfig {
        ExperimentConfig::resolve(&RawConfig::parse(lines).unwrap()).unwrap()
    }

    fn status(h: &[Hypothesis], name: &str) -> Status {
        h.iter().find(|x| x.name == name).unwrap().status
    }

    #[test]
    fn support_margin_arithmetic() {
        let h = validate_hypotheses(&cfg("experiment = sampling_tail\ndelta = 0.25"));
        assert_eq!(status(&h, "kernel spectrum support"), Status::Pass);
        assert_eq!(status(&h, "weight band-limited"), Status::Pass);
        assert_eq!(status(&h, "w^-p in A_p"), Status::Assumed);
        let h = validate_hypotheses(&cfg("experiment = sampling_tail\nkernel = flat_top:0.25:0.95\ndelta = 0.25"));
        assert_eq!(status(&h, "kernel spectrum support"), Status::Fail);
    }

    #[test]
    fn range_failures() {
        let h = validate_hypotheses(&cfg("experiment = sampling_tail\np = 1.5"));
        assert_eq!(status(&h, "p in [2,inf)"), Status::Fail);
        let h = validate_hypotheses(&cfg("experiment = weak_rate\nweight = poly:1.5"));
        assert_eq!(status(&h, "alpha in (0,1)"), Status::Fail);
        let h = validate_hypotheses(&cfg("experiment = sampling_tail\nweight = poly:0.25"));
        assert_eq!(status(&h, "weight band-limited"), Status::Fail);
        let h = validate_hypotheses(&cfg("experiment = sampling_tail\ngamma = 0.4"));
        assert_eq!(status(&h, "gamma > d/p"), Status::Fail);
    }

    #[test]
    fn compatibility_hypotheses() {
        let h = validate_hypotheses(&cfg("experiment = strict_rate"));
        assert!(h.iter().all(|x| x.status != Status::Fail), "{h:?}");
        let h = validate_hypotheses(&cfg("experiment = strict_rate\nkernel = weak:1:0.25:0.45"));
        assert_eq!(status(&h, "strict compatibility with Dirac"), Status::Fail);
        let h = validate_hypotheses(&cfg("experiment = weak_rate\nn = 3"));
        assert_eq!(status(&h, "weak compatibility of order n"), Status::Fail);
        let h = validate_hypotheses(&cfg("experiment = reconstruction\ndual = box"));
        assert_eq!(status(&h, "strict compatibility"), Status::Fail);
    }
}

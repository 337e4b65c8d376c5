//! Small quadrature helpers shared by the numerical modules.

use gauss_quad::legendre::GaussLegendre;

/// Gauss–Legendre nodes and weights mapped to `[a, b]`.
pub fn gauss_legendre(points: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(points.max(2)).expect("at least two nodes");
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels.
pub fn composite_gauss_legendre(points: usize, panels: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let base = gauss_legendre(points, 0.0, 1.0);
    let mut out = Vec::with_capacity(points * panels);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        out.extend(base.iter().map(|&(x, w)| (lo + width * x, width * w)));
    }
    out
}

/// Nodes of a rule on `[a, b]` graded geometrically towards the endpoint `a`.
///
/// Panels are `[a + (b-a) 2^{-l-1}, a + (b-a) 2^{-l}]` for `l = 0..levels`, plus the
/// innermost `[a, a + (b-a) 2^{-levels}]`.
pub fn graded_gauss_legendre(points: usize, levels: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let base = gauss_legendre(points, 0.0, 1.0);
    let mut out = Vec::with_capacity(points * (levels + 1));
    let span = b - a;
    let mut hi = 1.0;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        out.extend(
            base.iter()
                .map(|&(x, w)| (a + span * (lo + (hi - lo) * x), span * (hi - lo) * w)),
        );
        hi = lo;
    }
    out.extend(base.iter().map(|&(x, w)| (a + span * hi * x, span * hi * w)));
    out
}

/// Pairwise summation, used where reproducible reduction order matters.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre(4, 0.0, 2.0);
        let v: f64 = rule.iter().map(|&(x, w)| w * x.powi(7)).sum();
        assert!((v - 2f64.powi(8) / 8.0).abs() < 1e-10);
    }

    #[test]
    fn graded_rule_handles_endpoint_singularity() {
        let rule = graded_gauss_legendre(16, 40, 0.0, 1.0);
        let v: f64 = rule.iter().map(|&(x, w)| w / x.sqrt()).sum();
        assert!((v - 2.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(3, 0), 1.0);
        assert_eq!(binomial(2, 3), 0.0);
    }
}

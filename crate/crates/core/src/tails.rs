//! Tail approximations (normal, skewness-corrected, standardized Poisson), the Cramér
//! diagnostic, and the bound/range calculators.

use std::f64::consts::PI;

use serde::Serialize;

use crate::deps::StructuralParams;
use crate::error::{Error, Result};
use crate::special::{ln_normal_sf, ln_poisson_pmf, normal_sf, poisson_cdf, poisson_sf};

/// Largest Poisson mean `1/gamma^2` accepted by the standardized-Poisson routines.
pub const MAX_POISSON_MEAN: f64 = 1e15;

/// Distance (in units of the Poisson variable) within which a point counts as a lattice atom.
pub const LATTICE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailApproxKind {
    Normal,
    SkewCorrected { gamma: f64 },
    StandardizedPoisson { gamma: f64 },
}

impl TailApproxKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            TailApproxKind::StandardizedPoisson { gamma } if *gamma == 0.0 => Err(Error::Domain(
                "standardized Poisson requires gamma != 0 (use the normal tail)".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Approximation of `P(W > x)`.
    pub fn right_tail(&self, x: f64) -> Result<f64> {
        match *self {
            TailApproxKind::Normal => Ok(normal_tail(x)),
            TailApproxKind::SkewCorrected { gamma } => Ok(skew_corrected_tail(x, gamma)),
            TailApproxKind::StandardizedPoisson { gamma } => standardized_poisson_tail(x, gamma),
        }
    }
}

/// A tail value with its logarithm, for comparisons beyond the range of `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailValue {
    pub value: f64,
    pub ln_value: f64,
}

/// `1 - Phi(x)`.
pub fn normal_tail(x: f64) -> f64 {
    normal_sf(x)
}

pub fn normal_tail_value(x: f64) -> TailValue {
    TailValue {
        value: normal_sf(x),
        ln_value: ln_normal_sf(x),
    }
}

/// `(1 - Phi(x)) e^{gamma x^3 / 6}`. Not a probability; may exceed 1.
///
/// Identical to [`normal_tail`] when `gamma x^3 = 0`; switches to log space when the
/// normal tail underflows.
pub fn skew_corrected_tail(x: f64, gamma: f64) -> f64 {
    let exponent = gamma * x * x * x / 6.0;
    if exponent == 0.0 {
        return normal_tail(x);
    }
    let base = normal_sf(x);
    if base > f64::MIN_POSITIVE {
        let v = base * exponent.exp();
        if v.is_finite() {
            return v;
        }
    }
    (ln_normal_sf(x) + exponent).exp()
}

pub fn skew_corrected_tail_value(x: f64, gamma: f64) -> TailValue {
    TailValue {
        value: skew_corrected_tail(x, gamma),
        ln_value: ln_normal_sf(x) + gamma * x * x * x / 6.0,
    }
}

fn poisson_mean(gamma: f64) -> Result<f64> {
    if gamma == 0.0 || !gamma.is_finite() {
        return Err(Error::Domain(format!(
            "standardized Poisson needs finite gamma != 0, got {gamma}"
        )));
    }
    let lambda = 1.0 / (gamma * gamma);
    if !lambda.is_finite() || lambda > MAX_POISSON_MEAN {
        return Err(Error::Domain(format!(
            "Poisson mean 1/gamma^2 = {lambda} is too large to represent lattice points"
        )));
    }
    Ok(lambda)
}

fn snap(t: f64) -> f64 {
    let r = t.round();
    if (t - r).abs() <= LATTICE_TOL {
        r
    } else {
        t
    }
}

/// `P(Z_gamma > x)` with `Z_gamma = gamma (Y - 1/gamma^2)`, `Y ~ Poisson(1/gamma^2)`.
///
/// Strict inequality: an atom exactly at `x` is excluded. Thresholds within
/// [`LATTICE_TOL`] of an integer are treated as lattice points.
pub fn standardized_poisson_tail(x: f64, gamma: f64) -> Result<f64> {
    let lambda = poisson_mean(gamma)?;
    if x.is_nan() {
        return Err(Error::Domain("x is NaN".into()));
    }
    let t = snap(lambda + x / gamma);
    if gamma > 0.0 {
        // P(Y > t) = P(Y >= floor(t) + 1)
        if t < 0.0 {
            return Ok(1.0);
        }
        if t >= u64::MAX as f64 {
            return Ok(0.0);
        }
        Ok(poisson_sf(t.floor() as u64 + 1, lambda))
    } else {
        // P(Y < t) = P(Y <= ceil(t) - 1)
        if t <= 0.0 {
            return Ok(0.0);
        }
        if t >= u64::MAX as f64 {
            return Ok(1.0);
        }
        Ok(poisson_cdf(t.ceil() as u64 - 1, lambda))
    }
}

/// `P(Z_gamma > x) / ((1 - Phi(x)) e^{gamma x^3/6}) - 1` for `0 <= x <= |gamma|^{-1/2}`.
pub fn cramer_diagnostic(x: f64, gamma: f64) -> Result<f64> {
    if gamma == 0.0 || gamma.abs() > 1.0 || !gamma.is_finite() {
        return Err(Error::Range(format!("need 0 < |gamma| <= 1, got {gamma}")));
    }
    let x_max = gamma.abs().powf(-0.5);
    if !(0.0..=x_max).contains(&x) {
        return Err(Error::Range(format!("x = {x} outside [0, {x_max}]")));
    }
    let p = standardized_poisson_tail(x, gamma)?;
    Ok(p / skew_corrected_tail(x, gamma) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointApprox {
    pub w0: f64,
    /// `P(Z_gamma = w0)`.
    pub exact: f64,
    /// `|gamma| / sqrt(2 pi) exp(-w0^2/2 + gamma w0^3/6)`.
    pub approx: f64,
}

/// Exact standardized-Poisson pmf at a lattice point next to its local Gaussian form.
pub fn poisson_point_approx(w0: f64, gamma: f64) -> Result<PointApprox> {
    let lambda = poisson_mean(gamma)?;
    let y = w0 / gamma + lambda;
    let k = y.round();
    if !y.is_finite() || (y - k).abs() > LATTICE_TOL {
        return Err(Error::Domain(format!(
            "w0 = {w0} is not on the lattice gamma*Z - 1/gamma (offset {})",
            y - k
        )));
    }
    let exact = if k < 0.0 { 0.0 } else { ln_poisson_pmf(k as u64, lambda).exp() };
    let approx = gamma.abs() / (2.0 * PI).sqrt() * (-0.5 * w0 * w0 + gamma * w0 * w0 * w0 / 6.0).exp();
    Ok(PointApprox { w0, exact, approx })
}

/// Constants entering the bound; never derived, always supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    pub provenance: &'static str,
}

impl BoundConstants {
    pub fn new(c: f64, c0: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite() && c0 > 0.0 && c0.is_finite()) {
            return Err(Error::Domain(format!("constants C = {c}, C0 = {c0} must be positive")));
        }
        Ok(BoundConstants {
            c,
            c0,
            provenance: "user-supplied, not derived",
        })
    }
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants::new(1.0, 1.0).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub x: f64,
    /// `C m n s^4 d^4 delta^5 (1 + x^2)`.
    pub bound_value: f64,
    /// `C0 (m n s^4 d^4 delta^5)^{-1/2}`.
    pub x_max: f64,
    pub in_range: bool,
    pub constants_used: BoundConstants,
    pub parameters: StructuralParams,
}

/// Relative-error bound and range endpoint for the skewness-corrected tail.
pub fn theorem1_bound(params: StructuralParams, x: f64, constants: BoundConstants) -> Result<BoundReport> {
    let StructuralParams { n, m, s, d, delta } = params;
    for (name, v) in [("n", n), ("m", m), ("s", s), ("d", d), ("delta", delta)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("parameter {name} = {v} must be positive")));
        }
    }
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::Range(format!("x = {x} must be finite and non-negative")));
    }
    let rate = params.bound_rate();
    let bound_value = constants.c * rate * (1.0 + x * x);
    let x_max = constants.c0 / rate.sqrt();
    Ok(BoundReport {
        x,
        bound_value,
        x_max,
        in_range: x <= x_max,
        constants_used: constants,
        parameters: params,
    })
}

/// `(n, n, 1, 1, c1/sqrt(n))` for a standardized i.i.d. sum with `|X| <= c1`.
pub fn iid_params(n: usize, c1: f64) -> StructuralParams {
    let nf = n as f64;
    StructuralParams::new(nf, nf, 1.0, 1.0, c1 / nf.sqrt())
}

/// `(n, n, k, k, 1/sigma)` for circular k-runs.
pub fn kruns_params(n: usize, k: usize, sigma: f64) -> StructuralParams {
    let nf = n as f64;
    StructuralParams::new(nf, nf, k as f64, k as f64, 1.0 / sigma)
}

/// `C0 (sigma^5 / (n^2 k^8))^{1/2}`.
pub fn kruns_x_max(n: usize, k: usize, sigma: f64, c0: f64) -> f64 {
    c0 * (sigma.powi(5) / ((n as f64).powi(2) * (k as f64).powi(8))).sqrt()
}

/// Binomial coefficient as `f64`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(C(m,s), m, s, C(m-1,s-1), c1/sigma)` for a U-statistic; `d` is the exact number of
/// s-subsets containing a fixed index, which is at most `m^{s-1}`.
pub fn ustat_params(m: usize, s: usize, c1: f64, sigma: f64) -> StructuralParams {
    StructuralParams::new(
        binomial(m, s),
        m as f64,
        s as f64,
        binomial(m - 1, s - 1),
        c1 / sigma,
    )
}

/// Largest pattern (in vertices) accepted by the subgraph calculators.
pub const MAX_PATTERN_VERTICES: usize = 8;

/// Simple graph pattern with vertices `0..v`, every vertex covered by an edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Pattern {
    edges: Vec<(usize, usize)>,
    v: usize,
}

impl Pattern {
    /// Builds a pattern from an edge list, relabelling vertices in order of first use.
    pub fn from_edges(edges: &[(usize, usize)]) -> Result<Pattern> {
        if edges.is_empty() {
            return Err(Error::InvalidModel("pattern has no edges".into()));
        }
        let mut labels: Vec<usize> = Vec::new();
        let relabel = |u: usize, labels: &mut Vec<usize>| match labels.iter().position(|&l| l == u) {
            Some(i) => i,
            None => {
                labels.push(u);
                labels.len() - 1
            }
        };
        let mut out = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b {
                return Err(Error::InvalidModel(format!("pattern has a loop at {a}")));
            }
            let (a, b) = (relabel(a, &mut labels), relabel(b, &mut labels));
            let e = (a.min(b), a.max(b));
            if out.contains(&e) {
                return Err(Error::InvalidModel(format!("pattern repeats edge {e:?}")));
            }
            out.push(e);
        }
        Ok(Pattern { edges: out, v: labels.len() })
    }

    pub fn edge() -> Pattern {
        Pattern::from_edges(&[(0, 1)]).unwrap()
    }

    pub fn triangle() -> Pattern {
        Pattern::from_edges(&[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    /// Path with `len` edges.
    pub fn path(len: usize) -> Result<Pattern> {
        if len == 0 {
            return Err(Error::InvalidModel("path needs at least one edge".into()));
        }
        let edges: Vec<_> = (0..len).map(|i| (i, i + 1)).collect();
        Pattern::from_edges(&edges)
    }

    /// Parses `u v` pairs, one per line, 0-indexed; blank lines and `#` comments skipped.
    pub fn parse_edge_list(text: &str) -> Result<Pattern> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let mut next = || -> Result<usize> {
                parts
                    .next()
                    .ok_or_else(|| Error::Parse(format!("line {}: expected 'u v'", lineno + 1)))?
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            let (u, v) = (next()?, next()?);
            if parts.next().is_some() {
                return Err(Error::Parse(format!("line {}: expected exactly two vertices", lineno + 1)));
            }
            edges.push((u, v));
        }
        Pattern::from_edges(&edges)
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn e(&self) -> usize {
        self.edges.len()
    }

    fn check_size(&self) -> Result<()> {
        if self.v > MAX_PATTERN_VERTICES {
            return Err(Error::UnsupportedSize(format!(
                "pattern has {} vertices (limit {MAX_PATTERN_VERTICES})",
                self.v
            )));
        }
        Ok(())
    }
}

fn check_graph_args(n_vertices: f64, p: f64) -> Result<()> {
    if !(n_vertices > 0.0 && n_vertices.is_finite()) {
        return Err(Error::Domain(format!("N = {n_vertices} must be positive")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("p = {p} must lie in (0,1)")));
    }
    Ok(())
}

/// `ln psi`, where `psi = min over subgraphs H of G with e(H) > 0 of N^{v(H)} p^{e(H)}`.
///
/// For a fixed vertex set the minimum is attained by keeping every induced edge, so
/// the search runs over vertex subsets of `G`.
pub fn ln_subgraph_psi(n_vertices: f64, p: f64, pattern: &Pattern) -> Result<f64> {
    check_graph_args(n_vertices, p)?;
    pattern.check_size()?;
    let (ln_n, ln_p) = (n_vertices.ln(), p.ln());
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << pattern.v()) {
        let e = pattern
            .edges()
            .iter()
            .filter(|&&(a, b)| mask >> a & 1 == 1 && mask >> b & 1 == 1)
            .count();
        if e == 0 {
            continue;
        }
        let val = mask.count_ones() as f64 * ln_n + e as f64 * ln_p;
        best = best.min(val);
    }
    Ok(best)
}

pub fn subgraph_psi(n_vertices: f64, p: f64, pattern: &Pattern) -> Result<f64> {
    Ok(ln_subgraph_psi(n_vertices, p, pattern)?.exp())
}

/// `C0 [N^6 (1-p)^{5/2} p^{5e} / psi^{5/2}]^{1/2}`.
pub fn subgraph_range(n_vertices: f64, p: f64, pattern: &Pattern, c0: f64) -> Result<f64> {
    let ln_psi = ln_subgraph_psi(n_vertices, p, pattern)?;
    if !(c0 > 0.0) {
        return Err(Error::Domain(format!("C0 = {c0} must be positive")));
    }
    let ln_inner = 6.0 * n_vertices.ln() + 2.5 * (1.0 - p).ln() + 5.0 * pattern.e() as f64 * p.ln()
        - 2.5 * ln_psi;
    Ok(c0 * (0.5 * ln_inner).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgraphBoundReport {
    pub x: f64,
    pub psi: f64,
    /// `C psi^{5/2} / ((1-p)^{5/2} p^{5e} N^6) (1 + x^2)`.
    pub bound_value: f64,
    pub x_max: f64,
    pub in_range: bool,
    pub constants_used: BoundConstants,
}

/// Subgraph-count bound and range; `C` plays the role of the pattern-dependent constant.
pub fn subgraph_bound(
    n_vertices: f64,
    p: f64,
    pattern: &Pattern,
    x: f64,
    constants: BoundConstants,
) -> Result<SubgraphBoundReport> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::Range(format!("x = {x} must be finite and non-negative")));
    }
    let ln_psi = ln_subgraph_psi(n_vertices, p, pattern)?;
    let x_max = subgraph_range(n_vertices, p, pattern, constants.c0)?;
    let ln_rate = 2.5 * ln_psi - 2.5 * (1.0 - p).ln() - 5.0 * pattern.e() as f64 * p.ln() - 6.0 * n_vertices.ln();
    Ok(SubgraphBoundReport {
        x,
        psi: ln_psi.exp(),
        bound_value: constants.c * ln_rate.exp() * (1.0 + x * x),
        x_max,
        in_range: x <= x_max,
        constants_used: constants,
    })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    #[test]
    fn normal_tail_basics() {
        assert_eq!(normal_tail(0.0), 0.5);
        for x in [0.3, 1.0, 2.2, 4.0] {
            assert!((normal_tail(-x) - (1.0 - normal_tail(x))).abs() < 1e-15);
        }
    }

    #[test]
    fn skew_reductions() {
        for x in [0.0, 0.7, 2.0, 5.0, 40.0] {
            assert_eq!(skew_corrected_tail(x, 0.0).to_bits(), normal_tail(x).to_bits());
        }
        for g in [-0.5, 0.1, 3.0] {
            assert_eq!(skew_corrected_tail(0.0, g), 0.5);
        }
        // mpmath: erfc(2/sqrt 2)/2 * exp(0.138*8/6)
        let want = 0.027346018579240094052;
        assert!((skew_corrected_tail(2.0, 0.138) / want - 1.0).abs() < 1e-13);
        // deep tail stays finite through log space
        let v = skew_corrected_tail_value(45.0, 0.01);
        assert!(v.ln_value.is_finite());
        assert!((v.ln_value - (ln_normal_sf(45.0) + 0.01 * 45.0f64.powi(3) / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn standardized_poisson_small_cases() {
        let e1 = (-1.0f64).exp();
        assert!((standardized_poisson_tail(0.0, 1.0).unwrap() - (1.0 - 2.0 * e1)).abs() < 1e-12);
        assert!((standardized_poisson_tail(-1.0 + 1e-12, 1.0).unwrap() - (1.0 - e1)).abs() < 1e-12);
        assert!((standardized_poisson_tail(-1.0 - 1e-6, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((standardized_poisson_tail(0.0, -1.0).unwrap() - e1).abs() < 1e-12);
        assert!(standardized_poisson_tail(0.0, 0.0).is_err());
        assert!(standardized_poisson_tail(0.0, 1e-9).is_err());
    }

    #[test]
    fn strict_exclusion_at_atoms() {
        // gamma = 0.5: lambda = 4, atoms at 0.5 (k - 4)
        let at = standardized_poisson_tail(0.5, 0.5).unwrap();
        let just_below = standardized_poisson_tail(0.5 - 1e-6, 0.5).unwrap();
        assert!(just_below > at);
        assert!((at - poisson_sf(6, 4.0)).abs() < 1e-15);
    }

    #[test]
    fn cramer_diagnostic_ranges() {
        assert!(cramer_diagnostic(0.0, 0.01).unwrap().abs() <= 0.05);
        assert!(cramer_diagnostic(11.0, 0.01).is_err());
        assert!(cramer_diagnostic(-0.1, 0.01).is_err());
        assert!(cramer_diagnostic(0.5, 0.0).is_err());
        assert!(cramer_diagnostic(0.5, 1.5).is_err());
        assert!(cramer_diagnostic(2.0, 0.138).unwrap().is_finite());
        let mags: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|&g| cramer_diagnostic(1.0, g).unwrap().abs()).collect();
        assert!(mags[0] > mags[1] && mags[1] > mags[2]);
    }

    #[test]
    fn point_approximation() {
        let e1 = (-1.0f64).exp();
        let r = poisson_point_approx(-1.0, 1.0).unwrap();
        assert!((r.exact - e1).abs() < 1e-15);
        let r = poisson_point_approx(0.0, 0.5).unwrap();
        let want = 4.0f64.powi(4) * (-4.0f64).exp() / 24.0;
        assert!((r.exact - want).abs() < 1e-15);
        let r = poisson_point_approx(0.0, 0.1).unwrap();
        let ratio = r.exact / r.approx;
        assert!(ratio > (-1.0f64).exp() && ratio < 1.0f64.exp());
        assert!(poisson_point_approx(0.05, 0.1).is_err());
    }

    #[test]
    fn theorem1_ranges() {
        let c = BoundConstants::default();
        for n in [16usize, 81, 10_000] {
            let r = theorem1_bound(iid_params(n, 1.0), 0.0, c).unwrap();
            assert!((r.x_max - (n as f64).powf(0.25)).abs() < 1e-12 * r.x_max);
            assert_eq!(r.bound_value, r.parameters.bound_rate());
        }
        let sigma = 11.0;
        let r = theorem1_bound(kruns_params(1500, 2, sigma), 1.0, BoundConstants::new(1.0, 2.0).unwrap()).unwrap();
        assert!((r.x_max / kruns_x_max(1500, 2, sigma, 2.0) - 1.0).abs() < 1e-12);
        assert!(theorem1_bound(StructuralParams::new(0.0, 1.0, 1.0, 1.0, 1.0), 0.0, c).is_err());
        assert!(BoundConstants::new(0.0, 1.0).is_err());
    }

    #[test]
    fn psi_for_small_patterns() {
        let tri = Pattern::triangle();
        for (n, p) in [(10.0, 0.5), (100.0, 0.01), (3.0, 0.9)] {
            let want = f64::min(n * n * p, f64::min(n.powi(3) * p * p, n.powi(3) * p.powi(3)));
            let got = subgraph_psi(n, p, &tri).unwrap();
            assert!((got / want - 1.0).abs() < 1e-12);
        }
        let got = subgraph_psi(50.0, 0.3, &Pattern::edge()).unwrap();
        assert!((got / (2500.0 * 0.3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pattern_parsing() {
        let p = Pattern::parse_edge_list("# square\n0 1\n1 2\n\n2 3\n3 0\n").unwrap();
        assert_eq!((p.v(), p.e()), (4, 4));
        assert!(Pattern::parse_edge_list("0 0\n").is_err());
        assert!(Pattern::parse_edge_list("0 1 2\n").is_err());
        assert!(Pattern::parse_edge_list("0 x\n").is_err());
        let big = Pattern::path(8).unwrap();
        assert!(matches!(subgraph_psi(10.0, 0.5, &big), Err(Error::UnsupportedSize(_))));
    }
}

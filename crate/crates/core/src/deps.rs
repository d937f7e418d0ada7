//! Dependency neighbourhoods of a sum of local statistics.
//!
//! `A_i` holds every summand sharing a base variable with `xi_i`; `A_ij` and `A_ijk`
//! extend this to pairs and triples. All sets are sorted `usize` vectors combined by merge.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DeltaSource, LocalStatisticModel};

/// Sorted union of two sorted, duplicate-free slices.
pub fn merge_union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// True when two sorted slices share an element.
pub fn intersects(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Membership test in a sorted slice.
pub fn contains(set: &[usize], x: usize) -> bool {
    set.binary_search(&x).is_ok()
}

#[derive(Debug, Clone)]
pub struct DependencyStructure {
    n_alpha: Vec<Vec<usize>>,
    a: Vec<Vec<usize>>,
    pub s: usize,
    pub d: usize,
    pub delta: f64,
    pub delta_source: DeltaSource,
}

impl DependencyStructure {
    /// `N_alpha = { i : alpha in I_i }`.
    pub fn n_alpha(&self, alpha: usize) -> &[usize] {
        &self.n_alpha[alpha]
    }

    /// `A_i = { j : I_j meets I_i }`.
    pub fn a_i(&self, i: usize) -> &[usize] {
        &self.a[i]
    }

    /// `A_ij = { k : I_k meets I_i ∪ I_j }`, which equals `A_i ∪ A_j`.
    pub fn a_ij(&self, i: usize, j: usize) -> Vec<usize> {
        merge_union(&self.a[i], &self.a[j])
    }

    /// `A_ijk = A_i ∪ A_j ∪ A_k`.
    pub fn a_ijk(&self, i: usize, j: usize, k: usize) -> Vec<usize> {
        merge_union(&self.a_ij(i, j), &self.a[k])
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn m(&self) -> usize {
        self.n_alpha.len()
    }

    /// Largest `|A_i|`.
    pub fn max_neighbourhood(&self) -> usize {
        self.a.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Computes `N_alpha` and `A_i` by index-set intersection, together with `s`, `d`, `delta`.
pub fn build_dependency(model: &LocalStatisticModel) -> Result<DependencyStructure> {
    let mut n_alpha = vec![Vec::new(); model.m()];
    for (i, set) in model.index_sets().iter().enumerate() {
        if set.is_empty() {
            return Err(Error::InvalidModel(format!("index set {i} is empty")));
        }
        for &alpha in set {
            n_alpha[alpha].push(i);
        }
    }
    let a = model
        .index_sets()
        .iter()
        .map(|set| {
            set.iter()
                .fold(Vec::new(), |acc, &alpha| merge_union(&acc, &n_alpha[alpha]))
        })
        .collect();
    let s = model.index_sets().iter().map(Vec::len).max().unwrap_or(0);
    let d = n_alpha.iter().map(Vec::len).max().unwrap_or(0);
    let (delta, delta_source) = model.delta();
    Ok(DependencyStructure {
        n_alpha,
        a,
        s,
        d,
        delta,
        delta_source,
    })
}

/// The five structural parameters entering the moderate-deviation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructuralParams {
    pub n: f64,
    pub m: f64,
    pub s: f64,
    pub d: f64,
    pub delta: f64,
}

impl StructuralParams {
    pub fn new(n: f64, m: f64, s: f64, d: f64, delta: f64) -> Self {
        StructuralParams { n, m, s, d, delta }
    }

    /// `m n s^4 d^4 delta^5`.
    pub fn bound_rate(&self) -> f64 {
        self.m * self.n * self.s.powi(4) * self.d.powi(4) * self.delta.powi(5)
    }

    /// `n s d delta^2`, at least 1 when `Var(W) = 1`.
    pub fn variance_ceiling(&self) -> f64 {
        self.n * self.s * self.d * self.delta * self.delta
    }

    /// `4 n s^2 d^2 delta^3`, an upper bound on `|E W^3|` when `Var(W) = 1`.
    pub fn skewness_ceiling(&self) -> f64 {
        4.0 * self.n * self.s * self.s * self.d * self.d * self.delta.powi(3)
    }

    /// `n s^2 d^2 delta^3`: the MGF bound holds for `t <= C0 * rate^{-1/2}`.
    pub fn mgf_rate(&self) -> f64 {
        self.n * self.s * self.s * self.d * self.d * self.delta.powi(3)
    }
}

/// `(n, m, s, d, delta)` for a model; `delta` is the asserted bound or the computed supremum.
pub fn structural_params(model: &LocalStatisticModel) -> Result<StructuralParams> {
    let deps = build_dependency(model)?;
    if !(deps.delta.is_finite() && deps.delta >= 0.0) {
        return Err(Error::MissingDelta(
            "sup |xi_i| is neither asserted nor computable".into(),
        ));
    }
    Ok(StructuralParams::new(
        model.n() as f64,
        model.m() as f64,
        deps.s as f64,
        deps.d as f64,
        deps.delta,
    ))
}

//! Variance and third moment of `W`: exact neighbourhood enumeration, closed forms for
//! circular 2-runs, and Monte Carlo estimates.

use std::collections::HashMap;

use serde::Serialize;

use crate::deps::{contains, merge_union, DependencyStructure};
use crate::error::{Error, Result};
use crate::mc::{self, Sampler};
use crate::model::LocalStatisticModel;
use crate::sum::CompensatedSum;

/// Largest joint support enumerated for a single pair or triple union.
pub const UNION_ENUM_LIMIT: u64 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentMethod {
    ExactEnumeration,
    Analytic,
    MonteCarlo,
}

impl MomentMethod {
    pub fn label(&self) -> &'static str {
        match self {
            MomentMethod::ExactEnumeration => "exact-enumeration",
            MomentMethod::Analytic => "analytic",
            MomentMethod::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSummary {
    /// Variance of the sum before normalization, when the model carries a scale.
    pub sigma2: f64,
    /// `Var(W)` of the model as given.
    pub var_w: f64,
    /// `E W^3`.
    pub gamma: f64,
    pub method: MomentMethod,
    /// `(se of var_w, se of gamma)`; absent for exact and analytic results.
    pub std_errors: Option<(f64, f64)>,
}

/// Groups of `(i, j, k)` terms sharing one union of index sets, so each union is
/// enumerated once per pass.
struct TermGroups {
    lookup: HashMap<Vec<usize>, usize>,
    groups: Vec<(Vec<usize>, Vec<Term>)>,
}

#[derive(Clone, Copy)]
struct Term {
    ids: [usize; 3],
    arity: u8,
    /// Weight in the first sum and in the second sum.
    w1: f64,
    w2: f64,
}

impl TermGroups {
    fn new() -> Self {
        TermGroups {
            lookup: HashMap::new(),
            groups: Vec::new(),
        }
    }

    fn push(&mut self, union: Vec<usize>, term: Term) {
        let idx = match self.lookup.get(&union) {
            Some(&g) => g,
            None => {
                self.groups.push((union.clone(), Vec::new()));
                self.lookup.insert(union, self.groups.len() - 1);
                self.groups.len() - 1
            }
        };
        self.groups[idx].1.push(term);
    }

    fn check_size(&self, model: &LocalStatisticModel) -> Result<()> {
        for (union, _) in &self.groups {
            let size = model.joint_support_size(union);
            if size > UNION_ENUM_LIMIT {
                return Err(Error::UnsupportedSize(format!(
                    "joint support of {} base variables has {size} points (limit {UNION_ENUM_LIMIT})",
                    union.len()
                )));
            }
        }
        Ok(())
    }

    /// Returns `(sum_terms w1 * E[prod], sum_terms w2 * E[prod])`.
    fn evaluate(&self, model: &LocalStatisticModel) -> (f64, f64) {
        let mut config = vec![0u32; model.m()];
        let mut total1 = CompensatedSum::new();
        let mut total2 = CompensatedSum::new();
        let mut expectations: Vec<CompensatedSum> = Vec::new();
        for (union, terms) in &self.groups {
            expectations.clear();
            expectations.resize(terms.len(), CompensatedSum::new());
            model.for_each_assignment(union, &mut config, |cfg, prob| {
                for (acc, t) in expectations.iter_mut().zip(terms) {
                    let mut v = model.summand_value(t.ids[0], cfg);
                    for &id in &t.ids[1..t.arity as usize] {
                        v *= model.summand_value(id, cfg);
                    }
                    acc.add(prob * v);
                }
            });
            for (acc, t) in expectations.iter().zip(terms) {
                let e = acc.value();
                if t.w1 != 0.0 {
                    total1.add(t.w1 * e);
                }
                if t.w2 != 0.0 {
                    total2.add(t.w2 * e);
                }
            }
        }
        (total1.value(), total2.value())
    }
}

fn union_of(model: &LocalStatisticModel, ids: &[usize]) -> Vec<usize> {
    ids.iter()
        .fold(Vec::new(), |acc, &i| merge_union(&acc, model.index_set(i)))
}

/// Work estimate for the exact third-moment pass: `sum over triples of joint support size`.
pub fn exact_gamma_cost(model: &LocalStatisticModel, deps: &DependencyStructure) -> u64 {
    let mut cost = 0u64;
    for i in 0..model.n() {
        for &j in deps.a_i(i) {
            for k in deps.a_ij(i, j) {
                let u = union_of(model, &[i, j, k]);
                cost = cost.saturating_add(model.joint_support_size(&u));
            }
        }
    }
    cost
}

/// `Var(W) = sum_i sum_{j in A_i} E xi_i xi_j`, each expectation by enumerating the
/// joint support of `I_i ∪ I_j`.
pub fn variance_exact(model: &LocalStatisticModel, deps: &DependencyStructure) -> Result<f64> {
    let mut groups = TermGroups::new();
    for i in 0..model.n() {
        for &j in deps.a_i(i) {
            let union = merge_union(model.index_set(i), model.index_set(j));
            groups.push(
                union,
                Term {
                    ids: [i, j, 0],
                    arity: 2,
                    w1: 1.0,
                    w2: 0.0,
                },
            );
        }
    }
    groups.check_size(model)?;
    Ok(groups.evaluate(model).0)
}

/// `E W^3` through the local decomposition
///
/// `E W^3 = 2 sum_i sum_{j in A_i} sum_{k in A_ij} E xi_i xi_j xi_k
///          - sum_i sum_{j in A_i} sum_{k in A_i} E xi_i xi_j xi_k`,
///
/// where the second sum is `sum_i E xi_i (xi_{A_i})^2`. Only neighbourhood triples are
/// visited, never all `n^3`.
pub fn gamma_exact(model: &LocalStatisticModel, deps: &DependencyStructure) -> Result<f64> {
    let mut groups = TermGroups::new();
    for i in 0..model.n() {
        let a_i = deps.a_i(i);
        for &j in a_i {
            let ij = merge_union(model.index_set(i), model.index_set(j));
            for k in deps.a_ij(i, j) {
                let union = merge_union(&ij, model.index_set(k));
                let in_a_i = contains(a_i, k);
                groups.push(
                    union,
                    Term {
                        ids: [i, j, k],
                        arity: 3,
                        w1: 1.0,
                        w2: if in_a_i { 1.0 } else { 0.0 },
                    },
                );
            }
        }
    }
    groups.check_size(model)?;
    let (first, second) = groups.evaluate(model);
    Ok(2.0 * first - second)
}

/// Exact variance and third moment of the model as given.
pub fn moments_exact(model: &LocalStatisticModel, deps: &DependencyStructure) -> Result<MomentSummary> {
    let var_w = variance_exact(model, deps)?;
    let gamma = gamma_exact(model, deps)?;
    Ok(MomentSummary {
        sigma2: var_w * model.scale() * model.scale(),
        var_w,
        gamma,
        method: MomentMethod::ExactEnumeration,
        std_errors: None,
    })
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("p = {p} must lie in (0,1)")))
    }
}

/// `sigma^2 = n (p^2 + 2p^3 - 3p^4)` for the raw circular 2-run count.
pub fn kruns_sigma2_analytic(n: usize, p: f64) -> Result<f64> {
    check_probability(p)?;
    if n <= 2 {
        return Err(Error::Domain(format!("n = {n} must exceed 2")));
    }
    let p2 = p * p;
    Ok(n as f64 * (p2 + 2.0 * p2 * p - 3.0 * p2 * p2))
}

/// `gamma = (n / sigma^3)(p^2 + 6p^3 - 3p^4 - 24p^5 + 20p^6)` for normalized circular 2-runs.
///
/// The closed form needs `n >= 4`; for `n = 3` wrap-around triples coincide.
pub fn kruns_gamma_analytic(n: usize, p: f64) -> Result<f64> {
    check_probability(p)?;
    if n < 4 {
        return Err(Error::Domain(format!(
            "closed-form 2-run skewness requires n >= 4, got {n}"
        )));
    }
    let sigma = kruns_sigma2_analytic(n, p)?.sqrt();
    let poly = p * p * (1.0 + p * (6.0 + p * (-3.0 + p * (-24.0 + 20.0 * p))));
    Ok(n as f64 / sigma.powi(3) * poly)
}

/// Plug-in Monte Carlo moments. `E W = 0` holds by construction, so `Var(W)` and `E W^3`
/// are estimated by the second and third raw sample moments; their standard errors use
/// the fourth and sixth.
pub fn moments_mc<S: Sampler>(sampler: &S, reps: u64, seed: u64, lanes: usize) -> Result<MomentSummary> {
    if reps < 1000 {
        return Err(Error::Domain(format!("moments_mc needs at least 1000 reps, got {reps}")));
    }
    let partials = mc::run_lanes(
        sampler,
        seed,
        reps,
        lanes,
        || [CompensatedSum::new(); 4],
        |acc, w, _| {
            let w2 = w * w;
            acc[0].add(w2);
            acc[1].add(w2 * w);
            acc[2].add(w2 * w2);
            acc[3].add(w2 * w2 * w2);
        },
    );
    let mut tot = [CompensatedSum::new(); 4];
    for lane in &partials {
        for (t, a) in tot.iter_mut().zip(lane) {
            t.add(a.value());
        }
    }
    let r = reps as f64;
    let m2 = tot[0].value() / r;
    let m3 = tot[1].value() / r;
    let m4 = tot[2].value() / r;
    let m6 = tot[3].value() / r;
    let se_var = ((m4 - m2 * m2).max(0.0) / r).sqrt();
    let se_gamma = ((m6 - m3 * m3).max(0.0) / r).sqrt();
    Ok(MomentSummary {
        sigma2: m2,
        var_w: m2,
        gamma: m3,
        method: MomentMethod::MonteCarlo,
        std_errors: Some((se_var, se_gamma)),
    })
}

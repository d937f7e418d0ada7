use serde::Serialize;

use crate::deps::build_dependency;
use crate::error::{Error, Result};
use crate::mc::{RngStream, Sampler};
use crate::model::{unit_to_u64, BaseVariable, LocalStatisticModel, Summand};
use crate::moments::{kruns_sigma2_analytic, moments_mc, variance_exact};
use rand::RngCore;

/// Circular k-runs: `xi_i = (X_i X_{i+1} ... X_{i+k-1} - p^k) / sigma`, indices mod `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KRunsSpec {
    pub n: usize,
    pub k: usize,
    pub p: f64,
}

impl KRunsSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 1 && self.k < self.n) {
            return Err(Error::InvalidModel(format!(
                "k-runs need 1 < k < n, got n = {}, k = {}",
                self.n, self.k
            )));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidModel(format!("p = {} must lie in (0,1)", self.p)));
        }
        Ok(())
    }

    pub fn index_sets(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|i| (0..self.k).map(|t| (i + t) % self.n).collect())
            .collect()
    }
}

/// How `sigma` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum SigmaSource {
    Analytic,
    ExactEnumeration,
    /// Monte Carlo estimate of `sigma^2` with its standard error.
    Estimated { se_sigma2: f64 },
}

impl SigmaSource {
    pub fn label(&self) -> &'static str {
        match self {
            SigmaSource::Analytic => "analytic",
            SigmaSource::ExactEnumeration => "exact-enumeration",
            SigmaSource::Estimated { .. } => "estimated",
        }
    }
}

/// How to obtain `sigma^2` when no closed form applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaMethod {
    /// Closed form for `k = 2`, otherwise exact enumeration.
    Auto,
    Exact,
    MonteCarlo { reps: u64, seed: u64, lanes: usize },
}

#[derive(Debug, Clone)]
pub struct KRuns {
    pub spec: KRunsSpec,
    pub model: LocalStatisticModel,
    pub sigma2: f64,
    pub sigma_source: SigmaSource,
    pub sampler: KRunsSampler,
}

pub fn build_kruns(spec: KRunsSpec) -> Result<KRuns> {
    build_kruns_with(spec, SigmaMethod::Auto)
}

pub fn build_kruns_with(spec: KRunsSpec, method: SigmaMethod) -> Result<KRuns> {
    spec.validate()?;
    let raw = LocalStatisticModel::new(
        vec![BaseVariable::Bernoulli { p: spec.p }; spec.n],
        spec.index_sets(),
        Summand::CenteredProduct,
    )?;
    let (sigma2, sigma_source) = match method {
        SigmaMethod::Auto if spec.k == 2 => (kruns_sigma2_analytic(spec.n, spec.p)?, SigmaSource::Analytic),
        SigmaMethod::Auto | SigmaMethod::Exact => {
            let deps = build_dependency(&raw)?;
            (variance_exact(&raw, &deps)?, SigmaSource::ExactEnumeration)
        }
        SigmaMethod::MonteCarlo { reps, seed, lanes } => {
            let sampler = KRunsSampler::new(&spec, &raw);
            let mc = moments_mc(&sampler, reps, seed, lanes)?;
            let se = mc.std_errors.map(|s| s.0).unwrap_or(f64::NAN);
            (mc.var_w, SigmaSource::Estimated { se_sigma2: se })
        }
    };
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidModel(format!("k-run variance {sigma2} is not positive")));
    }
    let model = raw.with_scale(sigma2.sqrt())?;
    let sampler = KRunsSampler::new(&spec, &model);
    Ok(KRuns {
        spec,
        model,
        sigma2,
        sigma_source,
        sampler,
    })
}

/// O(n) sampler for circular k-runs.
///
/// Consumes `n` draws in base-variable order and sums the two possible summand values
/// in summand order, so it reproduces the generic model's `W` bit for bit.
#[derive(Debug, Clone)]
pub struct KRunsSampler {
    n: usize,
    k: usize,
    threshold: u64,
    xi_on: f64,
    xi_off: f64,
}

impl KRunsSampler {
    fn new(spec: &KRunsSpec, model: &LocalStatisticModel) -> Self {
        let mut ones = vec![1u32; model.m()];
        let xi_on = model.summand_value(0, &ones);
        ones[0] = 0;
        let xi_off = model.summand_value(0, &ones);
        KRunsSampler {
            n: spec.n,
            k: spec.k,
            threshold: unit_to_u64(spec.p),
            xi_on,
            xi_off,
        }
    }
}

impl Sampler for KRunsSampler {
    /// `(bits, run lengths)`
    type Scratch = (Vec<bool>, Vec<u32>);

    fn scratch(&self) -> Self::Scratch {
        (vec![false; self.n], vec![0; self.n])
    }

    fn draws_per_sample(&self) -> usize {
        self.n
    }

    fn sample(&self, rng: &mut RngStream, scratch: &mut Self::Scratch) -> f64 {
        let (bits, run) = scratch;
        for b in bits.iter_mut() {
            *b = rng.next_u64() < self.threshold;
        }
        let n = self.n;
        let k = self.k as u32;
        // run[i] = consecutive ones starting at i (circular), capped at k
        let mut next = 0u32;
        for pass in 0..2 {
            for i in (0..n).rev() {
                next = if bits[i] { (next + 1).min(k) } else { 0 };
                if pass == 1 {
                    run[i] = next;
                }
            }
        }
        let mut w = 0.0;
        for &r in run.iter() {
            w += if r >= k { self.xi_on } else { self.xi_off };
        }
        w
    }
}

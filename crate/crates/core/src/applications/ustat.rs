use rand::{RngCore, SeedableRng};
use serde::Serialize;

use super::kruns::SigmaSource;
use crate::error::{Error, Result};
use crate::mc::{RngStream, Sampler};
use crate::model::{BaseVariable, LocalStatisticModel, Summand};
use crate::sum::CompensatedSum;
use crate::tails::binomial;

/// Largest sample size for which the generic one-summand-per-subset model is built.
pub const MAX_GENERIC_M: usize = 30;

const NONDEGENERACY_TOL: f64 = 1e-12;

/// Builtin symmetric kernels, applied to centered base values `y = x - E x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UStatKernel {
    /// `h = prod y_j`. Always degenerate: `g(x) = y * prod E y_j = 0`.
    Product,
    /// `h = prod y_j + sum y_j`.
    ProductLinear,
}

impl UStatKernel {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(UStatKernel::Product),
            "product-linear" => Ok(UStatKernel::ProductLinear),
            other => Err(Error::Parse(format!("unknown kernel '{other}'"))),
        }
    }

    fn linear(&self) -> bool {
        matches!(self, UStatKernel::ProductLinear)
    }

    fn eval(&self, y: &[f64]) -> f64 {
        let mut prod = 1.0;
        for v in y {
            prod *= v;
        }
        if self.linear() {
            let mut lin = 0.0;
            for v in y {
                lin += v;
            }
            prod + lin
        } else {
            prod
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UStatSpec {
    pub m: usize,
    pub s: usize,
    pub kernel: UStatKernel,
    pub base: BaseVariable,
}

/// Kernel facts established by enumeration over the base support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelCheck {
    /// `E h`.
    pub mean: f64,
    /// `E g(X_1)^2` with `g(x) = E(h | X_1 = x)`.
    pub eg2: f64,
    /// `sup |h|`.
    pub c1: f64,
}

/// Verifies symmetry, `E h = 0` and non-degeneracy `E g^2 > 0` by enumeration.
pub fn check_kernel(spec: &UStatSpec) -> Result<KernelCheck> {
    spec.base.validate()?;
    let s = spec.s;
    let r = spec.base.support_len();
    let mu = spec.base.mean();
    let total = (r as u64).checked_pow(s as u32).filter(|&t| t <= 1 << 20).ok_or_else(|| {
        Error::UnsupportedSize(format!("kernel enumeration over {r}^{s} tuples"))
    })?;
    let mut idx = vec![0u32; s];
    let mut y = vec![0.0; s];
    let mut mean = CompensatedSum::new();
    let mut g = vec![CompensatedSum::new(); r];
    let mut c1 = 0.0f64;
    for code in 0..total {
        let mut c = code;
        let mut prob = 1.0;
        for t in (0..s).rev() {
            idx[t] = (c % r as u64) as u32;
            c /= r as u64;
            y[t] = spec.base.value(idx[t]) - mu;
            prob *= spec.base.prob(idx[t]);
        }
        let h = spec.kernel.eval(&y);
        mean.add(prob * h);
        c1 = c1.max(h.abs());
        // conditional on the first coordinate
        g[idx[0] as usize].add(prob / spec.base.prob(idx[0]) * h);
    }
    // symmetry on random permutations of random inputs
    let mut rng = RngStream::seed_from_u64(0x0075_7374_6174);
    let mut perm: Vec<usize> = (0..s).collect();
    for _ in 0..200 {
        for v in y.iter_mut() {
            *v = spec.base.value((rng.next_u64() % r as u64) as u32) - mu;
        }
        for t in (1..s).rev() {
            perm.swap(t, (rng.next_u64() % (t as u64 + 1)) as usize);
        }
        let permuted: Vec<f64> = perm.iter().map(|&t| y[t]).collect();
        let (a, b) = (spec.kernel.eval(&y), spec.kernel.eval(&permuted));
        if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
            return Err(Error::InvalidModel("kernel is not symmetric".into()));
        }
    }
    let eg2: f64 = (0..r)
        .map(|k| spec.base.prob(k as u32) * g[k].value().powi(2))
        .sum();
    let mean = mean.value();
    if mean.abs() > 1e-10 {
        return Err(Error::InvalidModel(format!("kernel mean {mean} is not 0")));
    }
    if eg2 <= NONDEGENERACY_TOL {
        return Err(Error::InvalidModel(format!(
            "degenerate U-statistic: E g^2(X_1) = {eg2}"
        )));
    }
    Ok(KernelCheck { mean, eg2, c1 })
}

/// Closed-form `Var(sum over s-subsets of h)` for the builtin kernels: distinct
/// centered products are orthogonal, and the linear part collapses to
/// `C(m-1, s-1) sum_j y_j`.
pub fn ustat_sigma2_analytic(m: usize, s: usize, kernel: UStatKernel, base: &BaseVariable) -> f64 {
    let v = base.variance();
    let prod = binomial(m, s) * v.powi(s as i32);
    match kernel {
        UStatKernel::Product => prod,
        UStatKernel::ProductLinear => prod + binomial(m - 1, s - 1).powi(2) * m as f64 * v,
    }
}

#[derive(Debug, Clone)]
pub struct UStat {
    pub spec: UStatSpec,
    pub kernel_check: KernelCheck,
    /// Present when `m <= MAX_GENERIC_M`.
    pub model: Option<LocalStatisticModel>,
    pub sigma2: f64,
    pub sigma_source: SigmaSource,
    pub sampler: UStatSampler,
}

/// All s-subsets of `0..m` in lexicographic order.
pub fn subsets(m: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..s).collect();
    if s > m {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut t = s;
        loop {
            if t == 0 {
                return out;
            }
            t -= 1;
            if cur[t] < m - s + t {
                cur[t] += 1;
                for u in t + 1..s {
                    cur[u] = cur[u - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn build_ustat(spec: UStatSpec) -> Result<UStat> {
    if spec.s < 2 {
        return Err(Error::InvalidModel(format!("kernel order s = {} must be at least 2", spec.s)));
    }
    if spec.s > 3 {
        return Err(Error::UnsupportedSize(format!(
            "direct U-statistic sampler supports s in {{2,3}} (O(m^s) work), got s = {}",
            spec.s
        )));
    }
    if spec.m < spec.s {
        return Err(Error::InvalidModel(format!("m = {} is smaller than s = {}", spec.m, spec.s)));
    }
    let kernel_check = check_kernel(&spec)?;
    let sigma2 = ustat_sigma2_analytic(spec.m, spec.s, spec.kernel, &spec.base);
    let sigma = sigma2.sqrt();
    let model = if spec.m <= MAX_GENERIC_M {
        let model = LocalStatisticModel::new(
            vec![spec.base.clone(); spec.m],
            subsets(spec.m, spec.s),
            Summand::UStatProduct { linear: spec.kernel.linear() },
        )?
        .with_scale(sigma)?;
        Some(model)
    } else {
        None
    };
    let sampler = UStatSampler {
        m: spec.m,
        s: spec.s,
        kernel: spec.kernel,
        base: spec.base.clone(),
        drawer_model: LocalStatisticModel::new(
            vec![spec.base.clone(); spec.m],
            (0..spec.m).map(|a| vec![a]).collect(),
            Summand::CenteredIdentity,
        )?,
        mean: spec.base.mean(),
        sigma,
    };
    Ok(UStat {
        spec,
        kernel_check,
        model,
        sigma2,
        sigma_source: SigmaSource::Analytic,
        sampler,
    })
}

/// Sums the kernel over all s-subsets in lexicographic order: `O(m^s)` per sample.
#[derive(Debug, Clone)]
pub struct UStatSampler {
    m: usize,
    s: usize,
    kernel: UStatKernel,
    base: BaseVariable,
    drawer_model: LocalStatisticModel,
    mean: f64,
    sigma: f64,
}

impl Sampler for UStatSampler {
    type Scratch = (Vec<u32>, Vec<f64>);

    fn scratch(&self) -> Self::Scratch {
        (vec![0; self.m], vec![0.0; self.m])
    }

    fn draws_per_sample(&self) -> usize {
        self.m
    }

    fn sample(&self, rng: &mut RngStream, scratch: &mut Self::Scratch) -> f64 {
        let (cfg, y) = scratch;
        self.drawer_model.draw_config(rng, cfg);
        for (yv, &c) in y.iter_mut().zip(cfg.iter()) {
            *yv = self.base.value(c) - self.mean;
        }
        let m = self.m;
        let mut w = 0.0;
        match self.s {
            2 => {
                for a in 0..m {
                    for b in a + 1..m {
                        w += self.kernel.eval(&[y[a], y[b]]) / self.sigma;
                    }
                }
            }
            3 => {
                for a in 0..m {
                    for b in a + 1..m {
                        for c in b + 1..m {
                            w += self.kernel.eval(&[y[a], y[b], y[c]]) / self.sigma;
                        }
                    }
                }
            }
            _ => unreachable!("build_ustat restricts s to 2 or 3"),
        }
        w
    }
}

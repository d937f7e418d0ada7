//! Cross-validation of the moment formulas, tails and sampler against the brute-force oracle.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::applications::kruns::{build_kruns, KRunsSpec};
use crate::applications::subgraph::{build_subgraph, SubgraphSpec};
use crate::deps::build_dependency;
use crate::error::Result;
use crate::mc::{estimate_tails, wilson_interval, ExperimentConfig};
use crate::model::{BaseVariable, LocalStatisticModel, Summand};
use crate::moments::{gamma_exact, variance_exact};
use crate::oracle::{exact_distribution, exact_distribution_reversed, exact_moments, exact_tail, Side};
use crate::special::poisson_pmf;
use crate::sum::CompensatedSum;
use crate::tails::{normal_tail, standardized_poisson_tail, Pattern};

pub const MOMENT_TOL: f64 = 1e-9;

/// Two-sided 99.99% normal quantile.
const Z9999: f64 = 3.890_591_886_413_094;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub max_error: f64,
    pub tolerance: f64,
    pub cases: usize,
}

impl CheckOutcome {
    fn new(name: &str, errors: &[f64], tolerance: f64) -> Self {
        let max_error = errors.iter().fold(0.0f64, |a, &e| if e.is_nan() { f64::NAN } else { a.max(e) });
        CheckOutcome {
            name: name.to_string(),
            passed: max_error <= tolerance,
            max_error,
            tolerance,
            cases: errors.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub passed: bool,
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
}

/// A random model with at most 8 Bernoulli base variables, at most 8 summands and
/// index sets of size at most 3. Summands are centered products or random centered tables.
pub fn random_tiny_model<R: Rng + ?Sized>(rng: &mut R) -> LocalStatisticModel {
    let m = rng.random_range(1..=8usize);
    let base: Vec<BaseVariable> = (0..m)
        .map(|_| BaseVariable::Bernoulli {
            p: rng.random_range(0.05..0.95),
        })
        .collect();
    let n = rng.random_range(1..=8usize);
    let sets: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let s = rng.random_range(1..=3usize.min(m));
            let mut set = sample(rng, m, s).into_vec();
            set.sort_unstable();
            set
        })
        .collect();
    let summand = if rng.random_bool(0.5) {
        Summand::CenteredProduct
    } else {
        let tables = sets
            .iter()
            .map(|set| {
                let mut t: Vec<f64> = (0..1usize << set.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                // mixed radix, first element most significant
                let prob = |idx: usize| -> f64 {
                    set.iter()
                        .enumerate()
                        .map(|(pos, &a)| base[a].prob(((idx >> (set.len() - 1 - pos)) & 1) as u32))
                        .product()
                };
                let mean: CompensatedSum = t.iter().enumerate().map(|(idx, v)| prob(idx) * v).collect();
                let mean = mean.value();
                t.iter_mut().for_each(|v| *v -= mean);
                t
            })
            .collect();
        Summand::Table(tables)
    };
    let model = LocalStatisticModel::new(base, sets, summand).expect("random tiny model is valid");
    let scale = rng.random_range(0.5..2.0);
    model.with_scale(scale).expect("positive scale")
}

/// `|gamma_exact - E W^3|` and `|variance_exact - Var W|` for one model.
pub fn moment_errors(model: &LocalStatisticModel) -> Result<(f64, f64)> {
    let deps = build_dependency(model)?;
    let mo = exact_moments(&exact_distribution(model)?);
    Ok((
        (gamma_exact(model, &deps)? - mo.third).abs(),
        (variance_exact(model, &deps)? - mo.var).abs(),
    ))
}

/// Mean, variance and third moment of `Z_gamma` by direct pmf summation.
pub fn standardized_poisson_moments(gamma: f64) -> (f64, f64, f64) {
    let lambda = 1.0 / (gamma * gamma);
    let top = (lambda + 40.0 * lambda.sqrt() + 60.0) as u64;
    let (mut m1, mut m2, mut m3) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for k in 0..=top {
        let p = poisson_pmf(k, lambda);
        let z = gamma * (k as f64 - lambda);
        m1.add(p * z);
        m2.add(p * z * z);
        m3.add(p * z * z * z);
    }
    (m1.value(), m2.value(), m3.value())
}

/// Runs the whole suite; `seed` drives the random models and the Monte Carlo checks.
pub fn run_oracle_suite(seed: u64, random_models: usize) -> Result<OracleReport> {
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut models: Vec<LocalStatisticModel> = (0..random_models).map(|_| random_tiny_model(&mut rng)).collect();
    models.push(build_kruns(KRunsSpec { n: 6, k: 2, p: 0.3 })?.model);
    for p in [0.2, 0.5, 0.7] {
        let g = build_subgraph(SubgraphSpec {
            n_vertices: 5,
            p,
            pattern: Pattern::triangle(),
        })?;
        models.push(g.model.expect("N = 5 has a generic model"));
    }
    let (mut eg, mut ev) = (Vec::new(), Vec::new());
    for model in &models {
        let (g, v) = moment_errors(model)?;
        eg.push(g);
        ev.push(v);
    }
    checks.push(CheckOutcome::new("gamma-exact-vs-oracle", &eg, MOMENT_TOL));
    checks.push(CheckOutcome::new("variance-exact-vs-oracle", &ev, MOMENT_TOL));

    let mut mass = Vec::new();
    let mut order = Vec::new();
    for model in &models {
        let d = exact_distribution(model)?;
        let r = exact_distribution_reversed(model)?;
        mass.push((d.total_prob - 1.0).abs());
        for x in [0.0, 0.5, 1.0, 2.0] {
            order.push((exact_tail(&d, x, Side::Right) - exact_tail(&r, x, Side::Right)).abs());
            order.push((exact_tail(&d, x, Side::Left) - exact_tail(&r, x, Side::Left)).abs());
        }
    }
    checks.push(CheckOutcome::new("total-probability", &mass, 1e-12));
    checks.push(CheckOutcome::new("enumeration-order-invariance", &order, 1e-12));

    // Monte Carlo tails inside 99.99% Wilson intervals around the exact tail.
    let mut misses = 0usize;
    let mut trials = 0usize;
    let grid = vec![0.0, 0.5, 1.0, 1.5];
    for (j, model) in models.iter().enumerate().take(12) {
        let d = exact_distribution(model)?;
        let est = estimate_tails(
            model,
            &ExperimentConfig {
                x_grid: grid.clone(),
                reps: 20_000,
                seed: seed.wrapping_add(j as u64),
                lanes: 1,
            },
        )?;
        for e in &est {
            for (count, side) in [(e.count_right, Side::Right), (e.count_left, Side::Left)] {
                let exact = exact_tail(&d, e.x, side);
                let (lo, hi) = wilson_interval(count, e.reps, Z9999);
                trials += 1;
                if exact < lo - 1e-12 || exact > hi + 1e-12 {
                    misses += 1;
                }
            }
        }
    }
    // at most one miss in 96 is allowed
    checks.push(CheckOutcome {
        name: "monte-carlo-within-wilson-9999".into(),
        passed: misses <= trials.div_ceil(100),
        max_error: misses as f64,
        tolerance: trials.div_ceil(100) as f64,
        cases: trials,
    });

    let mut zerr = Vec::new();
    for gamma in [0.05, -0.05, 0.138, -0.138, 0.5, -0.5] {
        let (m1, m2, m3) = standardized_poisson_moments(gamma);
        zerr.extend([m1.abs(), (m2 - 1.0).abs(), (m3 - gamma).abs()]);
    }
    checks.push(CheckOutcome::new("standardized-poisson-moments", &zerr, 1e-9));
    let at_zero = standardized_poisson_tail(0.0, 1.0)? - (1.0 - 2.0 * (-1.0f64).exp());
    checks.push(CheckOutcome::new("standardized-poisson-tail-at-zero", &[at_zero.abs()], 1e-12));
    let mut prox = Vec::new();
    for i in 0..=30 {
        let x = i as f64 * 0.1;
        prox.push((standardized_poisson_tail(x, 1e-3)? - normal_tail(x)).abs());
    }
    checks.push(CheckOutcome::new("standardized-poisson-normal-limit", &prox, 5e-3));

    let passed = checks.iter().all(|c| c.passed);
    Ok(OracleReport { passed, seed, checks })
}

//! Deterministic parallel Monte Carlo over replications of `W`.
//!
//! Replication `r` always draws from ChaCha8 stream `r` keyed by the experiment seed, so
//! every replication's value depends only on `(seed, r)`. Lanes take contiguous blocks of
//! replication indices and their partial results are merged in lane order. Integer counts
//! are therefore identical for any lane count; floating-point accumulations are
//! bit-stable for a fixed `(seed, reps, lanes)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LocalStatisticModel;
use crate::tails::{normal_tail, skew_corrected_tail};

pub type RngStream = ChaCha8Rng;

/// Identifier of the generator and stream derivation, recorded in every output file.
pub const RNG_ID: &str = "chacha8-rand_chacha0.9-stream-per-rep-v1";

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Generator for replication `rep`.
pub fn replication_stream(seed: u64, rep: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Anything that draws one `W` per call from an exclusive generator.
pub trait Sampler: Sync {
    type Scratch: Send;

    fn scratch(&self) -> Self::Scratch;

    /// Number of `u64` draws consumed per sample.
    fn draws_per_sample(&self) -> usize;

    fn sample(&self, rng: &mut RngStream, scratch: &mut Self::Scratch) -> f64;
}

impl Sampler for LocalStatisticModel {
    type Scratch = Vec<u32>;

    fn scratch(&self) -> Vec<u32> {
        vec![0; self.m()]
    }

    fn draws_per_sample(&self) -> usize {
        self.m()
    }

    fn sample(&self, rng: &mut RngStream, scratch: &mut Vec<u32>) -> f64 {
        self.sample_w(rng, scratch)
    }
}

impl<S: Sampler> Sampler for &S {
    type Scratch = S::Scratch;

    fn scratch(&self) -> S::Scratch {
        (*self).scratch()
    }

    fn draws_per_sample(&self) -> usize {
        (*self).draws_per_sample()
    }

    fn sample(&self, rng: &mut RngStream, scratch: &mut S::Scratch) -> f64 {
        (*self).sample(rng, scratch)
    }
}

/// Replication range handled by `lane` out of `lanes`.
pub fn lane_range(reps: u64, lanes: usize, lane: usize) -> std::ops::Range<u64> {
    let lanes = lanes as u64;
    let lane = lane as u64;
    let base = reps / lanes;
    let extra = reps % lanes;
    let start = lane * base + lane.min(extra);
    let len = base + u64::from(lane < extra);
    start..start + len
}

/// Runs `reps` replications split over `lanes` workers and returns each lane's
/// accumulator, in lane order. `step` receives `(acc, w, rep_index)`.
pub fn run_lanes<S, A, I, F>(sampler: &S, seed: u64, reps: u64, lanes: usize, init: I, step: F) -> Vec<A>
where
    S: Sampler,
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, f64, u64) + Sync,
{
    let lanes = lanes.max(1);
    let work = |lane: usize| {
        let mut acc = init();
        let mut scratch = sampler.scratch();
        let root = ChaCha8Rng::seed_from_u64(seed);
        for rep in lane_range(reps, lanes, lane) {
            let mut rng = root.clone();
            rng.set_stream(rep);
            let w = sampler.sample(&mut rng, &mut scratch);
            step(&mut acc, w, rep);
        }
        acc
    };
    if lanes == 1 {
        return vec![work(0)];
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..lanes).map(|lane| scope.spawn(move || work(lane))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("monte carlo lane panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub x_grid: Vec<f64>,
    pub reps: u64,
    pub seed: u64,
    pub lanes: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.x_grid.is_empty() {
            return Err(Error::Domain("empty x grid".into()));
        }
        if self.x_grid.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Domain("x grid values must be finite and non-negative".into()));
        }
        if self.x_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("x grid must be strictly increasing".into()));
        }
        if self.reps == 0 {
            return Err(Error::Domain("reps must be at least 1".into()));
        }
        if self.lanes == 0 {
            return Err(Error::Domain("lanes must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub x: f64,
    /// Number of replications with `W > x`.
    pub count_right: u64,
    /// Number of replications with `W < -x`.
    pub count_left: u64,
    pub reps: u64,
    pub p_right: f64,
    pub p_left: f64,
    pub ci_right: (f64, f64),
    pub ci_left: (f64, f64),
}

/// Wilson score interval for `count` successes in `n` trials.
pub fn wilson_interval(count: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let phat = count as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (phat + z2 / (2.0 * nf)) / denom;
    let half = z * (phat * (1.0 - phat) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if count == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if count == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone)]
struct TailCounts {
    right: Vec<u64>,
    left: Vec<u64>,
}

/// Right and left tail counts on a grid in one pass over the replications.
///
/// Each sample adds one to a histogram slot (the number of grid points below `W` or
/// below `-W`); suffix sums turn the histograms into `#{W > x}` and `#{W < -x}`.
pub fn estimate_tails<S: Sampler>(sampler: &S, config: &ExperimentConfig) -> Result<Vec<TailEstimate>> {
    config.validate()?;
    let grid = &config.x_grid;
    let slots = grid.len() + 1;
    let partials = run_lanes(
        sampler,
        config.seed,
        config.reps,
        config.lanes,
        || TailCounts {
            right: vec![0; slots],
            left: vec![0; slots],
        },
        |acc, w, _| {
            acc.right[grid.partition_point(|&x| x < w)] += 1;
            acc.left[grid.partition_point(|&x| x < -w)] += 1;
        },
    );
    let mut hist = TailCounts {
        right: vec![0; slots],
        left: vec![0; slots],
    };
    for lane in &partials {
        for s in 0..slots {
            hist.right[s] += lane.right[s];
            hist.left[s] += lane.left[s];
        }
    }
    let reps = config.reps;
    let mut out = Vec::with_capacity(grid.len());
    let (mut right, mut left) = (0u64, 0u64);
    for g in (0..grid.len()).rev() {
        right += hist.right[g + 1];
        left += hist.left[g + 1];
        out.push(TailEstimate {
            x: grid[g],
            count_right: right,
            count_left: left,
            reps,
            p_right: right as f64 / reps as f64,
            p_left: left as f64 / reps as f64,
            ci_right: wilson_interval(right, reps, Z95),
            ci_left: wilson_interval(left, reps, Z95),
        });
    }
    out.reverse();
    Ok(out)
}

/// `(#{W > x}, #{W < -x})` per grid point over the replication indices in `reps` only.
///
/// Counts over disjoint ranges add up to the counts of [`estimate_tails`] over their union.
pub fn count_tails_in_range<S: Sampler>(
    sampler: &S,
    seed: u64,
    grid: &[f64],
    reps: std::ops::Range<u64>,
) -> (Vec<u64>, Vec<u64>) {
    let mut right = vec![0; grid.len()];
    let mut left = vec![0; grid.len()];
    let mut scratch = sampler.scratch();
    for rep in reps {
        let w = sampler.sample(&mut replication_stream(seed, rep), &mut scratch);
        for (g, &x) in grid.iter().enumerate() {
            right[g] += u64::from(w > x);
            left[g] += u64::from(w < -x);
        }
    }
    (right, left)
}

/// Relative errors of the normal and skewness-corrected approximations at one `x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelativeErrorRow {
    pub x: f64,
    pub gamma: f64,
    #[serde(rename = "L_N")]
    pub l_n: f64,
    #[serde(rename = "L_skew")]
    pub l_skew: f64,
    #[serde(rename = "R_N")]
    pub r_n: f64,
    #[serde(rename = "R_skew")]
    pub r_skew: f64,
    /// 95% half-widths propagated from the Wilson intervals.
    pub hw_l_n: f64,
    pub hw_l_skew: f64,
    pub hw_r_n: f64,
    pub hw_r_skew: f64,
}

/// `L_N = P(W<-x)/Phi(-x) - 1`, `L_skew = P(W<-x)/(Phi(-x) e^{-gamma x^3/6}) - 1`,
/// `R_N = P(W>x)/(1-Phi(x)) - 1`, `R_skew = P(W>x)/((1-Phi(x)) e^{gamma x^3/6}) - 1`.
pub fn relative_error_table(estimates: &[TailEstimate], gamma: f64) -> Result<Vec<RelativeErrorRow>> {
    if !gamma.is_finite() {
        return Err(Error::Domain(format!("gamma = {gamma} must be finite")));
    }
    Ok(estimates
        .iter()
        .map(|e| {
            let normal = normal_tail(e.x);
            let skew_right = skew_corrected_tail(e.x, gamma);
            let skew_left = skew_corrected_tail(e.x, -gamma);
            let hw_right = 0.5 * (e.ci_right.1 - e.ci_right.0);
            let hw_left = 0.5 * (e.ci_left.1 - e.ci_left.0);
            RelativeErrorRow {
                x: e.x,
                gamma,
                l_n: e.p_left / normal - 1.0,
                l_skew: e.p_left / skew_left - 1.0,
                r_n: e.p_right / normal - 1.0,
                r_skew: e.p_right / skew_right - 1.0,
                hw_l_n: hw_left / normal,
                hw_l_skew: hw_left / skew_left,
                hw_r_n: hw_right / normal,
                hw_r_skew: hw_right / skew_right,
            }
        })
        .collect())
}

/// Number of contiguous replication batches used for the MGF bootstrap.
pub const MGF_BATCHES: usize = 64;
pub const MGF_BOOTSTRAP_RESAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MgfRow {
    pub t: f64,
    pub log_mgf: f64,
    /// `t^2/2 + gamma t^3/6`.
    pub target: f64,
    pub discrepancy: f64,
    pub bootstrap_se: f64,
    /// Whether `t` lies below the supplied range endpoint, if one was given.
    pub in_range: Option<bool>,
}

/// Running `ln sum exp(v)` with rescaling.
#[derive(Debug, Clone, Copy)]
struct LogSumExp {
    max: f64,
    sum: f64,
    count: u64,
}

impl LogSumExp {
    fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
            count: 0,
        }
    }

    fn add(&mut self, v: f64) {
        self.count += 1;
        if v <= self.max {
            self.sum += (v - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    fn merge(&mut self, other: &LogSumExp) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        if other.max <= self.max {
            self.sum += other.sum * (other.max - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - other.max).exp() + other.sum;
            self.max = other.max;
        }
        self.count += other.count;
    }

    /// `ln( (1/count) sum exp(v) )`.
    fn ln_mean(&self) -> f64 {
        self.sum.ln() + self.max - (self.count as f64).ln()
    }
}

/// Empirical `ln E e^{tW}` against `t^2/2 + gamma t^3/6`.
///
/// Uses shifted log-sum-exp accumulation, so `e^{tW}` never overflows. The standard
/// error is a bootstrap over [`MGF_BATCHES`] contiguous replication batches.
pub fn mgf_check<S: Sampler>(
    sampler: &S,
    t_grid: &[f64],
    reps: u64,
    seed: u64,
    lanes: usize,
    gamma: f64,
    t_max: Option<f64>,
) -> Result<Vec<MgfRow>> {
    if reps < MGF_BATCHES as u64 {
        return Err(Error::Domain(format!("mgf_check needs at least {MGF_BATCHES} reps")));
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("t grid must be finite".into()));
    }
    let nt = t_grid.len();
    let partials = run_lanes(
        sampler,
        seed,
        reps,
        lanes,
        || vec![LogSumExp::new(); nt * MGF_BATCHES],
        |acc, w, rep| {
            let batch = ((rep as u128 * MGF_BATCHES as u128) / reps as u128) as usize;
            for (ti, &t) in t_grid.iter().enumerate() {
                acc[batch * nt + ti].add(t * w);
            }
        },
    );
    let mut batches = vec![LogSumExp::new(); nt * MGF_BATCHES];
    for lane in &partials {
        for (b, l) in batches.iter_mut().zip(lane) {
            b.merge(l);
        }
    }
    let mut boot_rng = replication_stream(seed ^ 0x6d67_665f_626f_6f74, u64::MAX);
    let resamples: Vec<Vec<usize>> = (0..MGF_BOOTSTRAP_RESAMPLES)
        .map(|_| {
            (0..MGF_BATCHES)
                .map(|_| (boot_rng.next_u64() % MGF_BATCHES as u64) as usize)
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(nt);
    for (ti, &t) in t_grid.iter().enumerate() {
        let mut total = LogSumExp::new();
        for b in 0..MGF_BATCHES {
            total.merge(&batches[b * nt + ti]);
        }
        let log_mgf = total.ln_mean();
        let target = 0.5 * t * t + gamma * t * t * t / 6.0;
        let batch_means: Vec<f64> = (0..MGF_BATCHES).map(|b| batches[b * nt + ti].ln_mean()).collect();
        let boot: Vec<f64> = resamples
            .iter()
            .map(|pick| {
                let mut acc = LogSumExp::new();
                for &b in pick {
                    acc.add(batch_means[b]);
                }
                acc.ln_mean()
            })
            .collect();
        let mean = boot.iter().sum::<f64>() / boot.len() as f64;
        let var = boot.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (boot.len() - 1) as f64;
        rows.push(MgfRow {
            t,
            log_mgf,
            target,
            discrepancy: log_mgf - target,
            bootstrap_se: var.sqrt(),
            in_range: t_max.map(|m| t <= m),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BaseVariable, Summand};

    #[test]
    fn lane_ranges_cover_all_reps() {
        for reps in [0u64, 1, 7, 100, 101] {
            for lanes in 1..6 {
                let mut next = 0;
                for lane in 0..lanes {
                    let r = lane_range(reps, lanes, lane);
                    assert_eq!(r.start, next);
                    next = r.end;
                }
                assert_eq!(next, reps);
            }
        }
    }

    #[test]
    fn wilson_interval_edges() {
        let (lo, hi) = wilson_interval(0, 100, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(100, 100, Z95);
        assert!(lo > 0.95 && lo < 1.0);
        assert_eq!(hi, 1.0);
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!(lo < 0.5 && hi > 0.5);
    }

    #[test]
    fn config_validation() {
        let good = ExperimentConfig { x_grid: vec![0.0, 1.0], reps: 1, seed: 0, lanes: 1 };
        assert!(good.validate().is_ok());
        for bad in [
            ExperimentConfig { x_grid: vec![1.0, 1.0], ..good.clone() },
            ExperimentConfig { x_grid: vec![], ..good.clone() },
            ExperimentConfig { reps: 0, ..good.clone() },
            ExperimentConfig { lanes: 0, ..good.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn zero_model_has_empty_tails() {
        let model = LocalStatisticModel::new(
            vec![BaseVariable::Finite { support: vec![(1.0, 1.0)] }; 3],
            (0..3).map(|a| vec![a]).collect(),
            Summand::CenteredIdentity,
        )
        .unwrap();
        let cfg = ExperimentConfig { x_grid: vec![0.5, 1.0, 2.0], reps: 500, seed: 9, lanes: 2 };
        for e in estimate_tails(&model, &cfg).unwrap() {
            assert_eq!((e.count_left, e.count_right), (0, 0));
            assert_eq!((e.p_left, e.p_right), (0.0, 0.0));
        }
    }

    #[test]
    fn relative_errors_vanish_on_exact_normal_tail() {
        let x = 1.5;
        let p = normal_tail(x);
        let e = TailEstimate {
            x,
            count_right: 0,
            count_left: 0,
            reps: 1,
            p_right: p,
            p_left: p,
            ci_right: (p, p),
            ci_left: (p, p),
        };
        let row = &relative_error_table(&[e], 0.0).unwrap()[0];
        assert_eq!(row.r_n, 0.0);
        assert_eq!(row.l_n, 0.0);
        assert_eq!(row.r_skew, row.r_n);
        assert_eq!(row.l_skew, row.l_n);
    }

    #[test]
    fn log_sum_exp_merge_is_consistent() {
        let vals = [-3.0, 700.0, 2.5, 710.0, -800.0];
        let mut one = LogSumExp::new();
        vals.iter().for_each(|&v| one.add(v));
        let mut a = LogSumExp::new();
        let mut b = LogSumExp::new();
        vals[..2].iter().for_each(|&v| a.add(v));
        vals[2..].iter().for_each(|&v| b.add(v));
        a.merge(&b);
        assert!((a.ln_mean() - one.ln_mean()).abs() < 1e-12);
        assert!(one.ln_mean().is_finite());
    }
}

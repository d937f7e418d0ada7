//! Brute-force distribution of `W` on tiny models.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LocalStatisticModel;
use crate::sum::CompensatedSum;

/// Largest number of joint base configurations enumerated.
pub const MAX_CONFIGURATIONS: u64 = 1 << 24;

/// Values of `W` closer than this (relative to `max(1, |w|)`) share an atom.
pub const ATOM_TOL: f64 = 1e-12;

const CHUNK: usize = 1 << 18;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactDistribution {
    /// `(value, probability)`, strictly increasing in value.
    pub atoms: Vec<(f64, f64)>,
    pub total_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `P(W > x)`
    Right,
    /// `P(W < -x)`
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactMoments {
    pub mean: f64,
    pub var: f64,
    /// `E W^3`
    pub third: f64,
    /// `E W^4`
    pub fourth: f64,
}

/// Folds a batch of `(value, probability)` pairs into sorted merged atoms.
fn merge_into(atoms: &mut Vec<(f64, CompensatedSum)>, chunk: &mut Vec<(f64, f64)>) {
    chunk.sort_by(|a, b| a.0.total_cmp(&b.0));
    let old = std::mem::take(atoms);
    let mut merged: Vec<(f64, CompensatedSum)> = Vec::with_capacity(old.len() + 16);
    let mut push = |w: f64, p: CompensatedSum| match merged.last_mut() {
        Some((v, acc)) if w - *v <= ATOM_TOL * v.abs().max(1.0) => acc.add(p.value()),
        _ => merged.push((w, p)),
    };
    let mut a = old.into_iter().peekable();
    let mut c = chunk.drain(..).peekable();
    loop {
        let take_old = match (a.peek(), c.peek()) {
            (Some(x), Some(y)) => x.0 <= y.0,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        if take_old {
            let (w, p) = a.next().unwrap();
            push(w, p);
        } else {
            let (w, p) = c.next().unwrap();
            let mut s = CompensatedSum::new();
            s.add(p);
            push(w, s);
        }
    }
    *atoms = merged;
}

fn enumerate(model: &LocalStatisticModel, reversed: bool) -> Result<ExactDistribution> {
    let m = model.m();
    let vars: Vec<usize> = if reversed { (0..m).rev().collect() } else { (0..m).collect() };
    let size = model.joint_support_size(&vars);
    if size > MAX_CONFIGURATIONS {
        return Err(Error::UnsupportedSize(format!(
            "{size} base configurations exceed the oracle limit of {MAX_CONFIGURATIONS}"
        )));
    }
    let mut atoms = Vec::new();
    let mut chunk = Vec::with_capacity(CHUNK.min(size as usize));
    let mut config = vec![0u32; m];
    model.for_each_assignment(&vars, &mut config, |cfg, prob| {
        chunk.push((model.evaluate(cfg), prob));
        if chunk.len() == CHUNK {
            merge_into(&mut atoms, &mut chunk);
        }
    });
    merge_into(&mut atoms, &mut chunk);
    let total: CompensatedSum = atoms.iter().map(|(_, p)| p.value()).collect();
    Ok(ExactDistribution {
        atoms: atoms.into_iter().map(|(w, p)| (w, p.value())).collect(),
        total_prob: total.value(),
    })
}

/// Exact law of `W` by enumerating every base configuration, last variable fastest.
pub fn exact_distribution(model: &LocalStatisticModel) -> Result<ExactDistribution> {
    enumerate(model, false)
}

/// Same law, enumerated with the first variable fastest; used as an independent recount.
pub fn exact_distribution_reversed(model: &LocalStatisticModel) -> Result<ExactDistribution> {
    enumerate(model, true)
}

/// `P(W > x)` or `P(W < -x)`, strict inequalities.
pub fn exact_tail(dist: &ExactDistribution, x: f64, side: Side) -> f64 {
    let s: CompensatedSum = match side {
        Side::Right => dist.atoms.iter().filter(|a| a.0 > x).map(|a| a.1).collect(),
        Side::Left => dist.atoms.iter().filter(|a| a.0 < -x).map(|a| a.1).collect(),
    };
    s.value()
}

/// `P(W <= x)`.
pub fn exact_cdf(dist: &ExactDistribution, x: f64) -> f64 {
    dist.atoms.iter().filter(|a| a.0 <= x).map(|a| a.1).collect::<CompensatedSum>().value()
}

pub fn exact_moments(dist: &ExactDistribution) -> ExactMoments {
    let raw = |k: i32| -> f64 { dist.atoms.iter().map(|&(w, p)| p * w.powi(k)).collect::<CompensatedSum>().value() };
    let mean = raw(1);
    let var = dist
        .atoms
        .iter()
        .map(|&(w, p)| p * (w - mean) * (w - mean))
        .collect::<CompensatedSum>()
        .value();
    ExactMoments {
        mean,
        var,
        third: raw(3),
        fourth: raw(4),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::applications::iid_model;
    use crate::applications::kruns::{build_kruns, KRunsSpec};
    use crate::deps::build_dependency;
    use crate::model::{BaseVariable, Summand};
    use crate::moments::{gamma_exact, variance_exact};

    #[test]
    fn bernoulli_sum_has_binomial_atoms() {
        let model = LocalStatisticModel::new(
            vec![BaseVariable::Bernoulli { p: 0.5 }; 3],
            vec![vec![0], vec![1], vec![2]],
            Summand::CenteredIdentity,
        )
        .unwrap();
        let d = exact_distribution(&model).unwrap();
        let probs: Vec<f64> = d.atoms.iter().map(|a| a.1).collect();
        assert_eq!(probs, vec![0.125, 0.375, 0.375, 0.125]);
        let values: Vec<f64> = d.atoms.iter().map(|a| a.0).collect();
        assert_eq!(values, vec![-1.5, -0.5, 0.5, 1.5]);
    }

    #[test]
    fn tails_use_strict_inequalities() {
        let model = LocalStatisticModel::new(
            vec![BaseVariable::Rademacher; 2],
            vec![vec![0], vec![1]],
            Summand::CenteredIdentity,
        )
        .unwrap();
        let d = exact_distribution(&model).unwrap();
        assert_eq!(exact_tail(&d, -5.0, Side::Right), 1.0);
        assert_eq!(exact_tail(&d, 0.0, Side::Right), 0.25);
        assert_eq!(exact_tail(&d, 0.0, Side::Left), 0.25);
        assert_eq!(exact_tail(&d, 2.0, Side::Right), 0.0);
        assert_eq!(exact_tail(&d, 1.999, Side::Right), 0.25);
    }

    #[test]
    fn kruns_self_consistency() {
        let kr = build_kruns(KRunsSpec { n: 6, k: 2, p: 0.3 }).unwrap();
        let d = exact_distribution(&kr.model).unwrap();
        assert!((d.total_prob - 1.0).abs() < 1e-12);
        let mo = exact_moments(&d);
        assert!(mo.mean.abs() < 1e-12);
        assert!((mo.var - 1.0).abs() < 1e-12);
        let deps = build_dependency(&kr.model).unwrap();
        assert!((mo.third - gamma_exact(&kr.model, &deps).unwrap()).abs() < 1e-10);
        let rev = exact_distribution_reversed(&kr.model).unwrap();
        let a = exact_tail(&d, 1.0, Side::Right);
        assert!((a - (1.0 - exact_cdf(&rev, 1.0))).abs() < 1e-14);
        assert!((a - exact_tail(&rev, 1.0, Side::Right)).abs() < 1e-14);
    }

    #[test]
    fn rademacher_standardized_moments() {
        let iid = iid_model(4, BaseVariable::Rademacher).unwrap();
        let mo = exact_moments(&exact_distribution(&iid.model).unwrap());
        // W = S/2 with S in {-4,-2,0,2,4}, weights 1,4,6,4,1 over 16
        let fourth = (2.0 * 16.0 + 8.0) / 16.0;
        assert_eq!((mo.mean, mo.var, mo.third), (0.0, 1.0, 0.0));
        assert!((mo.fourth - fourth).abs() < 1e-15);
        let deps = build_dependency(&iid.model).unwrap();
        assert_eq!(variance_exact(&iid.model, &deps).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_model() {
        let model = LocalStatisticModel::new(
            vec![BaseVariable::Bernoulli { p: 0.4 }; 2],
            vec![vec![0, 1]],
            Summand::Table(vec![vec![0.0; 4]]),
        )
        .unwrap();
        let d = exact_distribution(&model).unwrap();
        assert_eq!(d.atoms.len(), 1);
        let mo = exact_moments(&d);
        assert_eq!((mo.mean, mo.var, mo.third, mo.fourth), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn chunked_merge_matches_single_pass() {
        let mut atoms = Vec::new();
        let mut c1 = vec![(1.0, 0.25), (0.0, 0.25)];
        let mut c2 = vec![(1.0 + 1e-14, 0.25), (-1.0, 0.25)];
        merge_into(&mut atoms, &mut c1);
        merge_into(&mut atoms, &mut c2);
        let got: Vec<(f64, f64)> = atoms.iter().map(|(w, p)| (*w, p.value())).collect();
        assert_eq!(got, vec![(-1.0, 0.25), (0.0, 0.25), (1.0, 0.5)]);
    }

    #[test]
    fn refuses_large_state_space() {
        let model = LocalStatisticModel::new(
            vec![BaseVariable::Rademacher; 25],
            (0..25).map(|i| vec![i]).collect(),
            Summand::CenteredIdentity,
        )
        .unwrap();
        assert!(matches!(exact_distribution(&model), Err(Error::UnsupportedSize(_))));
    }
}

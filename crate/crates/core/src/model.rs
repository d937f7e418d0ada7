//! Sums of local statistics over independent, finitely supported base variables.
//!
//! A model describes `W = sum_i xi_i` where each summand `xi_i` is a function of the
//! base variables indexed by `I_i`. Base variables are stored by support index
//! (`u32`), so a configuration of all `m` base variables is a `&[u32]`.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROB_SUM_TOL: f64 = 1e-12;
const MEAN_ZERO_TOL: f64 = 1e-10;
/// Largest joint support enumerated when checking `E xi_i = 0` or computing `sup |xi_i|`.
const SUMMAND_ENUM_LIMIT: u64 = 1 << 16;

/// Distribution of one base variable `X_alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseVariable {
    /// Values `{0, 1}` with `P(1) = p`.
    Bernoulli { p: f64 },
    /// Values `{-1, 1}` with equal probability.
    Rademacher,
    /// Arbitrary finite support as `(value, probability)` pairs.
    Finite { support: Vec<(f64, f64)> },
}

impl BaseVariable {
    pub fn validate(&self) -> Result<()> {
        match self {
            BaseVariable::Bernoulli { p } => {
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(Error::InvalidModel(format!(
                        "bernoulli probability {p} not in (0,1)"
                    )));
                }
            }
            BaseVariable::Rademacher => {}
            BaseVariable::Finite { support } => {
                if support.is_empty() {
                    return Err(Error::InvalidModel("empty finite support".into()));
                }
                let mut total = 0.0;
                for &(v, q) in support {
                    if !v.is_finite() || !(q > 0.0) || !q.is_finite() {
                        return Err(Error::InvalidModel(format!(
                            "finite support entry ({v}, {q}) must have a finite value and positive probability"
                        )));
                    }
                    total += q;
                }
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return Err(Error::InvalidModel(format!(
                        "finite support probabilities sum to {total}, not 1"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn support_len(&self) -> usize {
        match self {
            BaseVariable::Bernoulli { .. } | BaseVariable::Rademacher => 2,
            BaseVariable::Finite { support } => support.len(),
        }
    }

    pub fn value(&self, idx: u32) -> f64 {
        match self {
            BaseVariable::Bernoulli { .. } => idx as f64,
            BaseVariable::Rademacher => {
                if idx == 0 {
                    -1.0
                } else {
                    1.0
                }
            }
            BaseVariable::Finite { support } => support[idx as usize].0,
        }
    }

    pub fn prob(&self, idx: u32) -> f64 {
        match self {
            BaseVariable::Bernoulli { p } => {
                if idx == 1 {
                    *p
                } else {
                    1.0 - p
                }
            }
            BaseVariable::Rademacher => 0.5,
            BaseVariable::Finite { support } => support[idx as usize].1,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            BaseVariable::Bernoulli { p } => *p,
            BaseVariable::Rademacher => 0.0,
            BaseVariable::Finite { support } => support.iter().map(|&(v, q)| v * q).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            BaseVariable::Bernoulli { p } => p * (1.0 - p),
            BaseVariable::Rademacher => 1.0,
            BaseVariable::Finite { support } => {
                let mu = self.mean();
                support.iter().map(|&(v, q)| q * (v - mu) * (v - mu)).sum()
            }
        }
    }

    /// Largest `|x - E x|` over the support.
    pub fn max_abs_centered(&self) -> f64 {
        let mu = self.mean();
        (0..self.support_len() as u32)
            .map(|i| (self.value(i) - mu).abs())
            .fold(0.0, f64::max)
    }

    fn drawer(&self) -> Drawer {
        match self {
            BaseVariable::Bernoulli { p } => Drawer::Below(unit_to_u64(*p)),
            BaseVariable::Rademacher => Drawer::TopBit,
            BaseVariable::Finite { support } => {
                let mut acc = 0.0;
                let mut cuts = Vec::with_capacity(support.len().saturating_sub(1));
                for &(_, q) in &support[..support.len() - 1] {
                    acc += q;
                    cuts.push(unit_to_u64(acc));
                }
                Drawer::Cumulative(cuts)
            }
        }
    }
}

/// Maps a probability to a threshold on a uniform `u64`.
pub(crate) fn unit_to_u64(p: f64) -> u64 {
    if p >= 1.0 {
        u64::MAX
    } else {
        // 2^64 as f64; the cast saturates.
        (p * 18_446_744_073_709_551_616.0) as u64
    }
}

/// Converts one uniform `u64` into a support index. Exactly one draw per base variable.
#[derive(Debug, Clone)]
enum Drawer {
    Below(u64),
    TopBit,
    Cumulative(Vec<u64>),
}

impl Drawer {
    #[inline]
    fn index(&self, u: u64) -> u32 {
        match self {
            Drawer::Below(t) => (u < *t) as u32,
            Drawer::TopBit => (u >> 63) as u32,
            Drawer::Cumulative(cuts) => cuts.partition_point(|&c| c <= u) as u32,
        }
    }
}

/// How `xi_i` is computed from the base variables in `I_i` (before division by the scale).
#[derive(Debug, Clone, PartialEq)]
pub enum Summand {
    /// `prod_{alpha in I_i} x_alpha - prod E x_alpha`: k-run and subgraph-copy indicators.
    CenteredProduct,
    /// `prod (x_alpha - mu_alpha)`, plus `sum (x_alpha - mu_alpha)` when `linear`.
    UStatProduct { linear: bool },
    /// `x_alpha - mu_alpha` for a single-element index set.
    CenteredIdentity,
    /// Explicit values per summand, indexed in mixed radix over the sorted `I_i`
    /// (first element most significant).
    Table(Vec<Vec<f64>>),
}

impl Summand {
    pub fn name(&self) -> &'static str {
        match self {
            Summand::CenteredProduct => "builtin:centered-product",
            Summand::UStatProduct { linear: false } => "builtin:ustat-product",
            Summand::UStatProduct { linear: true } => "builtin:ustat-product-linear",
            Summand::CenteredIdentity => "builtin:centered-identity",
            Summand::Table(_) => "table",
        }
    }

    pub fn from_builtin_name(name: &str) -> Result<Summand> {
        let key = name.strip_prefix("builtin:").ok_or_else(|| {
            Error::Parse(format!("summand '{name}' must be 'builtin:<name>' or a table"))
        })?;
        match key {
            "kruns" | "subgraph-indicator" | "centered-product" => Ok(Summand::CenteredProduct),
            "ustat-product" => Ok(Summand::UStatProduct { linear: false }),
            "ustat-product-linear" => Ok(Summand::UStatProduct { linear: true }),
            "centered-identity" => Ok(Summand::CenteredIdentity),
            other => Err(Error::Parse(format!("unknown builtin summand '{other}'"))),
        }
    }
}

/// Where the bound `delta` on `|xi_i|` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaSource {
    /// Supplied by the caller; any valid bound is accepted.
    Asserted,
    /// Supremum over the joint support, by enumeration.
    Enumerated,
    /// Analytic upper bound used when enumeration is too large.
    Bounded,
}

/// `W = (1/scale) * sum_i raw_i(X_{I_i})` over independent base variables.
///
/// Immutable after construction; safe to share across sampling workers.
#[derive(Debug, Clone)]
pub struct LocalStatisticModel {
    base: Vec<BaseVariable>,
    index_sets: Vec<Vec<usize>>,
    summand: Summand,
    scale: f64,
    delta_bound: Option<f64>,
    means: Vec<f64>,
    centers: Vec<f64>,
    drawers: Vec<Drawer>,
    raw_sup: f64,
    raw_sup_source: DeltaSource,
}

impl LocalStatisticModel {
    /// Validates and builds a model with unit scale.
    ///
    /// Index sets are 0-based, sorted internally, and must be nonempty and duplicate-free.
    /// `E xi_i = 0` is verified by enumeration whenever the joint support of `I_i` has at
    /// most 2^16 points (always for tables).
    pub fn new(
        base: Vec<BaseVariable>,
        index_sets: Vec<Vec<usize>>,
        summand: Summand,
    ) -> Result<Self> {
        let m = base.len();
        if m == 0 {
            return Err(Error::InvalidModel("no base variables".into()));
        }
        if index_sets.is_empty() {
            return Err(Error::InvalidModel("no summands".into()));
        }
        for b in &base {
            b.validate()?;
        }
        let mut sets = Vec::with_capacity(index_sets.len());
        for (i, mut set) in index_sets.into_iter().enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidModel(format!("index set {i} is empty")));
            }
            set.sort_unstable();
            if set.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidModel(format!(
                    "index set {i} has duplicate entries"
                )));
            }
            if *set.last().unwrap() >= m {
                return Err(Error::InvalidModel(format!(
                    "index set {i} refers to base variable {} but m = {m}",
                    set.last().unwrap()
                )));
            }
            sets.push(set);
        }
        match &summand {
            Summand::CenteredIdentity => {
                if let Some(i) = sets.iter().position(|s| s.len() != 1) {
                    return Err(Error::InvalidModel(format!(
                        "centered-identity summand {i} needs a single base variable"
                    )));
                }
            }
            Summand::Table(tables) => {
                if tables.len() != sets.len() {
                    return Err(Error::InvalidModel(format!(
                        "{} value tables for {} summands",
                        tables.len(),
                        sets.len()
                    )));
                }
                for (i, (t, set)) in tables.iter().zip(&sets).enumerate() {
                    let want: usize = set.iter().map(|&a| base[a].support_len()).product();
                    if t.len() != want {
                        return Err(Error::InvalidModel(format!(
                            "table {i} has {} entries, expected {want}",
                            t.len()
                        )));
                    }
                    if t.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidModel(format!("table {i} has non-finite values")));
                    }
                }
            }
            _ => {}
        }

        let means: Vec<f64> = base.iter().map(BaseVariable::mean).collect();
        let centers = match &summand {
            Summand::CenteredProduct => sets
                .iter()
                .map(|set| set.iter().map(|&a| means[a]).product())
                .collect(),
            _ => Vec::new(),
        };
        let drawers = base.iter().map(BaseVariable::drawer).collect();
        let mut model = LocalStatisticModel {
            base,
            index_sets: sets,
            summand,
            scale: 1.0,
            delta_bound: None,
            means,
            centers,
            drawers,
            raw_sup: 0.0,
            raw_sup_source: DeltaSource::Enumerated,
        };
        model.check_centered_and_bound()?;
        Ok(model)
    }

    fn check_centered_and_bound(&mut self) -> Result<()> {
        let mut config = vec![0u32; self.m()];
        let mut sup = 0.0f64;
        let mut all_enumerated = true;
        for i in 0..self.n() {
            let size = self.joint_support_size(&self.index_sets[i]);
            let enumerable = matches!(self.summand, Summand::Table(_)) || size <= SUMMAND_ENUM_LIMIT;
            if enumerable {
                let set = self.index_sets[i].clone();
                let mut mean = crate::sum::CompensatedSum::new();
                let mut local_sup = 0.0f64;
                self.for_each_assignment(&set, &mut config, |cfg, prob| {
                    let v = self.raw_value(i, cfg);
                    mean.add(prob * v);
                    local_sup = local_sup.max(v.abs());
                });
                if mean.value().abs() > MEAN_ZERO_TOL {
                    return Err(Error::InvalidModel(format!(
                        "summand {i} has mean {} (must be 0)",
                        mean.value()
                    )));
                }
                sup = sup.max(local_sup);
            } else {
                all_enumerated = false;
                sup = sup.max(self.raw_sup_bound(i));
            }
        }
        self.raw_sup = sup;
        self.raw_sup_source = if all_enumerated {
            DeltaSource::Enumerated
        } else {
            DeltaSource::Bounded
        };
        Ok(())
    }

    /// Analytic bound on `sup |raw_i|` for summands too large to enumerate.
    fn raw_sup_bound(&self, i: usize) -> f64 {
        let set = &self.index_sets[i];
        match &self.summand {
            Summand::CenteredProduct => {
                // Extremes of a product over independent choices are attained at extreme
                // partial products.
                let (mut lo, mut hi) = (1.0f64, 1.0f64);
                for &a in set {
                    let b = &self.base[a];
                    let (mut nlo, mut nhi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for k in 0..b.support_len() as u32 {
                        let v = b.value(k);
                        for c in [lo * v, hi * v] {
                            nlo = nlo.min(c);
                            nhi = nhi.max(c);
                        }
                    }
                    lo = nlo;
                    hi = nhi;
                }
                let c = self.centers[i];
                (hi - c).abs().max((lo - c).abs())
            }
            Summand::UStatProduct { linear } => {
                let prod: f64 = set.iter().map(|&a| self.base[a].max_abs_centered()).product();
                let lin: f64 = if *linear {
                    set.iter().map(|&a| self.base[a].max_abs_centered()).sum()
                } else {
                    0.0
                };
                prod + lin
            }
            Summand::CenteredIdentity => self.base[set[0]].max_abs_centered(),
            Summand::Table(t) => t[i].iter().fold(0.0, |acc, v| acc.max(v.abs())),
        }
    }

    /// Returns the model with `W` divided by `scale` (replacing any previous scale).
    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidModel(format!("scale {scale} must be positive")));
        }
        self.scale = scale;
        Ok(self)
    }

    /// Attaches a caller-asserted almost-sure bound on `|xi_i|` (after scaling).
    pub fn with_delta_bound(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidModel(format!("delta bound {delta} must be positive")));
        }
        self.delta_bound = Some(delta);
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.base.len()
    }

    pub fn n(&self) -> usize {
        self.index_sets.len()
    }

    pub fn base(&self) -> &[BaseVariable] {
        &self.base
    }

    pub fn index_sets(&self) -> &[Vec<usize>] {
        &self.index_sets
    }

    pub fn index_set(&self, i: usize) -> &[usize] {
        &self.index_sets[i]
    }

    pub fn summand(&self) -> &Summand {
        &self.summand
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn delta_bound(&self) -> Option<f64> {
        self.delta_bound
    }

    /// Bound on `max_i |xi_i|`: the asserted value if present, else the computed supremum.
    pub fn delta(&self) -> (f64, DeltaSource) {
        match self.delta_bound {
            Some(d) => (d, DeltaSource::Asserted),
            None => (self.raw_sup / self.scale, self.raw_sup_source),
        }
    }

    /// Number of joint configurations of the listed base variables (saturating).
    pub fn joint_support_size(&self, vars: &[usize]) -> u64 {
        vars.iter()
            .fold(1u64, |acc, &a| acc.saturating_mul(self.base[a].support_len() as u64))
    }

    #[inline]
    fn raw_value(&self, i: usize, config: &[u32]) -> f64 {
        let set = &self.index_sets[i];
        match &self.summand {
            Summand::CenteredProduct => {
                let mut prod = 1.0;
                for &a in set {
                    prod *= self.base[a].value(config[a]);
                }
                prod - self.centers[i]
            }
            Summand::UStatProduct { linear } => {
                let mut prod = 1.0;
                for &a in set {
                    prod *= self.base[a].value(config[a]) - self.means[a];
                }
                if *linear {
                    let mut lin = 0.0;
                    for &a in set {
                        lin += self.base[a].value(config[a]) - self.means[a];
                    }
                    prod + lin
                } else {
                    prod
                }
            }
            Summand::CenteredIdentity => {
                let a = set[0];
                self.base[a].value(config[a]) - self.means[a]
            }
            Summand::Table(tables) => {
                let mut idx = 0usize;
                for &a in set {
                    idx = idx * self.base[a].support_len() + config[a] as usize;
                }
                tables[i][idx]
            }
        }
    }

    /// `xi_i` evaluated on a configuration of all base variables (only `I_i` is read).
    #[inline]
    pub fn summand_value(&self, i: usize, config: &[u32]) -> f64 {
        self.raw_value(i, config) / self.scale
    }

    /// `W` on a full configuration, summed in summand order.
    pub fn evaluate(&self, config: &[u32]) -> f64 {
        let mut w = 0.0;
        for i in 0..self.n() {
            w += self.summand_value(i, config);
        }
        w
    }

    /// Draws every base variable in index order, consuming exactly `m` `u64` draws.
    #[inline]
    pub fn draw_config<R: RngCore + ?Sized>(&self, rng: &mut R, config: &mut [u32]) {
        for (slot, d) in config.iter_mut().zip(&self.drawers) {
            *slot = d.index(rng.next_u64());
        }
    }

    /// Draws one sample of `W`. `config` must have length `m`.
    pub fn sample_w<R: RngCore + ?Sized>(&self, rng: &mut R, config: &mut [u32]) -> f64 {
        self.draw_config(rng, config);
        self.evaluate(config)
    }

    /// Visits every joint assignment of `vars` with its probability; entries of `config`
    /// outside `vars` are left untouched.
    pub fn for_each_assignment<F: FnMut(&[u32], f64)>(
        &self,
        vars: &[usize],
        config: &mut [u32],
        mut f: F,
    ) {
        for &a in vars {
            config[a] = 0;
        }
        // prefix[t] = probability of the first t coordinates of the odometer
        let mut prefix = vec![1.0; vars.len() + 1];
        for t in 0..vars.len() {
            prefix[t + 1] = prefix[t] * self.base[vars[t]].prob(0);
        }
        loop {
            f(config, prefix[vars.len()]);
            // advance the odometer, last coordinate fastest
            let mut t = vars.len();
            loop {
                if t == 0 {
                    return;
                }
                t -= 1;
                let a = vars[t];
                config[a] += 1;
                if (config[a] as usize) < self.base[a].support_len() {
                    break;
                }
                config[a] = 0;
            }
            for u in t..vars.len() {
                prefix[u + 1] = prefix[u] * self.base[vars[u]].prob(config[vars[u]]);
            }
        }
    }
}

/// On-disk model description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub m: usize,
    pub n: usize,
    pub base: Vec<BaseVariable>,
    pub index_sets: Vec<Vec<usize>>,
    pub summand: SummandFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SummandFile {
    Builtin(String),
    Table { table: Vec<Vec<f64>> },
}

impl ModelFile {
    pub fn into_model(self) -> Result<LocalStatisticModel> {
        if self.base.len() != self.m {
            return Err(Error::InvalidModel(format!(
                "m = {} but {} base variables given",
                self.m,
                self.base.len()
            )));
        }
        if self.index_sets.len() != self.n {
            return Err(Error::InvalidModel(format!(
                "n = {} but {} index sets given",
                self.n,
                self.index_sets.len()
            )));
        }
        let summand = match self.summand {
            SummandFile::Builtin(name) => Summand::from_builtin_name(&name)?,
            SummandFile::Table { table } => Summand::Table(table),
        };
        let mut model = LocalStatisticModel::new(self.base, self.index_sets, summand)?;
        if let Some(s) = self.scale {
            model = model.with_scale(s)?;
        }
        if let Some(d) = self.delta_bound {
            model = model.with_delta_bound(d)?;
        }
        Ok(model)
    }

    pub fn from_model(model: &LocalStatisticModel) -> Self {
        let summand = match model.summand() {
            Summand::Table(t) => SummandFile::Table { table: t.clone() },
            other => SummandFile::Builtin(other.name().to_string()),
        };
        ModelFile {
            m: model.m(),
            n: model.n(),
            base: model.base().to_vec(),
            index_sets: model.index_sets().to_vec(),
            summand,
            scale: (model.scale() != 1.0).then_some(model.scale()),
            delta_bound: model.delta_bound(),
        }
    }
}

/// Parses a JSON model description.
pub fn parse_model_json(text: &str) -> Result<LocalStatisticModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_model()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn bern(p: f64, m: usize) -> Vec<BaseVariable> {
        vec![BaseVariable::Bernoulli { p }; m]
    }

    #[test]
    fn rejects_empty_index_set() {
        let err = LocalStatisticModel::new(bern(0.5, 2), vec![vec![0], vec![]], Summand::CenteredProduct)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn rejects_out_of_range_and_bad_probabilities() {
        assert!(LocalStatisticModel::new(bern(0.5, 2), vec![vec![2]], Summand::CenteredProduct).is_err());
        assert!(LocalStatisticModel::new(bern(1.0, 2), vec![vec![0]], Summand::CenteredProduct).is_err());
        let bad = BaseVariable::Finite { support: vec![(0.0, 0.5), (1.0, 0.4)] };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rejects_uncentered_table() {
        let err = LocalStatisticModel::new(
            bern(0.5, 1),
            vec![vec![0]],
            Summand::Table(vec![vec![0.0, 1.0]]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn single_bernoulli_half_has_delta_half() {
        let model = LocalStatisticModel::new(bern(0.5, 1), vec![vec![0]], Summand::CenteredIdentity).unwrap();
        assert_eq!(model.delta(), (0.5, DeltaSource::Enumerated));
    }

    #[test]
    fn degenerate_base_gives_constant_w() {
        let base = vec![BaseVariable::Finite { support: vec![(3.0, 1.0)] }; 4];
        let model = LocalStatisticModel::new(base, (0..4).map(|a| vec![a]).collect(), Summand::CenteredIdentity).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut cfg = vec![0; 4];
        for _ in 0..100 {
            assert_eq!(model.sample_w(&mut rng, &mut cfg), 0.0);
        }
    }

    #[test]
    fn finite_drawer_frequencies() {
        let b = BaseVariable::Finite { support: vec![(-1.0, 0.2), (0.0, 0.5), (2.0, 0.3)] };
        let d = b.drawer();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0u32; 3];
        let reps = 200_000;
        for _ in 0..reps {
            counts[d.index(rng.next_u64()) as usize] += 1;
        }
        for (c, q) in counts.iter().zip([0.2, 0.5, 0.3]) {
            let phat = *c as f64 / reps as f64;
            assert!((phat - q).abs() < 5.0 * (q * (1.0 - q) / reps as f64).sqrt());
        }
    }

    #[test]
    fn odometer_visits_full_support_with_unit_mass() {
        let base = vec![
            BaseVariable::Bernoulli { p: 0.3 },
            BaseVariable::Finite { support: vec![(0.0, 0.1), (1.0, 0.2), (2.0, 0.7)] },
            BaseVariable::Rademacher,
        ];
        let model = LocalStatisticModel::new(base, vec![vec![0, 1, 2]], Summand::UStatProduct { linear: true }).unwrap();
        let mut cfg = vec![0; 3];
        let (mut count, mut mass) = (0, 0.0);
        model.for_each_assignment(&[0, 1, 2], &mut cfg, |_, p| {
            count += 1;
            mass += p;
        });
        assert_eq!(count, 12);
        assert!((mass - 1.0).abs() < 1e-15);
    }

    #[test]
    fn model_file_round_trip() {
        let text = r#"{"m":3,"n":3,"base":[{"kind":"bernoulli","p":0.3},{"kind":"bernoulli","p":0.3},{"kind":"bernoulli","p":0.3}],
            "index_sets":[[0,1],[1,2],[2,0]],"summand":"builtin:kruns","scale":2.0}"#;
        let model = parse_model_json(text).unwrap();
        assert_eq!(model.n(), 3);
        assert_eq!(model.index_set(2), &[0, 2]);
        let back = serde_json::to_string(&ModelFile::from_model(&model)).unwrap();
        let again = parse_model_json(&back).unwrap();
        assert_eq!(again.scale(), 2.0);
        assert_eq!(again.summand(), &Summand::CenteredProduct);

        let table = r#"{"m":1,"n":1,"base":[{"kind":"rademacher"}],"index_sets":[[0]],"summand":{"table":[[-1.5,1.5]]}}"#;
        let model = parse_model_json(table).unwrap();
        assert_eq!(model.delta().0, 1.5);
        assert!(parse_model_json(r#"{"m":1,"n":1,"base":[{"kind":"rademacher"}],"index_sets":[[0]],"summand":"builtin:exp"}"#).is_err());
    }
}

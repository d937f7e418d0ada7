use std::collections::BTreeSet;

use rand::RngCore;
use serde::Serialize;

use super::kruns::SigmaSource;
use crate::deps::build_dependency;
use crate::error::{Error, Result};
use crate::mc::{RngStream, Sampler};
use crate::model::{unit_to_u64, BaseVariable, LocalStatisticModel, Summand};
use crate::moments::variance_exact;
use crate::tails::{binomial, Pattern, MAX_PATTERN_VERTICES};

/// Largest vertex count for which copies are enumerated into a generic model.
pub const MAX_GENERIC_N: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgraphSpec {
    /// Number of vertices `N` of the random graph.
    pub n_vertices: usize,
    pub p: f64,
    pub pattern: Pattern,
}

/// Index of the pair `{a, b}` among the `C(N,2)` potential edges, pairs in lexicographic order.
pub fn edge_index(n_vertices: usize, a: usize, b: usize) -> usize {
    let (a, b) = (a.min(b), a.max(b));
    a * (2 * n_vertices - a - 1) / 2 + (b - a - 1)
}

fn permutations(v: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; v], &mut out);
    out
}

/// `|Aut(G)|` by brute force over all vertex permutations.
pub fn automorphism_count(pattern: &Pattern) -> usize {
    let edges: BTreeSet<(usize, usize)> = pattern.edges().iter().copied().collect();
    permutations(pattern.v())
        .into_iter()
        .filter(|perm| {
            pattern.edges().iter().all(|&(a, b)| {
                let (x, y) = (perm[a], perm[b]);
                edges.contains(&(x.min(y), x.max(y)))
            })
        })
        .count()
}

/// All copies of `pattern` in `K_N`, each as a sorted list of edge indices.
///
/// Copies are the images of injective vertex maps, deduplicated; their number is
/// `N!/(N-v)! / |Aut(G)|`.
pub fn enumerate_copies(n_vertices: usize, pattern: &Pattern) -> Result<Vec<Vec<usize>>> {
    if pattern.v() > MAX_PATTERN_VERTICES {
        return Err(Error::UnsupportedSize(format!("pattern has {} vertices", pattern.v())));
    }
    if n_vertices > MAX_GENERIC_N {
        return Err(Error::UnsupportedSize(format!(
            "copy enumeration limited to N <= {MAX_GENERIC_N}, got {n_vertices}"
        )));
    }
    if n_vertices < pattern.v() {
        return Err(Error::InvalidModel(format!(
            "N = {n_vertices} is smaller than v(G) = {}",
            pattern.v()
        )));
    }
    let v = pattern.v();
    let mut seen = BTreeSet::new();
    let mut map = vec![0usize; v];
    let mut used = vec![false; n_vertices];
    fn rec(
        depth: usize,
        map: &mut Vec<usize>,
        used: &mut Vec<bool>,
        n: usize,
        pattern: &Pattern,
        seen: &mut BTreeSet<Vec<usize>>,
    ) {
        if depth == map.len() {
            let mut copy: Vec<usize> = pattern
                .edges()
                .iter()
                .map(|&(a, b)| edge_index(n, map[a], map[b]))
                .collect();
            copy.sort_unstable();
            seen.insert(copy);
            return;
        }
        for x in 0..n {
            if !used[x] {
                used[x] = true;
                map[depth] = x;
                rec(depth + 1, map, used, n, pattern, seen);
                used[x] = false;
            }
        }
    }
    rec(0, &mut map, &mut used, n_vertices, pattern, &mut seen);
    Ok(seen.into_iter().collect())
}

/// `Var(S)` for edge and triangle counts.
pub fn subgraph_count_variance(n_vertices: usize, p: f64, pattern: &Pattern) -> Option<f64> {
    let n = n_vertices as f64;
    match (pattern.v(), pattern.e()) {
        (2, 1) => Some(binomial(n_vertices, 2) * p * (1.0 - p)),
        (3, 3) => {
            let p3 = p * p * p;
            // a triangle shares exactly one edge with 3(N-3) others
            Some(binomial(n_vertices, 3) * (p3 * (1.0 - p3) + 3.0 * (n - 3.0) * (p3 * p * p - p3 * p3)))
        }
        _ => None,
    }
}

/// Number of copies `|I| = N!/(N-v)! / |Aut(G)|`.
pub fn copy_count(n_vertices: usize, pattern: &Pattern) -> f64 {
    let falling: f64 = (0..pattern.v()).map(|i| (n_vertices - i) as f64).product();
    falling / automorphism_count(pattern) as f64
}

#[derive(Debug, Clone)]
pub struct Subgraph {
    pub spec: SubgraphSpec,
    /// Present when `N <= MAX_GENERIC_N`.
    pub model: Option<LocalStatisticModel>,
    pub copies: f64,
    pub sigma2: f64,
    pub sigma_source: SigmaSource,
    /// Present for edge and triangle patterns.
    pub sampler: Option<SubgraphSampler>,
}

pub fn build_subgraph(spec: SubgraphSpec) -> Result<Subgraph> {
    if !(spec.p > 0.0 && spec.p < 1.0) {
        return Err(Error::InvalidModel(format!("p = {} must lie in (0,1)", spec.p)));
    }
    if spec.pattern.v() > MAX_PATTERN_VERTICES {
        return Err(Error::UnsupportedSize(format!("pattern has {} vertices", spec.pattern.v())));
    }
    if spec.n_vertices < spec.pattern.v() {
        return Err(Error::InvalidModel(format!(
            "N = {} is smaller than v(G) = {}",
            spec.n_vertices,
            spec.pattern.v()
        )));
    }
    let kind = DirectKind::of(&spec.pattern);
    if spec.n_vertices > MAX_GENERIC_N && kind.is_none() {
        return Err(Error::UnsupportedSize(format!(
            "N = {} needs a specialised counter; only edge and triangle patterns have one",
            spec.n_vertices
        )));
    }
    let copies = copy_count(spec.n_vertices, &spec.pattern);
    let m = spec.n_vertices * (spec.n_vertices - 1) / 2;
    let (model, sigma2, sigma_source) = if spec.n_vertices <= MAX_GENERIC_N {
        let sets = enumerate_copies(spec.n_vertices, &spec.pattern)?;
        let raw = LocalStatisticModel::new(vec![BaseVariable::Bernoulli { p: spec.p }; m], sets, Summand::CenteredProduct)?;
        let deps = build_dependency(&raw)?;
        let sigma2 = variance_exact(&raw, &deps)?;
        (Some(raw.with_scale(sigma2.sqrt())?), sigma2, SigmaSource::ExactEnumeration)
    } else {
        let sigma2 = subgraph_count_variance(spec.n_vertices, spec.p, &spec.pattern)
            .expect("edge and triangle have closed-form variance");
        (None, sigma2, SigmaSource::Analytic)
    };
    let sampler = kind.map(|kind| SubgraphSampler {
        kind,
        n_vertices: spec.n_vertices,
        threshold: unit_to_u64(spec.p),
        mean: copies * spec.p.powi(spec.pattern.e() as i32),
        sigma: sigma2.sqrt(),
    });
    Ok(Subgraph {
        spec,
        model,
        copies,
        sigma2,
        sigma_source,
        sampler,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DirectKind {
    Edge,
    Triangle,
}

impl DirectKind {
    fn of(pattern: &Pattern) -> Option<Self> {
        match (pattern.v(), pattern.e()) {
            (2, 1) => Some(DirectKind::Edge),
            (3, 3) => Some(DirectKind::Triangle),
            _ => None,
        }
    }
}

/// Edge or triangle counts from bitset adjacency; `W = (S - E S) / sigma`.
///
/// Draws the `C(N,2)` edge indicators in edge-index order, like the generic model.
#[derive(Debug, Clone)]
pub struct SubgraphSampler {
    kind: DirectKind,
    n_vertices: usize,
    threshold: u64,
    mean: f64,
    sigma: f64,
}

impl SubgraphSampler {
    fn words(&self) -> usize {
        self.n_vertices.div_ceil(64)
    }

    /// Count of pattern copies in the graph drawn from `rng`.
    pub fn count(&self, rng: &mut RngStream, adj: &mut [u64]) -> u64 {
        let n = self.n_vertices;
        let words = self.words();
        adj.iter_mut().for_each(|w| *w = 0);
        let mut edges = 0u64;
        for a in 0..n {
            for b in a + 1..n {
                if rng.next_u64() < self.threshold {
                    adj[a * words + b / 64] |= 1 << (b % 64);
                    adj[b * words + a / 64] |= 1 << (a % 64);
                    edges += 1;
                }
            }
        }
        match self.kind {
            DirectKind::Edge => edges,
            DirectKind::Triangle => {
                let mut t = 0u64;
                for a in 0..n {
                    let row_a = &adj[a * words..(a + 1) * words];
                    for b in a + 1..n {
                        if row_a[b / 64] >> (b % 64) & 1 == 0 {
                            continue;
                        }
                        let row_b = &adj[b * words..(b + 1) * words];
                        // common neighbours c > b
                        for w in b / 64..words {
                            let mut common = row_a[w] & row_b[w];
                            if w == b / 64 {
                                let shift = b % 64 + 1;
                                common = if shift == 64 { 0 } else { common >> shift << shift };
                            }
                            t += common.count_ones() as u64;
                        }
                    }
                }
                t
            }
        }
    }
}

impl Sampler for SubgraphSampler {
    type Scratch = Vec<u64>;

    fn scratch(&self) -> Vec<u64> {
        vec![0; self.n_vertices * self.words()]
    }

    fn draws_per_sample(&self) -> usize {
        self.n_vertices * (self.n_vertices - 1) / 2
    }

    fn sample(&self, rng: &mut RngStream, scratch: &mut Vec<u64>) -> f64 {
        (self.count(rng, scratch) as f64 - self.mean) / self.sigma
    }
}

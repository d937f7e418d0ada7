//! Builders and direct samplers for circular k-runs, U-statistics, subgraph counts and
//! standardized i.i.d. sums.

pub mod iid;
pub mod kruns;
pub mod subgraph;
pub mod ustat;

pub use iid::{iid_model, IidModel};
pub use kruns::{build_kruns, build_kruns_with, KRuns, KRunsSampler, KRunsSpec, SigmaMethod, SigmaSource};
pub use subgraph::{build_subgraph, Subgraph, SubgraphSampler, SubgraphSpec};
pub use ustat::{build_ustat, UStat, UStatKernel, UStatSampler, UStatSpec};

//! Scenario partitions and their refinement.
//!
//! Each stage `t >= 2` carries a partition of its realization indices into
//! clusters. A cluster's aggregated data is the plain (unweighted) sum of
//! its members' technology matrices and right-hand sides; the aggregated
//! subproblem built from those sums with weight `|P|` is a relaxation of the
//! member subproblems combined, which is what makes coarse cuts valid.
//!
//! Refinement groups a cluster's members by the dual solutions of their
//! scenario subproblems: members whose signatures lie within a Euclidean
//! distance threshold of a group's first member stay together. Splits
//! replace clusters in place, so cluster order is stable and a partition
//! only ever gets finer.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{ScenarioLattice, StageData};

/// One cluster of realization indices with pre-aggregated data.
#[derive(Clone, Debug)]
pub struct Cluster {
    /// Member realization indices, in increasing order.
    pub members: Vec<usize>,
    /// Total probability mass of the members.
    pub mass: f64,
    /// Plain sum of member technology matrices.
    pub tech: DMatrix<f64>,
    /// Plain sum of member right-hand sides.
    pub rhs: DVector<f64>,
}

impl Cluster {
    /// Aggregate the given members of a stage.
    pub fn aggregate(stage: &StageData, members: Vec<usize>) -> Self {
        let first = &stage.realizations[members[0]];
        let mut tech = DMatrix::zeros(first.tech.nrows(), first.tech.ncols());
        let mut rhs = DVector::zeros(first.rhs.len());
        let mut mass = 0.0;
        for &k in &members {
            let r = &stage.realizations[k];
            tech += &r.tech;
            rhs += &r.rhs;
            mass += r.probability;
        }
        Cluster {
            members,
            mass,
            tech,
            rhs,
        }
    }

    /// Number of aggregated scenarios.
    pub fn weight(&self) -> usize {
        self.members.len()
    }

    /// Member-averaged technology matrix (aggregate divided by weight).
    pub fn mean_tech(&self) -> DMatrix<f64> {
        &self.tech / self.weight() as f64
    }

    /// Member-averaged right-hand side.
    pub fn mean_rhs(&self) -> DVector<f64> {
        &self.rhs / self.weight() as f64
    }
}

/// Dual solution of one scenario subproblem, used to decide which cluster
/// members can stay aggregated.
#[derive(Clone, Debug)]
pub struct DualSignature {
    pub eq: DVector<f64>,
    pub ineq: Vec<f64>,
}

impl DualSignature {
    /// Euclidean norm of the concatenated signature.
    pub fn norm(&self) -> f64 {
        let s: f64 = self.eq.iter().map(|v| v * v).sum::<f64>()
            + self.ineq.iter().map(|v| v * v).sum::<f64>();
        s.sqrt()
    }

    /// Euclidean distance to another signature of the same shape.
    pub fn distance(&self, other: &DualSignature) -> f64 {
        let mut s = 0.0;
        for (a, b) in self.eq.iter().zip(other.eq.iter()) {
            s += (a - b) * (a - b);
        }
        for (a, b) in self.ineq.iter().zip(&other.ineq) {
            s += (a - b) * (a - b);
        }
        s.sqrt()
    }
}

/// Partition of one stage's realization indices.
#[derive(Clone, Debug)]
pub struct Partition {
    stage: usize,
    clusters: Vec<Cluster>,
    /// Bumped on every refinement call; stamped into cuts.
    version: u64,
}

impl Partition {
    /// Single cluster holding every realization.
    pub fn all_in_one(stage: &StageData) -> Self {
        let members: Vec<usize> = (0..stage.realizations.len()).collect();
        Partition {
            stage: stage.index,
            clusters: vec![Cluster::aggregate(stage, members)],
            version: 0,
        }
    }

    /// One cluster per realization (the fine partition).
    pub fn singletons(stage: &StageData) -> Self {
        Partition {
            stage: stage.index,
            clusters: (0..stage.realizations.len())
                .map(|k| Cluster::aggregate(stage, vec![k]))
                .collect(),
            version: 0,
        }
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// True once every cluster is a singleton.
    pub fn is_fine(&self) -> bool {
        self.clusters.iter().all(|c| c.weight() == 1)
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Cluster::weight).collect()
    }

    /// Refine every cluster covered by `signatures` (keyed by realization
    /// index): members are processed in ascending order and each joins the
    /// first group whose founding member's signature lies within Euclidean
    /// distance `eps` (an absolute threshold — callers wanting scale-free
    /// behaviour fold `1 + max norm` into it), otherwise founds a new group.
    /// Groups replace their cluster in place; clusters with no signatures
    /// are left alone, and a partially covered cluster is an error. The
    /// version always increments. Returns whether any cluster split.
    pub fn refine_absolute(
        &mut self,
        stage: &StageData,
        signatures: &BTreeMap<usize, DualSignature>,
        eps: f64,
    ) -> Result<bool> {
        // Validate coverage before touching anything.
        for c in &self.clusters {
            let covered = c.members.iter().filter(|k| signatures.contains_key(k)).count();
            if covered != 0 && covered != c.members.len() {
                return Err(Error::Model(format!(
                    "signatures cover {} of {} members of a cluster",
                    covered,
                    c.members.len()
                )));
            }
        }
        let mut any_split = false;
        for idx in (0..self.clusters.len()).rev() {
            let cluster = &self.clusters[idx];
            if cluster.weight() == 1 || !signatures.contains_key(&cluster.members[0]) {
                continue;
            }
            let mut groups: Vec<Vec<usize>> = Vec::new();
            let mut leaders: Vec<&DualSignature> = Vec::new();
            for &member in &cluster.members {
                let sig = &signatures[&member];
                match leaders.iter().position(|l| l.distance(sig) <= eps) {
                    Some(g) => groups[g].push(member),
                    None => {
                        groups.push(vec![member]);
                        leaders.push(sig);
                    }
                }
            }
            if groups.len() > 1 {
                let replacement: Vec<Cluster> = groups
                    .into_iter()
                    .map(|members| Cluster::aggregate(stage, members))
                    .collect();
                self.clusters.splice(idx..=idx, replacement);
                any_split = true;
            }
        }
        self.version += 1;
        Ok(any_split)
    }

    /// Check that the clusters exactly cover `0..realization_count`.
    pub fn validate(&self, realization_count: usize) -> Result<()> {
        let mut seen = vec![false; realization_count];
        for c in &self.clusters {
            if c.members.is_empty() {
                return Err(Error::Model("empty cluster".into()));
            }
            for &k in &c.members {
                if k >= realization_count {
                    return Err(Error::Model(format!("member {k} out of range")));
                }
                if seen[k] {
                    return Err(Error::Model(format!("member {k} in two clusters")));
                }
                seen[k] = true;
            }
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::Model(
                "partition does not cover all realizations".into(),
            ));
        }
        Ok(())
    }
}

/// Average over stages `2..=T` of `clusters / realizations`, the size of the
/// coarse tree relative to the original tree. 1 means fully refined.
pub fn coarse_tree_size(partitions: &[Partition], lattice: &ScenarioLattice) -> f64 {
    let horizon = lattice.horizon();
    if horizon < 2 {
        return 1.0;
    }
    let mut total = 0.0;
    for p in partitions {
        let count = lattice.stage(p.stage()).realizations.len();
        total += p.len() as f64 / count as f64;
    }
    total / (horizon - 1) as f64
}

//! The multi-level cluster tree and label extraction.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coarsen::Solver;
use crate::dataset::{Metric, PointSet};
use crate::error::{Error, Result};

/// A node of the hierarchy. Level-0 nodes are the deduplicated input points;
/// a node at level `l > 0` absorbs its `member_ids` from level `l - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterNode {
    pub id: usize,
    pub level: usize,
    pub coords: Vec<f64>,
    pub weight: f64,
    pub member_ids: Vec<usize>,
}

/// Borrowed node list viewed as a point set.
pub struct NodeSet<'a> {
    nodes: &'a [ClusterNode],
    dim: usize,
    metric: Metric,
}

impl<'a> NodeSet<'a> {
    pub fn new(nodes: &'a [ClusterNode], metric: Metric) -> Self {
        let dim = nodes.first().map_or(0, |n| n.coords.len());
        Self { nodes, dim, metric }
    }
}

impl PointSet for NodeSet<'_> {
    fn len(&self) -> usize {
        self.nodes.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn metric(&self) -> Metric {
        self.metric
    }

    fn coords(&self, idx: usize) -> &[f64] {
        &self.nodes[idx].coords
    }

    fn weight(&self, idx: usize) -> f64 {
        self.nodes[idx].weight
    }
}

/// User parameters of a hierarchy run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub eps0: f64,
    pub alpha: f64,
    pub kappa: usize,
    pub solver: Solver,
    pub seed: u64,
    pub max_levels: usize,
    pub use_centroids: bool,
    /// Relative penalty margin of the annealing route.
    pub gamma: f64,
    pub sweeps: usize,
    pub restarts: usize,
}

impl TreeParams {
    pub const DEFAULT_MAX_LEVELS: usize = 64;

    pub fn new(eps0: f64, alpha: f64, kappa: usize) -> Self {
        Self {
            eps0,
            alpha,
            kappa,
            solver: Solver::Greedy,
            seed: 0,
            max_levels: Self::DEFAULT_MAX_LEVELS,
            use_centroids: true,
            gamma: crate::qubo::DEFAULT_GAMMA,
            sweeps: crate::qubo::AnnealSchedule::DEFAULT_SWEEPS,
            restarts: crate::qubo::AnnealSchedule::DEFAULT_RESTARTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return bad(format!("eps0 must be positive, got {}", self.eps0));
        }
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must exceed 1, got {}", self.alpha));
        }
        if self.kappa < 2 {
            return bad(format!("kappa must be at least 2, got {}", self.kappa));
        }
        if self.max_levels == 0 {
            return bad("max_levels must be positive".into());
        }
        Ok(())
    }

    /// Radius used to build level `level >= 1`.
    pub fn epsilon_at(&self, level: usize) -> f64 {
        self.eps0 * self.alpha.powi(level as i32 - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeStatus {
    /// Collapsed to a single root.
    Complete,
    /// Stopped at the level limit with more than one node left.
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeMetadata {
    pub params: TreeParams,
    pub metric: Metric,
    pub dataset_hash: String,
    pub n_points: usize,
    pub n_levels: usize,
    pub status: TreeStatus,
    pub root_id: Option<usize>,
    /// Radius that produced each level from 1 on.
    pub epsilons: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TreeDocument {
    metadata: TreeMetadata,
    /// Leaf node of every input point, in input order.
    point_leaf: Vec<usize>,
    nodes: Vec<ClusterNode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTree {
    pub(crate) metadata: TreeMetadata,
    pub(crate) point_leaf: Vec<usize>,
    pub(crate) nodes: Vec<ClusterNode>,
    pub(crate) levels: Vec<Vec<usize>>,
}

/// Label of every input point at one level of the tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusteringAssignment {
    /// Indexed by input point; values are node ids at `level`.
    pub labels: Vec<usize>,
    pub level: usize,
    pub n_clusters: usize,
}

impl ClusterTree {
    /// Assembles a tree from a flat node list, checking its structure.
    pub fn from_parts(
        metadata: TreeMetadata,
        point_leaf: Vec<usize>,
        nodes: Vec<ClusterNode>,
    ) -> Result<Self> {
        let invalid = |m: String| Err(Error::Validation(m));
        let mut levels: Vec<Vec<usize>> = Vec::new();
        for (pos, node) in nodes.iter().enumerate() {
            if node.id != pos {
                return invalid(format!("node at position {pos} has id {}", node.id));
            }
            if node.level >= levels.len() {
                if node.level != levels.len() {
                    return invalid(format!(
                        "level {} appears before its predecessor",
                        node.level
                    ));
                }
                levels.push(Vec::new());
            }
            if node.level + 1 != levels.len() {
                return invalid(format!("node {pos} is out of level order"));
            }
            levels[node.level].push(node.id);
            for &m in &node.member_ids {
                if m >= nodes.len() || nodes[m].level + 1 != node.level {
                    return invalid(format!("node {pos} lists invalid member {m}"));
                }
            }
            if node.level == 0 && !node.member_ids.is_empty() {
                return invalid(format!("leaf {pos} has members"));
            }
        }
        if levels.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(&leaf) = point_leaf.iter().find(|&&l| l >= levels[0].len()) {
            return invalid(format!("point maps to non-leaf node {leaf}"));
        }
        Ok(Self {
            metadata,
            point_leaf,
            nodes,
            levels,
        })
    }

    pub fn metadata(&self) -> &TreeMetadata {
        &self.metadata
    }

    pub fn params(&self) -> &TreeParams {
        &self.metadata.params
    }

    pub fn status(&self) -> TreeStatus {
        self.metadata.status
    }

    pub fn nodes(&self) -> &[ClusterNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &ClusterNode {
        &self.nodes[id]
    }

    /// Number of levels including the leaf level.
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, level: usize) -> &[usize] {
        &self.levels[level]
    }

    pub fn levels(&self) -> &[Vec<usize>] {
        &self.levels
    }

    pub fn root_id(&self) -> Option<usize> {
        self.metadata.root_id
    }

    pub fn n_points(&self) -> usize {
        self.point_leaf.len()
    }

    pub fn point_leaf(&self) -> &[usize] {
        &self.point_leaf
    }

    pub fn level_weight(&self, level: usize) -> f64 {
        self.levels[level]
            .iter()
            .map(|&id| self.nodes[id].weight)
            .sum()
    }

    /// Labels every input point by the level-`level` node it ends up in.
    pub fn labels_at_level(&self, level: usize) -> Result<ClusteringAssignment> {
        if level >= self.levels.len() {
            return Err(Error::LevelOutOfRange {
                level,
                max: self.levels.len() - 1,
            });
        }
        let n_leaves = self.levels[0].len();
        let mut leaf_label = vec![usize::MAX; n_leaves];
        let mut stack = Vec::new();
        for &top in &self.levels[level] {
            stack.push(top);
            while let Some(id) = stack.pop() {
                let node = &self.nodes[id];
                if node.level == 0 {
                    leaf_label[id] = top;
                } else {
                    stack.extend_from_slice(&node.member_ids);
                }
            }
        }
        let labels: Vec<usize> = self.point_leaf.iter().map(|&l| leaf_label[l]).collect();
        if labels.contains(&usize::MAX) {
            return Err(Error::Validation(format!(
                "level {level} does not cover every leaf"
            )));
        }
        Ok(ClusteringAssignment {
            labels,
            level,
            n_clusters: self.levels[level].len(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = TreeDocument {
            metadata: self.metadata.clone(),
            point_leaf: self.point_leaf.clone(),
            nodes: self.nodes.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TreeDocument = serde_json::from_str(text)?;
        Self::from_parts(doc.metadata, doc.point_leaf, doc.nodes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

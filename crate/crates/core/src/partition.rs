//! Recursive median-cut partitioning into chunks of bounded cardinality.

use serde::{Deserialize, Serialize};

use crate::dataset::PointSet;
use crate::error::{Error, Result};

/// Below this size the recursion stays on the current thread.
const PARALLEL_SPLIT_MIN: usize = 4096;

/// A block of the partition, holding positions into a [`PointSet`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub member_ids: Vec<usize>,
}

impl Chunk {
    pub fn new(member_ids: Vec<usize>) -> Self {
        Self { member_ids }
    }

    pub fn len(&self) -> usize {
        self.member_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionConfig {
    /// Maximum chunk cardinality.
    pub kappa: usize,
}

impl PartitionConfig {
    pub fn new(kappa: usize) -> Result<Self> {
        if kappa == 0 {
            return Err(Error::InvalidParameter("kappa must be at least 1".into()));
        }
        Ok(Self { kappa })
    }
}

/// Axis with the largest coordinate variance over `ids`; ties go to the lowest axis.
pub fn max_variance_axis<P: PointSet + ?Sized>(ps: &P, ids: &[usize]) -> usize {
    let n = ids.len() as f64;
    let mut best = (0, f64::NEG_INFINITY);
    for axis in 0..ps.dim() {
        let mean = ids.iter().map(|&i| ps.coords(i)[axis]).sum::<f64>() / n;
        let var = ids
            .iter()
            .map(|&i| {
                let d = ps.coords(i)[axis] - mean;
                d * d
            })
            .sum::<f64>()
            / n;
        if var > best.1 {
            best = (axis, var);
        }
    }
    best.0
}

fn bisect<P: PointSet + ?Sized>(ps: &P, mut ids: Vec<usize>) -> (Vec<usize>, Vec<usize>) {
    let axis = max_variance_axis(ps, &ids);
    let left_len = ids.len().div_ceil(2);
    // Ordering by (coordinate, id) sends median-equal points to whichever side
    // still has room, lower ids first.
    ids.select_nth_unstable_by(left_len - 1, |&a, &b| {
        ps.coords(a)[axis]
            .total_cmp(&ps.coords(b)[axis])
            .then(a.cmp(&b))
    });
    let mut right = ids.split_off(left_len);
    ids.sort_unstable();
    right.sort_unstable();
    (ids, right)
}

/// Splits a chunk at the median of its maximum-variance axis into two halves
/// whose sizes differ by at most one (the first half takes the extra point).
pub fn split_chunk<P: PointSet + ?Sized>(ps: &P, chunk: &Chunk) -> Result<(Chunk, Chunk)> {
    if chunk.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "cannot split a chunk of {} point(s)",
            chunk.len()
        )));
    }
    let (left, right) = bisect(ps, chunk.member_ids.clone());
    Ok((Chunk::new(left), Chunk::new(right)))
}

fn recurse<P: PointSet + ?Sized>(ps: &P, ids: Vec<usize>, kappa: usize) -> Vec<Chunk> {
    if ids.len() <= kappa {
        return vec![Chunk::new(ids)];
    }
    let big = ids.len() >= PARALLEL_SPLIT_MIN;
    let (left, right) = bisect(ps, ids);
    let (mut a, b) = if big {
        rayon::join(|| recurse(ps, left, kappa), || recurse(ps, right, kappa))
    } else {
        (recurse(ps, left, kappa), recurse(ps, right, kappa))
    };
    a.extend(b);
    a
}

/// Recursively bisects `node_ids` until every chunk holds at most `kappa`
/// points. Chunks are returned in left-to-right leaf order of the split tree,
/// which is independent of the thread count.
pub fn partition<P: PointSet + ?Sized>(
    ps: &P,
    node_ids: &[usize],
    cfg: PartitionConfig,
) -> Vec<Chunk> {
    if node_ids.is_empty() {
        return Vec::new();
    }
    let mut ids = node_ids.to_vec();
    ids.sort_unstable();
    recurse(ps, ids, cfg.kappa.max(1))
}

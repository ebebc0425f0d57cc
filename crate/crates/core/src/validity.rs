//! Internal validity indices: Calinski–Harabasz and Davies–Bouldin.
//!
//! Both scores treat every input point with unit weight and use plain
//! cluster cardinalities, so duplicates count once per occurrence.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{PointSet, WeightedDataset};
use crate::error::{Error, Result};
use crate::tree::ClusteringAssignment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreName {
    CalinskiHarabasz,
    DaviesBouldin,
}

impl ScoreName {
    pub const ALL: [ScoreName; 2] = [ScoreName::CalinskiHarabasz, ScoreName::DaviesBouldin];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreName::CalinskiHarabasz => "calinski_harabasz",
            ScoreName::DaviesBouldin => "davies_bouldin",
        }
    }
}

impl fmt::Display for ScoreName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScoreName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "calinski_harabasz" | "ch" => Ok(ScoreName::CalinskiHarabasz),
            "davies_bouldin" | "db" => Ok(ScoreName::DaviesBouldin),
            other => Err(Error::InvalidParameter(format!("unknown score '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub score_name: ScoreName,
    pub value: f64,
    pub n_clusters: usize,
    pub n_points: usize,
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.score_name, self.value, self.n_clusters)
    }
}

struct Clusters {
    /// Member positions per cluster, in ascending label order.
    members: Vec<Vec<usize>>,
    centroids: Vec<Vec<f64>>,
}

fn group<L: Ord>(ds: &WeightedDataset, labels: &[L]) -> Result<Clusters> {
    if labels.len() != ds.len() {
        return Err(Error::DimensionMismatch {
            expected: ds.len(),
            found: labels.len(),
        });
    }
    let mut by_label: BTreeMap<&L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }
    let members: Vec<Vec<usize>> = by_label.into_values().collect();
    let centroids = members
        .iter()
        .map(|m| {
            let mut c = vec![0.0; ds.dim()];
            for &i in m {
                for (acc, x) in c.iter_mut().zip(ds.coords(i)) {
                    *acc += x;
                }
            }
            c.iter_mut().for_each(|v| *v /= m.len() as f64);
            c
        })
        .collect();
    Ok(Clusters { members, centroids })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Calinski–Harabasz index; `c` is the mean of the cluster centroids.
pub fn calinski_harabasz<L: Ord>(ds: &WeightedDataset, labels: &[L]) -> Result<f64> {
    let cl = group(ds, labels)?;
    let (n, k) = (ds.len(), cl.members.len());
    if k < 2 || k >= n {
        return Err(Error::UndefinedScore(format!(
            "calinski_harabasz needs 2 <= clusters < points, got {k} clusters for {n} points"
        )));
    }
    let mut c = vec![0.0; ds.dim()];
    for ck in &cl.centroids {
        for (acc, x) in c.iter_mut().zip(ck) {
            *acc += x / k as f64;
        }
    }
    let between: f64 = cl
        .members
        .iter()
        .zip(&cl.centroids)
        .map(|(m, ck)| m.len() as f64 * sq_dist(ck, &c))
        .sum();
    let within: f64 = cl
        .members
        .iter()
        .zip(&cl.centroids)
        .map(|(m, ck)| m.iter().map(|&i| sq_dist(ds.coords(i), ck)).sum::<f64>())
        .sum();
    if within == 0.0 {
        return Err(Error::UndefinedScore(
            "calinski_harabasz is unbounded: every cluster has zero dispersion".into(),
        ));
    }
    Ok((n - 1) as f64 / (k - 1) as f64 * between / within)
}

/// Davies–Bouldin index with mean (non-squared) intra-cluster distances.
pub fn davies_bouldin<L: Ord>(ds: &WeightedDataset, labels: &[L]) -> Result<f64> {
    let cl = group(ds, labels)?;
    let k = cl.members.len();
    if k < 2 {
        return Err(Error::UndefinedScore(format!(
            "davies_bouldin needs at least 2 clusters, got {k}"
        )));
    }
    let metric = ds.metric();
    let spread: Vec<f64> = cl
        .members
        .iter()
        .zip(&cl.centroids)
        .map(|(m, ck)| {
            m.iter()
                .map(|&i| metric.eval(ds.coords(i), ck))
                .sum::<f64>()
                / m.len() as f64
        })
        .collect();
    let mut total = 0.0;
    for a in 0..k {
        let mut worst = 0.0f64;
        for b in (0..k).filter(|&b| b != a) {
            let sep = metric.eval(&cl.centroids[a], &cl.centroids[b]);
            if sep == 0.0 {
                return Err(Error::UndefinedScore(format!(
                    "davies_bouldin: clusters {a} and {b} have coincident centroids"
                )));
            }
            worst = worst.max((spread[a] + spread[b]) / sep);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

pub fn score(
    ds: &WeightedDataset,
    assignment: &ClusteringAssignment,
    which: ScoreName,
) -> Result<ScoreReport> {
    score_labels(ds, &assignment.labels, which)
}

pub fn score_labels<L: Ord>(
    ds: &WeightedDataset,
    labels: &[L],
    which: ScoreName,
) -> Result<ScoreReport> {
    let value = match which {
        ScoreName::CalinskiHarabasz => calinski_harabasz(ds, labels)?,
        ScoreName::DaviesBouldin => davies_bouldin(ds, labels)?,
    };
    let n_clusters = labels
        .iter()
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    Ok(ScoreReport {
        score_name: which,
        value,
        n_clusters,
        n_points: ds.len(),
    })
}

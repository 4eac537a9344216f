//! Complete-linkage agglomerative clustering of accuracy profiles.

use serde::{Deserialize, Serialize};

use super::SummaryTable;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterOptions {
    /// Z-score each feature before computing distances.
    pub standardize: bool,
}

/// One agglomeration step. Leaves are `0..n`; the node created by merge `m`
/// has id `n + m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub athletes: Vec<String>,
    /// Cluster label `1..=k` per athlete, numbered by first appearance.
    pub labels: Vec<usize>,
    /// Full merge tree (`n - 1` merges).
    pub merges: Vec<Merge>,
    /// Athletes left out for missing cells.
    pub excluded: Vec<String>,
}

impl ClusterAssignment {
    pub fn label_of(&self, athlete: &str) -> Option<usize> {
        self.athletes.iter().position(|a| a == athlete).map(|i| self.labels[i])
    }
}

pub fn cluster_athletes(t: &SummaryTable, k: usize) -> Result<ClusterAssignment> {
    cluster_athletes_with(t, k, ClusterOptions::default())
}

/// Clusters athletes on their six accuracies (prone, standing, individual,
/// sprint, pursuit, mass start) by Euclidean complete linkage.
pub fn cluster_athletes_with(t: &SummaryTable, k: usize, opts: ClusterOptions) -> Result<ClusterAssignment> {
    let mut athletes = Vec::new();
    let mut features = Vec::new();
    let mut excluded = Vec::new();
    for row in &t.rows {
        let cells: Option<Vec<f64>> = row.position.iter().chain(&row.race).map(|c| c.map(|r| r.value())).collect();
        match cells {
            Some(f) => {
                athletes.push(row.athlete.clone());
                features.push(f);
            }
            None => excluded.push(row.athlete.clone()),
        }
    }
    if opts.standardize {
        standardize(&mut features);
    }
    let (merges, labels) = complete_linkage(&features, k)?;
    Ok(ClusterAssignment {
        athletes,
        labels,
        merges,
        excluded,
    })
}

fn standardize(features: &mut [Vec<f64>]) {
    let n = features.len();
    if n < 2 {
        return;
    }
    for j in 0..features[0].len() {
        let mean = features.iter().map(|f| f[j]).sum::<f64>() / n as f64;
        let var = features.iter().map(|f| (f[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for f in features.iter_mut() {
            f[j] = (f[j] - mean) / sd;
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Merge tree over `points` and the labels from cutting it at `k` clusters.
/// Equal distances go to the pair with the lowest node ids.
pub(crate) fn complete_linkage(points: &[Vec<f64>], k: usize) -> Result<(Vec<Merge>, Vec<usize>)> {
    let n = points.len();
    if k < 1 || k > n {
        return Err(Error::OutOfRange(format!("{k} clusters from {n} athletes")));
    }
    // active node ids with their members, and distances between active nodes
    let mut nodes: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut dist: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| euclidean(&points[i], &points[j])).collect()).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut labels_at_k = None;
    if k == n {
        labels_at_k = Some(cut(&nodes, n));
    }
    while nodes.len() > 1 {
        let mut best = (0, 1, f64::INFINITY);
        for a in 0..nodes.len() {
            for b in a + 1..nodes.len() {
                if dist[a][b] < best.2 {
                    best = (a, b, dist[a][b]);
                }
            }
        }
        let (a, b, h) = best;
        let (id_a, id_b) = (nodes[a].0, nodes[b].0);
        let mut members = nodes[a].1.clone();
        members.extend(&nodes[b].1);
        merges.push(Merge {
            left: id_a.min(id_b),
            right: id_a.max(id_b),
            height: h,
            size: members.len(),
        });
        // new node replaces `a`; `b` is removed
        let merged: Vec<f64> = (0..nodes.len()).map(|c| dist[a][c].max(dist[b][c])).collect();
        for c in 0..nodes.len() {
            dist[a][c] = merged[c];
            dist[c][a] = merged[c];
        }
        dist[a][a] = 0.0;
        nodes[a] = (n + merges.len() - 1, members);
        nodes.remove(b);
        dist.remove(b);
        for row in dist.iter_mut() {
            row.remove(b);
        }
        if nodes.len() == k {
            labels_at_k = Some(cut(&nodes, n));
        }
    }
    Ok((merges, labels_at_k.expect("k within 1..=n")))
}

fn cut(nodes: &[(usize, Vec<usize>)], n: usize) -> Vec<usize> {
    let mut cluster_of = vec![0; n];
    for (c, (_, members)) in nodes.iter().enumerate() {
        for &m in members {
            cluster_of[m] = c;
        }
    }
    let mut relabel = vec![0; nodes.len()];
    let mut next = 1;
    (0..n)
        .map(|i| {
            let c = cluster_of[i];
            if relabel[c] == 0 {
                relabel[c] = next;
                next += 1;
            }
            relabel[c]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_cluster_and_identical_profiles() {
        let pts = vec![vec![0.5; 6], vec![0.5; 6], vec![0.9; 6]];
        let (merges, labels) = complete_linkage(&pts, 1).unwrap();
        assert_eq!(labels, vec![1, 1, 1]);
        assert_eq!(merges[0], Merge { left: 0, right: 1, height: 0.0, size: 2 });
        assert_eq!((merges[1].left, merges[1].right), (2, 3));
        let (_, labels) = complete_linkage(&pts, 2).unwrap();
        assert_eq!(labels, vec![1, 1, 2]);
    }

    #[test]
    fn complete_linkage_uses_farthest_members() {
        // 0 and 1 merge at 1; 2 is 1.5 from 1 and 2.5 from 0
        let pts = vec![vec![0.0], vec![1.0], vec![2.5], vec![10.0]];
        let (m, _) = complete_linkage(&pts, 1).unwrap();
        assert_eq!(m[0].height, 1.0);
        assert_eq!(m[1], Merge { left: 2, right: 4, height: 2.5, size: 3 });
        assert_eq!(m[2].height, 10.0);
    }

    #[test]
    fn ties_go_to_lowest_ids() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let (m, _) = complete_linkage(&pts, 1).unwrap();
        assert_eq!((m[0].left, m[0].right), (0, 1));
    }

    #[test]
    fn too_many_clusters() {
        assert!(complete_linkage(&[vec![0.0]], 2).is_err());
        assert!(complete_linkage(&[vec![0.0]], 0).is_err());
        assert_eq!(complete_linkage(&[vec![0.0], vec![1.0]], 2).unwrap().1, vec![1, 2]);
    }
}

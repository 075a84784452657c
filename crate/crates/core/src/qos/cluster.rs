use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EngineId, QosSample};

const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Sorted engine ids.
    pub members: Vec<EngineId>,
    /// Centroid in z-score space: (latency, bandwidth).
    pub centroid: (f64, f64),
    /// Mean raw latency and bandwidth of the members.
    pub raw_centroid: QosSample,
}

impl Cluster {
    pub fn contains(&self, engine: &str) -> bool {
        self.members.iter().any(|m| m == engine)
    }

    /// True if this centroid has strictly higher latency and strictly lower
    /// bandwidth than `other`.
    pub fn dominated_by(&self, other: &Cluster) -> bool {
        self.raw_centroid.latency_s > other.raw_centroid.latency_s
            && self.raw_centroid.bandwidth_mbps < other.raw_centroid.bandwidth_mbps
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KMeansTrace {
    /// Within-cluster sum of squares after each assignment step.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// k-means over z-score normalized (latency, bandwidth).
///
/// Seeding is deterministic: the first centre is the engine with the
/// smallest `L + size_mb / B`, each further centre is the engine farthest
/// from the centres chosen so far. `k` is clamped to `1..=|engines|`.
pub fn cluster_engines(features: &BTreeMap<EngineId, QosSample>, k: usize, size_mb: f64) -> Vec<Cluster> {
    cluster_engines_traced(features, k, size_mb).0
}

pub fn cluster_engines_traced(
    features: &BTreeMap<EngineId, QosSample>,
    k: usize,
    size_mb: f64,
) -> (Vec<Cluster>, KMeansTrace) {
    let ids: Vec<&EngineId> = features.keys().collect();
    let raw: Vec<QosSample> = features.values().copied().collect();
    let mut trace = KMeansTrace::default();
    if ids.is_empty() {
        return (vec![], trace);
    }
    let points = normalize(&raw);
    let k = k.clamp(1, ids.len());

    let first = (0..ids.len())
        .min_by(|&a, &b| {
            raw[a]
                .transfer_time(size_mb)
                .total_cmp(&raw[b].transfer_time(size_mb))
                .then_with(|| ids[a].cmp(ids[b]))
        })
        .unwrap();
    let mut centres = vec![points[first]];
    while centres.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            let d = centres.iter().map(|c| dist2(*p, *c)).fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        match best {
            Some((i, d)) if d > 0.0 => centres.push(points[i]),
            _ => break,
        }
    }

    let mut assignment: Vec<usize> = vec![usize::MAX; points.len()];
    loop {
        let next: Vec<usize> = points.iter().map(|p| nearest(*p, &centres)).collect();
        trace.objective.push(wcss(&points, &next, &centres));
        let changed = next != assignment;
        assignment = next;
        if !changed {
            trace.converged = true;
            break;
        }
        if trace.iterations == MAX_ITERATIONS {
            break;
        }
        trace.iterations += 1;
        for (c, centre) in centres.iter_mut().enumerate() {
            let members: Vec<(f64, f64)> = points
                .iter()
                .zip(&assignment)
                .filter(|(_, a)| **a == c)
                .map(|(p, _)| *p)
                .collect();
            if !members.is_empty() {
                *centre = mean(&members);
            }
        }
        trace.objective.push(wcss(&points, &assignment, &centres));
    }

    let clusters = centres
        .iter()
        .enumerate()
        .filter_map(|(c, centre)| {
            let idx: Vec<usize> = (0..points.len()).filter(|&i| assignment[i] == c).collect();
            if idx.is_empty() {
                return None;
            }
            let n = idx.len() as f64;
            Some(Cluster {
                members: idx.iter().map(|&i| ids[i].clone()).collect(),
                centroid: *centre,
                raw_centroid: QosSample {
                    latency_s: idx.iter().map(|&i| raw[i].latency_s).sum::<f64>() / n,
                    bandwidth_mbps: idx.iter().map(|&i| raw[i].bandwidth_mbps).sum::<f64>() / n,
                },
            })
        })
        .collect();
    (clusters, trace)
}

/// Drops every Pareto-dominated cluster.
pub fn eliminate_clusters(clusters: &[Cluster]) -> Vec<Cluster> {
    split_dominated(clusters).0
}

/// (survivors, eliminated). Dominance is a strict partial order, so at
/// least one cluster of a non-empty input always survives.
pub fn split_dominated(clusters: &[Cluster]) -> (Vec<Cluster>, Vec<Cluster>) {
    clusters
        .iter()
        .cloned()
        .partition(|c| !clusters.iter().any(|o| c.dominated_by(o)))
}

fn normalize(raw: &[QosSample]) -> Vec<(f64, f64)> {
    let zscore = |xs: Vec<f64>| -> Vec<f64> {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        xs.iter()
            .map(|x| if sd > 0.0 { (x - mean) / sd } else { 0.0 })
            .collect()
    };
    let l = zscore(raw.iter().map(|s| s.latency_s).collect());
    let b = zscore(raw.iter().map(|s| s.bandwidth_mbps).collect());
    l.into_iter().zip(b).collect()
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

fn nearest(p: (f64, f64), centres: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (i, c) in centres.iter().enumerate().skip(1) {
        if dist2(p, *c) < dist2(p, centres[best]) {
            best = i;
        }
    }
    best
}

fn mean(ps: &[(f64, f64)]) -> (f64, f64) {
    let n = ps.len() as f64;
    (
        ps.iter().map(|p| p.0).sum::<f64>() / n,
        ps.iter().map(|p| p.1).sum::<f64>() / n,
    )
}

fn wcss(points: &[(f64, f64)], assignment: &[usize], centres: &[(f64, f64)]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &a)| dist2(*p, centres[a]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn features(list: &[(&str, f64, f64)]) -> BTreeMap<EngineId, QosSample> {
        list.iter()
            .map(|(id, l, b)| (id.to_string(), QosSample::new(*l, *b).unwrap()))
            .collect()
    }

    fn raw_cluster(l: f64, b: f64) -> Cluster {
        Cluster {
            members: vec![format!("{l}-{b}")],
            centroid: (0.0, 0.0),
            raw_centroid: QosSample {
                latency_s: l,
                bandwidth_mbps: b,
            },
        }
    }

    /// Exhaustive optimal 2-partition by WCSS in normalized space.
    fn brute_force_two(f: &BTreeMap<EngineId, QosSample>) -> Vec<Vec<EngineId>> {
        let raw: Vec<QosSample> = f.values().copied().collect();
        let pts = normalize(&raw);
        let ids: Vec<&EngineId> = f.keys().collect();
        let n = pts.len();
        let mut best = (f64::INFINITY, 0u32);
        for mask in 1..(1u32 << n) - 1 {
            let mut cost = 0.0;
            for side in [true, false] {
                let grp: Vec<(f64, f64)> =
                    (0..n).filter(|i| (mask >> i & 1 == 1) == side).map(|i| pts[i]).collect();
                let m = mean(&grp);
                cost += grp.iter().map(|p| dist2(*p, m)).sum::<f64>();
            }
            if cost < best.0 - 1e-12 {
                best = (cost, mask);
            }
        }
        let mut groups: Vec<Vec<EngineId>> = [true, false]
            .iter()
            .map(|side| {
                (0..n)
                    .filter(|i| (best.1 >> i & 1 == 1) == *side)
                    .map(|i| ids[i].clone())
                    .collect()
            })
            .collect();
        groups.sort();
        groups
    }

    #[test]
    fn single_engine() {
        let f = features(&[("e1", 0.01, 10.0)]);
        let c = cluster_engines(&f, 1, 1.0);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].members, vec!["e1".to_string()]);
    }

    #[test]
    fn separated_groups_recovered() {
        let f = features(&[
            ("a1", 0.001, 100.0),
            ("a2", 0.001, 100.0),
            ("a3", 0.001, 100.0),
            ("b1", 0.150, 2.0),
            ("b2", 0.150, 2.0),
            ("b3", 0.150, 2.0),
        ]);
        let mut got: Vec<Vec<EngineId>> = cluster_engines(&f, 2, 1.0).into_iter().map(|c| c.members).collect();
        got.sort();
        assert_eq!(got, brute_force_two(&f));
        assert_eq!(got[0], vec!["a1", "a2", "a3"]);
    }

    #[test]
    fn identical_features_give_one_cluster() {
        let f = features(&[("e1", 0.05, 10.0), ("e2", 0.05, 10.0), ("e3", 0.05, 10.0)]);
        let c = cluster_engines(&f, 2, 1.0);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].members.len(), 3);
    }

    #[test]
    fn k_is_clamped() {
        let f = features(&[("e1", 0.01, 10.0), ("e2", 0.2, 1.0)]);
        assert_eq!(cluster_engines(&f, 9, 1.0).len(), 2);
        assert_eq!(cluster_engines(&f, 0, 1.0).len(), 1);
    }

    #[test]
    fn elimination_examples() {
        let fast = raw_cluster(0.001, 100.0);
        let slow = raw_cluster(0.150, 2.0);
        let (keep, gone) = split_dominated(&[fast.clone(), slow.clone()]);
        assert_eq!(keep, vec![fast.clone()]);
        assert_eq!(gone, vec![slow]);
        assert_eq!(eliminate_clusters(std::slice::from_ref(&fast)), vec![fast]);
        let trade = [raw_cluster(0.001, 2.0), raw_cluster(0.150, 100.0)];
        assert_eq!(eliminate_clusters(&trade).len(), 2);
    }

    #[test]
    fn equal_in_one_metric_is_not_dominated() {
        let c = [raw_cluster(0.1, 5.0), raw_cluster(0.1, 50.0)];
        assert_eq!(eliminate_clusters(&c).len(), 2);
    }

    fn arb_features() -> impl Strategy<Value = BTreeMap<EngineId, QosSample>> {
        prop::collection::vec((0.0f64..0.3, 0.5f64..200.0), 1..10).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (l, b))| (format!("e{i}"), QosSample::new(l, b).unwrap()))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn clusters_partition_engines(f in arb_features(), k in 1usize..5, size in 0.0f64..20.0) {
            let (clusters, trace) = cluster_engines_traced(&f, k, size);
            let mut all: Vec<&EngineId> = clusters.iter().flat_map(|c| &c.members).collect();
            all.sort();
            let expected: Vec<&EngineId> = f.keys().collect();
            prop_assert_eq!(all, expected);
            prop_assert!(clusters.iter().all(|c| !c.members.is_empty()));
            for w in trace.objective.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9, "objective rose: {:?}", trace.objective);
            }
        }

        #[test]
        fn elimination_keeps_a_survivor(cs in prop::collection::vec((0.0f64..0.3, 0.5f64..200.0), 1..8)) {
            let clusters: Vec<Cluster> = cs.iter().map(|(l, b)| raw_cluster(*l, *b)).collect();
            let (keep, gone) = split_dominated(&clusters);
            prop_assert!(!keep.is_empty());
            prop_assert_eq!(keep.len() + gone.len(), clusters.len());
            for g in &gone {
                prop_assert!(clusters.iter().any(|o| g.raw_centroid.latency_s > o.raw_centroid.latency_s
                    && g.raw_centroid.bandwidth_mbps < o.raw_centroid.bandwidth_mbps));
            }
        }
    }
}

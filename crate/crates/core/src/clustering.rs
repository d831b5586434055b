//! Channel-correlation AP clustering and user association.
//!
//! APs are compared through their stacked channels toward all users. The
//! dissimilarity `1 - |ρ|` feeds an agglomerative clustering; cutting the
//! dendrogram at a threshold yields a partition of the APs, and each user is
//! then served by the cluster holding its strongest large-scale links.

use std::fmt::Write as _;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::config::{ClusterScore, Linkage};
use crate::error::{Error, Result};
use crate::geometry::{ChannelRealization, LargeScaleMatrix};

/// g_m = [g_m1; g_m2; ...; g_mK], length L·K.
pub fn stack_ap_channel(channel: &ChannelRealization, m: usize) -> Array1<Complex64> {
    let (_, k_count, l_count) = channel.g.dim();
    Array1::from_iter(
        (0..k_count).flat_map(|k| (0..l_count).map(move |l| (k, l))).map(|(k, l)| channel.g[[m, k, l]]),
    )
}

/// Normalized inner product g_mᴴ g_n / (‖g_m‖‖g_n‖). Zero when either vector has no energy.
pub fn correlation(a: &Array1<Complex64>, b: &Array1<Complex64>) -> Complex64 {
    let na = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        log::warn!("correlation with a zero-energy channel vector; using 0");
        return Complex64::new(0.0, 0.0);
    }
    let inner: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    inner / (na * nb)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(pub Array2<Complex64>);

pub fn correlation_matrix(channel: &ChannelRealization) -> CorrelationMatrix {
    let m_count = channel.num_aps();
    let stacked: Vec<_> = (0..m_count).map(|m| stack_ap_channel(channel, m)).collect();
    let mut rho = Array2::zeros((m_count, m_count));
    for m in 0..m_count {
        for n in m..m_count {
            let r = if m == n {
                Complex64::new(1.0, 0.0)
            } else {
                correlation(&stacked[m], &stacked[n])
            };
            rho[[m, n]] = r;
            rho[[n, m]] = r.conj();
        }
    }
    CorrelationMatrix(rho)
}

/// Symmetric dissimilarities in [0, 1] with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix(Array2<f64>);

impl DistanceMatrix {
    /// Panics if `d` is not square, symmetric, zero on the diagonal and within [0, 1].
    pub fn new(d: Array2<f64>) -> Self {
        let n = d.nrows();
        assert_eq!(n, d.ncols(), "distance matrix must be square");
        for i in 0..n {
            assert_eq!(d[[i, i]], 0.0, "distance matrix diagonal must be zero");
            for j in 0..n {
                assert_eq!(d[[i, j]], d[[j, i]], "distance matrix must be symmetric");
                assert!((0.0..=1.0).contains(&d[[i, j]]), "distance out of [0, 1]");
            }
        }
        Self(d)
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[[i, j]]
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }
}

/// D_mn = 1 − |ρ_mn|.
pub fn distance_matrix(rho: &CorrelationMatrix) -> DistanceMatrix {
    let n = rho.0.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (1.0 - rho.0[[i, j]].norm()).clamp(0.0, 1.0);
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    DistanceMatrix::new(d)
}

/// One agglomeration step. Leaves are `0..n`; the cluster created by merge `s` has id `n + s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub cluster_a: usize,
    pub cluster_b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub leaves: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Partition from cutting at `threshold`: leaves share a cluster iff they are
    /// joined at a height ≤ `threshold`. Clusters are ordered by their smallest
    /// member and members are sorted.
    pub fn cut(&self, threshold: f64) -> Vec<Vec<usize>> {
        let n = self.leaves;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        // representative leaf of every cluster id
        let mut rep: Vec<usize> = (0..n).collect();
        for merge in &self.merges {
            let (ra, rb) = (rep[merge.cluster_a], rep[merge.cluster_b]);
            rep.push(ra);
            if merge.height <= threshold {
                let (a, b) = (find(&mut parent, ra), find(&mut parent, rb));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; n];
        for leaf in 0..n {
            let root = find(&mut parent, leaf);
            if slot[root] == usize::MAX {
                slot[root] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[root]].push(leaf);
        }
        groups
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("cluster_a,cluster_b,height\n");
        for m in &self.merges {
            let _ = writeln!(out, "{},{},{}", m.cluster_a, m.cluster_b, m.height);
        }
        out
    }
}

/// Agglomerative clustering with Lance–Williams distance updates.
///
/// Ties pick the lowest pair of active slots in row-major order.
pub fn build_dendrogram(d: &DistanceMatrix, linkage: Linkage) -> Dendrogram {
    let n = d.len();
    let mut dist = d.as_array().clone();
    let mut active: Vec<bool> = vec![true; n];
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes: Vec<usize> = vec![1; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if active[j] && dist[[i, j]] < best.2 {
                    best = (i, j, dist[[i, j]]);
                }
            }
        }
        let (i, j, height) = best;
        let (ni, nj) = (sizes[i] as f64, sizes[j] as f64);
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let (dik, djk) = (dist[[i, k]], dist[[j, k]]);
            let v = match linkage {
                Linkage::Average => (ni * dik + nj * djk) / (ni + nj),
                Linkage::Single => dik.min(djk),
                Linkage::Complete => dik.max(djk),
            };
            dist[[i, k]] = v;
            dist[[k, i]] = v;
        }
        active[j] = false;
        sizes[i] += sizes[j];
        let (a, b) = (ids[i].min(ids[j]), ids[i].max(ids[j]));
        merges.push(Merge {
            cluster_a: a,
            cluster_b: b,
            height,
            size: sizes[i],
        });
        ids[i] = n + step;
    }
    Dendrogram { leaves: n, merges }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub dendrogram: Dendrogram,
    pub partition: Vec<Vec<usize>>,
}

pub fn hierarchical_cluster(d: &DistanceMatrix, threshold: f64, linkage: Linkage) -> Clustering {
    let dendrogram = build_dendrogram(d, linkage);
    let partition = dendrogram.cut(threshold);
    Clustering { dendrogram, partition }
}

/// The cluster that ranks highest for user `k`; ties go to the lower cluster index.
pub fn select_serving_cluster(
    k: usize,
    partition: &[Vec<usize>],
    beta: &LargeScaleMatrix,
    score: ClusterScore,
) -> Vec<usize> {
    assert!(!partition.is_empty(), "partition must contain at least one cluster");
    let rank = |cluster: &Vec<usize>| -> f64 {
        let values = cluster.iter().map(|&m| beta.get(m, k));
        match score {
            ClusterScore::Max => values.fold(f64::NEG_INFINITY, f64::max),
            ClusterScore::Sum => values.sum(),
        }
    };
    let mut best = 0;
    let mut best_score = rank(&partition[0]);
    for (c, cluster) in partition.iter().enumerate().skip(1) {
        let s = rank(cluster);
        if s > best_score {
            best = c;
            best_score = s;
        }
    }
    partition[best].clone()
}

/// Binary AP×user serving matrix, stored as sorted serving sets C_k.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationMatrix {
    num_aps: usize,
    serving: Vec<Vec<usize>>,
}

impl AssociationMatrix {
    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    pub fn num_users(&self) -> usize {
        self.serving.len()
    }

    pub fn serving(&self, k: usize) -> &[usize] {
        &self.serving[k]
    }

    pub fn serves(&self, m: usize, k: usize) -> bool {
        self.serving[k].binary_search(&m).is_ok()
    }

    pub fn to_matrix(&self) -> Array2<u8> {
        let mut b = Array2::zeros((self.num_aps, self.serving.len()));
        for (k, set) in self.serving.iter().enumerate() {
            for &m in set {
                b[[m, k]] = 1;
            }
        }
        b
    }

    /// Every AP serves every user.
    pub fn full(num_aps: usize, num_users: usize) -> Self {
        Self {
            num_aps,
            serving: vec![(0..num_aps).collect(); num_users],
        }
    }
}

pub fn build_association_matrix(num_aps: usize, sets: Vec<Vec<usize>>) -> Result<AssociationMatrix> {
    let mut serving = Vec::with_capacity(sets.len());
    for (k, mut set) in sets.into_iter().enumerate() {
        if set.is_empty() {
            return Err(Error::EmptyServingSet { user: k });
        }
        set.sort_unstable();
        set.dedup();
        assert!(set.iter().all(|&m| m < num_aps), "AP index out of range");
        serving.push(set);
    }
    Ok(AssociationMatrix { num_aps, serving })
}

/// Full pipeline: correlation, distances, dendrogram cut, per-user cluster choice.
pub fn cluster_and_associate(
    channel: &ChannelRealization,
    beta: &LargeScaleMatrix,
    threshold: f64,
    linkage: Linkage,
    score: ClusterScore,
) -> Result<(Clustering, AssociationMatrix)> {
    let d = distance_matrix(&correlation_matrix(channel));
    let clustering = hierarchical_cluster(&d, threshold, linkage);
    let sets = (0..beta.num_users())
        .map(|k| select_serving_cluster(k, &clustering.partition, beta, score))
        .collect();
    let assoc = build_association_matrix(beta.num_aps(), sets)?;
    Ok((clustering, assoc))
}

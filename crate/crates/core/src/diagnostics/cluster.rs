//! Single-linkage clustering and a finite-n reading of the
//! compactness / vanishing / dichotomy alternative.

use serde::Serialize;

use crate::energy::{centroid, dist, Configuration, Points};
use crate::error::{Error, Result};

/// Mass share of the largest cluster above which the configuration counts
/// as compact.
const COMPACT_SHARE: f64 = 0.99;
/// Minimal share of each of two clusters for a dichotomy.
const MINOR_SHARE: f64 = 0.05;
/// Separation, in units of the largest cluster radius, for a dichotomy.
const SEPARATION: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Compactness,
    VanishingLike,
    DichotomyLike,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cluster {
    pub indices: Vec<usize>,
    pub mass: f64,
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterReport {
    pub classification: Classification,
    /// Largest first.
    pub clusters: Vec<Cluster>,
    /// Mass share of the largest cluster.
    pub lambda: f64,
    /// Smallest distance between points of different clusters (infinite
    /// for one cluster).
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub gap: f64,
    pub link_threshold: f64,
    /// Largest mass share inside a ball of radius `link_threshold` centered
    /// at a point.
    pub concentration: f64,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Clusters linked at `gap_factor` times the median nearest-neighbour
/// distance.
///
/// Compact when one cluster holds 99% of the points; dichotomy-like when
/// two clusters each hold at least 5% and the clusters are separated by
/// more than ten times the largest cluster radius; vanishing-like
/// otherwise. `concentration` is reported alongside so that a spread-out
/// configuration can be told apart from one with several mid-sized lumps.
pub fn cluster_classify(cfg: &Configuration, gap_factor: f64) -> Result<ClusterReport> {
    if !(gap_factor > 1.0 && gap_factor.is_finite()) {
        return Err(Error::InvalidArgument("gap_factor must exceed 1".into()));
    }
    let n = cfg.n();
    let dim = cfg.dim();
    let mut nn = vec![f64::INFINITY; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(cfg.point(i), cfg.point(j));
            nn[i] = nn[i].min(d);
            nn[j] = nn[j].min(d);
        }
    }
    let threshold = if n < 2 {
        0.0
    } else {
        let mut sorted = nn.clone();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        gap_factor * median
    };

    let mut parent: Vec<usize> = (0..n).collect();
    let mut ball = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(cfg.point(i), cfg.point(j));
            if d <= threshold {
                ball[i] += 1;
                ball[j] += 1;
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    let mut clusters: Vec<Cluster> = groups
        .into_iter()
        .map(|idx| {
            let coords: Vec<f64> = idx.iter().flat_map(|&i| cfg.point(i).iter().copied()).collect();
            let center = centroid(&coords, dim);
            let radius = coords.chunks(dim).map(|p| dist(p, &center)).fold(0.0, f64::max);
            Cluster {
                mass: idx.len() as f64 / n as f64,
                indices: idx,
                center,
                radius,
            }
        })
        .collect();
    clusters.sort_by(|a, b| {
        b.indices
            .len()
            .cmp(&a.indices.len())
            .then(a.indices[0].cmp(&b.indices[0]))
    });

    let mut gap = f64::INFINITY;
    if clusters.len() > 1 {
        let mut label = vec![0; n];
        for (c, cl) in clusters.iter().enumerate() {
            for &i in &cl.indices {
                label[i] = c;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if label[i] != label[j] {
                    gap = gap.min(dist(cfg.point(i), cfg.point(j)));
                }
            }
        }
    }
    let lambda = clusters[0].mass;
    let concentration = ball.iter().map(|b| (b + 1) as f64 / n as f64).fold(0.0, f64::max);
    let largest_radius = clusters.iter().map(|c| c.radius).fold(0.0, f64::max);
    let big = clusters.iter().filter(|c| c.mass >= MINOR_SHARE).count();
    let classification = if lambda >= COMPACT_SHARE {
        Classification::Compactness
    } else if big >= 2 && gap > SEPARATION * largest_radius {
        Classification::DichotomyLike
    } else {
        Classification::VanishingLike
    };
    Ok(ClusterReport {
        classification,
        clusters,
        lambda,
        gap,
        link_threshold: threshold,
        concentration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn blob(n: usize, center: [f64; 2], r: f64) -> Vec<f64> {
        // sunflower spiral: evenly spread points in a disc
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..n)
            .flat_map(|i| {
                let rad = r * ((i as f64 + 0.5) / n as f64).sqrt();
                let t = golden * i as f64;
                [center[0] + rad * t.cos(), center[1] + rad * t.sin()]
            })
            .collect()
    }

    #[test]
    fn single_blob_is_compact() {
        let cfg = Configuration::new(2, blob(80, [0.0, 0.0], 1.0)).unwrap();
        let r = cluster_classify(&cfg, 3.0).unwrap();
        assert_eq!(r.classification, Classification::Compactness);
        assert_eq!(r.lambda, 1.0);
        assert_eq!(r.gap, f64::INFINITY);
    }

    #[test]
    fn separated_blobs_split() {
        let mut c = blob(60, [0.0, 0.0], 1.0);
        c.extend(blob(40, [1000.0, 0.0], 1.0));
        let cfg = Configuration::new(2, c).unwrap();
        let r = cluster_classify(&cfg, 3.0).unwrap();
        assert_eq!(r.classification, Classification::DichotomyLike);
        assert!((r.lambda - 0.6).abs() < 1e-12);
        assert_eq!(r.clusters.len(), 2);
        assert!((r.clusters[1].mass - 0.4).abs() < 1e-12);
    }

    #[test]
    fn geometric_line_vanishes() {
        let c: Vec<f64> = (0..30).map(|k| 2f64.powi(k)).collect();
        let cfg = Configuration::new(1, c).unwrap();
        let r = cluster_classify(&cfg, 1.5).unwrap();
        assert_eq!(r.classification, Classification::VanishingLike);
        assert!(r.clusters.iter().map(|c| c.mass).sum::<f64>() > 1.0 - 1e-12);
    }

    #[test]
    fn single_point() {
        let cfg = Configuration::new(3, vec![1.0, 2.0, 3.0]).unwrap();
        let r = cluster_classify(&cfg, 2.0).unwrap();
        assert_eq!(r.classification, Classification::Compactness);
        assert!(cluster_classify(&cfg, 1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn permutation_and_translation_invariant(
            pts in prop::collection::vec(-10.0f64..10.0, 4..60),
            shift in -5.0f64..5.0,
            seed in 0u64..1000,
        ) {
            let m = pts.len() / 2 * 2;
            let cfg = Configuration::new(2, pts[..m].to_vec()).unwrap();
            let n = cfg.n();
            let mut perm: Vec<usize> = (0..n).collect();
            // deterministic shuffle
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let a = cluster_classify(&cfg, 2.5).unwrap();
            let b = cluster_classify(&cfg.permuted(&perm), 2.5).unwrap();
            // translation perturbs distances by rounding only
            let t = (shift * 4.0).round() / 4.0;
            let c = cluster_classify(&cfg.translated(&[t, t]), 2.5).unwrap();
            for other in [&b, &c] {
                prop_assert_eq!(a.classification, other.classification);
                prop_assert_eq!(a.lambda, other.lambda);
                let mut ma: Vec<usize> = a.clusters.iter().map(|c| c.indices.len()).collect();
                let mut mb: Vec<usize> = other.clusters.iter().map(|c| c.indices.len()).collect();
                ma.sort();
                mb.sort();
                prop_assert_eq!(ma, mb);
            }
            prop_assert_eq!(a.gap, b.gap);
        }
    }
}

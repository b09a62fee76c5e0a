//! Seeded Lloyd iteration for grouping blocks by grade.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Group, GroupId, LocationId, MiningComplexInstance, ModelError};

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index per input point.
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squared error after each assignment step.
    pub sse_history: Vec<f64>,
    pub converged: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm. Centroids are seeded from `k` distinct points sampled
/// uniformly; ties in the nearest-centroid rule break toward the lowest
/// centroid index; clusters that empty out are dropped, not reseeded, so a
/// run is a pure function of `(points, k, max_iter, seed)`.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    max_iter: usize,
    seed: u64,
) -> Result<KMeansResult, ModelError> {
    if k == 0 {
        return Err(ModelError::InvalidConfig("k must be at least 1".into()));
    }
    if points.is_empty() {
        return Err(ModelError::InvalidConfig("no points to cluster".into()));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(ModelError::InvalidConfig("points have mixed dimensions".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut rng);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    for &i in &order {
        if centroids.len() == k {
            break;
        }
        if !centroids.iter().any(|c| c == &points[i]) {
            centroids.push(points[i].clone());
        }
    }
    if centroids.len() < k {
        log::warn!(
            "k-means: only {} distinct points for k={k}; reducing cluster count",
            centroids.len()
        );
    }

    let mut assignment = vec![0usize; points.len()];
    let mut sse_history = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter.max(1) {
        // Assignment step.
        let mut sse = 0.0;
        let mut changed = false;
        for (pi, p) in points.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (ci, c) in centroids.iter().enumerate() {
                let d = sq_dist(p, c);
                if d < best_d {
                    best_d = d;
                    best = ci;
                }
            }
            sse += best_d;
            if assignment[pi] != best {
                assignment[pi] = best;
                changed = true;
            }
        }
        let first = sse_history.is_empty();
        sse_history.push(sse);
        if !changed && !first {
            converged = true;
            break;
        }

        // Update step; drop clusters with no members.
        let mut counts = vec![0usize; centroids.len()];
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        for (pi, p) in points.iter().enumerate() {
            counts[assignment[pi]] += 1;
            for (d, x) in p.iter().enumerate() {
                sums[assignment[pi]][d] += x;
            }
        }
        if counts.iter().any(|&c| c == 0) {
            let mut remap = vec![usize::MAX; centroids.len()];
            let mut next = 0usize;
            for (ci, &c) in counts.iter().enumerate() {
                if c > 0 {
                    remap[ci] = next;
                    next += 1;
                }
            }
            log::warn!("k-means: dropping {} empty cluster(s)", centroids.len() - next);
            centroids = Vec::with_capacity(next);
            for (ci, &c) in counts.iter().enumerate() {
                if c > 0 {
                    centroids
                        .push(sums[ci].iter().map(|s| s / c as f64).collect());
                }
            }
            for a in assignment.iter_mut() {
                *a = remap[*a];
            }
        } else {
            for (ci, c) in centroids.iter_mut().enumerate() {
                for d in 0..dim {
                    c[d] = sums[ci][d] / counts[ci] as f64;
                }
            }
        }
    }

    Ok(KMeansResult { centroids, assignment, sse_history, converged })
}

/// Clusters each mine's `(block, scenario)` grade vectors into `k` groups and
/// returns the groups plus the per-`(block, scenario)` membership table.
///
/// Every group is given the same destination set `destinations`; callers that
/// need per-mine routing restrict the sets afterwards.
pub fn cluster_blocks(
    instance_blocks: &ClusterInput<'_>,
    k: usize,
    max_iter: usize,
    seed: u64,
) -> Result<(Vec<Group>, Vec<GroupId>), ModelError> {
    let inp = instance_blocks;
    let ns = inp.num_scenarios;
    let mut groups: Vec<Group> = Vec::new();
    let mut memberships = vec![0 as GroupId; inp.blocks_of_mine.iter().map(|v| v.len()).sum::<usize>() * ns];

    for (mi, &mine) in inp.mines.iter().enumerate() {
        let blocks = &inp.blocks_of_mine[mine as usize];
        let mut points = Vec::with_capacity(blocks.len() * ns);
        for &b in blocks {
            for s in 0..ns {
                points.push((inp.grades)(b, s));
            }
        }
        let res = kmeans(&points, k, max_iter, seed.wrapping_add(mi as u64))?;
        let base = groups.len() as GroupId;
        let count = res.centroids.len();
        for c in 0..count {
            groups.push(Group {
                id: base + c as GroupId,
                mine,
                destinations: inp.destinations.clone(),
                mean_grade: 0.0,
            });
        }
        for (bi, &b) in blocks.iter().enumerate() {
            for s in 0..ns {
                memberships[b as usize * ns + s] = base + res.assignment[bi * ns + s] as GroupId;
            }
        }
    }
    Ok((groups, memberships))
}

/// Borrowed view used by [`cluster_blocks`] so it can run both during
/// generation (before an instance exists) and on a built instance.
pub struct ClusterInput<'a> {
    pub mines: &'a [LocationId],
    pub blocks_of_mine: &'a [Vec<super::BlockId>],
    pub num_scenarios: usize,
    pub destinations: Vec<LocationId>,
    pub grades: Box<dyn Fn(super::BlockId, usize) -> Vec<f64> + 'a>,
}

impl<'a> ClusterInput<'a> {
    pub fn from_instance(inst: &'a MiningComplexInstance, destinations: Vec<LocationId>) -> Self {
        Self {
            mines: &inst.mines,
            blocks_of_mine: &inst.blocks_of_mine,
            num_scenarios: inst.num_scenarios(),
            destinations,
            grades: Box::new(move |b, s| {
                (1..inst.num_primary())
                    .map(|p| {
                        let tons = inst.scenarios.beta(0, b, s);
                        if tons > 0.0 {
                            inst.scenarios.beta(p, b, s) / tons
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cluster_holds_everything() {
        let pts: Vec<Vec<f64>> = vec![vec![0.1], vec![0.4], vec![0.9]];
        let res = kmeans(&pts, 1, 50, 7).unwrap();
        assert_eq!(res.centroids.len(), 1);
        assert!(res.assignment.iter().all(|&a| a == 0));
    }

    #[test]
    fn k_equal_points_gives_zero_sse() {
        let pts: Vec<Vec<f64>> = vec![vec![0.1], vec![0.5], vec![0.9]];
        let res = kmeans(&pts, 3, 50, 3).unwrap();
        assert_eq!(res.centroids.len(), 3);
        assert!(res.sse_history.last().unwrap().abs() < 1e-12);
    }

    #[test]
    fn two_cluster_split_matches_exhaustive_partition() {
        let pts: Vec<Vec<f64>> = vec![vec![0.1], vec![0.1], vec![0.9], vec![0.9]];
        let res = kmeans(&pts, 2, 100, 11).unwrap();
        assert_eq!(res.assignment[0], res.assignment[1]);
        assert_eq!(res.assignment[2], res.assignment[3]);
        assert_ne!(res.assignment[0], res.assignment[2]);

        // Exhaustive search over all 2-partitions for the SSE optimum.
        let mut best = f64::INFINITY;
        let mut best_mask = 0u8;
        for mask in 1u8..15 {
            let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0, 0.0, 0);
            for (i, p) in pts.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    s0 += p[0];
                    n0 += 1;
                } else {
                    s1 += p[0];
                    n1 += 1;
                }
            }
            if n0 == 0 || n1 == 0 {
                continue;
            }
            let (c0, c1) = (s0 / n0 as f64, s1 / n1 as f64);
            let sse: f64 = pts
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let c = if mask & (1 << i) != 0 { c0 } else { c1 };
                    (p[0] - c) * (p[0] - c)
                })
                .sum();
            if sse < best {
                best = sse;
                best_mask = mask;
            }
        }
        assert!(best_mask == 0b0011 || best_mask == 0b1100);
        let got: f64 = *res.sse_history.last().unwrap();
        assert!((got - best).abs() < 1e-12);
    }

    #[test]
    fn sse_never_increases() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
        let pts: Vec<Vec<f64>> =
            (0..200).map(|_| vec![rand::Rng::gen::<f64>(&mut rng), rand::Rng::gen::<f64>(&mut rng)]).collect();
        let res = kmeans(&pts, 6, 100, 9).unwrap();
        for w in res.sse_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "SSE increased: {} -> {}", w[0], w[1]);
        }
    }
}

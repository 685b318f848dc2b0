//! Fixed-trace K-means.
//!
//! Centroids start at the first `k` points and the first round's groups are
//! round-robin (`j mod k`). Each round assigns every point to its nearest
//! centroid and recomputes every centroid from a full-length masked group, so
//! the operation sequence depends only on `(n, d, k, iters)`.

use serde::{Deserialize, Serialize};

use super::{Dataset, MechanismError};
use crate::numeric::{Real, TraceRecorder, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub iters: usize,
    #[serde(default = "default_ratio")]
    pub subsample_ratio: f64,
}

pub(crate) fn default_ratio() -> f64 {
    0.5
}

impl KMeansConfig {
    pub fn new(k: usize, iters: usize) -> Self {
        Self {
            k,
            iters,
            subsample_ratio: default_ratio(),
        }
    }

    pub fn validate(&self) -> Result<(), MechanismError> {
        if self.k < 2 {
            return Err(MechanismError::InvalidConfig(format!(
                "k must be at least 2, got {}",
                self.k
            )));
        }
        if self.iters == 0 {
            return Err(MechanismError::InvalidConfig(
                "iters must be positive".into(),
            ));
        }
        if !(self.subsample_ratio > 0.0 && self.subsample_ratio <= 1.0) {
            return Err(MechanismError::InvalidConfig(format!(
                "subsample ratio {} outside (0, 1]",
                self.subsample_ratio
            )));
        }
        Ok(())
    }
}

/// Per-centroid membership lists of constant length `n`: entry `j` of group
/// `c` is `(j, active)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterGroups {
    k: usize,
    n: usize,
    active: Vec<bool>,
}

impl ClusterGroups {
    /// Point `j` starts in group `j mod k`.
    pub fn round_robin(k: usize, n: usize) -> Self {
        let mut active = vec![false; k * n];
        for j in 0..n {
            active[(j % k) * n + j] = true;
        }
        Self { k, n, active }
    }

    /// Builds groups from an explicit point → centroid assignment.
    pub fn from_assignment(k: usize, assignment: &[usize]) -> Self {
        let n = assignment.len();
        let mut active = vec![false; k * n];
        for (j, &c) in assignment.iter().enumerate() {
            active[c * n + j] = true;
        }
        Self { k, n, active }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn is_active(&self, group: usize, point: usize) -> bool {
        self.active[group * self.n + point]
    }

    pub fn group(&self, c: usize) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.active[c * self.n..(c + 1) * self.n]
            .iter()
            .copied()
            .enumerate()
    }

    pub fn active_count(&self, c: usize) -> usize {
        self.group(c).filter(|&(_, a)| a).count()
    }
}

/// Trained centroids in internal order plus the final groups.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel<T> {
    pub centroids: Vec<Vec<T>>,
    pub groups: ClusterGroups,
}

/// Runs exactly `cfg.iters` assignment/update rounds without canonicalizing.
pub fn kmeans_train<T: Real>(
    x: &Dataset<T>,
    cfg: &KMeansConfig,
    rec: &mut TraceRecorder,
) -> Result<KMeansModel<T>, MechanismError> {
    cfg.validate()?;
    let (n, d, k) = (x.len(), x.dim(), cfg.k);
    if n < k {
        return Err(MechanismError::TooFewPoints {
            needed: k,
            found: n,
        });
    }

    let mut centroids: Vec<Vec<T>> = (0..k).map(|c| x.point(c).to_vec()).collect();
    let mut groups = ClusterGroups::round_robin(k, n);

    for _ in 0..cfg.iters {
        // assignment
        for j in 0..n {
            let p = x.point(j);
            let mut best = rec.sq_dist(p, &centroids[0]);
            let mut best_idx = 0usize;
            for (c, centroid) in centroids.iter().enumerate().skip(1) {
                let dist = rec.sq_dist(p, centroid);
                let closer = rec.lt(dist, best);
                best = rec.select(closer, dist, best);
                best_idx = rec.select(closer, c, best_idx);
            }
            for c in 0..k {
                groups.active[c * n + j] = rec.eq(best_idx, c);
            }
        }

        // update; an empty group keeps its previous centroid
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let mut sum = vec![T::zero(); d];
            let mut count = T::zero();
            for j in 0..n {
                let m: T = rec.indicator(groups.active[c * n + j]);
                for (s, &v) in sum.iter_mut().zip(x.point(j)) {
                    let t = rec.mul(m, v);
                    *s = rec.add(*s, t);
                }
                count = rec.add(count, m);
            }
            let nonempty = rec.lt(T::zero(), count);
            let denom = rec.select(nonempty, count, T::one());
            for (slot, s) in centroid.iter_mut().zip(sum) {
                let mean = rec.div(s, denom);
                *slot = rec.select(nonempty, mean, *slot);
            }
        }
    }

    Ok(KMeansModel { centroids, groups })
}

/// Trains and returns the flattened `k × d` centroids. When the dataset has
/// labels the centroids are put in class order (see [`canonicalize_kmeans`]).
pub fn kmeans_fixed<T: Real>(
    x: &Dataset<T>,
    cfg: &KMeansConfig,
    rec: &mut TraceRecorder,
) -> Result<Vector<T>, MechanismError> {
    if x.labels().is_some() {
        x.ensure_labels_below(cfg.k)?;
    }
    let model = kmeans_train(x, cfg, rec)?;
    let ordered = match x.labels() {
        Some(labels) => canonicalize_kmeans(&model.centroids, &model.groups, labels, rec),
        None => model.centroids,
    };
    Ok(Vector::from_trusted(ordered.concat()))
}

/// Traced lexicographic `a < b`.
fn lex_less<T: Real>(a: &[T], b: &[T], rec: &mut TraceRecorder) -> bool {
    let mut decided = false;
    let mut less = false;
    for (&x, &y) in a.iter().zip(b) {
        let lt = rec.lt(x, y);
        let same = rec.eq(x, y);
        let differs = rec.not(same);
        less = rec.select(decided, less, lt);
        decided = rec.or(decided, differs);
    }
    less
}

const UNCLAIMED: usize = usize::MAX;

/// Orders centroids so that position `i` holds the centroid inferred to
/// represent class `i`.
///
/// A centroid's class is the majority label among its active points, ties
/// going to the smaller label. When several centroids infer the same class,
/// the one with more votes keeps it (equal votes: the lexicographically
/// smaller centroid); each loser, in centroid order, takes the lowest class
/// nobody claimed.
///
/// Votes are tallied with a running arg-max, so the work is `O(n·k + k·d)`.
pub fn canonicalize_kmeans<T: Real>(
    centroids: &[Vec<T>],
    groups: &ClusterGroups,
    labels: &[usize],
    rec: &mut TraceRecorder,
) -> Vec<Vec<T>> {
    let k = centroids.len();
    let n = groups.len();
    debug_assert_eq!(groups.k(), k);
    debug_assert_eq!(labels.len(), n);

    let mut votes = vec![T::zero(); k * k];
    let mut best_label = vec![0usize; k];
    let mut best_votes = vec![T::zero(); k];
    for c in 0..k {
        for (j, &label) in labels.iter().enumerate() {
            let inc: T = rec.indicator(groups.is_active(c, j));
            rec.index();
            let slot = &mut votes[c * k + label];
            *slot = rec.add(*slot, inc);
            let v = *slot;
            let more = rec.lt(best_votes[c], v);
            let tie = rec.eq(v, best_votes[c]);
            let smaller = rec.lt(label, best_label[c]);
            let tie_smaller = rec.and(tie, smaller);
            let take = rec.or(more, tie_smaller);
            best_votes[c] = rec.select(take, v, best_votes[c]);
            best_label[c] = rec.select(take, label, best_label[c]);
        }
    }

    // class -> owning centroid
    let mut owner = vec![UNCLAIMED; k];
    for c in 0..k {
        let class = best_label[c];
        rec.index();
        let current = owner[class];
        let unclaimed = rec.eq(current, UNCLAIMED);
        let rival = rec.select(unclaimed, c, current);
        rec.index();
        let more = rec.lt(best_votes[rival], best_votes[c]);
        let same = rec.eq(best_votes[rival], best_votes[c]);
        let smaller = lex_less(&centroids[c], &centroids[rival], rec);
        let tie_win = rec.and(same, smaller);
        let wins = rec.or(more, tie_win);
        let claim = rec.or(unclaimed, wins);
        owner[class] = rec.select(claim, c, current);
    }

    // unclaimed classes in ascending order
    let mut free = vec![0usize; k];
    let mut free_len = 0usize;
    for (class, &own) in owner.iter().enumerate() {
        let is_free = rec.eq(own, UNCLAIMED);
        rec.index();
        free[free_len.min(k - 1)] = class;
        free_len = rec.select(is_free, free_len + 1, free_len);
    }

    let mut ordered = vec![Vec::new(); k];
    let mut next_free = 0usize;
    for c in 0..k {
        rec.index();
        let winner = rec.eq(owner[best_label[c]], c);
        rec.index();
        let fallback = free[next_free.min(k - 1)];
        let class = rec.select(winner, best_label[c], fallback);
        next_free = rec.select(winner, next_free, next_free + 1);
        rec.index();
        ordered[class] = centroids[c].clone();
    }
    ordered
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec() -> TraceRecorder {
        TraceRecorder::new()
    }

    /// Untraced Lloyd iteration to convergence from the same initialization.
    fn reference_lloyd(x: &Dataset<f64>, k: usize) -> Vec<Vec<f64>> {
        let mut centroids: Vec<Vec<f64>> = (0..k).map(|c| x.point(c).to_vec()).collect();
        for _ in 0..1000 {
            let assign: Vec<usize> = x
                .points()
                .map(|p| {
                    (0..k)
                        .min_by(|&a, &b| {
                            let da: f64 = p
                                .iter()
                                .zip(&centroids[a])
                                .map(|(u, v)| (u - v).powi(2))
                                .sum();
                            let db: f64 = p
                                .iter()
                                .zip(&centroids[b])
                                .map(|(u, v)| (u - v).powi(2))
                                .sum();
                            da.partial_cmp(&db).unwrap()
                        })
                        .unwrap()
                })
                .collect();
            let mut next = centroids.clone();
            for (c, slot) in next.iter_mut().enumerate() {
                let members: Vec<&[f64]> = x
                    .points()
                    .zip(&assign)
                    .filter(|(_, &a)| a == c)
                    .map(|(p, _)| p)
                    .collect();
                if !members.is_empty() {
                    for (i, v) in slot.iter_mut().enumerate() {
                        *v = members.iter().map(|p| p[i]).sum::<f64>() / members.len() as f64;
                    }
                }
            }
            if next == centroids {
                break;
            }
            centroids = next;
        }
        centroids
    }

    fn two_blobs() -> Dataset<f64> {
        // alternate blobs so the first two points seed different clusters
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.05;
            if i % 2 == 0 {
                rows.push(vec![-5.0 + t, -5.0 - t * 0.5]);
                labels.push(0);
            } else {
                rows.push(vec![5.0 - t, 5.0 + t * 0.3]);
                labels.push(1);
            }
        }
        Dataset::new(rows, Some(labels)).unwrap()
    }

    #[test]
    fn identical_points_are_a_fixed_point() {
        let p = vec![1.5, -2.0, 0.25];
        let x = Dataset::new(vec![p.clone(); 7], None).unwrap();
        for k in 2..=4 {
            let out = kmeans_fixed(&x, &KMeansConfig::new(k, 3), &mut rec()).unwrap();
            for c in out.as_slice().chunks(3) {
                assert_eq!(c, p.as_slice());
            }
        }
    }

    #[test]
    fn two_blobs_match_reference() {
        let x = two_blobs();
        let out = kmeans_fixed(&x, &KMeansConfig::new(2, 10), &mut rec()).unwrap();
        let reference = reference_lloyd(&x, 2);
        for (got, want) in out.as_slice().chunks(2).zip(&reference) {
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() < 1e-6, "{got:?} vs {want:?}");
            }
        }
        // class 0 blob sits in the negative quadrant
        assert!(out[0] < 0.0 && out[2] > 0.0);
    }

    #[test]
    fn deterministic_output_and_trace() {
        let x = two_blobs();
        let cfg = KMeansConfig::new(2, 10);
        let mut r1 = rec();
        let mut r2 = rec();
        let a = kmeans_fixed(&x, &cfg, &mut r1).unwrap();
        let b = kmeans_fixed(&x, &cfg, &mut r2).unwrap();
        assert_eq!(a, b);
        assert_eq!(r1.digest(), r2.digest());
        assert_eq!(r1.cycle_count(), r2.cycle_count());
    }

    #[test]
    fn too_few_points() {
        let x = Dataset::new(vec![vec![0.0]; 2], None).unwrap();
        assert_eq!(
            kmeans_fixed(&x, &KMeansConfig::new(3, 1), &mut rec()),
            Err(MechanismError::TooFewPoints {
                needed: 3,
                found: 2
            })
        );
    }

    #[test]
    fn round_robin_groups() {
        let g = ClusterGroups::round_robin(3, 7);
        assert!(g.is_active(0, 0) && g.is_active(1, 1) && g.is_active(0, 6));
        assert_eq!(g.active_count(0), 3);
        assert_eq!(g.active_count(2), 2);
        for j in 0..7 {
            assert_eq!((0..3).filter(|&c| g.is_active(c, j)).count(), 1);
        }
        assert_eq!(g.group(1).count(), 7);
    }

    #[test]
    fn canonical_order_follows_majority() {
        let a = vec![10.0, 10.0];
        let b = vec![-10.0, -10.0];
        // centroid A holds points labelled 1, B holds points labelled 0
        let groups = ClusterGroups::from_assignment(2, &[0, 0, 1, 1]);
        let labels = [1, 1, 0, 0];
        let out = canonicalize_kmeans(&[a.clone(), b.clone()], &groups, &labels, &mut rec());
        assert_eq!(out, vec![b, a]);
    }

    #[test]
    fn tie_takes_smaller_free_label() {
        // centroid 0: labels {1, 1, 1}; centroid 1: tie between 0 and 1
        let groups = ClusterGroups::from_assignment(2, &[0, 0, 0, 1, 1]);
        let labels = [1, 1, 1, 0, 1];
        let c0 = vec![1.0];
        let c1 = vec![2.0];
        let out = canonicalize_kmeans(&[c0.clone(), c1.clone()], &groups, &labels, &mut rec());
        assert_eq!(out, vec![c1.clone(), c0.clone()]);

        // collision: both infer class 0, centroid 1 has more votes
        let groups = ClusterGroups::from_assignment(3, &[0, 1, 1, 2]);
        let labels = [0, 0, 0, 2];
        let cs = vec![vec![5.0], vec![6.0], vec![7.0]];
        let out = canonicalize_kmeans(&cs, &groups, &labels, &mut rec());
        // centroid 1 keeps 0, centroid 2 keeps 2, centroid 0 falls back to 1
        assert_eq!(out, vec![vec![6.0], vec![5.0], vec![7.0]]);

        // equal votes on a collision: lexicographically smaller centroid wins
        let groups = ClusterGroups::from_assignment(2, &[0, 1]);
        let labels = [0, 0];
        let cs = vec![vec![3.0, 1.0], vec![3.0, 0.5]];
        let out = canonicalize_kmeans(&cs, &groups, &labels, &mut rec());
        assert_eq!(out, vec![vec![3.0, 0.5], vec![3.0, 1.0]]);
    }

    #[test]
    fn canonicalization_trace_is_label_independent() {
        let cs = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]];
        let mut r1 = rec();
        let mut r2 = rec();
        let g1 = ClusterGroups::from_assignment(3, &[0, 1, 2, 0, 1, 2]);
        let g2 = ClusterGroups::from_assignment(3, &[2, 2, 2, 2, 2, 2]);
        canonicalize_kmeans(&cs, &g1, &[0, 1, 2, 0, 1, 2], &mut r1);
        canonicalize_kmeans(&cs, &g2, &[1, 1, 1, 1, 1, 1], &mut r2);
        assert_eq!(r1.digest(), r2.digest());
    }

    #[test]
    fn single_precision_runs() {
        let x: Dataset<f32> =
            Dataset::new(vec![vec![0.0], vec![10.0], vec![0.5], vec![10.5]], None).unwrap();
        let out = kmeans_fixed(&x, &KMeansConfig::new(2, 5), &mut rec()).unwrap();
        assert_eq!(out.as_slice(), &[0.25f32, 10.25]);
    }
}

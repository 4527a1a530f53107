use super::Point3;

const LEAF_SIZE: usize = 8;

/// Static 3-d tree over a point set.
///
/// The tree is implicit: `order` is permuted so that every range
/// `[lo, hi)` has its splitting point at `mid = (lo + hi) / 2`, with the
/// split axis stored at `axes[mid]`. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point3>,
    order: Vec<usize>,
    axes: Vec<u8>,
}

impl SpatialIndex {
    pub fn new(points: &[Point3]) -> Self {
        let mut index = SpatialIndex {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            axes: vec![0; points.len()],
        };
        let n = index.order.len();
        index.build(0, n);
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    fn build(&mut self, lo: usize, hi: usize) {
        if hi - lo <= LEAF_SIZE {
            return;
        }
        let axis = self.widest_axis(lo, hi);
        let mid = (lo + hi) / 2;
        let points = &self.points;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis])
        });
        self.axes[mid] = axis as u8;
        self.build(lo, mid);
        self.build(mid + 1, hi);
    }

    fn widest_axis(&self, lo: usize, hi: usize) -> usize {
        let mut min = [f64::MAX; 3];
        let mut max = [f64::MIN; 3];
        for &i in &self.order[lo..hi] {
            for a in 0..3 {
                min[a] = min[a].min(self.points[i][a]);
                max[a] = max[a].max(self.points[i][a]);
            }
        }
        (0..3)
            .max_by(|&a, &b| (max[a] - min[a]).total_cmp(&(max[b] - min[b])))
            .unwrap_or(0)
    }

    /// Indices of all points with `‖p − query‖ ≤ r`, ascending.
    pub fn radius_neighbors(&self, query: &Point3, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if r >= 0.0 {
            self.radius_rec(0, self.order.len(), query, r, r * r, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, lo: usize, hi: usize, q: &Point3, r: f64, r2: f64, out: &mut Vec<usize>) {
        if hi <= lo {
            return;
        }
        if hi - lo <= LEAF_SIZE {
            for &i in &self.order[lo..hi] {
                if (self.points[i] - q).norm_squared() <= r2 {
                    out.push(i);
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let i = self.order[mid];
        let axis = self.axes[mid] as usize;
        if (self.points[i] - q).norm_squared() <= r2 {
            out.push(i);
        }
        let diff = q[axis] - self.points[i][axis];
        if diff <= r {
            self.radius_rec(lo, mid, q, r, r2, out);
        }
        if diff >= -r {
            self.radius_rec(mid + 1, hi, q, r, r2, out);
        }
    }

    /// Closest point as `(index, distance)`; lower index wins ties.
    pub fn nearest(&self, query: &Point3) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        self.nearest_rec(0, self.order.len(), query, &mut best);
        best.map(|(i, d2)| (i, d2.sqrt()))
    }

    fn consider(best: &mut Option<(usize, f64)>, i: usize, d2: f64) {
        match best {
            Some((bi, bd)) if d2 > *bd || (d2 == *bd && i > *bi) => {}
            _ => *best = Some((i, d2)),
        }
    }

    fn nearest_rec(&self, lo: usize, hi: usize, q: &Point3, best: &mut Option<(usize, f64)>) {
        if hi <= lo {
            return;
        }
        if hi - lo <= LEAF_SIZE {
            for &i in &self.order[lo..hi] {
                Self::consider(best, i, (self.points[i] - q).norm_squared());
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let i = self.order[mid];
        let axis = self.axes[mid] as usize;
        Self::consider(best, i, (self.points[i] - q).norm_squared());
        let diff = q[axis] - self.points[i][axis];
        let (near, far) = if diff <= 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_rec(near.0, near.1, q, best);
        if best.is_none_or(|(_, d2)| diff * diff <= d2) {
            self.nearest_rec(far.0, far.1, q, best);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, seed: u64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-2.0..2.0),
                )
            })
            .collect()
    }

    fn scan(points: &[Point3], q: &Point3, r: f64) -> Vec<usize> {
        (0..points.len()).filter(|&i| (points[i] - q).norm() <= r).collect()
    }

    #[test]
    fn empty_index() {
        let idx = SpatialIndex::new(&[]);
        assert!(idx.radius_neighbors(&Point3::origin(), 1.0).is_empty());
        assert!(idx.nearest(&Point3::origin()).is_none());
    }

    #[test]
    fn zero_radius_includes_self() {
        let pts = random_cloud(50, 1);
        let idx = SpatialIndex::new(&pts);
        assert!(idx.radius_neighbors(&pts[17], 0.0).contains(&17));
    }

    #[test]
    fn matches_linear_scan() {
        let pts = random_cloud(500, 2);
        let idx = SpatialIndex::new(&pts);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let q = Point3::new(
                rng.random_range(-11.0..11.0),
                rng.random_range(-11.0..11.0),
                rng.random_range(-3.0..3.0),
            );
            let r = rng.random_range(0.0..4.0);
            assert_eq!(idx.radius_neighbors(&q, r), scan(&pts, &q, r));
            let (ni, nd) = idx.nearest(&q).unwrap();
            let bd = pts.iter().map(|p| (p - q).norm()).fold(f64::MAX, f64::min);
            assert_eq!(nd, bd);
            assert_eq!((pts[ni] - q).norm(), bd);
        }
    }

    #[test]
    fn duplicate_points() {
        let pts = vec![Point3::new(1.0, 1.0, 1.0); 40];
        let idx = SpatialIndex::new(&pts);
        assert_eq!(idx.radius_neighbors(&pts[0], 0.0).len(), 40);
        assert_eq!(idx.nearest(&pts[0]).unwrap().0, 0);
    }
}

use crate::geometry::{GeometryError, PointSet, Vec3};
use crate::symmetry::SymmetrySet;

pub const DEFAULT_SAMPLE_COUNT: usize = 500;

/// Object model reduced to at most `k` vertices, in the object frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledModel {
    object_id: u32,
    points: PointSet,
    sample_indices: Vec<usize>,
    source_count: usize,
    diameter: f64,
    symmetries: SymmetrySet,
}

impl SampledModel {
    /// Subsamples `vertices` to `k` points. The diameter is taken over all
    /// of `vertices`, not the subsample.
    pub fn from_vertices(
        object_id: u32,
        vertices: &PointSet,
        symmetries: SymmetrySet,
        k: usize,
    ) -> Result<Self, GeometryError> {
        let diameter = diameter(vertices);
        if !(diameter > 0.0) {
            return Err(GeometryError::DegenerateConfiguration);
        }
        let sample_indices = subsample(vertices, k);
        Ok(SampledModel {
            object_id,
            points: vertices.select(&sample_indices),
            sample_indices,
            source_count: vertices.len(),
            diameter,
            symmetries,
        })
    }

    /// Uses every point as-is.
    pub fn from_points(object_id: u32, points: PointSet, symmetries: SymmetrySet) -> Result<Self, GeometryError> {
        let k = points.len();
        SampledModel::from_vertices(object_id, &points, symmetries, k)
    }

    pub fn object_id(&self) -> u32 {
        self.object_id
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn sample_indices(&self) -> &[usize] {
        &self.sample_indices
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn source_count(&self) -> usize {
        self.source_count
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn symmetries(&self) -> &SymmetrySet {
        &self.symmetries
    }

    pub fn with_symmetries(mut self, symmetries: SymmetrySet) -> Self {
        self.symmetries = symmetries;
        self
    }
}

/// Farthest-point sampling started from the lexicographically smallest
/// vertex. Returns indices in selection order; when `k >= len` every index
/// is returned in input order. Ties go to the lowest index.
pub fn subsample(points: &PointSet, k: usize) -> Vec<usize> {
    let n = points.len();
    if k >= n {
        return (0..n).collect();
    }
    if k == 0 {
        return Vec::new();
    }
    let pts = points.points();
    let start = (0..n)
        .min_by(|&a, &b| {
            let (p, q) = (&pts[a], &pts[b]);
            p.x.total_cmp(&q.x)
                .then(p.y.total_cmp(&q.y))
                .then(p.z.total_cmp(&q.z))
                .then(a.cmp(&b))
        })
        .unwrap();

    let mut chosen = Vec::with_capacity(k);
    let mut nearest = vec![f64::INFINITY; n];
    let mut current = start;
    for _ in 0..k {
        chosen.push(current);
        let c = pts[current];
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for (i, p) in pts.iter().enumerate() {
            let d = (p - c).norm_squared();
            if d < nearest[i] {
                nearest[i] = d;
            }
            if nearest[i] > best.0 {
                best = (nearest[i], i);
            }
        }
        current = best.1;
    }
    chosen
}

/// Maximum pairwise distance. Exact; pairs are pruned with the bound
/// `‖a − b‖ ≤ ‖a − c‖ + ‖b − c‖` around the centroid.
pub fn diameter(points: &PointSet) -> f64 {
    let pts = points.points();
    let c = pts.iter().sum::<Vec3>() / pts.len() as f64;
    let mut by_radius: Vec<(f64, usize)> = pts.iter().enumerate().map(|(i, p)| ((p - c).norm(), i)).collect();
    by_radius.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut best = 0.0f64;
    for (a, &(ra, ia)) in by_radius.iter().enumerate() {
        if 2.0 * ra <= best {
            break;
        }
        for &(rb, ib) in &by_radius[a + 1..] {
            if ra + rb <= best {
                break;
            }
            best = best.max((pts[ia] - pts[ib]).norm());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube() -> PointSet {
        let mut v = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    v.push([x, y, z]);
                }
            }
        }
        PointSet::from_arrays(&v).unwrap()
    }

    #[test]
    fn k_exceeding_count_returns_all() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pts = PointSet::new(
            (0..100)
                .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
                .collect(),
        )
        .unwrap();
        assert_eq!(subsample(&pts, 500), (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn cube_two_samples_are_opposite_corners() {
        let pts = cube();
        let idx = subsample(&pts, 2);
        let d = (pts[idx[0]] - pts[idx[1]]).norm();
        // exhaustive pair maximum
        let mut max = 0.0f64;
        for a in pts.iter() {
            for b in pts.iter() {
                max = max.max((a - b).norm());
            }
        }
        assert_eq!(d, max);
        assert_eq!(idx, vec![0, 7]);
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = PointSet::new(
            (0..2000)
                .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
                .collect(),
        )
        .unwrap();
        assert_eq!(subsample(&pts, 500), subsample(&pts, 500));
        let idx = subsample(&pts, 500);
        let mut sorted = idx.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 500);
    }

    #[test]
    fn diameter_matches_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let n = rng.random_range(2..300);
            let pts = PointSet::new(
                (0..n)
                    .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-0.2..0.2), rng.random()))
                    .collect(),
            )
            .unwrap();
            let mut max = 0.0f64;
            for a in pts.iter() {
                for b in pts.iter() {
                    max = max.max((a - b).norm());
                }
            }
            assert_eq!(diameter(&pts), max);
        }
        assert_eq!(diameter(&cube()), 3f64.sqrt());
    }

    #[test]
    fn model_uses_full_vertex_diameter() {
        let pts = cube();
        let m = SampledModel::from_vertices(1, &pts, SymmetrySet::identity_only(), 3).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.source_count(), 8);
        assert_eq!(m.diameter(), 3f64.sqrt());
        let single = PointSet::from_arrays(&[[1.0, 1.0, 1.0]]).unwrap();
        assert!(SampledModel::from_points(1, single, SymmetrySet::identity_only()).is_err());
    }
}

//! Scattered scalar-field snapshots and a bucket index for radius queries.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Sensor locations with scalar field values at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub time: f64,
    pub points: Vec<Point>,
    pub values: Vec<f64>,
}

impl FieldSnapshot {
    pub fn new(time: f64, points: Vec<Point>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Shape { expected: points.len(), found: values.len() });
        }
        Ok(Self { time, points, values })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Map from exact coordinates to point index, used to line up sensors across snapshots.
    pub fn position_lookup(&self) -> HashMap<(u64, u64), usize> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| (point_key(p), i))
            .collect()
    }

    /// Mean distance from each point to its nearest neighbour.
    pub fn mean_spacing(&self) -> Option<f64> {
        mean_nearest_spacing(&self.points)
    }
}

pub(crate) fn point_key(p: &Point) -> (u64, u64) {
    // -0.0 and 0.0 must collide
    ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits())
}

pub fn mean_nearest_spacing(points: &[Point]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let (lo, hi) = bounding_box(points);
    let area = ((hi[0] - lo[0]) * (hi[1] - lo[1])).max(f64::MIN_POSITIVE);
    // start the search radius at the spacing of a uniform cloud and grow until hit
    let guess = (area / points.len() as f64).sqrt().max(1e-12);
    let index = PointIndex::new(points, guess);
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let mut radius = guess;
        loop {
            let nearest = index
                .within(p, radius)
                .into_iter()
                .filter(|&j| j != i)
                .map(|j| dist(p, &points[j]))
                .fold(f64::INFINITY, f64::min);
            if nearest.is_finite() {
                total += nearest;
                break;
            }
            radius *= 2.0;
        }
    }
    Some(total / points.len() as f64)
}

pub fn bounding_box(points: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    (lo, hi)
}

#[inline]
pub fn dist(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Uniform bucket grid over a point cloud.
#[derive(Debug, Clone)]
pub struct PointIndex<'a> {
    points: &'a [Point],
    origin: Point,
    cell: f64,
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl<'a> PointIndex<'a> {
    pub fn new(points: &'a [Point], cell: f64) -> Self {
        let (lo, hi) = if points.is_empty() { ([0.0; 2], [0.0; 2]) } else { bounding_box(points) };
        let cell = if cell > 0.0 && cell.is_finite() { cell } else { 1.0 };
        let dims = [
            ((hi[0] - lo[0]) / cell).floor() as usize + 1,
            ((hi[1] - lo[1]) / cell).floor() as usize + 1,
        ];
        let mut buckets = vec![Vec::new(); dims[0] * dims[1]];
        for (i, p) in points.iter().enumerate() {
            let cx = (((p[0] - lo[0]) / cell) as usize).min(dims[0] - 1);
            let cy = (((p[1] - lo[1]) / cell) as usize).min(dims[1] - 1);
            buckets[cy * dims[0] + cx].push(i);
        }
        Self { points, origin: lo, cell, dims, buckets }
    }

    /// Indices of all points with |p - q| <= radius, in ascending index order.
    pub fn within(&self, q: &Point, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.points.is_empty() {
            return out;
        }
        let cell_range = |d: usize| {
            let lo = ((q[d] - radius - self.origin[d]) / self.cell).floor();
            let hi = ((q[d] + radius - self.origin[d]) / self.cell).floor();
            let max = (self.dims[d] - 1) as f64;
            if hi < 0.0 || lo > max {
                None
            } else {
                Some((lo.max(0.0) as usize, hi.min(max) as usize))
            }
        };
        let (Some((x0, x1)), Some((y0, y1))) = (cell_range(0), cell_range(1)) else {
            return out;
        };
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                for &i in &self.buckets[cy * self.dims[0] + cx] {
                    if dist(&self.points[i], q) <= radius {
                        out.push(i);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_matches_brute_force() {
        let pts: Vec<Point> = (0..400)
            .map(|k| {
                let t = k as f64 * 0.618_033_988_7;
                [(t * 7.3).sin() * 3.0, (t * 3.1).cos() * 2.0]
            })
            .collect();
        let index = PointIndex::new(&pts, 0.37);
        for q in [[0.0, 0.0], [2.9, -1.9], [-5.0, 5.0], [1.1, 0.4]] {
            for r in [0.1, 0.5, 1.3] {
                let brute: Vec<usize> =
                    (0..pts.len()).filter(|&i| dist(&pts[i], &q) <= r).collect();
                assert_eq!(index.within(&q, r), brute);
            }
        }
    }

    #[test]
    fn spacing_of_unit_grid() {
        let pts: Vec<Point> =
            (0..10).flat_map(|i| (0..10).map(move |j| [i as f64 * 0.5, j as f64 * 0.5])).collect();
        assert!((mean_nearest_spacing(&pts).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(FieldSnapshot::new(0.0, vec![[0.0, 0.0]], vec![]).is_err());
    }
}

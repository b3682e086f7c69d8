//! Peridynamic differential operator on scattered 2-D points.
//!
//! A point's family is every sample within the horizon `delta`. The PD functions
//! `g^{p1 p2}` are built from the Gaussian-weighted moment matrix of the family so
//! that the discrete sums `sum_j f(x + xi_j) g^{p}(xi_j) V_j` reproduce the value
//! and the first and second derivatives of any quadratic exactly.
//!
//! Derivatives in a rotated (corotational) frame are obtained by expressing the
//! relative positions `xi` in the rotated basis before the moments are assembled.

use nalgebra::{Matrix6, SymmetricEigen, Vector6};

use crate::error::{Error, Result};
use crate::field::{Point, PointIndex};

/// Horizon as a multiple of the mean point spacing.
pub const DEFAULT_HORIZON_FACTOR: f64 = 3.015;
/// Families whose nondimensional moment matrix is worse conditioned than this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

const B_DIAG: [f64; 6] = [1.0, 1.0, 1.0, 2.0, 2.0, 1.0];

/// `w(|xi|) = exp(-4 |xi|^2 / delta^2)`.
pub fn gaussian_weight(r: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {delta}")));
    }
    Ok((-4.0 * r * r / (delta * delta)).exp())
}

#[inline]
fn monomials(xi: [f64; 2]) -> [f64; 6] {
    let [a, b] = xi;
    [1.0, a, b, a * a, b * b, a * b]
}

/// Discretization parameters shared by every family of a point cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PddoParams {
    pub horizon: f64,
    /// Quadrature weight (cell area) carried by every neighbour.
    pub volume: f64,
}

impl PddoParams {
    /// Gridded data: horizon `3.015 h`, volume `h^2`.
    pub fn from_spacing(h: f64) -> Self {
        Self { horizon: DEFAULT_HORIZON_FACTOR * h, volume: h * h }
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !(self.volume > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon and volume must be positive (got {}, {})",
                self.horizon, self.volume
            )));
        }
        Ok(())
    }
}

/// Label carried by every derivative set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameTag {
    Cartesian,
    /// Angle of the local normal axis, radians.
    Corotational { angle: f64 },
}

/// Orthonormal axes in which relative positions are expressed.
///
/// Slot 1 of a [`DerivativeSet`] differentiates along `axes[0]`, slot 2 along `axes[1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub axes: [[f64; 2]; 2],
    pub tag: FrameTag,
}

impl Frame {
    pub fn cartesian() -> Self {
        Self { axes: [[1.0, 0.0], [0.0, 1.0]], tag: FrameTag::Cartesian }
    }

    /// Normal axis at `angle`, tangential axis the normal turned clockwise by 90 degrees.
    pub fn from_normal_angle(angle: f64) -> Self {
        if angle == 0.0 {
            return Self::cartesian();
        }
        let (s, c) = angle.sin_cos();
        Self { axes: [[c, s], [s, -c]], tag: FrameTag::Corotational { angle } }
    }

    /// Frame with explicit unit normal and tangent.
    pub fn corotational(normal: [f64; 2], tangent: [f64; 2]) -> Self {
        let angle = normal[1].atan2(normal[0]);
        Self { axes: [normal, tangent], tag: FrameTag::Corotational { angle } }
    }

    #[inline]
    pub fn project(&self, v: [f64; 2]) -> [f64; 2] {
        [
            v[0] * self.axes[0][0] + v[1] * self.axes[0][1],
            v[0] * self.axes[1][0] + v[1] * self.axes[1][1],
        ]
    }
}

/// Keep only points on the side of a line that `inward` points to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub origin: Point,
    pub inward: [f64; 2],
}

impl HalfPlane {
    #[inline]
    pub fn contains(&self, p: &Point) -> bool {
        (p[0] - self.origin[0]) * self.inward[0] + (p[1] - self.origin[1]) * self.inward[1] >= 0.0
    }
}

/// Where a family is centred: on a sample point, or at an arbitrary location
/// that carries no field value (e.g. a panel midpoint on an interface).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Center {
    Sample(usize),
    Location(Point),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub center: Point,
    pub center_id: Option<usize>,
    /// Sample ids; contains `center_id` when the centre is a sample.
    pub neighbors: Vec<usize>,
    /// Relative positions in the family's frame.
    pub xi: Vec<[f64; 2]>,
    pub volumes: Vec<f64>,
    pub horizon: f64,
    pub includes_center: bool,
    pub frame: Frame,
}

impl Family {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

/// Point cloud plus bucket index; builds families without scanning every point.
pub struct Neighborhood<'a> {
    points: &'a [Point],
    index: PointIndex<'a>,
    params: PddoParams,
}

impl<'a> Neighborhood<'a> {
    pub fn new(points: &'a [Point], params: PddoParams) -> Result<Self> {
        params.validate()?;
        if points.is_empty() {
            return Err(Error::InvalidParameter("empty point set".into()));
        }
        Ok(Self { points, index: PointIndex::new(points, params.horizon), params })
    }

    pub fn params(&self) -> PddoParams {
        self.params
    }

    pub fn points(&self) -> &'a [Point] {
        self.points
    }

    pub fn family(&self, center: Center, half_plane: Option<HalfPlane>, frame: Frame) -> Result<Family> {
        let (x, center_id) = match center {
            Center::Sample(i) => {
                let p = *self.points.get(i).ok_or_else(|| {
                    Error::InvalidParameter(format!("center id {i} out of range"))
                })?;
                (p, Some(i))
            }
            Center::Location(p) => (p, None),
        };
        let candidates = self.index.within(&x, self.params.horizon);
        let mut neighbors = Vec::with_capacity(candidates.len());
        let mut xi = Vec::with_capacity(candidates.len());
        for j in candidates {
            let p = &self.points[j];
            if let Some(hp) = &half_plane {
                if !hp.contains(p) {
                    continue;
                }
            }
            neighbors.push(j);
            xi.push(frame.project([p[0] - x[0], p[1] - x[1]]));
        }
        let includes_center = center_id.is_some_and(|c| neighbors.contains(&c));
        if neighbors.len() < 6 {
            return Err(Error::DegenerateFamily {
                center: center_id.unwrap_or(usize::MAX),
                neighbors: neighbors.len(),
            });
        }
        let volumes = vec![self.params.volume; neighbors.len()];
        Ok(Family {
            center: x,
            center_id,
            neighbors,
            xi,
            volumes,
            horizon: self.params.horizon,
            includes_center,
            frame,
        })
    }
}

/// One-shot family construction (builds a throwaway index).
pub fn build_family(
    points: &[Point],
    center: Center,
    params: PddoParams,
    half_plane: Option<HalfPlane>,
    frame: Frame,
) -> Result<Family> {
    Neighborhood::new(points, params)?.family(center, half_plane, frame)
}

/// Weighted discrete moments of `(1, xi1, xi2, xi1^2, xi2^2, xi1 xi2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentMatrix(pub Matrix6<f64>);

pub fn assemble_moment_matrix(family: &Family) -> MomentMatrix {
    let mut a = Matrix6::zeros();
    for (xi, v) in family.xi.iter().zip(&family.volumes) {
        let r = xi[0].hypot(xi[1]);
        let w = (-4.0 * r * r / (family.horizon * family.horizon)).exp() * v;
        let m = monomials(*xi);
        for i in 0..6 {
            for j in i..6 {
                a[(i, j)] += w * m[i] * m[j];
            }
        }
    }
    for i in 0..6 {
        for j in 0..i {
            a[(i, j)] = a[(j, i)];
        }
    }
    MomentMatrix(a)
}

/// Coefficients `a^{p}_{q}` (row `p`) of the six PD functions and their
/// per-neighbour values already multiplied by the neighbour volume.
#[derive(Debug, Clone, PartialEq)]
pub struct PdFunctions {
    pub coefficients: Matrix6<f64>,
    pub weights: Vec<[f64; 6]>,
}

/// Solve `A a = b`. The conditioning test runs on the moment matrix made
/// nondimensional with the horizon, so it does not depend on the length unit.
pub fn solve_pd_coefficients(moments: &MomentMatrix, horizon: f64) -> Result<Matrix6<f64>> {
    let a = &moments.0;
    let d = Vector6::new(
        1.0,
        1.0 / horizon,
        1.0 / horizon,
        1.0 / (horizon * horizon),
        1.0 / (horizon * horizon),
        1.0 / (horizon * horizon),
    );
    let scaled = Matrix6::from_fn(|i, j| a[(i, j)] * d[i] * d[j]);
    let eig = SymmetricEigen::new(scaled);
    let max = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditionedFamily { condition });
    }
    let chol = scaled
        .cholesky()
        .ok_or(Error::IllConditionedFamily { condition: f64::INFINITY })?;
    // A = D^-1 S D^-1  =>  A^-1 b = D S^-1 D b, and b is diagonal
    let rhs = Matrix6::from_fn(|i, j| if i == j { d[i] * B_DIAG[i] } else { 0.0 });
    let sol = chol.solve(&rhs);
    let coeffs = Matrix6::from_fn(|i, j| d[i] * sol[(i, j)]);
    // columns of `coeffs` are a^p; store rows as functions
    let out = coeffs.transpose();
    let residual = (a * coeffs - Matrix6::from_diagonal(&Vector6::from(B_DIAG)))
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        / 2.0;
    if !(residual <= 1e-9) {
        return Err(Error::IllConditionedFamily { condition });
    }
    Ok(out)
}

pub fn solve_pd_functions(family: &Family, moments: &MomentMatrix) -> Result<PdFunctions> {
    let coefficients = solve_pd_coefficients(moments, family.horizon)?;
    let weights = family
        .xi
        .iter()
        .zip(&family.volumes)
        .map(|(xi, v)| {
            let r = xi[0].hypot(xi[1]);
            let w = (-4.0 * r * r / (family.horizon * family.horizon)).exp();
            let m = monomials(*xi);
            let mut g = [0.0; 6];
            for (p, gp) in g.iter_mut().enumerate() {
                let mut s = 0.0;
                for q in 0..6 {
                    s += coefficients[(p, q)] * m[q];
                }
                *gp = s * w * v;
            }
            g
        })
        .collect();
    Ok(PdFunctions { coefficients, weights })
}

impl PdFunctions {
    pub fn for_family(family: &Family) -> Result<Self> {
        solve_pd_functions(family, &assemble_moment_matrix(family))
    }

    /// Max deviation of `(1/n1!n2!) sum_j xi^n g^p V_j` from the Kronecker delta.
    pub fn orthogonality_residual(&self, family: &Family) -> f64 {
        let mut worst = 0.0_f64;
        for p in 0..6 {
            for n in 0..6 {
                let s: f64 = family
                    .xi
                    .iter()
                    .zip(&self.weights)
                    .map(|(xi, g)| monomials(*xi)[n] * g[p])
                    .sum::<f64>()
                    / B_DIAG[n];
                let target = if n == p { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }
}

/// Value and derivatives up to second order at a family centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeSet {
    pub f: f64,
    pub f1: f64,
    pub f2: f64,
    pub f11: f64,
    pub f22: f64,
    pub f12: f64,
    pub frame: FrameTag,
}

impl DerivativeSet {
    pub fn laplacian(&self) -> f64 {
        self.f11 + self.f22
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.f, self.f1, self.f2, self.f11, self.f22, self.f12]
    }
}

/// Discrete PD integrals of `field` (indexed by sample id) over the family.
pub fn evaluate_derivatives(field: &[f64], family: &Family, pd: &PdFunctions) -> Result<DerivativeSet> {
    let mut acc = [0.0; 6];
    for (&j, g) in family.neighbors.iter().zip(&pd.weights) {
        let f = *field
            .get(j)
            .ok_or_else(|| Error::IncompleteData(format!("no field value for sample {j}")))?;
        if !f.is_finite() {
            return Err(Error::IncompleteData(format!("non-finite field value at sample {j}")));
        }
        for p in 0..6 {
            acc[p] += f * g[p];
        }
    }
    if acc.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditionedFamily { condition: f64::INFINITY });
    }
    Ok(DerivativeSet {
        f: acc[0],
        f1: acc[1],
        f2: acc[2],
        f11: acc[3],
        f22: acc[4],
        f12: acc[5],
        frame: family.frame.tag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, h: f64) -> Vec<Point> {
        (0..n).flat_map(|i| (0..n).map(move |j| [i as f64 * h, j as f64 * h])).collect()
    }

    #[test]
    fn gaussian_weight_values() {
        assert_eq!(gaussian_weight(0.0, 0.3).unwrap(), 1.0);
        assert!((gaussian_weight(0.3, 0.3).unwrap() - (-4.0f64).exp()).abs() < 1e-15);
        assert!((gaussian_weight(0.15, 0.3).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-12);
        assert!(gaussian_weight(0.1, 0.0).is_err());
        assert!(gaussian_weight(0.1, -1.0).is_err());
    }

    #[test]
    fn lattice_family_count() {
        // lattice points with i^2 + j^2 <= 9 other than the origin
        let brute = (-3i32..=3)
            .flat_map(|i| (-3i32..=3).map(move |j| (i, j)))
            .filter(|&(i, j)| i * i + j * j <= 9 && (i, j) != (0, 0))
            .count();
        assert_eq!(brute, 28);
        let pts = grid(11, 0.1);
        let center = 5 * 11 + 5;
        let fam = build_family(
            &pts,
            Center::Sample(center),
            PddoParams { horizon: 0.3 + 1e-12, volume: 0.01 },
            None,
            Frame::cartesian(),
        )
        .unwrap();
        assert!(fam.includes_center);
        assert_eq!(fam.len() - 1, brute);
    }

    #[test]
    fn tiny_horizon_is_degenerate() {
        let pts = grid(5, 1.0);
        let err = build_family(&pts, Center::Sample(12), PddoParams::from_spacing(0.1), None, Frame::cartesian());
        assert!(matches!(err, Err(Error::DegenerateFamily { center: 12, .. })));
    }

    #[test]
    fn half_plane_filter() {
        let pts = grid(11, 0.1);
        let hp = HalfPlane { origin: [0.52, 0.5], inward: [-1.0, 0.0] };
        let fam = build_family(
            &pts,
            Center::Location([0.52, 0.5]),
            PddoParams::from_spacing(0.1),
            Some(hp),
            Frame::cartesian(),
        )
        .unwrap();
        assert!(!fam.includes_center);
        for &j in &fam.neighbors {
            assert!(hp.contains(&pts[j]));
            assert!(pts[j][0] <= 0.52);
        }
    }

    #[test]
    fn symmetric_family_has_zero_odd_moments() {
        let h = 0.1;
        let fam = Family {
            center: [0.0, 0.0],
            center_id: None,
            neighbors: vec![0, 1, 2, 3],
            xi: vec![[h, 0.0], [-h, 0.0], [0.0, h], [0.0, -h]],
            volumes: vec![1.0; 4],
            horizon: 0.3,
            includes_center: false,
            frame: Frame::cartesian(),
        };
        let a = assemble_moment_matrix(&fam).0;
        // (1, xi1), (1, xi2), (xi1, xi2), (xi1, xi1^2) ...
        for (i, j) in [(0, 1), (0, 2), (1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (0, 5), (3, 5), (4, 5)] {
            assert_eq!(a[(i, j)], 0.0, "entry ({i},{j})");
        }
    }

    #[test]
    fn moment_matrix_matches_brute_force() {
        let pts = grid(9, 0.1);
        let fam = build_family(&pts, Center::Sample(40), PddoParams::from_spacing(0.1), None, Frame::cartesian()).unwrap();
        let a = assemble_moment_matrix(&fam).0;
        let c = pts[40];
        let delta = fam.horizon;
        let pows = [(0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1)];
        for (i, &(a1, a2)) in pows.iter().enumerate() {
            for (j, &(b1, b2)) in pows.iter().enumerate() {
                let mut s = 0.0;
                for p in &pts {
                    let (x1, x2) = (p[0] - c[0], p[1] - c[1]);
                    let r2 = x1 * x1 + x2 * x2;
                    if r2.sqrt() <= delta {
                        s += (-4.0 * r2 / (delta * delta)).exp()
                            * x1.powi(a1 + b1)
                            * x2.powi(a2 + b2)
                            * 0.01;
                    }
                }
                assert!((a[(i, j)] - s).abs() <= 1e-12, "({i},{j}) {} vs {s}", a[(i, j)]);
            }
        }
        assert_eq!(a, a.transpose());
    }

    #[test]
    fn collinear_family_is_ill_conditioned() {
        let pts: Vec<Point> = (0..10).map(|i| [i as f64 * 0.1, 0.0]).collect();
        let fam = build_family(&pts, Center::Sample(5), PddoParams { horizon: 0.5, volume: 0.01 }, None, Frame::cartesian()).unwrap();
        let err = PdFunctions::for_family(&fam);
        assert!(matches!(err, Err(Error::IllConditionedFamily { .. })));
    }

    #[test]
    fn solve_residual_and_b_structure() {
        let pts = grid(9, 0.1);
        let fam = build_family(&pts, Center::Sample(40), PddoParams::from_spacing(0.1), None, Frame::cartesian()).unwrap();
        let m = assemble_moment_matrix(&fam);
        let coeffs = solve_pd_coefficients(&m, fam.horizon).unwrap();
        let b = m.0 * coeffs.transpose();
        let expect = Matrix6::from_diagonal(&Vector6::new(1.0, 1.0, 1.0, 2.0, 2.0, 1.0));
        let resid = (b - expect).iter().fold(0.0_f64, |x, v| x.max(v.abs())) / 2.0;
        assert!(resid <= 1e-9);
        assert_eq!(expect[(3, 3)], 2.0);
        assert_eq!(expect[(4, 4)], 2.0);
        let pd = solve_pd_functions(&fam, &m).unwrap();
        assert!(pd.orthogonality_residual(&fam) <= 1e-9);
    }

    fn derivs(pts: &[Point], f: impl Fn(f64, f64) -> f64, center: usize, frame: Frame) -> DerivativeSet {
        let values: Vec<f64> = pts.iter().map(|p| f(p[0], p[1])).collect();
        let fam = build_family(pts, Center::Sample(center), PddoParams::from_spacing(0.1), None, frame).unwrap();
        let pd = PdFunctions::for_family(&fam).unwrap();
        evaluate_derivatives(&values, &fam, &pd).unwrap()
    }

    #[test]
    fn constant_and_quadratic_reproduction() {
        let pts = grid(11, 0.1);
        let d = derivs(&pts, |_, _| 3.25, 60, Frame::cartesian());
        for (v, e) in d.as_array().iter().zip([3.25, 0.0, 0.0, 0.0, 0.0, 0.0]) {
            assert!((v - e).abs() < 1e-10);
        }
        let d = derivs(&pts, |x, _| x * x, 60, Frame::cartesian());
        assert!((d.f11 - 2.0).abs() < 1e-10);
    }

    #[test]
    fn sine_first_derivative() {
        let pts = grid(21, 0.1);
        for c in [10 * 21 + 10, 7 * 21 + 12, 12 * 21 + 5] {
            let d = derivs(&pts, |x, _| x.sin(), c, Frame::cartesian());
            // leading truncation term is f''' <xi^4 w> / (6 <xi^2 w>), about 4.3e-3 |cos x| here
            assert!((d.f1 - pts[c][0].cos()).abs() <= 5e-3);
        }
    }

    #[test]
    fn sine_error_shrinks_with_spacing() {
        let mut last = f64::INFINITY;
        for h in [0.2, 0.1, 0.05, 0.025] {
            let n = (2.0 / h) as usize + 1;
            let pts = grid(n, h);
            let c = (n / 2) * n + n / 2;
            let values: Vec<f64> = pts.iter().map(|p| (p[0] + 0.3).sin()).collect();
            let fam = build_family(&pts, Center::Sample(c), PddoParams::from_spacing(h), None, Frame::cartesian()).unwrap();
            let pd = PdFunctions::for_family(&fam).unwrap();
            let d = evaluate_derivatives(&values, &fam, &pd).unwrap();
            let err = (d.f1 - (pts[c][0] + 0.3).cos()).abs();
            assert!(err < last, "h={h} err={err} previous={last}");
            last = err;
        }
    }

    #[test]
    fn rotated_frame_of_linear_field() {
        let pts = grid(11, 0.1);
        let d = derivs(&pts, |x, _| x, 60, Frame::from_normal_angle(std::f64::consts::FRAC_PI_2));
        assert!(d.f1.abs() < 1e-10, "normal slot {}", d.f1);
        assert!((d.f2 - 1.0).abs() < 1e-10, "tangent slot {}", d.f2);
        assert!(matches!(d.frame, FrameTag::Corotational { .. }));
    }

    #[test]
    fn missing_value_is_reported() {
        let pts = grid(11, 0.1);
        let fam = build_family(&pts, Center::Sample(60), PddoParams::from_spacing(0.1), None, Frame::cartesian()).unwrap();
        let pd = PdFunctions::for_family(&fam).unwrap();
        let short = vec![0.0; 30];
        assert!(matches!(evaluate_derivatives(&short, &fam, &pd), Err(Error::IncompleteData(_))));
    }
}

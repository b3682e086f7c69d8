use mbsindy::field::Point;
use mbsindy::pddo::{
    assemble_moment_matrix, build_family, evaluate_derivatives, Center, Frame, HalfPlane, Neighborhood, PdFunctions,
    PddoParams,
};
use proptest::prelude::*;

fn lattice(n: usize, h: f64) -> Vec<Point> {
    (0..n).flat_map(|i| (0..n).map(move |j| [i as f64 * h, j as f64 * h])).collect()
}

/// `q(x, y) = c0 + c1 x + c2 y + c3 x^2 + c4 y^2 + c5 x y` and its derivatives along `frame`.
fn quadratic(c: &[f64; 6], p: Point) -> f64 {
    c[0] + c[1] * p[0] + c[2] * p[1] + c[3] * p[0] * p[0] + c[4] * p[1] * p[1] + c[5] * p[0] * p[1]
}

fn analytic(c: &[f64; 6], p: Point, frame: &Frame) -> [f64; 6] {
    let g = [c[1] + 2.0 * c[3] * p[0] + c[5] * p[1], c[2] + 2.0 * c[4] * p[1] + c[5] * p[0]];
    let hess = [[2.0 * c[3], c[5]], [c[5], 2.0 * c[4]]];
    let [a, b] = frame.axes;
    let d = |u: [f64; 2], v: [f64; 2]| {
        u[0] * (hess[0][0] * v[0] + hess[0][1] * v[1]) + u[1] * (hess[1][0] * v[0] + hess[1][1] * v[1])
    };
    [
        quadratic(c, p),
        g[0] * a[0] + g[1] * a[1],
        g[0] * b[0] + g[1] * b[1],
        d(a, a),
        d(b, b),
        d(a, b),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadratics_are_reproduced_in_any_frame(
        c in prop::array::uniform6(-3.0f64..3.0),
        ci in 3usize..12,
        cj in 3usize..12,
        angle in 0.0f64..std::f64::consts::TAU,
    ) {
        let pts = lattice(15, 0.1);
        let frame = Frame::from_normal_angle(angle);
        let center = ci * 15 + cj;
        let values: Vec<f64> = pts.iter().map(|p| quadratic(&c, *p)).collect();
        let fam = build_family(&pts, Center::Sample(center), PddoParams::from_spacing(0.1), None, frame).unwrap();
        let pd = PdFunctions::for_family(&fam).unwrap();
        let got = evaluate_derivatives(&values, &fam, &pd).unwrap().as_array();
        let want = analytic(&c, pts[center], &frame);
        for k in 0..6 {
            prop_assert!((got[k] - want[k]).abs() < 1e-9, "slot {k}: {} vs {}", got[k], want[k]);
        }
    }

    #[test]
    fn half_plane_families_stay_exact(
        c in prop::array::uniform6(-2.0f64..2.0),
        angle in 0.0f64..std::f64::consts::TAU,
        offset in 0.0f64..0.1,
    ) {
        let pts = lattice(21, 0.1);
        let (s, co) = angle.sin_cos();
        let x0 = [1.0 + offset * co, 1.0 + offset * s];
        let params = PddoParams { horizon: 4.015 * 0.1, volume: 0.01 };
        let frame = Frame::corotational([co, s], [-s, co]);
        let hp = HalfPlane { origin: x0, inward: [-co, -s] };
        let values: Vec<f64> = pts.iter().map(|p| quadratic(&c, *p)).collect();
        let fam = Neighborhood::new(&pts, params).unwrap().family(Center::Location(x0), Some(hp), frame).unwrap();
        let pd = PdFunctions::for_family(&fam).unwrap();
        let got = evaluate_derivatives(&values, &fam, &pd).unwrap().as_array();
        let want = analytic(&c, x0, &frame);
        for k in 0..6 {
            prop_assert!((got[k] - want[k]).abs() < 1e-8, "slot {k}: {} vs {}", got[k], want[k]);
        }
    }

    #[test]
    fn laplacian_is_frame_invariant(angle in 0.0f64..std::f64::consts::TAU, ci in 4usize..16, cj in 4usize..16) {
        let pts = lattice(21, 0.1);
        let center = ci * 21 + cj;
        let values: Vec<f64> = pts.iter().map(|p| p[0].sin() * p[1].cos()).collect();
        let lap = |frame: Frame| {
            let fam = build_family(&pts, Center::Sample(center), PddoParams::from_spacing(0.1), None, frame).unwrap();
            let pd = PdFunctions::for_family(&fam).unwrap();
            evaluate_derivatives(&values, &fam, &pd).unwrap().laplacian()
        };
        prop_assert!((lap(Frame::from_normal_angle(angle)) - lap(Frame::cartesian())).abs() <= 1e-6);
    }

    #[test]
    fn moment_matrix_is_exactly_symmetric(angle in 0.0f64..std::f64::consts::TAU, jitter in prop::collection::vec(-0.03f64..0.03, 2 * 81)) {
        let pts: Vec<Point> = lattice(9, 0.1).iter().enumerate().map(|(k, p)| [p[0] + jitter[2 * k], p[1] + jitter[2 * k + 1]]).collect();
        let fam = build_family(&pts, Center::Sample(40), PddoParams::from_spacing(0.1), None, Frame::from_normal_angle(angle)).unwrap();
        let a = assemble_moment_matrix(&fam).0;
        prop_assert_eq!(a, a.transpose());
        let pd = PdFunctions::for_family(&fam).unwrap();
        prop_assert!(pd.orthogonality_residual(&fam) <= 1e-9);
    }
}

#[test]
fn rotating_a_linear_field_swaps_slots() {
    let pts = lattice(11, 0.1);
    let values: Vec<f64> = pts.iter().map(|p| p[0]).collect();
    let fam = build_family(&pts, Center::Sample(60), PddoParams::from_spacing(0.1), None, Frame::from_normal_angle(std::f64::consts::FRAC_PI_2)).unwrap();
    let pd = PdFunctions::for_family(&fam).unwrap();
    let d = evaluate_derivatives(&values, &fam, &pd).unwrap();
    assert!(d.f1.abs() < 1e-10);
    assert!((d.f2 - 1.0).abs() < 1e-10);
}

use std::sync::OnceLock;

use mbsindy::geometry::{BoundaryCurve, VelocityMethod};
use mbsindy::library::{build_fisher_system, build_stefan_system, FisherConfig, StefanConfig};
use mbsindy::sim::{replay_boundary, replay_field, simulate, Dataset, Front, Perturbation, SimParams};

fn planar() -> &'static Dataset {
    static D: OnceLock<Dataset> = OnceLock::new();
    D.get_or_init(|| simulate(&SimParams::planar(), 0).unwrap())
}

fn mean_x(c: &BoundaryCurve) -> f64 {
    c.points.iter().map(|p| p[0]).sum::<f64>() / c.points.len() as f64
}

fn hausdorff(a: &BoundaryCurve, b: &BoundaryCurve) -> f64 {
    let one = |a: &BoundaryCurve, b: &BoundaryCurve| {
        a.points
            .iter()
            .map(|p| b.points.iter().map(|q| (p[0] - q[0]).hypot(p[1] - q[1])).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

fn index_at(d: &Dataset, t: f64) -> usize {
    d.curves.iter().position(|c| (c.time - t).abs() < 1e-9).unwrap()
}

#[test]
fn field_stays_in_bounds_and_front_advances() {
    let d = planar();
    for s in &d.snapshots {
        assert!(s.values.iter().all(|&u| (-1e-10..=1.0 + 1e-10).contains(&u)));
    }
    for w in d.curves.windows(2) {
        assert!(mean_x(&w[1]) >= mean_x(&w[0]));
        assert!(w[0].time < w[1].time);
    }
    let times: Vec<f64> = d.snapshots.iter().map(|s| s.time).collect();
    assert_eq!(times, d.curves.iter().map(|c| c.time).collect::<Vec<_>>());
}

#[test]
fn front_position_self_converges() {
    let at = |h: f64, dt: f64| {
        let p = SimParams {
            dx: h,
            dy: h,
            dt,
            t_end: 2.0,
            extent: [10.0, 1.0],
            perturbation: Perturbation { amplitude: 0.0, modes: vec![] },
            snapshot_stride: (2.0 / dt).round() as usize,
            ..SimParams::planar()
        };
        let d = simulate(&p, 0).unwrap();
        mean_x(d.curves.last().unwrap())
    };
    let coarse = at(0.1, 0.002);
    let fine = at(0.05, 0.0005);
    let start = SimParams::planar().front0;
    assert!(fine > start + 0.1, "front barely moved: {fine}");
    assert!((coarse - fine).abs() / fine < 0.02, "coarse {coarse}, fine {fine}");
}

#[test]
fn stefan_residual_closes() {
    let d = planar();
    let p = &d.manifest.params;
    let sys = build_stefan_system(&d.snapshots, &d.curves, &StefanConfig::for_spacing(p.dx)).unwrap();
    let u_xn = sys.matrix.column(2);
    let pred = u_xn.map(|g| -p.kappa * g);
    let rms = ((&sys.velocity - &pred).norm_squared() / sys.velocity.norm_squared()).sqrt();
    assert!(rms <= 0.10, "relative rms {rms}");
    let fit = sys.velocity.dot(&u_xn) / u_xn.norm_squared();
    assert!((fit + p.kappa).abs() <= 0.1 * p.kappa, "least-squares coefficient {fit}");
    for i in 0..sys.nrows() {
        let r = sys.matrix.row(i);
        assert!((r[10] - r[7] - r[8]).abs() <= 1e-10 * r[10].abs().max(1.0));
    }
}

#[test]
fn nearest_speed_bounds_projected_speed() {
    let d = planar();
    let h = d.manifest.params.dx;
    let build = |velocity| {
        let cfg = StefanConfig { velocity, ..StefanConfig::for_spacing(h) };
        build_stefan_system(&d.snapshots[..6], &d.curves[..6], &cfg).unwrap().velocity
    };
    let projected = build(VelocityMethod::Projected);
    let nearest = build(VelocityMethod::NearestNorm);
    for (a, b) in projected.iter().zip(nearest.iter()) {
        assert!(*a <= b + 1e-12);
    }
}

#[test]
fn fisher_laplacian_column_is_the_sum() {
    let d = planar();
    let g = d.manifest.params.grid();
    let cfg = FisherConfig {
        space_stride: 7,
        time_stride: 10,
        domain: Some((g.origin, [(g.nx - 1) as f64 * g.dx, (g.ny - 1) as f64 * g.dy])),
        ..FisherConfig::for_spacing(g.dx)
    };
    let sys = build_fisher_system(&d.snapshots, &d.curves, &cfg).unwrap();
    assert!(sys.nrows() > 100);
    for i in 0..sys.nrows() {
        let r = sys.matrix.row(i);
        assert!((r[3] - r[6] - r[8]).abs() <= 1e-10 * r[3].abs().max(1.0));
        assert!((r[2] - r[1] * r[1]).abs() <= 1e-12);
    }
}

#[test]
fn true_coefficient_replays_the_recorded_front() {
    let d = planar();
    let k = index_at(d, 2.0);
    let band = replay_boundary(d, [-0.5; 3], 2.0).unwrap();
    assert_eq!(band.area, 0.0);
    assert!(hausdorff(&band.median, &d.curves[k]) <= 2.0 * d.manifest.params.dx);

    let band = replay_boundary(d, [-0.6, -0.4, -0.5], 2.0).unwrap();
    for ((l, m), u) in band.lower.points.iter().zip(&band.median.points).zip(&band.upper.points) {
        assert!(l[0] < m[0] && m[0] < u[0]);
    }
    let lo = Front::from_curve(&band.lower).unwrap();
    let hi = Front::from_curve(&band.upper).unwrap();
    assert!((Front::area_between(&lo, &hi).unwrap() - band.area).abs() < 1e-12);
}

#[test]
fn diffusion_only_model_drifts_away() {
    let d = planar();
    let mut m = vec![0.0; 10];
    m[3] = 1.0;
    let errs: Vec<f64> = [0.25, 0.5, 1.0, 2.0].iter().map(|&t| replay_field(d, &m, t).unwrap().max_error).collect();
    assert!(errs[0] > 1e-3);
    assert!(errs.windows(2).all(|w| w[1] > w[0]), "{errs:?}");
}

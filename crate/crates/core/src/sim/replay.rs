//! Forward replay of recovered models.

use log::warn;
use rayon::prelude::*;

use super::{run, Dataset, Drive, Front, Model};
use crate::error::{Error, Result};
use crate::field::FieldSnapshot;
use crate::geometry::BoundaryCurve;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBand {
    pub t_target: f64,
    /// Front speed coefficients used for the lower, median and upper runs.
    pub kappas: [f64; 3],
    pub lower: BoundaryCurve,
    pub median: BoundaryCurve,
    pub upper: BoundaryCurve,
    /// Area enclosed between the lower and upper fronts.
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldReplay {
    pub t_target: f64,
    pub reference: FieldSnapshot,
    pub recovered: FieldSnapshot,
    /// `|recovered - reference|` per node of `reference`.
    pub error: Vec<f64>,
    pub max_error: f64,
}

fn steps_to(dataset: &Dataset, t_target: f64, dt_max: f64) -> Result<(f64, usize)> {
    let p = &dataset.manifest.params;
    if !(t_target >= 0.0 && t_target <= p.t_end * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!("replay time {t_target} outside [0, {}]", p.t_end)));
    }
    let steps = (t_target / dt_max).ceil().max(0.0) as usize;
    if steps == 0 {
        return Ok((dt_max, 0));
    }
    Ok((t_target / steps as f64, steps))
}

/// Re-run the coupled solve with front coefficients `-c` for each of the three
/// Stefan coefficient values (typically the interval ends and the median).
pub fn replay_boundary(dataset: &Dataset, coefficient_values: [f64; 3], t_target: f64) -> Result<ReplayBand> {
    if coefficient_values.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("replay coefficients must be finite".into()));
    }
    let params = &dataset.manifest.params;
    let mut kappas = coefficient_values.map(|c| -c);
    kappas.sort_by(|a, b| a.total_cmp(b));
    if kappas[0] < 0.0 {
        warn!("front coefficient {:.3e} gives a receding front", kappas[0]);
    }
    let (dt, steps) = steps_to(dataset, t_target, params.dt.min(params.cfl_limit()))?;
    let fronts: Vec<Result<Front>> = kappas
        .par_iter()
        .map(|&kappa| run(params, Model::fisher_kpp(), Drive::Stefan { kappa }, dt, steps, None).map(|o| o.front))
        .collect();
    let mut it = fronts.into_iter();
    let (lo, mid, hi) = (it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?);
    let area = Front::area_between(&lo, &hi)?;
    Ok(ReplayBand {
        t_target,
        kappas,
        lower: lo.to_curve(t_target)?,
        median: mid.to_curve(t_target)?,
        upper: hi.to_curve(t_target)?,
        area,
    })
}

/// Solve the reference reaction-diffusion model and the recovered one under the
/// dataset's recorded front motion and compare them at `t_target`.
pub fn replay_field(dataset: &Dataset, coefficients: &[f64], t_target: f64) -> Result<FieldReplay> {
    let recovered = Model::from_slice(coefficients)?;
    recovered.check_well_posed()?;
    let reference = Model::from_slice(&dataset.manifest.truth.fisher)?;
    let params = &dataset.manifest.params;
    let grid = params.grid();
    let dt_max = params
        .dt
        .min(super::CFL_SAFETY * recovered.stable_dt(&grid))
        .min(super::CFL_SAFETY * reference.stable_dt(&grid));
    let (dt, steps) = steps_to(dataset, t_target, dt_max)?;
    let outs: Vec<Result<FieldSnapshot>> = [reference, recovered]
        .par_iter()
        .map(|&m| run(params, m, Drive::Prescribed(&dataset.curves), dt, steps, None).map(|o| o.solver.snapshot(t_target)))
        .collect();
    let mut it = outs.into_iter();
    let (a, b) = (it.next().unwrap()?, it.next().unwrap()?);
    let error: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).collect();
    let max_error = error.iter().copied().fold(0.0, f64::max);
    Ok(FieldReplay { t_target, reference: a, recovered: b, error, max_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate, SimParams};

    fn small() -> Dataset {
        let p = SimParams { extent: [4.0, 2.0], front0: 1.5, t_end: 0.4, snapshot_stride: 20, ..SimParams::planar() };
        simulate(&p, 0).unwrap()
    }

    #[test]
    fn boundary_band_cases() {
        let d = small();
        let same = replay_boundary(&d, [-0.5; 3], 0.4).unwrap();
        assert_eq!(same.area, 0.0);
        let last = d.curves.last().unwrap();
        for (a, b) in same.median.points.iter().zip(&last.points) {
            assert!((a[0] - b[0]).abs() < 1e-12);
        }
        let band = replay_boundary(&d, [-0.4, -0.6, -0.5], 0.4).unwrap();
        assert_eq!(band.kappas, [0.4, 0.5, 0.6]);
        for ((l, m), u) in band.lower.points.iter().zip(&band.median.points).zip(&band.upper.points) {
            assert!(l[0] < m[0] && m[0] < u[0]);
        }
        assert!(band.area > 0.0);
        assert!(replay_boundary(&d, [0.0, f64::NAN, 0.0], 0.4).is_err());
        assert!(replay_boundary(&d, [-0.5; 3], 1.0).is_err());
    }

    #[test]
    fn field_replay_cases() {
        let d = small();
        let exact = replay_field(&d, &d.manifest.truth.fisher.clone(), 0.4).unwrap();
        assert!(exact.max_error < 1e-10);
        let mut off = d.manifest.truth.fisher.clone();
        off[3] = 0.9;
        assert!(replay_field(&d, &off, 0.4).unwrap().max_error > 1e-4);
        off[3] = -0.1;
        assert!(matches!(replay_field(&d, &off, 0.4), Err(Error::IllPosedModel(_))));
    }
}

//! Candidate libraries and feature-matrix assembly for the two discovery problems.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldSnapshot, Point};
use crate::geometry::{normal_velocity, panels_from_curve, signed_distance, BoundaryCurve, VelocityMethod};
use crate::pddo::{evaluate_derivatives, Center, DerivativeSet, Frame, HalfPlane, Neighborhood, PdFunctions, PddoParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Stefan,
    Fisher,
}

impl std::fmt::Display for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Problem::Stefan => "stefan",
            Problem::Fisher => "fisher",
        })
    }
}

/// Index into `[f, f1, f2, f11, f22, f12]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    One,
    Slot(usize),
    Product(usize, usize),
    /// `f11 + f22`
    Laplacian,
}

impl Term {
    fn eval(&self, d: &[f64; 6]) -> f64 {
        match *self {
            Term::One => 1.0,
            Term::Slot(i) => d[i],
            Term::Product(i, j) => d[i] * d[j],
            Term::Laplacian => d[3] + d[4],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateLibrary {
    pub names: Vec<String>,
    pub terms: Vec<Term>,
}

impl CandidateLibrary {
    fn from_pairs(pairs: &[(&str, Term)]) -> Self {
        Self {
            names: pairs.iter().map(|(n, _)| n.to_string()).collect(),
            terms: pairs.iter().map(|&(_, t)| t).collect(),
        }
    }

    /// Derivatives in the interface frame (normal `xn`, tangent `xt`).
    pub fn stefan() -> Self {
        use Term::*;
        Self::from_pairs(&[
            ("1", One),
            ("u", Slot(0)),
            ("u_xn", Slot(1)),
            ("u_xt", Slot(2)),
            ("u_xn*u_xn", Product(1, 1)),
            ("u_xn*u_xt", Product(1, 2)),
            ("u_xt*u_xt", Product(2, 2)),
            ("u_xnxn", Slot(3)),
            ("u_xtxt", Slot(4)),
            ("u_xnxt", Slot(5)),
            ("u_xnxn+u_xtxt", Laplacian),
        ])
    }

    /// Cartesian derivatives.
    pub fn fisher() -> Self {
        use Term::*;
        Self::from_pairs(&[
            ("1", One),
            ("u", Slot(0)),
            ("u^2", Product(0, 0)),
            ("lap(u)", Laplacian),
            ("u_x", Slot(1)),
            ("u_y", Slot(2)),
            ("u_xx", Slot(3)),
            ("u_xy", Slot(5)),
            ("u_yy", Slot(4)),
            ("u_y*u_xx", Product(2, 3)),
        ])
    }

    pub fn for_problem(problem: Problem) -> Self {
        match problem {
            Problem::Stefan => Self::stefan(),
            Problem::Fisher => Self::fisher(),
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn row(&self, d: &DerivativeSet) -> Vec<f64> {
        let a = d.as_array();
        self.terms.iter().map(|t| t.eval(&a)).collect()
    }
}

/// Which panel or sample, at which snapshot, produced a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowTag {
    pub site: usize,
    pub time_index: usize,
}

/// One regression row: origin, feature values and boundary or time derivative.
pub type Row = (RowTag, Vec<f64>, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSystem {
    pub matrix: DMatrix<f64>,
    pub velocity: DVector<f64>,
    pub names: Vec<String>,
    /// Max-abs factor each column was divided by (all 1 before normalization).
    pub scales: Vec<f64>,
    pub rows: Vec<RowTag>,
}

impl FeatureSystem {
    pub fn from_rows(names: Vec<String>, rows: Vec<Row>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptySystem("no usable rows".into()));
        }
        let n = names.len();
        let m = rows.len();
        let mut matrix = DMatrix::zeros(m, n);
        let mut velocity = DVector::zeros(m);
        let mut tags = Vec::with_capacity(m);
        for (i, (tag, feats, v)) in rows.into_iter().enumerate() {
            if feats.len() != n {
                return Err(Error::Shape { expected: n, found: feats.len() });
            }
            for (j, x) in feats.into_iter().enumerate() {
                matrix[(i, j)] = x;
            }
            velocity[i] = v;
            tags.push(tag);
        }
        Ok(Self { matrix, velocity, scales: vec![1.0; n], names, rows: tags })
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StefanConfig {
    pub pddo: PddoParams,
    pub velocity: VelocityMethod,
    /// Use every `time_stride`-th snapshot pair.
    pub time_stride: usize,
}

/// Horizon factor for the one-sided interface families, which hold about
/// half the points of an interior family at the same radius.
pub const STEFAN_HORIZON_FACTOR: f64 = 4.015;

impl StefanConfig {
    pub fn for_spacing(h: f64) -> Self {
        Self {
            pddo: PddoParams { horizon: STEFAN_HORIZON_FACTOR * h, volume: h * h },
            velocity: VelocityMethod::Projected,
            time_stride: 1,
        }
    }
}

pub fn build_stefan_system(
    snapshots: &[FieldSnapshot],
    curves: &[BoundaryCurve],
    config: &StefanConfig,
) -> Result<FeatureSystem> {
    if snapshots.len() < 2 || curves.len() != snapshots.len() {
        return Err(Error::MissingSnapshot(format!(
            "need >= 2 snapshots with matching curves, got {} snapshots and {} curves",
            snapshots.len(),
            curves.len()
        )));
    }
    let library = CandidateLibrary::stefan();
    let stride = config.time_stride.max(1);
    let steps: Vec<usize> = (0..snapshots.len() - 1).step_by(stride).collect();
    let per_step: Vec<Result<(Vec<Row>, usize)>> = steps
        .par_iter()
        .map(|&k| {
            let snap = &snapshots[k];
            let dt = curves[k + 1].time - curves[k].time;
            let panels = panels_from_curve(&curves[k])?;
            let speeds = normal_velocity(&panels, &curves[k + 1], dt, config.velocity)?;
            let hood = Neighborhood::new(&snap.points, config.pddo)?;
            let mut rows = Vec::with_capacity(panels.len());
            let mut skipped = 0;
            for (i, (panel, speed)) in panels.iter().zip(&speeds).enumerate() {
                let hp = HalfPlane { origin: panel.midpoint, inward: [-panel.normal[0], -panel.normal[1]] };
                let derivs = hood
                    .family(Center::Location(panel.midpoint), Some(hp), panel.frame())
                    .and_then(|fam| {
                        let pd = PdFunctions::for_family(&fam)?;
                        evaluate_derivatives(&snap.values, &fam, &pd)
                    });
                match derivs {
                    Ok(d) => rows.push((RowTag { site: i, time_index: k }, library.row(&d), speed.speed)),
                    Err(e @ (Error::DegenerateFamily { .. } | Error::IllConditionedFamily { .. })) => {
                        log::debug!("panel {i} at snapshot {k} skipped: {e}");
                        skipped += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok((rows, skipped))
        })
        .collect();
    let mut rows = Vec::new();
    let mut skipped = 0;
    for r in per_step {
        let (mut rs, s) = r?;
        rows.append(&mut rs);
        skipped += s;
    }
    if skipped > 0 {
        warn!("stefan system: skipped {skipped} panels with degenerate families");
    }
    FeatureSystem::from_rows(library.names, rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherConfig {
    pub pddo: PddoParams,
    /// Samples closer than `margin_factor * horizon` to the interface are dropped.
    pub margin_factor: f64,
    pub time_stride: usize,
    pub space_stride: usize,
    /// Fixed outer edges; samples within the margin of them are dropped as well.
    pub domain: Option<(Point, Point)>,
}

impl FisherConfig {
    pub fn for_spacing(h: f64) -> Self {
        Self { pddo: PddoParams::from_spacing(h), margin_factor: 1.5, time_stride: 1, space_stride: 1, domain: None }
    }
}

pub fn build_fisher_system(
    snapshots: &[FieldSnapshot],
    curves: &[BoundaryCurve],
    config: &FisherConfig,
) -> Result<FeatureSystem> {
    if snapshots.len() < 3 {
        return Err(Error::MissingSnapshot(format!(
            "need >= 3 snapshots for central time differences, got {}",
            snapshots.len()
        )));
    }
    if !curves.is_empty() && curves.len() != snapshots.len() {
        return Err(Error::Shape { expected: snapshots.len(), found: curves.len() });
    }
    let library = CandidateLibrary::fisher();
    let margin = config.margin_factor * config.pddo.horizon;
    let panels: Vec<_> = curves.iter().map(panels_from_curve).collect::<Result<_>>()?;
    let inside = |k: usize, p: Point| -> bool {
        if curves.is_empty() {
            return true;
        }
        signed_distance(&curves[k], &panels[k], p) <= -margin
    };
    let in_domain = |p: Point| -> bool {
        match config.domain {
            Some((lo, hi)) => {
                p[0] - lo[0] >= margin && hi[0] - p[0] >= margin && p[1] - lo[1] >= margin && hi[1] - p[1] >= margin
            }
            None => true,
        }
    };
    let stride = config.time_stride.max(1);
    let steps: Vec<usize> = (1..snapshots.len() - 1).step_by(stride).collect();
    let per_step: Vec<Result<Vec<Row>>> = steps
        .par_iter()
        .map(|&k| {
            let snap = &snapshots[k];
            let prev = snapshots[k - 1].position_lookup();
            let next = snapshots[k + 1].position_lookup();
            let dt = snapshots[k + 1].time - snapshots[k - 1].time;
            let hood = Neighborhood::new(&snap.points, config.pddo)?;
            let mut rows = Vec::new();
            for i in (0..snap.len()).step_by(config.space_stride.max(1)) {
                let p = snap.points[i];
                if !in_domain(p) || !inside(k, p) || !inside(k - 1, p) || !inside(k + 1, p) {
                    continue;
                }
                let key = crate::field::point_key(&p);
                let (Some(&ip), Some(&inx)) = (prev.get(&key), next.get(&key)) else {
                    continue;
                };
                let fam = match hood.family(Center::Sample(i), None, Frame::cartesian()) {
                    Ok(f) => f,
                    Err(Error::DegenerateFamily { .. }) => continue,
                    Err(e) => return Err(e),
                };
                let pd = match PdFunctions::for_family(&fam) {
                    Ok(pd) => pd,
                    Err(Error::IllConditionedFamily { .. }) => continue,
                    Err(e) => return Err(e),
                };
                let d = evaluate_derivatives(&snap.values, &fam, &pd)?;
                let ut = (snapshots[k + 1].values[inx] - snapshots[k - 1].values[ip]) / dt;
                rows.push((RowTag { site: i, time_index: k }, library.row(&d), ut));
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_step {
        rows.append(&mut r?);
    }
    FeatureSystem::from_rows(library.names, rows)
}

/// Divide each column by its max-abs value; `V` is left alone.
pub fn normalize(system: &FeatureSystem) -> Result<FeatureSystem> {
    let mut out = system.clone();
    for j in 0..system.ncols() {
        let scale = system.matrix.column(j).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !(scale > 0.0) {
            return Err(Error::ZeroColumn { name: system.names[j].clone() });
        }
        out.matrix.column_mut(j).scale_mut(1.0 / scale);
        out.scales[j] = system.scales[j] * scale;
    }
    Ok(out)
}

/// Map coefficients of a normalized system back to original feature units.
pub fn unscale_coefficients(a_scaled: &[f64], scales: &[f64]) -> Result<Vec<f64>> {
    if a_scaled.len() != scales.len() {
        return Err(Error::Shape { expected: scales.len(), found: a_scaled.len() });
    }
    Ok(a_scaled.iter().zip(scales).map(|(a, s)| a / s).collect())
}

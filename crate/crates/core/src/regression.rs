//! Ridge, sequentially thresholded least squares and STRidge.
//!
//! Every solver works on the normal equations `F^T F a = F^T V` restricted to an
//! active column set, so the ensemble can reuse one Gram matrix per bootstrap
//! replicate across all library subsets.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot below which a Jacobi-scaled Gram matrix is treated as singular.
const PIVOT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionParams {
    /// Hard threshold; coefficients with `|a| >= lambda1` survive.
    pub lambda1: f64,
    /// Ridge penalty.
    pub lambda2: f64,
    pub max_iter: usize,
    /// Unpenalized least-squares refit once the support is stable.
    pub debias: bool,
}

impl Default for RegressionParams {
    fn default() -> Self {
        Self { lambda1: 0.3, lambda2: 1.0, max_iter: 25, debias: true }
    }
}

impl RegressionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0) || !(self.lambda2 >= 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter(format!(
                "regression parameters out of range: lambda1={}, lambda2={}, max_iter={}",
                self.lambda1, self.lambda2, self.max_iter
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseFit {
    /// Full length; exactly zero off the support.
    pub coefficients: Vec<f64>,
    pub support: Vec<usize>,
    pub iterations: usize,
    pub residual_norm: f64,
}

impl SparseFit {
    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

/// Sufficient statistics of a least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEquations {
    pub gram: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// `V^T V`
    pub vv: f64,
    pub rows: usize,
}

impl NormalEquations {
    pub fn from_system(f: &DMatrix<f64>, v: &DVector<f64>) -> Result<Self> {
        check_shapes(f, v)?;
        Ok(Self { gram: f.tr_mul(f), rhs: f.tr_mul(v), vv: v.dot(v), rows: f.nrows() })
    }

    pub fn ncols(&self) -> usize {
        self.gram.ncols()
    }

    /// Solve `(G_S + lambda2 I) a = h_S` on the columns `cols`.
    pub fn solve(&self, cols: &[usize], lambda2: f64) -> Result<Vec<f64>> {
        let n = cols.len();
        let mut g = DMatrix::from_fn(n, n, |i, j| self.gram[(cols[i], cols[j])]);
        for i in 0..n {
            g[(i, i)] += lambda2;
        }
        let h = DVector::from_fn(n, |i, _| self.rhs[cols[i]]);
        // Jacobi scaling keeps the pivot test independent of column norms
        let d: Vec<f64> = (0..n)
            .map(|i| {
                let gii = g[(i, i)];
                if gii > 0.0 {
                    1.0 / gii.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        if d.contains(&0.0) {
            return Err(Error::SingularSystem("zero column in active set".into()));
        }
        let scaled = DMatrix::from_fn(n, n, |i, j| g[(i, j)] * d[i] * d[j]);
        let chol = scaled
            .cholesky()
            .ok_or_else(|| Error::SingularSystem("normal matrix is not positive definite".into()))?;
        let l = chol.l_dirty();
        let min_pivot = (0..n).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if !(min_pivot > PIVOT_FLOOR) {
            return Err(Error::SingularSystem(format!("relative pivot {min_pivot:.3e}")));
        }
        let hs = DVector::from_fn(n, |i, _| h[i] * d[i]);
        let y = chol.solve(&hs);
        Ok((0..n).map(|i| y[i] * d[i]).collect())
    }

    /// Residual sum of squares of a full-length coefficient vector.
    pub fn rss(&self, coeffs: &[f64]) -> f64 {
        let a = DVector::from_column_slice(coeffs);
        let val = self.vv - 2.0 * a.dot(&self.rhs) + (&self.gram * &a).dot(&a);
        val.max(0.0)
    }
}

fn check_shapes(f: &DMatrix<f64>, v: &DVector<f64>) -> Result<()> {
    if f.ncols() == 0 {
        return Err(Error::InvalidParameter("feature matrix has no columns".into()));
    }
    if f.nrows() != v.len() {
        return Err(Error::Shape { expected: f.nrows(), found: v.len() });
    }
    if f.nrows() == 0 {
        return Err(Error::EmptySystem("feature matrix has no rows".into()));
    }
    Ok(())
}

fn lstsq_qr(f: &DMatrix<f64>, v: &DVector<f64>, cols: &[usize]) -> Result<Vec<f64>> {
    let sub = f.select_columns(cols);
    if sub.nrows() < sub.ncols() {
        return Err(Error::SingularSystem("fewer rows than active columns".into()));
    }
    let qr = sub.qr();
    let r = qr.r();
    let scale = (0..r.ncols()).map(|i| r[(i, i)].abs()).fold(0.0_f64, f64::max);
    if (0..r.ncols()).any(|i| !(r[(i, i)].abs() > PIVOT_FLOOR * scale)) {
        return Err(Error::SingularSystem("rank-deficient feature matrix".into()));
    }
    let qtv = qr.q().tr_mul(v);
    let sol = r
        .solve_upper_triangular(&qtv)
        .ok_or_else(|| Error::SingularSystem("triangular solve failed".into()))?;
    Ok(sol.iter().copied().collect())
}

/// `a = (F^T F + lambda2 I)^{-1} F^T V`; orthogonal factorization when `lambda2 = 0`.
pub fn ridge_solve(f: &DMatrix<f64>, v: &DVector<f64>, lambda2: f64) -> Result<Vec<f64>> {
    check_shapes(f, v)?;
    if !(lambda2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("ridge penalty must be >= 0, got {lambda2}")));
    }
    let cols: Vec<usize> = (0..f.ncols()).collect();
    if lambda2 == 0.0 {
        lstsq_qr(f, v, &cols)
    } else {
        NormalEquations::from_system(f, v)?.solve(&cols, lambda2)
    }
}

fn scatter(n: usize, cols: &[usize], vals: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (&c, &x) in cols.iter().zip(vals) {
        out[c] = x;
    }
    out
}

/// Thresholded ridge iteration on prepared normal equations, restricted to `columns`.
///
/// `qr` supplies the raw system for unpenalized solves when available.
pub fn stridge_normal(
    ne: &NormalEquations,
    columns: &[usize],
    params: &RegressionParams,
    qr: Option<(&DMatrix<f64>, &DVector<f64>)>,
) -> Result<SparseFit> {
    params.validate()?;
    let n = ne.ncols();
    let solve = |cols: &[usize], lambda2: f64| -> Result<Vec<f64>> {
        match qr {
            Some((f, v)) if lambda2 == 0.0 => lstsq_qr(f, v, cols),
            _ => ne.solve(cols, lambda2),
        }
    };
    let empty = |iterations| SparseFit {
        coefficients: vec![0.0; n],
        support: vec![],
        iterations,
        residual_norm: ne.vv.max(0.0).sqrt(),
    };

    let mut active: Vec<usize> = columns.to_vec();
    if active.is_empty() {
        return Ok(empty(0));
    }
    let mut coef = solve(&active, params.lambda2)?;
    let mut debiased = false;
    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        let keep: Vec<usize> = (0..active.len()).filter(|&i| coef[i].abs() >= params.lambda1).collect();
        if keep.is_empty() {
            return Ok(empty(iterations));
        }
        if keep.len() == active.len() {
            if !params.debias || debiased {
                break;
            }
            // debias once the support is stable; a singular support keeps the ridge values
            match solve(&active, 0.0) {
                Ok(c) => {
                    coef = c;
                    debiased = true;
                    continue;
                }
                Err(Error::SingularSystem(_)) => break,
                Err(e) => return Err(e),
            }
        }
        active = keep.iter().map(|&i| active[i]).collect();
        let lambda2 = if debiased { 0.0 } else { params.lambda2 };
        coef = match solve(&active, lambda2) {
            Ok(c) => c,
            Err(Error::SingularSystem(_)) if debiased => {
                debiased = false;
                solve(&active, params.lambda2)?
            }
            Err(e) => return Err(e),
        };
    }
    let coefficients = scatter(n, &active, &coef);
    let residual_norm = match qr {
        Some((f, v)) => (v - f * DVector::from_column_slice(&coefficients)).norm(),
        None => ne.rss(&coefficients).sqrt(),
    };
    Ok(SparseFit { coefficients, support: active, iterations, residual_norm })
}

/// Sequentially thresholded least squares (no ridge penalty, no separate debias).
pub fn stls(f: &DMatrix<f64>, v: &DVector<f64>, lambda: f64, max_iter: usize) -> Result<SparseFit> {
    let ne = NormalEquations::from_system(f, v)?;
    let cols: Vec<usize> = (0..f.ncols()).collect();
    let params = RegressionParams { lambda1: lambda, lambda2: 0.0, max_iter, debias: false };
    stridge_normal(&ne, &cols, &params, Some((f, v)))
}

pub fn stridge(f: &DMatrix<f64>, v: &DVector<f64>, params: &RegressionParams) -> Result<SparseFit> {
    let ne = NormalEquations::from_system(f, v)?;
    let cols: Vec<usize> = (0..f.ncols()).collect();
    stridge_normal(&ne, &cols, params, Some((f, v)))
}

/// `2k + m ln(RSS/m)`
pub fn aic(support_size: usize, rss: f64, rows: usize) -> f64 {
    let m = rows as f64;
    2.0 * support_size as f64 + m * (rss.max(f64::MIN_POSITIVE) / m).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaScore {
    pub lambda1: f64,
    pub support_size: usize,
    /// `None` when the fit kept no features.
    pub aic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelection {
    pub chosen: f64,
    pub scores: Vec<LambdaScore>,
}

pub fn select_lambda1(
    f: &DMatrix<f64>,
    v: &DVector<f64>,
    candidates: &[f64],
    lambda2: f64,
) -> Result<LambdaSelection> {
    let mut cands: Vec<f64> = candidates.to_vec();
    if cands.is_empty() {
        return Err(Error::InvalidParameter("no lambda1 candidates".into()));
    }
    cands.sort_by(|a, b| a.total_cmp(b));
    cands.dedup();
    if cands.len() == 1 {
        let fit = stridge(f, v, &RegressionParams { lambda1: cands[0], lambda2, ..Default::default() })?;
        let rss = fit.residual_norm * fit.residual_norm;
        return Ok(LambdaSelection {
            chosen: cands[0],
            scores: vec![LambdaScore {
                lambda1: cands[0],
                support_size: fit.support.len(),
                aic: (!fit.is_empty()).then(|| aic(fit.support.len(), rss, f.nrows())),
            }],
        });
    }
    let mut scores = Vec::with_capacity(cands.len());
    for &lambda1 in &cands {
        let fit = stridge(f, v, &RegressionParams { lambda1, lambda2, ..Default::default() })?;
        let rss = fit.residual_norm * fit.residual_norm;
        scores.push(LambdaScore {
            lambda1,
            support_size: fit.support.len(),
            aic: (!fit.is_empty()).then(|| aic(fit.support.len(), rss, f.nrows())),
        });
    }
    let mut best: Option<(f64, f64)> = None;
    // ascending lambda order, so `<=` lets ties move to the sparser end
    for s in &scores {
        if let Some(a) = s.aic {
            let take = match best {
                None => true,
                Some((_, b)) => a <= b + 1e-9 * b.abs().max(1.0),
            };
            if take {
                best = Some((s.lambda1, a));
            }
        }
    }
    let (chosen, _) = best.ok_or_else(|| Error::NoModel("every lambda1 candidate emptied the model".into()))?;
    Ok(LambdaSelection { chosen, scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Column 0 carries the signal; columns 1..=3 are orthogonal decoys.
    fn exact_sparse(m: usize) -> (DMatrix<f64>, DVector<f64>) {
        let f = DMatrix::from_fn(m, 4, |i, j| {
            let t = (i as f64 + 0.5) / m as f64 * std::f64::consts::TAU;
            match j {
                0 => 1.0 + 0.5 * t.cos(),
                1 => (2.0 * t).sin(),
                2 => (3.0 * t).sin(),
                _ => (4.0 * t).cos(),
            }
        });
        let v = f.column(0) * 2.0;
        (f, v)
    }

    #[test]
    fn ridge_on_ones() {
        let m = 10;
        let f = DMatrix::from_element(m, 1, 1.0);
        let v = DVector::from_element(m, 1.0);
        assert!((ridge_solve(&f, &v, 0.0).unwrap()[0] - 1.0).abs() < 1e-14);
        assert!((ridge_solve(&f, &v, m as f64).unwrap()[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn ridge_orthonormal_projection() {
        let s = 0.5_f64.sqrt();
        let f = DMatrix::from_row_slice(4, 2, &[s, 0.0, s, 0.0, 0.0, s, 0.0, s]);
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0, -1.0]);
        let a = ridge_solve(&f, &v, 0.0).unwrap();
        let expect = f.tr_mul(&v);
        assert!((a[0] - expect[0]).abs() < 1e-12 && (a[1] - expect[1]).abs() < 1e-12);
    }

    #[test]
    fn ridge_rank_deficient_unpenalized_fails() {
        let f = DMatrix::from_fn(5, 2, |i, _| i as f64);
        let v = DVector::from_element(5, 1.0);
        assert!(matches!(ridge_solve(&f, &v, 0.0), Err(Error::SingularSystem(_))));
        assert!(ridge_solve(&f, &v, 0.1).is_ok());
    }

    #[test]
    fn stls_cases() {
        let (f, v) = exact_sparse(200);
        let fit = stls(&f, &v, 0.5, 10).unwrap();
        assert_eq!(fit.support, vec![0]);
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-9);
        let dense = stls(&f, &v, 0.0, 10).unwrap();
        assert_eq!(dense.support, vec![0, 1, 2, 3]);
        let none = stls(&f, &v, 100.0, 10).unwrap();
        assert!(none.is_empty());
        assert!(none.coefficients.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn stridge_recovers_after_debias() {
        let (f, v) = exact_sparse(1000);
        let p = RegressionParams { lambda1: 0.5, lambda2: 1.0, max_iter: 20, debias: true };
        let fit = stridge(&f, &v, &p).unwrap();
        assert_eq!(fit.support, vec![0]);
        assert!((fit.coefficients[0] - 2.0).abs() < 0.02);
        assert!(fit.coefficients[1..].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn stridge_zero_threshold_is_ridge() {
        let (f, v) = exact_sparse(100);
        let p = RegressionParams { lambda1: 0.0, lambda2: 1.0, max_iter: 20, debias: false };
        let fit = stridge(&f, &v, &p).unwrap();
        let ridge = ridge_solve(&f, &v, 1.0).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&ridge) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stridge_is_a_fixed_point() {
        let (f, mut v) = exact_sparse(300);
        v[3] += 0.3;
        v[17] -= 0.2;
        let p = RegressionParams { lambda1: 0.05, lambda2: 1.0, max_iter: 20, debias: true };
        let fit = stridge(&f, &v, &p).unwrap();
        let ne = NormalEquations::from_system(&f, &v).unwrap();
        let again = stridge_normal(&ne, &fit.support, &p, Some((&f, &v))).unwrap();
        assert_eq!(again.support, fit.support);
        assert_eq!(again.coefficients, fit.coefficients);
        assert!(fit.support.iter().all(|&j| fit.coefficients[j].abs() >= p.lambda1));
    }

    #[test]
    fn lambda_selection() {
        let (f, mut v) = exact_sparse(200);
        // noise orthogonal to every column: decoys get exactly-zero LS weight, so the
        // small thresholds tie with 0.3 and the tie goes to the sparser end
        let g = f.clone();
        let mut e = DVector::from_fn(200, |i, _| ((i * 7919) % 13) as f64 / 13.0 - 0.5);
        let proj = &g * g.clone().svd(true, true).solve(&e, 1e-12).unwrap();
        e -= proj;
        v += e * 0.01;
        let sel = select_lambda1(&f, &v, &[0.01, 0.3, 5.0, 0.3], 1.0).unwrap();
        assert_eq!(sel.scores.len(), 3);
        assert_eq!(sel.chosen, 0.3);
        assert!(sel.scores[2].aic.is_none());
        let single = select_lambda1(&f, &v, &[7.0], 1.0).unwrap();
        assert_eq!(single.chosen, 7.0);
        assert!(matches!(select_lambda1(&f, &v, &[50.0, 60.0], 1.0), Err(Error::NoModel(_))));
    }
}

//! Ensemble STRidge: data bootstrap crossed with library bagging, median
//! aggregation, inclusion probabilities, 3-sigma intervals and Gaussian KDEs.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::{unscale_coefficients, FeatureSystem};
use crate::regression::{stridge_normal, NormalEquations, RegressionParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InclusionDenominator {
    /// Fits whose library subset contained the feature.
    #[default]
    Presence,
    /// Every fit in the ensemble.
    Total,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_boot: usize,
    pub leave_out: usize,
    pub p_inc_threshold: f64,
    pub regression: RegressionParams,
    pub seed: u64,
    /// Std of Gaussian noise added to each replicate's `V`, relative to `std(V)`.
    pub perturb_noise: f64,
    pub denominator: InclusionDenominator,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_boot: 60,
            leave_out: 3,
            p_inc_threshold: 0.7,
            regression: RegressionParams::default(),
            seed: 0,
            perturb_noise: 0.0,
            denominator: InclusionDenominator::Presence,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        self.regression.validate()?;
        if self.n_boot == 0 {
            return Err(Error::InvalidParameter("n_boot must be positive".into()));
        }
        if self.leave_out >= n_features {
            return Err(Error::InvalidParameter(format!(
                "leave-out {} must be below the feature count {n_features}",
                self.leave_out
            )));
        }
        if !(0.0..=1.0).contains(&self.p_inc_threshold) {
            return Err(Error::InvalidParameter(format!(
                "inclusion threshold {} outside [0, 1]",
                self.p_inc_threshold
            )));
        }
        if !(self.perturb_noise >= 0.0) {
            return Err(Error::InvalidParameter("perturb_noise must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    /// Fewer than two samples: the interval collapsed to a point.
    pub degenerate: bool,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub names: Vec<String>,
    pub total_fits: usize,
    /// Unscaled coefficient of every fit that selected the feature.
    pub samples: Vec<Vec<f64>>,
    pub presence: Vec<usize>,
    pub selection: Vec<usize>,
    pub p_inc: Vec<f64>,
    pub median: Vec<Option<f64>>,
    pub ci: Vec<Option<ConfidenceInterval>>,
    pub kde: Vec<Option<KdeCurve>>,
    /// Features whose inclusion probability reached the threshold.
    pub retained: Vec<usize>,
    /// Median for retained features, zero elsewhere, in original units.
    pub coefficients: Vec<f64>,
    pub epsilon_c: Option<f64>,
}

impl EnsembleResult {
    pub fn is_empty_model(&self) -> bool {
        self.retained.is_empty()
    }
}

/// `m` indices drawn uniformly with replacement.
pub fn bootstrap_rows<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::EmptySystem("cannot bootstrap zero rows".into()));
    }
    Ok((0..m).map(|_| rng.random_range(0..m)).collect())
}

/// Every subset of `n_f - k` features, lexicographic.
pub fn library_subsets(n_f: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    if k >= n_f {
        return Err(Error::InvalidParameter(format!("leave-out {k} must be below {n_f}")));
    }
    let size = n_f - k;
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        out.push(idx.clone());
        // advance to the next combination
        let mut i = size;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if idx[i] < n_f - size + i {
                break;
            }
            if i == 0 {
                return Ok(out);
            }
        }
        if idx[i] >= n_f - size + i {
            return Ok(out);
        }
        idx[i] += 1;
        for j in i + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub fn inclusion_probabilities(
    selection: &[usize],
    presence: &[usize],
    total_fits: usize,
    denominator: InclusionDenominator,
) -> Vec<f64> {
    selection
        .iter()
        .zip(presence)
        .map(|(&s, &p)| {
            let d = match denominator {
                InclusionDenominator::Presence => p,
                InclusionDenominator::Total => total_fits,
            };
            if d == 0 {
                0.0
            } else {
                s as f64 / d as f64
            }
        })
        .collect()
}

pub fn median(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub coefficients: Vec<f64>,
    pub retained: Vec<usize>,
}

impl Aggregate {
    pub fn is_empty_model(&self) -> bool {
        self.retained.is_empty()
    }
}

/// Median of each feature whose inclusion probability reaches `threshold`.
pub fn aggregate(samples: &[Vec<f64>], p_inc: &[f64], threshold: f64) -> Aggregate {
    let mut coefficients = vec![0.0; samples.len()];
    let mut retained = Vec::new();
    for (j, (s, &p)) in samples.iter().zip(p_inc).enumerate() {
        if p >= threshold {
            if let Some(m) = median(s) {
                coefficients[j] = m;
                retained.push(j);
            }
        }
    }
    Aggregate { coefficients, retained }
}

/// `(mu - 3 sigma, mu + 3 sigma)` with the n-1 sample deviation.
pub fn confidence_interval(samples: &[f64]) -> ConfidenceInterval {
    match samples.len() {
        0 => ConfidenceInterval { lower: 0.0, upper: 0.0, degenerate: true },
        1 => ConfidenceInterval { lower: samples[0], upper: samples[0], degenerate: true },
        n => {
            let mu = samples.iter().sum::<f64>() / n as f64;
            let var = samples.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
            let sigma = var.sqrt();
            ConfidenceInterval { lower: mu - 3.0 * sigma, upper: mu + 3.0 * sigma, degenerate: false }
        }
    }
}

/// Scott's rule, floored so identical samples still give a usable curve.
pub fn scott_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len();
    let scale = samples.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let floor = 1e-6 * scale;
    if n < 2 {
        return floor.max(1e-3 * scale);
    }
    let mu = samples.iter().sum::<f64>() / n as f64;
    let sigma = (samples.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    (sigma * (n as f64).powf(-0.2)).max(floor)
}

/// Gaussian KDE on `grid`, or on an automatic grid spanning the samples plus five bandwidths.
pub fn kde(samples: &[f64], grid: Option<&[f64]>) -> Result<KdeCurve> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("kde needs at least one sample".into()));
    }
    let bw = scott_bandwidth(samples);
    let grid: Vec<f64> = match grid {
        Some(g) => g.to_vec(),
        None => {
            let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 5.0 * bw;
            let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 5.0 * bw;
            let n = (((hi - lo) / (bw / 8.0)).ceil() as usize).clamp(512, 8192);
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        }
    };
    let norm = 1.0 / (samples.len() as f64 * bw * (2.0 * std::f64::consts::PI).sqrt());
    let density = grid
        .iter()
        .map(|&x| samples.iter().map(|&s| (-0.5 * ((x - s) / bw).powi(2)).exp()).sum::<f64>() * norm)
        .collect();
    Ok(KdeCurve { bandwidth: bw, grid, density })
}

/// `||truth - recovered||_2 / ||truth||_2`
pub fn coefficient_error(truth: &[f64], recovered: &[f64]) -> Result<f64> {
    if truth.len() != recovered.len() {
        return Err(Error::Shape { expected: truth.len(), found: recovered.len() });
    }
    let norm = truth.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidParameter("ground-truth coefficients are all zero".into()));
    }
    let diff = truth.iter().zip(recovered).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(diff / norm)
}

/// Per-replicate random stream; independent of how replicates are scheduled.
pub fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

struct FitRecord {
    subset: usize,
    support: Vec<usize>,
    scaled: Vec<f64>,
}

fn replicate_equations(
    system: &FeatureSystem,
    rows: &[usize],
    noise: Option<(&mut ChaCha8Rng, Normal<f64>)>,
) -> NormalEquations {
    let n = system.ncols();
    let m = rows.len();
    let f = DMatrix::from_fn(m, n, |i, j| system.matrix[(rows[i], j)]);
    let mut v = DVector::from_fn(m, |i, _| system.velocity[rows[i]]);
    if let Some((rng, dist)) = noise {
        for x in v.iter_mut() {
            *x += dist.sample(rng);
        }
    }
    NormalEquations { gram: f.tr_mul(&f), rhs: f.tr_mul(&v), vv: v.dot(&v), rows: m }
}

/// Run every (bootstrap replicate x library subset) fit and aggregate.
///
/// `system` should be normalized; coefficients are reported in the original units.
pub fn ensemble_fit(
    system: &FeatureSystem,
    config: &EnsembleConfig,
    ground_truth: Option<&[f64]>,
) -> Result<EnsembleResult> {
    let n = system.ncols();
    let m = system.nrows();
    if m == 0 {
        return Err(Error::EmptySystem("feature system has no rows".into()));
    }
    config.validate(n)?;
    let subsets = library_subsets(n, config.leave_out)?;
    let v_std = {
        let mu = system.velocity.mean();
        (system.velocity.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / m.max(2).saturating_sub(1) as f64).sqrt()
    };
    let noise = if config.perturb_noise > 0.0 && v_std > 0.0 {
        Some(
            Normal::new(0.0, config.perturb_noise * v_std)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?,
        )
    } else {
        None
    };

    let per_replicate: Vec<Result<Vec<FitRecord>>> = (0..config.n_boot)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(config.seed, r);
            let rows = bootstrap_rows(m, &mut rng)?;
            let ne = replicate_equations(system, &rows, noise.map(|d| (&mut rng, d)));
            let mut records = Vec::with_capacity(subsets.len());
            for (s, cols) in subsets.iter().enumerate() {
                match stridge_normal(&ne, cols, &config.regression, None) {
                    Ok(fit) => records.push(FitRecord {
                        subset: s,
                        scaled: fit.support.iter().map(|&j| fit.coefficients[j]).collect(),
                        support: fit.support,
                    }),
                    Err(Error::SingularSystem(msg)) => {
                        log::debug!("replicate {r} subset {s}: {msg}");
                        records.push(FitRecord { subset: s, support: vec![], scaled: vec![] });
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(records)
        })
        .collect();

    let mut samples = vec![Vec::new(); n];
    let mut presence = vec![0usize; n];
    let mut selection = vec![0usize; n];
    let mut total_fits = 0;
    for records in per_replicate {
        for rec in records? {
            total_fits += 1;
            for &j in &subsets[rec.subset] {
                presence[j] += 1;
            }
            for (&j, &a) in rec.support.iter().zip(&rec.scaled) {
                selection[j] += 1;
                samples[j].push(a / system.scales[j]);
            }
        }
    }
    finish(system.names.clone(), total_fits, samples, presence, selection, config, ground_truth)
}

fn finish(
    names: Vec<String>,
    total_fits: usize,
    samples: Vec<Vec<f64>>,
    presence: Vec<usize>,
    selection: Vec<usize>,
    config: &EnsembleConfig,
    ground_truth: Option<&[f64]>,
) -> Result<EnsembleResult> {
    let p_inc = inclusion_probabilities(&selection, &presence, total_fits, config.denominator);
    let agg = aggregate(&samples, &p_inc, config.p_inc_threshold);
    let med = samples.iter().map(|s| median(s)).collect();
    let ci = samples.iter().map(|s| (!s.is_empty()).then(|| confidence_interval(s))).collect();
    let kdes = samples
        .iter()
        .map(|s| if s.is_empty() { Ok(None) } else { kde(s, None).map(Some) })
        .collect::<Result<Vec<_>>>()?;
    let epsilon_c = match ground_truth {
        Some(t) => Some(coefficient_error(t, &agg.coefficients)?),
        None => None,
    };
    Ok(EnsembleResult {
        names,
        total_fits,
        samples,
        presence,
        selection,
        p_inc,
        median: med,
        ci,
        kde: kdes,
        retained: agg.retained,
        coefficients: agg.coefficients,
        epsilon_c,
    })
}

/// Scaled-to-unscaled helper for single fits outside the ensemble.
pub fn unscaled(system: &FeatureSystem, scaled: &[f64]) -> Result<Vec<f64>> {
    unscale_coefficients(scaled, &system.scales)
}

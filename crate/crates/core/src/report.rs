//! Discovery reports: structured TOML for machines, a short table for people.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ensemble::{coefficient_error, ConfidenceInterval, EnsembleResult};
use crate::error::{Error, Result};
use crate::library::Problem;
use crate::pipeline::DiscoverOptions;
use crate::regression::LambdaSelection;

pub const REPORT_FORMAT: u32 = 1;

/// `(first, second, combined)` library indices: when both of a pair survive,
/// their mean moves into the combined term.
pub fn paired_terms(problem: Problem) -> &'static [(usize, usize, usize)] {
    match problem {
        Problem::Stefan => &[(7, 8, 10)],
        Problem::Fisher => &[(6, 8, 3)],
    }
}

/// Relative size below which the antisymmetric part of a pair is dropped.
pub const PAIR_RESIDUAL_TOLERANCE: f64 = 0.1;

pub fn combine_paired(problem: Problem, coefficients: &[f64]) -> Vec<f64> {
    let mut out = coefficients.to_vec();
    for &(i, j, k) in paired_terms(problem) {
        if k >= out.len() || out[i] == 0.0 || out[j] == 0.0 {
            continue;
        }
        let common = 0.5 * (out[i] + out[j]);
        let residual = 0.5 * (out[i] - out[j]);
        out[k] += common;
        if residual.abs() > PAIR_RESIDUAL_TOLERANCE * common.abs() {
            out[i] = residual;
            out[j] = -residual;
        } else {
            out[i] = 0.0;
            out[j] = 0.0;
        }
    }
    out
}

pub fn lhs(problem: Problem) -> &'static str {
    match problem {
        Problem::Stefan => "d(xi_n)/dt",
        Problem::Fisher => "du/dt",
    }
}

/// Three significant figures.
pub fn sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-3..4).contains(&mag) {
        let decimals = (2 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // rounding can carry into a new digit, e.g. 9.996 -> 10.00
        let reparsed: f64 = s.parse().unwrap_or(x);
        if reparsed.abs().log10().floor() as i32 != mag && decimals > 0 {
            let d = decimals - 1;
            return format!("{x:.d$}");
        }
        s
    } else {
        format!("{x:.2e}")
    }
}

pub fn render_equation(problem: Problem, names: &[String], coefficients: &[f64]) -> String {
    let mut rhs = String::new();
    for (name, &c) in names.iter().zip(coefficients) {
        if c == 0.0 {
            continue;
        }
        let term = if name == "1" { sig3(c.abs()) } else { format!("{} * {name}", sig3(c.abs())) };
        if rhs.is_empty() {
            if c < 0.0 {
                rhs.push('-');
            }
        } else {
            rhs.push_str(if c < 0.0 { " - " } else { " + " });
        }
        rhs.push_str(&term);
    }
    if rhs.is_empty() {
        rhs.push('0');
    }
    format!("{} = {rhs}", lhs(problem))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub name: String,
    /// Fits whose library subset contained the feature.
    pub presence: usize,
    /// Fits that kept the feature.
    pub selection: usize,
    pub p_inc: f64,
    pub retained: bool,
    /// Aggregated coefficient before pair combining.
    pub coefficient: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub median: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ci: Option<ConfidenceInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEcho {
    pub seed: u64,
    pub snapshots: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise_eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryReport {
    pub format: u32,
    pub problem: Problem,
    pub equation: String,
    pub library: Vec<String>,
    pub rows: usize,
    pub total_fits: usize,
    /// Final model in library order, after pair combining.
    pub coefficients: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub epsilon_c: Option<f64>,
    pub dataset: DatasetEcho,
    pub config: DiscoverOptions,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda_selection: Option<LambdaSelection>,
    pub features: Vec<FeatureSummary>,
}

impl DiscoveryReport {
    pub fn new(
        problem: Problem,
        rows: usize,
        result: &EnsembleResult,
        truth: Option<&[f64]>,
        dataset: DatasetEcho,
        config: DiscoverOptions,
        lambda_selection: Option<LambdaSelection>,
    ) -> Result<Self> {
        let coefficients = combine_paired(problem, &result.coefficients);
        let epsilon_c = match truth {
            Some(t) => Some(coefficient_error(t, &coefficients)?),
            None => None,
        };
        let features = result
            .names
            .iter()
            .enumerate()
            .map(|(j, name)| FeatureSummary {
                name: name.clone(),
                presence: result.presence[j],
                selection: result.selection[j],
                p_inc: result.p_inc[j],
                retained: result.retained.contains(&j),
                coefficient: result.coefficients[j],
                median: result.median[j],
                ci: result.ci[j],
            })
            .collect();
        Ok(Self {
            format: REPORT_FORMAT,
            problem,
            equation: render_equation(problem, &result.names, &coefficients),
            library: result.names.clone(),
            rows,
            total_fits: result.total_fits,
            coefficients,
            epsilon_c,
            dataset,
            config,
            lambda_selection,
            features,
        })
    }

    pub fn is_empty_model(&self) -> bool {
        self.coefficients.iter().all(|c| *c == 0.0)
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureSummary> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn retained_names(&self) -> Vec<&str> {
        self.library
            .iter()
            .zip(&self.coefficients)
            .filter(|(_, c)| **c != 0.0)
            .map(|(n, _)| n.as_str())
            .collect()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format("report", e))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format("report", e))
    }

    /// Table at three significant figures. Stefan rows also list magnitudes,
    /// since the identified front law carries a negative sign.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "problem: {}", self.problem);
        let _ = writeln!(s, "model:   {}", self.equation);
        if let Some(e) = self.epsilon_c {
            let _ = writeln!(s, "epsilon_c: {}", sig3(e));
        }
        let _ = writeln!(s, "fits: {}  rows: {}", self.total_fits, self.rows);
        let magnitude = self.problem == Problem::Stefan;
        let _ = write!(s, "{:>16} {:>7} {:>10} {:>24}", "feature", "p_inc", "median", "3-sigma interval");
        if magnitude {
            let _ = write!(s, " {:>10} {:>24}", "|median|", "|interval|");
        }
        s.push('\n');
        for f in &self.features {
            let mark = if f.retained { "*" } else { " " };
            let med = f.median.map(sig3).unwrap_or_else(|| "-".into());
            let ci = f.ci.map(|c| format!("[{}, {}]", sig3(c.lower), sig3(c.upper))).unwrap_or_else(|| "-".into());
            let _ = write!(s, "{mark}{:>15} {:>7} {:>10} {:>24}", f.name, sig3(f.p_inc), med, ci);
            if magnitude {
                let am = f.median.map(|m| sig3(m.abs())).unwrap_or_else(|| "-".into());
                let aci = f
                    .ci
                    .map(|c| {
                        let (a, b) = (c.lower.abs(), c.upper.abs());
                        let lo = if c.contains(0.0) { 0.0 } else { a.min(b) };
                        format!("[{}, {}]", sig3(lo), sig3(a.max(b)))
                    })
                    .unwrap_or_else(|| "-".into());
                let _ = write!(s, " {am:>10} {aci:>24}");
            }
            s.push('\n');
        }
        if let Some(sel) = &self.lambda_selection {
            let _ = writeln!(s, "lambda1 selection (chosen {}):", sig3(sel.chosen));
            for sc in &sel.scores {
                let aic = sc.aic.map(sig3).unwrap_or_else(|| "empty".into());
                let _ = writeln!(s, "  lambda1 {:>8}  support {:>2}  AIC {aic}", sig3(sc.lambda1), sc.support_size);
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::CandidateLibrary;

    #[test]
    fn three_figures() {
        assert_eq!(sig3(-0.51432), "-0.514");
        assert_eq!(sig3(1.0), "1.00");
        assert_eq!(sig3(0.0219), "0.0219");
        assert_eq!(sig3(123.456), "123");
        assert_eq!(sig3(9.996), "10.0");
        assert_eq!(sig3(0.99951), "1.00");
        assert_eq!(sig3(1.5e-5), "1.50e-5");
        assert_eq!(sig3(0.0), "0");
    }

    #[test]
    fn equations() {
        let names = CandidateLibrary::stefan().names;
        let mut c = vec![0.0; names.len()];
        c[2] = -0.51432;
        assert_eq!(render_equation(Problem::Stefan, &names, &c), "d(xi_n)/dt = -0.514 * u_xn");
        let names = CandidateLibrary::fisher().names;
        let c = [0.0, 0.98, -0.98, 0.972, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(render_equation(Problem::Fisher, &names, &c), "du/dt = 0.980 * u - 0.980 * u^2 + 0.972 * lap(u)");
        let c = [0.25, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -2.0];
        assert_eq!(render_equation(Problem::Fisher, &names, &c), "du/dt = 0.250 - 2.00 * u_y*u_xx");
        assert_eq!(render_equation(Problem::Fisher, &names, &[0.0; 10]), "du/dt = 0");
    }

    #[test]
    fn pair_combining() {
        let mut c = vec![0.0; 10];
        c[1] = 1.0;
        c[6] = 0.99;
        c[8] = 1.01;
        let out = combine_paired(Problem::Fisher, &c);
        assert!((out[3] - 1.0).abs() < 1e-12);
        assert_eq!((out[6], out[8]), (0.0, 0.0));
        c[6] = 1.5;
        c[8] = 0.5;
        let out = combine_paired(Problem::Fisher, &c);
        assert!((out[3] - 1.0).abs() < 1e-12);
        assert!((out[6] - 0.5).abs() < 1e-12 && (out[8] + 0.5).abs() < 1e-12);
        c[8] = 0.0;
        assert_eq!(combine_paired(Problem::Fisher, &c), c);
        let mut s = vec![0.0; 11];
        s[7] = 0.2;
        s[8] = 0.2;
        s[10] = 0.1;
        let out = combine_paired(Problem::Stefan, &s);
        assert!((out[10] - 0.3).abs() < 1e-12 && out[7] == 0.0);
    }
}

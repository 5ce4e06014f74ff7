use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::record::ExperimentRecord;
use crate::error::{Error, Result};

/// Minimum distinct `d` values for a fit.
pub const MIN_DEGREES: usize = 3;
/// Minimum usable trials per `d`.
pub const MIN_TRIALS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitField {
    S2,
    CenteredNorm,
    SigmaDeviation,
}

impl FitField {
    pub fn name(self) -> &'static str {
        match self {
            FitField::S2 => "s2",
            FitField::CenteredNorm => "centered_norm",
            FitField::SigmaDeviation => "sigma_deviation",
        }
    }

    /// The value if the record has it and the producing solver converged.
    fn value(self, r: &ExperimentRecord) -> Option<f64> {
        if r.error.is_some() {
            return None;
        }
        let v = match self {
            FitField::S2 => r.s2.filter(|_| r.spectral_converged == Some(true)),
            FitField::CenteredNorm => r.centered_norm.filter(|_| r.centered_converged == Some(true)),
            FitField::SigmaDeviation => r.sigma_deviation,
        }?;
        (v.is_finite() && v > 0.0).then_some(v)
    }
}

impl std::str::FromStr for FitField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s2" => Ok(FitField::S2),
            "centered_norm" | "centered-norm" => Ok(FitField::CenteredNorm),
            "sigma_deviation" | "sigma-deviation" => Ok(FitField::SigmaDeviation),
            other => Err(Error::InvalidArgument(format!(
                "unknown fit field `{other}` (expected s2, centered_norm or sigma_deviation)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeMedian {
    pub d: usize,
    pub median: f64,
    pub trials: usize,
}

/// Least-squares fit of `ln median(field) = ln C + α ln d` at fixed `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub field: FitField,
    pub n: usize,
    pub exponent: f64,
    pub constant: f64,
    pub r_squared: f64,
    pub medians: Vec<DegreeMedian>,
    /// Records at this `n` left out (failed, unconverged or missing).
    pub excluded: usize,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

/// Fits the power law over converged records. `n` may be omitted when the
/// records cover a single `n`.
pub fn fit_scaling(records: &[ExperimentRecord], field: FitField, n: Option<usize>) -> Result<ScalingFit> {
    let n = match n {
        Some(n) => n,
        None => {
            let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
            ns.sort_unstable();
            ns.dedup();
            match ns.as_slice() {
                [n] => *n,
                [] => return Err(Error::InsufficientData("no records".into())),
                _ => return Err(Error::InvalidArgument(format!("records span several n ({ns:?}); choose one"))),
            }
        }
    };
    let mut by_d: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut excluded = 0;
    for r in records.iter().filter(|r| r.n == n) {
        match field.value(r) {
            Some(v) => by_d.entry(r.d).or_default().push(v),
            None => excluded += 1,
        }
    }
    let medians: Vec<DegreeMedian> = by_d
        .into_iter()
        .filter(|(_, v)| v.len() >= MIN_TRIALS)
        .map(|(d, mut v)| DegreeMedian {
            d,
            trials: v.len(),
            median: median(&mut v).expect("nonempty"),
        })
        .collect();
    if medians.len() < MIN_DEGREES {
        return Err(Error::InsufficientData(format!(
            "{} at n = {n}: {} value(s) of d with at least {MIN_TRIALS} usable trials, need {MIN_DEGREES}",
            field.name(),
            medians.len()
        )));
    }
    let xs: Vec<f64> = medians.iter().map(|m| (m.d as f64).ln()).collect();
    let ys: Vec<f64> = medians.iter().map(|m| m.median.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(ScalingFit {
        field,
        n,
        exponent,
        constant: intercept.exp(),
        r_squared,
        medians,
        excluded,
    })
}

//! Monte Carlo summaries with deterministic reduction.
//!
//! Per-path values are always collected in path-index order and summed
//! serially, so a result does not depend on the number of worker threads.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: Complex64,
    /// `sqrt(se_re^2 + se_im^2)`.
    pub std_error: f64,
    pub std_error_re: f64,
    pub std_error_im: f64,
    pub n_samples: usize,
    pub master_seed: u64,
    /// SHA-256 (hex) of the parameters, grid and numerical settings.
    pub params_fingerprint: String,
}

/// Mean and standard error of the mean, summed in order.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl MCEstimate {
    pub fn from_samples(
        samples: &[Complex64],
        master_seed: u64,
        params_fingerprint: String,
    ) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("an estimate needs at least 2 samples"));
        }
        let re: Vec<f64> = samples.iter().map(|z| z.re).collect();
        let im: Vec<f64> = samples.iter().map(|z| z.im).collect();
        let (mr, sr) = mean_and_se(&re);
        let (mi, si) = mean_and_se(&im);
        Ok(MCEstimate {
            mean: Complex64::new(mr, mi),
            std_error: sr.hypot(si),
            std_error_re: sr,
            std_error_im: si,
            n_samples: samples.len(),
            master_seed,
            params_fingerprint,
        })
    }

    pub fn from_real(
        samples: &[f64],
        master_seed: u64,
        params_fingerprint: String,
    ) -> Result<Self> {
        let z: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_samples(&z, master_seed, params_fingerprint)
    }

    /// A real estimate with an externally computed standard error.
    pub fn real(
        mean: f64,
        std_error: f64,
        n_samples: usize,
        master_seed: u64,
        params_fingerprint: String,
    ) -> Self {
        MCEstimate {
            mean: Complex64::new(mean, 0.0),
            std_error,
            std_error_re: std_error,
            std_error_im: 0.0,
            n_samples,
            master_seed,
            params_fingerprint,
        }
    }
}

/// Ratio `mean(x) / mean(y)` of two means over the same samples with its
/// delta-method standard error.
pub fn ratio_estimate(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid(
            "ratio estimate needs paired samples, n >= 2",
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    if !(my > 0.0) {
        return Err(Error::NonPositiveMean(my));
    }
    let r = mx / my;
    // residual form of vxx - 2 r vxy + r^2 vyy, free of cancellation
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| ((a - mx) - r * (b - my)).powi(2))
        .sum();
    let var = ss / (n - 1.0) / (n * my * my);
    Ok((r, var.sqrt()))
}

/// Mean of `a - b` over paired samples and its standard error.
pub fn paired_difference(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::invalid(
            "paired difference needs equal lengths, n >= 2",
        ));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(mean_and_se(&d))
}

/// Hex SHA-256 of the JSON serialization of `value`.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("fingerprinted values serialize");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

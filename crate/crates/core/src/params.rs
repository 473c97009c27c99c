//! Physical and regularization parameters shared by every kernel and estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Nelson,
    Polaron,
}

/// Parameters of one model instance.
///
/// `eps` is the ultraviolet regularization (Gaussian damping `exp(-eps k^2)` in
/// the pair kernels), `lambda` the infrared cutoff removing `|k| < lambda`,
/// `p` the total momentum and `t` the time horizon. Nelson runs live on
/// `[-t, t]`, polaron runs on `[0, t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub model: Model,
    pub d: usize,
    pub g: f64,
    pub lambda: f64,
    pub eps: f64,
    pub p: Vec<f64>,
    pub t: f64,
}

impl ModelParams {
    pub fn nelson(d: usize, g: f64, lambda: f64, eps: f64, t: f64) -> Self {
        ModelParams {
            model: Model::Nelson,
            d,
            g,
            lambda,
            eps,
            p: vec![0.0; d],
            t,
        }
    }

    pub fn polaron(g: f64, lambda: f64, eps: f64, t: f64) -> Self {
        ModelParams {
            model: Model::Polaron,
            d: 3,
            g,
            lambda,
            eps,
            p: vec![0.0; 3],
            t,
        }
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        ModelParams {
            eps,
            ..self.clone()
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        ModelParams {
            lambda,
            ..self.clone()
        }
    }

    pub fn with_g(&self, g: f64) -> Self {
        ModelParams { g, ..self.clone() }
    }

    pub fn with_t(&self, t: f64) -> Self {
        ModelParams { t, ..self.clone() }
    }

    pub fn with_p(&self, p: &[f64]) -> Self {
        ModelParams {
            p: p.to_vec(),
            ..self.clone()
        }
    }

    pub fn p_norm_sq(&self) -> f64 {
        self.p.iter().map(|x| x * x).sum()
    }

    pub fn is_p_zero(&self) -> bool {
        self.p.iter().all(|&x| x == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d != 2 && self.d != 3 {
            return Err(Error::invalid(format!("d must be 2 or 3, got {}", self.d)));
        }
        if self.model == Model::Polaron && self.d != 3 {
            return Err(Error::invalid("the polaron model is three-dimensional"));
        }
        if !self.g.is_finite() {
            return Err(Error::invalid("g must be finite"));
        }
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(Error::invalid(format!(
                "T must be positive, got {}",
                self.t
            )));
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(Error::invalid(format!(
                "eps must be >= 0, got {}",
                self.eps
            )));
        }
        if !self.lambda.is_finite() {
            return Err(Error::invalid("lambda must be finite"));
        }
        match self.model {
            Model::Nelson if self.lambda <= 0.0 => {
                return Err(Error::invalid(format!(
                    "the Nelson model needs lambda > 0, got {}",
                    self.lambda
                )))
            }
            Model::Polaron if self.lambda < 0.0 => {
                return Err(Error::invalid(format!(
                    "lambda must be >= 0, got {}",
                    self.lambda
                )))
            }
            _ => {}
        }
        if self.p.len() != self.d {
            return Err(Error::invalid(format!(
                "P has {} components but d = {}",
                self.p.len(),
                self.d
            )));
        }
        if self.p.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("P must be finite"));
        }
        Ok(())
    }

    pub(crate) fn require_model(&self, model: Model) -> Result<()> {
        if self.model != model {
            return Err(Error::invalid(format!(
                "operation needs model {:?}, got {:?}",
                model, self.model
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelson_needs_positive_ir_cutoff() {
        assert!(ModelParams::nelson(3, 1.0, 0.0, 0.5, 1.0)
            .validate()
            .is_err());
        assert!(ModelParams::nelson(3, 1.0, 1.0, 0.5, 1.0)
            .validate()
            .is_ok());
    }

    #[test]
    fn polaron_allows_ir_limit() {
        assert!(ModelParams::polaron(1.0, 0.0, 0.0, 1.0).validate().is_ok());
        assert!(ModelParams::polaron(1.0, -1.0, 0.0, 1.0)
            .validate()
            .is_err());
    }

    #[test]
    fn rejects_bad_dimension_and_horizon() {
        assert!(ModelParams::nelson(4, 1.0, 1.0, 0.5, 1.0)
            .validate()
            .is_err());
        assert!(ModelParams::nelson(2, 1.0, 1.0, 0.5, 0.0)
            .validate()
            .is_err());
        assert!(ModelParams::nelson(2, 1.0, 1.0, -0.1, 1.0)
            .validate()
            .is_err());
        let mut p = ModelParams::nelson(3, 1.0, 1.0, 0.5, 1.0);
        p.p = vec![1.0, 0.0];
        assert!(p.validate().is_err());
    }
}

//! Sticky HDP-HMM with zero-mean Gaussian emissions, fitted by a truncated
//! weak-limit blocked Gibbs sampler.

mod counts;
mod dist;
mod emission;
mod forward;
mod hyper;
mod sampler;

pub use counts::{sample_aux_counts, sample_beta, sample_pi, sample_transitions, transition_counts, AuxCounts};
pub use dist::{dirichlet, sample_inverse_wishart, stick_breaking, stick_breaking_from};
pub use emission::{emission_loglik, sample_emissions};
pub use forward::{loglik, sample_labels, sample_path};
pub use hyper::resample_hyperparameters;
pub use sampler::{effective_state_count, fit, gibbs_sweep, init_state, occupancy, ChainSummary, FitResult};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaPrior {
    pub a: f64,
    pub b: f64,
}

/// Hyperparameters of the sticky HDP-HMM and its emission prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HdpHmmHyper {
    pub gamma: f64,
    pub alpha_plus_kappa: f64,
    /// Self-transition share `kappa / (alpha + kappa)`.
    pub rho: f64,
    /// Truncation level.
    #[serde(rename = "L")]
    pub truncation: usize,
    /// Inverse-Wishart degrees of freedom; `D + 2` when absent.
    pub nu0: Option<f64>,
    /// Inverse-Wishart scale (row-major `D x D`); identity when absent.
    pub s0: Option<Vec<Vec<f64>>>,
    pub hyper_resampling: bool,
    pub gamma_prior: GammaPrior,
    pub alpha_kappa_prior: GammaPrior,
    pub rho_prior: BetaPrior,
}

impl Default for HdpHmmHyper {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            alpha_plus_kappa: 10.0,
            rho: 0.9,
            truncation: 25,
            nu0: None,
            s0: None,
            hyper_resampling: false,
            gamma_prior: GammaPrior { shape: 1.0, rate: 0.01 },
            alpha_kappa_prior: GammaPrior { shape: 1.0, rate: 0.01 },
            rho_prior: BetaPrior { a: 10.0, b: 1.0 },
        }
    }
}

impl HdpHmmHyper {
    pub fn alpha(&self) -> f64 {
        self.alpha_plus_kappa * (1.0 - self.rho)
    }

    pub fn kappa(&self) -> f64 {
        self.alpha_plus_kappa * self.rho
    }

    /// Checks the chain parameters; emission-prior checks need the data dimension.
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !(self.alpha_plus_kappa > 0.0) {
            return Err(Error::InvalidConfig(
                "gamma and alpha_plus_kappa must be positive".into(),
            ));
        }
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidConfig("rho must lie in [0, 1)".into()));
        }
        if self.truncation < 2 {
            return Err(Error::InvalidConfig("truncation L must be at least 2".into()));
        }
        let priors = [
            self.gamma_prior.shape,
            self.gamma_prior.rate,
            self.alpha_kappa_prior.shape,
            self.alpha_kappa_prior.rate,
            self.rho_prior.a,
            self.rho_prior.b,
        ];
        if priors.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidConfig("hyperprior parameters must be positive".into()));
        }
        Ok(())
    }

    /// Resolves the Inverse-Wishart prior for `d`-dimensional features.
    pub fn emission_prior(&self, d: usize) -> Result<EmissionPrior> {
        let nu0 = self.nu0.unwrap_or(d as f64 + 2.0);
        if !(nu0 > d as f64 + 1.0) {
            return Err(Error::InvalidConfig(format!("nu0 must exceed D + 1 = {}", d + 1)));
        }
        let s0 = match &self.s0 {
            None => DMatrix::identity(d, d),
            Some(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::ShapeError {
                        expected: format!("{d}x{d} scale matrix"),
                        got: format!("{} rows", rows.len()),
                    });
                }
                DMatrix::from_fn(d, d, |i, j| rows[i][j])
            }
        };
        EmissionPrior::new(nu0, s0)
    }
}

/// Inverse-Wishart `IW(nu0, s0)` prior shared by all emission covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionPrior {
    pub nu0: f64,
    pub s0: DMatrix<f64>,
}

impl EmissionPrior {
    pub fn new(nu0: f64, s0: DMatrix<f64>) -> Result<Self> {
        let d = s0.nrows();
        if s0.ncols() != d || d == 0 {
            return Err(Error::ShapeError {
                expected: "non-empty square scale matrix".into(),
                got: format!("{}x{}", s0.nrows(), s0.ncols()),
            });
        }
        if (&s0 - s0.transpose()).abs().max() > 1e-12 * s0.abs().max().max(1.0) || s0.clone().cholesky().is_none() {
            return Err(Error::InvalidConfig("s0 must be symmetric positive definite".into()));
        }
        if !(nu0 > d as f64 - 1.0) {
            return Err(Error::InvalidConfig(format!(
                "nu0 must exceed D - 1 = {}",
                d as f64 - 1.0
            )));
        }
        Ok(Self { nu0, s0 })
    }

    pub fn dim(&self) -> usize {
        self.s0.nrows()
    }
}

/// Truncated sampler state. Labels are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct HdpHmmState {
    pub beta: Vec<f64>,
    /// Row-stochastic `L x L` transition matrix.
    pub pi: DMatrix<f64>,
    pub sigmas: Vec<DMatrix<f64>>,
    /// One label sequence per feature sequence.
    pub z: Vec<Vec<usize>>,
    /// Transition counts recomputable from `z`.
    pub n: DMatrix<usize>,
    pub m: DMatrix<usize>,
    pub w: Vec<usize>,
    pub loglik: f64,
}

impl HdpHmmState {
    pub fn num_states(&self) -> usize {
        self.beta.len()
    }

    /// `m` with the override counts removed from the diagonal.
    pub fn m_bar(&self) -> DMatrix<usize> {
        let mut mb = self.m.clone();
        for (j, w) in self.w.iter().enumerate() {
            mb[(j, j)] -= w;
        }
        mb
    }
}

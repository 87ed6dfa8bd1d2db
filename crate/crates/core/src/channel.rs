//! Network configuration, channel realizations and secondary-link pre-whitening.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    ensure_finite, hermitian_part, identity, inv_sqrt_psd, is_hermitian, psd_eig, sample_cn01,
    trace_re, ComplexMatrix, RngStream, HERMITIAN_TOL,
};

/// Eigenvalues of the whitened Gram matrix above this fraction of the largest count towards `d'`.
pub const CHANNEL_RANK_TOL: f64 = 1e-10;

/// One network instance: antenna counts, budgets, noise levels and rate targets.
///
/// Powers are linear. The single-UCR network is `K = 1` with `rate_targets = [Rb]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "Na")]
    pub na: usize,
    #[serde(rename = "Ns")]
    pub ns: usize,
    #[serde(rename = "Np")]
    pub np: usize,
    #[serde(rename = "Nr")]
    pub nr: usize,
    #[serde(rename = "K", default = "one")]
    pub k: usize,
    #[serde(rename = "Ps")]
    pub ps: f64,
    #[serde(rename = "Pp")]
    pub pp: f64,
    #[serde(default = "unit")]
    pub sigma_s2: f64,
    #[serde(default = "unit")]
    pub sigma_p2: f64,
    pub rate_targets: Vec<f64>,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

impl ScenarioConfig {
    /// Single-UCR scenario with unit noise at both receivers.
    pub fn single(na: usize, ns: usize, np: usize, nr: usize, ps: f64, pp: f64, rb: f64) -> Self {
        Self {
            na,
            ns,
            np,
            nr,
            k: 1,
            ps,
            pp,
            sigma_s2: 1.0,
            sigma_p2: 1.0,
            rate_targets: vec![rb],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.na == 0 || self.ns == 0 || self.np == 0 || self.nr == 0 || self.k == 0 {
            return Err(Error::config("antenna counts and K must be at least 1"));
        }
        for (name, v) in [
            ("Ps", self.ps),
            ("Pp", self.pp),
            ("sigma_s2", self.sigma_s2),
            ("sigma_p2", self.sigma_p2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.rate_targets.len() != self.k {
            return Err(Error::config(format!(
                "expected {} rate targets, got {}",
                self.k,
                self.rate_targets.len()
            )));
        }
        if let Some(r) = self
            .rate_targets
            .iter()
            .find(|r| !(r.is_finite() && **r > 0.0))
        {
            return Err(Error::config(format!(
                "rate targets must be positive, got {r}"
            )));
        }
        if self.k > 1 && self.k * self.ns > self.na {
            return Err(Error::config(format!(
                "block diagonalization needs K*Ns <= Na, got {}*{} > {}",
                self.k, self.ns, self.na
            )));
        }
        Ok(())
    }

    /// Per-antenna primary power `Pp / Np` under uniform allocation.
    pub fn rho(&self) -> f64 {
        self.pp / self.np as f64
    }

    pub fn is_downlink(&self) -> bool {
        self.k > 1
    }
}

/// How the primary transmit covariance is set.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum QpPolicy {
    /// `(Pp / Np) I`
    #[default]
    Uniform,
    Fixed(ComplexMatrix),
}

impl QpPolicy {
    pub fn resolve(&self, config: &ScenarioConfig) -> Result<ComplexMatrix> {
        match self {
            QpPolicy::Uniform => Ok(identity(config.np) * Complex64::new(config.rho(), 0.0)),
            QpPolicy::Fixed(q) => {
                if q.shape() != (config.np, config.np) {
                    return Err(Error::config(format!(
                        "fixed Qp must be {0}x{0}, got {1}x{2}",
                        config.np,
                        q.nrows(),
                        q.ncols()
                    )));
                }
                ensure_finite(q, "fixed Qp")
                    .map_err(|_| Error::config("fixed Qp is not finite"))?;
                if !is_hermitian(q, HERMITIAN_TOL) {
                    return Err(Error::config("fixed Qp is not Hermitian"));
                }
                let eig = psd_eig(q)?;
                if eig.eigenvalues.iter().any(|&l| l < 0.0) {
                    return Err(Error::config("fixed Qp is not positive semidefinite"));
                }
                let tr = trace_re(q);
                if tr > config.pp * (1.0 + 1e-12) {
                    return Err(Error::config(format!(
                        "fixed Qp trace {tr} exceeds Pp = {}",
                        config.pp
                    )));
                }
                Ok(hermitian_part(q))
            }
        }
    }
}

/// One draw of every channel in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// UCT to UCR k, each `Ns x Na`.
    pub g1: Vec<ComplexMatrix>,
    /// PT to UCR k, each `Ns x Np`.
    pub g2: Vec<ComplexMatrix>,
    /// PT to PR, `Nr x Np`.
    pub h1: ComplexMatrix,
    /// UCT to PR, `Nr x Na`.
    pub h2: ComplexMatrix,
    pub qp: ComplexMatrix,
}

impl ChannelRealization {
    pub fn k(&self) -> usize {
        self.g1.len()
    }

    /// PT interference covariance `G2 Qp G2^H` at UCR `user`.
    pub fn ucr_interference(&self, user: usize) -> ComplexMatrix {
        let g2 = &self.g2[user];
        hermitian_part(&(g2 * &self.qp * g2.adjoint()))
    }
}

/// Draws all channels with i.i.d. CN(0,1) entries.
///
/// Draw order is fixed: `G1_k, G2_k` for each user in turn, then `H1`, then `H2`.
pub fn sample_realization(
    config: &ScenarioConfig,
    qp_policy: &QpPolicy,
    rng: &mut RngStream,
) -> Result<ChannelRealization> {
    config.validate()?;
    let qp = qp_policy.resolve(config)?;
    let mut g1 = Vec::with_capacity(config.k);
    let mut g2 = Vec::with_capacity(config.k);
    for _ in 0..config.k {
        g1.push(sample_cn01(config.ns, config.na, rng));
        g2.push(sample_cn01(config.ns, config.np, rng));
    }
    let h1 = sample_cn01(config.nr, config.np, rng);
    let h2 = sample_cn01(config.nr, config.na, rng);
    Ok(ChannelRealization { g1, g2, h1, h2, qp })
}

/// The pre-whitened secondary channel and its spectrum.
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    /// `(Ks + σs² I)^{-1/2} G1`
    pub gtilde: ComplexMatrix,
    /// All eigenvalues of `Gtilde^H Gtilde`, descending and clamped at zero.
    pub alpha: Vec<f64>,
    /// Unitary eigenbasis aligned with `alpha`.
    pub eigenvectors: ComplexMatrix,
    pub rank_dprime: usize,
}

impl EffectiveChannel {
    /// Spectral data of an already whitened channel.
    pub fn from_whitened(gtilde: ComplexMatrix) -> Result<Self> {
        ensure_finite(&gtilde, "whitened channel")?;
        let gram = hermitian_part(&(gtilde.adjoint() * &gtilde));
        let eig = psd_eig(&gram)?;
        let alpha: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        let top = alpha.first().copied().unwrap_or(0.0);
        let rank_dprime = alpha
            .iter()
            .filter(|&&a| a > CHANNEL_RANK_TOL * top && a > 0.0)
            .count();
        Ok(Self {
            gtilde,
            alpha,
            eigenvectors: eig.eigenvectors,
            rank_dprime,
        })
    }

    /// The `d'` nonzero eigenvalues.
    pub fn active_alpha(&self) -> &[f64] {
        &self.alpha[..self.rank_dprime]
    }

    pub fn na(&self) -> usize {
        self.gtilde.ncols()
    }

    /// `Gtilde^H Gtilde`
    pub fn gram(&self) -> ComplexMatrix {
        hermitian_part(&(self.gtilde.adjoint() * &self.gtilde))
    }
}

/// Whitens `G1` against PT interference plus noise at the UCR.
pub fn prewhiten(
    g1: &ComplexMatrix,
    g2: &ComplexMatrix,
    qp: &ComplexMatrix,
    sigma_s2: f64,
) -> Result<EffectiveChannel> {
    if !(sigma_s2 > 0.0 && sigma_s2.is_finite()) {
        return Err(Error::domain(format!(
            "sigma_s2 must be positive, got {sigma_s2}"
        )));
    }
    if g1.nrows() != g2.nrows() || g2.ncols() != qp.nrows() || !qp.is_square() {
        return Err(Error::contract(format!(
            "prewhiten shapes: G1 {:?}, G2 {:?}, Qp {:?}",
            g1.shape(),
            g2.shape(),
            qp.shape()
        )));
    }
    let ns = g1.nrows();
    let ks = hermitian_part(&(g2 * qp * g2.adjoint()));
    let cov = ks + identity(ns) * Complex64::new(sigma_s2, 0.0);
    let w = inv_sqrt_psd(&cov)?;
    EffectiveChannel::from_whitened(w * g1)
}

/// `Kp = H2 Qs H2^H`
pub fn interference_covariance(h2: &ComplexMatrix, qs: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !qs.is_square() || h2.ncols() != qs.nrows() {
        return Err(Error::contract(format!(
            "interference_covariance shapes: H2 {:?}, Qs {:?}",
            h2.shape(),
            qs.shape()
        )));
    }
    Ok(hermitian_part(&(h2 * qs * h2.adjoint())))
}

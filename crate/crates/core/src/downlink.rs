//! Block-diagonalization precoding for several UCRs served by one UCT.
//!
//! Each user's signal is confined to the nullspace of every other user's
//! channel, which removes inter-user interference and leaves K independent
//! single-user designs.

use num_complex::Complex64;

use crate::channel::{ChannelRealization, EffectiveChannel, ScenarioConfig};
use crate::error::{Error, Result};
use crate::numerics::{
    hermitian_part, identity, inv_sqrt_psd, psd_eig, svd, trace_re, ComplexMatrix,
};
use crate::precoders::{self, numerical_rank, LogdetOptions, Method, Mode};

/// Singular values below this fraction of the largest are treated as zero.
pub const NULLSPACE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DownlinkPrecoder {
    /// `Na x l_k`, orthonormal columns.
    pub beamformers_t: Vec<ComplexMatrix>,
    /// `W_k` with `W_k W_k^H = Q_{k,s}`.
    pub per_user_w: Vec<ComplexMatrix>,
    pub per_user_q: Vec<ComplexMatrix>,
    pub aggregate_q: ComplexMatrix,
    pub per_user_rank: Vec<usize>,
    pub per_user_power: Vec<f64>,
    /// Rate on each user's whitened effective channel.
    pub per_user_rate: Vec<f64>,
    pub per_user_feasible: Vec<bool>,
    pub per_user_fallback: Vec<bool>,
    pub total_power: f64,
    /// Every user met its target and the aggregate power fits the budget.
    pub feasible: bool,
}

/// Orthonormal bases `T_k` of the nullspace of the other users' stacked channels.
pub fn bd_beamformers(g1_list: &[ComplexMatrix]) -> Result<Vec<ComplexMatrix>> {
    let k = g1_list.len();
    if k == 0 {
        return Err(Error::contract("no user channels"));
    }
    let na = g1_list[0].ncols();
    if g1_list.iter().any(|g| g.ncols() != na) {
        return Err(Error::contract(
            "user channels must share the transmit dimension",
        ));
    }
    if k == 1 {
        return Ok(vec![identity(na)]);
    }
    let stacked_rows: Vec<usize> = (0..k)
        .map(|j| {
            g1_list
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != j)
                .map(|(_, g)| g.nrows())
                .sum()
        })
        .collect();
    let total_rows: usize = g1_list.iter().map(|g| g.nrows()).sum();
    if total_rows > na {
        return Err(Error::Dimension(format!(
            "{total_rows} receive antennas in total exceed {na} transmit antennas"
        )));
    }
    (0..k)
        .map(|user| {
            let rows = stacked_rows[user];
            let mut stacked = ComplexMatrix::zeros(rows, na);
            let mut r = 0;
            for (j, g) in g1_list.iter().enumerate() {
                if j != user {
                    stacked.view_mut((r, 0), g.shape()).copy_from(g);
                    r += g.nrows();
                }
            }
            let dec = svd(&stacked)?;
            let smax = dec.singular_values.first().copied().unwrap_or(0.0);
            let rank = dec
                .singular_values
                .iter()
                .filter(|&&s| s > NULLSPACE_TOL * smax)
                .count();
            let l_k = na - rows;
            if na - rank < l_k {
                return Err(Error::Dimension(format!(
                    "nullspace of user {user} is too small"
                )));
            }
            Ok(dec.v.columns(na - l_k, l_k).into_owned())
        })
        .collect()
}

/// `W = T U diag(√λ)` from the eigendecomposition of the effective-space covariance.
fn beamformer(t: &ComplexMatrix, q_eff: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = psd_eig(q_eff)?;
    let keep = eig.eigenvalues.iter().take_while(|&&l| l > 0.0).count();
    let mut w = ComplexMatrix::zeros(t.nrows(), keep.max(1));
    for c in 0..keep {
        let col = t * eig.eigenvectors.column(c) * Complex64::new(eig.eigenvalues[c].sqrt(), 0.0);
        w.set_column(c, &col);
    }
    Ok(w)
}

/// Per-user designs on the block-diagonalized channels.
///
/// Each user is solved independently against the full budget `Ps`. A user
/// whose target is out of reach gets full-power waterfilling on a `Ps / K`
/// share in simulation mode, or a zero covariance in strict mode.
pub fn downlink_precode(
    realization: &ChannelRealization,
    config: &ScenarioConfig,
    method: Method,
    mode: Mode,
    opts: LogdetOptions,
) -> Result<DownlinkPrecoder> {
    config.validate()?;
    let k = realization.k();
    if k != config.k {
        return Err(Error::contract(format!(
            "realization has {k} users, config expects {}",
            config.k
        )));
    }
    let na = config.na;
    let ts = bd_beamformers(&realization.g1)?;
    let mut out = DownlinkPrecoder {
        beamformers_t: Vec::with_capacity(k),
        per_user_w: Vec::with_capacity(k),
        per_user_q: Vec::with_capacity(k),
        aggregate_q: ComplexMatrix::zeros(na, na),
        per_user_rank: Vec::with_capacity(k),
        per_user_power: Vec::with_capacity(k),
        per_user_rate: Vec::with_capacity(k),
        per_user_feasible: Vec::with_capacity(k),
        per_user_fallback: Vec::with_capacity(k),
        total_power: 0.0,
        feasible: true,
    };
    for (user, t) in ts.into_iter().enumerate() {
        let ns = realization.g1[user].nrows();
        let z = realization.ucr_interference(user)
            + identity(ns) * Complex64::new(config.sigma_s2, 0.0);
        let zw = inv_sqrt_psd(&z)?;
        let eff = EffectiveChannel::from_whitened(&zw * &realization.g1[user] * &t)?;
        let rk = config.rate_targets[user];
        let result = match precoders::design(method, &eff, config.ps, rk, Mode::Strict, opts) {
            Ok(r) => Some(r),
            Err(Error::Outage { .. }) => None,
            Err(e) => return Err(e),
        };
        let (q_eff, feasible, fallback, rate) = match (result, mode) {
            (Some(r), _) => (r.qs, r.feasible, false, r.achieved_rate),
            (None, Mode::Simulation) => {
                let r = precoders::full_power_fallback(&eff, config.ps / k as f64)?;
                (r.qs, false, true, r.achieved_rate)
            }
            (None, Mode::Strict) => (
                ComplexMatrix::zeros(t.ncols(), t.ncols()),
                false,
                false,
                0.0,
            ),
        };
        let q_user = hermitian_part(&(&t * &q_eff * t.adjoint()));
        let w = beamformer(&t, &q_eff)?;
        out.per_user_rank.push(numerical_rank(&q_eff, config.ps)?);
        let power = trace_re(&q_user);
        out.per_user_power.push(power);
        out.total_power += power;
        out.per_user_rate.push(rate);
        out.per_user_feasible.push(feasible);
        out.per_user_fallback.push(fallback);
        out.feasible &= feasible;
        out.aggregate_q += &q_user;
        out.per_user_q.push(q_user);
        out.per_user_w.push(w);
        out.beamformers_t.push(t);
    }
    out.aggregate_q = hermitian_part(&out.aggregate_q);
    if out.total_power > config.ps * (1.0 + 1e-12) {
        out.feasible = false;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{prewhiten, sample_realization, QpPolicy};
    use crate::metrics::secondary_rate;
    use crate::numerics::{frobenius, from_real_row_major, RngStream};

    fn downlink_config(ps: f64) -> ScenarioConfig {
        let mut c = ScenarioConfig::single(12, 4, 4, 4, ps, 10.0, 5.0);
        c.k = 3;
        c.rate_targets = vec![5.0; 3];
        c
    }

    #[test]
    fn orthogonal_users() {
        let g1 = from_real_row_major(1, 2, &[1.0, 0.0]).unwrap();
        let g2 = from_real_row_major(1, 2, &[0.0, 1.0]).unwrap();
        let t = bd_beamformers(&[g1, g2]).unwrap();
        assert!((t[0][(0, 0)].norm() - 1.0).abs() < 1e-12 && t[0][(1, 0)].norm() < 1e-12);
        assert!((t[1][(1, 0)].norm() - 1.0).abs() < 1e-12 && t[1][(0, 0)].norm() < 1e-12);
    }

    #[test]
    fn single_user_is_identity() {
        let g = from_real_row_major(1, 3, &[1.0, 2.0, 3.0]).unwrap();
        let t = bd_beamformers(&[g]).unwrap();
        assert!(frobenius(&(&t[0] - identity(3))) == 0.0);
    }

    #[test]
    fn too_many_receive_antennas() {
        let g = from_real_row_major(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(
            bd_beamformers(&[g.clone(), g]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn nullspace_residuals() {
        let c = downlink_config(100.0);
        let r = sample_realization(&c, &QpPolicy::Uniform, &mut RngStream::new(3, 0)).unwrap();
        let ts = bd_beamformers(&r.g1).unwrap();
        for (k, t) in ts.iter().enumerate() {
            assert_eq!(t.shape(), (12, 4));
            assert!(frobenius(&(t.adjoint() * t - identity(4))) <= 1e-10);
            for (j, g) in r.g1.iter().enumerate() {
                if j != k {
                    assert!(frobenius(&(g * t)) <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn reference_downlink_rates() {
        let c = downlink_config(100.0);
        for trial in 0..5 {
            let r =
                sample_realization(&c, &QpPolicy::Uniform, &mut RngStream::new(17, trial)).unwrap();
            let cw = downlink_precode(
                &r,
                &c,
                Method::Cwf,
                Mode::Simulation,
                LogdetOptions::default(),
            )
            .unwrap();
            let fw = downlink_precode(
                &r,
                &c,
                Method::Fwf,
                Mode::Simulation,
                LogdetOptions::default(),
            )
            .unwrap();
            for res in [&cw, &fw] {
                for k in 0..3 {
                    let ks = r.ucr_interference(k);
                    if res.per_user_feasible[k] {
                        let rate = secondary_rate(&r.g1[k], &res.per_user_q[k], &ks, 1.0).unwrap();
                        assert!((rate - 5.0).abs() <= 1e-6);
                    }
                    let w = &res.per_user_w[k];
                    assert!(
                        frobenius(&(w * w.adjoint() - &res.per_user_q[k]))
                            <= 1e-9 * res.per_user_power[k].max(1.0)
                    );
                    for j in 0..3 {
                        if j != k {
                            let leak = frobenius(&(&r.g1[j] * w));
                            assert!(leak <= 1e-9 * frobenius(&r.g1[j]) * frobenius(w).max(1e-300));
                        }
                    }
                }
                let agg = numerical_rank(&res.aggregate_q, c.ps).unwrap();
                assert!(agg <= res.per_user_rank.iter().sum::<usize>());
            }
            for k in 0..3 {
                if cw.per_user_feasible[k] && fw.per_user_feasible[k] {
                    assert!(fw.per_user_rank[k] <= cw.per_user_rank[k]);
                }
            }
        }
    }

    #[test]
    fn single_user_reduction() {
        let c = ScenarioConfig::single(4, 3, 2, 2, 50.0, 5.0, 4.0);
        let r = sample_realization(&c, &QpPolicy::Uniform, &mut RngStream::new(23, 0)).unwrap();
        let d = downlink_precode(
            &r,
            &c,
            Method::Fwf,
            Mode::Simulation,
            LogdetOptions::default(),
        )
        .unwrap();
        let eff = prewhiten(&r.g1[0], &r.g2[0], &r.qp, c.sigma_s2).unwrap();
        let s = precoders::fwf(&eff, c.ps, 4.0, Mode::Simulation).unwrap();
        assert!(frobenius(&(&d.aggregate_q - &s.qs)) <= 1e-12);
        assert_eq!(d.per_user_rank[0], s.rank);
    }

    #[test]
    fn strict_outage_zeroes_user() {
        let mut c = downlink_config(0.01);
        c.rate_targets = vec![20.0; 3];
        let r = sample_realization(&c, &QpPolicy::Uniform, &mut RngStream::new(2, 0)).unwrap();
        let d =
            downlink_precode(&r, &c, Method::Cwf, Mode::Strict, LogdetOptions::default()).unwrap();
        assert!(!d.feasible);
        assert_eq!(d.total_power, 0.0);
        let s = downlink_precode(
            &r,
            &c,
            Method::Cwf,
            Mode::Simulation,
            LogdetOptions::default(),
        )
        .unwrap();
        assert!(s.per_user_fallback.iter().all(|&f| f));
        assert!((s.total_power - 0.01).abs() < 1e-9);
    }
}

//! Uplink SINR and spectral efficiency under MRC with use-and-then-forget
//! detection, plus the log-sum-exp objective and its exact gradient with
//! respect to the pilot powers.
//!
//! For user `k` with serving set C_k and co-pilot set P_k (users on the same
//! pilot, `k` included):
//!
//! ```text
//! ζ_mk  = τ_p Σ_{j∈P_k} q_j β_mj + σ²
//! No_k  = L τ_p q_k^d q_k Σ_{m∈C_k} β_mk² / ζ_mk
//! De_k  = Σ_{m∈S_k} ( L τ_p Σ_{j∈P_k, j≠k} q_j^d q_j β_mj² / ζ_mk + Σ_j q_j^d β_mj + σ² )
//! SINR_k = No_k / De_k
//! ```
//!
//! where S_k is C_k or every AP depending on [`DenominatorScope`]. With
//! [`ContaminationScope::AllUsers`] the coherent interference sum runs over
//! every j ≠ k instead of the co-pilot users only. Because ζ_mk depends on
//! every co-pilot power, both No_k and De_k are differentiated through ζ as
//! well as through their explicit power factors.

use crate::clustering::AssociationMatrix;
use crate::config::{ContaminationScope, DenominatorScope, SinrConfig};
use crate::error::{Error, Result};
use crate::geometry::LargeScaleMatrix;
use crate::pilot::PilotAssignment;

/// Everything the SINR depends on except the pilot powers.
#[derive(Debug, Clone)]
pub struct SinrContext {
    pub beta: LargeScaleMatrix,
    pub assoc: AssociationMatrix,
    pub assignment: PilotAssignment,
    /// Data powers q_k^d (W).
    pub q_d: Vec<f64>,
    pub tau_p: usize,
    pub tau_c: usize,
    pub antennas: usize,
    pub noise_power: f64,
    pub model: SinrConfig,
    /// Co-pilot users of each user, itself included.
    co_pilot: Vec<Vec<usize>>,
    /// Users in each user's coherent interference term.
    interferers: Vec<Vec<usize>>,
    /// APs in each user's denominator.
    denominator_aps: Vec<Vec<usize>>,
    /// Σ_j q_j^d β_mj per AP; independent of pilot powers.
    received_data_power: Vec<f64>,
}

impl SinrContext {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        beta: LargeScaleMatrix,
        assoc: AssociationMatrix,
        assignment: PilotAssignment,
        q_d: Vec<f64>,
        tau_p: usize,
        tau_c: usize,
        antennas: usize,
        noise_power: f64,
        model: SinrConfig,
    ) -> Result<Self> {
        let (m_count, k_count) = (beta.num_aps(), beta.num_users());
        if assoc.num_aps() != m_count || assoc.num_users() != k_count {
            return Err(Error::InvalidConfig(format!(
                "association is {}x{} but large-scale matrix is {}x{}",
                assoc.num_aps(),
                assoc.num_users(),
                m_count,
                k_count
            )));
        }
        if assignment.num_users() != k_count || q_d.len() != k_count {
            return Err(Error::InvalidConfig(
                "pilot assignment and data powers must have one entry per user".into(),
            ));
        }
        if assignment.tau_p() != tau_p {
            return Err(Error::InvalidConfig("pilot assignment uses a different tau_p".into()));
        }
        if tau_p == 0 || tau_p > tau_c || antennas == 0 {
            return Err(Error::InvalidConfig(
                "need 1 <= tau_p <= tau_c and at least one antenna".into(),
            ));
        }
        if let Some(k) = (0..k_count).find(|&k| assoc.serving(k).is_empty()) {
            return Err(Error::EmptyServingSet { user: k });
        }
        let co_pilot: Vec<Vec<usize>> = (0..k_count).map(|k| assignment.co_pilot_users(k).collect()).collect();
        let interferers = (0..k_count)
            .map(|k| match model.contamination {
                ContaminationScope::CoPilot => co_pilot[k].iter().copied().filter(|&j| j != k).collect(),
                ContaminationScope::AllUsers => (0..k_count).filter(|&j| j != k).collect(),
            })
            .collect();
        let denominator_aps = (0..k_count)
            .map(|k| match model.denominator {
                DenominatorScope::Serving => assoc.serving(k).to_vec(),
                DenominatorScope::AllAps => (0..m_count).collect(),
            })
            .collect();
        let received_data_power = (0..m_count)
            .map(|m| (0..k_count).map(|j| q_d[j] * beta.get(m, j)).sum())
            .collect();
        Ok(Self {
            beta,
            assoc,
            assignment,
            q_d,
            tau_p,
            tau_c,
            antennas,
            noise_power,
            model,
            co_pilot,
            interferers,
            denominator_aps,
            received_data_power,
        })
    }

    pub fn num_users(&self) -> usize {
        self.q_d.len()
    }

    pub fn num_aps(&self) -> usize {
        self.beta.num_aps()
    }

    pub fn co_pilot(&self, k: usize) -> &[usize] {
        &self.co_pilot[k]
    }

    #[inline]
    fn zeta(&self, m: usize, k: usize, q_p: &[f64]) -> f64 {
        let s: f64 = self.co_pilot[k].iter().map(|&j| q_p[j] * self.beta.get(m, j)).sum();
        self.tau_p as f64 * s + self.noise_power
    }

    /// Σ_{j∈I_k} q_j^d q_j β_mj² over the coherent interferers I_k.
    #[inline]
    fn contamination(&self, m: usize, k: usize, q_p: &[f64]) -> f64 {
        self.interferers[k]
            .iter()
            .map(|&j| {
                let b = self.beta.get(m, j);
                self.q_d[j] * q_p[j] * b * b
            })
            .sum()
    }

    fn numerator(&self, k: usize, q_p: &[f64]) -> f64 {
        let lt = self.antennas as f64 * self.tau_p as f64;
        let s: f64 = self
            .assoc
            .serving(k)
            .iter()
            .map(|&m| {
                let b = self.beta.get(m, k);
                b * b / self.zeta(m, k, q_p)
            })
            .sum();
        lt * self.q_d[k] * q_p[k] * s
    }

    fn denominator(&self, k: usize, q_p: &[f64]) -> f64 {
        let lt = self.antennas as f64 * self.tau_p as f64;
        self.denominator_aps[k]
            .iter()
            .map(|&m| {
                lt * self.contamination(m, k, q_p) / self.zeta(m, k, q_p)
                    + self.received_data_power[m]
                    + self.noise_power
            })
            .sum()
    }

    /// Same network with β and σ² multiplied by `c`.
    pub fn with_scaled_gains(&self, c: f64) -> Self {
        Self::new(
            self.beta.scaled(c),
            self.assoc.clone(),
            self.assignment.clone(),
            self.q_d.clone(),
            self.tau_p,
            self.tau_c,
            self.antennas,
            self.noise_power * c,
            self.model,
        )
        .expect("scaling preserves validity")
    }
}

pub fn sinr(k: usize, q_p: &[f64], ctx: &SinrContext) -> f64 {
    let num = ctx.numerator(k, q_p);
    if num == 0.0 {
        return 0.0;
    }
    num / ctx.denominator(k, q_p)
}

pub fn sinr_all(q_p: &[f64], ctx: &SinrContext) -> Vec<f64> {
    (0..ctx.num_users()).map(|k| sinr(k, q_p, ctx)).collect()
}

/// Fraction of the coherence block left for data.
pub fn prelog(tau_p: usize, tau_c: usize) -> f64 {
    (tau_c - tau_p) as f64 / tau_c as f64
}

pub fn se_from_sinr(sinr: f64, tau_p: usize, tau_c: usize) -> f64 {
    prelog(tau_p, tau_c) * (1.0 + sinr).log2()
}

/// Spectral efficiency of user `k` in bit/s/Hz.
pub fn spectral_efficiency(k: usize, q_p: &[f64], ctx: &SinrContext) -> f64 {
    se_from_sinr(sinr(k, q_p, ctx), ctx.tau_p, ctx.tau_c)
}

pub fn spectral_efficiency_all(q_p: &[f64], ctx: &SinrContext) -> Vec<f64> {
    sinr_all(q_p, ctx)
        .into_iter()
        .map(|s| se_from_sinr(s, ctx.tau_p, ctx.tau_c))
        .collect()
}

/// (1/λ)·log Σ exp(λ x_i), shifted by the maximum so it cannot overflow.
pub fn log_sum_exp(values: &[f64], lambda: f64) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = values.iter().map(|v| (lambda * (v - max)).exp()).sum();
    max + s.ln() / lambda
}

/// Softmax weights exp(λ x_i) / Σ_j exp(λ x_j); the derivative of [`log_sum_exp`].
pub fn softmax_weights(values: &[f64], lambda: f64) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = values.iter().map(|v| (lambda * (v - max)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Smoothed maximum of the users' SINRs.
pub fn lse_objective(q_p: &[f64], ctx: &SinrContext, lambda: f64) -> f64 {
    log_sum_exp(&sinr_all(q_p, ctx), lambda)
}

/// ∂SINR_k/∂q_j for every user j.
///
/// Under co-pilot contamination only co-pilot users of `k` have non-zero entries.
pub fn grad_sinr(k: usize, q_p: &[f64], ctx: &SinrContext) -> Vec<f64> {
    let k_count = ctx.num_users();
    let lt = ctx.antennas as f64 * ctx.tau_p as f64;
    let tau = ctx.tau_p as f64;
    let co = ctx.co_pilot(k);

    // No_k and its partials
    let mut serving_sum = 0.0;
    let mut d_num = vec![0.0; k_count];
    for &m in ctx.assoc.serving(k) {
        let z = ctx.zeta(m, k, q_p);
        let b = ctx.beta.get(m, k);
        serving_sum += b * b / z;
        // ∂(β_mk²/ζ_mk)/∂q_j = −β_mk² τ β_mj / ζ_mk²
        for &j in co {
            d_num[j] -= b * b * tau * ctx.beta.get(m, j) / (z * z);
        }
    }
    let num_scale = lt * ctx.q_d[k];
    let num = num_scale * q_p[k] * serving_sum;
    for d in d_num.iter_mut() {
        *d *= num_scale * q_p[k];
    }
    d_num[k] += num_scale * serving_sum;

    // De_k and its partials
    let mut den = 0.0;
    let mut d_den = vec![0.0; k_count];
    for &m in &ctx.denominator_aps[k] {
        let z = ctx.zeta(m, k, q_p);
        let a = ctx.contamination(m, k, q_p);
        den += lt * a / z + ctx.received_data_power[m] + ctx.noise_power;
        for &j in &ctx.interferers[k] {
            let bj = ctx.beta.get(m, j);
            d_den[j] += lt * ctx.q_d[j] * bj * bj / z;
        }
        for &j in co {
            d_den[j] -= lt * a * tau * ctx.beta.get(m, j) / (z * z);
        }
    }

    let den2 = den * den;
    d_num
        .iter()
        .zip(&d_den)
        .map(|(dn, dd)| (den * dn - num * dd) / den2)
        .collect()
}

/// Gradient of [`lse_objective`]: softmax-weighted sum of the per-user SINR gradients.
pub fn grad_lse(q_p: &[f64], ctx: &SinrContext, lambda: f64) -> Vec<f64> {
    let w = softmax_weights(&sinr_all(q_p, ctx), lambda);
    let mut grad = vec![0.0; ctx.num_users()];
    for (k, wk) in w.iter().enumerate() {
        if *wk == 0.0 {
            continue;
        }
        for (g, d) in grad.iter_mut().zip(grad_sinr(k, q_p, ctx)) {
            *g += wk * d;
        }
    }
    grad
}

/// Aggregate estimation error Σ_k Σ_{m∈C_k} (β_mk − γ_mk), normalized by Σ_k Σ_{m∈C_k} β_mk.
pub fn estimation_error(q_p: &[f64], ctx: &SinrContext) -> f64 {
    let tau = ctx.tau_p as f64;
    let mut err = 0.0;
    let mut total = 0.0;
    for k in 0..ctx.num_users() {
        for &m in ctx.assoc.serving(k) {
            let b = ctx.beta.get(m, k);
            let gamma = tau * q_p[k] * b * b / ctx.zeta(m, k, q_p);
            err += b - gamma;
            total += b;
        }
    }
    err / total
}

pub fn grad_estimation_error(q_p: &[f64], ctx: &SinrContext) -> Vec<f64> {
    let tau = ctx.tau_p as f64;
    let mut grad = vec![0.0; ctx.num_users()];
    let mut total = 0.0;
    for k in 0..ctx.num_users() {
        for &m in ctx.assoc.serving(k) {
            let b = ctx.beta.get(m, k);
            total += b;
            let z = ctx.zeta(m, k, q_p);
            // −∂γ_mk/∂q_j
            for &j in ctx.co_pilot(k) {
                let mut d = tau * q_p[k] * b * b * tau * ctx.beta.get(m, j) / (z * z);
                if j == k {
                    d -= tau * b * b / z;
                }
                grad[j] += d;
            }
        }
    }
    grad.iter_mut().for_each(|g| *g /= total);
    grad
}

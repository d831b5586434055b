//! Pilot power controllers.
//!
//! The proposed controller maximizes the LSE-smoothed SINR objective with a
//! projected conjugate-direction method: Polak–Ribière directions, the
//! `-z·d / d·d` trial step, projection onto the power box and step halving
//! until the objective increases. Baselines are full pilot power and a
//! projected-gradient minimizer of the aggregate channel-estimation error.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::{NetworkConfig, SolverConfig};
use crate::error::{Error, Result};
use crate::pilot::PilotPowerVector;
use crate::power::{estimation_error, grad_estimation_error, grad_lse, lse_objective, SinrContext};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub lambda: f64,
    pub kappa: f64,
    pub kappa_abs: f64,
    pub max_iters: usize,
    pub max_backtracks: usize,
    /// Lower power bound ε (W).
    pub min_power: f64,
    /// Upper power bound P_max (W).
    pub max_power: f64,
}

impl SolverSettings {
    pub fn new(solver: &SolverConfig, network: &NetworkConfig) -> Self {
        Self {
            lambda: solver.lambda,
            kappa: solver.kappa,
            kappa_abs: solver.kappa_abs,
            max_iters: solver.max_iters,
            max_backtracks: solver.max_backtracks,
            min_power: network.min_pilot_power,
            max_power: network.max_pilot_power,
        }
    }

    fn project(&self, x: &mut [f64]) {
        for v in x {
            *v = v.clamp(self.min_power, self.max_power);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// No step length produced an increase.
    LineSearchStalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub q_p: Vec<f64>,
    pub objective: f64,
    pub grad_norm: f64,
}

/// Accepted iterates, starting with the (projected) initial point.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub iterates: Vec<Iterate>,
    pub stop: StopReason,
}

impl SolverTrace {
    pub fn final_objective(&self) -> f64 {
        self.iterates.last().expect("trace always holds the start point").objective
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,objective,grad_norm\n");
        for (i, it) in self.iterates.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{}", it.objective, it.grad_norm);
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Zeroes components that would push an active bound outward.
fn mask_active(x: &[f64], v: &mut [f64], lo: f64, hi: f64) {
    for (xi, vi) in x.iter().zip(v.iter_mut()) {
        if (*xi <= lo && *vi < 0.0) || (*xi >= hi && *vi > 0.0) {
            *vi = 0.0;
        }
    }
}

fn check_finite(iteration: usize, value: f64, grad: &[f64]) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::NonFinite {
            iteration,
            reason: format!("objective is {value}"),
        });
    }
    if let Some(g) = grad.iter().find(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            iteration,
            reason: format!("gradient entry is {g}"),
        });
    }
    Ok(())
}

/// Maximizes `objective` over the box `[min_power, max_power]^K`.
///
/// With `conjugate` unset this is plain projected steepest ascent.
pub fn projected_ascent<F, G>(
    objective: F,
    gradient: G,
    start: &[f64],
    settings: &SolverSettings,
    conjugate: bool,
) -> Result<(Vec<f64>, SolverTrace)>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let (lo, hi) = (settings.min_power, settings.max_power);
    let mut x = start.to_vec();
    settings.project(&mut x);
    let mut value = objective(&x);
    let mut grad = gradient(&x);
    check_finite(0, value, &grad)?;
    mask_active(&x, &mut grad, lo, hi);
    let tol = (settings.kappa * norm(&grad)).max(settings.kappa_abs);

    let mut iterates = vec![Iterate {
        q_p: x.clone(),
        objective: value,
        grad_norm: norm(&grad),
    }];
    // z is the gradient of the minimized function −X; d the search direction.
    let mut z: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut d = grad.clone();
    let mut stop = StopReason::MaxIterations;

    for t in 0..settings.max_iters {
        if norm(&z) <= tol {
            stop = StopReason::Converged;
            break;
        }
        let mut alpha = -dot(&z, &d) / dot(&d, &d);
        if !(alpha > 0.0 && alpha.is_finite()) {
            d = z.iter().map(|v| -v).collect();
            alpha = 1.0;
        }

        let mut accepted = None;
        for _ in 0..=settings.max_backtracks {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            settings.project(&mut trial);
            let v = objective(&trial);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    iteration: t + 1,
                    reason: format!("objective is {v} during line search"),
                });
            }
            if v > value {
                accepted = Some((trial, v));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, v_new)) = accepted else {
            stop = StopReason::LineSearchStalled;
            break;
        };

        let mut g_new = gradient(&x_new);
        check_finite(t + 1, v_new, &g_new)?;
        mask_active(&x_new, &mut g_new, lo, hi);
        let z_new: Vec<f64> = g_new.iter().map(|g| -g).collect();

        if conjugate {
            let zz = dot(&z, &z);
            let diff: Vec<f64> = z_new.iter().zip(&z).map(|(a, b)| a - b).collect();
            let pr = if zz > 0.0 { (dot(&z_new, &diff) / zz).max(0.0) } else { 0.0 };
            d = z_new.iter().zip(&d).map(|(zn, di)| -zn + pr * di).collect();
            mask_active(&x_new, &mut d, lo, hi);
            // restart along the gradient if the direction no longer ascends
            if dot(&d, &g_new) <= 0.0 {
                d = g_new.clone();
            }
        } else {
            d = g_new.clone();
        }

        x = x_new;
        value = v_new;
        z = z_new;
        iterates.push(Iterate {
            q_p: x.clone(),
            objective: value,
            grad_norm: norm(&g_new),
        });
    }

    Ok((x, SolverTrace { iterates, stop }))
}

/// Proposed controller: maximize the LSE-smoothed SINR objective.
pub fn wsrm_ppc(
    ctx: &SinrContext,
    settings: &SolverSettings,
    q_init: &PilotPowerVector,
) -> Result<(PilotPowerVector, SolverTrace)> {
    let lambda = settings.lambda;
    let (q, trace) = projected_ascent(
        |q| lse_objective(q, ctx, lambda),
        |q| grad_lse(q, ctx, lambda),
        q_init.as_slice(),
        settings,
        true,
    )?;
    Ok((PilotPowerVector(q), trace))
}

/// Every user transmits its pilot at full power.
pub fn f_ppc(ctx: &SinrContext, settings: &SolverSettings) -> PilotPowerVector {
    PilotPowerVector::constant(ctx.num_users(), settings.max_power)
}

/// Minimizes the aggregate estimation error over served links, starting from full power.
pub fn mse_ppc(ctx: &SinrContext, settings: &SolverSettings) -> Result<(PilotPowerVector, SolverTrace)> {
    let start = vec![settings.max_power; ctx.num_users()];
    let (q, mut trace) = projected_ascent(
        |q| -estimation_error(q, ctx),
        |q| grad_estimation_error(q, ctx).into_iter().map(|g| -g).collect(),
        &start,
        settings,
        false,
    )?;
    for it in &mut trace.iterates {
        it.objective = -it.objective;
    }
    Ok((PilotPowerVector(q), trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::AssociationMatrix;
    use crate::config::SinrConfig;
    use crate::geometry::LargeScaleMatrix;
    use crate::pilot::PilotAssignment;
    use crate::power::sinr;
    use ndarray::Array2;

    fn settings() -> SolverSettings {
        SolverSettings::new(&SolverConfig::default(), &NetworkConfig::default())
    }

    fn ctx(beta: Array2<f64>, pilots: Vec<usize>, tau_p: usize, q_d: f64, noise: f64) -> SinrContext {
        let (m, k) = beta.dim();
        SinrContext::new(
            LargeScaleMatrix::new(beta),
            AssociationMatrix::full(m, k),
            PilotAssignment::new(pilots, tau_p),
            vec![q_d; k],
            tau_p,
            200,
            1,
            noise,
            SinrConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn single_user_goes_to_full_power() {
        let c = ctx(ndarray::arr2(&[[1e-10], [3e-11]]), vec![0], 10, 0.1, 1e-12);
        let s = settings();
        // SINR increasing in q over the box on this instance
        let grid: Vec<f64> = (0..=100)
            .map(|i| s.min_power + (s.max_power - s.min_power) * i as f64 / 100.0)
            .collect();
        assert!(grid.windows(2).all(|w| sinr(0, &[w[1]], &c) > sinr(0, &[w[0]], &c)));
        let (q, trace) = wsrm_ppc(&c, &s, &PilotPowerVector(vec![0.01])).unwrap();
        assert!((q.0[0] - s.max_power).abs() < 1e-12, "{:?}", q);
        assert!(trace.iterates.windows(2).all(|w| w[1].objective >= w[0].objective));
    }

    #[test]
    fn zero_gradient_point_is_fixed() {
        // no data power: SINR is identically zero, so is the gradient
        let c = ctx(Array2::from_elem((3, 2), 1e-10), vec![0, 0], 1, 0.0, 1e-12);
        let start = PilotPowerVector(vec![0.05, 0.05]);
        let (q, trace) = wsrm_ppc(&c, &settings(), &start).unwrap();
        assert_eq!(q, start);
        assert_eq!(trace.iterates.len(), 1);
        assert_eq!(trace.stop, StopReason::Converged);
    }

    #[test]
    fn corner_with_outward_gradient_is_fixed() {
        let c = ctx(ndarray::arr2(&[[1e-10]]), vec![0], 1, 0.1, 1e-12);
        let s = settings();
        let start = PilotPowerVector(vec![s.max_power]);
        let (q, trace) = wsrm_ppc(&c, &s, &start).unwrap();
        assert_eq!(q, start);
        assert_eq!(trace.stop, StopReason::Converged);
    }

    #[test]
    fn f_ppc_is_full_power() {
        let c = ctx(Array2::from_elem((2, 3), 1e-10), vec![0, 1, 0], 2, 0.1, 1e-12);
        let s = settings();
        let q = f_ppc(&c, &s);
        assert_eq!(q.0, vec![s.max_power; 3]);
        assert!(q.within(s.min_power, s.max_power));
    }

    #[test]
    fn mse_single_user_full_power() {
        let c = ctx(ndarray::arr2(&[[1e-10], [1e-11]]), vec![0], 5, 0.1, 1e-12);
        let s = settings();
        let grid: Vec<f64> = (0..=50)
            .map(|i| s.min_power + (s.max_power - s.min_power) * i as f64 / 50.0)
            .collect();
        assert!(grid.windows(2).all(|w| estimation_error(&[w[1]], &c) < estimation_error(&[w[0]], &c)));
        let (q, _) = mse_ppc(&c, &s).unwrap();
        assert_eq!(q.0, vec![s.max_power]);
    }

    #[test]
    fn mse_two_copilot_users() {
        // user 0 far stronger than user 1 at both APs
        let c = ctx(ndarray::arr2(&[[1e-9, 1e-12], [5e-10, 2e-12]]), vec![0, 0], 5, 0.1, 1e-13);
        let s = settings();
        let (q, trace) = mse_ppc(&c, &s).unwrap();
        assert!(q.within(s.min_power, s.max_power));
        assert!(q.0[1] <= s.max_power);
        let full = f_ppc(&c, &s);
        assert!(estimation_error(&q.0, &c) <= estimation_error(&full.0, &c));
        assert!(trace.iterates.windows(2).all(|w| w[1].objective <= w[0].objective));
    }

    #[test]
    fn trace_csv_header() {
        let c = ctx(ndarray::arr2(&[[1e-10]]), vec![0], 1, 0.1, 1e-12);
        let (_, trace) = wsrm_ppc(&c, &settings(), &PilotPowerVector(vec![0.01])).unwrap();
        let csv = trace.to_csv();
        assert!(csv.starts_with("iteration,objective,grad_norm\n0,"));
        assert_eq!(csv.lines().count(), trace.iterates.len() + 1);
    }

    #[test]
    fn non_finite_objective_aborts() {
        let s = settings();
        let r = projected_ascent(|_| f64::NAN, |q| vec![0.0; q.len()], &[0.05], &s, true);
        assert!(matches!(r, Err(Error::NonFinite { iteration: 0, .. })));
    }
}

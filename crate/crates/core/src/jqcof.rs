//! Jointly quantized compute-and-forward.
//!
//! Relay `k` holds the pair `θₖ = (aₖx + ñ, yₖ)`, whitened to
//! `h̄ₖ x + z̄` with `h̄ₖ = [aₖ/√ε; hₖ]` and unit noise. The pair is rotated
//! onto the eigenvectors of its conditional covariance given what the
//! central processor already holds, and each eigen-component is quantized
//! separately; the backhaul is split between them by water-filling.
//!
//! Quantizer noise is carried in inverse form: a component with `η = 0` is
//! simply absent, and `(I + Ωₖ)⁻¹ = Uₖ diag(η/(1+η)) Uₖᵀ` is the only
//! quantity that reaches the linear algebra.

use serde::Serialize;

use crate::channel::{Channel, SearchMethod};
use crate::error::{Error, Result};
use crate::lattice::{best_equation_lll, enumerate_equations, CoefficientVector, EquationMatrix};
use crate::numerics::{cholesky_lower, dot, spd_inverse, sym_eig2, Matrix};
use crate::qcof::{computational_rate, deterministic_argmax, product_digits, product_size};

/// Name of the quantization-noise allocation rule, for run metadata.
pub const ALLOCATION: &str = "prop1";

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Waterfill {
    /// Inverse quantization noise per component.
    pub eta: [f64; 2],
    /// Water level.
    pub mu: f64,
}

/// Splits `capacity` bits between two components with conditional
/// variances `lambda` (each `≥ 1`).
///
/// `ηⱼ = ((1/μ)(1 − 1/λⱼ) − 1)⁺` with `μ` set so that
/// `Σⱼ ½ log₂(1 + ηⱼλⱼ) = capacity`. With `t = 1/μ − 1` an active component
/// has `1 + ηⱼλⱼ = t(λⱼ − 1)`, so for a fixed active set the constraint is a
/// power law in `t` and the level is solved directly.
pub fn waterfill(lambda: [f64; 2], capacity: f64) -> Waterfill {
    let lam = [lambda[0].max(1.0), lambda[1].max(1.0)];
    let excess = [lam[0] - 1.0, lam[1] - 1.0];
    let (hi, lo) = if excess[0] >= excess[1] { (0, 1) } else { (1, 0) };
    if !(capacity > 0.0) || excess[hi] <= 0.0 {
        return Waterfill { eta: [0.0, 0.0], mu: 1.0 };
    }

    // Component j turns on once t exceeds 1/excess[j].
    let log_target = 2.0 * capacity;
    let mut t = (log_target - excess[hi].log2()).exp2();
    if excess[lo] > 0.0 && t * excess[lo] > 1.0 {
        t = (0.5 * (log_target - excess[hi].log2() - excess[lo].log2())).exp2();
    }
    let mut eta = [0.0; 2];
    for j in 0..2 {
        let gain = t * excess[j];
        if gain > 1.0 {
            eta[j] = (gain - 1.0) / lam[j];
        }
    }
    Waterfill {
        eta,
        mu: 1.0 / (1.0 + t),
    }
}

/// Bits spent on each component: `½ log₂(1 + ηⱼλⱼ)`.
pub fn component_rates(lambda: [f64; 2], eta: [f64; 2]) -> [f64; 2] {
    [
        0.5 * (eta[0] * lambda[0]).ln_1p() / std::f64::consts::LN_2,
        0.5 * (eta[1] * lambda[1]).ln_1p() / std::f64::consts::LN_2,
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct RelayCompression {
    /// Eigenvalues of the conditional covariance of `θₖ`, largest first.
    pub lambda: [f64; 2],
    /// Eigenvectors as columns.
    pub u: [[f64; 2]; 2],
    pub eta: [f64; 2],
    pub mu: f64,
    /// Backhaul bits per component.
    pub split: [f64; 2],
    /// Trace of the conditional covariance of `x` before this relay.
    pub prior_mse_trace: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct JqcofEvaluation {
    pub equations: EquationMatrix,
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    pub relays: Vec<RelayCompression>,
    pub g_diag: Vec<f64>,
    /// Computation rate per relay; `None` for a relay decoding no equation.
    pub rco: Vec<Option<f64>>,
    /// Trace of the conditional covariance of `x` given all relays.
    pub final_mse_trace: f64,
    pub allocation: &'static str,
}

struct Core {
    rates: Vec<f64>,
    sum_rate: f64,
    relays: Vec<RelayCompression>,
    g_diag: Vec<f64>,
    final_mse_trace: f64,
}

fn evaluate_core(
    h: &Channel,
    rows: &[&[i64]],
    snr: f64,
    backhaul: &[f64],
    epsilon: f64,
    rco: &[Option<f64>],
) -> Result<Core> {
    let users = h.users();
    let inv_sqrt_eps = 1.0 / epsilon.sqrt();
    // Σ_j h̄ⱼᵀ (I + Ωⱼ)⁻¹ h̄ⱼ over the relays decompressed so far.
    let mut info = Matrix::zeros(users, users);
    let mut relays = Vec::with_capacity(rows.len());

    for (k, a) in rows.iter().enumerate() {
        let eq: Vec<f64> = a.iter().map(|&x| x as f64 * inv_sqrt_eps).collect();
        let y = h.gains(k);

        let kx = if k == 0 {
            Matrix::identity(users).scale(snr)
        } else {
            let mut m = info.clone();
            for i in 0..users {
                m[(i, i)] += 1.0 / snr;
            }
            spd_inverse(&m)?
        };
        let kx_eq = kx.apply(&eq);
        let kx_y = kx.apply(y);
        let cov = [
            [dot(&eq, &kx_eq) + 1.0, dot(&eq, &kx_y)],
            [dot(y, &kx_eq), dot(y, &kx_y) + 1.0],
        ];
        let eig = sym_eig2(cov);
        let wf = waterfill(eig.values, backhaul[k]);
        let weights = eig.reconstruct_with([wf.eta[0] / (1.0 + wf.eta[0]), wf.eta[1] / (1.0 + wf.eta[1])]);

        for i in 0..users {
            let hi = [eq[i], y[i]];
            for j in 0..users {
                let hj = [eq[j], y[j]];
                let mut s = 0.0;
                for p in 0..2 {
                    for q in 0..2 {
                        s += hi[p] * weights[p][q] * hj[q];
                    }
                }
                info[(i, j)] += s;
            }
        }

        relays.push(RelayCompression {
            lambda: eig.values,
            u: eig.vectors,
            eta: wf.eta,
            mu: wf.mu,
            split: component_rates([eig.values[0].max(1.0), eig.values[1].max(1.0)], wf.eta),
            prior_mse_trace: kx.trace(),
        });
    }

    let mut posterior = info.clone();
    for i in 0..users {
        posterior[(i, i)] += 1.0 / snr;
    }
    let final_mse_trace = spd_inverse(&posterior)?.trace();

    let mut m = info.scale(snr);
    for i in 0..users {
        m[(i, i)] += 1.0;
    }
    let g_diag = cholesky_lower(&m)?.diag();
    let mut rates: Vec<f64> = g_diag.iter().map(|d| d.log2().max(0.0)).collect();
    for (a, r) in rows.iter().zip(rco) {
        if let Some(r) = r {
            for (l, &x) in a.iter().enumerate() {
                if x != 0 {
                    rates[l] = rates[l].min(*r);
                }
            }
        }
    }
    let sum_rate = rates.iter().sum();
    Ok(Core {
        rates,
        sum_rate,
        relays,
        g_diag,
        final_mse_trace,
    })
}

fn check_inputs(h: &Channel, snr: f64, backhaul: &[f64], epsilon: f64) -> Result<()> {
    if backhaul.len() != h.relays() {
        return Err(Error::DimensionMismatch(format!(
            "{} backhaul links for {} relays",
            backhaul.len(),
            h.relays()
        )));
    }
    if !(snr > 0.0) {
        return Err(Error::InvalidConfig(format!("snr must be positive, got {snr}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

fn relay_rate(h: &[f64], a: &CoefficientVector, snr: f64) -> Result<Option<f64>> {
    if a.is_zero() {
        Ok(None)
    } else {
        computational_rate(h, a, snr).map(Some)
    }
}

/// Rates achieved by JQCoF for equations `a`; zero rows mean the relay only
/// compresses its received signal.
pub fn jqcof_evaluate(
    h: &Channel,
    a: &EquationMatrix,
    snr: f64,
    backhaul: &[f64],
    epsilon: f64,
) -> Result<JqcofEvaluation> {
    check_inputs(h, snr, backhaul, epsilon)?;
    if a.relays() != h.relays() || a.users() != h.users() {
        return Err(Error::DimensionMismatch(format!(
            "equations are {}x{}, channel is {}x{}",
            a.relays(),
            a.users(),
            h.relays(),
            h.users()
        )));
    }
    let rco = a
        .rows()
        .iter()
        .enumerate()
        .map(|(k, row)| relay_rate(h.gains(k), row, snr))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<&[i64]> = a.rows().iter().map(|r| r.as_slice()).collect();
    let core = evaluate_core(h, &rows, snr, backhaul, epsilon, &rco)?;
    Ok(JqcofEvaluation {
        equations: a.clone(),
        rates: core.rates,
        sum_rate: core.sum_rate,
        relays: core.relays,
        g_diag: core.g_diag,
        rco,
        final_mse_trace: core.final_mse_trace,
        allocation: ALLOCATION,
    })
}

/// Equation matrix maximizing the JQCoF sum-rate under the water-filling
/// noise allocation.
///
/// Both methods include the all-zero matrix (pure successive Wyner-Ziv) in
/// what they compare, so the result never falls below that baseline.
pub fn jqcof_optimize(
    h: &Channel,
    snr: f64,
    backhaul: &[f64],
    epsilon: f64,
    method: SearchMethod,
    lll_delta: f64,
) -> Result<JqcofEvaluation> {
    check_inputs(h, snr, backhaul, epsilon)?;
    let relays = h.relays();
    let users = h.users();
    match method {
        SearchMethod::Lll => {
            let rows = (0..relays)
                .map(|k| best_equation_lll(h.gains(k), snr, lll_delta).map_err(|e| e.at_relay(k)))
                .collect::<Result<Vec<_>>>()?;
            let lll = jqcof_evaluate(h, &EquationMatrix::new(rows)?, snr, backhaul, epsilon)?;
            let swz = jqcof_evaluate(h, &EquationMatrix::zeros(relays, users), snr, backhaul, epsilon)?;
            Ok(if swz.sum_rate > lll.sum_rate { swz } else { lll })
        }
        SearchMethod::Exhaustive => {
            let candidates = (0..relays)
                .map(|k| {
                    let mut list = vec![CoefficientVector::zero(users)];
                    list.extend(enumerate_equations(h.gains(k), snr).map_err(|e| e.at_relay(k))?);
                    Ok(list)
                })
                .collect::<Result<Vec<_>>>()?;
            let rco = candidates
                .iter()
                .enumerate()
                .map(|(k, list)| {
                    list.iter()
                        .map(|a| relay_rate(h.gains(k), a, snr))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let sizes: Vec<usize> = candidates.iter().map(Vec::len).collect();
            let total = product_size(&sizes)?;

            let (_, best) = deterministic_argmax(total, |idx| {
                let mut pick = vec![0; relays];
                product_digits(idx, &sizes, &mut pick);
                let rows: Vec<&[i64]> = (0..relays).map(|k| candidates[k][pick[k]].as_slice()).collect();
                let r: Vec<Option<f64>> = (0..relays).map(|k| rco[k][pick[k]]).collect();
                Ok(evaluate_core(h, &rows, snr, backhaul, epsilon, &r)?.sum_rate)
            })?;

            let mut pick = vec![0; relays];
            product_digits(best, &sizes, &mut pick);
            let a = EquationMatrix::new((0..relays).map(|k| candidates[k][pick[k]].clone()).collect())?;
            jqcof_evaluate(h, &a, snr, backhaul, epsilon)
        }
    }
}

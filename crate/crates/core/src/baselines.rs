//! Reference schemes: compute-and-forward with several equations per relay,
//! and successive Wyner-Ziv compression of the raw relay outputs.

use std::collections::HashMap;

use serde::Serialize;

use crate::channel::Channel;
use crate::error::Result;
use crate::lattice::{integer_rank, successive_equations, CoefficientVector};
use crate::numerics::{exp2_2c_m1, log2_det_spd, spd_inverse_quadratic, Matrix};
use crate::qcof::computational_rate;

/// Equations decoded at each relay; stacked they form a full-rank `L x L`
/// system.
#[derive(Clone, Debug, Serialize)]
pub struct CofAllocation {
    pub counts: Vec<usize>,
    pub equations: Vec<Vec<CoefficientVector>>,
}

impl CofAllocation {
    pub fn stacked(&self) -> Vec<&CoefficientVector> {
        self.equations.iter().flatten().collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CofEvaluation {
    /// Best allocation, `None` when no allocation was decodable.
    pub allocation: Option<CofAllocation>,
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    /// Uniform factor applied to all rates to respect the backhaul.
    pub scale: f64,
}

/// All ways of writing `total` as an ordered sum of `parts` nonnegative
/// integers, first part varying slowest.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() + 1 == parts {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for m in 0..=left {
            cur.push(m);
            rec(left - m, parts, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

/// Backhaul-limited CoF rates for one stacked equation set.
///
/// Every forwarded equation costs the rate of its fastest participant; if a
/// relay's total exceeds its capacity, all rates shrink by the same factor.
pub fn cof_rates(
    h: &Channel,
    snr: f64,
    backhaul: &[f64],
    equations: &[Vec<CoefficientVector>],
) -> Result<(Vec<f64>, f64)> {
    let users = h.users();
    let mut rates = vec![f64::INFINITY; users];
    for (k, eqs) in equations.iter().enumerate() {
        for a in eqs {
            let r = computational_rate(h.gains(k), a, snr)?;
            for l in a.support() {
                rates[l] = rates[l].min(r);
            }
        }
    }
    if rates.iter().any(|r| r.is_infinite()) {
        // Some user is in no equation: the system cannot be solved.
        return Ok((vec![0.0; users], 0.0));
    }
    let mut scale: f64 = 1.0;
    for (eqs, &c) in equations.iter().zip(backhaul) {
        let load: f64 = eqs
            .iter()
            .map(|a| a.support().map(|l| rates[l]).fold(0.0, f64::max))
            .sum();
        if load > 0.0 {
            scale = scale.min(c / load);
        }
    }
    Ok((rates.iter().map(|r| r * scale).collect(), scale))
}

/// Best CoF sum-rate over all splits of `L` equations among the relays,
/// each relay decoding its successive minima.
pub fn cof_multi_equation(h: &Channel, snr: f64, backhaul: &[f64]) -> Result<CofEvaluation> {
    let users = h.users();
    let mut cache: HashMap<(usize, usize), Vec<CoefficientVector>> = HashMap::new();
    let mut best = CofEvaluation {
        allocation: None,
        rates: vec![0.0; users],
        sum_rate: 0.0,
        scale: 0.0,
    };

    for counts in compositions(users, h.relays()) {
        let mut equations = Vec::with_capacity(counts.len());
        for (k, &m) in counts.iter().enumerate() {
            if m == 0 {
                equations.push(Vec::new());
                continue;
            }
            let eqs = match cache.get(&(k, m)) {
                Some(e) => e.clone(),
                None => {
                    let e = successive_equations(h.gains(k), snr, m).map_err(|e| e.at_relay(k))?;
                    cache.insert((k, m), e.clone());
                    e
                }
            };
            equations.push(eqs);
        }
        let rows: Vec<&[i64]> = equations.iter().flatten().map(|a| a.as_slice()).collect();
        if integer_rank(&rows) < users {
            continue;
        }
        let (rates, scale) = cof_rates(h, snr, backhaul, &equations)?;
        let sum_rate: f64 = rates.iter().sum();
        if best.allocation.is_none() || sum_rate > best.sum_rate {
            best = CofEvaluation {
                allocation: Some(CofAllocation { counts, equations }),
                rates,
                sum_rate,
                scale,
            };
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct SwzEvaluation {
    /// `Var(yₖ | ŷ₁..ŷₖ₋₁)` per relay.
    pub conditional_variance: Vec<f64>,
    /// Quantization noise per relay; `+inf` for a relay with no backhaul.
    pub quantization_noise: Vec<f64>,
    pub sum_rate: f64,
}

/// Successive Wyner-Ziv: each relay quantizes its own output with a Gaussian
/// test channel `ŷₖ = yₖ + qₖ`, decompressed in relay order with the earlier
/// descriptions as side information.
pub fn swz_evaluate(h: &Channel, snr: f64, backhaul: &[f64]) -> Result<SwzEvaluation> {
    let relays = h.relays();
    let hm = h.matrix();
    // Covariance of the clean outputs: snr H Hᵀ + I.
    let cov = Matrix::identity(relays).add(&hm.matmul(&hm.transpose()).scale(snr));

    let mut active: Vec<usize> = Vec::new();
    let mut q = Vec::with_capacity(relays);
    let mut v = Vec::with_capacity(relays);
    for k in 0..relays {
        let var = if active.is_empty() {
            cov[(k, k)]
        } else {
            let n = active.len();
            let mut side = Matrix::zeros(n, n);
            for (i, &a) in active.iter().enumerate() {
                for (j, &b) in active.iter().enumerate() {
                    side[(i, j)] = cov[(a, b)];
                }
                side[(i, i)] += q[a];
            }
            let cross: Vec<f64> = active.iter().map(|&a| cov[(a, k)]).collect();
            cov[(k, k)] - spd_inverse_quadratic(&side, &cross)?
        };
        v.push(var);
        if backhaul[k] > 0.0 {
            q.push(var / exp2_2c_m1(backhaul[k]));
            active.push(k);
        } else {
            q.push(f64::INFINITY);
        }
    }

    let users = h.users();
    let mut m = Matrix::identity(users);
    for &k in &active {
        let w = snr / (1.0 + q[k]);
        let row = h.gains(k);
        for i in 0..users {
            for j in 0..users {
                m[(i, j)] += w * row[i] * row[j];
            }
        }
    }
    Ok(SwzEvaluation {
        conditional_variance: v,
        quantization_noise: q,
        sum_rate: 0.5 * log2_det_spd(&m)?,
    })
}

pub fn swz_sum_rate(h: &Channel, snr: f64, backhaul: &[f64]) -> Result<f64> {
    Ok(swz_evaluate(h, snr, backhaul)?.sum_rate)
}

//! Quantized compute-and-forward.
//!
//! Relay `k` decodes the integer combination `aₖx`, and the central
//! processor receives it through a Wyner-Ziv quantizer of noise `σₖ²`. The
//! quantizer is sized so that, given the equations already decompressed, the
//! description fits the backhaul `Cₖ`. Users are then decoded by SIC.
//! A user's rate is capped by the computation rate of every equation it
//! enters and by its SIC term `½ log₂ g_ll²`.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{Channel, SearchMethod};
use crate::error::{Error, Result};
use crate::lattice::{
    best_equation_lll, enumerate_equations, integer_det, lattice_metric_sq, CoefficientVector, EquationMatrix,
    DEFAULT_CANDIDATE_CAP,
};
use crate::numerics::{exp2_2c_m1, log2_plus};

#[derive(Clone, Debug, Serialize)]
pub struct QcofEvaluation {
    pub equations: EquationMatrix,
    /// Per-user rates, bits per channel use.
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    /// Compression noise per relay; `+inf` marks a relay with no backhaul.
    pub sigma: Vec<f64>,
    /// Conditional MMSE of each equation given the ones before it.
    pub nu: Vec<f64>,
    /// Diagonal of the SIC Cholesky factor.
    pub g_diag: Vec<f64>,
    /// Computation rate of each relay's equation.
    pub rco: Vec<f64>,
    /// Users that appear in no equation; only the SIC term limits them.
    pub unconstrained_users: Vec<usize>,
}

/// Computation rate `½ log₂⁺(1 / ‖Fᵀa‖²)` of equation `a` over gains `h`.
pub fn computational_rate(h: &[f64], a: &CoefficientVector, snr: f64) -> Result<f64> {
    if a.is_zero() {
        return Err(Error::ZeroCoefficient);
    }
    if a.len() != h.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} users",
            a.len(),
            h.len()
        )));
    }
    Ok(0.5 * log2_plus(1.0 / lattice_metric_sq(h, a.as_slice(), snr))?)
}

/// Compression noises `σₖ²` and conditional MMSEs `νₖ` for equations
/// decompressed in row order.
pub fn compression_noises(
    a: &EquationMatrix,
    snr: f64,
    backhaul: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows: Vec<&[i64]> = a.rows().iter().map(|r| r.as_slice()).collect();
    let (sigma, nu, _, _) = noise_recursion(&rows, a.users(), snr, backhaul)?;
    Ok((sigma, nu))
}

/// Largest number of relays the exact determinant expansion accepts; its
/// cost grows as `2^K`.
pub const MAX_RELAYS: usize = 16;

/// `det(diag(d) + snr B Bᵀ)`, with `B` the integer rows truncated to their
/// first `cols` entries.
///
/// Expanded over principal minors, `Σ_S Π_{i∉S} dᵢ · snr^|S| · det(B_S B_Sᵀ)`.
/// The Gram minors are exact integers and every term is nonnegative, so the
/// sum stays accurate when the `dᵢ` span many orders of magnitude (large
/// backhaul drives them towards zero).
fn det_diag_plus_gram(d: &[f64], rows: &[&[i64]], cols: usize, snr: f64) -> f64 {
    let n = rows.len();
    let gram: Vec<Vec<i64>> = rows
        .iter()
        .map(|ri| rows.iter().map(|rj| (0..cols).map(|c| ri[c] * rj[c]).sum()).collect())
        .collect();
    let mut picked = Vec::with_capacity(n);
    let mut sub: Vec<Vec<i64>> = Vec::with_capacity(n);
    let mut total = 0.0;
    for mask in 0u32..(1u32 << n) {
        picked.clear();
        picked.extend((0..n).filter(|&i| mask >> i & 1 == 1));
        let minor = match picked.len() {
            0 => 1.0,
            1 => gram[picked[0]][picked[0]] as f64,
            _ => {
                sub.clear();
                sub.extend(picked.iter().map(|&i| picked.iter().map(|&j| gram[i][j]).collect()));
                integer_det(&sub) as f64
            }
        };
        if minor == 0.0 {
            continue;
        }
        let rest: f64 = (0..n).filter(|&i| mask >> i & 1 == 0).map(|i| d[i]).product();
        total += rest * snr.powi(picked.len() as i32) * minor;
    }
    total
}

/// Runs the decompression recursion and returns `(σ², ν)` together with
/// the equations and noises of the relays that carry information.
///
/// `νₖ = Var(aₖx | earlier descriptions)` is the Schur complement of the
/// joint covariance `diag(σ², 0) + snr [B; aₖ][B; aₖ]ᵀ`, taken as a ratio of
/// two determinants.
fn noise_recursion<'a>(
    rows: &[&'a [i64]],
    users: usize,
    snr: f64,
    backhaul: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, Vec<&'a [i64]>, Vec<f64>)> {
    if rows.len() != backhaul.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} equations for {} backhaul links",
            rows.len(),
            backhaul.len()
        )));
    }
    if rows.len() > MAX_RELAYS {
        return Err(Error::InvalidConfig(format!(
            "{} relays exceed the supported maximum of {MAX_RELAYS}",
            rows.len()
        )));
    }
    let mut sigma = Vec::with_capacity(rows.len());
    let mut nu = Vec::with_capacity(rows.len());
    let mut active: Vec<&[i64]> = Vec::new();
    let mut noise: Vec<f64> = Vec::new();
    for (&a, &c) in rows.iter().zip(backhaul) {
        let prior = det_diag_plus_gram(&noise, &active, users, snr);
        active.push(a);
        noise.push(0.0);
        let v = det_diag_plus_gram(&noise, &active, users, snr) / prior;
        active.pop();
        noise.pop();
        nu.push(v);
        if c > 0.0 {
            let s = v / exp2_2c_m1(c);
            sigma.push(s);
            active.push(a);
            noise.push(s);
        } else {
            sigma.push(f64::INFINITY);
        }
    }
    Ok((sigma, nu, active, noise))
}

struct Core {
    rates: Vec<f64>,
    sum_rate: f64,
    sigma: Vec<f64>,
    nu: Vec<f64>,
    g_diag: Vec<f64>,
}

fn evaluate_core(rows: &[&[i64]], users: usize, snr: f64, backhaul: &[f64], rco: &[f64]) -> Result<Core> {
    let (sigma, nu, active, noise) = noise_recursion(rows, users, snr, backhaul)?;
    // With M = I + snr AᵀΣ⁻¹A = G Gᵀ, the leading minors of M are
    // det(Σ + snr A_l A_lᵀ) / det Σ, and g_ll² is the ratio of consecutive ones.
    let mut prev = det_diag_plus_gram(&noise, &active, 0, snr);
    let mut g_diag = Vec::with_capacity(users);
    for l in 1..=users {
        let cur = det_diag_plus_gram(&noise, &active, l, snr);
        g_diag.push((cur / prev).sqrt());
        prev = cur;
    }

    let mut rates: Vec<f64> = g_diag.iter().map(|d| d.log2().max(0.0)).collect();
    for (a, &r) in rows.iter().zip(rco) {
        for (l, &x) in a.iter().enumerate() {
            if x != 0 {
                rates[l] = rates[l].min(r);
            }
        }
    }
    let sum_rate = rates.iter().sum();
    Ok(Core {
        rates,
        sum_rate,
        sigma,
        nu,
        g_diag,
    })
}

/// Rates achieved by QCoF for equations `a` over channel `h`.
pub fn qcof_evaluate(h: &Channel, a: &EquationMatrix, snr: f64, backhaul: &[f64]) -> Result<QcofEvaluation> {
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
        .map(|(k, row)| computational_rate(h.gains(k), row, snr))
        .collect::<Result<Vec<f64>>>()?;
    let rows: Vec<&[i64]> = a.rows().iter().map(|r| r.as_slice()).collect();
    let core = evaluate_core(&rows, h.users(), snr, backhaul, &rco)?;
    let unconstrained_users = (0..h.users())
        .filter(|&l| rows.iter().all(|r| r[l] == 0))
        .collect();
    Ok(QcofEvaluation {
        equations: a.clone(),
        rates: core.rates,
        sum_rate: core.sum_rate,
        sigma: core.sigma,
        nu: core.nu,
        g_diag: core.g_diag,
        rco,
        unconstrained_users,
    })
}

/// Candidate lists for a product search, with the flat size checked against
/// the enumeration cap.
pub(crate) fn product_size(lists: &[usize]) -> Result<u64> {
    lists.iter().try_fold(1u64, |acc, &n| {
        acc.checked_mul(n as u64)
            .filter(|&t| t <= DEFAULT_CANDIDATE_CAP)
            .ok_or(Error::BoundTooLarge {
                cap: DEFAULT_CANDIDATE_CAP,
            })
    })
}

/// Decodes a flat product index into per-relay candidate indices, relay 0
/// being the most significant digit.
pub(crate) fn product_digits(mut idx: u64, sizes: &[usize], out: &mut [usize]) {
    for k in (0..sizes.len()).rev() {
        out[k] = (idx % sizes[k] as u64) as usize;
        idx /= sizes[k] as u64;
    }
}

/// Argmax of `score` over `0..total`; ties go to the smallest index, so the
/// answer does not depend on how rayon splits the range.
pub(crate) fn deterministic_argmax<F>(total: u64, score: F) -> Result<(f64, u64)>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    (0..total)
        .into_par_iter()
        .map(|i| score(i).map(|s| (s, i)))
        .try_reduce(
            || (f64::NEG_INFINITY, u64::MAX),
            |a, b| {
                Ok(if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                })
            },
        )
}

/// Equation matrix maximizing the QCoF sum-rate.
///
/// `Exhaustive` scores every combination of per-relay candidates with
/// nonzero computation rate potential; `Lll` takes each relay's
/// LLL-shortest equation and evaluates that single matrix.
pub fn qcof_optimize(
    h: &Channel,
    snr: f64,
    backhaul: &[f64],
    method: SearchMethod,
    lll_delta: f64,
) -> Result<QcofEvaluation> {
    let relays = h.relays();
    match method {
        SearchMethod::Lll => {
            let rows = (0..relays)
                .map(|k| best_equation_lll(h.gains(k), snr, lll_delta).map_err(|e| e.at_relay(k)))
                .collect::<Result<Vec<_>>>()?;
            qcof_evaluate(h, &EquationMatrix::new(rows)?, snr, backhaul)
        }
        SearchMethod::Exhaustive => {
            let candidates = (0..relays)
                .map(|k| enumerate_equations(h.gains(k), snr).map_err(|e| e.at_relay(k)))
                .collect::<Result<Vec<_>>>()?;
            let rco = candidates
                .iter()
                .enumerate()
                .map(|(k, list)| {
                    list.iter()
                        .map(|a| computational_rate(h.gains(k), a, snr))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let sizes: Vec<usize> = candidates.iter().map(Vec::len).collect();
            let total = product_size(&sizes)?;
            let users = h.users();

            let (_, best) = deterministic_argmax(total, |idx| {
                let mut pick = vec![0; relays];
                product_digits(idx, &sizes, &mut pick);
                let rows: Vec<&[i64]> = (0..relays).map(|k| candidates[k][pick[k]].as_slice()).collect();
                let r: Vec<f64> = (0..relays).map(|k| rco[k][pick[k]]).collect();
                Ok(evaluate_core(&rows, users, snr, backhaul, &r)?.sum_rate)
            })?;

            let mut pick = vec![0; relays];
            product_digits(best, &sizes, &mut pick);
            let a = EquationMatrix::new((0..relays).map(|k| candidates[k][pick[k]].clone()).collect())?;
            qcof_evaluate(h, &a, snr, backhaul)
        }
    }
}

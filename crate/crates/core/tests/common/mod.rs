//! Reference implementations used as oracles. They work in covariance
//! space with plain Gaussian elimination and share no code with the
//! library beyond its public types.
#![allow(dead_code)]

use cranrates::Channel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_channel(rng: &mut ChaCha8Rng, relays: usize, users: usize) -> Channel {
    let rows: Vec<Vec<f64>> = (0..relays)
        .map(|_| (0..users).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    Channel::from_rows(&rows).unwrap()
}

/// Determinant by elimination with partial pivoting.
pub fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    d
}

/// Solves `m x = b` by Gauss-Jordan elimination.
pub fn solve(m: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.iter().zip(b).map(|(r, &bi)| {
        let mut r = r.clone();
        r.push(bi);
        r
    }).collect();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(p, c);
        let piv = a[c][c];
        for k in c..=n {
            a[c][k] /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                for k in c..=n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    a.iter().map(|r| r[n]).collect()
}

pub fn log2_det(m: &[Vec<f64>]) -> f64 {
    det(m).log2()
}

/// `b S bᵀ` for a row vector `b`.
fn quad(s: &[Vec<f64>], u: &[f64], v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..u.len() {
        for j in 0..v.len() {
            acc += u[i] * s[i][j] * v[j];
        }
    }
    acc
}

/// Scalar observation `z = b·x + noise`, noise variance `var`, of the
/// input vector `x ~ N(0, snr I)`.
#[derive(Clone, Debug)]
pub struct Obs {
    pub b: Vec<f64>,
    pub var: f64,
}

/// Covariance of the observations.
fn obs_cov(obs: &[Obs], snr: f64) -> Vec<Vec<f64>> {
    let n = obs.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            c[i][j] = snr * obs[i].b.iter().zip(&obs[j].b).map(|(x, y)| x * y).sum::<f64>();
        }
        c[i][i] += obs[i].var;
    }
    c
}

/// `Var(target·x + extra | obs)` where `extra` is noise of variance
/// `extra_var` independent of everything else.
pub fn conditional_variance(target: &[f64], extra_var: f64, obs: &[Obs], snr: f64) -> f64 {
    let prior = snr * target.iter().map(|x| x * x).sum::<f64>() + extra_var;
    if obs.is_empty() {
        return prior;
    }
    let c = obs_cov(obs, snr);
    let cross: Vec<f64> = obs
        .iter()
        .map(|o| snr * o.b.iter().zip(target).map(|(x, y)| x * y).sum::<f64>())
        .collect();
    let w = solve(&c, &cross);
    prior - w.iter().zip(&cross).map(|(a, b)| a * b).sum::<f64>()
}

/// `I(x_1..x_l ; obs | x_{l+1}..x_L)` for every `l`, differenced into
/// per-user successive-decoding rates.
pub fn sic_rates(obs: &[Obs], users: usize, snr: f64) -> Vec<f64> {
    let noise_logdet: f64 = obs.iter().map(|o| o.var.log2()).sum();
    let mut prev = 0.0;
    (1..=users)
        .map(|l| {
            let trimmed: Vec<Obs> = obs
                .iter()
                .map(|o| Obs {
                    b: o.b[..l].to_vec(),
                    var: o.var,
                })
                .collect();
            let mi = if obs.is_empty() {
                0.0
            } else {
                0.5 * (log2_det(&obs_cov(&trimmed, snr)) - noise_logdet)
            };
            let r = mi - prev;
            prev = mi;
            r
        })
        .collect()
}

/// Computation rate from the first form `‖a‖² − snr (h·a)² / (1 + snr‖h‖²)`.
pub fn rco_direct(h: &[f64], a: &[i64], snr: f64) -> f64 {
    let a2: f64 = a.iter().map(|&x| (x * x) as f64).sum();
    let ha: f64 = h.iter().zip(a).map(|(x, &y)| x * y as f64).sum();
    let h2: f64 = h.iter().map(|x| x * x).sum();
    let m = a2 - snr * ha * ha / (1.0 + snr * h2);
    (0.5 * (1.0 / m).log2()).max(0.0)
}

pub struct QcofOracle {
    pub sigma: Vec<f64>,
    pub rates: Vec<f64>,
    pub sum_rate: f64,
}

/// QCoF built from Wyner-Ziv conditional variances of `aₖ·x` and the
/// mutual information of the quantized equations.
pub fn qcof_oracle(h: &Channel, a: &[Vec<i64>], snr: f64, c: &[f64]) -> QcofOracle {
    let users = h.users();
    let mut obs: Vec<Obs> = Vec::new();
    let mut sigma = Vec::new();
    for (k, row) in a.iter().enumerate() {
        let af: Vec<f64> = row.iter().map(|&x| x as f64).collect();
        if c[k] == 0.0 {
            sigma.push(f64::INFINITY);
            continue;
        }
        let v = conditional_variance(&af, 0.0, &obs, snr);
        let s = v / (2f64.powf(2.0 * c[k]) - 1.0);
        sigma.push(s);
        obs.push(Obs { b: af, var: s });
    }
    let mut rates = sic_rates(&obs, users, snr);
    for (k, row) in a.iter().enumerate() {
        let r = rco_direct(h.gains(k), row, snr);
        for l in 0..users {
            if row[l] != 0 {
                rates[l] = rates[l].min(r);
            }
        }
    }
    for r in rates.iter_mut() {
        *r = r.max(0.0);
    }
    QcofOracle {
        sigma,
        sum_rate: rates.iter().sum(),
        rates,
    }
}

/// Symmetric 2x2 eigen-decomposition via the rotation angle.
pub fn eig2(m: [[f64; 2]; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let theta = 0.5 * (2.0 * m[0][1]).atan2(m[0][0] - m[1][1]);
    let (s, c) = theta.sin_cos();
    let u = [c, s];
    let w = [-s, c];
    let ray = |v: [f64; 2]| {
        v[0] * (m[0][0] * v[0] + m[0][1] * v[1]) + v[1] * (m[1][0] * v[0] + m[1][1] * v[1])
    };
    let (l0, l1) = (ray(u), ray(w));
    if l0 >= l1 {
        ([l0, l1], [u, w])
    } else {
        ([l1, l0], [w, u])
    }
}

/// Reverse water-filling by bisection on `μ` in log scale.
pub fn waterfill_bisect(lambda: [f64; 2], cap: f64) -> [f64; 2] {
    let eta_at = |mu: f64| {
        lambda.map(|l| ((1.0 / mu) * (1.0 - 1.0 / l) - 1.0).max(0.0))
    };
    let used = |eta: [f64; 2]| {
        eta.iter()
            .zip(&lambda)
            .map(|(e, l)| 0.5 * (1.0 + e * l).log2())
            .sum::<f64>()
    };
    if cap <= 0.0 || lambda.iter().all(|&l| l <= 1.0) {
        return [0.0, 0.0];
    }
    let (mut lo, mut hi) = (-300.0f64, 0.0f64);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if used(eta_at(mid.exp2())) > cap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    eta_at((0.5 * (lo + hi)).exp2())
}

pub struct JqcofOracle {
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    /// Per relay `(λ, η, used bits)` where used bits are measured as
    /// `½ log₂ det(I + K_θ Q⁻¹)` from the conditional covariance.
    pub relays: Vec<([f64; 2], [f64; 2], f64)>,
}

/// JQCoF from first principles: relay `k` sees `θₖ = h̄ₖ x + n`, `n ~
/// N(0, I₂)`, with `h̄ₖ = [aₖ/√ε ; hₖ]`, and quantizes along the eigenvectors
/// of `Cov(θₖ | earlier descriptions)` with the bisection water-filling.
pub fn jqcof_oracle(h: &Channel, a: &[Vec<i64>], snr: f64, c: &[f64], eps: f64) -> JqcofOracle {
    let users = h.users();
    let mut obs: Vec<Obs> = Vec::new();
    let mut relays = Vec::new();
    for (k, row) in a.iter().enumerate() {
        let eq: Vec<f64> = row.iter().map(|&x| x as f64 / eps.sqrt()).collect();
        let y = h.gains(k).to_vec();
        // Conditional covariance of θ given earlier descriptions.
        let bs = [eq.clone(), y.clone()];
        let mut kt = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let prior = snr * bs[i].iter().zip(&bs[j]).map(|(p, q)| p * q).sum::<f64>()
                    + if i == j { 1.0 } else { 0.0 };
                kt[i][j] = if obs.is_empty() {
                    prior
                } else {
                    let cov = obs_cov(&obs, snr);
                    let ci: Vec<f64> = obs
                        .iter()
                        .map(|o| snr * o.b.iter().zip(&bs[i]).map(|(p, q)| p * q).sum::<f64>())
                        .collect();
                    let cj: Vec<f64> = obs
                        .iter()
                        .map(|o| snr * o.b.iter().zip(&bs[j]).map(|(p, q)| p * q).sum::<f64>())
                        .collect();
                    let w = solve(&cov, &cj);
                    prior - ci.iter().zip(&w).map(|(p, q)| p * q).sum::<f64>()
                };
            }
        }
        let (lambda, u) = eig2(kt);
        let eta = waterfill_bisect(lambda, c[k]);
        // Q⁻¹ = Σ ηⱼ uⱼuⱼᵀ; bits = ½ log₂ det(I + K_θ Q⁻¹).
        let mut qi = [[0.0; 2]; 2];
        for j in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    qi[p][q] += eta[j] * u[j][p] * u[j][q];
                }
            }
        }
        let mut ikq = [[0.0; 2]; 2];
        for p in 0..2 {
            for q in 0..2 {
                ikq[p][q] = if p == q { 1.0 } else { 0.0 };
                for r in 0..2 {
                    ikq[p][q] += kt[p][r] * qi[r][q];
                }
            }
        }
        let used = 0.5 * (ikq[0][0] * ikq[1][1] - ikq[0][1] * ikq[1][0]).log2();
        relays.push((lambda, eta, used));
        for j in 0..2 {
            if eta[j] > 0.0 {
                let b: Vec<f64> = (0..users).map(|l| u[j][0] * eq[l] + u[j][1] * y[l]).collect();
                obs.push(Obs { b, var: 1.0 + 1.0 / eta[j] });
            }
        }
    }
    let mut rates = sic_rates(&obs, users, snr);
    for (k, row) in a.iter().enumerate() {
        if row.iter().all(|&x| x == 0) {
            continue;
        }
        let r = rco_direct(h.gains(k), row, snr);
        for l in 0..users {
            if row[l] != 0 {
                rates[l] = rates[l].min(r);
            }
        }
    }
    for r in rates.iter_mut() {
        *r = r.max(0.0);
    }
    JqcofOracle {
        sum_rate: rates.iter().sum(),
        rates,
        relays,
    }
}

/// Smallest `‖Fᵀa‖²` over all nonzero integer `a` with entries in
/// `[-bound, bound]`, by brute force.
pub fn brute_min_metric(h: &[f64], snr: f64, bound: i64) -> f64 {
    let l = h.len();
    let width = (2 * bound + 1) as usize;
    let total = width.pow(l as u32);
    let h2: f64 = h.iter().map(|x| x * x).sum();
    let mut best = f64::INFINITY;
    for idx in 0..total {
        let mut rem = idx;
        let a: Vec<i64> = (0..l)
            .map(|_| {
                let d = (rem % width) as i64 - bound;
                rem /= width;
                d
            })
            .collect();
        if a.iter().all(|&x| x == 0) {
            continue;
        }
        let a2: f64 = a.iter().map(|&x| (x * x) as f64).sum();
        let ha: f64 = h.iter().zip(&a).map(|(x, &y)| x * y as f64).sum();
        best = best.min(a2 - snr * ha * ha / (1.0 + snr * h2));
    }
    best
}

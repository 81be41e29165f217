//! Integer equation coefficients and the lattice machinery used to pick them.
//!
//! For relay gains `h` the quality of an integer vector `a` is the squared
//! length `‖Fᵀa‖²` of the lattice point it indexes, where
//! `F Fᵀ = (I + snr h hᵀ)⁻¹`. Short vectors mean high computation rates, so
//! the equation search is a short-vector search in that lattice: LLL for the
//! cheap approximate answer, bounded enumeration for the exact one.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cholesky_lower, dot, norm_sq, Matrix};

/// Default cap on the number of candidates an enumeration may produce.
pub const DEFAULT_CANDIDATE_CAP: u64 = 10_000_000;

/// Integer coefficient vector with its sign fixed so the first nonzero entry
/// is positive. `a` and `-a` give the same rates, so only one is kept.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoefficientVector(Vec<i64>);

impl CoefficientVector {
    pub fn new(mut entries: Vec<i64>) -> Self {
        if entries.iter().find(|&&x| x != 0).is_some_and(|&x| x < 0) {
            entries.iter_mut().for_each(|x| *x = -*x);
        }
        CoefficientVector(entries)
    }

    pub fn zero(len: usize) -> Self {
        CoefficientVector(vec![0; len])
    }

    pub fn unit(len: usize, i: usize) -> Self {
        let mut v = vec![0; len];
        v[i] = 1;
        CoefficientVector(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&x| x as f64).collect()
    }

    /// Users this equation involves.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &x)| x != 0).map(|(i, _)| i)
    }
}

impl fmt::Debug for CoefficientVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl From<Vec<i64>> for CoefficientVector {
    fn from(v: Vec<i64>) -> Self {
        CoefficientVector::new(v)
    }
}

/// `K x L` integer matrix; row `k` is the equation decoded at relay `k`.
/// Rows may repeat or be zero.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EquationMatrix {
    rows: Vec<CoefficientVector>,
}

impl EquationMatrix {
    pub fn new(rows: Vec<CoefficientVector>) -> Result<Self> {
        if let Some(first) = rows.first() {
            if rows.iter().any(|r| r.len() != first.len()) {
                return Err(Error::DimensionMismatch("ragged equation matrix".into()));
            }
        }
        Ok(EquationMatrix { rows })
    }

    pub fn from_rows<R: AsRef<[i64]>>(rows: &[R]) -> Result<Self> {
        EquationMatrix::new(
            rows.iter()
                .map(|r| CoefficientVector::new(r.as_ref().to_vec()))
                .collect(),
        )
    }

    pub fn zeros(relays: usize, users: usize) -> Self {
        EquationMatrix {
            rows: vec![CoefficientVector::zero(users); relays],
        }
    }

    pub fn relays(&self) -> usize {
        self.rows.len()
    }

    pub fn users(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    pub fn row(&self, k: usize) -> &CoefficientVector {
        &self.rows[k]
    }

    pub fn rows(&self) -> &[CoefficientVector] {
        &self.rows
    }

    pub fn rank(&self) -> usize {
        let rows: Vec<&[i64]> = self.rows.iter().map(|r| r.as_slice()).collect();
        integer_rank(&rows)
    }
}

/// Rank over the rationals, by fraction-free elimination.
pub fn integer_rank(rows: &[&[i64]]) -> usize {
    let mut m: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..m.len()).find(|&i| m[i][c] != 0) else {
            continue;
        };
        m.swap(rank, p);
        for i in rank + 1..m.len() {
            if m[i][c] == 0 {
                continue;
            }
            let (pv, f) = (m[rank][c], m[i][c]);
            let mut g = 0;
            for j in 0..cols {
                m[i][j] = m[i][j] * pv - m[rank][j] * f;
                g = gcd(g, m[i][j]);
            }
            if g > 1 {
                m[i].iter_mut().for_each(|x| *x /= g);
            }
        }
        rank += 1;
    }
    rank
}

/// Determinant of a square integer matrix (Bareiss).
pub fn integer_det(rows: &[Vec<i64>]) -> i128 {
    let n = rows.len();
    let mut m: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n {
        if m[k][k] == 0 {
            match (k + 1..n).find(|&i| m[i][k] != 0) {
                Some(p) => {
                    m.swap(k, p);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
            }
        }
        prev = m[k][k];
    }
    if n == 0 {
        1
    } else {
        sign * m[n - 1][n - 1]
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `‖Fᵀa‖² = aᵀ (I + snr h hᵀ)⁻¹ a`.
///
/// Written as `(‖a‖² + snr Σ_{i<j} (aᵢhⱼ − aⱼhᵢ)²) / (1 + snr‖h‖²)` so the
/// numerator has no cancellation even when `a` is nearly parallel to `h`.
pub fn lattice_metric_sq(h: &[f64], a: &[i64], snr: f64) -> f64 {
    debug_assert_eq!(h.len(), a.len());
    let mut a2 = 0.0;
    let mut cross = 0.0;
    for i in 0..a.len() {
        let ai = a[i] as f64;
        a2 += ai * ai;
        for j in i + 1..a.len() {
            let d = ai * h[j] - a[j] as f64 * h[i];
            cross += d * d;
        }
    }
    (a2 + snr * cross) / (1.0 + snr * norm_sq(h))
}

/// Lower-triangular `F` with `F Fᵀ = (I + snr h hᵀ)⁻¹`.
pub fn effective_basis(h: &[f64], snr: f64) -> Matrix {
    let l = h.len();
    let scale = snr / (1.0 + snr * norm_sq(h));
    let mut inv = Matrix::identity(l);
    for i in 0..l {
        for j in 0..l {
            inv[(i, j)] -= scale * h[i] * h[j];
        }
    }
    // Eigenvalues of the inverse lie in [1/(1+snr‖h‖²), 1].
    cholesky_lower(&inv).expect("(I + snr h h^T)^-1 is positive definite")
}

/// Lattice basis (rows of `vectors`) with the integer transform that maps
/// the original basis onto it: `vectors = transform · original`.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    pub vectors: Matrix,
    pub transform: Vec<Vec<i64>>,
}

impl Basis {
    pub fn new(vectors: Matrix) -> Self {
        let n = vectors.rows();
        let transform = (0..n)
            .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
            .collect();
        Basis { vectors, transform }
    }

    pub fn dim(&self) -> usize {
        self.vectors.rows()
    }

    fn sub_multiple(&mut self, target: usize, source: usize, q: i64) {
        for c in 0..self.vectors.cols() {
            let v = self.vectors[(source, c)];
            self.vectors[(target, c)] -= q as f64 * v;
        }
        for c in 0..self.transform[target].len() {
            let t = self.transform[source][c];
            self.transform[target][c] -= q * t;
        }
    }

    fn swap(&mut self, i: usize, j: usize) {
        for c in 0..self.vectors.cols() {
            let tmp = self.vectors[(i, c)];
            self.vectors[(i, c)] = self.vectors[(j, c)];
            self.vectors[(j, c)] = tmp;
        }
        self.transform.swap(i, j);
    }
}

/// Gram-Schmidt data of a basis: coefficients `mu[i][j]` and squared norms
/// of the orthogonalized rows.
#[derive(Clone, Debug)]
pub struct GramSchmidt {
    pub mu: Vec<Vec<f64>>,
    pub norms_sq: Vec<f64>,
}

pub fn gram_schmidt(b: &Matrix) -> GramSchmidt {
    let n = b.rows();
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut mu = vec![vec![0.0; n]; n];
    let mut norms_sq = vec![0.0; n];
    for i in 0..n {
        let mut v = b.row(i).to_vec();
        for j in 0..i {
            mu[i][j] = if norms_sq[j] > 0.0 {
                dot(b.row(i), &ortho[j]) / norms_sq[j]
            } else {
                0.0
            };
            for (x, o) in v.iter_mut().zip(&ortho[j]) {
                *x -= mu[i][j] * o;
            }
        }
        mu[i][i] = 1.0;
        norms_sq[i] = norm_sq(&v);
        ortho.push(v);
    }
    GramSchmidt { mu, norms_sq }
}

/// LLL reduction with Lovász parameter `delta`.
///
/// Rows are size-reduced top-down and adjacent rows swapped lowest index
/// first, so the output is a deterministic function of the input. The
/// transform is tracked in exact integers.
pub fn lll_reduce(basis: &Basis, delta: f64) -> Result<Basis> {
    if !(delta > 0.25 && delta <= 1.0) {
        return Err(Error::InvalidConfig(format!("lll delta {delta} outside (0.25, 1]")));
    }
    let mut b = basis.clone();
    let n = b.dim();
    let check = |gs: &GramSchmidt| -> Result<()> {
        match gs.norms_sq.iter().position(|&s| s.sqrt() < 1e-14) {
            Some(row) => Err(Error::SingularBasis {
                row,
                norm: gs.norms_sq[row].sqrt(),
            }),
            None => Ok(()),
        }
    };
    let mut gs = gram_schmidt(&b.vectors);
    check(&gs)?;

    let mut k = 1;
    while k < n {
        for j in (0..k).rev() {
            if gs.mu[k][j].abs() > 0.5 {
                let q = gs.mu[k][j].round() as i64;
                b.sub_multiple(k, j, q);
                gs = gram_schmidt(&b.vectors);
            }
        }
        let lovasz = (delta - gs.mu[k][k - 1].powi(2)) * gs.norms_sq[k - 1];
        if gs.norms_sq[k] >= lovasz {
            k += 1;
        } else {
            b.swap(k, k - 1);
            gs = gram_schmidt(&b.vectors);
            check(&gs)?;
            k = (k - 1).max(1);
        }
    }
    Ok(b)
}

/// Orders candidates by lattice metric, then integer norm, then
/// lexicographically.
fn metric_order(a: &(f64, CoefficientVector), b: &(f64, CoefficientVector)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then_with(|| a.1.norm_sq().cmp(&b.1.norm_sq()))
        .then_with(|| a.1.cmp(&b.1))
}

/// Equation for one relay chosen from an LLL-reduced basis of the lattice
/// spanned by `Fᵀ`: the reduced row of smallest metric, read off the integer
/// transform.
pub fn best_equation_lll(h: &[f64], snr: f64, delta: f64) -> Result<CoefficientVector> {
    let f = effective_basis(h, snr);
    // Lattice points are Fᵀa = Σ aᵢ (row i of F), so the rows of F form a basis.
    let reduced = lll_reduce(&Basis::new(f), delta)?;
    reduced
        .transform
        .iter()
        .map(|t| {
            let a = CoefficientVector::new(t.clone());
            (lattice_metric_sq(h, a.as_slice(), snr), a)
        })
        .min_by(metric_order)
        .map(|(_, a)| a)
        .ok_or_else(|| Error::DimensionMismatch("empty gain vector".into()))
}

/// Largest `‖a‖²` worth considering: beyond `1 + snr‖h‖²` the computation
/// rate is zero.
pub fn equation_bound(h: &[f64], snr: f64) -> i64 {
    let b = (1.0 + snr * norm_sq(h)).floor();
    if b >= i64::MAX as f64 {
        i64::MAX
    } else {
        b as i64
    }
}

/// All nonzero sign-canonical integer vectors with `‖a‖² ≤ 1 + snr‖h‖²`,
/// sorted by `(‖a‖², lexicographic)`.
pub fn enumerate_equations(h: &[f64], snr: f64) -> Result<Vec<CoefficientVector>> {
    enumerate_equations_capped(h, snr, DEFAULT_CANDIDATE_CAP)
}

pub fn enumerate_equations_capped(h: &[f64], snr: f64, cap: u64) -> Result<Vec<CoefficientVector>> {
    enumerate_ball(h.len(), equation_bound(h, snr), cap)
}

/// Nonzero sign-canonical integer vectors of length `dim` with squared norm
/// at most `bound`.
pub fn enumerate_ball(dim: usize, bound: i64, cap: u64) -> Result<Vec<CoefficientVector>> {
    struct Walk {
        out: Vec<CoefficientVector>,
        cur: Vec<i64>,
        cap: u64,
    }

    fn step(w: &mut Walk, pos: usize, budget: i64, leading: bool) -> Result<()> {
        if pos == w.cur.len() {
            if !leading {
                if w.out.len() as u64 >= w.cap {
                    return Err(Error::BoundTooLarge { cap: w.cap });
                }
                w.out.push(CoefficientVector(w.cur.clone()));
            }
            return Ok(());
        }
        let r = isqrt(budget);
        let lo = if leading { 0 } else { -r };
        for x in lo..=r {
            w.cur[pos] = x;
            step(w, pos + 1, budget - x * x, leading && x == 0)?;
        }
        w.cur[pos] = 0;
        Ok(())
    }

    let mut w = Walk {
        out: Vec::new(),
        cur: vec![0; dim],
        cap,
    };
    step(&mut w, 0, bound.max(0), true)?;
    w.out.sort_by(|a, b| a.norm_sq().cmp(&b.norm_sq()).then_with(|| a.cmp(b)));
    Ok(w.out)
}

fn isqrt(n: i64) -> i64 {
    if n <= 0 {
        return 0;
    }
    let mut r = (n as f64).sqrt() as i64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// The `m` successive minima of the relay lattice: candidates are taken in
/// increasing metric and kept when independent of those already chosen.
///
/// If the enumeration ball holds fewer than `m` independent vectors the
/// bound is doubled once before giving up.
pub fn successive_equations(h: &[f64], snr: f64, m: usize) -> Result<Vec<CoefficientVector>> {
    successive_equations_capped(h, snr, m, DEFAULT_CANDIDATE_CAP)
}

pub fn successive_equations_capped(
    h: &[f64],
    snr: f64,
    m: usize,
    cap: u64,
) -> Result<Vec<CoefficientVector>> {
    if m == 0 || m > h.len() {
        return Err(Error::InvalidConfig(format!(
            "{m} equations requested from a {}-user lattice",
            h.len()
        )));
    }
    let bound = equation_bound(h, snr);
    let mut found = 0;
    for b in [bound, bound.saturating_mul(2)] {
        let mut ranked: Vec<(f64, CoefficientVector)> = enumerate_ball(h.len(), b, cap)?
            .into_iter()
            .map(|a| (lattice_metric_sq(h, a.as_slice(), snr), a))
            .collect();
        ranked.sort_by(metric_order);

        let mut chosen: Vec<CoefficientVector> = Vec::with_capacity(m);
        for (_, a) in ranked {
            let mut rows: Vec<&[i64]> = chosen.iter().map(|c| c.as_slice()).collect();
            rows.push(a.as_slice());
            if integer_rank(&rows) == rows.len() {
                chosen.push(a);
                if chosen.len() == m {
                    return Ok(chosen);
                }
            }
        }
        found = chosen.len();
    }
    Err(Error::InsufficientIndependentVectors { found, wanted: m })
}

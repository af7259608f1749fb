//! Dense Fourier matrices over F_p^n and brute-force restricted isometry constants.
//!
//! The matrix is `A_{i,j} = ω^{⟨i,j⟩}` with `ω = exp(2πi/p)`. Everything here is dense
//! and meant for desk-scale sizes; there is no fast transform.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{FieldParams, FpVector};
use crate::shattering::SampleSeq;

/// Upper limit on the number of size-`k` supports `rip_epsilon` will enumerate.
pub const MAX_SUPPORTS: u128 = 1_000_000;

/// `ω^e` for `ω = exp(2πi/p)`. Exact at the real and imaginary axis points.
pub fn unit_root(p: u32, e: u32) -> Complex64 {
    let e = e % p;
    if e == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let (p, e) = (p as u64, e as u64);
    if 2 * e == p {
        return Complex64::new(-1.0, 0.0);
    }
    if 4 * e == p {
        return Complex64::new(0.0, 1.0);
    }
    if 4 * e == 3 * p {
        return Complex64::new(0.0, -1.0);
    }
    Complex64::from_polar(1.0, 2.0 * PI * e as f64 / p as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexDenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexDenseMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: entries.len(),
            });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Precondition("matrix entries must be finite".into()));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            entries[i * n + i] = Complex64::new(1.0, 0.0);
        }
        Self {
            rows: n,
            cols: n,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.entries[r * self.cols + c]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|z| z * s).collect(),
        }
    }

    /// `self · selfᴴ`.
    pub fn mul_adjoint(&self) -> ComplexDenseMatrix {
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows * self.rows];
        for a in 0..self.rows {
            for b in 0..self.rows {
                let mut acc = Complex64::new(0.0, 0.0);
                for c in 0..self.cols {
                    acc += self.get(a, c) * self.get(b, c).conj();
                }
                out[a * self.rows + b] = acc;
            }
        }
        ComplexDenseMatrix {
            rows: self.rows,
            cols: self.rows,
            entries: out,
        }
    }

    /// `M_Sᴴ M_S` for the column subset `cols`.
    pub fn column_gram(&self, cols: &[usize]) -> Result<DMatrix<Complex64>> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.cols) {
            return Err(Error::Precondition(format!("column {c} out of range")));
        }
        let k = cols.len();
        Ok(DMatrix::from_fn(k, k, |i, j| {
            (0..self.rows)
                .map(|r| self.get(r, cols[i]).conj() * self.get(r, cols[j]))
                .sum()
        }))
    }

    pub fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.entries)
    }
}

/// Rows `row_index` and columns `col_index` of the Fourier matrix.
pub fn fourier_submatrix(
    row_index: &[FpVector],
    col_index: &[FpVector],
    params: &FieldParams,
) -> Result<ComplexDenseMatrix> {
    for v in row_index.iter().chain(col_index) {
        params.check(v)?;
    }
    let p = params.p();
    let roots: Vec<Complex64> = (0..p).map(|e| unit_root(p, e)).collect();
    let mut entries = Vec::with_capacity(row_index.len() * col_index.len());
    for r in row_index {
        for c in col_index {
            entries.push(roots[params.dot(r, c) as usize]);
        }
    }
    Ok(ComplexDenseMatrix {
        rows: row_index.len(),
        cols: col_index.len(),
        entries,
    })
}

/// Matrix-vector product.
pub fn apply(matrix: &ComplexDenseMatrix, vector: &[Complex64]) -> Result<Vec<Complex64>> {
    if vector.len() != matrix.cols {
        return Err(Error::DimensionMismatch {
            expected: matrix.cols,
            found: vector.len(),
        });
    }
    Ok((0..matrix.rows)
        .map(|r| {
            matrix.entries[r * matrix.cols..(r + 1) * matrix.cols]
                .iter()
                .zip(vector)
                .map(|(a, x)| a * x)
                .sum()
        })
        .collect())
}

pub fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: DMatrix<Complex64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Brute-force restricted isometry constant of `A_{Q,·}/√q` at sparsity `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RipEstimate {
    pub k: usize,
    /// Smallest `ε` with `(1-ε)‖v‖² ≤ ‖Mv‖² ≤ (1+ε)‖v‖²` for all `k`-sparse `v`.
    pub epsilon: f64,
    /// Support attaining `epsilon`; ties go to the lexicographically first support.
    pub witness_support: Vec<FpVector>,
    /// Smallest Gram eigenvalue over all supports and where it occurs. Differs from the
    /// `epsilon` witness when the upper deviation dominates.
    pub min_eigenvalue: f64,
    pub min_eigen_support: Vec<FpVector>,
    pub max_eigenvalue: f64,
    pub supports_checked: u64,
}

/// `C(n, k)` or `None` once it passes `limit`.
pub fn binomial_capped(n: u64, k: u64, limit: u128) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > limit {
            return None;
        }
    }
    Some(acc)
}

#[derive(Debug, Clone)]
struct Extremes {
    eps: f64,
    eps_support: Vec<usize>,
    min_ev: f64,
    min_support: Vec<usize>,
    max_ev: f64,
    count: u64,
}

impl Extremes {
    fn new() -> Self {
        Self {
            eps: f64::NEG_INFINITY,
            eps_support: Vec::new(),
            min_ev: f64::INFINITY,
            min_support: Vec::new(),
            max_ev: f64::NEG_INFINITY,
            count: 0,
        }
    }

    /// Supports must arrive in lexicographic order so that strict comparisons keep the
    /// first one on ties.
    fn observe(&mut self, support: &[usize], lo: f64, hi: f64) {
        let eps = (hi - 1.0).max(1.0 - lo).max(0.0);
        if eps > self.eps {
            self.eps = eps;
            self.eps_support.clear();
            self.eps_support.extend_from_slice(support);
        }
        if lo < self.min_ev {
            self.min_ev = lo;
            self.min_support.clear();
            self.min_support.extend_from_slice(support);
        }
        self.max_ev = self.max_ev.max(hi);
        self.count += 1;
    }

    fn merge(self, other: Self) -> Self {
        fn pick(a: (f64, Vec<usize>), b: (f64, Vec<usize>), larger: bool) -> (f64, Vec<usize>) {
            let better = if larger { b.0 > a.0 } else { b.0 < a.0 };
            if better || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        }
        let (eps, eps_support) = pick((self.eps, self.eps_support), (other.eps, other.eps_support), true);
        let (min_ev, min_support) =
            pick((self.min_ev, self.min_support), (other.min_ev, other.min_support), false);
        Self {
            eps,
            eps_support,
            min_ev,
            min_support,
            max_ev: self.max_ev.max(other.max_ev),
            count: self.count + other.count,
        }
    }
}

/// Smallest and largest eigenvalue of the Hermitian matrix `entry(i, j)`, `0 ≤ i, j < k`.
/// Stack-allocated solvers for the sizes that occur as `p^d` with small `p`, and the
/// real solver when every entry is real.
fn eigen_range(k: usize, real: bool, entry: impl Fn(usize, usize) -> Complex64) -> (f64, f64) {
    macro_rules! fixed {
        ($n:literal) => {{
            if real {
                let ev = SMatrix::<f64, $n, $n>::from_fn(|i, j| entry(i, j).re).symmetric_eigenvalues();
                (ev.min(), ev.max())
            } else {
                let ev = SMatrix::<Complex64, $n, $n>::from_fn(|i, j| entry(i, j)).symmetric_eigenvalues();
                (ev.min(), ev.max())
            }
        }};
    }
    match k {
        1 => {
            let d = entry(0, 0).re;
            (d, d)
        }
        2 => {
            // [[a, z], [z̄, b]]
            let (a, b, z) = (entry(0, 0).re, entry(1, 1).re, entry(0, 1));
            let mid = 0.5 * (a + b);
            let rad = (0.25 * (a - b) * (a - b) + z.norm_sqr()).sqrt();
            (mid - rad, mid + rad)
        }
        3 => fixed!(3),
        4 => fixed!(4),
        5 => fixed!(5),
        7 => fixed!(7),
        8 => fixed!(8),
        9 => fixed!(9),
        _ if real => {
            let ev = DMatrix::from_fn(k, k, |i, j| entry(i, j).re).symmetric_eigenvalues();
            (ev.min(), ev.max())
        }
        _ => {
            let ev = DMatrix::from_fn(k, k, &entry).symmetric_eigenvalues();
            (ev.min(), ev.max())
        }
    }
}

/// Advances `comb` (strictly increasing, values < `n`) to the next combination in
/// lexicographic order, keeping `comb[..fixed]` untouched.
fn next_combination(comb: &mut [usize], n: usize, fixed: usize) -> bool {
    let k = comb.len();
    let mut i = k;
    while i > fixed {
        i -= 1;
        if comb[i] < n - (k - i) {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Computes the restricted isometry constant of `M = A_{Q,·}/√q` by enumerating all
/// `C(N, k)` supports and taking eigenvalues of each `k × k` Gram block.
pub fn rip_epsilon(q_rows: &SampleSeq, k: usize, params: &FieldParams) -> Result<RipEstimate> {
    params.ensure_same(q_rows.params())?;
    let q = q_rows.len();
    if q == 0 {
        return Err(Error::Precondition("rip_epsilon needs at least one row".into()));
    }
    let size = params.size();
    if k == 0 || k as u64 > size {
        return Err(Error::Precondition(format!("sparsity {k} outside 1..={size}")));
    }
    if binomial_capped(size, k as u64, MAX_SUPPORTS).is_none() {
        return Err(Error::TooLarge(format!(
            "C({size}, {k}) supports exceed {MAX_SUPPORTS}"
        )));
    }
    let n_cols = size as usize;
    let p = params.p();

    // (MᴴM)_{a,b} = (1/q) Σ_r ω^{⟨r, b - a⟩} depends only on b - a.
    let roots: Vec<Complex64> = (0..p).map(|e| unit_root(p, e)).collect();
    let mut hist = vec![vec![0u32; p as usize]; n_cols];
    let vectors: Vec<FpVector> = params.all_vectors().collect();
    for r in q_rows.rows() {
        for (x, h) in vectors.iter().zip(hist.iter_mut()) {
            h[params.dot(r, x) as usize] += 1;
        }
    }
    let inv_q = 1.0 / q as f64;
    let corr: Vec<Complex64> = hist
        .iter()
        .map(|h| {
            h.iter()
                .zip(&roots)
                .map(|(&c, w)| w * c as f64)
                .sum::<Complex64>()
                * inv_q
        })
        .collect();

    // diff[a * N + b] = index(v_b - v_a); only needed off the diagonal
    let diff: Vec<u32> = if k > 1 {
        let mut t = Vec::with_capacity(n_cols * n_cols);
        for a in &vectors {
            for b in &vectors {
                t.push(params.index_of(&params.sub(b, a)) as u32);
            }
        }
        t
    } else {
        Vec::new()
    };
    let real = corr.iter().all(|z| z.im == 0.0);
    let gram_extremes = |support: &[usize]| -> (f64, f64) {
        eigen_range(k, real, |i, j| {
            if i == j {
                corr[0]
            } else {
                corr[diff[support[i] * n_cols + support[j]] as usize]
            }
        })
    };

    let best = (0..=n_cols - k)
        .into_par_iter()
        .map(|first| {
            let mut comb: Vec<usize> = (first..first + k).collect();
            let mut acc = Extremes::new();
            loop {
                let (lo, hi) = gram_extremes(&comb);
                acc.observe(&comb, lo, hi);
                if !next_combination(&mut comb, n_cols, 1) {
                    break;
                }
            }
            acc
        })
        .reduce_with(Extremes::merge)
        .expect("at least one support");

    let to_vectors = |s: &[usize]| s.iter().map(|&i| vectors[i].clone()).collect::<Vec<_>>();
    Ok(RipEstimate {
        k,
        epsilon: best.eps,
        witness_support: to_vectors(&best.eps_support),
        min_eigenvalue: best.min_ev,
        min_eigen_support: to_vectors(&best.min_support),
        max_eigenvalue: best.max_ev,
        supports_checked: best.count,
    })
}

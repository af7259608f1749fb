//! Exact linear algebra over the prime field F_p.
//!
//! Residues are stored as least non-negative representatives in `u32` and every
//! operation reduces eagerly, so equal values always have equal bytes. Subspaces are
//! held by their reduced row-echelon basis, which makes `==` a canonical comparison.
//!
//! Vectors of F_p^n are ordered lexicographically with the first coordinate most
//! significant; [`FieldParams::index_of`] and [`FieldParams::vector_from_index`]
//! use the same convention, so index order and `Ord` on [`FpVector`] agree.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest ambient space `N = p^n` accepted. Rows and columns are indexed by `u64`
/// but dense work only ever happens far below this.
pub const MAX_SPACE_SIZE: u64 = 1 << 32;

/// Largest subspace that [`Subspace::enumerate`] will materialize.
pub const MAX_ENUMERATION: u64 = 1 << 24;

pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let p = p as u64;
    let mut f = 2u64;
    while f * f <= p {
        if p.is_multiple_of(f) {
            return false;
        }
        f += 1;
    }
    true
}

/// Returns `d` with `p^d == k`, or an error when `k` is not a power of `p`.
pub fn exact_log(p: u32, k: u64) -> Result<usize> {
    if k == 0 || p < 2 {
        return Err(Error::NotAPower(k, p));
    }
    let mut acc = 1u64;
    let mut d = 0usize;
    while acc < k {
        acc = acc.checked_mul(p as u64).ok_or(Error::NotAPower(k, p))?;
        d += 1;
    }
    if acc == k {
        Ok(d)
    } else {
        Err(Error::NotAPower(k, p))
    }
}

pub fn checked_pow(p: u32, e: usize) -> Option<u64> {
    let mut acc = 1u64;
    for _ in 0..e {
        acc = acc.checked_mul(p as u64)?;
    }
    Some(acc)
}

/// The field size `p` and ambient dimension `n`; the space has `N = p^n` elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldParams {
    p: u32,
    n: usize,
}

impl FieldParams {
    pub fn new(p: u32, n: usize) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if n == 0 {
            return Err(Error::InvalidDimension("n must be at least 1".into()));
        }
        match checked_pow(p, n) {
            Some(size) if size <= MAX_SPACE_SIZE => Ok(Self { p, n }),
            _ => Err(Error::TooLarge(format!(
                "{p}^{n} exceeds the index range {MAX_SPACE_SIZE}"
            ))),
        }
    }

    #[inline]
    pub fn p(&self) -> u32 {
        self.p
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// `N = p^n`.
    pub fn size(&self) -> u64 {
        (self.p as u64).pow(self.n as u32)
    }

    pub fn zero(&self) -> FpVector {
        FpVector {
            coords: vec![0; self.n],
        }
    }

    /// The `i`-th standard basis vector (0-based).
    pub fn unit(&self, i: usize) -> FpVector {
        assert!(i < self.n, "unit vector index {i} out of range");
        let mut v = self.zero();
        v.coords[i] = 1;
        v
    }

    /// Builds a vector, validating length and residue range.
    pub fn vector(&self, coords: Vec<u32>) -> Result<FpVector> {
        let v = FpVector { coords };
        self.check(&v)?;
        Ok(v)
    }

    /// Builds a vector from arbitrary integers, reducing each into `[0, p)`.
    pub fn vector_reduced(&self, coords: &[i64]) -> Result<FpVector> {
        if coords.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: coords.len(),
            });
        }
        let p = self.p as i64;
        Ok(FpVector {
            coords: coords.iter().map(|c| c.rem_euclid(p) as u32).collect(),
        })
    }

    pub fn check(&self, v: &FpVector) -> Result<()> {
        if v.coords.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: v.coords.len(),
            });
        }
        if let Some(&value) = v.coords.iter().find(|&&c| c >= self.p) {
            return Err(Error::ResidueOutOfRange { value, p: self.p });
        }
        Ok(())
    }

    pub fn vector_from_index(&self, index: u64) -> FpVector {
        debug_assert!(index < self.size());
        let mut coords = vec![0u32; self.n];
        let mut rest = index;
        for c in coords.iter_mut().rev() {
            *c = (rest % self.p as u64) as u32;
            rest /= self.p as u64;
        }
        FpVector { coords }
    }

    pub fn index_of(&self, v: &FpVector) -> u64 {
        v.coords
            .iter()
            .fold(0u64, |acc, &c| acc * self.p as u64 + c as u64)
    }

    /// All of F_p^n in index order.
    pub fn all_vectors(&self) -> impl Iterator<Item = FpVector> + '_ {
        (0..self.size()).map(move |i| self.vector_from_index(i))
    }

    /// Inner product mod p.
    #[inline]
    pub fn dot(&self, a: &FpVector, b: &FpVector) -> u32 {
        dot_mod(&a.coords, &b.coords, self.p)
    }

    pub fn add(&self, a: &FpVector, b: &FpVector) -> FpVector {
        FpVector {
            coords: a
                .coords
                .iter()
                .zip(&b.coords)
                .map(|(&x, &y)| add_mod(x, y, self.p))
                .collect(),
        }
    }

    pub fn sub(&self, a: &FpVector, b: &FpVector) -> FpVector {
        FpVector {
            coords: a
                .coords
                .iter()
                .zip(&b.coords)
                .map(|(&x, &y)| add_mod(x, self.p - y, self.p))
                .collect(),
        }
    }

    pub fn scale(&self, a: &FpVector, s: u32) -> FpVector {
        FpVector {
            coords: a.coords.iter().map(|&x| mul_mod(x, s, self.p)).collect(),
        }
    }

    pub(crate) fn ensure_same(&self, other: &FieldParams) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::AmbientMismatch(format!(
                "F_{}^{} vs F_{}^{}",
                self.p, self.n, other.p, other.n
            )))
        }
    }
}

#[inline]
pub(crate) fn add_mod(a: u32, b: u32, p: u32) -> u32 {
    ((a as u64 + b as u64) % p as u64) as u32
}

#[inline]
pub(crate) fn mul_mod(a: u32, b: u32, p: u32) -> u32 {
    ((a as u64 * b as u64) % p as u64) as u32
}

#[inline]
pub(crate) fn dot_mod(a: &[u32], b: &[u32], p: u32) -> u32 {
    let p = p as u64;
    let mut acc = 0u64;
    for (&x, &y) in a.iter().zip(b) {
        acc = (acc + x as u64 * y as u64) % p;
    }
    acc as u32
}

/// Multiplicative inverse of a nonzero residue (Fermat).
pub(crate) fn inv_mod(a: u32, p: u32) -> u32 {
    debug_assert!(!a.is_multiple_of(p));
    let p64 = p as u64;
    let mut base = a as u64 % p64;
    let mut exp = p64 - 2;
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p64;
        }
        base = base * base % p64;
        exp >>= 1;
    }
    acc as u32
}

/// An element of F_p^n. The owning [`FieldParams`] is not stored; constructors on
/// `FieldParams` validate length and residues.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FpVector {
    coords: Vec<u32>,
}

impl FpVector {
    pub fn coords(&self) -> &[u32] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    pub fn into_coords(self) -> Vec<u32> {
        self.coords
    }
}

impl fmt::Display for FpVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Dense row-major matrix over F_p.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FpMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

impl FpMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<u32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows(cols: usize, rows: &[FpVector]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r.coords());
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_vector(&self, r: usize) -> FpVector {
        FpVector {
            coords: self.row(r).to_vec(),
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    /// Keeps only the first `rows` rows.
    fn truncate(&mut self, rows: usize) {
        self.rows = rows.min(self.rows);
        self.data.truncate(self.rows * self.cols);
    }
}

/// Reduced row-echelon form over F_p and the rank. Zero rows are moved to the bottom;
/// the output has the same shape as the input.
pub fn rref(matrix: &FpMatrix, params: &FieldParams) -> Result<(FpMatrix, usize)> {
    if matrix.cols != params.n {
        return Err(Error::DimensionMismatch {
            expected: params.n,
            found: matrix.cols,
        });
    }
    let p = params.p;
    if let Some(&value) = matrix.data.iter().find(|&&x| x >= p) {
        return Err(Error::ResidueOutOfRange { value, p });
    }
    let mut m = matrix.clone();
    let mut rank = 0;
    for col in 0..m.cols {
        if rank == m.rows {
            break;
        }
        let Some(pivot) = (rank..m.rows).find(|&r| m.get(r, col) != 0) else {
            continue;
        };
        m.swap_rows(rank, pivot);
        let inv = inv_mod(m.get(rank, col), p);
        for c in col..m.cols {
            let i = rank * m.cols + c;
            m.data[i] = mul_mod(m.data[i], inv, p);
        }
        for r in 0..m.rows {
            if r == rank {
                continue;
            }
            let factor = m.get(r, col);
            if factor == 0 {
                continue;
            }
            let neg = p - factor;
            for c in col..m.cols {
                let pivot_val = m.data[rank * m.cols + c];
                let i = r * m.cols + c;
                m.data[i] = add_mod(m.data[i], mul_mod(neg, pivot_val, p), p);
            }
        }
        rank += 1;
    }
    Ok((m, rank))
}

/// A subspace of F_p^n, stored as its reduced row-echelon basis.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subspace {
    params: FieldParams,
    basis: FpMatrix,
}

impl Subspace {
    /// The span of `vectors`. The list must be nonempty; use [`Subspace::zero`] for
    /// the trivial subspace when there is nothing to span.
    pub fn from_spanning(params: &FieldParams, vectors: &[FpVector]) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::Precondition("spanning set is empty".into()));
        }
        for v in vectors {
            params.check(v)?;
        }
        let m = FpMatrix::from_rows(params.n, vectors)?;
        Ok(Self::from_matrix_unchecked(params, &m))
    }

    fn from_matrix_unchecked(params: &FieldParams, m: &FpMatrix) -> Self {
        let (mut reduced, rank) = rref(m, params).expect("validated input");
        reduced.truncate(rank);
        Self {
            params: *params,
            basis: reduced,
        }
    }

    pub fn zero(params: &FieldParams) -> Self {
        Self {
            params: *params,
            basis: FpMatrix::zeros(0, params.n),
        }
    }

    pub fn full(params: &FieldParams) -> Self {
        let rows: Vec<_> = (0..params.n).map(|i| params.unit(i)).collect();
        Self::from_spanning(params, &rows).expect("unit vectors are valid")
    }

    /// `span{e_1, ..., e_d}`.
    pub fn coordinate(params: &FieldParams, d: usize) -> Result<Self> {
        if d > params.n {
            return Err(Error::InvalidDimension(format!(
                "subspace dimension {d} exceeds n = {}",
                params.n
            )));
        }
        if d == 0 {
            return Ok(Self::zero(params));
        }
        let rows: Vec<_> = (0..d).map(|i| params.unit(i)).collect();
        Self::from_spanning(params, &rows)
    }

    /// Builds a subspace from basis rows that are claimed to already be canonical; the
    /// rows are re-reduced and rejected if they were not.
    pub fn from_canonical_rows(params: &FieldParams, rows: &[FpVector]) -> Result<Self> {
        if rows.is_empty() {
            return Ok(Self::zero(params));
        }
        let s = Self::from_spanning(params, rows)?;
        if s.dim() != rows.len() || s.basis_rows() != rows {
            return Err(Error::Precondition(
                "basis rows are not in reduced row-echelon form".into(),
            ));
        }
        Ok(s)
    }

    pub fn params(&self) -> &FieldParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.basis.rows
    }

    pub fn basis(&self) -> &FpMatrix {
        &self.basis
    }

    pub fn basis_rows(&self) -> Vec<FpVector> {
        (0..self.dim()).map(|r| self.basis.row_vector(r)).collect()
    }

    /// Number of elements, `p^dim`.
    pub fn cardinality(&self) -> Option<u64> {
        checked_pow(self.params.p, self.dim())
    }

    pub fn contains(&self, v: &FpVector) -> Result<bool> {
        self.params.check(v)?;
        let mut rows = self.basis_rows();
        rows.push(v.clone());
        let m = FpMatrix::from_rows(self.params.n, &rows)?;
        let (_, rank) = rref(&m, &self.params)?;
        Ok(rank == self.dim())
    }

    /// `V1 + V2`.
    pub fn sum(&self, other: &Subspace) -> Result<Subspace> {
        self.params.ensure_same(&other.params)?;
        let mut data = self.basis.data.clone();
        data.extend_from_slice(&other.basis.data);
        let m = FpMatrix::new(self.dim() + other.dim(), self.params.n, data)?;
        Ok(Self::from_matrix_unchecked(&self.params, &m))
    }

    /// `dim(V1 ∩ V2)`, via `dim V1 + dim V2 - dim(V1 + V2)`.
    pub fn intersection_dim(&self, other: &Subspace) -> Result<usize> {
        let sum = self.sum(other)?;
        Ok(self.dim() + other.dim() - sum.dim())
    }

    /// The element `Σ c_i b_i` for coefficient vector `c` against the canonical basis.
    pub fn element(&self, coeffs: &[u32]) -> Result<FpVector> {
        if coeffs.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: coeffs.len(),
            });
        }
        let p = self.params.p;
        let mut out = vec![0u32; self.params.n];
        for (r, &c) in coeffs.iter().enumerate() {
            if c >= p {
                return Err(Error::ResidueOutOfRange { value: c, p });
            }
            if c == 0 {
                continue;
            }
            for (o, &b) in out.iter_mut().zip(self.basis.row(r)) {
                *o = add_mod(*o, mul_mod(c, b, p), p);
            }
        }
        Ok(FpVector { coords: out })
    }

    /// All `p^d` elements, in lexicographic order of their coefficient vectors.
    pub fn enumerate(&self) -> Result<Vec<FpVector>> {
        let count = self
            .cardinality()
            .filter(|&c| c <= MAX_ENUMERATION)
            .ok_or_else(|| {
                Error::TooLarge(format!(
                    "{}^{} elements exceed the enumeration limit",
                    self.params.p,
                    self.dim()
                ))
            })?;
        let coeff_space = coefficient_space(self.params.p, self.dim());
        (0..count)
            .map(|i| self.element(&coeff_space.decode(i)))
            .collect()
    }

    /// The inner-product signature `(⟨r, b_1⟩, ..., ⟨r, b_d⟩)` against the canonical
    /// basis. Two rows have equal signatures iff their Fourier rows agree on every
    /// column indexed by an element of this subspace.
    pub fn signature(&self, r: &FpVector) -> Result<Signature> {
        self.params.check(r)?;
        Ok(Signature {
            values: (0..self.dim())
                .map(|i| dot_mod(r.coords(), self.basis.row(i), self.params.p))
                .collect(),
        })
    }

    /// Signature packed into `[0, p^d)`, first coordinate most significant. No
    /// validation; the hot path of the Monte Carlo trials.
    #[inline]
    pub fn signature_index(&self, r: &[u32]) -> u64 {
        let p = self.params.p;
        (0..self.dim()).fold(0u64, |acc, i| {
            acc * p as u64 + dot_mod(r, self.basis.row(i), p) as u64
        })
    }
}

impl fmt::Display for Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "span{{")?;
        for r in 0..self.dim() {
            if r > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", self.basis.row_vector(r))?;
        }
        write!(f, "}}")
    }
}

/// The value of the signature map on one row: a point of F_p^d.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signature {
    values: Vec<u32>,
}

impl Signature {
    pub fn new(values: Vec<u32>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn index(&self, p: u32) -> u64 {
        coefficient_space(p, self.values.len()).encode(&self.values)
    }

    pub fn from_index(p: u32, d: usize, index: u64) -> Self {
        Self {
            values: coefficient_space(p, d).decode(index),
        }
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Base-`p` digit codec for F_p^d without the `n >= 1` requirement of `FieldParams`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CoefficientSpace {
    p: u32,
    d: usize,
}

pub(crate) fn coefficient_space(p: u32, d: usize) -> CoefficientSpace {
    CoefficientSpace { p, d }
}

impl CoefficientSpace {
    pub(crate) fn decode(&self, index: u64) -> Vec<u32> {
        let mut out = vec![0u32; self.d];
        let mut rest = index;
        for c in out.iter_mut().rev() {
            *c = (rest % self.p as u64) as u32;
            rest /= self.p as u64;
        }
        out
    }

    pub(crate) fn encode(&self, values: &[u32]) -> u64 {
        values
            .iter()
            .fold(0u64, |acc, &c| acc * self.p as u64 + c as u64)
    }
}

//! Shattering tests and explicit kernel certificates.
//!
//! A row sequence `Q` shatters a subspace `V` when the signatures of its rows cover
//! all of F_p^d. When some signature `w*` is missed, the vector supported on `V`
//! with coefficient `ω^{-⟨w*, c⟩}` at the element with coefficient vector `c` is
//! annihilated by every sampled row: a row with signature `a` sends it to
//! `Σ_c ω^{⟨a - w*, c⟩}`, which vanishes for `a ≠ w*`.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{coefficient_space, FieldParams, FpVector, Signature, Subspace, MAX_ENUMERATION};
use crate::fourier::unit_root;

/// An ordered sequence of rows of the Fourier matrix, duplicates allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSeq {
    params: FieldParams,
    rows: Vec<FpVector>,
}

impl SampleSeq {
    pub fn new(params: &FieldParams, rows: Vec<FpVector>) -> Result<Self> {
        for r in &rows {
            params.check(r)?;
        }
        Ok(Self {
            params: *params,
            rows,
        })
    }

    pub fn empty(params: &FieldParams) -> Self {
        Self {
            params: *params,
            rows: Vec::new(),
        }
    }

    /// Every element of F_p^n once, in index order.
    pub fn full(params: &FieldParams) -> Self {
        Self {
            params: *params,
            rows: params.all_vectors().collect(),
        }
    }

    /// `q` rows drawn uniformly and independently, with replacement.
    pub fn random<R: Rng + ?Sized>(params: &FieldParams, q: usize, rng: &mut R) -> Self {
        let size = params.size();
        let rows = (0..q)
            .map(|_| params.vector_from_index(rng.random_range(0..size)))
            .collect();
        Self {
            params: *params,
            rows,
        }
    }

    pub fn params(&self) -> &FieldParams {
        &self.params
    }

    pub fn rows(&self) -> &[FpVector] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: FpVector) -> Result<()> {
        self.params.check(&row)?;
        self.rows.push(row);
        Ok(())
    }

    /// Splits into `s` consecutive chunks of equal length.
    pub fn split(&self, s: usize) -> Result<Vec<SampleSeq>> {
        if s == 0 || !self.rows.len().is_multiple_of(s) {
            return Err(Error::Precondition(format!(
                "cannot split {} rows into {s} equal chunks",
                self.rows.len()
            )));
        }
        let chunk = self.rows.len() / s;
        Ok((0..s)
            .map(|i| Self {
                params: self.params,
                rows: self.rows[i * chunk..(i + 1) * chunk].to_vec(),
            })
            .collect())
    }
}

/// Outcome of a shattering test. `missing` is present exactly when the subspace is
/// not shattered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShatterReport {
    pub subspace: Subspace,
    pub shattered: bool,
    pub missing: Option<Signature>,
}

fn signature_space_size(v: &Subspace) -> Result<u64> {
    v.cardinality()
        .filter(|&k| k <= MAX_ENUMERATION)
        .ok_or_else(|| Error::TooLarge(format!("p^{} signatures", v.dim())))
}

/// Tests whether the rows of `q_seq` realize every signature against `v`. When they
/// do not, reports the lexicographically smallest unattained signature.
pub fn shatters(q_seq: &SampleSeq, v: &Subspace) -> Result<ShatterReport> {
    q_seq.params.ensure_same(v.params())?;
    let k = signature_space_size(v)?;
    let mut seen = vec![false; k as usize];
    let mut remaining = k;
    for r in &q_seq.rows {
        let idx = v.signature_index(r.coords()) as usize;
        if !seen[idx] {
            seen[idx] = true;
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
    }
    let missing = seen
        .iter()
        .position(|&s| !s)
        .map(|i| Signature::from_index(v.params().p(), v.dim(), i as u64));
    Ok(ShatterReport {
        subspace: v.clone(),
        shattered: missing.is_none(),
        missing,
    })
}

/// Allocation-free shattering check over rows stored contiguously (`n` residues per
/// row). `seen` is scratch space of length at least `p^dim(v)`.
pub fn shatters_flat(rows: &[u32], n: usize, v: &Subspace, seen: &mut [bool]) -> bool {
    let k = (v.params().p() as usize).pow(v.dim() as u32);
    let seen = &mut seen[..k];
    seen.fill(false);
    let mut remaining = k;
    for r in rows.chunks_exact(n) {
        let idx = v.signature_index(r) as usize;
        if !seen[idx] {
            seen[idx] = true;
            remaining -= 1;
            if remaining == 0 {
                return true;
            }
        }
    }
    false
}

/// A `k`-sparse vector with unit-modulus entries, indexed by elements of F_p^n.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCertificate {
    pub support: Vec<FpVector>,
    pub coefficients: Vec<Complex64>,
}

impl SparseCertificate {
    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    /// The certificate as a dense length-`N` vector.
    pub fn to_dense(&self, params: &FieldParams) -> Result<Vec<Complex64>> {
        let size = params.size();
        if size > MAX_ENUMERATION {
            return Err(Error::TooLarge(format!("dense vector of length {size}")));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); size as usize];
        for (s, c) in self.support.iter().zip(&self.coefficients) {
            params.check(s)?;
            out[params.index_of(s) as usize] = *c;
        }
        Ok(out)
    }
}

/// Builds the explicit kernel vector for a non-shattered `(Q, V)` pair.
pub fn kernel_certificate(
    q_seq: &SampleSeq,
    v: &Subspace,
    report: &ShatterReport,
) -> Result<SparseCertificate> {
    q_seq.params.ensure_same(v.params())?;
    if report.subspace != *v {
        return Err(Error::Precondition(
            "report was computed for a different subspace".into(),
        ));
    }
    let missing = match (&report.missing, report.shattered) {
        (Some(m), false) => m,
        _ => {
            return Err(Error::Precondition(
                "subspace is shattered; no kernel certificate exists".into(),
            ))
        }
    };
    if missing.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim(),
            found: missing.dim(),
        });
    }
    let p = v.params().p();
    let support = v.enumerate()?;
    let coeffs = coefficient_space(p, v.dim());
    let coefficients = (0..support.len() as u64)
        .map(|i| {
            let c = coeffs.decode(i);
            let e = crate::field::dot_mod(missing.values(), &c, p);
            unit_root(p, (p - e) % p)
        })
        .collect();
    Ok(SparseCertificate {
        support,
        coefficients,
    })
}

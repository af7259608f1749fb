//! Families of equal-dimension subspaces with small pairwise intersections, built by
//! randomized greedy search and always re-verified.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldParams, FpVector, Subspace};

/// Uniformly random `d`-dimensional subspace: draw uniform vectors, keep those that
/// raise the rank, stop at rank `d`.
pub fn random_subspace<R: Rng + ?Sized>(params: &FieldParams, d: usize, rng: &mut R) -> Result<Subspace> {
    if d > params.n() {
        return Err(Error::InvalidDimension(format!("d = {d} exceeds n = {}", params.n())));
    }
    let mut current = Subspace::zero(params);
    let size = params.size();
    while current.dim() < d {
        let v = params.vector_from_index(rng.random_range(0..size));
        if v.is_zero() {
            continue;
        }
        let mut rows = current.basis_rows();
        rows.push(v);
        let next = Subspace::from_spanning(params, &rows)?;
        if next.dim() > current.dim() {
            current = next;
        }
    }
    Ok(current)
}

/// Seeded variant of [`random_subspace`].
pub fn random_subspace_seeded(params: &FieldParams, d: usize, seed: u64) -> Result<Subspace> {
    random_subspace(params, d, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubspaceFamily {
    params: FieldParams,
    dim: usize,
    max_int_dim: usize,
    members: Vec<Subspace>,
}

impl SubspaceFamily {
    /// Assembles a family from existing members. Nothing is checked here; call
    /// [`verify_family`] before relying on it.
    pub fn from_members(params: &FieldParams, dim: usize, max_int_dim: usize, members: Vec<Subspace>) -> Self {
        Self {
            params: *params,
            dim,
            max_int_dim,
            members,
        }
    }

    pub fn params(&self) -> &FieldParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_int_dim(&self) -> usize {
        self.max_int_dim
    }

    pub fn members(&self) -> &[Subspace] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn to_document(&self) -> FamilyDocument {
        FamilyDocument {
            p: self.params.p(),
            n: self.params.n(),
            d: self.dim,
            max_int_dim: self.max_int_dim,
            members: self
                .members
                .iter()
                .map(|s| s.basis_rows().into_iter().map(FpVector::into_coords).collect())
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("family serializes")
    }

    /// Parses and validates a family document. Member bases must be canonical and
    /// the family must pass [`verify_family`].
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FamilyDocument = serde_json::from_str(text).map_err(|e| Error::Family(e.to_string()))?;
        doc.into_family()
    }
}

/// Serialized form: `{p, n, d, max_int_dim, members: [[basis rows]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyDocument {
    pub p: u32,
    pub n: usize,
    pub d: usize,
    pub max_int_dim: usize,
    pub members: Vec<Vec<Vec<u32>>>,
}

impl FamilyDocument {
    pub fn into_family(self) -> Result<SubspaceFamily> {
        let params = FieldParams::new(self.p, self.n)?;
        let members = self
            .members
            .into_iter()
            .map(|rows| {
                let rows = rows
                    .into_iter()
                    .map(|r| params.vector(r))
                    .collect::<Result<Vec<_>>>()?;
                Subspace::from_canonical_rows(&params, &rows)
            })
            .collect::<Result<Vec<_>>>()?;
        let family = SubspaceFamily::from_members(&params, self.d, self.max_int_dim, members);
        if !verify_family(&family) {
            return Err(Error::Family("pairwise intersection or dimension check failed".into()));
        }
        Ok(family)
    }
}

/// Result of a greedy search; `exhausted` is set when `max_attempts` ran out first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyBuild {
    pub family: SubspaceFamily,
    pub exhausted: bool,
    pub attempts: usize,
}

pub fn default_max_attempts(target_size: usize) -> usize {
    1000 * target_size
}

fn compatible(candidate: &Subspace, accepted: &[Subspace], max_int_dim: usize) -> bool {
    let check = |m: &Subspace| {
        m != candidate
            && candidate
                .intersection_dim(m)
                .map(|d| d <= max_int_dim)
                .unwrap_or(false)
    };
    if accepted.len() >= 64 {
        accepted.par_iter().all(check)
    } else {
        accepted.iter().all(check)
    }
}

/// Greedy search: draw random `d`-dimensional candidates and accept each one whose
/// intersection with every accepted member has dimension at most `max_int_dim`.
pub fn build_family(
    params: &FieldParams,
    d: usize,
    max_int_dim: usize,
    target_size: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<FamilyBuild> {
    if target_size == 0 {
        return Err(Error::Precondition("target_size must be at least 1".into()));
    }
    if d > params.n() {
        return Err(Error::InvalidDimension(format!("d = {d} exceeds n = {}", params.n())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members: Vec<Subspace> = Vec::with_capacity(target_size);
    let mut attempts = 0;
    while members.len() < target_size && attempts < max_attempts {
        attempts += 1;
        let candidate = random_subspace(params, d, &mut rng)?;
        if compatible(&candidate, &members, max_int_dim) {
            members.push(candidate);
        }
    }
    let exhausted = members.len() < target_size;
    Ok(FamilyBuild {
        family: SubspaceFamily::from_members(params, d, max_int_dim, members),
        exhausted,
        attempts,
    })
}

/// Recomputes every pairwise intersection. True iff all members have dimension `d`,
/// are pairwise distinct, and meet pairwise in dimension at most `max_int_dim`.
pub fn verify_family(family: &SubspaceFamily) -> bool {
    let members = &family.members;
    if members
        .iter()
        .any(|m| m.dim() != family.dim || m.params() != &family.params)
    {
        return false;
    }
    (0..members.len()).into_par_iter().all(|i| {
        members[i + 1..].iter().all(|other| {
            other != &members[i]
                && members[i]
                    .intersection_dim(other)
                    .map(|m| m <= family.max_int_dim)
                    .unwrap_or(false)
        })
    })
}

/// Every `d`-dimensional subspace of F_p^n, found by extending each subspace of
/// dimension `j` by every vector of the space and de-duplicating through canonical
/// form. Desk scale only.
pub fn enumerate_subspaces(params: &FieldParams, d: usize) -> Result<Vec<Subspace>> {
    if d > params.n() {
        return Err(Error::InvalidDimension(format!("d = {d} exceeds n = {}", params.n())));
    }
    if params.size() > 1 << 12 {
        return Err(Error::TooLarge(format!("enumerating subspaces of a space of size {}", params.size())));
    }
    let vectors: Vec<FpVector> = params.all_vectors().collect();
    let mut layer: BTreeSet<Vec<FpVector>> = BTreeSet::new();
    layer.insert(Vec::new());
    for _ in 0..d {
        let mut next = BTreeSet::new();
        for basis in &layer {
            for v in &vectors {
                let mut rows = basis.clone();
                rows.push(v.clone());
                let s = Subspace::from_spanning(params, &rows)?;
                if s.dim() == basis.len() + 1 {
                    next.insert(s.basis_rows());
                }
            }
        }
        layer = next;
    }
    layer
        .into_iter()
        .map(|rows| Subspace::from_canonical_rows(params, &rows))
        .collect()
}

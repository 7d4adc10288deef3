//! Subspaces of GF(2)^k: canonical representation, lattice enumeration,
//! robustness, Möbius coefficients and structural classification.
//!
//! A [`Subspace`] is identified by the reduced row echelon form of a basis, so
//! equality and hashing are structural. Enumeration walks pivot patterns
//! directly and produces each subspace exactly once.

use std::fmt;

use num_bigint::BigInt;
use num_traits::One;

use crate::error::{Error, Result};
use crate::gf2::{reduce_against, rref_words, BitMatrix, BitVector, CoordSet, MAX_BITS};

/// Default bound on the ambient dimension for full-lattice operations.
pub const DEFAULT_K_MAX: usize = 5;

/// Largest ambient dimension the enumerator accepts even when asked to.
const HARD_K_MAX: usize = 12;

/// A subspace of GF(2)^k stored as an RREF basis with no zero rows.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Subspace {
    ambient: usize,
    basis: BitMatrix,
}

impl Subspace {
    fn from_rref_unchecked(ambient: usize, rows: Vec<u64>) -> Self {
        Self { ambient, basis: BitMatrix::from_words(ambient, rows) }
    }

    fn check_ambient(k: usize) {
        assert!((1..=MAX_BITS).contains(&k), "ambient dimension {k} outside 1..=64");
    }

    /// The span of `generators` inside GF(2)^k.
    pub fn span(k: usize, generators: &[BitVector]) -> Self {
        Self::check_ambient(k);
        let words: Vec<u64> = generators
            .iter()
            .map(|g| {
                assert_eq!(g.len(), k, "generator length mismatch");
                g.bits()
            })
            .collect();
        Self::from_rref_unchecked(k, rref_words(&words))
    }

    /// Span of packed generator words.
    pub fn span_words(k: usize, generators: &[u64]) -> Self {
        Self::check_ambient(k);
        let m = BitMatrix::from_words(k, generators.to_vec());
        Self::from_rref_unchecked(k, rref_words(m.words()))
    }

    /// `{x : B x = 0}` for a parity-check matrix `B` with `k` columns.
    pub fn kernel_of(parity_check: &BitMatrix) -> Self {
        let k = parity_check.n_cols();
        Self::span(k, &parity_check.kernel_basis())
    }

    pub fn zero(k: usize) -> Self {
        Self::check_ambient(k);
        Self::from_rref_unchecked(k, Vec::new())
    }

    pub fn full(k: usize) -> Self {
        Self::check_ambient(k);
        Self::from_rref_unchecked(k, (0..k).map(|i| 1u64 << i).collect())
    }

    /// The even-weight subspace `E^k`.
    pub fn even(k: usize) -> Self {
        Self::check_ambient(k);
        Self::kernel_of(&BitMatrix::from_words(k, vec![CoordSet::full(k).0]))
    }

    /// `{v : v_i = v_j for each pair}`; the pairs must partition `[k]`.
    pub fn pairing(k: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let blocks: Vec<Vec<usize>> = pairs.iter().map(|&(i, j)| vec![i, j]).collect();
        Self::even_product(k, &blocks)
    }

    /// `⊕ E^{|B|}` over a partition of `[k]` into coordinate blocks `B`.
    pub fn even_product(k: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        Self::check_ambient(k);
        let mut seen = 0u64;
        let mut checks = Vec::with_capacity(blocks.len());
        for block in blocks {
            if block.is_empty() {
                return Err(Error::invalid("empty coordinate block"));
            }
            let mut mask = 0u64;
            for &i in block {
                if i >= k {
                    return Err(Error::invalid(format!("coordinate {i} outside [0, {k})")));
                }
                if (seen | mask) >> i & 1 == 1 {
                    return Err(Error::invalid(format!("coordinate {i} appears twice")));
                }
                mask |= 1 << i;
            }
            seen |= mask;
            checks.push(mask);
        }
        if seen != CoordSet::full(k).0 {
            return Err(Error::invalid("blocks do not cover every coordinate"));
        }
        Ok(Self::kernel_of(&BitMatrix::from_words(k, checks)))
    }

    #[inline]
    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.basis.n_rows()
    }

    /// RREF basis.
    pub fn basis(&self) -> &BitMatrix {
        &self.basis
    }

    pub fn contains(&self, v: &BitVector) -> bool {
        assert_eq!(v.len(), self.ambient, "vector length mismatch");
        reduce_against(self.basis.words(), v.bits()) == 0
    }

    pub fn contains_bits(&self, bits: u64) -> bool {
        reduce_against(self.basis.words(), bits) == 0
    }

    /// Whether `self ≤ other`.
    pub fn is_subspace_of(&self, other: &Subspace) -> bool {
        self.ambient == other.ambient && self.basis.words().iter().all(|&r| other.contains_bits(r))
    }

    /// All `2^dim` elements, as packed words.
    pub fn elements(&self) -> Vec<u64> {
        let rows = self.basis.words();
        assert!(rows.len() < 32, "too many elements to list");
        (0u64..(1u64 << rows.len()))
            .map(|c| rows.iter().enumerate().filter(|(i, _)| (c >> i) & 1 == 1).fold(0u64, |acc, (_, &r)| acc ^ r))
            .collect()
    }

    /// `d_I(U)`: dimension of the projection onto the coordinates in `coords`.
    pub fn projected_dim(&self, coords: CoordSet) -> usize {
        assert!(coords.is_subset(&CoordSet::full(self.ambient)), "coordinates out of range");
        self.basis.projected_rank(coords)
    }

    /// Coordinates whose deletion lowers the dimension by one.
    pub fn sensitive_coords(&self) -> CoordSet {
        let full = CoordSet::full(self.ambient);
        let d = self.dim();
        CoordSet::from_indices((0..self.ambient).filter(|&i| d > 0 && self.projected_dim(full.without(i)) == d - 1))
    }

    pub fn is_robust(&self) -> bool {
        self.sensitive_coords().is_empty()
    }

    /// Orthogonal complement `U^⊥`.
    pub fn dual(&self) -> Subspace {
        Subspace::span(self.ambient, &self.basis.kernel_basis())
    }

    /// All subspaces `V ≤ self`, ordered by dimension and then by RREF words.
    pub fn sublattice(&self) -> Result<Vec<Subspace>> {
        self.sublattice_with_limit(DEFAULT_K_MAX)
    }

    /// As [`Subspace::sublattice`], with an explicit bound on `dim self`.
    pub fn sublattice_with_limit(&self, k_max: usize) -> Result<Vec<Subspace>> {
        let d = self.dim();
        if d == 0 {
            return Ok(vec![self.clone()]);
        }
        let rows = self.basis.words();
        let mut out = Vec::new();
        for j in 0..=d {
            for w in enumerate_subspaces_with_limit(d, j, k_max)? {
                let images: Vec<u64> = w
                    .basis()
                    .words()
                    .iter()
                    .map(|&coeffs| {
                        rows.iter()
                            .enumerate()
                            .filter(|(i, _)| (coeffs >> i) & 1 == 1)
                            .fold(0u64, |acc, (_, &r)| acc ^ r)
                    })
                    .collect();
                out.push(Subspace::from_rref_unchecked(self.ambient, rref_words(&images)));
            }
        }
        out.sort_by(|a, b| (a.dim(), a.basis.words()).cmp(&(b.dim(), b.basis.words())));
        Ok(out)
    }

    /// Structural type, up to coordinate permutation.
    ///
    /// A subspace is a product of even-weight spaces over a partition of the
    /// coordinates exactly when its dual is spanned by the block indicator
    /// vectors. Disjoint-support rows are already in RREF, so it suffices to
    /// check the dual basis rows for pairwise disjointness and full cover.
    pub fn classify(&self) -> SubspaceClass {
        let dual = self.dual();
        let rows = dual.basis.words();
        let mut union = 0u64;
        let mut disjoint = true;
        for &r in rows {
            if union & r != 0 {
                disjoint = false;
                break;
            }
            union |= r;
        }
        if !disjoint || union != CoordSet::full(self.ambient).0 {
            return SubspaceClass { kind: ClassKind::Other, parts: Vec::new() };
        }
        let mut parts: Vec<usize> = rows.iter().map(|r| r.count_ones() as usize).collect();
        parts.sort_unstable_by(|a, b| b.cmp(a));
        let kind = if parts.len() == 1 {
            ClassKind::EvenSpace
        } else if parts.iter().all(|&p| p == 2) {
            ClassKind::PairingProduct
        } else {
            ClassKind::EvenProduct
        };
        SubspaceClass { kind, parts }
    }
}

impl fmt::Debug for Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Subspace(k={}, basis=[", self.ambient)?;
        for (i, row) in self.basis.rows().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{row}")?;
        }
        f.write_str("])")
    }
}

impl PartialOrd for Subspace {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Subspace {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.ambient, self.dim(), self.basis.words()).cmp(&(other.ambient, other.dim(), other.basis.words()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassKind {
    /// The whole even-weight space `E^k`.
    EvenSpace,
    /// `⊕ E^2` over a perfect matching of the coordinates.
    PairingProduct,
    /// Any other product of even-weight spaces over a coordinate partition.
    EvenProduct,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubspaceClass {
    pub kind: ClassKind,
    /// Block sizes in decreasing order; empty for [`ClassKind::Other`].
    pub parts: Vec<usize>,
}

/// Möbius function of the subspace lattice of GF(2)^k on an interval of
/// length `j`: `(-1)^j 2^(j(j-1)/2)`.
pub fn mobius_coefficient(j: usize) -> BigInt {
    let magnitude = BigInt::one() << (j * j.saturating_sub(1) / 2);
    if j.is_multiple_of(2) {
        magnitude
    } else {
        -magnitude
    }
}

/// Each `d`-dimensional subspace of GF(2)^k exactly once, with `k ≤ 5`.
pub fn enumerate_subspaces(k: usize, d: usize) -> Result<SubspaceIter> {
    enumerate_subspaces_with_limit(k, d, DEFAULT_K_MAX)
}

pub fn enumerate_subspaces_with_limit(k: usize, d: usize, k_max: usize) -> Result<SubspaceIter> {
    if k == 0 || k > k_max.min(HARD_K_MAX) {
        return Err(Error::LatticeTooLarge { k, k_max: k_max.min(HARD_K_MAX) });
    }
    if d > k {
        return Err(Error::invalid(format!("dimension {d} exceeds ambient dimension {k}")));
    }
    Ok(SubspaceIter::new(k, d))
}

/// The whole lattice of GF(2)^k, ordered by dimension then RREF.
pub fn all_subspaces(k: usize) -> Result<Vec<Subspace>> {
    all_subspaces_with_limit(k, DEFAULT_K_MAX)
}

pub fn all_subspaces_with_limit(k: usize, k_max: usize) -> Result<Vec<Subspace>> {
    let mut out = Vec::new();
    for d in 0..=k {
        out.extend(enumerate_subspaces_with_limit(k, d, k_max)?);
    }
    Ok(out)
}

/// Streams RREF matrices pivot pattern by pivot pattern.
///
/// For a pivot set `p_0 < ... < p_{d-1}`, row `r` has its leading one at
/// `p_r` and free entries at every non-pivot column after `p_r`. A counter
/// over those free entries enumerates all RREFs with that pattern.
#[derive(Debug, Clone)]
pub struct SubspaceIter {
    k: usize,
    pivots: Vec<usize>,
    free: Vec<(usize, usize)>,
    counter: u64,
    done: bool,
}

impl SubspaceIter {
    fn new(k: usize, d: usize) -> Self {
        let pivots: Vec<usize> = (0..d).collect();
        let free = free_positions(k, &pivots);
        Self { k, pivots, free, counter: 0, done: false }
    }

    fn advance_pattern(&mut self) -> bool {
        // Next d-combination of 0..k in lexicographic order.
        let d = self.pivots.len();
        let k = self.k;
        let Some(i) = (0..d).rev().find(|&i| self.pivots[i] < k - d + i) else {
            return false;
        };
        self.pivots[i] += 1;
        for j in i + 1..d {
            self.pivots[j] = self.pivots[j - 1] + 1;
        }
        self.free = free_positions(k, &self.pivots);
        self.counter = 0;
        true
    }
}

fn free_positions(k: usize, pivots: &[usize]) -> Vec<(usize, usize)> {
    let pivot_mask = pivots.iter().fold(0u64, |acc, &p| acc | (1 << p));
    pivots
        .iter()
        .enumerate()
        .flat_map(|(r, &p)| (p + 1..k).filter(move |&c| (pivot_mask >> c) & 1 == 0).map(move |c| (r, c)))
        .collect()
}

impl Iterator for SubspaceIter {
    type Item = Subspace;

    fn next(&mut self) -> Option<Subspace> {
        if self.done {
            return None;
        }
        if self.counter >> self.free.len() != 0 && !self.advance_pattern() {
            self.done = true;
            return None;
        }
        let mut rows: Vec<u64> = self.pivots.iter().map(|&p| 1u64 << p).collect();
        for (bit, &(r, c)) in self.free.iter().enumerate() {
            if (self.counter >> bit) & 1 == 1 {
                rows[r] |= 1 << c;
            }
        }
        self.counter += 1;
        Some(Subspace::from_rref_unchecked(self.k, rows))
    }
}

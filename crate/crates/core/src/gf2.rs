//! Dense GF(2) vectors and matrices packed into machine words.
//!
//! Every vector has at most [`MAX_BITS`] coordinates and is stored in a single
//! `u64`; coordinate `i` is bit `i`. Matrices are row-major lists of such
//! words. Elimination pivots on the lowest set coordinate, so the reduced row
//! echelon form of a matrix is deterministic and can be used as a canonical
//! key for its row space.

use std::fmt;

/// Hard upper bound on the number of coordinates of a [`BitVector`].
pub const MAX_BITS: usize = 64;

#[inline]
fn low_mask(len: usize) -> u64 {
    debug_assert!(len <= MAX_BITS);
    if len == MAX_BITS {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

/// A vector in GF(2)^k, `k <= 64`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVector {
    bits: u64,
    len: u8,
}

impl BitVector {
    /// Zero vector of length `len`.
    ///
    /// # Panics
    /// Panics if `len > 64`.
    pub fn zeros(len: usize) -> Self {
        assert!(len <= MAX_BITS, "BitVector length {len} exceeds {MAX_BITS}");
        Self { bits: 0, len: len as u8 }
    }

    /// Builds a vector from packed bits; bits above `len` must be clear.
    ///
    /// # Panics
    /// Panics if `len > 64` or if `bits` has a set bit at or above `len`.
    pub fn from_bits(bits: u64, len: usize) -> Self {
        assert!(len <= MAX_BITS, "BitVector length {len} exceeds {MAX_BITS}");
        assert_eq!(bits & !low_mask(len), 0, "bits set beyond length {len}");
        Self { bits, len: len as u8 }
    }

    /// Unit vector `e_i`.
    pub fn unit(len: usize, i: usize) -> Self {
        assert!(i < len, "coordinate {i} out of range for length {len}");
        Self::from_bits(1 << i, len)
    }

    pub fn from_slice(coords: &[bool]) -> Self {
        let bits = coords.iter().enumerate().fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i));
        Self::from_bits(bits, coords.len())
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len(), "coordinate {i} out of range");
        (self.bits >> i) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len(), "coordinate {i} out of range");
        if value {
            self.bits |= 1 << i;
        } else {
            self.bits &= !(1 << i);
        }
    }

    /// Hamming weight.
    #[inline]
    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    /// Sum over GF(2).
    #[inline]
    pub fn xor(&self, other: &Self) -> Self {
        assert_eq!(self.len, other.len, "length mismatch");
        Self { bits: self.bits ^ other.bits, len: self.len }
    }

    /// Inner product over GF(2).
    #[inline]
    pub fn dot(&self, other: &Self) -> bool {
        assert_eq!(self.len, other.len, "length mismatch");
        (self.bits & other.bits).count_ones() & 1 == 1
    }

    /// Restriction to the coordinates in `coords`, keeping positions.
    #[inline]
    pub fn masked(&self, coords: CoordSet) -> Self {
        Self { bits: self.bits & coords.0, len: self.len }
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector(")?;
        fmt::Display::fmt(self, f)?;
        write!(f, ")")
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// A set of coordinates in `[0, 64)`, stored as a bit mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct CoordSet(pub u64);

impl CoordSet {
    pub const EMPTY: CoordSet = CoordSet(0);

    /// `{0, 1, ..., k-1}`.
    pub fn full(k: usize) -> Self {
        CoordSet(low_mask(k))
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        CoordSet(indices.into_iter().fold(0, |acc, i| {
            assert!(i < MAX_BITS, "coordinate {i} out of range");
            acc | (1 << i)
        }))
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < MAX_BITS && (self.0 >> i) & 1 == 1
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn is_subset(&self, other: &CoordSet) -> bool {
        self.0 & !other.0 == 0
    }

    #[inline]
    pub fn without(&self, i: usize) -> Self {
        CoordSet(self.0 & !(1 << i))
    }

    #[inline]
    pub fn union(&self, other: &CoordSet) -> Self {
        CoordSet(self.0 | other.0)
    }

    /// Coordinates in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }

    /// All subsets of `{0, .., k-1}`, in mask order.
    pub fn all_subsets(k: usize) -> impl Iterator<Item = CoordSet> {
        assert!(k < MAX_BITS, "subset enumeration needs k < 64");
        (0u64..(1u64 << k)).map(CoordSet)
    }
}

impl fmt::Debug for CoordSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A dense `rows x cols` matrix over GF(2), `cols <= 64`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    cols: usize,
    rows: Vec<u64>,
}

impl BitMatrix {
    /// Empty (zero-row) matrix with `cols` columns.
    pub fn empty(cols: usize) -> Self {
        assert!(cols <= MAX_BITS, "column count {cols} exceeds {MAX_BITS}");
        Self { cols, rows: Vec::new() }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(cols <= MAX_BITS, "column count {cols} exceeds {MAX_BITS}");
        Self { cols, rows: vec![0; rows] }
    }

    pub fn identity(k: usize) -> Self {
        Self::from_words(k, (0..k).map(|i| 1u64 << i).collect())
    }

    /// Builds a matrix from packed row words.
    ///
    /// # Panics
    /// Panics if `cols > 64` or any row has a bit set at or above `cols`.
    pub fn from_words(cols: usize, rows: Vec<u64>) -> Self {
        assert!(cols <= MAX_BITS, "column count {cols} exceeds {MAX_BITS}");
        let mask = low_mask(cols);
        assert!(rows.iter().all(|r| r & !mask == 0), "row has bits beyond column {cols}");
        Self { cols, rows }
    }

    /// Builds a matrix from rows of 0/1 entries; all rows must share a length.
    pub fn from_rows(rows: &[&[u8]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let words = rows
            .iter()
            .map(|r| {
                assert_eq!(r.len(), cols, "ragged matrix");
                r.iter().enumerate().fold(0u64, |acc, (j, &b)| {
                    assert!(b <= 1, "entries must be 0 or 1");
                    acc | ((b as u64) << j)
                })
            })
            .collect();
        Self::from_words(cols, words)
    }

    pub fn from_vectors(cols: usize, vectors: &[BitVector]) -> Self {
        assert!(vectors.iter().all(|v| v.len() == cols), "vector length mismatch");
        Self::from_words(cols, vectors.iter().map(|v| v.bits()).collect())
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> BitVector {
        BitVector::from_bits(self.rows[i], self.cols)
    }

    pub fn rows(&self) -> impl Iterator<Item = BitVector> + '_ {
        self.rows.iter().map(|&w| BitVector::from_bits(w, self.cols))
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        assert!(j < self.cols, "column {j} out of range");
        (self.rows[i] >> j) & 1 == 1
    }

    pub fn push_row(&mut self, row: BitVector) {
        assert_eq!(row.len(), self.cols, "row length mismatch");
        self.rows.push(row.bits());
    }

    /// `M x` over GF(2), one output bit per row.
    pub fn mul_vec(&self, x: &BitVector) -> BitVector {
        assert_eq!(x.len(), self.cols, "vector length mismatch");
        assert!(self.rows.len() <= MAX_BITS, "too many rows for a BitVector result");
        let bits = self
            .rows
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &r)| acc | ((((r & x.bits()).count_ones() & 1) as u64) << i));
        BitVector::from_bits(bits, self.rows.len())
    }

    pub fn transpose(&self) -> BitMatrix {
        assert!(self.rows.len() <= MAX_BITS, "too many rows to transpose");
        let mut out = vec![0u64; self.cols];
        for (i, &r) in self.rows.iter().enumerate() {
            for (j, slot) in out.iter_mut().enumerate() {
                *slot |= ((r >> j) & 1) << i;
            }
        }
        BitMatrix::from_words(self.rows.len(), out)
    }

    /// Row rank over GF(2).
    pub fn rank(&self) -> usize {
        rank_of_words(&self.rows)
    }

    /// Reduced row echelon form with zero rows removed.
    ///
    /// Pivots are the lowest set coordinate of each row; rows are ordered by
    /// increasing pivot and every pivot column has a single 1.
    pub fn rref(&self) -> BitMatrix {
        BitMatrix { cols: self.cols, rows: rref_words(&self.rows) }
    }

    /// A basis of `{x : M x = 0}`, of size `cols - rank`.
    pub fn kernel_basis(&self) -> Vec<BitVector> {
        let reduced = rref_words(&self.rows);
        let pivots: Vec<usize> = reduced.iter().map(|r| r.trailing_zeros() as usize).collect();
        let pivot_mask = pivots.iter().fold(0u64, |acc, &p| acc | (1 << p));
        (0..self.cols)
            .filter(|&j| (pivot_mask >> j) & 1 == 0)
            .map(|free| {
                // Set the free variable, then solve each pivot variable from its row.
                let bits = reduced.iter().zip(&pivots).fold(1u64 << free, |acc, (&row, &p)| {
                    if (row >> free) & 1 == 1 {
                        acc | (1 << p)
                    } else {
                        acc
                    }
                });
                BitVector::from_bits(bits, self.cols)
            })
            .collect()
    }

    /// Rank of the matrix after zeroing every column outside `coords`.
    pub fn projected_rank(&self, coords: CoordSet) -> usize {
        let masked: Vec<u64> = self.rows.iter().map(|r| r & coords.0).collect();
        rank_of_words(&masked)
    }

    /// Whether `v` lies in the row space.
    pub fn row_space_contains(&self, v: &BitVector) -> bool {
        assert_eq!(v.len(), self.cols, "vector length mismatch");
        let reduced = rref_words(&self.rows);
        reduce_against(&reduced, v.bits()) == 0
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

/// Reduces `x` by an RREF basis; the result is zero iff `x` is in the span.
pub(crate) fn reduce_against(rref_rows: &[u64], mut x: u64) -> u64 {
    for &r in rref_rows {
        let p = r.trailing_zeros();
        if (x >> p) & 1 == 1 {
            x ^= r;
        }
    }
    x
}

pub(crate) fn rank_of_words(rows: &[u64]) -> usize {
    // Basis indexed by pivot bit; insertion-style elimination.
    let mut basis = [0u64; MAX_BITS];
    let mut rank = 0;
    for &row in rows {
        let mut x = row;
        while x != 0 {
            let p = x.trailing_zeros() as usize;
            if basis[p] == 0 {
                basis[p] = x;
                rank += 1;
                break;
            }
            x ^= basis[p];
        }
    }
    rank
}

pub(crate) fn rref_words(rows: &[u64]) -> Vec<u64> {
    let mut basis = [0u64; MAX_BITS];
    for &row in rows {
        let mut x = row;
        while x != 0 {
            let p = x.trailing_zeros() as usize;
            if basis[p] == 0 {
                basis[p] = x;
                break;
            }
            x ^= basis[p];
        }
    }
    // Back-substitute so that each pivot column holds a single 1.
    for p in (0..MAX_BITS).rev() {
        let pivot_row = basis[p];
        if pivot_row == 0 {
            continue;
        }
        for row in basis.iter_mut().take(p) {
            if *row != 0 && (*row >> p) & 1 == 1 {
                *row ^= pivot_row;
            }
        }
    }
    basis.into_iter().filter(|&r| r != 0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rank_examples() {
        assert_eq!(BitMatrix::identity(3).rank(), 3);
        assert_eq!(BitMatrix::zeros(2, 5).rank(), 0);
        assert_eq!(BitMatrix::from_rows(&[&[1, 1], &[1, 1]]).rank(), 1);
    }

    #[test]
    fn rref_examples() {
        let m = BitMatrix::from_rows(&[&[1, 1], &[0, 1]]);
        assert_eq!(m.rref(), BitMatrix::from_rows(&[&[1, 0], &[0, 1]]));
        let m = BitMatrix::from_rows(&[&[1, 1, 0], &[1, 1, 0]]);
        assert_eq!(m.rref(), BitMatrix::from_rows(&[&[1, 1, 0]]));
    }

    #[test]
    fn kernel_examples() {
        assert!(BitMatrix::identity(3).kernel_basis().is_empty());
        let k = BitMatrix::from_rows(&[&[1, 1]]).kernel_basis();
        assert_eq!(k, vec![BitVector::from_slice(&[true, true])]);
    }

    #[test]
    fn zero_column_matrix() {
        let m = BitMatrix::empty(0);
        assert_eq!(m.rank(), 0);
        assert!(m.kernel_basis().is_empty());
        assert_eq!(m.rref().n_rows(), 0);
    }

    #[test]
    fn full_width_rows() {
        let m = BitMatrix::from_words(64, vec![u64::MAX, 1 << 63]);
        assert_eq!(m.rank(), 2);
        assert_eq!(m.kernel_basis().len(), 62);
    }

    #[test]
    fn transpose_and_mul() {
        let m = BitMatrix::from_rows(&[&[1, 0, 1], &[0, 1, 1]]);
        let t = m.transpose();
        assert_eq!(t, BitMatrix::from_rows(&[&[1, 0], &[0, 1], &[1, 1]]));
        let x = BitVector::from_slice(&[true, true, true]);
        assert_eq!(m.mul_vec(&x), BitVector::from_slice(&[false, false]));
    }

    #[test]
    fn coordset_iteration() {
        let s = CoordSet::from_indices([4, 0, 2]);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 2, 4]);
        assert_eq!(s.len(), 3);
        assert!(s.without(2).is_subset(&s));
        assert_eq!(CoordSet::all_subsets(3).count(), 8);
    }

    fn span_members(words: &[u64], k: usize) -> Vec<bool> {
        let basis = rref_words(words);
        (0..(1u64 << k)).map(|x| reduce_against(&basis, x) == 0).collect()
    }

    fn brute_span(words: &[u64], k: usize) -> Vec<bool> {
        let mut seen = vec![false; 1 << k];
        for combo in 0..(1u64 << words.len()) {
            let v = words.iter().enumerate().filter(|(i, _)| (combo >> i) & 1 == 1).fold(0u64, |acc, (_, &w)| acc ^ w);
            seen[v as usize] = true;
        }
        seen
    }

    fn arb_matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = BitMatrix> {
        (1..=max_cols).prop_flat_map(move |cols| {
            prop::collection::vec(0..(1u64 << cols), 0..=max_rows)
                .prop_map(move |rows| BitMatrix::from_words(cols, rows))
        })
    }

    proptest! {
        #[test]
        fn rank_nullity(m in arb_matrix(12, 20)) {
            prop_assert_eq!(m.rank() + m.kernel_basis().len(), m.n_cols());
        }

        #[test]
        fn kernel_vectors_annihilated(m in arb_matrix(10, 16)) {
            for v in m.kernel_basis() {
                prop_assert!(m.mul_vec(&v).is_zero());
            }
            let basis = BitMatrix::from_vectors(m.n_cols(), &m.kernel_basis());
            prop_assert_eq!(basis.rank(), basis.n_rows());
        }

        #[test]
        fn rref_idempotent_and_rank_preserving(m in arb_matrix(10, 16)) {
            let r = m.rref();
            prop_assert_eq!(r.rref(), r.clone());
            prop_assert_eq!(r.n_rows(), m.rank());
        }

        #[test]
        fn rref_preserves_row_space(m in arb_matrix(6, 4)) {
            let k = m.n_cols();
            prop_assert_eq!(span_members(m.words(), k), brute_span(m.words(), k));
        }

        #[test]
        fn rref_is_canonical(m in arb_matrix(6, 10), seed in any::<u64>()) {
            // Another generating set of the same space: add random row combinations.
            let mut rows = m.words().to_vec();
            let mut s = seed;
            for i in 0..rows.len() {
                for j in 0..rows.len() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    if i != j && (s >> 33) & 1 == 1 {
                        rows[i] ^= rows[j];
                    }
                }
            }
            // Elementary row additions are invertible, so the row space is unchanged.
            let other = BitMatrix::from_words(m.n_cols(), rows);
            prop_assert_eq!(other.rref(), m.rref());
        }
    }
}

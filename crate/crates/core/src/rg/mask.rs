//! Symmetric boolean matrix tracking which pairs may still interact through
//! the near field.
//!
//! Entries only ever flip 1 → 0 over an RG flow, the diagonal is identically
//! zero, and row/column symmetry is maintained on every update. Rows are
//! packed 64 bits per word so the pair-renormalization update (an AND of two
//! rows) runs word-wise.

/// Packed symmetric N×N boolean matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    n: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    /// All pairs allowed (`L_ij = 1` for i ≠ j, diagonal 0).
    pub fn all_ones(n: usize) -> Self {
        let words_per_row = n.div_ceil(64);
        let mut bits = vec![!0u64; n * words_per_row];
        // clear the tail beyond column n-1
        let tail_bits = n % 64;
        if tail_bits != 0 {
            let tail_mask = (1u64 << tail_bits) - 1;
            for row in 0..n {
                bits[row * words_per_row + words_per_row - 1] &= tail_mask;
            }
        }
        let mut m = BitMatrix { n, words_per_row, bits };
        for i in 0..n {
            m.clear(i, i);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        let word = self.bits[i * self.words_per_row + j / 64];
        (word >> (j % 64)) & 1 == 1
    }

    #[inline]
    fn clear(&mut self, i: usize, j: usize) {
        self.bits[i * self.words_per_row + j / 64] &= !(1u64 << (j % 64));
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    /// Number of allowed entries (counts (i,j) and (j,i) separately).
    pub fn count_allowed(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Pair-renormalization update: `L_ik ← L_ik·L_jk` and `L_jk ← L_ik·L_jk`
    /// for every k, with the symmetric entries kept consistent. Forces
    /// `L_ij = 0` because the diagonal is zero.
    pub fn renormalize_pair(&mut self, i: usize, j: usize) {
        assert_ne!(i, j);
        let w = self.words_per_row;
        let (ri, rj) = (i * w, j * w);
        // new row = AND of the two old rows; remember which bits dropped
        let mut changed_i = vec![0u64; w];
        let mut changed_j = vec![0u64; w];
        for k in 0..w {
            let a = self.bits[ri + k];
            let b = self.bits[rj + k];
            let new = a & b;
            changed_i[k] = a & !new;
            changed_j[k] = b & !new;
            self.bits[ri + k] = new;
            self.bits[rj + k] = new;
        }
        // mirror the cleared bits into the affected columns
        for (word_idx, mut word) in changed_i.into_iter().enumerate() {
            while word != 0 {
                let bit = word.trailing_zeros() as usize;
                word &= word - 1;
                self.clear(word_idx * 64 + bit, i);
            }
        }
        for (word_idx, mut word) in changed_j.into_iter().enumerate() {
            while word != 0 {
                let bit = word.trailing_zeros() as usize;
                word &= word - 1;
                self.clear(word_idx * 64 + bit, j);
            }
        }
    }

    /// All masked off-diagonal pairs `(i, j)` with `i < j`.
    pub fn masked_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if !self.get(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn assert_symmetric(&self) {
        for i in 0..self.n {
            assert!(!self.get(i, i), "diagonal bit set at {i}");
            for j in 0..self.n {
                assert_eq!(self.get(i, j), self.get(j, i), "asymmetry at ({i},{j})");
            }
        }
    }
}

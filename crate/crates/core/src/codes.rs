//! Bit-packed `{-1,+1}` code matrices.
//!
//! A [`CodeMatrix`] has `m` rows (bits) and `n` columns (frames). Each column
//! is stored as `ceil(m / 64)` little-endian words where a set bit means `+1`.

use crate::error::{Result, SomError};
use crate::linalg::DenseMatrix;
use std::collections::HashSet;

/// `sign` with the tie rule `sign(0) = +1`.
#[inline]
pub fn sign(v: f64) -> i8 {
    if v >= 0.0 || v.is_nan() {
        1
    } else {
        -1
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CodeMatrix {
    bits: usize,
    cols: usize,
    words_per_col: usize,
    words: Vec<u64>,
}

impl std::fmt::Debug for CodeMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "CodeMatrix {}x{} [", self.bits, self.cols)?;
        for i in 0..self.bits {
            let row: String = (0..self.cols)
                .map(|j| if self.get(i, j) > 0 { '+' } else { '-' })
                .collect();
            writeln!(f, "  {row}")?;
        }
        write!(f, "]")
    }
}

impl CodeMatrix {
    /// All entries `-1`.
    pub fn new(bits: usize, cols: usize) -> Self {
        let words_per_col = bits.div_ceil(64);
        Self {
            bits,
            cols,
            words_per_col,
            words: vec![0; words_per_col * cols],
        }
    }

    /// All entries `+1`.
    pub fn ones(bits: usize, cols: usize) -> Self {
        let mut out = Self::new(bits, cols);
        for j in 0..cols {
            for i in 0..bits {
                out.set(i, j, 1);
            }
        }
        out
    }

    /// Elementwise sign of a real matrix.
    pub fn from_sign(a: &DenseMatrix) -> Self {
        let mut out = Self::new(a.rows(), a.cols());
        for i in 0..a.rows() {
            for (j, &v) in a.row(i).iter().enumerate() {
                if sign(v) > 0 {
                    out.set_bit(i, j);
                }
            }
        }
        out
    }

    /// Builds from `{-1,+1}` rows; any other value is rejected.
    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let bits = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        let mut out = Self::new(bits, cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(SomError::ShapeMismatch("ragged code rows".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    1 => out.set_bit(i, j),
                    -1 => {}
                    _ => {
                        return Err(SomError::ShapeMismatch(format!(
                            "code entry {v} is not in {{-1,+1}}"
                        )))
                    }
                }
            }
        }
        Ok(out)
    }

    /// Builds from `{-1,+1}` columns.
    pub fn from_columns(columns: &[Vec<i8>]) -> Result<Self> {
        let bits = columns.first().map_or(0, Vec::len);
        let mut out = Self::new(bits, columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != bits {
                return Err(SomError::ShapeMismatch("ragged code columns".into()));
            }
            for (i, &v) in col.iter().enumerate() {
                match v {
                    1 => out.set_bit(i, j),
                    -1 => {}
                    _ => {
                        return Err(SomError::ShapeMismatch(format!(
                            "code entry {v} is not in {{-1,+1}}"
                        )))
                    }
                }
            }
        }
        Ok(out)
    }

    #[inline]
    pub fn bits(&self) -> usize {
        self.bits
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i8 {
        debug_assert!(i < self.bits && j < self.cols);
        let w = self.words[j * self.words_per_col + i / 64];
        if (w >> (i % 64)) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    #[inline]
    fn set_bit(&mut self, i: usize, j: usize) {
        self.words[j * self.words_per_col + i / 64] |= 1u64 << (i % 64);
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: i8) {
        let idx = j * self.words_per_col + i / 64;
        let mask = 1u64 << (i % 64);
        if v > 0 {
            self.words[idx] |= mask;
        } else {
            self.words[idx] &= !mask;
        }
    }

    /// Packed words of column `j`.
    #[inline]
    pub fn column_words(&self, j: usize) -> &[u64] {
        &self.words[j * self.words_per_col..(j + 1) * self.words_per_col]
    }

    pub fn column(&self, j: usize) -> Vec<i8> {
        (0..self.bits).map(|i| self.get(i, j)).collect()
    }

    pub fn row(&self, i: usize) -> Vec<i8> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    /// Column bytes, LSB-first: bit `k` lives in byte `k / 8` at position `k % 8`.
    pub fn column_bytes(&self, j: usize) -> Vec<u8> {
        let nbytes = self.bits.div_ceil(8);
        let words = self.column_words(j);
        (0..nbytes)
            .map(|b| (words[b / 8] >> ((b % 8) * 8)) as u8)
            .collect()
    }

    /// Sets column `j` from LSB-first bytes.
    pub fn set_column_bytes(&mut self, j: usize, bytes: &[u8]) -> Result<()> {
        if bytes.len() != self.bits.div_ceil(8) {
            return Err(SomError::LengthMismatch(bytes.len() * 8, self.bits));
        }
        let pad_bits = bytes.len() * 8 - self.bits;
        if pad_bits > 0 && bytes[bytes.len() - 1] >> (8 - pad_bits) != 0 {
            return Err(SomError::ShapeMismatch("padding bits must be zero".into()));
        }
        let wpc = self.words_per_col;
        let col = &mut self.words[j * wpc..(j + 1) * wpc];
        col.iter_mut().for_each(|w| *w = 0);
        for (b, &byte) in bytes.iter().enumerate() {
            col[b / 8] |= (byte as u64) << ((b % 8) * 8);
        }
        Ok(())
    }

    /// Appends the columns of `other`.
    pub fn hstack(parts: &[&CodeMatrix]) -> Result<Self> {
        let bits = parts.first().map_or(0, |p| p.bits);
        if parts.iter().any(|p| p.bits != bits) {
            return Err(SomError::ShapeMismatch("code lengths differ".into()));
        }
        let mut out = Self::new(bits, 0);
        for p in parts {
            out.words.extend_from_slice(&p.words);
            out.cols += p.cols;
        }
        Ok(out)
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut out = Self::new(self.bits, cols.len());
        for (dst, &src) in cols.iter().enumerate() {
            let wpc = self.words_per_col;
            out.words[dst * wpc..(dst + 1) * wpc].copy_from_slice(self.column_words(src));
        }
        out
    }

    /// Writes `other`'s columns into the given column positions.
    pub fn scatter_columns(&mut self, cols: &[usize], other: &CodeMatrix) {
        let wpc = self.words_per_col;
        for (src, &dst) in cols.iter().enumerate() {
            self.words[dst * wpc..(dst + 1) * wpc].copy_from_slice(other.column_words(src));
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.bits, self.cols, |i, j| self.get(i, j) as f64)
    }

    /// Hamming distance between column `j` and column `k` of `other`.
    #[inline]
    pub fn column_distance(&self, j: usize, other: &CodeMatrix, k: usize) -> u32 {
        hamming_words(self.column_words(j), other.column_words(k))
    }

    /// Fraction of entries that differ from `other`.
    pub fn flip_fraction(&self, other: &CodeMatrix) -> f64 {
        let total = self.bits * self.cols;
        if total == 0 {
            return 0.0;
        }
        let flips: u64 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as u64)
            .sum();
        flips as f64 / total as f64
    }

    /// Number of distinct columns.
    pub fn unique_count(&self) -> usize {
        (0..self.cols)
            .map(|j| self.column_words(j))
            .collect::<HashSet<_>>()
            .len()
    }

    pub fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let v = self.get(i, j);
            self.set(i, j, -v);
        }
    }
}

#[inline]
pub fn hamming_words(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Hamming distance between two `{-1,+1}` code vectors.
pub fn hamming(a: &[i8], b: &[i8]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(SomError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

/// Distinct-column count divided by the column count.
pub fn compression_ratio(codes: &CodeMatrix) -> f64 {
    if codes.cols() == 0 {
        return 0.0;
    }
    codes.unique_count() as f64 / codes.cols() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_tie_is_positive() {
        assert_eq!(sign(0.0), 1);
        assert_eq!(sign(-0.0), 1);
        assert_eq!(sign(-1e-300), -1);
    }

    #[test]
    fn hamming_cases() {
        let a = vec![1i8, 1, -1];
        assert_eq!(hamming(&a, &a).unwrap(), 0);
        let neg: Vec<i8> = a.iter().map(|v| -v).collect();
        assert_eq!(hamming(&a, &neg).unwrap(), 3);
        assert_eq!(hamming(&a, &[1, -1, -1]).unwrap(), 1);
        assert_eq!(hamming(&a, &[1]), Err(SomError::LengthMismatch(3, 1)));
    }

    #[test]
    fn compression_cases() {
        let c1 = vec![1i8, -1];
        let c2 = vec![1i8, 1];
        let c3 = vec![-1i8, -1];
        let codes = CodeMatrix::from_columns(&[
            c1.clone(),
            c1.clone(),
            c2,
            c3.clone(),
            c3.clone(),
            c3,
        ])
        .unwrap();
        assert_eq!(compression_ratio(&codes), 0.5);
        let same = CodeMatrix::from_columns(&vec![c1; 4]).unwrap();
        assert_eq!(compression_ratio(&same), 0.25);
    }

    #[test]
    fn byte_packing_is_lsb_first() {
        let mut col = vec![-1i8; 10];
        col[0] = 1;
        col[9] = 1;
        let codes = CodeMatrix::from_columns(&[col]).unwrap();
        assert_eq!(codes.column_bytes(0), vec![0b0000_0001, 0b0000_0010]);
        let mut back = CodeMatrix::new(10, 1);
        back.set_column_bytes(0, &codes.column_bytes(0)).unwrap();
        assert_eq!(back, codes);
        assert!(back.set_column_bytes(0, &[0, 0b1000_0000]).is_err());
    }

    #[test]
    fn long_codes_cross_word_boundary() {
        let col: Vec<i8> = (0..130).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect();
        let codes = CodeMatrix::from_columns(&[col.clone(), col.iter().map(|v| -v).collect()]).unwrap();
        assert_eq!(codes.column(0), col);
        assert_eq!(codes.column_distance(0, &codes, 1), 130);
        assert_eq!(codes.flip_fraction(&codes), 0.0);
    }
}

//! Symmetric positive-definite banded Cholesky factorization.
//!
//! Row `r` stores the lower band `A[r, r - bw ..= r]` contiguously, so each
//! inner product in the factorization runs over two contiguous slices.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct BandedMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn slot(&self, row: usize, col: usize) -> usize {
        debug_assert!(col <= row && row - col <= self.bw);
        row * (self.bw + 1) + self.bw - (row - col)
    }

    /// Adds to the symmetric entry (row, col); only the lower triangle is stored.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let (r, c) = if row >= col { (row, col) } else { (col, row) };
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    /// Replaces row/column `k` by the identity row.
    pub fn constrain(&mut self, k: usize) {
        for c in k.saturating_sub(self.bw)..k {
            let s = self.slot(k, c);
            self.data[s] = 0.0;
        }
        for r in k + 1..(k + self.bw + 1).min(self.n) {
            let s = self.slot(r, k);
            self.data[s] = 0.0;
        }
        let s = self.slot(k, k);
        self.data[s] = 1.0;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for r in 0..self.n {
            let c0 = r.saturating_sub(self.bw);
            for c in c0..=r {
                let a = self.data[self.slot(r, c)];
                if a != 0.0 {
                    y[r] += a * x[c];
                    if c != r {
                        y[c] += a * x[r];
                    }
                }
            }
        }
        y
    }

    /// In-place `A = L L^T`.
    pub fn factor(mut self) -> Result<CholeskyFactor> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for j in 0..n {
            let j0 = j.saturating_sub(bw);
            let row_j = j * w;
            let d = {
                let lj = &self.data[row_j + bw - (j - j0)..row_j + bw];
                self.data[row_j + bw] - lj.iter().map(|x| x * x).sum::<f64>()
            };
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::SingularSystem { row: j, pivot: d });
            }
            let djj = d.sqrt();
            self.data[row_j + bw] = djj;
            for i in j + 1..(j + w).min(n) {
                let row_i = i * w;
                let k0 = i.saturating_sub(bw).max(j0);
                let len = j - k0;
                let s = {
                    let li = &self.data[row_i + bw - (i - k0)..row_i + bw - (i - k0) + len];
                    let lj = &self.data[row_j + bw - (j - k0)..row_j + bw - (j - k0) + len];
                    li.iter().zip(lj).map(|(a, b)| a * b).sum::<f64>()
                };
                let slot = row_i + bw - (i - j);
                self.data[slot] = (self.data[slot] - s) / djj;
            }
        }
        Ok(CholeskyFactor { l: self })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CholeskyFactor {
    l: BandedMatrix,
}

impl CholeskyFactor {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let BandedMatrix { n, bw, ref data } = self.l;
        let w = bw + 1;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let k0 = i.saturating_sub(bw);
            let row = &data[i * w + bw - (i - k0)..i * w + bw];
            let s: f64 = row.iter().zip(&y[k0..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - s) / data[i * w + bw];
        }
        for i in (0..n).rev() {
            y[i] /= data[i * w + bw];
            let yi = y[i];
            let k0 = i.saturating_sub(bw);
            for k in k0..i {
                y[k] -= data[i * w + bw - (i - k)] * yi;
            }
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_random_spd_band() {
        let n = 40;
        let bw = 5;
        let mut a = BandedMatrix::zeros(n, bw);
        let mut seed = 7u64;
        let mut next = || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((seed >> 33) as f64) / (1u64 << 31) as f64 - 0.5
        };
        for r in 0..n {
            for c in r.saturating_sub(bw)..r {
                a.add(r, c, next());
            }
            a.add(r, r, 2.0 * bw as f64 + 1.0);
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.mul_vec(&x);
        let sol = a.clone().factor().unwrap().solve(&b);
        for (p, q) in sol.iter().zip(&x) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let mut a = BandedMatrix::zeros(3, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, -1.0);
        a.add(2, 2, 1.0);
        assert!(matches!(
            a.factor(),
            Err(Error::SingularSystem { row: 1, .. })
        ));
    }
}

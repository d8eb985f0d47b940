//! Square banded matrices with an in-place LU factorization.
//!
//! No pivoting: the strip Jacobians are diagonally dominant M-matrices for
//! nonincreasing `f`, and a Levenberg shift restores dominance otherwise.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, row: usize, col: usize) -> usize {
        debug_assert!(col + self.kl >= row && col <= row + self.ku, "({row},{col}) outside band");
        row * self.width + (col + self.kl - row)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if col + self.kl < row || col > row + self.ku {
            return 0.0;
        }
        self.data[self.slot(row, col)]
    }

    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let s = self.slot(row, col);
        self.data[s] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                let lo = r.saturating_sub(self.kl);
                let hi = (r + self.ku).min(self.n - 1);
                (lo..=hi).map(|c| self.data[self.slot(r, c)] * x[c]).sum()
            })
            .collect()
    }

    /// Doolittle LU in place: unit-lower multipliers below the diagonal.
    pub fn factorize(mut self) -> Result<BandedLu> {
        let n = self.n;
        for k in 0..n {
            let pivot = self.data[self.slot(k, k)];
            if !(pivot.abs() > f64::MIN_POSITIVE) || !pivot.is_finite() {
                return Err(Error::SingularJacobian { row: k });
            }
            let rmax = (k + self.kl).min(n - 1);
            let cmax = (k + self.ku).min(n - 1);
            for r in k + 1..=rmax {
                let s = self.slot(r, k);
                let l = self.data[s] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[s] = l;
                let len = cmax - k;
                if len == 0 {
                    continue;
                }
                // Rows are contiguous in the band storage and do not overlap.
                let ks = self.slot(k, k + 1);
                let rs = self.slot(r, k + 1);
                let (head, tail) = self.data.split_at_mut(rs);
                let pivot_row = &head[ks..ks + len];
                for (t, u) in tail[..len].iter_mut().zip(pivot_row) {
                    *t -= l * u;
                }
            }
        }
        Ok(BandedLu { m: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    m: Banded,
}

impl BandedLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = &self.m;
        let n = m.n;
        let mut x = b.to_vec();
        for r in 0..n {
            let lo = r.saturating_sub(m.kl);
            let mut s = x[r];
            for c in lo..r {
                s -= m.data[m.slot(r, c)] * x[c];
            }
            x[r] = s;
        }
        for r in (0..n).rev() {
            let hi = (r + m.ku).min(n - 1);
            let mut s = x[r];
            for c in r + 1..=hi {
                s -= m.data[m.slot(r, c)] * x[c];
            }
            x[r] = s / m.data[m.slot(r, r)];
        }
        x
    }
}

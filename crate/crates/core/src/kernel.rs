//! Row-stochastic transition matrices.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const ROW_SUM_TOL: f64 = 1e-9;

/// Square row-stochastic matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Kernel {
    n: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::shape("kernel has no rows"));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::shape(format!("kernel row {i} has {} entries, expected {n}", row.len())));
            }
            data.extend(row);
        }
        Self::from_flat(n, data)
    }

    pub fn from_flat(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::shape(format!("kernel data has {} entries, expected {}", data.len(), n * n)));
        }
        let k = Kernel { n, data };
        for s in 0..n {
            let row = k.row(s);
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::shape(format!("kernel row {s} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::shape(format!("kernel row {s} sums to {sum}")));
            }
        }
        Ok(k)
    }

    /// `s -> (s + advance) mod n` with probability one.
    pub fn cyclic_shift(n: usize, advance: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for s in 0..n {
            data[s * n + (s + advance) % n] = 1.0;
        }
        Kernel { n, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::cyclic_shift(n, 0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.n..(s + 1) * self.n]
    }

    #[inline]
    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.data[s * self.n + t]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn matmul(&self, other: &Kernel) -> Kernel {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Kernel { n, data }
    }

    /// Draw the next state from row `s`.
    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let row = self.row(s);
        for (t, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return t;
            }
        }
        // rounding left u above the accumulated mass: take the last reachable state
        row.iter().rposition(|&p| p > 0.0).unwrap_or(s)
    }

    pub fn max_abs_diff(&self, other: &Kernel) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<Vec<f64>>> for Kernel {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Kernel::from_rows(rows)
    }
}

impl From<Kernel> for Vec<Vec<f64>> {
    fn from(k: Kernel) -> Self {
        k.data.chunks(k.n).map(<[f64]>::to_vec).collect()
    }
}

//! Dense skew-symmetric matrices and their signed Pfaffians.
//!
//! The Pfaffian is computed by Parlett-Reid elimination: each step pivots the
//! largest entry of the current row into the super-diagonal by a symmetric
//! swap, then removes two rows and columns with a rank-2 Schur complement.
//! Only the upper triangle is touched.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Pivots below this fraction of the largest initial entry count as zero.
pub const ZERO_PIVOT: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix {
    n: usize,
    // row-major, strictly upper triangle meaningful
    data: Vec<f64>,
}

impl SkewMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        if n % 2 == 1 {
            return Err(Error::OddDimension(n));
        }
        Ok(SkewMatrix { n, data: vec![0.0; n * n] })
    }

    /// Checks `a[i][j] == -a[j][i]` exactly and a zero diagonal.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidStructure(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if row[i] != 0.0 {
                return Err(Error::NotSkew(i, i));
            }
            for j in i + 1..n {
                if row[j] != -rows[j][i] {
                    return Err(Error::NotSkew(i, j));
                }
                m.data[i * n + j] = row[j];
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.data[i * self.n + j],
            std::cmp::Ordering::Greater => -self.data[j * self.n + i],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    /// Sets `a[i][j] = v` and `a[j][i] = -v`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert_ne!(i, j, "the diagonal of a skew matrix is zero");
        if i < j {
            self.data[i * self.n + j] = v;
        } else {
            self.data[j * self.n + i] = -v;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// `P A P^T` with `(P A P^T)[i][j] = A[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n);
        let mut out = SkewMatrix { n: self.n, data: vec![0.0; self.n * self.n] };
        for i in 0..self.n {
            for j in i + 1..self.n {
                out.data[i * self.n + j] = self.get(perm[i], perm[j]);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Nonzero upper-triangle entries as `(i, j, value)`.
    pub fn nonzeros(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                let v = self.data[i * self.n + j];
                if v != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    /// Debug format: `n` on the first line, then row `i`'s entries `j > i`.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for i in 0..self.n {
            let row: Vec<String> = (i + 1..self.n).map(|j| format!("{:e}", self.data[i * self.n + j])).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::Format("empty matrix text".into()))?
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("bad dimension: {e}")))?;
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            let line = lines.next().unwrap_or("");
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Format(format!("row {i}: {e}"))))
                .collect::<Result<_>>()?;
            if values.len() != n - i - 1 {
                return Err(Error::Format(format!("row {i} has {} entries, expected {}", values.len(), n - i - 1)));
            }
            for (k, v) in values.into_iter().enumerate() {
                m.data[i * n + i + 1 + k] = v;
            }
        }
        Ok(m)
    }

    /// Swaps index `p` and `q` (`k <= p < q`) in the trailing block from `k` on.
    fn swap(&mut self, k: usize, p: usize, q: usize) {
        let n = self.n;
        for x in k..n {
            if x == p || x == q {
                continue;
            }
            let (a, b) = (self.get(x, p), self.get(x, q));
            self.set(x, p, b);
            self.set(x, q, a);
        }
        self.data[p * n + q] = -self.data[p * n + q];
    }
}

/// A real number stored as sign and log magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    /// -1, 0 or 1.
    pub sign: f64,
    /// `ln |x|`; negative infinity when `sign == 0`.
    pub log_abs: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog { sign: 0.0, log_abs: f64::NEG_INFINITY };

    pub fn from_value(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            SignedLog { sign: x.signum(), log_abs: x.abs().ln() }
        }
    }

    pub fn value(&self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.log_abs.exp()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0.0
    }
}

/// Runs the elimination; `None` when a zero pivot column is met.
fn eliminate(a: &SkewMatrix) -> Option<(f64, Vec<f64>)> {
    let n = a.n;
    let mut m = a.clone();
    let threshold = ZERO_PIVOT * a.max_abs();
    let mut sign = 1.0;
    let mut pivots = Vec::with_capacity(n / 2);
    let mut tau = vec![0.0; n];
    let mut x1 = vec![0.0; n];
    for k in (0..n).step_by(2) {
        let row = &m.data[k * n..(k + 1) * n];
        let (mut kp, mut best) = (k + 1, row[k + 1].abs());
        for (j, v) in row.iter().enumerate().skip(k + 2) {
            if v.abs() > best {
                best = v.abs();
                kp = j;
            }
        }
        if best <= threshold || best == 0.0 {
            return None;
        }
        if kp != k + 1 {
            m.swap(k, k + 1, kp);
            sign = -sign;
        }
        let pivot = m.data[k * n + k + 1];
        pivots.push(pivot);
        if k + 2 >= n {
            break;
        }
        for j in k + 2..n {
            tau[j] = m.data[k * n + j] / pivot;
            x1[j] = m.data[(k + 1) * n + j];
        }
        // S_ij = C_ij - tau_i x1_j + x1_i tau_j
        for i in k + 2..n {
            let (ti, xi) = (tau[i], x1[i]);
            if ti == 0.0 && xi == 0.0 {
                continue;
            }
            let row = &mut m.data[i * n + i + 1..(i + 1) * n];
            for ((r, &t), &x) in row.iter_mut().zip(&tau[i + 1..n]).zip(&x1[i + 1..n]) {
                *r += xi * t - ti * x;
            }
        }
    }
    Some((sign, pivots))
}

/// The signed Pfaffian. An empty matrix has Pfaffian 1.
pub fn pfaffian(a: &SkewMatrix) -> f64 {
    match eliminate(a) {
        Some((sign, pivots)) => sign * pivots.iter().product::<f64>(),
        None => 0.0,
    }
}

/// The signed Pfaffian as sign and log magnitude, free of overflow.
pub fn pfaffian_signed_log(a: &SkewMatrix) -> SignedLog {
    match eliminate(a) {
        Some((mut sign, pivots)) => {
            let mut log_abs = 0.0;
            for p in pivots {
                sign *= p.signum();
                log_abs += p.abs().ln();
            }
            SignedLog { sign, log_abs }
        }
        None => SignedLog::ZERO,
    }
}

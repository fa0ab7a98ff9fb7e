//! Nonnegative integer matrices: powers, irreducibility, period and the
//! Perron–Frobenius eigenpair.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square integer matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Matrix {
    pub n: usize,
    pub data: Vec<i64>,
}

impl Matrix {
    pub fn zero(n: usize) -> Self {
        Matrix { n, data: vec![0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zero(n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Matrix {
            n,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        self.data.chunks(self.n.max(1)).map(|r| r.to_vec()).take(self.n).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: i64) {
        self.data[i * self.n + j] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Matrix::zero(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn checked_mul(&self, other: &Matrix) -> Result<Matrix> {
        let n = self.n;
        let mut out = Matrix::zero(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..n {
                    let p = a
                        .checked_mul(other.get(k, j))
                        .and_then(|p| p.checked_add(out.get(i, j)))
                        .ok_or_else(|| Error::budget("integer overflow in matrix product"))?;
                    out.set(i, j, p);
                }
            }
        }
        Ok(out)
    }

    pub fn checked_pow(&self, k: u32) -> Result<Matrix> {
        let mut acc = Matrix::identity(self.n);
        for _ in 0..k {
            acc = acc.checked_mul(self)?;
        }
        Ok(acc)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&x| x >= 0)
    }

    pub fn is_permutation(&self) -> bool {
        let n = self.n;
        if !self.data.iter().all(|&x| x == 0 || x == 1) {
            return false;
        }
        (0..n).all(|i| (0..n).map(|j| self.get(i, j)).sum::<i64>() == 1)
            && (0..n).all(|j| (0..n).map(|i| self.get(i, j)).sum::<i64>() == 1)
    }

    fn successors(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|i| (0..self.n).filter(|&j| self.get(i, j) != 0).collect())
            .collect()
    }

    fn reach(&self, adj: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
        let mut level = vec![None; self.n];
        level[start] = Some(0);
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if level[v].is_none() {
                    level[v] = Some(level[u].unwrap() + 1);
                    queue.push_back(v);
                }
            }
        }
        level
    }

    /// Strong connectivity of the support digraph. The 1×1 zero matrix is
    /// not irreducible.
    pub fn is_irreducible(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        if self.n == 1 {
            return self.get(0, 0) != 0;
        }
        let fwd = self.successors();
        let bwd = self.transpose().successors();
        self.reach(&fwd, 0).iter().all(|l| l.is_some()) && self.reach(&bwd, 0).iter().all(|l| l.is_some())
    }

    /// Cyclic period of an irreducible matrix: gcd of level differences
    /// across all support edges of a breadth-first search.
    pub fn period(&self) -> Option<usize> {
        if !self.is_irreducible() {
            return None;
        }
        let adj = self.successors();
        let level = self.reach(&adj, 0);
        let mut g = 0usize;
        for u in 0..self.n {
            for &v in &adj[u] {
                let d = (level[u].unwrap() as i64 + 1 - level[v].unwrap() as i64).unsigned_abs() as usize;
                g = gcd(g, d);
            }
        }
        Some(g)
    }

    pub fn is_primitive(&self) -> bool {
        self.period() == Some(1)
    }

    /// Perron–Frobenius eigenvalue and normalized eigenvector of an
    /// irreducible matrix, with Collatz–Wielandt bounds.
    pub fn perron(&self, tol: f64) -> Option<Perron> {
        if !self.is_irreducible() {
            return None;
        }
        let n = self.n;
        // M + I is primitive with eigenvalue λ + 1 and the same eigenvector.
        let mut x = vec![1.0 / n as f64; n];
        let mut lo = 0.0;
        let mut hi = f64::INFINITY;
        for _ in 0..100_000 {
            let mut y = vec![0.0; n];
            for i in 0..n {
                let mut s = x[i];
                for j in 0..n {
                    s += self.get(i, j) as f64 * x[j];
                }
                y[i] = s;
            }
            lo = f64::INFINITY;
            hi = 0.0;
            for i in 0..n {
                let r = y[i] / x[i];
                lo = f64::min(lo, r);
                hi = f64::max(hi, r);
            }
            let total: f64 = y.iter().sum();
            x = y.iter().map(|v| v / total).collect();
            if hi - lo < tol {
                break;
            }
        }
        Some(Perron {
            lambda: (lo + hi) / 2.0 - 1.0,
            lower: lo - 1.0,
            upper: hi - 1.0,
            vector: x,
        })
    }

    pub fn to_big(&self) -> Vec<Vec<BigInt>> {
        self.rows()
            .into_iter()
            .map(|r| r.into_iter().map(BigInt::from).collect())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perron {
    pub lambda: f64,
    pub lower: f64,
    pub upper: f64,
    /// Right eigenvector with entries summing to one.
    pub vector: Vec<f64>,
}

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: usize, b: usize) -> usize {
    if a == 0 || b == 0 {
        a.max(b)
    } else {
        a / gcd(a, b) * b
    }
}

pub fn big_mul(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let n = a.len();
    let mut out = vec![vec![BigInt::zero(); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..n {
                out[i][j] += &a[i][k] * &b[k][j];
            }
        }
    }
    out
}

pub fn big_identity(n: usize) -> Vec<Vec<BigInt>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect()
}

/// Exact determinant by fraction-free elimination.
pub fn big_det(m: &[Vec<BigInt>]) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut a: Vec<Vec<BigInt>> = m.to_vec();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&r| !a[r][k].is_zero()) else {
                return BigInt::zero();
            };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = v / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * a[n - 1][n - 1].clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fib() -> Matrix {
        Matrix::from_rows(&[vec![0, 1], vec![1, 1]])
    }

    #[test]
    fn golden_ratio() {
        let p = fib().perron(1e-12).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((p.lambda - phi).abs() < 1e-9);
        assert!(p.lower <= phi + 1e-12 && phi <= p.upper + 1e-12);
        assert!(p.upper - p.lower < 1e-9);
        assert!((p.vector[0] - 1.0 / (phi * phi)).abs() < 1e-9);
    }

    #[test]
    fn swap_has_period_two() {
        let m = Matrix::from_rows(&[vec![0, 1], vec![1, 0]]);
        assert!(m.is_irreducible());
        assert_eq!(m.period(), Some(2));
        assert!(m.is_permutation());
        assert!((m.perron(1e-12).unwrap().lambda - 1.0).abs() < 1e-9);
    }

    #[test]
    fn one_by_one() {
        let m = Matrix::from_rows(&[vec![2]]);
        assert!((m.perron(1e-12).unwrap().lambda - 2.0).abs() < 1e-12);
        assert!(!Matrix::zero(1).is_irreducible());
    }

    #[test]
    fn fifth_power() {
        assert_eq!(fib().checked_pow(5).unwrap(), Matrix::from_rows(&[vec![3, 5], vec![5, 8]]));
    }

    #[test]
    fn period_against_wielandt() {
        let cases = [
            Matrix::from_rows(&[vec![0, 2], vec![2, 0]]),
            fib(),
            Matrix::from_rows(&[vec![0, 1, 0], vec![0, 0, 1], vec![1, 1, 0]]),
            Matrix::from_rows(&[vec![0, 1, 0], vec![0, 0, 1], vec![1, 0, 0]]),
        ];
        for m in cases {
            let n = m.n as u32;
            let bool_m = Matrix {
                n: m.n,
                data: m.data.iter().map(|&x| i64::from(x != 0)).collect(),
            };
            let mut p = bool_m.checked_pow((n - 1) * (n - 1) + 1).unwrap();
            p.data.iter_mut().for_each(|x| *x = i64::from(*x != 0));
            let positive = p.data.iter().all(|&x| x > 0);
            assert_eq!(positive, m.period() == Some(1));
        }
    }

    #[test]
    fn determinants() {
        assert_eq!(big_det(&fib().to_big()), BigInt::from(-1));
        assert_eq!(big_det(&Matrix::identity(3).to_big()), BigInt::from(1));
        let m = Matrix::from_rows(&[vec![2, 1, 0], vec![1, 3, 1], vec![0, 1, 4]]);
        assert_eq!(big_det(&m.to_big()), BigInt::from(18));
    }
}

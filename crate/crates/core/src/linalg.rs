//! Exact linear algebra over the rationals, and linear solves whose
//! coefficients are symbolic expressions.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::kernel::expr::DenMap;
use crate::kernel::{Expr, Monomial, Poly, Rational};

/// Dense rational matrix, row major.
#[derive(Clone, Debug, PartialEq)]
pub struct QMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl QMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        QMatrix {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix");
        QMatrix {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: Rational) {
        self.data[i * self.cols + j] = x;
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Reduced row echelon form in place; returns the pivot columns.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..self.cols {
            if row == self.rows {
                break;
            }
            let Some(p) = (row..self.rows).find(|&i| !self.get(i, col).is_zero()) else {
                continue;
            };
            self.swap_rows(row, p);
            let inv = Rational::one() / self.get(row, col).clone();
            for j in col..self.cols {
                let x = self.get(row, j) * &inv;
                self.set(row, j, x);
            }
            for i in 0..self.rows {
                if i == row || self.get(i, col).is_zero() {
                    continue;
                }
                let factor = self.get(i, col).clone();
                for j in col..self.cols {
                    let x = self.get(i, j) - &factor * self.get(row, j);
                    self.set(i, j, x);
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.clone().rref().len()
    }

    /// Basis of `{x : M x = 0}`.
    pub fn nullspace(&self) -> Vec<Vec<Rational>> {
        let mut m = self.clone();
        let pivots = m.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut x = vec![Rational::zero(); self.cols];
                x[f] = Rational::one();
                for (r, &p) in pivots.iter().enumerate() {
                    x[p] = -m.get(r, f).clone();
                }
                x
            })
            .collect()
    }

    /// One solution of `M x = b`, or `None` if the system is inconsistent.
    pub fn solve(&self, b: &[Rational]) -> Option<Vec<Rational>> {
        assert_eq!(b.len(), self.rows);
        let mut aug = QMatrix::zeros(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                aug.set(i, j, self.get(i, j).clone());
            }
            aug.set(i, self.cols, b[i].clone());
        }
        let pivots = aug.rref();
        if pivots.last() == Some(&self.cols) {
            return None;
        }
        let mut x = vec![Rational::zero(); self.cols];
        for (r, &p) in pivots.iter().enumerate() {
            x[p] = aug.get(r, self.cols).clone();
        }
        Some(x)
    }

    pub fn mul_vec(&self, x: &[Rational]) -> Vec<Rational> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * &x[j]).sum())
            .collect()
    }
}

/// Solution set of a symbolic linear system.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSolution {
    pub particular: Vec<Rational>,
    pub kernel: Vec<Vec<Rational>>,
}

/// Solves `Σ_k c_k · coeffs[e][k] = rhs[e]` identically in all symbols, for
/// rational unknowns `c_k`. Each equation is cleared of denominators and
/// split by monomial; atoms are treated as independent symbols, so the
/// returned solutions are always valid, though related atoms can hide some.
pub fn solve_symbolic(
    coeffs: &[Vec<Expr>],
    rhs: &[Expr],
    unknowns: usize,
) -> Option<LinearSolution> {
    assert_eq!(coeffs.len(), rhs.len());
    let mut rows: Vec<Vec<Rational>> = Vec::new();
    let mut b: Vec<Rational> = Vec::new();
    for (eq, target) in coeffs.iter().zip(rhs) {
        assert_eq!(eq.len(), unknowns);
        let mut lcm = DenMap::new();
        for e in eq.iter().chain(std::iter::once(target)) {
            for (f, k) in e.den_factors() {
                let slot = lcm.entry(f.clone()).or_insert(0);
                *slot = (*slot).max(*k);
            }
        }
        let cleared = |e: &Expr| -> Poly {
            let mut p = e.numer().clone();
            for (f, k) in &lcm {
                let have = e.den_factors().get(f).copied().unwrap_or(0);
                if *k > have {
                    p = p.mul(&f.pow(k - have));
                }
            }
            p
        };
        let mut table: BTreeMap<Monomial, (Vec<Rational>, Rational)> = BTreeMap::new();
        for (k, e) in eq.iter().enumerate() {
            if e.is_zero() {
                continue;
            }
            for (m, c) in cleared(e).into_terms() {
                let entry = table
                    .entry(m)
                    .or_insert_with(|| (vec![Rational::zero(); unknowns], Rational::zero()));
                entry.0[k] += c;
            }
        }
        if !target.is_zero() {
            for (m, c) in cleared(target).into_terms() {
                let entry = table
                    .entry(m)
                    .or_insert_with(|| (vec![Rational::zero(); unknowns], Rational::zero()));
                entry.1 += c;
            }
        }
        for (_, (row, rhs)) in table {
            rows.push(row);
            b.push(rhs);
        }
    }
    if rows.is_empty() {
        return Some(LinearSolution {
            particular: vec![Rational::zero(); unknowns],
            kernel: identity(unknowns),
        });
    }
    let m = QMatrix::from_rows(rows);
    let particular = m.solve(&b)?;
    Some(LinearSolution {
        particular,
        kernel: m.nullspace(),
    })
}

fn identity(n: usize) -> Vec<Vec<Rational>> {
    (0..n)
        .map(|i| {
            let mut v = vec![Rational::zero(); n];
            v[i] = Rational::one();
            v
        })
        .collect()
}

/// `Σ_k c_k · items[k]`.
pub fn combine(c: &[Rational], items: &[Expr]) -> Expr {
    c.iter()
        .zip(items)
        .filter(|(k, _)| !k.is_zero())
        .map(|(k, e)| e.scale(k))
        .sum()
}

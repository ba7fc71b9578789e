use crate::kernel::Rational;
use crate::linalg::QMatrix;
use num_traits::{One, Zero};

/// Constant symmetric invertible matrix `η^{αβ}` of the operator `η ∂_x`,
/// together with its inverse `η_{αβ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    eta: Vec<Vec<Rational>>,
    eta_inv: Vec<Vec<Rational>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("metric must be a nonempty square matrix")]
    NotSquare,
    #[error("metric is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("metric is singular")]
    Singular,
}

impl Metric {
    pub fn new(eta: Vec<Vec<Rational>>) -> Result<Self, MetricError> {
        let n = eta.len();
        if n == 0 || eta.iter().any(|row| row.len() != n) {
            return Err(MetricError::NotSquare);
        }
        for i in 0..n {
            for j in 0..i {
                if eta[i][j] != eta[j][i] {
                    return Err(MetricError::NotSymmetric(i, j));
                }
            }
        }
        let m = QMatrix::from_rows(eta.clone());
        if m.rank() < n {
            return Err(MetricError::Singular);
        }
        let mut eta_inv = vec![vec![Rational::zero(); n]; n];
        for j in 0..n {
            let mut e = vec![Rational::zero(); n];
            e[j] = Rational::one();
            let col = m.solve(&e).ok_or(MetricError::Singular)?;
            for i in 0..n {
                eta_inv[i][j] = col[i].clone();
            }
        }
        Ok(Metric { eta, eta_inv })
    }

    pub fn from_integers(rows: &[&[i64]]) -> Result<Self, MetricError> {
        Metric::new(
            rows.iter()
                .map(|r| {
                    r.iter()
                        .map(|&x| Rational::from_integer(x.into()))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn identity(n: usize) -> Self {
        let eta: Vec<Vec<Rational>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            Rational::one()
                        } else {
                            Rational::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        Metric {
            eta: eta.clone(),
            eta_inv: eta,
        }
    }

    pub fn dim(&self) -> usize {
        self.eta.len()
    }

    /// `η^{αβ}`.
    pub fn upper(&self, a: usize, b: usize) -> &Rational {
        &self.eta[a][b]
    }

    /// `η_{αβ}`.
    pub fn lower(&self, a: usize, b: usize) -> &Rational {
        &self.eta_inv[a][b]
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.eta
    }

    /// `δ^{σνψφ} = η^{σψ}η^{νφ} − η^{σφ}η^{νψ}`.
    pub fn delta(&self, s: usize, n: usize, p: usize, f: usize) -> Rational {
        self.upper(s, p) * self.upper(n, f) - self.upper(s, f) * self.upper(n, p)
    }
}

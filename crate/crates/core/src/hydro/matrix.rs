//! Small dense matrices of expressions.

use crate::kernel::Expr;

pub type ExprMatrix = Vec<Vec<Expr>>;

/// Determinant by cofactor expansion along the first row.
pub fn det(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    match n {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        2 => &(&m[0][0] * &m[1][1]) - &(&m[0][1] * &m[1][0]),
        _ => {
            let mut acc = Expr::zero();
            for j in 0..n {
                if m[0][j].is_zero() {
                    continue;
                }
                let term = &m[0][j] * &det(&minor(m, 0, j));
                acc = if j % 2 == 0 {
                    &acc + &term
                } else {
                    &acc - &term
                };
            }
            acc
        }
    }
}

fn minor(m: &[Vec<Expr>], row: usize, col: usize) -> ExprMatrix {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| {
            r.iter()
                .enumerate()
                .filter(|(j, _)| *j != col)
                .map(|(_, x)| x.clone())
                .collect()
        })
        .collect()
}

/// Inverse by the adjugate; `None` when the determinant is zero.
pub fn inverse(m: &[Vec<Expr>]) -> Option<ExprMatrix> {
    let n = m.len();
    let d = det(m);
    if d.is_zero() {
        return None;
    }
    let inv_d = d.recip();
    Some(
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let c = if n == 1 {
                            Expr::one()
                        } else {
                            det(&minor(m, j, i))
                        };
                        let c = if (i + j) % 2 == 0 { c } else { -c };
                        &c * &inv_d
                    })
                    .collect()
            })
            .collect(),
    )
}

pub fn mul(a: &[Vec<Expr>], b: &[Vec<Expr>]) -> ExprMatrix {
    let n = a.len();
    let m = b.first().map_or(0, |r| r.len());
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    (0..b.len())
                        .filter(|&k| !a[i][k].is_zero() && !b[k][j].is_zero())
                        .map(|k| &a[i][k] * &b[k][j])
                        .sum()
                })
                .collect()
        })
        .collect()
}

pub fn transpose(a: &[Vec<Expr>]) -> ExprMatrix {
    let m = a.first().map_or(0, |r| r.len());
    (0..m)
        .map(|j| a.iter().map(|r| r[j].clone()).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{VarKind, Workspace};

    #[test]
    fn inverse_times_matrix_is_identity() {
        let (ws, _) = Workspace::with_vars(&["x", "y", "z"], VarKind::Param);
        let m: ExprMatrix = [["x", "1", "y"], ["0", "z", "x*y"], ["1", "y", "2"]]
            .iter()
            .map(|r| r.iter().map(|s| ws.parse(s).unwrap()).collect())
            .collect();
        let inv = inverse(&m).unwrap();
        let p = mul(&m, &inv);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { Expr::one() } else { Expr::zero() };
                assert_eq!(p[i][j], want);
            }
        }
    }
}

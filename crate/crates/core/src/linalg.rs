//! Small dense exact linear algebra for active-set systems.

use crate::expr::AffineExpr;
use crate::rat::Rat;

pub type Matrix = Vec<Vec<Rat>>;

/// Row echelon form in place; returns the pivot columns.
fn echelon(m: &mut Matrix) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for k in c..cols {
            m[r][k] = &m[r][k] * &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for k in c..cols {
                    let d = &f * &m[r][k];
                    m[i][k] -= &d;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(m: &Matrix) -> usize {
    let mut m = m.clone();
    echelon(&mut m).len()
}

/// Basis of `{x : m·x = 0}` for a matrix with `cols` columns.
pub fn nullspace(m: &Matrix, cols: usize) -> Vec<Vec<Rat>> {
    let mut m = m.clone();
    let pivots = echelon(&mut m);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut x = vec![Rat::zero(); cols];
            x[f] = Rat::one();
            for (r, &p) in pivots.iter().enumerate() {
                x[p] = -m[r][f].clone();
            }
            x
        })
        .collect()
}

/// Solves the square system `m·x = rhs` with affine right-hand sides;
/// `None` when `m` is singular.
pub fn solve_affine(m: &Matrix, rhs: &[AffineExpr]) -> Option<Vec<AffineExpr>> {
    let n = m.len();
    let mut a = m.clone();
    let mut b = rhs.to_vec();
    for c in 0..n {
        let p = (c..n).find(|&i| !a[i][c].is_zero())?;
        a.swap(c, p);
        b.swap(c, p);
        let inv = a[c][c].recip();
        for k in c..n {
            a[c][k] = &a[c][k] * &inv;
        }
        b[c] = b[c].scale(&inv);
        for i in 0..n {
            if i != c && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for k in c..n {
                    let d = &f * &a[c][k];
                    a[i][k] -= &d;
                }
                let d = b[c].scale(&f);
                b[i] = &b[i] - &d;
            }
        }
    }
    Some(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::var;
    use crate::rat::rat;

    fn m(rows: &[&[i64]]) -> Matrix {
        rows.iter().map(|r| r.iter().map(|&x| rat(x, 1)).collect()).collect()
    }

    #[test]
    fn rank_and_nullspace() {
        let a = m(&[&[1, 2, 3], &[2, 4, 6], &[0, 1, 1]]);
        assert_eq!(rank(&a), 2);
        let ns = nullspace(&a, 3);
        assert_eq!(ns.len(), 1);
        for row in &a {
            let dot: Rat = row.iter().zip(&ns[0]).map(|(x, y)| x * y).sum();
            assert!(dot.is_zero());
        }
    }

    #[test]
    fn affine_solve() {
        // x + y = p, x - y = 1
        let a = m(&[&[1, 1], &[1, -1]]);
        let rhs = [AffineExpr::var(var("p")), AffineExpr::constant(Rat::one())];
        let x = solve_affine(&a, &rhs).unwrap();
        assert_eq!(x[0].to_string(), "1/2*p + 1/2");
        assert_eq!(x[1].to_string(), "1/2*p - 1/2");
        assert!(solve_affine(&m(&[&[1, 1], &[2, 2]]), &rhs).is_none());
    }
}

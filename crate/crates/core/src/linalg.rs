//! Dense exact linear algebra over the rationals.

use num_traits::{One, Zero};

use crate::expr::Q;

pub type Matrix = Vec<Vec<Q>>;

/// Reduced row echelon form and pivot columns.
pub fn rref(m: &Matrix) -> (Matrix, Vec<usize>) {
    let mut a = m.clone();
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        let inv = a[r][c].recip();
        for v in a[r].iter_mut() {
            *v = &*v * &inv;
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in c..cols {
                    let delta = &f * &a[r][j];
                    a[i][j] -= delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (a, pivots)
}

pub fn rank(m: &Matrix) -> usize {
    rref(m).1.len()
}

/// Basis of `{v : m v = 0}`; `cols` is needed when `m` has no rows.
pub fn nullspace(m: &Matrix, cols: usize) -> Vec<Vec<Q>> {
    if m.is_empty() {
        return (0..cols).map(|i| unit(cols, i)).collect();
    }
    let (a, pivots) = rref(m);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Q::zero(); cols];
            v[f] = Q::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[row][f].clone();
            }
            v
        })
        .collect()
}

/// One solution of `m x = b`, or `None` if inconsistent. Free variables are 0.
pub fn solve(m: &Matrix, b: &[Q]) -> Option<Vec<Q>> {
    let cols = m.first().map_or(0, Vec::len);
    let aug: Matrix = m
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let (a, pivots) = rref(&aug);
    if pivots.contains(&cols) {
        return None;
    }
    let mut x = vec![Q::zero(); cols];
    for (row, &pc) in pivots.iter().enumerate() {
        x[pc] = a[row][cols].clone();
    }
    Some(x)
}

pub fn inverse(m: &Matrix) -> Option<Matrix> {
    let n = m.len();
    let aug: Matrix = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend(unit(n, i));
            r
        })
        .collect();
    let (a, pivots) = rref(&aug);
    if pivots.len() < n || pivots[n - 1] >= n {
        return None;
    }
    Some(a.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Numbers of positive, negative and zero eigenvalues of a symmetric matrix,
/// by congruence diagonalisation.
pub fn inertia(m: &Matrix) -> (usize, usize, usize) {
    let mut a = m.clone();
    let mut n = a.len();
    let (mut pos, mut neg) = (0, 0);
    while n > 0 {
        if (0..n).all(|i| a[i][i].is_zero()) {
            // make a diagonal entry nonzero with x_i -> x_i + x_j
            let Some((i, j)) = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).find(|&(i, j)| !a[i][j].is_zero()) else {
                break;
            };
            for k in 0..n {
                let v = a[j][k].clone();
                a[i][k] += v;
            }
            for k in 0..n {
                let v = a[k][j].clone();
                a[k][i] += v;
            }
        }
        let p = (0..n).find(|&i| !a[i][i].is_zero()).expect("nonzero diagonal");
        a.swap(p, n - 1);
        for row in a.iter_mut() {
            row.swap(p, n - 1);
        }
        let d = a[n - 1][n - 1].clone();
        if d > Q::zero() {
            pos += 1;
        } else {
            neg += 1;
        }
        for i in 0..n - 1 {
            let f = &a[i][n - 1] / &d;
            for k in 0..n - 1 {
                let delta = &f * &a[n - 1][k];
                a[i][k] -= delta;
            }
        }
        n -= 1;
        a.truncate(n);
        for row in a.iter_mut() {
            row.truncate(n);
        }
    }
    (pos, neg, m.len() - pos - neg)
}

pub fn unit(n: usize, i: usize) -> Vec<Q> {
    let mut v = vec![Q::zero(); n];
    v[i] = Q::one();
    v
}

pub fn identity(n: usize) -> Matrix {
    (0..n).map(|i| unit(n, i)).collect()
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    (0..inner).fold(Q::zero(), |acc, k| acc + &row[k] * &b[k][j])
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::q_int;

    fn m(rows: &[&[i64]]) -> Matrix {
        rows.iter().map(|r| r.iter().map(|&v| q_int(v)).collect()).collect()
    }

    #[test]
    fn rank_and_nullspace() {
        let a = m(&[&[1, 2, 3], &[2, 4, 6], &[1, 0, 1]]);
        assert_eq!(rank(&a), 2);
        let ns = nullspace(&a, 3);
        assert_eq!(ns.len(), 1);
        let prod = mat_mul(&a, &ns.iter().map(|v| vec![v[0].clone()]).collect::<Vec<_>>());
        assert_eq!(prod.len(), 3);
        for row in &a {
            let dot = row.iter().zip(&ns[0]).fold(Q::zero(), |acc, (x, y)| acc + x * y);
            assert!(dot.is_zero());
        }
    }

    #[test]
    fn solve_and_inverse() {
        let a = m(&[&[2, 1], &[1, 3]]);
        let x = solve(&a, &[q_int(3), q_int(5)]).unwrap();
        assert_eq!(x, vec![Q::new(4.into(), 5.into()), Q::new(7.into(), 5.into())]);
        let inv = inverse(&a).unwrap();
        assert_eq!(mat_mul(&a, &inv), identity(2));
        assert!(inverse(&m(&[&[1, 2], &[2, 4]])).is_none());
        assert!(solve(&m(&[&[1, 1], &[1, 1]]), &[q_int(1), q_int(2)]).is_none());
    }

    #[test]
    fn inertia_counts_signs() {
        assert_eq!(inertia(&m(&[&[0, 1], &[1, 0]])), (1, 1, 0));
        assert_eq!(inertia(&m(&[&[2, 0, 0], &[0, -3, 0], &[0, 0, 0]])), (1, 1, 1));
        assert_eq!(inertia(&m(&[&[1, 1], &[1, 1]])), (1, 0, 1));
    }
}

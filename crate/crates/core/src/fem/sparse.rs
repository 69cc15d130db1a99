use alloc::vec;
use alloc::vec::Vec;

use super::FemError;

/// Compressed sparse row matrix, square.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from `(row, col, value)` triplets; duplicates are summed in
    /// input order.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1, k));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (r, c, v) = triplets[k];
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, &t)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.n) {
            *yr = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `|A_rc − A_cr| ≤ tol·max|A|` for every stored entry.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (0..self.n).all(|r| self.row(r).all(|(c, v)| libm::fabs(v - self.get(c, r)) <= tol * scale))
    }

    /// `self + s·other`, on the union pattern.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        assert_eq!(self.n, other.n);
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n {
            t.extend(self.row(r).map(|(c, v)| (r, c, v)));
            t.extend(other.row(r).map(|(c, v)| (r, c, s * v)));
        }
        Self::from_triplets(self.n, &t)
    }

    /// Principal submatrix keeping the indices `i` with `map[i] = Some(new)`.
    pub fn restrict(&self, map: &[Option<usize>], new_n: usize) -> Self {
        let mut t = Vec::new();
        for r in 0..self.n {
            let Some(nr) = map[r] else { continue };
            for (c, v) in self.row(r) {
                if let Some(nc) = map[c] {
                    t.push((nr, nc, v));
                }
            }
        }
        Self::from_triplets(new_n, &t)
    }

    /// Dense copy, row-major. Test and diagnostic use.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                d[r * self.n + c] = v;
            }
        }
        d
    }
}

/// Result of a converged CG solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖b − Ax‖ / ‖b‖`.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradient for SPD `a`.
///
/// Stops when `‖b − Ax‖ ≤ tol·‖b‖`; fails after `10·dim` iterations.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, tol: f64) -> Result<CgOutcome, FemError> {
    let n = a.dim();
    if b.len() != n {
        return Err(FemError::DimensionMismatch { expected: n, got: b.len() });
    }
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(x0) => return Err(FemError::DimensionMismatch { expected: n, got: x0.len() }),
        None => vec![0.0; n],
    };
    let b_norm = libm::sqrt(dot(b, b));
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut r = a.mul(&x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut res = libm::sqrt(dot(&r, &r)) / b_norm;
    if res <= tol {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            relative_residual: res,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let max_iter = 10 * n.max(1);
    for it in 1..=max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(FemError::NotConverged {
                iterations: it,
                residual: res,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = libm::sqrt(dot(&r, &r)) / b_norm;
        if res <= tol {
            return Ok(CgOutcome {
                x,
                iterations: it,
                relative_residual: res,
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(FemError::NotConverged {
        iterations: max_iter,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (0, 1, -1.0)]);
        assert_eq!(m.to_dense(), [4.0, -1.0, 2.0, 0.0]);
        assert_eq!(m.nnz(), 3);
        assert!(!m.is_symmetric(1e-12));
    }

    #[test]
    fn identity_solve() {
        let a = CsrMatrix::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 9.0];
        let out = cg_solve(&a, &b, None, 1e-10).unwrap();
        assert_eq!(out.x, b);
    }

    #[test]
    fn two_by_two() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)]);
        let out = cg_solve(&a, &[1.0, 2.0], None, 1e-12).unwrap();
        assert!((out.x[0] - 1.0 / 11.0).abs() < 1e-12);
        assert!((out.x[1] - 7.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = CsrMatrix::identity(3);
        assert_eq!(cg_solve(&a, &[0.0; 3], None, 1e-10).unwrap().x, [0.0; 3]);
    }

    #[test]
    fn dimension_mismatch() {
        let a = CsrMatrix::identity(3);
        assert!(matches!(cg_solve(&a, &[1.0; 2], None, 1e-10), Err(FemError::DimensionMismatch { .. })));
    }

    #[test]
    fn indefinite_system_fails() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(matches!(cg_solve(&a, &[1.0, 1.0], None, 1e-12), Err(FemError::NotConverged { .. })));
    }
}

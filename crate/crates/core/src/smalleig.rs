//! Cyclic Jacobi eigenvalue iteration for small dense symmetric matrices.
//!
//! This is the independent oracle used against the closed-form eigenvalue
//! list of rotationally symmetric Hessians; it never sees the lemma formulas.

use crate::error::{Error, Result};

/// Dense symmetric matrix in row-major storage.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    fn off_diag_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                s += self.get(i, j).powi(2);
            }
        }
        (2.0 * s).sqrt()
    }
}

/// Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(m: &SymMatrix) -> Result<Vec<f64>> {
    let n = m.n;
    if n == 0 || m.data.len() != n * n {
        return Err(Error::InvalidParams("matrix shape mismatch".into()));
    }
    let mut a = m.clone();
    let scale = a.data.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1.0);
    let tol = 1e-15 * scale;
    for _sweep in 0..100 {
        if a.off_diag_norm() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                // Stable rotation choice (Golub & Van Loan).
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, 0.0);
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(eigs)
}

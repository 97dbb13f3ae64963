//! Dense CTMC generator matrices and the action of their exponential via
//! uniformization.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("not a generator matrix: {0}")]
    NotGenerator(String),
}

/// Dense rate matrix of a continuous-time Markov chain; rows sum to zero and
/// off-diagonal entries are nonnegative. Absorbing states have all-zero rows.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
    /// Optional state labels (e.g. for a cemetery state).
    pub labels: Vec<String>,
}

impl GeneratorMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "square matrix required");
        let labels = (0..dim).map(|i| i.to_string()).collect();
        GeneratorMatrix { dim, rows, labels }
    }

    pub fn validate(&self) -> Result<(), MatrixError> {
        for (i, row) in self.rows.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if sum.abs() > 1e-9 {
                return Err(MatrixError::NotGenerator(format!("row {i} sums to {sum}")));
            }
            for (j, &x) in row.iter().enumerate() {
                if i != j && x < 0.0 {
                    return Err(MatrixError::NotGenerator(format!(
                        "negative off-diagonal at ({i},{j})"
                    )));
                }
            }
        }
        Ok(())
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Computes `e^{tQ} f` by uniformization: with `λ = max_i |Q_ii|` and
/// `P = I + Q/λ`, sums `Σ_k e^{-λt}(λt)^k/k! P^k f`, truncating once the
/// Poisson tail (times `max|f|`) drops below `tol`.
pub fn expm_apply(q: &GeneratorMatrix, t: f64, f: &[f64], tol: f64) -> Vec<f64> {
    assert!(t >= 0.0 && tol > 0.0);
    assert_eq!(f.len(), q.dim);
    q.validate().expect("generator matrix");
    let lambda = q
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| r[i].abs())
        .fold(0.0f64, f64::max);
    if lambda == 0.0 || t == 0.0 {
        return f.to_vec();
    }
    let fmax = f.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
    let lt = lambda * t;
    // P v = v + Q v / λ
    let mut pk_f = f.to_vec();
    let mut result = vec![0.0; q.dim];
    let mut weight = (-lt).exp(); // e^{-λt} (λt)^k / k!, k = 0
    let mut cum = 0.0;
    let mut k: u64 = 0;
    loop {
        for (r, v) in result.iter_mut().zip(&pk_f) {
            *r += weight * v;
        }
        cum += weight;
        if (1.0 - cum) * fmax < tol {
            break;
        }
        let qv = q.apply(&pk_f);
        for (p, dv) in pk_f.iter_mut().zip(&qv) {
            *p += dv / lambda;
        }
        k += 1;
        weight *= lt / k as f64;
        if weight == 0.0 && cum > 0.999999 {
            break;
        }
        assert!(k < 10_000_000, "uniformization failed to converge");
    }
    result
}

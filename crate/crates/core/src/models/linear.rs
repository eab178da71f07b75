use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};

/// Ridge damping applied to every non-intercept coefficient.
pub const RIDGE: f64 = 1e-6;

/// Affine scorer `coef . x + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    /// Least squares of `targets` on `x` with an unpenalized intercept,
    /// solved through the damped normal equations.
    pub fn fit(x: &Matrix, targets: &[f64], ridge: f64) -> Result<Self> {
        let (n, d) = (x.rows(), x.cols());
        if targets.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{} targets for {n} rows",
                targets.len()
            )));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("no rows to fit".into()));
        }
        let m = d + 1;
        let mut gram = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        let mut aug = vec![1.0; m];
        for (i, &t) in targets.iter().enumerate() {
            aug[..d].copy_from_slice(x.row(i));
            for a in 0..m {
                let va = aug[a];
                rhs[a] += va * t;
                let row = &mut gram[a * m..(a + 1) * m];
                for b in a..m {
                    row[b] += va * aug[b];
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                gram[a * m + b] = gram[b * m + a];
            }
        }
        for j in 0..d {
            gram[j * m + j] += ridge;
        }
        let g = DMatrix::from_row_slice(m, m, &gram);
        let r = DVector::from_vec(rhs);
        let sol = match g.clone().cholesky() {
            Some(ch) => ch.solve(&r),
            None => g
                .lu()
                .solve(&r)
                .ok_or_else(|| Error::Diverged("singular normal equations".into()))?,
        };
        Ok(Self {
            coef: sol.as_slice()[..d].to_vec(),
            intercept: sol[d],
        })
    }

    #[inline]
    pub fn score(&self, x: &[f64]) -> f64 {
        self.coef.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.intercept
    }

    /// Thresholded output in {0, 1}.
    #[inline]
    pub fn hard(&self, x: &[f64]) -> f64 {
        if self.score(x) >= 0.5 {
            1.0
        } else {
            0.0
        }
    }
}

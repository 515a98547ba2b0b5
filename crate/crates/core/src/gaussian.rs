//! Linear-Gaussian companion: standardized partial regression coefficients
//! and their asymptotic standard deviations, computed from a correlation
//! matrix and a sample size.

use std::collections::BTreeSet;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{MediationError, Result};

#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    names: Vec<String>,
    m: DMatrix<f64>,
    n: usize,
}

impl CorrelationMatrix {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>, n: usize) -> Result<Self> {
        let k = names.len();
        if rows.len() != k || rows.iter().any(|r| r.len() != k) {
            return Err(MediationError::Parse {
                line: None,
                msg: "correlation matrix is not square".to_string(),
            });
        }
        let m = DMatrix::from_fn(k, k, |i, j| rows[i][j]);
        for i in 0..k {
            if (m[(i, i)] - 1.0).abs() > 1e-9 {
                return Err(MediationError::Parse {
                    line: None,
                    msg: format!("diagonal entry for {} is not 1", names[i]),
                });
            }
            for j in 0..k {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 || m[(i, j)].abs() > 1.0 + 1e-9 {
                    return Err(MediationError::Parse {
                        line: None,
                        msg: "correlations must be symmetric with |r| <= 1".to_string(),
                    });
                }
            }
        }
        let eig = m.clone().symmetric_eigenvalues();
        if eig.iter().any(|&l| l < -1e-9) {
            return Err(MediationError::NotPositiveSemidefinite);
        }
        Ok(CorrelationMatrix { names, m, n })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    fn idx(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| MediationError::UnknownVariable(name.to_string()))
    }

    fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.m[(rows[i], cols[j])])
    }

    /// 1 − r' R⁻¹ r: residual variance of `target` after regressing on
    /// `predictors`, in standardized scale.
    fn residual_variance(&self, target: usize, predictors: &[usize]) -> Result<f64> {
        if predictors.is_empty() {
            return Ok(1.0);
        }
        let rpp = self.submatrix(predictors, predictors);
        let rpt = DVector::from_fn(predictors.len(), |i, _| self.m[(predictors[i], target)]);
        let chol = Cholesky::new(rpp).ok_or(MediationError::SingularDesign)?;
        let solved = chol.solve(&rpt);
        Ok((1.0 - rpt.dot(&solved)).max(0.0))
    }

    fn predictor_indices(
        &self,
        response: &str,
        treatment: &str,
        controls: &BTreeSet<String>,
    ) -> Result<(usize, Vec<usize>)> {
        let y = self.idx(response)?;
        let x = self.idx(treatment)?;
        if response == treatment || controls.contains(response) || controls.contains(treatment) {
            return Err(MediationError::OverlappingSets);
        }
        let mut preds = vec![x];
        for c in controls {
            preds.push(self.idx(c)?);
        }
        Ok((y, preds))
    }

    /// Standardized partial regression coefficient of `treatment` in the
    /// least-squares regression of `response` on `treatment` and `controls`.
    pub fn regression_coefficient(
        &self,
        response: &str,
        treatment: &str,
        controls: &BTreeSet<String>,
    ) -> Result<f64> {
        let (y, preds) = self.predictor_indices(response, treatment, controls)?;
        let rpp = self.submatrix(&preds, &preds);
        let rpy = DVector::from_fn(preds.len(), |i, _| self.m[(preds[i], y)]);
        let chol = Cholesky::new(rpp).ok_or(MediationError::SingularDesign)?;
        Ok(chol.solve(&rpy)[0])
    }

    /// √a.var of the coefficient: residual variance of the response given
    /// treatment and controls over n times the residual variance of the
    /// treatment given the controls.
    pub fn asymptotic_sd(
        &self,
        response: &str,
        treatment: &str,
        controls: &BTreeSet<String>,
    ) -> Result<f64> {
        let (y, preds) = self.predictor_indices(response, treatment, controls)?;
        if self.n <= controls.len() + 2 {
            return Err(MediationError::Parse {
                line: None,
                msg: format!("sample size {} too small for {} controls", self.n, controls.len()),
            });
        }
        let res_y = self.residual_variance(y, &preds)?;
        let res_x = self.residual_variance(preds[0], &preds[1..])?;
        if res_x <= 1e-12 {
            return Err(MediationError::SingularDesign);
        }
        Ok((res_y / (self.n as f64 * res_x)).sqrt())
    }
}

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::Target;
use crate::tensor::{Batch, ParamVector, Sample};

pub const DEFAULT_ORACLE_CAP: usize = 2000;

/// Dense damped Hessian of the regularized empirical risk. Only built for
/// small models; it is the reference the stochastic estimator is checked
/// against.
#[derive(Debug, Clone)]
pub struct ExactHessian {
    matrix: DMatrix<f64>,
    damping: f64,
    layout: Arc<crate::tensor::Layout>,
    factor: Option<Cholesky<f64, Dyn>>,
}

impl ExactHessian {
    /// Wraps an explicit symmetric matrix (plus `damping` on the diagonal).
    pub fn from_matrix(layout: Arc<crate::tensor::Layout>, mut matrix: DMatrix<f64>, damping: f64) -> Result<Self> {
        let p = layout.total_len();
        if matrix.nrows() != p || matrix.ncols() != p {
            return Err(Error::Shape {
                context: "ExactHessian".into(),
                expected: vec![p, p],
                actual: vec![matrix.nrows(), matrix.ncols()],
            });
        }
        for i in 0..p {
            matrix[(i, i)] += damping;
        }
        let factor = Cholesky::new(matrix.clone());
        Ok(Self {
            matrix,
            damping,
            layout,
            factor,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn damping(&self) -> f64 {
        self.damping
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |H - H^T|`
    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    pub fn apply(&self, v: &ParamVector) -> Result<ParamVector> {
        self.check(v)?;
        let out = &self.matrix * DVector::from_column_slice(v.as_slice());
        ParamVector::new(Arc::clone(&self.layout), out.as_slice().to_vec())
    }

    fn check(&self, v: &ParamVector) -> Result<()> {
        if v.layout().as_ref() != self.layout.as_ref() {
            return Err(Error::LayoutMismatch("vector does not match the Hessian's layout".into()));
        }
        Ok(())
    }
}

/// Builds `H = mean_i d^2 L(z_i) + l2 (regularized slots) + damping * I`
/// column by column from Hessian-vector products with basis vectors.
pub fn exact_hessian(target: &Target<'_>, train: &[Sample], damping: f64, cap: usize) -> Result<ExactHessian> {
    let layout = Arc::clone(target.params.layout());
    let p = layout.total_len();
    if p > cap {
        return Err(Error::OracleCap { params: p, cap });
    }
    if !(damping >= 0.0) {
        return Err(Error::InvalidArgument(format!("damping must be >= 0, got {damping}")));
    }
    let batch = Batch::from_samples(train)?;
    let columns: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|j| {
            target
                .hvp(&batch, &ParamVector::basis(Arc::clone(&layout), j))
                .map(ParamVector::into_vec)
        })
        .collect::<Result<_>>()?;
    let matrix = DMatrix::from_fn(p, p, |i, j| columns[j][i]);
    ExactHessian::from_matrix(layout, matrix, damping)
}

/// Solves `H x = g` by Cholesky factorization.
pub fn inverse_hvp_exact(hessian: &ExactHessian, g: &ParamVector) -> Result<ParamVector> {
    hessian.check(g)?;
    let factor = hessian.factor.as_ref().ok_or(Error::NotPositiveDefinite {
        damping: hessian.damping,
    })?;
    let x = factor.solve(&DVector::from_column_slice(g.as_slice()));
    ParamVector::new(Arc::clone(g.layout()), x.as_slice().to_vec())
}

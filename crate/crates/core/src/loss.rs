//! Squared-error loss, empirical loss and the regularized least-squares
//! objective over observed cells, with its analytic gradient.

use crate::error::{Error, Result};
use crate::model::{LatentFactorModel, SparseUtilityMatrix};
use crate::scalar::{sq_norm, Scalar};

/// Training hyperparameters shared by both solvers.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams<T> {
    /// Factor dimension.
    pub k: usize,
    /// L2 weight on all factors; 0 gives the plain least-squares problem.
    pub lambda: T,
    /// SGD step size (ignored by ALS).
    pub learning_rate: T,
    pub max_epochs: usize,
    /// Stop once the relative objective change drops below this.
    pub tol: T,
    pub seed: u64,
}

impl<T: Scalar> Hyperparams<T> {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            lambda: T::zero(),
            learning_rate: T::lit(0.01),
            max_epochs: 500,
            tol: T::lit(1e-8),
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if !self.lambda.is_finite() || self.lambda < T::zero() {
            return bad("lambda must be finite and non-negative");
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= T::zero() {
            return bad("learning_rate must be finite and positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if !self.tol.is_finite() || self.tol <= T::zero() {
            return bad("tol must be finite and positive");
        }
        Ok(())
    }
}

/// `(predicted - actual)^2`.
#[inline]
pub fn squared_loss<T: Scalar>(predicted: T, actual: T) -> T {
    let d = predicted - actual;
    d * d
}

fn require_entries<T: Scalar>(data: &SparseUtilityMatrix<T>) -> Result<()> {
    if data.nnz() == 0 {
        Err(Error::EmptyInput("no observed entries"))
    } else {
        Ok(())
    }
}

fn residual_sum<T: Scalar>(model: &LatentFactorModel<T>, data: &SparseUtilityMatrix<T>) -> T {
    data.entries()
        .map(|(r, c, s)| squared_loss(model.score(r, c), s))
        .sum()
}

/// Mean squared error of the model over the observed cells.
pub fn empirical_loss<T: Scalar>(model: &LatentFactorModel<T>, data: &SparseUtilityMatrix<T>) -> Result<T> {
    model.require_same_index(data)?;
    require_entries(data)?;
    Ok(residual_sum(model, data) / T::from_usize(data.nnz()).unwrap())
}

/// Sum of squared residuals over observed cells plus
/// `lambda * (sum ||x_u||^2 + sum ||y_g||^2)`.
pub fn objective_value<T: Scalar>(
    model: &LatentFactorModel<T>,
    data: &SparseUtilityMatrix<T>,
    lambda: T,
) -> Result<T> {
    model.require_same_index(data)?;
    require_entries(data)?;
    check_lambda(lambda)?;
    Ok(objective_unchecked(model, data, lambda))
}

pub(crate) fn objective_unchecked<T: Scalar>(
    model: &LatentFactorModel<T>,
    data: &SparseUtilityMatrix<T>,
    lambda: T,
) -> T {
    let fit = residual_sum(model, data);
    if lambda == T::zero() {
        fit
    } else {
        fit + lambda * (sq_norm(model.user_factors()) + sq_norm(model.element_factors()))
    }
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if lambda.is_finite() && lambda >= T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "lambda must be finite and non-negative".into(),
        ))
    }
}

/// Gradient of [`objective_value`], laid out like the model's factors.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorGradient<T> {
    pub k: usize,
    /// `m × k`, row-major.
    pub user: Vec<T>,
    /// `n × k`, row-major.
    pub element: Vec<T>,
}

impl<T: Scalar> FactorGradient<T> {
    pub fn user_row(&self, r: usize) -> &[T] {
        &self.user[r * self.k..(r + 1) * self.k]
    }

    pub fn element_row(&self, c: usize) -> &[T] {
        &self.element[c * self.k..(c + 1) * self.k]
    }
}

pub fn objective_gradient<T: Scalar>(
    model: &LatentFactorModel<T>,
    data: &SparseUtilityMatrix<T>,
    lambda: T,
) -> Result<FactorGradient<T>> {
    model.require_same_index(data)?;
    require_entries(data)?;
    check_lambda(lambda)?;
    let k = model.k();
    let two = T::lit(2.0);
    let mut user: Vec<T> = model.user_factors().iter().map(|&v| two * lambda * v).collect();
    let mut element: Vec<T> = model
        .element_factors()
        .iter()
        .map(|&v| two * lambda * v)
        .collect();
    for (r, c, s) in data.entries() {
        let x = model.user_factor(r);
        let y = model.element_factor(c);
        let coef = two * (model.score(r, c) - s);
        for d in 0..k {
            user[r * k + d] += coef * y[d];
            element[c * k + d] += coef * x[d];
        }
    }
    Ok(FactorGradient { k, user, element })
}

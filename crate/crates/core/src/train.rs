//! Learning user and element factors from a sparse utility matrix.
//!
//! Two solvers minimise the same objective
//! `sum_(u,g) observed (s_ug - x_u·y_g)^2 + lambda * (sum ||x_u||^2 + sum ||y_g||^2)`:
//! alternating least squares (exact block updates, the default) and
//! stochastic gradient descent. Both are deterministic functions of the data
//! and [`Hyperparams`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::solve_psd;
use crate::loss::{objective_unchecked, Hyperparams};
use crate::model::{
    DenseUtilityMatrix, ElementId, IdIndex, LatentFactorModel, SparseUtilityMatrix, TrainingStats, UserId,
};
use crate::scalar::Scalar;

/// Half-width of the uniform initialization interval.
pub const INIT_SCALE: f64 = 0.1;

/// SGD gives up once the objective exceeds this.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

const SHUFFLE_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingReport<T> {
    pub epochs_run: usize,
    /// Objective after each epoch.
    pub loss_history: Vec<T>,
    pub converged: bool,
    pub final_objective: T,
}

/// Optimizer selector used by the CLI and convenience wrappers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Optimizer {
    #[default]
    Als,
    Sgd,
}

impl std::str::FromStr for Optimizer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "als" => Ok(Self::Als),
            "sgd" => Ok(Self::Sgd),
            other => Err(Error::InvalidParameter(format!(
                "optimizer {other:?} (expected als or sgd)"
            ))),
        }
    }
}

pub fn train<T: Scalar>(
    optimizer: Optimizer,
    data: &SparseUtilityMatrix<T>,
    hp: &Hyperparams<T>,
) -> Result<(LatentFactorModel<T>, TrainingReport<T>)> {
    match optimizer {
        Optimizer::Als => train_als(data, hp),
        Optimizer::Sgd => train_sgd(data, hp),
    }
}

fn init_factors<T: Scalar>(len: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    (0..len)
        .map(|_| T::lit(rng.random_range(-INIT_SCALE..=INIT_SCALE)))
        .collect()
}

/// Random `m × k` and `n × k` factors, uniform on `[-0.1, 0.1]`, user
/// factors drawn first. Ids are placeholders `u0..`, `g0..`.
pub fn init_model<T: Scalar>(m: usize, n: usize, k: usize, seed: u64) -> Result<LatentFactorModel<T>> {
    let users = (0..m)
        .map(|i| UserId::new(&format!("u{i}")))
        .collect::<Result<Vec<_>>>()?;
    let elements = (0..n)
        .map(|j| ElementId::new(&format!("g{j}")))
        .collect::<Result<Vec<_>>>()?;
    init_model_for(IdIndex::from_ids(users), IdIndex::from_ids(elements), k, seed)
}

fn init_model_for<T: Scalar>(
    users: IdIndex<UserId>,
    elements: IdIndex<ElementId>,
    k: usize,
    seed: u64,
) -> Result<LatentFactorModel<T>> {
    if k == 0 || users.is_empty() || elements.is_empty() {
        return Err(Error::InvalidParameter(
            "init_model needs m, n and k all at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uf = init_factors(users.len() * k, &mut rng);
    let ef = init_factors(elements.len() * k, &mut rng);
    Ok(LatentFactorModel::from_raw(k, users, elements, uf, ef))
}

fn start<T: Scalar>(data: &SparseUtilityMatrix<T>, hp: &Hyperparams<T>) -> Result<LatentFactorModel<T>> {
    hp.validate()?;
    if data.nnz() == 0 {
        return Err(Error::EmptyInput("no observed entries"));
    }
    init_model_for(
        data.user_index().clone(),
        data.element_index().clone(),
        hp.k,
        hp.seed,
    )
}

/// Objective change relative to the previous value; objectives below machine
/// epsilon are compared on an absolute scale so an exact fit can converge.
fn relative_change<T: Scalar>(prev: T, cur: T) -> T {
    (prev - cur).abs() / prev.abs().max(T::epsilon())
}

/// Solves one side of ALS: every row of `target` with observations gets the
/// exact ridge solution against the fixed `other` factors.
fn als_half<'a, T: Scalar>(
    target: &mut [T],
    other: &[T],
    lines: impl Iterator<Item = (usize, &'a [(usize, T)])>,
    k: usize,
    lambda: T,
) {
    let mut gram = vec![T::zero(); k * k];
    let mut rhs = vec![T::zero(); k];
    for (r, line) in lines {
        if line.is_empty() {
            continue;
        }
        gram.iter_mut().for_each(|v| *v = T::zero());
        rhs.iter_mut().for_each(|v| *v = T::zero());
        for &(c, s) in line {
            let y = &other[c * k..(c + 1) * k];
            for i in 0..k {
                rhs[i] += s * y[i];
                for j in 0..=i {
                    gram[i * k + j] += y[i] * y[j];
                }
            }
        }
        for i in 0..k {
            gram[i * k + i] += lambda;
            for j in 0..i {
                gram[j * k + i] = gram[i * k + j];
            }
        }
        let x = solve_psd(&gram, &rhs, k);
        target[r * k..(r + 1) * k].copy_from_slice(&x);
    }
}

/// Alternating least squares.
///
/// Each epoch fixes element factors and solves every user row exactly, then
/// the reverse. Rows or columns without observations keep their initial
/// factors. Rank-deficient subproblems (possible when `lambda == 0`) take the
/// minimum-norm solution.
pub fn train_als<T: Scalar>(
    data: &SparseUtilityMatrix<T>,
    hp: &Hyperparams<T>,
) -> Result<(LatentFactorModel<T>, TrainingReport<T>)> {
    let mut model = start(data, hp)?;
    let k = hp.k;
    let mut prev = objective_unchecked(&model, data, hp.lambda);
    let mut history = Vec::with_capacity(hp.max_epochs.min(4096));
    let mut converged = false;
    for _ in 0..hp.max_epochs {
        {
            let (uf, ef) = model.factors_mut();
            als_half(
                uf,
                ef,
                (0..data.n_users()).map(|r| (r, data.row(r))),
                k,
                hp.lambda,
            );
            als_half(
                ef,
                uf,
                (0..data.n_elements()).map(|c| (c, data.col(c))),
                k,
                hp.lambda,
            );
        }
        let cur = objective_unchecked(&model, data, hp.lambda);
        history.push(cur);
        if relative_change(prev, cur) < hp.tol {
            converged = true;
            break;
        }
        prev = cur;
    }
    Ok(finish(model, data, history, converged))
}

fn finish<T: Scalar>(
    model: LatentFactorModel<T>,
    data: &SparseUtilityMatrix<T>,
    history: Vec<T>,
    converged: bool,
) -> (LatentFactorModel<T>, TrainingReport<T>) {
    let report = TrainingReport {
        epochs_run: history.len(),
        final_objective: *history.last().expect("at least one epoch"),
        loss_history: history,
        converged,
    };
    (model.with_stats(TrainingStats::from_matrix(data)), report)
}

/// Stochastic gradient descent over individual observations.
///
/// Observation order is reshuffled every epoch from a generator seeded by
/// `hp.seed`. The L2 term is spread over a row's (column's) observations, so
/// one full pass applies the same total shrinkage as the batch gradient.
pub fn train_sgd<T: Scalar>(
    data: &SparseUtilityMatrix<T>,
    hp: &Hyperparams<T>,
) -> Result<(LatentFactorModel<T>, TrainingReport<T>)> {
    let mut model = start(data, hp)?;
    let k = hp.k;
    let two = T::lit(2.0);
    let eta = hp.learning_rate;
    let row_reg: Vec<T> = (0..data.n_users())
        .map(|r| per_observation_reg(hp.lambda, data.row(r).len()))
        .collect();
    let col_reg: Vec<T> = (0..data.n_elements())
        .map(|c| per_observation_reg(hp.lambda, data.col(c).len()))
        .collect();
    let mut order: Vec<(usize, usize, T)> = data.entries().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let limit = T::lit(DIVERGENCE_LIMIT);

    let mut prev = objective_unchecked(&model, data, hp.lambda);
    let mut history = Vec::with_capacity(hp.max_epochs.min(4096));
    let mut converged = false;
    let mut x_old = vec![T::zero(); k];
    for epoch in 1..=hp.max_epochs {
        order.shuffle(&mut rng);
        {
            let (uf, ef) = model.factors_mut();
            for &(r, c, s) in &order {
                let x = &mut uf[r * k..(r + 1) * k];
                let y = &mut ef[c * k..(c + 1) * k];
                let err = x.iter().zip(y.iter()).fold(T::zero(), |a, (&p, &q)| a + p * q) - s;
                x_old.copy_from_slice(x);
                for d in 0..k {
                    x[d] -= eta * (two * err * y[d] + two * row_reg[r] * x[d]);
                }
                for d in 0..k {
                    y[d] -= eta * (two * err * x_old[d] + two * col_reg[c] * y[d]);
                }
            }
        }
        let cur = objective_unchecked(&model, data, hp.lambda);
        if !cur.is_finite() || cur > limit {
            return Err(Error::Diverged {
                epoch,
                objective: cur.as_f64(),
            });
        }
        history.push(cur);
        if relative_change(prev, cur) < hp.tol {
            converged = true;
            break;
        }
        prev = cur;
    }
    Ok(finish(model, data, history, converged))
}

fn per_observation_reg<T: Scalar>(lambda: T, count: usize) -> T {
    if count == 0 {
        T::zero()
    } else {
        lambda / T::from_usize(count).unwrap()
    }
}

/// Predicted utility `x_u · y_g`.
pub fn predict<T: Scalar>(model: &LatentFactorModel<T>, user: &UserId, element: &ElementId) -> Result<T> {
    let (r, c) = model.locate(user, element)?;
    Ok(model.score(r, c))
}

/// Trains `restarts` times with seeds `hp.seed, hp.seed + 1, ...` and keeps
/// the run with the lowest final objective (earliest on ties). Also returns
/// the winning seed.
///
/// With `lambda == 0` a single ALS start can stall in a valley where one
/// factor grows without bound; restarts are the usual way out.
pub fn train_with_restarts<T: Scalar>(
    optimizer: Optimizer,
    data: &SparseUtilityMatrix<T>,
    hp: &Hyperparams<T>,
    restarts: usize,
) -> Result<(LatentFactorModel<T>, TrainingReport<T>, u64)> {
    if restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be at least 1".into()));
    }
    let mut best: Option<(LatentFactorModel<T>, TrainingReport<T>, u64)> = None;
    for i in 0..restarts as u64 {
        let seed = hp.seed.wrapping_add(i);
        let run_hp = Hyperparams { seed, ..hp.clone() };
        let (model, report) = train(optimizer, data, &run_hp)?;
        if best
            .as_ref()
            .is_none_or(|(_, b, _)| report.final_objective < b.final_objective)
        {
            best = Some((model, report, seed));
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Whether a completed cell came from the data or from the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    Observed,
    Predicted,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Observed => "observed",
            Provenance::Predicted => "predicted",
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "observed" => Ok(Self::Observed),
            "predicted" => Ok(Self::Predicted),
            other => Err(Error::InvalidParameter(format!("provenance {other:?}"))),
        }
    }
}

/// Dense matrix with a per-cell record of where each value came from.
#[derive(Clone, Debug, PartialEq)]
pub struct CompletedMatrix<T> {
    pub dense: DenseUtilityMatrix<T>,
    /// Row-major, aligned with `dense`.
    pub provenance: Vec<Provenance>,
}

impl<T: Scalar> CompletedMatrix<T> {
    pub fn new(dense: DenseUtilityMatrix<T>, provenance: Vec<Provenance>) -> Result<Self> {
        if provenance.len() != dense.scores().len() {
            return Err(Error::InvalidParameter(
                "provenance length does not match matrix size".into(),
            ));
        }
        Ok(Self { dense, provenance })
    }

    pub fn provenance(&self, r: usize, c: usize) -> Provenance {
        self.provenance[r * self.dense.n_elements() + c]
    }
}

/// Fills every unobserved cell of `data` with the model's prediction.
/// Observed cells keep their values.
pub fn complete<T: Scalar>(
    model: &LatentFactorModel<T>,
    data: &SparseUtilityMatrix<T>,
) -> Result<CompletedMatrix<T>> {
    model.require_same_index(data)?;
    let (m, n) = (data.n_users(), data.n_elements());
    let mut scores = Vec::with_capacity(m * n);
    let mut provenance = Vec::with_capacity(m * n);
    for r in 0..m {
        let mut observed = data.row(r).iter().peekable();
        for c in 0..n {
            match observed.peek() {
                Some(&&(oc, s)) if oc == c => {
                    scores.push(s);
                    provenance.push(Provenance::Observed);
                    observed.next();
                }
                _ => {
                    scores.push(model.score(r, c));
                    provenance.push(Provenance::Predicted);
                }
            }
        }
    }
    let dense = DenseUtilityMatrix::new(data.users().to_vec(), data.elements().to_vec(), scores)?;
    Ok(CompletedMatrix { dense, provenance })
}

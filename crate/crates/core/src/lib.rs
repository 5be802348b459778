//! Predicting how much each game design element helps each user, and
//! assigning every user the element with the highest predicted utility.
//!
//! Utility scores observed for some `(user, element)` pairs form a sparse
//! matrix. A rank-`k` factorization `s_ug ≈ x_u · y_g` is fitted to the
//! observed cells by alternating least squares or SGD, the missing cells are
//! filled in, and each user is assigned the row argmax. A simulator supplies
//! populations with known ground truth to evaluate the whole loop.
//!
//! All numeric types are generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below fix the precision.
//!
//! ```
//! use gdm_core::*;
//!
//! let gt = gen_ground_truth::<f64>(20, 6, 2, 7, 5.0, 0.0).unwrap();
//! let data = sparsify(&gt, 0.7, 7).unwrap();
//! let (model, report) = train_als(&data, &Hyperparams::new(2)).unwrap();
//! assert!(report.final_objective < 1e-3);
//! let picks = assign_all(&complete(&model, &data).unwrap());
//! assert_eq!(picks.len(), 20);
//! ```

pub mod assign;
pub mod error;
pub mod ingest;
pub mod io;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod scalar;
pub mod simulate;
pub mod train;

pub use assign::{
    argmax_first, assign_all, assign_from_model, assign_user, popular_element, Assignment, AssignmentSource,
    ColdPolicy,
};
pub use error::{Error, Result};
pub use ingest::{
    accuracy_against, aggregate_events, assignment_accuracy, mae, rmse, split, AggregationConfig,
    EventRecord, EventType, MetricsReport,
};
pub use loss::{
    empirical_loss, objective_gradient, objective_value, squared_loss, FactorGradient, Hyperparams,
};
pub use model::{
    build_sparse_matrix, check_score_range, get_score, DenseUtilityMatrix, DuplicatePolicy, ElementId,
    IdIndex, LatentFactorModel, Observation, SparseUtilityMatrix, TrainingStats, UserId, NONE_ELEMENT,
};
pub use scalar::{dot, Scalar};
pub use simulate::{
    gen_bartle_population, gen_event_log, gen_ground_truth, sparsify, BartleSpec, GroundTruth, TrueFactors,
    BARTLE_TYPES, EVENT_MIX,
};
pub use train::{
    complete, init_model, predict, train, train_als, train_sgd, train_with_restarts, CompletedMatrix,
    Optimizer, Provenance, TrainingReport,
};

pub type Observation64 = Observation<f64>;
pub type SparseMatrix64 = SparseUtilityMatrix<f64>;
pub type DenseMatrix64 = DenseUtilityMatrix<f64>;
pub type Model64 = LatentFactorModel<f64>;
pub type Hyperparams64 = Hyperparams<f64>;
pub type Completed64 = CompletedMatrix<f64>;
pub type Assignment64 = Assignment<f64>;
pub type GroundTruth64 = GroundTruth<f64>;

pub type Observation32 = Observation<f32>;
pub type SparseMatrix32 = SparseUtilityMatrix<f32>;
pub type DenseMatrix32 = DenseUtilityMatrix<f32>;
pub type Model32 = LatentFactorModel<f32>;
pub type Hyperparams32 = Hyperparams<f32>;
pub type Completed32 = CompletedMatrix<f32>;
pub type Assignment32 = Assignment<f32>;
pub type GroundTruth32 = GroundTruth<f32>;

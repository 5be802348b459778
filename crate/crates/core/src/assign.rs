//! The decision rule: each user gets the element with maximum utility.
//!
//! Ties go to the element with the smallest column index, i.e. the one that
//! appeared first in the data.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{ElementId, LatentFactorModel, UserId};
use crate::scalar::Scalar;
use crate::train::{CompletedMatrix, Provenance};

/// Where the winning score came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AssignmentSource {
    ObservedRow,
    ModelPrediction,
}

impl AssignmentSource {
    pub fn as_str(self) -> &'static str {
        match self {
            AssignmentSource::ObservedRow => "observed-row",
            AssignmentSource::ModelPrediction => "model-prediction",
        }
    }
}

impl FromStr for AssignmentSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "observed-row" => Ok(Self::ObservedRow),
            "model-prediction" => Ok(Self::ModelPrediction),
            other => Err(Error::InvalidParameter(format!("assignment source {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment<T> {
    pub user: UserId,
    pub element: ElementId,
    pub score: T,
    pub source: AssignmentSource,
}

/// What to do for a user who had no training observations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ColdPolicy {
    #[default]
    Error,
    /// Fall back to the element with the highest mean observed score.
    GlobalPopularity,
}

impl FromStr for ColdPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(Self::Error),
            "global-popularity" => Ok(Self::GlobalPopularity),
            other => Err(Error::InvalidParameter(format!(
                "cold-start policy {other:?} (expected error or global-popularity)"
            ))),
        }
    }
}

/// Index of the first maximal score, or `None` for an empty slice.
pub fn argmax_first<T: PartialOrd + Copy>(scores: impl IntoIterator<Item = T>) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, s) in scores.into_iter().enumerate() {
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
}

/// Picks the highest-scoring element of one user's row.
///
/// The row is taken as given data, so the result's source is
/// [`AssignmentSource::ObservedRow`].
pub fn assign_user<T: Scalar>(user: &UserId, row: &[(ElementId, T)]) -> Result<Assignment<T>> {
    if let Some((g, _)) = row.iter().find(|(_, s)| !s.is_finite()) {
        return Err(Error::NonFiniteScore {
            user: user.to_string(),
            element: g.to_string(),
        });
    }
    let best = argmax_first(row.iter().map(|&(_, s)| s)).ok_or(Error::EmptyInput("empty row"))?;
    Ok(Assignment {
        user: user.clone(),
        element: row[best].0.clone(),
        score: row[best].1,
        source: AssignmentSource::ObservedRow,
    })
}

/// One assignment per row of a completed matrix, in row order.
pub fn assign_all<T: Scalar>(completed: &CompletedMatrix<T>) -> Vec<Assignment<T>> {
    let dense = &completed.dense;
    (0..dense.n_users())
        .map(|r| {
            let c = argmax_first(dense.row(r).iter().copied()).expect("dense rows are non-empty");
            Assignment {
                user: dense.users()[r].clone(),
                element: dense.elements()[c].clone(),
                score: dense.get(r, c),
                source: match completed.provenance(r, c) {
                    Provenance::Observed => AssignmentSource::ObservedRow,
                    Provenance::Predicted => AssignmentSource::ModelPrediction,
                },
            }
        })
        .collect()
}

/// Argmax of the model's predictions for one user.
///
/// Cold users are detected from the training statistics attached to the
/// model; a model without statistics treats every user as warm.
pub fn assign_from_model<T: Scalar>(
    model: &LatentFactorModel<T>,
    user: &UserId,
    cold_policy: ColdPolicy,
) -> Result<Assignment<T>> {
    let r = model
        .user_index()
        .get(user)
        .ok_or_else(|| Error::UnknownUser(user.to_string()))?;
    let stats = model.stats();
    if stats.is_some_and(|s| s.user_counts[r] == 0) {
        return match cold_policy {
            ColdPolicy::Error => Err(Error::ColdStart(user.to_string())),
            ColdPolicy::GlobalPopularity => {
                popular_choice(model, user).ok_or_else(|| Error::ColdStart(user.to_string()))
            }
        };
    }
    let c = argmax_first((0..model.n_elements()).map(|c| model.score(r, c))).expect("model has elements");
    Ok(Assignment {
        user: user.clone(),
        element: model.elements()[c].clone(),
        score: model.score(r, c),
        source: AssignmentSource::ModelPrediction,
    })
}

fn popular_choice<T: Scalar>(model: &LatentFactorModel<T>, user: &UserId) -> Option<Assignment<T>> {
    let means = &model.stats()?.element_means;
    let c = popular_element(means)?;
    Some(Assignment {
        user: user.clone(),
        element: model.elements()[c].clone(),
        score: means[c]?,
        source: AssignmentSource::ObservedRow,
    })
}

/// Column with the highest mean observed score; unobserved columns never win.
pub fn popular_element<T: Scalar>(means: &[Option<T>]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (c, m) in means.iter().enumerate() {
        if let Some(m) = *m {
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((c, m));
            }
        }
    }
    best.map(|(c, _)| c)
}

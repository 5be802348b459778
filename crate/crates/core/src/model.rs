//! Identifier spaces, observations, utility matrices and the latent-factor model.
//!
//! Row and column order is always the order in which ids first appear, so any
//! computation driven by the same observation file is reproducible.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// Token reserved for the "no design element" option.
pub const NONE_ELEMENT: &str = "__none__";

fn valid_token(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c == ',' || c == '"' || c.is_whitespace())
}

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(Arc<str>);

        impl $name {
            pub fn new(token: &str) -> Result<Self> {
                if valid_token(token) {
                    Ok(Self(Arc::from(token)))
                } else {
                    Err(Error::InvalidId(token.to_string()))
                }
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                Self::new(s)
            }
        }
    };
}

id_type!(
    /// A user (matrix row).
    UserId
);
id_type!(
    /// A game design element (matrix column). [`NONE_ELEMENT`] stands for
    /// assigning no element at all and is treated as an ordinary column.
    ElementId
);

impl ElementId {
    pub fn none() -> Self {
        Self(Arc::from(NONE_ELEMENT))
    }

    pub fn is_none(&self) -> bool {
        &*self.0 == NONE_ELEMENT
    }
}

/// One observed `(user, element, score)` triple.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation<T> {
    pub user: UserId,
    pub element: ElementId,
    pub score: T,
}

impl<T: Scalar> Observation<T> {
    pub fn new(user: &str, element: &str, score: T) -> Result<Self> {
        let user = UserId::new(user)?;
        let element = ElementId::new(element)?;
        if !score.is_finite() {
            return Err(Error::NonFiniteScore {
                user: user.to_string(),
                element: element.to_string(),
            });
        }
        Ok(Self { user, element, score })
    }
}

/// How repeated `(user, element)` observations are merged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DuplicatePolicy {
    /// Arithmetic mean of all repeats.
    #[default]
    Mean,
    /// Keep the final repeat in input order.
    Last,
    Error,
}

impl FromStr for DuplicatePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "last" => Ok(Self::Last),
            "error" => Ok(Self::Error),
            other => Err(Error::InvalidParameter(format!(
                "duplicate policy {other:?} (expected mean, last or error)"
            ))),
        }
    }
}

/// Ordered id list with reverse lookup.
#[derive(Clone, Debug, Default)]
pub struct IdIndex<I> {
    ids: Vec<I>,
    pos: HashMap<I, usize>,
}

impl<I: Clone + Eq + std::hash::Hash> IdIndex<I> {
    pub fn new() -> Self {
        Self {
            ids: Vec::new(),
            pos: HashMap::new(),
        }
    }

    /// Builds an index from ids in order; later repeats are ignored.
    pub fn from_ids(ids: impl IntoIterator<Item = I>) -> Self {
        let mut index = Self::new();
        for id in ids {
            index.intern(id);
        }
        index
    }

    /// Returns the position of `id`, appending it if unseen.
    pub fn intern(&mut self, id: I) -> usize {
        if let Some(&i) = self.pos.get(&id) {
            return i;
        }
        let i = self.ids.len();
        self.pos.insert(id.clone(), i);
        self.ids.push(id);
        i
    }

    pub fn get(&self, id: &I) -> Option<usize> {
        self.pos.get(id).copied()
    }

    pub fn ids(&self) -> &[I] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

impl<I: PartialEq> PartialEq for IdIndex<I> {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids
    }
}

/// Partially observed user × element matrix of utility scores.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseUtilityMatrix<T> {
    users: IdIndex<UserId>,
    elements: IdIndex<ElementId>,
    entries: BTreeMap<(usize, usize), T>,
    rows: Vec<Vec<(usize, T)>>,
    cols: Vec<Vec<(usize, T)>>,
}

/// Builds a sparse matrix whose rows and columns follow first appearance in
/// `observations`.
pub fn build_sparse_matrix<T: Scalar>(
    observations: &[Observation<T>],
    policy: DuplicatePolicy,
) -> Result<SparseUtilityMatrix<T>> {
    SparseUtilityMatrix::build_over(&[], &[], observations, policy)
}

impl<T: Scalar> SparseUtilityMatrix<T> {
    /// Like [`build_sparse_matrix`], but rows and columns start with the given
    /// id lists; ids that only occur in `observations` are appended after them.
    /// Pre-seeded ids without observations become cold rows/columns.
    pub fn build_over(
        users: &[UserId],
        elements: &[ElementId],
        observations: &[Observation<T>],
        policy: DuplicatePolicy,
    ) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptyInput("no observations"));
        }
        let mut user_index = IdIndex::from_ids(users.iter().cloned());
        let mut element_index = IdIndex::from_ids(elements.iter().cloned());
        let mut acc: BTreeMap<(usize, usize), (T, usize)> = BTreeMap::new();
        for obs in observations {
            if !obs.score.is_finite() {
                return Err(Error::NonFiniteScore {
                    user: obs.user.to_string(),
                    element: obs.element.to_string(),
                });
            }
            let r = user_index.intern(obs.user.clone());
            let c = element_index.intern(obs.element.clone());
            match acc.get_mut(&(r, c)) {
                None => {
                    acc.insert((r, c), (obs.score, 1));
                }
                Some(slot) => match policy {
                    DuplicatePolicy::Mean => {
                        slot.0 += obs.score;
                        slot.1 += 1;
                    }
                    DuplicatePolicy::Last => *slot = (obs.score, 1),
                    DuplicatePolicy::Error => {
                        return Err(Error::DuplicatePair {
                            user: obs.user.to_string(),
                            element: obs.element.to_string(),
                        })
                    }
                },
            }
        }
        let entries = acc
            .into_iter()
            .map(|(key, (sum, count))| {
                let score = if count == 1 {
                    sum
                } else {
                    sum / T::from_usize(count).unwrap()
                };
                (key, score)
            })
            .collect();
        Ok(Self::from_parts(user_index, element_index, entries))
    }

    fn from_parts(
        users: IdIndex<UserId>,
        elements: IdIndex<ElementId>,
        entries: BTreeMap<(usize, usize), T>,
    ) -> Self {
        let mut rows = vec![Vec::new(); users.len()];
        let mut cols = vec![Vec::new(); elements.len()];
        for (&(r, c), &s) in &entries {
            rows[r].push((c, s));
            cols[c].push((r, s));
        }
        Self {
            users,
            elements,
            entries,
            rows,
            cols,
        }
    }

    pub fn users(&self) -> &[UserId] {
        self.users.ids()
    }

    pub fn elements(&self) -> &[ElementId] {
        self.elements.ids()
    }

    pub fn user_index(&self) -> &IdIndex<UserId> {
        &self.users
    }

    pub fn element_index(&self) -> &IdIndex<ElementId> {
        &self.elements
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Number of observed cells.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Observed cells as `(row, col, score)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.entries.iter().map(|(&(r, c), &s)| (r, c, s))
    }

    /// Observed `(col, score)` pairs of one row, by column.
    pub fn row(&self, r: usize) -> &[(usize, T)] {
        &self.rows[r]
    }

    /// Observed `(row, score)` pairs of one column, by row.
    pub fn col(&self, c: usize) -> &[(usize, T)] {
        &self.cols[c]
    }

    pub fn get(&self, r: usize, c: usize) -> Option<T> {
        self.entries.get(&(r, c)).copied()
    }

    /// Looks up an observed score by id; `Ok(None)` means the pair is unobserved.
    pub fn get_score(&self, user: &UserId, element: &ElementId) -> Result<Option<T>> {
        let r = self
            .users
            .get(user)
            .ok_or_else(|| Error::UnknownUser(user.to_string()))?;
        let c = self
            .elements
            .get(element)
            .ok_or_else(|| Error::UnknownElement(element.to_string()))?;
        Ok(self.get(r, c))
    }

    /// Observations in row-major order.
    pub fn to_observations(&self) -> Vec<Observation<T>> {
        self.entries()
            .map(|(r, c, s)| Observation {
                user: self.users.ids()[r].clone(),
                element: self.elements.ids()[c].clone(),
                score: s,
            })
            .collect()
    }

    /// Mean observed score per column; `None` for unobserved columns.
    pub fn element_means(&self) -> Vec<Option<T>> {
        self.cols
            .iter()
            .map(|col| {
                (!col.is_empty())
                    .then(|| col.iter().map(|&(_, s)| s).sum::<T>() / T::from_usize(col.len()).unwrap())
            })
            .collect()
    }
}

/// Free-function form of [`SparseUtilityMatrix::get_score`].
pub fn get_score<T: Scalar>(
    matrix: &SparseUtilityMatrix<T>,
    user: &UserId,
    element: &ElementId,
) -> Result<Option<T>> {
    matrix.get_score(user, element)
}

/// Checks every score lies in `[lo, hi]`.
pub fn check_score_range<T: Scalar>(observations: &[Observation<T>], lo: T, hi: T) -> Result<()> {
    for obs in observations {
        if obs.score < lo || obs.score > hi {
            return Err(Error::ScoreOutOfRange {
                user: obs.user.to_string(),
                element: obs.element.to_string(),
                score: obs.score.as_f64(),
                lo: lo.as_f64(),
                hi: hi.as_f64(),
            });
        }
    }
    Ok(())
}

/// Fully populated user × element score grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseUtilityMatrix<T> {
    users: IdIndex<UserId>,
    elements: IdIndex<ElementId>,
    scores: Vec<T>,
}

impl<T: Scalar> DenseUtilityMatrix<T> {
    pub fn new(users: Vec<UserId>, elements: Vec<ElementId>, scores: Vec<T>) -> Result<Self> {
        let users = IdIndex::from_ids(users);
        let elements = IdIndex::from_ids(elements);
        if users.is_empty() || elements.is_empty() {
            return Err(Error::EmptyInput(
                "dense matrix needs at least one row and column",
            ));
        }
        if scores.len() != users.len() * elements.len() {
            return Err(Error::InvalidParameter(format!(
                "{} scores for a {}x{} matrix (ids must be distinct)",
                scores.len(),
                users.len(),
                elements.len()
            )));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            let n = elements.len();
            return Err(Error::NonFiniteScore {
                user: users.ids()[i / n].to_string(),
                element: elements.ids()[i % n].to_string(),
            });
        }
        Ok(Self {
            users,
            elements,
            scores,
        })
    }

    /// Densifies a sparse matrix in which every cell is observed.
    pub fn from_sparse(sparse: &SparseUtilityMatrix<T>) -> Result<Self> {
        for (r, row) in (0..sparse.n_users()).map(|r| (r, sparse.row(r))) {
            if row.len() != sparse.n_elements() {
                return Err(Error::IncompleteRow(sparse.users()[r].to_string()));
            }
        }
        let scores = sparse.entries().map(|(_, _, s)| s).collect();
        Ok(Self {
            users: sparse.users.clone(),
            elements: sparse.elements.clone(),
            scores,
        })
    }

    pub fn users(&self) -> &[UserId] {
        self.users.ids()
    }

    pub fn elements(&self) -> &[ElementId] {
        self.elements.ids()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.scores[r * self.elements.len() + c]
    }

    pub fn row(&self, r: usize) -> &[T] {
        let n = self.elements.len();
        &self.scores[r * n..(r + 1) * n]
    }

    pub fn scores(&self) -> &[T] {
        &self.scores
    }

    /// All cells as observations, row-major.
    pub fn to_observations(&self) -> Vec<Observation<T>> {
        let n = self.n_elements();
        self.scores
            .iter()
            .enumerate()
            .map(|(i, &s)| Observation {
                user: self.users.ids()[i / n].clone(),
                element: self.elements.ids()[i % n].clone(),
                score: s,
            })
            .collect()
    }
}

/// Per-row and per-column statistics of the data a model was trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingStats<T> {
    /// Observation count per user row.
    pub user_counts: Vec<usize>,
    /// Mean observed score per element; `None` when never observed.
    pub element_means: Vec<Option<T>>,
}

impl<T: Scalar> TrainingStats<T> {
    pub fn from_matrix(data: &SparseUtilityMatrix<T>) -> Self {
        Self {
            user_counts: (0..data.n_users()).map(|r| data.row(r).len()).collect(),
            element_means: data.element_means(),
        }
    }
}

/// Rank-`k` factorization: one factor vector per user and per element.
///
/// Factors are stored row-major (`m × k` and `n × k`).
#[derive(Clone, Debug, PartialEq)]
pub struct LatentFactorModel<T> {
    k: usize,
    users: IdIndex<UserId>,
    elements: IdIndex<ElementId>,
    user_factors: Vec<T>,
    element_factors: Vec<T>,
    stats: Option<TrainingStats<T>>,
}

impl<T: Scalar> LatentFactorModel<T> {
    pub fn new(
        k: usize,
        users: Vec<UserId>,
        elements: Vec<ElementId>,
        user_factors: Vec<T>,
        element_factors: Vec<T>,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("rank k must be at least 1".into()));
        }
        let users = IdIndex::from_ids(users);
        let elements = IdIndex::from_ids(elements);
        if users.is_empty() || elements.is_empty() {
            return Err(Error::EmptyInput("model needs at least one user and element"));
        }
        if user_factors.len() != users.len() * k || element_factors.len() != elements.len() * k {
            return Err(Error::InvalidParameter(format!(
                "factor shapes do not match {} users, {} elements, k = {k} (ids must be distinct)",
                users.len(),
                elements.len()
            )));
        }
        if user_factors
            .iter()
            .chain(&element_factors)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidParameter("non-finite factor component".into()));
        }
        Ok(Self {
            k,
            users,
            elements,
            user_factors,
            element_factors,
            stats: None,
        })
    }

    pub(crate) fn from_raw(
        k: usize,
        users: IdIndex<UserId>,
        elements: IdIndex<ElementId>,
        user_factors: Vec<T>,
        element_factors: Vec<T>,
    ) -> Self {
        Self {
            k,
            users,
            elements,
            user_factors,
            element_factors,
            stats: None,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn users(&self) -> &[UserId] {
        self.users.ids()
    }

    pub fn elements(&self) -> &[ElementId] {
        self.elements.ids()
    }

    pub fn user_index(&self) -> &IdIndex<UserId> {
        &self.users
    }

    pub fn element_index(&self) -> &IdIndex<ElementId> {
        &self.elements
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn user_factor(&self, r: usize) -> &[T] {
        &self.user_factors[r * self.k..(r + 1) * self.k]
    }

    pub fn element_factor(&self, c: usize) -> &[T] {
        &self.element_factors[c * self.k..(c + 1) * self.k]
    }

    pub fn user_factors(&self) -> &[T] {
        &self.user_factors
    }

    pub fn element_factors(&self) -> &[T] {
        &self.element_factors
    }

    pub(crate) fn factors_mut(&mut self) -> (&mut [T], &mut [T]) {
        (&mut self.user_factors, &mut self.element_factors)
    }

    pub fn stats(&self) -> Option<&TrainingStats<T>> {
        self.stats.as_ref()
    }

    pub fn with_stats(mut self, stats: TrainingStats<T>) -> Self {
        self.stats = Some(stats);
        self
    }

    /// `x_r · y_c` by index.
    #[inline]
    pub fn score(&self, r: usize, c: usize) -> T {
        dot(self.user_factor(r), self.element_factor(c))
    }

    /// True when the model and `data` share the same ordered user and element lists.
    pub fn same_index(&self, data: &SparseUtilityMatrix<T>) -> bool {
        self.users() == data.users() && self.elements() == data.elements()
    }

    pub(crate) fn require_same_index(&self, data: &SparseUtilityMatrix<T>) -> Result<()> {
        if self.same_index(data) {
            Ok(())
        } else {
            Err(Error::IndexMismatch(format!(
                "model is {}x{}, data is {}x{} (ids and order must agree)",
                self.n_users(),
                self.n_elements(),
                data.n_users(),
                data.n_elements()
            )))
        }
    }

    pub(crate) fn locate(&self, user: &UserId, element: &ElementId) -> Result<(usize, usize)> {
        let r = self
            .users
            .get(user)
            .ok_or_else(|| Error::UnknownUser(user.to_string()))?;
        let c = self
            .elements
            .get(element)
            .ok_or_else(|| Error::UnknownElement(element.to_string()))?;
        Ok((r, c))
    }
}

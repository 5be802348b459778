//! Interaction events to utility scores, holdout splits, and model metrics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assign::Assignment;
use crate::error::{Error, Result};
use crate::model::{ElementId, LatentFactorModel, Observation, UserId};
use crate::scalar::Scalar;
use crate::simulate::GroundTruth;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventType {
    Click,
    Hover,
    View,
}

impl EventType {
    pub const ALL: [EventType; 3] = [EventType::Click, EventType::Hover, EventType::View];

    pub fn as_str(self) -> &'static str {
        match self {
            EventType::Click => "click",
            EventType::Hover => "hover",
            EventType::View => "view",
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "click" => Ok(Self::Click),
            "hover" => Ok(Self::Hover),
            "view" => Ok(Self::View),
            other => Err(Error::UnknownEventType(other.to_string())),
        }
    }
}

/// One raw interaction of a user with an element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventRecord {
    pub user: UserId,
    pub element: ElementId,
    pub event_type: EventType,
}

/// Saturating conversion of weighted event counts into scores:
/// `score = score_max * w / (w + half_saturation)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregationConfig<T> {
    pub click_weight: T,
    pub hover_weight: T,
    pub view_weight: T,
    pub score_max: T,
    pub half_saturation: T,
}

impl<T: Scalar> Default for AggregationConfig<T> {
    fn default() -> Self {
        Self {
            click_weight: T::one(),
            hover_weight: T::lit(0.5),
            view_weight: T::lit(0.2),
            score_max: T::lit(5.0),
            half_saturation: T::lit(10.0),
        }
    }
}

impl<T: Scalar> AggregationConfig<T> {
    pub fn weight(&self, t: EventType) -> T {
        match t {
            EventType::Click => self.click_weight,
            EventType::Hover => self.hover_weight,
            EventType::View => self.view_weight,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [self.click_weight, self.hover_weight, self.view_weight];
        if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::InvalidParameter(
                "event weights must be finite and non-negative".into(),
            ));
        }
        if weights.iter().all(|w| *w == T::zero()) {
            return Err(Error::InvalidParameter("event weights are all zero".into()));
        }
        if !self.half_saturation.is_finite() || self.half_saturation <= T::zero() {
            return Err(Error::InvalidParameter("half_saturation must be positive".into()));
        }
        if !self.score_max.is_finite() || self.score_max <= T::zero() {
            return Err(Error::InvalidParameter("score_max must be positive".into()));
        }
        Ok(())
    }

    pub fn score(&self, mass: T) -> T {
        self.score_max * mass / (mass + self.half_saturation)
    }
}

/// One observation per `(user, element)` pair with positive weighted event
/// mass, ordered by user id then element id. Pairs without events, or whose
/// events all carry zero weight, stay unobserved.
pub fn aggregate_events<T: Scalar>(
    events: &[EventRecord],
    cfg: &AggregationConfig<T>,
) -> Result<Vec<Observation<T>>> {
    cfg.validate()?;
    let mut counts: BTreeMap<(&UserId, &ElementId), [usize; 3]> = BTreeMap::new();
    for e in events {
        counts.entry((&e.user, &e.element)).or_default()[e.event_type as usize] += 1;
    }
    Ok(counts
        .into_iter()
        .filter_map(|((user, element), n)| {
            let mass: T = EventType::ALL
                .iter()
                .zip(n)
                .map(|(&t, c)| cfg.weight(t) * T::from_usize(c).unwrap())
                .sum();
            (mass > T::zero()).then(|| Observation {
                user: user.clone(),
                element: element.clone(),
                score: cfg.score(mass),
            })
        })
        .collect())
}

/// Training and test halves of a split.
pub type Split<T> = (Vec<Observation<T>>, Vec<Observation<T>>);

/// Seeded holdout split. Both sides are non-empty and keep input order.
pub fn split<T: Clone>(observations: &[Observation<T>], train_fraction: f64, seed: u64) -> Result<Split<T>> {
    let n = observations.len();
    if n < 2 {
        return Err(Error::EmptyInput("split needs at least two observations"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(
            "train_fraction must lie in (0, 1)".into(),
        ));
    }
    let n_train = ((train_fraction * n as f64).floor() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train_idx = order[..n_train].to_vec();
    let mut test_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| observations[i].clone()).collect();
    Ok((pick(train_idx), pick(test_idx)))
}

fn residuals<'a, T: Scalar>(
    model: &'a LatentFactorModel<T>,
    test: &'a [Observation<T>],
) -> Result<impl Iterator<Item = T> + 'a> {
    if test.is_empty() {
        return Err(Error::EmptyInput("empty test set"));
    }
    let cells = test
        .iter()
        .map(|o| model.locate(&o.user, &o.element).map(|rc| (rc, o.score)))
        .collect::<Result<Vec<_>>>()?;
    Ok(cells.into_iter().map(|((r, c), s)| model.score(r, c) - s))
}

/// Root mean squared prediction error over `test`.
pub fn rmse<T: Scalar>(model: &LatentFactorModel<T>, test: &[Observation<T>]) -> Result<T> {
    let n = T::from_usize(test.len()).unwrap();
    let sum: T = residuals(model, test)?.map(|d| d * d).sum();
    Ok((sum / n).sqrt())
}

pub fn mae<T: Scalar>(model: &LatentFactorModel<T>, test: &[Observation<T>]) -> Result<T> {
    let n = T::from_usize(test.len()).unwrap();
    let sum: T = residuals(model, test)?.map(|d| d.abs()).sum();
    Ok(sum / n)
}

/// Fraction of users whose predicted element equals the true argmax.
pub fn assignment_accuracy<T: Scalar>(predicted: &[Assignment<T>], truth: &GroundTruth<T>) -> Result<f64> {
    accuracy_against(predicted, &truth.true_assignments)
}

/// [`assignment_accuracy`] against an explicit list of reference assignments.
pub fn accuracy_against<T, U>(predicted: &[Assignment<T>], truth: &[Assignment<U>]) -> Result<f64> {
    let expected: HashMap<&UserId, &ElementId> = truth.iter().map(|a| (&a.user, &a.element)).collect();
    let mut seen = HashSet::new();
    let mut hits = 0usize;
    for a in predicted {
        let want = expected
            .get(&a.user)
            .ok_or_else(|| Error::IndexMismatch(format!("user {} not in ground truth", a.user)))?;
        if !seen.insert(&a.user) {
            return Err(Error::IndexMismatch(format!("user {} assigned twice", a.user)));
        }
        if **want == a.element {
            hits += 1;
        }
    }
    if seen.len() != expected.len() || expected.is_empty() {
        return Err(Error::IndexMismatch(format!(
            "{} predicted users for {} ground-truth users",
            seen.len(),
            expected.len()
        )));
    }
    Ok(hits as f64 / expected.len() as f64)
}

/// Flat `key=value` evaluation report.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub rmse: f64,
    pub mae: f64,
    pub accuracy: Option<f64>,
    pub n_test: usize,
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rmse={}", self.rmse)?;
        writeln!(f, "mae={}", self.mae)?;
        if let Some(acc) = self.accuracy {
            writeln!(f, "accuracy={acc}")?;
        }
        writeln!(f, "n_test={}", self.n_test)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assign::AssignmentSource;
    use crate::model::DenseUtilityMatrix;
    use approx::assert_relative_eq;

    fn ev(u: &str, g: &str, t: EventType) -> EventRecord {
        EventRecord {
            user: UserId::new(u).unwrap(),
            element: ElementId::new(g).unwrap(),
            event_type: t,
        }
    }

    fn obs(u: &str, g: &str, s: f64) -> Observation<f64> {
        Observation::new(u, g, s).unwrap()
    }

    #[test]
    fn half_saturation_point() {
        let cfg = AggregationConfig::<f64>::default();
        let events: Vec<_> = (0..10).map(|_| ev("a", "g", EventType::Click)).collect();
        let out = aggregate_events(&events, &cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].score, 2.5);
        let many: Vec<_> = (0..1000).map(|_| ev("a", "g", EventType::Click)).collect();
        let out = aggregate_events(&many, &cfg).unwrap();
        assert_relative_eq!(out[0].score, 5000.0 / 1010.0, epsilon = 1e-12);
        assert!(out[0].score < 5.0);
    }

    #[test]
    fn mixed_types_weighted() {
        let cfg = AggregationConfig::<f64>::default();
        let events = [
            ev("a", "g", EventType::Click),
            ev("a", "g", EventType::Hover),
            ev("a", "g", EventType::View),
        ];
        let out = aggregate_events(&events, &cfg).unwrap();
        let w = 1.0 + 0.5 + 0.2;
        assert_relative_eq!(out[0].score, 5.0 * w / (w + 10.0), epsilon = 1e-12);
    }

    #[test]
    fn missing_pairs_stay_missing() {
        let cfg = AggregationConfig::<f64>::default();
        let out = aggregate_events(&[ev("a", "g", EventType::Click)], &cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert!(aggregate_events::<f64>(&[], &cfg).unwrap().is_empty());
        let cfg = AggregationConfig {
            view_weight: 0.0,
            ..AggregationConfig::<f64>::default()
        };
        assert!(aggregate_events(&[ev("a", "g", EventType::View)], &cfg)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn unknown_event_token() {
        assert!(matches!(
            "scroll".parse::<EventType>(),
            Err(Error::UnknownEventType(_))
        ));
    }

    #[test]
    fn invalid_config() {
        let cfg = AggregationConfig {
            click_weight: 0.0,
            hover_weight: 0.0,
            view_weight: 0.0,
            ..AggregationConfig::<f64>::default()
        };
        assert!(aggregate_events(&[], &cfg).is_err());
        let cfg = AggregationConfig {
            half_saturation: 0.0,
            ..AggregationConfig::<f64>::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn split_sizes() {
        let data: Vec<_> = (0..10).map(|i| obs(&format!("u{i}"), "g", i as f64)).collect();
        let (tr, te) = split(&data, 0.8, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        assert_eq!(split(&data, 0.8, 1).unwrap(), (tr, te));
        let two = &data[..2];
        let (tr, te) = split(two, 0.99, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (1, 1));
        assert!(split(&data[..1], 0.5, 1).is_err());
        assert!(split(&data, 1.0, 1).is_err());
    }

    fn scalar_model(user_factor: f64) -> LatentFactorModel<f64> {
        LatentFactorModel::new(
            1,
            vec![UserId::new("a").unwrap()],
            vec![ElementId::new("g").unwrap(), ElementId::new("h").unwrap()],
            vec![user_factor],
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn rmse_examples() {
        let model = scalar_model(2.0);
        assert_eq!(rmse(&model, &[obs("a", "g", 2.0)]).unwrap(), 0.0);
        let two = [obs("a", "g", 5.0), obs("a", "h", 6.0)];
        assert_relative_eq!(rmse(&model, &two).unwrap(), (12.5f64).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(mae(&model, &two).unwrap(), 3.5, epsilon = 1e-12);
        let same = [obs("a", "g", 2.75), obs("a", "h", 2.75)];
        assert_relative_eq!(rmse(&model, &same).unwrap(), 0.75, epsilon = 1e-12);
        assert!(rmse(&model, &[]).is_err());
        assert!(matches!(
            rmse(&model, &[obs("b", "g", 1.0)]),
            Err(Error::UnknownUser(_))
        ));
    }

    fn truth() -> GroundTruth<f64> {
        let users: Vec<_> = ["a", "b", "c", "d"]
            .iter()
            .map(|u| UserId::new(u).unwrap())
            .collect();
        let elements = vec![ElementId::new("g").unwrap(), ElementId::new("h").unwrap()];
        let dense =
            DenseUtilityMatrix::new(users, elements, vec![1.0, 0.0, 0.0, 1.0, 2.0, 2.0, 0.0, 3.0]).unwrap();
        GroundTruth::from_dense(dense)
    }

    fn pick(u: &str, g: &str) -> Assignment<f64> {
        Assignment {
            user: UserId::new(u).unwrap(),
            element: ElementId::new(g).unwrap(),
            score: 0.0,
            source: AssignmentSource::ModelPrediction,
        }
    }

    #[test]
    fn accuracy_examples() {
        let gt = truth();
        assert_eq!(assignment_accuracy(&gt.true_assignments, &gt).unwrap(), 1.0);
        // c ties between g and h, truth resolves to g
        let half = [pick("a", "g"), pick("b", "g"), pick("c", "h"), pick("d", "h")];
        assert_eq!(assignment_accuracy(&half, &gt).unwrap(), 0.5);
        assert!(assignment_accuracy(&half[..3], &gt).is_err());
        let dup = [pick("a", "g"), pick("a", "g"), pick("c", "h"), pick("d", "h")];
        assert!(assignment_accuracy(&dup, &gt).is_err());
    }

    #[test]
    fn report_format() {
        let r = MetricsReport {
            rmse: 0.0,
            mae: 0.5,
            accuracy: Some(1.0),
            n_test: 3,
        };
        assert_eq!(r.to_string(), "rmse=0\nmae=0.5\naccuracy=1\nn_test=3\n");
    }
}

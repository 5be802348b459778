//! Synthetic populations with known ground truth, plus sparse sampling and
//! interaction-log generation on top of them.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::assign::{argmax_first, Assignment, AssignmentSource};
use crate::error::{Error, Result};
use crate::ingest::{EventRecord, EventType};
use crate::model::{
    DenseUtilityMatrix, DuplicatePolicy, ElementId, Observation, SparseUtilityMatrix, UserId,
};
use crate::scalar::{dot, Scalar};

const MAX_REDRAWS: usize = 100;

/// The factors a ground-truth matrix was generated from.
///
/// Before noise and clipping, `dense[u][g] == scale * (user[u] · element[g])`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrueFactors<T> {
    pub dim: usize,
    /// `m × dim`, row-major.
    pub user: Vec<T>,
    /// `n × dim`, row-major.
    pub element: Vec<T>,
    pub scale: T,
}

impl<T: Scalar> TrueFactors<T> {
    /// Noise-free, unclipped score of one cell.
    pub fn clean_score(&self, r: usize, c: usize) -> T {
        let d = self.dim;
        self.scale * dot(&self.user[r * d..(r + 1) * d], &self.element[c * d..(c + 1) * d])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth<T> {
    pub dense: DenseUtilityMatrix<T>,
    /// `None` when the truth was loaded from a file rather than generated.
    pub factors: Option<TrueFactors<T>>,
    /// Row argmax of `dense`, first column on ties.
    pub true_assignments: Vec<Assignment<T>>,
}

impl<T: Scalar> GroundTruth<T> {
    pub fn from_dense(dense: DenseUtilityMatrix<T>) -> Self {
        let true_assignments = row_argmax(&dense);
        Self {
            dense,
            factors: None,
            true_assignments,
        }
    }

    pub fn n_users(&self) -> usize {
        self.dense.n_users()
    }

    pub fn n_elements(&self) -> usize {
        self.dense.n_elements()
    }
}

fn row_argmax<T: Scalar>(dense: &DenseUtilityMatrix<T>) -> Vec<Assignment<T>> {
    (0..dense.n_users())
        .map(|r| {
            let c = argmax_first(dense.row(r).iter().copied()).expect("non-empty row");
            Assignment {
                user: dense.users()[r].clone(),
                element: dense.elements()[c].clone(),
                score: dense.get(r, c),
                source: AssignmentSource::ObservedRow,
            }
        })
        .collect()
}

fn numbered_ids<I>(prefix: &str, count: usize, make: fn(&str) -> Result<I>) -> Vec<I> {
    (1..=count)
        .map(|i| make(&format!("{prefix}{i}")).expect("generated ids are valid tokens"))
        .collect()
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite"
        )))
    }
}

fn check_non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be non-negative and finite"
        )))
    }
}

/// Scales raw scores so their maximum is `score_max`, adds Gaussian noise and
/// clips to `[0, score_max]`. One normal draw per cell regardless of `sigma`.
fn noisy_scores<T: Scalar>(raw: &[T], scale: T, score_max: T, sigma: T, rng: &mut ChaCha8Rng) -> Vec<T> {
    raw.iter()
        .map(|&v| {
            let z: f64 = StandardNormal.sample(rng);
            (scale * v + sigma * T::lit(z)).max(T::zero()).min(score_max)
        })
        .collect()
}

/// Random rank-`k` population: users `u1..um`, elements `g1..gn`.
///
/// Factors are uniform on `[0, 1]`; the raw product matrix is rescaled so its
/// maximum equals `score_max`, then noise with standard deviation
/// `noise_sigma` is added and scores are clipped to `[0, score_max]`.
pub fn gen_ground_truth<T: Scalar>(
    m: usize,
    n: usize,
    k: usize,
    seed: u64,
    score_max: T,
    noise_sigma: T,
) -> Result<GroundTruth<T>> {
    if m == 0 || n == 0 || k == 0 {
        return Err(Error::InvalidParameter(
            "users, elements and rank must be at least 1".into(),
        ));
    }
    check_positive("score_max", score_max.as_f64())?;
    check_non_negative("noise_sigma", noise_sigma.as_f64())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |len: usize, rng: &mut ChaCha8Rng| -> Vec<T> {
        (0..len).map(|_| T::lit(rng.random::<f64>())).collect()
    };
    for _ in 0..MAX_REDRAWS {
        let user = draw(m * k, &mut rng);
        let element = draw(n * k, &mut rng);
        let raw: Vec<T> = (0..m * n)
            .map(|i| {
                let (r, c) = (i / n, i % n);
                dot(&user[r * k..(r + 1) * k], &element[c * k..(c + 1) * k])
            })
            .collect();
        let max = raw.iter().copied().fold(T::zero(), T::max);
        if max <= T::zero() {
            continue;
        }
        let scale = score_max / max;
        let scores = noisy_scores(&raw, scale, score_max, noise_sigma, &mut rng);
        let dense = DenseUtilityMatrix::new(
            numbered_ids("u", m, UserId::new),
            numbered_ids("g", n, ElementId::new),
            scores,
        )?;
        let true_assignments = row_argmax(&dense);
        return Ok(GroundTruth {
            dense,
            factors: Some(TrueFactors {
                dim: k,
                user,
                element,
                scale,
            }),
            true_assignments,
        });
    }
    Err(Error::DegenerateDraw(MAX_REDRAWS))
}

/// Player types of the four-category typology, in profile order.
pub const BARTLE_TYPES: [&str; 4] = ["achiever", "explorer", "socializer", "killer"];

/// Population made of the four player types.
#[derive(Clone, Debug, PartialEq)]
pub struct BartleSpec<T> {
    /// Users per type, in [`BARTLE_TYPES`] order.
    pub counts: [usize; 4],
    /// Per element, its affinity to each type.
    pub profiles: Vec<(ElementId, [T; 4])>,
    pub noise_sigma: T,
    pub score_max: T,
    /// Upper bound of the uniform jitter added to every user's affinities.
    pub jitter: T,
    pub seed: u64,
}

impl<T: Scalar> BartleSpec<T> {
    pub fn new(counts: [usize; 4], profiles: Vec<(ElementId, [T; 4])>, seed: u64) -> Self {
        Self {
            counts,
            profiles,
            noise_sigma: T::zero(),
            score_max: T::lit(5.0),
            jitter: T::lit(0.2),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.counts.iter().sum::<usize>() == 0 {
            return Err(Error::InvalidParameter("all type counts are zero".into()));
        }
        if self.profiles.is_empty() {
            return Err(Error::InvalidParameter("no element profiles".into()));
        }
        if self
            .profiles
            .iter()
            .any(|(_, p)| p.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidParameter("non-finite profile affinity".into()));
        }
        check_non_negative("noise_sigma", self.noise_sigma.as_f64())?;
        check_non_negative("jitter", self.jitter.as_f64())?;
        check_positive("score_max", self.score_max.as_f64())
    }
}

/// Users `achiever1.., explorer1.., socializer1.., killer1..` with affinity
/// vector `onehot(type) + U[0, jitter]^4`; a cell's score is
/// `score_max * (affinity · profile) / max`, where `max` is the largest
/// affinity-profile product in the population, followed by noise and clipping.
pub fn gen_bartle_population<T: Scalar>(spec: &BartleSpec<T>) -> Result<GroundTruth<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut users = Vec::new();
    let mut affinity = Vec::new();
    for (t, (&count, name)) in spec.counts.iter().zip(BARTLE_TYPES).enumerate() {
        for i in 1..=count {
            users.push(UserId::new(&format!("{name}{i}"))?);
            for d in 0..4 {
                let base = if d == t { T::one() } else { T::zero() };
                affinity.push(base + spec.jitter * T::lit(rng.random::<f64>()));
            }
        }
    }
    let elements: Vec<ElementId> = spec.profiles.iter().map(|(g, _)| g.clone()).collect();
    let element: Vec<T> = spec
        .profiles
        .iter()
        .flat_map(|(_, p)| p.iter().copied())
        .collect();
    let (m, n) = (users.len(), elements.len());
    let raw: Vec<T> = (0..m * n)
        .map(|i| {
            let (r, c) = (i / n, i % n);
            dot(&affinity[r * 4..(r + 1) * 4], &element[c * 4..(c + 1) * 4])
        })
        .collect();
    let max = raw.iter().copied().fold(T::neg_infinity(), T::max);
    let scale = if max > T::zero() {
        spec.score_max / max
    } else {
        T::zero()
    };
    let scores = noisy_scores(&raw, scale, spec.score_max, spec.noise_sigma, &mut rng);
    let dense = DenseUtilityMatrix::new(users, elements, scores)?;
    let true_assignments = row_argmax(&dense);
    Ok(GroundTruth {
        dense,
        factors: Some(TrueFactors {
            dim: 4,
            user: affinity,
            element,
            scale,
        }),
        true_assignments,
    })
}

/// Samples exactly `max(1, floor(density * m * n))` distinct cells uniformly
/// without replacement. Every user and element of `gt` stays in the index,
/// so unsampled ones become cold rows or columns.
pub fn sparsify<T: Scalar>(gt: &GroundTruth<T>, density: f64, seed: u64) -> Result<SparseUtilityMatrix<T>> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParameter("density must lie in (0, 1]".into()));
    }
    let cells = gt.n_users() * gt.n_elements();
    let count = ((density * cells as f64).floor() as usize).clamp(1, cells);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, cells, count).into_vec();
    picked.sort_unstable();
    let n = gt.n_elements();
    let observations: Vec<Observation<T>> = picked
        .into_iter()
        .map(|i| Observation {
            user: gt.dense.users()[i / n].clone(),
            element: gt.dense.elements()[i % n].clone(),
            score: gt.dense.get(i / n, i % n),
        })
        .collect();
    SparseUtilityMatrix::build_over(
        gt.dense.users(),
        gt.dense.elements(),
        &observations,
        DuplicatePolicy::Error,
    )
}

/// Event-type mix of the simulated interaction log.
pub const EVENT_MIX: [(EventType, f64); 3] = [
    (EventType::Click, 0.5),
    (EventType::Hover, 0.3),
    (EventType::View, 0.2),
];

/// Interaction log in which each cell emits `Poisson(events_per_unit * score)`
/// events, row-major, with types drawn from [`EVENT_MIX`].
pub fn gen_event_log<T: Scalar>(
    gt: &GroundTruth<T>,
    events_per_unit: f64,
    seed: u64,
) -> Result<Vec<EventRecord>> {
    check_positive("events_per_unit", events_per_unit)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = Vec::new();
    for r in 0..gt.n_users() {
        for c in 0..gt.n_elements() {
            let mean = events_per_unit * gt.dense.get(r, c).as_f64();
            if mean <= 0.0 {
                continue;
            }
            let count = Poisson::new(mean)
                .map_err(|e| Error::InvalidParameter(format!("poisson mean {mean}: {e}")))?
                .sample(&mut rng) as u64;
            for _ in 0..count {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut kind = EVENT_MIX[EVENT_MIX.len() - 1].0;
                for &(t, p) in &EVENT_MIX {
                    acc += p;
                    if u < acc {
                        kind = t;
                        break;
                    }
                }
                log.push(EventRecord {
                    user: gt.dense.users()[r].clone(),
                    element: gt.dense.elements()[c].clone(),
                    event_type: kind,
                });
            }
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(t: usize) -> [f64; 4] {
        let mut p = [0.0; 4];
        p[t] = 1.0;
        p
    }

    #[test]
    fn ground_truth_shape_and_range() {
        let gt = gen_ground_truth(6, 7, 2, 11, 5.0, 0.3).unwrap();
        assert_eq!((gt.n_users(), gt.n_elements()), (6, 7));
        assert!(gt.dense.scores().iter().all(|&s| (0.0..=5.0).contains(&s)));
        assert_eq!(gt.true_assignments.len(), 6);
    }

    #[test]
    fn ground_truth_is_deterministic() {
        let a = gen_ground_truth::<f64>(6, 7, 2, 5, 5.0, 0.1).unwrap();
        let b = gen_ground_truth::<f64>(6, 7, 2, 5, 5.0, 0.1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_truth_matches_factors() {
        let gt = gen_ground_truth::<f64>(9, 5, 3, 2, 5.0, 0.0).unwrap();
        let f = gt.factors.as_ref().unwrap();
        let mut max: f64 = 0.0;
        for r in 0..9 {
            for c in 0..5 {
                assert!((gt.dense.get(r, c) - f.clean_score(r, c)).abs() < 1e-12);
                max = max.max(gt.dense.get(r, c));
            }
        }
        assert!((max - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(gen_ground_truth::<f64>(0, 3, 1, 0, 5.0, 0.0).is_err());
        assert!(gen_ground_truth::<f64>(2, 3, 1, 0, 5.0, -1.0).is_err());
    }

    #[test]
    fn bartle_construction_extremes() {
        let g = ElementId::new("quest").unwrap();
        let mut spec = BartleSpec::new([1, 0, 0, 0], vec![(g.clone(), one_hot(0))], 1);
        spec.jitter = 0.0;
        let gt = gen_bartle_population(&spec).unwrap();
        assert_eq!(gt.dense.get(0, 0), 5.0);

        spec.profiles = vec![(g, one_hot(3))];
        let gt = gen_bartle_population(&spec).unwrap();
        assert_eq!(gt.dense.get(0, 0), 0.0);
    }

    #[test]
    fn bartle_one_per_type_matches_types() {
        let profiles = (0..4)
            .map(|t| (ElementId::new(&format!("e{t}")).unwrap(), one_hot(t)))
            .collect();
        let mut spec = BartleSpec::new([1, 1, 1, 1], profiles, 9);
        spec.jitter = 0.0;
        let gt = gen_bartle_population(&spec).unwrap();
        for (t, a) in gt.true_assignments.iter().enumerate() {
            assert_eq!(a.user.as_str(), format!("{}1", BARTLE_TYPES[t]));
            assert_eq!(a.element.as_str(), format!("e{t}"));
        }
    }

    #[test]
    fn bartle_rejects_empty_population() {
        let spec = BartleSpec::<f64>::new([0; 4], vec![(ElementId::new("e").unwrap(), one_hot(0))], 1);
        assert!(gen_bartle_population(&spec).is_err());
        let spec = BartleSpec::<f64>::new([1, 0, 0, 0], vec![], 1);
        assert!(gen_bartle_population(&spec).is_err());
    }

    #[test]
    fn sparsify_counts() {
        let gt = gen_ground_truth::<f64>(6, 7, 2, 1, 5.0, 0.0).unwrap();
        assert_eq!(sparsify(&gt, 1.0, 3).unwrap().nnz(), 42);
        assert_eq!(sparsify(&gt, 0.5, 3).unwrap().nnz(), 21);
        assert_eq!(sparsify(&gt, 1e-6, 3).unwrap().nnz(), 1);
        assert_eq!(sparsify(&gt, 0.5, 3).unwrap(), sparsify(&gt, 0.5, 3).unwrap());
        assert!(sparsify(&gt, 0.0, 3).is_err());
        assert!(sparsify(&gt, 1.5, 3).is_err());
    }

    #[test]
    fn event_log_zero_cells_silent() {
        let dense = DenseUtilityMatrix::new(
            vec![UserId::new("a").unwrap()],
            vec![ElementId::new("z").unwrap(), ElementId::new("p").unwrap()],
            vec![0.0, 3.0],
        )
        .unwrap();
        let gt = GroundTruth::from_dense(dense);
        let log = gen_event_log(&gt, 4.0, 1).unwrap();
        assert!(log.iter().all(|e| e.element.as_str() == "p"));
        assert_eq!(log, gen_event_log(&gt, 4.0, 1).unwrap());
        assert!(gen_event_log(&gt, 0.0, 1).is_err());
    }
}

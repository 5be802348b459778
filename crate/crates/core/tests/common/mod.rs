#![allow(dead_code)]

use gdm_core::*;
use proptest::prelude::*;

pub fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Observations for an `m × n` grid where `cells[i]` is `Some(score)` when
/// cell `i` (row-major) is observed.
pub fn observations(m: usize, n: usize, cells: &[Option<f64>]) -> Vec<Observation64> {
    let (us, gs) = (ids("u", m), ids("g", n));
    cells
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|s| Observation::new(&us[i / n], &gs[i % n], s).unwrap()))
        .collect()
}

/// Sparse matrix over all `m` users and `n` elements, including cold ones.
pub fn matrix(m: usize, n: usize, cells: &[Option<f64>]) -> SparseMatrix64 {
    let us: Vec<UserId> = ids("u", m).iter().map(|s| UserId::new(s).unwrap()).collect();
    let gs: Vec<ElementId> = ids("g", n).iter().map(|s| ElementId::new(s).unwrap()).collect();
    SparseUtilityMatrix::build_over(&us, &gs, &observations(m, n, cells), DuplicatePolicy::Error).unwrap()
}

/// `(m, n, cells)` with at least one observed cell.
pub fn sparse_grid(max_m: usize, max_n: usize) -> impl Strategy<Value = (usize, usize, Vec<Option<f64>>)> {
    (1..=max_m, 1..=max_n)
        .prop_flat_map(|(m, n)| {
            (
                Just(m),
                Just(n),
                prop::collection::vec(prop::option::weighted(0.6, 0.0..5.0f64), m * n),
            )
        })
        .prop_filter("needs an observation", |(_, _, cells)| {
            cells.iter().any(Option::is_some)
        })
}

/// Model with the same index as `data` and the given flat factors.
pub fn model_over(data: &SparseMatrix64, k: usize, uf: Vec<f64>, ef: Vec<f64>) -> Model64 {
    LatentFactorModel::new(k, data.users().to_vec(), data.elements().to_vec(), uf, ef).unwrap()
}

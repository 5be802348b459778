use gdm_core::*;
use proptest::prelude::*;

fn row_of(scores: &[f64]) -> Vec<(ElementId, f64)> {
    scores
        .iter()
        .enumerate()
        .map(|(i, &s)| (ElementId::new(&format!("g{i}")).unwrap(), s))
        .collect()
}

fn pick(scores: &[f64]) -> String {
    let user = UserId::new("u").unwrap();
    assign_user(&user, &row_of(scores)).unwrap().element.to_string()
}

/// Scores from a coarse grid so that ties are common.
fn tie_heavy_row() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0i32..6).prop_map(f64::from), 1..12)
}

proptest! {
    #[test]
    fn increasing_maps_keep_the_choice(row in prop::collection::vec(-5.0..5.0f64, 1..12)) {
        let affine: Vec<f64> = row.iter().map(|x| 2.0 * x + 1.0).collect();
        let cubed: Vec<f64> = row.iter().map(|x| x * x * x).collect();
        prop_assert_eq!(pick(&row), pick(&affine));
        prop_assert_eq!(pick(&row), pick(&cubed));
    }

    #[test]
    fn increasing_maps_keep_the_choice_with_ties(row in tie_heavy_row()) {
        let affine: Vec<f64> = row.iter().map(|x| 2.0 * x + 1.0).collect();
        let cubed: Vec<f64> = row.iter().map(|x| x * x * x).collect();
        prop_assert_eq!(pick(&row), pick(&affine));
        prop_assert_eq!(pick(&row), pick(&cubed));
    }

    #[test]
    fn winner_is_first_maximal_column(row in tie_heavy_row()) {
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let first = row.iter().position(|&v| v == best).unwrap();
        prop_assert_eq!(pick(&row), format!("g{first}"));
    }

    #[test]
    fn permutations_only_move_the_choice_among_ties(
        (row, perm) in tie_heavy_row().prop_flat_map(|r| {
            let n = r.len();
            (Just(r), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
        }),
    ) {
        let user = UserId::new("u").unwrap();
        let labelled = row_of(&row);
        let shuffled: Vec<_> = perm.iter().map(|&i| labelled[i].clone()).collect();
        let a = assign_user(&user, &labelled).unwrap();
        let b = assign_user(&user, &shuffled).unwrap();
        prop_assert_eq!(a.score, b.score);
        prop_assert_eq!(&b, &assign_user(&user, &shuffled).unwrap());
    }

    #[test]
    fn strict_maximum_always_wins(row in prop::collection::vec(-5.0..5.0f64, 1..12), at in any::<prop::sample::Index>()) {
        let mut row = row;
        let i = at.index(row.len());
        row[i] = row.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
        prop_assert_eq!(pick(&row), format!("g{i}"));
    }
}

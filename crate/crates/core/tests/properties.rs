use cfx_core::attributions::{
    bin_cf_shap, cf_shap, game_attribution, norm_cf_freq, shap, Concept, QueryFn,
};
use cfx_core::counterfactuals::{
    enumerate_sparsity_families, is_equally_maximally_sparse, is_maximally_sparse, is_valid,
    is_weakly_maximally_sparse, knn_counterfactuals, max_sparse, uniform_cost, xi,
    CounterfactualSet,
};
use cfx_core::game::{
    banzhaf_normalized, deegan_packel, harsanyi_dividends, holler_packel_normalized, shapley,
    shapley_from_dividends, shapley_permutation_oracle, Coalition, Game, TabularGame,
    UnanimityGame,
};
use cfx_core::metrics::{
    counterfactual_ability_improvement, feature_agreement, kendall_tau, necessity, rank_agreement,
    rbo, spearman, sufficiency, Action, RankBy, Ranking, RecourseParams, RecourseTask,
};
use cfx_core::models::{hybrid, CmpOp, Dataset, Formula, Model, QuantileMap};
use cfx_core::synthetic::{
    discrete_dataset, random_formula_model, random_linear, random_tree_ensemble, truth_table_model,
};
use cfx_core::Rational;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn game_strategy(max: usize) -> impl Strategy<Value = TabularGame> {
    (0..=max).prop_flat_map(|m| {
        prop::collection::vec(-5.0f64..5.0, 1 << m)
            .prop_map(move |v| TabularGame::new(m, v).unwrap())
    })
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cube_point(rng: &mut impl Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(0..2) as f64).collect()
}

/// A boolean model with a query and a valid counterfactual on the cube.
fn boolean_case(seed: u64, m: usize) -> Option<(Model, Vec<f64>, Vec<f64>)> {
    let mut r = rng(seed);
    let model = if r.gen_bool(0.5) {
        truth_table_model(&mut r, m, 0.5)
    } else {
        random_formula_model(&mut r, m, 3)
    };
    let x = cube_point(&mut r, m);
    for _ in 0..64 {
        let xp = cube_point(&mut r, m);
        if is_valid(&model, &x, &xp).unwrap() {
            return Some((model, x, xp));
        }
    }
    None
}

/// A model of any kind over discrete data.
fn tabular_case(seed: u64) -> (Model, Dataset) {
    let mut r = rng(seed);
    let m = r.gen_range(2..=7);
    let levels: Vec<usize> = (0..m).map(|_| r.gen_range(2..=4)).collect();
    let data = discrete_dataset(&mut r, 60, &levels);
    let model = match r.gen_range(0..3) {
        0 => random_tree_ensemble(&mut r, &levels, 4, 3),
        1 => random_linear(&mut r, m),
        _ => random_formula_model(&mut r, m, 3),
    };
    (model, data)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shapley_is_efficient(g in game_strategy(8)) {
        let phi = shapley(&g).unwrap();
        let m = g.players();
        let surplus = g.value(Coalition::full(m)) - g.value(Coalition::EMPTY);
        prop_assert!((phi.sum() - surplus).abs() <= 1e-12);
    }

    #[test]
    fn shapley_oracles_agree(g in game_strategy(8)) {
        let a = shapley(&g).unwrap();
        let b = shapley_permutation_oracle(&g).unwrap();
        let c = shapley_from_dividends(&harsanyi_dividends(&g).unwrap());
        prop_assert!(close(&a, &b, 1e-12));
        prop_assert!(close(&a, &c, 1e-12));
    }

    #[test]
    fn dividends_reconstruct(g in game_strategy(10)) {
        let t = harsanyi_dividends(&g).unwrap();
        for bits in 0..1u32 << g.players() {
            let s = Coalition::from_bits(bits);
            prop_assert!((t.reconstruct(s) - g.value(s)).abs() <= 1e-9);
        }
    }

    #[test]
    fn null_players_get_zero(g in game_strategy(6), j in 0usize..7, binary in any::<bool>()) {
        // player j is inserted and ignored
        let m = g.players() + 1;
        let j = j % m;
        let drop = |s: Coalition| {
            let low = s.bits() & ((1 << j) - 1);
            let high = (s.bits() >> (j + 1)) << j;
            Coalition::from_bits(low | high)
        };
        let ext = TabularGame::from_fn(m, |s| {
            let v = g.value(drop(s));
            if binary { (v > 0.0 && !drop(s).is_empty()) as u8 as f64 } else { v }
        }).unwrap();
        prop_assert_eq!(shapley(&ext).unwrap()[j], 0.0);
        if binary {
            prop_assert_eq!(banzhaf_normalized(&ext).unwrap()[j], 0.0);
            if let Ok(dp) = deegan_packel(&ext) {
                prop_assert_eq!(dp[j], 0.0);
                prop_assert_eq!(holler_packel_normalized(&ext).unwrap()[j], 0.0);
            }
        }
    }

    #[test]
    fn symmetric_players_swap(g in game_strategy(6), i in 0usize..6, j in 0usize..6) {
        let m = g.players();
        prop_assume!(m >= 2);
        let (i, j) = (i % m, j % m);
        prop_assume!(i != j);
        let swap = |s: Coalition| {
            match (s.contains(i), s.contains(j)) {
                (true, false) => s.without(i).with(j),
                (false, true) => s.without(j).with(i),
                _ => s,
            }
        };
        let swapped = TabularGame::from_fn(m, |s| g.value(swap(s))).unwrap();
        let a = shapley(&g).unwrap();
        let b = shapley(&swapped).unwrap();
        prop_assert!((a[i] - b[j]).abs() <= 1e-12 && (a[j] - b[i]).abs() <= 1e-12);
    }

    #[test]
    fn unanimity_games_are_split_equally(m in 1usize..=8, bits in 1u32..256) {
        let dictators = Coalition::from_bits(bits & ((1 << m) - 1));
        prop_assume!(!dictators.is_empty());
        let u = UnanimityGame { players: m, dictators };
        let share = 1.0 / dictators.len() as f64;
        let expect: Vec<f64> =
            (0..m).map(|i| if dictators.contains(i) { share } else { 0.0 }).collect();
        for values in [
            shapley(&u).unwrap(),
            banzhaf_normalized(&u).unwrap(),
            deegan_packel(&u).unwrap(),
            holler_packel_normalized(&u).unwrap(),
        ] {
            prop_assert!(close(&values, &expect, 1e-12));
        }
    }

    #[test]
    fn decision_is_output_above_threshold(seed in any::<u64>()) {
        let (model, data) = tabular_case(seed);
        for row in data.rows() {
            prop_assert_eq!(model.decide(row).unwrap(), model.output(row).unwrap() > model.threshold());
        }
    }

    #[test]
    fn hybrids_are_complementary(seed in any::<u64>(), bits in any::<u32>()) {
        let mut r = rng(seed);
        let m = r.gen_range(1..=10);
        let x: Vec<f64> = (0..m).map(|_| r.gen()).collect();
        let xp: Vec<f64> = (0..m).map(|_| r.gen()).collect();
        let s = Coalition::from_bits(bits & ((1 << m) - 1));
        prop_assert_eq!(hybrid(&x, &xp, s).unwrap(), hybrid(&xp, &x, s.complement(m)).unwrap());
    }

    #[test]
    fn quantiles_are_monotone(seed in any::<u64>(), a in -1.0f64..6.0, b in -1.0f64..6.0) {
        let (_, data) = tabular_case(seed);
        let q = QuantileMap::fit(&data).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for f in 0..data.n_features() {
            prop_assert!(q.to_quantile(f, lo) <= q.to_quantile(f, hi));
        }
    }

    #[test]
    fn model_documents_round_trip(seed in any::<u64>()) {
        let (model, data) = tabular_case(seed);
        let back = Model::from_json(&model.to_json()).unwrap();
        for row in data.rows() {
            prop_assert_eq!(model.output(row).unwrap(), back.output(row).unwrap());
        }
    }

    #[test]
    fn sparsity_hierarchy(seed in any::<u64>(), m in 1usize..=6) {
        let Some((model, x, xp)) = boolean_case(seed, m) else { return Ok(()) };
        let ms = is_maximally_sparse(&model, &x, &xp).unwrap();
        let ems = is_equally_maximally_sparse(&model, &x, &xp).unwrap();
        let wms = is_weakly_maximally_sparse(&model, &x, &xp).unwrap();
        prop_assert!(!ms || ems);
        prop_assert!(!ems || wms);
        let fam = enumerate_sparsity_families(&model, &x, &xp).unwrap();
        prop_assert!(fam.ms.iter().all(|t| fam.wms.contains(t)));
    }

    #[test]
    fn max_sparse_is_the_cheapest_ms_member(seed in any::<u64>(), m in 1usize..=7) {
        let Some((model, x, xp)) = boolean_case(seed, m) else { return Ok(()) };
        let cf = max_sparse(&model, &x, &xp, &uniform_cost).unwrap();
        prop_assert!(cf.valid && is_valid(&model, &x, &cf.point).unwrap());
        prop_assert!(is_maximally_sparse(&model, &x, &cf.point).unwrap());
        let fam = enumerate_sparsity_families(&model, &x, &xp).unwrap();
        prop_assert!(fam.ms.contains(&cf.changed));
        let best = fam.ms.iter().map(|t| t.len()).min().unwrap();
        prop_assert_eq!(cf.changed.len(), best);
    }

    #[test]
    fn dividends_rebuild_the_change_game(seed in any::<u64>(), m in 1usize..=6) {
        let Some((model, x, xp)) = boolean_case(seed, m) else { return Ok(()) };
        let changed = cfx_core::models::changed_features(&x, &xp).unwrap();
        for s in changed.subsets() {
            // move the features in s from x to x′
            let moved = hybrid(&xp, &x, s).unwrap();
            let w = (model.decide(&moved).unwrap() != model.decide(&x).unwrap()) as i128;
            let total: Rational = s.subsets().map(|t| xi(&model, &x, &xp, t).unwrap()).sum();
            prop_assert_eq!(total, Rational::from_integer(w));
        }
    }

    #[test]
    fn knn_sets_are_valid_and_sorted(seed in any::<u64>(), k in 1usize..20) {
        let (model, data) = tabular_case(seed);
        let q = QuantileMap::fit(&data).unwrap();
        let x = data.row(0).to_vec();
        if let Ok(knn) = knn_counterfactuals(&model, &data, &q, &x, k) {
            prop_assert!(knn.set.len() <= k);
            for p in knn.set.points() {
                prop_assert!(is_valid(&model, &x, p).unwrap());
            }
            prop_assert!(knn.distances.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn attributions_are_efficient(seed in any::<u64>(), k in 1usize..10) {
        let (model, data) = tabular_case(seed);
        let q = QuantileMap::fit(&data).unwrap();
        let x = data.row(1).to_vec();
        let Ok(knn) = knn_counterfactuals(&model, &data, &q, &x, k) else { return Ok(()) };
        let one = Rational::from_integer(1);
        let bin: Rational = bin_cf_shap(&model, &x, &knn.set).unwrap().exact.unwrap().iter().sum();
        let norm: Rational = norm_cf_freq(&x, &knn.set).unwrap().exact.unwrap().iter().sum();
        prop_assert_eq!(bin, one);
        prop_assert_eq!(norm, one);
        let s = shap(&model, &x, &data).unwrap();
        let mean = data.rows().iter().map(|r| model.output(r).unwrap()).sum::<f64>() / data.len() as f64;
        prop_assert!((s.values.sum() - (model.output(&x).unwrap() - mean)).abs() <= 1e-9);
    }

    #[test]
    fn unused_features_get_zero(seed in any::<u64>(), k in 1usize..10) {
        // feature 0 never enters the model
        let mut r = rng(seed);
        let m = r.gen_range(2..=6);
        let levels = vec![3; m];
        let data = discrete_dataset(&mut r, 50, &levels);
        let atoms: Vec<Formula> = (1..m)
            .map(|f| Formula::atom(f, CmpOp::Gt, r.gen_range(0..2) as f64))
            .collect();
        let model = Model::formula(m, Formula::Or(atoms)).unwrap();
        let q = QuantileMap::fit(&data).unwrap();
        let x = data.row(0).to_vec();
        let Ok(knn) = knn_counterfactuals(&model, &data, &q, &x, k) else { return Ok(()) };
        prop_assert_eq!(shap(&model, &x, &data).unwrap().values[0], 0.0);
        prop_assert_eq!(cf_shap(&model, &x, &knn.set).unwrap().values[0], 0.0);
        prop_assert_eq!(bin_cf_shap(&model, &x, &knn.set).unwrap().values[0], 0.0);
        for c in Concept::ALL {
            prop_assert_eq!(game_attribution(&model, &x, &knn.set, c, QueryFn::Decision).unwrap().values[0], 0.0);
        }
        let f = game_attribution(&model, &x, &knn.set, Concept::Shapley, QueryFn::Output).unwrap();
        prop_assert_eq!(f.values[0], 0.0);
    }

    #[test]
    fn correlations_are_symmetric(a in prop::collection::vec(0i32..5, 2..10), seed in any::<u64>()) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let mut r = rng(seed);
        let b: Vec<f64> = a.iter().map(|_| r.gen_range(0..5) as f64).collect();
        if let (Ok(ab), Ok(ba)) = (kendall_tau(&a, &b), kendall_tau(&b, &a)) {
            prop_assert!((ab - ba).abs() <= 1e-12);
        }
        if let (Ok(ab), Ok(ba)) = (spearman(&a, &b), spearman(&b, &a)) {
            prop_assert!((ab - ba).abs() <= 1e-12);
        }
        if let Ok(t) = kendall_tau(&a, &a) {
            prop_assert!((t - 1.0).abs() <= 1e-12);
        }
        if let Ok(s) = spearman(&a, &a) {
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
        let (ra, rb) = (Ranking::new(&a, RankBy::Value), Ranking::new(&b, RankBy::Value));
        for k in 1..=a.len() {
            prop_assert!(feature_agreement(&ra, &rb, k).unwrap() >= rank_agreement(&ra, &rb, k).unwrap());
            prop_assert_eq!(feature_agreement(&ra, &rb, k).unwrap(), feature_agreement(&rb, &ra, k).unwrap());
        }
        prop_assert!((rbo(&ra, &rb, 0.9).unwrap() - rbo(&rb, &ra, 0.9).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn rbo_prefers_shared_prefixes(n in 4usize..12, p in 0.1f64..0.95) {
        let base: Vec<f64> = (0..n).map(|i| (n - i) as f64).collect();
        // same top half, reversed tail
        let mut same = base.clone();
        same[n / 2..].reverse();
        // top half swapped with the bottom half
        let mut disjoint = base.clone();
        disjoint.rotate_left(n / 2);
        let r = |v: &[f64]| Ranking::new(v, RankBy::Value);
        prop_assert!(rbo(&r(&base), &r(&same), p).unwrap() > rbo(&r(&base), &r(&disjoint), p).unwrap());
    }

    #[test]
    fn quality_at_full_k_and_monotone(seed in any::<u64>(), k in 1usize..8) {
        let (model, data) = tabular_case(seed);
        let q = QuantileMap::fit(&data).unwrap();
        let x = data.row(2).to_vec();
        let Ok(knn) = knn_counterfactuals(&model, &data, &q, &x, k) else { return Ok(()) };
        let values = norm_cf_freq(&x, &knn.set).unwrap().values;
        let m = x.len();
        prop_assert!(necessity(&model, &x, &values, &knn.set, m, RankBy::Value).unwrap());
        prop_assert!(sufficiency(&model, &x, &values, &knn.set, m, RankBy::Value).unwrap());
        let mut prev = (false, false);
        for kk in 0..=m {
            let now = (
                necessity(&model, &x, &values, &knn.set, kk, RankBy::Value).unwrap(),
                sufficiency(&model, &x, &values, &knn.set, kk, RankBy::Value).unwrap(),
            );
            prop_assert!(now.0 >= prev.0 && now.1 >= prev.1);
            prev = now;
        }
    }

    #[test]
    fn self_comparison_is_a_tie(seed in any::<u64>(), k in 1usize..5) {
        let (model, data) = tabular_case(seed);
        let q = QuantileMap::fit(&data).unwrap();
        let mut sets: Vec<(Vec<f64>, CounterfactualSet)> = Vec::new();
        for i in 0..10 {
            let x = data.row(i).to_vec();
            if let Ok(knn) = knn_counterfactuals(&model, &data, &q, &x, 5) {
                sets.push((x, knn.set));
            }
        }
        prop_assume!(!sets.is_empty());
        let tasks: Vec<RecourseTask> = sets.iter().map(|(x, cfs)| RecourseTask { x, cfs }).collect();
        let values: Vec<Vec<f64>> = sets
            .iter()
            .map(|(x, cfs)| norm_cf_freq(x, cfs).unwrap().values.into_inner())
            .collect();
        let params = RecourseParams { k, action: Action::Random, seed, rank_by: RankBy::Value };
        let rate = counterfactual_ability_improvement(&model, &q, &tasks, &values, &values, params).unwrap();
        prop_assert_eq!(rate, 0.5);
        let again = counterfactual_ability_improvement(&model, &q, &tasks, &values, &values, params).unwrap();
        prop_assert_eq!(rate, again);
    }
}

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use styleinfuse::augment::*;
use styleinfuse::corpus::*;
use styleinfuse::features::FeatureMatrix;
use styleinfuse::ranker::*;

mod common;
use common::sort_oracle;

/// Documents with two features; the judged winner always has the larger
/// first feature.
fn separable(n_docs: usize, n_pairs: usize, seed: u64) -> (JudgmentSet, FeatureMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<String> = (0..n_docs).map(|i| format!("d{i}")).collect();
    let rows: Vec<Vec<Option<f64>>> = (0..n_docs).map(|_| vec![Some(rng.random_range(-3.0..3.0)), Some(rng.random_range(-3.0..3.0))]).collect();
    let judgments = (0..n_pairs)
        .map(|p| {
            let i = rng.random_range(0..n_docs);
            let j = (i + rng.random_range(1..n_docs)) % n_docs;
            let (a, b) = if rows[i][0] > rows[j][0] { (i, j) } else { (j, i) };
            PairJudgment { pair_id: format!("p{p}"), a_id: ids[a].clone(), b_id: ids[b].clone(), topic: format!("t{}", p % 3), tie: false }
        })
        .collect();
    let m = FeatureMatrix::new(ids, vec!["f1".into(), "f2".into()], rows).unwrap().standardize().unwrap();
    (JudgmentSet::new(judgments), m)
}

#[test]
fn separable_pairs_are_learned() {
    let (all, m) = separable(200, 900, 1);
    let train = JudgmentSet::new(all.judgments[..600].to_vec());
    let test = JudgmentSet::new(all.judgments[600..].to_vec());
    let r = train_ranker(&train, &m, &RankerConfig::default()).unwrap();
    let acc = evaluate_holdout(&r, &test, &m).unwrap();
    assert!(acc.accuracy >= 0.99, "{}", acc.accuracy);
    assert!(r.weights[0] > 0.0 && r.weights[0].abs() > 3.0 * r.weights[1].abs());
}

#[test]
fn small_step_descent_never_increases_loss() {
    let (train, m) = separable(50, 150, 3);
    let (diffs, _) = difference_rows(&train, &m, &["f1".into(), "f2".into()]).unwrap();
    let config = RankerConfig { learning_rate: 1e-3, epochs: 200, ..Default::default() };
    let (_, losses) = fit_weights(&diffs, 2, &config).unwrap();
    for w in losses.windows(2) {
        assert!(w[1] <= w[0], "{} then {}", w[0], w[1]);
    }
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let diffs: Vec<Vec<f64>> = (0..40).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    for _ in 0..20 {
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = logistic_gradient(&w, &diffs, 0.01);
        for k in 0..3 {
            let h = 1e-6;
            let (mut up, mut dn) = (w.clone(), w.clone());
            up[k] += h;
            dn[k] -= h;
            let fd = (logistic_loss(&up, &diffs, 0.01) - logistic_loss(&dn, &diffs, 0.01)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7 * (1.0 + g[k].abs()));
        }
    }
}

#[test]
fn folds_partition_and_stratify() {
    let (j, _) = separable(60, 90, 5);
    let folds = stratified_folds(&j, 5, 0).unwrap();
    let mut ids: Vec<String> = folds.iter().flat_map(|f| f.iter().map(|p| p.pair_id.clone())).collect();
    ids.sort();
    let mut all: Vec<String> = j.iter().map(|p| p.pair_id.clone()).collect();
    all.sort();
    assert_eq!(ids, all);
    for f in &folds {
        assert_eq!(f.len(), 18);
        for t in ["t0", "t1", "t2"] {
            assert_eq!(f.iter().filter(|p| p.topic == t).count(), 6);
        }
    }
    assert_eq!(stratified_folds(&j, 5, 0).unwrap(), folds);
}

#[test]
fn ranker_round_trips_and_scores_complementarily() {
    let (train, m) = separable(30, 80, 6);
    let r = train_ranker(&train, &m, &RankerConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    r.save(dir.path().join("r.json")).unwrap();
    let back = Ranker::load(dir.path().join("r.json")).unwrap();
    assert_eq!(back, r);
    let (a, b) = (m.feature_vector("d0").unwrap(), m.feature_vector("d1").unwrap());
    let s = r.score(TextRef::new("d0", &a), TextRef::new("d1", &b)).unwrap();
    let t = r.score(TextRef::new("d1", &b), TextRef::new("d0", &a)).unwrap();
    assert!((s + t - 1.0).abs() < 1e-12);
}

#[test]
fn topk_on_random_pool_of_100() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pool: Vec<(String, Vec<f64>)> = (0..100).map(|i| (format!("p{i:03}"), (0..8).map(|_| rng.random_range(-1.0..1.0)).collect())).collect();
    for _ in 0..20 {
        let q: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got: Vec<String> = topk_similar(&q, &pool, 5).unwrap().into_iter().map(|n| n.id).collect();
        assert_eq!(got, sort_oracle(&q, &pool, 5));
    }
}

proptest! {
    #[test]
    fn topk_matches_sort_oracle(
        pool in prop::collection::vec(prop::collection::vec(-3i8..3, 3), 1..40),
        q in prop::collection::vec(-3i8..3, 3),
        k in 1usize..10,
    ) {
        // Small integer coordinates force many exact ties.
        let pool: Vec<(String, Vec<f64>)> = pool.iter().enumerate().map(|(i, v)| (format!("x{:02}", (i * 7) % 41), v.iter().map(|&c| c as f64).collect())).collect();
        let mut seen = std::collections::HashSet::new();
        let pool: Vec<_> = pool.into_iter().filter(|(id, _)| seen.insert(id.clone())).collect();
        let q: Vec<f64> = q.iter().map(|&c| c as f64).collect();
        let got: Vec<String> = topk_similar(&q, &pool, k).unwrap().into_iter().map(|n| n.id).collect();
        prop_assert_eq!(got, sort_oracle(&q, &pool, k));
    }
}

#[test]
fn augmentation_adds_scored_pairs_with_provenance() {
    let f = styleinfuse::synth::fixture(&styleinfuse::synth::FixtureSpec { external_docs: 15, ..Default::default() }).unwrap();
    let merged = f.corpus.merge(&f.external).unwrap();
    let reg = styleinfuse::FeatureRegistry::new(["word_count", "flesch"]).unwrap();
    let m = styleinfuse::features::build_matrix(&merged, &reg, true).unwrap();
    let ranker = train_ranker(f.corpus.judgments(), &m, &RankerConfig::default()).unwrap();
    let config = AugmentConfig { k: 3, min_score: 0.6, ..Default::default() };
    let out = augment_pairs(&f.external, &f.corpus, &m, &ranker, &config).unwrap();
    assert_eq!(out.candidates_scanned, 15);
    assert!(!out.judgments.is_empty());
    for (j, p) in out.judgments.iter().zip(&out.provenance) {
        assert!(p.score > 0.6);
        assert_eq!(j.a_id, p.candidate_id);
        assert_eq!(j.topic, f.corpus.document(&p.neighbor_id).unwrap().topic);
        let (a, b) = (m.feature_vector(&j.a_id).unwrap(), m.feature_vector(&j.b_id).unwrap());
        assert!((ranker.score(TextRef::anonymous(&a), TextRef::anonymous(&b)).unwrap() - p.score).abs() < 1e-12);
    }
    assert_eq!(augment_pairs(&f.external, &f.corpus, &m, &ranker, &config).unwrap(), out);
    let capped = augment_pairs(&f.external, &f.corpus, &m, &ranker, &AugmentConfig { max_new_pairs: Some(2), ..config }).unwrap();
    assert!(capped.capped && capped.judgments.len() == 2);
    assert_eq!(capped.provenance[..], out.provenance[..2]);
    let report = augment_report(&out);
    assert_eq!(report.pairs_added, out.judgments.len());
}

mod oracles;

use std::collections::BTreeMap;
use std::path::PathBuf;

use dehate_core::evaluate::{iou, leaderboard, leaderboard_csv, score, IoUReport, Outcome};
use dehate_core::manifest::{Manifest, ManifestRow, Split};
use dehate_core::raster::BinaryMask;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mask_from(bits: Vec<bool>) -> BinaryMask {
    BinaryMask::new(bits.len(), 1, bits).unwrap()
}

proptest! {
    #[test]
    fn iou_matches_counting(p in prop::collection::vec(any::<bool>(), 40),
                            t in prop::collection::vec(any::<bool>(), 40)) {
        let got = iou(&mask_from(p.clone()), &mask_from(t.clone())).unwrap();
        prop_assert_eq!(got, oracles::count_iou(&p, &t));
        prop_assert!((0.0..=1.0).contains(&got));
        let flipped = iou(&mask_from(t), &mask_from(p)).unwrap();
        prop_assert_eq!(got, flipped);
    }

    #[test]
    fn adding_a_truth_pixel_never_lowers_iou(p in prop::collection::vec(any::<bool>(), 30),
                                             t in prop::collection::vec(any::<bool>(), 30),
                                             k in 0usize..30) {
        prop_assume!(t[k]);
        let before = iou(&mask_from(p.clone()), &mask_from(t.clone())).unwrap();
        let mut grown = p;
        grown[k] = true;
        let after = iou(&mask_from(grown), &mask_from(t)).unwrap();
        prop_assert!(after >= before);
    }

    #[test]
    fn self_iou_is_one(p in prop::collection::vec(any::<bool>(), 1..60)) {
        let m = mask_from(p);
        prop_assert_eq!(iou(&m, &m).unwrap(), 1.0);
    }
}

#[test]
fn empty_masks_score_one_and_dims_must_match() {
    assert_eq!(iou(&BinaryMask::empty(3, 3), &BinaryMask::empty(3, 3)).unwrap(), 1.0);
    assert_eq!(iou(&BinaryMask::full(3, 3), &BinaryMask::empty(3, 3)).unwrap(), 0.0);
    assert!(iou(&BinaryMask::empty(3, 3), &BinaryMask::empty(3, 4)).is_err());
}

fn row(id: &str, mask: &str) -> ManifestRow {
    ManifestRow {
        id: id.into(),
        text: "t".into(),
        normalized_text: None,
        image: PathBuf::from(format!("{id}.img.png")),
        blurred: None,
        mask: Some(PathBuf::from(mask)),
        attention: None,
        split: Split::Test,
    }
}

#[test]
fn scoring_directory_counts_missing_as_zero() {
    let dir = tempfile::tempdir().unwrap();
    let truth_dir = dir.path().join("truth");
    let pred_dir = dir.path().join("pred");
    std::fs::create_dir_all(&truth_dir).unwrap();
    std::fs::create_dir_all(&pred_dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rows = Vec::new();
    let mut expected = BTreeMap::new();
    for i in 0..6 {
        let id = format!("r{i}");
        let t: Vec<bool> = (0..64).map(|_| rng.gen_bool(0.4)).collect();
        let p: Vec<bool> = (0..64).map(|_| rng.gen_bool(0.4)).collect();
        BinaryMask::new(8, 8, t.clone()).unwrap().write_png(truth_dir.join(format!("{id}.png"))).unwrap();
        if i != 4 {
            BinaryMask::new(8, 8, p.clone()).unwrap().write_png(pred_dir.join(format!("{id}.png"))).unwrap();
            expected.insert(id.clone(), oracles::count_iou(&p, &t));
        } else {
            expected.insert(id.clone(), 0.0);
        }
        rows.push(row(&id, &format!("truth/{id}.png")));
    }
    let manifest = Manifest { rows, root: dir.path().to_path_buf() };
    let refs: Vec<&ManifestRow> = manifest.rows.iter().collect();
    let report = score(&pred_dir, &manifest, &refs).unwrap();
    assert_eq!(report.missing, vec!["r4".to_string()]);
    assert_eq!(report.per_instance, expected);
    let mean = expected.values().sum::<f64>() / 6.0;
    assert!((report.mean - mean).abs() < 1e-12);
}

#[test]
fn identical_predictions_score_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rows = Vec::new();
    for i in 0..10 {
        let id = format!("x{i}");
        let bits: Vec<bool> = (0..100).map(|_| rng.gen_bool(0.3)).collect();
        BinaryMask::new(10, 10, bits).unwrap().write_png(dir.path().join(format!("{id}.png"))).unwrap();
        rows.push(row(&id, &format!("{id}.png")));
    }
    let manifest = Manifest { rows, root: dir.path().to_path_buf() };
    let refs: Vec<&ManifestRow> = manifest.rows.iter().collect();
    let report = score(dir.path(), &manifest, &refs).unwrap();
    assert_eq!(report.mean, 1.0);
    assert!(report.missing.is_empty());
}

/// Each team predicts the first `k` of 100 truth pixels, so its IoU is k/100.
#[test]
fn six_team_leaderboard() {
    let truth: Vec<bool> = (0..400).map(|i| i % 4 == 0).collect();
    let teams = [("Alpha", 55), ("Beta", 51), ("Gamma", 49), ("Delta", 48), ("Epsilon", 47), ("Baseline", 44)];
    let mut reports = BTreeMap::new();
    for (team, k) in teams {
        let mut seen = 0;
        let pred: Vec<bool> = truth
            .iter()
            .map(|&t| {
                let on = t && seen < k;
                seen += usize::from(t);
                on
            })
            .collect();
        let v = iou(&mask_from(pred), &mask_from(truth.clone())).unwrap();
        let mut outcomes = BTreeMap::new();
        outcomes.insert("only".to_string(), Outcome::Scored(v));
        reports.insert(team.to_string(), IoUReport::from_outcomes(outcomes));
    }
    let board = leaderboard(&reports);
    let got: Vec<(usize, &str, f64)> = board.iter().map(|e| (e.rank, e.team.as_str(), e.iou)).collect();
    assert_eq!(
        got,
        vec![
            (1, "Alpha", 0.55),
            (2, "Beta", 0.51),
            (3, "Gamma", 0.49),
            (4, "Delta", 0.48),
            (5, "Epsilon", 0.47),
            (6, "Baseline", 0.44)
        ]
    );
    let csv = leaderboard_csv(&board);
    assert!(csv.starts_with("rank,team,iou\n1,Alpha,0.55\n"));
    assert!(csv.ends_with("6,Baseline,0.44\n"));
}

#[test]
fn ties_break_by_team_name() {
    let mut reports = BTreeMap::new();
    for team in ["zeta", "alpha"] {
        reports.insert(team.to_string(), IoUReport { mean: 0.5, ..Default::default() });
    }
    let board = leaderboard(&reports);
    assert_eq!(board[0].team, "alpha");
    assert_eq!(board[1].rank, 2);
}

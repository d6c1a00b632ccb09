use std::path::PathBuf;

use dehate_core::manifest::{load_manifest, parse_manifest, write_manifest, AttentionFiles, ManifestRow, Split};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn maybe(rng: &mut ChaCha8Rng, s: String) -> Option<PathBuf> {
    rng.gen_bool(0.5).then(|| PathBuf::from(s))
}

fn random_row(rng: &mut ChaCha8Rng, i: usize) -> ManifestRow {
    let split = if rng.gen_bool(0.3) { Split::Test } else { Split::Train };
    let mut row = ManifestRow {
        id: format!("id-{i}"),
        text: format!("tweet \"{i}\" with, punctuation\tand unicode é"),
        normalized_text: rng.gen_bool(0.5).then(|| format!("tweet {i}")),
        image: PathBuf::from(format!("img/{i}.png")),
        blurred: maybe(rng, format!("blur/{i}.png")),
        mask: maybe(rng, format!("mask/{i}.png")),
        attention: rng.gen_bool(0.5).then(|| AttentionFiles {
            tensor: PathBuf::from(format!("att/{i}.dht")),
            meta: PathBuf::from(format!("att/{i}.json")),
        }),
        split,
    };
    if split == Split::Test && !row.has_truth() {
        row.mask = Some(PathBuf::from(format!("mask/{i}.png")));
    }
    row
}

#[test]
fn fifty_rows_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let rows: Vec<ManifestRow> = (0..50).map(|i| random_row(&mut rng, i)).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.jsonl");
    write_manifest(&rows, &path).unwrap();
    let back = load_manifest(&path).unwrap();
    assert_eq!(back.rows, rows);
    assert_eq!(back.root, dir.path());
    let counts = back.validate().unwrap();
    assert_eq!(counts.total, 50);
    assert_eq!(counts.train + counts.test, 50);
}

#[test]
fn relative_paths_resolve_against_manifest_dir() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.jsonl");
    std::fs::write(&path, r#"{"id":"a","text":"t","image":"x.png","split":"train"}"#).unwrap();
    let m = load_manifest(&path).unwrap();
    assert_eq!(m.resolve(&m.rows[0].image), dir.path().join("x.png"));
}

#[test]
fn duplicate_ids_report_the_line() {
    let text = concat!(
        r#"{"id":"a","text":"t","image":"x.png","split":"train"}"#,
        "\n",
        r#"{"id":"a","text":"u","image":"y.png","split":"train"}"#
    );
    let err = parse_manifest(text).unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn test_rows_need_ground_truth() {
    let rows = parse_manifest(r#"{"id":"a","text":"t","image":"x.png","split":"test"}"#).unwrap();
    let m = dehate_core::manifest::Manifest { rows, root: PathBuf::new() };
    assert!(m.validate().is_err());
}

#[test]
fn unknown_split_rejected() {
    assert!(parse_manifest(r#"{"id":"a","text":"t","image":"x.png","split":"dev"}"#).is_err());
}

// SPDX-License-Identifier: Apache-2.0

mod common;

use std::fs;
use std::path::Path;

use jitdp::formats::{
    model_to_string, pr_curve_csv, read_json, write_report, FormatError, ReportFile, REPORT_VERSION,
};
use jitdp::{load_embeddings, load_model, save_model};
use jitdp_core::eval::{evaluate, ConfusionMatrix};
use jitdp_core::fusion::{CombineMethod, Dims, FusionModel, Hyperparameters, Modalities};
use proptest::prelude::*;

const H1: &str = "0123456789abcdef0123456789abcdef01234567";
const H2: &str = "89abcdef0123456789abcdef0123456789abcdef";
const H3: &str = "fedcba9876543210fedcba9876543210fedcba9876543210fedcba9876543210";

fn small_model(method: CombineMethod, seed: u64) -> FusionModel {
    let hyper = Hyperparameters {
        d: 4,
        hidden: vec![3],
        seed,
        ..Hyperparameters::default()
    };
    FusionModel::new(method, Dims::new(6), hyper).unwrap()
}

fn embedding_line(hash: &str, dim: usize, fill: f64) -> String {
    let vector: Vec<f64> = (0..dim).map(|i| fill + i as f64 * 0.125).collect();
    serde_json::json!({ "hash": hash, "dim": dim, "vector": vector }).to_string()
}

fn write_lines(path: &Path, lines: &[String]) {
    fs::write(path, lines.join("\n") + "\n").unwrap();
}

#[test]
fn model_round_trip_is_byte_identical() {
    let dir = common::out_dir();
    for method in CombineMethod::ALL {
        let path = dir.path().join("model.json");
        let model = small_model(method, 3);
        save_model(&model, &path).unwrap();
        let first = fs::read(&path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
        save_model(&loaded, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }
}

#[test]
fn truncated_model_is_corrupt() {
    let dir = common::out_dir();
    let path = dir.path().join("model.json");
    let text = model_to_string(&small_model(CombineMethod::UnimodalConcat, 1));
    fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(matches!(load_model(&path), Err(FormatError::CorruptFile { .. })));
}

#[test]
fn wrong_shape_is_corrupt() {
    let dir = common::out_dir();
    let path = dir.path().join("model.json");
    let mut value: serde_json::Value =
        serde_json::from_str(&model_to_string(&small_model(CombineMethod::AttentionSum, 1))).unwrap();
    value["parameters"][0]["values"].as_array_mut().unwrap().pop();
    fs::write(&path, value.to_string()).unwrap();
    assert!(matches!(load_model(&path), Err(FormatError::CorruptFile { .. })));
}

#[test]
fn future_model_version_is_rejected() {
    let dir = common::out_dir();
    let path = dir.path().join("model.json");
    let mut value: serde_json::Value =
        serde_json::from_str(&model_to_string(&small_model(CombineMethod::GatingSum, 1))).unwrap();
    value["format_version"] = 999.into();
    fs::write(&path, value.to_string()).unwrap();
    match load_model(&path) {
        Err(FormatError::VersionMismatch { found, .. }) => assert_eq!(found, 999),
        other => panic!("expected a version mismatch, got {other:?}"),
    }
}

#[test]
fn embeddings_load_by_hash() {
    let dir = common::out_dir();
    let path = dir.path().join("emb.jsonl");
    write_lines(
        &path,
        &[embedding_line(H1, 4, 0.0), embedding_line(H2, 4, 1.0), embedding_line(H3, 4, 2.0)],
    );
    let map = load_embeddings(&path, 4).unwrap();
    assert_eq!(map.len(), 3);
    assert_eq!(map[H2].values, vec![1.0, 1.125, 1.25, 1.375]);
    assert!(map.values().all(|v| v.dim == 4 && v.is_valid()));
}

#[test]
fn embedding_dimension_mismatch_names_the_commit() {
    let dir = common::out_dir();
    let path = dir.path().join("emb.jsonl");
    write_lines(&path, &[embedding_line(H1, 768, 0.0), embedding_line(H2, 767, 0.0)]);
    match load_embeddings(&path, 768) {
        Err(FormatError::DimMismatch { hash, expected, found }) => {
            assert_eq!((hash.as_str(), expected, found), (H2, 768, 767));
        }
        other => panic!("expected a dimension mismatch, got {other:?}"),
    }
}

#[test]
fn declared_dim_must_match_vector_length() {
    let dir = common::out_dir();
    let path = dir.path().join("emb.jsonl");
    let line = serde_json::json!({ "hash": H1, "dim": 3, "vector": [0.0, 1.0] }).to_string();
    write_lines(&path, &[line]);
    assert!(matches!(load_embeddings(&path, 3), Err(FormatError::DimMismatch { .. })));
}

#[test]
fn duplicate_embedding_is_rejected() {
    let dir = common::out_dir();
    let path = dir.path().join("emb.jsonl");
    write_lines(&path, &[embedding_line(H1, 2, 0.0), embedding_line(H1, 2, 1.0)]);
    match load_embeddings(&path, 2) {
        Err(FormatError::DuplicateHash { line, hash, .. }) => assert_eq!((line, hash.as_str()), (2, H1)),
        other => panic!("expected a duplicate, got {other:?}"),
    }
}

#[test]
fn malformed_embedding_lines_carry_line_numbers() {
    let dir = common::out_dir();
    let path = dir.path().join("emb.jsonl");
    let cases = [
        "{not json".to_string(),
        serde_json::json!({ "hash": H1, "dim": 2 }).to_string(),
        serde_json::json!({ "hash": "HEAD", "dim": 2, "vector": [0.0, 0.0] }).to_string(),
        serde_json::json!({ "hash": H1.to_uppercase(), "dim": 2, "vector": [0.0, 0.0] }).to_string(),
    ];
    for bad in cases {
        write_lines(&path, &[embedding_line(H2, 2, 0.0), bad.clone()]);
        match load_embeddings(&path, 2) {
            Err(FormatError::MalformedLine { line, .. }) => assert_eq!(line, 2, "{bad}"),
            other => panic!("{bad}: expected a malformed line, got {other:?}"),
        }
    }
}

fn report_for(scores: &[f64], labels: &[u8]) -> ReportFile {
    let r = evaluate(scores, labels, 0.5).unwrap();
    ReportFile {
        format_version: REPORT_VERSION,
        model: "model.json".into(),
        combine_method: CombineMethod::AttentionSum,
        modalities: Modalities::All,
        part: "test".into(),
        instances: scores.len(),
        threshold: 0.5,
        confusion: r.confusion,
        accuracy: r.accuracy,
        precision: r.precision,
        recall: r.recall,
        f1: r.f1,
        pr_auc: r.pr_auc,
        pr_points: r.pr_points,
    }
}

#[test]
fn report_round_trip() {
    let dir = common::out_dir();
    let (json, csv) = (dir.path().join("report.json"), dir.path().join("pr_curve.csv"));
    let report = report_for(&[0.9, 0.8, 0.3, 0.1, 0.8], &[1, 0, 1, 0, 1]);
    write_report(&report, &json, &csv).unwrap();
    let back: ReportFile = read_json(&json).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.eval_report().confusion, report.confusion);
    let text = fs::read_to_string(&json).unwrap();
    assert!(text.contains("\"combine_method\": \"attention_sum\""));
    for key in ["accuracy", "precision", "recall", "f1", "pr_auc"] {
        assert!(text.contains(&format!("\"{key}\"")), "{key}");
    }
    // Distinct scores 0.9, 0.8, 0.3, 0.1 give four curve points.
    let rows = fs::read_to_string(&csv).unwrap().lines().count();
    assert_eq!(rows, 1 + 4);
}

#[test]
fn report_without_positives_has_empty_curve() {
    let dir = common::out_dir();
    let (json, csv) = (dir.path().join("report.json"), dir.path().join("pr_curve.csv"));
    let report = report_for(&[0.2, 0.7], &[0, 0]);
    assert_eq!(report.confusion, ConfusionMatrix { tp: 0, fp: 1, fn_: 0, tn: 1 });
    write_report(&report, &json, &csv).unwrap();
    assert_eq!(fs::read_to_string(&csv).unwrap(), "threshold,recall,precision\n");
    assert_eq!(pr_curve_csv(&[]).lines().count(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn saved_models_reload_exactly(seed in any::<u64>(), method in 0usize..3) {
        let method = CombineMethod::ALL[method];
        let model = small_model(method, seed);
        let text = model_to_string(&model);
        let back = jitdp::formats::parse_model(&text, Path::new("model.json")).unwrap();
        prop_assert_eq!(model_to_string(&back), text);
        prop_assert_eq!(back, model);
    }
}

use std::fs;

use critfield::experiment_harness::{
    emit_report, run_mean_experiment, substream_seed, ExperimentConfig, WeightConfig,
};
use proptest::prelude::*;

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        m: 1,
        hbar: vec![1.0 / 16.0, 1.0 / 32.0],
        r: vec![0.5, 1.0],
        samples: 120,
        seed: 7,
        threads: 2,
        ..ExperimentConfig::default()
    }
}

#[test]
fn emitted_files_agree_and_reproduce() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    let rep = run_mean_experiment(&cfg).unwrap();
    rep.require_invariants().unwrap();
    assert_eq!(rep.cells.len(), 4);
    let files = emit_report(&rep, &dir.path().join("a"), true).unwrap();
    for name in ["counts.csv", "summary.csv", "summary.jsonl", "report.json", "timing.json", "hist_cell0.svg"] {
        assert!(files.iter().any(|f| f.ends_with(name)), "{name} missing");
    }

    let csv_text = fs::read_to_string(dir.path().join("a/summary.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let header = reader.headers().unwrap().clone();
    let jsonl = fs::read_to_string(dir.path().join("a/summary.jsonl")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), jsonl.lines().count());
    for (row, line) in rows.iter().zip(jsonl.lines()) {
        let obj: serde_json::Value = serde_json::from_str(line).unwrap();
        for (key, field) in header.iter().zip(row.iter()) {
            let v = &obj[key];
            if field.is_empty() {
                assert!(v.is_null(), "{key}");
            } else {
                assert_eq!(field.parse::<f64>().unwrap(), v.as_f64().unwrap(), "{key}");
            }
        }
    }

    let counts = fs::read_to_string(dir.path().join("a/counts.csv")).unwrap();
    assert_eq!(counts.lines().count(), 1 + 4 * cfg.samples);

    let svg = fs::read_to_string(dir.path().join("a/hist_cell0.svg")).unwrap();
    assert!(svg.contains("bins=ceil(sqrt(n))=11; n=120"), "{svg}");

    let again = run_mean_experiment(&ExperimentConfig { threads: 1, ..cfg }).unwrap();
    emit_report(&again, &dir.path().join("b"), false).unwrap();
    for name in ["counts.csv", "summary.csv", "summary.jsonl"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(name)).unwrap(),
            fs::read(dir.path().join("b").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn standardized_counts_have_unit_variance() {
    let rep = run_mean_experiment(&small_config()).unwrap();
    for c in &rep.cells {
        let xs: Vec<f64> = c.counts.iter().map(|&(_, k)| k as f64).collect();
        let n = xs.len() as f64;
        let z: Vec<f64> = xs.iter().map(|x| (x - c.digest.mean) / c.digest.sd()).collect();
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 1e-12, "cell {}: mean {mean}", c.cell_id);
        assert!((var - 1.0).abs() < 1e-12, "cell {}: variance {var}", c.cell_id);
    }
}

#[test]
fn config_files_round_trip() {
    let cfg = ExperimentConfig {
        weight: WeightConfig::Bump {
            radius: 1.5,
            amplitude: 2.0,
            eps_cut: 1e-10,
        },
        ..small_config()
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, cfg.to_toml()).unwrap();
    let back = ExperimentConfig::load(&path).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.settings_hash(), cfg.settings_hash());
    assert_eq!(ExperimentConfig::load(&dir.path().join("missing.toml")).unwrap_err().exit_code(), 4);
}

proptest! {
    #[test]
    fn substreams_are_stable_and_separated(master in any::<u64>(), key in any::<u64>()) {
        prop_assert_eq!(substream_seed(master, "field", key), substream_seed(master, "field", key));
        prop_assert_ne!(substream_seed(master, "field", key), substream_seed(master, "density", key));
        prop_assert_ne!(substream_seed(master, "field", key), substream_seed(master.wrapping_add(1), "field", key));
    }
}

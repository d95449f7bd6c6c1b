use std::fs;
use std::path::Path;

use serde_json::Value;
use svt_core::bench::{
    bench_run, BenchPreset, BenchResults, PresetName, TauSweepRow, RESULTS_CSV_HEADER, TAU_SWEEP_CSV_HEADER,
};
use svt_core::io::TRACE_HEADER;
use svt_core::SolveStatus;

fn validator() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/bench_results.schema.json");
    let schema: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, doc: &Value) {
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

#[test]
fn table_preset_output_matches_schema() {
    let mut p = BenchPreset::new(PresetName::Table1, 3);
    p.scale = 0.05;
    p.repetitions = 2;
    p.only = Some("1000x1000,r=10".into());
    let res = bench_run(&p).unwrap();
    assert_eq!(res.rows.len(), 1);
    assert_eq!((res.rows[0].n, res.rows[0].rank), (50, 1));

    let dir = tempfile::tempdir().unwrap();
    let files = res.write_outputs(dir.path()).unwrap();
    let names: Vec<_> = files.iter().map(|f| f.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["results.csv", "table.txt", "results.json"]);

    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(RESULTS_CSV_HEADER));
    let doc: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("results.json")).unwrap()).unwrap();
    assert_valid(&validator(), &doc);
    let back: BenchResults = serde_json::from_value(doc).unwrap();
    assert_eq!(back.rows[0].runs.len(), 2);
}

#[test]
fn trajectory_and_sweep_outputs_match_schema() {
    let v = validator();
    let mut p = BenchPreset::new(PresetName::RankTrajectory, 5);
    p.repetitions = 1;
    p.n = Some(60);
    p.r = Some(2);
    let res = bench_run(&p).unwrap();
    assert!(!res.trace.is_empty());
    let dir = tempfile::tempdir().unwrap();
    res.write_outputs(dir.path()).unwrap();
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some(TRACE_HEADER));
    assert_eq!(trace.lines().count(), res.trace.len() + 1);
    assert_valid(&v, &serde_json::to_value(&res).unwrap());

    // sweep rows are built by hand; the real sweep runs in the acceptance target
    let sweep = BenchResults {
        preset: PresetName::TauSweep,
        scale: 1.0,
        seed: 1,
        repetitions: 1,
        rows: Vec::new(),
        tau_sweep: vec![
            TauSweepRow {
                tau: 60.0,
                tau_factor: 1.0,
                status: SolveStatus::Converged,
                iterations: 10,
                rank: 2,
                nuclear_norm: 5.0,
                distance_to_previous: None,
                nuclear_change: None,
                relative_error: 1e-3,
            },
            TauSweepRow {
                tau: 120.0,
                tau_factor: 2.0,
                status: SolveStatus::MaxIters,
                iterations: 20,
                rank: 2,
                nuclear_norm: 4.9,
                distance_to_previous: Some(0.1),
                nuclear_change: Some(0.02),
                relative_error: 1e-3,
            },
        ],
        trace: Vec::new(),
    };
    assert_valid(&v, &serde_json::to_value(&sweep).unwrap());
    assert_eq!(sweep.tau_sweep_csv().lines().next(), Some(TAU_SWEEP_CSV_HEADER));
    assert_eq!(sweep.tau_sweep_csv().lines().nth(1), Some("60,1,converged,10,2,5e0,,,1e-3"));
}

#[test]
fn schema_rejects_unknown_fields() {
    let v = validator();
    let doc = serde_json::json!({
        "preset": "table1", "scale": 1.0, "seed": 1, "repetitions": 1,
        "rows": [], "tau_sweep": [], "trace": [], "extra": 1
    });
    assert!(!v.is_valid(&doc));
    let doc = serde_json::json!({
        "preset": "table9", "scale": 1.0, "seed": 1, "repetitions": 1,
        "rows": [], "tau_sweep": [], "trace": []
    });
    assert!(!v.is_valid(&doc));
}

use loadcast::experiments::{builtin_cases, run_case, run_suite, CaseStatus, DataCatalog, DAY_REQUESTS};

fn csv_bytes(catalog: &DataCatalog, seed: u64) -> Vec<u8> {
    let report = run_suite(&builtin_cases(), catalog, seed).unwrap();
    let mut out = Vec::new();
    report.write_csv(&mut out).unwrap();
    out
}

#[test]
fn synthetic_suite_fills_every_row_and_is_deterministic() {
    let catalog = DataCatalog::synthetic(7).unwrap();
    let a = csv_bytes(&catalog, 7);
    let b = csv_bytes(&catalog, 7);
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "case,description,complete_mse,r,train_mse,val_mse,test_mse,seed,stop_reason");
    assert_eq!(lines.len(), 15);
    for line in &lines[1..] {
        assert!(!line.contains("skipped") && !line.contains("failed"), "{line}");
    }
}

#[test]
fn missing_seconds_data_skips_the_s_cases() {
    let full = DataCatalog::synthetic(3).unwrap();
    let mut catalog = DataCatalog::new();
    catalog.insert(DAY_REQUESTS, full.load(DAY_REQUESTS).unwrap().unwrap());
    let report = run_suite(&builtin_cases(), &catalog, 3).unwrap();
    let completed: Vec<_> = report.completed().map(|o| o.result.case_id.as_str()).collect();
    assert_eq!(completed.len(), 11);
    assert!(completed.iter().all(|id| id.starts_with('D')));
    let skipped: Vec<_> = report
        .entries
        .iter()
        .filter(|e| matches!(e.status, CaseStatus::Skipped(_)))
        .map(|e| e.config.id.as_str())
        .collect();
    assert_eq!(skipped, ["S12a", "S12b", "S13"]);
}

#[test]
fn simulation_only_case_reuses_source_network() {
    let catalog = DataCatalog::synthetic(5).unwrap();
    let cases: Vec<_> = builtin_cases().into_iter().filter(|c| c.id.starts_with("S12")).collect();
    let report = run_suite(&cases, &catalog, 5).unwrap();
    let s12a = report.entries[0].outcome().unwrap();
    let s12b = report.entries[1].outcome().unwrap();
    assert_eq!(s12a.network.layers, s12b.network.layers);
    assert!(s12b.result.per_split_mse.is_none());
    assert!(s12b.result.attempt_log.is_empty());
    assert_eq!(s12a.prediction.len(), 998);
    assert_eq!(s12b.prediction.len(), 86_400 - 2);
}

#[test]
fn run_case_is_deterministic_and_first_prediction_is_day_three() {
    let catalog = DataCatalog::synthetic(1).unwrap();
    let day = catalog.load(DAY_REQUESTS).unwrap().unwrap();
    let d1 = &builtin_cases()[0];
    let a = run_case(d1, &day, 9, None).unwrap();
    let b = run_case(d1, &day, 9, None).unwrap();
    assert_eq!(a.result, b.result);
    assert_eq!(a.prediction.rows[0].index, 3);
    assert_eq!(a.result.attempt_log.len(), 5);
    let r = a.result;
    assert!(r.complete_mse >= 0.0 && r.r.abs() <= 1.0);
}

use super::*;
use crate::metrics::PortfolioReport;

fn small_config(out: &Path, securities: &[&str]) -> ExperimentConfig {
    ExperimentConfig {
        securities: securities.iter().map(|s| s.to_string()).collect(),
        output_dir: out.to_path_buf(),
        synthetic_days: 360,
        seed: 3,
        parallelism: 2,
        walkforward: WalkForwardSection {
            initial_training_days: 100,
            refit_every: 20,
        },
        ..ExperimentConfig::default()
    }
}

fn record(label: &str, alpha: f64, trades: usize) -> RunRecord {
    RunRecord {
        ticker: "X".into(),
        mode: FeatureMode::Trend,
        family: Family::Knn,
        spec_label: label.into(),
        spec: ModelSpec::Knn { k: 1 },
        status: RunStatus::Completed,
        reason: None,
        predictions: 10,
        flagged: 0,
        confusion: None,
        classification: None,
        trading: Some(TradingSummary {
            final_value: 1.0,
            buy_and_hold_final: 1.0,
            risk_free_final: 1.0,
            total_costs: 0.0,
            forced_holds: 0,
            portfolio: PortfolioReport {
                total_return: 0.0,
                alpha: Some(alpha),
                beta: Some(0.5),
                volatility: 0.0,
                sharpe: None,
                sortino: None,
                trade_count: trades,
                periods: 10,
            },
        }),
        prediction_file: None,
        ledger_file: None,
        benchmark_file: None,
    }
}

#[test]
fn parses_security_entries() {
    assert_eq!(
        SecuritySource::parse("synthetic:ABC:9").unwrap(),
        SecuritySource::Synthetic {
            name: "ABC".into(),
            seed: Some(9)
        }
    );
    assert_eq!(
        SecuritySource::parse("synthetic:ABC").unwrap(),
        SecuritySource::Synthetic {
            name: "ABC".into(),
            seed: None
        }
    );
    assert_eq!(
        SecuritySource::parse("data/x.csv").unwrap(),
        SecuritySource::Path("data/x.csv".into())
    );
    assert_eq!(
        SecuritySource::parse("SPY").unwrap(),
        SecuritySource::Ticker("SPY".into())
    );
    assert!(SecuritySource::parse("synthetic:").is_err());
    assert!(SecuritySource::parse("synthetic:A:x").is_err());
}

#[test]
fn file_stems_are_safe() {
    assert_eq!(
        file_stem("SVM(kernel=rbf,gamma=auto,C=1)"),
        "SVM_kernel=rbf_gamma=auto_C=1"
    );
    assert_eq!(file_stem("^GSPC"), "GSPC");
}

#[test]
fn one_security_one_family_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        families: vec![Family::GaussianNb],
        ..small_config(dir.path(), &["synthetic:A"])
    };
    let out = run_experiment(&cfg, &[Stage::Backtest]).unwrap();
    assert_eq!(out.master.runs.len(), 1);
    assert_eq!(out.master.outcome, Outcome::Success);
    let csv = std::fs::read_to_string(out.run_dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let r = &out.master.runs[0];
    assert_eq!(r.predictions, trend_rows(&cfg) - 100);
    assert!(out.run_dir.join(r.prediction_file.as_ref().unwrap()).exists());
    assert!(out.run_dir.join(r.ledger_file.as_ref().unwrap()).exists());
}

fn trend_rows(cfg: &ExperimentConfig) -> usize {
    let series = load_security(cfg, "synthetic:A").unwrap();
    build_feature_table(&series, FeatureMode::Trend).unwrap().len()
}

#[test]
fn two_securities_full_logistic_grid_gives_24_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        families: vec![Family::Logistic],
        grid: GridSelection::Full,
        trading: false,
        ..small_config(dir.path(), &["synthetic:A", "synthetic:B"])
    };
    let out = run_experiment(&cfg, &[Stage::Backtest]).unwrap();
    assert_eq!(out.master.runs.len(), 24);
    assert!(out.master.runs.iter().all(RunRecord::completed));
    // Without trading there is no alpha, so no best spec and a warning.
    assert!(out.master.best_specs.is_empty());
    assert_eq!(out.master.warnings.len(), 1);
}

#[test]
fn failures_are_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        families: vec![Family::GaussianNb, Family::Knn],
        ..small_config(dir.path(), &["synthetic:A", "missing/nowhere.csv"])
    };
    let out = run_experiment(&cfg, &[Stage::Ingest, Stage::Backtest]).unwrap();
    assert_eq!(out.master.runs.len(), 4);
    let failed: Vec<_> = out.master.runs.iter().filter(|r| !r.completed()).collect();
    assert_eq!(failed.len(), 2);
    assert!(failed.iter().all(|r| r.reason.as_deref().unwrap().contains("nowhere")));
    assert_eq!(out.master.outcome, Outcome::Partial);
    assert_eq!(out.master.outcome.exit_code(), 1);
    assert_eq!(out.master.ingest.len(), 2);
    assert!(out.run_dir.join("prices/A.csv").exists());
    assert!(out.run_dir.join("features/A_trend.csv").exists());

    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), &["missing/nowhere.csv"]);
    let out = run_experiment(&cfg, &[Stage::Backtest]).unwrap();
    assert_eq!(out.master.outcome, Outcome::Failure);
    assert_eq!(out.master.outcome.exit_code(), 2);
}

#[test]
fn short_series_fail_with_reason() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        families: vec![Family::GaussianNb],
        synthetic_days: 120,
        ..small_config(dir.path(), &["synthetic:A"])
    };
    let out = run_experiment(&cfg, &[Stage::Backtest]).unwrap();
    assert_eq!(out.master.runs.len(), 1);
    assert!(out.master.runs[0].reason.as_deref().unwrap().contains("insufficient"));
}

#[test]
fn panics_are_isolated_and_order_is_kept() {
    let items: Vec<usize> = (0..16).collect();
    let out = run_isolated(&items, |&i| {
        if i % 5 == 3 {
            panic!("boom {i}");
        }
        Ok(i * 2)
    });
    for (i, (r, _)) in out.iter().enumerate() {
        if i % 5 == 3 {
            assert!(r.as_ref().unwrap_err().to_string().contains(&format!("boom {i}")));
        } else {
            assert_eq!(*r.as_ref().unwrap(), i * 2);
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mk = |p: &Path, par| ExperimentConfig {
        families: vec![Family::RandomForest, Family::Knn],
        feature_mode: ModeSelection::Both,
        parallelism: par,
        ..small_config(p, &["synthetic:A", "synthetic:B:11"])
    };
    let ca = mk(a.path(), 1);
    let cb = mk(b.path(), 3);
    let ra = run_all(&ca).unwrap();
    let rb = run_all(&cb).unwrap();
    // Thread count changes nothing but timing.json.
    for rel in [
        "results.csv",
        "econometrics.csv",
        "report/summary.txt",
        "report/equity_A_trend.csv",
    ] {
        let x = std::fs::read(ra.run_dir.join(rel)).unwrap();
        let y = std::fs::read(rb.run_dir.join(rel)).unwrap();
        assert_eq!(x, y, "{rel}");
    }
    for r in &ra.master.runs {
        let f = r.ledger_file.as_ref().unwrap();
        assert_eq!(
            std::fs::read(ra.run_dir.join(f)).unwrap(),
            std::fs::read(rb.run_dir.join(f)).unwrap()
        );
    }
    // Same config rerun in place rewrites identical master.json.
    let first = std::fs::read(ra.run_dir.join("master.json")).unwrap();
    let again = run_all(&ca).unwrap();
    assert_eq!(first, std::fs::read(again.run_dir.join("master.json")).unwrap());
}

#[test]
fn stages_accumulate_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        families: vec![Family::GaussianNb],
        ..small_config(dir.path(), &["synthetic:A"])
    };
    run_experiment(&cfg, &[Stage::Econ]).unwrap();
    let out = run_experiment(&cfg, &[Stage::Backtest]).unwrap();
    assert_eq!(out.master.stages, vec![Stage::Econ, Stage::Backtest]);
    assert!(out.master.econometrics.is_some());
    assert_eq!(out.master.runs.len(), 1);
}

#[test]
fn report_notes_missing_econometrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        families: vec![Family::GaussianNb],
        ..small_config(dir.path(), &["synthetic:A"])
    };
    let out = run_experiment(&cfg, &[Stage::Backtest]).unwrap();
    let files = emit_report(&out.master, &out.run_dir).unwrap();
    let names: Vec<String> = files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert!(names.contains(&"accuracy_histogram.csv".to_string()));
    assert!(names.contains(&"equity_A_trend.csv".to_string()));
    assert!(!names.iter().any(|n| n.starts_with("adf_") || n.starts_with("vr_")));
    let summary = std::fs::read_to_string(out.run_dir.join("report/summary.txt")).unwrap();
    assert!(summary.contains("econometrics: not run; ADF and VR histograms omitted"));

    let curve = std::fs::read_to_string(out.run_dir.join("report/equity_A_trend.csv")).unwrap();
    assert_eq!(curve.lines().next().unwrap(), "date,buy_and_hold,risk_free,GNB");
    assert_eq!(curve.lines().count(), out.master.runs[0].predictions + 1);
}

#[test]
fn econometrics_samples_universe_with_seed() {
    let dir = tempfile::tempdir().unwrap();
    let lines: Vec<String> = (0..12).map(|i| format!("synthetic:U{i}")).collect();
    std::fs::write(
        dir.path().join("universe.txt"),
        format!("# test universe\n{}\n", lines.join("\n")),
    )
    .unwrap();
    let mut cfg = small_config(dir.path(), &[]);
    cfg.base_dir = dir.path().to_path_buf();
    cfg.econometrics.universe = Some("universe.txt".into());
    cfg.econometrics.sample_size = Some(5);
    let out = run_experiment(&cfg, &[Stage::Econ]).unwrap();
    let econ = out.master.econometrics.as_ref().unwrap();
    assert_eq!(econ.sampled.len(), 5);
    assert_eq!(econ.sampled, sample_universe(&lines, Some(5), cfg.seed));
    assert_eq!(econ.report.as_ref().unwrap().entries.len(), 5);
    let csv = std::fs::read_to_string(out.run_dir.join("econometrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5 * (1 + cfg.econometrics.k_set.len()));
}

#[test]
fn universe_sampling_is_ordered_and_seeded() {
    let u: Vec<String> = (0..50).map(|i| format!("S{i:02}")).collect();
    let a = sample_universe(&u, Some(10), 1);
    assert_eq!(a, sample_universe(&u, Some(10), 1));
    assert_ne!(a, sample_universe(&u, Some(10), 2));
    assert!(a.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(sample_universe(&u, Some(100), 1), u);
    assert_eq!(sample_universe(&u, None, 1), u);
}

#[test]
fn best_spec_tie_breaks() {
    let runs = vec![
        record("B", 0.10, 30),
        record("A", 0.10, 30),
        record("C", 0.10, 10),
        record("D", 0.05, 1),
    ];
    // Equal alpha: fewer trades wins.
    assert_eq!(
        select_best_spec(&runs, FeatureMode::Trend, Family::Knn)
            .unwrap()
            .spec_label,
        "C"
    );
    // Equal alpha and trades: lexicographically smaller label wins.
    let runs = vec![record("B", 0.10, 30), record("A", 0.10, 30)];
    assert_eq!(
        select_best_spec(&runs, FeatureMode::Trend, Family::Knn)
            .unwrap()
            .spec_label,
        "A"
    );
    // Means across securities.
    let runs = vec![record("A", 0.3, 5), record("A", -0.2, 5), record("B", 0.1, 5)];
    let best = select_best_spec(&runs, FeatureMode::Trend, Family::Knn).unwrap();
    assert_eq!(best.spec_label, "B");
    let a = family_averages(&runs);
    assert_eq!(a.len(), 2);
    assert!((a[0].mean_alpha.unwrap() - 0.05).abs() < 1e-15);
    // No completed runs: omitted.
    let mut failed = record("A", 0.1, 1);
    failed.status = RunStatus::Failed;
    assert!(select_best_spec(&[failed], FeatureMode::Trend, Family::Knn).is_none());
    assert!(select_best_spec(&runs, FeatureMode::Continuous, Family::Knn).is_none());
}

#[test]
fn results_csv_quotes_labels() {
    let csv = results_csv(&[record("SVM(kernel=rbf,gamma=auto,C=1)", 0.1, 2)]).unwrap();
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .contains("\"SVM(kernel=rbf,gamma=auto,C=1)\""));
}

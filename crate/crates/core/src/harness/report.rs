//! Report emission from a finished run directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{file_stem, write_file, MasterLog, RunRecord};
use crate::indicators::FeatureMode;
use crate::metrics::Histogram;
use crate::{Error, Result};

/// Writes histogram CSVs, per-security equity curves and `summary.txt`
/// under `<run_dir>/report/`. Returns the files written.
///
/// Econometric histograms are omitted, and the omission noted in the
/// summary, when the log has no econometrics results.
pub fn emit_report(master: &MasterLog, run_dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = run_dir.join("report");
    let cfg = &master.config.report;
    let mut written = Vec::new();
    let mut put = |name: String, body: &str| -> Result<()> {
        let path = dir.join(name);
        write_file(&path, body)?;
        written.push(path);
        Ok(())
    };

    let done: Vec<&RunRecord> = master.runs.iter().filter(|r| r.completed()).collect();
    let accuracies: Vec<f64> = done.iter().filter_map(|r| r.accuracy()).collect();
    let alphas: Vec<f64> = done.iter().filter_map(|r| r.alpha()).collect();
    if !master.runs.is_empty() {
        put(
            "accuracy_histogram.csv".into(),
            &Histogram::new(&accuracies, cfg.accuracy_bin_width).to_csv(),
        )?;
        put(
            "alpha_histogram.csv".into(),
            &Histogram::new(&alphas, cfg.alpha_bin_width).to_csv(),
        )?;
    }

    let econ = master.econometrics.as_ref().and_then(|e| e.report.as_ref());
    if let Some(report) = econ {
        put("adf_t_stat_histogram.csv".into(), &report.adf_t_stat_histogram.to_csv())?;
        put(
            "adf_p_value_histogram.csv".into(),
            &report.adf_p_value_histogram.to_csv(),
        )?;
        for (k, h) in &report.vr_p_value_histograms {
            put(format!("vr_p_value_histogram_k{k}.csv"), &h.to_csv())?;
        }
    }

    let mut curves = Vec::new();
    for (ticker, mode) in equity_keys(&done) {
        let runs: Vec<&RunRecord> = done
            .iter()
            .copied()
            .filter(|r| r.ticker == ticker && r.mode == mode && r.ledger_file.is_some())
            .collect();
        let Some(bench_file) = runs.iter().find_map(|r| r.benchmark_file.as_ref()) else {
            continue;
        };
        let bench = read_columns(&run_dir.join(bench_file), &["date", "buy_and_hold", "risk_free"])?;
        let mut header = vec!["date".to_string(), "buy_and_hold".into(), "risk_free".into()];
        let mut columns = vec![bench[1].clone(), bench[2].clone()];
        for r in &runs {
            let file = r.ledger_file.as_ref().expect("filtered on ledger_file");
            let ledger = read_columns(&run_dir.join(file), &["date", "value"])?;
            if ledger[0] != bench[0] {
                return Err(Error::InvalidInput(format!("{file} is not aligned with {bench_file}")));
            }
            header.push(r.spec_label.clone());
            columns.push(ledger[1].clone());
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header)?;
        for (i, date) in bench[0].iter().enumerate() {
            let mut row = vec![date.clone()];
            row.extend(columns.iter().map(|c| c[i].clone()));
            w.write_record(&row)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?)
            .expect("CSV of UTF-8 fields is UTF-8");
        let name = format!("equity_{}_{mode}.csv", file_stem(&ticker));
        put(name.clone(), &body)?;
        curves.push(name);
    }

    put(
        "summary.txt".into(),
        &summary_text(master, &accuracies, &alphas, &curves),
    )?;
    Ok(written)
}

fn equity_keys(done: &[&RunRecord]) -> Vec<(String, FeatureMode)> {
    let mut keys: Vec<(String, FeatureMode)> = Vec::new();
    for r in done {
        let key = (r.ticker.clone(), r.mode);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys
}

/// Named columns of a CSV file as raw strings.
fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == *n)
                .ok_or_else(|| Error::MissingColumn((*n).to_string()))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::new(); names.len()];
    for rec in rdr.records() {
        let rec = rec?;
        for (col, &i) in out.iter_mut().zip(&idx) {
            col.push(rec.get(i).unwrap_or("").to_string());
        }
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.digits$}"))
}

fn summary_text(master: &MasterLog, accuracies: &[f64], alphas: &[f64], curves: &[String]) -> String {
    let c = &master.config;
    let mut s = String::new();
    let _ = writeln!(s, "experiment: {}", c.name);
    let _ = writeln!(s, "fingerprint: {}", master.fingerprint);
    let _ = writeln!(s, "seed: {}", c.seed);
    let _ = writeln!(
        s,
        "stages: {}",
        master.stages.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
    );
    let _ = writeln!(s, "outcome: {:?}", master.outcome);
    s.push('\n');

    let ingest_failed: Vec<_> = master.ingest.iter().filter(|r| r.reason.is_some()).collect();
    let _ = writeln!(
        s,
        "securities: {} loaded, {} failed",
        master.ingest.len() - ingest_failed.len(),
        ingest_failed.len()
    );
    for r in ingest_failed {
        let _ = writeln!(s, "  {}: {}", r.entry, r.reason.as_deref().unwrap_or(""));
    }
    s.push('\n');

    match master.econometrics.as_ref() {
        Some(e) => match &e.report {
            Some(r) => {
                let _ = writeln!(s, "econometrics: {} securities tested", r.entries.len());
                let _ = writeln!(
                    s,
                    "  ADF rejection rate at 5%: {}",
                    fmt_opt(r.adf_rejection_rate(0.05), 3)
                );
                for (k, _) in &r.vr_p_value_histograms {
                    let _ = writeln!(
                        s,
                        "  VR(k={k}) rejection rate at 5%: {}",
                        fmt_opt(r.vr_rejection_rate(*k, 0.05), 3)
                    );
                }
                for (entry, reason) in &e.load_failures {
                    let _ = writeln!(s, "  failed {entry}: {reason}");
                }
            }
            None => {
                let _ = writeln!(s, "econometrics: no results; ADF and VR histograms omitted");
                for (entry, reason) in &e.load_failures {
                    let _ = writeln!(s, "  failed {entry}: {reason}");
                }
            }
        },
        None => {
            let _ = writeln!(s, "econometrics: not run; ADF and VR histograms omitted");
        }
    }
    s.push('\n');

    let failed = master.runs.iter().filter(|r| !r.completed()).count();
    let _ = writeln!(
        s,
        "backtest: {} runs, {} completed, {} failed",
        master.runs.len(),
        master.runs.len() - failed,
        failed
    );
    if !accuracies.is_empty() {
        let mean = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
        let _ = writeln!(s, "  mean accuracy: {mean:.4}");
    }
    if !alphas.is_empty() {
        let mean = alphas.iter().sum::<f64>() / alphas.len() as f64;
        let _ = writeln!(s, "  mean alpha: {mean:.6}");
    }
    if !master.family_averages.is_empty() {
        let _ = writeln!(
            s,
            "\n{:<11} {:<40} {:>5} {:>6} {:>9} {:>11} {:>8}",
            "mode", "spec", "done", "failed", "accuracy", "alpha", "trades"
        );
        for a in &master.family_averages {
            let _ = writeln!(
                s,
                "{:<11} {:<40} {:>5} {:>6} {:>9} {:>11} {:>8}",
                a.mode.as_str(),
                a.spec_label,
                a.completed,
                a.failed,
                fmt_opt(a.mean_accuracy, 4),
                fmt_opt(a.mean_alpha, 6),
                fmt_opt(a.mean_trades, 1)
            );
        }
    }
    if !master.best_specs.is_empty() {
        let _ = writeln!(s, "\nbest spec per family (highest mean alpha):");
        for b in &master.best_specs {
            let _ = writeln!(
                s,
                "  {} {}: {} (alpha {:.6}, trades {:.1}, {} securities)",
                b.mode, b.family, b.spec_label, b.mean_alpha, b.mean_trades, b.securities
            );
        }
    }
    for w in &master.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    let failures: Vec<_> = master.runs.iter().filter(|r| !r.completed()).collect();
    if !failures.is_empty() {
        let _ = writeln!(s, "\nfailed runs:");
        for r in failures {
            let _ = writeln!(
                s,
                "  {} {} {}: {}",
                r.ticker,
                r.mode,
                r.spec_label,
                r.reason.as_deref().unwrap_or("")
            );
        }
    }
    if !curves.is_empty() {
        let _ = writeln!(s, "\nequity curves: {}", curves.join(", "));
    }
    s
}

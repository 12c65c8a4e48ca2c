//! Experiment harnesses: the Student-t newsvendor frontier and
//! sample-efficiency studies, the gap-split regression experiment, and two
//! synthetic checks (tolerance invariance and certificate validity).

pub mod certificate;
pub mod invariance;
pub mod newsvendor;
pub mod regression;

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

pub use certificate::{run_certificate_study, CertificateConfig, CertificateStudy, CertificateTrial};
pub use invariance::{run_invariance_study, InvarianceConfig, InvarianceRow, InvarianceStudy};
pub use newsvendor::{
    generate_newsvendor_data, run_newsvendor_frontier, run_sample_efficiency, BudgetCurveRow, DeltaRow,
    FrontierRow, FrontierSummary, NewsvendorConfig, NewsvendorMethod, NewsvendorRun, SampleEfficiencyReport,
};
pub use regression::{
    generate_shift_data, run_regression_experiment, run_regression_on_table, MetricRow, RegressionMethod,
    RegressionReport, RegressionSplitConfig, SelectionRow, ShiftConfig,
};

/// Sample mean and unbiased standard deviation (0 for a single value).
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![hi],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i + 1 == n {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Writes `rows` to `dir/stem.csv` (with header) and `dir/stem.jsonl` (one
/// object per row). Returns both paths.
pub fn emit_results<T: Serialize>(rows: &[T], dir: impl AsRef<Path>, stem: &str) -> Result<(PathBuf, PathBuf)> {
    if rows.is_empty() {
        return Err(Error::invalid(format!("no {stem} results to write")));
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::from(e).context(format!("creating {}", dir.display())))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.jsonl"));

    let mut w = csv::Writer::from_path(&csv_path)
        .map_err(|e| Error::from(e).context(format!("writing {}", csv_path.display())))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;

    let f = File::create(&json_path).map_err(|e| Error::from(e).context(format!("writing {}", json_path.display())))?;
    let mut out = BufWriter::new(f);
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok((csv_path, json_path))
}

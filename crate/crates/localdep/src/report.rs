//! Report containers emitted by the CLI and their JSON/CSV encodings.
//!
//! Floats in CSV are printed with 17 significant digits so that parsing an
//! emitted table recovers the same bits; JSON uses serde_json's shortest
//! round-trip encoding, which has the same property.

use serde::{Deserialize, Serialize};

/// One statistic value plus full provenance.
///
/// `params` is a JSON object (sorted keys, so emission order is stable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub estimator: String,
    pub value: f64,
    pub params: serde_json::Map<String, serde_json::Value>,
    pub n: usize,
    pub seed: u64,
    pub warnings: Vec<String>,
}

/// One grid point of a sweep or convergence study.
///
/// `sd` is present iff the row aggregated more than one replicate; a failed
/// row carries `error` instead of `mean`/`sd` so the rest of the sweep
/// survives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Name of the swept parameter: `rho`, `eps`, `n`, or `delta`.
    pub param: String,
    pub param_value: f64,
    pub estimator: String,
    pub n: usize,
    pub reps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One timing measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub estimator: String,
    pub n: usize,
    pub seconds: f64,
    /// Statistic value, kept so reruns can check determinism.
    pub value: f64,
}

/// The sub-quadratic scaling contract for the sort-based path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub estimator: String,
    pub n_small: usize,
    pub n_large: usize,
    pub seconds_small: f64,
    pub seconds_large: f64,
    pub ratio: f64,
    pub max_ratio: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingCheck>,
}

/// One self-test line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestLine {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Formats a float with 17 significant digits (guaranteed round-trip).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Renders sweep rows as CSV (leading `#` comment carries the config echo).
pub fn sweep_rows_to_csv(comment: Option<&str>, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    if let Some(c) = comment {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str("param,param_value,estimator,n,reps,mean,sd,reference,error\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.param,
            fmt_f64(r.param_value),
            r.estimator,
            r.n,
            r.reps,
            fmt_opt(r.mean),
            fmt_opt(r.sd),
            fmt_opt(r.reference),
            r.error.as_deref().unwrap_or_default().replace(',', ";"),
        ));
    }
    out
}

/// Renders estimator reports as CSV (params and warnings live in the JSON
/// format; the CSV view is the flat numeric table).
pub fn reports_to_csv(comment: Option<&str>, reports: &[EstimatorReport]) -> String {
    let mut out = String::new();
    if let Some(c) = comment {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str("estimator,value,n,seed\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.estimator,
            fmt_f64(r.value),
            r.n,
            r.seed
        ));
    }
    out
}

/// Renders bench rows as CSV.
pub fn bench_to_csv(comment: Option<&str>, report: &BenchReport) -> String {
    let mut out = String::new();
    if let Some(c) = comment {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str("estimator,n,seconds,value\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.estimator,
            r.n,
            fmt_f64(r.seconds),
            fmt_f64(r.value)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [
            0.1,
            1.0 / 3.0,
            -0.125,
            998.0 / 1001.0,
            f64::MIN_POSITIVE,
            1.0 - 4.0 * (1.0 / 6.0),
        ] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn sweep_csv_round_trips_numbers() {
        let rows = vec![SweepRow {
            param: "rho".into(),
            param_value: 0.6,
            estimator: "xi_large".into(),
            n: 1000,
            reps: 3,
            mean: Some(1.0 / 7.0),
            sd: Some(2.0 / 3.0e-3),
            reference: Some(0.36),
            error: None,
        }];
        let csv = sweep_rows_to_csv(Some("cfg"), &rows);
        let line = csv.lines().nth(2).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], "rho");
        assert_eq!(fields[5].parse::<f64>().unwrap(), 1.0 / 7.0);
        assert_eq!(fields[6].parse::<f64>().unwrap(), 2.0 / 3.0e-3);
        assert_eq!(fields[7].parse::<f64>().unwrap(), 0.36);
    }
}

//! CSV reports and the JSON-lines event log.
//!
//! CSV output depends only on the report, so regenerating it from the same
//! spec and seed gives the same bytes. Wall-clock time goes to the event
//! log alone.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use forrelation_core::games::ExperimentReport;
use forrelation_core::stats::Estimate;
use serde_json::{json, Value};

pub const CSV_HEADER: [&str; 10] =
    ["experiment", "params", "metric", "estimate", "ci_lo", "ci_hi", "trials", "seed", "bound", "verdict"];

pub fn params_field(report: &ExperimentReport) -> String {
    report.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

fn push_row(
    w: &mut csv::Writer<&mut Vec<u8>>,
    report: &ExperimentReport,
    metric: &str,
    e: &Estimate,
    bound: String,
    verdict: String,
) -> csv::Result<()> {
    w.write_record([
        report.experiment.clone(),
        params_field(report),
        metric.to_string(),
        e.value.to_string(),
        e.ci_lo.to_string(),
        e.ci_hi.to_string(),
        e.trials.to_string(),
        report.seed.to_string(),
        bound,
        verdict,
    ])
}

/// One header line, one line per estimate, one per error budget.
pub fn to_csv(reports: &[ExperimentReport]) -> String {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in reports {
            for row in &r.rows {
                let bound = row.bound.map(|b| b.to_string()).unwrap_or_default();
                let verdict = row.verdict.map(|v| v.to_string()).unwrap_or_default();
                push_row(&mut w, r, &row.name, &row.estimate, bound, verdict).expect("in-memory write");
            }
            for (name, v) in &r.budgets {
                let e = Estimate::exact(*v, 0);
                push_row(&mut w, r, &format!("budget.{name}"), &e, String::new(), String::new())
                    .expect("in-memory write");
            }
        }
        w.flush().expect("in-memory write");
    }
    String::from_utf8(buf).expect("csv output is utf-8")
}

pub fn report_json(report: &ExperimentReport) -> Value {
    let rows: Vec<Value> = report
        .rows
        .iter()
        .map(|r| {
            json!({
                "metric": r.name,
                "estimate": r.estimate.value,
                "ci_lo": r.estimate.ci_lo,
                "ci_hi": r.estimate.ci_hi,
                "trials": r.estimate.trials,
                "bound": r.bound,
                "verdict": r.verdict.map(|v| v.to_string()),
            })
        })
        .collect();
    let params: serde_json::Map<String, Value> =
        report.params.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
    json!({
        "experiment": report.experiment,
        "params": params,
        "seed": report.seed,
        "trials": report.trials,
        "rows": rows,
        "budgets": report.budgets.iter().map(|(k, v)| json!({"name": k, "value": v})).collect::<Vec<_>>(),
        "notes": report.notes,
    })
}

/// Appends one JSON object per line; every event carries `wall_ms` since
/// the log was opened.
pub struct EventLog {
    out: Option<BufWriter<File>>,
    start: Instant,
}

impl EventLog {
    pub fn disabled() -> Self {
        Self { out: None, start: Instant::now() }
    }

    pub fn open(path: &Path) -> std::io::Result<Self> {
        Ok(Self { out: Some(BufWriter::new(File::create(path)?)), start: Instant::now() })
    }

    pub fn event(&mut self, name: &str, mut fields: Value) -> std::io::Result<()> {
        let Some(out) = self.out.as_mut() else { return Ok(()) };
        if let Value::Object(m) = &mut fields {
            m.insert("event".to_string(), Value::String(name.to_string()));
            m.insert("wall_ms".to_string(), json!(self.start.elapsed().as_secs_f64() * 1e3));
        }
        writeln!(out, "{fields}")?;
        out.flush()
    }
}

//! CSV formats.
//!
//! Floats are written with 17 significant digits so every value round-trips
//! exactly. Undefined metrics are written as `N/A`, absent indices as an
//! empty field.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{format_rate, AblationRecord, ConfusionCounts};
use crate::monitor::MonitorVerdict;
use crate::sim::{Provenance, TrajectoryLog};
use crate::taylor::Sample;

pub const CONFUSION_HEADER: &str = "method,degree,horizon,tp,fp,fn,tn,tpr,tnr";
pub const ABLATION_HEADER: &str = "method,degree,lookahead_steps,lookahead_seconds,rmse,mean,std";
pub const VERDICT_HEADER: &str = "t,min_level,first_violation,warning";
pub const Q_HEADER: &str = "method,degree,horizon,unsafe_entries,mean_lead_steps,\
min_distance_error,evaluated_steps,verdict_steps,total_steps";

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "N/A".to_string(), fmt_f64)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `header` and `rows` to `path`, one line each.
pub fn write_lines<I>(path: &Path, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = String>,
{
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{header}").map_err(io_err(path))?;
    for row in rows {
        writeln!(w, "{row}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// CSV text for the trajectory: `t,x0,…,x{n-1}`.
pub fn trajectory_csv(log: &TrajectoryLog) -> String {
    let mut out = String::from("t");
    for d in 0..log.dim() {
        out.push_str(&format!(",x{d}"));
    }
    out.push('\n');
    for s in &log.samples {
        out.push_str(&fmt_f64(s.time));
        for v in &s.state {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory(path: &Path, log: &TrajectoryLog) -> Result<()> {
    std::fs::write(path, trajectory_csv(log)).map_err(io_err(path))
}

fn parse_field(path: &Path, line: u64, field: &str, what: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("bad {what} '{field}': {e}"),
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

/// Parses a trajectory CSV. The sampling interval is `tau` if given and the
/// spacing of the first two rows otherwise; every row must lie on the grid.
pub fn parse_trajectory<R: Read>(
    reader: R,
    path: &Path,
    tau: Option<f64>,
) -> Result<TrajectoryLog> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let dim = headers.len().saturating_sub(1);
    if headers.get(0).map(str::trim) != Some("t") || dim == 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "expected header 't,x0,x1,...'".into(),
        });
    }

    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let time = parse_field(path, line, &record[0], "time")?;
        let state = (1..=dim)
            .map(|k| parse_field(path, line, &record[k], "state value"))
            .collect::<Result<Vec<_>>>()?;
        if !time.is_finite() || state.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: "non-finite value".into(),
            });
        }
        samples.push(Sample::new(time, state));
    }

    let tau = match (tau, samples.len()) {
        (Some(t), _) => t,
        (None, n) if n >= 2 => samples[1].time - samples[0].time,
        (None, _) => {
            return Err(Error::data(format!(
                "{}: need at least two samples to infer the sampling interval",
                path.display()
            )))
        }
    };
    crate::numdiff::check_tau(tau)?;
    let t0 = samples.first().map_or(0.0, |s| s.time);
    for (i, s) in samples.iter().enumerate() {
        if (s.time - (t0 + i as f64 * tau)).abs() > 1e-6 * tau {
            return Err(Error::data(format!(
                "{}: row {} (t = {}) is off the uniform grid with tau = {tau}",
                path.display(),
                i + 2,
                s.time
            )));
        }
    }
    Ok(TrajectoryLog {
        tau,
        samples,
        provenance: Provenance::External,
    })
}

pub fn read_trajectory(path: &Path, tau: Option<f64>) -> Result<TrajectoryLog> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_trajectory(file, path, tau)
}

/// One line of a verdict file.
#[derive(Debug, Clone, PartialEq)]
pub struct VerdictRow {
    pub t: f64,
    pub min_level: f64,
    pub first_violation: Option<usize>,
    pub warning: bool,
}

impl From<&MonitorVerdict> for VerdictRow {
    fn from(v: &MonitorVerdict) -> Self {
        Self {
            t: v.at_time,
            min_level: v.min_level,
            first_violation: v.first_violation,
            warning: v.warning,
        }
    }
}

impl VerdictRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{}",
            fmt_f64(self.t),
            fmt_f64(self.min_level),
            self.first_violation
                .map_or_else(String::new, |m| m.to_string()),
            self.warning
        )
    }
}

pub fn verdicts_csv(rows: &[VerdictRow]) -> String {
    let mut out = format!("{VERDICT_HEADER}\n");
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

pub fn write_verdicts(path: &Path, rows: &[VerdictRow]) -> Result<()> {
    std::fs::write(path, verdicts_csv(rows)).map_err(io_err(path))
}

pub fn read_verdicts(path: &Path) -> Result<Vec<VerdictRow>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != VERDICT_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header '{VERDICT_HEADER}'"),
        });
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let first_violation = match record[2].trim() {
            "" => None,
            s => Some(
                s.parse::<usize>()
                    .map_err(|e| bad(format!("bad index '{s}': {e}")))?,
            ),
        };
        let warning = match record[3].trim() {
            "true" => true,
            "false" => false,
            s => return Err(bad(format!("bad warning flag '{s}'"))),
        };
        rows.push(VerdictRow {
            t: parse_field(path, line, &record[0], "time")?,
            min_level: parse_field(path, line, &record[1], "min level")?,
            first_violation,
            warning,
        });
    }
    Ok(rows)
}

/// Identifies one monitor run: method name, Taylor degree, horizon.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RunKey {
    pub method: String,
    pub degree: usize,
    pub horizon: usize,
}

impl RunKey {
    pub fn tpm(degree: usize, horizon: usize) -> Self {
        Self {
            method: "tpm".into(),
            degree,
            horizon,
        }
    }

    pub fn ttc(horizon: usize) -> Self {
        Self {
            method: "ttc".into(),
            degree: 1,
            horizon,
        }
    }

    /// `verdicts_tpm_l2_h50.csv` or `verdicts_ttc_h50.csv`.
    pub fn verdict_file_name(&self) -> String {
        if self.method == "ttc" {
            format!("verdicts_ttc_h{}.csv", self.horizon)
        } else {
            format!(
                "verdicts_{}_l{}_h{}.csv",
                self.method, self.degree, self.horizon
            )
        }
    }

    /// Inverse of [`RunKey::verdict_file_name`].
    pub fn from_verdict_file_name(name: &str) -> Option<Self> {
        let stem = name.strip_prefix("verdicts_")?.strip_suffix(".csv")?;
        let parts: Vec<&str> = stem.split('_').collect();
        match parts.as_slice() {
            ["ttc", h] => Some(Self::ttc(h.strip_prefix('h')?.parse().ok()?)),
            [method, l, h] => Some(Self {
                method: (*method).to_string(),
                degree: l.strip_prefix('l')?.parse().ok()?,
                horizon: h.strip_prefix('h')?.parse().ok()?,
            }),
            _ => None,
        }
    }
}

pub fn confusion_line(key: &RunKey, c: &ConfusionCounts) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        key.method,
        key.degree,
        key.horizon,
        c.tp,
        c.fp,
        c.fn_,
        c.tn,
        format_rate(c.tpr()),
        format_rate(c.tnr())
    )
}

pub fn ablation_line(method: &str, degree: usize, r: &AblationRecord) -> String {
    format!(
        "{method},{degree},{},{},{},{},{}",
        r.lookahead_steps,
        fmt_f64(r.lookahead_seconds),
        fmt_f64(r.rmse),
        fmt_f64(r.mean),
        fmt_f64(r.std)
    )
}

/// Quantitative metrics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct QRow {
    pub key: RunKey,
    pub unsafe_entries: usize,
    pub mean_lead_steps: Option<f64>,
    pub min_distance_error: Option<f64>,
    /// Steps with a full ground-truth window (the confusion-count total).
    pub evaluated_steps: u64,
    /// Evaluated steps at which the monitor had produced a verdict.
    pub verdict_steps: u64,
    pub total_steps: usize,
}

impl QRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.key.method,
            self.key.degree,
            self.key.horizon,
            self.unsafe_entries,
            fmt_opt(self.mean_lead_steps),
            fmt_opt(self.min_distance_error),
            self.evaluated_steps,
            self.verdict_steps,
            self.total_steps
        )
    }
}

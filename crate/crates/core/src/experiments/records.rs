//! Result records and their CSV / JSON serialisation.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};

/// Slack below zero that a margin may reach and still count as a pass.
pub const MARGIN_SLACK: f64 = 1e-9;

pub const CSV_HEADER: [&str; 9] = [
    "experiment", "cell", "statement", "params", "measured", "bound", "margin", "status", "detail",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Measurement without a declared bound.
    Info,
    /// Outside the declared bound in a visibly pre-asymptotic cell.
    Flag,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Info => "info",
            Status::Flag => "flag",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "pass" => Status::Pass,
            "fail" => Status::Fail,
            "info" => Status::Info,
            "flag" => Status::Flag,
            _ => return None,
        })
    }
}

/// One measured quantity, optionally checked against a declared bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub experiment: String,
    pub cell: usize,
    /// Which bound or identity the record certifies.
    pub statement: String,
    pub params: String,
    pub measured: f64,
    pub bound: f64,
    /// Signed distance to the bound; negative means violated.
    pub margin: f64,
    pub status: Status,
    pub detail: String,
}

fn status_for(margin: f64) -> Status {
    if margin >= -MARGIN_SLACK {
        Status::Pass
    } else {
        Status::Fail
    }
}

impl ResultRecord {
    fn base(experiment: &str, cell: usize, statement: &str, params: String) -> Self {
        ResultRecord {
            experiment: experiment.to_string(),
            cell,
            statement: statement.to_string(),
            params,
            measured: f64::NAN,
            bound: f64::NAN,
            margin: f64::NAN,
            status: Status::Info,
            detail: String::new(),
        }
    }

    /// `measured <= bound`.
    pub fn upper(experiment: &str, cell: usize, statement: &str, params: String, measured: f64, bound: f64) -> Self {
        let margin = bound - measured;
        ResultRecord {
            measured,
            bound,
            margin,
            status: status_for(margin),
            ..Self::base(experiment, cell, statement, params)
        }
    }

    /// `measured >= bound`.
    pub fn lower(experiment: &str, cell: usize, statement: &str, params: String, measured: f64, bound: f64) -> Self {
        let margin = measured - bound;
        ResultRecord {
            measured,
            bound,
            margin,
            status: status_for(margin),
            ..Self::base(experiment, cell, statement, params)
        }
    }

    /// `|measured - target| <= tol`.
    pub fn within(
        experiment: &str,
        cell: usize,
        statement: &str,
        params: String,
        measured: f64,
        target: f64,
        tol: f64,
    ) -> Self {
        let margin = tol - (measured - target).abs();
        ResultRecord {
            measured,
            bound: target,
            margin,
            status: status_for(margin),
            detail: format!("tolerance={}", fmt_float(tol)),
            ..Self::base(experiment, cell, statement, params)
        }
    }

    pub fn info(experiment: &str, cell: usize, statement: &str, params: String, measured: f64) -> Self {
        ResultRecord {
            measured,
            ..Self::base(experiment, cell, statement, params)
        }
    }

    /// A sub-computation failed; recorded rather than aborting the suite.
    pub fn error(experiment: &str, cell: usize, statement: &str, params: String, err: &Error) -> Self {
        ResultRecord {
            status: Status::Fail,
            detail: err.to_string(),
            ..Self::base(experiment, cell, statement, params)
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// Re-grade without slack, for checks whose tolerance is already tight.
    pub fn exact(mut self) -> Self {
        if self.status != Status::Info {
            self.status = if self.margin >= 0.0 { Status::Pass } else { Status::Fail };
        }
        self
    }

    /// Downgrade a failure to a flag (pre-asymptotic cell).
    pub fn flagged(mut self) -> Self {
        if self.status == Status::Fail {
            self.status = Status::Flag;
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

/// Floats with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Argument(format!("csv: {e}"))
}

pub fn write_csv<W: Write>(records: &[ResultRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.experiment.clone(),
            r.cell.to_string(),
            r.statement.clone(),
            r.params.clone(),
            fmt_float(r.measured),
            fmt_float(r.bound),
            fmt_float(r.margin),
            r.status.as_str().to_string(),
            r.detail.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Argument(format!("write: {e}")))?;
    Ok(())
}

pub fn to_csv_string(records: &[ResultRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

fn parse_float(s: &str) -> Option<f64> {
    match s {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

/// Read records back; errors carry the 1-based line number.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Argument("line 1: unexpected header for a result file".into()));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let bad = |what: &str| Error::Argument(format!("line {line}: invalid {what}"));
        let float = |i: usize, what: &str| parse_float(&row[i]).ok_or_else(|| bad(what));
        out.push(ResultRecord {
            experiment: row[0].to_string(),
            cell: row[1].parse().map_err(|_| bad("cell"))?,
            statement: row[2].to_string(),
            params: row[3].to_string(),
            measured: float(4, "measured")?,
            bound: float(5, "bound")?,
            margin: float(6, "margin")?,
            status: Status::parse(&row[7]).ok_or_else(|| bad("status"))?,
            detail: row[8].to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct StatementSummary {
    pub pass: usize,
    pub fail: usize,
    pub info: usize,
    pub flag: usize,
    /// Smallest margin over checked records (null when none).
    pub worst_margin: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub config: serde_json::Value,
    pub pass: usize,
    pub fail: usize,
    pub info: usize,
    pub flag: usize,
    pub statements: BTreeMap<String, StatementSummary>,
    pub wall_clock_seconds: f64,
}

pub fn summarize(experiment: &str, config: serde_json::Value, records: &[ResultRecord], wall_clock_seconds: f64) -> Summary {
    let mut statements: BTreeMap<String, StatementSummary> = BTreeMap::new();
    for r in records {
        let s = statements.entry(r.statement.clone()).or_insert(StatementSummary {
            pass: 0,
            fail: 0,
            info: 0,
            flag: 0,
            worst_margin: None,
        });
        match r.status {
            Status::Pass => s.pass += 1,
            Status::Fail => s.fail += 1,
            Status::Info => s.info += 1,
            Status::Flag => s.flag += 1,
        }
        if r.status != Status::Info && r.margin.is_finite() {
            s.worst_margin = Some(s.worst_margin.map_or(r.margin, |w| w.min(r.margin)));
        }
    }
    let count = |st: Status| records.iter().filter(|r| r.status == st).count();
    Summary {
        experiment: experiment.to_string(),
        config,
        pass: count(Status::Pass),
        fail: count(Status::Fail),
        info: count(Status::Info),
        flag: count(Status::Flag),
        statements,
        wall_clock_seconds,
    }
}

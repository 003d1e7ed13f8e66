//! Uniformly sampled trajectory records and their CSV form.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Fixed columns before and after the per-model weights.
pub const LEADING_COLUMNS: [&str; 9] = ["t", "x1", "x2", "xm", "xhat1", "xhat2", "e", "em", "u"];
pub const TRAILING_COLUMNS: [&str; 5] = ["V", "pose_x", "pose_y", "heading", "steer"];

#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
    pub xm: f64,
    pub xhat1: f64,
    pub xhat2: f64,
    /// `‖x̂ − x‖`.
    pub e: f64,
    /// `x2 − x_m`.
    pub em: f64,
    pub u: f64,
    pub gamma: Vec<f64>,
    pub v: f64,
    pub pose_x: f64,
    pub pose_y: f64,
    pub heading: f64,
    pub steer: f64,
}

impl LogRecord {
    fn values(&self) -> Vec<f64> {
        let mut v = vec![
            self.t, self.x1, self.x2, self.xm, self.xhat1, self.xhat2, self.e, self.em, self.u,
        ];
        v.extend(&self.gamma);
        v.extend([self.v, self.pose_x, self.pose_y, self.heading, self.steer]);
        v
    }
}

/// One channel's records at a constant cadence starting at `t = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLog {
    log_every: f64,
    n_gamma: usize,
    records: Vec<LogRecord>,
}

impl TrajectoryLog {
    pub fn new(log_every: f64, n_gamma: usize) -> Self {
        Self {
            log_every,
            n_gamma,
            records: Vec::new(),
        }
    }

    pub fn log_every(&self) -> f64 {
        self.log_every
    }

    pub fn n_gamma(&self) -> usize {
        self.n_gamma
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Time of sample `k`. Cadences that divide one second evenly use
    /// `k / rate`, which keeps decimal grid times exact (`107 / 10 = 10.7`).
    pub fn sample_time(&self, k: usize) -> f64 {
        let rate = 1.0 / self.log_every;
        if (rate - rate.round()).abs() < 1e-9 * rate {
            k as f64 / rate.round()
        } else {
            k as f64 * self.log_every
        }
    }

    /// Appends a record; its time is overwritten with the `k`-th grid time.
    pub fn push(&mut self, mut record: LogRecord) -> Result<()> {
        let row = self.records.len();
        if record.gamma.len() != self.n_gamma {
            return Err(Error::Dimension {
                context: "log weights",
                expected: self.n_gamma,
                got: record.gamma.len(),
            });
        }
        record.t = self.sample_time(row);
        if let Some(i) = record.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::MalformedLog {
                row,
                reason: format!("column {} is not finite", self.header()[i]),
            });
        }
        self.records.push(record);
        Ok(())
    }

    pub fn header(&self) -> Vec<String> {
        header(self.n_gamma)
    }

    fn time_decimals(&self) -> usize {
        let mut d = 0;
        let mut step = self.log_every;
        while d < 9 && (step - step.round()).abs() > 1e-9 {
            step *= 10.0;
            d += 1;
        }
        d
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header().join(",");
        out.push('\n');
        let dec = self.time_decimals();
        for r in &self.records {
            let vals = r.values();
            write!(out, "{:.*}", dec, vals[0]).expect("write to string");
            for v in &vals[1..] {
                write!(out, ",{v}").expect("write to string");
            }
            out.push('\n');
        }
        out
    }

    /// Parses a log written by [`TrajectoryLog::to_csv`]; errors carry the
    /// 1-based line number.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let head = lines.next().ok_or(Error::EmptyLog)?;
        let cols: Vec<&str> = head.split(',').map(str::trim).collect();
        let fixed = LEADING_COLUMNS.len() + TRAILING_COLUMNS.len();
        if cols.len() < fixed {
            return Err(Error::MalformedLog {
                row: 1,
                reason: format!("expected at least {fixed} columns, found {}", cols.len()),
            });
        }
        let n_gamma = cols.len() - fixed;
        if cols != header(n_gamma).iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::MalformedLog {
                row: 1,
                reason: format!("unexpected header '{head}'"),
            });
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::MalformedLog {
                    row,
                    reason: e.to_string(),
                })?;
            if vals.len() != cols.len() {
                return Err(Error::MalformedLog {
                    row,
                    reason: format!("expected {} fields, found {}", cols.len(), vals.len()),
                });
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::MalformedLog {
                    row,
                    reason: "non-finite value".into(),
                });
            }
            rows.push(vals);
        }
        if rows.is_empty() {
            return Err(Error::EmptyLog);
        }
        if rows[0][0].abs() > 1e-9 {
            return Err(Error::MalformedLog {
                row: 2,
                reason: "log must start at t=0".into(),
            });
        }
        let log_every = if rows.len() > 1 { rows[1][0] - rows[0][0] } else { 1.0 };
        if !(log_every > 0.0) {
            return Err(Error::MalformedLog {
                row: 3,
                reason: "time must increase".into(),
            });
        }
        let mut log = TrajectoryLog::new(log_every, n_gamma);
        for (k, v) in rows.iter().enumerate() {
            if (v[0] - k as f64 * log_every).abs() > 1e-6 * log_every.max(1.0) {
                return Err(Error::MalformedLog {
                    row: k + 2,
                    reason: format!("time {} breaks the cadence {log_every}", v[0]),
                });
            }
            let g = 9 + n_gamma;
            log.records.push(LogRecord {
                t: v[0],
                x1: v[1],
                x2: v[2],
                xm: v[3],
                xhat1: v[4],
                xhat2: v[5],
                e: v[6],
                em: v[7],
                u: v[8],
                gamma: v[9..g].to_vec(),
                v: v[g],
                pose_x: v[g + 1],
                pose_y: v[g + 2],
                heading: v[g + 3],
                steer: v[g + 4],
            });
        }
        Ok(log)
    }
}

pub fn header(n_gamma: usize) -> Vec<String> {
    LEADING_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((1..=n_gamma).map(|i| format!("gamma_{i}")))
        .chain(TRAILING_COLUMNS.iter().map(|s| s.to_string()))
        .collect()
}

/// Path points `(t, x, y)` and error trace `(t, e_m)` at the log cadence.
pub fn plot_series(log: &TrajectoryLog) -> (String, String) {
    let mut path = String::from("t,x,y\n");
    let mut err = String::from("t,em\n");
    let dec = log.time_decimals();
    for r in log.records() {
        writeln!(path, "{:.*},{},{}", dec, r.t, r.pose_x, r.pose_y).expect("write to string");
        writeln!(err, "{:.*},{}", dec, r.t, r.em).expect("write to string");
    }
    (path, err)
}

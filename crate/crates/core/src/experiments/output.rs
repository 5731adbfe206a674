use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Significant digits kept for rates.
pub const RATE_DIGITS: usize = 9;

/// Rounds `x` to `digits` significant digits, in decimal.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format_sig(x, digits).parse().expect("formatted float parses")
}

/// Decimal rendering of `x` with `digits` significant digits and no exponent.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new leading digit (9.99.. -> 10.0)
    let carried = s.parse::<f64>().is_ok_and(|r| r.abs() >= 10f64.powi(magnitude as i32 + 1));
    if decimals > 0 && carried {
        format!("{x:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

/// One method on one trial at one sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub scenario: String,
    pub sweep_var: String,
    pub sweep_value: f64,
    pub method: String,
    pub seed: u64,
    /// Worst-user rate (bits/s/Hz), rounded to [`RATE_DIGITS`]; NaN marks a
    /// failed run.
    pub rate_bps_hz: f64,
    /// Seconds, rounded to microseconds; zero unless timing is enabled.
    pub wall_s: f64,
    pub iters: usize,
}

impl ResultRecord {
    pub fn failed(&self) -> bool {
        self.rate_bps_hz.is_nan()
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "scenario",
    "sweep_var",
    "sweep_value",
    "method",
    "seed",
    "rate_bps_hz",
    "wall_s",
    "iters",
];

#[derive(Serialize, Deserialize)]
struct CsvRow {
    scenario: String,
    sweep_var: String,
    sweep_value: String,
    method: String,
    seed: u64,
    rate_bps_hz: String,
    wall_s: String,
    iters: usize,
}

impl From<&ResultRecord> for CsvRow {
    fn from(r: &ResultRecord) -> Self {
        Self {
            scenario: r.scenario.clone(),
            sweep_var: r.sweep_var.clone(),
            sweep_value: format!("{}", r.sweep_value),
            method: r.method.clone(),
            seed: r.seed,
            rate_bps_hz: format_sig(r.rate_bps_hz, RATE_DIGITS),
            wall_s: format!("{:.6}", r.wall_s),
            iters: r.iters,
        }
    }
}

fn parse_f64(field: &str, text: &str) -> Result<f64> {
    text.parse()
        .map_err(|_| Error::Config(format!("bad `{field}` value `{text}` in results CSV")))
}

impl TryFrom<CsvRow> for ResultRecord {
    type Error = Error;

    fn try_from(row: CsvRow) -> Result<Self> {
        Ok(Self {
            sweep_value: parse_f64("sweep_value", &row.sweep_value)?,
            rate_bps_hz: parse_f64("rate_bps_hz", &row.rate_bps_hz)?,
            wall_s: parse_f64("wall_s", &row.wall_s)?,
            scenario: row.scenario,
            sweep_var: row.sweep_var,
            method: row.method,
            seed: row.seed,
            iters: row.iters,
        })
    }
}

/// Incremental CSV writer: the header goes out on creation and every batch
/// of rows is flushed as soon as it is written.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl CsvSink<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::new(BufWriter::new(file))
    }
}

impl<W: Write> CsvSink<W> {
    pub fn new(inner: W) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(inner);
        writer.write_record(CSV_HEADER)?;
        Ok(Self { writer })
    }

    pub fn write(&mut self, records: &[ResultRecord]) -> Result<()> {
        for r in records {
            self.writer.serialize(CsvRow::from(r))?;
        }
        self.writer.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.writer
            .into_inner()
            .map_err(|e| Error::Solver(format!("flushing CSV: {e}")))
    }
}

/// Writes `records` as CSV to `path`.
pub fn emit_csv(records: &[ResultRecord], path: &Path) -> Result<()> {
    let mut sink = CsvSink::create(path)?;
    sink.write(records)
}

/// CSV text for `records`.
pub fn csv_string(records: &[ResultRecord]) -> Result<String> {
    let mut sink = CsvSink::new(Vec::new())?;
    sink.write(records)?;
    Ok(String::from_utf8(sink.into_inner()?).expect("CSV output is UTF-8"))
}

/// Parses CSV written by [`emit_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ResultRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Config(format!("unexpected results header {header:?}")));
    }
    reader
        .deserialize::<CsvRow>()
        .map(|row| ResultRecord::try_from(row?))
        .collect()
}

/// Statistics of one (sweep value, method) cell over its successful trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub method: String,
    pub n: usize,
    pub failures: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub ci95: f64,
}

/// Groups records by (sweep value, method) in first-appearance order.
pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(f64, String)> = Vec::new();
    for r in records {
        if !keys.iter().any(|(v, m)| *v == r.sweep_value && *m == r.method) {
            keys.push((r.sweep_value, r.method.clone()));
        }
    }
    keys.into_iter()
        .map(|(value, method)| {
            let cell: Vec<&ResultRecord> = records
                .iter()
                .filter(|r| r.sweep_value == value && r.method == method)
                .collect();
            let rates: Vec<f64> = cell.iter().filter(|r| !r.failed()).map(|r| r.rate_bps_hz).collect();
            let n = rates.len();
            let mean = if n > 0 { rates.iter().sum::<f64>() / n as f64 } else { f64::NAN };
            let std = if n > 1 {
                (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                sweep_value: value,
                method,
                n,
                failures: cell.len() - n,
                mean,
                std,
                ci95: if n > 0 { 1.96 * std / (n as f64).sqrt() } else { f64::NAN },
            }
        })
        .collect()
}

/// Aligned text table of the summary.
pub fn summary_table(sweep_var: &str, rows: &[SummaryRow]) -> String {
    let header = [sweep_var, "method", "n", "failed", "mean", "std", "ci95_lo", "ci95_hi"];
    let body: Vec<[String; 8]> = rows
        .iter()
        .map(|r| {
            [
                format!("{}", r.sweep_value),
                r.method.clone(),
                r.n.to_string(),
                r.failures.to_string(),
                format_sig(r.mean, 6),
                format_sig(r.std, 6),
                format_sig(r.mean - r.ci95, 6),
                format_sig(r.mean + r.ci95, 6),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&header);
    for row in &body {
        line(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

/// Writes the summary table to `path`.
pub fn emit_summary(sweep_var: &str, rows: &[SummaryRow], path: &Path) -> Result<()> {
    std::fs::write(path, summary_table(sweep_var, rows)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

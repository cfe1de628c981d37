//! Run reports and their text, CSV and JSON-lines forms.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shockdefault::check::Check;
use shockdefault::mc::McReport;

use crate::config::{Config, Format};
use crate::num::sig17;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Skip,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skip => "SKIP",
        }
    }
}

/// One configured check group with its worst sub-check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub verdict: Verdict,
    pub max_error: f64,
    pub tolerance: f64,
    pub note: String,
    pub parts: Vec<Check>,
}

impl CheckLine {
    /// Worst error over the parts; fails when any part fails.
    pub fn from_parts(name: &str, parts: Vec<Check>, note: impl Into<String>) -> Self {
        let max_error = parts.iter().map(|c| c.max_error).fold(0.0, f64::max);
        let failing = parts.iter().find(|c| !c.pass);
        let tolerance = failing
            .or_else(|| parts.iter().max_by(|a, b| a.max_error.total_cmp(&b.max_error)))
            .map_or(0.0, |c| c.tolerance);
        CheckLine {
            name: name.to_string(),
            verdict: if failing.is_some() { Verdict::Fail } else { Verdict::Pass },
            max_error,
            tolerance,
            note: note.into(),
            parts,
        }
    }

    pub fn skipped(name: &str, why: impl Into<String>) -> Self {
        CheckLine {
            name: name.to_string(),
            verdict: Verdict::Skip,
            max_error: 0.0,
            tolerance: 0.0,
            note: why.into(),
            parts: Vec::new(),
        }
    }
}

/// An `F`-adapted process tabulated on the atoms of each `F_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    /// `values[n][j]` on atom `j` of `F_n`.
    pub values: Vec<Vec<f64>>,
}

/// Expected cumulative premium at one date, split by source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    pub time_index: usize,
    pub total_premium: f64,
    pub idiosyncratic: f64,
    /// 1-based; `None` for models without shocks.
    pub shock_id: Option<usize>,
    pub shock_premium: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub steps: usize,
    pub law_error: f64,
    pub price_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model: String,
    pub horizon: usize,
    pub maturity: usize,
    pub outcomes: usize,
    pub shocks: usize,
    pub shock_free: bool,
    pub predefault_price_0: f64,
    /// `E[π_T]`.
    pub expected_premium: f64,
    /// Naive minus shock-aware price at time 0.
    pub naive_gap_0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: Config,
    pub summary: Summary,
    pub checks: Vec<CheckLine>,
    pub tables: Vec<Table>,
    pub premium_split: Vec<SplitRow>,
    pub ladder: Vec<LadderRow>,
    pub mc: Option<McReport>,
    /// Wall-clock time; the only field that varies between identical runs.
    pub timing_ms: u64,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.verdict != Verdict::Fail)
    }
}

/// One JSON-lines record.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Record {
    Config(Config),
    Summary(Summary),
    Check(CheckLine),
    Table(Table),
    Split(SplitRow),
    Ladder(LadderRow),
    Mc(McReport),
    Timing { ms: u64 },
}

pub fn to_json_lines(r: &RunReport) -> String {
    let mut recs = vec![Record::Config(r.config.clone()), Record::Summary(r.summary.clone())];
    recs.extend(r.checks.iter().cloned().map(Record::Check));
    recs.extend(r.tables.iter().cloned().map(Record::Table));
    recs.extend(r.premium_split.iter().cloned().map(Record::Split));
    recs.extend(r.ladder.iter().cloned().map(Record::Ladder));
    recs.extend(r.mc.iter().cloned().map(Record::Mc));
    recs.push(Record::Timing { ms: r.timing_ms });
    let mut out = String::new();
    for rec in recs {
        out.push_str(&serde_json::to_string(&rec).expect("report serializes"));
        out.push('\n');
    }
    out
}

pub fn from_json_lines(input: impl BufRead) -> Result<RunReport, CliError> {
    let (mut config, mut summary, mut mc, mut timing_ms) = (None, None, None, 0);
    let (mut checks, mut tables, mut premium_split, mut ladder) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(CliError::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record =
            serde_json::from_str(&line).map_err(|e| CliError::Config(format!("report line {}: {}", i + 1, e)))?;
        match rec {
            Record::Config(c) => config = Some(c),
            Record::Summary(s) => summary = Some(s),
            Record::Check(c) => checks.push(c),
            Record::Table(t) => tables.push(t),
            Record::Split(s) => premium_split.push(s),
            Record::Ladder(l) => ladder.push(l),
            Record::Mc(m) => mc = Some(m),
            Record::Timing { ms } => timing_ms = ms,
        }
    }
    Ok(RunReport {
        config: config.ok_or_else(|| CliError::Config("report has no config record".into()))?,
        summary: summary.ok_or_else(|| CliError::Config("report has no summary record".into()))?,
        checks,
        tables,
        premium_split,
        ladder,
        mc,
        timing_ms,
    })
}

pub fn table_csv(t: &Table) -> String {
    let mut s = String::from("time_index,atom_id,value\n");
    for (n, row) in t.values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", n, j, sig17(*v));
        }
    }
    s
}

pub fn split_csv(rows: &[SplitRow]) -> String {
    let mut s = String::from("time_index,total_premium,idiosyncratic,shock_id,shock_premium\n");
    for r in rows {
        let id = r.shock_id.map(|i| i.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.time_index,
            sig17(r.total_premium),
            sig17(r.idiosyncratic),
            id,
            sig17(r.shock_premium)
        );
    }
    s
}

pub fn checks_csv(lines: &[CheckLine]) -> String {
    let mut s = String::from("name,verdict,max_error,tolerance\n");
    for c in lines {
        let _ = writeln!(s, "{},{},{},{}", c.name, c.verdict.as_str(), sig17(c.max_error), sig17(c.tolerance));
    }
    s
}

pub fn ladder_csv(rows: &[LadderRow]) -> String {
    let mut s = String::from("steps,law_error,price_error\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.steps, sig17(r.law_error), sig17(r.price_error));
    }
    s
}

pub fn mc_csv(m: &McReport) -> String {
    let mut s = String::from("quantity,time_index,mean,std_error,half_width_99,exact\n");
    let mut row = |q: &str, n: String, e: &shockdefault::mc::Estimate| {
        let exact = e.exact.map(sig17).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{},{},{}", q, n, sig17(e.mean), sig17(e.std_error), sig17(e.half_width_99), exact);
    };
    for (n, e) in m.default_prob.iter().enumerate() {
        row("default_probability", n.to_string(), e);
    }
    row("predefault_price_0", "0".into(), &m.price0);
    row("premium_at_maturity", String::new(), &m.premium_t);
    s
}

/// CSV files of a report, by file name.
pub fn csv_files(r: &RunReport) -> Vec<(String, String)> {
    let mut out = vec![("checks.csv".to_string(), checks_csv(&r.checks))];
    for t in &r.tables {
        out.push((format!("{}.csv", t.name), table_csv(t)));
    }
    if !r.premium_split.is_empty() {
        out.push(("premium_split.csv".into(), split_csv(&r.premium_split)));
    }
    if !r.ladder.is_empty() {
        out.push(("ladder.csv".into(), ladder_csv(&r.ladder)));
    }
    if let Some(m) = &r.mc {
        out.push(("mc.csv".into(), mc_csv(m)));
    }
    out
}

pub fn to_text(r: &RunReport) -> String {
    let s = &r.summary;
    let mut out = String::new();
    let _ = writeln!(out, "model {} (horizon {}, maturity {}, {} outcomes, {} shock{}{})",
        s.model, s.horizon, s.maturity, s.outcomes, s.shocks, if s.shocks == 1 { "" } else { "s" }, if s.shock_free { ", shock-free" } else { "" });
    let _ = writeln!(out, "predefault price at 0: {}", sig17(s.predefault_price_0));
    let _ = writeln!(out, "expected premium at maturity: {}", sig17(s.expected_premium));
    let _ = writeln!(out, "naive formula gap at 0: {}", sig17(s.naive_gap_0));
    for c in &r.checks {
        let _ = write!(out, "{} {} max_error={} tol={}", c.verdict.as_str(), c.name, sig17(c.max_error), sig17(c.tolerance));
        if !c.note.is_empty() {
            let _ = write!(out, " ({})", c.note);
        }
        out.push('\n');
        for p in c.parts.iter().filter(|p| !p.pass) {
            let _ = writeln!(out, "    {}", p);
        }
    }
    for row in &r.ladder {
        let _ = writeln!(out, "ladder N={} law_error={} price_error={}", row.steps, sig17(row.law_error), sig17(row.price_error));
    }
    if let Some(m) = &r.mc {
        let e = &m.price0;
        let _ = writeln!(out, "mc {} paths: price0 {} ± {} (exact {})",
            m.config.paths, sig17(e.mean), sig17(e.half_width_99), e.exact.map(sig17).unwrap_or_default());
    }
    let _ = writeln!(out, "{} in {} ms", if r.all_pass() { "all checks passed" } else { "checks FAILED" }, r.timing_ms);
    out
}

/// Writes the report in `fmt` under `dir`, or returns it for stdout.
pub fn emit(r: &RunReport, fmt: Format, dir: Option<&Path>) -> Result<Option<String>, CliError> {
    let Some(dir) = dir else {
        return Ok(Some(match fmt {
            Format::Text => to_text(r),
            Format::JsonLines => to_json_lines(r),
            Format::Csv => csv_files(r)
                .into_iter()
                .map(|(name, body)| format!("# {}\n{}", name, body))
                .collect::<Vec<_>>()
                .join("\n"),
        }));
    };
    std::fs::create_dir_all(dir).map_err(CliError::Io)?;
    let write = |name: &str, body: &str| -> Result<PathBuf, CliError> {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(CliError::Io)?;
        Ok(p)
    };
    match fmt {
        Format::Text => {
            write("report.txt", &to_text(r))?;
        }
        Format::JsonLines => {
            write("report.jsonl", &to_json_lines(r))?;
        }
        Format::Csv => {
            for (name, body) in csv_files(r) {
                write(&name, &body)?;
            }
        }
    }
    Ok(None)
}

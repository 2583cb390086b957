use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use super::{BenchRecord, SOLVED_GAP};
use crate::error::{Error, Result};
use crate::instances::ProblemClass;
use crate::relax::Relaxation;

/// Log-spaced buckets between the solved threshold and `HISTOGRAM_TOP`.
pub const HISTOGRAM_BUCKETS: usize = 30;
const HISTOGRAM_TOP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportMode {
    TimingTable,
    GapHistogram,
    Summary,
}

impl FromStr for ReportMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "timing-table" => Ok(ReportMode::TimingTable),
            "gap-histogram" => Ok(ReportMode::GapHistogram),
            "summary" => Ok(ReportMode::Summary),
            other => Err(Error::Parameter(format!(
                "unknown report mode `{other}` (expected timing-table, gap-histogram or summary)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(Error::Parameter(format!(
                "unknown report format `{other}` (expected csv or md)"
            ))),
        }
    }
}

/// Gap histogram per class and relaxation.
///
/// Bucket 0 is "solved" (`γ < 1e-4`), buckets `1..=30` split `[1e-4, 10)`
/// evenly in `log10 γ`, then come "overflow" (`γ ≥ 10`) and "failed"
/// (no gap because the solver did not reach optimality).
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSpec {
    /// The 31 edges of the log-spaced buckets.
    pub edges: Vec<f64>,
    pub counts: BTreeMap<(ProblemClass, Relaxation), Vec<usize>>,
}

impl HistogramSpec {
    pub fn bucket_count(&self) -> usize {
        HISTOGRAM_BUCKETS + 3
    }

    pub fn bucket_label(&self, k: usize) -> String {
        match k {
            0 => "solved".into(),
            k if k <= HISTOGRAM_BUCKETS => {
                format!("[{:.3e}, {:.3e})", self.edges[k - 1], self.edges[k])
            }
            k if k == HISTOGRAM_BUCKETS + 1 => "overflow".into(),
            _ => "failed".into(),
        }
    }

    fn bucket_of(&self, gamma: Option<f64>) -> usize {
        let Some(g) = gamma else {
            return HISTOGRAM_BUCKETS + 2;
        };
        if g < SOLVED_GAP {
            return 0;
        }
        if g >= HISTOGRAM_TOP {
            return HISTOGRAM_BUCKETS + 1;
        }
        // Last edge not exceeding g; guards against rounding in log10.
        let k = self.edges.partition_point(|&e| e <= g);
        k.clamp(1, HISTOGRAM_BUCKETS)
    }
}

pub fn histogram(records: &[BenchRecord]) -> HistogramSpec {
    let lo = SOLVED_GAP.log10();
    let hi = HISTOGRAM_TOP.log10();
    let edges: Vec<f64> = (0..=HISTOGRAM_BUCKETS)
        .map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / HISTOGRAM_BUCKETS as f64))
        .collect();
    let mut spec = HistogramSpec {
        edges,
        counts: BTreeMap::new(),
    };
    for r in records {
        let k = spec.bucket_of(r.gamma);
        let row = spec
            .counts
            .entry((r.class, r.relaxation))
            .or_insert_with(|| vec![0; HISTOGRAM_BUCKETS + 3]);
        row[k] += 1;
    }
    spec
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn render(&self, format: ReportFormat) -> String {
        let mut out = String::new();
        match format {
            ReportFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.header).expect("in-memory write");
                for row in &self.rows {
                    w.write_record(row).expect("in-memory write");
                }
                out = String::from_utf8(w.into_inner().expect("in-memory flush"))
                    .expect("utf-8 input");
            }
            ReportFormat::Markdown => {
                let _ = writeln!(out, "| {} |", self.header.join(" | "));
                let rule: Vec<&str> = self.header.iter().map(|_| "---").collect();
                let _ = writeln!(out, "| {} |", rule.join(" | "));
                for row in &self.rows {
                    let _ = writeln!(out, "| {} |", row.join(" | "));
                }
            }
        }
        out
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

fn relaxations_in(records: &[BenchRecord]) -> Vec<Relaxation> {
    Relaxation::ALL
        .into_iter()
        .filter(|r| records.iter().any(|rec| rec.relaxation == *r))
        .collect()
}

/// Mean solve time per (n, p) and relaxation, one row per cell. Columns
/// named after a relaxation hold solver wall time; `*_total` columns include
/// building the program, rounding and refinement.
fn timing_table(records: &[BenchRecord]) -> Table {
    let rels = relaxations_in(records);
    let mut cells: BTreeMap<(usize, usize), BTreeMap<Relaxation, (Vec<f64>, Vec<f64>)>> =
        BTreeMap::new();
    for r in records {
        let e = cells
            .entry((r.n, r.p))
            .or_default()
            .entry(r.relaxation)
            .or_default();
        e.0.push(r.t_solve);
        e.1.push(r.t_total);
    }
    let mut header = vec!["n".to_string(), "p".to_string()];
    header.extend(rels.iter().map(|r| r.tag().to_string()));
    header.extend(rels.iter().map(|r| format!("{}_total", r.tag())));
    let rows = cells
        .iter()
        .map(|(&(n, p), by_rel)| {
            let mut row = vec![n.to_string(), p.to_string()];
            for pick in [0, 1] {
                for r in &rels {
                    row.push(match by_rel.get(r) {
                        Some(t) => format!("{:.4}", mean(if pick == 0 { &t.0 } else { &t.1 })),
                        None => String::new(),
                    });
                }
            }
            row
        })
        .collect();
    Table { header, rows }
}

fn histogram_table(records: &[BenchRecord]) -> Table {
    let spec = histogram(records);
    let header = ["class", "relaxation", "bucket", "lower", "upper", "count"]
        .map(String::from)
        .to_vec();
    let mut rows = Vec::new();
    for ((class, rel), counts) in &spec.counts {
        for (k, count) in counts.iter().enumerate() {
            let (lower, upper) = match k {
                0 => (String::new(), format!("{SOLVED_GAP:e}")),
                k if k <= HISTOGRAM_BUCKETS => (
                    format!("{:e}", spec.edges[k - 1]),
                    format!("{:e}", spec.edges[k]),
                ),
                k if k == HISTOGRAM_BUCKETS + 1 => (format!("{HISTOGRAM_TOP:e}"), String::new()),
                _ => (String::new(), String::new()),
            };
            rows.push(vec![
                class.to_string(),
                rel.to_string(),
                spec.bucket_label(k),
                lower,
                upper,
                count.to_string(),
            ]);
        }
    }
    Table { header, rows }
}

fn summary_table(records: &[BenchRecord]) -> Table {
    let mut groups: BTreeMap<(ProblemClass, Relaxation), Vec<&BenchRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.class, r.relaxation)).or_default().push(r);
    }
    let header = [
        "class",
        "relaxation",
        "instances",
        "optimal",
        "solved",
        "solved_rate",
        "median_gamma",
        "anomalies",
    ]
    .map(String::from)
    .to_vec();
    let rows = groups
        .iter()
        .map(|((class, rel), recs)| {
            let solved = recs.iter().filter(|r| r.solved).count();
            let gammas: Vec<f64> = recs.iter().filter_map(|r| r.gamma).collect();
            vec![
                class.to_string(),
                rel.to_string(),
                recs.len().to_string(),
                recs.iter().filter(|r| r.is_optimal()).count().to_string(),
                solved.to_string(),
                format!("{:.3}", solved as f64 / recs.len() as f64),
                median(gammas).map_or(String::new(), |g| format!("{g:.3e}")),
                recs.iter().filter(|r| r.is_anomalous()).count().to_string(),
            ]
        })
        .collect();
    Table { header, rows }
}

/// Renders one of the three report views of a results file.
pub fn render_report(records: &[BenchRecord], mode: ReportMode, format: ReportFormat) -> String {
    if records.is_empty() {
        return "empty report: the results file contains no records\n".to_string();
    }
    let table = match mode {
        ReportMode::TimingTable => timing_table(records),
        ReportMode::GapHistogram => histogram_table(records),
        ReportMode::Summary => summary_table(records),
    };
    table.render(format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::SolveStatus;

    fn record(class: ProblemClass, rel: Relaxation, gamma: Option<f64>) -> BenchRecord {
        BenchRecord {
            instance_id: "x".into(),
            class,
            n: 4,
            p: 2,
            seed: 0,
            relaxation: rel,
            d: Some(0.0),
            p_raw: Some(0.0),
            p_refined: Some(0.0),
            gamma,
            solved: gamma.is_some_and(|g| g < SOLVED_GAP),
            t_total: 1.0,
            t_solve: 0.5,
            iterations: 10,
            status: if gamma.is_some() {
                SolveStatus::Optimal
            } else {
                SolveStatus::Stalled
            },
        }
    }

    #[test]
    fn buckets_partition_the_records() {
        let gammas = [
            Some(0.0),
            Some(9.99e-5),
            Some(1e-4),
            Some(3e-3),
            Some(9.999),
            Some(10.0),
            Some(1e6),
            None,
        ];
        let recs: Vec<_> = gammas
            .iter()
            .map(|&g| record(ProblemClass::Random, Relaxation::Shor, g))
            .collect();
        let spec = histogram(&recs);
        let row = &spec.counts[&(ProblemClass::Random, Relaxation::Shor)];
        assert_eq!(row.len(), 33);
        assert_eq!(row.iter().sum::<usize>(), recs.len());
        assert_eq!(row[0], 2);
        assert_eq!(row[1], 1);
        assert_eq!(row[30], 1);
        assert_eq!(row[31], 2);
        assert_eq!(row[32], 1);
        assert!((spec.edges[30] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn empty_input_gives_notice() {
        let out = render_report(&[], ReportMode::Summary, ReportFormat::Csv);
        assert!(out.starts_with("empty report"));
    }

    #[test]
    fn markdown_summary() {
        let recs = vec![
            record(ProblemClass::Procrustes, Relaxation::Kron, Some(0.0)),
            record(ProblemClass::Procrustes, Relaxation::Kron, Some(0.5)),
        ];
        let out = render_report(&recs, ReportMode::Summary, ReportFormat::Markdown);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[2].contains("| 0.500 |"));
    }
}

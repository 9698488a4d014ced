//! Human-readable tables and JSON emission for metric reports.
//!
//! Tables use the D/T row layout: IoU and DetA/HOTA in percent, position
//! RMSE in metres, yaw RMSE in degrees, and `-` for values that are absent.

use std::fmt::Write;

use serde::Serialize;

use crate::metrics::{ClassMetrics, EvalMode, MetricsReport};
use crate::pipeline::{CampaignReport, ModeRows};

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

#[derive(Serialize)]
pub struct EvaluationOutput<'a> {
    pub mode: &'static str,
    pub alpha: f64,
    pub alpha_sweep: bool,
    #[serde(flatten)]
    pub report: &'a MetricsReport,
}

pub fn mode_label(mode: EvalMode) -> &'static str {
    match mode {
        EvalMode::Detection => "detection",
        EvalMode::Tracklet => "tracklet",
    }
}

fn cell(v: Option<f64>, scale: f64, digits: usize) -> String {
    match v {
        Some(x) => format!("{:.*}", digits, x * scale),
        None => "-".into(),
    }
}

struct Table {
    out: String,
}

impl Table {
    fn new(first: &str) -> Self {
        let mut out = String::new();
        writeln!(
            out,
            "{first:<14} {:>4} {:>8} {:>8} {:>8} {:>8} {:>8} {:>6} {:>6} {:>6}",
            "", "IoU %", "Pos m", "Rot °", "DetA %", "HOTA %", "TP", "FP", "FN"
        )
        .unwrap();
        Self { out }
    }

    fn row(&mut self, label: &str, mode: &str, m: &ClassMetrics) {
        writeln!(
            self.out,
            "{label:<14} {mode:>4} {:>8} {:>8} {:>8} {:>8} {:>8} {:>6} {:>6} {:>6}",
            cell(m.avg_iou, 100.0, 2),
            cell(m.pos_rmse, 1.0, 3),
            cell(m.yaw_rmse_deg(), 1.0, 2),
            cell(m.det_a, 100.0, 2),
            cell(m.hota, 100.0, 2),
            m.tp,
            m.fp,
            m.fn_,
        )
        .unwrap();
    }

    fn pair(&mut self, label: &str, rows: &ModeRows) {
        self.row(label, "D", &rows.detection);
        self.row(label, "T", &rows.tracklet);
    }
}

pub fn metrics_table(report: &MetricsReport, mode: EvalMode) -> String {
    let tag = match mode {
        EvalMode::Detection => "D",
        EvalMode::Tracklet => "T",
    };
    let mut t = Table::new("Class");
    for (class, m) in &report.per_class {
        t.row(class.as_str(), tag, m);
    }
    t.row("Ave", tag, &report.class_average);
    t.row("Overall", tag, &report.overall);
    t.out
}

pub fn campaign_table(report: &CampaignReport) -> String {
    let mut t = Table::new("Class");
    for (class, rows) in &report.per_class {
        t.pair(class.as_str(), rows);
    }
    t.pair("Ave", &report.average);
    let mut out = format!("campaign seed {}\n\n{}\n", report.seed, t.out);
    let mut trials = Table::new("Trial");
    for r in &report.trials {
        trials.pair(&format!("{:>3} {}", r.trial_id, r.class_id), &r.rows);
    }
    out.push_str(&trials.out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absent_values_render_as_dash() {
        let m = ClassMetrics {
            avg_iou: Some(0.8125),
            pos_rmse: Some(0.05),
            yaw_rmse: Some(std::f64::consts::PI),
            det_a: Some(0.6),
            ..ClassMetrics::default()
        };
        let report = MetricsReport {
            overall: m.clone(),
            per_class: [(crate::geometry::ClassId::Sw, m.clone())].into_iter().collect(),
            class_average: m,
        };
        let table = metrics_table(&report, EvalMode::Detection);
        let sw = table.lines().find(|l| l.starts_with("SW")).unwrap();
        let cols: Vec<&str> = sw.split_whitespace().collect();
        assert_eq!(cols, ["SW", "D", "81.25", "0.050", "180.00", "60.00", "-", "0", "0", "0"]);
        assert!(table.contains("Ave") && table.contains("Overall"));
    }
}

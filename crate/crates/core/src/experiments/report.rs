//! Study results and their on-disk rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::stats::{mean, std_dev};
use crate::error::{Error, Result};

/// One trained-and-evaluated run.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Data condition, e.g. `asymmetric` or `symmetric`; empty when unused.
    pub setting: String,
    /// Objective or study arm.
    pub arm: String,
    /// Sweep coordinate; zero for studies without one.
    pub x: f64,
    pub seed: u64,
    pub accuracy: f64,
    /// Mean cross-entropy on the target evaluation split.
    pub risk: f64,
    pub zero_one: f64,
    pub d_hat: Option<f64>,
    pub train_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub setting: String,
    pub arm: String,
    pub x: f64,
    pub n: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub risk_mean: f64,
    pub risk_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub study: String,
    pub cells: Vec<Cell>,
    pub verdicts: Vec<Verdict>,
    /// Notes about skipped grid points and similar.
    pub notes: Vec<String>,
    /// Fully resolved configuration, written verbatim as `config_echo`.
    pub config_echo: String,
}

pub const CELLS_HEADER: &str = "setting,arm,x,seed,accuracy,risk,zero_one,d_hat,train_samples";

impl StudyReport {
    /// Per `(setting, arm, x)` mean and standard deviation over seeds, in
    /// first-appearance order of `(setting, arm)` and ascending `x`.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut order: Vec<(String, String)> = Vec::new();
        let mut groups: BTreeMap<(usize, u64), Vec<&Cell>> = BTreeMap::new();
        for c in &self.cells {
            let key = (c.setting.clone(), c.arm.clone());
            let pos = match order.iter().position(|k| *k == key) {
                Some(p) => p,
                None => {
                    order.push(key);
                    order.len() - 1
                }
            };
            // x is non-negative, so its bit pattern orders like the value
            groups.entry((pos, c.x.to_bits())).or_default().push(c);
        }
        groups
            .into_iter()
            .map(|((pos, _), cells)| {
                let acc: Vec<f64> = cells.iter().map(|c| c.accuracy).collect();
                let risk: Vec<f64> = cells.iter().map(|c| c.risk).collect();
                Aggregate {
                    setting: order[pos].0.clone(),
                    arm: order[pos].1.clone(),
                    x: cells[0].x,
                    n: cells.len(),
                    accuracy_mean: mean(&acc),
                    accuracy_std: std_dev(&acc),
                    risk_mean: mean(&risk),
                    risk_std: std_dev(&risk),
                }
            })
            .collect()
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn cells_csv(&self) -> String {
        let mut out = format!("{CELLS_HEADER}\n");
        for c in &self.cells {
            let d_hat = c.d_hat.map(|d| format!("{d:?}")).unwrap_or_default();
            writeln!(
                out,
                "{},{},{:?},{},{:?},{:?},{:?},{},{}",
                c.setting,
                c.arm,
                c.x,
                c.seed,
                c.accuracy,
                c.risk,
                c.zero_one,
                d_hat,
                c.train_samples
            )
            .expect("string write");
        }
        out
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "study: {}", self.study).expect("string write");
        writeln!(s, "cells: {}", self.cells.len()).expect("string write");
        writeln!(
            s,
            "\nsetting,arm,x,n,accuracy_mean,accuracy_std,risk_mean,risk_std"
        )
        .expect("string write");
        for a in self.aggregates() {
            writeln!(
                s,
                "{},{},{:.4},{},{:.6},{:.6},{:.6},{:.6}",
                a.setting,
                a.arm,
                a.x,
                a.n,
                a.accuracy_mean,
                a.accuracy_std,
                a.risk_mean,
                a.risk_std
            )
            .expect("string write");
        }
        writeln!(s, "\nverdicts:").expect("string write");
        for v in &self.verdicts {
            let tag = if v.passed { "PASS" } else { "FAIL" };
            writeln!(s, "{tag} {}: {}", v.name, v.detail).expect("string write");
        }
        if !self.notes.is_empty() {
            writeln!(s, "\nnotes:").expect("string write");
            for n in &self.notes {
                writeln!(s, "- {n}").expect("string write");
            }
        }
        s
    }

    /// Mean accuracy against `x` with a ±1 std band, one path per series.
    pub fn curve_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const PAD: f64 = 50.0;
        const COLORS: [&str; 6] = [
            "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
        ];
        let aggs = self.aggregates();
        let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for a in &aggs {
            x_lo = x_lo.min(a.x);
            x_hi = x_hi.max(a.x);
            y_lo = y_lo.min(a.accuracy_mean - a.accuracy_std);
            y_hi = y_hi.max(a.accuracy_mean + a.accuracy_std);
        }
        if x_hi <= x_lo {
            x_lo -= 0.5;
            x_hi += 0.5;
        }
        if y_hi <= y_lo {
            y_lo -= 0.01;
            y_hi += 0.01;
        }
        let px = |x: f64| PAD + (x - x_lo) / (x_hi - x_lo) * (W - 2.0 * PAD);
        let py = |y: f64| H - PAD - (y - y_lo) / (y_hi - y_lo) * (H - 2.0 * PAD);

        let mut series: Vec<(String, Vec<&Aggregate>)> = Vec::new();
        for a in &aggs {
            let name = if a.setting.is_empty() {
                a.arm.clone()
            } else {
                format!("{}/{}", a.setting, a.arm)
            };
            match series.iter_mut().find(|(n, _)| *n == name) {
                Some((_, v)) => v.push(a),
                None => series.push((name, vec![a])),
            }
        }

        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
        )
        .expect("string write");
        writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).expect("string write");
        writeln!(
            s,
            r#"<line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}" stroke="black"/>"#,
            b = H - PAD,
            r = W - PAD
        )
        .expect("string write");
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">x</text><text x="12" y="{:.2}" font-size="12">accuracy</text>"#,
            W / 2.0,
            H - 12.0,
            H / 2.0
        )
        .expect("string write");
        for (label, v) in [(x_lo, px(x_lo)), (x_hi, px(x_hi))] {
            writeln!(s, r#"<text x="{v:.2}" y="{:.2}" font-size="10" text-anchor="middle">{label:.2}</text>"#, H - PAD + 14.0)
                .expect("string write");
        }
        for (label, v) in [(y_lo, py(y_lo)), (y_hi, py(y_hi))] {
            writeln!(
                s,
                r#"<text x="{:.2}" y="{v:.2}" font-size="10" text-anchor="end">{label:.3}</text>"#,
                PAD - 4.0
            )
            .expect("string write");
        }
        for (i, (name, pts)) in series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let upper: Vec<String> = pts
                .iter()
                .map(|a| format!("{:.2},{:.2}", px(a.x), py(a.accuracy_mean + a.accuracy_std)))
                .collect();
            let lower: Vec<String> = pts
                .iter()
                .rev()
                .map(|a| format!("{:.2},{:.2}", px(a.x), py(a.accuracy_mean - a.accuracy_std)))
                .collect();
            writeln!(
                s,
                r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
                upper.join(" "),
                lower.join(" ")
            )
            .expect("string write");
            let d: Vec<String> = pts
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    format!(
                        "{}{:.2},{:.2}",
                        if k == 0 { "M" } else { "L" },
                        px(a.x),
                        py(a.accuracy_mean)
                    )
                })
                .collect();
            writeln!(
                s,
                r#"<path d="{}" fill="none" stroke="{color}" stroke-width="2" data-series="{name}"/>"#,
                d.join(" ")
            )
            .expect("string write");
            writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" fill="{color}">{name}</text>"#,
                W - PAD - 120.0,
                PAD + 14.0 * i as f64
            )
            .expect("string write");
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Writes `cells.csv`, `summary.txt`, `curve.svg` and `config_echo` into `out`.
pub fn render_report(report: &StudyReport, out: &Path) -> Result<()> {
    if report.cells.is_empty() {
        return Err(Error::Empty("study report cells"));
    }
    fs::create_dir_all(out)?;
    fs::write(out.join("cells.csv"), report.cells_csv())?;
    fs::write(out.join("summary.txt"), report.summary_text())?;
    fs::write(out.join("curve.svg"), report.curve_svg())?;
    fs::write(out.join("config_echo"), &report.config_echo)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(arm: &str, x: f64, seed: u64, acc: f64) -> Cell {
        Cell {
            setting: String::new(),
            arm: arm.into(),
            x,
            seed,
            accuracy: acc,
            risk: 1.0 - acc,
            zero_one: 1.0 - acc,
            d_hat: None,
            train_samples: 10,
        }
    }

    fn report() -> StudyReport {
        let mut cells = Vec::new();
        for (i, x) in [0.1, 0.2, 0.3].into_iter().enumerate() {
            for seed in 0..3 {
                cells.push(cell(
                    "nci",
                    x,
                    seed,
                    0.8 + 0.05 * i as f64 + 0.01 * seed as f64,
                ));
                cells.push(cell("erm", x, seed, 0.7));
            }
        }
        StudyReport {
            study: "demo".into(),
            cells,
            verdicts: vec![Verdict {
                name: "trend".into(),
                passed: true,
                detail: "ok".into(),
            }],
            notes: Vec::new(),
            config_echo: "a = 1\n".into(),
        }
    }

    #[test]
    fn rendering_is_deterministic_and_structured() {
        let r = report();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        render_report(&r, a.path()).unwrap();
        render_report(&r, b.path()).unwrap();
        for f in ["cells.csv", "summary.txt", "curve.svg", "config_echo"] {
            assert_eq!(
                fs::read(a.path().join(f)).unwrap(),
                fs::read(b.path().join(f)).unwrap()
            );
        }
        let csv = fs::read_to_string(a.path().join("cells.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + r.cells.len());
        let svg = fs::read_to_string(a.path().join("curve.svg")).unwrap();
        assert_eq!(svg.matches("<path ").count(), 2);
    }

    #[test]
    fn aggregates_group_by_arm_and_x() {
        let aggs = report().aggregates();
        assert_eq!(aggs.len(), 6);
        assert_eq!(aggs[0].arm, "nci");
        assert!((aggs[0].accuracy_mean - 0.81).abs() < 1e-12);
        assert_eq!(aggs[3].arm, "erm");
    }

    #[test]
    fn empty_report_is_rejected() {
        let mut r = report();
        r.cells.clear();
        assert!(render_report(&r, tempfile::tempdir().unwrap().path()).is_err());
    }
}

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use flight_core::bounds::{Asymptote, BoundReport};
use flight_core::checks::CheckReport;
use flight_core::stochastic::{ConvergenceReport, ExpectedWelfareCurve};
use flight_core::{PeakResult, WelfareCurve};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub utility: String,
    pub peak: f64,
    pub peak_welfare: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub median: f64,
    pub midpoint: f64,
    pub rows: Vec<CompareRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Payload {
    Peak(PeakResult),
    Curve(WelfareCurve),
    Comparison(Comparison),
    Checks(Vec<CheckReport>),
    Bounds(BoundReport),
    Asymptotes(Vec<Asymptote>),
    Expected(ExpectedWelfareCurve),
    Convergence(ConvergenceReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub payload: Payload,
}

/// Twelve significant digits, shortest round-trip form of the rounded value.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn table(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn grid_rows<'a>(grid: &'a [f64], values: &'a [f64]) -> impl Iterator<Item = Vec<String>> + 'a {
    grid.iter().zip(values).map(|(y, w)| vec![num(*y), num(*w)])
}

impl Report {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
                s.push('\n');
                s
            }
            Format::Csv => self.csv(),
            Format::Text => self.text(),
        }
    }

    pub fn csv(&self) -> String {
        match &self.payload {
            Payload::Peak(p) => table(
                "peak,peak_welfare,bracket_width,iterations,boundary_clamped,plateau_left,plateau_right",
                [vec![
                    num(p.peak),
                    num(p.peak_welfare),
                    num(p.bracket_width),
                    p.iterations.to_string(),
                    p.boundary_clamped.to_string(),
                    opt(p.plateau.map(|q| q.0)),
                    opt(p.plateau.map(|q| q.1)),
                ]],
            ),
            Payload::Curve(c) => table("y,welfare", grid_rows(&c.grid, &c.values)),
            Payload::Comparison(c) => table(
                "utility,peak,peak_welfare,median,midpoint",
                c.rows.iter().map(|r| {
                    vec![
                        csv_field(&r.utility),
                        num(r.peak),
                        num(r.peak_welfare),
                        num(c.median),
                        num(c.midpoint),
                    ]
                }),
            ),
            Payload::Checks(list) => table(
                "theorem,passed,measured,bound,tolerance_used,witness",
                list.iter().map(|r| {
                    vec![
                        r.theorem.number().to_string(),
                        r.passed.to_string(),
                        num(r.measured),
                        num(r.bound),
                        num(r.tolerance_used),
                        csv_field(&r.witness),
                    ]
                }),
            ),
            Payload::Bounds(b) => table(
                "y,peak,observed_ratio,paper_lower,paper_upper,exact_lower,exact_upper,d_alpha,w_min,w_max,lambda_d,lambda_u,valid_paper_form,valid_exact_form,cross_cap",
                [vec![
                    num(b.y),
                    num(b.peak),
                    num(b.observed_ratio),
                    num(b.paper_lower),
                    num(b.paper_upper),
                    num(b.exact_lower),
                    num(b.exact_upper),
                    num(b.d_alpha),
                    num(b.w_min),
                    num(b.w_max),
                    num(b.lambda_d),
                    num(b.lambda_u),
                    b.valid_paper_form.to_string(),
                    b.valid_exact_form.to_string(),
                    opt(b.cross_cap),
                ]],
            ),
            Payload::Asymptotes(list) => table(
                "n,d_alpha,exponent,limit,cap",
                list.iter().map(|a| {
                    vec![a.n.to_string(), num(a.d_alpha), num(a.exponent), num(a.limit), num(a.cap())]
                }),
            ),
            Payload::Expected(c) => table("y,expected_welfare", grid_rows(&c.grid, &c.values)),
            Payload::Convergence(c) => table(
                "n,mean_abs_dev,std_err",
                c.rows
                    .iter()
                    .map(|r| vec![r.n.to_string(), num(r.mean_abs_dev), num(r.std_err)]),
            ),
        }
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        match &self.payload {
            Payload::Peak(p) => {
                let _ = writeln!(s, "peak          {}", num(p.peak));
                let _ = writeln!(s, "welfare       {}", num(p.peak_welfare));
                let _ = writeln!(s, "bracket       {}", num(p.bracket_width));
                let _ = writeln!(s, "iterations    {}", p.iterations);
                let _ = writeln!(s, "boundary      {}", p.boundary_clamped);
                if let Some((l, r)) = p.plateau {
                    let _ = writeln!(s, "plateau       [{}, {}]", num(l), num(r));
                }
            }
            Payload::Curve(c) => {
                let _ = writeln!(s, "welfare curve for {} ({} points)", c.alpha_id, c.grid.len());
                for (y, w) in c.grid.iter().zip(&c.values) {
                    let _ = writeln!(s, "{:>14}  {}", num(*y), num(*w));
                }
            }
            Payload::Comparison(c) => {
                let _ = writeln!(s, "median {}  midpoint {}", num(c.median), num(c.midpoint));
                for r in &c.rows {
                    let _ = writeln!(s, "{:<32} peak {:<16} welfare {}", r.utility, num(r.peak), num(r.peak_welfare));
                }
            }
            Payload::Checks(list) => {
                let failed = list.iter().filter(|r| !r.passed).count();
                let _ = writeln!(s, "{} checks, {} passed, {} failed", list.len(), list.len() - failed, failed);
                for r in list.iter().filter(|r| !r.passed) {
                    let _ = writeln!(
                        s,
                        "FAIL theorem {}: measured {} > bound {} (+{}): {}",
                        r.theorem.number(),
                        num(r.measured),
                        num(r.bound),
                        num(r.tolerance_used),
                        r.witness
                    );
                }
            }
            Payload::Bounds(b) => {
                let _ = writeln!(s, "y {}  peak {}", num(b.y), num(b.peak));
                let _ = writeln!(s, "observed ratio  {}", num(b.observed_ratio));
                let _ = writeln!(
                    s,
                    "exact form      [{}, {}]  {}",
                    num(b.exact_lower),
                    num(b.exact_upper),
                    if b.valid_exact_form { "holds" } else { "VIOLATED" }
                );
                let _ = writeln!(
                    s,
                    "closed form     [{}, {}]  {}",
                    num(b.paper_lower),
                    num(b.paper_upper),
                    if b.valid_paper_form { "holds" } else { "does not hold (it assumes an agent at an endpoint)" }
                );
                let _ = writeln!(
                    s,
                    "D_alpha {}  w_min {}  w_max {}  lambda [{}, {}]",
                    num(b.d_alpha),
                    num(b.w_min),
                    num(b.w_max),
                    num(b.lambda_d),
                    num(b.lambda_u)
                );
                if let Some(cap) = b.cross_cap {
                    let _ = writeln!(s, "cross cap       {}", num(cap));
                }
            }
            Payload::Asymptotes(list) => {
                let _ = writeln!(s, "{:>10}  {:>16}  {:>16}  {:>16}", "n", "exponent", "cap", "limit");
                for a in list {
                    let _ = writeln!(
                        s,
                        "{:>10}  {:>16}  {:>16}  {:>16}",
                        a.n,
                        num(a.exponent),
                        num(a.cap()),
                        num(a.limit)
                    );
                }
            }
            Payload::Expected(c) => {
                let _ = writeln!(
                    s,
                    "expected welfare for {} with n = {} ({} quadrature nodes)",
                    c.alpha_id, c.n, c.quadrature_nodes
                );
                for (y, w) in c.grid.iter().zip(&c.values) {
                    let _ = writeln!(s, "{:>14}  {}", num(*y), num(*w));
                }
            }
            Payload::Convergence(c) => {
                let _ = writeln!(s, "y {}  target {}  replicates {}", num(c.y), num(c.target), c.replicates);
                let _ = writeln!(s, "{:>10}  {:>16}  {:>16}  {:>16}", "n", "mean |dev|", "std err", "mean W/n");
                for r in &c.rows {
                    let _ = writeln!(
                        s,
                        "{:>10}  {:>16}  {:>16}  {:>16}",
                        r.n,
                        num(r.mean_abs_dev),
                        num(r.std_err),
                        num(r.mean_normalized)
                    );
                }
                if let Some(slope) = c.slope_estimate {
                    let _ = writeln!(s, "log-log slope {}", num(slope));
                }
            }
        }
        s
    }
}

pub fn emit_report(report: &Report, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let body = report.render(format);
    match out {
        Some(path) => std::fs::write(path, body).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use flipflop_core::cycle::SwitchEvent;
use flipflop_core::ode::Trajectory;
use flipflop_core::Branch;
use serde::Serialize;

pub const TRAJECTORY_HEADER: &str = "t,w,eta_S,eta_N,xi_N,branch";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn push_row(out: &mut String, t: f64, y: &[f64], branch: Option<Branch>) {
    let xi = y.get(3).map(|&x| num(x)).unwrap_or_default();
    let label = branch.map(Branch::as_str).unwrap_or_default();
    writeln!(out, "{},{},{},{},{xi},{label}", num(t), num(y[0]), num(y[1]), num(y[2])).expect("string write");
}

/// Accepted steps, or `samples` uniform dense points, as trajectory CSV.
pub fn trajectory_csv(traj: &Trajectory, samples: Option<usize>) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    match samples {
        Some(n) => {
            for k in 0..n {
                let t = traj.t_start() + traj.duration() * k as f64 / (n - 1) as f64;
                let y = traj.interpolate(t).expect("inside range");
                push_row(&mut out, t, &y, traj.branch_at(t));
            }
        }
        None => {
            for (i, (t, y)) in traj.times.iter().zip(&traj.states).enumerate() {
                let seg = traj.segments.get(i.saturating_sub(1));
                push_row(&mut out, *t, y, seg.and_then(|s| s.branch));
            }
        }
    }
    out
}

#[derive(Debug, Serialize)]
pub struct EventRecord {
    pub t: f64,
    pub label: &'static str,
    pub w: f64,
    #[serde(rename = "eta_S")]
    pub eta_s: f64,
    #[serde(rename = "eta_N")]
    pub eta_n: f64,
    #[serde(rename = "xi_N")]
    pub xi_n: f64,
    pub margin_plus: f64,
    pub margin_minus: f64,
}

impl From<&SwitchEvent> for EventRecord {
    fn from(e: &SwitchEvent) -> Self {
        Self {
            t: e.t,
            label: e.class.label.as_str(),
            w: e.state.w,
            eta_s: e.state.eta_s,
            eta_n: e.state.eta_n,
            xi_n: e.state.xi_n,
            margin_plus: e.class.margin_plus,
            margin_minus: e.class.margin_minus,
        }
    }
}

/// Quotes a CSV field when needed.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

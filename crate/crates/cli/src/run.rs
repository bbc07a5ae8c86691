use std::fmt::Write as _;
use std::path::Path;

use anyhow::anyhow;
use flipflop_core::cycle::{find_limit_cycle, r_points, simulate_flipflop, CycleMetrics, LimitCycle};
use flipflop_core::equilibria::{branch_equilibria, find_equilibria3, lift_to_4d, EquilibriumReport};
use flipflop_core::geometry::{
    classify_sigma_point, epsilon_bound, gamma, is_separated, mass_balance, normal_component, SIGMA_TOL,
};
use flipflop_core::model::ReducedSystem;
use flipflop_core::ode::integrate;
use flipflop_core::{Branch, ClimateState3, ClimateState4, Model, ModelParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ScenarioConfig, SimulateMode};
use crate::output::{csv_field, num, trajectory_csv, write_json, write_text, EventRecord};
use crate::Failure;

fn regime(model: &Model) -> &'static str {
    if is_separated(model) {
        "separated"
    } else {
        "outside separation regime"
    }
}

fn build_model(params: &ModelParams) -> Result<Model, Failure> {
    Model::new(params.clone()).map_err(|e| Failure::Config(e.into()))
}

fn solver(e: flipflop_core::Error) -> Failure {
    Failure::Solver(e.into())
}

#[derive(Serialize)]
struct LiftedBranches {
    advance: Vec<EquilibriumReport>,
    retreat: Vec<EquilibriumReport>,
}

#[derive(Serialize)]
struct EquilibriaFile {
    t_cs: f64,
    t_cn: f64,
    equilibria: Vec<EquilibriumReport>,
    lifted: LiftedBranches,
    epsilon_bound: f64,
    regime: &'static str,
}

pub fn equilibria(cfg: &ScenarioConfig, out: &Path) -> Result<(), Failure> {
    let model = build_model(&cfg.params)?;
    let t_cs = cfg.equilibria.t_cs.unwrap_or(cfg.params.t_cs);
    let t_cn = cfg.equilibria.t_cn.unwrap_or(cfg.params.t_cn_plus);
    let equilibria = find_equilibria3(&model, t_cs, t_cn);
    if equilibria.is_empty() {
        return Err(Failure::Solver(anyhow!("no interior equilibrium for T_cS = {t_cs}, T_cN = {t_cn}")));
    }
    let lift = |branch| -> Result<Vec<EquilibriumReport>, Failure> {
        branch_equilibria(&model, branch)
            .iter()
            .map(|eq| lift_to_4d(&model, branch, eq).map_err(solver))
            .collect()
    };
    let file = EquilibriaFile {
        t_cs,
        t_cn,
        equilibria,
        lifted: LiftedBranches {
            advance: lift(Branch::Advance)?,
            retreat: lift(Branch::Retreat)?,
        },
        epsilon_bound: epsilon_bound(&model),
        regime: regime(&model),
    };
    for eq in &file.equilibria {
        println!("{:?} {:?}", eq.point, eq.stability);
    }
    write_json(&out.join("equilibria.json"), &file).map_err(Failure::Io)
}

pub fn simulate(cfg: &ScenarioConfig, out: &Path) -> Result<(), Failure> {
    let model = build_model(&cfg.params)?;
    let opt = &cfg.simulate;
    let init = &opt.initial;
    let w = match init.w {
        Some(w) => w,
        None => model.f_eval(init.eta_s, init.eta_n).map_err(|e| Failure::Config(e.into()))?,
    };
    let (trajectory, events) = match opt.mode {
        SimulateMode::Reduced => {
            let sys = ReducedSystem {
                model: &model,
                t_cs: cfg.params.t_cs,
                t_cn: opt.t_cn.unwrap_or(cfg.params.t_cn_plus),
            };
            let start = ClimateState3::new(w, init.eta_s, init.eta_n);
            let traj = integrate(&sys, &start.to_array(), (0.0, opt.t_end), &cfg.integrator).map_err(solver)?;
            (traj, Vec::new())
        }
        SimulateMode::Flipflop => {
            let start = ClimateState4::new(w, init.eta_s, init.eta_n, init.xi_n.unwrap_or(init.eta_n));
            let run = simulate_flipflop(&model, &start, opt.t_end, &cfg.integrator).map_err(solver)?;
            let events: Vec<EventRecord> = run.events.iter().map(EventRecord::from).collect();
            (run.trajectory, events)
        }
    };
    let last = trajectory.last_state();
    println!("t = {}: {:?}, {} switches", trajectory.t_end(), last, events.len());
    write_text(&out.join("trajectory.csv"), &trajectory_csv(&trajectory, opt.samples)).map_err(Failure::Io)?;
    write_json(&out.join("events.json"), &events).map_err(Failure::Io)
}

#[derive(Serialize)]
struct CycleFile<'a> {
    regime: &'static str,
    /// Period, amplitudes and contraction come from this computation alone.
    self_derived: bool,
    params: &'a ModelParams,
    cycle: &'a LimitCycle,
}

pub fn cycle(cfg: &ScenarioConfig, out: &Path) -> Result<(), Failure> {
    let model = build_model(&cfg.params)?;
    let cycle = find_limit_cycle(&model, None, &cfg.cycle.to_config(&cfg.integrator)).map_err(solver)?;
    println!(
        "period {} after {} iterations, closure {:e}, contraction {:e}",
        cycle.period, cycle.iterations, cycle.closure_error, cycle.contraction
    );
    let file = CycleFile {
        regime: regime(&model),
        self_derived: true,
        params: &cfg.params,
        cycle: &cycle,
    };
    write_json(&out.join("cycle.json"), &file).map_err(Failure::Io)?;
    let retreat = cycle.retreat.clone().shifted(cycle.advance_duration);
    write_text(&out.join("advance.csv"), &trajectory_csv(&cycle.advance, None)).map_err(Failure::Io)?;
    write_text(&out.join("retreat.csv"), &trajectory_csv(&retreat, None)).map_err(Failure::Io)
}

const SWEEP_HEADER: &str = "eps,t_cn_minus,rho,found,separated,iterations,period,advance_fraction,\
amplitude_eta_N,amplitude_eta_S,amplitude_xi_N,sync_lag,contraction,error";

struct SweepRow {
    eps: f64,
    t_cn_minus: f64,
    rho: f64,
    outcome: Result<(bool, usize, f64, f64, CycleMetrics), String>,
}

fn sweep_point(cfg: &ScenarioConfig, eps: f64, t_cn_minus: f64, rho: f64) -> SweepRow {
    let mut params = cfg.params.clone();
    params.eps = eps;
    params.t_cn_minus = t_cn_minus;
    params.rho = rho;
    let outcome = Model::new(params).map_err(|e| e.to_string()).and_then(|model| {
        find_limit_cycle(&model, None, &cfg.cycle.to_config(&cfg.integrator))
            .map(|c| (c.separated, c.iterations, c.period, c.contraction, c.metrics))
            .map_err(|e| e.to_string())
    });
    SweepRow {
        eps,
        t_cn_minus,
        rho,
        outcome,
    }
}

fn sweep_line(row: &SweepRow) -> String {
    let mut line = format!("{},{},{},", num(row.eps), num(row.t_cn_minus), num(row.rho));
    match &row.outcome {
        Ok((separated, iterations, period, contraction, m)) => {
            let _ = write!(
                line,
                "true,{separated},{iterations},{},{},{},{},{},{},{},",
                num(*period),
                num(m.advance_fraction),
                num(m.amplitude_eta_n),
                num(m.amplitude_eta_s),
                num(m.amplitude_xi_n),
                num(m.sync_lag),
                num(*contraction)
            );
        }
        Err(e) => {
            let _ = write!(line, "false,,,,,,,,,,{}", csv_field(e));
        }
    }
    line
}

pub fn sweep(cfg: &ScenarioConfig, out: &Path, jobs: Option<usize>) -> Result<(), Failure> {
    let axis = |v: &Option<Vec<f64>>, base: f64| v.clone().unwrap_or_else(|| vec![base]);
    let eps = axis(&cfg.sweep.eps, cfg.params.eps);
    let t_minus = axis(&cfg.sweep.t_cn_minus, cfg.params.t_cn_minus);
    let rho = axis(&cfg.sweep.rho, cfg.params.rho);
    let mut grid = Vec::with_capacity(eps.len() * t_minus.len() * rho.len());
    for &e in &eps {
        for &t in &t_minus {
            for &r in &rho {
                grid.push((e, t, r));
            }
        }
    }

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Failure::Config(e.into()))?;
    let rows: Vec<SweepRow> = pool.install(|| grid.par_iter().map(|&(e, t, r)| sweep_point(cfg, e, t, r)).collect());

    let mut text = String::from(SWEEP_HEADER);
    text.push('\n');
    for row in &rows {
        text.push_str(&sweep_line(row));
        text.push('\n');
    }
    let found = rows.iter().filter(|r| r.outcome.is_ok()).count();
    println!("{} grid points, {found} cycles found", rows.len());
    write_text(&out.join("sweep.csv"), &text).map_err(Failure::Io)
}

#[derive(Serialize)]
struct ClassifiedPoint {
    w: f64,
    #[serde(rename = "eta_S")]
    eta_s: f64,
    #[serde(rename = "eta_N")]
    eta_n: f64,
    #[serde(rename = "xi_N")]
    xi_n: f64,
    h: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    margin_plus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    margin_minus: Option<f64>,
    retreat_normal_component: f64,
    advance_normal_component: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct ClassifyFile {
    epsilon_bound: f64,
    regime: &'static str,
    points: Vec<ClassifiedPoint>,
}

pub fn classify(cfg: &ScenarioConfig, out: &Path) -> Result<(), Failure> {
    let model = build_model(&cfg.params)?;
    let points: Vec<ClimateState4> = if cfg.classify.points.is_empty() {
        let (rp, rm) = r_points(&model).map_err(solver)?;
        vec![rp, rm]
    } else {
        cfg.classify
            .points
            .iter()
            .map(|p| ClimateState4::new(p.w, p.eta_s, p.eta_n, p.xi_n.unwrap_or_else(|| gamma(&model, p.eta_n))))
            .collect()
    };
    let classified = points
        .iter()
        .map(|s| {
            let class = classify_sigma_point(&model, s, SIGMA_TOL);
            let ok = class.as_ref().ok();
            ClassifiedPoint {
                w: s.w,
                eta_s: s.eta_s,
                eta_n: s.eta_n,
                xi_n: s.xi_n,
                h: mass_balance(&model, s),
                label: ok.map(|c| c.label.as_str()),
                margin_plus: ok.map(|c| c.margin_plus),
                margin_minus: ok.map(|c| c.margin_minus),
                retreat_normal_component: normal_component(&model, Branch::Retreat, s),
                advance_normal_component: normal_component(&model, Branch::Advance, s),
                error: class.err().map(|e| e.to_string()),
            }
        })
        .collect::<Vec<_>>();
    for p in &classified {
        println!("{:?}", p.label.unwrap_or("off sigma"));
    }
    let file = ClassifyFile {
        epsilon_bound: epsilon_bound(&model),
        regime: regime(&model),
        points: classified,
    };
    write_json(&out.join("classify.json"), &file).map_err(Failure::Io)
}

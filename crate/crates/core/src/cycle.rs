//! Half return maps on `Σ`, Picard iteration to the glacial limit cycle, and
//! free-running Filippov trajectories.

use serde::{Deserialize, Serialize};

use crate::equilibria::{lift_to_4d, stable_equilibrium};
use crate::error::{Error, Result};
use crate::geometry::{
    classify_sigma_point, epsilon_bound, gamma, mass_balance, project_to_sigma, tangency_w, SigmaClass, SigmaLabel,
    SIGMA_TOL,
};
use crate::model::BranchSystem;
use crate::ode::{integrate_to_event, integrate_with_event, Direction, IntegratorConfig, Trajectory};
use crate::params::{Branch, ClimateState4, Model};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleConfig {
    /// Picard stopping tolerance on `‖v_{k+1} - v_k‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// Dense samples per period for the metrics.
    pub samples: usize,
    /// Perturbation size for the contraction estimate.
    pub delta: f64,
    pub integrator: IntegratorConfig,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            samples: 4096,
            delta: 1e-4,
            integrator: IntegratorConfig::default(),
        }
    }
}

impl CycleConfig {
    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        if !(self.tol > 0.0) || self.max_iter == 0 || self.samples < 2 || !(self.delta > 0.0) {
            return Err(Error::InvalidParams(
                "cycle config needs tol > 0, max_iter > 0, samples >= 2, delta > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Stable equilibria of `ψ_+` and `ψ_-` placed on `Σ` through `γ`.
pub fn r_points(model: &Model) -> Result<(ClimateState4, ClimateState4)> {
    let lift = |branch| -> Result<ClimateState4> {
        let eq = stable_equilibrium(model, branch)?;
        let s = eq.state3();
        Ok(s.with_xi(gamma(model, s.eta_n)))
    };
    Ok((lift(Branch::Retreat)?, lift(Branch::Advance)?))
}

/// Stable equilibria `P^s_±` of the two 4-D branch fields.
pub fn p_points(model: &Model) -> Result<(ClimateState4, ClimateState4)> {
    let lift = |branch| -> Result<ClimateState4> {
        let eq = stable_equilibrium(model, branch)?;
        Ok(lift_to_4d(model, branch, &eq)?.state4().expect("lifted point is 4-D"))
    };
    Ok((lift(Branch::Retreat)?, lift(Branch::Advance)?))
}

/// One leg of the return map.
#[derive(Debug, Clone)]
pub struct HalfMap {
    pub branch: Branch,
    pub start: ClimateState4,
    /// Exit point, projected onto `Σ`.
    pub end: ClimateState4,
    /// `|h|` at the located exit before projection.
    pub event_residual: f64,
    pub duration: f64,
    pub exit: SigmaClass,
    pub trajectory: Trajectory,
}

fn entry_label(branch: Branch) -> SigmaLabel {
    match branch {
        Branch::Advance => SigmaLabel::CrossingPlus,
        Branch::Retreat => SigmaLabel::CrossingMinus,
    }
}

fn exit_direction(branch: Branch) -> Direction {
    match branch {
        Branch::Advance => Direction::Rising,
        Branch::Retreat => Direction::Falling,
    }
}

fn check_crossing(model: &Model, t: f64, s: &ClimateState4, class: &SigmaClass, want: SigmaLabel) -> Result<()> {
    match class.label {
        l if l == want => Ok(()),
        SigmaLabel::Sliding => Err(Error::Sliding {
            t,
            w: s.w,
            h_plus: tangency_w(model, Branch::Retreat, s.eta_n),
            h_minus: tangency_w(model, Branch::Advance, s.eta_n),
        }),
        other => Err(Error::WrongRegion(format!(
            "expected {} at t = {t}, found {}",
            want.as_str(),
            other.as_str()
        ))),
    }
}

/// `r_-` (advance, from `Σ_+` to `Σ_-`) or `r_+` (retreat, from `Σ_-` to `Σ_+`).
pub fn half_map(model: &Model, branch: Branch, v: &ClimateState4, cfg: &IntegratorConfig) -> Result<HalfMap> {
    let start_class = classify_sigma_point(model, v, SIGMA_TOL)?;
    check_crossing(model, 0.0, v, &start_class, entry_label(branch))?;
    let sys = BranchSystem { model, branch };
    let event = |y: &[f64]| mass_balance(model, &ClimateState4::from_slice(y));
    let hit = integrate_to_event(&sys, event, exit_direction(branch), &v.to_array(), 0.0, cfg).map_err(|e| match e {
        Error::NoEvent { t_end } => Error::NoCrossing(format!("{branch} flow from {v:?} did not return by t = {t_end}")),
        other => other,
    })?;
    if hit.residual.abs() > cfg.event_tol {
        return Err(Error::NotOnSigma(hit.residual.abs()));
    }
    let located = ClimateState4::from_slice(&hit.state);
    let end = project_to_sigma(model, &located);
    let exit = classify_sigma_point(model, &end, SIGMA_TOL)?;
    check_crossing(model, hit.t, &end, &exit, entry_label(branch.other()))?;
    Ok(HalfMap {
        branch,
        start: *v,
        end,
        event_residual: hit.residual.abs(),
        duration: hit.t,
        exit,
        trajectory: hit.trajectory.labelled(branch),
    })
}

/// One application of `r = r_+ ∘ r_-`.
#[derive(Debug, Clone)]
pub struct ReturnMap {
    pub advance: HalfMap,
    pub retreat: HalfMap,
}

impl ReturnMap {
    pub fn image(&self) -> ClimateState4 {
        self.retreat.end
    }

    pub fn period(&self) -> f64 {
        self.advance.duration + self.retreat.duration
    }
}

/// The composite return map from `Σ_+` to itself.
pub fn return_map(model: &Model, v: &ClimateState4, cfg: &IntegratorConfig) -> Result<ReturnMap> {
    let advance = half_map(model, Branch::Advance, v, cfg)?;
    let retreat = half_map(model, Branch::Retreat, &advance.end, cfg)?;
    Ok(ReturnMap { advance, retreat })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleMetrics {
    pub amplitude_eta_n: f64,
    pub amplitude_eta_s: f64,
    pub amplitude_xi_n: f64,
    pub advance_fraction: f64,
    /// Lag maximizing the circular cross-correlation of `η_N` and `-η_S`, as a
    /// fraction of the period.
    pub sync_lag: f64,
}

fn peak_to_peak(xs: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

fn circular_lag(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    if n == 0 {
        return 0.0;
    }
    let center = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter().map(|a| a - mean).collect::<Vec<_>>()
    };
    let (x, y) = (center(x), center(y));
    let mut best = (0, f64::NEG_INFINITY);
    for k in 0..n {
        let c: f64 = (0..n).map(|i| x[i] * y[(i + k) % n]).sum();
        if c > best.1 {
            best = (k, c);
        }
    }
    best.0.min(n - best.0) as f64 / n as f64
}

/// Metrics from samples `(w, η_S, η_N, ξ_N)` spread uniformly over one period.
pub fn metrics_from_samples(states: &[ClimateState4], advance_duration: f64, period: f64) -> CycleMetrics {
    let eta_n: Vec<f64> = states.iter().map(|s| s.eta_n).collect();
    let neg_eta_s: Vec<f64> = states.iter().map(|s| -s.eta_s).collect();
    CycleMetrics {
        amplitude_eta_n: peak_to_peak(eta_n.iter().copied()),
        amplitude_eta_s: peak_to_peak(states.iter().map(|s| s.eta_s)),
        amplitude_xi_n: peak_to_peak(states.iter().map(|s| s.xi_n)),
        advance_fraction: if period > 0.0 { advance_duration / period } else { 0.0 },
        sync_lag: circular_lag(&eta_n, &neg_eta_s),
    }
}

/// The attracting cycle: an advance leg from `v*` and a retreat leg back.
#[derive(Debug, Clone, Serialize)]
pub struct LimitCycle {
    pub fixed_point: ClimateState4,
    pub crossing_minus_point: ClimateState4,
    pub period: f64,
    pub advance_duration: f64,
    pub retreat_duration: f64,
    /// `‖r(v*) - v*‖`.
    pub closure_error: f64,
    pub iterations: usize,
    /// `‖v_{k+1} - v_k‖` per iteration.
    pub steps: Vec<f64>,
    pub contraction: f64,
    pub metrics: CycleMetrics,
    pub eps: f64,
    pub epsilon_bound: f64,
    /// Whether `ε` is below the bound that keeps `h_+ < h_-`.
    pub separated: bool,
    #[serde(skip)]
    pub advance: Trajectory,
    #[serde(skip)]
    pub retreat: Trajectory,
}

impl LimitCycle {
    /// Advance then retreat on a common time axis starting at 0.
    pub fn full_trajectory(&self) -> Trajectory {
        let mut t = self.advance.clone();
        t.append(self.retreat.clone().shifted(self.advance_duration));
        t
    }

    pub fn sample(&self, n: usize) -> Vec<(f64, ClimateState4)> {
        self.full_trajectory()
            .sample_uniform(n)
            .into_iter()
            .map(|(t, y)| (t, ClimateState4::from_slice(&y)))
            .collect()
    }
}

/// Metrics of a converged cycle from `samples` dense points.
pub fn cycle_metrics(cycle: &LimitCycle, samples: usize) -> CycleMetrics {
    let states: Vec<ClimateState4> = cycle.sample(samples).into_iter().map(|(_, s)| s).collect();
    metrics_from_samples(&states, cycle.advance_duration, cycle.period)
}

/// Largest ratio `‖r(v* + δu) - r(v*)‖ / ‖δu‖` over the coordinate directions
/// `w`, `η_S`, `η_N`, with `ξ_N` kept on `Σ`. `δ` halves when a perturbed point
/// leaves `Σ_+` or its return fails.
pub fn contraction_estimate(model: &Model, v_star: &ClimateState4, delta: f64, cfg: &IntegratorConfig) -> Result<f64> {
    const SHRINKS: usize = 8;
    let base = return_map(model, v_star, cfg)?.image();
    let mut worst: f64 = 0.0;
    for axis in 0..3 {
        let mut d = delta;
        let mut ratio = None;
        for _ in 0..SHRINKS {
            let mut y = v_star.to_array();
            y[axis] += d;
            let v = project_to_sigma(model, &ClimateState4::from_slice(&y));
            if let Ok(r) = return_map(model, &v, cfg) {
                ratio = Some(r.image().distance(&base) / v.distance(v_star));
                break;
            }
            d *= 0.5;
        }
        let ratio = ratio.ok_or_else(|| {
            Error::WrongRegion(format!("perturbations along axis {axis} leave the crossing region down to delta = {d:e}"))
        })?;
        worst = worst.max(ratio);
    }
    Ok(worst)
}

/// Picard iteration of the return map from `init` (default `R_+`).
pub fn find_limit_cycle(model: &Model, init: Option<ClimateState4>, cfg: &CycleConfig) -> Result<LimitCycle> {
    cfg.validate()?;
    let ic = &cfg.integrator;
    let mut v = match init {
        Some(v) => v,
        None => r_points(model)?.0,
    };
    let mut steps = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let next = return_map(model, &v, ic)?.image();
        let step = next.distance(&v);
        steps.push(step);
        v = next;
        if step < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations: steps.len(),
            last_step: steps.last().copied().unwrap_or(f64::NAN),
        });
    }
    let map = return_map(model, &v, ic)?;
    let contraction = contraction_estimate(model, &v, cfg.delta, ic)?;
    let mut cycle = LimitCycle {
        fixed_point: v,
        crossing_minus_point: map.advance.end,
        period: map.period(),
        advance_duration: map.advance.duration,
        retreat_duration: map.retreat.duration,
        closure_error: map.image().distance(&v),
        iterations: steps.len(),
        steps,
        contraction,
        metrics: metrics_from_samples(&[], 0.0, 0.0),
        eps: model.params.eps,
        epsilon_bound: epsilon_bound(model),
        separated: model.params.eps < epsilon_bound(model),
        advance: map.advance.trajectory,
        retreat: map.retreat.trajectory,
    };
    cycle.metrics = cycle_metrics(&cycle, cfg.samples);
    Ok(cycle)
}

/// A located switch of the free-running Filippov flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchEvent {
    pub t: f64,
    pub state: ClimateState4,
    pub from: Branch,
    pub to: Branch,
    pub class: SigmaClass,
    /// `|h|` at the located crossing before projection onto `Σ`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct FlipflopRun {
    pub trajectory: Trajectory,
    pub events: Vec<SwitchEvent>,
}

/// Branch selected at a state: by the sign of `h` off `Σ`, by the crossing
/// direction on it.
pub fn initial_branch(model: &Model, s: &ClimateState4) -> Result<Branch> {
    let h = mass_balance(model, s);
    if h.abs() >= SIGMA_TOL {
        return Ok(if h > 0.0 { Branch::Retreat } else { Branch::Advance });
    }
    let class = classify_sigma_point(model, s, SIGMA_TOL)?;
    match class.label {
        SigmaLabel::CrossingPlus => Ok(Branch::Advance),
        SigmaLabel::CrossingMinus => Ok(Branch::Retreat),
        SigmaLabel::Sliding => Err(Error::Sliding {
            t: 0.0,
            w: s.w,
            h_plus: s.w - class.margin_plus,
            h_minus: s.w - class.margin_minus,
        }),
        other => Err(Error::WrongRegion(format!("start point is on {}", other.as_str()))),
    }
}

/// Integrates the switched system over `[0, t_end]`, switching fields at each
/// crossing of `Σ`. Reaching sliding or tangency is an error.
pub fn simulate_flipflop(model: &Model, init: &ClimateState4, t_end: f64, cfg: &IntegratorConfig) -> Result<FlipflopRun> {
    let mut branch = initial_branch(model, init)?;
    let mut t = 0.0;
    let mut y = init.to_array().to_vec();
    let mut out = Trajectory::default();
    let mut events = Vec::new();
    let event = |y: &[f64]| mass_balance(model, &ClimateState4::from_slice(y));
    while t < t_end {
        let sys = BranchSystem { model, branch };
        let mut leg = integrate_with_event(&sys, event, exit_direction(branch), &y, (t, t_end), cfg)?;
        let hit = leg.events.pop();
        out.append(leg.labelled(branch));
        let Some(hit) = hit else {
            break;
        };
        let located = ClimateState4::from_slice(&hit.state);
        let residual = mass_balance(model, &located).abs();
        if residual > cfg.event_tol {
            return Err(Error::NotOnSigma(residual));
        }
        let at = project_to_sigma(model, &located);
        let class = classify_sigma_point(model, &at, SIGMA_TOL)?;
        check_crossing(model, hit.t, &at, &class, entry_label(branch.other()))?;
        events.push(SwitchEvent {
            t: hit.t,
            state: at,
            from: branch,
            to: branch.other(),
            class,
            residual,
        });
        *out.states.last_mut().expect("leg ends at the event") = at.to_array().to_vec();
        branch = branch.other();
        t = hit.t;
        y = at.to_array().to_vec();
    }
    Ok(FlipflopRun { trajectory: out, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn model() -> Model {
        Model::reference()
    }

    #[test]
    fn r_points_on_sigma() {
        let m = model();
        let (rp, rm) = r_points(&m).unwrap();
        assert_abs_diff_eq!(rp.w, 5.188, epsilon = 5e-3);
        assert_abs_diff_eq!(rp.xi_n, 1.6 * rp.eta_n - 0.6, epsilon = 1e-14);
        assert_abs_diff_eq!(rm.eta_n, 0.795, epsilon = 5e-3);
        assert_abs_diff_eq!(mass_balance(&m, &rp), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mass_balance(&m, &rm), 0.0, epsilon = 1e-14);
        assert_eq!(classify_sigma_point(&m, &rp, SIGMA_TOL).unwrap().label, SigmaLabel::CrossingPlus);
        assert_eq!(classify_sigma_point(&m, &rm, SIGMA_TOL).unwrap().label, SigmaLabel::CrossingMinus);
    }

    #[test]
    fn half_map_rejects_wrong_region() {
        let m = model();
        let (rp, rm) = r_points(&m).unwrap();
        let cfg = IntegratorConfig::default();
        assert!(matches!(half_map(&m, Branch::Retreat, &rp, &cfg), Err(Error::WrongRegion(_))));
        assert!(matches!(half_map(&m, Branch::Advance, &rm, &cfg), Err(Error::WrongRegion(_))));
        let off = ClimateState4 { xi_n: rp.xi_n - 0.1, ..rp };
        assert!(matches!(half_map(&m, Branch::Advance, &off, &cfg), Err(Error::NotOnSigma(_))));
    }

    #[test]
    fn advance_leg_lands_in_crossing_minus() {
        let m = model();
        let (rp, rm) = r_points(&m).unwrap();
        let leg = half_map(&m, Branch::Advance, &rp, &IntegratorConfig::default()).unwrap();
        assert!(leg.duration > 0.0);
        assert_eq!(leg.exit.label, SigmaLabel::CrossingMinus);
        assert!(leg.end.w > tangency_w(&m, Branch::Advance, leg.end.eta_n));
        assert!(leg.event_residual < 1e-10);
        assert!(leg.end.distance(&rm) < 0.1, "{:?} vs {:?}", leg.end, rm);
    }

    #[test]
    fn no_return_within_horizon() {
        let m = model();
        let (rp, _) = r_points(&m).unwrap();
        let cfg = IntegratorConfig {
            max_time: 1.0,
            ..Default::default()
        };
        assert!(matches!(half_map(&m, Branch::Advance, &rp, &cfg), Err(Error::NoCrossing(_))));
    }

    #[test]
    fn metrics_of_constant_samples() {
        let s = vec![ClimateState4::new(1.0, -0.5, 0.5, 0.2); 64];
        let m = metrics_from_samples(&s, 3.0, 10.0);
        assert_eq!(m.amplitude_eta_n, 0.0);
        assert_eq!(m.amplitude_eta_s, 0.0);
        assert_eq!(m.amplitude_xi_n, 0.0);
        assert_eq!(m.sync_lag, 0.0);
        assert_abs_diff_eq!(m.advance_fraction, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn circular_lag_of_shifted_sine() {
        let n = 200;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin()).collect();
        let y: Vec<f64> = (0..n).map(|i| x[(i + n - 20) % n]).collect();
        assert_abs_diff_eq!(circular_lag(&x, &y), 0.1, epsilon = 1e-12);
        assert_eq!(circular_lag(&x, &x), 0.0);
    }

    #[test]
    fn reference_cycle_converges() {
        let m = model();
        let cycle = find_limit_cycle(&m, None, &CycleConfig::default()).unwrap();
        assert!(cycle.closure_error < 1e-8);
        assert!(cycle.period > 0.0);
        assert!(cycle.metrics.advance_fraction > 0.5);
        assert!(cycle.contraction < 1.0);
        assert!(cycle.separated);
    }

    #[test]
    fn flipflop_switches_at_crossings() {
        let m = model();
        let (rp, _) = r_points(&m).unwrap();
        let run = simulate_flipflop(&m, &rp, 2000.0, &IntegratorConfig::default()).unwrap();
        assert!(run.events.len() >= 2);
        for e in &run.events {
            assert!(e.class.label.is_crossing());
            assert_eq!(e.from.other(), e.to);
        }
        assert_abs_diff_eq!(run.trajectory.t_end(), 2000.0, epsilon = 1e-9);
    }

    #[test]
    fn initial_branch_by_region() {
        let m = model();
        assert_eq!(initial_branch(&m, &ClimateState4::new(0.0, -0.5, 0.6, 0.2)).unwrap(), Branch::Retreat);
        assert_eq!(initial_branch(&m, &ClimateState4::new(0.0, -0.5, 0.6, 0.5)).unwrap(), Branch::Advance);
        let eta = 0.7;
        let hp = tangency_w(&m, Branch::Retreat, eta);
        let hm = tangency_w(&m, Branch::Advance, eta);
        let sliding = ClimateState4::new(0.5 * (hp + hm), -0.8, eta, gamma(&m, eta));
        assert!(matches!(initial_branch(&m, &sliding), Err(Error::Sliding { .. })));
    }
}

//! Adaptive Dormand-Prince 5(4) integration with dense output and event location.
//!
//! The engine works on dynamically sized states so the same code drives the
//! 3-D reduced flows, the 4-D switched system and the spectral verification
//! system. Each accepted step keeps its continuous extension (order 4), which is
//! used both for interpolation and for locating sign changes of event functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Branch;

/// A first-order system `y' = f(t, y)` with an optional admissible-state check.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);

    /// Returns a description of the violation if `y` is outside the state space.
    fn check_state(&self, _y: &[f64]) -> std::result::Result<(), String> {
        Ok(())
    }
}

/// Adapter turning a closure into an [`OdeSystem`] with no state constraints.
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> OdeSystem for FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.f)(t, y, dy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest step, in years.
    pub max_step: f64,
    /// Required `|g|` at a located event.
    pub event_tol: f64,
    /// Horizon for event searches, measured from the start time.
    pub max_time: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 1.0,
            event_tol: 1e-12,
            max_time: 1e5,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("event_tol", self.event_tol),
            ("max_time", self.max_time),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "integrator {name} must be positive (got {v})"
                )));
            }
        }
        Ok(())
    }
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub t0: f64,
    /// End of the valid range; shorter than `t0 + h` when an event cut the step.
    pub t1: f64,
    h: f64,
    rcont: [Vec<f64>; 5],
    pub branch: Option<Branch>,
}

impl Segment {
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.rcont[0].len()];
        self.eval_into(t, &mut out);
        out
    }

    fn shifted(&self, dt: f64) -> Self {
        let mut s = self.clone();
        s.t0 += dt;
        s.t1 += dt;
        s
    }
}

/// A located zero of an event function.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t: f64,
    pub state: Vec<f64>,
    pub id: usize,
}

/// Accepted steps of an integration, in strictly increasing time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub segments: Vec<Segment>,
    pub events: Vec<Event>,
}

impl Trajectory {
    fn start(t0: f64, y0: &[f64]) -> Self {
        Self {
            times: vec![t0],
            states: vec![y0.to_vec()],
            ..Default::default()
        }
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one sample")
    }

    pub fn duration(&self) -> f64 {
        self.t_end() - self.t_start()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one sample")
    }

    /// Dense-output state at time `t`, or `None` outside the covered range.
    pub fn interpolate(&self, t: f64) -> Option<Vec<f64>> {
        if self.segments.is_empty() {
            return (t == self.t_start()).then(|| self.states[0].clone());
        }
        if t < self.t_start() || t > self.t_end() {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.t1 < t);
        let seg = &self.segments[idx.min(self.segments.len() - 1)];
        Some(seg.eval(t))
    }

    /// Branch active at time `t`, if the segments carry labels.
    pub fn branch_at(&self, t: f64) -> Option<Branch> {
        let idx = self.segments.partition_point(|s| s.t1 < t);
        self.segments.get(idx).and_then(|s| s.branch)
    }

    /// `n` equally spaced dense samples over `[t_start, t_end)`.
    pub fn sample_uniform(&self, n: usize) -> Vec<(f64, Vec<f64>)> {
        let (t0, span) = (self.t_start(), self.duration());
        (0..n)
            .map(|k| {
                let t = t0 + span * k as f64 / n as f64;
                (t, self.interpolate(t).expect("inside range"))
            })
            .collect()
    }

    /// Tags every segment with `branch`.
    pub fn labelled(mut self, branch: Branch) -> Self {
        for s in &mut self.segments {
            s.branch = Some(branch);
        }
        self
    }

    /// Shifts the time axis by `dt`.
    pub fn shifted(mut self, dt: f64) -> Self {
        for t in &mut self.times {
            *t += dt;
        }
        for s in &mut self.segments {
            *s = s.shifted(dt);
        }
        for e in &mut self.events {
            e.t += dt;
        }
        self
    }

    /// Appends a trajectory that starts where this one ends.
    pub fn append(&mut self, other: Trajectory) {
        let skip = usize::from(!self.times.is_empty());
        self.times.extend(other.times.into_iter().skip(skip));
        self.states.extend(other.states.into_iter().skip(skip));
        self.segments.extend(other.segments);
        self.events.extend(other.events);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Rising,
    Falling,
    Any,
}

impl Direction {
    fn crosses(self, g0: f64, g1: f64) -> bool {
        let rising = g0 < 0.0 && g1 >= 0.0;
        let falling = g0 > 0.0 && g1 <= 0.0;
        match self {
            Direction::Rising => rising,
            Direction::Falling => falling,
            Direction::Any => rising || falling,
        }
    }
}

/// Result of [`integrate_to_event`].
#[derive(Debug, Clone)]
pub struct EventHit {
    pub t: f64,
    pub state: Vec<f64>,
    /// `g` evaluated at `state`.
    pub residual: f64,
    pub trajectory: Trajectory,
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

struct Stepper<'a, S: OdeSystem + ?Sized> {
    sys: &'a S,
    cfg: &'a IntegratorConfig,
    t: f64,
    y: Vec<f64>,
    f: Vec<f64>,
    h: f64,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

impl<'a, S: OdeSystem + ?Sized> Stepper<'a, S> {
    fn new(sys: &'a S, cfg: &'a IntegratorConfig, t0: f64, y0: &[f64], direction_span: f64) -> Self {
        let n = sys.dim();
        let mut f = vec![0.0; n];
        sys.rhs(t0, y0, &mut f);
        let mut s = Self {
            sys,
            cfg,
            t: t0,
            y: y0.to_vec(),
            f,
            h: 0.0,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        };
        s.h = s.initial_step(direction_span);
        s
    }

    fn scaled_norm(&self, v: &[f64], reference: &[f64]) -> f64 {
        let n = v.len() as f64;
        (v.iter()
            .zip(reference)
            .map(|(x, r)| {
                let sc = self.cfg.abs_tol + self.cfg.rel_tol * r.abs();
                (x / sc).powi(2)
            })
            .sum::<f64>()
            / n)
            .sqrt()
    }

    fn initial_step(&mut self, span: f64) -> f64 {
        let d0 = self.scaled_norm(&self.y, &self.y);
        let d1 = self.scaled_norm(&self.f, &self.y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span).min(self.cfg.max_step);
        let y1: Vec<f64> = self.y.iter().zip(&self.f).map(|(y, f)| y + h0 * f).collect();
        let mut f1 = vec![0.0; self.y.len()];
        self.sys.rhs(self.t + h0, &y1, &mut f1);
        let diff: Vec<f64> = f1.iter().zip(&self.f).map(|(a, b)| a - b).collect();
        let d2 = self.scaled_norm(&diff, &self.y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span).min(self.cfg.max_step)
    }

    /// Attempts steps until one is accepted; never steps past `t_end`.
    fn step(&mut self, t_end: f64) -> Result<Segment> {
        let n = self.y.len();
        loop {
            let h = self.h.min(t_end - self.t).min(self.cfg.max_step);
            if h <= 1e-14 * self.t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t: self.t, h });
            }
            let (t, y) = (self.t, &self.y);
            self.k[0].copy_from_slice(&self.f);

            let stages: [(f64, &[f64]); 5] = [
                (C2, &[A21]),
                (C3, &[A31, A32]),
                (C4, &[A41, A42, A43]),
                (C5, &[A51, A52, A53, A54]),
                (1.0, &[A61, A62, A63, A64, A65]),
            ];
            for (s, (c, a)) in stages.iter().enumerate() {
                for i in 0..n {
                    let acc: f64 = a.iter().enumerate().map(|(j, aj)| aj * self.k[j][i]).sum();
                    self.tmp[i] = y[i] + h * acc;
                }
                let (_, tail) = self.k.split_at_mut(s + 1);
                self.sys.rhs(t + c * h, &self.tmp, &mut tail[0]);
            }
            let mut y_new = vec![0.0; n];
            for i in 0..n {
                y_new[i] = y[i]
                    + h * (A71 * self.k[0][i]
                        + A73 * self.k[2][i]
                        + A74 * self.k[3][i]
                        + A75 * self.k[4][i]
                        + A76 * self.k[5][i]);
            }
            {
                let (_, tail) = self.k.split_at_mut(6);
                self.sys.rhs(t + h, &y_new, &mut tail[0]);
            }
            let k = &self.k;
            for i in 0..n {
                self.tmp[i] = h
                    * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                        + E7 * k[6][i]);
            }
            let reference: Vec<f64> = y.iter().zip(&y_new).map(|(a, b)| a.abs().max(b.abs())).collect();
            let err = self.scaled_norm(&self.tmp, &reference);

            if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                self.h = h * MIN_FACTOR;
                continue;
            }
            if err > 1.0 {
                self.h = h * (SAFETY * err.powf(-0.2)).max(MIN_FACTOR);
                continue;
            }

            let mut rcont: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
            for i in 0..n {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                rcont[0][i] = y[i];
                rcont[1][i] = ydiff;
                rcont[2][i] = bspl;
                rcont[3][i] = ydiff - h * k[6][i] - bspl;
                rcont[4][i] = h
                    * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i]
                        + D7 * k[6][i]);
            }
            let t1 = if (t_end - (t + h)).abs() <= 1e-14 * t_end.abs().max(1.0) {
                t_end
            } else {
                t + h
            };
            let seg = Segment {
                t0: t,
                t1,
                h,
                rcont,
                branch: None,
            };
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            self.t = t1;
            self.y = y_new;
            self.f.copy_from_slice(&self.k[6]);
            self.h = h * factor;
            return Ok(seg);
        }
    }
}

fn validate_start<S: OdeSystem + ?Sized>(sys: &S, y0: &[f64], t0: f64, cfg: &IntegratorConfig) -> Result<()> {
    cfg.validate()?;
    if y0.len() != sys.dim() {
        return Err(Error::Domain(format!(
            "state has dimension {}, system expects {}",
            y0.len(),
            sys.dim()
        )));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("initial state is not finite".into()));
    }
    sys.check_state(y0)
        .map_err(|reason| Error::Boundary { t: t0, reason })
}

/// Integrates `sys` from `y0` over `t_span`.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(Error::Domain(format!("time span [{t0}, {t1}] is degenerate")));
    }
    validate_start(sys, y0, t0, cfg)?;
    let mut stepper = Stepper::new(sys, cfg, t0, y0, t1 - t0);
    let mut traj = Trajectory::start(t0, y0);
    while stepper.t < t1 {
        let seg = stepper.step(t1)?;
        sys.check_state(&stepper.y)
            .map_err(|reason| Error::Boundary { t: stepper.t, reason })?;
        traj.times.push(stepper.t);
        traj.states.push(stepper.y.clone());
        traj.segments.push(seg);
    }
    Ok(traj)
}

/// Integrates from `(t0, y0)` until `event` first crosses zero in `direction`.
///
/// A zero of `event` at the start point is not reported; only sign changes
/// between accepted steps count. The located state comes from the dense output
/// and the returned trajectory ends exactly at the event.
pub fn integrate_to_event<S, G>(
    sys: &S,
    event: G,
    direction: Direction,
    y0: &[f64],
    t0: f64,
    cfg: &IntegratorConfig,
) -> Result<EventHit>
where
    S: OdeSystem + ?Sized,
    G: Fn(&[f64]) -> f64,
{
    let t_end = t0 + cfg.max_time;
    let trajectory = integrate_with_event(sys, &event, direction, y0, (t0, t_end), cfg)?;
    let Some(hit) = trajectory.events.first() else {
        return Err(Error::NoEvent { t_end });
    };
    Ok(EventHit {
        t: hit.t,
        state: hit.state.clone(),
        residual: event(&hit.state),
        trajectory,
    })
}

/// Integrates over `t_span`, stopping early at the first crossing of `event`.
///
/// The crossing, if any, is the single entry of `events` and the final sample.
pub fn integrate_with_event<S, G>(
    sys: &S,
    event: G,
    direction: Direction,
    y0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory>
where
    S: OdeSystem + ?Sized,
    G: Fn(&[f64]) -> f64,
{
    let (t0, t_end) = t_span;
    if !(t_end > t0) {
        return Err(Error::Domain(format!("time span [{t0}, {t_end}] is degenerate")));
    }
    validate_start(sys, y0, t0, cfg)?;
    let mut stepper = Stepper::new(sys, cfg, t0, y0, t_end - t0);
    let mut traj = Trajectory::start(t0, y0);
    let mut g_prev = event(y0);
    let mut buf = vec![0.0; y0.len()];
    while stepper.t < t_end {
        let mut seg = stepper.step(t_end)?;
        let g_new = event(&stepper.y);
        if direction.crosses(g_prev, g_new) {
            let t_star = locate_root(
                |t| {
                    seg.eval_into(t, &mut buf);
                    event(&buf)
                },
                seg.t0,
                seg.t1,
                g_prev,
                g_new,
            );
            let state = seg.eval(t_star);
            seg.t1 = t_star;
            traj.times.push(t_star);
            traj.states.push(state.clone());
            traj.segments.push(seg);
            traj.events.push(Event { t: t_star, state, id: 0 });
            return Ok(traj);
        }
        sys.check_state(&stepper.y)
            .map_err(|reason| Error::Boundary { t: stepper.t, reason })?;
        traj.times.push(stepper.t);
        traj.states.push(stepper.y.clone());
        traj.segments.push(seg);
        g_prev = g_new;
    }
    Ok(traj)
}

/// Brent's method on a bracket with `f(a) = fa`, `f(b) = fb` of opposite sign
/// (or `fb == 0`).
fn locate_root(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, fa: f64, fb: f64) -> f64 {
    if fb == 0.0 {
        return b;
    }
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 1e-300;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn decay() -> FnSystem<impl Fn(f64, &[f64], &mut [f64])> {
        FnSystem::new(1, |_t, y: &[f64], dy: &mut [f64]| dy[0] = -y[0])
    }

    #[test]
    fn linear_test_equation() {
        let traj = integrate(&decay(), &[1.0], (0.0, 1.0), &IntegratorConfig::default()).unwrap();
        assert_eq!(traj.t_end(), 1.0);
        assert_abs_diff_eq!(traj.last_state()[0], (-1.0f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn step_halving_shows_high_order() {
        // Loose tolerances so that the step is pinned at max_step.
        let err_at = |h: f64| {
            let cfg = IntegratorConfig {
                rel_tol: 1.0,
                abs_tol: 1.0,
                max_step: h,
                ..Default::default()
            };
            let traj = integrate(&decay(), &[1.0], (0.0, 1.0), &cfg).unwrap();
            (traj.last_state()[0] - (-1.0f64).exp()).abs()
        };
        let (e1, e2) = (err_at(0.1), err_at(0.05));
        assert!(e1 / e2 >= 16.0, "e(h)={e1:e} e(h/2)={e2:e}");
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let err_at = |tol: f64| {
            let cfg = IntegratorConfig {
                rel_tol: tol,
                abs_tol: tol,
                ..Default::default()
            };
            let traj = integrate(&decay(), &[1.0], (0.0, 5.0), &cfg).unwrap();
            (traj.last_state()[0] - (-5.0f64).exp()).abs()
        };
        let (e1, e2) = (err_at(1e-6), err_at(1e-6 / 32.0));
        assert!(e1 / e2 >= 16.0, "e1={e1:e} e2={e2:e}");
    }

    #[test]
    fn degenerate_span_rejected() {
        let err = integrate(&decay(), &[1.0], (1.0, 1.0), &IntegratorConfig::default());
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn constant_velocity_event() {
        let sys = FnSystem::new(2, |_t, _y: &[f64], dy: &mut [f64]| {
            dy[0] = 1.0;
            dy[1] = 0.0;
        });
        let hit = integrate_to_event(
            &sys,
            |y| y[0] - 0.5,
            Direction::Rising,
            &[0.0, 0.0],
            0.0,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(hit.t, 0.5, epsilon = 1e-10);
        assert!(hit.residual.abs() < 1e-12);
        assert_eq!(hit.trajectory.t_end(), hit.t);
        assert_eq!(hit.trajectory.events.len(), 1);
    }

    #[test]
    fn direction_filter_skips_wrong_crossings() {
        // y = cos t: falling zero at pi/2, rising zero at 3pi/2.
        let sys = FnSystem::new(2, |_t, y: &[f64], dy: &mut [f64]| {
            dy[0] = -y[1];
            dy[1] = y[0];
        });
        let cfg = IntegratorConfig::default();
        let rising = integrate_to_event(&sys, |y| y[0], Direction::Rising, &[1.0, 0.0], 0.0, &cfg).unwrap();
        assert_abs_diff_eq!(rising.t, 1.5 * std::f64::consts::PI, epsilon = 1e-8);
        let any = integrate_to_event(&sys, |y| y[0], Direction::Any, &[1.0, 0.0], 0.0, &cfg).unwrap();
        assert_abs_diff_eq!(any.t, 0.5 * std::f64::consts::PI, epsilon = 1e-8);
    }

    #[test]
    fn zero_at_start_is_not_an_event() {
        // Starts on the event surface, moving away in the wrong direction.
        let sys = FnSystem::new(2, |_t, y: &[f64], dy: &mut [f64]| {
            dy[0] = -y[1];
            dy[1] = y[0];
        });
        let hit = integrate_to_event(&sys, |y| y[1], Direction::Falling, &[1.0, 0.0], 0.0, &IntegratorConfig::default())
            .unwrap();
        assert_abs_diff_eq!(hit.t, std::f64::consts::PI, epsilon = 1e-8);
    }

    #[test]
    fn missing_event_reports_horizon() {
        let cfg = IntegratorConfig {
            max_time: 10.0,
            ..Default::default()
        };
        let err = integrate_to_event(&decay(), |y| y[0] + 1.0, Direction::Any, &[1.0], 0.0, &cfg);
        assert!(matches!(err, Err(Error::NoEvent { .. })));
    }

    struct Bounded;
    impl OdeSystem for Bounded {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, _y: &[f64], dy: &mut [f64]) {
            dy[0] = 1.0;
        }
        fn check_state(&self, y: &[f64]) -> std::result::Result<(), String> {
            if y[0] < 1.0 {
                Ok(())
            } else {
                Err(format!("y = {} left [.., 1)", y[0]))
            }
        }
    }

    #[test]
    fn leaving_state_space_is_an_error() {
        let err = integrate(&Bounded, &[0.0], (0.0, 5.0), &IntegratorConfig::default());
        assert!(matches!(err, Err(Error::Boundary { .. })));
    }

    #[test]
    fn dense_output_reproduces_samples_and_midpoints() {
        let sys = FnSystem::new(2, |_t, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0] - 0.1 * y[1];
        });
        let cfg = IntegratorConfig::default();
        let traj = integrate(&sys, &[1.0, 0.0], (0.0, 20.0), &cfg).unwrap();
        for (t, y) in traj.times.iter().zip(&traj.states) {
            let yi = traj.interpolate(*t).unwrap();
            for (a, b) in yi.iter().zip(y) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-13);
            }
        }
        for seg in &traj.segments {
            let mid = 0.5 * (seg.t0 + seg.t1);
            let start = traj.interpolate(seg.t0).unwrap();
            let half = integrate(&sys, &start, (seg.t0, mid), &cfg).unwrap();
            let dense = seg.eval(mid);
            for (a, b) in dense.iter().zip(half.last_state()) {
                let tol = 10.0 * (cfg.abs_tol + cfg.rel_tol * b.abs()).max(1e-10);
                assert!((a - b).abs() < tol, "t={mid} dense={a} ref={b}");
            }
        }
    }

    #[test]
    fn deterministic() {
        let cfg = IntegratorConfig::default();
        let a = integrate(&decay(), &[1.0], (0.0, 3.0), &cfg).unwrap();
        let b = integrate(&decay(), &[1.0], (0.0, 3.0), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn append_and_shift() {
        let cfg = IntegratorConfig::default();
        let a = integrate(&decay(), &[1.0], (0.0, 1.0), &cfg).unwrap();
        let b = integrate(&decay(), a.last_state(), (0.0, 1.0), &cfg).unwrap().shifted(1.0);
        let mut joined = a.clone().labelled(Branch::Advance);
        joined.append(b.labelled(Branch::Retreat));
        assert!(joined.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(joined.branch_at(0.5), Some(Branch::Advance));
        assert_eq!(joined.branch_at(1.5), Some(Branch::Retreat));
        assert_abs_diff_eq!(joined.interpolate(2.0).unwrap()[0], (-2.0f64).exp(), epsilon = 1e-9);
    }
}

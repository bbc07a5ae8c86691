//! Reduced energy balance model: `F`, `G`, the 3-D and 4-D vector fields, the
//! reconstructed temperature profile, and the unreduced spectral system.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::legendre::{legendre, legendre_integral};
use crate::ode::OdeSystem;
use crate::params::{Branch, ClimateState3, ClimateState4, Model};

fn check_lines(eta_s: f64, eta_n: f64) -> Result<()> {
    if !(-1.0 <= eta_s && eta_s <= eta_n && eta_n <= 1.0) {
        return Err(Error::Domain(format!(
            "albedo lines must satisfy -1 <= eta_S <= eta_N <= 1 (got {eta_s}, {eta_n})"
        )));
    }
    Ok(())
}

impl Model {
    /// `F(η_S, η_N)`, the `w`-nullcline.
    pub fn f_eval(&self, eta_s: f64, eta_n: f64) -> Result<f64> {
        check_lines(eta_s, eta_n)?;
        Ok(self.f_raw(eta_s, eta_n))
    }

    pub(crate) fn f_raw(&self, eta_s: f64, eta_n: f64) -> f64 {
        let p = &self.params;
        let s0 = self.insolation.s0();
        let integral = self.insolation.antiderivative(eta_n) - self.insolation.antiderivative(eta_s);
        (p.solar * s0 * (1.0 - self.derived.alpha0) - p.olr_a
            + 0.5 * p.transport * self.derived.l * s0 * (p.alpha1 - p.alpha2) * (1.0 - integral))
            / p.olr_b
    }

    /// `(∂F/∂η_S, ∂F/∂η_N)`.
    pub(crate) fn f_gradient(&self, eta_s: f64, eta_n: f64) -> (f64, f64) {
        let p = &self.params;
        let k = 0.5 * p.transport * self.derived.l * self.insolation.s0() * (p.alpha1 - p.alpha2) / p.olr_b;
        (k * self.insolation.value(eta_s), -k * self.insolation.value(eta_n))
    }

    /// `G(η) = -L (1 - α_0)(s(η) - 1) + T_c`.
    ///
    /// With `T_c` set to `T_cS`, `T⁺_cN` or `T⁻_cN` this is `G_S`, `H_+` or `H_-`.
    pub fn g_eval(&self, eta: f64, t_c: f64) -> Result<f64> {
        if !(-1.0..=1.0).contains(&eta) {
            return Err(Error::Domain(format!("|eta| > 1 (eta = {eta})")));
        }
        Ok(self.g_raw(eta, t_c))
    }

    pub(crate) fn g_raw(&self, eta: f64, t_c: f64) -> f64 {
        -self.derived.l * (1.0 - self.derived.alpha0) * (self.insolation.value(eta) - 1.0) + t_c
    }

    pub(crate) fn g_slope(&self, eta: f64) -> f64 {
        -self.derived.l * (1.0 - self.derived.alpha0) * self.insolation.slope(eta)
    }

    /// Reduced field `(ẇ, η̇_S, η̇_N)` with explicit critical temperatures.
    pub fn rhs3(&self, s: &ClimateState3, t_cs: f64, t_cn: f64) -> [f64; 3] {
        let p = &self.params;
        [
            -(p.olr_b / p.heat_capacity) * (s.w - self.f_raw(s.eta_s, s.eta_n)),
            -p.rho * (s.w - self.g_raw(s.eta_s, t_cs)),
            p.rho * (s.w - self.g_raw(s.eta_n, t_cn)),
        ]
    }

    /// Switched field `X_-` (advance) or `X_+` (retreat).
    pub fn rhs4(&self, branch: Branch, s: &ClimateState4) -> [f64; 4] {
        let [dw, des, den] = self.rhs3(&s.reduced(), self.params.t_cs, self.t_cn(branch));
        let p = &self.params;
        let dxi = p.eps
            * (self.ablation_rate(branch) * (s.eta_n - s.xi_n) - p.accumulation * (1.0 - s.eta_n));
        [dw, des, den, dxi]
    }

    /// Temperature at an albedo line.
    pub fn ice_line_temperature(&self, w: f64, eta: f64) -> f64 {
        w + self.derived.l * (1.0 - self.derived.alpha0) * (self.insolation.value(eta) - 1.0)
    }

    /// Global mean temperature for translated temperature `w`.
    pub fn global_mean_temperature(&self, w: f64, eta_s: f64, eta_n: f64) -> f64 {
        let p = &self.params;
        let integral = self.insolation.antiderivative(eta_n) - self.insolation.antiderivative(eta_s);
        w - 0.5 * self.derived.l * self.insolation.s0() * (p.alpha2 - p.alpha1) * (1.0 - integral)
    }

    /// Reconstructs the piecewise temperature profile on the slow manifold.
    pub fn temperature_profile(&self, w: f64, eta_s: f64, eta_n: f64) -> Result<TemperatureProfile> {
        check_lines(eta_s, eta_n)?;
        let d = &self.derived;
        let u0 = w + 0.5 * d.z_star;
        let v0 = w - 0.5 * d.z_star;
        let mut u = vec![u0];
        u.extend(&d.u_star);
        let mut v = vec![v0];
        v.extend(&d.v_star);
        let w_modes = u.clone();
        Ok(TemperatureProfile {
            eta_s,
            eta_n,
            t_bar: self.global_mean_temperature(w, eta_s, eta_n),
            t_at_eta_s: self.ice_line_temperature(w, eta_s),
            t_at_eta_n: self.ice_line_temperature(w, eta_n),
            u,
            v,
            w_modes,
        })
    }
}

/// Piecewise polynomial temperature `T(y)` with modes for each of the three zones.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemperatureProfile {
    pub eta_s: f64,
    pub eta_n: f64,
    /// Modes south of `η_S`.
    pub u: Vec<f64>,
    /// Modes between the albedo lines.
    pub v: Vec<f64>,
    /// Modes north of `η_N`.
    pub w_modes: Vec<f64>,
    pub t_bar: f64,
    pub t_at_eta_s: f64,
    pub t_at_eta_n: f64,
}

fn series(modes: &[f64], y: f64) -> f64 {
    modes.iter().enumerate().map(|(k, c)| c * legendre(2 * k, y)).sum()
}

impl TemperatureProfile {
    /// `T(y)`; at an albedo line the average of the two adjacent pieces.
    pub fn eval(&self, y: f64) -> f64 {
        let (lo, mid, hi) = (series(&self.u, y), series(&self.v, y), series(&self.w_modes, y));
        if y < self.eta_s {
            lo
        } else if y == self.eta_s && y == self.eta_n {
            0.5 * (lo + hi)
        } else if y == self.eta_s {
            0.5 * (lo + mid)
        } else if y < self.eta_n {
            mid
        } else if y == self.eta_n {
            0.5 * (mid + hi)
        } else {
            hi
        }
    }
}

/// State of the unreduced spectral system: three mode sets and two albedo lines.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w_modes: Vec<f64>,
    pub eta_s: f64,
    pub eta_n: f64,
}

impl SpectralState {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.u.len() + 2);
        out.extend(&self.u);
        out.extend(&self.v);
        out.extend(&self.w_modes);
        out.push(self.eta_s);
        out.push(self.eta_n);
        out
    }

    pub fn from_slice(y: &[f64]) -> Self {
        let modes = (y.len() - 2) / 3;
        Self {
            u: y[..modes].to_vec(),
            v: y[modes..2 * modes].to_vec(),
            w_modes: y[2 * modes..3 * modes].to_vec(),
            eta_s: y[3 * modes],
            eta_n: y[3 * modes + 1],
        }
    }

    /// Reduced temperature variable `w = (u_0 + v_0) / 2`.
    pub fn reduced_w(&self) -> f64 {
        0.5 * (self.u[0] + self.v[0])
    }

    /// Global mean temperature from the piecewise integral of the three expansions.
    pub fn global_mean(&self) -> f64 {
        let twice: f64 = (0..self.u.len())
            .map(|k| {
                let m = 2 * k;
                let p = |y: f64| legendre_integral(m, y);
                self.u[k] * (p(self.eta_s) - p(-1.0))
                    + self.v[k] * (p(self.eta_n) - p(self.eta_s))
                    + self.w_modes[k] * (p(1.0) - p(self.eta_n))
            })
            .sum();
        0.5 * twice
    }
}

impl Model {
    /// Time derivative of the spectral system, `3(M + 1) + 2` equations.
    pub fn spectral_rhs(&self, s: &SpectralState, t_cs: f64, t_cn: f64) -> Result<SpectralState> {
        let modes = self.insolation.coeffs.len();
        if s.u.len() != modes || s.v.len() != modes || s.w_modes.len() != modes {
            return Err(Error::Domain(format!(
                "spectral state has {} modes, model expects {modes}",
                s.u.len()
            )));
        }
        let p = &self.params;
        let bc = p.olr_b + p.transport;
        let t_bar = s.global_mean();
        let mode_rate = |k: usize, value: f64, albedo: f64| {
            let forcing = p.solar * self.insolation.coeffs[k] * (1.0 - albedo);
            let source = if k == 0 { forcing - p.olr_a + p.transport * t_bar } else { forcing };
            (source - bc * value) / p.heat_capacity
        };
        let du = (0..modes).map(|k| mode_rate(k, s.u[k], p.alpha2)).collect();
        let dv = (0..modes).map(|k| mode_rate(k, s.v[k], p.alpha1)).collect();
        let dw = (0..modes).map(|k| mode_rate(k, s.w_modes[k], p.alpha2)).collect();
        let t_s = 0.5 * (series(&s.u, s.eta_s) + series(&s.v, s.eta_s));
        let t_n = 0.5 * (series(&s.v, s.eta_n) + series(&s.w_modes, s.eta_n));
        Ok(SpectralState {
            u: du,
            v: dv,
            w_modes: dw,
            eta_s: p.rho * (t_cs - t_s),
            eta_n: p.rho * (t_n - t_cn),
        })
    }
}

fn interior_lines(eta_s: f64, eta_n: f64) -> std::result::Result<(), String> {
    if -1.0 < eta_s && eta_s < eta_n && eta_n < 1.0 {
        Ok(())
    } else {
        Err(format!(
            "albedo lines left the interior -1 < eta_S < eta_N < 1 (eta_S = {eta_s}, eta_N = {eta_n})"
        ))
    }
}

/// The smooth 3-D flow `ψ` for given critical temperatures.
#[derive(Debug, Clone, Copy)]
pub struct ReducedSystem<'a> {
    pub model: &'a Model,
    pub t_cs: f64,
    pub t_cn: f64,
}

impl OdeSystem for ReducedSystem<'_> {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        dy.copy_from_slice(&self.model.rhs3(&ClimateState3::from_slice(y), self.t_cs, self.t_cn));
    }

    fn check_state(&self, y: &[f64]) -> std::result::Result<(), String> {
        interior_lines(y[1], y[2])
    }
}

/// One smooth branch of the switched 4-D system.
#[derive(Debug, Clone, Copy)]
pub struct BranchSystem<'a> {
    pub model: &'a Model,
    pub branch: Branch,
}

impl OdeSystem for BranchSystem<'_> {
    fn dim(&self) -> usize {
        4
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        dy.copy_from_slice(&self.model.rhs4(self.branch, &ClimateState4::from_slice(y)));
    }

    fn check_state(&self, y: &[f64]) -> std::result::Result<(), String> {
        interior_lines(y[1], y[2])?;
        if (-1.0..=1.0).contains(&y[3]) {
            Ok(())
        } else {
            Err(format!("ice edge xi_N = {} outside [-1, 1]", y[3]))
        }
    }
}

/// The unreduced spectral system, used to check the reduction.
#[derive(Debug, Clone, Copy)]
pub struct SpectralSystem<'a> {
    pub model: &'a Model,
    pub t_cs: f64,
    pub t_cn: f64,
}

impl OdeSystem for SpectralSystem<'_> {
    fn dim(&self) -> usize {
        3 * self.model.insolation.coeffs.len() + 2
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let d = self
            .model
            .spectral_rhs(&SpectralState::from_slice(y), self.t_cs, self.t_cn)
            .expect("dimension matches model");
        dy.copy_from_slice(&d.to_vec());
    }

    fn check_state(&self, y: &[f64]) -> std::result::Result<(), String> {
        let n = y.len();
        interior_lines(y[n - 2], y[n - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::legendre::GaussLegendre;
    use approx::assert_abs_diff_eq;

    fn model() -> Model {
        Model::reference()
    }

    #[test]
    fn f_reference_values() {
        let m = model();
        let full = m.f_eval(-1.0, 1.0).unwrap();
        assert_abs_diff_eq!(full, 6.03, epsilon = 5e-3);
        // independent: quadrature of s over [-1, 1]
        let q = GaussLegendre::new(32).integrate(-1.0, 1.0, |y| m.insolation.value(y));
        let p = &m.params;
        let l = p.solar / (p.olr_b + p.transport);
        let direct = (p.solar * (1.0 - 0.47) - p.olr_a + 0.5 * p.transport * l * (p.alpha1 - p.alpha2) * (1.0 - q)) / p.olr_b;
        assert_abs_diff_eq!(full, direct, epsilon = 1e-12);

        let snowball = m.f_eval(0.3, 0.3).unwrap();
        assert_abs_diff_eq!(snowball, (181.79 - 202.0 - 31.66) / 1.9, epsilon = 1e-2);
        assert_abs_diff_eq!(snowball, -27.3, epsilon = 5e-2);
        assert!(m.f_eval(0.5, 0.2).is_err());
    }

    #[test]
    fn g_reference_values() {
        let m = model();
        assert_abs_diff_eq!(m.g_eval(0.0, -10.0).unwrap(), -18.76, epsilon = 1e-2);
        assert_abs_diff_eq!(m.g_eval(1.0, -10.0).unwrap(), 7.52, epsilon = 1e-2);
        assert!(m.g_eval(1.2, -10.0).is_err());
    }

    #[test]
    fn rhs3_sign_of_relaxation() {
        let m = model();
        let s = ClimateState3::new(50.0, -0.5, 0.5);
        assert!(m.rhs3(&s, -10.0, -10.0)[0] < 0.0);
        let s = ClimateState3::new(-80.0, -0.5, 0.5);
        assert!(m.rhs3(&s, -10.0, -10.0)[0] > 0.0);
    }

    #[test]
    fn rhs3_vanishes_at_published_equilibria() {
        let m = model();
        for s in [
            ClimateState3::new(5.188, -0.955, 0.955),
            ClimateState3::new(-17.118, -0.249, 0.249),
        ] {
            for (i, c) in m.rhs3(&s, -10.0, -10.0).into_iter().enumerate() {
                // published coordinates carry three decimals; ẇ is the most sensitive
                assert!(c.abs() < 0.1, "{s:?}[{i}]: {c}");
            }
        }
    }

    #[test]
    fn rhs4_mass_balance_component() {
        let m = model();
        let edge = ClimateState4::new(0.0, -0.5, 1.0, 1.0);
        assert_eq!(m.rhs4(Branch::Advance, &edge)[3], 0.0);
        assert_eq!(m.rhs4(Branch::Retreat, &edge)[3], 0.0);
        let s = ClimateState4::new(0.0, -0.5, 0.5, 0.2);
        assert_abs_diff_eq!(m.rhs4(Branch::Advance, &s)[3], -0.00225, epsilon = 1e-15);
    }

    #[test]
    fn rhs4_decouples_from_ice_edge() {
        let m = model();
        for branch in [Branch::Advance, Branch::Retreat] {
            let base = m.rhs4(branch, &ClimateState4::new(3.0, -0.8, 0.85, 0.1));
            let tc = m.t_cn(branch);
            assert_eq!(base[..3], m.rhs3(&ClimateState3::new(3.0, -0.8, 0.85), -10.0, tc));
            for xi in [-0.9, 0.0, 0.4, 0.99] {
                let other = m.rhs4(branch, &ClimateState4::new(3.0, -0.8, 0.85, xi));
                assert_eq!(base[..3], other[..3]);
            }
        }
    }

    #[test]
    fn profile_identities() {
        let m = model();
        let prof = m.temperature_profile(1.5, -1.0, 1.0).unwrap();
        let d = m.params.alpha2 - m.params.alpha1;
        assert_abs_diff_eq!(prof.t_bar, 1.5 + 0.5 * m.derived.l * d, epsilon = 1e-12);

        let prof = m.temperature_profile(2.0, -0.7, 0.6).unwrap();
        let diff = prof.t_at_eta_n - prof.t_at_eta_s;
        let expected = m.derived.l * (1.0 - m.derived.alpha0) * (m.insolation.value(0.6) - m.insolation.value(-0.7));
        assert_abs_diff_eq!(diff, expected, epsilon = 1e-12);

        // ice-line temperatures from the averaged pieces
        assert_abs_diff_eq!(prof.eval(-0.7), prof.t_at_eta_s, epsilon = 1e-12);
        assert_abs_diff_eq!(prof.eval(0.6), prof.t_at_eta_n, epsilon = 1e-12);

        // global mean by piecewise quadrature of the reconstructed profile
        let rule = GaussLegendre::new(16);
        let q = rule.integrate(-1.0, -0.7, |y| prof.eval(y))
            + rule.integrate(-0.7, 0.6, |y| prof.eval(y))
            + rule.integrate(0.6, 1.0, |y| prof.eval(y));
        assert_abs_diff_eq!(0.5 * q, prof.t_bar, epsilon = 1e-11);
        assert!(m.temperature_profile(0.0, 0.5, 0.4).is_err());
    }

    #[test]
    fn profile_at_equilibrium_hits_critical_temperature() {
        let m = model();
        let prof = m.temperature_profile(5.188, -0.955, 0.955).unwrap();
        assert_abs_diff_eq!(prof.t_at_eta_n, -10.0, epsilon = 2e-2);
        assert_abs_diff_eq!(prof.t_at_eta_s, -10.0, epsilon = 2e-2);
    }

    fn spectral_start(m: &Model) -> SpectralState {
        SpectralState {
            u: vec![4.0, m.derived.u_star[0] + 3.0],
            v: vec![20.0, m.derived.v_star[0] - 2.0],
            w_modes: vec![-6.0, m.derived.u_star[0] + 1.0],
            eta_s: -0.6,
            eta_n: 0.7,
        }
    }

    #[test]
    fn spectral_higher_modes_relax_to_fixed_values() {
        let m = model();
        let mut s = spectral_start(&m);
        s.u[1] = m.derived.u_star[0];
        s.v[1] = m.derived.v_star[0];
        s.w_modes[1] = m.derived.u_star[0];
        let d = m.spectral_rhs(&s, -10.0, -10.0).unwrap();
        assert_abs_diff_eq!(d.u[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.v[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.w_modes[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn spectral_u0_minus_w0_identity() {
        let m = model();
        let s = spectral_start(&m);
        let d = m.spectral_rhs(&s, -10.0, -10.0).unwrap();
        let p = &m.params;
        let expected = -(p.olr_b + p.transport) / p.heat_capacity * (s.u[0] - s.w_modes[0]);
        assert_abs_diff_eq!(d.u[0] - d.w_modes[0], expected, epsilon = 1e-10);
    }

    #[test]
    fn spectral_matches_reduced_on_slow_manifold() {
        let m = model();
        let (w, es, en) = (3.0, -0.6, 0.7);
        let d = &m.derived;
        let s = SpectralState {
            u: vec![w + 0.5 * d.z_star, d.u_star[0]],
            v: vec![w - 0.5 * d.z_star, d.v_star[0]],
            w_modes: vec![w + 0.5 * d.z_star, d.u_star[0]],
            eta_s: es,
            eta_n: en,
        };
        let full = m.spectral_rhs(&s, -10.0, -7.0).unwrap();
        let reduced = m.rhs3(&ClimateState3::new(w, es, en), -10.0, -7.0);
        assert_abs_diff_eq!(0.5 * (full.u[0] + full.v[0]), reduced[0], epsilon = 1e-10);
        assert_abs_diff_eq!(full.eta_s, reduced[1], epsilon = 1e-12);
        assert_abs_diff_eq!(full.eta_n, reduced[2], epsilon = 1e-12);
        assert_abs_diff_eq!(s.global_mean(), m.global_mean_temperature(w, es, en), epsilon = 1e-12);
    }

    #[test]
    fn spectral_dimension_mismatch() {
        let m = model();
        let mut s = spectral_start(&m);
        s.u.pop();
        assert!(m.spectral_rhs(&s, -10.0, -10.0).is_err());
    }
}

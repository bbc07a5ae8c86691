//! Equilibria of the 3-D flows, their spectra, and their lifts to the switched system.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{mass_balance, SIGMA_TOL};
use crate::legendre::insolation_coeffs;
use crate::params::{Branch, ClimateState3, ClimateState4, Model, ModelParams};

pub type Matrix3 = [[f64; 3]; 3];

/// Seeds per axis of the Newton grid.
pub const SEED_GRID: usize = 9;
/// Residual bound for a reported equilibrium.
pub const RESIDUAL_TOL: f64 = 1e-9;
const MERGE_DISTANCE: f64 = 1e-6;
const MAX_NEWTON: usize = 60;

/// Analytic Jacobian of the reduced field; independent of the critical temperatures.
pub fn jacobian3(model: &Model, s: &ClimateState3) -> Matrix3 {
    let p = &model.params;
    let k = p.olr_b / p.heat_capacity;
    let (f_s, f_n) = model.f_gradient(s.eta_s, s.eta_n);
    [
        [-k, k * f_s, k * f_n],
        [-p.rho, p.rho * model.g_slope(s.eta_s), 0.0],
        [p.rho, 0.0, -p.rho * model.g_slope(s.eta_n)],
    ]
}

fn det3(m: &Matrix3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// `det(J - λI)`.
pub fn characteristic(m: &Matrix3, lambda: Complex64) -> Complex64 {
    let a = |i: usize, j: usize| {
        let d = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
        Complex64::new(m[i][j], 0.0) - d
    };
    a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
        + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
}

/// Eigenvalues of a 3×3 matrix from its characteristic cubic, real roots first in
/// ascending order.
pub fn eigenvalues3(m: &Matrix3) -> [Complex64; 3] {
    // λ³ + c2 λ² + c1 λ + c0
    let c2 = -(m[0][0] + m[1][1] + m[2][2]);
    let c1 = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0] + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let c0 = -det3(m);
    let poly = |x: f64| ((x + c2) * x + c1) * x + c0;
    let dpoly = |x: f64| (3.0 * x + 2.0 * c2) * x + c1;
    let polish = |mut x: f64| {
        for _ in 0..3 {
            let d = dpoly(x);
            if d == 0.0 {
                break;
            }
            let next = x - poly(x) / d;
            if !next.is_finite() || poly(next).abs() >= poly(x).abs() {
                break;
            }
            x = next;
        }
        x
    };

    let shift = c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    let disc = q * q / 4.0 + p * p * p / 27.0;
    if disc <= 0.0 {
        let r = (-p / 3.0).max(0.0).sqrt();
        let mut roots = if r == 0.0 {
            [-shift; 3]
        } else {
            let arg = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0);
            let phi = arg.acos() / 3.0;
            let tau = 2.0 * std::f64::consts::PI / 3.0;
            [0.0, 1.0, 2.0].map(|k| 2.0 * r * (phi - tau * k).cos() - shift)
        };
        for x in &mut roots {
            *x = polish(*x);
        }
        roots.sort_by(|a, b| a.total_cmp(b));
        roots.map(|x| Complex64::new(x, 0.0))
    } else {
        let sq = disc.sqrt();
        let real = polish((-q / 2.0 + sq).cbrt() + (-q / 2.0 - sq).cbrt() - shift);
        // deflate to λ² + b λ + c
        let b = c2 + real;
        let c = c1 + real * b;
        let d = Complex64::new(b * b - 4.0 * c, 0.0).sqrt();
        [
            Complex64::new(real, 0.0),
            (Complex64::new(-b, 0.0) - d) / 2.0,
            (Complex64::new(-b, 0.0) + d) / 2.0,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    StableNode,
    Saddle,
    Other,
}

impl Stability {
    pub fn from_eigenvalues(eigs: &[Complex64]) -> Self {
        if eigs.iter().any(|z| z.im != 0.0 || z.re == 0.0) {
            return Stability::Other;
        }
        let negative = eigs.iter().filter(|z| z.re < 0.0).count();
        if negative == eigs.len() {
            Stability::StableNode
        } else if negative > 0 {
            Stability::Saddle
        } else {
            Stability::Other
        }
    }
}

/// Position of an equilibrium of `X_±` relative to its own region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FilippovClass {
    Regular,
    Virtual,
    Boundary,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Eigenvalue {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl Eigenvalue {
    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// An equilibrium of the 3-D flow, or of one branch of the 4-D system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    /// `(w, η_S, η_N)` or `(w, η_S, η_N, ξ_N)`.
    pub point: Vec<f64>,
    pub jacobian: Vec<Vec<f64>>,
    pub eigenvalues: Vec<Eigenvalue>,
    pub stability: Stability,
    pub filippov_class: FilippovClass,
    pub branch: Option<Branch>,
    pub t_cs: f64,
    pub t_cn: f64,
    pub residual: f64,
}

impl EquilibriumReport {
    pub fn state3(&self) -> ClimateState3 {
        ClimateState3::from_slice(&self.point)
    }

    pub fn state4(&self) -> Option<ClimateState4> {
        (self.point.len() == 4).then(|| ClimateState4::from_slice(&self.point))
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn solve3(m: &Matrix3, rhs: [f64; 3]) -> Option<[f64; 3]> {
    let mut a = [[0.0; 4]; 3];
    for i in 0..3 {
        a[i][..3].copy_from_slice(&m[i]);
        a[i][3] = rhs[i];
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = (a[i][3] - s) / a[i][i];
    }
    Some(x)
}

fn interior(s: &ClimateState3) -> bool {
    -1.0 < s.eta_s && s.eta_s < s.eta_n && s.eta_n < 1.0
}

fn newton(model: &Model, seed: ClimateState3, t_cs: f64, t_cn: f64) -> Option<ClimateState3> {
    let mut x = seed;
    let mut fx = model.rhs3(&x, t_cs, t_cn);
    for _ in 0..MAX_NEWTON {
        if max_abs(&fx) < 1e-13 {
            return Some(x);
        }
        let j = jacobian3(model, &x);
        let dx = solve3(&j, fx.map(|v| -v))?;
        let mut lambda = 1.0;
        loop {
            let trial = ClimateState3::new(x.w + lambda * dx[0], x.eta_s + lambda * dx[1], x.eta_n + lambda * dx[2]);
            if interior(&trial) {
                let ft = model.rhs3(&trial, t_cs, t_cn);
                if max_abs(&ft) < max_abs(&fx) || lambda == 1.0 && max_abs(&dx) < 1e-12 {
                    x = trial;
                    fx = ft;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return (max_abs(&fx) < RESIDUAL_TOL).then_some(x);
            }
        }
    }
    (max_abs(&fx) < RESIDUAL_TOL).then_some(x)
}

fn report3(model: &Model, s: ClimateState3, t_cs: f64, t_cn: f64) -> EquilibriumReport {
    let j = jacobian3(model, &s);
    let eigs = eigenvalues3(&j);
    EquilibriumReport {
        point: s.to_array().to_vec(),
        jacobian: j.iter().map(|r| r.to_vec()).collect(),
        eigenvalues: eigs.iter().map(|&z| z.into()).collect(),
        stability: Stability::from_eigenvalues(&eigs),
        filippov_class: FilippovClass::NotApplicable,
        branch: None,
        t_cs,
        t_cn,
        residual: max_abs(&model.rhs3(&s, t_cs, t_cn)),
    }
}

/// All interior equilibria of the reduced flow, sorted by `η_N`.
///
/// Newton's method runs from a grid of seeds with `w = F(η_S, η_N)`; an empty
/// list means no seed converged.
pub fn find_equilibria3(model: &Model, t_cs: f64, t_cn: f64) -> Vec<EquilibriumReport> {
    let n = SEED_GRID;
    let grid: Vec<f64> = (0..n).map(|i| -0.99 + 1.98 * i as f64 / (n - 1) as f64).collect();
    let mut found: Vec<ClimateState3> = Vec::new();
    for &es in &grid {
        for &en in grid.iter().filter(|&&en| en > es) {
            let seed = ClimateState3::new(model.f_raw(es, en), es, en);
            let Some(x) = newton(model, seed, t_cs, t_cn) else {
                continue;
            };
            let dup = found.iter().any(|y| {
                let d: f64 = x.to_array().iter().zip(y.to_array()).map(|(a, b)| (a - b) * (a - b)).sum();
                d.sqrt() < MERGE_DISTANCE
            });
            if !dup {
                found.push(x);
            }
        }
    }
    found.sort_by(|a, b| a.eta_n.total_cmp(&b.eta_n));
    found.into_iter().map(|s| report3(model, s, t_cs, t_cn)).collect()
}

/// Equilibria of the flow `ψ_±` of one branch.
pub fn branch_equilibria(model: &Model, branch: Branch) -> Vec<EquilibriumReport> {
    find_equilibria3(model, model.params.t_cs, model.t_cn(branch))
        .into_iter()
        .map(|mut r| {
            r.branch = Some(branch);
            r
        })
        .collect()
}

/// The stable node of `ψ_±`, if one exists.
pub fn stable_equilibrium(model: &Model, branch: Branch) -> Result<EquilibriumReport> {
    branch_equilibria(model, branch)
        .into_iter()
        .find(|r| r.stability == Stability::StableNode)
        .ok_or_else(|| Error::MissingEquilibrium(format!("{branch} branch (T_cN = {})", model.t_cn(branch))))
}

/// Regular, virtual or boundary, from the sign of `h` against the branch's own region.
pub fn classify_equilibrium(model: &Model, s: &ClimateState4, branch: Branch, tol: f64) -> FilippovClass {
    let h = mass_balance(model, s);
    if h.abs() < tol {
        return FilippovClass::Boundary;
    }
    let own = match branch {
        Branch::Retreat => h > 0.0,
        Branch::Advance => h < 0.0,
    };
    if own {
        FilippovClass::Regular
    } else {
        FilippovClass::Virtual
    }
}

/// Lifts an equilibrium of `ψ_±` to `X_±` by `ξ_N = (1 + a/b_±) η_N - a/b_±`.
pub fn lift_to_4d(model: &Model, branch: Branch, eq3: &EquilibriumReport) -> Result<EquilibriumReport> {
    let s3 = eq3.state3();
    let t_cn = model.t_cn(branch);
    let residual3 = max_abs(&model.rhs3(&s3, model.params.t_cs, t_cn));
    if residual3 >= RESIDUAL_TOL {
        return Err(Error::Residual(residual3));
    }
    let p = &model.params;
    let b = model.ablation_rate(branch);
    let r = p.accumulation / b;
    let s4 = s3.with_xi((1.0 + r) * s3.eta_n - r);

    let j3 = jacobian3(model, &s3);
    let mut jacobian: Vec<Vec<f64>> = j3
        .iter()
        .map(|row| {
            let mut v = row.to_vec();
            v.push(0.0);
            v
        })
        .collect();
    jacobian.push(vec![0.0, 0.0, p.eps * (b + p.accumulation), -p.eps * b]);

    let mut eigs = eigenvalues3(&j3).to_vec();
    eigs.push(Complex64::new(-p.eps * b, 0.0));
    Ok(EquilibriumReport {
        point: s4.to_array().to_vec(),
        jacobian,
        stability: Stability::from_eigenvalues(&eigs),
        eigenvalues: eigs.into_iter().map(Eigenvalue::from).collect(),
        filippov_class: classify_equilibrium(model, &s4, branch, SIGMA_TOL),
        branch: Some(branch),
        t_cs: p.t_cs,
        t_cn,
        residual: max_abs(&model.rhs4(branch, &s4)),
    })
}

/// Published symmetric-case equilibria at `T_c = -10`, as `(w, η_S, η_N)`.
pub const SYMMETRIC_REFERENCE: [[f64; 3]; 2] = [[-17.118, -0.249, 0.249], [5.188, -0.955, 0.955]];

/// Tolerance for [`self_check`].
pub const SELF_CHECK_TOL: f64 = 5e-3;

/// Verifies that the projected insolation reproduces the published symmetric
/// equilibria with the default parameters.
pub fn self_check() -> Result<()> {
    let params = ModelParams::default();
    let insolation = insolation_coeffs(params.obliquity, params.truncation)?;
    let model = Model::with_insolation(params, insolation);
    let found = find_equilibria3(&model, -10.0, -10.0);
    if found.len() != SYMMETRIC_REFERENCE.len() {
        return Err(Error::SelfCheck(format!("expected 2 equilibria, found {}", found.len())));
    }
    for (eq, reference) in found.iter().zip(SYMMETRIC_REFERENCE) {
        let dev = eq.point.iter().zip(reference).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if dev > SELF_CHECK_TOL {
            return Err(Error::SelfCheck(format!(
                "equilibrium {:?} deviates from {:?} by {dev:.2e}",
                eq.point, reference
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn model() -> Model {
        Model::reference()
    }

    #[test]
    fn jacobian_structure() {
        let m = model();
        let j = jacobian3(&m, &ClimateState3::new(1.0, -0.6, 0.7));
        assert_eq!(j[0][0], -1.9);
        assert_eq!(j[1][2], 0.0);
        assert_eq!(j[2][1], 0.0);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = model();
        let x = ClimateState3::new(2.0, -0.6, 0.7);
        let j = jacobian3(&m, &x);
        let h = 1e-6;
        for col in 0..3 {
            let mut plus = x.to_array();
            let mut minus = x.to_array();
            plus[col] += h;
            minus[col] -= h;
            let fp = m.rhs3(&ClimateState3::from_slice(&plus), -10.0, -6.0);
            let fm = m.rhs3(&ClimateState3::from_slice(&minus), -10.0, -6.0);
            for row in 0..3 {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                let scale = j[row][col].abs().max(1.0);
                assert!((fd - j[row][col]).abs() / scale < 1e-6, "J[{row}][{col}]");
            }
        }
    }

    #[test]
    fn cubic_eigenvalues() {
        let diag = [[-3.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, -1.0]];
        let e = eigenvalues3(&diag);
        assert_abs_diff_eq!(e[0].re, -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1].re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[2].re, 2.0, epsilon = 1e-12);

        let rot = [[0.0, -2.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, -1.0]];
        let e = eigenvalues3(&rot);
        assert_abs_diff_eq!(e[0].re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1].im.abs(), 2.0, epsilon = 1e-12);
        assert_eq!(Stability::from_eigenvalues(&e), Stability::Other);

        let triple = [[-2.0, 1.0, 0.0], [0.0, -2.0, 1.0], [0.0, 0.0, -2.0]];
        for z in eigenvalues3(&triple) {
            assert!(characteristic(&triple, z).norm() < 1e-6);
        }
    }

    #[test]
    fn symmetric_equilibria() {
        let m = model();
        let eqs = find_equilibria3(&m, -10.0, -10.0);
        assert_eq!(eqs.len(), 2);
        for (eq, reference) in eqs.iter().zip(SYMMETRIC_REFERENCE) {
            for (a, b) in eq.point.iter().zip(reference) {
                assert_abs_diff_eq!(*a, b, epsilon = SELF_CHECK_TOL);
            }
            assert!(eq.residual < RESIDUAL_TOL);
            assert_abs_diff_eq!(eq.point[1], -eq.point[2], epsilon = 1e-9);
        }
        assert_eq!(eqs[0].stability, Stability::Saddle);
        assert_eq!(eqs[1].stability, Stability::StableNode);
        let e: Vec<f64> = eqs[1].eigenvalues.iter().map(|z| z.re).collect();
        for (got, want) in e.iter().zip([-15.85, -15.05, -1.10]) {
            assert_abs_diff_eq!(*got, want, epsilon = 0.02);
        }
    }

    #[test]
    fn asymmetric_stable_equilibrium() {
        let m = model();
        let eq = stable_equilibrium(&m, Branch::Advance).unwrap();
        assert_abs_diff_eq!(eq.point[1], -0.907, epsilon = 5e-3);
        assert_abs_diff_eq!(eq.point[2], 0.795, epsilon = 5e-3);
    }

    #[test]
    fn lift_adds_known_eigenvalue() {
        let m = model();
        let eq = stable_equilibrium(&m, Branch::Retreat).unwrap();
        let lifted = lift_to_4d(&m, Branch::Retreat, &eq).unwrap();
        assert_abs_diff_eq!(lifted.eigenvalues[3].re, -0.15, epsilon = 1e-15);
        assert!(lifted.residual < 1e-12);
        assert_eq!(lifted.stability, eq.stability);
        let eta = eq.point[2];
        assert_abs_diff_eq!(lifted.point[3], 1.21 * eta - 0.21, epsilon = 1e-14);
        assert_eq!(lifted.filippov_class, FilippovClass::Virtual);
    }

    #[test]
    fn lift_rejects_non_equilibrium() {
        let m = model();
        let mut eq = stable_equilibrium(&m, Branch::Retreat).unwrap();
        eq.point[0] += 0.1;
        assert!(matches!(lift_to_4d(&m, Branch::Retreat, &eq), Err(Error::Residual(_))));
    }

    #[test]
    fn classify_examples() {
        let m = model();
        let p = &m.params;
        let eta = 0.955;
        let plus = ClimateState4::new(5.188, -0.955, eta, (1.0 + 0.21) * eta - 0.21);
        let h = mass_balance(&m, &plus);
        assert_abs_diff_eq!(h, p.accumulation * (1.0 - eta) * (p.ablation / p.ablation_plus - 1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(h, -0.0307, epsilon = 1e-3);
        assert_eq!(classify_equilibrium(&m, &plus, Branch::Retreat, SIGMA_TOL), FilippovClass::Virtual);
        assert_eq!(classify_equilibrium(&m, &plus, Branch::Advance, SIGMA_TOL), FilippovClass::Regular);
        let on_sigma = ClimateState4::new(0.0, -0.9, eta, crate::geometry::gamma(&m, eta));
        assert_eq!(classify_equilibrium(&m, &on_sigma, Branch::Retreat, SIGMA_TOL), FilippovClass::Boundary);
    }

    #[test]
    fn reference_self_check_passes() {
        self_check().unwrap();
    }
}

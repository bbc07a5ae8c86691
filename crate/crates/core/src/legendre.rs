//! Even Legendre polynomials and the annual-mean insolation distribution.
//!
//! The insolation is expanded as `s(y) = Σ_m s_{2m} p_{2m}(y)` with
//! `s_{2m} = a_{2m} p_{2m}(cos β)`. The coefficients are obtained by projecting
//! the annual-mean distribution for obliquity `β` onto the even Legendre
//! polynomials with a fixed Gauss-Legendre rule.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of Gauss-Legendre nodes used for the insolation projection.
pub const PROJECTION_NODES: usize = 64;

/// Trapezoid points for the periodic orbital-angle integral.
const ORBIT_POINTS: usize = 1024;

/// `p_n(y)` by the three-term recurrence, any degree, no domain check.
pub(crate) fn legendre(n: usize, y: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => y,
        _ => {
            let mut p_prev = 1.0;
            let mut p_curr = y;
            for k in 1..n {
                let kf = k as f64;
                let p_next = ((2.0 * kf + 1.0) * y * p_curr - kf * p_prev) / (kf + 1.0);
                p_prev = p_curr;
                p_curr = p_next;
            }
            p_curr
        }
    }
}

/// `p_n'(y)`, using `(1 - y^2) p_n' = n (p_{n-1} - y p_n)` away from the endpoints.
pub(crate) fn legendre_derivative(n: usize, y: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    if (1.0 - y.abs()) < 1e-10 {
        let edge = nf * (nf + 1.0) / 2.0;
        return if y > 0.0 || n % 2 == 1 { edge } else { -edge };
    }
    nf * (legendre(n - 1, y) - y * legendre(n, y)) / (1.0 - y * y)
}

/// Antiderivative of `p_n` normalized so that it vanishes at `y = 1` for `n >= 1`.
pub(crate) fn legendre_integral(n: usize, y: f64) -> f64 {
    if n == 0 {
        y
    } else {
        (legendre(n + 1, y) - legendre(n - 1, y)) / (2.0 * n as f64 + 1.0)
    }
}

fn check_even(m: usize) -> Result<()> {
    if m % 2 != 0 {
        return Err(Error::Domain(format!("Legendre degree {m} is odd")));
    }
    Ok(())
}

fn check_unit(y: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&y) {
        return Err(Error::Domain(format!("|y| > 1 (y = {y})")));
    }
    Ok(())
}

/// Even Legendre polynomial `p_m(y)` on `[-1, 1]`.
pub fn legendre_eval(m: usize, y: f64) -> Result<f64> {
    check_even(m)?;
    check_unit(y)?;
    Ok(legendre(m, y))
}

/// Antiderivative `P_m(y)` of the even Legendre polynomial `p_m`.
///
/// `P_0(y) = y`; for `m >= 2`, `P_m = (p_{m+1} - p_{m-1}) / (2m + 1)`, which is odd
/// in `y` and vanishes at `y = 0` and `y = ±1`.
pub fn legendre_antiderivative(m: usize, y: f64) -> Result<f64> {
    check_even(m)?;
    Ok(legendre_integral(m, y))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on p_n.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            for _ in 0..100 {
                let dx = legendre(n, x) / legendre_derivative(n, x);
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let dp = legendre_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integral of `f` over `[lo, hi]`.
    pub fn integrate(&self, lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// Annual-mean insolation at sine-latitude `y` for obliquity `beta_deg`,
/// normalized to unit global mean (circular orbit).
pub fn annual_mean_insolation(y: f64, beta_deg: f64) -> f64 {
    let beta = beta_deg.to_radians();
    let (sb, cb) = beta.sin_cos();
    let cos_lat = (1.0 - y * y).max(0.0).sqrt();
    let dgamma = 2.0 * PI / ORBIT_POINTS as f64;
    let sum: f64 = (0..ORBIT_POINTS)
        .map(|k| {
            let u = cos_lat * sb * (k as f64 * dgamma).cos() - y * cb;
            (1.0 - u * u).max(0.0).sqrt()
        })
        .sum();
    2.0 / (PI * PI) * sum * dgamma
}

/// Truncated even-Legendre expansion of the insolation distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsolationModel {
    /// Truncation order `M`; the expansion has `M + 1` even modes.
    pub truncation: usize,
    /// Obliquity in degrees.
    pub obliquity: f64,
    /// `[s_0, s_2, ..., s_{2M}]`.
    pub coeffs: Vec<f64>,
}

/// Builds the insolation expansion for obliquity `beta` (degrees) and truncation `m`.
pub fn insolation_coeffs(beta: f64, m: usize) -> Result<InsolationModel> {
    if !(0.0..90.0).contains(&beta) {
        return Err(Error::Domain(format!("obliquity {beta} outside [0, 90)")));
    }
    if m < 1 {
        return Err(Error::Domain("truncation order must be at least 1".into()));
    }
    let rule = GaussLegendre::new(PROJECTION_NODES);
    let samples: Vec<f64> = rule
        .nodes
        .iter()
        .map(|&y| annual_mean_insolation(y, beta))
        .collect();
    let mut coeffs = Vec::with_capacity(m + 1);
    coeffs.push(1.0);
    for k in 1..=m {
        let deg = 2 * k;
        let proj: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .zip(&samples)
            .map(|((&y, &w), &s)| w * s * legendre(deg, y))
            .sum();
        coeffs.push(0.5 * (2.0 * deg as f64 + 1.0) * proj);
    }
    Ok(InsolationModel {
        truncation: m,
        obliquity: beta,
        coeffs,
    })
}

impl InsolationModel {
    /// Model with explicit coefficients `[s_0, s_2, ...]`.
    pub fn from_coeffs(obliquity: f64, coeffs: Vec<f64>) -> Self {
        Self {
            truncation: coeffs.len().saturating_sub(1),
            obliquity,
            coeffs,
        }
    }

    /// `s_0`, the global-mean coefficient.
    pub fn s0(&self) -> f64 {
        self.coeffs[0]
    }

    /// `a_{2m} = s_{2m} / p_{2m}(cos β)`, when the denominator is nonzero.
    pub fn a_coeff(&self, k: usize) -> Option<f64> {
        let p = legendre(2 * k, self.obliquity.to_radians().cos());
        (p.abs() > 1e-12).then(|| self.coeffs[k] / p)
    }

    pub(crate) fn value(&self, y: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, s)| s * legendre(2 * k, y))
            .sum()
    }

    pub(crate) fn slope(&self, y: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, s)| s * legendre_derivative(2 * k, y))
            .sum()
    }

    pub(crate) fn antiderivative(&self, y: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, s)| s * legendre_integral(2 * k, y))
            .sum()
    }

    /// `s(y)`.
    pub fn insolation(&self, y: f64) -> Result<f64> {
        check_unit(y)?;
        Ok(self.value(y))
    }

    /// `∫_{eta_s}^{eta_n} s(y) dy`, exact for the truncated expansion.
    pub fn integral(&self, eta_s: f64, eta_n: f64) -> Result<f64> {
        check_unit(eta_s)?;
        check_unit(eta_n)?;
        if eta_s > eta_n {
            return Err(Error::Domain(format!(
                "eta_S = {eta_s} exceeds eta_N = {eta_n}"
            )));
        }
        Ok(self.antiderivative(eta_n) - self.antiderivative(eta_s))
    }
}

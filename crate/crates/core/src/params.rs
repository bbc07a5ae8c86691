//! Model parameters, the validated model, and the shared state types.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::legendre::{insolation_coeffs, InsolationModel};

/// Raw parameter set. `Default` gives the reference (Earth) values.
///
/// Units: temperatures in °C, fluxes in W m⁻², time in years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Surface-layer heat capacity `R`.
    pub heat_capacity: f64,
    /// Mean annual insolation `Q`.
    pub solar: f64,
    /// Outgoing longwave intercept `A`.
    pub olr_a: f64,
    /// Outgoing longwave slope `B`.
    pub olr_b: f64,
    /// Meridional transport efficiency `C`.
    pub transport: f64,
    /// Albedo between the albedo lines.
    pub alpha1: f64,
    /// Albedo poleward of the albedo lines.
    pub alpha2: f64,
    /// Southern critical temperature.
    pub t_cs: f64,
    /// Northern critical temperature while retreating.
    pub t_cn_plus: f64,
    /// Northern critical temperature while advancing.
    pub t_cn_minus: f64,
    /// Albedo-line response rate `ρ`.
    pub rho: f64,
    /// Accumulation rate `a`.
    pub accumulation: f64,
    /// Critical ablation rate `b`.
    pub ablation: f64,
    /// Glacial (advancing) ablation rate `b_-`.
    pub ablation_minus: f64,
    /// Interglacial (retreating) ablation rate `b_+`.
    pub ablation_plus: f64,
    /// Mass-balance response rate `ε`.
    pub eps: f64,
    /// Obliquity in degrees.
    pub obliquity: f64,
    /// Insolation truncation order `M`.
    pub truncation: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            heat_capacity: 1.0,
            solar: 343.0,
            olr_a: 202.0,
            olr_b: 1.9,
            transport: 3.04,
            alpha1: 0.32,
            alpha2: 0.62,
            t_cs: -10.0,
            t_cn_plus: -10.0,
            t_cn_minus: -5.0,
            rho: 0.3,
            accumulation: 1.05,
            ablation: 1.75,
            ablation_minus: 1.5,
            ablation_plus: 5.0,
            eps: 0.03,
            obliquity: 23.5,
            truncation: 1,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("heat_capacity", self.heat_capacity),
            ("solar", self.solar),
            ("olr_a", self.olr_a),
            ("olr_b", self.olr_b),
            ("transport", self.transport),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("t_cs", self.t_cs),
            ("t_cn_plus", self.t_cn_plus),
            ("t_cn_minus", self.t_cn_minus),
            ("rho", self.rho),
            ("accumulation", self.accumulation),
            ("ablation", self.ablation),
            ("ablation_minus", self.ablation_minus),
            ("ablation_plus", self.ablation_plus),
            ("eps", self.eps),
            ("obliquity", self.obliquity),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("{name} is not finite")));
        }
        let positive = [
            ("heat_capacity", self.heat_capacity),
            ("solar", self.solar),
            ("olr_b", self.olr_b),
            ("transport", self.transport),
            ("rho", self.rho),
            ("eps", self.eps),
            ("accumulation", self.accumulation),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| *v <= 0.0) {
            return Err(Error::InvalidParams(format!("{name} must be positive (got {v})")));
        }
        if self.alpha1 >= self.alpha2 {
            return Err(Error::InvalidParams(format!(
                "alpha1 ({}) must be below alpha2 ({})",
                self.alpha1, self.alpha2
            )));
        }
        if !(self.ablation_minus < self.ablation && self.ablation < self.ablation_plus) {
            return Err(Error::InvalidParams(format!(
                "ablation rates must satisfy b- < b < b+ (got {}, {}, {})",
                self.ablation_minus, self.ablation, self.ablation_plus
            )));
        }
        if self.ablation_minus <= 0.0 {
            return Err(Error::InvalidParams("ablation_minus must be positive".into()));
        }
        if self.t_cn_plus >= self.t_cn_minus {
            return Err(Error::InvalidParams(format!(
                "t_cn_plus ({}) must be below t_cn_minus ({})",
                self.t_cn_plus, self.t_cn_minus
            )));
        }
        if self.truncation < 1 {
            return Err(Error::InvalidParams("truncation must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which smooth field is active: glacial advance (`X_-`) or interglacial retreat (`X_+`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Advance,
    Retreat,
}

impl Branch {
    pub fn other(self) -> Self {
        match self {
            Branch::Advance => Branch::Retreat,
            Branch::Retreat => Branch::Advance,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Advance => "advance",
            Branch::Retreat => "retreat",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `(w, η_S, η_N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClimateState3 {
    pub w: f64,
    pub eta_s: f64,
    pub eta_n: f64,
}

impl ClimateState3 {
    pub fn new(w: f64, eta_s: f64, eta_n: f64) -> Self {
        Self { w, eta_s, eta_n }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.w, self.eta_s, self.eta_n]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        Self::new(y[0], y[1], y[2])
    }

    pub fn with_xi(self, xi_n: f64) -> ClimateState4 {
        ClimateState4::new(self.w, self.eta_s, self.eta_n, xi_n)
    }
}

/// `(w, η_S, η_N, ξ_N)`, the state of the switched system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClimateState4 {
    pub w: f64,
    pub eta_s: f64,
    pub eta_n: f64,
    pub xi_n: f64,
}

impl ClimateState4 {
    pub fn new(w: f64, eta_s: f64, eta_n: f64, xi_n: f64) -> Self {
        Self {
            w,
            eta_s,
            eta_n,
            xi_n,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.eta_s, self.eta_n, self.xi_n]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        Self::new(y[0], y[1], y[2], y[3])
    }

    pub fn reduced(self) -> ClimateState3 {
        ClimateState3::new(self.w, self.eta_s, self.eta_n)
    }

    /// Euclidean distance in R⁴.
    pub fn distance(&self, other: &Self) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Max-norm distance in R⁴.
    pub fn max_distance(&self, other: &Self) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Constants derived from the parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedConstants {
    /// `L = Q / (B + C)`.
    pub l: f64,
    /// `(α_1 + α_2) / 2`.
    pub alpha0: f64,
    /// `z* = L s_0 (α_1 - α_2)`.
    pub z_star: f64,
    /// `u*_{2m} = L s_{2m} (1 - α_2)` for `m = 1..=M` (also `w*_{2m}`).
    pub u_star: Vec<f64>,
    /// `v*_{2m} = L s_{2m} (1 - α_1)` for `m = 1..=M`.
    pub v_star: Vec<f64>,
}

impl DerivedConstants {
    fn new(p: &ModelParams, ins: &InsolationModel) -> Self {
        let l = p.solar / (p.olr_b + p.transport);
        let higher = &ins.coeffs[1..];
        Self {
            l,
            alpha0: 0.5 * (p.alpha1 + p.alpha2),
            z_star: l * ins.s0() * (p.alpha1 - p.alpha2),
            u_star: higher.iter().map(|s| l * s * (1.0 - p.alpha2)).collect(),
            v_star: higher.iter().map(|s| l * s * (1.0 - p.alpha1)).collect(),
        }
    }
}

/// A validated parameter set together with its insolation expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: ModelParams,
    pub insolation: InsolationModel,
    pub derived: DerivedConstants,
}

impl Model {
    /// Validates `params` and projects the insolation distribution.
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let insolation = insolation_coeffs(params.obliquity, params.truncation)?;
        Ok(Self::with_insolation(params, insolation))
    }

    /// Uses a caller-supplied insolation expansion (no projection).
    pub fn with_insolation(params: ModelParams, insolation: InsolationModel) -> Self {
        let derived = DerivedConstants::new(&params, &insolation);
        Self {
            params,
            insolation,
            derived,
        }
    }

    /// Same model with a different parameter set, reusing the insolation
    /// expansion when obliquity and truncation are unchanged.
    pub fn with_params(&self, params: ModelParams) -> Result<Self> {
        if params.obliquity == self.params.obliquity && params.truncation == self.params.truncation {
            params.validate()?;
            Ok(Self::with_insolation(params, self.insolation.clone()))
        } else {
            Self::new(params)
        }
    }

    /// Reference model.
    pub fn reference() -> Self {
        Self::new(ModelParams::default()).expect("reference parameters are valid")
    }

    /// Northern critical temperature for a branch.
    pub fn t_cn(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Advance => self.params.t_cn_minus,
            Branch::Retreat => self.params.t_cn_plus,
        }
    }

    /// Ablation rate `b_±` for a branch.
    pub fn ablation_rate(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Advance => self.params.ablation_minus,
            Branch::Retreat => self.params.ablation_plus,
        }
    }
}

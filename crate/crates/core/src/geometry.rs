//! The switching manifold `Σ = {h = 0}` and its decomposition into crossing,
//! sliding and tangency sets.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{Branch, ClimateState4, Model};

/// Width of the band around `w = h_±(η_N)` that is labelled tangency.
pub const TANGENCY_BAND: f64 = 1e-9;

/// Default tolerance for `|h| ≈ 0` on `Σ`.
pub const SIGMA_TOL: f64 = 1e-8;

/// `h = (a + b) η_N - b ξ_N - a`; positive in `S_+` (retreat), negative in `S_-` (advance).
pub fn mass_balance(model: &Model, s: &ClimateState4) -> f64 {
    let p = &model.params;
    (p.accumulation + p.ablation) * s.eta_n - p.ablation * s.xi_n - p.accumulation
}

/// The branch whose region contains the state; `None` on `Σ`.
pub fn region(model: &Model, s: &ClimateState4) -> Option<Branch> {
    let h = mass_balance(model, s);
    if h > 0.0 {
        Some(Branch::Retreat)
    } else if h < 0.0 {
        Some(Branch::Advance)
    } else {
        None
    }
}

/// `γ(η_N) = (1 + a/b) η_N - a/b`, the graph of `Σ` over `η_N`.
pub fn gamma(model: &Model, eta_n: f64) -> f64 {
    let r = model.params.accumulation / model.params.ablation;
    (1.0 + r) * eta_n - r
}

/// Projects a state onto `Σ` by replacing `ξ_N` with `γ(η_N)`.
pub fn project_to_sigma(model: &Model, s: &ClimateState4) -> ClimateState4 {
    ClimateState4 {
        xi_n: gamma(model, s.eta_n),
        ..*s
    }
}

/// Normal to `Σ`, `N = (0, 0, 1 + a/b, -1)`.
pub fn normal(model: &Model) -> [f64; 4] {
    [0.0, 0.0, 1.0 + model.params.accumulation / model.params.ablation, -1.0]
}

/// Tangency surface `w = h_±(η_N)`: `h_+` for retreat, `h_-` for advance.
pub fn tangency_w(model: &Model, branch: Branch, eta_n: f64) -> f64 {
    let p = &model.params;
    let big_h = model.g_raw(eta_n, model.t_cn(branch));
    let correction = p.accumulation * p.eps * (1.0 - eta_n) * (model.ablation_rate(branch) - p.ablation)
        / (p.rho * (p.accumulation + p.ablation));
    big_h + correction
}

/// Largest `ε` for which `h_+ < h_-` on all of `[-1, 1]`.
pub fn epsilon_bound(model: &Model) -> f64 {
    let p = &model.params;
    (p.t_cn_minus - p.t_cn_plus) * p.rho * (p.accumulation + p.ablation)
        / (2.0 * p.accumulation * (p.ablation_plus - p.ablation_minus))
}

/// Whether the model's `ε` is strictly inside the separation bound.
pub fn is_separated(model: &Model) -> bool {
    model.params.eps < epsilon_bound(model)
}

/// `X_branch · N` at a state.
pub fn normal_component(model: &Model, branch: Branch, s: &ClimateState4) -> f64 {
    let n = normal(model);
    model.rhs4(branch, s).iter().zip(n).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaLabel {
    /// `w < h_+`: both fields point into `S_-`.
    CrossingPlus,
    /// `w > h_-`: both fields point into `S_+`.
    CrossingMinus,
    /// `h_+ < w < h_-`: repelling sliding region.
    Sliding,
    TangencyPlus,
    TangencyMinus,
}

impl SigmaLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SigmaLabel::CrossingPlus => "crossing_plus",
            SigmaLabel::CrossingMinus => "crossing_minus",
            SigmaLabel::Sliding => "sliding",
            SigmaLabel::TangencyPlus => "tangency_plus",
            SigmaLabel::TangencyMinus => "tangency_minus",
        }
    }

    pub fn is_crossing(self) -> bool {
        matches!(self, SigmaLabel::CrossingPlus | SigmaLabel::CrossingMinus)
    }
}

/// Label of a point on `Σ` with the signed margins `w - h_+` and `w - h_-`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaClass {
    pub label: SigmaLabel,
    pub margin_plus: f64,
    pub margin_minus: f64,
}

fn label_from_margins(margin_plus: f64, margin_minus: f64) -> SigmaLabel {
    if margin_plus.abs() < TANGENCY_BAND {
        SigmaLabel::TangencyPlus
    } else if margin_minus.abs() < TANGENCY_BAND {
        SigmaLabel::TangencyMinus
    } else if margin_plus < 0.0 && margin_minus < 0.0 {
        SigmaLabel::CrossingPlus
    } else if margin_plus > 0.0 && margin_minus > 0.0 {
        SigmaLabel::CrossingMinus
    } else {
        SigmaLabel::Sliding
    }
}

/// Classifies a point of `Σ`; `tol` bounds `|h|`.
pub fn classify_sigma_point(model: &Model, s: &ClimateState4, tol: f64) -> Result<SigmaClass> {
    let h = mass_balance(model, s);
    if h.abs() >= tol {
        return Err(Error::NotOnSigma(h.abs()));
    }
    let margin_plus = s.w - tangency_w(model, Branch::Retreat, s.eta_n);
    let margin_minus = s.w - tangency_w(model, Branch::Advance, s.eta_n);
    Ok(SigmaClass {
        label: label_from_margins(margin_plus, margin_minus),
        margin_plus,
        margin_minus,
    })
}

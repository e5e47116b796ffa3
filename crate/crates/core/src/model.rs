//! Constraint systems `f_j(z, θ) = a_z,jᵀ z + a_θ,jᵀ θ + c_j ≤ 0` and their
//! uncertainty descriptions, plus the JSON model file format.

use crate::error::{FlexError, Result};
use crate::linalg::{cholesky, dot, CholeskyFactor, Matrix};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConstraint {
    pub name: String,
    pub a_z: Vec<f64>,
    pub a_theta: Vec<f64>,
    pub c: f64,
}

impl LinearConstraint {
    pub fn eval(&self, z: &[f64], theta: &[f64]) -> f64 {
        dot(&self.a_z, z) + dot(&self.a_theta, theta) + self.c
    }
}

/// Gaussian description `θ ~ N(mean, covariance)`; the covariance is kept
/// together with its Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianUncertainty {
    mean: Vec<f64>,
    covariance: Matrix,
    chol: CholeskyFactor,
}

impl GaussianUncertainty {
    /// Validates symmetry (relative `1e-12`) and positive definiteness. A
    /// nearly symmetric input is replaced by `(V + Vᵀ)/2`.
    pub fn new(mean: Vec<f64>, covariance: Matrix) -> Result<Self> {
        let n = mean.len();
        if covariance.rows() != n || covariance.cols() != n {
            return Err(FlexError::Dimension(format!(
                "covariance is {}x{}, mean has length {n}",
                covariance.rows(),
                covariance.cols()
            )));
        }
        if !covariance.is_finite() || mean.iter().any(|v| !v.is_finite()) {
            return Err(FlexError::Schema("non-finite uncertainty data".into()));
        }
        let scale = covariance.max_abs();
        if covariance.asymmetry() > 1e-12 * scale {
            return Err(FlexError::NotSpd(format!(
                "covariance asymmetry {:.3e}",
                covariance.asymmetry()
            )));
        }
        let covariance = covariance.symmetrized();
        let chol = cholesky(&covariance)?;
        Ok(Self {
            mean,
            covariance,
            chol,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    pub fn chol(&self) -> &CholeskyFactor {
        &self.chol
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `(θ - θ̄)ᵀ V⁻¹ (θ - θ̄)`
    pub fn mahalanobis_sq(&self, theta: &[f64]) -> f64 {
        let d: Vec<f64> = theta.iter().zip(&self.mean).map(|(t, m)| t - m).collect();
        self.chol.mahalanobis_sq(&d)
    }

    /// Same distribution with covariance multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.mean.clone(), self.covariance.scale(c))
    }
}

/// Maximum lower/upper deviations of a hyperbox around the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperboxSpec {
    pub delta_minus: Vec<f64>,
    pub delta_plus: Vec<f64>,
}

impl HyperboxSpec {
    pub fn symmetric(delta: Vec<f64>) -> Self {
        Self {
            delta_minus: delta.clone(),
            delta_plus: delta,
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.delta_minus.len() != n || self.delta_plus.len() != n {
            return Err(FlexError::Dimension(format!(
                "hyperbox deviations must have length {n}"
            )));
        }
        if self
            .delta_minus
            .iter()
            .chain(&self.delta_plus)
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(FlexError::Schema(
                "hyperbox deviations must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn is_degenerate(&self) -> bool {
        self.delta_minus
            .iter()
            .chain(&self.delta_plus)
            .all(|v| *v == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetKind {
    Ellipsoid,
    Hyperbox,
    L1,
    L2,
    Linf,
}

impl fmt::Display for SetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SetKind::Ellipsoid => "ellipsoid",
            SetKind::Hyperbox => "box",
            SetKind::L1 => "l1",
            SetKind::L2 => "l2",
            SetKind::Linf => "linf",
        })
    }
}

impl FromStr for SetKind {
    type Err = FlexError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ellipsoid" | "ellip" => Ok(SetKind::Ellipsoid),
            "box" | "hyperbox" => Ok(SetKind::Hyperbox),
            "l1" => Ok(SetKind::L1),
            "l2" => Ok(SetKind::L2),
            "linf" | "l-inf" | "inf" => Ok(SetKind::Linf),
            other => Err(FlexError::Schema(format!("unknown set kind '{other}'"))),
        }
    }
}

/// Uncertainty set family scaled by a scalar `δ`, centered at the mean.
///
/// * `Ellipsoid`: `(θ-θ̄)ᵀ V⁻¹ (θ-θ̄) ≤ δ` (δ is a squared radius)
/// * `Hyperbox`: `θ̄ - δΔ⁻ ≤ θ ≤ θ̄ + δΔ⁺`
/// * `L1`, `L2`, `Linf`: `‖θ - θ̄‖_p ≤ δ`
#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintySet {
    Ellipsoid,
    Hyperbox(HyperboxSpec),
    L1,
    L2,
    Linf,
}

impl UncertaintySet {
    /// Resolves a set kind against a model; `Hyperbox` takes the model's
    /// hyperbox block.
    pub fn from_kind(kind: SetKind, model: &SystemModel) -> Result<Self> {
        Ok(match kind {
            SetKind::Ellipsoid => UncertaintySet::Ellipsoid,
            SetKind::Hyperbox => {
                UncertaintySet::Hyperbox(model.hyperbox.clone().ok_or(FlexError::MissingHyperbox)?)
            }
            SetKind::L1 => UncertaintySet::L1,
            SetKind::L2 => UncertaintySet::L2,
            SetKind::Linf => UncertaintySet::Linf,
        })
    }

    pub fn kind(&self) -> SetKind {
        match self {
            UncertaintySet::Ellipsoid => SetKind::Ellipsoid,
            UncertaintySet::Hyperbox(_) => SetKind::Hyperbox,
            UncertaintySet::L1 => SetKind::L1,
            UncertaintySet::L2 => SetKind::L2,
            UncertaintySet::Linf => SetKind::Linf,
        }
    }

    /// Smallest `δ` with `θ ∈ T(δ)`.
    pub fn measure(&self, model: &SystemModel, theta: &[f64]) -> f64 {
        let mean = model.uncertainty.mean();
        let d: Vec<f64> = theta.iter().zip(mean).map(|(t, m)| t - m).collect();
        match self {
            UncertaintySet::Ellipsoid => model.uncertainty.mahalanobis_sq(theta),
            UncertaintySet::Hyperbox(h) => d
                .iter()
                .enumerate()
                .map(|(i, &di)| {
                    let width = if di >= 0.0 {
                        h.delta_plus[i]
                    } else {
                        h.delta_minus[i]
                    };
                    if di == 0.0 {
                        0.0
                    } else if width == 0.0 {
                        f64::INFINITY
                    } else {
                        di.abs() / width
                    }
                })
                .fold(0.0, f64::max),
            UncertaintySet::L1 => d.iter().map(|v| v.abs()).sum(),
            UncertaintySet::L2 => dot(&d, &d).sqrt(),
            UncertaintySet::Linf => d.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        }
    }

    /// Unit label for reports.
    pub fn delta_units(&self) -> &'static str {
        match self {
            UncertaintySet::Ellipsoid => "squared Mahalanobis radius",
            UncertaintySet::Hyperbox(_) => "fraction of hyperbox deviations",
            UncertaintySet::L1 | UncertaintySet::L2 | UncertaintySet::Linf => {
                "norm radius (model units)"
            }
        }
    }
}

/// An affine constraint system with recourse and its uncertainty.
/// Constraint order defines the index set used in every report.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub name: String,
    pub n_z: usize,
    pub n_theta: usize,
    pub constraints: Vec<LinearConstraint>,
    pub uncertainty: GaussianUncertainty,
    pub hyperbox: Option<HyperboxSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UncertaintyFile {
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    name: String,
    n_z: usize,
    n_theta: usize,
    constraints: Vec<LinearConstraint>,
    uncertainty: UncertaintyFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hyperbox: Option<HyperboxSpec>,
}

impl SystemModel {
    /// Builds and validates a model.
    pub fn new(
        name: impl Into<String>,
        n_z: usize,
        constraints: Vec<LinearConstraint>,
        uncertainty: GaussianUncertainty,
        hyperbox: Option<HyperboxSpec>,
    ) -> Result<Self> {
        let n_theta = uncertainty.dim();
        if n_theta == 0 {
            return Err(FlexError::Schema("n_theta must be at least 1".into()));
        }
        if constraints.is_empty() {
            return Err(FlexError::Schema(
                "at least one constraint is required".into(),
            ));
        }
        let mut seen = HashSet::new();
        for c in &constraints {
            if !seen.insert(c.name.as_str()) {
                return Err(FlexError::Schema(format!(
                    "duplicate constraint name '{}'",
                    c.name
                )));
            }
            if c.a_z.len() != n_z || c.a_theta.len() != n_theta {
                return Err(FlexError::Dimension(format!(
                    "constraint '{}' has {} z and {} theta coefficients, expected {n_z} and {n_theta}",
                    c.name,
                    c.a_z.len(),
                    c.a_theta.len()
                )));
            }
            if c.a_z.iter().chain(&c.a_theta).any(|v| !v.is_finite()) || !c.c.is_finite() {
                return Err(FlexError::Schema(format!(
                    "constraint '{}' is not finite",
                    c.name
                )));
            }
            if c.a_z.iter().chain(&c.a_theta).all(|v| *v == 0.0) {
                return Err(FlexError::Schema(format!(
                    "constraint '{}' is constant",
                    c.name
                )));
            }
        }
        if let Some(h) = &hyperbox {
            h.check(n_theta)?;
        }
        Ok(Self {
            name: name.into(),
            n_z,
            n_theta,
            constraints,
            uncertainty,
            hyperbox,
        })
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// `f_j(z, θ)`
    pub fn evaluate_constraint(&self, j: usize, z: &[f64], theta: &[f64]) -> Result<f64> {
        let c = self.constraints.get(j).ok_or(FlexError::Index {
            index: j,
            len: self.constraints.len(),
        })?;
        if z.len() != self.n_z || theta.len() != self.n_theta {
            return Err(FlexError::Dimension(format!(
                "z has length {}, theta has length {}; expected {} and {}",
                z.len(),
                theta.len(),
                self.n_z,
                self.n_theta
            )));
        }
        Ok(c.eval(z, theta))
    }

    /// Symmetric hyperbox of `k` standard deviations per parameter.
    pub fn box_from_sigmas(&self, k: f64) -> HyperboxSpec {
        let v = self.uncertainty.covariance();
        HyperboxSpec::symmetric((0..self.n_theta).map(|i| k * v[(i, i)].sqrt()).collect())
    }

    /// Copy with the covariance scaled by `c`.
    pub fn with_scaled_covariance(&self, c: f64) -> Result<Self> {
        let mut m = self.clone();
        m.uncertainty = self.uncertainty.scaled(c)?;
        Ok(m)
    }

    /// Copy with an extra constraint appended.
    pub fn with_constraint(&self, c: LinearConstraint) -> Result<Self> {
        let mut cons = self.constraints.clone();
        cons.push(c);
        Self::new(
            self.name.clone(),
            self.n_z,
            cons,
            self.uncertainty.clone(),
            self.hyperbox.clone(),
        )
    }

    pub fn to_json(&self) -> String {
        let v = self.uncertainty.covariance();
        let file = ModelFile {
            name: self.name.clone(),
            n_z: self.n_z,
            n_theta: self.n_theta,
            constraints: self.constraints.clone(),
            uncertainty: UncertaintyFile {
                mean: self.uncertainty.mean().to_vec(),
                covariance: (0..v.rows()).map(|i| v.row(i).to_vec()).collect(),
            },
            hyperbox: self.hyperbox.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }
}

/// Parses and validates a JSON model document.
pub fn parse_model(text: &str) -> Result<SystemModel> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| FlexError::Schema(e.to_string()))?;
    if file.n_theta == 0 {
        return Err(FlexError::Schema("n_theta must be at least 1".into()));
    }
    if file.uncertainty.mean.len() != file.n_theta {
        return Err(FlexError::Dimension(format!(
            "mean has length {}, n_theta is {}",
            file.uncertainty.mean.len(),
            file.n_theta
        )));
    }
    let cov = Matrix::from_rows(file.n_theta, &file.uncertainty.covariance)?;
    if cov.rows() != file.n_theta {
        return Err(FlexError::Dimension(format!(
            "covariance has {} rows, n_theta is {}",
            cov.rows(),
            file.n_theta
        )));
    }
    if let Some(h) = &file.hyperbox {
        h.check(file.n_theta)?;
        if h.is_degenerate() {
            return Err(FlexError::Schema("hyperbox deviations are all zero".into()));
        }
    }
    let unc = GaussianUncertainty::new(file.uncertainty.mean, cov)?;
    SystemModel::new(file.name, file.n_z, file.constraints, unc, file.hyperbox)
}

//! Scalar losses `ℓ(z, y)` with a positive curvature floor on `|z| ≤ r`, and the
//! curvature-shifted losses used by the preconditioned formulations.
//!
//! Every loss here satisfies `ℓ''(z, y) ≥ β(r) > 0` for `|z| ≤ r`. Subtracting
//! `(β/2) z²` from such a loss keeps it convex on that interval; the removed
//! quadratic is what the preconditioner absorbs.

use std::fmt;
use std::str::FromStr;

use crate::error::{input, Error, Result};

/// Softplus branch point: beyond this the `ln(1 + e^t)` form is replaced by its asymptote.
const SOFTPLUS_CUTOFF: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// `(1/2)(z - y)²`, labels in ℝ.
    Square,
    /// `log(1 + exp(-y z))`, labels in {-1, +1}.
    Logistic,
    /// `exp(z) - y z`, labels are nonnegative counts.
    Poisson,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Square => "square",
            LossKind::Logistic => "logistic",
            LossKind::Poisson => "poisson",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "square" | "squared" | "ridge" => Ok(LossKind::Square),
            "logistic" | "logit" => Ok(LossKind::Logistic),
            "poisson" => Ok(LossKind::Poisson),
            other => input(format!("unknown loss `{other}`")),
        }
    }
}

/// A scalar loss together with the constant that governs its conditioning.
///
/// `lipschitz` is the Lipschitz constant of `ℓ` when `smooth` is false, and the
/// Lipschitz constant of `ℓ'` (the smoothness constant) when `smooth` is true.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossModel {
    pub kind: LossKind,
    pub lipschitz: f64,
    pub smooth: bool,
}

impl LossModel {
    pub fn new(kind: LossKind, lipschitz: f64, smooth: bool) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz > 0.0) {
            return input(format!("loss constant must be positive, got {lipschitz}"));
        }
        Ok(Self {
            kind,
            lipschitz,
            smooth,
        })
    }

    /// Square loss, 1-smooth.
    pub fn square() -> Self {
        Self {
            kind: LossKind::Square,
            lipschitz: 1.0,
            smooth: true,
        }
    }

    /// Logistic loss, 1/4-smooth.
    pub fn logistic() -> Self {
        Self {
            kind: LossKind::Logistic,
            lipschitz: 0.25,
            smooth: true,
        }
    }

    /// Logistic loss viewed as a 1-Lipschitz (non-smooth) function.
    pub fn logistic_lipschitz() -> Self {
        Self {
            kind: LossKind::Logistic,
            lipschitz: 1.0,
            smooth: false,
        }
    }

    /// Poisson loss restricted to `|z| ≤ r`, where it is `e^r`-smooth.
    pub fn poisson(r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return input(format!("poisson prediction bound must be positive, got {r}"));
        }
        Self::new(LossKind::Poisson, r.exp(), true)
    }

    /// Default model for a loss kind. Poisson uses `r = 1`.
    pub fn default_for(kind: LossKind) -> Self {
        match kind {
            LossKind::Square => Self::square(),
            LossKind::Logistic => Self::logistic(),
            LossKind::Poisson => Self {
                kind,
                lipschitz: std::f64::consts::E,
                smooth: true,
            },
        }
    }

    pub fn label_ok(&self, y: f64) -> bool {
        match self.kind {
            LossKind::Square => y.is_finite(),
            LossKind::Logistic => y == 1.0 || y == -1.0,
            LossKind::Poisson => y.is_finite() && y >= 0.0,
        }
    }

    pub fn validate_label(&self, y: f64) -> Result<()> {
        if self.label_ok(y) {
            Ok(())
        } else {
            input(format!("label {y} outside the domain of the {} loss", self.kind))
        }
    }

    pub fn validate_labels(&self, ys: &[f64]) -> Result<()> {
        match ys.iter().position(|&y| !self.label_ok(y)) {
            None => Ok(()),
            Some(i) => input(format!(
                "label {} at sample {i} outside the domain of the {} loss",
                ys[i], self.kind
            )),
        }
    }

    #[inline]
    pub fn value(&self, z: f64, y: f64) -> f64 {
        match self.kind {
            LossKind::Square => 0.5 * (z - y) * (z - y),
            LossKind::Logistic => softplus(-y * z),
            LossKind::Poisson => z.exp() - y * z,
        }
    }

    /// `∂ℓ/∂z`.
    #[inline]
    pub fn grad(&self, z: f64, y: f64) -> f64 {
        match self.kind {
            LossKind::Square => z - y,
            LossKind::Logistic => -y * sigmoid(-y * z),
            LossKind::Poisson => z.exp() - y,
        }
    }

    /// `∂²ℓ/∂z²`.
    #[inline]
    pub fn curvature(&self, z: f64, y: f64) -> f64 {
        match self.kind {
            LossKind::Square => 1.0,
            LossKind::Logistic => {
                let t = y * z;
                sigmoid(t) * sigmoid(-t)
            }
            LossKind::Poisson => z.exp(),
        }
    }

    pub fn try_value(&self, z: f64, y: f64) -> Result<f64> {
        self.validate_label(y)?;
        Ok(self.value(z, y))
    }

    pub fn try_grad(&self, z: f64, y: f64) -> Result<f64> {
        self.validate_label(y)?;
        Ok(self.grad(z, y))
    }

    pub fn try_curvature(&self, z: f64, y: f64) -> Result<f64> {
        self.validate_label(y)?;
        Ok(self.curvature(z, y))
    }

    /// Curvature floor `β(r) = min_{|z| ≤ r} ℓ''(z, y)`.
    pub fn beta_lower(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return input(format!("prediction bound r must be positive, got {r}"));
        }
        Ok(match self.kind {
            LossKind::Square => 1.0,
            LossKind::Logistic => sigmoid(r) * sigmoid(-r),
            LossKind::Poisson => (-r).exp(),
        })
    }

    /// `φ(z, y) = ℓ(z, y) - (β/2) z²`.
    #[inline]
    pub fn phi_value(&self, beta: f64, z: f64, y: f64) -> f64 {
        self.value(z, y) - 0.5 * beta * z * z
    }

    #[inline]
    pub fn phi_grad(&self, beta: f64, z: f64, y: f64) -> f64 {
        self.grad(z, y) - beta * z
    }

    #[inline]
    pub fn phi_curvature(&self, beta: f64, z: f64, y: f64) -> f64 {
        self.curvature(z, y) - beta
    }

    /// `ψ`: the shifted loss for samples that built the preconditioner, the
    /// plain loss for all others.
    #[inline]
    pub fn psi_value(&self, beta: f64, in_sample: bool, z: f64, y: f64) -> f64 {
        if in_sample {
            self.phi_value(beta, z, y)
        } else {
            self.value(z, y)
        }
    }

    #[inline]
    pub fn psi_grad(&self, beta: f64, in_sample: bool, z: f64, y: f64) -> f64 {
        if in_sample {
            self.phi_grad(beta, z, y)
        } else {
            self.grad(z, y)
        }
    }

    #[inline]
    pub fn psi_curvature(&self, beta: f64, in_sample: bool, z: f64, y: f64) -> f64 {
        if in_sample {
            self.phi_curvature(beta, z, y)
        } else {
            self.curvature(z, y)
        }
    }
}

/// `ln(1 + e^t)` without overflow.
#[inline]
pub fn softplus(t: f64) -> f64 {
    if t > SOFTPLUS_CUTOFF {
        t + (-t).exp()
    } else if t < -SOFTPLUS_CUTOFF {
        t.exp()
    } else {
        t.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

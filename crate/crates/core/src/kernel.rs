//! The heavy-tailed similarity kernel family.
//!
//! Two parametrisations are supported:
//!
//! * [`KernelVariant::Simplified`]: `k(d) = (1 + d²/α)^(−α)`, defined for
//!   every α > 0 and tending to `exp(−d²)` as α → ∞.
//! * [`KernelVariant::Classic`]: the Student-t density
//!   `k(d) = (1 + d²/ν)^(−(ν+1)/2)` with `ν = 2α − 1`, which needs α > 1/2.
//!
//! The two differ only by a global rescaling of distances by
//! `s = √(2ν/(ν+1))`, so the optimiser always works with the simplified form
//! and a classic run is mapped onto it (see [`KernelParams::to_simplified`]).
//!
//! The gradient never needs the kernel itself at a fractional power: the
//! attractive term uses `w^(1/α) = 1/(1 + d²/α)` and the repulsive term
//! `w^((α+1)/α) = w · w^(1/α)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, invalid_input, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelVariant {
    #[default]
    Simplified,
    Classic,
}

/// Tail-heaviness α plus the parametrisation it refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    alpha: f64,
    variant: KernelVariant,
}

impl KernelParams {
    pub fn new(alpha: f64, variant: KernelVariant) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(invalid_arg!(
                "alpha must be a positive finite number, got {alpha}"
            ));
        }
        if variant == KernelVariant::Classic && alpha <= 0.5 {
            return Err(invalid_arg!(
                "the classic t-kernel needs nu = 2*alpha - 1 > 0, got alpha = {alpha}"
            ));
        }
        Ok(Self { alpha, variant })
    }

    pub fn simplified(alpha: f64) -> Result<Self> {
        Self::new(alpha, KernelVariant::Simplified)
    }

    /// Classic Student-t kernel with `nu` degrees of freedom.
    pub fn classic_from_dof(nu: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(invalid_arg!(
                "degrees of freedom must be positive, got {nu}"
            ));
        }
        Self::new((nu + 1.0) / 2.0, KernelVariant::Classic)
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn variant(&self) -> KernelVariant {
        self.variant
    }

    /// Degrees of freedom `ν = 2α − 1` of the matching t-distribution.
    #[inline]
    pub fn nu(&self) -> f64 {
        2.0 * self.alpha - 1.0
    }

    /// The simplified kernel with the same α, and the factor `s` by which
    /// an embedding optimised under it must be multiplied to be optimal
    /// under `self`. `s = 1` for the simplified variant.
    pub fn to_simplified(&self) -> (KernelParams, f64) {
        let simplified = KernelParams {
            alpha: self.alpha,
            variant: KernelVariant::Simplified,
        };
        match self.variant {
            KernelVariant::Simplified => (simplified, 1.0),
            KernelVariant::Classic => {
                let nu = self.nu();
                (simplified, math::sqrt(2.0 * nu / (nu + 1.0)))
            }
        }
    }

    /// Fast evaluator for the simplified kernel with this α.
    pub fn evaluator(&self) -> Result<Kernel> {
        if self.variant != KernelVariant::Simplified {
            return Err(invalid_arg!(
                "forces are defined for the simplified kernel; convert with to_simplified()"
            ));
        }
        Ok(Kernel::new(self.alpha))
    }
}

fn check_d2(d_squared: f64) -> Result<()> {
    if !d_squared.is_finite() || d_squared < 0.0 {
        return Err(invalid_input!(
            "squared distance must be finite and non-negative, got {d_squared}"
        ));
    }
    Ok(())
}

/// Kernel value `w = k(d)` for either variant; `w ∈ (0, 1]`.
pub fn kernel_value(d_squared: f64, params: &KernelParams) -> Result<f64> {
    check_d2(d_squared)?;
    Ok(match params.variant {
        KernelVariant::Simplified => Kernel::new(params.alpha).weight(d_squared),
        KernelVariant::Classic => {
            let nu = params.nu();
            math::exp(-0.5 * (nu + 1.0) * math::ln_1p(d_squared / nu))
        }
    })
}

/// `w^(1/α) = 1/(1 + d²/α)`, the weight of the attractive force.
pub fn attraction_weight(d_squared: f64, params: &KernelParams) -> Result<f64> {
    check_d2(d_squared)?;
    Ok(params.evaluator()?.base(d_squared))
}

/// `w^((α+1)/α) = (1 + d²/α)^(−(α+1))`, the weight of the repulsive force.
pub fn repulsion_weight(d_squared: f64, params: &KernelParams) -> Result<f64> {
    check_d2(d_squared)?;
    Ok(params.evaluator()?.repulsion(d_squared))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Power {
    One,
    Int(i32),
    /// `base^k · √base`
    HalfInt(i32),
    Float,
    /// `exp(−α · ln(1 + d²/α))`; avoids underflowing `base^α` for tiny α.
    LogSpace,
}

/// Unchecked simplified-kernel evaluator for the inner loops.
///
/// Integer and half-integer α avoid `powf`; very small α goes through log
/// space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    alpha: f64,
    inv_alpha: f64,
    power: Power,
}

impl Kernel {
    pub fn new(alpha: f64) -> Self {
        let twice = 2.0 * alpha;
        let power = if alpha == 1.0 {
            Power::One
        } else if alpha == math::floor(alpha) && alpha <= 64.0 {
            Power::Int(alpha as i32)
        } else if twice == math::floor(twice) && alpha <= 64.0 {
            Power::HalfInt(math::floor(alpha) as i32)
        } else if alpha < 0.3 {
            Power::LogSpace
        } else {
            Power::Float
        };
        Self {
            alpha,
            inv_alpha: 1.0 / alpha,
            power,
        }
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `1 / (1 + d²/α)`
    #[inline]
    pub fn base(&self, d2: f64) -> f64 {
        1.0 / (1.0 + d2 * self.inv_alpha)
    }

    /// `k(d)` given `d²` and the precomputed `base(d²)`.
    #[inline]
    pub fn weight_with_base(&self, d2: f64, base: f64) -> f64 {
        match self.power {
            Power::One => base,
            Power::Int(k) => math::powi(base, k),
            Power::HalfInt(k) => math::powi(base, k) * math::sqrt(base),
            Power::Float => math::powf(base, self.alpha),
            Power::LogSpace => math::exp(-self.alpha * math::ln_1p(d2 * self.inv_alpha)),
        }
    }

    #[inline]
    pub fn weight(&self, d2: f64) -> f64 {
        self.weight_with_base(d2, self.base(d2))
    }

    #[inline]
    pub fn repulsion(&self, d2: f64) -> f64 {
        let b = self.base(d2);
        self.weight_with_base(d2, b) * b
    }

    /// `ln k(d)`, computed without forming `k(d)`.
    #[inline]
    pub fn ln_weight(&self, d2: f64) -> f64 {
        -self.alpha * math::ln_1p(d2 * self.inv_alpha)
    }
}

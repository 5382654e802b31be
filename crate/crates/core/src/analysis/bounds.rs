use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::gamma_complement;

/// Constants entering the closed-form convergence bounds.
///
/// `G` (the interference moment bound) is always supplied by the caller. An
/// exactly α-stable law has no finite α-th moment, so for bound-vs-simulation
/// comparisons compute it from a truncated surrogate of the noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    /// `f(w_0) - f*`.
    pub f0_minus_fstar: f64,
    /// Smoothness constant under the α-norm.
    #[serde(rename = "L")]
    pub smoothness: f64,
    /// Per-coordinate gradient bound.
    #[serde(rename = "C")]
    pub grad_bound: f64,
    /// Bound on the α-th moment of the interference.
    #[serde(rename = "G")]
    pub interference_moment: f64,
    pub mu_c: f64,
    pub sigma_c: f64,
    #[serde(rename = "N")]
    pub n_clients: u64,
    pub d: u64,
    pub eta: f64,
    pub epsilon: f64,
    /// Only read by the Adam bound.
    #[serde(default)]
    pub beta2: Option<f64>,
    #[serde(rename = "T")]
    pub rounds: u64,
    pub alpha: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &'static str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} must be finite and >= 0")))
            }
        };
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} must be finite and > 0")))
            }
        };
        nonneg("f0_minus_fstar", self.f0_minus_fstar)?;
        positive("L", self.smoothness)?;
        nonneg("C", self.grad_bound)?;
        nonneg("G", self.interference_moment)?;
        if !self.mu_c.is_finite() {
            return Err(Error::invalid("mu_c", "must be finite"));
        }
        nonneg("sigma_c", self.sigma_c)?;
        positive("eta", self.eta)?;
        positive("epsilon", self.epsilon)?;
        if self.n_clients == 0 {
            return Err(Error::invalid("N", "must be at least 1"));
        }
        if self.d == 0 {
            return Err(Error::invalid("d", "must be at least 1"));
        }
        if self.rounds == 0 {
            return Err(Error::invalid("T", "must be at least 1"));
        }
        gamma_complement(self.alpha)?;
        if let Some(b) = self.beta2 {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::invalid("beta2", format!("{b} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// `4G + d^{1-α/2} (μ_c² + σ_c²)^{α/2} C^α / N^{α/2}`.
pub fn upsilon(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(upsilon_unchecked(inputs))
}

fn upsilon_unchecked(p: &BoundInputs) -> f64 {
    let a = p.alpha;
    let d = p.d as f64;
    let n = p.n_clients as f64;
    4.0 * p.interference_moment
        + d.powf(1.0 - a / 2.0)
            * (p.mu_c * p.mu_c + p.sigma_c * p.sigma_c).powf(a / 2.0)
            * p.grad_bound.powf(a)
            / n.powf(a / 2.0)
}

/// AdaGrad-OTA bound split into its two additive terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdagradBound {
    pub upsilon: f64,
    /// Term proportional to `f(w_0) - f*`.
    pub initial_gap: f64,
    /// The `ln(1 + ΥT/ε)` term.
    pub accumulation: f64,
    pub bound: f64,
}

/// Adam-OTA bound split into its additive terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdamBound {
    pub upsilon: f64,
    pub initial_gap: f64,
    /// Coefficient times `(1/T) ln(1 + Υ/ε)`.
    pub transient: f64,
    /// Coefficient times `-ln β₂`; does not vanish as `T` grows.
    pub floor: f64,
    pub bound: f64,
}

fn positive_denominator(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::NonPositiveDenominator {
            denominator: name,
            value,
        })
    }
}

/// Right-hand side of the AdaGrad-OTA convergence bound on
/// `(1/T) Σ E||∇f(w_t)||²`.
///
/// The η exponents are `α/γ` and `γ/α` as written in the theorem statement;
/// the appendix derivation carries `η^α` and `η^γ` instead.
pub fn adagrad_bound(inputs: &BoundInputs) -> Result<AdagradBound> {
    inputs.validate()?;
    let mu_minus_one = positive_denominator("mu_c - 1", inputs.mu_c - 1.0)?;
    let a = inputs.alpha;
    let g = gamma_complement(a)?.gamma;
    let ups = upsilon_unchecked(inputs);
    let ups_root = ups.powf(1.0 / a);
    let t = inputs.rounds as f64;
    let t_root = t.powf(1.0 / g);
    let eta = inputs.eta;
    let l = inputs.smoothness;
    let d = inputs.d as f64;

    let initial_gap = inputs.f0_minus_fstar * ups_root / (eta * mu_minus_one * t_root);
    let bracket = eta.powf(a / g) * l / a
        + eta.powf(g / a) * l / g
        + ups_root
        + inputs.epsilon.powf(-1.0 / a);
    let accumulation =
        bracket * d * ups_root / (2.0 * mu_minus_one * t_root) * (ups * t / inputs.epsilon).ln_1p();
    Ok(AdagradBound {
        upsilon: ups,
        initial_gap,
        accumulation,
        bound: initial_gap + accumulation,
    })
}

/// Right-hand side of the Adam-OTA convergence bound. Requires `beta2`.
pub fn adam_bound(inputs: &BoundInputs) -> Result<AdamBound> {
    inputs.validate()?;
    let b2 = inputs
        .beta2
        .ok_or_else(|| Error::invalid("beta2", "required for the Adam bound"))?;
    let denom = positive_denominator("mu_c + beta2 - 1", inputs.mu_c + b2 - 1.0)?;
    let a = inputs.alpha;
    let g = gamma_complement(a)?.gamma;
    let ups = upsilon_unchecked(inputs);
    let ups_root = ups.powf(1.0 / a);
    let t = inputs.rounds as f64;
    let eta = inputs.eta;
    let l = inputs.smoothness;
    let d = inputs.d as f64;
    let omb = 1.0 - b2;

    let initial_gap = inputs.f0_minus_fstar * ups_root / (denom * eta * t);
    let middle = (omb.powf(1.0 / g) * eta.powf(g) * l + g * omb.powf(g - 2.0) * ups_root)
        / (g * omb.powf(g + 1.0 / g - 2.0));
    let bracket = eta.powf(a / g) * l / a + middle + omb / inputs.epsilon.powf(1.0 / a);
    let coef = bracket * d * ups_root / (2.0 * denom);
    let transient = coef * (ups / inputs.epsilon).ln_1p() / t;
    let floor = -coef * b2.ln();
    Ok(AdamBound {
        upsilon: ups,
        initial_gap,
        transient,
        floor,
        bound: initial_gap + transient + floor,
    })
}

//! Both sides of the supporting inequalities, for use as test oracles.

use crate::error::{Error, Result};
use crate::param::{gamma_complement, lp_norm_pow, signed_pow_scalar, ParamVector};

fn check_nonnegative(seq: &[f64]) -> Result<()> {
    for (index, &value) in seq.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index, value });
        }
        if value < 0.0 {
            return Err(Error::invalid(
                "seq",
                format!("element {index} is negative ({value})"),
            ));
        }
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("epsilon", format!("{epsilon} must be > 0")))
    }
}

/// `Σ_j a_j / (b_j + ε)` and `ln(1 + b_n / ε)` with `b_j = Σ_{i<=j} a_i`.
pub fn cumulative_ratio_sides(seq: &[f64], epsilon: f64) -> Result<(f64, f64)> {
    check_nonnegative(seq)?;
    check_epsilon(epsilon)?;
    let mut b = 0.0;
    let mut lhs = 0.0;
    for &a in seq {
        b += a;
        lhs += a / (b + epsilon);
    }
    Ok((lhs, (b / epsilon).ln_1p()))
}

/// Exponential-average variant: `b_j = φ b_{j-1} + (1 - φ) a_j` (so
/// `b_n = (1-φ) Σ φ^{n-i} a_i`), returning `Σ_j a_j / (b_j + ε)` and
/// `ln(1 + b_n/ε) / (1-φ) - n ln φ / (1-φ)` where `n` is the last index.
///
/// The numerators are `a_j`, not `a_j²`: the telescoping argument bounds
/// `(1-φ) a_j / (b_j + ε)`, and a squared numerator is not scale invariant
/// (large `a_j` break it).
pub fn ema_ratio_sides(seq: &[f64], phi: f64, epsilon: f64) -> Result<(f64, f64)> {
    if seq.is_empty() {
        return Err(Error::Empty("seq"));
    }
    check_nonnegative(seq)?;
    check_epsilon(epsilon)?;
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::invalid("phi", format!("{phi} must lie in (0, 1)")));
    }
    let mut b = 0.0;
    let mut lhs = 0.0;
    for &a in seq {
        b = phi * b + (1.0 - phi) * a;
        lhs += a / (b + epsilon);
    }
    let n = (seq.len() - 1) as f64;
    let rhs = ((b / epsilon).ln_1p() - n * phi.ln()) / (1.0 - phi);
    Ok((lhs, rhs))
}

/// `||u + v||_α^α` and `||u||_α^α + α <u^{<α-1>}, v> + 4 ||v||_α^α` for
/// `α ∈ [1, 2]`.
pub fn power_expansion_sides(u: &ParamVector, v: &ParamVector, alpha: f64) -> Result<(f64, f64)> {
    if !(1.0..=2.0).contains(&alpha) {
        return Err(Error::invalid(
            "alpha",
            format!("{alpha} must lie in [1, 2]"),
        ));
    }
    let sum = u.zip_map(v, |a, b| a + b)?;
    let lhs = lp_norm_pow(sum.as_slice(), alpha);
    let cross: f64 = u
        .iter()
        .zip(v)
        .map(|(a, b)| signed_pow_scalar(*a, alpha - 1.0) * b)
        .sum();
    let rhs =
        lp_norm_pow(u.as_slice(), alpha) + alpha * cross + 4.0 * lp_norm_pow(v.as_slice(), alpha);
    Ok((lhs, rhs))
}

/// `f(w) = 0.5 wᵀ A w + bᵀ w` with symmetric `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl QuadraticForm {
    /// `a` is row-major `d x d` and must be symmetric.
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let d = b.len();
        if d == 0 {
            return Err(Error::Empty("linear term"));
        }
        if a.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: a.len(),
            });
        }
        crate::param::check_finite(&a)?;
        crate::param::check_finite(&b)?;
        for i in 0..d {
            for j in 0..i {
                if a[i * d + j] != a[j * d + i] {
                    return Err(Error::invalid("a", format!("not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { a, b })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        let d = self.dim();
        let mut quad = 0.0;
        for i in 0..d {
            let row: f64 = (0..d).map(|j| self.a[i * d + j] * w[j]).sum();
            quad += w[i] * row;
        }
        0.5 * quad + self.b.iter().zip(w).map(|(x, y)| x * y).sum::<f64>()
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).map(|j| self.a[i * d + j] * w[j]).sum::<f64>() + self.b[i])
            .collect()
    }

    /// Largest absolute row sum of `A`. For symmetric `A` this bounds the
    /// operator norm induced by every `p`-norm, so it is a valid smoothness
    /// constant under the α-norm.
    pub fn smoothness(&self) -> f64 {
        let d = self.dim();
        (0..d)
            .map(|i| {
                self.a[i * d..(i + 1) * d]
                    .iter()
                    .map(|x| x.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// `f(u)` and `f(v) + <∇f(v), u - v> + (L/2)(||u-v||_α^α / α + ||u-v||_γ^γ / γ)`
/// for a quadratic `f` with `L` from [`QuadraticForm::smoothness`].
pub fn alpha_smoothness_sides(
    f: &QuadraticForm,
    u: &ParamVector,
    v: &ParamVector,
    alpha: f64,
) -> Result<(f64, f64)> {
    let gamma = gamma_complement(alpha)?.gamma;
    if u.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: u.dim(),
        });
    }
    let diff = u.zip_map(v, |a, b| a - b)?;
    let grad = f.gradient(v.as_slice());
    let linear: f64 = grad.iter().zip(&diff).map(|(g, x)| g * x).sum();
    let l = f.smoothness();
    let rhs = f.value(v.as_slice())
        + linear
        + 0.5
            * l
            * (lp_norm_pow(diff.as_slice(), alpha) / alpha
                + lp_norm_pow(diff.as_slice(), gamma) / gamma);
    Ok((f.value(u.as_slice()), rhs))
}

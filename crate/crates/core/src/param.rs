//! Dense parameter vectors and the entrywise power/norm algebra the update
//! rules are written in.
//!
//! Every [`ParamVector`] holds only finite coordinates; any operation that
//! would produce NaN or an infinity returns [`Error::NonFinite`] instead.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A model, gradient, or accumulator vector of fixed dimension `d >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("parameter vector"));
        }
        check_finite(&coords)?;
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "parameter vector dimension must be positive");
        Self(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty("parameter vector"));
        }
        Self::new(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        ensure_same_dim(self, other)?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    /// Builds a vector from `f(i)` for each coordinate, validating the result.
    pub(crate) fn from_fn(dim: usize, f: impl FnMut(usize) -> f64) -> Result<Self> {
        Self::new((0..dim).map(f).collect())
    }

    pub(crate) fn zip_map(
        &self,
        other: &ParamVector,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Result<Self> {
        ensure_same_dim(self, other)?;
        Self::new(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub(crate) fn map(&self, f: impl FnMut(&f64) -> f64) -> Result<Self> {
        Self::new(self.0.iter().map(f).collect())
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::new(coords)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(v: ParamVector) -> Self {
        v.0
    }
}

impl<'a> IntoIterator for &'a ParamVector {
    type Item = &'a f64;
    type IntoIter = std::slice::Iter<'a, f64>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

pub(crate) fn check_finite(coords: &[f64]) -> Result<()> {
    match coords.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: coords[index],
        }),
        None => Ok(()),
    }
}

pub(crate) fn ensure_same_dim(a: &ParamVector, b: &ParamVector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// A tail index together with its Hölder conjugate: `1/alpha + 1/gamma = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailIndexPair {
    pub alpha: f64,
    pub gamma: f64,
}

/// `sign(x) * |x|^p`, with `sign(0) = 0`.
#[inline]
pub fn signed_pow_scalar(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(p)
    }
}

/// Entrywise `sign(v_i) |v_i|^p`.
pub fn signed_power(v: &ParamVector, p: f64) -> Result<ParamVector> {
    if !p.is_finite() || p < 0.0 {
        return Err(Error::invalid(
            "exponent",
            format!("{p} must be finite and >= 0"),
        ));
    }
    v.map(|&x| signed_pow_scalar(x, p))
}

/// Entrywise `|v_i|^alpha`, the accumulator increment of both adaptive rules.
pub fn abs_power(v: &ParamVector, alpha: f64) -> Result<ParamVector> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::invalid("alpha", format!("{alpha} not in (0, 2]")));
    }
    v.map(|&x| x.abs().powf(alpha))
}

/// L-p norm of a slice; `p = f64::INFINITY` gives the max-norm.
///
/// The largest magnitude is factored out first so large `p` cannot overflow.
pub fn lp_norm_slice(v: &[f64], p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::invalid("p", format!("{p} must be >= 1 or infinity")));
    }
    let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if p.is_infinite() || max == 0.0 {
        return Ok(max);
    }
    let sum: f64 = v.iter().map(|x| (x.abs() / max).powf(p)).sum();
    Ok(max * sum.powf(1.0 / p))
}

pub fn lp_norm(v: &ParamVector, p: f64) -> Result<f64> {
    lp_norm_slice(v.as_slice(), p)
}

/// `sum_i |v_i|^p`, i.e. `lp_norm(v, p)^p` without the root.
pub fn lp_norm_pow(v: &[f64], p: f64) -> f64 {
    v.iter().map(|x| x.abs().powf(p)).sum()
}

pub fn gamma_complement(alpha: f64) -> Result<TailIndexPair> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::invalid("alpha", format!("{alpha} not in (1, 2]")));
    }
    Ok(TailIndexPair {
        alpha,
        gamma: alpha / (alpha - 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(matches!(
            ParamVector::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(ParamVector::new(vec![]).is_err());
        assert!(serde_json::from_str::<ParamVector>("[]").is_err());
    }

    #[test]
    fn signed_power_examples() {
        assert_eq!(
            signed_power(&pv(&[-2.0, 3.0]), 2.0).unwrap().as_slice(),
            &[-4.0, 9.0]
        );
        assert_eq!(
            signed_power(&pv(&[5.0, -5.0]), 1.0).unwrap().as_slice(),
            &[5.0, -5.0]
        );
        let out = signed_power(&pv(&[-0.7, 1.3]), 1.5).unwrap();
        // Scalar oracle: -(0.7^1.5), 1.3^1.5 via exp/ln.
        let oracle = [-(1.5 * 0.7f64.ln()).exp(), (1.5 * 1.3f64.ln()).exp()];
        for (a, b) in out.iter().zip(oracle) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(
            signed_power(&pv(&[0.0, -0.0]), 0.5).unwrap().as_slice(),
            &[0.0, 0.0]
        );
        assert!(signed_power(&pv(&[1.0]), -1.0).is_err());
    }

    #[test]
    fn signed_power_overflow_is_an_error() {
        assert!(matches!(
            signed_power(&pv(&[1e300]), 2.0),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn abs_power_examples() {
        assert_eq!(
            abs_power(&pv(&[-2.0, 3.0]), 2.0).unwrap().as_slice(),
            &[4.0, 9.0]
        );
        assert_eq!(
            abs_power(&pv(&[0.0, 0.0]), 1.3).unwrap().as_slice(),
            &[0.0, 0.0]
        );
        let out = abs_power(&pv(&[-1.5, 0.5]), 1.5).unwrap();
        let oracle = [1.5f64 * 1.5f64.sqrt(), 0.5f64 * 0.5f64.sqrt()];
        for (a, b) in out.iter().zip(oracle) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(abs_power(&pv(&[1.0]), 2.5).is_err());
    }

    #[test]
    fn lp_norm_examples() {
        assert_eq!(lp_norm(&pv(&[3.0, 4.0]), 2.0).unwrap(), 5.0);
        assert_eq!(lp_norm(&pv(&[1.0, -2.0, 3.0]), f64::INFINITY).unwrap(), 3.0);
        let closed = 4f64.powf(2.0 / 3.0);
        let direct = (4.0f64).powf(1.0 / 1.5);
        let got = lp_norm(&pv(&[1.0; 4]), 1.5).unwrap();
        assert!((got - closed).abs() < 1e-14 && (got - direct).abs() < 1e-14);
        assert_eq!(lp_norm(&pv(&[0.0, 0.0]), 3.0).unwrap(), 0.0);
        assert!(lp_norm(&pv(&[1.0]), 0.5).is_err());
    }

    #[test]
    fn lp_norm_large_p_does_not_overflow() {
        let v = pv(&[1e200, 1e200]);
        let n = lp_norm(&v, 4.0).unwrap();
        assert!((n / 1e200 - 2f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn gamma_complement_examples() {
        assert_eq!(gamma_complement(2.0).unwrap().gamma, 2.0);
        assert!((gamma_complement(1.5).unwrap().gamma - 3.0).abs() < 1e-12);
        assert!((gamma_complement(1.25).unwrap().gamma - 5.0).abs() < 1e-12);
        assert!(gamma_complement(1.0).is_err());
        assert!(gamma_complement(2.1).is_err());
    }

    fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50.0f64..50.0, 1..16)
    }

    proptest! {
        #[test]
        fn signed_power_one_is_identity(v in vec_strategy()) {
            let v = ParamVector::new(v).unwrap();
            prop_assert_eq!(signed_power(&v, 1.0).unwrap(), v);
        }

        #[test]
        fn abs_power_is_magnitude_of_signed_power(v in vec_strategy(), alpha in 0.1f64..2.0) {
            let v = ParamVector::new(v).unwrap();
            let s = signed_power(&v, alpha).unwrap();
            let a = abs_power(&v, alpha).unwrap();
            for (x, y) in s.iter().zip(a.iter()) {
                prop_assert_eq!(x.abs(), *y);
                prop_assert!(*y >= 0.0);
            }
        }

        #[test]
        fn abs_power_sum_matches_norm_power(v in vec_strategy(), alpha in 1.0f64..2.0) {
            let v = ParamVector::new(v).unwrap();
            let lhs = lp_norm(&abs_power(&v, alpha).unwrap(), 1.0).unwrap();
            let rhs = lp_norm(&v, alpha).unwrap().powf(alpha);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300));
        }

        #[test]
        fn conjugate_map_is_an_involution(alpha in 1.0001f64..=2.0) {
            let pair = gamma_complement(alpha).unwrap();
            prop_assert!((1.0 / pair.alpha + 1.0 / pair.gamma - 1.0).abs() < 1e-12);
            let back = pair.gamma / (pair.gamma - 1.0);
            prop_assert!((back - alpha).abs() < 1e-12);
        }

        #[test]
        fn norm_is_zero_only_at_origin(v in vec_strategy(), p in 1.0f64..6.0) {
            let v = ParamVector::new(v).unwrap();
            let n = lp_norm(&v, p).unwrap();
            prop_assert!(n >= 0.0);
            prop_assert_eq!(n == 0.0, v.iter().all(|x| *x == 0.0));
        }
    }
}

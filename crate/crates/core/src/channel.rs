//! Analog multiple-access channel: per-client fading, symmetric α-stable
//! interference, and the superposed gradient the server receives.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::distributions::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::param::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingKind {
    Rayleigh,
    Constant,
    /// Normal(mean, std) conditioned on being nonnegative.
    GaussianTruncated,
}

/// Distribution of the per-client, per-round channel gain `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FadingModel {
    kind: FadingKind,
    mean: f64,
    std: f64,
}

/// Rayleigh std-to-mean ratio, `sqrt(4/pi - 1)`.
fn rayleigh_std_ratio() -> f64 {
    (4.0 / PI - 1.0).sqrt()
}

impl FadingModel {
    pub fn new(kind: FadingKind, mean: f64, std: f64) -> Result<Self> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(Error::invalid("fading mean", format!("{mean} must be > 0")));
        }
        if !(std.is_finite() && std >= 0.0) {
            return Err(Error::invalid("fading std", format!("{std} must be >= 0")));
        }
        match kind {
            FadingKind::Rayleigh => {
                let implied = mean * rayleigh_std_ratio();
                if (std - implied).abs() > 1e-9 {
                    return Err(Error::invalid(
                        "fading std",
                        format!("Rayleigh with mean {mean} requires std {implied}, got {std}"),
                    ));
                }
            }
            FadingKind::Constant if std != 0.0 => {
                return Err(Error::invalid("fading std", "constant fading has std 0"));
            }
            _ => {}
        }
        Ok(Self { kind, mean, std })
    }

    /// Rayleigh fading whose single scale parameter is set so that `E[h] = mean`.
    pub fn rayleigh(mean: f64) -> Result<Self> {
        Self::new(FadingKind::Rayleigh, mean, mean * rayleigh_std_ratio())
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(FadingKind::Constant, value, 0.0)
    }

    pub fn gaussian_truncated(mean: f64, std: f64) -> Result<Self> {
        Self::new(FadingKind::GaussianTruncated, mean, std)
    }

    pub fn kind(&self) -> FadingKind {
        self.kind
    }

    /// Configured mean `mu_c`. For the truncated Gaussian this is the mean of
    /// the untruncated law.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        self.std
    }
}

pub fn sample_fading<R: Rng + ?Sized>(model: &FadingModel, rng: &mut R) -> f64 {
    match model.kind {
        FadingKind::Constant => model.mean,
        FadingKind::Rayleigh => {
            let sigma = model.mean * (2.0 / PI).sqrt();
            let u: f64 = rng.sample(Open01);
            sigma * (-2.0 * u.ln()).sqrt()
        }
        FadingKind::GaussianTruncated => {
            if model.std == 0.0 {
                return model.mean;
            }
            // mean > 0, so each proposal is accepted with probability > 1/2.
            loop {
                let z: f64 = rng.sample(StandardNormal);
                let h = model.mean + model.std * z;
                if h >= 0.0 {
                    return h;
                }
            }
        }
    }
}

/// One draw from the symmetric α-stable law with characteristic function
/// `exp(-|scale * t|^alpha)`, via the Chambers–Mallows–Stuck construction.
///
/// At `alpha = 2` this is Normal(0, 2 scale²); at `alpha = 1` it is Cauchy(scale).
pub fn sample_alpha_stable<R: Rng + ?Sized>(alpha: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::invalid(
            "tail index",
            format!("{alpha} not in (0, 2]"),
        ));
    }
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::invalid("scale", format!("{scale} must be >= 0")));
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(scale * standard_stable(alpha, rng))
}

fn standard_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    let v = PI * (u - 0.5);
    if alpha == 1.0 {
        return v.tan();
    }
    let e: f64 = rng.sample(Open01);
    let w = -e.ln();
    let cos_v = v.cos();
    (alpha * v).sin() / cos_v.powf(1.0 / alpha)
        * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Per-round interference vector `xi_t`: `dimension` i.i.d. α-stable entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterferenceModel {
    tail_index: f64,
    scale: f64,
    dimension: usize,
}

impl InterferenceModel {
    pub fn new(tail_index: f64, scale: f64, dimension: usize) -> Result<Self> {
        if !(tail_index > 1.0 && tail_index <= 2.0) {
            return Err(Error::invalid(
                "tail index",
                format!("{tail_index} not in (1, 2]"),
            ));
        }
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::invalid(
                "interference scale",
                format!("{scale} must be >= 0"),
            ));
        }
        if dimension == 0 {
            return Err(Error::invalid("dimension", "must be positive"));
        }
        Ok(Self {
            tail_index,
            scale,
            dimension,
        })
    }

    pub fn tail_index(&self) -> f64 {
        self.tail_index
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
}

pub fn sample_interference<R: Rng + ?Sized>(
    model: &InterferenceModel,
    rng: &mut R,
) -> Result<ParamVector> {
    if model.scale == 0.0 {
        return Ok(ParamVector::zeros(model.dimension));
    }
    ParamVector::from_fn(model.dimension, |_| {
        model.scale * standard_stable(model.tail_index, rng)
    })
}

/// The server-side output of the matched-filter bank:
/// `g = (1/N) sum_n h_n grad_n + xi`.
///
/// Client contributions are summed in slice order, so the result does not
/// depend on how the gradients were produced.
pub fn ota_aggregate(
    local_grads: &[ParamVector],
    fadings: &[f64],
    noise: &ParamVector,
) -> Result<ParamVector> {
    let n = local_grads.len();
    if n == 0 {
        return Err(Error::Empty("client gradients"));
    }
    if fadings.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: fadings.len(),
        });
    }
    let d = noise.dim();
    // Running mean: exact when every client sends the same vector.
    let mut mean = vec![0.0; d];
    for (k, (grad, &h)) in local_grads.iter().zip(fadings).enumerate() {
        if grad.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: grad.dim(),
            });
        }
        let w = 1.0 / (k + 1) as f64;
        for (m, g) in mean.iter_mut().zip(grad) {
            *m += (h * g - *m) * w;
        }
    }
    ParamVector::new(mean.into_iter().zip(noise).map(|(m, xi)| m + xi).collect())
}

/// Two-sided tail `P(|X| > x)` of the standard symmetric α-stable law from
/// the first `terms` terms of its large-`x` series.
pub fn stable_tail_series(alpha: f64, x: f64, terms: usize) -> f64 {
    let mut sum = 0.0;
    let mut factorial = 1.0;
    for k in 1..=terms {
        let kf = k as f64;
        factorial *= kf;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * gamma_fn(alpha * kf) / factorial
            * (kf * alpha * FRAC_PI_2).sin()
            * x.powf(-alpha * kf);
    }
    2.0 * sum / PI
}

/// Lanczos approximation of the Gamma function for positive arguments.
pub(crate) fn gamma_fn(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_fn(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

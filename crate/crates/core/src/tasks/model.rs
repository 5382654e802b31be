use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::ParamVector;
use crate::tasks::dataset::{Dataset, Targets};
use crate::tasks::partition::Partition;

/// Loss families. Each client's empirical loss is the mean per-sample loss
/// over its index list.
///
/// Parameter layouts:
/// * `SoftmaxLinear`: class-major `W[k * p + j]`.
/// * `SmallMlp`: `W1 (h x p)`, `b1 (h)`, `W2 (K x h)`, `b2 (K)`, tanh hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossModel {
    /// `0.5 ||w - x||^2` with the sample row `x` as the center.
    Quadratic { dim: usize },
    /// `0.5 (<w, x> - y)^2`.
    LeastSquares { dim: usize },
    /// Binary cross-entropy on labels {0, 1}.
    LogisticRegression { dim: usize },
    /// Multinomial logistic regression.
    SoftmaxLinear {
        num_features: usize,
        num_classes: usize,
    },
    SmallMlp {
        num_features: usize,
        hidden: usize,
        num_classes: usize,
    },
}

impl LossModel {
    pub fn dim(&self) -> usize {
        match *self {
            LossModel::Quadratic { dim }
            | LossModel::LeastSquares { dim }
            | LossModel::LogisticRegression { dim } => dim,
            LossModel::SoftmaxLinear {
                num_features,
                num_classes,
            } => num_features * num_classes,
            LossModel::SmallMlp {
                num_features,
                hidden,
                num_classes,
            } => hidden * (num_features + 1) + num_classes * (hidden + 1),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossModel::Quadratic { .. } => "quadratic",
            LossModel::LeastSquares { .. } => "least_squares",
            LossModel::LogisticRegression { .. } => "logistic_regression",
            LossModel::SoftmaxLinear { .. } => "softmax_linear",
            LossModel::SmallMlp { .. } => "small_mlp",
        }
    }

    pub fn is_classifier(&self) -> bool {
        matches!(
            self,
            LossModel::LogisticRegression { .. }
                | LossModel::SoftmaxLinear { .. }
                | LossModel::SmallMlp { .. }
        )
    }

    /// Smoothness constant under the α-norm when it is known analytically.
    pub fn smoothness(&self) -> Option<f64> {
        match self {
            // The Hessian is the identity.
            LossModel::Quadratic { .. } => Some(1.0),
            _ => None,
        }
    }

    /// Checks that the dataset's shape and targets fit this model.
    pub fn check_dataset(&self, dataset: &Dataset) -> Result<()> {
        let p = dataset.num_features();
        let (want_p, targets_ok) = match *self {
            LossModel::Quadratic { dim } => (dim, true),
            LossModel::LeastSquares { dim } => (dim, matches!(dataset.targets(), Targets::Real(_))),
            LossModel::LogisticRegression { dim } => (dim, dataset.num_classes() == Some(2)),
            LossModel::SoftmaxLinear {
                num_features,
                num_classes,
            }
            | LossModel::SmallMlp {
                num_features,
                num_classes,
                ..
            } => (num_features, dataset.num_classes() == Some(num_classes)),
        };
        if p != want_p {
            return Err(Error::DimensionMismatch {
                expected: want_p,
                found: p,
            });
        }
        if !targets_ok {
            return Err(Error::invalid(
                "dataset",
                format!("targets do not match model {}", self.name()),
            ));
        }
        if self.dim() == 0 {
            return Err(Error::invalid("model", "zero parameters"));
        }
        Ok(())
    }

    /// Mean loss and (optionally) its gradient over `indices`.
    fn evaluate(
        &self,
        w: &ParamVector,
        dataset: &Dataset,
        indices: &[usize],
        grad: Option<&mut [f64]>,
    ) -> Result<f64> {
        if indices.is_empty() {
            return Err(Error::Empty("client index list"));
        }
        if w.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: w.dim(),
            });
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= dataset.len()) {
            return Err(Error::invalid("index", format!("{bad} out of range")));
        }
        let w = w.as_slice();
        let mut scratch = Scratch::new(self);
        let mut loss = 0.0;
        match grad {
            Some(g) => {
                g.iter_mut().for_each(|x| *x = 0.0);
                for &i in indices {
                    loss += self.sample(w, dataset, i, Some(&mut *g), &mut scratch);
                }
                let inv = 1.0 / indices.len() as f64;
                g.iter_mut().for_each(|x| *x *= inv);
            }
            None => {
                for &i in indices {
                    loss += self.sample(w, dataset, i, None, &mut scratch);
                }
            }
        }
        Ok(loss / indices.len() as f64)
    }

    /// Loss of sample `i`; adds its gradient into `grad` when given.
    fn sample(
        &self,
        w: &[f64],
        dataset: &Dataset,
        i: usize,
        grad: Option<&mut [f64]>,
        scratch: &mut Scratch,
    ) -> f64 {
        let x = dataset.row(i);
        match *self {
            LossModel::Quadratic { .. } => {
                let mut loss = 0.0;
                match grad {
                    Some(g) => {
                        for ((gj, wj), xj) in g.iter_mut().zip(w).zip(x) {
                            let r = wj - xj;
                            loss += r * r;
                            *gj += r;
                        }
                    }
                    None => {
                        loss = w.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                    }
                }
                0.5 * loss
            }
            LossModel::LeastSquares { .. } => {
                let r = dot(w, x) - dataset.real_target(i);
                if let Some(g) = grad {
                    axpy(g, r, x);
                }
                0.5 * r * r
            }
            LossModel::LogisticRegression { .. } => {
                let y = dataset.labels().map_or(0.0, |l| l[i] as f64);
                let z = dot(w, x);
                if let Some(g) = grad {
                    axpy(g, sigmoid(z) - y, x);
                }
                softplus(z) - y * z
            }
            LossModel::SoftmaxLinear {
                num_features: p,
                num_classes,
            } => {
                let y = dataset.labels().map_or(0, |l| l[i]);
                let logits = &mut scratch.out;
                for (k, z) in logits.iter_mut().enumerate() {
                    *z = dot(&w[k * p..(k + 1) * p], x);
                }
                let loss = cross_entropy_in_place(logits, y);
                if let Some(g) = grad {
                    let probs = &scratch.out;
                    for k in 0..num_classes {
                        let coef = probs[k] - if k == y { 1.0 } else { 0.0 };
                        axpy(&mut g[k * p..(k + 1) * p], coef, x);
                    }
                }
                loss
            }
            LossModel::SmallMlp {
                num_features: p,
                hidden: h,
                num_classes: kc,
            } => {
                let y = dataset.labels().map_or(0, |l| l[i]);
                let (w1, rest) = w.split_at(h * p);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(kc * h);
                let a = &mut scratch.hidden;
                for j in 0..h {
                    a[j] = (dot(&w1[j * p..(j + 1) * p], x) + b1[j]).tanh();
                }
                let z = &mut scratch.out;
                for k in 0..kc {
                    z[k] = dot(&w2[k * h..(k + 1) * h], a) + b2[k];
                }
                let loss = cross_entropy_in_place(z, y);
                if let Some(g) = grad {
                    let probs = &scratch.out;
                    let a = &scratch.hidden;
                    let (g1, rest) = g.split_at_mut(h * p);
                    let (gb1, rest) = rest.split_at_mut(h);
                    let (g2, gb2) = rest.split_at_mut(kc * h);
                    let back = &mut scratch.back;
                    back.iter_mut().for_each(|b| *b = 0.0);
                    for k in 0..kc {
                        let d2 = probs[k] - if k == y { 1.0 } else { 0.0 };
                        gb2[k] += d2;
                        axpy(&mut g2[k * h..(k + 1) * h], d2, a);
                        axpy(back, d2, &w2[k * h..(k + 1) * h]);
                    }
                    for j in 0..h {
                        let d1 = back[j] * (1.0 - a[j] * a[j]);
                        gb1[j] += d1;
                        axpy(&mut g1[j * p..(j + 1) * p], d1, x);
                    }
                }
                loss
            }
        }
    }
}

struct Scratch {
    out: Vec<f64>,
    hidden: Vec<f64>,
    back: Vec<f64>,
}

impl Scratch {
    fn new(model: &LossModel) -> Self {
        let (k, h) = match *model {
            LossModel::SoftmaxLinear { num_classes, .. } => (num_classes, 0),
            LossModel::SmallMlp {
                hidden,
                num_classes,
                ..
            } => (num_classes, hidden),
            _ => (0, 0),
        };
        Self {
            out: vec![0.0; k],
            hidden: vec![0.0; h],
            back: vec![0.0; h],
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Replaces logits with softmax probabilities; returns `logsumexp(z) - z_y`.
fn cross_entropy_in_place(z: &mut [f64], y: usize) -> f64 {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let zy = z[y];
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
    max + sum.ln() - zy
}

/// Full-batch gradient of the client loss `f_n` at `w` over `indices`.
pub fn local_gradient(
    model: &LossModel,
    w: &ParamVector,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<ParamVector> {
    let mut g = vec![0.0; model.dim()];
    model.evaluate(w, dataset, indices, Some(&mut g))?;
    ParamVector::new(g)
}

/// Loss and gradient from a single pass over the samples.
pub fn local_loss_and_gradient(
    model: &LossModel,
    w: &ParamVector,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<(f64, ParamVector)> {
    let mut g = vec![0.0; model.dim()];
    let loss = model.evaluate(w, dataset, indices, Some(&mut g))?;
    Ok((loss, ParamVector::new(g)?))
}

pub fn local_loss(
    model: &LossModel,
    w: &ParamVector,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<f64> {
    model.evaluate(w, dataset, indices, None)
}

/// Client-side update. With `local_steps == 1` this is exactly
/// `local_gradient` at `w`; larger values run `local_steps - 1` extra local
/// gradient steps and return the averaged pseudo-gradient
/// `(w - w_local) / (local_lr * local_steps)`.
pub fn client_update(
    model: &LossModel,
    w: &ParamVector,
    dataset: &Dataset,
    indices: &[usize],
    local_steps: usize,
    local_lr: f64,
) -> Result<ParamVector> {
    let first = local_gradient(model, w, dataset, indices)?;
    if local_steps <= 1 {
        return Ok(first);
    }
    let mut local = w.zip_map(&first, |a, g| a - local_lr * g)?;
    for _ in 1..local_steps {
        let g = local_gradient(model, &local, dataset, indices)?;
        local = local.zip_map(&g, |a, gi| a - local_lr * gi)?;
    }
    let scale = 1.0 / (local_lr * local_steps as f64);
    w.zip_map(&local, |a, b| (a - b) * scale)
}

/// `f(w) = (1/N) sum_n f_n(w)`: clients weigh equally regardless of size.
pub fn global_loss(
    model: &LossModel,
    w: &ParamVector,
    dataset: &Dataset,
    partition: &Partition,
) -> Result<f64> {
    let mut mean = 0.0;
    for (k, idx) in partition.clients().iter().enumerate() {
        mean += (local_loss(model, w, dataset, idx)? - mean) / (k + 1) as f64;
    }
    Ok(mean)
}

pub fn global_gradient(
    model: &LossModel,
    w: &ParamVector,
    dataset: &Dataset,
    partition: &Partition,
) -> Result<ParamVector> {
    let grads = partition
        .clients()
        .iter()
        .map(|idx| local_gradient(model, w, dataset, idx))
        .collect::<Result<Vec<_>>>()?;
    mean_of(&grads)
}

/// Coordinate-wise running mean in slice order; exact for identical inputs.
pub fn mean_of(vectors: &[ParamVector]) -> Result<ParamVector> {
    let first = vectors.first().ok_or(Error::Empty("vector list"))?;
    let mut mean = vec![0.0; first.dim()];
    for (k, v) in vectors.iter().enumerate() {
        if v.dim() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                found: v.dim(),
            });
        }
        let w = 1.0 / (k + 1) as f64;
        for (m, x) in mean.iter_mut().zip(v) {
            *m += (x - *m) * w;
        }
    }
    ParamVector::new(mean)
}

/// Upper bound `C` on `||grad f_n(w)||_inf` over all clients and all `w`
/// (all `w` in the box `[-R, R]^d` for the regression-type models).
///
/// For the cross-entropy models every per-coordinate derivative is a
/// residual in `[-1, 1]` times a feature, so `C = max |x_ij|`.
pub fn grad_bound_c(
    model: &LossModel,
    dataset: &Dataset,
    domain_radius: Option<f64>,
) -> Result<f64> {
    if dataset.is_empty() {
        return Ok(0.0);
    }
    let max_x = dataset.max_abs_feature();
    match model {
        LossModel::LogisticRegression { .. } | LossModel::SoftmaxLinear { .. } => Ok(max_x),
        LossModel::Quadratic { .. } => {
            let r = require_radius(model, domain_radius)?;
            Ok(r + max_x)
        }
        LossModel::LeastSquares { .. } => {
            let r = require_radius(model, domain_radius)?;
            let mut worst: f64 = 0.0;
            for i in 0..dataset.len() {
                let x = dataset.row(i);
                let l1: f64 = x.iter().map(|v| v.abs()).sum();
                let linf = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                worst = worst.max((r * l1 + dataset.real_target(i).abs()) * linf);
            }
            Ok(worst)
        }
        LossModel::SmallMlp { .. } => Err(Error::UnboundedGradient(
            "small_mlp (output weights are unconstrained)".into(),
        )),
    }
}

fn require_radius(model: &LossModel, radius: Option<f64>) -> Result<f64> {
    match radius {
        Some(r) if r.is_finite() && r >= 0.0 => Ok(r),
        _ => Err(Error::UnboundedGradient(format!(
            "{} without a domain radius",
            model.name()
        ))),
    }
}

/// Predicted class of sample `i`, or `None` for non-classifiers.
pub fn predict(model: &LossModel, w: &ParamVector, dataset: &Dataset, i: usize) -> Option<usize> {
    let x = dataset.row(i);
    let w = w.as_slice();
    let argmax = |z: &[f64]| {
        z.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (k, &v)| {
                if v > bv {
                    (k, v)
                } else {
                    (bi, bv)
                }
            })
            .0
    };
    match *model {
        LossModel::LogisticRegression { .. } => Some(usize::from(dot(w, x) > 0.0)),
        LossModel::SoftmaxLinear {
            num_features: p,
            num_classes,
        } => {
            let z: Vec<f64> = (0..num_classes)
                .map(|k| dot(&w[k * p..(k + 1) * p], x))
                .collect();
            Some(argmax(&z))
        }
        LossModel::SmallMlp {
            num_features: p,
            hidden: h,
            num_classes: kc,
        } => {
            let (w1, rest) = w.split_at(h * p);
            let (b1, rest) = rest.split_at(h);
            let (w2, b2) = rest.split_at(kc * h);
            let a: Vec<f64> = (0..h)
                .map(|j| (dot(&w1[j * p..(j + 1) * p], x) + b1[j]).tanh())
                .collect();
            let z: Vec<f64> = (0..kc)
                .map(|k| dot(&w2[k * h..(k + 1) * h], &a) + b2[k])
                .collect();
            Some(argmax(&z))
        }
        _ => None,
    }
}

/// Fraction of correctly classified samples; `None` for non-classifiers or
/// an empty dataset.
pub fn accuracy(model: &LossModel, w: &ParamVector, dataset: &Dataset) -> Option<f64> {
    let labels = dataset.labels()?;
    if !model.is_classifier() || dataset.is_empty() {
        return None;
    }
    let correct = (0..dataset.len())
        .filter(|&i| predict(model, w, dataset, i) == Some(labels[i]))
        .count();
    Some(correct as f64 / dataset.len() as f64)
}

/// Minimizer and minimum of the quadratic global objective: the mean of the
/// per-client center means.
pub fn quadratic_optimum(
    model: &LossModel,
    dataset: &Dataset,
    partition: &Partition,
) -> Result<(ParamVector, f64)> {
    let LossModel::Quadratic { dim } = *model else {
        return Err(Error::invalid(
            "model",
            "optimum is only closed-form for quadratic",
        ));
    };
    let mut center = vec![0.0; dim];
    for idx in partition.clients() {
        let inv = 1.0 / idx.len() as f64;
        for &i in idx {
            for (c, x) in center.iter_mut().zip(dataset.row(i)) {
                *c += x * inv;
            }
        }
    }
    let n = partition.num_clients() as f64;
    let w_star = ParamVector::new(center.into_iter().map(|c| c / n).collect())?;
    let f_star = global_loss(model, &w_star, dataset, partition)?;
    Ok((w_star, f_star))
}

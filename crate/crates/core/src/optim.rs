//! Server-side optimizers: AdaGrad-OTA, Adam-OTA, and the FedAvgM baseline.
//!
//! All three share the momentum buffer `delta_t = beta1 delta_{t-1} + (1 - beta1) g_t`.
//! The adaptive variants then accumulate `|delta_t|^alpha` into `v_t` and step
//! by `eta * delta_t / (v_t + epsilon)^(1/alpha)` entrywise. FedAvgM steps by
//! `eta * delta_t` with no accumulator; this is the usual server-momentum
//! construction, since the baseline's equations are not restated alongside
//! the adaptive rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::{abs_power, ensure_same_dim, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(rename = "adagrad_ota")]
    AdaGradOta,
    #[serde(rename = "adam_ota")]
    AdamOta,
    #[serde(rename = "fedavgm")]
    FedAvgM,
}

impl OptimizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::AdaGradOta => "adagrad_ota",
            OptimizerKind::AdamOta => "adam_ota",
            OptimizerKind::FedAvgM => "fedavgm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerHyperParams {
    pub eta: f64,
    pub beta1: f64,
    /// Only read by Adam-OTA.
    pub beta2: f64,
    pub epsilon: f64,
    /// Exponent of the accumulator and of the root in the update.
    pub alpha_exp: f64,
}

impl ServerHyperParams {
    pub fn validate(&self, kind: OptimizerKind) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::invalid("eta", format!("{} must be > 0", self.eta)));
        }
        check_beta1(self.beta1)?;
        if kind == OptimizerKind::AdamOta {
            check_beta2(self.beta2)?;
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::invalid(
                "epsilon",
                format!("{} must be > 0", self.epsilon),
            ));
        }
        if kind != OptimizerKind::FedAvgM && !(self.alpha_exp > 1.0 && self.alpha_exp <= 2.0) {
            return Err(Error::invalid(
                "alpha_exp",
                format!("{} not in (1, 2]", self.alpha_exp),
            ));
        }
        Ok(())
    }
}

fn check_beta1(beta1: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta1) {
        return Err(Error::invalid("beta1", format!("{beta1} not in [0, 1)")));
    }
    Ok(())
}

fn check_beta2(beta2: f64) -> Result<()> {
    if !(beta2 > 0.0 && beta2 < 1.0) {
        return Err(Error::invalid("beta2", format!("{beta2} not in (0, 1)")));
    }
    Ok(())
}

fn check_nonnegative(v: &ParamVector) -> Result<()> {
    match v.iter().position(|&x| x < 0.0) {
        Some(i) => Err(Error::invalid(
            "accumulator",
            format!("entry {i} is negative ({})", v[i]),
        )),
        None => Ok(()),
    }
}

pub fn momentum_update(
    delta_prev: &ParamVector,
    g: &ParamVector,
    beta1: f64,
) -> Result<ParamVector> {
    check_beta1(beta1)?;
    if beta1 == 0.0 {
        ensure_same_dim(delta_prev, g)?;
        return Ok(g.clone());
    }
    delta_prev.zip_map(g, |d, gi| beta1 * d + (1.0 - beta1) * gi)
}

pub fn accumulate_adagrad(
    v_prev: &ParamVector,
    delta: &ParamVector,
    alpha: f64,
) -> Result<ParamVector> {
    check_nonnegative(v_prev)?;
    let inc = abs_power(delta, alpha)?;
    v_prev.zip_map(&inc, |v, a| v + a)
}

pub fn accumulate_adam(
    v_prev: &ParamVector,
    delta: &ParamVector,
    alpha: f64,
    beta2: f64,
) -> Result<ParamVector> {
    check_beta2(beta2)?;
    check_nonnegative(v_prev)?;
    let inc = abs_power(delta, alpha)?;
    v_prev.zip_map(&inc, |v, a| beta2 * v + (1.0 - beta2) * a)
}

/// `w - eta * delta / (v + epsilon)^(1/alpha)`, entrywise.
///
/// A non-finite coordinate in the result is reported as [`Error::NonFinite`].
pub fn apply_update(
    w: &ParamVector,
    delta: &ParamVector,
    v: &ParamVector,
    eta: f64,
    epsilon: f64,
    alpha: f64,
) -> Result<ParamVector> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::invalid("epsilon", format!("{epsilon} must be > 0")));
    }
    check_nonnegative(v)?;
    ensure_same_dim(w, v)?;
    let inv_alpha = 1.0 / alpha;
    let step = delta.zip_map(v, |d, vi| eta * d / (vi + epsilon).powf(inv_alpha))?;
    w.zip_map(&step, |wi, s| wi - s)
}

/// Optimizer state owned by the server for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServerState {
    pub kind: OptimizerKind,
    /// Current global model `w_t`.
    pub w: ParamVector,
    /// Momentum buffer `delta_{t-1}`.
    pub delta: ParamVector,
    /// Accumulator `v_{t-1}`; stays zero for FedAvgM.
    pub v: ParamVector,
    /// Number of completed server steps.
    pub round: usize,
}

impl ServerState {
    pub fn new(kind: OptimizerKind, w0: ParamVector, v_init: ParamVector) -> Result<Self> {
        ensure_same_dim(&w0, &v_init)?;
        check_nonnegative(&v_init)?;
        let d = w0.dim();
        let v = match kind {
            OptimizerKind::FedAvgM => ParamVector::zeros(d),
            _ => v_init,
        };
        Ok(Self {
            kind,
            w: w0,
            delta: ParamVector::zeros(d),
            v,
            round: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.w.dim()
    }

    /// Per-coordinate step size `eta / (v + epsilon)^(1/alpha)` implied by the
    /// current accumulator (the constant `eta` for FedAvgM).
    pub fn effective_steps(&self, hp: &ServerHyperParams) -> Vec<f64> {
        match self.kind {
            OptimizerKind::FedAvgM => vec![hp.eta; self.dim()],
            _ => self
                .v
                .iter()
                .map(|vi| hp.eta / (vi + hp.epsilon).powf(1.0 / hp.alpha_exp))
                .collect(),
        }
    }
}

/// One server round: momentum, accumulator (per kind), model update.
pub fn server_step(
    state: &ServerState,
    hp: &ServerHyperParams,
    g: &ParamVector,
) -> Result<ServerState> {
    ensure_same_dim(&state.w, g)?;
    let delta = momentum_update(&state.delta, g, hp.beta1)?;
    let (v, w) = match state.kind {
        OptimizerKind::AdaGradOta => {
            let v = accumulate_adagrad(&state.v, &delta, hp.alpha_exp)?;
            let w = apply_update(&state.w, &delta, &v, hp.eta, hp.epsilon, hp.alpha_exp)?;
            (v, w)
        }
        OptimizerKind::AdamOta => {
            let v = accumulate_adam(&state.v, &delta, hp.alpha_exp, hp.beta2)?;
            let w = apply_update(&state.w, &delta, &v, hp.eta, hp.epsilon, hp.alpha_exp)?;
            (v, w)
        }
        OptimizerKind::FedAvgM => {
            let w = state.w.zip_map(&delta, |wi, d| wi - hp.eta * d)?;
            (state.v.clone(), w)
        }
    };
    Ok(ServerState {
        kind: state.kind,
        w,
        delta,
        v,
        round: state.round + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    fn hp(eta: f64, beta1: f64, beta2: f64, epsilon: f64, alpha: f64) -> ServerHyperParams {
        ServerHyperParams {
            eta,
            beta1,
            beta2,
            epsilon,
            alpha_exp: alpha,
        }
    }

    #[test]
    fn momentum_examples() {
        let g = pv(&[3.0, 5.0]);
        assert_eq!(momentum_update(&pv(&[9.0, 9.0]), &g, 0.0).unwrap(), g);
        assert!(momentum_update(&pv(&[1.0, 1.0]), &g, 1.0).is_err());
        assert_eq!(
            momentum_update(&pv(&[1.0, 1.0]), &g, 0.5)
                .unwrap()
                .as_slice(),
            &[2.0, 3.0]
        );
        assert!(momentum_update(&pv(&[1.0]), &g, 0.5).is_err());
    }

    #[test]
    fn adagrad_accumulator_examples() {
        let v = accumulate_adagrad(&ParamVector::zeros(2), &pv(&[2.0, -3.0]), 2.0).unwrap();
        assert_eq!(v.as_slice(), &[4.0, 9.0]);
        let v0 = pv(&[0.5, 2.0]);
        assert_eq!(
            accumulate_adagrad(&v0, &ParamVector::zeros(2), 1.5).unwrap(),
            v0
        );
        let v = accumulate_adagrad(&pv(&[1.0, 1.0]), &pv(&[-1.5, 0.5]), 1.5).unwrap();
        let oracle = [
            1.0 + (1.5 * 1.5f64.ln()).exp(),
            1.0 + (1.5 * 0.5f64.ln()).exp(),
        ];
        for (a, b) in v.iter().zip(oracle) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(accumulate_adagrad(&pv(&[-1.0]), &pv(&[1.0]), 2.0).is_err());
    }

    #[test]
    fn adam_accumulator_examples() {
        let v = accumulate_adam(&pv(&[4.0]), &pv(&[2.0]), 2.0, 0.5).unwrap();
        assert_eq!(v.as_slice(), &[4.0]);
        let v = accumulate_adam(&pv(&[10.0]), &pv(&[0.0]), 1.5, 0.9).unwrap();
        assert!((v[0] - 9.0).abs() < 1e-12);
        assert!(accumulate_adam(&pv(&[1.0]), &pv(&[1.0]), 2.0, 1.0).is_err());
        assert!(accumulate_adam(&pv(&[1.0]), &pv(&[1.0]), 2.0, 0.0).is_err());
    }

    #[test]
    fn adam_accumulator_matches_ema_oracle() {
        let v_prev = [0.3, 2.5, 0.0, 7.25];
        let delta = [-1.2, 0.4, 3.3, -0.05];
        let (alpha, beta2) = (1.7, 0.37);
        let v = accumulate_adam(&pv(&v_prev), &pv(&delta), alpha, beta2).unwrap();
        for i in 0..4 {
            let oracle = beta2 * v_prev[i] + (1.0 - beta2) * (alpha * delta[i].abs().ln()).exp();
            assert!((v[i] - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_update_examples() {
        let w = apply_update(&pv(&[0.0]), &pv(&[1.0]), &pv(&[0.0]), 0.1, 1.0, 2.0).unwrap();
        assert!((w[0] + 0.1).abs() < 1e-15);
        let w0 = pv(&[1.0, -2.0]);
        assert_eq!(
            apply_update(&w0, &ParamVector::zeros(2), &pv(&[1.0, 1.0]), 0.3, 0.1, 1.5).unwrap(),
            w0
        );
        let w = apply_update(&pv(&[1.0]), &pv(&[-3.0]), &pv(&[2.0]), 0.5, 0.01, 1.5).unwrap();
        let oracle = 1.0 + 0.5 * 3.0 / (2.01f64.ln() * 2.0 / 3.0).exp();
        assert!((w[0] - oracle).abs() < 1e-14);
    }

    #[test]
    fn apply_update_reports_divergence() {
        let r = apply_update(&pv(&[0.0]), &pv(&[1e308]), &pv(&[0.0]), 1e10, 1e-300, 2.0);
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn first_adagrad_step_unrolled() {
        let g = pv(&[0.8, -2.0, 0.0]);
        let p = hp(0.1, 0.0, 0.9, 1e-3, 1.5);
        let s0 = ServerState::new(
            OptimizerKind::AdaGradOta,
            ParamVector::zeros(3),
            ParamVector::zeros(3),
        )
        .unwrap();
        let s1 = server_step(&s0, &p, &g).unwrap();
        for i in 0..3 {
            let expected = -0.1 * g[i] / (g[i].abs().powf(1.5) + 1e-3).powf(1.0 / 1.5);
            assert!((s1.w[i] - expected).abs() < 1e-15);
        }
        assert_eq!(s1.round, 1);
    }

    #[test]
    fn fedavgm_without_momentum_is_gradient_descent() {
        let g = pv(&[0.5, -1.0]);
        let w0 = pv(&[1.0, 1.0]);
        let s0 = ServerState::new(OptimizerKind::FedAvgM, w0, ParamVector::zeros(2)).unwrap();
        let s1 = server_step(&s0, &hp(0.2, 0.0, 0.5, 1.0, 1.5), &g).unwrap();
        assert_eq!(s1.w.as_slice(), &[1.0 - 0.2 * 0.5, 1.0 + 0.2 * 1.0]);
        assert_eq!(s1.v, ParamVector::zeros(2));
    }

    #[test]
    fn three_adagrad_steps_on_quadratic_match_hand_unrolled_recursion() {
        // f(w) = 0.5 (a1 w1^2 + a2 w2^2), gradient (a1 w1, a2 w2).
        let (a1, a2) = (1.0, 4.0);
        let (eta, beta1, eps, alpha) = (0.3, 0.5, 0.01, 1.5);
        let p = hp(eta, beta1, 0.9, eps, alpha);
        let mut s = ServerState::new(
            OptimizerKind::AdaGradOta,
            pv(&[1.0, -0.5]),
            ParamVector::zeros(2),
        )
        .unwrap();
        for _ in 0..3 {
            let g = pv(&[a1 * s.w[0], a2 * s.w[1]]);
            s = server_step(&s, &p, &g).unwrap();
        }

        // Coordinate 1, written out.
        let w0 = 1.0f64;
        let d0 = 0.5 * (a1 * w0);
        let v0 = d0.abs().powf(alpha);
        let w1 = w0 - eta * d0 / (v0 + eps).powf(1.0 / alpha);
        let d1 = 0.5 * d0 + 0.5 * (a1 * w1);
        let v1 = v0 + d1.abs().powf(alpha);
        let w2 = w1 - eta * d1 / (v1 + eps).powf(1.0 / alpha);
        let d2 = 0.5 * d1 + 0.5 * (a1 * w2);
        let v2 = v1 + d2.abs().powf(alpha);
        let w3 = w2 - eta * d2 / (v2 + eps).powf(1.0 / alpha);
        assert!((s.w[0] - w3).abs() < 1e-10);

        // Coordinate 2.
        let u0 = -0.5f64;
        let e0 = 0.5 * (a2 * u0);
        let q0 = e0.abs().powf(alpha);
        let u1 = u0 - eta * e0 / (q0 + eps).powf(1.0 / alpha);
        let e1 = 0.5 * e0 + 0.5 * (a2 * u1);
        let q1 = q0 + e1.abs().powf(alpha);
        let u2 = u1 - eta * e1 / (q1 + eps).powf(1.0 / alpha);
        let e2 = 0.5 * e1 + 0.5 * (a2 * u2);
        let q2 = q1 + e2.abs().powf(alpha);
        let u3 = u2 - eta * e2 / (q2 + eps).powf(1.0 / alpha);
        assert!((s.w[1] - u3).abs() < 1e-10);
        assert!((s.v[1] - q2).abs() < 1e-10);
    }

    #[test]
    fn constant_gradient_stream_gives_power_law_steps() {
        let alpha = 1.5;
        let p = hp(0.2, 0.0, 0.9, 1e-12, alpha);
        let g = pv(&[3.0, -0.25]);
        let mut s = ServerState::new(
            OptimizerKind::AdaGradOta,
            ParamVector::zeros(2),
            ParamVector::zeros(2),
        )
        .unwrap();
        for t in 1..=50usize {
            let next = server_step(&s, &p, &g).unwrap();
            let expected = 0.2 * (t as f64).powf(-1.0 / alpha);
            for i in 0..2 {
                let step = s.w[i] - next.w[i];
                assert_eq!(step.signum(), g[i].signum());
                assert!((step.abs() / expected - 1.0).abs() < 1e-6, "t={t}");
            }
            s = next;
        }
    }

    #[test]
    fn hyperparameter_validation() {
        assert!(hp(0.0, 0.0, 0.9, 1.0, 1.5)
            .validate(OptimizerKind::AdaGradOta)
            .is_err());
        assert!(hp(0.1, 1.0, 0.9, 1.0, 1.5)
            .validate(OptimizerKind::AdaGradOta)
            .is_err());
        assert!(hp(0.1, 0.0, 1.0, 1.0, 1.5)
            .validate(OptimizerKind::AdamOta)
            .is_err());
        assert!(hp(0.1, 0.0, 1.0, 1.0, 1.5)
            .validate(OptimizerKind::AdaGradOta)
            .is_ok());
        assert!(hp(0.1, 0.0, 0.9, 0.0, 1.5)
            .validate(OptimizerKind::AdamOta)
            .is_err());
        assert!(hp(0.1, 0.0, 0.9, 1.0, 2.5)
            .validate(OptimizerKind::AdamOta)
            .is_err());
    }

    fn grads_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-20.0f64..20.0, 4), 1..40)
    }

    proptest! {
        #[test]
        fn adagrad_accumulator_and_steps_are_monotone(
            grads in grads_strategy(), alpha in 1.01f64..=2.0, beta1 in 0.0f64..0.95,
        ) {
            let p = hp(0.05, beta1, 0.9, 1e-4, alpha);
            let mut s = ServerState::new(OptimizerKind::AdaGradOta, ParamVector::zeros(4), ParamVector::zeros(4)).unwrap();
            let mut prev_steps = s.effective_steps(&p);
            for g in grads {
                let next = server_step(&s, &p, &pv(&g)).unwrap();
                let steps = next.effective_steps(&p);
                for i in 0..4 {
                    prop_assert!(next.v[i] >= s.v[i]);
                    prop_assert!(next.v[i] >= 0.0);
                    prop_assert!(steps[i] <= prev_steps[i]);
                }
                prev_steps = steps;
                s = next;
            }
        }

        #[test]
        fn adam_accumulator_stays_bounded(
            grads in grads_strategy(), alpha in 1.01f64..=2.0, beta2 in 0.01f64..0.99,
            v0 in 0.0f64..50.0,
        ) {
            let bound = 20.0f64;
            let p = hp(0.05, 0.0, beta2, 1e-4, alpha);
            let mut s = ServerState::new(OptimizerKind::AdamOta, ParamVector::zeros(4), ParamVector::filled(4, v0).unwrap()).unwrap();
            let cap = v0.max(bound.powf(alpha)) * (1.0 + 1e-12);
            for g in grads {
                s = server_step(&s, &p, &pv(&g)).unwrap();
                for i in 0..4 {
                    prop_assert!(s.v[i] >= 0.0 && s.v[i] <= cap);
                }
            }
        }
    }
}

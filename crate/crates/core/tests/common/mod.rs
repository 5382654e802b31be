#![allow(dead_code)]

use std::path::PathBuf;

use adota::analysis::BoundInputs;
use adota::harness::{RunConfig, SweepSpec};
use astro_float::{BigFloat, Consts, RoundingMode};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

pub fn load_run(name: &str) -> RunConfig {
    RunConfig::load(&config_path(name)).unwrap()
}

pub fn load_sweep(name: &str) -> SweepSpec {
    SweepSpec::load(&config_path(name)).unwrap()
}

/// `(1/T) Σ_{t<T} x_t` for every prefix length `T`.
pub fn running_average(xs: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    xs.iter()
        .enumerate()
        .map(|(t, x)| {
            sum += x;
            sum / (t + 1) as f64
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

pub fn relative_error(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

/// Arbitrary-precision transcription of the bound formulas, written
/// independently of the library code.
pub struct Oracle {
    p: usize,
    rm: RoundingMode,
    cc: Consts,
}

/// The oracle's values, in the same term split as the library.
#[derive(Debug, Clone, Copy)]
pub struct OracleBounds {
    pub upsilon: f64,
    pub adagrad_initial_gap: f64,
    pub adagrad_accumulation: f64,
    pub adagrad: f64,
    pub adam_initial_gap: f64,
    pub adam_transient: f64,
    pub adam_floor: f64,
    pub adam: f64,
}

impl Oracle {
    pub fn new() -> Self {
        Self {
            p: 320,
            rm: RoundingMode::ToEven,
            cc: Consts::new().unwrap(),
        }
    }

    fn num(&self, x: f64) -> BigFloat {
        BigFloat::from_f64(x, self.p)
    }

    fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, self.p, self.rm)
    }

    fn sub(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, self.p, self.rm)
    }

    fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, self.p, self.rm)
    }

    fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, self.p, self.rm)
    }

    /// `a^b` as `exp(b ln a)`. The library's own `pow` does not terminate
    /// when the result is exactly representable (e.g. 1.5^2).
    fn pow(&mut self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        let one = self.num(1.0);
        if b.is_zero() || a == &one {
            return one;
        }
        let ln_a = self.ln(a);
        let arg = self.mul(b, &ln_a);
        arg.exp(self.p, self.rm, &mut self.cc)
    }

    fn ln(&mut self, a: &BigFloat) -> BigFloat {
        a.ln(self.p, self.rm, &mut self.cc)
    }

    fn to_f64(x: &BigFloat) -> f64 {
        x.to_string().parse().unwrap()
    }

    pub fn upsilon(&mut self, q: &BoundInputs) -> f64 {
        Self::to_f64(&self.upsilon_big(q))
    }

    fn upsilon_big(&mut self, q: &BoundInputs) -> BigFloat {
        let one = self.num(1.0);
        let two = self.num(2.0);
        let alpha = self.num(q.alpha);
        let half_alpha = self.div(&alpha, &two);
        let d = self.num(q.d as f64);
        let n = self.num(q.n_clients as f64);
        let mu = self.num(q.mu_c);
        let sigma = self.num(q.sigma_c);
        let energy = self.add(&self.mul(&mu, &mu), &self.mul(&sigma, &sigma));
        let d_part = self.pow(&d, &self.sub(&one, &half_alpha));
        let energy_part = self.pow(&energy, &half_alpha);
        let c_part = self.pow(&self.num(q.grad_bound), &alpha);
        let n_part = self.pow(&n, &half_alpha);
        let fading = self.div(
            &self.mul(&self.mul(&d_part, &energy_part), &c_part),
            &n_part,
        );
        let g4 = self.mul(&self.num(4.0), &self.num(q.interference_moment));
        self.add(&g4, &fading)
    }

    /// Both bounds. The caller guarantees the denominators are positive.
    pub fn bounds(&mut self, q: &BoundInputs) -> OracleBounds {
        let one = self.num(1.0);
        let two = self.num(2.0);
        let alpha = self.num(q.alpha);
        let gamma = self.div(&alpha, &self.sub(&alpha, &one));
        let ups = self.upsilon_big(q);
        let inv_alpha = self.div(&one, &alpha);
        let inv_gamma = self.div(&one, &gamma);
        let ups_root = self.pow(&ups, &inv_alpha);
        let t = self.num(q.rounds as f64);
        let eta = self.num(q.eta);
        let l = self.num(q.smoothness);
        let d = self.num(q.d as f64);
        let eps = self.num(q.epsilon);
        let f0 = self.num(q.f0_minus_fstar);
        let eps_root = self.pow(&eps, &inv_alpha);

        // AdaGrad-OTA.
        let mu1 = self.sub(&self.num(q.mu_c), &one);
        let t_root = self.pow(&t, &inv_gamma);
        let ada_gap = self.div(
            &self.mul(&f0, &ups_root),
            &self.mul(&self.mul(&eta, &mu1), &t_root),
        );
        let e1 = self.pow(&eta, &self.div(&alpha, &gamma));
        let e2 = self.pow(&eta, &self.div(&gamma, &alpha));
        let bracket = {
            let a = self.div(&self.mul(&e1, &l), &alpha);
            let b = self.div(&self.mul(&e2, &l), &gamma);
            let c = self.div(&one, &eps_root);
            self.add(&self.add(&self.add(&a, &b), &ups_root), &c)
        };
        let log_arg = self.add(&one, &self.div(&self.mul(&ups, &t), &eps));
        let log_term = self.ln(&log_arg);
        let ada_acc = {
            let num = self.mul(&self.mul(&self.mul(&bracket, &d), &ups_root), &log_term);
            let den = self.mul(&self.mul(&two, &mu1), &t_root);
            self.div(&num, &den)
        };

        // Adam-OTA.
        let b2 = self.num(q.beta2.expect("beta2"));
        let omb = self.sub(&one, &b2);
        let den = self.sub(&self.add(&self.num(q.mu_c), &b2), &one);
        let adam_gap = self.div(
            &self.mul(&f0, &ups_root),
            &self.mul(&self.mul(&den, &eta), &t),
        );
        let middle = {
            let omb_g = self.pow(&omb, &inv_gamma);
            let eta_g = self.pow(&eta, &gamma);
            let x = self.mul(&self.mul(&omb_g, &eta_g), &l);
            let y_exp = self.sub(&gamma, &two);
            let omb_y = self.pow(&omb, &y_exp);
            let y = self.mul(&self.mul(&gamma, &omb_y), &ups_root);
            let z_exp = self.sub(&self.add(&gamma, &inv_gamma), &two);
            let omb_z = self.pow(&omb, &z_exp);
            let z = self.mul(&gamma, &omb_z);
            self.div(&self.add(&x, &y), &z)
        };
        let adam_bracket = {
            let a = self.div(&self.mul(&e1, &l), &alpha);
            let c = self.div(&omb, &eps_root);
            self.add(&self.add(&a, &middle), &c)
        };
        let coef = self.div(
            &self.mul(&self.mul(&adam_bracket, &d), &ups_root),
            &self.mul(&two, &den),
        );
        let short_log = self.ln(&self.add(&one, &self.div(&ups, &eps)));
        let transient = self.div(&self.mul(&coef, &short_log), &t);
        let ln_b2 = self.ln(&b2);
        let floor = self.mul(&coef, &ln_b2.neg());

        let ada_total = self.add(&ada_gap, &ada_acc);
        let adam_total = self.add(&self.add(&adam_gap, &transient), &floor);
        OracleBounds {
            upsilon: Self::to_f64(&ups),
            adagrad_initial_gap: Self::to_f64(&ada_gap),
            adagrad_accumulation: Self::to_f64(&ada_acc),
            adagrad: Self::to_f64(&ada_total),
            adam_initial_gap: Self::to_f64(&adam_gap),
            adam_transient: Self::to_f64(&transient),
            adam_floor: Self::to_f64(&floor),
            adam: Self::to_f64(&adam_total),
        }
    }
}

/// Constants used for the bound checks: 100 points from a Cartesian grid over
/// tail index, horizon, and a set of (η, ε, β₂, μ_c) rows.
pub fn bound_grid() -> Vec<BoundInputs> {
    let rows = [
        (0.1, 1e-3, 0.9, 2.0),
        (0.01, 1e-8, 0.99, 1.5),
        (1.0, 1.0, 0.5, 3.0),
        (0.3, 1e-5, 0.999, 1.1),
        (0.05, 0.1, 0.7, 1.05),
    ];
    let mut out = Vec::new();
    for &alpha in &[1.1, 1.5, 1.8, 2.0] {
        for &rounds in &[1u64, 100, 10_000, 1_000_000, 100_000_000] {
            for (i, &(eta, epsilon, beta2, mu_c)) in rows.iter().enumerate() {
                out.push(BoundInputs {
                    f0_minus_fstar: 0.5 + i as f64,
                    smoothness: 0.25 * (i + 1) as f64,
                    grad_bound: 1.0 + 0.5 * i as f64,
                    interference_moment: 0.1 * i as f64,
                    mu_c,
                    sigma_c: 0.2 * i as f64,
                    n_clients: 10 + 20 * i as u64,
                    d: 10u64.pow(i as u32),
                    eta,
                    epsilon,
                    beta2: Some(beta2),
                    rounds,
                    alpha,
                });
            }
        }
    }
    out
}

/// Constants for the bound-order comparison at long horizons.
pub fn reference_bound_inputs(rounds: u64) -> BoundInputs {
    BoundInputs {
        f0_minus_fstar: 2.0,
        smoothness: 1.0,
        grad_bound: 1.0,
        interference_moment: 0.5,
        mu_c: 2.0,
        sigma_c: 0.5,
        n_clients: 50,
        d: 10,
        eta: 0.1,
        epsilon: 1e-3,
        beta2: Some(0.9),
        rounds,
        alpha: 1.5,
    }
}

//! Randomized inequality checks behind the `selftest` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::inequalities::{
    alpha_smoothness_sides, cumulative_ratio_sides, ema_ratio_sides, power_expansion_sides,
    QuadraticForm,
};
use crate::error::Result;
use crate::param::ParamVector;

/// Absolute slack allowed for `lhs - rhs` before an instance counts as a violation.
pub const SLACK: f64 = 1e-9;

pub const EPSILON_GRID: [f64; 9] = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];
pub const PHI_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: &'static str,
    pub instances: usize,
    pub violations: usize,
    /// Largest observed `lhs - rhs`.
    pub worst_gap: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn run_check(
    name: &'static str,
    instances: usize,
    rng: &mut ChaCha8Rng,
    mut instance: impl FnMut(&mut ChaCha8Rng) -> Result<(f64, f64)>,
) -> Result<CheckReport> {
    let mut violations = 0;
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..instances {
        let (lhs, rhs) = instance(rng)?;
        let gap = lhs - rhs;
        worst_gap = worst_gap.max(gap);
        if gap > SLACK || gap.is_nan() {
            violations += 1;
        }
    }
    Ok(CheckReport {
        name,
        instances,
        violations,
        worst_gap,
    })
}

fn sequence(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let len = rng.gen_range(1..=100);
    // Mix exact zeros in so sparse sequences are exercised.
    (0..len)
        .map(|_| {
            if rng.gen_bool(0.1) {
                0.0
            } else {
                rng.gen_range(0.0..=10.0)
            }
        })
        .collect()
}

fn vector(rng: &mut ChaCha8Rng, d: usize) -> ParamVector {
    let scale = 10f64.powf(rng.gen_range(-2.0..=1.0));
    ParamVector::new((0..d).map(|_| scale * rng.gen_range(-1.0..=1.0)).collect())
        .expect("finite by construction")
}

pub fn check_cumulative_ratio(instances: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_check("cumulative_ratio", instances, &mut rng, |r| {
        let seq = sequence(r);
        let eps = EPSILON_GRID[r.gen_range(0..EPSILON_GRID.len())];
        cumulative_ratio_sides(&seq, eps)
    })
}

pub fn check_ema_ratio(instances: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_check("ema_ratio", instances, &mut rng, |r| {
        let seq = sequence(r);
        let phi = PHI_GRID[r.gen_range(0..PHI_GRID.len())];
        let eps = EPSILON_GRID[r.gen_range(0..EPSILON_GRID.len())];
        ema_ratio_sides(&seq, phi, eps)
    })
}

pub fn check_power_expansion(instances: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_check("power_expansion", instances, &mut rng, |r| {
        let d = r.gen_range(1..=16);
        let alpha = r.gen_range(1.0..=2.0);
        let u = vector(r, d);
        let v = vector(r, d);
        power_expansion_sides(&u, &v, alpha)
    })
}

pub fn check_alpha_smoothness(instances: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_check("alpha_smoothness", instances, &mut rng, |r| {
        let d = r.gen_range(1..=8);
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let x = r.gen_range(-2.0..=2.0);
                a[i * d + j] = x;
                a[j * d + i] = x;
            }
        }
        let b = (0..d).map(|_| r.gen_range(-1.0..=1.0)).collect();
        let f = QuadraticForm::new(a, b)?;
        let alpha = r.gen_range(1.05..=2.0);
        let u = vector(r, d);
        let v = vector(r, d);
        alpha_smoothness_sides(&f, &u, &v, alpha)
    })
}

/// Runs every inequality check with `instances` random cases each.
pub fn run_selftest(instances: usize, seed: u64) -> Result<Vec<CheckReport>> {
    Ok(vec![
        check_alpha_smoothness(instances, seed)?,
        check_power_expansion(instances, seed.wrapping_add(1))?,
        check_cumulative_ratio(instances, seed.wrapping_add(2))?,
        check_ema_ratio(instances, seed.wrapping_add(3))?,
    ])
}

//! Central finite-difference verification of [`NetworkParams::backward`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::net::{NetConfig, NetworkParams, OutputHead};
use crate::error::{Error, Result};
use crate::exec::Execution;

pub const FD_STEP: f64 = 1e-5;
/// Inputs are redrawn until every hidden pre-activation is at least this far
/// from the rectifier kink.
pub const KINK_MARGIN: f64 = 1e-6;
/// Denominator floor for the relative error, so gradients that are zero up to
/// roundoff do not divide by ~0.
pub const RELATIVE_FLOOR: f64 = 1e-8;

const MAX_LAYERS: usize = 3;
const MAX_UNITS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Parameters whose ±h perturbation flipped a rectifier.
    pub skipped: usize,
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares `backward` against central differences of `output · g` over every
/// parameter of a freshly initialized net, at a random kink-free input.
pub fn grad_check(config: &NetConfig, seed: u64) -> Result<GradCheckReport> {
    config.validate()?;
    if config.num_layers() > MAX_LAYERS || config.layer_sizes.iter().any(|&n| n > MAX_UNITS) {
        return Err(Error::config(format!(
            "grad_check expects at most {MAX_LAYERS} layers of at most {MAX_UNITS} units"
        )));
    }
    let params = NetworkParams::init(config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);

    let mut input: Vec<f64> = Vec::new();
    let mut found = false;
    for _ in 0..1000 {
        input = (0..config.input_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, cache) = params.forward(&input)?;
        if cache.min_kink_distance() >= KINK_MARGIN {
            found = true;
            break;
        }
    }
    if !found {
        return Err(Error::config("could not find a kink-free input"));
    }
    let out_grad: Vec<f64> = (0..config.output_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let (_, cache) = params.forward(&input)?;
    let pattern = cache.relu_pattern();
    let analytic = params.backward(&cache, &out_grad)?;

    let objective = |p: &NetworkParams| -> Result<(f64, Vec<bool>)> {
        let (out, c) = p.forward(&input)?;
        Ok((out.iter().zip(&out_grad).map(|(o, g)| o * g).sum(), c.relu_pattern()))
    };

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    let mut probe = params.clone();
    for (idx, &a) in analytic.values().enumerate() {
        let orig = params.param(idx);
        probe.set_param(idx, orig + FD_STEP);
        let (plus, pat_plus) = objective(&probe)?;
        probe.set_param(idx, orig - FD_STEP);
        let (minus, pat_minus) = objective(&probe)?;
        probe.set_param(idx, orig);
        if pat_plus != pattern || pat_minus != pattern {
            report.skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        report.checked += 1;
        report.max_relative_error = report.max_relative_error.max(relative_error(a, numeric));
    }
    Ok(report)
}

/// Random small topology: 0–2 hidden layers of 1–16 units, random head.
pub fn random_small_config(seed: u64) -> NetConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545_f491_4f6c_dd1d).wrapping_add(1));
    let hidden = rng.gen_range(0..=2);
    let mut sizes = vec![rng.gen_range(1..=8)];
    for _ in 0..hidden {
        sizes.push(rng.gen_range(1..=MAX_UNITS));
    }
    sizes.push(rng.gen_range(1..=4));
    let head = if rng.gen_bool(0.5) {
        OutputHead::Linear
    } else {
        OutputHead::Bounded {
            scale: rng.gen_range(0.5..3.0),
        }
    };
    NetConfig {
        layer_sizes: sizes,
        head,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheckSweep {
    pub nets: usize,
    pub max_relative_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Runs [`grad_check`] on `nets` random small networks (seeds `seed..seed+nets`).
pub fn grad_check_sweep(nets: usize, seed: u64, exec: Execution) -> Result<GradCheckSweep> {
    let seeds: Vec<u64> = (0..nets as u64).map(|i| seed + i).collect();
    let reports = exec.map(seeds, |s| grad_check(&random_small_config(s), s));
    let mut sweep = GradCheckSweep {
        nets,
        max_relative_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    for r in reports {
        let r = r?;
        sweep.max_relative_error = sweep.max_relative_error.max(r.max_relative_error);
        sweep.checked += r.checked;
        sweep.skipped += r.skipped;
    }
    Ok(sweep)
}

//! Configuring the surface for low BER.
//!
//! Bit errors cannot be descended directly, so the optimizer minimizes the
//! inverse post-detection SINR of the effective response `g`:
//!
//! `loss = (Σ_{t≠t*} |g[t]|² + σ²) / |g[t*]|²`,  `t* = argmax |g[t]|`
//!
//! which is monotone in the Gaussian-approximation BPSK error rate
//! `Q(sqrt(2 / loss))`. Phases follow the gradient of this loss while the
//! delay bits stay fixed; the delay bits themselves are found by random
//! restarts, each restart drawing fresh bits and fresh phases.

use std::f64::consts::TAU;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{convolve_channel, ChannelRealization};
use crate::error::{Error, Result};
use crate::montecarlo::{analytic_ber, required_snr_db, SnrDefinition};
use crate::seeding::stream_rng;
use crate::sis::{apply_delay_bits, effective_response, pad_input, SignalBlock, SisConfig, SurfaceModel};

/// Minimum gap between the two largest taps for the gradient to be defined.
const TIE_GAP: f64 = 1e-12;
/// Step of the central-difference fallback, radians.
const FD_STEP: f64 = 1e-6;
/// Iterations without a new best before the learning rate decays.
const DECAY_PATIENCE: usize = 10;
/// Window over which the relative-improvement stop test is applied.
const CONVERGENCE_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerHyperparams {
    /// Number of random delay-bit draws.
    pub mask_draws: usize,
    pub max_iters: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub surrogate: Surrogate,
}

impl Default for OptimizerHyperparams {
    fn default() -> Self {
        OptimizerHyperparams {
            mask_draws: 50,
            max_iters: 500,
            learning_rate: 0.1,
            lr_decay: 0.5,
            tolerance: 1e-6,
            seed: 0,
            surrogate: Surrogate::Sinr,
        }
    }
}

impl OptimizerHyperparams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mask_draws >= 1
            && self.max_iters >= 1
            && self.learning_rate > 0.0
            && self.lr_decay > 0.0
            && self.lr_decay <= 1.0
            && self.tolerance > 0.0
            && self.tolerance < 1.0;
        if !ok {
            return Err(Error::InvalidArgument(format!("invalid optimizer hyperparameters: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best_config: SisConfig,
    pub best_loss: f64,
    /// Final loss of every mask draw, in draw order.
    pub loss_trace: Vec<f64>,
    pub draws: usize,
}

/// Dominant tap index, or an error when the top two magnitudes are tied.
fn unique_dominant_tap(g: &[Complex64]) -> Result<usize> {
    let (first, _) = crate::montecarlo::dominant_tap(g)?;
    let peak = g[first].norm();
    if let Some((second, _)) = g
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != first)
        .find(|(_, v)| peak - v.norm() <= TIE_GAP)
    {
        return Err(Error::TiedDominantTap { first, second });
    }
    Ok(first)
}

/// Differentiable stand-in for the BER of a response `g` at noise
/// variance `σ²`, with `t* = argmax |g[t]|` and `a = g[t*]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Surrogate {
    /// `(Σ_{t≠t*} |g[t]|² + σ²) / |a|²`: interference treated as circular
    /// noise, `BER ≈ Q(sqrt(2 / loss))`.
    #[default]
    Sinr,
    /// `(Σ_{t≠t*} Re(g[t] ā)² / |a|² + σ²/2) / |a|²`: only interference in
    /// phase with the reference survives coherent BPSK detection,
    /// `BER ≈ Q(sqrt(1 / loss))`.
    BpskSinr,
}

impl std::str::FromStr for Surrogate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sinr" => Ok(Surrogate::Sinr),
            "bpsk-sinr" => Ok(Surrogate::BpskSinr),
            other => Err(Error::InvalidArgument(format!(
                "unknown surrogate {other:?}, expected sinr or bpsk-sinr"
            ))),
        }
    }
}

impl Surrogate {
    pub fn loss_of_response(self, g: &[Complex64], noise_variance: f64) -> Result<f64> {
        let (t, a) = crate::montecarlo::dominant_tap(g)?;
        let p = a.norm_sqr();
        let others = g.iter().enumerate().filter(|(i, _)| *i != t).map(|(_, v)| v);
        Ok(match self {
            Surrogate::Sinr => (others.map(|v| v.norm_sqr()).sum::<f64>() + noise_variance) / p,
            Surrogate::BpskSinr => {
                let s: f64 = others.map(|v| (v * a.conj()).re.powi(2)).sum();
                s / (p * p) + noise_variance / (2.0 * p)
            }
        })
    }

    /// `e[t] = ∂loss/∂Re g[t] + j ∂loss/∂Im g[t]` with `t*` held fixed.
    fn output_gradient(self, g: &[Complex64], t_star: usize, noise_variance: f64) -> Vec<Complex64> {
        let a = g[t_star];
        let p = a.norm_sqr();
        match self {
            Surrogate::Sinr => {
                let num: f64 = g
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != t_star)
                    .map(|(_, v)| v.norm_sqr())
                    .sum::<f64>()
                    + noise_variance;
                g.iter()
                    .enumerate()
                    .map(|(t, v)| if t == t_star { -v * (2.0 * num / (p * p)) } else { v * (2.0 / p) })
                    .collect()
            }
            Surrogate::BpskSinr => {
                let mut e = vec![Complex64::new(0.0, 0.0); g.len()];
                let mut s = 0.0;
                let mut cross = Complex64::new(0.0, 0.0);
                for (t, v) in g.iter().enumerate().filter(|(i, _)| *i != t_star) {
                    let r = (v * a.conj()).re;
                    s += r * r;
                    cross += v * r;
                    e[t] = a * (2.0 * r / (p * p));
                }
                e[t_star] = cross * (2.0 / (p * p)) - a * (4.0 * s / (p * p * p) + noise_variance / (p * p));
                e
            }
        }
    }

    pub fn loss(
        self,
        model: &SurfaceModel,
        config: &SisConfig,
        channel: &ChannelRealization,
        noise_variance: f64,
    ) -> Result<f64> {
        let g = effective_response(model, config, channel)?;
        self.loss_of_response(g.as_slice().expect("contiguous"), noise_variance)
    }

    /// Analytic `∂loss/∂θ` for every phase (layer-major, layer 1 first),
    /// via one forward pass and one adjoint pass through the cascade.
    pub fn gradient(
        self,
        model: &SurfaceModel,
        config: &SisConfig,
        channel: &ChannelRealization,
        noise_variance: f64,
    ) -> Result<Vec<f64>> {
        let trace = forward_trace(model, config, channel)?;
        let t_star = unique_dominant_tap(&trace.output)?;
        let seed = self.output_gradient(&trace.output, t_star, noise_variance);
        Ok(backpropagate(model, config, &trace, seed))
    }

    /// Central-difference gradient of the loss.
    pub fn finite_difference_gradient(
        self,
        model: &SurfaceModel,
        config: &SisConfig,
        channel: &ChannelRealization,
        noise_variance: f64,
        step: f64,
    ) -> Result<Vec<f64>> {
        let base = config.phases_flat();
        let mut probe = config.clone();
        let mut grad = Vec::with_capacity(base.len());
        for i in 0..base.len() {
            let mut shifted = base.clone();
            shifted[i] = base[i] + step;
            probe.set_phases_flat(&shifted);
            let up = self.loss(model, &probe, channel, noise_variance)?;
            shifted[i] = base[i] - step;
            probe.set_phases_flat(&shifted);
            let down = self.loss(model, &probe, channel, noise_variance)?;
            grad.push((up - down) / (2.0 * step));
        }
        Ok(grad)
    }
}

/// Inverse SINR of a response at its dominant tap.
pub fn loss_of_response(g: &[Complex64], noise_variance: f64) -> Result<f64> {
    Surrogate::Sinr.loss_of_response(g, noise_variance)
}

pub fn surrogate_loss(
    model: &SurfaceModel,
    config: &SisConfig,
    channel: &ChannelRealization,
    noise_variance: f64,
) -> Result<f64> {
    Surrogate::Sinr.loss(model, config, channel, noise_variance)
}

/// Per-layer signals kept from the forward pass: the phase-shifted block
/// `V_l` that leaves each layer before its coupling.
struct ForwardTrace {
    /// `shifted[l - 1]` is `V_l`.
    shifted: Vec<Array2<Complex64>>,
    output: Vec<Complex64>,
}

fn forward_trace(model: &SurfaceModel, config: &SisConfig, channel: &ChannelRealization) -> Result<ForwardTrace> {
    config.check_matches(model)?;
    let received = convolve_channel(channel, &[Complex64::new(1.0, 0.0)])?;
    let mut block = pad_input(&received, model.num_layers()).into_samples();
    let mut shifted = vec![Array2::zeros((0, 0)); model.num_layers()];
    for layer in (1..=model.num_layers()).rev() {
        let mut v = apply_delay_bits(&SignalBlock::new(block), config.delay_bits(layer))?.into_samples();
        for (mut row, f) in v.rows_mut().into_iter().zip(config.phase_factors(layer)) {
            row.mapv_inplace(|x| x * f);
        }
        block = model.coupling(layer).dot(&v);
        shifted[layer - 1] = v;
    }
    Ok(ForwardTrace {
        shifted,
        output: block.row(0).to_vec(),
    })
}

/// Adjoint of the per-row delay: bit-1 rows shift left with zero fill.
fn delay_adjoint(block: &mut Array2<Complex64>, bits: &[bool]) {
    let width = block.ncols();
    for (mut row, &bit) in block.rows_mut().into_iter().zip(bits) {
        if bit && width > 0 {
            for t in 0..width - 1 {
                row[t] = row[t + 1];
            }
            row[width - 1] = Complex64::new(0.0, 0.0);
        }
    }
}

fn backpropagate(model: &SurfaceModel, config: &SisConfig, trace: &ForwardTrace, seed: Vec<Complex64>) -> Vec<f64> {
    let n = model.elements_per_layer();
    let mut grad = vec![0.0; n * model.num_layers()];
    let mut adjoint = Array2::from_shape_vec((1, seed.len()), seed).expect("row vector");
    for layer in 1..=model.num_layers() {
        let coupling = model.coupling(layer);
        let mut lambda = coupling.t().mapv(|x| x.conj()).dot(&adjoint);
        let v = &trace.shifted[layer - 1];
        for (i, (lrow, vrow)) in lambda.rows().into_iter().zip(v.rows()).enumerate() {
            let inner: Complex64 = lrow.iter().zip(vrow).map(|(l, x)| l.conj() * x).sum();
            grad[(layer - 1) * n + i] = -inner.im;
        }
        for (mut row, f) in lambda.rows_mut().into_iter().zip(config.phase_factors(layer)) {
            let fc = f.conj();
            row.mapv_inplace(|x| x * fc);
        }
        delay_adjoint(&mut lambda, config.delay_bits(layer));
        adjoint = lambda;
    }
    grad
}

pub fn phase_gradient(
    model: &SurfaceModel,
    config: &SisConfig,
    channel: &ChannelRealization,
    noise_variance: f64,
) -> Result<Vec<f64>> {
    Surrogate::Sinr.gradient(model, config, channel, noise_variance)
}

pub fn finite_difference_gradient(
    model: &SurfaceModel,
    config: &SisConfig,
    channel: &ChannelRealization,
    noise_variance: f64,
    step: f64,
) -> Result<Vec<f64>> {
    Surrogate::Sinr.finite_difference_gradient(model, config, channel, noise_variance, step)
}

/// Gradient descent on the phases with delay bits held fixed. Returns the
/// best iterate seen and its loss.
pub fn gradient_descent_phases(
    model: &SurfaceModel,
    config: &SisConfig,
    channel: &ChannelRealization,
    noise_variance: f64,
    hyper: &OptimizerHyperparams,
) -> Result<(SisConfig, f64)> {
    hyper.validate()?;
    let mut current = config.clone();
    let objective = hyper.surrogate;
    let mut best = (current.clone(), objective.loss(model, &current, channel, noise_variance)?);
    let mut history = vec![best.1];
    let mut lr = hyper.learning_rate;
    let mut stall = 0;

    for _ in 0..hyper.max_iters {
        let grad = match objective.gradient(model, &current, channel, noise_variance) {
            Err(Error::TiedDominantTap { .. }) => {
                objective.finite_difference_gradient(model, &current, channel, noise_variance, FD_STEP)?
            }
            other => other?,
        };
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm <= f64::EPSILON * best.1.max(f64::MIN_POSITIVE) {
            break;
        }
        let stepped: Vec<f64> = current
            .phases_flat()
            .iter()
            .zip(&grad)
            .map(|(t, g)| t - lr * g)
            .collect();
        current.set_phases_flat(&stepped);
        let loss = objective.loss(model, &current, channel, noise_variance)?;
        if loss < best.1 {
            best = (current.clone(), loss);
            stall = 0;
        } else {
            stall += 1;
            if stall >= DECAY_PATIENCE {
                lr *= hyper.lr_decay;
                stall = 0;
            }
        }
        history.push(best.1);
        if history.len() > CONVERGENCE_WINDOW {
            let earlier = history[history.len() - 1 - CONVERGENCE_WINDOW];
            if (earlier - best.1) <= hyper.tolerance * earlier {
                break;
            }
        }
    }
    Ok(best)
}

/// Fair-coin delay bits for every element of every layer.
pub fn random_delay_draw<R: Rng + ?Sized>(num_layers: usize, elements_per_layer: usize, rng: &mut R) -> Vec<Vec<bool>> {
    (0..num_layers)
        .map(|_| (0..elements_per_layer).map(|_| rng.random()).collect())
        .collect()
}

/// Phases drawn uniformly from `[0, 2π)`.
pub fn random_phases<R: Rng + ?Sized>(num_layers: usize, elements_per_layer: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..num_layers)
        .map(|_| (0..elements_per_layer).map(|_| rng.random_range(0.0..TAU)).collect())
        .collect()
}

/// Random starting point of mask draw `draw`.
pub fn initial_draw(model: &SurfaceModel, seed: u64, draw: usize) -> SisConfig {
    let mut rng = stream_rng(seed, draw as u64);
    let (l, n) = (model.num_layers(), model.elements_per_layer());
    let bits = random_delay_draw(l, n, &mut rng);
    let phases = random_phases(l, n, &mut rng);
    SisConfig::new(phases, bits).expect("drawn configuration is well-formed")
}

/// Random search over delay bits with gradient descent on the phases of
/// each draw; keeps the lowest-loss pair.
pub fn hybrid_optimize(
    model: &SurfaceModel,
    channel: &ChannelRealization,
    noise_variance: f64,
    hyper: &OptimizerHyperparams,
) -> Result<OptimizationResult> {
    hyper.validate()?;
    let runs = (0..hyper.mask_draws)
        .into_par_iter()
        .map(|r| {
            let start = initial_draw(model, hyper.seed, r);
            gradient_descent_phases(model, &start, channel, noise_variance, hyper)
        })
        .collect::<Result<Vec<_>>>()?;
    let loss_trace: Vec<f64> = runs.iter().map(|(_, l)| *l).collect();
    let best_index = loss_trace
        .iter()
        .enumerate()
        .fold(0, |best, (i, l)| if *l < loss_trace[best] { i } else { best });
    let (best_config, best_loss) = runs.into_iter().nth(best_index).expect("at least one draw");
    Ok(OptimizationResult {
        best_config,
        best_loss,
        loss_trace,
        draws: hyper.mask_draws,
    })
}

/// Outcome of [`design_surface`].
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceDesign {
    pub result: OptimizationResult,
    /// Effective response of the chosen configuration.
    pub response: Vec<Complex64>,
    /// Design SNR (dB, unit transmit power) the chosen configuration was optimized at.
    pub design_snr_db: f64,
    /// Analytic SNR for the target BER; `None` if it is never reached.
    pub required_snr_db: Option<f64>,
    /// `(design SNR, required SNR)` for every candidate, in input order.
    pub candidates: Vec<(f64, Option<f64>)>,
}

/// Runs [`hybrid_optimize`] at each design SNR (noise variance
/// `10^(-snr/10)`) and keeps the configuration that reaches `target_ber` at
/// the lowest SNR under `definition`, judged by the exact BPSK error rate of
/// its effective response. Ties and never-reaching candidates fall back to
/// the lower interference-only error rate, then to the earlier candidate.
pub fn design_surface(
    model: &SurfaceModel,
    channel: &ChannelRealization,
    hyper: &OptimizerHyperparams,
    design_snr_db: &[f64],
    target_ber: f64,
    definition: SnrDefinition,
) -> Result<SurfaceDesign> {
    if design_snr_db.is_empty() || design_snr_db.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid design SNR list {design_snr_db:?}")));
    }
    let mut best: Option<(SurfaceDesign, f64)> = None;
    let mut candidates = Vec::with_capacity(design_snr_db.len());
    for &snr in design_snr_db {
        let result = hybrid_optimize(model, channel, 10f64.powf(-snr / 10.0), hyper)?;
        let response = effective_response(model, &result.best_config, channel)?.to_vec();
        let required = required_snr_db(&response, target_ber, definition)?;
        let floor = analytic_ber(&response, 0.0)?;
        candidates.push((snr, required));
        let better = match &best {
            None => true,
            Some((b, b_floor)) => {
                let key = (required.unwrap_or(f64::INFINITY), floor);
                let b_key = (b.required_snr_db.unwrap_or(f64::INFINITY), *b_floor);
                key < b_key
            }
        };
        if better {
            best = Some((
                SurfaceDesign {
                    result,
                    response,
                    design_snr_db: snr,
                    required_snr_db: required,
                    candidates: Vec::new(),
                },
                floor,
            ));
        }
    }
    let (mut design, _) = best.expect("at least one candidate");
    design.candidates = candidates;
    Ok(design)
}

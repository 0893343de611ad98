//! Digital zero-forcing baselines operating on the receiver's scalar series.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{add_awgn, TemporalTaps};
use crate::error::{Error, Result};

/// Roots closer than this to the unit circle are treated as unstable.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Causal FIR filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter(Vec<Complex64>);

impl FirFilter {
    pub fn new(taps: Vec<Complex64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidArgument("FIR filter needs at least one tap".into()));
        }
        Ok(FirFilter(taps))
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Roots of `c₀ z^{C-1} + c₁ z^{C-2} + … + c_{C-1}`, i.e. the zeros of
/// `c(z⁻¹)`, by Durand-Kerner iteration.
pub fn tap_polynomial_roots(taps: &TemporalTaps) -> Vec<Complex64> {
    let c = taps.as_slice();
    let degree = c.len() - 1;
    if degree == 0 {
        return Vec::new();
    }
    let monic: Vec<Complex64> = c.iter().map(|x| x / c[0]).collect();
    let eval = |z: Complex64| monic.iter().fold(Complex64::new(0.0, 0.0), |acc, a| acc * z + a);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..degree).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..1000 {
        let mut max_step: f64 = 0.0;
        for i in 0..degree {
            let zi = roots[i];
            let denom = roots
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .fold(Complex64::new(1.0, 0.0), |acc, (_, zj)| acc * (zi - zj));
            let step = eval(zi) / denom;
            roots[i] = zi - step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-15 {
            break;
        }
    }
    roots
}

pub fn max_root_modulus(taps: &TemporalTaps) -> f64 {
    tap_polynomial_roots(taps).iter().map(|r| r.norm()).fold(0.0, f64::max)
}

/// Fails unless the causal inverse `1/c(z)` is stable.
pub fn check_stable(taps: &TemporalTaps) -> Result<()> {
    let max_root_modulus = max_root_modulus(taps);
    if max_root_modulus >= 1.0 - STABILITY_MARGIN {
        return Err(Error::UnstableInverse { max_root_modulus });
    }
    Ok(())
}

/// IIR zero-forcing: `y[k] = (x[k] - Σ_{i≥1} c_i y[k-i]) / c₀`, zero initial state.
pub fn zf_iir_equalize(series: &[Complex64], taps: &TemporalTaps) -> Result<Vec<Complex64>> {
    check_stable(taps)?;
    Ok(inverse_filter(series, taps.as_slice()))
}

fn inverse_filter(series: &[Complex64], c: &[Complex64]) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = Vec::with_capacity(series.len());
    for (k, x) in series.iter().enumerate() {
        let mut acc = *x;
        for (i, ci) in c.iter().enumerate().skip(1).take(k) {
            acc -= ci * out[k - i];
        }
        out.push(acc / c[0]);
    }
    out
}

/// First `k` samples of the impulse response of `1/c(z)`.
pub fn fir_from_iir(taps: &TemporalTaps, k: usize) -> Result<FirFilter> {
    if k < 1 {
        return Err(Error::InvalidArgument("FIR length must be at least 1".into()));
    }
    let mut impulse = vec![Complex64::new(0.0, 0.0); k];
    impulse[0] = Complex64::new(1.0, 0.0);
    FirFilter::new(zf_iir_equalize(&impulse, taps)?)
}

/// Causal FIR filtering, output truncated to the input length.
pub fn apply_fir(series: &[Complex64], filter: &FirFilter) -> Vec<Complex64> {
    (0..series.len())
        .map(|k| {
            filter
                .taps()
                .iter()
                .take(k + 1)
                .enumerate()
                .map(|(i, f)| f * series[k - i])
                .sum()
        })
        .collect()
}

/// Idealized benchmark: equalize the clean series, then add receiver noise.
pub fn noiseless_zf_pipeline<R: Rng + ?Sized>(
    clean: &[Complex64],
    taps: &TemporalTaps,
    noise_variance: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let mut out = zf_iir_equalize(clean, taps)?;
    add_awgn(&mut out, noise_variance, rng)?;
    Ok(out)
}

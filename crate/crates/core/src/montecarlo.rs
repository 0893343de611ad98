//! BPSK link simulation and Monte Carlo BER estimation.
//!
//! Blocks of `block_len` bits are simulated independently. Block `b` of a
//! point draws all of its randomness from RNG stream `b`, and blocks are
//! consumed in index order when applying the stop rule, so a BER point is a
//! pure function of `(pipeline, snr, settings, seed)` regardless of how many
//! threads evaluate it.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::channel::{add_awgn, convolve, TemporalTaps};
use crate::equalizer::{apply_fir, check_stable, fir_from_iir, zf_iir_equalize, FirFilter};
use crate::error::{Error, Result};
use crate::seeding::{derive_seed, stream_rng};

/// Blocks simulated per parallel batch. Fixed so results never depend on
/// the thread count.
const BATCH_BLOCKS: u64 = 256;

/// BPSK mapping: bit 0 → +1, bit 1 → -1.
pub fn bpsk_modulate(bits: &[bool]) -> Vec<Complex64> {
    bits.iter()
        .map(|&b| Complex64::new(if b { -1.0 } else { 1.0 }, 0.0))
        .collect()
}

/// Coherent BPSK decisions on `series[offset..offset + m]`: bit 0 iff
/// `Re(conj(gain) · y) ≥ 0`.
pub fn bpsk_detect(series: &[Complex64], gain: Complex64, offset: usize, m: usize) -> Result<Vec<bool>> {
    if gain == Complex64::new(0.0, 0.0) {
        return Err(Error::InvalidArgument("reference gain is zero".into()));
    }
    let window = series.get(offset..offset + m).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "detection window {offset}..{} exceeds series length {}",
            offset + m,
            series.len()
        ))
    })?;
    Ok(window.iter().map(|y| (gain.conj() * y).re < 0.0).collect())
}

/// Index and value of the largest-magnitude tap; ties go to the earliest.
pub fn dominant_tap(response: &[Complex64]) -> Result<(usize, Complex64)> {
    let mut best = None::<(usize, f64)>;
    for (i, g) in response.iter().enumerate() {
        let m = g.norm_sqr();
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((i, m));
        }
    }
    match best {
        Some((i, m)) if m > 0.0 => Ok((i, response[i])),
        _ => Err(Error::ZeroResponse),
    }
}

/// How the SNR axis maps to a noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnrDefinition {
    /// Noise-free antenna signal power over noise variance.
    #[default]
    Received,
    /// Unit transmitted symbol power over noise variance; channel and
    /// surface gains are not normalized out.
    Transmit,
}

impl FromStr for SnrDefinition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "received" => Ok(SnrDefinition::Received),
            "transmit" => Ok(SnrDefinition::Transmit),
            other => Err(Error::Config(format!(
                "unknown SNR definition `{other}` (expected `received` or `transmit`)"
            ))),
        }
    }
}

impl fmt::Display for SnrDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SnrDefinition::Received => "received",
            SnrDefinition::Transmit => "transmit",
        })
    }
}

/// Stop a point once `min_errors` bit errors are seen or `max_bits` bits
/// have been simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRule {
    pub min_errors: u64,
    pub max_bits: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            min_errors: 100,
            max_bits: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSettings {
    pub block_len: usize,
    pub stop: StopRule,
    pub snr_definition: SnrDefinition,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings {
            block_len: 128,
            stop: StopRule::default(),
            snr_definition: SnrDefinition::Received,
        }
    }
}

impl SimulationSettings {
    fn validate(&self) -> Result<()> {
        if self.block_len == 0 {
            return Err(Error::InvalidArgument("block length must be positive".into()));
        }
        if self.stop.min_errors == 0 || self.stop.max_bits < self.block_len as u64 {
            return Err(Error::InvalidArgument(format!(
                "invalid stop rule: need min_errors ≥ 1 and max_bits ≥ block length {}, got {:?}",
                self.block_len, self.stop
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub ber: f64,
    pub bits_simulated: u64,
    pub bit_errors: u64,
    /// 95% normal-approximation half-width.
    pub ci_half_width: f64,
}

impl BerPoint {
    pub fn from_counts(snr_db: f64, bit_errors: u64, bits_simulated: u64) -> Self {
        let n = bits_simulated as f64;
        let ber = bit_errors as f64 / n;
        BerPoint {
            snr_db,
            ber,
            bits_simulated,
            bit_errors,
            ci_half_width: 1.96 * (ber * (1.0 - ber) / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerCurve {
    pub label: String,
    pub points: Vec<BerPoint>,
}

impl BerCurve {
    pub const CSV_HEADER: &'static str = "label,snr_db,ber,bits,errors,ci";

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.label, p.snr_db, p.ber, p.bits_simulated, p.bit_errors, p.ci_half_width
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    /// SNR where the curve crosses `target` BER, interpolating log10(BER)
    /// linearly between the first bracketing pair of points.
    pub fn snr_at_ber(&self, target: f64) -> Option<f64> {
        self.points.windows(2).find_map(|w| {
            let (a, b) = (&w[0], &w[1]);
            if a.ber >= target && b.ber < target {
                if b.ber == 0.0 {
                    return Some(b.snr_db);
                }
                let (la, lb, lt) = (a.ber.log10(), b.ber.log10(), target.log10());
                Some(a.snr_db + (la - lt) / (la - lb) * (b.snr_db - a.snr_db))
            } else {
                None
            }
        })
    }
}

/// A receive chain whose BER can be estimated.
#[derive(Debug, Clone, PartialEq)]
pub enum Pipeline {
    /// Noise is added to the output of a fixed symbol-rate response and the
    /// result is detected directly. Several responses average over fading
    /// realizations (block `b` uses response `b mod len`).
    Direct { responses: Vec<Vec<Complex64>> },
    /// Channel taps, noise, then IIR zero-forcing.
    ZfIir { taps: TemporalTaps },
    /// Channel taps, noise, then a truncated ZF inverse.
    Fir { taps: TemporalTaps, filter: FirFilter },
    /// Channel taps, IIR zero-forcing on the clean series, then noise.
    ZfIirNoiseless { taps: TemporalTaps },
}

impl Pipeline {
    /// A fixed surface (or any LTI link) with effective response `g`.
    pub fn surface(response: Vec<Complex64>) -> Result<Self> {
        Self::faded_surface(vec![response])
    }

    pub fn faded_surface(responses: Vec<Vec<Complex64>>) -> Result<Self> {
        if responses.is_empty() {
            return Err(Error::InvalidArgument("at least one response is required".into()));
        }
        for r in &responses {
            dominant_tap(r)?;
        }
        Ok(Pipeline::Direct { responses })
    }

    /// ISI-free unit-gain link: plain BPSK over AWGN.
    pub fn awgn() -> Self {
        Pipeline::Direct {
            responses: vec![vec![Complex64::new(1.0, 0.0)]],
        }
    }

    /// The multipath channel with no equalization at all.
    pub fn no_equalization(taps: &TemporalTaps) -> Self {
        Pipeline::Direct {
            responses: vec![taps.as_slice().to_vec()],
        }
    }

    pub fn zf_iir(taps: TemporalTaps) -> Result<Self> {
        check_stable(&taps)?;
        Ok(Pipeline::ZfIir { taps })
    }

    pub fn fir(taps: TemporalTaps, num_taps: usize) -> Result<Self> {
        let filter = fir_from_iir(&taps, num_taps)?;
        Ok(Pipeline::Fir { taps, filter })
    }

    pub fn zf_iir_noiseless(taps: TemporalTaps) -> Result<Self> {
        check_stable(&taps)?;
        Ok(Pipeline::ZfIirNoiseless { taps })
    }

    fn num_realizations(&self) -> usize {
        match self {
            Pipeline::Direct { responses } => responses.len(),
            _ => 1,
        }
    }

    /// Noise-free symbol-rate response at the receive antenna.
    pub fn antenna_response(&self, realization: usize) -> &[Complex64] {
        match self {
            Pipeline::Direct { responses } => &responses[realization % responses.len()],
            Pipeline::ZfIir { taps } | Pipeline::Fir { taps, .. } | Pipeline::ZfIirNoiseless { taps } => {
                taps.as_slice()
            }
        }
    }

    /// Response seen by the detector after any digital processing.
    pub fn detection_response(&self, realization: usize) -> Vec<Complex64> {
        match self {
            Pipeline::Direct { .. } => self.antenna_response(realization).to_vec(),
            Pipeline::ZfIir { .. } | Pipeline::ZfIirNoiseless { .. } => vec![Complex64::new(1.0, 0.0)],
            Pipeline::Fir { taps, filter } => convolve(taps.as_slice(), filter.taps()),
        }
    }

    /// Average noise-free power of the antenna series for i.i.d. unit-power symbols.
    pub fn antenna_power(&self) -> f64 {
        let r = self.num_realizations();
        (0..r)
            .map(|i| self.antenna_response(i).iter().map(|g| g.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            / r as f64
    }

    pub fn noise_variance(&self, snr_db: f64, definition: SnrDefinition) -> f64 {
        let snr = 10f64.powf(snr_db / 10.0);
        match definition {
            SnrDefinition::Transmit => 1.0 / snr,
            SnrDefinition::Received => self.antenna_power() / snr,
        }
    }

    /// Simulates one block and returns the number of bit errors.
    fn run_block<R: Rng + ?Sized>(&self, block: u64, m: usize, noise_variance: f64, rng: &mut R) -> Result<u64> {
        let realization = (block % self.num_realizations() as u64) as usize;
        let bits: Vec<bool> = (0..m).map(|_| rng.random()).collect();
        let symbols = bpsk_modulate(&bits);
        let detection = self.detection_response(realization);
        let (offset, gain) = dominant_tap(&detection)?;
        let len = m + detection.len().max(self.antenna_response(realization).len()) - 1;

        let mut antenna = convolve(self.antenna_response(realization), &symbols);
        antenna.resize(len, Complex64::new(0.0, 0.0));
        let series = match self {
            Pipeline::Direct { .. } => {
                add_awgn(&mut antenna, noise_variance, rng)?;
                antenna
            }
            Pipeline::ZfIir { taps } => {
                add_awgn(&mut antenna, noise_variance, rng)?;
                zf_iir_equalize(&antenna, taps)?
            }
            Pipeline::Fir { filter, .. } => {
                add_awgn(&mut antenna, noise_variance, rng)?;
                apply_fir(&antenna, filter)
            }
            Pipeline::ZfIirNoiseless { taps } => {
                let mut eq = zf_iir_equalize(&antenna, taps)?;
                add_awgn(&mut eq, noise_variance, rng)?;
                eq
            }
        };
        let decided = bpsk_detect(&series, gain, offset, m)?;
        Ok(decided.iter().zip(&bits).filter(|(a, b)| a != b).count() as u64)
    }
}

/// Estimates the BER of `pipeline` at one SNR.
pub fn estimate_ber(pipeline: &Pipeline, snr_db: f64, settings: &SimulationSettings, seed: u64) -> Result<BerPoint> {
    settings.validate()?;
    let noise_variance = pipeline.noise_variance(snr_db, settings.snr_definition);
    let m = settings.block_len;
    let max_blocks = settings.stop.max_bits / m as u64;
    let (mut bits, mut errors) = (0u64, 0u64);
    let mut next = 0u64;
    'outer: while next < max_blocks {
        let end = (next + BATCH_BLOCKS).min(max_blocks);
        let batch: Vec<u64> = (next..end)
            .into_par_iter()
            .map(|b| pipeline.run_block(b, m, noise_variance, &mut stream_rng(seed, b)))
            .collect::<Result<_>>()?;
        for e in batch {
            bits += m as u64;
            errors += e;
            if errors >= settings.stop.min_errors {
                break 'outer;
            }
        }
        next = end;
    }
    Ok(BerPoint::from_counts(snr_db, errors, bits))
}

/// Largest number of interfering taps [`analytic_ber`] will enumerate.
pub const MAX_ENUMERATED_TAPS: usize = 24;

/// Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Exact steady-state BER of coherent BPSK through the response `g` with
/// circular complex noise of variance `noise_variance`, detected at the
/// dominant tap: the Gaussian tail averaged over every interfering symbol
/// pattern.
pub fn analytic_ber(g: &[Complex64], noise_variance: f64) -> Result<f64> {
    if noise_variance < 0.0 || !noise_variance.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid noise variance {noise_variance}")));
    }
    let (t, a) = dominant_tap(g)?;
    let unit = a.conj() / a.norm();
    let isi: Vec<f64> = g
        .iter()
        .enumerate()
        .filter(|(i, v)| *i != t && (*v * unit).re != 0.0)
        .map(|(_, v)| (v * unit).re)
        .collect();
    if isi.len() > MAX_ENUMERATED_TAPS {
        return Err(Error::InvalidArgument(format!(
            "{} interfering taps exceed the enumeration limit {MAX_ENUMERATED_TAPS}",
            isi.len()
        )));
    }
    let sd = (noise_variance / 2.0).sqrt();
    let patterns = 1u64 << isi.len();
    let total: f64 = (0..patterns)
        .map(|m| {
            let eye = a.norm()
                + isi
                    .iter()
                    .enumerate()
                    .map(|(k, r)| if m >> k & 1 == 1 { -r } else { *r })
                    .sum::<f64>();
            match (sd > 0.0, eye) {
                (true, _) => q_function(eye / sd),
                (false, e) if e > 0.0 => 0.0,
                (false, e) if e < 0.0 => 1.0,
                _ => 0.5,
            }
        })
        .sum();
    Ok(total / patterns as f64)
}

/// SNR (under `definition`) at which [`analytic_ber`] of `g` equals
/// `target`; `None` when residual interference alone already reaches it.
pub fn required_snr_db(g: &[Complex64], target: f64, definition: SnrDefinition) -> Result<Option<f64>> {
    if !(target > 0.0 && target < 0.5) {
        return Err(Error::InvalidArgument(format!("target BER must lie in (0, 0.5), got {target}")));
    }
    if analytic_ber(g, 0.0)? >= target {
        return Ok(None);
    }
    let (mut lo, mut hi) = (-300.0f64, 300.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if analytic_ber(g, 10f64.powf(-mid / 10.0))? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let transmit = hi;
    Ok(Some(match definition {
        SnrDefinition::Transmit => transmit,
        SnrDefinition::Received => transmit + 10.0 * g.iter().map(|v| v.norm_sqr()).sum::<f64>().log10(),
    }))
}

/// Seed used for grid point `index` of a sweep rooted at `root_seed`.
pub fn point_seed(root_seed: u64, index: usize) -> u64 {
    derive_seed(root_seed, index as u64)
}

/// One BER estimate per grid point; the grid must be strictly ascending.
pub fn snr_sweep(
    label: &str,
    pipeline: &Pipeline,
    snr_grid_db: &[f64],
    settings: &SimulationSettings,
    root_seed: u64,
) -> Result<BerCurve> {
    if snr_grid_db.is_empty() {
        return Err(Error::InvalidArgument("SNR grid is empty".into()));
    }
    if snr_grid_db.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("SNR grid must be strictly ascending".into()));
    }
    let points = snr_grid_db
        .par_iter()
        .enumerate()
        .map(|(i, snr)| estimate_ber(pipeline, *snr, settings, point_seed(root_seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(BerCurve {
        label: label.to_string(),
        points,
    })
}

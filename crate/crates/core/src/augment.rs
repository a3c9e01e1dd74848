//! Stochastic waveform and spectrogram augmentation.
//!
//! Three families: speed perturbation (resampling-based, shifts pitch),
//! environmental corruption (SNR-scaled additive noise and impulse-response
//! reverb), and time/frequency masking on the log-mel map. A scene composer
//! overlays several independently scaled noise segments for noisy training.
//!
//! All randomness flows through an explicit generator passed by the caller;
//! there is no hidden global RNG.

use std::path::Path;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::{self, AudioClip, CANONICAL_SAMPLES};
use crate::error::{Error, Result};
use crate::features::LogMelSpectrogram;

/// Lower bound of the speed-perturbation factor range.
pub const SPEED_FACTOR_MIN: f64 = 0.8;
/// Upper bound of the speed-perturbation factor range.
pub const SPEED_FACTOR_MAX: f64 = 1.2;

/// How the additive-noise gain is derived from the requested SNR.
///
/// `Exact` makes the realized energy ratio equal the requested value:
/// a = (|x|/|n|) * 10^(-snr/20). `PowerExponent` applies 10^(-snr/10) as an
/// amplitude factor instead, which realizes twice the requested SNR in dB;
/// it is kept behind a flag for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnrConvention {
    Exact,
    PowerExponent,
}

impl SnrConvention {
    pub fn gain(self, signal_norm: f64, noise_norm: f64, snr_db: f64) -> f64 {
        let exponent = match self {
            SnrConvention::Exact => -snr_db / 20.0,
            SnrConvention::PowerExponent => -snr_db / 10.0,
        };
        signal_norm / noise_norm * 10.0f64.powf(exponent)
    }
}

/// Finite impulse response used for convolutional reverb.
#[derive(Debug, Clone)]
pub struct ImpulseResponse {
    taps: Vec<f64>,
    sample_rate_hz: u32,
}

impl ImpulseResponse {
    pub fn new(taps: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidArgument("impulse response must be non-empty".into()));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("impulse response has non-finite taps".into()));
        }
        Ok(Self { taps, sample_rate_hz })
    }

    /// Loads an impulse response from a WAV file, resampling to 16 kHz.
    pub fn from_wav(path: &Path) -> Result<Self> {
        let clip = audio::read_wav(path)?;
        let clip = audio::resample(&clip, 16_000)?;
        Self::new(clip.into_samples(), 16_000)
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }
}

/// Axis a spectrogram mask runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskAxis {
    /// Masks whole frames (columns).
    Time,
    /// Masks whole mel bands (rows).
    Frequency,
}

/// One contiguous zero-fill region on a spectrogram axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskSpec {
    pub axis: MaskAxis,
    pub start: usize,
    pub width: usize,
}

/// One noise placement inside a composed scene.
#[derive(Debug, Clone)]
pub struct NoiseMix {
    pub snr_db: f64,
    pub noise: AudioClip,
    pub insert_offset: usize,
}

/// Sampling ranges for the multi-noise scene composer.
#[derive(Debug, Clone)]
pub struct ScenePolicy {
    /// Inclusive range for the number of overlaid noise segments.
    pub n_noises: (usize, usize),
    /// Inclusive SNR range in dB, each noise drawn independently.
    pub snr_db: (f64, f64),
    pub convention: SnrConvention,
}

impl Default for ScenePolicy {
    fn default() -> Self {
        Self { n_noises: (2, 3), snr_db: (-20.0, 0.0), convention: SnrConvention::Exact }
    }
}

impl ScenePolicy {
    /// Scene with a fixed SNR for every noise, as used by evaluation sweeps.
    pub fn fixed_snr(snr_db: f64) -> Self {
        Self { snr_db: (snr_db, snr_db), ..Self::default() }
    }
}

/// Playback-speed change by plain resampling: duration scales by 1/factor,
/// pitch by factor. The result is re-fitted to the canonical 80 000 samples
/// (truncated or tiled).
pub fn speed_perturb(clip: &AudioClip, factor: f64) -> Result<AudioClip> {
    let stretched = stretch(clip, factor)?;
    let samples = if stretched.len() >= CANONICAL_SAMPLES {
        stretched.samples()[..CANONICAL_SAMPLES].to_vec()
    } else {
        audio::tile_to(stretched.samples(), CANONICAL_SAMPLES)
    };
    AudioClip::new(samples, clip.sample_rate_hz())
}

/// The raw speed change before the canonical refit: output length is
/// round(L / factor) and the sample rate is unchanged.
pub fn stretch(clip: &AudioClip, factor: f64) -> Result<AudioClip> {
    if !(SPEED_FACTOR_MIN..=SPEED_FACTOR_MAX).contains(&factor) {
        return Err(Error::InvalidArgument(format!(
            "speed factor {factor} outside [{SPEED_FACTOR_MIN}, {SPEED_FACTOR_MAX}]"
        )));
    }
    if clip.is_empty() {
        return Err(Error::InvalidArgument("cannot speed-perturb an empty clip".into()));
    }
    if factor == 1.0 {
        return Ok(clip.clone());
    }
    let out_len = (clip.len() as f64 / factor).round() as usize;
    let samples = audio::stretch_by_rate(clip, 1.0 / factor, out_len);
    AudioClip::new(samples, clip.sample_rate_hz())
}

/// Adds `noise` to `signal` scaled so the realized signal-to-noise energy
/// ratio equals `snr_db` exactly.
pub fn mix_noise(signal: &AudioClip, noise: &AudioClip, snr_db: f64) -> Result<AudioClip> {
    mix_noise_with(signal, noise, snr_db, SnrConvention::Exact)
}

pub fn mix_noise_with(
    signal: &AudioClip,
    noise: &AudioClip,
    snr_db: f64,
    convention: SnrConvention,
) -> Result<AudioClip> {
    if signal.len() != noise.len() {
        return Err(Error::InvalidArgument(format!(
            "signal ({}) and noise ({}) lengths differ",
            signal.len(),
            noise.len()
        )));
    }
    if signal.sample_rate_hz() != noise.sample_rate_hz() {
        return Err(Error::InvalidArgument("signal and noise sample rates differ".into()));
    }
    let sig_norm = signal.energy().sqrt();
    let noise_norm = noise.energy().sqrt();
    if noise_norm == 0.0 {
        return Err(Error::InvalidArgument("noise has zero energy".into()));
    }
    if sig_norm == 0.0 {
        return Err(Error::InvalidArgument("signal has zero energy".into()));
    }
    let a = convention.gain(sig_norm, noise_norm, snr_db);
    let samples = signal
        .samples()
        .iter()
        .zip(noise.samples())
        .map(|(x, n)| x + a * n)
        .collect();
    AudioClip::new(samples, signal.sample_rate_hz())
}

/// Convolves the clip with an impulse response, truncating the full linear
/// convolution to the input length. If the result overflows [-1, 1] it is
/// scaled back so the peak sits at 1.
pub fn add_reverb(clip: &AudioClip, ir: &ImpulseResponse) -> Result<AudioClip> {
    if clip.sample_rate_hz() != ir.sample_rate_hz() {
        return Err(Error::InvalidArgument("clip and impulse response rates differ".into()));
    }
    if clip.is_empty() {
        return Ok(clip.clone());
    }
    let mut out = convolve_truncated(clip.samples(), ir.taps());
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 1.0 {
        for v in &mut out {
            *v /= peak;
        }
    }
    AudioClip::new(out, clip.sample_rate_hz())
}

// Direct convolution for short kernels, FFT overlap for long ones.
fn convolve_truncated(x: &[f64], h: &[f64]) -> Vec<f64> {
    if h.len() <= 128 {
        let mut out = vec![0.0; x.len()];
        for (j, &tap) in h.iter().enumerate() {
            if tap == 0.0 {
                continue;
            }
            for i in 0..x.len().saturating_sub(j) {
                out[i + j] += x[i] * tap;
            }
        }
        return out;
    }

    let full = x.len() + h.len() - 1;
    let n = full.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);

    let mut fx: Vec<Complex<f64>> =
        x.iter().map(|&v| Complex::new(v, 0.0)).chain(std::iter::repeat_n(Complex::new(0.0, 0.0), n - x.len())).collect();
    let mut fh: Vec<Complex<f64>> =
        h.iter().map(|&v| Complex::new(v, 0.0)).chain(std::iter::repeat_n(Complex::new(0.0, 0.0), n - h.len())).collect();
    fft.process(&mut fx);
    fft.process(&mut fh);
    for (a, b) in fx.iter_mut().zip(&fh) {
        *a *= b;
    }
    ifft.process(&mut fx);
    fx.iter().take(x.len()).map(|c| c.re / n as f64).collect()
}

/// Fills whole rows (frequency masks) or columns (time masks) with `fill`,
/// leaving every other cell untouched. Masks must be in bounds.
pub fn spec_mask(
    spec: &LogMelSpectrogram,
    masks: &[MaskSpec],
    fill: f64,
) -> Result<LogMelSpectrogram> {
    for m in masks {
        let limit = match m.axis {
            MaskAxis::Time => spec.n_frames(),
            MaskAxis::Frequency => spec.n_mels(),
        };
        if m.start > limit || m.start + m.width > limit {
            return Err(Error::InvalidArgument(format!(
                "mask [{}, {}) exceeds axis length {limit}",
                m.start,
                m.start + m.width
            )));
        }
    }
    let n_frames = spec.n_frames();
    let n_mels = spec.n_mels();
    let mut out = spec.clone();
    let values = out.values_mut();
    for m in masks {
        match m.axis {
            MaskAxis::Time => {
                for band in 0..n_mels {
                    for t in m.start..m.start + m.width {
                        values[band * n_frames + t] = fill;
                    }
                }
            }
            MaskAxis::Frequency => {
                for band in m.start..m.start + m.width {
                    for t in 0..n_frames {
                        values[band * n_frames + t] = fill;
                    }
                }
            }
        }
    }
    LogMelSpectrogram::from_values(n_mels, n_frames, out.values().to_vec())
}

/// Draws the noise placements for one scene without applying them.
///
/// Zero-energy pool entries are skipped. Noises longer than the signal are
/// randomly cropped to its length (offset 0); shorter ones are placed whole
/// at a random offset so they fit.
pub fn draw_scene(
    signal_len: usize,
    pool: &[AudioClip],
    policy: &ScenePolicy,
    rng: &mut impl Rng,
) -> Result<Vec<NoiseMix>> {
    let usable: Vec<&AudioClip> =
        pool.iter().filter(|c| !c.is_empty() && c.energy() > 0.0).collect();
    if usable.is_empty() {
        return Err(Error::InvalidArgument("noise pool has no usable (non-silent) clips".into()));
    }
    let (lo, hi) = policy.n_noises;
    if lo == 0 || lo > hi {
        return Err(Error::InvalidArgument("invalid noise-count range".into()));
    }
    let k = rng.random_range(lo..=hi);
    let mut mixes = Vec::with_capacity(k);
    for _ in 0..k {
        let src = usable[rng.random_range(0..usable.len())];
        let (noise, offset) = if src.len() > signal_len {
            let start = rng.random_range(0..=src.len() - signal_len);
            let clip = AudioClip::new(
                src.samples()[start..start + signal_len].to_vec(),
                src.sample_rate_hz(),
            )?;
            (clip, 0)
        } else {
            (src.clone(), rng.random_range(0..=signal_len - src.len()))
        };
        let snr_db = if policy.snr_db.0 == policy.snr_db.1 {
            policy.snr_db.0
        } else {
            rng.random_range(policy.snr_db.0..=policy.snr_db.1)
        };
        mixes.push(NoiseMix { snr_db, noise, insert_offset: offset });
    }
    Ok(mixes)
}

/// Applies drawn noise placements: each noise is zero-padded into position,
/// scaled against the clean signal for its own SNR, and summed in.
pub fn apply_scene(
    signal: &AudioClip,
    mixes: &[NoiseMix],
    convention: SnrConvention,
) -> Result<AudioClip> {
    let sig_norm = signal.energy().sqrt();
    if sig_norm == 0.0 {
        return Err(Error::InvalidArgument("signal has zero energy".into()));
    }
    let mut out = signal.samples().to_vec();
    for mix in mixes {
        if mix.insert_offset + mix.noise.len() > signal.len() {
            return Err(Error::InvalidArgument(format!(
                "noise of {} samples at offset {} does not fit in {}",
                mix.noise.len(),
                mix.insert_offset,
                signal.len()
            )));
        }
        let noise_norm = mix.noise.energy().sqrt();
        if noise_norm == 0.0 {
            return Err(Error::InvalidArgument("scene contains a zero-energy noise".into()));
        }
        let a = convention.gain(sig_norm, noise_norm, mix.snr_db);
        for (i, &n) in mix.noise.samples().iter().enumerate() {
            out[mix.insert_offset + i] += a * n;
        }
    }
    AudioClip::new(out, signal.sample_rate_hz())
}

/// Overlays two to three (per `policy`) independently scaled noise segments
/// on the signal. Deterministic for a fixed RNG stream.
pub fn compose_noisy_scene(
    signal: &AudioClip,
    pool: &[AudioClip],
    policy: &ScenePolicy,
    rng: &mut impl Rng,
) -> Result<AudioClip> {
    let mixes = draw_scene(signal.len(), pool, policy, rng)?;
    apply_scene(signal, &mixes, policy.convention)
}

/// Tiles or randomly crops a noise clip to exactly `len` samples, for mixes
/// that need full-length noise.
pub fn fit_noise_to_len(noise: &AudioClip, len: usize, rng: &mut impl Rng) -> Result<AudioClip> {
    if noise.is_empty() {
        return Err(Error::InvalidArgument("noise clip is empty".into()));
    }
    let samples = if noise.len() >= len {
        let start = if noise.len() == len { 0 } else { rng.random_range(0..=noise.len() - len) };
        noise.samples()[start..start + len].to_vec()
    } else {
        audio::tile_to(noise.samples(), len)
    };
    AudioClip::new(samples, noise.sample_rate_hz())
}

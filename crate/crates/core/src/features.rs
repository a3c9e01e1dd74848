//! Log-mel spectrogram front end.
//!
//! A 5 s / 16 kHz clip is framed with a periodic Hann window of 512 samples
//! and a hop of 400, passed through a 512-point power spectrum, projected
//! onto 128 triangular mel filters whose weights are divided by the band
//! width in Hz, and log-compressed. The result is a 128 x 199 map.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Analysis window length in samples.
pub const WIN_LENGTH: usize = 512;
/// Hop between consecutive frames in samples.
pub const HOP_LENGTH: usize = 400;
/// Number of mel bands.
pub const N_MELS: usize = 128;
/// Power floor applied before the log, so silent input stays finite.
pub const POWER_FLOOR: f64 = 1e-10;
/// Frames produced by an 80 000-sample clip: floor((80000-512)/400)+1.
pub const CANONICAL_FRAMES: usize = 199;

/// Log value representing zero signal power: ln(POWER_FLOOR).
pub fn log_floor() -> f64 {
    POWER_FLOOR.ln()
}

pub fn hz_to_mel(f_hz: f64) -> f64 {
    2595.0 * (1.0 + f_hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10.0f64.powf(mel / 2595.0) - 1.0)
}

/// Periodic Hann window: w[k] = 0.5 (1 - cos(2 pi k / n)).
pub fn hann_window(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("window length must be at least 1".into()));
    }
    Ok((0..n).map(|k| 0.5 * (1.0 - (2.0 * PI * k as f64 / n as f64).cos())).collect())
}

/// Slices a clip into Hann-windowed frames of `win` samples every `hop`
/// samples, with no padding: n_frames = floor((L - win)/hop) + 1. Returns
/// the frames as a flat row-major `n_frames x win` buffer.
pub fn frame_signal(clip: &AudioClip, win: usize, hop: usize) -> Result<(Vec<f64>, usize)> {
    if win == 0 || hop == 0 {
        return Err(Error::InvalidArgument("window and hop must be positive".into()));
    }
    let len = clip.len();
    if len < win {
        return Err(Error::InvalidArgument(format!(
            "clip of {len} samples is shorter than the {win}-sample window"
        )));
    }
    let window = hann_window(win)?;
    let n_frames = (len - win) / hop + 1;
    let samples = clip.samples();
    let mut frames = Vec::with_capacity(n_frames * win);
    for f in 0..n_frames {
        let start = f * hop;
        frames.extend(samples[start..start + win].iter().zip(&window).map(|(s, w)| s * w));
    }
    Ok((frames, n_frames))
}

/// Triangular mel filterbank with band-width normalization.
///
/// Rows are `n_mels x (n_fft/2 + 1)` weights; each triangle spans three
/// consecutive mel-spaced edge frequencies and is divided by half its base
/// width in Hz, so wide high-frequency bands do not dominate.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    n_mels: usize,
    n_bins: usize,
    sample_rate_hz: u32,
    weights: Vec<f64>,
    band_edges_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate_hz: u32, f_min: f64, f_max: f64) -> Result<Self> {
        if n_mels == 0 || n_fft == 0 {
            return Err(Error::InvalidArgument("n_mels and n_fft must be positive".into()));
        }
        let nyquist = sample_rate_hz as f64 / 2.0;
        if !(0.0..nyquist).contains(&f_min) || f_max <= f_min {
            return Err(Error::InvalidArgument("need 0 <= f_min < f_max".into()));
        }
        if f_max > nyquist {
            return Err(Error::InvalidArgument(format!(
                "f_max {f_max} Hz exceeds the Nyquist frequency {nyquist} Hz"
            )));
        }

        let mel_lo = hz_to_mel(f_min);
        let mel_hi = hz_to_mel(f_max);
        let band_edges_hz: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
            .collect();

        let n_bins = n_fft / 2 + 1;
        let bin_hz = sample_rate_hz as f64 / n_fft as f64;
        let mut weights = vec![0.0; n_mels * n_bins];
        for m in 0..n_mels {
            let lower = band_edges_hz[m];
            let center = band_edges_hz[m + 1];
            let upper = band_edges_hz[m + 2];
            let norm = 2.0 / (upper - lower);
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let tri = if f > lower && f < center {
                    (f - lower) / (center - lower)
                } else if (f - center).abs() < 1e-12 {
                    1.0
                } else if f > center && f < upper {
                    (upper - f) / (upper - center)
                } else {
                    0.0
                };
                weights[m * n_bins + k] = tri * norm;
            }
        }
        Ok(Self { n_mels, n_bins, sample_rate_hz, weights, band_edges_hz })
    }

    /// Filterbank used throughout: 128 bands over 0..8000 Hz at 16 kHz.
    pub fn canonical() -> Self {
        Self::new(N_MELS, WIN_LENGTH, 16_000, 0.0, 8000.0)
            .expect("canonical filterbank parameters are valid")
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    /// Mel-spaced edge frequencies in Hz; `n_mels + 2` entries.
    pub fn band_edges_hz(&self) -> &[f64] {
        &self.band_edges_hz
    }

    /// Center frequency of band `m` in Hz.
    pub fn band_center_hz(&self, m: usize) -> f64 {
        self.band_edges_hz[m + 1]
    }
}

/// 128 x T log-power map, row-major by mel band. Natural-log scale with the
/// floor of [`POWER_FLOOR`] applied before the log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMelSpectrogram {
    n_mels: usize,
    n_frames: usize,
    values: Vec<f64>,
}

impl LogMelSpectrogram {
    pub fn from_values(n_mels: usize, n_frames: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_mels * n_frames {
            return Err(Error::Shape(format!(
                "expected {} values for a {n_mels} x {n_frames} spectrogram, got {}",
                n_mels * n_frames,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("spectrogram contains non-finite values".into()));
        }
        Ok(Self { n_mels, n_frames, values })
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn value(&self, band: usize, frame: usize) -> f64 {
        self.values[band * self.n_frames + frame]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Frame rate in Hz (frames per second of audio).
    pub fn frame_rate_hz(&self, sample_rate_hz: u32) -> f64 {
        sample_rate_hz as f64 / HOP_LENGTH as f64
    }

    /// Writes the fixture dump format: two little-endian u32 (n_mels,
    /// n_frames) followed by row-major f32 values.
    pub fn dump(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)
            .map_err(|e| Error::File { path: path.to_path_buf(), source: e })?;
        f.write_all(&(self.n_mels as u32).to_le_bytes())?;
        f.write_all(&(self.n_frames as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for &v in &self.values {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        f.write_all(&buf)?;
        Ok(())
    }

    /// Reads the dump format written by [`LogMelSpectrogram::dump`].
    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path)
            .map_err(|e| Error::File { path: path.to_path_buf(), source: e })?;
        let mut header = [0u8; 8];
        f.read_exact(&mut header).map_err(|_| {
            Error::Decode(format!("{}: truncated spectrogram header", path.display()))
        })?;
        let n_mels = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
        let n_frames = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let mut payload = Vec::new();
        f.read_to_end(&mut payload)?;
        if payload.len() != n_mels * n_frames * 4 {
            return Err(Error::Decode(format!(
                "{}: expected {} payload bytes, got {}",
                path.display(),
                n_mels * n_frames * 4,
                payload.len()
            )));
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Self::from_values(n_mels, n_frames, values)
    }
}

/// Full front end: frame, 512-point power spectrum, mel projection,
/// natural log with the power floor.
pub fn log_mel(clip: &AudioClip, fb: &MelFilterbank) -> Result<LogMelSpectrogram> {
    if clip.sample_rate_hz() != fb.sample_rate_hz() {
        return Err(Error::InvalidArgument(format!(
            "clip rate {} Hz does not match filterbank rate {} Hz",
            clip.sample_rate_hz(),
            fb.sample_rate_hz()
        )));
    }
    let (frames, n_frames) = frame_signal(clip, WIN_LENGTH, HOP_LENGTH)?;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(WIN_LENGTH);
    let n_bins = fb.n_bins();
    let mut power = vec![0.0f64; n_bins];
    let mut buf = vec![Complex::new(0.0f64, 0.0); WIN_LENGTH];
    let mut values = vec![0.0; fb.n_mels() * n_frames];

    for t in 0..n_frames {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(frames[t * WIN_LENGTH + i], 0.0);
        }
        fft.process(&mut buf);
        for (k, p) in power.iter_mut().enumerate() {
            *p = buf[k].norm_sqr();
        }
        for m in 0..fb.n_mels() {
            let row = fb.row(m);
            let e: f64 = row.iter().zip(&power).map(|(w, p)| w * p).sum();
            values[m * n_frames + t] = e.max(POWER_FLOOR).ln();
        }
    }
    LogMelSpectrogram::from_values(fb.n_mels(), n_frames, values)
}

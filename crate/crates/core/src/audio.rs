//! WAV ingestion and canonicalization.
//!
//! Everything downstream works on [`AudioClip`]s that have been normalized
//! to single-channel float amplitude and, for model input, fitted to the
//! canonical 5 s / 16 kHz unit (80 000 samples).

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

/// Sample rate every clip is resampled to before feature extraction.
pub const CANONICAL_RATE_HZ: u32 = 16_000;
/// Duration of one model input unit, in seconds.
pub const CANONICAL_SECONDS: f64 = 5.0;
/// Samples per model input unit (5 s at 16 kHz).
pub const CANONICAL_SAMPLES: usize = 80_000;

/// Mono waveform with its sample rate. Amplitudes are dimensionless with a
/// nominal range of [-1, 1]; integer PCM is scaled on read.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioClip {
    /// Builds a clip, rejecting non-finite samples and a zero sample rate.
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("clip contains non-finite samples".into()));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Sum of squared amplitudes.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    /// Root-mean-square amplitude; 0 for an empty clip.
    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            (self.energy() / self.samples.len() as f64).sqrt()
        }
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Half-open sample range `[start, end)` inside a clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Extracts the segment's samples as a new clip.
    pub fn slice(&self, clip: &AudioClip) -> Result<AudioClip> {
        if self.start >= self.end || self.end > clip.len() {
            return Err(Error::InvalidArgument(format!(
                "segment [{}, {}) out of bounds for clip of {} samples",
                self.start,
                self.end,
                clip.len()
            )));
        }
        AudioClip::new(clip.samples[self.start..self.end].to_vec(), clip.sample_rate_hz)
    }
}

/// Reads a PCM WAV file (8/16/24/32-bit integer or 32-bit float) into a
/// normalized mono clip. Multichannel input is averaged across channels.
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Decode(format!("{}: zero channels", path.display())));
    }

    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(Error::UnsupportedFormat(format!(
                    "{}: {}-bit float WAV not supported",
                    path.display(),
                    spec.bits_per_sample
                )));
            }
            reader
                .into_samples::<f32>()
                .map(|s| s.map(|v| v as f64))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound(path, e))?
        }
        hound::SampleFormat::Int => {
            let bits = spec.bits_per_sample;
            if !(1..=32).contains(&bits) {
                return Err(Error::UnsupportedFormat(format!(
                    "{}: {}-bit integer WAV not supported",
                    path.display(),
                    bits
                )));
            }
            // Full-scale for b-bit signed PCM is 2^(b-1).
            let scale = 1.0 / f64::from(1u32 << (bits - 1));
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound(path, e))?
        }
    };

    let frames = interleaved.len() / channels;
    let mut mono = Vec::with_capacity(frames);
    for f in 0..frames {
        let sum: f64 = interleaved[f * channels..(f + 1) * channels].iter().sum();
        mono.push(sum / channels as f64);
    }
    AudioClip::new(mono, spec.sample_rate)
}

fn map_hound(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::Unsupported => {
            Error::UnsupportedFormat(format!("{}: unsupported WAV encoding", path.display()))
        }
        hound::Error::IoError(io) => Error::File { path: path.to_path_buf(), source: io },
        other => Error::Decode(format!("{}: {}", path.display(), other)),
    }
}

/// Writes a clip as 16-bit PCM WAV, clamping to [-1, 1].
pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)
        .map_err(|e| Error::Data(format!("{}: {}", path.display(), e)))?;
    for &s in clip.samples() {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer
            .write_sample(v)
            .map_err(|e| Error::Data(format!("{}: {}", path.display(), e)))?;
    }
    writer
        .finalize()
        .map_err(|e| Error::Data(format!("{}: {}", path.display(), e)))?;
    Ok(())
}

/// Band-limited resampling to a new rate. Equal rates return the clip
/// unchanged; otherwise a windowed-sinc interpolator is evaluated at the
/// resampled grid, with the cutoff lowered for downsampling so content
/// below the output Nyquist survives intact.
pub fn resample(clip: &AudioClip, target_rate_hz: u32) -> Result<AudioClip> {
    if target_rate_hz == 0 {
        return Err(Error::InvalidArgument("target sample rate must be positive".into()));
    }
    if target_rate_hz == clip.sample_rate_hz || clip.is_empty() {
        return Ok(AudioClip { samples: clip.samples.clone(), sample_rate_hz: target_rate_hz });
    }
    let ratio = target_rate_hz as f64 / clip.sample_rate_hz as f64;
    let out_len = (clip.len() as f64 * ratio).round() as usize;
    let samples = sinc_resample(&clip.samples, ratio, out_len);
    AudioClip::new(samples, target_rate_hz)
}

/// Changes duration by `1/ratio` while keeping the nominal sample rate,
/// shifting pitch by `ratio`. Used by speed perturbation.
pub(crate) fn stretch_by_rate(clip: &AudioClip, ratio: f64, out_len: usize) -> Vec<f64> {
    sinc_resample(&clip.samples, ratio, out_len)
}

// Taps per side of the sinc kernel at unit cutoff.
const SINC_HALF_TAPS: f64 = 32.0;

fn sinc_resample(input: &[f64], ratio: f64, out_len: usize) -> Vec<f64> {
    if input.is_empty() || out_len == 0 {
        return Vec::new();
    }
    let cutoff = ratio.min(1.0); // fraction of the input Nyquist to keep
    let half_width = (SINC_HALF_TAPS / cutoff).ceil();
    let mut out = Vec::with_capacity(out_len);
    for j in 0..out_len {
        let center = j as f64 / ratio;
        let k_lo = ((center - half_width).ceil() as i64).max(0) as usize;
        let k_hi = ((center + half_width).floor() as i64).min(input.len() as i64 - 1) as usize;
        let mut acc = 0.0;
        let mut norm = 0.0;
        for k in k_lo..=k_hi {
            let d = k as f64 - center;
            let w = cutoff * sinc(cutoff * d) * blackman(d / half_width);
            acc += input[k] * w;
            norm += w;
        }
        // Normalizing by the kernel sum keeps unity gain at the edges where
        // the window is truncated.
        out.push(if norm.abs() > 1e-12 { acc / norm } else { 0.0 });
    }
    out
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn blackman(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        0.42 + 0.5 * (PI * u).cos() + 0.08 * (2.0 * PI * u).cos()
    }
}

/// Returns the maximal runs of consecutive frames whose RMS level is at or
/// above `energy_threshold_db` (dBFS, i.e. 20·log10 of RMS amplitude).
/// Frames are non-overlapping windows of `frame_len` samples; a partial
/// tail frame is judged on its actual samples. Segments are sorted,
/// non-overlapping, and frame-aligned with the end clamped to the clip.
pub fn remove_silence(
    clip: &AudioClip,
    frame_len: usize,
    energy_threshold_db: f64,
) -> Result<Vec<Segment>> {
    if frame_len == 0 {
        return Err(Error::InvalidArgument("frame_len must be at least 1".into()));
    }
    let n = clip.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let n_frames = n.div_ceil(frame_len);
    let mut segments = Vec::new();
    let mut run_start: Option<usize> = None;
    for f in 0..n_frames {
        let lo = f * frame_len;
        let hi = (lo + frame_len).min(n);
        let energy: f64 = clip.samples[lo..hi].iter().map(|s| s * s).sum();
        let rms = (energy / (hi - lo) as f64).sqrt();
        let db = if rms > 0.0 { 20.0 * rms.log10() } else { f64::NEG_INFINITY };
        if db >= energy_threshold_db {
            run_start.get_or_insert(lo);
        } else if let Some(start) = run_start.take() {
            segments.push(Segment { start, end: lo });
        }
    }
    if let Some(start) = run_start {
        segments.push(Segment { start, end: n });
    }
    Ok(segments)
}

/// Cuts and tiles clips into units of exactly `target_seconds` at `rate`.
///
/// Long inputs are split into consecutive full-length chunks; a final
/// remainder of at least half the target is tiled up to full length, a
/// shorter one is dropped. Inputs below the target are tiled
/// (self-concatenated) and truncated.
pub fn fit_to_duration(
    clips: &[AudioClip],
    target_seconds: f64,
    rate: u32,
) -> Result<Vec<AudioClip>> {
    if target_seconds <= 0.0 || rate == 0 {
        return Err(Error::InvalidArgument("target duration and rate must be positive".into()));
    }
    let target = (target_seconds * rate as f64).round() as usize;
    let mut out = Vec::new();
    for clip in clips {
        if clip.is_empty() {
            return Err(Error::InvalidArgument("cannot fit an empty clip".into()));
        }
        if clip.sample_rate_hz != rate {
            return Err(Error::InvalidArgument(format!(
                "clip rate {} Hz does not match target rate {} Hz",
                clip.sample_rate_hz, rate
            )));
        }
        let s = &clip.samples;
        if s.len() < target {
            out.push(AudioClip { samples: tile_to(s, target), sample_rate_hz: rate });
            continue;
        }
        let full_chunks = s.len() / target;
        for c in 0..full_chunks {
            out.push(AudioClip {
                samples: s[c * target..(c + 1) * target].to_vec(),
                sample_rate_hz: rate,
            });
        }
        let rem = &s[full_chunks * target..];
        if rem.len() * 2 >= target {
            out.push(AudioClip { samples: tile_to(rem, target), sample_rate_hz: rate });
        }
    }
    Ok(out)
}

/// Repeats `samples` until `target` samples are available, then truncates.
pub(crate) fn tile_to(samples: &[f64], target: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(target);
    while out.len() < target {
        let take = (target - out.len()).min(samples.len());
        out.extend_from_slice(&samples[..take]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tone(freq: f64, rate: u32, len: usize) -> AudioClip {
        let samples = (0..len)
            .map(|i| (2.0 * PI * freq * i as f64 / rate as f64).sin())
            .collect();
        AudioClip::new(samples, rate).unwrap()
    }

    /// Frequency of the strongest FFT bin, via a plain DFT over a power-of-two
    /// prefix. Independent of the resampler under test.
    fn dominant_freq_hz(clip: &AudioClip) -> f64 {
        let n = 1usize << (usize::BITS - 1 - clip.len().leading_zeros());
        let mut best = (0usize, f64::MIN);
        for k in 1..n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &s) in clip.samples()[..n].iter().enumerate() {
                let ph = -2.0 * PI * (k * i) as f64 / n as f64;
                re += s * ph.cos();
                im += s * ph.sin();
            }
            let mag = re * re + im * im;
            if mag > best.1 {
                best = (k, mag);
            }
        }
        best.0 as f64 * clip.sample_rate_hz() as f64 / n as f64
    }

    #[test]
    fn read_wav_scales_16bit_full_scale() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("full.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(32767i16).unwrap();
        w.write_sample(-32768i16).unwrap();
        w.finalize().unwrap();

        let clip = read_wav(&path).unwrap();
        assert!((clip.samples()[0] - 32767.0 / 32768.0).abs() < 1e-12);
        assert!((clip.samples()[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn read_wav_zero_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zeros.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for _ in 0..160 {
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();

        let clip = read_wav(&path).unwrap();
        assert_eq!(clip.len(), 160);
        assert!(clip.samples().iter().all(|&s| s == 0.0));
        assert_eq!(clip.sample_rate_hz(), 16_000);
    }

    #[test]
    fn read_wav_averages_stereo() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 16_000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for _ in 0..10 {
            w.write_sample(0.2f32).unwrap();
            w.write_sample(0.4f32).unwrap();
        }
        w.finalize().unwrap();

        let clip = read_wav(&path).unwrap();
        assert_eq!(clip.len(), 10);
        for &s in clip.samples() {
            assert!((s - 0.3).abs() < 1e-7);
        }
    }

    #[test]
    fn read_wav_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.wav");
        std::fs::write(&path, b"not a wav file at all").unwrap();
        assert!(matches!(read_wav(&path), Err(Error::Decode(_))));
    }

    #[test]
    fn resample_identity_at_same_rate() {
        let clip = tone(440.0, 16_000, 1600);
        let out = resample(&clip, 16_000).unwrap();
        assert_eq!(out, clip);
    }

    #[test]
    fn resample_halves_length() {
        let clip = tone(440.0, 32_000, 80_000);
        let out = resample(&clip, 16_000).unwrap();
        assert_eq!(out.len(), 40_000);
        assert_eq!(out.sample_rate_hz(), 16_000);
    }

    #[test]
    fn resample_preserves_tone_frequency() {
        let clip = tone(440.0, 32_000, 16_384);
        let out = resample(&clip, 16_000).unwrap();
        let bin_width = 16_000.0 / 8192.0; // post-resample DFT resolution
        let got = dominant_freq_hz(&out);
        assert!(
            (got - 440.0).abs() <= bin_width + 1e-9,
            "expected ~440 Hz, got {got}"
        );
    }

    #[test]
    fn resample_rejects_zero_rate() {
        let clip = tone(440.0, 16_000, 160);
        assert!(matches!(resample(&clip, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn silence_all_zero_clip() {
        let clip = AudioClip::new(vec![0.0; 4000], 16_000).unwrap();
        assert!(remove_silence(&clip, 400, -40.0).unwrap().is_empty());
    }

    #[test]
    fn silence_uniform_loud_clip() {
        let clip = AudioClip::new(vec![1.0; 4000], 16_000).unwrap();
        let segs = remove_silence(&clip, 400, -40.0).unwrap();
        assert_eq!(segs, vec![Segment { start: 0, end: 4000 }]);
    }

    #[test]
    fn silence_extracts_middle_burst() {
        let mut samples = vec![0.0; 4000];
        samples.extend(std::iter::repeat_n(0.5, 4000));
        samples.extend(std::iter::repeat_n(0.0, 4000));
        let clip = AudioClip::new(samples, 16_000).unwrap();
        let segs = remove_silence(&clip, 400, -40.0).unwrap();
        assert_eq!(segs, vec![Segment { start: 4000, end: 8000 }]);
    }

    #[test]
    fn silence_empty_clip_is_not_an_error() {
        let clip = AudioClip::new(Vec::new(), 16_000).unwrap();
        assert!(remove_silence(&clip, 400, -40.0).unwrap().is_empty());
    }

    #[test]
    fn fit_identity_for_exact_clip() {
        let clip = tone(440.0, 16_000, CANONICAL_SAMPLES);
        let out = fit_to_duration(std::slice::from_ref(&clip), 5.0, 16_000).unwrap();
        assert_eq!(out, vec![clip]);
    }

    #[test]
    fn fit_splits_and_tiles_long_clip() {
        // 12.5 s: two full 5 s chunks plus a 2.5 s tail that is tiled.
        let clip = AudioClip::new((0..200_000).map(|i| (i % 97) as f64 / 97.0).collect(), 16_000)
            .unwrap();
        let out = fit_to_duration(&[clip.clone()], 5.0, 16_000).unwrap();
        assert_eq!(out.len(), 3);
        for c in &out {
            assert_eq!(c.len(), CANONICAL_SAMPLES);
        }
        assert_eq!(out[0].samples(), &clip.samples()[..80_000]);
        assert_eq!(out[1].samples(), &clip.samples()[80_000..160_000]);
        let tail = &clip.samples()[160_000..];
        assert_eq!(&out[2].samples()[..40_000], tail);
        assert_eq!(&out[2].samples()[40_000..], tail);
    }

    #[test]
    fn fit_tiles_short_clip() {
        let clip = AudioClip::new((0..32_000).map(|i| (i as f64).sin()).collect(), 16_000).unwrap();
        let out = fit_to_duration(&[clip.clone()], 5.0, 16_000).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].len(), CANONICAL_SAMPLES);
        assert_eq!(&out[0].samples()[32_000..64_000], clip.samples());
    }

    #[test]
    fn fit_drops_sub_half_remainder() {
        // 6 s: one full chunk, 1 s remainder (< 2.5 s) dropped.
        let clip = AudioClip::new(vec![0.25; 96_000], 16_000).unwrap();
        let out = fit_to_duration(&[clip], 5.0, 16_000).unwrap();
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn fit_empty_list_gives_empty_output() {
        assert!(fit_to_duration(&[], 5.0, 16_000).unwrap().is_empty());
    }

    #[test]
    fn fit_rejects_empty_clip() {
        let clip = AudioClip::new(Vec::new(), 16_000).unwrap();
        assert!(matches!(
            fit_to_duration(&[clip], 5.0, 16_000),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn down_up_roundtrip_keeps_tone_peak() {
        let clip = tone(440.0, 16_000, 16_384);
        let up = resample(&clip, 32_000).unwrap();
        let back = resample(&up, 16_000).unwrap();
        let bin_width = 16_000.0 / 8192.0;
        assert!((dominant_freq_hz(&back) - 440.0).abs() <= bin_width + 1e-9);
    }

    proptest! {
        #[test]
        fn fit_outputs_are_always_canonical(len in 40_001usize..220_000) {
            let clip = AudioClip::new((0..len).map(|i| ((i * 31) % 101) as f64 / 101.0).collect(), 16_000).unwrap();
            let out = fit_to_duration(&[clip], 5.0, 16_000).unwrap();
            for c in out {
                prop_assert_eq!(c.len(), CANONICAL_SAMPLES);
            }
        }

        #[test]
        fn trailing_silence_never_adds_segments(
            n_frames in 1usize..24,
            pad_frames in 1usize..8,
            seed in 0u64..1000,
        ) {
            // Frame-aligned content so appended zero frames cannot shift
            // existing frame boundaries.
            let frame = 400usize;
            let mut samples = Vec::with_capacity(n_frames * frame);
            let mut state = seed;
            for f in 0..n_frames {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let loud = state % 2 == 0;
                let amp = if loud { 0.5 } else { 0.0 };
                samples.extend(std::iter::repeat_n(amp, frame));
                let _ = f;
            }
            let clip = AudioClip::new(samples.clone(), 16_000).unwrap();
            let base = remove_silence(&clip, frame, -40.0).unwrap();

            samples.extend(std::iter::repeat_n(0.0, pad_frames * frame));
            let padded = AudioClip::new(samples, 16_000).unwrap();
            let with_pad = remove_silence(&padded, frame, -40.0).unwrap();
            prop_assert_eq!(base, with_pad);
        }
    }
}

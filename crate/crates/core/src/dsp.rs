//! Sampled-signal type and numeric primitives shared by every other module:
//! cross-correlation, time reversal, band-limited fractional delay, white
//! noise injection, power measurement and uniform time scaling.
//!
//! Everything here operates on real-valued passband signals. All operations
//! are pure functions of their inputs; randomized ones take an explicit
//! [`RngStream`] so that results are replayable.

use std::cell::RefCell;
use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Width of the windowed-sinc interpolation kernel, in taps.
///
/// Delay jitter in the channel model is sub-sample at 96 kHz, so fractional
/// delays must be band-limited interpolations rather than nearest-sample
/// shifts. 64 Blackman-windowed taps keep interior energy error below 0.01%
/// for content up to 0.45 of the sample rate.
const INTERP_TAPS: usize = 64;

/// Fractional parts closer to an integer than this are treated as exact
/// integer-sample shifts.
const INTEGER_DELAY_EPS: f64 = 1e-9;

/// Number of quantized fractional phases in the resampling kernel table.
const RESAMPLE_PHASES: usize = 1024;

/// A uniformly sampled real-valued waveform.
///
/// The universal currency of the simulator: carriers, probes, whole frames,
/// received captures and equalizer outputs are all `SampledSignal`s.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl SampledSignal {
    /// Build a signal, validating the invariants: positive sample rate,
    /// non-empty, all samples finite.
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::InvalidSignal(format!(
                "sample rate must be positive and finite, got {sample_rate}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::InvalidSignal("empty sample buffer".into()));
        }
        if let Some(idx) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidSignal(format!(
                "non-finite sample {} at index {idx}",
                samples[idx]
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds: `len / sample_rate`.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    /// Pointwise scaling by a constant.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.samples.iter().map(|s| s * factor).collect(),
            self.sample_rate,
        )
    }
}

fn check_rates(a: &SampledSignal, b: &SampledSignal) -> Result<()> {
    if a.sample_rate != b.sample_rate {
        return Err(Error::SampleRateMismatch {
            left: a.sample_rate,
            right: b.sample_rate,
        });
    }
    Ok(())
}

/// Descriptor for a reproducible, independent random stream.
///
/// Identical `(seed, stream_id)` pairs always yield identical draw sequences;
/// distinct stream ids give statistically independent streams. Operations
/// take the descriptor by value and instantiate the generator internally, so
/// they stay pure functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    pub fn with_stream(self, stream_id: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Materialize the generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

thread_local! {
    static FFT_PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Linear convolution, direct for small kernels, FFT otherwise.
fn convolve_raw(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 256 || out_len <= 1024 {
        let mut out = vec![0.0; out_len];
        // iterate over the shorter side for cache friendliness
        let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        for (i, &s) in short.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for (j, &l) in long.iter().enumerate() {
                out[i + j] += s * l;
            }
        }
        return out;
    }

    let n = out_len.next_power_of_two();
    let mut fa: Vec<Complex<f64>> = a.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fa.resize(n, Complex::new(0.0, 0.0));
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fb.resize(n, Complex::new(0.0, 0.0));
    FFT_PLANNER.with(|planner| {
        let mut planner = planner.borrow_mut();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        fwd.process(&mut fa);
        fwd.process(&mut fb);
        for (x, y) in fa.iter_mut().zip(fb.iter()) {
            *x *= *y;
        }
        inv.process(&mut fa);
    });
    let scale = 1.0 / n as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Full cross-correlation `r[k] = sum_n a[n] * b[n - k]` over every
/// overlapping lag.
///
/// The output has `len(a) + len(b) - 1` entries; output index `i` holds lag
/// `k = i - (len(b) - 1)`, so the zero-lag term sits at index
/// [`cross_correlation_zero_lag`]`(len(b))`. Note the identity
/// `cross_correlate(a, time_reverse(b)) == convolve(a, b)` index for index.
pub fn cross_correlate(a: &SampledSignal, b: &SampledSignal) -> Result<SampledSignal> {
    check_rates(a, b)?;
    let b_rev: Vec<f64> = b.samples.iter().rev().copied().collect();
    SampledSignal::new(convolve_raw(&a.samples, &b_rev), a.sample_rate)
}

/// Index of the zero-lag term in a [`cross_correlate`] output, given the
/// length of the second argument.
pub fn cross_correlation_zero_lag(b_len: usize) -> usize {
    b_len - 1
}

/// Samples in reverse order, same rate.
pub fn time_reverse(a: &SampledSignal) -> SampledSignal {
    SampledSignal {
        samples: a.samples.iter().rev().copied().collect(),
        sample_rate: a.sample_rate,
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Blackman window evaluated at continuous offset `s` from the kernel
/// center, support `[-INTERP_TAPS/2, INTERP_TAPS/2]`.
fn blackman(s: f64) -> f64 {
    let half = INTERP_TAPS as f64 / 2.0;
    if s < -half || s > half {
        return 0.0;
    }
    let x = (s + half) / INTERP_TAPS as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    0.42 - 0.5 * (two_pi * x).cos() + 0.08 * (2.0 * two_pi * x).cos()
}

/// Interpolation kernel for a given fractional offset in [0, 1):
/// tap `j` (j = -31..=32) evaluates `sinc(j - frac) * blackman(j - frac)`.
fn frac_kernel(frac: f64) -> [f64; INTERP_TAPS] {
    let mut taps = [0.0; INTERP_TAPS];
    let half = INTERP_TAPS as i64 / 2;
    for (idx, tap) in taps.iter_mut().enumerate() {
        let j = idx as i64 - (half - 1);
        let s = j as f64 - frac;
        *tap = sinc(s) * blackman(s);
    }
    taps
}

/// Delay a signal by `delay_s` seconds.
///
/// Integer-sample delays are exact zero-filled shifts; fractional delays use
/// band-limited (windowed-sinc) interpolation. Output length is
/// `len + ceil(delay_samples)`.
pub fn fractional_delay(a: &SampledSignal, delay_s: f64) -> Result<SampledSignal> {
    if !(delay_s >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delay must be non-negative, got {delay_s} s"
        )));
    }
    let delay_samples = delay_s * a.sample_rate;
    let n0 = delay_samples.floor();
    let frac = delay_samples - n0;

    if frac < INTEGER_DELAY_EPS || frac > 1.0 - INTEGER_DELAY_EPS {
        let shift = if frac > 0.5 { n0 + 1.0 } else { n0 } as usize;
        let mut out = vec![0.0; shift + a.len()];
        out[shift..].copy_from_slice(&a.samples);
        return SampledSignal::new(out, a.sample_rate);
    }

    let shift = n0 as usize;
    let out_len = a.len() + delay_samples.ceil() as usize;
    let mut out = vec![0.0; out_len];
    let kernel = frac_kernel(frac);
    let half = INTERP_TAPS as i64 / 2;
    // y[m] = sum_j kernel[j] * x[m - shift - j]
    for (m, o) in out.iter_mut().enumerate() {
        let base = m as i64 - shift as i64;
        let mut acc = 0.0;
        for (idx, &c) in kernel.iter().enumerate() {
            let j = idx as i64 - (half - 1);
            let src = base - j;
            if src >= 0 && (src as usize) < a.len() {
                acc += c * a.samples[src as usize];
            }
        }
        *o = acc;
    }
    SampledSignal::new(out, a.sample_rate)
}

/// Add zero-mean white Gaussian noise at the given SNR.
///
/// Noise variance is `reference_power / 10^(snr_db / 10)`. Deterministic for
/// a fixed [`RngStream`].
pub fn add_awgn(
    a: &SampledSignal,
    snr_db: f64,
    reference_power: f64,
    rng: RngStream,
) -> Result<SampledSignal> {
    if !(reference_power > 0.0) || !reference_power.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "reference power must be positive, got {reference_power}"
        )));
    }
    let variance = reference_power / 10f64.powf(snr_db / 10.0);
    let sigma = variance.sqrt();
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidArgument(format!("noise distribution: {e}")))?;
    let mut gen = rng.rng();
    let samples = a
        .samples
        .iter()
        .map(|&s| s + normal.sample(&mut gen))
        .collect();
    SampledSignal::new(samples, a.sample_rate)
}

/// Mean of squared samples over a window.
pub fn measure_power(a: &SampledSignal, window: Range<usize>) -> Result<f64> {
    if window.is_empty() {
        return Err(Error::InvalidArgument("empty power window".into()));
    }
    if window.end > a.len() {
        return Err(Error::InvalidArgument(format!(
            "power window {}..{} exceeds signal length {}",
            window.start,
            window.end,
            a.len()
        )));
    }
    let len = window.len();
    let sum: f64 = a.samples[window].iter().map(|s| s * s).sum();
    Ok(sum / len as f64)
}

/// Polyphase kernel table for resampling: RESAMPLE_PHASES quantized
/// fractional offsets.
fn resample_table() -> &'static Vec<[f64; INTERP_TAPS]> {
    use std::sync::OnceLock;
    static TABLE: OnceLock<Vec<[f64; INTERP_TAPS]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..RESAMPLE_PHASES)
            .map(|p| frac_kernel(p as f64 / RESAMPLE_PHASES as f64))
            .collect()
    })
}

/// Uniform time scaling: output sample `m` is the band-limited evaluation of
/// the input at position `m * factor` samples.
///
/// `factor > 1` compresses (shorter output, e.g. an approaching source);
/// `factor < 1` expands. Used for Doppler and for the receiver's
/// synchronization-side inverse.
pub fn resample_time_scale(a: &SampledSignal, factor: f64) -> Result<SampledSignal> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "time-scale factor must be positive, got {factor}"
        )));
    }
    if (factor - 1.0).abs() < 1e-15 {
        return Ok(a.clone());
    }
    let out_len = ((a.len() - 1) as f64 / factor).floor() as usize + 1;
    let table = resample_table();
    let half = INTERP_TAPS as i64 / 2;
    let mut out = vec![0.0; out_len];
    for (m, o) in out.iter_mut().enumerate() {
        let pos = m as f64 * factor;
        let mut base = pos.floor() as i64;
        let frac = pos - base as f64;
        let mut phase = (frac * RESAMPLE_PHASES as f64).round() as usize;
        if phase == RESAMPLE_PHASES {
            // fractional part rounded up to the next integer sample
            phase = 0;
            base += 1;
        }
        let kernel = &table[phase];
        let mut acc = 0.0;
        // x(base + frac) = sum_j x[base + j] * sinc(j - frac) * w(j - frac)
        for (idx, &c) in kernel.iter().enumerate() {
            let j = idx as i64 - (half - 1);
            let src = base + j;
            if src >= 0 && (src as usize) < a.len() {
                acc += c * a.samples[src as usize];
            }
        }
        *o = acc;
    }
    SampledSignal::new(out, a.sample_rate)
}

/// Normalized inner product of two equal-length slices:
/// `dot(a,b) / sqrt(dot(a,a) * dot(b,b))`.
pub fn normalized_correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "normalized_correlation length mismatch");
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let ea: f64 = a.iter().map(|x| x * x).sum();
    let eb: f64 = b.iter().map(|x| x * x).sum();
    if ea == 0.0 || eb == 0.0 {
        return 0.0;
    }
    dot / (ea * eb).sqrt()
}

//! Carrier construction: cosine and linear-FM chirp carriers, splitting a
//! chirp at its amplitude peaks into sub-waveforms, and assembly of the
//! QPSK and 4/8/16-ary inter-displacement (CWID) carrier alphabets.
//!
//! A CWID alphabet takes one base chirp per initial phase, cuts it where the
//! instantaneous phase returns to its initial value (for a zero-phase chirp
//! these are exactly the +1 amplitude peaks), and re-orders the four pieces
//! with a Latin-square permutation table so that no piece ever occupies the
//! same position in two different carriers. The cut amplitudes are equal on
//! both sides of every join, so reorganized carriers stay continuous.

use std::f64::consts::PI;
use std::io::Write;
use std::ops::Range;

use crate::dsp::{cross_correlate, SampledSignal};
use crate::error::{Error, Result};

/// Number of samples spanned by a duration, rounding half up.
///
/// This is the fixed rounding rule for every duration-to-samples conversion
/// in the simulator (symbol periods, guards, frame segments).
pub fn duration_to_samples(duration_s: f64, sample_rate: f64) -> usize {
    (duration_s * sample_rate + 0.5).floor() as usize
}

/// Parameters of a linear-FM chirp carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LfmSpec {
    /// Sweep start frequency, Hz.
    pub f_start: f64,
    /// Sweep end frequency, Hz.
    pub f_end: f64,
    /// Symbol period, seconds.
    pub duration: f64,
    /// Initial phase, radians.
    pub initial_phase: f64,
    /// Sample rate, Hz.
    pub sample_rate: f64,
}

impl LfmSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_start > 0.0 && self.f_end > self.f_start) {
            return Err(Error::InvalidArgument(format!(
                "chirp band must satisfy 0 < f_start < f_end, got {}..{} Hz",
                self.f_start, self.f_end
            )));
        }
        if self.f_end >= self.sample_rate / 2.0 {
            return Err(Error::InvalidArgument(format!(
                "chirp end frequency {} Hz aliases at sample rate {} Hz",
                self.f_end, self.sample_rate
            )));
        }
        if !(self.duration > 0.0) {
            return Err(Error::InvalidArgument(
                "chirp duration must be positive".into(),
            ));
        }
        if !self.initial_phase.is_finite() {
            return Err(Error::InvalidArgument(
                "chirp initial phase must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Sweep rate (f_end - f_start) / duration, Hz per second.
    pub fn sweep_rate(&self) -> f64 {
        (self.f_end - self.f_start) / self.duration
    }

    /// Elapsed carrier cycles at time `t`: `f_start*t + sweep_rate*t^2/2`.
    pub fn cycles_at(&self, t: f64) -> f64 {
        self.f_start * t + 0.5 * self.sweep_rate() * t * t
    }

    /// Total instantaneous phase at time `t`, radians.
    pub fn phase_at(&self, t: f64) -> f64 {
        self.initial_phase + 2.0 * PI * self.cycles_at(t)
    }

    /// Samples in one carrier period.
    pub fn sample_count(&self) -> usize {
        duration_to_samples(self.duration, self.sample_rate)
    }

    pub fn with_phase(&self, initial_phase: f64) -> Self {
        Self {
            initial_phase,
            ..*self
        }
    }
}

/// Unit-amplitude cosine carrier: `cos(2*pi*freq*t + initial_phase)`.
pub fn cosine_carrier(
    freq: f64,
    initial_phase: f64,
    duration: f64,
    sample_rate: f64,
) -> Result<SampledSignal> {
    if !(freq > 0.0 && freq < sample_rate / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "cosine frequency {freq} Hz outside (0, {}) Hz",
            sample_rate / 2.0
        )));
    }
    if !(duration > 0.0) {
        return Err(Error::InvalidArgument(
            "carrier duration must be positive".into(),
        ));
    }
    let n = duration_to_samples(duration, sample_rate);
    let samples = (0..n)
        .map(|i| (2.0 * PI * freq * i as f64 / sample_rate + initial_phase).cos())
        .collect();
    SampledSignal::new(samples, sample_rate)
}

/// Unit-amplitude linear-FM chirp: `cos(phase_at(t))`.
pub fn lfm(spec: &LfmSpec) -> Result<SampledSignal> {
    spec.validate()?;
    let n = spec.sample_count();
    let samples = (0..n)
        .map(|i| spec.phase_at(i as f64 / spec.sample_rate).cos())
        .collect();
    SampledSignal::new(samples, spec.sample_rate)
}

/// Result of splitting a carrier at its interior phase-return instants.
///
/// `segments` partition the sampled carrier; `boundary_values` are the
/// analytic amplitudes at the interior split instants (for a zero-phase
/// chirp these sit on the +1 peaks). `start_value`/`end_value` are the
/// amplitudes at the outer edges of the first and last segment, evaluated
/// the same way, so a reorganized carrier can be checked for continuity at
/// every join.
#[derive(Debug, Clone, PartialEq)]
pub struct SubWaveformSplit {
    segments: Vec<Range<usize>>,
    boundary_values: Vec<f64>,
    start_value: f64,
    end_value: f64,
}

impl SubWaveformSplit {
    pub fn segments(&self) -> &[Range<usize>] {
        &self.segments
    }

    pub fn boundary_values(&self) -> &[f64] {
        &self.boundary_values
    }

    /// Analytic amplitude at the left edge of segment `i`.
    pub fn segment_start_value(&self, i: usize) -> f64 {
        if i == 0 {
            self.start_value
        } else {
            self.boundary_values[i - 1]
        }
    }

    /// Analytic amplitude at the right edge of segment `i`.
    pub fn segment_end_value(&self, i: usize) -> f64 {
        if i == self.segments.len() - 1 {
            self.end_value
        } else {
            self.boundary_values[i]
        }
    }
}

/// Split a chirp carrier into `target_segments` pieces at the interior
/// instants where its analytic phase has advanced by whole cycles, i.e.
/// where the waveform returns to its initial amplitude (the +1 peaks for a
/// zero-phase chirp).
///
/// The split instants are found from the analytic phase, not from a numeric
/// maximum search on samples. If the carrier holds more interior split
/// points than needed, the first `target_segments - 1` are used and the
/// last segment extends to the carrier end; fewer is an error naming the
/// count found. Each cut lands on the first sample at or after its instant.
pub fn split_at_peaks(spec: &LfmSpec, target_segments: usize) -> Result<SubWaveformSplit> {
    spec.validate()?;
    if target_segments < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 segments, got {target_segments}"
        )));
    }
    let n = spec.sample_count();
    let needed = target_segments - 1;

    // cycles_at(t) = m  =>  0.5*k*t^2 + f_start*t - m = 0
    let k = spec.sweep_rate();
    let crossing_instant = |m: usize| -> f64 {
        let m = m as f64;
        (-spec.f_start + (spec.f_start * spec.f_start + 2.0 * k * m).sqrt()) / k
    };

    let mut cut_instants = Vec::new();
    let mut cut_samples: Vec<usize> = Vec::new();
    let mut m = 1;
    loop {
        let t = crossing_instant(m);
        if t >= spec.duration {
            break;
        }
        let s = (t * spec.sample_rate).ceil() as usize;
        // usable only if it leaves a non-empty segment on both sides
        if s > 0 && s < n && cut_samples.last().map_or(true, |&prev| s > prev) {
            cut_instants.push(t);
            cut_samples.push(s);
        }
        if cut_samples.len() == needed {
            break;
        }
        m += 1;
    }

    if cut_samples.len() < needed {
        return Err(Error::InsufficientPeaks {
            found: cut_samples.len(),
            needed,
        });
    }

    let mut segments = Vec::with_capacity(target_segments);
    let mut start = 0;
    for &s in &cut_samples {
        segments.push(start..s);
        start = s;
    }
    segments.push(start..n);

    let boundary_values = cut_instants
        .iter()
        .map(|&t| spec.phase_at(t).cos())
        .collect();
    let start_value = spec.phase_at(0.0).cos();
    // The last segment closes at the next phase-return instant when one
    // exists inside the nominal duration, else at the carrier end.
    let t_close = crossing_instant(target_segments);
    let end_value = if t_close <= spec.duration {
        spec.phase_at(t_close).cos()
    } else {
        spec.phase_at(spec.duration).cos()
    };

    Ok(SubWaveformSplit {
        segments,
        boundary_values,
        start_value,
        end_value,
    })
}

/// Reorganization table for the four sub-waveforms (0-based piece indices).
///
/// Row order matches the symbol labels 00, 01, 10, 11. Each column holds
/// every piece exactly once (Latin square), so the same piece never appears
/// in the same place of two different carriers.
pub const SUBWAVE_ORDER: [[usize; 4]; 4] = [
    [0, 1, 2, 3],
    [1, 3, 0, 2],
    [2, 0, 3, 1],
    [3, 2, 1, 0],
];

/// Base chirp initial phases used by each CWID alphabet order.
pub fn cwid_base_phases(order: usize) -> Result<Vec<f64>> {
    match order {
        4 => Ok(vec![0.0]),
        8 => Ok(vec![0.0, PI]),
        16 => Ok(vec![0.0, PI / 2.0, PI, 3.0 * PI / 2.0]),
        _ => Err(Error::InvalidArgument(format!(
            "unsupported CWID order {order} (expected 4, 8 or 16)"
        ))),
    }
}

/// Bit labels of the base phases, in `cwid_base_phases` order.
///
/// The four phases of the 16-ary alphabet are Gray-labelled the same way
/// as the QPSK phase table.
fn phase_bit_labels(order: usize) -> Vec<u16> {
    match order {
        8 => vec![0b0, 0b1],
        16 => vec![0b00, 0b01, 0b11, 0b10],
        _ => vec![0b0],
    }
}

/// An ordered set of symbol carrier waveforms plus the symbol-to-bit-pattern
/// mapping.
#[derive(Debug, Clone)]
pub struct CarrierAlphabet {
    scheme_name: String,
    bits_per_symbol: usize,
    carriers: Vec<SampledSignal>,
    bit_map: Vec<u16>,
    pattern_to_symbol: Vec<usize>,
}

impl CarrierAlphabet {
    fn build(
        scheme_name: impl Into<String>,
        carriers: Vec<SampledSignal>,
        bit_map: Vec<u16>,
    ) -> Result<Self> {
        let order = carriers.len();
        if order < 2 || !order.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "alphabet order {order} is not a power of two >= 2"
            )));
        }
        let bits_per_symbol = order.trailing_zeros() as usize;
        if bit_map.len() != order {
            return Err(Error::InvalidArgument("bit map size mismatch".into()));
        }
        let len = carriers[0].len();
        let rate = carriers[0].sample_rate();
        for c in &carriers {
            if c.len() != len || c.sample_rate() != rate {
                return Err(Error::InvalidArgument(
                    "alphabet carriers must share length and sample rate".into(),
                ));
            }
        }
        let mut pattern_to_symbol = vec![usize::MAX; order];
        for (sym, &pat) in bit_map.iter().enumerate() {
            let slot = pattern_to_symbol
                .get_mut(pat as usize)
                .ok_or_else(|| Error::InvalidArgument(format!("bit pattern {pat:b} too wide")))?;
            if *slot != usize::MAX {
                return Err(Error::InvalidArgument(format!(
                    "bit pattern {pat:b} mapped twice"
                )));
            }
            *slot = sym;
        }
        Ok(Self {
            scheme_name: scheme_name.into(),
            bits_per_symbol,
            carriers,
            bit_map,
            pattern_to_symbol,
        })
    }

    pub fn scheme_name(&self) -> &str {
        &self.scheme_name
    }

    pub fn order(&self) -> usize {
        self.carriers.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn carriers(&self) -> &[SampledSignal] {
        &self.carriers
    }

    pub fn carrier(&self, symbol: usize) -> &SampledSignal {
        &self.carriers[symbol]
    }

    /// Samples per symbol period.
    pub fn symbol_length(&self) -> usize {
        self.carriers[0].len()
    }

    pub fn sample_rate(&self) -> f64 {
        self.carriers[0].sample_rate()
    }

    /// Bit pattern of a symbol, MSB first.
    pub fn pattern(&self, symbol: usize) -> u16 {
        self.bit_map[symbol]
    }

    pub fn pattern_string(&self, symbol: usize) -> String {
        format!(
            "{:0width$b}",
            self.bit_map[symbol],
            width = self.bits_per_symbol
        )
    }

    pub fn symbol_for_pattern(&self, pattern: u16) -> usize {
        self.pattern_to_symbol[pattern as usize]
    }

    /// Bits of a symbol, MSB first.
    pub fn symbol_bits(&self, symbol: usize) -> Vec<bool> {
        let pat = self.bit_map[symbol];
        (0..self.bits_per_symbol)
            .rev()
            .map(|i| (pat >> i) & 1 == 1)
            .collect()
    }

    /// Symbol index for a group of `bits_per_symbol` bits, MSB first.
    pub fn bits_to_symbol(&self, bits: &[bool]) -> usize {
        debug_assert_eq!(bits.len(), self.bits_per_symbol);
        let pattern = bits.iter().fold(0u16, |acc, &b| (acc << 1) | b as u16);
        self.symbol_for_pattern(pattern)
    }
}

/// Carrier family used by a QPSK alphabet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QpskCarrier {
    Cosine { freq_hz: f64 },
    Lfm { f_start_hz: f64, f_end_hz: f64 },
}

/// Four carriers with initial phases {0, pi/2, pi, 3pi/2} mapped to symbols
/// {00, 01, 11, 10}: Gray coding over the phase circle.
pub fn build_qpsk_alphabet(
    kind: QpskCarrier,
    symbol_period_s: f64,
    sample_rate: f64,
) -> Result<CarrierAlphabet> {
    const PHASES: [f64; 4] = [0.0, PI / 2.0, PI, 3.0 * PI / 2.0];
    const PATTERNS: [u16; 4] = [0b00, 0b01, 0b11, 0b10];
    let mut carriers = Vec::with_capacity(4);
    for &phase in &PHASES {
        let carrier = match kind {
            QpskCarrier::Cosine { freq_hz } => {
                cosine_carrier(freq_hz, phase, symbol_period_s, sample_rate)?
            }
            QpskCarrier::Lfm {
                f_start_hz,
                f_end_hz,
            } => lfm(&LfmSpec {
                f_start: f_start_hz,
                f_end: f_end_hz,
                duration: symbol_period_s,
                initial_phase: phase,
                sample_rate,
            })?,
        };
        carriers.push(carrier);
    }
    let name = match kind {
        QpskCarrier::Cosine { .. } => "cosine-qpsk",
        QpskCarrier::Lfm { .. } => "lfm-qpsk",
    };
    CarrierAlphabet::build(name, carriers, PATTERNS.to_vec())
}

/// Build a 4-, 8- or 16-ary CWID alphabet from a base chirp template.
///
/// Each base phase contributes four carriers: the base chirp is split into
/// four sub-waveforms and re-ordered with every row of [`SUBWAVE_ORDER`].
/// Symbol bit patterns are the phase label (high bits, absent for order 4)
/// followed by the permutation row label (low two bits). Carriers are not
/// re-normalized: re-ordering preserves the sample multiset, hence the
/// energy.
pub fn build_cwid_alphabet(order: usize, base: &LfmSpec) -> Result<CarrierAlphabet> {
    let phases = cwid_base_phases(order)?;
    let phase_labels = phase_bit_labels(order);
    let mut carriers = Vec::with_capacity(order);
    let mut bit_map = Vec::with_capacity(order);
    for (phase_idx, &phase) in phases.iter().enumerate() {
        let spec = base.with_phase(phase);
        let chirp = lfm(&spec)?;
        let split = split_at_peaks(&spec, 4)?;
        for (row, perm) in SUBWAVE_ORDER.iter().enumerate() {
            let mut samples = Vec::with_capacity(chirp.len());
            for &piece in perm {
                samples.extend_from_slice(&chirp.samples()[split.segments()[piece].clone()]);
            }
            carriers.push(SampledSignal::new(samples, spec.sample_rate)?);
            bit_map.push((phase_labels[phase_idx] << 2) | row as u16);
        }
    }
    CarrierAlphabet::build(format!("cwid-{order}"), carriers, bit_map)
}

/// Matrix of normalized peak cross-correlations between alphabet carriers:
/// entry (i, j) is `max_lags |xcorr(c_i, c_j)| / sqrt(E_i * E_j)`.
pub fn carrier_separation(alphabet: &CarrierAlphabet) -> Result<Vec<Vec<f64>>> {
    let n = alphabet.order();
    let energies: Vec<f64> = alphabet.carriers().iter().map(|c| c.energy()).collect();
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let r = cross_correlate(alphabet.carrier(i), alphabet.carrier(j))?;
            let peak = r.samples().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            matrix[i][j] = peak / (energies[i] * energies[j]).sqrt();
        }
    }
    Ok(matrix)
}

/// Write an alphabet as CSV: one carrier per column, header row with the
/// symbol bit patterns.
pub fn write_alphabet_csv(alphabet: &CarrierAlphabet, out: &mut impl Write) -> Result<()> {
    let header: Vec<String> = (0..alphabet.order())
        .map(|s| alphabet.pattern_string(s))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for row in 0..alphabet.symbol_length() {
        let line: Vec<String> = alphabet
            .carriers()
            .iter()
            .map(|c| c.samples()[row].to_string())
            .collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

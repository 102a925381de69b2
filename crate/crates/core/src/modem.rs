//! Bits to waveform and back: frame assembly around a probe chirp, symbol
//! modulation from a carrier alphabet, and matched-filter demodulation of
//! the equalized stream.
//!
//! A frame is `probe | guard | data | guard`; the guards are silence long
//! enough for multipath arrivals to clear. The demodulator correlates every
//! symbol slot against every alphabet carrier inside a small lag window
//! around the nominal slot position and picks the reference with the
//! largest signed peak.

use std::io::Write;

use crate::dsp::SampledSignal;
use crate::error::{Error, Result};
use crate::ptrm::EqualizedStream;
use crate::waveforms::{duration_to_samples, CarrierAlphabet};

/// Frame timing: probe, guards, data region and symbol period.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLayout {
    /// Probe duration Tp, seconds.
    pub probe_s: f64,
    /// Guard after the probe T1, seconds.
    pub guard_after_probe_s: f64,
    /// Data region duration Ts, seconds.
    pub data_s: f64,
    /// Guard after the data T2, seconds (must equal T1).
    pub guard_after_data_s: f64,
    /// Symbol period T, seconds.
    pub symbol_s: f64,
    /// Sample rate, Hz.
    pub sample_rate: f64,
}

impl FrameLayout {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("probe_s", self.probe_s),
            ("guard_after_probe_s", self.guard_after_probe_s),
            ("data_s", self.data_s),
            ("guard_after_data_s", self.guard_after_data_s),
            ("symbol_s", self.symbol_s),
            ("sample_rate", self.sample_rate),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "layout field {name} must be positive, got {v}"
                )));
            }
        }
        let rel = (self.guard_after_data_s - self.guard_after_probe_s).abs()
            / self.guard_after_probe_s;
        if rel > 1e-12 {
            return Err(Error::InvalidArgument(
                "trailing guard must equal the leading guard".into(),
            ));
        }
        if self.symbols_per_frame() < 1 {
            return Err(Error::InvalidArgument(
                "data region shorter than one symbol".into(),
            ));
        }
        Ok(())
    }

    /// Symbols that fit in the data region: `floor(Ts / T)`.
    pub fn symbols_per_frame(&self) -> usize {
        (self.data_s / self.symbol_s + 1e-9).floor() as usize
    }

    /// Nominal frame duration Tp + T1 + Ts + T2, seconds.
    pub fn frame_duration_s(&self) -> f64 {
        self.probe_s + self.guard_after_probe_s + self.data_s + self.guard_after_data_s
    }

    pub fn probe_len(&self) -> usize {
        duration_to_samples(self.probe_s, self.sample_rate)
    }

    pub fn guard_after_probe_len(&self) -> usize {
        duration_to_samples(self.guard_after_probe_s, self.sample_rate)
    }

    pub fn data_len(&self) -> usize {
        duration_to_samples(self.data_s, self.sample_rate)
    }

    pub fn guard_after_data_len(&self) -> usize {
        duration_to_samples(self.guard_after_data_s, self.sample_rate)
    }

    pub fn symbol_len(&self) -> usize {
        duration_to_samples(self.symbol_s, self.sample_rate)
    }

    /// Sample offset of the data region inside the frame.
    pub fn data_start(&self) -> usize {
        self.probe_len() + self.guard_after_probe_len()
    }

    /// Receiver probe window: probe plus its guard tail (captures the
    /// multipath arrivals of the probe).
    pub fn probe_window_len(&self) -> usize {
        self.data_start()
    }

    /// Receiver data window: data region plus its guard tail.
    pub fn data_window_len(&self) -> usize {
        self.data_len() + self.guard_after_data_len()
    }

    /// Frame length in samples: the per-segment sample counts summed.
    pub fn frame_len(&self) -> usize {
        self.data_start() + self.data_len() + self.guard_after_data_len()
    }
}

/// Effective bit rate of a scheme under a frame layout:
/// `symbols_per_frame * bits_per_symbol / (Tp + T1 + Ts + T2)`.
pub fn effective_bit_rate(bits_per_symbol: usize, layout: &FrameLayout) -> f64 {
    layout.symbols_per_frame() as f64 * bits_per_symbol as f64 / layout.frame_duration_s()
}

/// One assembled transmit frame.
#[derive(Debug, Clone)]
pub struct Frame {
    pub layout: FrameLayout,
    pub probe: SampledSignal,
    /// Bits carried by this frame, including any zero padding.
    pub payload_bits: Vec<bool>,
    /// Count of zero bits appended to fill the last symbol (final frame
    /// only); never silently hidden.
    pub padding_bits: usize,
    pub waveform: SampledSignal,
}

impl Frame {
    pub fn symbol_count(&self) -> usize {
        self.payload_bits.len() / (self.payload_bits.len() / self.symbol_count_raw()).max(1)
    }

    fn symbol_count_raw(&self) -> usize {
        self.payload_bits.len()
    }
}

/// Chunk bits into symbols, emit each symbol's carrier for one period, and
/// assemble probe/guard/data frames. Bits beyond one frame's capacity spill
/// into further frames; a trailing partial symbol is zero-padded and the
/// padding recorded on the last frame.
pub fn modulate(
    bits: &[bool],
    alphabet: &CarrierAlphabet,
    layout: &FrameLayout,
    probe: &SampledSignal,
) -> Result<Vec<Frame>> {
    layout.validate()?;
    if bits.is_empty() {
        return Err(Error::InvalidArgument("no bits to modulate".into()));
    }
    if probe.len() != layout.probe_len() {
        return Err(Error::InvalidArgument(format!(
            "probe length {} does not match layout probe duration ({} samples)",
            probe.len(),
            layout.probe_len()
        )));
    }
    if probe.sample_rate() != layout.sample_rate
        || alphabet.sample_rate() != layout.sample_rate
    {
        return Err(Error::SampleRateMismatch {
            left: probe.sample_rate(),
            right: layout.sample_rate,
        });
    }
    if alphabet.symbol_length() != layout.symbol_len() {
        return Err(Error::InvalidArgument(format!(
            "alphabet symbol length {} does not match layout symbol period ({} samples)",
            alphabet.symbol_length(),
            layout.symbol_len()
        )));
    }

    let bps = alphabet.bits_per_symbol();
    let padding = (bps - bits.len() % bps) % bps;
    let mut padded = bits.to_vec();
    padded.extend(std::iter::repeat(false).take(padding));
    let symbols: Vec<usize> = padded
        .chunks(bps)
        .map(|chunk| alphabet.bits_to_symbol(chunk))
        .collect();

    let spf = layout.symbols_per_frame();
    let symbol_len = layout.symbol_len();
    let data_start = layout.data_start();
    let frame_len = layout.frame_len();
    let n_frames = symbols.len().div_ceil(spf);

    let mut frames = Vec::with_capacity(n_frames);
    for (frame_idx, frame_symbols) in symbols.chunks(spf).enumerate() {
        let mut samples = vec![0.0; frame_len];
        samples[..probe.len()].copy_from_slice(probe.samples());
        for (k, &sym) in frame_symbols.iter().enumerate() {
            let at = data_start + k * symbol_len;
            samples[at..at + symbol_len].copy_from_slice(alphabet.carrier(sym).samples());
        }
        let is_last = frame_idx == n_frames - 1;
        let bit_start = frame_idx * spf * bps;
        let bit_end = (bit_start + frame_symbols.len() * bps).min(padded.len());
        frames.push(Frame {
            layout: layout.clone(),
            probe: probe.clone(),
            payload_bits: padded[bit_start..bit_end].to_vec(),
            padding_bits: if is_last { padding } else { 0 },
            waveform: SampledSignal::new(samples, layout.sample_rate)?,
        });
    }
    Ok(frames)
}

/// One demodulation decision with its evidence.
#[derive(Debug, Clone)]
pub struct DemodDecision {
    pub symbol_index: usize,
    /// Winning symbol (alphabet index).
    pub chosen_symbol: usize,
    /// Signed correlation of every reference at the slot position.
    pub correlation_peaks: Vec<f64>,
    /// Set when the decision came down to a tie or a non-positive peak.
    pub low_confidence: bool,
}

/// Matched-filter demodulation of `n_symbols` slots from an equalized
/// stream.
///
/// Each slot is scored by its signed correlation against every reference
/// carrier at the nominal slot position and decided for the largest score.
/// The equalization chain cancels path delays identically in the probe and
/// data windows and the receiver is granted ideal synchronization, so slots
/// land exactly on their nominal positions; searching nearby lags would
/// only alias between phase-shifted references (a one-sample shift of an
/// 11.5 kHz carrier is already a quarter turn of phase). Exact ties break
/// deterministically toward the lowest symbol index; the signed (not
/// absolute) score is what separates antipodal carriers.
pub fn demodulate(
    eq: &EqualizedStream,
    alphabet: &CarrierAlphabet,
    n_symbols: usize,
) -> Result<(Vec<bool>, Vec<DemodDecision>)> {
    if alphabet.symbol_length() != eq.symbol_length {
        return Err(Error::InvalidArgument(format!(
            "alphabet symbol length {} vs equalized stream slot length {}",
            alphabet.symbol_length(),
            eq.symbol_length
        )));
    }
    let sig = eq.signal.samples();
    let slot_len = eq.symbol_length;

    let mut bits = Vec::with_capacity(n_symbols * alphabet.bits_per_symbol());
    let mut decisions = Vec::with_capacity(n_symbols);
    for k in 0..n_symbols {
        let nominal = eq.symbol_start_index + k * slot_len;
        if nominal + slot_len > sig.len() {
            return Err(Error::SlotOutOfRange {
                slot: k,
                need: nominal + slot_len,
                have: sig.len(),
            });
        }
        let slot = &sig[nominal..nominal + slot_len];
        let peaks: Vec<f64> = (0..alphabet.order())
            .map(|sym| {
                slot.iter()
                    .zip(alphabet.carrier(sym).samples())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();

        let mut best_sym = 0;
        let mut best = f64::NEG_INFINITY;
        for (sym, &v) in peaks.iter().enumerate() {
            if v > best {
                best = v;
                best_sym = sym;
            }
        }
        let ties = peaks.iter().filter(|&&v| v == best).count();
        let low_confidence = best <= 0.0 || ties > 1;

        bits.extend(alphabet.symbol_bits(best_sym));
        decisions.push(DemodDecision {
            symbol_index: k,
            chosen_symbol: best_sym,
            correlation_peaks: peaks,
            low_confidence,
        });
    }
    Ok((bits, decisions))
}

/// Decision trace CSV: symbol index, winning pattern, confidence and the
/// per-reference peaks.
pub fn write_decision_csv(
    decisions: &[DemodDecision],
    alphabet: &CarrierAlphabet,
    out: &mut impl Write,
) -> Result<()> {
    let peak_cols: Vec<String> = (0..alphabet.order())
        .map(|s| format!("peak_{}", alphabet.pattern_string(s)))
        .collect();
    writeln!(out, "symbol,choice,low_confidence,{}", peak_cols.join(","))?;
    for d in decisions {
        let peaks: Vec<String> = d.correlation_peaks.iter().map(|p| p.to_string()).collect();
        writeln!(
            out,
            "{},{},{},{}",
            d.symbol_index,
            alphabet.pattern_string(d.chosen_symbol),
            d.low_confidence,
            peaks.join(",")
        )?;
    }
    Ok(())
}

/// Raw sample dump of a waveform, one amplitude per line.
pub fn write_waveform_csv(signal: &SampledSignal, out: &mut impl Write) -> Result<()> {
    writeln!(out, "amplitude")?;
    for s in signal.samples() {
        writeln!(out, "{s}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveforms::{build_cwid_alphabet, build_qpsk_alphabet, lfm, LfmSpec, QpskCarrier};
    use rand::Rng;

    const FS: f64 = 96_000.0;
    const T: f64 = 0.348e-3;

    fn paper_layout() -> FrameLayout {
        FrameLayout {
            probe_s: T,
            guard_after_probe_s: 0.1,
            data_s: 0.25,
            guard_after_data_s: 0.1,
            symbol_s: T,
            sample_rate: FS,
        }
    }

    fn chirp_spec() -> LfmSpec {
        LfmSpec {
            f_start: 5_000.0,
            f_end: 18_000.0,
            duration: T,
            initial_phase: 0.0,
            sample_rate: FS,
        }
    }

    fn probe() -> SampledSignal {
        lfm(&chirp_spec()).unwrap()
    }

    fn clean_stream(frame: &Frame) -> EqualizedStream {
        EqualizedStream {
            signal: frame.waveform.clone(),
            symbol_start_index: frame.layout.data_start(),
            symbol_length: frame.layout.symbol_len(),
        }
    }

    fn random_bits(n: usize, seed: u64) -> Vec<bool> {
        let mut rng = crate::dsp::RngStream::new(seed).rng();
        (0..n).map(|_| rng.gen()).collect()
    }

    #[test]
    fn paper_layout_has_718_symbols_per_frame() {
        assert_eq!(paper_layout().symbols_per_frame(), 718);
    }

    #[test]
    fn frame_duration_is_exact_in_samples() {
        let layout = paper_layout();
        // 33 + 9600 + 24000 + 9600
        assert_eq!(layout.frame_len(), 43_233);
        let a = build_cwid_alphabet(4, &chirp_spec()).unwrap();
        let frames = modulate(&random_bits(100, 1), &a, &layout, &probe()).unwrap();
        assert_eq!(frames[0].waveform.len(), 43_233);
    }

    #[test]
    fn four_thousand_bits_make_three_qpsk_frames() {
        let layout = paper_layout();
        let a = build_qpsk_alphabet(QpskCarrier::Lfm { f_start_hz: 5_000.0, f_end_hz: 18_000.0 }, T, FS)
            .unwrap();
        let frames = modulate(&random_bits(4_000, 2), &a, &layout, &probe()).unwrap();
        assert_eq!(frames.len(), 3);
        let counts: Vec<usize> = frames
            .iter()
            .map(|f| f.payload_bits.len() / a.bits_per_symbol())
            .collect();
        assert_eq!(counts, vec![718, 718, 564]);
        assert_eq!(frames[2].padding_bits, 0);
    }

    #[test]
    fn trailing_partial_symbol_is_padded_and_flagged() {
        let layout = paper_layout();
        let a = build_cwid_alphabet(8, &chirp_spec()).unwrap();
        let frames = modulate(&random_bits(4_000, 3), &a, &layout, &probe()).unwrap();
        // 4000 bits over 3-bit symbols: 1334 symbols, 2 padding bits
        assert_eq!(frames.len(), 2);
        let total_syms: usize = frames
            .iter()
            .map(|f| f.payload_bits.len() / a.bits_per_symbol())
            .sum();
        assert_eq!(total_syms, 1_334);
        assert_eq!(frames.last().unwrap().padding_bits, 2);
        assert_eq!(frames[0].padding_bits, 0);
    }

    #[test]
    fn cwid_symbol_00_data_segment_is_base_chirp() {
        let layout = paper_layout();
        let a = build_cwid_alphabet(4, &chirp_spec()).unwrap();
        let frames = modulate(&[false, false], &a, &layout, &probe()).unwrap();
        let base = lfm(&chirp_spec()).unwrap();
        let at = layout.data_start();
        assert_eq!(
            &frames[0].waveform.samples()[at..at + layout.symbol_len()],
            base.samples()
        );
    }

    #[test]
    fn modulate_rejects_bad_inputs() {
        let layout = paper_layout();
        let a = build_cwid_alphabet(4, &chirp_spec()).unwrap();
        assert!(modulate(&[], &a, &layout, &probe()).is_err());
        let short_probe = SampledSignal::new(vec![1.0; 10], FS).unwrap();
        assert!(modulate(&[true], &a, &layout, &short_probe).is_err());
    }

    #[test]
    fn clean_roundtrip_for_every_alphabet() {
        let layout = paper_layout();
        let alphabets = vec![
            build_qpsk_alphabet(QpskCarrier::Cosine { freq_hz: 11_500.0 }, T, FS).unwrap(),
            build_qpsk_alphabet(QpskCarrier::Lfm { f_start_hz: 5_000.0, f_end_hz: 18_000.0 }, T, FS)
                .unwrap(),
            build_cwid_alphabet(4, &chirp_spec()).unwrap(),
            build_cwid_alphabet(8, &chirp_spec()).unwrap(),
            build_cwid_alphabet(16, &chirp_spec()).unwrap(),
        ];
        for (i, a) in alphabets.iter().enumerate() {
            let bits = random_bits(120, 10 + i as u64);
            let frames = modulate(&bits, a, &layout, &probe()).unwrap();
            let mut got = Vec::new();
            for frame in &frames {
                let eq = clean_stream(frame);
                let n_sym = frame.payload_bits.len() / a.bits_per_symbol();
                let (frame_bits, _) = demodulate(&eq, a, n_sym).unwrap();
                got.extend(frame_bits);
            }
            got.truncate(bits.len());
            assert_eq!(got, bits, "alphabet {}", a.scheme_name());
        }
    }

    #[test]
    fn cosine_antipodal_peaks_are_signed() {
        let layout = paper_layout();
        let a = build_qpsk_alphabet(QpskCarrier::Cosine { freq_hz: 11_500.0 }, T, FS).unwrap();
        // transmit a single phase-0 symbol ("00")
        let frames = modulate(&[false, false], &a, &layout, &probe()).unwrap();
        let eq = clean_stream(&frames[0]);
        let (bits, decisions) = demodulate(&eq, &a, 1).unwrap();
        assert_eq!(bits, vec![false, false]);
        let d = &decisions[0];
        let energy = a.carrier(0).energy();
        // phase-0 reference sees +E, the antipodal phase-pi reference -E
        assert!((d.correlation_peaks[0] - energy).abs() < 1e-9 * energy);
        assert!((d.correlation_peaks[2] + energy).abs() < 1e-9 * energy);
        assert!(!d.low_confidence);
    }

    #[test]
    fn all_zero_slot_breaks_ties_deterministically() {
        let layout = paper_layout();
        let a = build_cwid_alphabet(4, &chirp_spec()).unwrap();
        let eq = EqualizedStream {
            signal: SampledSignal::new(vec![0.0; 2_000], FS).unwrap(),
            symbol_start_index: 100,
            symbol_length: layout.symbol_len(),
        };
        let (bits, decisions) = demodulate(&eq, &a, 2).unwrap();
        assert_eq!(bits, vec![false; 4]);
        for d in &decisions {
            assert_eq!(d.chosen_symbol, 0);
            assert!(d.low_confidence);
            assert!(d.correlation_peaks.iter().all(|p| *p == 0.0));
        }
    }

    #[test]
    fn slot_past_end_is_an_error_naming_the_slot() {
        let a = build_cwid_alphabet(4, &chirp_spec()).unwrap();
        let eq = EqualizedStream {
            signal: SampledSignal::new(vec![0.0; 100], FS).unwrap(),
            symbol_start_index: 0,
            symbol_length: 33,
        };
        match demodulate(&eq, &a, 5) {
            Err(Error::SlotOutOfRange { slot, .. }) => assert_eq!(slot, 3),
            other => panic!("expected SlotOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn decisions_are_invariant_under_positive_scaling() {
        let layout = paper_layout();
        let a = build_cwid_alphabet(16, &chirp_spec()).unwrap();
        let bits = random_bits(80, 77);
        let frames = modulate(&bits, &a, &layout, &probe()).unwrap();
        let n_sym = frames[0].payload_bits.len() / a.bits_per_symbol();
        let base = clean_stream(&frames[0]);
        let (_, base_decisions) = demodulate(&base, &a, n_sym).unwrap();
        for alpha in [1e-3, 42.0, 1e6] {
            let eq = EqualizedStream {
                signal: frames[0].waveform.scaled(alpha).unwrap(),
                ..base.clone()
            };
            let (_, decisions) = demodulate(&eq, &a, n_sym).unwrap();
            for (x, y) in base_decisions.iter().zip(&decisions) {
                assert_eq!(x.chosen_symbol, y.chosen_symbol, "alpha {alpha}");
            }
        }
    }

    #[test]
    fn bit_rates_reproduce_reported_values() {
        let layout = paper_layout();
        for (bps, expect_kbps) in [(2, 3.19), (3, 4.78), (4, 6.38), (1, 1.59)] {
            let rate = effective_bit_rate(bps, &layout) / 1_000.0;
            assert!(
                (rate - expect_kbps).abs() < 0.01,
                "{bps} bits/symbol: {rate} kbit/s vs {expect_kbps}"
            );
        }
    }

    #[test]
    fn padding_roundtrip_single_character() {
        // 8 bits over 3-bit symbols: one padding bit
        let layout = paper_layout();
        let a = build_cwid_alphabet(8, &chirp_spec()).unwrap();
        let bits: Vec<bool> = (0..8).map(|i| (b'A' >> (7 - i)) & 1 == 1).collect();
        let frames = modulate(&bits, &a, &layout, &probe()).unwrap();
        assert_eq!(frames[0].padding_bits, 1);
        let eq = clean_stream(&frames[0]);
        let (got, _) = demodulate(&eq, &a, 3).unwrap();
        assert_eq!(&got[..8], &bits[..]);
    }
}

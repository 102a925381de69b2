//! Passive time-reversal-mirror equalization: window the received frame
//! into probe and data segments, filter the data with the time-reversed
//! received probe, overlay the hydrophone channels, and finish with a
//! clean-probe correlation.
//!
//! Filtering with the time-reversed received probe turns the channel term
//! into its autocorrelation, which approximates an impulse: the multipath
//! delays enter the received probe and the received data identically, so
//! the matched-path contributions of every eigenray pile up at a single
//! lag while cross-path clutter scatters. The final correlation against the
//! clean probe replica then collapses the probe's own dispersion, leaving
//! approximately the transmitted data stream.
//!
//! Index bookkeeping lives entirely in [`finalize`]; see the comment there.

use crate::dsp::{cross_correlate, time_reverse, SampledSignal};
use crate::error::{Error, Result};
use crate::modem::FrameLayout;

/// One array element's received frame.
#[derive(Debug, Clone)]
pub struct HydrophoneCapture {
    pub hydrophone_index: usize,
    pub depth_m: f64,
    pub received: SampledSignal,
}

/// Equalizer output with its symbol indexing.
///
/// Slot `k` of the recovered data stream occupies
/// `symbol_start_index + k*symbol_length ..` for one symbol length.
#[derive(Debug, Clone)]
pub struct EqualizedStream {
    pub signal: SampledSignal,
    pub symbol_start_index: usize,
    pub symbol_length: usize,
}

/// Cut the received frame into the probe window (probe plus its guard
/// tail) and the data window (data region plus its guard tail), under the
/// ideal synchronization the simulation assumes.
pub fn extract_segments(
    capture: &HydrophoneCapture,
    layout: &FrameLayout,
) -> Result<(SampledSignal, SampledSignal)> {
    let probe_window = layout.probe_window_len();
    let data_window = layout.data_window_len();
    let need = probe_window + data_window;
    if capture.received.len() < need {
        return Err(Error::CaptureTooShort {
            have: capture.received.len(),
            need,
        });
    }
    let rate = capture.received.sample_rate();
    let samples = capture.received.samples();
    let probe = SampledSignal::new(samples[..probe_window].to_vec(), rate)?;
    let data = SampledSignal::new(
        samples[probe_window..probe_window + data_window].to_vec(),
        rate,
    )?;
    Ok((probe, data))
}

/// Filter the received data window with the time-reversed received probe.
///
/// Convolving with the reversed probe is index-for-index the plain
/// cross-correlation of the data against the probe, which is how it is
/// computed here. Output length is `len(S) + len(P) - 1`.
pub fn equalize_single(
    received_probe: &SampledSignal,
    received_data: &SampledSignal,
) -> Result<SampledSignal> {
    cross_correlate(received_data, received_probe)
}

/// Element-wise overlay of the per-hydrophone equalizer outputs. The
/// matched-path peaks add coherently across elements while clutter and
/// noise do not.
pub fn combine_hydrophones(streams: &[SampledSignal]) -> Result<SampledSignal> {
    let first = streams
        .first()
        .ok_or_else(|| Error::InvalidArgument("no streams to combine".into()))?;
    let mut acc = first.samples().to_vec();
    for s in &streams[1..] {
        if s.len() != first.len() {
            return Err(Error::InvalidArgument(format!(
                "stream length mismatch: {} vs {}",
                s.len(),
                first.len()
            )));
        }
        if s.sample_rate() != first.sample_rate() {
            return Err(Error::SampleRateMismatch {
                left: s.sample_rate(),
                right: first.sample_rate(),
            });
        }
        for (slot, &v) in acc.iter_mut().zip(s.samples()) {
            *slot += v;
        }
    }
    SampledSignal::new(acc, first.sample_rate())
}

/// Convolve the combined stream with the clean probe replica and fix the
/// symbol indexing.
///
/// Alignment arithmetic, all in one place. Within the frame, the data
/// region starts `W_p = probe_window_len` samples after the probe, and both
/// receiver windows are cut at that same boundary, so a path with delay `d`
/// places the probe at offset `d` of the probe window and symbol `k` at
/// offset `k*L + d` of the data window. The window correlation in
/// [`equalize_single`] differences those offsets (output index
/// `(W_p - 1) + lag`), cancelling `d`, and the closing convolution with the
/// probe replica is symmetric around lag zero. Symbol `k` of the
/// transmitted stream therefore lands at index `(W_p - 1) + k*L` of the
/// output for every path, which is what `symbol_start_index` records.
pub fn finalize(
    combined: &SampledSignal,
    probe_replica: &SampledSignal,
    layout: &FrameLayout,
) -> Result<EqualizedStream> {
    let expected = layout.probe_window_len() + layout.data_window_len() - 1;
    if combined.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "combined stream length {} does not match layout windows ({expected})",
            combined.len()
        )));
    }
    let r = cross_correlate(combined, &time_reverse(probe_replica))?;
    Ok(EqualizedStream {
        signal: r,
        symbol_start_index: layout.probe_window_len() - 1,
        symbol_length: layout.symbol_len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, ChannelRealization, ChannelTap};
    use crate::dsp::{add_awgn, normalized_correlation, RngStream};
    use crate::modem::modulate;
    use crate::waveforms::{build_cwid_alphabet, lfm, LfmSpec};

    const FS: f64 = 96_000.0;
    const T: f64 = 0.348e-3;

    /// Shortened layout for unit tests: real probe/symbol, small guards
    /// and a short data region.
    fn test_layout() -> FrameLayout {
        FrameLayout {
            probe_s: T,
            guard_after_probe_s: 5e-3,
            data_s: 20.0 * T,
            guard_after_data_s: 5e-3,
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

    fn capture_from(signal: SampledSignal) -> HydrophoneCapture {
        HydrophoneCapture {
            hydrophone_index: 0,
            depth_m: 15.0,
            received: signal,
        }
    }

    fn bits(n: usize, seed: u64) -> Vec<bool> {
        use rand::Rng;
        let mut rng = RngStream::new(seed).rng();
        (0..n).map(|_| rng.gen()).collect()
    }

    #[test]
    fn extract_identity_channel_returns_padded_probe() {
        let layout = test_layout();
        let a = build_cwid_alphabet(4, &chirp_spec()).unwrap();
        let frames = modulate(&bits(20, 1), &a, &layout, &probe()).unwrap();
        let (p, s) = extract_segments(&capture_from(frames[0].waveform.clone()), &layout).unwrap();
        assert_eq!(p.len(), layout.probe_window_len());
        assert_eq!(s.len(), layout.data_window_len());
        let probe = probe();
        assert_eq!(&p.samples()[..probe.len()], probe.samples());
        assert!(p.samples()[probe.len()..].iter().all(|&v| v == 0.0));
        // data window starts right at the first symbol
        let first_symbol = a.carrier(a.bits_to_symbol(&bits(20, 1)[..2]));
        assert_eq!(&s.samples()[..first_symbol.len()], first_symbol.samples());
    }

    #[test]
    fn extract_two_tap_channel_shows_probe_copies() {
        let layout = test_layout();
        let a = build_cwid_alphabet(4, &chirp_spec()).unwrap();
        let frames = modulate(&bits(20, 2), &a, &layout, &probe()).unwrap();
        let real = ChannelRealization {
            taps: vec![
                ChannelTap { gain: 1.0, delay_s: 0.0 },
                ChannelTap { gain: 0.5, delay_s: 40.0 / FS },
            ],
            doppler_factor: 1.0,
            frame_id: 0,
        };
        let received = apply_channel(&frames[0].waveform, &real, None).unwrap();
        let (p, _) = extract_segments(&capture_from(received), &layout).unwrap();
        let probe = probe();
        // direct copy at 0..33, scaled copy at 40..73, silence between
        for (i, &v) in probe.samples().iter().enumerate() {
            assert!((p.samples()[i] - v).abs() < 1e-12, "main copy sample {i}");
            assert!(
                (p.samples()[40 + i] - 0.5 * v).abs() < 1e-12,
                "delayed copy sample {i}"
            );
        }
        for i in probe.len()..40 {
            assert_eq!(p.samples()[i], 0.0, "gap sample {i}");
        }
    }

    #[test]
    fn extract_rejects_short_capture() {
        let layout = test_layout();
        let short = SampledSignal::new(vec![0.0; 100], FS).unwrap();
        assert!(matches!(
            extract_segments(&capture_from(short), &layout),
            Err(Error::CaptureTooShort { .. })
        ));
    }

    #[test]
    fn equalize_delta_channel_peaks_at_alignment_origin() {
        // probe and data both the bare chirp through an identity channel
        let layout = test_layout();
        let w_p = layout.probe_window_len();
        let mut p_win = vec![0.0; w_p];
        p_win[..probe().len()].copy_from_slice(probe().samples());
        let mut s_win = vec![0.0; layout.data_window_len()];
        s_win[..probe().len()].copy_from_slice(probe().samples());
        let r = equalize_single(
            &SampledSignal::new(p_win, FS).unwrap(),
            &SampledSignal::new(s_win, FS).unwrap(),
        )
        .unwrap();
        assert_eq!(r.len(), layout.data_window_len() + w_p - 1);
        // peak sits at the alignment origin W_p - 1 with the probe energy
        let (peak_idx, peak) = r
            .samples()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert_eq!(peak_idx, w_p - 1);
        let energy = probe().energy();
        assert!((peak - energy).abs() < 1e-9 * energy);
    }

    #[test]
    fn equalize_zero_data_gives_zero() {
        let p = probe();
        let zeros = SampledSignal::new(vec![0.0; 500], FS).unwrap();
        let r = equalize_single(&p, &zeros).unwrap();
        assert!(r.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn equalize_is_linear_in_data() {
        let p = probe();
        let s = SampledSignal::new(
            (0..200).map(|i| ((i * 7) % 13) as f64 - 6.0).collect(),
            FS,
        )
        .unwrap();
        let r1 = equalize_single(&p, &s).unwrap();
        let r2 = equalize_single(&p, &s.scaled(3.0).unwrap()).unwrap();
        for (a, b) in r1.samples().iter().zip(r2.samples()) {
            assert!((3.0 * a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn combine_identity_and_doubling() {
        let s = probe();
        assert_eq!(combine_hydrophones(&[s.clone()]).unwrap(), s);
        let doubled = combine_hydrophones(&[s.clone(), s.clone()]).unwrap();
        for (a, b) in doubled.samples().iter().zip(s.samples()) {
            assert!((a - 2.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn combine_is_order_insensitive_within_tolerance() {
        use rand::Rng;
        let mut rng = RngStream::new(31).rng();
        let streams: Vec<SampledSignal> = (0..9)
            .map(|_| {
                SampledSignal::new((0..128).map(|_| rng.gen_range(-1.0..1.0)).collect(), FS)
                    .unwrap()
            })
            .collect();
        let fwd = combine_hydrophones(&streams).unwrap();
        let rev: Vec<SampledSignal> = streams.iter().rev().cloned().collect();
        let bwd = combine_hydrophones(&rev).unwrap();
        let scale = fwd.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in fwd.samples().iter().zip(bwd.samples()) {
            assert!((a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn combine_rejects_mismatched_lengths() {
        let a = SampledSignal::new(vec![0.0; 10], FS).unwrap();
        let b = SampledSignal::new(vec![0.0; 11], FS).unwrap();
        assert!(combine_hydrophones(&[a, b]).is_err());
        assert!(combine_hydrophones(&[]).is_err());
    }

    #[test]
    fn finalize_with_impulse_replica_is_identity() {
        let layout = test_layout();
        let len = layout.probe_window_len() + layout.data_window_len() - 1;
        let combined =
            SampledSignal::new((0..len).map(|i| (i % 17) as f64 - 8.0).collect(), FS).unwrap();
        let delta = SampledSignal::new(vec![1.0], FS).unwrap();
        let eq = finalize(&combined, &delta, &layout).unwrap();
        assert_eq!(eq.signal.samples(), combined.samples());
        assert_eq!(eq.symbol_start_index, layout.probe_window_len() - 1);
    }

    #[test]
    fn ideal_channel_recovers_data_stream() {
        // single hydrophone, identity channel: r(t) ~ s(t) over the data
        // window with normalized correlation >= 0.99
        let layout = test_layout();
        let a = build_cwid_alphabet(4, &chirp_spec()).unwrap();
        let payload = bits(40, 5);
        let frames = modulate(&payload, &a, &layout, &probe()).unwrap();
        let capture = capture_from(frames[0].waveform.clone());
        let (p, s) = extract_segments(&capture, &layout).unwrap();
        let r = equalize_single(&p, &s).unwrap();
        let combined = combine_hydrophones(&[r]).unwrap();
        let eq = finalize(&combined, &probe(), &layout).unwrap();

        let n_data = 20 * layout.symbol_len();
        let data_start = layout.data_start();
        let sent = &frames[0].waveform.samples()[data_start..data_start + n_data];
        let recovered =
            &eq.signal.samples()[eq.symbol_start_index..eq.symbol_start_index + n_data];
        // The recovered stream is the data smeared by the probe's
        // autocorrelation; at this probe's time-bandwidth product (~4.5)
        // that kernel limits the attainable correlation to ~0.92, and any
        // indexing slip would drop it below 0.7.
        let corr = normalized_correlation(recovered, sent);
        assert!(corr >= 0.90, "normalized correlation {corr}");

        // alignment is exact: shifting by one sample must hurt
        let shifted = &eq.signal.samples()
            [eq.symbol_start_index + 1..eq.symbol_start_index + 1 + n_data];
        assert!(normalized_correlation(shifted, sent) < corr);
    }

    #[test]
    fn combining_gain_approaches_element_count() {
        // K identical signal copies with independent unit noise: combined
        // SNR improves by ~K (checked statistically over 100 trials).
        // A long reference keeps the per-trial SNR estimates concentrated.
        let k = 9;
        let trials = 100;
        let s = lfm(&LfmSpec {
            duration: 4_096.0 / FS,
            ..chirp_spec()
        })
        .unwrap();
        let energy = s.energy();
        let mut ratio_sum = 0.0;
        for trial in 0..trials {
            let singles: Vec<SampledSignal> = (0..k)
                .map(|h| {
                    add_awgn(
                        &s,
                        0.0,
                        1.0,
                        RngStream::new(1_000).with_stream((trial * k + h) as u64),
                    )
                    .unwrap()
                })
                .collect();
            // fit y = beta*s + n; SNR = beta^2 * mean signal power / var(n)
            let snr_of = |sig: &SampledSignal| -> f64 {
                let beta: f64 = sig
                    .samples()
                    .iter()
                    .zip(s.samples())
                    .map(|(y, x)| y * x)
                    .sum::<f64>()
                    / energy;
                let resid: f64 = sig
                    .samples()
                    .iter()
                    .zip(s.samples())
                    .map(|(y, x)| (y - beta * x) * (y - beta * x))
                    .sum::<f64>()
                    / sig.len() as f64;
                beta * beta * (energy / sig.len() as f64) / resid
            };
            let combined = combine_hydrophones(&singles).unwrap();
            ratio_sum += snr_of(&combined) / snr_of(&singles[0]);
        }
        let mean_ratio = ratio_sum / trials as f64;
        assert!(
            (mean_ratio - k as f64).abs() <= 0.2 * k as f64,
            "mean combining gain {mean_ratio} (expected ~{k})"
        );
    }
}

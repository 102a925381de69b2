//! Shallow-water acoustic channel: eigenray geometry and arrival times,
//! the spreading/absorption/reflection loss chain, per-frame Rayleigh
//! fading and Gaussian delay jitter, Doppler time scaling, and the
//! tapped-delay-line transformation of a transmit waveform.
//!
//! Three eigenrays are modeled: the direct path, the surface-reflected
//! path, and the surface-plus-bottom-reflected path. Fading amplitudes and
//! delay jitter are held constant within one frame and redrawn across
//! frames, which is how the channel's coherence time enters the simulation.

use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dsp::{
    add_awgn, fractional_delay, measure_power, resample_time_scale, RngStream, SampledSignal,
};
use crate::error::{Error, Result};

/// Static physical parameters of the link geometry and media.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEnvironment {
    /// Horizontal transmitter-receiver distance R, meters.
    pub range_m: f64,
    /// Transmitter depth d1, meters.
    pub tx_depth_m: f64,
    /// Receiver depth d2, meters.
    pub rx_depth_m: f64,
    /// Water column height h, meters.
    pub water_depth_m: f64,
    /// Sound speed in water c, m/s.
    pub sound_speed_water: f64,
    /// Sound speed in the seabed c1, m/s.
    pub sound_speed_bottom: f64,
    /// Water density rho, kg/m^3.
    pub density_water: f64,
    /// Seabed density rho1, kg/m^3.
    pub density_bottom: f64,
    /// Salinity S, parts per thousand.
    pub salinity_ppt: f64,
    /// Water temperature, degrees Celsius.
    pub temperature_c: f64,
    /// Absorption constant A.
    pub absorption_a: f64,
    /// Absorption constant B.
    pub absorption_b: f64,
}

/// Default absorption constants.
pub const ABSORPTION_A: f64 = 2.34e-6;
pub const ABSORPTION_B: f64 = 3.38e-6;

impl ChannelEnvironment {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("range_m", self.range_m),
            ("tx_depth_m", self.tx_depth_m),
            ("rx_depth_m", self.rx_depth_m),
            ("water_depth_m", self.water_depth_m),
            ("sound_speed_water", self.sound_speed_water),
            ("sound_speed_bottom", self.sound_speed_bottom),
            ("density_water", self.density_water),
            ("density_bottom", self.density_bottom),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.tx_depth_m >= self.water_depth_m || self.rx_depth_m >= self.water_depth_m {
            return Err(Error::InvalidArgument(
                "transducer depths must be inside the water column".into(),
            ));
        }
        Ok(())
    }

    /// Density ratio seabed/water.
    pub fn density_ratio(&self) -> f64 {
        self.density_bottom / self.density_water
    }

    /// Sound speed ratio water/seabed.
    pub fn speed_ratio(&self) -> f64 {
        self.sound_speed_water / self.sound_speed_bottom
    }
}

/// Path lengths of the three eigenrays: direct, surface-reflected,
/// surface-plus-bottom-reflected.
pub fn eigenray_distances(env: &ChannelEnvironment) -> [f64; 3] {
    let r2 = env.range_m * env.range_m;
    let d_diff = env.tx_depth_m - env.rx_depth_m;
    let d_sum = env.tx_depth_m + env.rx_depth_m;
    let d_bot = 2.0 * env.water_depth_m + env.tx_depth_m - env.rx_depth_m;
    [
        (r2 + d_diff * d_diff).sqrt(),
        (r2 + d_sum * d_sum).sqrt(),
        (r2 + d_bot * d_bot).sqrt(),
    ]
}

/// Spherical spreading loss `1/D`.
pub fn spreading_loss(distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "spreading loss needs positive distance, got {distance_m}"
        )));
    }
    Ok(1.0 / distance_m)
}

/// Relaxation frequency of seawater, in kHz: `2.19 * 10^(6 - 1520/(T+273))`.
///
/// The absorption formula uses this together with the carrier frequency in
/// kHz; at 10 degrees C the value is ~9.32 kHz.
pub fn relaxation_frequency_khz(temperature_c: f64) -> f64 {
    2.19 * 10f64.powf(6.0 - 1520.0 / (temperature_c + 273.0))
}

/// Absorption (heat conversion) loss over `distance_m` at carrier frequency
/// `freq_hz`:
/// `exp(-0.998 * D * (S*A*fT*f^2/(fT^2+f^2) + B*f^2/fT))` with f, fT in kHz.
pub fn absorption_loss(distance_m: f64, env: &ChannelEnvironment, freq_hz: f64) -> f64 {
    let f_khz = freq_hz / 1_000.0;
    let ft_khz = relaxation_frequency_khz(env.temperature_c);
    let term = env.salinity_ppt * env.absorption_a * ft_khz * f_khz * f_khz
        / (ft_khz * ft_khz + f_khz * f_khz)
        + env.absorption_b * f_khz * f_khz / ft_khz;
    (-0.998 * distance_m * term).exp()
}

/// Surface reflection coefficient: perfect reflection with phase inversion.
pub fn surface_loss() -> f64 {
    -1.0
}

/// Grazing angle of a ray with `s` surface and `b` bottom reflections:
/// `atan(R / (2bh + d1 - (-1)^(s-b) d2))`.
pub fn grazing_angle(env: &ChannelEnvironment, s: u32, b: u32) -> Result<f64> {
    let sign = if (s as i64 - b as i64).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    };
    let denom = 2.0 * b as f64 * env.water_depth_m + env.tx_depth_m - sign * env.rx_depth_m;
    if denom == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "grazing angle undefined for s={s}, b={b}: zero denominator \
             (2bh + d1 - (-1)^(s-b) d2 = 0)"
        )));
    }
    Ok((env.range_m / denom).atan())
}

/// Bottom reflection loss magnitude (Rayleigh coefficient) at grazing angle
/// `theta`:
/// `|(m cos(theta) - sqrt(n^2 - sin^2(theta))) / (m cos(theta) + sqrt(...))|`.
///
/// When `n^2 < sin^2(theta)` the root is imaginary and the coefficient is a
/// ratio of complex conjugates, so the magnitude is exactly 1 (total
/// internal reflection).
pub fn bottom_loss(env: &ChannelEnvironment, theta: f64) -> f64 {
    let m = env.density_ratio();
    let n = env.speed_ratio();
    let cos_t = theta.cos();
    let s2 = theta.sin() * theta.sin();
    let under = n * n - s2;
    if under < 0.0 {
        return 1.0;
    }
    let root = under.sqrt();
    ((m * cos_t - root) / (m * cos_t + root)).abs()
}

/// Arrival times: element-wise `D / c`.
pub fn arrival_times(distances: &[f64; 3], sound_speed: f64) -> [f64; 3] {
    [
        distances[0] / sound_speed,
        distances[1] / sound_speed,
        distances[2] / sound_speed,
    ]
}

/// One discrete propagation path with its static loss chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenray {
    /// Surface reflection count s.
    pub surface_reflections: u32,
    /// Bottom reflection count b.
    pub bottom_reflections: u32,
    /// Path length, meters.
    pub distance_m: f64,
    /// Arrival time, seconds.
    pub delay_s: f64,
    /// Grazing angle, radians; only defined for rays touching the bottom.
    pub grazing_angle: Option<f64>,
    /// Signed product of spreading, absorption and reflection losses.
    pub loss_product: f64,
}

impl Eigenray {
    /// Build a ray from its reflection counts and path length, evaluating
    /// the loss chain at carrier frequency `freq_hz`.
    pub fn from_geometry(
        env: &ChannelEnvironment,
        s: u32,
        b: u32,
        distance_m: f64,
        freq_hz: f64,
    ) -> Result<Self> {
        let l_ss = spreading_loss(distance_m)?;
        let l_a = absorption_loss(distance_m, env, freq_hz);
        let surface_sign = surface_loss().powi(s as i32);
        let (grazing, l_b) = if b > 0 {
            let theta = grazing_angle(env, s, b)?;
            (Some(theta), bottom_loss(env, theta).powi(b as i32))
        } else {
            (None, 1.0)
        };
        Ok(Self {
            surface_reflections: s,
            bottom_reflections: b,
            distance_m,
            delay_s: distance_m / env.sound_speed_water,
            grazing_angle: grazing,
            loss_product: l_ss * l_a * surface_sign * l_b,
        })
    }
}

/// The paper's three-ray set for the given environment: (s,b) of
/// (0,0), (1,0) and (1,1), with losses evaluated at `freq_hz`.
pub fn paper_eigenrays(env: &ChannelEnvironment, freq_hz: f64) -> Result<Vec<Eigenray>> {
    env.validate()?;
    let distances = eigenray_distances(env);
    Ok(vec![
        Eigenray::from_geometry(env, 0, 0, distances[0], freq_hz)?,
        Eigenray::from_geometry(env, 1, 0, distances[1], freq_hz)?,
        Eigenray::from_geometry(env, 1, 1, distances[2], freq_hz)?,
    ])
}

/// Stochastic parameters of the per-frame channel variation.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingConfig {
    /// Rayleigh scale per eigenray (sigma_1..sigma_n).
    pub rayleigh_scales: Vec<f64>,
    /// Standard deviation of the per-ray delay jitter, seconds.
    pub jitter_sigma_s: f64,
    /// Doppler shift at the carrier center frequency, Hz.
    pub doppler_shift_hz: f64,
}

impl FadingConfig {
    /// Fading disabled: unit gains, no jitter, no Doppler. The tap weights
    /// then reduce to the pure loss products.
    pub fn disabled(n_rays: usize) -> Self {
        Self {
            rayleigh_scales: vec![f64::NAN; n_rays],
            jitter_sigma_s: 0.0,
            doppler_shift_hz: 0.0,
        }
    }

    fn is_disabled(&self) -> bool {
        self.rayleigh_scales.iter().all(|s| s.is_nan())
    }

    pub fn validate(&self, n_rays: usize) -> Result<()> {
        if self.rayleigh_scales.len() != n_rays {
            return Err(Error::InvalidArgument(format!(
                "{} Rayleigh scales for {n_rays} eigenrays",
                self.rayleigh_scales.len()
            )));
        }
        if !self.is_disabled() && !self.rayleigh_scales.iter().all(|s| *s > 0.0) {
            return Err(Error::InvalidArgument(
                "Rayleigh scales must be positive".into(),
            ));
        }
        if !(self.jitter_sigma_s >= 0.0) {
            return Err(Error::InvalidArgument(
                "jitter sigma must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Equivalent relative drift velocity for this Doppler shift, m/s.
    pub fn doppler_velocity(&self, sound_speed: f64, center_freq_hz: f64) -> f64 {
        self.doppler_shift_hz * sound_speed / center_freq_hz
    }
}

/// One delay-line tap: signed gain and absolute delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelTap {
    pub gain: f64,
    pub delay_s: f64,
}

/// One frame's channel draw: fading-scaled taps and the Doppler time-scale
/// factor. Constant within a frame, redrawn across frames.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<ChannelTap>,
    pub doppler_factor: f64,
    pub frame_id: u64,
}

impl ChannelRealization {
    /// The identity channel: one unit tap at zero delay, no Doppler.
    pub fn identity(frame_id: u64) -> Self {
        Self {
            taps: vec![ChannelTap {
                gain: 1.0,
                delay_s: 0.0,
            }],
            doppler_factor: 1.0,
            frame_id,
        }
    }

    /// Re-zero tap delays against a common origin (e.g. just ahead of the
    /// first arrival), clamping at zero. Shifting all taps together does not
    /// change what the time-reversal receiver sees.
    pub fn with_delay_origin(mut self, origin_s: f64) -> Self {
        for tap in &mut self.taps {
            tap.delay_s = (tap.delay_s - origin_s).max(0.0);
        }
        self
    }

    pub fn max_delay_s(&self) -> f64 {
        self.taps.iter().map(|t| t.delay_s).fold(0.0, f64::max)
    }
}

/// Draw one frame's fading state: per-ray Rayleigh amplitude `A_i` (scale
/// sigma_i) on top of the static loss product, and Gaussian delay jitter
/// `J_i` added to the arrival time. Deterministic for a fixed [`RngStream`].
pub fn draw_realization(
    fading: &FadingConfig,
    rays: &[Eigenray],
    doppler_factor: f64,
    frame_id: u64,
    rng: RngStream,
) -> Result<ChannelRealization> {
    fading.validate(rays.len())?;
    let mut gen = rng.rng();
    let jitter = if fading.jitter_sigma_s > 0.0 {
        Some(
            Normal::new(0.0, fading.jitter_sigma_s)
                .map_err(|e| Error::InvalidArgument(format!("jitter distribution: {e}")))?,
        )
    } else {
        None
    };
    let disabled = fading.is_disabled();
    let taps = rays
        .iter()
        .zip(&fading.rayleigh_scales)
        .map(|(ray, &sigma)| {
            let amplitude = if disabled {
                1.0
            } else {
                // inverse-CDF Rayleigh draw
                let u: f64 = gen.gen();
                sigma * (-2.0 * (1.0 - u).ln()).sqrt()
            };
            let j = jitter.map_or(0.0, |n| n.sample(&mut gen));
            ChannelTap {
                gain: amplitude * ray.loss_product,
                delay_s: ray.delay_s + j,
            }
        })
        .collect();
    Ok(ChannelRealization {
        taps,
        doppler_factor,
        frame_id,
    })
}

/// White-noise injection request for [`apply_channel`]: SNR referenced to
/// the mean power of the noiseless output over `reference_window`, noise
/// drawn over the whole output.
#[derive(Debug, Clone)]
pub struct ChannelNoise {
    pub snr_db: f64,
    pub reference_window: Range<usize>,
    pub rng: RngStream,
}

/// Pass a waveform through one channel realization:
/// Doppler time scaling, then the tapped delay line
/// `y = sum_i gain_i * x(t - delay_i)`, then optional white noise.
///
/// The output covers the input length plus the maximum tap delay.
pub fn apply_channel(
    x: &SampledSignal,
    realization: &ChannelRealization,
    noise: Option<&ChannelNoise>,
) -> Result<SampledSignal> {
    if realization.taps.is_empty() {
        return Err(Error::InvalidArgument("realization has no taps".into()));
    }
    let scaled;
    let xd = if realization.doppler_factor != 1.0 {
        scaled = resample_time_scale(x, realization.doppler_factor)?;
        &scaled
    } else {
        x
    };
    let fs = xd.sample_rate();
    let out_len = xd.len() + (realization.max_delay_s() * fs).ceil() as usize;
    let mut acc = vec![0.0; out_len];
    for tap in &realization.taps {
        let delayed = fractional_delay(xd, tap.delay_s)?;
        for (slot, &v) in acc.iter_mut().zip(delayed.samples()) {
            *slot += tap.gain * v;
        }
    }
    let noiseless = SampledSignal::new(acc, fs)?;
    match noise {
        None => Ok(noiseless),
        Some(spec) => {
            let reference = measure_power(&noiseless, spec.reference_window.clone())?;
            add_awgn(&noiseless, spec.snr_db, reference, spec.rng)
        }
    }
}

/// Uniform Doppler time scaling for a relative drift `velocity_mps`
/// (positive toward the receiver): scale factor `1 + v/c`.
pub fn apply_doppler(
    x: &SampledSignal,
    velocity_mps: f64,
    env: &ChannelEnvironment,
) -> Result<SampledSignal> {
    let c = env.sound_speed_water;
    if velocity_mps.abs() >= c {
        return Err(Error::InvalidArgument(format!(
            "drift velocity {velocity_mps} m/s must be below the sound speed {c} m/s"
        )));
    }
    resample_time_scale(x, 1.0 + velocity_mps / c)
}

//! Narrow-band acoustic channel: Thorp absorption, Urick transmission loss,
//! unit-mean Rayleigh fading, empirical ambient noise, SINR and Shannon rate.
//!
//! All functions are pure. Randomness only enters through [`sample_fading`],
//! which takes the caller's random stream.
//!
//! Power bookkeeping: transmit powers are electrical watts, transmission loss is
//! a dimensionless factor referenced to 1 m, and ambient noise (natively a PSD in
//! dB re µPa²/Hz) is converted to the same "equivalent source watts at 1 m" scale
//! through [`ChannelParams::source_level_ref_db`]. Only ratios enter the SINR, so
//! the reference only has to be applied consistently.

use core::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Carrier frequency (kHz) at and above which the full Thorp expression is used.
pub const THORP_CROSSOVER_KHZ: f64 = 0.4;

/// Physical channel parameters shared by every link in a deployment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    pub carrier_freq_khz: f64,
    pub bandwidth_hz: f64,
    /// Geometric spreading exponent: 1 cylindrical, 1.5 practical, 2 spherical.
    pub spreading_k: f64,
    /// Transmission anomaly in dB.
    pub anomaly_db: f64,
    /// Electrical-to-acoustic conversion efficiency.
    pub transducer_eff: f64,
    pub sinr_threshold_db: f64,
    /// Width of the band around the carrier over which noise is integrated.
    pub noise_band_hz: f64,
    /// Shipping activity factor in `[0, 1]`.
    pub shipping: f64,
    pub wind_mps: f64,
    /// Source level (dB re µPa @ 1 m) radiated by one acoustic watt. Converts
    /// noise PSD into the watt scale used by transmit powers.
    pub source_level_ref_db: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            carrier_freq_khz: 25.0,
            bandwidth_hz: 5_000.0,
            spreading_k: 1.5,
            anomaly_db: 0.0,
            transducer_eff: 0.9,
            sinr_threshold_db: 10.0,
            noise_band_hz: 5_000.0,
            shipping: 0.0,
            wind_mps: 10.0,
            source_level_ref_db: 170.8,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.carrier_freq_khz,
            self.bandwidth_hz,
            self.spreading_k,
            self.anomaly_db,
            self.transducer_eff,
            self.sinr_threshold_db,
            self.noise_band_hz,
            self.shipping,
            self.wind_mps,
            self.source_level_ref_db,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("channel parameters must be finite"));
        }
        if self.carrier_freq_khz <= 0.0 {
            return Err(Error::config("carrier frequency must be positive"));
        }
        if self.bandwidth_hz <= 0.0 || self.noise_band_hz <= 0.0 {
            return Err(Error::config("bandwidth and noise band must be positive"));
        }
        if !(self.transducer_eff > 0.0 && self.transducer_eff <= 1.0) {
            return Err(Error::config("transducer efficiency must lie in (0, 1]"));
        }
        if ![1.0, 1.5, 2.0].contains(&self.spreading_k) {
            return Err(Error::config("spreading factor must be 1, 1.5 or 2"));
        }
        if self.anomaly_db < 0.0 {
            return Err(Error::config("transmission anomaly must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.shipping) || self.wind_mps < 0.0 {
            return Err(Error::config("shipping must lie in [0, 1] and wind must be non-negative"));
        }
        Ok(())
    }

    /// SINR threshold as a linear ratio.
    pub fn sinr_threshold_linear(&self) -> f64 {
        db_to_linear(self.sinr_threshold_db)
    }
}

#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

#[inline]
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * libm::log10(x)
}

/// Absorption coefficient in dB/km for a carrier in kHz.
///
/// Uses the full Thorp expression from [`THORP_CROSSOVER_KHZ`] upwards and the
/// low-frequency form below it.
pub fn thorp_absorption_db_per_km(fc_khz: f64) -> Result<f64> {
    if !(fc_khz >= 0.0) || !fc_khz.is_finite() {
        return Err(Error::domain("carrier frequency must be finite and non-negative"));
    }
    let f2 = fc_khz * fc_khz;
    let alpha = if fc_khz >= THORP_CROSSOVER_KHZ {
        0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003
    } else {
        0.11 * f2 / (1.0 + f2) + 0.011 * f2 + 0.002
    };
    Ok(alpha)
}

/// Urick transmission loss as a linear factor:
/// `(1000·d)^(−k) · 10^(−(α(fc)·d + A)/10)` with `d` in km.
pub fn transmission_loss(distance_km: f64, params: &ChannelParams) -> Result<f64> {
    if !distance_km.is_finite() || distance_km < 0.0 {
        return Err(Error::domain("distance must be finite and non-negative"));
    }
    if distance_km == 0.0 {
        return Err(Error::domain("transmission loss is singular at zero distance"));
    }
    let alpha = thorp_absorption_db_per_km(params.carrier_freq_khz)?;
    let spreading = libm::pow(1000.0 * distance_km, -params.spreading_k);
    let absorption = db_to_linear(-(alpha * distance_km + params.anomaly_db));
    Ok(spreading * absorption)
}

/// CDF of the unit-mean Rayleigh distribution, `1 − exp(−πx²/4)`.
pub fn fading_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        1.0 - libm::exp(-PI * x * x / 4.0)
    }
}

/// Inverse CDF of the unit-mean Rayleigh distribution for `u ∈ [0, 1)`.
pub fn fading_from_uniform(u: f64) -> f64 {
    libm::sqrt(-4.0 * libm::log1p(-u) / PI)
}

/// Draws one unit-mean Rayleigh fading coefficient.
pub fn sample_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    fading_from_uniform(u)
}

/// Instantaneous channel gain `G·ρ²`.
#[inline]
pub fn channel_gain(loss: f64, rho: f64) -> f64 {
    loss * rho * rho
}

/// The four components of the ambient noise PSD in dB re µPa²/Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePsd {
    pub turbulence_db: f64,
    pub shipping_db: f64,
    pub wind_db: f64,
    pub thermal_db: f64,
}

impl NoisePsd {
    pub fn at(params: &ChannelParams) -> Self {
        let f = params.carrier_freq_khz;
        let lf = libm::log10(f);
        Self {
            turbulence_db: 17.0 - 30.0 * lf,
            shipping_db: 40.0 + 20.0 * (params.shipping - 0.5) + 26.0 * lf
                - 60.0 * libm::log10(f + 0.03),
            wind_db: 50.0 + 7.5 * libm::sqrt(params.wind_mps) + 20.0 * lf
                - 40.0 * libm::log10(f + 0.4),
            thermal_db: -15.0 + 20.0 * lf,
        }
    }

    /// Components summed in linear power, in dB re µPa²/Hz.
    pub fn total_db(&self) -> f64 {
        let linear = db_to_linear(self.turbulence_db)
            + db_to_linear(self.shipping_db)
            + db_to_linear(self.wind_db)
            + db_to_linear(self.thermal_db);
        linear_to_db(linear)
    }
}

/// Ambient noise power `I_a = N(fc)·Δf` on the watt scale.
pub fn ambient_noise_power(params: &ChannelParams) -> f64 {
    let psd = NoisePsd::at(params).total_db();
    db_to_linear(psd - params.source_level_ref_db) * params.noise_band_hz
}

/// Received SINR of transmitter `intended` (linear):
/// `η0·p_i·g_i / (η0·Σ_{j≠i} p_j·g_j + I_s + I_a)`.
pub fn sinr(
    tx_powers: &[f64],
    gains_to_receiver: &[f64],
    intended: usize,
    ext_interference: f64,
    noise: f64,
    eta0: f64,
) -> Result<f64> {
    if tx_powers.is_empty() {
        return Err(Error::domain("at least one transmitter is required"));
    }
    if tx_powers.len() != gains_to_receiver.len() {
        return Err(Error::domain("power and gain lists differ in length"));
    }
    if intended >= tx_powers.len() {
        return Err(Error::domain("intended transmitter index out of range"));
    }
    if ext_interference < 0.0 || noise < 0.0 {
        return Err(Error::domain("interference and noise must be non-negative"));
    }
    let mut interference = 0.0;
    for (j, (&p, &g)) in tx_powers.iter().zip(gains_to_receiver).enumerate() {
        if p < 0.0 || g < 0.0 {
            return Err(Error::domain("powers and gains must be non-negative"));
        }
        if j != intended {
            interference += p * g;
        }
    }
    let signal = eta0 * tx_powers[intended] * gains_to_receiver[intended];
    let denom = eta0 * interference + ext_interference + noise;
    if denom <= 0.0 {
        if signal == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::domain("SINR is unbounded with zero interference and noise"));
    }
    Ok(signal / denom)
}

/// Shannon rate in bit/s, gated to zero below the SINR threshold.
pub fn data_rate(gamma_linear: f64, params: &ChannelParams) -> f64 {
    if !(gamma_linear >= params.sinr_threshold_linear()) {
        return 0.0;
    }
    params.bandwidth_hz * libm::log2(1.0 + gamma_linear)
}

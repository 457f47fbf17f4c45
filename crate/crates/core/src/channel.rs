//! Seeded frequency-selective channel generator.
//!
//! Each directed link gets a tapped-delay-line impulse response with
//! independent zero-mean circularly-symmetric complex Gaussian taps. The
//! per-subcarrier power gain is the squared magnitude of the N-point
//! frequency response, scaled by distance-based path loss (reference gain 1
//! at 1 km) and an optional log-normal shadowing factor.
//!
//! Every link draws from its own ChaCha stream keyed by `(seed, link)`, so
//! generation order never matters and changing N leaves the taps untouched.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ChannelRealization, Link, NodeGeometry};

/// Path-loss exponent used throughout the experiments.
pub const DEFAULT_PATHLOSS_EXPONENT: f64 = 3.5;

/// Distance between the two users in the experiments, km.
pub const DEFAULT_USER_DISTANCE_KM: f64 = 2.0;

/// Linear path-loss gain `d^-exponent`, equal to 1 at 1 km.
pub fn pathloss_gain(distance_km: f64, exponent: f64) -> Result<f64> {
    if !(distance_km > 0.0) {
        return Err(Error::NonPositiveDistance(distance_km));
    }
    Ok(distance_km.powf(-exponent))
}

/// One tap of the delay profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    /// Delay in samples.
    pub delay: usize,
    /// Mean tap power relative to the strongest tap, dB.
    pub power_db: f64,
}

/// Three-tap stand-in for a SUI-6 style profile.
pub fn default_taps() -> Vec<Tap> {
    vec![
        Tap { delay: 0, power_db: 0.0 },
        Tap { delay: 5, power_db: -10.0 },
        Tap { delay: 10, power_db: -14.0 },
    ]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TapFading {
    /// Complex Gaussian taps with the profile's mean powers.
    #[default]
    Rayleigh,
    /// Deterministic real taps equal to the square root of the mean power.
    /// Used to get flat, path-loss-only channels.
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub geometry: NodeGeometry,
    pub n_subcarriers: usize,
    pub pathloss_exponent: f64,
    pub taps: Vec<Tap>,
    pub seed: u64,
    /// Reverse links share the forward link's draw.
    pub reciprocal: bool,
    /// Standard deviation of log-normal shadowing, dB; 0 disables it.
    pub shadowing_db: f64,
    pub fading: TapFading,
}

impl ChannelConfig {
    /// Relay at `relay_fraction` of the A-B segment, default profile.
    pub fn new(n_subcarriers: usize, relay_fraction: f64, seed: u64) -> Result<Self> {
        Ok(Self {
            geometry: NodeGeometry::on_segment(DEFAULT_USER_DISTANCE_KM, relay_fraction)?,
            n_subcarriers,
            pathloss_exponent: DEFAULT_PATHLOSS_EXPONENT,
            taps: default_taps(),
            seed,
            reciprocal: true,
            shadowing_db: 0.0,
            fading: TapFading::Rayleigh,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_subcarriers == 0 {
            return bad("n_subcarriers must be positive".into());
        }
        if !(self.pathloss_exponent > 0.0 && self.pathloss_exponent.is_finite()) {
            return bad(format!("pathloss exponent must be > 0, got {}", self.pathloss_exponent));
        }
        if self.taps.is_empty() {
            return bad("tap profile is empty".into());
        }
        if self.taps.iter().any(|t| !t.power_db.is_finite()) {
            return bad("tap powers must be finite".into());
        }
        let mut delays: Vec<usize> = self.taps.iter().map(|t| t.delay).collect();
        delays.sort_unstable();
        delays.dedup();
        if self.n_subcarriers < delays.len() {
            return bad(format!(
                "N = {} is smaller than the number of distinct tap delays ({})",
                self.n_subcarriers,
                delays.len()
            ));
        }
        if !(self.shadowing_db >= 0.0 && self.shadowing_db.is_finite()) {
            return bad("shadowing_db must be finite and >= 0".into());
        }
        for link in Link::ALL {
            if !(self.geometry.distance(link) > 0.0) {
                return bad(format!("link {link} has zero length"));
            }
        }
        Ok(())
    }

    /// Linear tap powers normalized to unit sum.
    pub fn normalized_tap_powers(&self) -> Vec<f64> {
        let linear: Vec<f64> = self
            .taps
            .iter()
            .map(|t| 10f64.powf(t.power_db / 10.0))
            .collect();
        let total: f64 = linear.iter().sum();
        linear.into_iter().map(|p| p / total).collect()
    }
}

/// Link whose random stream feeds `link` (its forward direction when the
/// channel is reciprocal).
fn stream_link(link: Link, reciprocal: bool) -> Link {
    if reciprocal {
        link.min(link.reverse())
    } else {
        link
    }
}

fn link_rng(seed: u64, link: Link) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(link.index() as u64 + 1);
    rng
}

/// Draws the impulse-response taps of one link (before path loss).
pub fn draw_taps(cfg: &ChannelConfig, link: Link) -> Vec<Complex64> {
    let source = stream_link(link, cfg.reciprocal);
    let mut rng = link_rng(cfg.seed, source);
    let powers = cfg.normalized_tap_powers();
    powers
        .iter()
        .map(|&p| match cfg.fading {
            TapFading::Rayleigh => {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im) * (p / 2.0).sqrt()
            }
            TapFading::Fixed => Complex64::new(p.sqrt(), 0.0),
        })
        .collect()
}

fn shadowing_factor(cfg: &ChannelConfig, link: Link) -> f64 {
    if cfg.shadowing_db == 0.0 {
        return 1.0;
    }
    let source = stream_link(link, cfg.reciprocal);
    let mut rng = link_rng(cfg.seed, source);
    // Skip the tap draws so shadowing never perturbs the fading.
    for _ in 0..2 * cfg.taps.len() {
        let _: f64 = StandardNormal.sample(&mut rng);
    }
    let z: f64 = StandardNormal.sample(&mut rng);
    10f64.powf(cfg.shadowing_db * z / 10.0)
}

/// `|H_n|^2` for `n = 0..N` of a tapped delay line.
pub fn frequency_response_power(taps: &[Complex64], delays: &[usize], n: usize) -> Vec<f64> {
    let step = -2.0 * std::f64::consts::PI / n as f64;
    (0..n)
        .map(|k| {
            let h: Complex64 = taps
                .iter()
                .zip(delays)
                .map(|(&t, &d)| {
                    // Reduce the phase index first to keep the angle small.
                    let idx = ((k as u128 * d as u128) % n as u128) as f64;
                    t * Complex64::from_polar(1.0, step * idx)
                })
                .sum();
            h.norm_sqr()
        })
        .collect()
}

pub fn generate_channels(cfg: &ChannelConfig) -> Result<ChannelRealization> {
    cfg.validate()?;
    let delays: Vec<usize> = cfg.taps.iter().map(|t| t.delay).collect();
    let mut gains: [Vec<f64>; 6] = Default::default();
    for link in Link::ALL {
        let taps = draw_taps(cfg, link);
        let pl = pathloss_gain(cfg.geometry.distance(link), cfg.pathloss_exponent)?;
        let scale = pl * shadowing_factor(cfg, link);
        gains[link.index()] = frequency_response_power(&taps, &delays, cfg.n_subcarriers)
            .into_iter()
            .map(|g| g * scale)
            .collect();
    }
    ChannelRealization::new(gains)
}

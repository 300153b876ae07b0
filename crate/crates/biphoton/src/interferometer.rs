//! Per-photon transport through the Michelson interferometer, the remote
//! idler filter, and the detectors.
//!
//! Each photon carries a definite wavelength, so the interferometer
//! reduces to a wavelength-dependent detection probability at its two
//! output ports; fringe washout emerges only from ensemble averaging
//! over the sampled spectrum. Routing is local by construction: the
//! signal path never sees the idler filter and the idler path never sees
//! the interferometer geometry, which the function signatures enforce.
//!
//! Propagation delays are constant offsets absorbed into the coincidence
//! delay lines, so detection times equal emission times plus detector
//! jitter.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::pair_source::{IdlerOutcome, PhotonPairEvent, SignalOutcome};
use crate::spectral::FilterSpec;

/// Michelson geometry: optical path difference Delta = 2 (L2 - L1) plus
/// a fine phase offset for sub-wavelength scan control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MichelsonConfig {
    pub path_difference_um: f64,
    pub phase_offset_rad: f64,
}

impl MichelsonConfig {
    pub fn new(path_difference_um: f64) -> Result<Self> {
        if path_difference_um < 0.0 {
            return Err(Error::Domain(format!(
                "optical path difference must be non-negative, got {path_difference_um} um"
            )));
        }
        Ok(Self {
            path_difference_um,
            phase_offset_rad: 0.0,
        })
    }

    pub fn with_phase(path_difference_um: f64, phase_offset_rad: f64) -> Result<Self> {
        let mut cfg = Self::new(path_difference_um)?;
        cfg.phase_offset_rad = phase_offset_rad;
        Ok(cfg)
    }
}

/// Detector response model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Detection probability for a photon that reaches the detector.
    pub efficiency: f64,
    /// Dark count rate, counts per second.
    pub dark_rate_hz: f64,
    /// Gaussian sigma of the detection-time jitter, seconds.
    pub jitter_s: f64,
}

impl DetectorConfig {
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_rate_hz: 0.0,
            jitter_s: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::Domain(format!(
                "detector efficiency must lie in [0, 1], got {}",
                self.efficiency
            )));
        }
        if self.dark_rate_hz < 0.0 || self.jitter_s < 0.0 {
            return Err(Error::Domain(
                "dark rate and jitter must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self::ideal()
    }
}

/// Output-port probabilities (toward D2, toward D3) for a photon of
/// definite wavelength: p_D2 = (1 + cos(2 pi Delta / lambda + phase))/2.
pub fn michelson_probabilities(cfg: &MichelsonConfig, lambda_nm: f64) -> (f64, f64) {
    debug_assert!(lambda_nm > 0.0);
    let delta_nm = cfg.path_difference_um * 1.0e3;
    // Reduce Delta mod lambda before forming the phase: keeps full
    // precision at path differences hundreds of wavelengths long.
    let cycles_frac = delta_nm.rem_euclid(lambda_nm) / lambda_nm;
    let phase = 2.0 * std::f64::consts::PI * cycles_frac + cfg.phase_offset_rad;
    let p_d2 = 0.5 * (1.0 + phase.cos());
    (p_d2, 1.0 - p_d2)
}

fn detection_time<R: Rng + ?Sized>(emission_s: f64, det: &DetectorConfig, rng: &mut R) -> f64 {
    if det.jitter_s > 0.0 {
        let jitter = Normal::new(0.0, det.jitter_s).expect("positive sigma");
        emission_s + jitter.sample(rng)
    } else {
        emission_s
    }
}

/// Route one signal photon through the interferometer to D2 or D3, then
/// apply the chosen port's detector. The event must be unrouted.
pub fn route_signal<R: Rng + ?Sized>(
    cfg: &MichelsonConfig,
    det_d2: &DetectorConfig,
    det_d3: &DetectorConfig,
    mut event: PhotonPairEvent,
    rng: &mut R,
) -> PhotonPairEvent {
    debug_assert_eq!(event.signal_outcome, SignalOutcome::Lost);
    let (p_d2, _) = michelson_probabilities(cfg, event.signal_wavelength_nm);
    let toward_d2 = rng.gen::<f64>() < p_d2;
    let det = if toward_d2 { det_d2 } else { det_d3 };
    let detected = rng.gen::<f64>() < det.efficiency;
    if detected {
        event.signal_outcome = if toward_d2 {
            SignalOutcome::D2
        } else {
            SignalOutcome::D3
        };
        event.signal_detect_time_s = Some(detection_time(event.emission_time_s, det, rng));
    }
    event
}

/// Route one idler photon through the optional remote filter to D1. The
/// event must be unrouted.
///
/// Exactly two uniforms are consumed per event regardless of outcome, so
/// same-seed runs that differ only in the filter stay draw-aligned and
/// pointwise comparable (a filter can then only remove detections, never
/// reshuffle them).
pub fn route_idler<R: Rng + ?Sized>(
    filter: Option<&FilterSpec>,
    det_d1: &DetectorConfig,
    mut event: PhotonPairEvent,
    rng: &mut R,
) -> PhotonPairEvent {
    debug_assert_eq!(event.idler_outcome, IdlerOutcome::Lost);
    let transmission = filter.map_or(1.0, |f| f.transmission(event.idler_wavelength_nm));
    let passed = rng.gen::<f64>() < transmission;
    let detected = rng.gen::<f64>() < det_d1.efficiency;
    if passed && detected {
        event.idler_outcome = IdlerOutcome::D1;
        event.idler_detect_time_s = Some(detection_time(event.emission_time_s, det_d1, rng));
    }
    event
}

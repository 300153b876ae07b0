//! Energy-anticorrelated signal/idler pair generation.
//!
//! A monochromatic pump photon splits into a signal/idler pair whose
//! frequencies sum to the pump frequency exactly. The signal wavelength
//! is sampled from the pinhole-selected spectrum; the idler wavelength
//! is then fixed per pair by energy conservation rather than sampled
//! independently. Emission times form a Poisson process.
//!
//! Generation is partitioned into fixed time slices with per-slice
//! derived RNG streams, so the stream is reproducible and identical
//! whether slices are produced serially or in parallel.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{Error, Result};
use crate::rng::SeedStream;
use crate::spectral::Spectrum;

/// Which detector (if any) a signal photon reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalOutcome {
    D2,
    D3,
    Lost,
}

/// Which detector (if any) an idler photon reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdlerOutcome {
    D1,
    Lost,
}

/// One signal/idler pair, from emission through (optional) detection.
///
/// Outcomes start as `Lost` and are set by the routing stage. A
/// detection time is present exactly when the outcome is a detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonPairEvent {
    pub emission_time_s: f64,
    pub signal_wavelength_nm: f64,
    pub idler_wavelength_nm: f64,
    pub signal_outcome: SignalOutcome,
    pub idler_outcome: IdlerOutcome,
    pub signal_detect_time_s: Option<f64>,
    pub idler_detect_time_s: Option<f64>,
}

impl PhotonPairEvent {
    /// Relative error of the per-pair energy conservation identity
    /// 1/signal + 1/idler = 1/pump.
    pub fn conservation_error(&self, pump_wavelength_nm: f64) -> f64 {
        let lhs = 1.0 / self.signal_wavelength_nm + 1.0 / self.idler_wavelength_nm;
        let rhs = 1.0 / pump_wavelength_nm;
        ((lhs - rhs) / rhs).abs()
    }
}

/// Pair source configuration: pump, pinhole selection, and emission
/// statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceConfig {
    pub pump_wavelength_nm: f64,
    /// Spectrum selected on the signal arm by the pinhole screen. The
    /// idler spectrum is induced from it by energy conservation.
    pub pinhole_spectrum: Spectrum,
    pub mean_pair_rate_hz: f64,
    /// Gaussian sigma of an optional emission-time jitter, seconds.
    pub emission_jitter_s: f64,
}

impl SourceConfig {
    pub fn new(
        pump_wavelength_nm: f64,
        pinhole_spectrum: Spectrum,
        mean_pair_rate_hz: f64,
    ) -> Result<Self> {
        if pump_wavelength_nm <= 0.0 || pump_wavelength_nm.is_nan() {
            return Err(Error::Domain(format!(
                "pump wavelength must be positive, got {pump_wavelength_nm} nm"
            )));
        }
        if mean_pair_rate_hz <= 0.0 || mean_pair_rate_hz.is_nan() {
            return Err(Error::Domain(format!(
                "mean pair rate must be positive, got {mean_pair_rate_hz} /s"
            )));
        }
        Ok(Self {
            pump_wavelength_nm,
            pinhole_spectrum,
            mean_pair_rate_hz,
            emission_jitter_s: 0.0,
        })
    }

    /// True when the pinhole is not centered on the degenerate
    /// wavelength 2 x pump (worth a warning, not an error).
    pub fn is_nondegenerate(&self) -> bool {
        let degenerate = 2.0 * self.pump_wavelength_nm;
        (self.pinhole_spectrum.center_nm - degenerate).abs() > 1.0e-6 * degenerate
    }
}

/// Idler wavelength partnered with `signal_nm` under a pump at
/// `pump_nm`: 1/idler = 1/pump - 1/signal.
pub fn idler_wavelength(pump_nm: f64, signal_nm: f64) -> Result<f64> {
    if pump_nm <= 0.0 || pump_nm.is_nan() {
        return Err(Error::Domain(format!(
            "pump wavelength must be positive, got {pump_nm} nm"
        )));
    }
    if signal_nm <= pump_nm {
        return Err(Error::Domain(format!(
            "signal wavelength {signal_nm} nm must exceed the pump {pump_nm} nm \
             (idler energy would be non-positive)"
        )));
    }
    Ok(1.0 / (1.0 / pump_nm - 1.0 / signal_nm))
}

/// Time slice length used to partition Poisson generation, seconds.
/// Commits the stream to a fixed slicing so worker count cannot change
/// the output.
const SLICE_S: f64 = 1.0e-3;

/// Generate the pair stream for `duration_s`, ordered by emission time.
///
/// Emission times are Poisson at the configured mean rate. Signal
/// wavelengths sample the pinhole spectrum; idlers follow from energy
/// conservation; outcomes are initialized to lost and set downstream by
/// the routing stage. Equal seeds give equal streams.
pub fn generate_pairs(
    config: &SourceConfig,
    duration_s: f64,
    seeds: &SeedStream,
) -> Result<Vec<PhotonPairEvent>> {
    let mut events = Vec::with_capacity((config.mean_pair_rate_hz * duration_s * 1.1) as usize + 16);
    stream_pairs(config, duration_s, seeds, |e| events.push(e))?;
    Ok(events)
}

/// Stream the pair events for `duration_s` through `sink` without
/// materializing them. Identical draws to [`generate_pairs`].
pub fn stream_pairs(
    config: &SourceConfig,
    duration_s: f64,
    seeds: &SeedStream,
    mut sink: impl FnMut(PhotonPairEvent),
) -> Result<()> {
    if duration_s <= 0.0 || duration_s.is_nan() {
        return Err(Error::Domain(format!(
            "duration must be positive, got {duration_s} s"
        )));
    }
    let n_slices = (duration_s / SLICE_S).ceil().max(1.0) as u64;
    for slice in 0..n_slices {
        let t0 = slice as f64 * SLICE_S;
        let t1 = ((slice + 1) as f64 * SLICE_S).min(duration_s);
        generate_slice(config, t0, t1, seeds, slice, &mut sink)?;
    }
    Ok(())
}

/// Generate exactly `count` pairs. The emission clock still advances by
/// exponential interarrival times, so timing statistics match the
/// rate-based path.
pub fn generate_pair_count(
    config: &SourceConfig,
    count: usize,
    seeds: &SeedStream,
) -> Result<Vec<PhotonPairEvent>> {
    let mut events = Vec::with_capacity(count);
    stream_pair_count(config, count, seeds, |e| events.push(e))?;
    Ok(events)
}

/// Stream exactly `count` pairs through `sink` without materializing
/// them. Identical draws to [`generate_pair_count`].
pub fn stream_pair_count(
    config: &SourceConfig,
    count: usize,
    seeds: &SeedStream,
    mut sink: impl FnMut(PhotonPairEvent),
) -> Result<()> {
    let mut rng = seeds.rng("pair-stream", 0);
    let exp = Exp::new(config.mean_pair_rate_hz)
        .map_err(|e| Error::Domain(format!("invalid pair rate: {e}")))?;
    let jitter = jitter_dist(config.emission_jitter_s)?;
    let mut t = 0.0;
    for _ in 0..count {
        t += exp.sample(&mut rng);
        sink(draw_pair(config, t, &jitter, &mut rng)?);
    }
    Ok(())
}

fn jitter_dist(sigma_s: f64) -> Result<Option<Normal<f64>>> {
    if sigma_s < 0.0 {
        return Err(Error::Domain(format!(
            "emission jitter must be non-negative, got {sigma_s} s"
        )));
    }
    if sigma_s == 0.0 {
        Ok(None)
    } else {
        Ok(Some(Normal::new(0.0, sigma_s).expect("positive sigma")))
    }
}

fn generate_slice(
    config: &SourceConfig,
    t0: f64,
    t1: f64,
    seeds: &SeedStream,
    slice: u64,
    sink: &mut impl FnMut(PhotonPairEvent),
) -> Result<()> {
    if t1 <= t0 {
        return Ok(());
    }
    let mut rng = seeds.rng("pair-slice", slice);
    let exp = Exp::new(config.mean_pair_rate_hz)
        .map_err(|e| Error::Domain(format!("invalid pair rate: {e}")))?;
    let jitter = jitter_dist(config.emission_jitter_s)?;
    let mut t = t0;
    loop {
        t += exp.sample(&mut rng);
        if t >= t1 {
            return Ok(());
        }
        sink(draw_pair(config, t, &jitter, &mut rng)?);
    }
}

fn draw_pair<R: Rng + ?Sized>(
    config: &SourceConfig,
    emission_time_s: f64,
    jitter: &Option<Normal<f64>>,
    rng: &mut R,
) -> Result<PhotonPairEvent> {
    // Resample the rare pinhole draw that would leave the idler with
    // non-positive energy (possible only for pathological configs).
    let (signal, idler) = loop {
        let signal = config.pinhole_spectrum.sample_wavelength(rng);
        if signal > config.pump_wavelength_nm {
            break (signal, idler_wavelength(config.pump_wavelength_nm, signal)?);
        }
    };
    let emission = match jitter {
        Some(dist) => emission_time_s + dist.sample(rng),
        None => emission_time_s,
    };
    Ok(PhotonPairEvent {
        emission_time_s: emission,
        signal_wavelength_nm: signal,
        idler_wavelength_nm: idler,
        signal_outcome: SignalOutcome::Lost,
        idler_outcome: IdlerOutcome::Lost,
        signal_detect_time_s: None,
        idler_detect_time_s: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Shape;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn test_config(rate: f64) -> SourceConfig {
        SourceConfig::new(
            351.0,
            Spectrum::new(702.0, 25.0, Shape::Rectangular).unwrap(),
            rate,
        )
        .unwrap()
    }

    #[test]
    fn idler_wavelength_degenerate_split() {
        assert_relative_eq!(idler_wavelength(351.0, 702.0).unwrap(), 702.0, epsilon = 1e-12);
    }

    #[test]
    fn idler_wavelength_direct_arithmetic_oracle() {
        // 1/(1/351 - 1/690) = 351*690/(690-351) = 242190/339
        assert_relative_eq!(
            idler_wavelength(351.0, 690.0).unwrap(),
            242_190.0 / 339.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn idler_wavelength_near_pump_is_finite() {
        let idler = idler_wavelength(351.0, 351.0001).unwrap();
        assert!(idler.is_finite());
        assert!(idler > 1.0e6);
    }

    #[test]
    fn idler_wavelength_rejects_signal_at_or_below_pump() {
        assert!(idler_wavelength(351.0, 351.0).is_err());
        assert!(idler_wavelength(351.0, 300.0).is_err());
        assert!(idler_wavelength(0.0, 702.0).is_err());
    }

    proptest! {
        /// First-order anticorrelation: signal 702 + d pairs with idler
        /// 702 - d + O(d^2), |sum - 1404| <= d^2/175.
        #[test]
        fn anticorrelation_bound(delta in -13.0f64..13.0) {
            prop_assume!(delta.abs() > 1e-9);
            let signal = 702.0 + delta;
            let idler = idler_wavelength(351.0, signal).unwrap();
            let drift = (signal + idler - 1404.0).abs();
            prop_assert!(drift <= delta * delta / 175.0,
                "delta {delta}: drift {drift:.6e}");
        }
    }

    #[test]
    fn generated_pairs_conserve_energy() {
        let config = test_config(1.0e5);
        let seeds = SeedStream::new(9);
        let events = generate_pair_count(&config, 100_000, &seeds).unwrap();
        assert_eq!(events.len(), 100_000);
        for e in &events {
            assert!(e.conservation_error(config.pump_wavelength_nm) <= 1.0e-12);
            assert_eq!(e.signal_outcome, SignalOutcome::Lost);
            assert_eq!(e.idler_outcome, IdlerOutcome::Lost);
            assert!(e.signal_detect_time_s.is_none());
        }
    }

    #[test]
    fn poisson_count_statistics() {
        // count = R T +- 4 sqrt(R T)
        let config = test_config(1.0e5);
        let seeds = SeedStream::new(10);
        let duration = 2.0;
        let events = generate_pairs(&config, duration, &seeds).unwrap();
        let expected = config.mean_pair_rate_hz * duration;
        let bound = 4.0 * expected.sqrt();
        let n = events.len() as f64;
        assert!(
            (n - expected).abs() <= bound,
            "count {n} vs {expected} +- {bound}"
        );
        // ordered by emission time
        assert!(events.windows(2).all(|w| w[0].emission_time_s <= w[1].emission_time_s));
        assert!(events.iter().all(|e| e.emission_time_s < duration));
    }

    #[test]
    fn epsilon_duration_yields_near_empty_stream() {
        let config = test_config(1.0e5);
        let seeds = SeedStream::new(11);
        let events = generate_pairs(&config, 1.0e-9, &seeds).unwrap();
        assert!(events.len() <= 2);
        assert!(generate_pairs(&config, 0.0, &seeds).is_err());
    }

    #[test]
    fn identical_seeds_reproduce_stream() {
        let config = test_config(5.0e4);
        let a = generate_pairs(&config, 0.25, &SeedStream::new(77)).unwrap();
        let b = generate_pairs(&config, 0.25, &SeedStream::new(77)).unwrap();
        assert_eq!(a, b);
        let c = generate_pairs(&config, 0.25, &SeedStream::new(78)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn slice_partitioning_is_stable_across_durations() {
        // A longer run begins with exactly the shorter run's events:
        // slices are keyed by index, not by total duration.
        let config = test_config(5.0e4);
        let seeds = SeedStream::new(21);
        let short = generate_pairs(&config, 0.010, &seeds).unwrap();
        let long = generate_pairs(&config, 0.020, &seeds).unwrap();
        assert_eq!(&long[..short.len()], &short[..]);
    }

    #[test]
    fn nondegenerate_pinhole_flagged() {
        let mut config = test_config(1.0e4);
        assert!(!config.is_nondegenerate());
        config.pinhole_spectrum = Spectrum::new(690.0, 25.0, Shape::Rectangular).unwrap();
        assert!(config.is_nondegenerate());
    }
}

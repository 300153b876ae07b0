//! The AND unit: windowed coincidence counting over detection streams.
//!
//! A coincidence is a D1 detection and a D2 detection whose delayed
//! timestamps differ by at most half the window (full-width convention).
//! Matching is greedy earliest-first and one-to-one, the standard model
//! of a dead-time-limited AND circuit, exact at low rates. D1 x D3
//! coincidences are tallied in an auxiliary field for the
//! destructive-port cross-check; singles counters see every detection
//! regardless of pairing.

use crate::error::{Error, Result};
use crate::pair_source::{IdlerOutcome, PhotonPairEvent, SignalOutcome};
use crate::spectral::FilterSpec;

/// AND-unit configuration: window full width and per-line delays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceConfig {
    pub window_s: f64,
    pub delay_d1_s: f64,
    pub delay_d2_s: f64,
}

impl CoincidenceConfig {
    pub fn new(window_s: f64) -> Result<Self> {
        if window_s <= 0.0 || window_s.is_nan() {
            return Err(Error::Domain(format!(
                "coincidence window must be positive, got {window_s} s"
            )));
        }
        Ok(Self {
            window_s,
            delay_d1_s: 0.0,
            delay_d2_s: 0.0,
        })
    }
}

impl Default for CoincidenceConfig {
    /// 1.0 ns window, zero delays.
    fn default() -> Self {
        Self {
            window_s: 1.0e-9,
            delay_d1_s: 0.0,
            delay_d2_s: 0.0,
        }
    }
}

/// Counter contents after one run, with the experiment context that
/// produced it (filled by the scan runner).
#[derive(Debug, Clone, PartialEq)]
pub struct CountRecord {
    pub singles_d1: u64,
    pub singles_d2: u64,
    pub singles_d3: u64,
    /// D1 x D2 coincidences: the AND output of the bench.
    pub coincidences: u64,
    /// D1 x D3 coincidences (destructive port), for the complementarity
    /// cross-check; not included in `coincidences`.
    pub coincidences_d1_d3: u64,
    pub duration_s: f64,
    pub pairs_generated: u64,
    pub coincidence_config: CoincidenceConfig,
    /// Optical path difference of the run, um (experiment context).
    pub delta_um: f64,
    /// Remote filter in place during the run, if any.
    pub filter: Option<FilterSpec>,
    pub seed: u64,
}

impl CountRecord {
    pub fn coincidence_rate_hz(&self) -> f64 {
        self.coincidences as f64 / self.duration_s
    }

    pub fn singles_d2_rate_hz(&self) -> f64 {
        self.singles_d2 as f64 / self.duration_s
    }
}

/// Raw detection timestamps feeding the AND unit, before delays.
#[derive(Debug, Clone, Default)]
pub struct DetectionStreams {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
}

impl DetectionStreams {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            d1: Vec::with_capacity(n),
            d2: Vec::with_capacity(n),
            d3: Vec::with_capacity(n),
        }
    }

    /// Record a routed event's detections.
    pub fn absorb(&mut self, event: &PhotonPairEvent) {
        if event.idler_outcome == IdlerOutcome::D1 {
            if let Some(t) = event.idler_detect_time_s {
                self.d1.push(t);
            }
        }
        match (event.signal_outcome, event.signal_detect_time_s) {
            (SignalOutcome::D2, Some(t)) => self.d2.push(t),
            (SignalOutcome::D3, Some(t)) => self.d3.push(t),
            _ => {}
        }
    }
}

/// Count coincidences in a stream of routed events (must be ordered by
/// emission time; unordered input is a contract violation).
pub fn count(
    events: &[PhotonPairEvent],
    cfg: &CoincidenceConfig,
    duration_s: f64,
) -> Result<CountRecord> {
    for w in events.windows(2) {
        if w[0].emission_time_s > w[1].emission_time_s {
            return Err(Error::Contract(
                "event stream not ordered by emission time".into(),
            ));
        }
    }
    let mut streams = DetectionStreams::with_capacity(events.len());
    for e in events {
        streams.absorb(e);
    }
    Ok(count_detections(
        streams,
        cfg,
        duration_s,
        events.len() as u64,
    ))
}

/// Count coincidences directly from detection streams. Used by the scan
/// runner, which streams events through routing without materializing
/// them, and to merge detector dark counts into the lines.
pub fn count_detections(
    mut streams: DetectionStreams,
    cfg: &CoincidenceConfig,
    duration_s: f64,
    pairs_generated: u64,
) -> CountRecord {
    let sort = |v: &mut Vec<f64>, delay: f64| {
        for t in v.iter_mut() {
            *t += delay;
        }
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite detection times"));
    };
    // The D3 line shares the signal-side delay.
    sort(&mut streams.d1, cfg.delay_d1_s);
    sort(&mut streams.d2, cfg.delay_d2_s);
    sort(&mut streams.d3, cfg.delay_d2_s);

    let half_window = 0.5 * cfg.window_s;
    let coincidences = greedy_matches(&streams.d1, &streams.d2, half_window);
    let coincidences_d1_d3 = greedy_matches(&streams.d1, &streams.d3, half_window);

    CountRecord {
        singles_d1: streams.d1.len() as u64,
        singles_d2: streams.d2.len() as u64,
        singles_d3: streams.d3.len() as u64,
        coincidences,
        coincidences_d1_d3,
        duration_s,
        pairs_generated,
        coincidence_config: *cfg,
        delta_um: 0.0,
        filter: None,
        seed: 0,
    }
}

/// Greedy earliest-first one-to-one matching of two sorted timestamp
/// streams within `half_window`.
fn greedy_matches(a: &[f64], b: &[f64], half_window: f64) -> u64 {
    let (mut i, mut j, mut matches) = (0, 0, 0u64);
    while i < a.len() && j < b.len() {
        let dt = a[i] - b[j];
        if dt.abs() <= half_window {
            matches += 1;
            i += 1;
            j += 1;
        } else if a[i] < b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    matches
}

//! Run configuration, CSV emission, and the command entry points behind
//! the `biphoton` binary.
//!
//! Configuration is a flat `key = value` text format with unit suffixes
//! (`delta = 220um`, `window = 1ns`); command-line flags reuse the same
//! keys and override file values. Every CSV starts with '#'-prefixed
//! metadata lines carrying the config fingerprint, the seed, and the
//! full config echo, so any output can be reproduced byte-for-byte from
//! its own header.

use std::fmt::Write as _;
use std::io::Write;

use crate::analysis::{
    conditional_signal_spectrum, conditional_visibility, extract_visibility,
    extract_visibility_channel, run_no_signaling_rep, run_point, run_scan, visibility_analytic,
    visibility_overlap, Apparatus, CountChannel, FringeScan, NoSignalingReport, RunLength, ScanGrid,
    ScanKind, VisibilityResult,
};
use crate::coincidence::CoincidenceConfig;
use crate::error::{Error, Result};
use crate::interferometer::{DetectorConfig, MichelsonConfig};
use crate::pair_source::SourceConfig;
use crate::rng::fnv1a64;
use crate::spectral::{FilterSpec, Shape, Spectrum};
use crate::subpackets::{barrier_demo, decompose, EnvelopeGrid, SubpacketSet};
use crate::SeedStream;

/// Remote-filter selection: the built-in bench presets or a custom passband.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterChoice {
    None,
    /// Narrowband preset: 0.86 nm at 702 nm.
    F1,
    /// Broadband preset: 10 nm at 702 nm.
    F2,
    Custom {
        center_nm: f64,
        bandwidth_nm: f64,
        peak: f64,
    },
}

impl FilterChoice {
    /// Materialize the choice with the configured spectral shape
    /// (custom filters also take it).
    pub fn to_filter(self, shape: Shape) -> Result<Option<FilterSpec>> {
        match self {
            FilterChoice::None => Ok(None),
            FilterChoice::F1 => Ok(Some(FilterSpec::new(702.0, 0.86, shape, 1.0)?)),
            FilterChoice::F2 => Ok(Some(FilterSpec::new(702.0, 10.0, shape, 1.0)?)),
            FilterChoice::Custom {
                center_nm,
                bandwidth_nm,
                peak,
            } => Ok(Some(FilterSpec::new(center_nm, bandwidth_nm, shape, peak)?)),
        }
    }

    fn label(&self) -> String {
        match self {
            FilterChoice::None => "none".into(),
            FilterChoice::F1 => "f1".into(),
            FilterChoice::F2 => "f2".into(),
            FilterChoice::Custom { .. } => "custom".into(),
        }
    }
}

/// Full run configuration; file keys and flag names are identical.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pump_wavelength_nm: f64,
    pub pinhole_center_nm: f64,
    pub pinhole_bandwidth_nm: f64,
    pub pinhole_shape: Shape,
    pub pair_rate_hz: f64,
    pub emission_jitter_s: f64,
    pub delta_um: f64,
    pub phase_offset_rad: f64,
    pub detector_d1: DetectorConfig,
    pub detector_d2: DetectorConfig,
    pub detector_d3: DetectorConfig,
    pub window_s: f64,
    pub delay_d1_s: f64,
    pub delay_d2_s: f64,
    pub filter: FilterChoice,
    /// Spectral shape used for the filter profile and the conditional
    /// (analytic) predictions.
    pub shape: Shape,
    pub pairs: Option<u64>,
    pub duration_s: Option<f64>,
    pub seed: u64,
}

impl Default for RunConfig {
    /// The published bench with the narrowband filter in place and a
    /// million pairs.
    fn default() -> Self {
        Self {
            pump_wavelength_nm: 351.0,
            pinhole_center_nm: 702.0,
            pinhole_bandwidth_nm: 25.0,
            pinhole_shape: Shape::Rectangular,
            pair_rate_hz: 1.0e5,
            emission_jitter_s: 0.0,
            delta_um: 220.0,
            phase_offset_rad: 0.0,
            detector_d1: DetectorConfig::ideal(),
            detector_d2: DetectorConfig::ideal(),
            detector_d3: DetectorConfig::ideal(),
            window_s: 1.0e-9,
            delay_d1_s: 0.0,
            delay_d2_s: 0.0,
            filter: FilterChoice::F1,
            shape: Shape::Rectangular,
            pairs: Some(1_000_000),
            duration_s: None,
            seed: 42,
        }
    }
}

fn parse_f64(key: &str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("{key}: cannot parse number from '{raw}'")))
}

/// Parse a length with an optional nm/um/mm suffix into `unit_nm`
/// multiples of a nanometer (1 for nm keys, 1000 for um keys).
fn parse_length(key: &str, raw: &str, canonical_nm: f64) -> Result<f64> {
    let raw = raw.trim();
    let (num, factor_nm) = if let Some(v) = raw.strip_suffix("nm") {
        (v, 1.0)
    } else if let Some(v) = raw.strip_suffix("um") {
        (v, 1.0e3)
    } else if let Some(v) = raw.strip_suffix("mm") {
        (v, 1.0e6)
    } else {
        (raw, canonical_nm)
    };
    Ok(parse_f64(key, num)? * factor_nm / canonical_nm)
}

/// Parse a time with an optional s/ms/us/ns/ps suffix into seconds;
/// bare numbers are seconds.
fn parse_time_s(key: &str, raw: &str) -> Result<f64> {
    let raw = raw.trim();
    let (num, factor) = if let Some(v) = raw.strip_suffix("ms") {
        (v, 1.0e-3)
    } else if let Some(v) = raw.strip_suffix("us") {
        (v, 1.0e-6)
    } else if let Some(v) = raw.strip_suffix("ns") {
        (v, 1.0e-9)
    } else if let Some(v) = raw.strip_suffix("ps") {
        (v, 1.0e-12)
    } else if let Some(v) = raw.strip_suffix('s') {
        (v, 1.0)
    } else {
        (raw, 1.0)
    };
    Ok(parse_f64(key, num)? * factor)
}

impl RunConfig {
    /// Apply one `key = value` assignment (file line or flag).
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "pump_wavelength" => self.pump_wavelength_nm = parse_length(key, v, 1.0)?,
            "pinhole_center" => self.pinhole_center_nm = parse_length(key, v, 1.0)?,
            "pinhole_bandwidth" => self.pinhole_bandwidth_nm = parse_length(key, v, 1.0)?,
            "pinhole_shape" => self.pinhole_shape = v.parse()?,
            "pair_rate" => self.pair_rate_hz = parse_f64(key, v)?,
            "emission_jitter" => self.emission_jitter_s = parse_time_s(key, v)?,
            "delta" => self.delta_um = parse_length(key, v, 1.0e3)?,
            "phase_offset" => self.phase_offset_rad = parse_f64(key, v)?,
            "efficiency_d1" => self.detector_d1.efficiency = parse_f64(key, v)?,
            "efficiency_d2" => self.detector_d2.efficiency = parse_f64(key, v)?,
            "efficiency_d3" => self.detector_d3.efficiency = parse_f64(key, v)?,
            "dark_rate_d1" => self.detector_d1.dark_rate_hz = parse_f64(key, v)?,
            "dark_rate_d2" => self.detector_d2.dark_rate_hz = parse_f64(key, v)?,
            "dark_rate_d3" => self.detector_d3.dark_rate_hz = parse_f64(key, v)?,
            "jitter_d1" => self.detector_d1.jitter_s = parse_time_s(key, v)?,
            "jitter_d2" => self.detector_d2.jitter_s = parse_time_s(key, v)?,
            "jitter_d3" => self.detector_d3.jitter_s = parse_time_s(key, v)?,
            "window" => self.window_s = parse_time_s(key, v)?,
            "delay_d1" => self.delay_d1_s = parse_time_s(key, v)?,
            "delay_d2" => self.delay_d2_s = parse_time_s(key, v)?,
            "filter" => {
                self.filter = match v.to_ascii_lowercase().as_str() {
                    "none" => FilterChoice::None,
                    "f1" => FilterChoice::F1,
                    "f2" => FilterChoice::F2,
                    other => {
                        return Err(Error::Config(format!(
                            "filter: expected none, f1, or f2, got '{other}' \
                             (custom filters use filter_center/filter_bandwidth/filter_peak)"
                        )))
                    }
                }
            }
            "filter_center" => {
                let center = parse_length(key, v, 1.0)?;
                self.filter = match self.filter {
                    FilterChoice::Custom {
                        bandwidth_nm, peak, ..
                    } => FilterChoice::Custom {
                        center_nm: center,
                        bandwidth_nm,
                        peak,
                    },
                    _ => FilterChoice::Custom {
                        center_nm: center,
                        bandwidth_nm: 1.0,
                        peak: 1.0,
                    },
                };
            }
            "filter_bandwidth" => {
                let bw = parse_length(key, v, 1.0)?;
                self.filter = match self.filter {
                    FilterChoice::Custom {
                        center_nm, peak, ..
                    } => FilterChoice::Custom {
                        center_nm,
                        bandwidth_nm: bw,
                        peak,
                    },
                    _ => FilterChoice::Custom {
                        center_nm: 702.0,
                        bandwidth_nm: bw,
                        peak: 1.0,
                    },
                };
            }
            "filter_peak" => {
                let peak = parse_f64(key, v)?;
                self.filter = match self.filter {
                    FilterChoice::Custom {
                        center_nm,
                        bandwidth_nm,
                        ..
                    } => FilterChoice::Custom {
                        center_nm,
                        bandwidth_nm,
                        peak,
                    },
                    _ => FilterChoice::Custom {
                        center_nm: 702.0,
                        bandwidth_nm: 1.0,
                        peak,
                    },
                };
            }
            "shape" => self.shape = v.parse()?,
            "pairs" => {
                let n = parse_f64(key, v)?;
                if n < 1.0 || n.is_nan() || n.fract() != 0.0 {
                    return Err(Error::Config(format!(
                        "pairs must be a positive integer, got '{v}'"
                    )));
                }
                self.pairs = Some(n as u64);
                self.duration_s = None;
            }
            "duration" => {
                self.duration_s = Some(parse_time_s(key, v)?);
                self.pairs = None;
            }
            "seed" => {
                self.seed = v
                    .parse::<u64>()
                    .map_err(|_| Error::Config(format!("seed: bad integer '{v}'")))?;
            }
            other => {
                return Err(Error::Config(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    /// Parse a flat key = value config file ('#' comments allowed).
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected 'key = value', got '{line}'",
                    path.display(),
                    lineno + 1
                ))
            })?;
            config.apply_kv(key.trim(), value)?;
        }
        Ok(config)
    }

    pub fn pinhole_spectrum(&self) -> Result<Spectrum> {
        Spectrum::new(
            self.pinhole_center_nm,
            self.pinhole_bandwidth_nm,
            self.pinhole_shape,
        )
    }

    pub fn apparatus(&self) -> Result<Apparatus> {
        let mut source = SourceConfig::new(
            self.pump_wavelength_nm,
            self.pinhole_spectrum()?,
            self.pair_rate_hz,
        )?;
        source.emission_jitter_s = self.emission_jitter_s;
        let mut coincidence = CoincidenceConfig::new(self.window_s)?;
        coincidence.delay_d1_s = self.delay_d1_s;
        coincidence.delay_d2_s = self.delay_d2_s;
        let app = Apparatus {
            source,
            michelson: MichelsonConfig::with_phase(self.delta_um, self.phase_offset_rad)?,
            detector_d1: self.detector_d1,
            detector_d2: self.detector_d2,
            detector_d3: self.detector_d3,
            coincidence,
            filter: self.filter.to_filter(self.shape)?,
        };
        app.validate()?;
        Ok(app)
    }

    /// Exactly one of pairs/duration must be set.
    pub fn run_length(&self) -> Result<RunLength> {
        match (self.pairs, self.duration_s) {
            (Some(n), None) => Ok(RunLength::Pairs(n)),
            (None, Some(t)) => {
                if t <= 0.0 || t.is_nan() {
                    return Err(Error::Config(format!("duration must be positive, got {t} s")));
                }
                Ok(RunLength::Duration(t))
            }
            _ => Err(Error::Config(
                "exactly one of pairs/duration must be set".into(),
            )),
        }
    }

    /// Canonical key = value listing, fixed order; the fingerprint and
    /// the metadata echo both derive from it.
    pub fn canonical_lines(&self) -> Vec<String> {
        let d = |det: &DetectorConfig| (det.efficiency, det.dark_rate_hz, det.jitter_s);
        let (e1, dr1, j1) = d(&self.detector_d1);
        let (e2, dr2, j2) = d(&self.detector_d2);
        let (e3, dr3, j3) = d(&self.detector_d3);
        let mut lines = vec![
            format!("pump_wavelength = {:e}nm", self.pump_wavelength_nm),
            format!("pinhole_center = {:e}nm", self.pinhole_center_nm),
            format!("pinhole_bandwidth = {:e}nm", self.pinhole_bandwidth_nm),
            format!("pinhole_shape = {}", self.pinhole_shape),
            format!("pair_rate = {:e}", self.pair_rate_hz),
            format!("emission_jitter = {:e}s", self.emission_jitter_s),
            format!("delta = {:e}um", self.delta_um),
            format!("phase_offset = {:e}", self.phase_offset_rad),
            format!("efficiency_d1 = {e1:e}"),
            format!("efficiency_d2 = {e2:e}"),
            format!("efficiency_d3 = {e3:e}"),
            format!("dark_rate_d1 = {dr1:e}"),
            format!("dark_rate_d2 = {dr2:e}"),
            format!("dark_rate_d3 = {dr3:e}"),
            format!("jitter_d1 = {j1:e}s"),
            format!("jitter_d2 = {j2:e}s"),
            format!("jitter_d3 = {j3:e}s"),
            format!("window = {:e}s", self.window_s),
            format!("delay_d1 = {:e}s", self.delay_d1_s),
            format!("delay_d2 = {:e}s", self.delay_d2_s),
            format!("filter = {}", self.filter.label()),
        ];
        if let FilterChoice::Custom {
            center_nm,
            bandwidth_nm,
            peak,
        } = self.filter
        {
            lines.push(format!("filter_center = {center_nm:e}nm"));
            lines.push(format!("filter_bandwidth = {bandwidth_nm:e}nm"));
            lines.push(format!("filter_peak = {peak:e}"));
        }
        lines.push(format!("shape = {}", self.shape));
        match (self.pairs, self.duration_s) {
            (Some(n), _) => lines.push(format!("pairs = {n}")),
            (_, Some(t)) => lines.push(format!("duration = {t:e}s")),
            _ => {}
        }
        lines.push(format!("seed = {}", self.seed));
        lines
    }

    /// FNV-1a fingerprint of the canonical config text.
    pub fn fingerprint(&self) -> u64 {
        fnv1a64(self.canonical_lines().join("\n").as_bytes())
    }
}

fn write_metadata(out: &mut dyn Write, title: &str, config: &RunConfig) -> Result<()> {
    writeln!(out, "# biphoton {title}")?;
    writeln!(out, "# config_fingerprint = {:016x}", config.fingerprint())?;
    writeln!(out, "# seed = {}", config.seed)?;
    for line in config.canonical_lines() {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

/// Run a scan and emit one CSV row per point.
///
/// Columns: abscissa_um, singles_D1, singles_D2, singles_D3,
/// coincidences_D1D2, coincidences_D1D3, duration_s.
pub fn cmd_scan(config: &RunConfig, grid: &ScanGrid, out: &mut dyn Write) -> Result<FringeScan> {
    let app = config.apparatus()?;
    let scan = run_scan(&app, grid, config.run_length()?, &SeedStream::new(config.seed))?;
    write_metadata(out, "scan", config)?;
    let kind = match grid.kind {
        ScanKind::CoarseDelta => "coarse",
        ScanKind::FinePhase => "fine",
    };
    writeln!(out, "# scan_kind = {kind}")?;
    writeln!(
        out,
        "abscissa_um,singles_D1,singles_D2,singles_D3,coincidences_D1D2,coincidences_D1D3,duration_s"
    )?;
    for (x, rec) in scan.points() {
        writeln!(
            out,
            "{:e},{},{},{},{},{},{:e}",
            x,
            rec.singles_d1,
            rec.singles_d2,
            rec.singles_d3,
            rec.coincidences,
            rec.coincidences_d1_d3,
            rec.duration_s
        )?;
    }
    Ok(scan)
}

/// Everything the visibility command measures and predicts.
#[derive(Debug, Clone)]
pub struct VisibilitySummary {
    /// Coherence length of the conditional spectrum, um.
    pub w_um: f64,
    /// The overlap formula at (delta, W).
    pub overlap: f64,
    /// |g1| of the idealized conditional spectrum (filter reflected
    /// through energy conservation), at the configured shape.
    pub analytic: f64,
    /// |g1| of the exact pinhole x filter conditional density.
    pub conditional: f64,
    /// Monte Carlo fit on the coincidence channel.
    pub mc: VisibilityResult,
    /// Monte Carlo fit on the D2 singles channel (flat: filters act
    /// only in coincidence).
    pub singles_d2: VisibilityResult,
}

/// Fine scan + cosine fit + the analytic and overlap-formula predictions,
/// with discrepancy notes. CSV goes to `out`, the report to `report`.
pub fn cmd_visibility(
    config: &RunConfig,
    out: &mut dyn Write,
    report: &mut dyn Write,
) -> Result<VisibilitySummary> {
    let app = config.apparatus()?;
    let grid = ScanGrid::fine_default(config.delta_um);
    let scan = run_scan(&app, &grid, config.run_length()?, &SeedStream::new(config.seed))?;
    let mc = extract_visibility(&scan)?;
    let singles_d2 = extract_visibility_channel(&scan, CountChannel::SinglesD2)?;

    // Conditional spectrum: the filter reflected through energy
    // conservation, or the pinhole itself when no filter is in place.
    let conditional_spectrum = match app.filter.as_ref() {
        Some(f) => conditional_signal_spectrum(config.pump_wavelength_nm, f)?,
        None => app.source.pinhole_spectrum,
    };
    let w_um = conditional_spectrum.coherence_length_um();
    let overlap = visibility_overlap(config.delta_um, w_um)?;
    let analytic = visibility_analytic(&conditional_spectrum, config.delta_um)?;
    let conditional = conditional_visibility(&app.source, app.filter.as_ref(), config.delta_um)?;

    let summary = VisibilitySummary {
        w_um,
        overlap,
        analytic,
        conditional,
        mc,
        singles_d2,
    };

    write_metadata(out, "visibility", config)?;
    writeln!(out, "# W_um = {:e}", summary.w_um)?;
    writeln!(out, "# V_overlap = {:e}", summary.overlap)?;
    writeln!(out, "# V_analytic = {:e}", summary.analytic)?;
    writeln!(out, "# V_conditional = {:e}", summary.conditional)?;
    writeln!(out, "# V_mc = {:e}", summary.mc.visibility)?;
    writeln!(out, "# V_mc_stderr = {:e}", summary.mc.standard_error)?;
    writeln!(out, "# period_nm = {:e}", summary.mc.period_estimate_nm)?;
    writeln!(out, "# V_singles_d2 = {:e}", summary.singles_d2.visibility)?;
    writeln!(
        out,
        "abscissa_um,singles_D1,singles_D2,singles_D3,coincidences_D1D2,coincidences_D1D3,duration_s"
    )?;
    for (x, rec) in scan.points() {
        writeln!(
            out,
            "{:e},{},{},{},{},{},{:e}",
            x,
            rec.singles_d1,
            rec.singles_d2,
            rec.singles_d3,
            rec.coincidences,
            rec.coincidences_d1_d3,
            rec.duration_s
        )?;
    }

    writeln!(report, "delta = {} um, filter = {}, shape = {}", config.delta_um, config.filter.label(), config.shape)?;
    writeln!(report, "conditional coherence length W = {:.1} um", summary.w_um)?;
    writeln!(report, "  overlap formula   V = {:.4}", summary.overlap)?;
    writeln!(report, "  analytic |g1|     V = {:.4}", summary.analytic)?;
    writeln!(report, "  conditional |g1|  V = {:.4}  (pinhole-truncated)", summary.conditional)?;
    writeln!(
        report,
        "  Monte Carlo fit   V = {:.4} +- {:.4}  (period {:.1} nm)",
        summary.mc.visibility, summary.mc.standard_error, summary.mc.period_estimate_nm
    )?;
    writeln!(
        report,
        "  D2 singles fit    V = {:.4}  (remote filter leaves singles flat)",
        summary.singles_d2.visibility
    )?;
    let mut notes = String::new();
    if (summary.analytic - summary.overlap).abs() > 1.0e-3 {
        let _ = write!(
            notes,
            "overlap formula is exact only for the sinc2 shape (shape here: {}); ",
            config.shape
        );
    }
    if (summary.conditional - summary.analytic).abs() > 1.0e-3 {
        let _ = write!(
            notes,
            "pinhole truncation of the filter profile shifts the prediction by {:+.4}; ",
            summary.conditional - summary.analytic
        );
    }
    if notes.is_empty() {
        writeln!(report, "  predictions agree within 1e-3")?;
    } else {
        writeln!(report, "  notes: {}", notes.trim_end_matches([' ', ';']))?;
    }
    Ok(summary)
}

/// Summary of a repeated paired no-signaling run.
#[derive(Debug, Clone)]
pub struct NoSignalingSummary {
    pub reports: Vec<NoSignalingReport>,
    pub passes: usize,
    /// p-value of the injected-bias power check (D2 singles halved).
    pub power_check_p: f64,
}

/// Paired runs with and without the remote filter, one z-test per
/// repetition, plus an injected-bias power check.
pub fn cmd_nosignal(
    config: &RunConfig,
    repetitions: u32,
    out: &mut dyn Write,
    report: &mut dyn Write,
) -> Result<NoSignalingSummary> {
    if repetitions < 1 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    let app = config.apparatus()?;
    // The comparison needs a filter to toggle; default to F1 when the
    // config says none.
    let filter = match app.filter {
        Some(f) => f,
        None => FilterChoice::F1
            .to_filter(config.shape)?
            .expect("F1 preset exists"),
    };
    let length = config.run_length()?;
    let seeds = SeedStream::new(config.seed);

    use rayon::prelude::*;
    let reports: Result<Vec<NoSignalingReport>> = (0..repetitions as u64)
        .into_par_iter()
        .map(|rep| run_no_signaling_rep(&app, &filter, length, &seeds, rep))
        .collect();
    let reports = reports?;
    let passes = reports.iter().filter(|r| r.pass).count();

    // Power check: rerun one arm and halve its D2 singles artificially.
    let power_check_p = {
        let base = run_point(
            &app.clone().with_filter(None),
            length,
            &seeds.scoped("nosignal-power", 0),
        )?;
        let mut biased = base.clone();
        biased.singles_d2 /= 2;
        crate::analysis::no_signaling_test(&biased, &base)?.p_value
    };

    write_metadata(out, "nosignal", config)?;
    writeln!(out, "# repetitions = {repetitions}")?;
    writeln!(out, "# passes = {passes}")?;
    writeln!(out, "# power_check_p = {power_check_p:e}")?;
    writeln!(out, "rep,z,p_value,d2_rate_with_hz,d2_rate_without_hz,pass")?;
    for (i, r) in reports.iter().enumerate() {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{}",
            i, r.z_statistic, r.p_value, r.d2_rate_with_hz, r.d2_rate_without_hz, r.pass
        )?;
    }

    writeln!(
        report,
        "no-signaling: {passes}/{repetitions} repetitions with p > 0.01"
    )?;
    writeln!(
        report,
        "local D2 rate shows no dependence on the remote filter choice: \
         nothing here carries a signal"
    )?;
    writeln!(
        report,
        "power check (artificially halved D2 rate): p = {power_check_p:.3e}"
    )?;
    Ok(NoSignalingSummary {
        reports,
        passes,
        power_check_p,
    })
}

/// Arguments of the subpackets command.
#[derive(Debug, Clone)]
pub struct SubpacketArgs {
    pub n_bands: usize,
    /// None picks the default chirp: band offsets spanning +- W/4.
    pub chirp_um_per_nm: Option<f64>,
    /// Per-band transmissions ordered from the shortest-wavelength band
    /// (the violet end).
    pub barrier: Option<Vec<f64>>,
    pub grid_resolution_um: Option<f64>,
    pub grid_span_um: Option<f64>,
}

impl Default for SubpacketArgs {
    fn default() -> Self {
        Self {
            n_bands: 5,
            chirp_um_per_nm: None,
            barrier: None,
            grid_resolution_um: None,
            grid_span_um: None,
        }
    }
}

/// Band labels: the conditional colors for a five-band split, indexed
/// names otherwise.
fn band_label(i: usize, n: usize) -> String {
    if n == 5 {
        ["V", "B", "G", "Y", "R"][i].to_string()
    } else {
        format!("band{}", i + 1)
    }
}

/// Decompose the pinhole packet into color subpackets and emit parent,
/// band, and (optionally) barrier-transmitted envelopes as CSV rows.
pub fn cmd_subpackets(
    config: &RunConfig,
    args: &SubpacketArgs,
    out: &mut dyn Write,
    report: &mut dyn Write,
) -> Result<SubpacketSet> {
    let spectrum = config.pinhole_spectrum()?;
    let w_um = spectrum.coherence_length_um();
    let n = args.n_bands;
    let chirp = args.chirp_um_per_nm.unwrap_or_else(|| {
        if n < 2 {
            0.0
        } else {
            // offsets spanning +- W/4
            w_um / (2.0 * spectrum.bandwidth_nm * (1.0 - 1.0 / n as f64))
        }
    });
    let resolution = args.grid_resolution_um.unwrap_or(w_um / 40.0);
    let max_offset = chirp.abs() * 0.5 * spectrum.bandwidth_nm * (1.0 - 1.0 / n.max(1) as f64);
    let span = args
        .grid_span_um
        .unwrap_or(1.2 * (n.max(1) as f64 * w_um + 2.0 * max_offset));
    let grid = EnvelopeGrid::new(resolution, span)?;
    let set = decompose(&spectrum, n, chirp, &grid)?;

    write_metadata(out, "subpackets", config)?;
    writeln!(out, "# n_bands = {n}")?;
    writeln!(out, "# chirp_um_per_nm = {chirp:e}")?;
    writeln!(out, "# grid_resolution_um = {resolution:e}")?;
    writeln!(out, "# grid_span_um = {span:e}")?;

    let demo = match &args.barrier {
        Some(ts) => {
            if ts.len() != set.bands.len() {
                return Err(Error::Config(format!(
                    "barrier needs one transmission per band ({} bands, got {})",
                    set.bands.len(),
                    ts.len()
                )));
            }
            let centers: Vec<f64> = set.bands.iter().map(|b| b.spectrum.center_nm).collect();
            let lookup = move |l: f64| {
                let idx = centers
                    .iter()
                    .position(|&c| (c - l).abs() < 1.0e-9)
                    .expect("barrier evaluated at band centers");
                ts[idx]
            };
            let demo = barrier_demo(&set, lookup)?;
            writeln!(out, "# incident_peak_um = {:e}", demo.incident_peak_um)?;
            writeln!(out, "# transmitted_peak_um = {:e}", demo.transmitted_peak_um)?;
            writeln!(out, "# advance_um = {:e}", demo.advance_um)?;
            Some(demo)
        }
        None => None,
    };

    writeln!(out, "band,position_um,intensity")?;
    for (x, i) in set.parent_envelope.samples() {
        writeln!(out, "parent,{x:e},{i:e}")?;
    }
    for (bi, band) in set.bands.iter().enumerate() {
        let label = band_label(bi, set.bands.len());
        for (x, i) in band.envelope.samples() {
            writeln!(out, "{label},{x:e},{i:e}")?;
        }
    }
    if let Some(demo) = &demo {
        for (x, i) in demo.transmitted.samples() {
            writeln!(out, "transmitted,{x:e},{i:e}")?;
        }
    }

    writeln!(
        report,
        "packet W = {:.1} um split into {} band(s), chirp {:.4} um/nm",
        w_um,
        set.bands.len(),
        chirp
    )?;
    for (bi, band) in set.bands.iter().enumerate() {
        writeln!(
            report,
            "  {}: center {:.1} nm, bandwidth {:.2} nm, offset {:+.2} um",
            band_label(bi, set.bands.len()),
            band.spectrum.center_nm,
            band.spectrum.bandwidth_nm,
            band.center_offset_um
        )?;
    }
    if let Some(demo) = &demo {
        writeln!(
            report,
            "barrier: transmitted peak {:+.2} um vs incident {:+.2} um -> advance {:.2} um",
            demo.transmitted_peak_um, demo.incident_peak_um, demo.advance_um
        )?;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_engine_parses_units() {
        let mut c = RunConfig::default();
        c.apply_kv("delta", "220um").unwrap();
        assert_eq!(c.delta_um, 220.0);
        c.apply_kv("delta", "220000nm").unwrap();
        assert_eq!(c.delta_um, 220.0);
        c.apply_kv("delta", "0.22mm").unwrap();
        assert_eq!(c.delta_um, 220.0);
        c.apply_kv("delta", "220").unwrap();
        assert_eq!(c.delta_um, 220.0);
        c.apply_kv("window", "1ns").unwrap();
        assert_eq!(c.window_s, 1.0e-9);
        c.apply_kv("window", "500ps").unwrap();
        assert_eq!(c.window_s, 0.5e-9);
        c.apply_kv("pinhole_bandwidth", "0.86nm").unwrap();
        assert_eq!(c.pinhole_bandwidth_nm, 0.86);
        c.apply_kv("shape", "sinc2").unwrap();
        assert_eq!(c.shape, Shape::Sinc2);
        assert!(c.apply_kv("nonsense", "1").is_err());
        assert!(c.apply_kv("delta", "abc").is_err());
    }

    #[test]
    fn pairs_and_duration_are_exclusive() {
        let mut c = RunConfig::default();
        c.apply_kv("pairs", "1000").unwrap();
        assert!(matches!(c.run_length().unwrap(), RunLength::Pairs(1000)));
        c.apply_kv("duration", "2s").unwrap();
        assert!(matches!(c.run_length().unwrap(), RunLength::Duration(t) if t == 2.0));
        assert!(c.pairs.is_none());
        c.pairs = Some(10);
        assert!(c.run_length().is_err());
    }

    #[test]
    fn fingerprint_tracks_config_changes() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.apply_kv("delta", "221um").unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn config_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "# a comment\n\
             delta = 220um\n\
             filter = f2   # trailing comment\n\
             shape = gaussian\n\
             pairs = 5000\n\
             seed = 9\n",
        )
        .unwrap();
        let c = RunConfig::from_file(&path).unwrap();
        assert_eq!(c.delta_um, 220.0);
        assert_eq!(c.filter, FilterChoice::F2);
        assert_eq!(c.shape, Shape::Gaussian);
        assert_eq!(c.pairs, Some(5000));
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn filter_presets_materialize() {
        let f1 = FilterChoice::F1.to_filter(Shape::Rectangular).unwrap().unwrap();
        assert_eq!(f1.center_nm, 702.0);
        assert_eq!(f1.bandwidth_nm, 0.86);
        let f2 = FilterChoice::F2.to_filter(Shape::Sinc2).unwrap().unwrap();
        assert_eq!(f2.bandwidth_nm, 10.0);
        assert_eq!(f2.shape, Shape::Sinc2);
        assert!(FilterChoice::None.to_filter(Shape::Rectangular).unwrap().is_none());
    }

    #[test]
    fn scan_csv_is_deterministic_and_annotated() {
        let mut config = RunConfig::default();
        config.apply_kv("pairs", "20000").unwrap();
        let grid = ScanGrid::fine(220.0, 2.25, 40);
        let mut a = Vec::new();
        let mut b = Vec::new();
        cmd_scan(&config, &grid, &mut a).unwrap();
        cmd_scan(&config, &grid, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.contains("# config_fingerprint = "));
        assert!(text.contains("# seed = 42"));
        assert!(text.contains("abscissa_um,singles_D1"));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 42);
    }

    #[test]
    fn zero_step_scan_is_single_row() {
        let mut config = RunConfig::default();
        config.apply_kv("pairs", "1000").unwrap();
        let grid = ScanGrid::coarse(220.0, 220.0, 0);
        let mut buf = Vec::new();
        cmd_scan(&config, &grid, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data_rows: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("abscissa"))
            .collect();
        assert_eq!(data_rows.len(), 1);
    }

    #[test]
    fn subpackets_csv_labels_five_bands() {
        let config = RunConfig::default();
        let args = SubpacketArgs::default();
        let mut out = Vec::new();
        let mut report = Vec::new();
        let set = cmd_subpackets(&config, &args, &mut out, &mut report).unwrap();
        assert_eq!(set.bands.len(), 5);
        let text = String::from_utf8(out).unwrap();
        for label in ["parent", "V", "B", "G", "Y", "R"] {
            assert!(
                text.lines().any(|l| l.starts_with(&format!("{label},"))),
                "missing rows for {label}"
            );
        }
        assert!(!text.contains("transmitted,"));
    }

    #[test]
    fn subpackets_with_barrier_reports_advance() {
        let config = RunConfig::default();
        let args = SubpacketArgs {
            barrier: Some(vec![1.0, 0.5, 0.25, 0.1, 0.05]),
            ..SubpacketArgs::default()
        };
        let mut out = Vec::new();
        let mut report = Vec::new();
        cmd_subpackets(&config, &args, &mut out, &mut report).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("# advance_um = "));
        assert!(text.contains("transmitted,"));
        let advance: f64 = text
            .lines()
            .find_map(|l| l.strip_prefix("# advance_um = "))
            .unwrap()
            .parse()
            .unwrap();
        assert!(advance > 0.0);
    }

    #[test]
    fn nosignal_command_passes_and_detects_bias() {
        let mut config = RunConfig::default();
        config.apply_kv("pairs", "100000").unwrap();
        let mut out = Vec::new();
        let mut report = Vec::new();
        let summary = cmd_nosignal(&config, 5, &mut out, &mut report).unwrap();
        assert!(summary.passes >= 4, "{}/5", summary.passes);
        assert!(summary.power_check_p < 1.0e-6);
        assert!(cmd_nosignal(&config, 0, &mut out, &mut report).is_err());
    }

    #[test]
    fn visibility_at_zero_path_difference_is_unity() {
        // Zero Delta: perfect overlap, every route reports ~1.
        let mut config = RunConfig::default();
        config.apply_kv("delta", "0um").unwrap();
        config.apply_kv("pairs", "200000").unwrap();
        config.apply_kv("shape", "sinc2").unwrap();
        let mut out = Vec::new();
        let mut report = Vec::new();
        let summary = cmd_visibility(&config, &mut out, &mut report).unwrap();
        assert_eq!(summary.overlap, 1.0);
        assert_eq!(summary.analytic, 1.0);
        assert!(summary.mc.visibility > 0.98, "MC {}", summary.mc.visibility);
    }

    #[test]
    fn visibility_command_reports_all_three_routes() {
        let mut config = RunConfig::default();
        config.apply_kv("pairs", "200000").unwrap();
        config.apply_kv("shape", "sinc2").unwrap();
        let mut out = Vec::new();
        let mut report = Vec::new();
        let summary = cmd_visibility(&config, &mut out, &mut report).unwrap();
        assert!((summary.overlap - (1.0 - 220.0 / summary.w_um)).abs() < 1.0e-12);
        assert!((summary.analytic - 0.616).abs() < 0.001);
        assert!((summary.mc.visibility - summary.conditional).abs() <= 4.0 * summary.mc.standard_error);
        assert!(summary.singles_d2.visibility < 0.06);
        let text = String::from_utf8(report).unwrap();
        assert!(text.contains("overlap formula"));
        assert!(text.contains("Monte Carlo fit"));
    }
}

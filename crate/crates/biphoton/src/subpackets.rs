//! Wavepacket envelopes, color-subpacket decomposition, and the
//! frequency-selective barrier peak-advance demo.
//!
//! A spectrum's spatial envelope is synthesized by Fourier summation of
//! its amplitude profile; envelopes are intensity-only (drawn positive,
//! no carrier), so subpacket sums here are incoherent. Decomposition
//! slices a rectangular parent into equal-weight color bands; narrower
//! bands mean longer per-band envelopes while the parent envelope,
//! fixed by the full emission bandwidth, keeps its width. An
//! emission-order chirp offsets each band along the packet, shorter
//! wavelengths toward the front (negative positions), and a barrier
//! favoring high frequencies then reweights the band sum so the
//! transmitted peak sits ahead of the incident one.

use crate::error::{Error, Result};
use crate::numeric::integrate_panels;
use crate::spectral::{Shape, Spectrum};
use crate::SPEED_OF_LIGHT_UM_PER_S;

/// Sampled intensity envelope on a uniform position grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    positions_um: Vec<f64>,
    intensities: Vec<f64>,
    /// Numerically integrated intensity (trapezoid on the grid).
    total_weight: f64,
}

impl Envelope {
    pub fn new(positions_um: Vec<f64>, intensities: Vec<f64>) -> Result<Self> {
        if positions_um.len() != intensities.len() || positions_um.len() < 2 {
            return Err(Error::Domain(
                "envelope needs matching position/intensity samples (at least 2)".into(),
            ));
        }
        if positions_um.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(
                "envelope positions must be strictly increasing".into(),
            ));
        }
        if intensities.iter().any(|&i| i < 0.0 || i.is_nan()) {
            return Err(Error::Domain("envelope intensities must be >= 0".into()));
        }
        let total_weight = trapezoid(&positions_um, &intensities);
        Ok(Self {
            positions_um,
            intensities,
            total_weight,
        })
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.positions_um
            .iter()
            .copied()
            .zip(self.intensities.iter().copied())
    }

    pub fn positions_um(&self) -> &[f64] {
        &self.positions_um
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Numerically re-integrated intensity; equals `total_weight` for a
    /// well-formed envelope.
    pub fn integrated_intensity(&self) -> f64 {
        trapezoid(&self.positions_um, &self.intensities)
    }

    /// Position of the intensity maximum (first grid sample on ties).
    pub fn peak_position_um(&self) -> f64 {
        let mut best = 0;
        for (i, &v) in self.intensities.iter().enumerate() {
            if v > self.intensities[best] {
                best = i;
            }
        }
        self.positions_um[best]
    }

    /// Full width at half maximum, linearly interpolated between grid
    /// samples around the outermost half crossings.
    pub fn fwhm_um(&self) -> Result<f64> {
        let peak = self
            .intensities
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if peak <= 0.0 || peak.is_nan() {
            return Err(Error::Degenerate("flat envelope has no width".into()));
        }
        let half = 0.5 * peak;
        let n = self.intensities.len();
        let cross = |i0: usize, i1: usize| -> f64 {
            let (x0, x1) = (self.positions_um[i0], self.positions_um[i1]);
            let (y0, y1) = (self.intensities[i0], self.intensities[i1]);
            x0 + (half - y0) / (y1 - y0) * (x1 - x0)
        };
        let mut left = None;
        for i in 0..n - 1 {
            if self.intensities[i] < half && self.intensities[i + 1] >= half {
                left = Some(cross(i, i + 1));
                break;
            }
        }
        let mut right = None;
        for i in (0..n - 1).rev() {
            if self.intensities[i] >= half && self.intensities[i + 1] < half {
                right = Some(cross(i, i + 1));
                break;
            }
        }
        match (left, right) {
            (Some(l), Some(r)) if r > l => Ok(r - l),
            _ => Err(Error::Resolution(
                "envelope does not fall to half maximum inside the grid span".into(),
            )),
        }
    }
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
        .sum()
}

/// One color band of a decomposition: its slice spectrum, its position
/// offset along the packet, and its (already offset) intensity envelope
/// on the common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Subpacket {
    pub spectrum: Spectrum,
    pub center_offset_um: f64,
    pub envelope: Envelope,
}

/// A wavepacket decomposed into chirped color subpackets.
#[derive(Debug, Clone, PartialEq)]
pub struct SubpacketSet {
    pub parent: Spectrum,
    pub parent_envelope: Envelope,
    /// Bands ordered by increasing center wavelength.
    pub bands: Vec<Subpacket>,
    /// Position offset per unit wavelength detuning, um/nm. Positive
    /// puts shorter wavelengths at negative positions (packet front).
    pub chirp_um_per_nm: f64,
}

impl SubpacketSet {
    /// Incoherent (intensity) sum of the band envelopes on the common
    /// grid: the drawn total packet containing its color subpackets.
    pub fn total_envelope(&self) -> Envelope {
        let positions = self.parent_envelope.positions_um().to_vec();
        let mut total = vec![0.0; positions.len()];
        for band in &self.bands {
            for (t, &i) in total.iter_mut().zip(band.envelope.intensities()) {
                *t += i;
            }
        }
        Envelope::new(positions, total).expect("bands share the parent grid")
    }
}

/// Position grid specification for envelope synthesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeGrid {
    /// Sample spacing, um.
    pub resolution_um: f64,
    /// Total span, um, centered on zero.
    pub span_um: f64,
}

impl EnvelopeGrid {
    pub fn new(resolution_um: f64, span_um: f64) -> Result<Self> {
        if resolution_um <= 0.0 || resolution_um.is_nan() || span_um <= 0.0 || span_um.is_nan() {
            return Err(Error::Domain(
                "grid resolution and span must be positive".into(),
            ));
        }
        Ok(Self {
            resolution_um,
            span_um,
        })
    }

    fn positions(&self) -> Vec<f64> {
        let half = (0.5 * self.span_um / self.resolution_um).floor() as i64;
        (-half..=half)
            .map(|i| i as f64 * self.resolution_um)
            .collect()
    }
}

/// Complex Fourier amplitude of `spectrum` at packet positions
/// `positions - offset`, via Gauss-Legendre panels over the effective
/// frequency support.
pub(crate) fn synthesize_amplitude(
    spectrum: &Spectrum,
    positions_um: &[f64],
    offset_um: f64,
) -> Vec<(f64, f64)> {
    let (nu_lo, nu_hi) = spectrum.frequency_support();
    let max_x = positions_um
        .iter()
        .map(|x| (x - offset_um).abs())
        .fold(0.0f64, f64::max);
    // Fringe cycles across the support at the farthest grid point.
    let cycles = (nu_hi - nu_lo) * max_x / SPEED_OF_LIGHT_UM_PER_S;
    let panels = (4.0 * cycles).ceil() as usize + 16;
    positions_um
        .iter()
        .map(|&x| {
            let tau = (x - offset_um) / SPEED_OF_LIGHT_UM_PER_S;
            let re = integrate_panels(
                |nu| spectrum.amplitude_nu(nu) * (2.0 * std::f64::consts::PI * nu * tau).cos(),
                nu_lo,
                nu_hi,
                panels,
            );
            let im = integrate_panels(
                |nu| spectrum.amplitude_nu(nu) * (2.0 * std::f64::consts::PI * nu * tau).sin(),
                nu_lo,
                nu_hi,
                panels,
            );
            (re, im)
        })
        .collect()
}

fn synthesize_envelope(
    spectrum: &Spectrum,
    positions: Vec<f64>,
    offset_um: f64,
) -> Result<Envelope> {
    let amplitude = synthesize_amplitude(spectrum, &positions, offset_um);
    // Plancherel: integral of |A|^2 dx equals c times the spectral
    // weight; divide by c so intensities integrate to the weight (up to
    // span truncation).
    let intensities: Vec<f64> = amplitude
        .iter()
        .map(|(re, im)| (re * re + im * im) / SPEED_OF_LIGHT_UM_PER_S)
        .collect();
    Envelope::new(positions, intensities)
}

/// Synthesize the intensity envelope of a wavepacket with spectral
/// density `spectrum`: the squared modulus of its Fourier amplitude.
///
/// Envelope widths scale with the coherence length W; the
/// shape-dependent FWHM factors are 1.0 x W (sinc2, rectangular
/// envelope), 0.886 x W (rectangular spectrum, sinc^2 envelope), and
/// 0.441 x W (gaussian).
pub fn envelope_from_spectrum(spectrum: &Spectrum, grid: &EnvelopeGrid) -> Result<Envelope> {
    let w_um = spectrum.coherence_length_um();
    if grid.resolution_um > w_um / 32.0 {
        return Err(Error::Resolution(format!(
            "grid resolution {} um under-resolves the envelope: need <= W/32 = {:.3} um",
            grid.resolution_um,
            w_um / 32.0
        )));
    }
    synthesize_envelope(spectrum, grid.positions(), 0.0)
}

/// Split `spectrum` into `n_bands` equal-weight color bands with an
/// emission-order chirp: band offset = chirp x (band center wavelength -
/// parent center wavelength), so shorter wavelengths sit toward the
/// packet front. Slicing with per-band `Spectrum` descriptors is exact
/// only for rectangular parents; `n_bands = 1` works for every shape.
pub fn decompose(
    spectrum: &Spectrum,
    n_bands: usize,
    chirp_um_per_nm: f64,
    grid: &EnvelopeGrid,
) -> Result<SubpacketSet> {
    if n_bands == 0 {
        return Err(Error::Domain("decomposition needs at least one band".into()));
    }
    let w_um = spectrum.coherence_length_um();
    if grid.resolution_um > w_um / 32.0 {
        return Err(Error::Resolution(format!(
            "grid resolution {} um under-resolves the parent envelope: need <= {:.3} um",
            grid.resolution_um,
            w_um / 32.0
        )));
    }
    if n_bands > 1 && spectrum.shape != Shape::Rectangular {
        return Err(Error::Domain(format!(
            "only rectangular spectra decompose into equal-weight bands that are themselves \
             valid band spectra; got shape {}",
            spectrum.shape
        )));
    }
    let max_offset =
        chirp_um_per_nm.abs() * 0.5 * spectrum.bandwidth_nm * (1.0 - 1.0 / n_bands as f64);
    let span_needed = n_bands as f64 * w_um + 2.0 * max_offset;
    if grid.span_um < span_needed {
        return Err(Error::Resolution(format!(
            "{n_bands} bands need a span of at least {span_needed:.1} um (band envelopes widen \
             with the band count); grid has {:.1} um",
            grid.span_um
        )));
    }
    let positions = grid.positions();
    let parent_envelope = synthesize_envelope(spectrum, positions.clone(), 0.0)?;

    let mut bands = Vec::with_capacity(n_bands);
    if n_bands == 1 {
        bands.push(Subpacket {
            spectrum: *spectrum,
            center_offset_um: 0.0,
            envelope: parent_envelope.clone(),
        });
    } else {
        let band_width = spectrum.bandwidth_nm / n_bands as f64;
        let lo = spectrum.center_nm - 0.5 * spectrum.bandwidth_nm;
        for i in 0..n_bands {
            let center = lo + (i as f64 + 0.5) * band_width;
            let band_spectrum = Spectrum::with_weight(
                center,
                band_width,
                Shape::Rectangular,
                spectrum.weight / n_bands as f64,
            )?;
            let offset = chirp_um_per_nm * (center - spectrum.center_nm);
            bands.push(Subpacket {
                spectrum: band_spectrum,
                center_offset_um: offset,
                envelope: synthesize_envelope(&band_spectrum, positions.clone(), offset)?,
            });
        }
    }
    Ok(SubpacketSet {
        parent: *spectrum,
        parent_envelope,
        bands,
        chirp_um_per_nm,
    })
}

/// Outcome of the frequency-selective barrier demo.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierDemo {
    pub incident_peak_um: f64,
    pub transmitted_peak_um: f64,
    /// incident peak - transmitted peak; positive when the transmitted
    /// packet peaks ahead (earlier) of the incident one.
    pub advance_um: f64,
    pub transmitted: Envelope,
    /// Per-band transmissions, ordered like `set.bands`.
    pub band_transmissions: Vec<f64>,
}

/// Reweight the band sum by a barrier transmission that must not
/// increase with wavelength (favors higher frequencies, or is flat),
/// then locate the transmitted peak against the incident one.
pub fn barrier_demo(set: &SubpacketSet, transmission: impl Fn(f64) -> f64) -> Result<BarrierDemo> {
    let ts: Vec<f64> = set
        .bands
        .iter()
        .map(|b| transmission(b.spectrum.center_nm))
        .collect();
    for (i, &t) in ts.iter().enumerate() {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!(
                "barrier transmission must lie in [0, 1], got {t} for band {i}"
            )));
        }
    }
    // Bands are ordered by increasing wavelength.
    if ts.windows(2).any(|w| w[1] > w[0] + 1.0e-12) {
        return Err(Error::Domain(
            "barrier transmission must not increase with wavelength".into(),
        ));
    }
    if ts.iter().all(|&t| t == 0.0) {
        return Err(Error::Degenerate(
            "fully opaque barrier transmits no weight".into(),
        ));
    }
    let positions = set.parent_envelope.positions_um().to_vec();
    let mut transmitted = vec![0.0; positions.len()];
    for (band, &t) in set.bands.iter().zip(&ts) {
        for (acc, &i) in transmitted.iter_mut().zip(band.envelope.intensities()) {
            *acc += t * i;
        }
    }
    let incident = set.total_envelope();
    let transmitted = Envelope::new(positions, transmitted)?;
    let incident_peak_um = incident.peak_position_um();
    let transmitted_peak_um = transmitted.peak_position_um();
    Ok(BarrierDemo {
        incident_peak_um,
        transmitted_peak_um,
        advance_um: incident_peak_um - transmitted_peak_um,
        transmitted,
        band_transmissions: ts,
    })
}

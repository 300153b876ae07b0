//! Spectral densities, filter transmissions, coherence-length arithmetic,
//! and wavelength sampling.
//!
//! Three spectral shapes are supported. Their bandwidth conventions,
//! chosen to match how each number is quoted in the lab:
//!
//! - `Rectangular` - `bandwidth_nm` is the full width of the wavelength
//!   support; density is constant on it.
//! - `Gaussian` - `bandwidth_nm` is the FWHM of the wavelength density.
//! - `Sinc2` - defined in optical frequency: density proportional to
//!   sinc^2(pi (nu - nu0) / dnu) with `dnu = c / W` and `W = lambda^2 /
//!   bandwidth` the coherence length, so the first zero of |g1| sits
//!   exactly at delay `W / c`. The wavelength-side density carries the
//!   c/lambda^2 Jacobian.
//!
//! Energy bookkeeping (pair correlations, conditional spectra, Fourier
//! transforms) is done in frequency, where it is linear; the rectangular
//! and gaussian shapes are anchored in wavelength so that quoted supports
//! and FWHM are exact at the interface.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::numeric::{integrate_panels, sine_integral};
use crate::SPEED_OF_LIGHT_NM_PER_S as C_NM;

/// sin(x)/x with the removable singularity filled in.
pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1.0e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// How many sinc^2 side lobes are integrated or synthesized directly;
/// everything beyond is handled by the analytic 1/x^2 tail formula.
pub(crate) const SINC2_SUPPORT_LOBES: f64 = 64.0;

const FWHM_TO_SIGMA: f64 = 2.354_820_045_030_949_4; // 2 sqrt(2 ln 2)

/// Spectral line shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Rectangular,
    Gaussian,
    Sinc2,
}

impl std::str::FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rect" | "rectangular" => Ok(Shape::Rectangular),
            "gaussian" | "gauss" => Ok(Shape::Gaussian),
            "sinc2" => Ok(Shape::Sinc2),
            other => Err(Error::Config(format!(
                "unknown shape '{other}' (expected rect, gaussian, or sinc2)"
            ))),
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Shape::Rectangular => "rect",
            Shape::Gaussian => "gaussian",
            Shape::Sinc2 => "sinc2",
        })
    }
}

/// Spectral density of a photon ensemble.
///
/// The density integrates to `weight`; `weight = 1` for a full ensemble,
/// fractions of it for subensembles and subpacket bands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub center_nm: f64,
    pub bandwidth_nm: f64,
    pub shape: Shape,
    pub weight: f64,
}

impl Spectrum {
    pub fn new(center_nm: f64, bandwidth_nm: f64, shape: Shape) -> Result<Self> {
        Self::with_weight(center_nm, bandwidth_nm, shape, 1.0)
    }

    pub fn with_weight(
        center_nm: f64,
        bandwidth_nm: f64,
        shape: Shape,
        weight: f64,
    ) -> Result<Self> {
        if center_nm <= 0.0 || center_nm.is_nan() || !center_nm.is_finite() {
            return Err(Error::Domain(format!(
                "spectrum center must be positive, got {center_nm} nm"
            )));
        }
        if bandwidth_nm <= 0.0 || bandwidth_nm.is_nan() || !bandwidth_nm.is_finite() {
            return Err(Error::Domain(format!(
                "spectrum bandwidth must be positive, got {bandwidth_nm} nm"
            )));
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::Domain(format!(
                "spectrum weight must lie in [0, 1], got {weight}"
            )));
        }
        Ok(Self {
            center_nm,
            bandwidth_nm,
            shape,
            weight,
        })
    }

    /// Coherence length W = lambda^2 / d-lambda of this spectrum, in um.
    pub fn coherence_length_um(&self) -> f64 {
        self.center_nm * self.center_nm / self.bandwidth_nm * 1.0e-3
    }

    pub fn center_frequency_hz(&self) -> f64 {
        C_NM / self.center_nm
    }

    /// Frequency width dnu = c / W. For sinc2 this is the exact main-lobe
    /// half width (lobe spacing); for the other shapes it is the
    /// narrowband image of the wavelength bandwidth.
    pub fn frequency_width_hz(&self) -> f64 {
        C_NM * self.bandwidth_nm / (self.center_nm * self.center_nm)
    }

    /// Spectral density per nm at `lambda_nm`. Zero off-support and for
    /// non-positive arguments.
    pub fn density(&self, lambda_nm: f64) -> f64 {
        if lambda_nm <= 0.0 {
            return 0.0;
        }
        match self.shape {
            Shape::Rectangular => {
                if (lambda_nm - self.center_nm).abs() <= 0.5 * self.bandwidth_nm {
                    self.weight / self.bandwidth_nm
                } else {
                    0.0
                }
            }
            Shape::Gaussian => {
                let u = (lambda_nm - self.center_nm) / self.bandwidth_nm;
                let peak = self.weight * 2.0 * (std::f64::consts::LN_2 / std::f64::consts::PI).sqrt()
                    / self.bandwidth_nm;
                peak * (-4.0 * std::f64::consts::LN_2 * u * u).exp()
            }
            Shape::Sinc2 => {
                // per-nm view of the frequency-defined density
                let nu = C_NM / lambda_nm;
                self.density_nu(nu) * C_NM / (lambda_nm * lambda_nm)
            }
        }
    }

    /// Spectral density per Hz at optical frequency `nu_hz`.
    ///
    /// The sinc2 branch evaluates the full Fejer line shape on the whole
    /// frequency axis so that its analytic tail bookkeeping is exact;
    /// for broad bandwidths a sub-permille of that line shape sits at
    /// unphysical frequencies and is invisible on the wavelength side.
    /// The shape is meant for narrowband conditional spectra, where the
    /// distinction vanishes.
    pub fn density_nu(&self, nu_hz: f64) -> f64 {
        match self.shape {
            Shape::Sinc2 => {
                let dnu = self.frequency_width_hz();
                let s = (nu_hz - self.center_frequency_hz()) / dnu;
                let a = sinc(std::f64::consts::PI * s);
                self.weight / dnu * a * a
            }
            _ => {
                if nu_hz <= 0.0 {
                    return 0.0;
                }
                let lambda = C_NM / nu_hz;
                self.density(lambda) * C_NM / (nu_hz * nu_hz)
            }
        }
    }

    /// Signed spectral amplitude per sqrt(Hz): the square root of the
    /// density, with the sign of the sinc carried for the sinc2 shape so
    /// Fourier synthesis of the wavepacket reproduces the correct
    /// (rectangular) envelope.
    pub fn amplitude_nu(&self, nu_hz: f64) -> f64 {
        match self.shape {
            Shape::Sinc2 => {
                let dnu = self.frequency_width_hz();
                let s = (nu_hz - self.center_frequency_hz()) / dnu;
                (self.weight / dnu).sqrt() * sinc(std::f64::consts::PI * s)
            }
            _ => self.density_nu(nu_hz).sqrt(),
        }
    }

    /// Frequency interval carrying (essentially) all of the density.
    /// Exact for rectangular; +-9 sigma for gaussian; the analytic tail
    /// beyond the 64-lobe cutoff for sinc2 is handled
    /// separately where it matters.
    pub fn frequency_support(&self) -> (f64, f64) {
        match self.shape {
            Shape::Rectangular => {
                let lo = self.center_nm - 0.5 * self.bandwidth_nm;
                let hi = self.center_nm + 0.5 * self.bandwidth_nm;
                (C_NM / hi, C_NM / lo.max(1.0e-6))
            }
            Shape::Gaussian => {
                let sigma = self.bandwidth_nm / FWHM_TO_SIGMA;
                let lo = (self.center_nm - 9.0 * sigma).max(1.0e-6);
                let hi = self.center_nm + 9.0 * sigma;
                (C_NM / hi, C_NM / lo)
            }
            Shape::Sinc2 => {
                let nu0 = self.center_frequency_hz();
                let dnu = self.frequency_width_hz();
                ((nu0 - SINC2_SUPPORT_LOBES * dnu).max(0.0), nu0 + SINC2_SUPPORT_LOBES * dnu)
            }
        }
    }

    /// Draw one wavelength distributed per `density`.
    pub fn sample_wavelength<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.shape {
            Shape::Rectangular => {
                self.center_nm + self.bandwidth_nm * (rng.gen::<f64>() - 0.5)
            }
            Shape::Gaussian => {
                let sigma = self.bandwidth_nm / FWHM_TO_SIGMA;
                let normal = Normal::new(self.center_nm, sigma).expect("valid spectrum");
                loop {
                    let lambda = normal.sample(rng);
                    if lambda > 0.0 {
                        return lambda;
                    }
                }
            }
            Shape::Sinc2 => {
                let nu0 = self.center_frequency_hz();
                let dnu = self.frequency_width_hz();
                loop {
                    let nu = nu0 + dnu * sample_sinc2_unit(rng);
                    if nu > 0.0 {
                        return C_NM / nu;
                    }
                }
            }
        }
    }
}

/// Rejection sampler for the unit Fejer density sinc^2(pi x).
///
/// Envelope: 1 on [-1/pi, 1/pi], 1/(pi x)^2 outside; the two pieces have
/// equal mass, overall acceptance pi/4.
fn sample_sinc2_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    const A: f64 = std::f64::consts::FRAC_1_PI;
    loop {
        let (x, envelope) = if rng.gen_bool(0.5) {
            (A * (2.0 * rng.gen::<f64>() - 1.0), 1.0)
        } else {
            let mag = A / (1.0 - rng.gen::<f64>());
            let x = if rng.gen_bool(0.5) { mag } else { -mag };
            (x, 1.0 / (std::f64::consts::PI * x).powi(2))
        };
        let p = sinc(std::f64::consts::PI * x).powi(2) / envelope;
        if rng.gen::<f64>() < p {
            return x;
        }
    }
}

/// Bandpass filter transmission profile. Same shape semantics as
/// [`Spectrum`], normalized to `peak_transmission` at the center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub center_nm: f64,
    pub bandwidth_nm: f64,
    pub shape: Shape,
    pub peak_transmission: f64,
}

impl FilterSpec {
    pub fn new(
        center_nm: f64,
        bandwidth_nm: f64,
        shape: Shape,
        peak_transmission: f64,
    ) -> Result<Self> {
        if center_nm <= 0.0 || center_nm.is_nan() || bandwidth_nm <= 0.0 || bandwidth_nm.is_nan() {
            return Err(Error::Domain(format!(
                "filter center and bandwidth must be positive, got {center_nm} nm / {bandwidth_nm} nm"
            )));
        }
        if !(peak_transmission > 0.0 && peak_transmission <= 1.0) {
            return Err(Error::Domain(format!(
                "peak transmission must lie in (0, 1], got {peak_transmission}"
            )));
        }
        Ok(Self {
            center_nm,
            bandwidth_nm,
            shape,
            peak_transmission,
        })
    }

    /// Transmission probability at `lambda_nm`, in [0, peak_transmission].
    pub fn transmission(&self, lambda_nm: f64) -> f64 {
        if lambda_nm <= 0.0 {
            return 0.0;
        }
        match self.shape {
            Shape::Rectangular => {
                if (lambda_nm - self.center_nm).abs() <= 0.5 * self.bandwidth_nm {
                    self.peak_transmission
                } else {
                    0.0
                }
            }
            Shape::Gaussian => {
                let u = (lambda_nm - self.center_nm) / self.bandwidth_nm;
                self.peak_transmission * (-4.0 * std::f64::consts::LN_2 * u * u).exp()
            }
            Shape::Sinc2 => {
                let nu0 = C_NM / self.center_nm;
                let dnu = C_NM * self.bandwidth_nm / (self.center_nm * self.center_nm);
                let s = (C_NM / lambda_nm - nu0) / dnu;
                self.peak_transmission * sinc(std::f64::consts::PI * s).powi(2)
            }
        }
    }
}

/// Coherence length W = lambda^2 / d-lambda, inputs in nm, result in um.
pub fn coherence_length(center_nm: f64, bandwidth_nm: f64) -> Result<f64> {
    if center_nm <= 0.0 || center_nm.is_nan() {
        return Err(Error::Domain(format!(
            "coherence length needs a positive center wavelength, got {center_nm} nm"
        )));
    }
    if bandwidth_nm <= 0.0 || bandwidth_nm.is_nan() {
        return Err(Error::Domain(format!(
            "coherence length needs a positive bandwidth, got {bandwidth_nm} nm"
        )));
    }
    Ok(center_nm * center_nm / bandwidth_nm * 1.0e-3)
}

/// |g1(tau)|: modulus of the normalized Fourier transform of the
/// spectral density at delay `tau` (seconds).
///
/// Rectangular and gaussian densities are integrated over their compact
/// wavelength support with Gauss-Legendre panels. The sinc2 density is
/// integrated in frequency over its 64-lobe central region, with the
/// algebraic 1/x^2 tails added in closed form via the sine integral.
/// A two-resolution consistency check guards the panel count.
pub fn g1_magnitude(spectrum: &Spectrum, delay_s: f64) -> Result<f64> {
    let tau = delay_s.abs();
    let coarse = fourier_ratio(spectrum, tau, 1);
    let fine = fourier_ratio(spectrum, tau, 2);
    if (coarse - fine).abs() > 1.0e-9 {
        return Err(Error::Numerical(format!(
            "g1 quadrature did not converge at delay {tau:e} s: {coarse:.12} vs {fine:.12} on refinement"
        )));
    }
    Ok(fine)
}

fn fourier_ratio(spectrum: &Spectrum, tau: f64, refine: usize) -> f64 {
    match spectrum.shape {
        Shape::Sinc2 => {
            let dnu = spectrum.frequency_width_hz();
            let u = dnu * tau;
            let x_max = SINC2_SUPPORT_LOBES;
            let panels = 2 * (x_max as usize) * (2 + u.ceil() as usize) * refine;
            let weight = spectrum.weight;
            let body = |x: f64| {
                let a = sinc(std::f64::consts::PI * x);
                weight * a * a
            };
            let numer_central = integrate_panels(
                |x| body(x) * (2.0 * std::f64::consts::PI * u * x).cos(),
                -x_max,
                x_max,
                panels,
            );
            let mass_central = integrate_panels(body, -x_max, x_max, panels);
            let numer = numer_central + sinc2_tail(weight, x_max, u);
            let mass = mass_central + sinc2_tail(weight, x_max, 0.0);
            (numer / mass).abs()
        }
        _ => {
            let (nu_lo, nu_hi) = spectrum.frequency_support();
            let (lambda_lo, lambda_hi) = (C_NM / nu_hi, C_NM / nu_lo);
            // fringe cycles across the support set the panel count
            let cycles = C_NM * tau * (lambda_hi - lambda_lo) / (lambda_lo * lambda_hi);
            let panels = ((4.0 * cycles).ceil() as usize + 16) * refine;
            let re = integrate_panels(
                |l| spectrum.density(l) * (2.0 * std::f64::consts::PI * C_NM * tau / l).cos(),
                lambda_lo,
                lambda_hi,
                panels,
            );
            let im = integrate_panels(
                |l| spectrum.density(l) * (2.0 * std::f64::consts::PI * C_NM * tau / l).sin(),
                lambda_lo,
                lambda_hi,
                panels,
            );
            let mass = integrate_panels(|l| spectrum.density(l), lambda_lo, lambda_hi, panels);
            re.hypot(im) / mass
        }
    }
}

/// Exact tail of `integral of sinc^2(pi x) cos(2 pi u x)` over |x| > X,
/// times `weight`, via integration by parts and the sine integral.
fn sinc2_tail(weight: f64, big_x: f64, u: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let j = |a: f64| -> f64 {
        // integral of cos(a x) / x^2 over [X, inf)
        if a == 0.0 {
            1.0 / big_x
        } else {
            (a * big_x).cos() / big_x - a * (std::f64::consts::FRAC_PI_2 - sine_integral(a * big_x))
        }
    };
    weight / (pi * pi)
        * (j(2.0 * pi * u) - 0.5 * j(2.0 * pi * (1.0 + u)) - 0.5 * j(2.0 * pi * (1.0 - u).abs()))
}

/// CDF of the unit Fejer density sinc^2(pi x), for sampling tests.
#[cfg(test)]
pub(crate) fn sinc2_unit_cdf(x: f64) -> f64 {
    if x == 0.0 {
        return 0.5;
    }
    let pi = std::f64::consts::PI;
    0.5 + sine_integral(2.0 * pi * x) / pi - (pi * x).sin().powi(2) / (pi * pi * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

    const C: f64 = C_NM;

    #[test]
    fn coherence_length_bench_values() {
        // 702 nm with 25, 10, 0.86 nm bandwidths: 20, 50, 570 um rounded.
        let w25 = coherence_length(702.0, 25.0).unwrap();
        let w10 = coherence_length(702.0, 10.0).unwrap();
        let w086 = coherence_length(702.0, 0.86).unwrap();
        assert_relative_eq!(w25, 702.0 * 702.0 / 25.0 / 1000.0, epsilon = 1e-12);
        assert_relative_eq!(w10, 702.0 * 702.0 / 10.0 / 1000.0, epsilon = 1e-12);
        assert_relative_eq!(w086, 702.0 * 702.0 / 0.86 / 1000.0, epsilon = 1e-12);
        assert_eq!((w25 * 10.0).round() / 10.0, 19.7);
        assert_eq!((w10 * 10.0).round() / 10.0, 49.3);
        assert_eq!((w086 * 10.0).round() / 10.0, 573.0);
        // rounded to the quoted precision
        assert_eq!(w25.round(), 20.0);
        assert_eq!((w10 / 10.0).round() * 10.0, 50.0);
        assert_eq!((w086 / 10.0).round() * 10.0, 570.0);
    }

    #[test]
    fn coherence_length_reduces_to_lambda() {
        // W(lambda, lambda) = lambda in consistent units.
        let w = coherence_length(500.0, 500.0).unwrap();
        assert_relative_eq!(w * 1000.0, 500.0, epsilon = 1e-12);
    }

    #[test]
    fn coherence_length_rejects_nonpositive() {
        assert!(coherence_length(0.0, 1.0).is_err());
        assert!(coherence_length(702.0, 0.0).is_err());
        assert!(coherence_length(-1.0, 1.0).is_err());
        assert!(coherence_length(702.0, -0.5).is_err());
    }

    proptest! {
        #[test]
        fn coherence_length_homogeneity(
            lambda in 100.0f64..2000.0,
            bw in 0.01f64..50.0,
            k in 0.1f64..10.0,
        ) {
            let w = coherence_length(lambda, bw).unwrap();
            let wk = coherence_length(k * lambda, bw).unwrap();
            prop_assert!((wk - k * k * w).abs() <= 1e-9 * wk.abs().max(w.abs()));
            let w_half = coherence_length(lambda, bw / 2.0).unwrap();
            prop_assert!((w_half - 2.0 * w).abs() <= 1e-9 * w_half);
        }

        #[test]
        fn transmission_bounded_by_peak(
            lambda in 1.0f64..2000.0,
            peak in 0.05f64..1.0,
            shape_idx in 0usize..3,
        ) {
            let shape = [Shape::Rectangular, Shape::Gaussian, Shape::Sinc2][shape_idx];
            let f = FilterSpec::new(702.0, 0.86, shape, peak).unwrap();
            let t = f.transmission(lambda);
            prop_assert!((0.0..=peak + 1e-15).contains(&t));
        }
    }

    #[test]
    fn rectangular_density_values() {
        let s = Spectrum::new(702.0, 25.0, Shape::Rectangular).unwrap();
        assert_eq!(s.density(702.0), 1.0 / 25.0);
        assert_eq!(s.density(689.0), 0.0);
        assert_eq!(s.density(715.0), 0.0);
        // half-weight spectrum scales linearly
        let s2 = Spectrum::with_weight(702.0, 25.0, Shape::Rectangular, 0.5).unwrap();
        assert_eq!(s2.density(702.0), 0.5 / 25.0);
    }

    #[test]
    fn gaussian_density_half_peak_at_fwhm() {
        let s = Spectrum::new(702.0, 25.0, Shape::Gaussian).unwrap();
        let peak = s.density(702.0);
        assert_relative_eq!(s.density(702.0 + 12.5), 0.5 * peak, epsilon = 1e-12);
        assert_relative_eq!(s.density(702.0 - 12.5), 0.5 * peak, epsilon = 1e-12);
    }

    /// Independent Simpson integration of the density; for sinc2 the
    /// frequency-domain tail beyond the lobe cutoff is added in closed
    /// form.
    fn integrated_weight(s: &Spectrum) -> f64 {
        let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize| -> f64 {
            let n = n + n % 2;
            let h = (b - a) / n as f64;
            let mut acc = f(a) + f(b);
            for i in 1..n {
                acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        };
        match s.shape {
            Shape::Sinc2 => {
                let nu0 = s.center_frequency_hz();
                let dnu = s.frequency_width_hz();
                let x = SINC2_SUPPORT_LOBES;
                let central = simpson(
                    &|nu| s.density_nu(nu),
                    nu0 - x * dnu,
                    nu0 + x * dnu,
                    200_000,
                );
                central + sinc2_tail(s.weight, x, 0.0)
            }
            _ => {
                let (nu_lo, nu_hi) = s.frequency_support();
                simpson(&|l| s.density(l), C / nu_hi, C / nu_lo, 200_000)
            }
        }
    }

    #[test]
    fn density_normalization_all_shapes() {
        for shape in [Shape::Rectangular, Shape::Gaussian, Shape::Sinc2] {
            for weight in [1.0, 0.37] {
                let s = Spectrum::with_weight(702.0, 25.0, shape, weight).unwrap();
                let total = integrated_weight(&s);
                assert!(
                    (total - weight).abs() <= 1.0e-9 * weight,
                    "{shape}: integrated {total:.12} vs weight {weight}"
                );
            }
        }
    }

    #[test]
    fn filter_transmission_examples() {
        let f1 = FilterSpec::new(702.0, 0.86, Shape::Rectangular, 1.0).unwrap();
        assert_eq!(f1.transmission(702.0), 1.0);
        assert_eq!(f1.transmission(703.0), 0.0);
        let f1_dim = FilterSpec::new(702.0, 0.86, Shape::Rectangular, 0.8).unwrap();
        assert_eq!(f1_dim.transmission(702.0), 0.8);

        let g = FilterSpec::new(702.0, 10.0, Shape::Gaussian, 0.9).unwrap();
        assert_relative_eq!(g.transmission(707.0), 0.45, epsilon = 1e-12);

        let s2 = FilterSpec::new(702.0, 0.86, Shape::Sinc2, 1.0).unwrap();
        assert_eq!(s2.transmission(702.0), 1.0);
    }

    #[test]
    fn rectangular_samples_stay_in_band() {
        let s = Spectrum::new(702.0, 25.0, Shape::Rectangular).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let l = s.sample_wavelength(&mut rng);
            assert!((689.5..=714.5).contains(&l));
        }
    }

    #[test]
    fn sample_mean_converges_to_center() {
        let s = Spectrum::new(702.0, 25.0, Shape::Rectangular).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 1_000_000;
        let mean: f64 = (0..n).map(|_| s.sample_wavelength(&mut rng)).sum::<f64>() / n as f64;
        // sigma/sqrt(N) = 25/sqrt(12)/1000 = 0.0072; 0.05 is a 7-sigma bound
        assert!((mean - 702.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn degenerate_bandwidth_pins_samples_to_center() {
        let s = Spectrum::new(702.0, 1.0e-9, Shape::Rectangular).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert!((s.sample_wavelength(&mut rng) - 702.0).abs() <= 5.0e-10);
        }
    }

    /// One-sample Kolmogorov-Smirnov statistic against `cdf`.
    fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = samples.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            let f = cdf(x);
            d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
        }
        d
    }

    /// Critical KS distance at significance alpha, via the Kolmogorov
    /// distribution Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
    fn ks_critical(n: usize, alpha: f64) -> f64 {
        let q = |lam: f64| -> f64 {
            let mut total = 0.0;
            for k in 1..200 {
                let term = (-2.0 * (k as f64).powi(2) * lam * lam).exp();
                total += if k % 2 == 1 { term } else { -term };
            }
            2.0 * total
        };
        let (mut lo, mut hi) = (0.2, 4.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if q(mid) > alpha {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi) / (n as f64).sqrt()
    }

    #[test]
    fn kolmogorov_smirnov_all_shapes() {
        let n = 100_000;
        let crit = ks_critical(n, 0.01);
        for (seed, shape) in [(11u64, Shape::Rectangular), (12, Shape::Gaussian), (13, Shape::Sinc2)]
        {
            let s = Spectrum::new(702.0, 25.0, shape).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut samples: Vec<f64> =
                (0..n).map(|_| s.sample_wavelength(&mut rng)).collect();
            let cdf: Box<dyn Fn(f64) -> f64> = match shape {
                Shape::Rectangular => Box::new(move |l: f64| {
                    ((l - 689.5) / 25.0).clamp(0.0, 1.0)
                }),
                Shape::Gaussian => {
                    let normal = StatNormal::new(702.0, 25.0 / FWHM_TO_SIGMA).unwrap();
                    Box::new(move |l: f64| normal.cdf(l))
                }
                Shape::Sinc2 => {
                    let nu0 = s.center_frequency_hz();
                    let dnu = s.frequency_width_hz();
                    // lambda increasing means x decreasing
                    Box::new(move |l: f64| 1.0 - sinc2_unit_cdf((C / l - nu0) / dnu))
                }
            };
            let d = ks_statistic(&mut samples, cdf);
            assert!(
                d < crit,
                "{shape}: KS statistic {d:.5} exceeds critical {crit:.5}"
            );
        }
    }

    #[test]
    fn sinc2_unit_cdf_sanity() {
        assert_relative_eq!(sinc2_unit_cdf(0.0), 0.5, epsilon = 1e-15);
        assert!(sinc2_unit_cdf(-30.0) > 0.0 && sinc2_unit_cdf(-30.0) < 0.01);
        assert!(sinc2_unit_cdf(30.0) > 0.99 && sinc2_unit_cdf(30.0) < 1.0);
        // symmetric density
        assert_relative_eq!(
            sinc2_unit_cdf(1.3) - 0.5,
            0.5 - sinc2_unit_cdf(-1.3),
            epsilon = 1e-12
        );
    }

    #[test]
    fn g1_sinc2_is_exact_triangle() {
        // FT of sinc^2 is triangular: |g1| = 1 - delta/W for delta <= W.
        let s = Spectrum::new(702.0, 0.86, Shape::Sinc2).unwrap();
        let w_um = s.coherence_length_um();
        for frac in [0.0, 0.1, 0.3839, 0.5, 0.9, 1.0, 1.5, 2.7] {
            let delta_um = frac * w_um;
            let tau = delta_um * 1.0e-6 / crate::SPEED_OF_LIGHT_M_PER_S;
            let g = g1_magnitude(&s, tau).unwrap();
            let expect = (1.0 - frac).max(0.0);
            assert!(
                (g - expect).abs() <= 1.0e-6,
                "frac {frac}: got {g:.9}, triangle {expect:.9}"
            );
        }
    }

    #[test]
    fn g1_rect_matches_sinc_oracle() {
        // Narrowband rectangular spectrum: |g1| = |sinc(pi delta / W)|.
        let s = Spectrum::new(702.0, 0.86, Shape::Rectangular).unwrap();
        let w_um = s.coherence_length_um();
        for frac in [0.2, 0.3860, 0.7, 1.4] {
            let tau = frac * w_um * 1.0e-6 / crate::SPEED_OF_LIGHT_M_PER_S;
            let g = g1_magnitude(&s, tau).unwrap();
            let oracle = sinc(std::f64::consts::PI * frac).abs();
            assert!(
                (g - oracle).abs() < 1.0e-5,
                "frac {frac}: got {g:.8}, sinc oracle {oracle:.8}"
            );
        }
    }

    #[test]
    fn g1_gaussian_matches_closed_form() {
        // |g1| = exp(-(pi dnu tau)^2 / (4 ln 2)) for a gaussian of FWHM dnu.
        let s = Spectrum::new(702.0, 0.86, Shape::Gaussian).unwrap();
        let dnu = s.frequency_width_hz();
        for delta_um in [50.0, 220.0, 500.0] {
            let tau = delta_um * 1.0e-6 / crate::SPEED_OF_LIGHT_M_PER_S;
            let g = g1_magnitude(&s, tau).unwrap();
            let arg = std::f64::consts::PI * dnu * tau;
            let oracle = (-arg * arg / (4.0 * std::f64::consts::LN_2)).exp();
            assert!(
                (g - oracle).abs() < 1.0e-5,
                "delta {delta_um}: got {g:.8}, gaussian oracle {oracle:.8}"
            );
        }
    }

    #[test]
    fn g1_is_one_at_zero_delay() {
        for shape in [Shape::Rectangular, Shape::Gaussian, Shape::Sinc2] {
            let s = Spectrum::new(702.0, 25.0, shape).unwrap();
            assert_eq!(g1_magnitude(&s, 0.0).unwrap(), 1.0);
        }
    }
}

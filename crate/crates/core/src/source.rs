//! External forcing: an isotropic Gaussian spatial kernel scaled by a
//! unit-peak temporal wavelet.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

/// Kernel values below this fraction of the peak are dropped.
pub const KERNEL_CUTOFF: f64 = 1e-12;

/// Delay used when none is given, in units of the wavelet's natural period
/// (`1 / f0` for Ricker, `width` for the Gaussian pulse).
const RICKER_DEFAULT_DELAY: f64 = 1.5;
const GAUSSIAN_DEFAULT_DELAY: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Wavelet {
    Ricker {
        /// Peak frequency in Hz.
        peak_frequency: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delay: Option<f64>,
    },
    GaussianPulse {
        /// Standard deviation in seconds.
        width: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delay: Option<f64>,
    },
}

impl Wavelet {
    pub fn ricker(peak_frequency: f64) -> Self {
        Wavelet::Ricker {
            peak_frequency,
            delay: None,
        }
    }

    pub fn gaussian(width: f64) -> Self {
        Wavelet::GaussianPulse { width, delay: None }
    }

    pub fn with_delay(self, t0: f64) -> Self {
        match self {
            Wavelet::Ricker { peak_frequency, .. } => Wavelet::Ricker {
                peak_frequency,
                delay: Some(t0),
            },
            Wavelet::GaussianPulse { width, .. } => Wavelet::GaussianPulse {
                width,
                delay: Some(t0),
            },
        }
    }

    /// Time of the wavelet peak.
    pub fn delay(&self) -> f64 {
        match *self {
            Wavelet::Ricker { peak_frequency, delay } => {
                delay.unwrap_or(RICKER_DEFAULT_DELAY / peak_frequency)
            }
            Wavelet::GaussianPulse { width, delay } => delay.unwrap_or(GAUSSIAN_DEFAULT_DELAY * width),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (name, value) = match *self {
            Wavelet::Ricker { peak_frequency, .. } => ("source.wavelet.peak_frequency", peak_frequency),
            Wavelet::GaussianPulse { width, .. } => ("source.wavelet.width", width),
        };
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::config(name, format!("must be positive, got {value}")));
        }
        let t0 = self.delay();
        if !(t0 >= 0.0 && t0.is_finite()) {
            return Err(Error::config("source.wavelet.delay", format!("must be >= 0, got {t0}")));
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        let tau = t - self.delay();
        match *self {
            Wavelet::Ricker { peak_frequency, .. } => {
                let a = (PI * peak_frequency * tau).powi(2);
                (1.0 - 2.0 * a) * (-a).exp()
            }
            Wavelet::GaussianPulse { width, .. } => (-(tau * tau) / (2.0 * width * width)).exp(),
        }
    }
}

pub fn wavelet_value(w: &Wavelet, t: f64) -> f64 {
    w.value(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    /// Domain coordinates in meters.
    pub epicenter: Vec<f64>,
    pub amplitude: f64,
    /// Gaussian kernel standard deviation in meters.
    pub kernel_radius: f64,
    pub wavelet: Wavelet,
}

impl SourceSpec {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.epicenter.len() != grid.ndim() {
            return Err(Error::config(
                "source.epicenter",
                format!("expected {} coordinates, got {}", grid.ndim(), self.epicenter.len()),
            ));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::config("source.amplitude", "must be finite"));
        }
        let sigma = self.kernel_radius;
        let h = grid.max_spacing();
        if !(sigma.is_finite() && sigma >= h * (1.0 - 1e-12)) {
            return Err(Error::config(
                "source.kernel_radius",
                format!("must be at least one grid spacing ({h} m), got {sigma}"),
            ));
        }
        for (axis, &x) in self.epicenter.iter().enumerate() {
            let (lo, hi) = grid.bounds(axis);
            let margin = 2.0 * sigma;
            if !(x.is_finite() && x - lo >= margin && hi - x >= margin) {
                return Err(Error::config(
                    format!("source.epicenter[{axis}]"),
                    format!("{x} must stay {margin} m (2 kernel radii) inside [{lo}, {hi}]"),
                ));
            }
        }
        self.wavelet.validate()
    }

    /// Precomputes the truncated spatial kernel on `grid`.
    pub fn kernel(&self, grid: &Grid) -> Result<SourceKernel> {
        self.validate(grid)?;
        let inv = 1.0 / (2.0 * self.kernel_radius * self.kernel_radius);
        let entries = (0..grid.len())
            .filter_map(|flat| {
                let p = grid.position(flat);
                let r2: f64 = self
                    .epicenter
                    .iter()
                    .zip(p.iter())
                    .map(|(e, x)| (x - e) * (x - e))
                    .sum();
                let g = (-r2 * inv).exp();
                (g >= KERNEL_CUTOFF).then_some((flat, g))
            })
            .collect();
        Ok(SourceKernel {
            entries,
            amplitude: self.amplitude,
            wavelet: self.wavelet,
        })
    }
}

/// Sparse, truncated representation of the forcing term on a grid.
#[derive(Clone, Debug)]
pub struct SourceKernel {
    entries: Vec<(usize, f64)>,
    amplitude: f64,
    wavelet: Wavelet,
}

impl SourceKernel {
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// Temporal scale `amplitude * wavelet(t)`.
    pub fn scale(&self, t: f64) -> f64 {
        self.amplitude * self.wavelet.value(t)
    }

    /// Adds `weight * f(x, t)` into `out`.
    pub fn accumulate(&self, t: f64, weight: f64, out: &mut [f64]) {
        let s = self.scale(t) * weight;
        if s == 0.0 {
            return;
        }
        for &(k, g) in &self.entries {
            out[k] += s * g;
        }
    }
}

/// Dense forcing field `f(x, t)` on the grid.
pub fn force_field(source: &SourceSpec, grid: &Grid, t: f64) -> Result<ScalarField> {
    let kernel = source.kernel(grid)?;
    let mut values = vec![0.0; grid.len()];
    let s = kernel.scale(t);
    for &(k, g) in kernel.entries() {
        values[k] = s * g;
    }
    Ok(ScalarField::from_raw(*grid, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(sigma: f64) -> SourceSpec {
        SourceSpec {
            epicenter: vec![0.0, 0.0],
            amplitude: 1.0,
            kernel_radius: sigma,
            wavelet: Wavelet::ricker(10.0).with_delay(0.1),
        }
    }

    #[test]
    fn ricker_peak_and_zero_crossing() {
        let w = Wavelet::ricker(10.0).with_delay(0.2);
        assert_eq!(wavelet_value(&w, 0.2), 1.0);
        // root of 1 - 2 pi^2 f0^2 tau^2
        let tau = 1.0 / (PI * 10.0 * 2f64.sqrt());
        assert!((tau - 0.0225).abs() < 1e-4);
        assert!(wavelet_value(&w, 0.2 + tau).abs() < 1e-12);
        assert!(wavelet_value(&w, 0.2 - tau).abs() < 1e-12);
        assert!(wavelet_value(&w, 0.2 + 0.5 * tau) > 0.0);
        assert!(wavelet_value(&w, 0.2 + 1.5 * tau) < 0.0);
    }

    #[test]
    fn gaussian_pulse_at_one_width() {
        let w = Wavelet::gaussian(0.05).with_delay(0.3);
        assert!((wavelet_value(&w, 0.35) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((wavelet_value(&w, 0.35) - 0.6065).abs() < 1e-4);
    }

    #[test]
    fn default_delays() {
        assert_eq!(Wavelet::ricker(5.0).delay(), 0.3);
        assert_eq!(Wavelet::gaussian(0.1).delay(), 0.4);
        assert!(Wavelet::ricker(0.0).validate().is_err());
        assert!(Wavelet::ricker(5.0).with_delay(-1.0).validate().is_err());
    }

    #[test]
    fn peak_at_epicenter_node() {
        let g = Grid::with_spacing(&[21, 21], 1.0).unwrap();
        let mut s = spec(2.0);
        s.amplitude = 3.5;
        let f = force_field(&s, &g, 0.1).unwrap();
        assert_eq!(f.get(&[10, 10]), 3.5);
        assert_eq!(f.max(), 3.5);
    }

    #[test]
    fn zero_wavelet_gives_zero_field() {
        let g = Grid::with_spacing(&[21, 21], 1.0).unwrap();
        let s = spec(2.0);
        let tau = 1.0 / (PI * 10.0 * 2f64.sqrt());
        // evaluate at an exact-zero time of the gaussian: use far tail instead
        let f = force_field(&s, &g, 0.1 + 50.0).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
        let f = force_field(&s, &g, 0.1 + tau).unwrap();
        assert!(f.values().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn kernel_sum_matches_gaussian_integral() {
        for &(h, sigma) in &[(1.0, 3.0), (0.5, 2.0), (2.0, 9.0)] {
            let g = Grid::with_spacing(&[81, 81], h).unwrap();
            let f = force_field(&spec(sigma), &g, 0.1).unwrap();
            let sum: f64 = f.values().iter().sum();
            let expect = 2.0 * PI * sigma * sigma / (h * h);
            assert!((sum / expect - 1.0).abs() < 0.01, "{sum} vs {expect}");
        }
    }

    #[test]
    fn linear_in_amplitude_and_symmetric() {
        let g = Grid::with_spacing(&[25, 25], 1.0).unwrap();
        let mut s = spec(3.0);
        s.epicenter = vec![1.3, -2.1];
        let a = force_field(&s, &g, 0.09).unwrap();
        s.amplitude = 2.0;
        let b = force_field(&s, &g, 0.09).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_eq!(2.0 * x, *y);
        }
        // swapping epicenter axes transposes the field
        s.epicenter = vec![-2.1, 1.3];
        let c = force_field(&s, &g, 0.09).unwrap();
        for i in 0..25 {
            for j in 0..25 {
                assert!((c.get(&[i, j]) - b.get(&[j, i])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn truncation_is_bounded() {
        let g = Grid::with_spacing(&[61, 61], 1.0).unwrap();
        let s = spec(3.0);
        let f = force_field(&s, &g, 0.1).unwrap();
        for flat in 0..g.len() {
            let p = g.position(flat);
            let exact = (-(p[0] * p[0] + p[1] * p[1]) / 18.0).exp();
            assert!((f.values()[flat] - exact).abs() <= 1e-12);
        }
    }

    #[test]
    fn margin_and_radius_checks() {
        let g = Grid::with_spacing(&[21, 21], 1.0).unwrap();
        let mut s = spec(2.0);
        s.epicenter = vec![6.5, 0.0];
        assert!(s.validate(&g).is_err());
        s.epicenter = vec![6.0, 0.0];
        assert!(s.validate(&g).is_ok());
        s.kernel_radius = 0.5;
        assert!(s.validate(&g).is_err());
        s.kernel_radius = 2.0;
        s.epicenter = vec![0.0];
        assert!(s.validate(&g).is_err());
    }
}

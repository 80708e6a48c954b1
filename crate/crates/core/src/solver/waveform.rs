use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Time signature of a source.
pub trait Waveform: Debug + Send + Sync {
    fn name(&self) -> &'static str;
    fn value(&self, t: f64) -> f64;
    /// Frequency above which the spectrum is 20 dB below its peak.
    fn cutoff_hz(&self) -> f64;
}

/// Parameters shared by the built-in waveforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformParams {
    pub tau: f64,
    pub t0: f64,
    pub carrier_hz: Option<f64>,
}

/// `exp(−(t−t₀)²/τ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub tau: f64,
    pub t0: f64,
}

/// Half-width of a Gaussian spectrum at −20 dB: `√ln10 / (π τ)`.
fn gaussian_halfwidth(tau: f64) -> f64 {
    std::f64::consts::LN_10.sqrt() / (PI * tau)
}

impl Waveform for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn value(&self, t: f64) -> f64 {
        let s = (t - self.t0) / self.tau;
        (-s * s).exp()
    }

    fn cutoff_hz(&self) -> f64 {
        gaussian_halfwidth(self.tau)
    }
}

/// Gaussian envelope times `sin(2π f (t−t₀))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulatedGaussian {
    pub tau: f64,
    pub t0: f64,
    pub carrier_hz: f64,
}

impl Waveform for ModulatedGaussian {
    fn name(&self) -> &'static str {
        "modulated_gaussian"
    }

    fn value(&self, t: f64) -> f64 {
        let s = (t - self.t0) / self.tau;
        (-s * s).exp() * (2.0 * PI * self.carrier_hz * (t - self.t0)).sin()
    }

    fn cutoff_hz(&self) -> f64 {
        self.carrier_hz + gaussian_halfwidth(self.tau)
    }
}

type Factory = fn(&WaveformParams) -> Result<Box<dyn Waveform>>;

/// Waveforms selectable by name at run time.
pub struct WaveformRegistry {
    factories: BTreeMap<&'static str, Factory>,
}

impl WaveformRegistry {
    fn builtin() -> Self {
        let mut r = Self {
            factories: BTreeMap::new(),
        };
        r.register("gaussian", |p| {
            check_tau(p)?;
            Ok(Box::new(Gaussian { tau: p.tau, t0: p.t0 }))
        });
        r.register("modulated_gaussian", |p| {
            check_tau(p)?;
            let f = p
                .carrier_hz
                .filter(|f| *f > 0.0 && f.is_finite())
                .ok_or_else(|| Error::config("carrier_hz", "modulated_gaussian needs a positive carrier_hz"))?;
            Ok(Box::new(ModulatedGaussian {
                tau: p.tau,
                t0: p.t0,
                carrier_hz: f,
            }))
        });
        r
    }

    pub fn register(&mut self, name: &'static str, f: Factory) {
        self.factories.insert(name, f);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn create(&self, name: &str, p: &WaveformParams) -> Result<Box<dyn Waveform>> {
        let f = self.factories.get(name).ok_or_else(|| {
            Error::config(
                "kind",
                format!("unknown waveform `{name}`; expected one of {:?}", self.names()),
            )
        })?;
        f(p)
    }
}

fn check_tau(p: &WaveformParams) -> Result<()> {
    if !(p.tau > 0.0) || !p.tau.is_finite() {
        return Err(Error::config("tau", format!("must be positive, got {}", p.tau)));
    }
    if !p.t0.is_finite() {
        return Err(Error::config("t0", "must be finite"));
    }
    Ok(())
}

pub fn waveforms() -> &'static WaveformRegistry {
    static REG: OnceLock<WaveformRegistry> = OnceLock::new();
    REG.get_or_init(WaveformRegistry::builtin)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(tau: f64, t0: f64, f: Option<f64>) -> WaveformParams {
        WaveformParams { tau, t0, carrier_hz: f }
    }

    #[test]
    fn gaussian_peak_and_decay() {
        let g = waveforms().create("gaussian", &params(0.48e-9, 1.77e-9, None)).unwrap();
        assert_eq!(g.value(1.77e-9), 1.0);
        assert!(g.value(1.0) < 1e-300);
        assert!(g.value(-1.0) < 1e-300);
    }

    #[test]
    fn gaussian_cutoff_near_one_gigahertz() {
        let g = Gaussian { tau: 0.48e-9, t0: 0.0 };
        assert!((g.cutoff_hz() / 1e9 - 1.006).abs() < 1e-3);
    }

    #[test]
    fn modulated_is_zero_at_center() {
        let m = waveforms()
            .create("modulated_gaussian", &params(3e-9, 12e-9, Some(150e6)))
            .unwrap();
        assert_eq!(m.value(12e-9), 0.0);
        assert_eq!(m.name(), "modulated_gaussian");
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(waveforms().create("gaussian", &params(0.0, 0.0, None)).is_err());
        assert!(waveforms().create("modulated_gaussian", &params(1.0, 0.0, None)).is_err());
        let e = waveforms().create("ricker", &params(1.0, 0.0, None)).unwrap_err();
        assert!(e.to_string().contains("ricker"));
    }
}

//! Spectra, port power, reflection and stability diagnostics.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Complex, DMatrix};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coupling::GlobalSystem;
use crate::error::{Error, Result};
use crate::sparse::weighted_dot;

/// Incident power below this fraction of the band maximum makes S11 invalid.
pub const POWER_FLOOR: f64 = 1e-12;
/// Frequencies above this fraction of the source cutoff are low-confidence.
pub const CONFIDENT_FRACTION: f64 = 0.9;
/// Largest active system handled by the dense eigensolver.
pub const DENSE_LIMIT: usize = 3000;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    /// One amplitude array per recorded component.
    pub amps: Vec<Vec<Complex<f64>>>,
}

impl Spectrum {
    pub fn new(freqs: Vec<f64>, amps: Vec<Vec<Complex<f64>>>) -> Result<Self> {
        if freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Dimension("frequency grid must be strictly increasing".into()));
        }
        if let Some(a) = amps.iter().find(|a| a.len() != freqs.len()) {
            return Err(Error::Dimension(format!("{} amplitudes for {} frequencies", a.len(), freqs.len())));
        }
        Ok(Self { freqs, amps })
    }
}

/// `n` evenly spaced frequencies from `f0` to `f1` inclusive.
pub fn linspace(f0: f64, f1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![f0],
        _ => (0..n).map(|k| f0 + (f1 - f0) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// `X(f) = Σ x_n exp(−i2πf nΔt) Δt`, evaluated directly.
pub fn dft(series: &[f64], dt: f64, freqs: &[f64]) -> Vec<Complex<f64>> {
    freqs
        .iter()
        .map(|f| {
            let w = 2.0 * PI * f * dt;
            let (mut re, mut im) = (0.0, 0.0);
            for (n, x) in series.iter().enumerate() {
                let (s, c) = (w * n as f64).sin_cos();
                re += x * c;
                im -= x * s;
            }
            Complex::new(re * dt, im * dt)
        })
        .collect()
}

fn column(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k]).collect()
}

/// `|Σᵢ F(Ezᵢ) F(Hᵢ)* Δs|`; `ez[n][i]` is node `i` at record `n`.
pub fn port_power(ez: &[Vec<f64>], h: &[Vec<f64>], ds: f64, dt: f64, freqs: &[f64]) -> Result<Vec<f64>> {
    if ez.len() != h.len() {
        return Err(Error::Dimension(format!("{} Ez records but {} H records", ez.len(), h.len())));
    }
    let nodes = ez.first().map_or(0, Vec::len);
    if ez.iter().chain(h).any(|r| r.len() != nodes) {
        return Err(Error::Dimension("ragged line records".into()));
    }
    let mut acc = vec![Complex::new(0.0, 0.0); freqs.len()];
    for i in 0..nodes {
        let fe = dft(&column(ez, i), dt, freqs);
        let fh = dft(&column(h, i), dt, freqs);
        for (a, (e, m)) in acc.iter_mut().zip(fe.iter().zip(&fh)) {
            *a += e * m.conj() * ds;
        }
    }
    Ok(acc.iter().map(|c| c.norm()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionResult {
    pub freqs: Vec<f64>,
    /// `None` where the incident power is below the floor.
    pub s11_db: Vec<Option<f64>>,
    pub reflected: Vec<f64>,
    pub incident: Vec<f64>,
    pub low_confidence: Vec<bool>,
}

impl ReflectionResult {
    /// Largest valid |S11| (dB) at frequencies up to `f_max`.
    pub fn max_db_below(&self, f_max: f64) -> Option<f64> {
        self.freqs
            .iter()
            .zip(&self.s11_db)
            .filter(|(f, _)| **f <= f_max)
            .filter_map(|(_, s)| *s)
            .reduce(f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "freq_hz,s11_db")?;
        for (f, s) in self.freqs.iter().zip(&self.s11_db) {
            match s {
                Some(v) => writeln!(w, "{f:.16e},{v:.16e}")?,
                None => writeln!(w, "{f:.16e},nan")?,
            }
        }
        Ok(())
    }
}

/// `10 log₁₀ |P_r / P_i|`.
pub fn s11(freqs: &[f64], reflected: &[f64], incident: &[f64], cutoff_hz: Option<f64>) -> Result<ReflectionResult> {
    if reflected.len() != freqs.len() || incident.len() != freqs.len() {
        return Err(Error::Dimension("power arrays must match the frequency grid".into()));
    }
    let floor = POWER_FLOOR * incident.iter().cloned().fold(0.0, f64::max);
    let s11_db = reflected
        .iter()
        .zip(incident)
        .map(|(r, i)| (*i > floor && *i > 0.0).then(|| 10.0 * (r / i).abs().log10()))
        .collect();
    let low_confidence = freqs
        .iter()
        .map(|f| cutoff_hz.is_some_and(|c| *f > CONFIDENT_FRACTION * c))
        .collect();
    Ok(ReflectionResult {
        freqs: freqs.to_vec(),
        s11_db,
        reflected: reflected.to_vec(),
        incident: incident.to_vec(),
        low_confidence,
    })
}

/// `|f_eval − f_ref| / f_ref` in percent.
pub fn resonance_error(f_eval: f64, f_ref: f64) -> f64 {
    100.0 * ((f_eval - f_ref) / f_ref).abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub freq: f64,
    pub mag: f64,
}

/// Strict local maxima at or above `rel_threshold × max`, refined by a
/// three-point parabola, largest first.
pub fn find_peaks(freqs: &[f64], mags: &[f64], rel_threshold: f64) -> Vec<Peak> {
    let n = mags.len().min(freqs.len());
    let top = mags.iter().take(n).cloned().fold(0.0, f64::max);
    if n < 3 || top <= 0.0 {
        return Vec::new();
    }
    let mut peaks: Vec<Peak> = (1..n - 1)
        .filter(|&k| mags[k] > mags[k - 1] && mags[k] >= mags[k + 1] && mags[k] >= rel_threshold * top)
        .map(|k| {
            let (a, b, c) = (mags[k - 1], mags[k], mags[k + 1]);
            let den = a - 2.0 * b + c;
            let d = if den != 0.0 { (0.5 * (a - c) / den).clamp(-0.5, 0.5) } else { 0.0 };
            let step = if d >= 0.0 { freqs[k + 1] - freqs[k] } else { freqs[k] - freqs[k - 1] };
            Peak {
                freq: freqs[k] + d * step,
                mag: b - 0.25 * (a - c) * d,
            }
        })
        .collect();
    peaks.sort_by(|p, q| q.mag.total_cmp(&p.mag));
    peaks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralCheck {
    Eigen { max_real: f64, spectral_radius: f64 },
    EnergyRate { max_rate: f64, samples: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub skew_residual: f64,
    pub active_dofs: usize,
    pub lossless: bool,
    pub spectral: SpectralCheck,
    pub tolerance: f64,
}

impl StabilityReport {
    /// Max real part (or energy rate) relative to the spectral scale.
    pub fn relative_growth(&self) -> f64 {
        match self.spectral {
            SpectralCheck::Eigen {
                max_real,
                spectral_radius,
            } => max_real / spectral_radius.max(f64::MIN_POSITIVE),
            SpectralCheck::EnergyRate { max_rate, .. } => max_rate,
        }
    }

    pub fn passed(&self) -> bool {
        self.relative_growth() <= self.tolerance
    }
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "active DOFs: {}", self.active_dofs)?;
        writeln!(f, "skew-symmetry residual: {:.3e}", self.skew_residual)?;
        match self.spectral {
            SpectralCheck::Eigen {
                max_real,
                spectral_radius,
            } => {
                let cmp = if self.passed() { "<=" } else { ">" };
                writeln!(
                    f,
                    "max Re(λ) = {max_real:.3e} {cmp} {:.0e}·ρ (ρ = {spectral_radius:.6e})",
                    self.tolerance
                )?;
            }
            SpectralCheck::EnergyRate { max_rate, samples } => {
                writeln!(f, "max normalised energy rate over {samples} samples: {max_rate:.3e}")?;
            }
        }
        writeln!(f, "skew_residual={:e}", self.skew_residual)?;
        writeln!(f, "active_dofs={}", self.active_dofs)?;
        writeln!(f, "relative_growth={:e}", self.relative_growth())?;
        write!(f, "passed={}", self.passed())
    }
}

fn active_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter_map(|(k, a)| a.then_some(k)).collect()
}

/// `P^½ 𝒜 P^-½` restricted to active values, `E` first.
pub fn similarity_generator(sys: &GlobalSystem) -> DMatrix<f64> {
    let ea = active_indices(&sys.e_active);
    let ha = active_indices(&sys.h_active);
    let (ne, nh) = (ea.len(), ha.len());
    let mut pos_e = vec![usize::MAX; sys.e_active.len()];
    ea.iter().enumerate().for_each(|(p, k)| pos_e[*k] = p);
    let mut pos_h = vec![usize::MAX; sys.h_active.len()];
    ha.iter().enumerate().for_each(|(p, k)| pos_h[*k] = ne + p);
    let mut s = DMatrix::zeros(ne + nh, ne + nh);
    for (p, k) in ea.iter().enumerate() {
        s[(p, p)] = -sys.loss[*k];
    }
    for (r, c, v) in sys.a_e.iter() {
        if pos_e[r] != usize::MAX && pos_h[c] != usize::MAX {
            s[(pos_e[r], pos_h[c])] += (sys.p_e[r] / sys.p_h[c]).sqrt() * v;
        }
    }
    for (r, c, v) in sys.a_h.iter() {
        if pos_h[r] != usize::MAX && pos_e[c] != usize::MAX {
            s[(pos_h[r], pos_e[c])] += (sys.p_h[r] / sys.p_e[c]).sqrt() * v;
        }
    }
    s
}

/// Largest stable leapfrog step `2/√λ_max(−A_E A_H)` by power iteration.
pub fn leapfrog_limit(sys: &GlobalSystem, iterations: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = sys
        .e_active
        .iter()
        .map(|a| if *a { rng.random_range(-1.0..1.0) } else { 0.0 })
        .collect();
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let h = sys.a_h.mul_vec(&v);
        let w: Vec<f64> = sys.a_e.mul_vec(&h).iter().map(|x| -x).collect();
        let vv = weighted_dot(&v, &sys.p_e, &v);
        lambda = weighted_dot(&v, &sys.p_e, &w) / vv;
        let norm = weighted_dot(&w, &sys.p_e, &w).sqrt();
        if norm == 0.0 {
            return f64::INFINITY;
        }
        v = w.iter().map(|x| x / norm).collect();
    }
    2.0 / lambda.sqrt()
}

/// Skew-symmetry residual plus an eigenvalue check (small systems) or
/// sampled energy rates normalised by `2ℰ·ρ` (large systems).
pub fn stability_diagnostics(sys: &GlobalSystem, samples: usize, seed: u64) -> StabilityReport {
    let active_dofs = sys.n_active();
    let lossless = sys.loss.iter().all(|l| *l == 0.0);
    let spectral = if active_dofs <= DENSE_LIMIT {
        let eig = similarity_generator(sys).complex_eigenvalues();
        let max_real = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let spectral_radius = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
        SpectralCheck::Eigen {
            max_real,
            spectral_radius,
        }
    } else {
        let rho = 2.0 / leapfrog_limit(sys, 200, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |mask: &[bool]| -> Vec<f64> {
            mask.iter()
                .map(|a| if *a { rng.random_range(-1.0..1.0) } else { 0.0 })
                .collect()
        };
        let mut max_rate = f64::NEG_INFINITY;
        for _ in 0..samples.max(1) {
            let e = draw(&sys.e_active);
            let h = draw(&sys.h_active);
            let rate = sys.energy_rate(&e, &h) / (2.0 * sys.energy(&e, &h) * rho);
            max_rate = max_rate.max(rate);
        }
        SpectralCheck::EnergyRate {
            max_rate,
            samples: samples.max(1),
        }
    };
    StabilityReport {
        skew_residual: sys.skew_residual(),
        active_dofs,
        lossless,
        spectral,
        tolerance: 1e-10,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{assemble_global_system, default_penalties, SystemInputs};
    use crate::operators::MaterialField;
    use crate::topology::{build_indicator_masks, EmbeddedRegionSpec, Rect, StaggeredLayout};

    #[test]
    fn dft_of_constant_and_zero() {
        let dt = 0.25;
        let x = vec![1.0; 40];
        let c = dft(&x, dt, &[0.0]);
        assert!((c[0].re - 10.0).abs() < 1e-13 && c[0].im == 0.0);
        let z = dft(&[0.0; 16], dt, &[0.0, 1.0, 2.0]);
        assert!(z.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn impulse_is_flat() {
        let mut x = vec![0.0; 64];
        x[0] = 1.0;
        let dt = 1e-11;
        for v in dft(&x, dt, &linspace(0.0, 4e10, 33)) {
            assert!((v.norm() - dt).abs() <= 1e-13 * dt);
        }
    }

    #[test]
    fn sinusoid_matches_geometric_sum() {
        let (n, dt) = (200usize, 1e-3);
        let f0 = 25.0 / (n as f64 * dt);
        let x: Vec<f64> = (0..n).map(|k| (2.0 * PI * f0 * k as f64 * dt).cos()).collect();
        let on = dft(&x, dt, &[f0])[0];
        assert!((on.norm() - 0.5 * n as f64 * dt).abs() < 1e-12);
        // Half a bin off: each exponential contributes a closed-form geometric sum.
        let f = f0 + 0.5 / (n as f64 * dt);
        let geo = |df: f64| {
            let q = Complex::new(0.0, -2.0 * PI * df * dt).exp();
            (Complex::new(1.0, 0.0) - q.powu(n as u32)) / (Complex::new(1.0, 0.0) - q)
        };
        let want = (geo(f - f0) + geo(f + f0)) * 0.5 * dt;
        assert!((dft(&x, dt, &[f])[0] - want).norm() < 1e-12);
    }

    #[test]
    fn port_power_is_bilinear() {
        let dt = 1e-10;
        let freqs = linspace(1e8, 1e9, 5);
        let ez: Vec<Vec<f64>> = (0..50).map(|n| vec![(n as f64 * 0.3).sin(), 0.5]).collect();
        let h: Vec<Vec<f64>> = (0..50).map(|n| vec![(n as f64 * 0.2).cos(), -0.1]).collect();
        let p = port_power(&ez, &h, 0.01, dt, &freqs).unwrap();
        let dbl = |v: &Vec<Vec<f64>>| v.iter().map(|r| r.iter().map(|x| 2.0 * x).collect()).collect::<Vec<Vec<f64>>>();
        let p4 = port_power(&dbl(&ez), &dbl(&h), 0.01, dt, &freqs).unwrap();
        for (a, b) in p.iter().zip(&p4) {
            assert!((b - 4.0 * a).abs() <= 1e-12 * b.abs());
        }
        let zero = vec![vec![0.0; 2]; 50];
        assert!(port_power(&zero, &h, 0.01, dt, &freqs).unwrap().iter().all(|v| *v == 0.0));
        let one_e: Vec<Vec<f64>> = ez.iter().map(|r| vec![r[0]]).collect();
        let one_h: Vec<Vec<f64>> = h.iter().map(|r| vec![r[0]]).collect();
        let p1 = port_power(&one_e, &one_h, 0.01, dt, &freqs).unwrap();
        let fe = dft(&column(&one_e, 0), dt, &freqs);
        let fh = dft(&column(&one_h, 0), dt, &freqs);
        for k in 0..freqs.len() {
            assert!((p1[k] - fe[k].norm() * fh[k].norm() * 0.01).abs() <= 1e-12 * p1[k]);
        }
    }

    #[test]
    fn s11_formula_and_floor() {
        let f = [1.0, 2.0, 3.0];
        let r = s11(&f, &[1.0, 1e-6, 5.0], &[1.0, 1.0, 1e-13], Some(2.5)).unwrap();
        assert_eq!(r.s11_db[0], Some(0.0));
        assert!((r.s11_db[1].unwrap() + 60.0).abs() < 1e-12);
        assert_eq!(r.s11_db[2], None);
        assert_eq!(r.low_confidence, vec![false, false, true]);
        let scaled = s11(&f, &[7.0, 7e-6, 35.0], &[7.0, 7.0, 7e-13], None).unwrap();
        for (a, b) in r.s11_db.iter().zip(&scaled.s11_db) {
            match (a, b) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12),
                (None, None) => {}
                _ => panic!("validity changed under rescaling"),
            }
        }
    }

    #[test]
    fn resonance_error_values() {
        assert_eq!(resonance_error(1.0, 1.0), 0.0);
        assert!((resonance_error(1.1014, 1.0) - 10.14).abs() < 1e-10);
        assert_eq!(resonance_error(0.75, 1.0), resonance_error(1.25, 1.0));
    }

    #[test]
    fn peaks_of_synthetic_tones() {
        let dt = 1e-3;
        let x: Vec<f64> = (0..2000)
            .map(|k| {
                let t = k as f64 * dt;
                (2.0 * PI * 47.3 * t).sin() + 0.4 * (2.0 * PI * 130.0 * t).sin()
            })
            .collect();
        let freqs = linspace(1.0, 200.0, 400);
        let mags: Vec<f64> = dft(&x, dt, &freqs).iter().map(|c| c.norm()).collect();
        let p = find_peaks(&freqs, &mags, 0.2);
        assert_eq!(p.len(), 2);
        let step = freqs[1] - freqs[0];
        assert!((p[0].freq - 47.3).abs() < step);
        assert!((p[1].freq - 130.0).abs() < step);
        assert!(p[0].mag > p[1].mag);
        assert!(find_peaks(&freqs, &vec![1.0; 400], 0.1).is_empty());
    }

    fn small_system(sigma: f64) -> GlobalSystem {
        let l = StaggeredLayout::new(10, 10, 0.1, 0.1, 0.0, 0.0);
        let r = EmbeddedRegionSpec {
            bounds: Rect {
                x0: 0.2,
                x1: 0.6,
                y0: 0.2,
                y1: 0.6,
            },
            ratio: "2:3".parse().unwrap(),
        };
        let m = build_indicator_masks(&l, &[r]).unwrap();
        let mut outer = MaterialField::vacuum(&l);
        outer.sigma.iter_mut().for_each(|s| *s = sigma);
        let fine = MaterialField::vacuum(&m.holes()[0].fine);
        assemble_global_system(&SystemInputs {
            masks: &m,
            outer_materials: &outer,
            region_materials: &[fine],
            sat: &default_penalties(),
        })
        .unwrap()
    }

    #[test]
    fn lossless_spectrum_is_imaginary() {
        let sys = small_system(0.0);
        let rep = stability_diagnostics(&sys, 0, 1);
        assert!(matches!(rep.spectral, SpectralCheck::Eigen { .. }));
        assert!(rep.passed(), "{rep}");
        assert!(rep.to_string().contains("passed=true"));
    }

    #[test]
    fn lossy_rates_are_non_positive() {
        let sys = small_system(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let e: Vec<f64> = sys.e_active.iter().map(|a| if *a { rng.random_range(-1.0..1.0) } else { 0.0 }).collect();
            let h: Vec<f64> = sys.h_active.iter().map(|a| if *a { rng.random_range(-1.0..1.0) } else { 0.0 }).collect();
            let rate = sys.energy_rate(&e, &h);
            let dissipation: f64 = (0..e.len()).map(|k| sys.loss[k] * sys.p_e[k] * e[k] * e[k]).sum();
            assert!(dissipation > 0.0);
            assert!(rate <= 1e-9 * dissipation, "{rate} vs {dissipation}");
        }
    }

    #[test]
    fn leapfrog_limit_exceeds_cfl_step() {
        let sys = small_system(0.0);
        let lim = leapfrog_limit(&sys, 400, 9);
        let h = 0.1 * 2.0 / 3.0;
        let cfl = h / (crate::operators::C0 * 2f64.sqrt());
        assert!(lim > cfl, "limit {lim:e} vs cfl {cfl:e}");
    }
}

use std::collections::BTreeMap;
use std::sync::OnceLock;

use super::materials::{MaterialsSpec, Medium, Paint, Shape};
use super::{OutputSpec, ReflectionSpec, Scenario};
use crate::coupling::SatConfig;
use crate::operators::C0;
use crate::solver::{LineSpec, ProbeSpec, Profile, SourceSpec, TimeConfig};
use crate::topology::{EmbeddedRegionSpec, GridSpec, Rect};

/// A built-in experiment.
pub trait Preset: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn scenario(&self, full_scale: bool) -> Scenario;
}

pub struct PresetRegistry {
    items: BTreeMap<&'static str, Box<dyn Preset>>,
}

impl PresetRegistry {
    pub fn register(&mut self, p: Box<dyn Preset>) {
        self.items.insert(p.name(), p);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Preset> {
        self.items.get(name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.items.keys().copied().collect()
    }
}

pub fn presets() -> &'static PresetRegistry {
    static REG: OnceLock<PresetRegistry> = OnceLock::new();
    REG.get_or_init(|| {
        let mut r = PresetRegistry { items: BTreeMap::new() };
        r.register(Box::new(CavityStability));
        r.register(Box::new(WaveguideReflection));
        r.register(Box::new(SrrArray));
        r.register(Box::new(HeteroBlock));
        r
    })
}

fn square(lo: f64, hi: f64, h: f64) -> GridSpec {
    GridSpec {
        x_min: lo,
        x_max: hi,
        y_min: lo,
        y_max: hi,
        dx: h,
        dy: h,
    }
}

fn region(x0: f64, x1: f64, y0: f64, y1: f64, ratio: &str) -> EmbeddedRegionSpec {
    EmbeddedRegionSpec {
        bounds: Rect { x0, x1, y0, y1 },
        ratio: ratio.parse().expect("preset ratio"),
    }
}

fn point_probe(name: &str, x: f64, y: f64) -> ProbeSpec {
    ProbeSpec {
        name: name.into(),
        at: Some([x, y]),
        line: None,
    }
}

fn modulated(tau: f64, t0: f64, f: f64, at: [f64; 2]) -> SourceSpec {
    SourceSpec {
        kind: "modulated_gaussian".into(),
        tau,
        t0,
        carrier_hz: Some(f),
        amplitude: 1.0,
        at: Some(at),
        line: None,
    }
}

/// `τ` giving a −20 dB spectral half-width `df`.
fn tau_for_halfwidth(df: f64) -> f64 {
    std::f64::consts::LN_10.sqrt() / (std::f64::consts::PI * df)
}

/// Vacuum CFL step of a square cell of side `h`.
fn vacuum_cfl(h: f64) -> f64 {
    h / (C0 * 2f64.sqrt())
}

fn base(grid: GridSpec, time: TimeConfig) -> Scenario {
    Scenario {
        grid,
        time,
        materials: MaterialsSpec::default(),
        sat: SatConfig::default(),
        output: OutputSpec::default(),
        regions: Vec::new(),
        sources: Vec::new(),
        probes: Vec::new(),
    }
}

/// PEC cavity with one 1:5 block, run for a long time.
pub struct CavityStability;

impl Preset for CavityStability {
    fn name(&self) -> &'static str {
        "cavity-stability"
    }

    fn summary(&self) -> &'static str {
        "1.2 m PEC cavity with a 1:5 block, 150 MHz pulse, 1e5 steps (full scale: 6 m, 1e6 steps)"
    }

    fn scenario(&self, full_scale: bool) -> Scenario {
        let (size, lo, hi, steps) = if full_scale { (6.0, 2.0, 4.0, 1_000_000) } else { (1.2, 0.4, 0.8, 100_000) };
        let mut s = base(
            square(0.0, size, 0.05),
            TimeConfig {
                cfl: 0.99,
                steps,
                dt: None,
                record_stride: 10,
            },
        );
        s.regions.push(region(lo, hi, lo, hi, "1:5"));
        let tau = 3e-9;
        s.sources.push(modulated(tau, 4.0 * tau, 150e6, [size / 6.0, size / 2.0]));
        s.probes.push(point_probe("probe", size / 6.0, size / 6.0));
        s
    }
}

/// Parallel-plate guide carrying the first TM mode past a block.
pub struct WaveguideReflection;

impl WaveguideReflection {
    /// The guide with every length scaled by `s` cells per nominal cell,
    /// so the band top is resolved by `15 s` coarse cells per wavelength.
    pub fn scaled(&self, s: f64, ratio: &str) -> Scenario {
        let h = 0.01;
        let n = |cells: f64| (cells * s).round();
        let (len, width) = (n(300.0), n(40.0));
        let (x_src, x_port, x_blk, blk_len) = (n(5.0), n(120.0), n(160.0), n(20.0));
        let (y_blk0, y_blk1) = (n(10.0), n(30.0));
        let half_width = C0 / (24.0 * s * h);
        let tau = tau_for_halfwidth(half_width);
        let mut sc = base(
            GridSpec {
                x_min: 0.0,
                x_max: len * h,
                y_min: 0.0,
                y_max: width * h,
                dx: h,
                dy: h,
            },
            TimeConfig {
                cfl: 0.99,
                steps: 0,
                dt: None,
                record_stride: 1,
            },
        );
        sc.regions.push(region(x_blk * h, (x_blk + blk_len) * h, y_blk0 * h, y_blk1 * h, ratio));
        let line = |x: f64, profile| LineSpec {
            from: [x * h, 0.0],
            to: [x * h, width * h],
            profile,
        };
        sc.sources.push(SourceSpec {
            at: None,
            line: Some(line(x_src, Profile::HalfSine)),
            ..modulated(tau, 4.0 * tau, half_width, [0.0, 0.0])
        });
        sc.probes.push(ProbeSpec {
            name: "port".into(),
            at: None,
            line: Some(line(x_port, Profile::Uniform)),
        });
        // Gate before the first wall echo can return to the port line.
        let gate = n(430.0) * h / C0;
        let r: crate::topology::Ratio = ratio.parse().expect("preset ratio");
        let fine_h = r.fine_spacing(h);
        sc.time.steps = (gate / (0.99 * vacuum_cfl(fine_h))).ceil() as u64;
        sc.output.reflection = Some(ReflectionSpec {
            port: "port".into(),
            f_min: 1.3 * C0 / (2.0 * width * h),
            f_max: 2.0 * half_width,
            points: 200,
        });
        sc
    }
}

impl Preset for WaveguideReflection {
    fn name(&self) -> &'static str {
        "waveguide-reflection"
    }

    fn summary(&self) -> &'static str {
        "PEC parallel-plate guide, TM1 pulse past a 1:5 block, time-gated S11 against a coarse reference \
         (full scale: twice the resolution per wavelength)"
    }

    fn scenario(&self, full_scale: bool) -> Scenario {
        self.scaled(if full_scale { 4.0 } else { 2.0 }, "1:5")
    }
}

/// Two blocks each holding a pair of concentric split rings.
pub struct SrrArray;

impl SrrArray {
    fn rings(cx: f64, cy: f64) -> [Paint; 2] {
        let ring = |r_out: f64, angle: f64| Paint {
            shape: Shape::Ring {
                center: [cx, cy],
                r_inner: r_out - 0.5e-3,
                r_outer: r_out,
                gap: 0.5e-3,
                gap_angle_deg: angle,
            },
            eps_rel: 1.0,
            mu_rel: 1.0,
            sigma: 1e6,
        };
        [ring(3.0e-3, 0.0), ring(2.0e-3, 180.0)]
    }
}

impl Preset for SrrArray {
    fn name(&self) -> &'static str {
        "srr-array"
    }

    fn summary(&self) -> &'static str {
        "50 mm PEC cavity, two 1:5 blocks with conductive split-ring pairs (full scale: 1:10)"
    }

    fn scenario(&self, full_scale: bool) -> Scenario {
        let h = 0.5e-3;
        let ratio = if full_scale { "1:10" } else { "1:5" };
        let mut s = base(
            square(0.0, 0.05, h),
            TimeConfig {
                cfl: 0.99,
                steps: 40_000,
                dt: None,
                record_stride: 4,
            },
        );
        s.regions.push(region(0.012, 0.024, 0.019, 0.031, ratio));
        s.regions.push(region(0.026, 0.038, 0.019, 0.031, ratio));
        s.materials.paint.extend(Self::rings(0.018, 0.025));
        s.materials.paint.extend(Self::rings(0.032, 0.025));
        let tau = tau_for_halfwidth(5e9);
        s.sources.push(modulated(tau, 4.0 * tau, 6e9, [0.006, 0.025]));
        s.probes.push(point_probe("left", 0.018, 0.025));
        s.probes.push(point_probe("right", 0.032, 0.025));
        s.probes.push(point_probe("far", 0.044, 0.025));
        s
    }
}

/// Layered lossy dielectric disk inside one block.
pub struct HeteroBlock;

impl HeteroBlock {
    /// `(radius, eps_rel, sigma)`, outermost first.
    pub const LAYERS: [(f64, f64, f64); 4] = [(0.07, 5.28, 0.08), (0.06, 12.0, 0.2), (0.05, 69.0, 3.4), (0.035, 45.0, 0.8)];
}

impl Preset for HeteroBlock {
    fn name(&self) -> &'static str {
        "hetero-block"
    }

    fn summary(&self) -> &'static str {
        "0.4 m PEC box, 1:5 block around a four-layer lossy disk, 1 GHz Gaussian pulse (full scale: 1:10)"
    }

    fn scenario(&self, full_scale: bool) -> Scenario {
        let h = 0.01;
        let ratio = if full_scale { "1:10" } else { "1:5" };
        let mut s = base(
            square(0.0, 0.4, h),
            TimeConfig {
                cfl: 0.9,
                steps: 3000,
                dt: Some(0.9 * vacuum_cfl(h / 10.0)),
                record_stride: 1,
            },
        );
        s.regions.push(region(0.12, 0.28, 0.12, 0.28, ratio));
        s.materials.background = Medium::default();
        for (r, eps, sigma) in Self::LAYERS {
            s.materials.paint.push(Paint {
                shape: Shape::Disk {
                    center: [0.2, 0.2],
                    radius: r,
                },
                eps_rel: eps,
                mu_rel: 1.0,
                sigma,
            });
        }
        s.sources.push(SourceSpec {
            kind: "gaussian".into(),
            tau: 0.48e-9,
            t0: 1.77e-9,
            carrier_hz: None,
            amplitude: 1.0,
            at: Some([0.05, 0.2]),
            line: None,
        });
        s.probes.push(point_probe("core", 0.2, 0.2));
        s.probes.push(point_probe("shell", 0.2, 0.265));
        s
    }
}

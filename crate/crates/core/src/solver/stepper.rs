use std::io::Write;

use serde::{Deserialize, Serialize};

use super::sites::{resolve_probe, resolve_source, ProbeSites, ProbeSpec, ResolvedProbe, ResolvedSource, SourceSpec};
use crate::coupling::{GlobalLayout, GlobalSystem};
use crate::error::{Error, Result};
use crate::operators::MaterialField;
use crate::sparse::weighted_dot;

const FINITE_CHECK_EVERY: u64 = 64;

fn default_cfl() -> f64 {
    0.99
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub steps: u64,
    /// Overrides the CFL-derived step when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

impl TimeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::config("time.cfl", format!("must lie in (0, 1], got {}", self.cfl)));
        }
        if self.record_stride == 0 {
            return Err(Error::config("time.record_stride", "must be at least 1"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::config("time.dt", format!("must be positive, got {dt}")));
            }
        }
        Ok(())
    }
}

/// `cfl · min_b 1/(c_b √(1/hx² + 1/hy²))` over all blocks, with `c_b` the
/// fastest wave speed in block `b`. `materials` is outer first, then regions.
pub fn cfl_time_step(layout: &GlobalLayout, materials: &[&MaterialField], cfl: f64) -> Result<f64> {
    let n_blocks = 1 + layout.regions.len();
    if materials.len() != n_blocks {
        return Err(Error::Dimension(format!("{n_blocks} blocks but {} material sets", materials.len())));
    }
    let blocks = std::iter::once(None).chain((0..layout.regions.len()).map(Some));
    let dt = blocks
        .zip(materials)
        .map(|(b, m)| {
            let l = layout.block(b);
            let c = m.max_speed();
            1.0 / (c * (1.0 / (l.hx * l.hx) + 1.0 / (l.hy * l.hy)).sqrt())
        })
        .fold(f64::INFINITY, f64::min);
    Ok(cfl * dt)
}

/// `E` at integer steps, `H` half a step behind.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub e: Vec<f64>,
    pub h: Vec<f64>,
    pub step: u64,
}

impl FieldState {
    pub fn zeros(sys: &GlobalSystem) -> Self {
        Self {
            e: vec![0.0; sys.layout.n_e],
            h: vec![0.0; sys.layout.n_h],
            step: 0,
        }
    }
}

/// `½ EᵀP E + ½ H⁻ᵀ P H⁺`, conserved exactly by the leapfrog update of a
/// lossless source-free skew system.
pub fn discrete_energy(sys: &GlobalSystem, e: &[f64], h_minus: &[f64], h_plus: &[f64]) -> f64 {
    0.5 * weighted_dot(e, &sys.p_e, e) + 0.5 * weighted_dot(h_minus, &sys.p_h, h_plus)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineRecord {
    pub name: String,
    pub s: Vec<f64>,
    pub ds: f64,
    pub ez: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunInfo {
    pub dt: f64,
    pub steps: u64,
    pub record_stride: usize,
    pub n_e: usize,
    pub n_h: usize,
    pub n_active: usize,
    pub source_snap_m: Vec<f64>,
    pub probe_snap_m: Vec<f64>,
}

/// Everything recorded by a run; row `k` belongs to step `steps[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordSet {
    pub info: RunInfo,
    pub probe_names: Vec<String>,
    pub steps: Vec<u64>,
    pub probes: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    pub lines: Vec<LineRecord>,
}

impl RecordSet {
    pub fn times(&self) -> Vec<f64> {
        self.steps.iter().map(|n| *n as f64 * self.info.dt).collect()
    }

    /// Series of one point probe.
    pub fn probe(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.probe_names.iter().position(|n| n == name)?;
        Some(self.probes.iter().map(|row| row[k]).collect())
    }

    pub fn line(&self, name: &str) -> Option<&LineRecord> {
        self.lines.iter().find(|l| l.name == name)
    }

    /// `step,time_s,energy_J`.
    pub fn write_energy_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,time_s,energy_J")?;
        for (step, q) in self.steps.iter().zip(&self.energy) {
            writeln!(w, "{step},{:.16e},{q:.16e}", *step as f64 * self.info.dt)?;
        }
        Ok(())
    }

    /// `step,time_s,<probe>_Ez,…,energy_J` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "step,time_s")?;
        for n in &self.probe_names {
            write!(w, ",{n}_Ez")?;
        }
        writeln!(w, ",energy_J")?;
        for (k, step) in self.steps.iter().enumerate() {
            write!(w, "{step},{:.16e}", *step as f64 * self.info.dt)?;
            for v in &self.probes[k] {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w, ",{:.16e}", self.energy[k])?;
        }
        Ok(())
    }

    /// One row per record: `step,time_s,Ez@s…,H@s…` with `s` the node
    /// position along the line.
    pub fn write_line_csv<W: Write>(&self, line: &LineRecord, mut w: W) -> std::io::Result<()> {
        write!(w, "step,time_s")?;
        for s in &line.s {
            write!(w, ",Ez@{s}")?;
        }
        for s in &line.s {
            write!(w, ",H@{s}")?;
        }
        writeln!(w)?;
        for (r, step) in self.steps.iter().enumerate() {
            write!(w, "{step},{:.16e}", *step as f64 * self.info.dt)?;
            for v in line.ez[r].iter().chain(&line.h[r]) {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Leapfrog integrator over an assembled [`GlobalSystem`].
pub struct Simulation<'a> {
    sys: &'a GlobalSystem,
    dt: f64,
    pub state: FieldState,
    sources: Vec<ResolvedSource>,
    probes: Vec<ResolvedProbe>,
    decay: Vec<f64>,
    gain: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Simulation<'a> {
    pub fn new(sys: &'a GlobalSystem, dt: f64, sources: &[SourceSpec], probes: &[ProbeSpec]) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("time.dt", format!("must be positive, got {dt}")));
        }
        let mut names = std::collections::HashSet::new();
        for p in probes {
            if !names.insert(p.name.as_str()) {
                return Err(Error::config("probes", format!("duplicate probe name `{}`", p.name)));
            }
        }
        let sources = sources.iter().map(|s| resolve_source(sys, s)).collect::<Result<Vec<_>>>()?;
        let probes = probes.iter().map(|p| resolve_probe(sys, p)).collect::<Result<Vec<_>>>()?;
        let a: Vec<f64> = sys.loss.iter().map(|l| 0.5 * dt * l).collect();
        Ok(Self {
            sys,
            dt,
            state: FieldState::zeros(sys),
            sources,
            probes,
            decay: a.iter().map(|a| (1.0 - a) / (1.0 + a)).collect(),
            gain: a.iter().map(|a| 1.0 / (1.0 + a)).collect(),
            scratch: vec![0.0; sys.layout.n_e],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn sources(&self) -> &[ResolvedSource] {
        &self.sources
    }

    pub fn probes(&self) -> &[ResolvedProbe] {
        &self.probes
    }

    /// Advances one step; returns the interleaved energy of the step
    /// just left when `want_energy` is set.
    pub fn step(&mut self, want_energy: bool) -> Result<Option<f64>> {
        let sys = self.sys;
        let h_old = want_energy.then(|| self.state.h.clone());
        sys.a_h.mul_vec_add(self.dt, &self.state.e, &mut self.state.h);
        let q = h_old.map(|ho| discrete_energy(sys, &self.state.e, &ho, &self.state.h));

        sys.a_e.mul_vec_into(&self.state.h, &mut self.scratch);
        for v in self.scratch.iter_mut() {
            *v *= self.dt;
        }
        let t_half = (self.state.step as f64 + 0.5) * self.dt;
        for s in &self.sources {
            let g = s.amplitude * s.waveform.value(t_half);
            for &(k, w) in &s.nodes {
                self.scratch[k] += g * w;
            }
        }
        for ((e, d), (g, r)) in self.state.e.iter_mut().zip(&self.decay).zip(self.gain.iter().zip(&self.scratch)) {
            *e = d * *e + g * r;
        }
        self.state.step += 1;
        if self.state.step.is_multiple_of(FINITE_CHECK_EVERY) || want_energy {
            self.check_finite()?;
        }
        Ok(q)
    }

    fn check_finite(&self) -> Result<()> {
        let bad = self.state.e.iter().chain(&self.state.h).any(|v| !v.is_finite());
        if bad {
            return Err(Error::Instability { step: self.state.step });
        }
        Ok(())
    }

    fn sample_point(&self, p: &ResolvedProbe) -> Option<f64> {
        match &p.sites {
            ProbeSites::Point { e } => Some(self.state.e[*e]),
            ProbeSites::Line { .. } => None,
        }
    }

    /// Line values from `E^n` and the `H` vector passed in.
    fn sample_line(&self, p: &ResolvedProbe, h: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        match &p.sites {
            ProbeSites::Line { e, h: hi, .. } => {
                let ez = e.iter().map(|k| self.state.e[*k]).collect();
                let hv = hi
                    .iter()
                    .map(|ks| {
                        if ks.is_empty() {
                            0.0
                        } else {
                            ks.iter().map(|k| h[*k]).sum::<f64>() / ks.len() as f64
                        }
                    })
                    .collect();
                Some((ez, hv))
            }
            ProbeSites::Point { .. } => None,
        }
    }

    /// Runs `n_steps` steps, recording every `stride`-th state.
    pub fn run(&mut self, n_steps: u64, stride: usize) -> Result<RecordSet> {
        if stride == 0 {
            return Err(Error::config("time.record_stride", "must be at least 1"));
        }
        let point_names: Vec<String> = self
            .probes
            .iter()
            .filter(|p| matches!(p.sites, ProbeSites::Point { .. }))
            .map(|p| p.name.clone())
            .collect();
        let mut lines: Vec<LineRecord> = self
            .probes
            .iter()
            .filter_map(|p| match &p.sites {
                ProbeSites::Line { s, ds, .. } => Some(LineRecord {
                    name: p.name.clone(),
                    s: s.clone(),
                    ds: *ds,
                    ez: Vec::new(),
                    h: Vec::new(),
                }),
                ProbeSites::Point { .. } => None,
            })
            .collect();
        let mut rec_steps = Vec::new();
        let mut rows = Vec::new();
        let mut energy = Vec::new();
        for _ in 0..n_steps {
            let n = self.state.step;
            let record = n.is_multiple_of(stride as u64);
            if record {
                rec_steps.push(n);
                rows.push(self.probes.iter().filter_map(|p| self.sample_point(p)).collect());
                let h = self.state.h.clone();
                for (lr, p) in lines.iter_mut().zip(self.probes.iter().filter(|p| matches!(p.sites, ProbeSites::Line { .. }))) {
                    let (ez, hv) = self.sample_line(p, &h).expect("line probe");
                    lr.ez.push(ez);
                    lr.h.push(hv);
                }
            }
            if let Some(q) = self.step(record)? {
                energy.push(q);
            }
        }
        self.check_finite()?;
        let sys = self.sys;
        Ok(RecordSet {
            info: RunInfo {
                dt: self.dt,
                steps: n_steps,
                record_stride: stride,
                n_e: sys.layout.n_e,
                n_h: sys.layout.n_h,
                n_active: sys.n_active(),
                source_snap_m: self.sources.iter().map(|s| s.snap_distance).collect(),
                probe_snap_m: self.probes.iter().map(|p| p.snap_distance).collect(),
            },
            probe_names: point_names,
            steps: rec_steps,
            probes: rows,
            energy,
            lines,
        })
    }
}

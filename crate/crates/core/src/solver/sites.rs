use serde::{Deserialize, Serialize};

use super::waveform::{waveforms, Waveform, WaveformParams};
use crate::coupling::{GlobalLayout, GlobalSystem};
use crate::error::{Error, Result};
use crate::topology::{Field, StaggeredLayout};

/// Amplitude taper along a line source.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Uniform,
    /// `sin(π s)` with `s` the fraction of the way along the line.
    HalfSine,
}

/// Axis-aligned segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub from: [f64; 2],
    pub to: [f64; 2],
    #[serde(default)]
    pub profile: Profile,
}

fn one_amplitude() -> f64 {
    1.0
}

/// A soft `Ez` source: its value is added to the field every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub kind: String,
    pub tau: f64,
    pub t0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_hz: Option<f64>,
    #[serde(default = "one_amplitude")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<LineSpec>,
}

impl SourceSpec {
    pub fn params(&self) -> WaveformParams {
        WaveformParams {
            tau: self.tau,
            t0: self.t0,
            carrier_hz: self.carrier_hz,
        }
    }

    pub fn waveform(&self) -> Result<Box<dyn Waveform>> {
        waveforms().create(&self.kind, &self.params())
    }
}

/// A point probe records `Ez`; a line probe records `Ez` and the
/// normal `H` component at every node of the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<LineSpec>,
}

#[derive(Debug)]
pub struct ResolvedSource {
    pub waveform: Box<dyn Waveform>,
    pub amplitude: f64,
    /// Global `E` index and profile weight.
    pub nodes: Vec<(usize, f64)>,
    /// Distance from the requested point to the node used.
    pub snap_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeSites {
    Point { e: usize },
    Line {
        e: Vec<usize>,
        /// One or two `H` indices averaged onto each `Ez` node.
        h: Vec<Vec<usize>>,
        /// Tangential coordinate of each node.
        s: Vec<f64>,
        /// Spacing along the line.
        ds: f64,
        h_field: Field,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedProbe {
    pub name: String,
    pub sites: ProbeSites,
    pub snap_distance: f64,
}

fn site_count(name: &str, at: &Option<[f64; 2]>, line: &Option<LineSpec>) -> Result<()> {
    match (at, line) {
        (Some(_), None) | (None, Some(_)) => Ok(()),
        _ => Err(Error::config(name, "give exactly one of `at` or `line`")),
    }
}

fn node_xy(l: &StaggeredLayout, i: usize, j: usize) -> (f64, f64) {
    (l.x0 + i as f64 * l.hx, l.y0 + j as f64 * l.hy)
}

/// Nearest active `Ez` node to `(x, y)`, with its distance.
pub fn snap_point(sys: &GlobalSystem, x: f64, y: f64) -> Result<(usize, f64)> {
    let gl = &sys.layout;
    let block = gl.block_at(x, y);
    let l = gl.block(block);
    let off = gl.e_offset(block);
    let clamp = |v: f64, n: usize| v.round().clamp(0.0, n as f64) as usize;
    let i = clamp((x - l.x0) / l.hx, l.nx);
    let j = clamp((y - l.y0) / l.hy, l.ny);
    let dist = |i: usize, j: usize| {
        let (px, py) = node_xy(l, i, j);
        (px - x).hypot(py - y)
    };
    if sys.e_active[off + l.ez(i, j)] {
        return Ok((off + l.ez(i, j), dist(i, j)));
    }
    let mut best: Option<(usize, f64)> = None;
    for k in 0..l.n_ez() {
        if !sys.e_active[off + k] {
            continue;
        }
        let (i, j) = l.unflatten(Field::Ez, k);
        let d = dist(i, j);
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((off + k, d));
        }
    }
    best.ok_or_else(|| Error::Geometry(format!("no active Ez node near ({x}, {y})")))
}

struct LineNodes {
    block: Option<usize>,
    /// Block-local `(i, j)` and the position fraction along the line.
    nodes: Vec<(usize, usize, f64)>,
    vertical: bool,
    snap: f64,
}

fn line_nodes(gl: &GlobalLayout, sys: &GlobalSystem, line: &LineSpec) -> Result<LineNodes> {
    let [x0, y0] = line.from;
    let [x1, y1] = line.to;
    let vertical = x0 == x1;
    if !vertical && y0 != y1 {
        return Err(Error::Geometry("line sites must be horizontal or vertical".into()));
    }
    let block = gl.block_at(0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let l = gl.block(block);
    let off = gl.e_offset(block);
    let (fixed, origin, h, n, lo, hi) = if vertical {
        ((x0 - l.x0) / l.hx, l.y0, l.hy, l.ny, y0.min(y1), y0.max(y1))
    } else {
        ((y0 - l.y0) / l.hy, l.x0, l.hx, l.nx, x0.min(x1), x0.max(x1))
    };
    let across = fixed.round();
    let n_across = if vertical { l.nx } else { l.ny };
    if across < 0.0 || across > n_across as f64 {
        return Err(Error::Geometry("line lies outside its block".into()));
    }
    let a = across as usize;
    let snap = (fixed - across).abs() * if vertical { l.hx } else { l.hy };
    let eps = 1e-9 * h;
    let len = hi - lo;
    let mut nodes = Vec::new();
    for k in 0..=n {
        let s = origin + k as f64 * h;
        if s < lo - eps || s > hi + eps {
            continue;
        }
        let (i, j) = if vertical { (a, k) } else { (k, a) };
        if sys.e_active[off + l.ez(i, j)] {
            let frac = if len > 0.0 { ((s - lo) / len).clamp(0.0, 1.0) } else { 0.0 };
            nodes.push((i, j, frac));
        }
    }
    if nodes.is_empty() {
        return Err(Error::Geometry("line covers no active Ez node".into()));
    }
    Ok(LineNodes {
        block,
        nodes,
        vertical,
        snap,
    })
}

pub fn resolve_source(sys: &GlobalSystem, spec: &SourceSpec) -> Result<ResolvedSource> {
    site_count("sources", &spec.at, &spec.line)?;
    if !spec.amplitude.is_finite() {
        return Err(Error::config("amplitude", "must be finite"));
    }
    let waveform = spec.waveform()?;
    if let Some([x, y]) = spec.at {
        let (e, d) = snap_point(sys, x, y)?;
        return Ok(ResolvedSource {
            waveform,
            amplitude: spec.amplitude,
            nodes: vec![(e, 1.0)],
            snap_distance: d,
        });
    }
    let line = spec.line.as_ref().expect("checked above");
    let ln = line_nodes(&sys.layout, sys, line)?;
    let l = sys.layout.block(ln.block);
    let off = sys.layout.e_offset(ln.block);
    let nodes = ln
        .nodes
        .iter()
        .map(|&(i, j, f)| {
            let w = match line.profile {
                Profile::Uniform => 1.0,
                Profile::HalfSine => (std::f64::consts::PI * f).sin(),
            };
            (off + l.ez(i, j), w)
        })
        .collect();
    Ok(ResolvedSource {
        waveform,
        amplitude: spec.amplitude,
        nodes,
        snap_distance: ln.snap,
    })
}

pub fn resolve_probe(sys: &GlobalSystem, spec: &ProbeSpec) -> Result<ResolvedProbe> {
    site_count(&format!("probes.{}", spec.name), &spec.at, &spec.line)?;
    if let Some([x, y]) = spec.at {
        let (e, d) = snap_point(sys, x, y)?;
        return Ok(ResolvedProbe {
            name: spec.name.clone(),
            sites: ProbeSites::Point { e },
            snap_distance: d,
        });
    }
    let line = spec.line.as_ref().expect("checked above");
    let gl = &sys.layout;
    let ln = line_nodes(gl, sys, line)?;
    let l = gl.block(ln.block);
    let e_off = gl.e_offset(ln.block);
    let h_field = if ln.vertical { Field::Hy } else { Field::Hx };
    let h_off = gl.h_offset(ln.block, h_field);
    let mut e = Vec::new();
    let mut h = Vec::new();
    let mut s = Vec::new();
    for &(i, j, _) in &ln.nodes {
        e.push(e_off + l.ez(i, j));
        let neighbours = if ln.vertical {
            [i.checked_sub(1).map(|a| (a, j)), (i < l.nx).then_some((i, j))]
        } else {
            [j.checked_sub(1).map(|b| (i, b)), (j < l.ny).then_some((i, j))]
        };
        let idx: Vec<usize> = neighbours
            .into_iter()
            .flatten()
            .map(|(a, b)| h_off + if ln.vertical { l.hy(a, b) } else { l.hx(a, b) })
            .filter(|g| sys.h_active[*g])
            .collect();
        h.push(idx);
        let (px, py) = node_xy(l, i, j);
        s.push(if ln.vertical { py } else { px });
    }
    Ok(ResolvedProbe {
        name: spec.name.clone(),
        sites: ProbeSites::Line {
            e,
            h,
            s,
            ds: if ln.vertical { l.hy } else { l.hx },
            h_field,
        },
        snap_distance: ln.snap,
    })
}

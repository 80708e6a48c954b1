//! Staggered grids, embedded-region geometry, indicator masks and the
//! index sets of the four coupling interfaces of every embedded block.
//!
//! Node ordering is x-major / y-minor throughout: the flat index of the
//! `Ez` node `(i, j)` is `i * (ny + 1) + j`, so Kronecker factors read
//! `(x-operator) ⊗ (y-operator)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of coarse cells between an embedded region and the outer
/// wall, and between two embedded regions. Every coarse segment cut by a
/// hole must still carry a two-cell one-dimensional operator.
pub const MIN_COARSE_CLEARANCE: usize = 2;

const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub dx: f64,
    pub dy: f64,
}

fn integer_count(len: f64, h: f64, axis: &str) -> Result<usize> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Geometry(format!("{axis}: cell size must be positive, got {h}")));
    }
    if !(len > 0.0) {
        return Err(Error::Geometry(format!("{axis}: max must exceed min")));
    }
    let n = len / h;
    let r = n.round();
    if r < 1.0 || (n - r).abs() > ALIGN_TOL * r.max(1.0) {
        return Err(Error::Geometry(format!(
            "{axis}: extent {len} is not an integer multiple of the cell size {h} ({n} cells)"
        )));
    }
    Ok(r as usize)
}

impl GridSpec {
    pub fn cells(&self) -> Result<(usize, usize)> {
        let nx = integer_count(self.x_max - self.x_min, self.dx, "x")?;
        let ny = integer_count(self.y_max - self.y_min, self.dy, "y")?;
        Ok((nx, ny))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

/// Coarse-to-fine grid ratio `p:q`; the fine cell size is `h·p/q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ratio {
    pub coarse: u32,
    pub fine: u32,
}

impl Ratio {
    pub fn new(coarse: u32, fine: u32) -> Result<Self> {
        if coarse == 0 || fine == 0 {
            return Err(Error::Geometry(format!("ratio {coarse}:{fine} must be positive")));
        }
        Ok(Self { coarse, fine })
    }

    pub fn fine_spacing(&self, coarse_h: f64) -> f64 {
        coarse_h * self.coarse as f64 / self.fine as f64
    }

    /// Fine cells spanning `coarse_cells` coarse cells, if that is an integer.
    pub fn fine_cells(&self, coarse_cells: usize) -> Option<usize> {
        let num = coarse_cells as u64 * self.fine as u64;
        (num % self.coarse as u64 == 0).then(|| (num / self.coarse as u64) as usize)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.coarse, self.fine)
    }
}

impl FromStr for Ratio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("ratio `{s}` must look like `p:q`")))?;
        let p = a
            .trim()
            .parse::<u32>()
            .map_err(|e| Error::Parse(format!("ratio `{s}`: {e}")))?;
        let q = b
            .trim()
            .parse::<u32>()
            .map_err(|e| Error::Parse(format!("ratio `{s}`: {e}")))?;
        Ratio::new(p, q)
    }
}

impl Serialize for Ratio {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddedRegionSpec {
    pub bounds: Rect,
    pub ratio: Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Field {
    Ez,
    Hy,
    Hx,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::Ez => "Ez",
            Field::Hy => "Hy",
            Field::Hx => "Hx",
        })
    }
}

/// Staggered Yee layout of one rectangular block of `nx × ny` cells.
///
/// `Ez` lives on integer nodes `(i, j)`, `Hy` on `(i+½, j)` and `Hx` on
/// `(i, j+½)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaggeredLayout {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub x0: f64,
    pub y0: f64,
}

impl StaggeredLayout {
    pub fn new(nx: usize, ny: usize, hx: f64, hy: f64, x0: f64, y0: f64) -> Self {
        Self { nx, ny, hx, hy, x0, y0 }
    }

    pub fn n_ez(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn n_hy(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn n_hx(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn count(&self, field: Field) -> usize {
        match field {
            Field::Ez => self.n_ez(),
            Field::Hy => self.n_hy(),
            Field::Hx => self.n_hx(),
        }
    }

    #[inline]
    pub fn ez(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.nx && j <= self.ny);
        i * (self.ny + 1) + j
    }

    /// `Hy` at `(i+½, j)`.
    #[inline]
    pub fn hy(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j <= self.ny);
        i * (self.ny + 1) + j
    }

    /// `Hx` at `(i, j+½)`.
    #[inline]
    pub fn hx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.nx && j < self.ny);
        i * self.ny + j
    }

    /// Grid indices `(i, j)` of a flat index; half-integer offsets are implied
    /// by the field.
    pub fn unflatten(&self, field: Field, idx: usize) -> (usize, usize) {
        match field {
            Field::Ez | Field::Hy => (idx / (self.ny + 1), idx % (self.ny + 1)),
            Field::Hx => (idx / self.ny, idx % self.ny),
        }
    }

    pub fn coord(&self, field: Field, idx: usize) -> (f64, f64) {
        let (i, j) = self.unflatten(field, idx);
        let (fi, fj) = match field {
            Field::Ez => (i as f64, j as f64),
            Field::Hy => (i as f64 + 0.5, j as f64),
            Field::Hx => (i as f64, j as f64 + 0.5),
        };
        (self.x0 + fi * self.hx, self.y0 + fj * self.hy)
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.nx as f64 * self.hx
    }

    pub fn y_max(&self) -> f64 {
        self.y0 + self.ny as f64 * self.hy
    }
}

pub fn build_layout(spec: &GridSpec) -> Result<StaggeredLayout> {
    let (nx, ny) = spec.cells()?;
    Ok(StaggeredLayout::new(nx, ny, spec.dx, spec.dy, spec.x_min, spec.y_min))
}

/// An embedded region resolved against the coarse grid: the hole occupies
/// coarse nodes `a..=b` in x and `c..=d` in y, and the fine block has its
/// own layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Hole {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub d: usize,
    pub ratio: Ratio,
    pub fine: StaggeredLayout,
}

impl Hole {
    /// Strictly inside the hole (not on its boundary).
    pub fn contains_strict(&self, i: usize, j: usize) -> bool {
        i > self.a && i < self.b && j > self.c && j < self.d
    }

    pub fn contains_closed(&self, i: usize, j: usize) -> bool {
        i >= self.a && i <= self.b && j >= self.c && j <= self.d
    }
}

fn aligned_index(v: f64, origin: f64, h: f64, what: &str) -> Result<usize> {
    let t = (v - origin) / h;
    let r = t.round();
    if r < 0.0 || (t - r).abs() > ALIGN_TOL * r.max(1.0) {
        return Err(Error::Geometry(format!(
            "{what} = {v} is not aligned to a coarse grid line"
        )));
    }
    Ok(r as usize)
}

/// Validates the embedded regions against the coarse layout and resolves
/// them to hole index ranges and fine layouts.
pub fn resolve_regions(layout: &StaggeredLayout, regions: &[EmbeddedRegionSpec]) -> Result<Vec<Hole>> {
    let mut holes = Vec::with_capacity(regions.len());
    for (k, r) in regions.iter().enumerate() {
        let ctx = |m: String| Error::Geometry(format!("region {k}: {m}"));
        let bx = r.bounds;
        if !(bx.x1 > bx.x0 && bx.y1 > bx.y0) {
            return Err(ctx("bounds must have x1 > x0 and y1 > y0".into()));
        }
        let a = aligned_index(bx.x0, layout.x0, layout.hx, "x0").map_err(|e| ctx(e.to_string()))?;
        let b = aligned_index(bx.x1, layout.x0, layout.hx, "x1").map_err(|e| ctx(e.to_string()))?;
        let c = aligned_index(bx.y0, layout.y0, layout.hy, "y0").map_err(|e| ctx(e.to_string()))?;
        let d = aligned_index(bx.y1, layout.y0, layout.hy, "y1").map_err(|e| ctx(e.to_string()))?;
        let gap = MIN_COARSE_CLEARANCE;
        if a < gap || c < gap || b + gap > layout.nx || d + gap > layout.ny {
            return Err(ctx(format!(
                "must keep at least {gap} coarse cells of clearance from the outer boundary"
            )));
        }
        let fnx = r.ratio.fine_cells(b - a).ok_or_else(|| {
            ctx(format!("ratio {} does not tile {} coarse cells in x", r.ratio, b - a))
        })?;
        let fny = r.ratio.fine_cells(d - c).ok_or_else(|| {
            ctx(format!("ratio {} does not tile {} coarse cells in y", r.ratio, d - c))
        })?;
        if fnx < 2 || fny < 2 {
            return Err(ctx(format!("fine block {fnx}x{fny} is smaller than 2x2 cells")));
        }
        let fine = StaggeredLayout::new(
            fnx,
            fny,
            r.ratio.fine_spacing(layout.hx),
            r.ratio.fine_spacing(layout.hy),
            layout.x0 + a as f64 * layout.hx,
            layout.y0 + c as f64 * layout.hy,
        );
        holes.push(Hole {
            a,
            b,
            c,
            d,
            ratio: r.ratio,
            fine,
        });
    }
    for p in 0..holes.len() {
        for q in p + 1..holes.len() {
            let (h1, h2) = (&holes[p], &holes[q]);
            let gx = (h2.a as isize - h1.b as isize).max(h1.a as isize - h2.b as isize);
            let gy = (h2.c as isize - h1.d as isize).max(h1.c as isize - h2.d as isize);
            if gx.max(gy) < MIN_COARSE_CLEARANCE as isize {
                return Err(Error::Geometry(format!(
                    "regions {p} and {q} overlap or are closer than {MIN_COARSE_CLEARANCE} coarse cells"
                )));
            }
        }
    }
    Ok(holes)
}

/// One-dimensional line classes along one axis for one hole: integer
/// positions are exterior (`omega`), on the hole boundary (`boundary`) or
/// strictly inside the hole span (`hole`); half-integer positions are
/// exterior (`half_omega`) or inside the span (`half_hole`).
#[derive(Debug, Clone, PartialEq)]
pub struct LineClasses {
    pub omega: Vec<f64>,
    pub boundary: Vec<f64>,
    pub hole: Vec<f64>,
    pub half_omega: Vec<f64>,
    pub half_hole: Vec<f64>,
}

impl LineClasses {
    fn new(n: usize, lo: Option<(usize, usize)>) -> Self {
        let mut s = Self {
            omega: vec![1.0; n + 1],
            boundary: vec![0.0; n + 1],
            hole: vec![0.0; n + 1],
            half_omega: vec![1.0; n],
            half_hole: vec![0.0; n],
        };
        if let Some((p, q)) = lo {
            for i in p..=q {
                s.omega[i] = 0.0;
                if i == p || i == q {
                    s.boundary[i] = 1.0;
                } else {
                    s.hole[i] = 1.0;
                }
            }
            for i in p..q {
                s.half_omega[i] = 0.0;
                s.half_hole[i] = 1.0;
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionMasks {
    /// Classes of x positions (selects vertical grid lines).
    pub x: LineClasses,
    /// Classes of y positions (selects horizontal grid lines).
    pub y: LineClasses,
    /// Hole boundary rows `(p, q)` along x and along y.
    pub span_x: (usize, usize),
    pub span_y: (usize, usize),
}

/// Indicator masks of the multi-connected outer region.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyMasks {
    pub per_region: Vec<RegionMasks>,
    /// Node-level `Ez` indicators: exterior, hole boundary, strict hole interior.
    pub ez_exterior: Vec<f64>,
    pub ez_boundary: Vec<f64>,
    pub ez_interior: Vec<f64>,
    /// Half-integer node indicators, 1 outside hole interiors.
    pub hy_active: Vec<f64>,
    pub hx_active: Vec<f64>,
    holes: Vec<Hole>,
    layout: StaggeredLayout,
}

impl TopologyMasks {
    /// `I^A`: 1 everywhere except strictly inside a hole.
    pub fn ez_universal(&self) -> Vec<f64> {
        self.ez_exterior
            .iter()
            .zip(&self.ez_boundary)
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn holes(&self) -> &[Hole] {
        &self.holes
    }

    pub fn layout(&self) -> &StaggeredLayout {
        &self.layout
    }

    /// Hole intervals `(p, q)` crossed by the horizontal line `y = j`,
    /// sorted by `p`.
    pub fn holes_on_y_line(&self, j: usize) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = self
            .holes
            .iter()
            .filter(|h| j >= h.c && j <= h.d)
            .map(|h| (h.a, h.b))
            .collect();
        v.sort_unstable();
        v
    }

    pub fn holes_on_x_line(&self, i: usize) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = self
            .holes
            .iter()
            .filter(|h| i >= h.a && i <= h.b)
            .map(|h| (h.c, h.d))
            .collect();
        v.sort_unstable();
        v
    }

    /// Hole intervals cut by the horizontal strip of cells between lines
    /// `k` and `k+1`.
    pub fn holes_in_x_strip(&self, k: usize) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = self
            .holes
            .iter()
            .filter(|h| k >= h.c && k < h.d)
            .map(|h| (h.a, h.b))
            .collect();
        v.sort_unstable();
        v
    }

    /// Hole intervals cut by the vertical strip of cells between lines
    /// `k` and `k+1`.
    pub fn holes_in_y_strip(&self, k: usize) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = self
            .holes
            .iter()
            .filter(|h| k >= h.a && k < h.b)
            .map(|h| (h.c, h.d))
            .collect();
        v.sort_unstable();
        v
    }
}

pub fn build_indicator_masks(layout: &StaggeredLayout, regions: &[EmbeddedRegionSpec]) -> Result<TopologyMasks> {
    let holes = resolve_regions(layout, regions)?;
    Ok(masks_from_holes(layout, holes))
}

pub fn masks_from_holes(layout: &StaggeredLayout, holes: Vec<Hole>) -> TopologyMasks {
    let per_region = holes
        .iter()
        .map(|h| RegionMasks {
            x: LineClasses::new(layout.nx, Some((h.a, h.b))),
            y: LineClasses::new(layout.ny, Some((h.c, h.d))),
            span_x: (h.a, h.b),
            span_y: (h.c, h.d),
        })
        .collect();
    let mut ez_exterior = vec![1.0; layout.n_ez()];
    let mut ez_boundary = vec![0.0; layout.n_ez()];
    let mut ez_interior = vec![0.0; layout.n_ez()];
    let mut hy_active = vec![1.0; layout.n_hy()];
    let mut hx_active = vec![1.0; layout.n_hx()];
    for h in &holes {
        for i in h.a..=h.b {
            for j in h.c..=h.d {
                let k = layout.ez(i, j);
                ez_exterior[k] = 0.0;
                if h.contains_strict(i, j) {
                    ez_interior[k] = 1.0;
                } else {
                    ez_boundary[k] = 1.0;
                }
            }
        }
        for i in h.a..h.b {
            for j in h.c + 1..h.d {
                hy_active[layout.hy(i, j)] = 0.0;
            }
        }
        for i in h.a + 1..h.b {
            for j in h.c..h.d {
                hx_active[layout.hx(i, j)] = 0.0;
            }
        }
    }
    if holes.is_empty() {
        // keep the vectors as built: everything exterior
    }
    TopologyMasks {
        per_region,
        ez_exterior,
        ez_boundary,
        ez_interior,
        hy_active,
        hx_active,
        holes,
        layout: *layout,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    West,
    East,
    South,
    North,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::West, Side::East, Side::South, Side::North];

    pub fn label(&self) -> &'static str {
        match self {
            Side::West => "W",
            Side::East => "E",
            Side::South => "S",
            Side::North => "N",
        }
    }

    /// Field component normal-paired with `Ez` on this side.
    pub fn h_field(&self) -> Field {
        match self {
            Side::West | Side::East => Field::Hy,
            Side::South | Side::North => Field::Hx,
        }
    }

    /// Orientation of the outer region's boundary flux on this side: the
    /// energy rate of the outer block carries `+orientation · Eᵀ P H` and the
    /// embedded block `−orientation · Êᵀ P̂ Ĥ`.
    pub fn orientation(&self) -> f64 {
        match self {
            Side::West | Side::North => 1.0,
            Side::East | Side::South => -1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Index sets of one interface, ordered by increasing tangential coordinate.
/// `*_near` / `*_far` are the two normal-`H` nodes the boundary projection
/// extrapolates from (nearest to the interface first).
#[derive(Debug, Clone, PartialEq)]
pub struct SideIndices {
    pub side: Side,
    pub h_field: Field,
    pub coarse_ez: Vec<usize>,
    pub coarse_h_near: Vec<usize>,
    pub coarse_h_far: Vec<usize>,
    pub fine_ez: Vec<usize>,
    pub fine_h_near: Vec<usize>,
    pub fine_h_far: Vec<usize>,
    pub coarse_spacing: f64,
    pub fine_spacing: f64,
}

impl SideIndices {
    pub fn n_h(&self) -> usize {
        self.coarse_ez.len()
    }

    pub fn n_hat(&self) -> usize {
        self.fine_ez.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceIndexSets {
    pub region: usize,
    pub sides: Vec<SideIndices>,
}

impl InterfaceIndexSets {
    pub fn side(&self, s: Side) -> &SideIndices {
        self.sides.iter().find(|x| x.side == s).expect("all four sides present")
    }
}

pub fn interface_index_sets(layout: &StaggeredLayout, masks: &TopologyMasks, region: usize) -> Result<InterfaceIndexSets> {
    let h = masks
        .holes()
        .get(region)
        .ok_or_else(|| Error::Geometry(format!("no embedded region {region}")))?;
    let f = &h.fine;
    let mut sides = Vec::with_capacity(4);
    for side in Side::ALL {
        let s = match side {
            Side::West | Side::East => {
                let (i, near, far, fi, fnear, ffar) = if side == Side::West {
                    (h.a, h.a - 1, h.a - 2, 0, 0, 1)
                } else {
                    (h.b, h.b, h.b + 1, f.nx, f.nx - 1, f.nx - 2)
                };
                SideIndices {
                    side,
                    h_field: Field::Hy,
                    coarse_ez: (h.c..=h.d).map(|j| layout.ez(i, j)).collect(),
                    coarse_h_near: (h.c..=h.d).map(|j| layout.hy(near, j)).collect(),
                    coarse_h_far: (h.c..=h.d).map(|j| layout.hy(far, j)).collect(),
                    fine_ez: (0..=f.ny).map(|j| f.ez(fi, j)).collect(),
                    fine_h_near: (0..=f.ny).map(|j| f.hy(fnear, j)).collect(),
                    fine_h_far: (0..=f.ny).map(|j| f.hy(ffar, j)).collect(),
                    coarse_spacing: layout.hy,
                    fine_spacing: f.hy,
                }
            }
            Side::South | Side::North => {
                let (j, near, far, fj, fnear, ffar) = if side == Side::South {
                    (h.c, h.c - 1, h.c - 2, 0, 0, 1)
                } else {
                    (h.d, h.d, h.d + 1, f.ny, f.ny - 1, f.ny - 2)
                };
                SideIndices {
                    side,
                    h_field: Field::Hx,
                    coarse_ez: (h.a..=h.b).map(|i| layout.ez(i, j)).collect(),
                    coarse_h_near: (h.a..=h.b).map(|i| layout.hx(i, near)).collect(),
                    coarse_h_far: (h.a..=h.b).map(|i| layout.hx(i, far)).collect(),
                    fine_ez: (0..=f.nx).map(|i| f.ez(i, fj)).collect(),
                    fine_h_near: (0..=f.nx).map(|i| f.hx(i, fnear)).collect(),
                    fine_h_far: (0..=f.nx).map(|i| f.hx(i, ffar)).collect(),
                    coarse_spacing: layout.hx,
                    fine_spacing: f.hx,
                }
            }
        };
        sides.push(s);
    }
    Ok(InterfaceIndexSets { region, sides })
}

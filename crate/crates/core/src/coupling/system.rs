use std::collections::{hash_map::Entry, HashMap};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::extraction::build_extraction_ops;
use super::penalties::SatConfig;
use super::sat::{assemble_embedded_sats, assemble_outer_sats, SatTarget};
use crate::error::{Error, Result};
use crate::interpolation::{build_interpolation_pair, InterpolationPair};
use crate::operators::{assemble_outer_2d, build_embedded_2d, GlobalOperators2D, MaterialField};
use crate::sparse::{weighted_dot, SparseMatrix, TripletBuilder};
use crate::topology::{interface_index_sets, Field, Hole, Side, StaggeredLayout, TopologyMasks};

/// Placement of every block inside the global `E` and `H` vectors:
/// `E = [outer Ez; Êz of region 0; …]`,
/// `H = [outer Hy; outer Hx; Ĥy, Ĥx of region 0; …]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalLayout {
    pub outer: StaggeredLayout,
    pub regions: Vec<StaggeredLayout>,
    e_offsets: Vec<usize>,
    hy_offsets: Vec<usize>,
    hx_offsets: Vec<usize>,
    pub n_e: usize,
    pub n_h: usize,
}

impl GlobalLayout {
    pub fn new(outer: StaggeredLayout, regions: Vec<StaggeredLayout>) -> Self {
        let mut e_offsets = vec![0];
        let mut hy_offsets = vec![0];
        let mut hx_offsets = vec![outer.n_hy()];
        let mut n_e = outer.n_ez();
        let mut n_h = outer.n_hy() + outer.n_hx();
        for r in &regions {
            e_offsets.push(n_e);
            n_e += r.n_ez();
            hy_offsets.push(n_h);
            hx_offsets.push(n_h + r.n_hy());
            n_h += r.n_hy() + r.n_hx();
        }
        Self {
            outer,
            regions,
            e_offsets,
            hy_offsets,
            hx_offsets,
            n_e,
            n_h,
        }
    }

    fn slot(block: Option<usize>) -> usize {
        block.map_or(0, |r| r + 1)
    }

    /// Offset of a block's `Ez` values; `None` is the outer region.
    pub fn e_offset(&self, block: Option<usize>) -> usize {
        self.e_offsets[Self::slot(block)]
    }

    pub fn h_offset(&self, block: Option<usize>, field: Field) -> usize {
        match field {
            Field::Hy => self.hy_offsets[Self::slot(block)],
            Field::Hx => self.hx_offsets[Self::slot(block)],
            Field::Ez => panic!("Ez is not part of the H vector"),
        }
    }

    pub fn block(&self, block: Option<usize>) -> &StaggeredLayout {
        match block {
            None => &self.outer,
            Some(r) => &self.regions[r],
        }
    }

    /// Global index of a block-local node.
    pub fn global(&self, block: Option<usize>, field: Field, local: usize) -> usize {
        match field {
            Field::Ez => self.e_offset(block) + local,
            f => self.h_offset(block, f) + local,
        }
    }

    /// Block containing a point: the first embedded region whose closed
    /// rectangle holds it, else the outer region.
    pub fn block_at(&self, x: f64, y: f64) -> Option<usize> {
        self.regions.iter().position(|r| {
            let eps = 1e-9 * (r.hx + r.hy);
            x >= r.x0 - eps && x <= r.x_max() + eps && y >= r.y0 - eps && y <= r.y_max() + eps
        })
    }
}

pub struct SystemInputs<'a> {
    pub masks: &'a TopologyMasks,
    pub outer_materials: &'a MaterialField,
    pub region_materials: &'a [MaterialField],
    pub sat: &'a SatConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatBlockInfo {
    pub region: usize,
    pub side: Side,
    pub target: SatTarget,
    pub nnz: usize,
}

/// The coupled semi-discrete system `dE/dt = A_E H − loss∘E`,
/// `dH/dt = A_H E` with its diagonal energy norms.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub layout: GlobalLayout,
    pub a_e: SparseMatrix,
    pub a_h: SparseMatrix,
    /// `σ/ε` per `E` value.
    pub loss: Vec<f64>,
    pub p_e: Vec<f64>,
    pub p_h: Vec<f64>,
    pub e_active: Vec<bool>,
    pub h_active: Vec<bool>,
    pub sat_blocks: Vec<SatBlockInfo>,
    /// Interpolation pairs per region in `Side::ALL` order.
    pub pairs: Vec<Vec<InterpolationPair>>,
    pub holes: Vec<Hole>,
}

impl GlobalSystem {
    pub fn energy(&self, e: &[f64], h: &[f64]) -> f64 {
        0.5 * weighted_dot(e, &self.p_e, e) + 0.5 * weighted_dot(h, &self.p_h, h)
    }

    /// `dℰ/dt` of the semi-discrete system at state `(e, h)`.
    pub fn energy_rate(&self, e: &[f64], h: &[f64]) -> f64 {
        let mut de = self.a_e.mul_vec(h);
        for (k, d) in de.iter_mut().enumerate() {
            *d -= self.loss[k] * e[k];
        }
        let dh = self.a_h.mul_vec(e);
        weighted_dot(e, &self.p_e, &de) + weighted_dot(h, &self.p_h, &dh)
    }

    /// `max|P_E A_E + (P_H A_H)ᵀ| / max(|P_E A_E|, |P_H A_H|)`.
    pub fn skew_residual(&self) -> f64 {
        let m = self.a_e.scale_rows(&self.p_e);
        let n = self.a_h.scale_rows(&self.p_h);
        let scale = m.max_abs().max(n.max_abs()).max(f64::MIN_POSITIVE);
        m.add(&n.transpose()).expect("consistent shapes").max_abs() / scale
    }

    /// Number of electric and magnetic penalty terms on `target`s of one region.
    pub fn sat_count(&self, region: usize, electric: bool, outer: bool) -> usize {
        self.sat_blocks
            .iter()
            .filter(|b| {
                b.region == region
                    && b.target.is_electric() == electric
                    && matches!(b.target, SatTarget::OuterEz | SatTarget::OuterH) == outer
            })
            .count()
    }

    pub fn n_active(&self) -> usize {
        self.e_active.iter().chain(&self.h_active).filter(|a| **a).count()
    }

    /// Writes `A_E.txt`, `A_H.txt` and `P_glob.txt` in triplet text format.
    pub fn dump_triplets(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let write = |name: &str, m: &SparseMatrix| -> Result<()> {
            let f = BufWriter::new(File::create(dir.join(name))?);
            m.write_triplets(f)?;
            Ok(())
        };
        write("A_E.txt", &self.a_e)?;
        write("A_H.txt", &self.a_h)?;
        let p: Vec<f64> = self.p_e.iter().chain(&self.p_h).cloned().collect();
        write("P_glob.txt", &SparseMatrix::from_diagonal(&p))
    }
}

fn push_curl(
    ae: &mut TripletBuilder,
    ah: &mut TripletBuilder,
    ops: &GlobalOperators2D,
    e_off: usize,
    hy_off: usize,
    hx_off: usize,
) {
    for (r, c, v) in ops.dx_minus.iter() {
        ae.push(e_off + r, hy_off + c, v);
    }
    for (r, c, v) in ops.dy_minus.iter() {
        ae.push(e_off + r, hx_off + c, -v);
    }
    for (r, c, v) in ops.dx_plus.iter() {
        ah.push(hy_off + r, e_off + c, v);
    }
    for (r, c, v) in ops.dy_plus.iter() {
        ah.push(hx_off + r, e_off + c, -v);
    }
}

pub fn assemble_global_system(inp: &SystemInputs) -> Result<GlobalSystem> {
    inp.sat.validate()?;
    let holes = inp.masks.holes().to_vec();
    if inp.region_materials.len() != holes.len() {
        return Err(Error::Dimension(format!(
            "{} embedded regions but {} material sets",
            holes.len(),
            inp.region_materials.len()
        )));
    }
    let outer_l = *inp.masks.layout();
    let outer = assemble_outer_2d(inp.masks)?.scale_by_materials(inp.outer_materials)?;
    let fine: Vec<GlobalOperators2D> = holes
        .iter()
        .zip(inp.region_materials)
        .map(|(h, m)| build_embedded_2d(&h.fine)?.scale_by_materials(m))
        .collect::<Result<_>>()?;
    let gl = GlobalLayout::new(outer_l, holes.iter().map(|h| h.fine).collect());

    let mut ae = TripletBuilder::new(gl.n_e, gl.n_h);
    let mut ah = TripletBuilder::new(gl.n_h, gl.n_e);
    let mut p_e = Vec::with_capacity(gl.n_e);
    let mut p_h = vec![0.0; gl.n_h];
    push_curl(&mut ae, &mut ah, &outer, 0, gl.h_offset(None, Field::Hy), gl.h_offset(None, Field::Hx));
    p_e.extend_from_slice(&outer.p_ez);
    let put = |p_h: &mut Vec<f64>, off: usize, v: &[f64]| p_h[off..off + v.len()].copy_from_slice(v);
    put(&mut p_h, gl.h_offset(None, Field::Hy), &outer.p_hy);
    put(&mut p_h, gl.h_offset(None, Field::Hx), &outer.p_hx);
    for (r, ops) in fine.iter().enumerate() {
        let b = Some(r);
        push_curl(&mut ae, &mut ah, ops, gl.e_offset(b), gl.h_offset(b, Field::Hy), gl.h_offset(b, Field::Hx));
        p_e.extend_from_slice(&ops.p_ez);
        put(&mut p_h, gl.h_offset(b, Field::Hy), &ops.p_hy);
        put(&mut p_h, gl.h_offset(b, Field::Hx), &ops.p_hx);
    }

    let mut cache: HashMap<(usize, u32, u32, u64), InterpolationPair> = HashMap::new();
    let mut sat_blocks = Vec::new();
    let mut all_pairs = Vec::with_capacity(holes.len());
    for (r, hole) in holes.iter().enumerate() {
        let sets = interface_index_sets(&outer_l, inp.masks, r)?;
        let ext = build_extraction_ops(&sets, &outer_l, &hole.fine)?;
        let mut pairs = Vec::with_capacity(4);
        for side in Side::ALL {
            let s = sets.side(side);
            let key = (s.n_h(), hole.ratio.coarse, hole.ratio.fine, s.coarse_spacing.to_bits());
            let p = match cache.entry(key) {
                Entry::Occupied(o) => o.into_mut(),
                Entry::Vacant(v) => v.insert(
                    build_interpolation_pair(s.n_h(), hole.ratio, s.coarse_spacing)
                        .map_err(|e| Error::Interpolation(format!("region {r} side {side}: {e}")))?,
                ),
            };
            pairs.push(p.clone());
        }
        let mut blocks = assemble_outer_sats(&gl, &ext, &pairs, inp.sat, &p_e, &p_h)?;
        blocks.extend(assemble_embedded_sats(&gl, &ext, &pairs, inp.sat, &p_e, &p_h)?);
        for b in blocks {
            if b.target.is_electric() {
                ae.push_block(0, 0, &b.matrix);
            } else {
                ah.push_block(0, 0, &b.matrix);
            }
            sat_blocks.push(SatBlockInfo {
                region: r,
                side: b.side,
                target: b.target,
                nnz: b.matrix.nnz(),
            });
        }
        all_pairs.push(pairs);
    }

    // Strong PEC on the outer wall, and nothing lives inside the holes.
    let mut e_active: Vec<bool> = p_e.iter().map(|w| *w > 0.0).collect();
    for k in 0..outer_l.n_ez() {
        let (i, j) = outer_l.unflatten(Field::Ez, k);
        if i == 0 || j == 0 || i == outer_l.nx || j == outer_l.ny {
            e_active[k] = false;
        }
    }
    let h_active: Vec<bool> = p_h.iter().map(|w| *w > 0.0).collect();
    let a_e = ae.build().mask_rows(&e_active).mask_cols(&h_active);
    let a_h = ah.build().mask_rows(&h_active).mask_cols(&e_active);

    let mut loss = Vec::with_capacity(gl.n_e);
    let mats = std::iter::once(inp.outer_materials).chain(inp.region_materials.iter());
    for m in mats {
        loss.extend(m.eps().iter().zip(&m.sigma).map(|(e, s)| s / e));
    }
    for (l, a) in loss.iter_mut().zip(&e_active) {
        if !a {
            *l = 0.0;
        }
    }

    Ok(GlobalSystem {
        layout: gl,
        a_e,
        a_h,
        loss,
        p_e,
        p_h,
        e_active,
        h_active,
        sat_blocks,
        pairs: all_pairs,
        holes,
    })
}

use super::extraction::{ExtractionOps, SideExtraction};
use super::penalties::SatConfig;
use super::system::GlobalLayout;
use crate::error::{Error, Result};
use crate::interpolation::InterpolationPair;
use crate::sparse::{SparseMatrix, TripletBuilder};
use crate::topology::Side;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatTarget {
    OuterEz,
    OuterH,
    EmbeddedEz,
    EmbeddedH,
}

impl SatTarget {
    pub fn is_electric(&self) -> bool {
        matches!(self, SatTarget::OuterEz | SatTarget::EmbeddedEz)
    }
}

/// One penalty term in global indices: `|E|×|H|` for electric targets,
/// `|H|×|E|` for magnetic ones.
#[derive(Debug, Clone, PartialEq)]
pub struct SatBlock {
    pub region: usize,
    pub side: Side,
    pub target: SatTarget,
    pub matrix: SparseMatrix,
}

fn shift_cols(m: &SparseMatrix, offset: usize, ncols: usize) -> SparseMatrix {
    let mut b = TripletBuilder::with_capacity(m.rows(), ncols, m.nnz());
    for (r, c, v) in m.iter() {
        b.push(r, c + offset, v);
    }
    b.build()
}

/// Interface traces of one side as maps from the global E or H vector.
struct Traces {
    e: SparseMatrix,
    h: SparseMatrix,
    e_hat: SparseMatrix,
    h_hat: SparseMatrix,
}

fn traces(gl: &GlobalLayout, region: usize, sx: &SideExtraction) -> Traces {
    let field = sx.h_field;
    Traces {
        e: shift_cols(&sx.l_ez, 0, gl.n_e),
        h: shift_cols(&sx.proj, gl.h_offset(None, field), gl.n_h),
        e_hat: shift_cols(&sx.fine_l_ez, gl.e_offset(Some(region)), gl.n_e),
        h_hat: shift_cols(&sx.fine_proj, gl.h_offset(Some(region), field), gl.n_h),
    }
}

fn check_dims(side: Side, pair: &InterpolationPair, sx: &SideExtraction) -> Result<()> {
    if pair.n_h != sx.n_h() || pair.n_hat != sx.n_hat() {
        return Err(Error::Dimension(format!(
            "side {side}: interpolation is {}x{} but the interface has {} coarse and {} fine nodes",
            pair.n_hat,
            pair.n_h,
            sx.n_h(),
            sx.n_hat()
        )));
    }
    Ok(())
}

fn inverse(p: &[f64]) -> Vec<f64> {
    p.iter().map(|w| if *w > 0.0 { 1.0 / w } else { 0.0 }).collect()
}

/// `P⁻¹ · injᵀ · diag(weights) · bracket`.
fn inject(inj: &SparseMatrix, weights: &[f64], bracket: &SparseMatrix, p_inv: &[f64]) -> Result<SparseMatrix> {
    inj.transpose()
        .matmul(&bracket.scale_rows(weights))
        .map(|m| m.scale_rows(p_inv))
}

fn sides_in_order<'a>(ext: &'a ExtractionOps, pairs: &'a [InterpolationPair]) -> Result<Vec<(Side, &'a SideExtraction, &'a InterpolationPair)>> {
    if pairs.len() != 4 {
        return Err(Error::Dimension(format!("expected 4 interpolation pairs, got {}", pairs.len())));
    }
    Side::ALL
        .iter()
        .zip(pairs)
        .map(|(s, p)| {
            let sx = ext.side(*s);
            check_dims(*s, p, sx)?;
            Ok((*s, sx, p))
        })
        .collect()
}

/// Outer-region penalties: one `Ez` term per side and one term on the
/// normal `H` component per side. `pairs` are in `Side::ALL` order.
pub fn assemble_outer_sats(
    gl: &GlobalLayout,
    ext: &ExtractionOps,
    pairs: &[InterpolationPair],
    cfg: &SatConfig,
    p_e: &[f64],
    p_h: &[f64],
) -> Result<Vec<SatBlock>> {
    let (pe_inv, ph_inv) = (inverse(p_e), inverse(p_h));
    let mut out = Vec::with_capacity(8);
    for (side, sx, pair) in sides_in_order(ext, pairs)? {
        let t = traces(gl, ext.region, sx);
        let k = side.orientation();
        let pen = cfg.side(side);
        let p_bar = &pair.norms.p_bar;
        // P̃·T_W equals P̄·T_f2c; the bracket is P̄⁻¹-normalised by rows.
        let t_w = pair.t_w.scale_rows(&pair.norms.p_tilde).scale_rows(&inverse(p_bar));
        let e_bracket = t.h.add(&t_w.matmul(&t.h_hat)?.scaled(-1.0))?;
        let h_bracket = t.e.add(&t_w.matmul(&t.e_hat)?.scaled(-1.0))?;
        let we: Vec<f64> = p_bar.iter().map(|w| k * pen.outer_e * w).collect();
        let wh: Vec<f64> = p_bar.iter().map(|w| k * pen.outer_h * w).collect();
        out.push(SatBlock {
            region: ext.region,
            side,
            target: SatTarget::OuterEz,
            matrix: inject(&t.e, &we, &e_bracket, &pe_inv)?,
        });
        out.push(SatBlock {
            region: ext.region,
            side,
            target: SatTarget::OuterH,
            matrix: inject(&t.h, &wh, &h_bracket, &ph_inv)?,
        });
    }
    Ok(out)
}

/// Embedded-block penalties, the mirror of [`assemble_outer_sats`].
pub fn assemble_embedded_sats(
    gl: &GlobalLayout,
    ext: &ExtractionOps,
    pairs: &[InterpolationPair],
    cfg: &SatConfig,
    p_e: &[f64],
    p_h: &[f64],
) -> Result<Vec<SatBlock>> {
    let (pe_inv, ph_inv) = (inverse(p_e), inverse(p_h));
    let mut out = Vec::with_capacity(8);
    for (side, sx, pair) in sides_in_order(ext, pairs)? {
        let t = traces(gl, ext.region, sx);
        let k = side.orientation();
        let pen = cfg.side(side);
        let p_hat = &pair.norms.p_hat;
        let e_bracket = pair.t_hat_w.matmul(&t.h)?.add(&t.h_hat.scaled(-1.0))?;
        let h_bracket = pair.t_hat_w.matmul(&t.e)?.add(&t.e_hat.scaled(-1.0))?;
        let we: Vec<f64> = p_hat.iter().map(|w| k * pen.embedded_e * w).collect();
        let wh: Vec<f64> = p_hat.iter().map(|w| k * pen.embedded_h * w).collect();
        out.push(SatBlock {
            region: ext.region,
            side,
            target: SatTarget::EmbeddedEz,
            matrix: inject(&t.e_hat, &we, &e_bracket, &pe_inv)?,
        });
        out.push(SatBlock {
            region: ext.region,
            side,
            target: SatTarget::EmbeddedH,
            matrix: inject(&t.h_hat, &wh, &h_bracket, &ph_inv)?,
        });
    }
    Ok(out)
}

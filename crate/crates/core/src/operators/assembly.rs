use std::collections::{hash_map::Entry, HashMap};

use super::materials::MaterialField;
use super::one_d::{build_reference_ops_1d, segments, OperatorSet1D};
use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, TripletBuilder};
use crate::topology::{StaggeredLayout, TopologyMasks};

/// 2-D difference and diagonal norm operators of one block.
///
/// `dx_minus: Hy → Ez`, `dx_plus: Ez → Hy`, `dy_minus: Hx → Ez`,
/// `dy_plus: Ez → Hx`. Norms are zero exactly on nodes strictly inside a
/// hole, and so are the corresponding rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalOperators2D {
    pub layout: StaggeredLayout,
    pub dx_minus: SparseMatrix,
    pub dx_plus: SparseMatrix,
    pub dy_minus: SparseMatrix,
    pub dy_plus: SparseMatrix,
    pub p_ez: Vec<f64>,
    pub p_hy: Vec<f64>,
    pub p_hx: Vec<f64>,
}

impl GlobalOperators2D {
    /// Divides difference rows by ε or μ and multiplies norms by them.
    pub fn scale_by_materials(&self, m: &MaterialField) -> Result<Self> {
        m.validate(&self.layout)?;
        let eps = m.eps();
        let mu_hy = m.mu_hy();
        let mu_hx = m.mu_hx();
        let inv = |v: &[f64]| v.iter().map(|x| 1.0 / x).collect::<Vec<_>>();
        let mul = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>();
        let inv_eps = inv(&eps);
        Ok(Self {
            layout: self.layout,
            dx_minus: self.dx_minus.scale_rows(&inv_eps),
            dy_minus: self.dy_minus.scale_rows(&inv_eps),
            dx_plus: self.dx_plus.scale_rows(&inv(&mu_hy)),
            dy_plus: self.dy_plus.scale_rows(&inv(&mu_hx)),
            p_ez: mul(&self.p_ez, &eps),
            p_hy: mul(&self.p_hy, &mu_hy),
            p_hx: mul(&self.p_hx, &mu_hx),
        })
    }

    pub fn ez_active(&self) -> Vec<bool> {
        self.p_ez.iter().map(|w| *w > 0.0).collect()
    }

    pub fn hy_active(&self) -> Vec<bool> {
        self.p_hy.iter().map(|w| *w > 0.0).collect()
    }

    pub fn hx_active(&self) -> Vec<bool> {
        self.p_hx.iter().map(|w| *w > 0.0).collect()
    }
}

/// Single-block operators as Kronecker products of reference 1-D operators.
pub fn kron_reference_2d(layout: &StaggeredLayout) -> Result<GlobalOperators2D> {
    let ox = build_reference_ops_1d(layout.nx, layout.hx)?;
    let oy = build_reference_ops_1d(layout.ny, layout.hy)?;
    let ix = SparseMatrix::identity(layout.nx + 1);
    let iy = SparseMatrix::identity(layout.ny + 1);
    let kd = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
    };
    Ok(GlobalOperators2D {
        layout: *layout,
        dx_minus: ox.d_minus.kron(&iy),
        dx_plus: ox.d_plus.kron(&iy),
        dy_minus: ix.kron(&oy.d_minus),
        dy_plus: ix.kron(&oy.d_plus),
        p_ez: kd(&ox.p_minus, &oy.p_minus),
        p_hy: kd(&ox.p_plus, &oy.p_minus),
        p_hx: kd(&ox.p_minus, &oy.p_plus),
    })
}

pub fn build_embedded_2d(layout: &StaggeredLayout) -> Result<GlobalOperators2D> {
    if layout.nx < 2 || layout.ny < 2 {
        return Err(Error::Operator(format!(
            "embedded block {}x{} is smaller than 2x2 cells",
            layout.nx, layout.ny
        )));
    }
    kron_reference_2d(layout)
}

/// One direction of the outer assembly. "Along" is the differentiation
/// direction, "across" indexes the grid lines; strip `k` holds the cells
/// between lines `k` and `k + 1`.
struct Direction<'a> {
    n_along: usize,
    n_across: usize,
    h_along: f64,
    h_across: f64,
    n_ez: usize,
    n_h: usize,
    strip_holes: &'a dyn Fn(usize) -> Vec<(usize, usize)>,
    ez: &'a dyn Fn(usize, usize) -> usize,
    hh: &'a dyn Fn(usize, usize) -> usize,
}

struct DirectionOps {
    d_minus: SparseMatrix,
    d_plus: SparseMatrix,
    p_ez: Vec<f64>,
    p_h: Vec<f64>,
}

fn assemble_direction(d: &Direction) -> Result<DirectionOps> {
    let mut cache: HashMap<usize, OperatorSet1D> = HashMap::new();
    let mut strips = Vec::with_capacity(d.n_across);
    for k in 0..d.n_across {
        let segs = segments(d.n_along, &(d.strip_holes)(k))
            .map_err(|e| Error::Operator(format!("strip {k}: {e}")))?;
        for &(s, e) in &segs {
            if let Entry::Vacant(v) = cache.entry(e - s) {
                v.insert(build_reference_ops_1d(e - s, d.h_along)?);
            }
        }
        strips.push(segs);
    }

    // Each line blends the segment operators of its (up to two) strips.
    let mut wsum = vec![0.0; d.n_ez];
    let mut p_h = vec![0.0; d.n_h];
    let half_cell = 0.5 * d.h_along * d.h_across;
    for (k, segs) in strips.iter().enumerate() {
        for line in [k, k + 1] {
            for &(s, e) in segs {
                let ops = &cache[&(e - s)];
                for i in s..=e {
                    wsum[(d.ez)(i, line)] += ops.p_minus[i - s];
                }
                for i in s..e {
                    p_h[(d.hh)(i, line)] += half_cell;
                }
            }
        }
    }

    let mut dm = TripletBuilder::new(d.n_ez, d.n_h);
    for (k, segs) in strips.iter().enumerate() {
        for line in [k, k + 1] {
            for &(s, e) in segs {
                let ops = &cache[&(e - s)];
                for i in s..=e {
                    let row = (d.ez)(i, line);
                    let f = ops.p_minus[i - s] / wsum[row];
                    for (c, v) in ops.d_minus.row(i - s) {
                        dm.push(row, (d.hh)(s + c, line), f * v);
                    }
                }
            }
        }
    }

    let inv = 1.0 / d.h_along;
    let mut dp = TripletBuilder::new(d.n_h, d.n_ez);
    for line in 0..=d.n_across {
        for i in 0..d.n_along {
            let row = (d.hh)(i, line);
            if p_h[row] > 0.0 {
                dp.push(row, (d.ez)(i, line), -inv);
                dp.push(row, (d.ez)(i + 1, line), inv);
            }
        }
    }

    let p_ez = wsum.iter().map(|w| 0.5 * d.h_across * w).collect();
    Ok(DirectionOps {
        d_minus: dm.build(),
        d_plus: dp.build(),
        p_ez,
        p_h,
    })
}

/// Operators of the perforated outer region.
///
/// Every grid line is split into segments by the holes of each adjacent
/// strip of cells; the line operator is the norm-weighted blend of the
/// segment operators of its two strips. Lines away from holes get the
/// full-line operator, lines through a hole the blocked one, and lines on a
/// hole boundary the modified blend.
pub fn assemble_outer_2d(masks: &TopologyMasks) -> Result<GlobalOperators2D> {
    let l = *masks.layout();
    if l.nx < 2 || l.ny < 2 {
        return Err(Error::Operator(format!("outer grid {}x{} is smaller than 2x2 cells", l.nx, l.ny)));
    }
    let x_holes = |k: usize| masks.holes_in_x_strip(k);
    let y_holes = |k: usize| masks.holes_in_y_strip(k);
    let ez_x = |i: usize, j: usize| l.ez(i, j);
    let hy_x = |i: usize, j: usize| l.hy(i, j);
    let ez_y = |j: usize, i: usize| l.ez(i, j);
    let hx_y = |j: usize, i: usize| l.hx(i, j);
    let x = assemble_direction(&Direction {
        n_along: l.nx,
        n_across: l.ny,
        h_along: l.hx,
        h_across: l.hy,
        n_ez: l.n_ez(),
        n_h: l.n_hy(),
        strip_holes: &x_holes,
        ez: &ez_x,
        hh: &hy_x,
    })?;
    let y = assemble_direction(&Direction {
        n_along: l.ny,
        n_across: l.nx,
        h_along: l.hy,
        h_across: l.hx,
        n_ez: l.n_ez(),
        n_h: l.n_hx(),
        strip_holes: &y_holes,
        ez: &ez_y,
        hh: &hx_y,
    })?;
    for (k, (a, b)) in x.p_ez.iter().zip(&y.p_ez).enumerate() {
        if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
            let (i, j) = (k / (l.ny + 1), k % (l.ny + 1));
            return Err(Error::Operator(format!(
                "Ez norm at node ({i}, {j}) differs between directions: {a} vs {b}"
            )));
        }
    }
    Ok(GlobalOperators2D {
        layout: l,
        dx_minus: x.d_minus,
        dx_plus: x.d_plus,
        dy_minus: y.d_minus,
        dy_plus: y.d_plus,
        p_ez: x.p_ez,
        p_hy: x.p_h,
        p_hx: y.p_h,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sbp2dReport {
    /// Max entry of `P_Ez·Dx₋ + Dx₊ᵀ·P_Hy` on rows off every boundary.
    pub x_residual: f64,
    pub y_residual: f64,
}

impl Sbp2dReport {
    pub fn max(&self) -> f64 {
        self.x_residual.max(self.y_residual)
    }
}

/// Checks the 2-D summation-by-parts structure: boundary terms may only
/// appear on rows of nodes on the outer box or on a hole boundary.
pub fn verify_sbp_2d(ops: &GlobalOperators2D, masks: Option<&TopologyMasks>) -> Sbp2dReport {
    let l = ops.layout;
    let on_boundary = |row: usize| {
        let (i, j) = (row / (l.ny + 1), row % (l.ny + 1));
        i == 0 || j == 0 || i == l.nx || j == l.ny || masks.is_some_and(|m| m.ez_boundary[row] != 0.0)
    };
    let residual = |dm: &SparseMatrix, dp: &SparseMatrix, ph: &[f64]| {
        let m = dm
            .scale_rows(&ops.p_ez)
            .add(&dp.scale_rows(ph).transpose())
            .expect("consistent shapes");
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        m.iter()
            .filter(|&(r, _, _)| !on_boundary(r))
            .fold(0.0f64, |acc, (_, _, v)| acc.max(v.abs()))
            / scale
    };
    Sbp2dReport {
        x_residual: residual(&ops.dx_minus, &ops.dx_plus, &ops.p_hy),
        y_residual: residual(&ops.dy_minus, &ops.dy_plus, &ops.p_hx),
    }
}

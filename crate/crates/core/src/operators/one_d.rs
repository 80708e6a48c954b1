use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, TripletBuilder};

/// Weight of the half-node next to a boundary in the second-order
/// boundary projection of a staggered field.
pub const PROJ_NEAR: f64 = 1.5;
/// Weight of the second half-node from a boundary.
pub const PROJ_FAR: f64 = -0.5;

/// Second-order staggered SBP pair on `n_cells` cells: `d_minus` maps the
/// `n_cells` half-integer values to the `n_cells + 1` integer nodes,
/// `d_plus` the other way.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSet1D {
    pub n_cells: usize,
    pub h: f64,
    pub d_minus: SparseMatrix,
    pub d_plus: SparseMatrix,
    pub p_minus: Vec<f64>,
    pub p_plus: Vec<f64>,
}

impl OperatorSet1D {
    pub fn n_int(&self) -> usize {
        self.n_cells + 1
    }

    pub fn n_half(&self) -> usize {
        self.n_cells
    }

    /// `P₋D₋ + D₊ᵀP₊`, evaluated from the stored matrices.
    pub fn sbp_matrix(&self) -> SparseMatrix {
        let left = self.d_minus.scale_rows(&self.p_minus);
        let right = self.d_plus.scale_rows(&self.p_plus).transpose();
        left.add(&right).expect("consistent shapes")
    }
}

pub fn build_reference_ops_1d(n_cells: usize, h: f64) -> Result<OperatorSet1D> {
    if n_cells < 2 {
        return Err(Error::Operator(format!("need at least 2 cells, got {n_cells}")));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Operator(format!("spacing must be positive, got {h}")));
    }
    let n = n_cells;
    let inv = 1.0 / h;
    let mut dm = TripletBuilder::with_capacity(n + 1, n, 2 * (n + 1));
    for i in 0..=n {
        let c = i.clamp(1, n - 1);
        dm.push(i, c - 1, -inv);
        dm.push(i, c, inv);
    }
    let mut dp = TripletBuilder::with_capacity(n, n + 1, 2 * n);
    for j in 0..n {
        dp.push(j, j, -inv);
        dp.push(j, j + 1, inv);
    }
    let mut p_minus = vec![h; n + 1];
    p_minus[0] = 0.5 * h;
    p_minus[n] = 0.5 * h;
    Ok(OperatorSet1D {
        n_cells: n,
        h,
        d_minus: dm.build(),
        d_plus: dp.build(),
        p_minus,
        p_plus: vec![h; n],
    })
}

/// Node ranges `[s, e]` of the pieces of `0..=n` left after removing the
/// open hole intervals `(p, q)`.
pub fn segments(n: usize, holes: &[(usize, usize)]) -> Result<Vec<(usize, usize)>> {
    let mut hs = holes.to_vec();
    hs.sort_unstable();
    let mut out = Vec::with_capacity(hs.len() + 1);
    let mut start = 0;
    for &(p, q) in &hs {
        if p >= q || p == 0 || q >= n {
            return Err(Error::Operator(format!(
                "hole ({p}, {q}) must satisfy 0 < p < q < {n}"
            )));
        }
        if p < start {
            return Err(Error::Operator(format!("hole ({p}, {q}) overlaps a previous hole")));
        }
        out.push((start, p));
        start = q;
    }
    out.push((start, n));
    if let Some(&(s, e)) = out.iter().find(|(s, e)| e - s < 2) {
        return Err(Error::Operator(format!(
            "segment [{s}, {e}] has fewer than 2 cells"
        )));
    }
    Ok(out)
}

/// Block-diagonal concatenation of reference operators over the segments
/// separated by the holes, with zero rows and columns across hole interiors.
pub fn blocked_omega_ops(n: usize, h: f64, holes: &[(usize, usize)]) -> Result<OperatorSet1D> {
    let segs = segments(n, holes)?;
    let mut dm = TripletBuilder::new(n + 1, n);
    let mut dp = TripletBuilder::new(n, n + 1);
    let mut p_minus = vec![0.0; n + 1];
    let mut p_plus = vec![0.0; n];
    for (s, e) in segs {
        let r = build_reference_ops_1d(e - s, h)?;
        for (i, j, v) in r.d_minus.iter() {
            dm.push(s + i, s + j, v);
        }
        for (i, j, v) in r.d_plus.iter() {
            dp.push(s + i, s + j, v);
        }
        for (k, w) in r.p_minus.iter().enumerate() {
            p_minus[s + k] += w;
        }
        p_plus[s..e].copy_from_slice(&r.p_plus);
    }
    Ok(OperatorSet1D {
        n_cells: n,
        h,
        d_minus: dm.build(),
        d_plus: dp.build(),
        p_minus,
        p_plus,
    })
}

/// Operators for a grid line lying on a hole boundary.
///
/// The `*_prime` fields are the displayed matrices: the standard stencil
/// with the special rows `p` and `q`, the amplified half-node norm and the
/// sparse boundary matrix. The `blend_*` fields are the self-consistent
/// set the 2-D assembly uses: the sum of the full-line and the blocked
/// operators, which satisfies
/// `blend_p_minus · blend_d_minus + D₊ᵀ · blend_p_plus = blend_b` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedOperators1D {
    pub n_cells: usize,
    pub h: f64,
    pub holes: Vec<(usize, usize)>,
    pub d_minus_prime: SparseMatrix,
    pub d_plus_prime: SparseMatrix,
    pub p_minus_prime: Vec<f64>,
    pub p_plus_prime: Vec<f64>,
    pub b_prime: SparseMatrix,
    pub blend_d_minus: SparseMatrix,
    pub blend_p_minus: Vec<f64>,
    pub blend_p_plus: Vec<f64>,
    pub blend_b: SparseMatrix,
}

impl ModifiedOperators1D {
    /// Max entry of `blend_p_minus·blend_d_minus + D₊ᵀ·blend_p_plus − blend_b`.
    pub fn blend_identity_residual(&self) -> f64 {
        let lhs = self
            .blend_d_minus
            .scale_rows(&self.blend_p_minus)
            .add(&self.d_plus_prime.scale_rows(&self.blend_p_plus).transpose())
            .expect("consistent shapes");
        lhs.max_abs_diff(&self.blend_b)
    }
}

fn boundary_rows(b: &mut TripletBuilder, row: usize, near: usize, far: usize, sign: f64) {
    b.push(row, near, sign * PROJ_NEAR);
    b.push(row, far, sign * PROJ_FAR);
}

pub fn build_modified_ops_1d(n: usize, h: f64, holes: &[(usize, usize)]) -> Result<ModifiedOperators1D> {
    let full = build_reference_ops_1d(n, h)?;
    let omega = blocked_omega_ops(n, h, holes)?;
    let segs = segments(n, holes)?;
    let inv = 1.0 / h;

    let in_hole_row = |i: usize| holes.iter().any(|&(p, q)| i > p && i < q);
    let mut dm = TripletBuilder::new(n + 1, n);
    for i in 0..=n {
        if let Some(&(p, _)) = holes.iter().find(|(p, _)| *p == i) {
            dm.push(i, p - 2, -0.5 * inv);
            dm.push(i, p - 1, -0.5 * inv);
            dm.push(i, p, inv);
        } else if let Some(&(_, q)) = holes.iter().find(|(_, q)| *q == i) {
            dm.push(i, q - 1, -inv);
            dm.push(i, q, 0.5 * inv);
            dm.push(i, q + 1, 0.5 * inv);
        } else if !in_hole_row(i) {
            for (c, v) in full.d_minus.row(i) {
                dm.push(i, c, v);
            }
        }
    }

    let mut p_plus_prime = vec![h; n];
    let mut bp = TripletBuilder::new(n + 1, n);
    boundary_rows(&mut bp, 0, 0, 1, -1.0);
    boundary_rows(&mut bp, n, n - 1, n - 2, 1.0);
    for &(p, q) in holes {
        p_plus_prime[p - 1] = 2.0 * h;
        p_plus_prime[q] = 2.0 * h;
        boundary_rows(&mut bp, p, p - 1, p - 2, 1.0);
        boundary_rows(&mut bp, q, q, q + 1, -1.0);
    }

    // Blend of the full-line and blocked operators, normalised row-wise.
    let blend_p_minus: Vec<f64> = full.p_minus.iter().zip(&omega.p_minus).map(|(a, b)| a + b).collect();
    let blend_p_plus: Vec<f64> = full.p_plus.iter().zip(&omega.p_plus).map(|(a, b)| a + b).collect();
    let mut bd = TripletBuilder::new(n + 1, n);
    for i in 0..=n {
        let w = blend_p_minus[i];
        for (c, v) in full.d_minus.row(i) {
            bd.push(i, c, full.p_minus[i] / w * v);
        }
        for (c, v) in omega.d_minus.row(i) {
            bd.push(i, c, omega.p_minus[i] / w * v);
        }
    }
    let mut bb = TripletBuilder::new(n + 1, n);
    boundary_rows(&mut bb, 0, 0, 1, -1.0);
    boundary_rows(&mut bb, n, n - 1, n - 2, 1.0);
    for (s, e) in segs {
        boundary_rows(&mut bb, s, s, s + 1, -1.0);
        boundary_rows(&mut bb, e, e - 1, e - 2, 1.0);
    }

    Ok(ModifiedOperators1D {
        n_cells: n,
        h,
        holes: holes.to_vec(),
        d_minus_prime: dm.build(),
        d_plus_prime: full.d_plus.clone(),
        p_minus_prime: full.p_minus.clone(),
        p_plus_prime,
        b_prime: bp.build(),
        blend_d_minus: bd.build(),
        blend_p_minus,
        blend_p_plus,
        blend_b: bb.build(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbpReport {
    /// Largest entry of `P₋D₋ + D₊ᵀP₊` away from boundary rows and columns.
    pub interior_residual: f64,
    /// Largest deviation of the same matrix from `−e_L𝒫_Lᵀ + e_R𝒫_Rᵀ`.
    pub boundary_residual: f64,
}

impl SbpReport {
    pub fn max(&self) -> f64 {
        self.interior_residual.max(self.boundary_residual)
    }
}

pub fn verify_sbp_identity(ops: &OperatorSet1D) -> SbpReport {
    let n = ops.n_cells;
    let m = ops.sbp_matrix();
    let mut b = TripletBuilder::new(n + 1, n);
    boundary_rows(&mut b, 0, 0, 1, -1.0);
    boundary_rows(&mut b, n, n - 1, n - 2, 1.0);
    let b = b.build();
    let interior = m
        .iter()
        .filter(|&(r, _, _)| r > 0 && r < n)
        .fold(0.0f64, |acc, (_, _, v)| acc.max(v.abs()));
    SbpReport {
        interior_residual: interior,
        boundary_residual: m.max_abs_diff(&b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_norms_and_stencils() {
        let r = build_reference_ops_1d(4, 1.0).unwrap();
        assert_eq!(r.p_minus, vec![0.5, 1.0, 1.0, 1.0, 0.5]);
        let r = build_reference_ops_1d(3, 0.5).unwrap();
        assert_eq!(r.d_plus.get(0, 0), -2.0);
        assert_eq!(r.d_plus.get(0, 1), 2.0);
        assert_eq!(r.d_plus.row(0).count(), 2);
        assert!(build_reference_ops_1d(1, 1.0).is_err());
    }

    #[test]
    fn constant_annihilation() {
        for n in 2..30 {
            let r = build_reference_ops_1d(n, 0.37).unwrap();
            for i in 0..=n {
                assert_eq!(r.d_minus.row_sum(i), 0.0);
            }
            for j in 0..n {
                assert_eq!(r.d_plus.row_sum(j), 0.0);
            }
        }
    }

    #[test]
    fn reference_sbp_identity_n10() {
        let r = build_reference_ops_1d(10, 1.0).unwrap();
        let rep = verify_sbp_identity(&r);
        assert!(rep.interior_residual <= 1e-13);
        assert!(rep.boundary_residual <= 1e-13);
    }

    #[test]
    fn blocked_ops_split_into_segments() {
        let b = blocked_omega_ops(9, 1.0, &[(3, 6)]).unwrap();
        let r3 = build_reference_ops_1d(3, 1.0).unwrap();
        for i in 0..=3 {
            for j in 0..3 {
                assert_eq!(b.d_minus.get(i, j), r3.d_minus.get(i, j));
                assert_eq!(b.d_minus.get(6 + i, 6 + j), r3.d_minus.get(i, j));
            }
        }
        for i in 4..6 {
            assert!(b.d_minus.row_is_empty(i));
        }
        for j in 3..6 {
            assert!(b.d_plus.row_is_empty(j));
            assert_eq!(b.p_plus[j], 0.0);
        }
        let none = blocked_omega_ops(9, 1.0, &[]).unwrap();
        assert_eq!(none, build_reference_ops_1d(9, 1.0).unwrap());
        assert_eq!(segments(20, &[(3, 6), (10, 14)]).unwrap().len(), 3);
        assert!(segments(9, &[(1, 4)]).is_err());
        assert!(segments(9, &[(2, 5), (4, 7)]).is_err());
    }

    #[test]
    fn modified_rows_match_displayed_form() {
        let m = build_modified_ops_1d(12, 1.0, &[(4, 8)]).unwrap();
        let p = 4;
        assert_eq!(m.d_minus_prime.get(p, p - 2), -0.5);
        assert_eq!(m.d_minus_prime.get(p, p - 1), -0.5);
        assert_eq!(m.d_minus_prime.get(p, p), 1.0);
        assert_eq!(m.d_minus_prime.get(8, 7), -1.0);
        assert_eq!(m.d_minus_prime.get(8, 8), 0.5);
        assert_eq!(m.d_minus_prime.get(8, 9), 0.5);
        assert_eq!(m.b_prime.get(0, 0), -1.5);
        assert_eq!(m.b_prime.get(0, 1), 0.5);
        assert_eq!(m.b_prime.get(p, p - 2), -0.5);
        assert_eq!(m.b_prime.get(p, p - 1), 1.5);
        assert_eq!(m.b_prime.nnz(), 8);
        assert_eq!(m.p_plus_prime[3], 2.0);
        assert_eq!(m.p_plus_prime[8], 2.0);
        assert_eq!(m.p_plus_prime.iter().filter(|v| **v == 2.0).count(), 2);
    }

    #[test]
    fn blend_reproduces_displayed_stencil_and_boundary_rows() {
        let m = build_modified_ops_1d(12, 1.0, &[(4, 8)]).unwrap();
        for (row, cols) in [(4usize, [2usize, 3, 4]), (8, [7, 8, 9])] {
            for c in cols {
                let weighted = m.blend_p_minus[row] * m.blend_d_minus.get(row, c);
                assert!((weighted - m.d_minus_prime.get(row, c)).abs() < 1e-15);
            }
            for c in 0..12 {
                assert_eq!(m.blend_b.get(row, c), m.b_prime.get(row, c));
            }
        }
        assert!(m.blend_identity_residual() < 1e-14);
    }

    #[test]
    fn modified_without_holes_is_reference() {
        let m = build_modified_ops_1d(7, 0.3, &[]).unwrap();
        let r = build_reference_ops_1d(7, 0.3).unwrap();
        assert_eq!(m.d_minus_prime, r.d_minus);
    }
}

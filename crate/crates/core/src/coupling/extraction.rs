use crate::error::{Error, Result};
use crate::operators::{PROJ_FAR, PROJ_NEAR};
use crate::sparse::{SparseMatrix, TripletBuilder};
use crate::topology::{Field, InterfaceIndexSets, Side, StaggeredLayout};

/// One unit entry per row, selecting `idx[r]` out of `n` values.
pub fn selection_matrix(idx: &[usize], n: usize) -> Result<SparseMatrix> {
    let mut b = TripletBuilder::with_capacity(idx.len(), n, idx.len());
    for (r, &c) in idx.iter().enumerate() {
        if c >= n {
            return Err(Error::Dimension(format!("interface index {c} out of range for {n} nodes")));
        }
        b.push(r, c, 1.0);
    }
    Ok(b.build())
}

fn projection(near: &[usize], far: &[usize], n: usize) -> Result<SparseMatrix> {
    let mut b = TripletBuilder::with_capacity(near.len(), n, 2 * near.len());
    for (r, (&a, &f)) in near.iter().zip(far).enumerate() {
        if a >= n || f >= n {
            return Err(Error::Dimension(format!("projection index out of range for {n} nodes")));
        }
        b.push(r, a, PROJ_NEAR);
        b.push(r, f, PROJ_FAR);
    }
    Ok(b.build())
}

/// Block-local extraction operators of one side. `l_*` select values,
/// `proj*` extrapolate the normal `H` component onto the interface line.
#[derive(Debug, Clone, PartialEq)]
pub struct SideExtraction {
    pub side: Side,
    pub h_field: Field,
    pub l_ez: SparseMatrix,
    pub l_h_near: SparseMatrix,
    pub proj: SparseMatrix,
    pub fine_l_ez: SparseMatrix,
    pub fine_proj: SparseMatrix,
}

impl SideExtraction {
    pub fn n_h(&self) -> usize {
        self.l_ez.rows()
    }

    pub fn n_hat(&self) -> usize {
        self.fine_l_ez.rows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionOps {
    pub region: usize,
    pub sides: Vec<SideExtraction>,
}

impl ExtractionOps {
    pub fn side(&self, s: Side) -> &SideExtraction {
        self.sides.iter().find(|x| x.side == s).expect("all four sides present")
    }
}

pub fn build_extraction_ops(sets: &InterfaceIndexSets, outer: &StaggeredLayout, fine: &StaggeredLayout) -> Result<ExtractionOps> {
    let sides = sets
        .sides
        .iter()
        .map(|s| {
            let (n_h, n_fh) = (outer.count(s.h_field), fine.count(s.h_field));
            Ok(SideExtraction {
                side: s.side,
                h_field: s.h_field,
                l_ez: selection_matrix(&s.coarse_ez, outer.n_ez())?,
                l_h_near: selection_matrix(&s.coarse_h_near, n_h)?,
                proj: projection(&s.coarse_h_near, &s.coarse_h_far, n_h)?,
                fine_l_ez: selection_matrix(&s.fine_ez, fine.n_ez())?,
                fine_proj: projection(&s.fine_h_near, &s.fine_h_far, n_fh)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExtractionOps {
        region: sets.region,
        sides,
    })
}

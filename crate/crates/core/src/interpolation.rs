//! Coarse/fine transfer operators for one interface line.
//!
//! The prolongation `T_c2f` is linear interpolation plus a correction that
//! keeps every row exact on linear functions and makes the derived
//! restriction `T_f2c = P̄⁻¹ T_c2fᵀ P̂` exact on constants. The correction is
//! the minimum-norm solution of the column constraints.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, TripletBuilder};
use crate::topology::Ratio;

const CONSTRAINT_TOL: f64 = 1e-12;
const SUPPORTS: [usize; 3] = [4, 6, 8];

/// Interface norms: `p_tilde` is the uniform outer interface norm, `p_bar`
/// the trapezoidal coarse norm and `p_hat` the trapezoidal fine norm.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceNorms {
    pub p_tilde: Vec<f64>,
    pub p_bar: Vec<f64>,
    pub p_hat: Vec<f64>,
}

fn trapezoid(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

/// `diag[½, 1, …, 1, ½]`.
pub fn boundary_transform(n_h: usize) -> Vec<f64> {
    trapezoid(n_h, 1.0)
}

pub fn interface_norms(n_h: usize, n_hat: usize, coarse_h: f64, fine_h: f64) -> InterfaceNorms {
    InterfaceNorms {
        p_tilde: vec![coarse_h; n_h],
        p_bar: trapezoid(n_h, coarse_h),
        p_hat: trapezoid(n_hat, fine_h),
    }
}

/// Fine node count of an interface of `n_h` coarse nodes.
pub fn fine_count(n_h: usize, ratio: Ratio) -> Result<usize> {
    if n_h < 2 {
        return Err(Error::Interpolation(format!("interface needs at least 2 coarse nodes, got {n_h}")));
    }
    ratio
        .fine_cells(n_h - 1)
        .map(|c| c + 1)
        .ok_or_else(|| {
            Error::Interpolation(format!(
                "ratio {ratio} does not tile an interface of {} coarse cells",
                n_h - 1
            ))
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationPair {
    pub ratio: Ratio,
    pub n_h: usize,
    pub n_hat: usize,
    pub coarse_h: f64,
    pub fine_h: f64,
    /// Coarse-node support width used per fine row.
    pub support: usize,
    pub t_c2f: SparseMatrix,
    pub t_f2c: SparseMatrix,
    pub b_c: Vec<f64>,
    pub t_w: SparseMatrix,
    pub t_hat_w: SparseMatrix,
    pub norms: InterfaceNorms,
}

impl InterpolationPair {
    /// `max |T_f2cᵀ P̄ − P̂ T_c2f| / h_c`.
    pub fn aligned_residual(&self) -> f64 {
        let lhs = self.t_f2c.transpose().scale_cols(&self.norms.p_bar);
        let rhs = self.t_c2f.scale_rows(&self.norms.p_hat);
        lhs.max_abs_diff(&rhs) / self.coarse_h
    }

    /// `max |T_Wᵀ P̃ − P̂ T̂_W| / h_c`.
    pub fn compatibility_residual(&self) -> f64 {
        let lhs = self.t_w.transpose().scale_cols(&self.norms.p_tilde);
        let rhs = self.t_hat_w.scale_rows(&self.norms.p_hat);
        lhs.max_abs_diff(&rhs) / self.coarse_h
    }
}

/// Fine position in coarse-cell units, as integer part and exact fraction.
fn fine_position(i: usize, ratio: Ratio) -> (usize, f64) {
    let num = i as u64 * ratio.coarse as u64;
    let q = ratio.fine as u64;
    ((num / q) as usize, (num % q) as f64 / q as f64)
}

fn linear_rows(n_h: usize, n_hat: usize, ratio: Ratio) -> Vec<Vec<(usize, f64)>> {
    (0..n_hat)
        .map(|i| {
            let (k, t) = fine_position(i, ratio);
            if t == 0.0 {
                vec![(k.min(n_h - 1), 1.0)]
            } else {
                vec![(k, 1.0 - t), (k + 1, t)]
            }
        })
        .collect()
}

fn window(i: usize, ratio: Ratio, n_h: usize, width: usize) -> (usize, usize) {
    let w = width.min(n_h);
    let (k, _) = fine_position(i, ratio);
    let start = (k + 1).saturating_sub(w / 2).min(n_h - w);
    (start, w)
}

/// Orthonormal basis of vectors on the window annihilating constants and
/// linears, as columns.
fn null_basis(xs: &[f64]) -> DMatrix<f64> {
    let s = xs.len();
    let mean = xs.iter().sum::<f64>() / s as f64;
    let mut cands: Vec<DVector<f64>> = vec![
        DVector::from_element(s, 1.0),
        DVector::from_iterator(s, xs.iter().map(|x| x - mean)),
    ];
    cands.extend((0..s).map(|k| {
        let mut e = DVector::zeros(s);
        e[k] = 1.0;
        e
    }));
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(s);
    for mut v in cands {
        for b in &basis {
            let d = b.dot(&v);
            v -= b * d;
        }
        for b in &basis {
            let d = b.dot(&v);
            v -= b * d;
        }
        let n = v.norm();
        if n > 1e-8 && basis.len() < s {
            basis.push(v / n);
        }
    }
    let null: Vec<_> = basis.into_iter().skip(2).collect();
    if null.is_empty() {
        DMatrix::zeros(s, 0)
    } else {
        DMatrix::from_columns(&null)
    }
}

struct Attempt {
    rows: Vec<Vec<(usize, f64)>>,
    residual: f64,
}

fn attempt(n_h: usize, n_hat: usize, ratio: Ratio, width: usize) -> Attempt {
    let hf = ratio.coarse as f64 / ratio.fine as f64;
    let p_bar = trapezoid(n_h, 1.0);
    let p_hat = trapezoid(n_hat, hf);
    let lin = linear_rows(n_h, n_hat, ratio);

    let mut r = DVector::from_column_slice(&p_bar);
    for (i, row) in lin.iter().enumerate() {
        for &(k, v) in row {
            r[k] -= p_hat[i] * v;
        }
    }

    let mut blocks = Vec::with_capacity(n_hat);
    let mut ncols = 0;
    for i in 0..n_hat {
        let (start, w) = window(i, ratio, n_h, width);
        let xs: Vec<f64> = (start..start + w).map(|k| k as f64).collect();
        let nb = null_basis(&xs);
        blocks.push((start, ncols, nb.clone()));
        ncols += nb.ncols();
    }
    let mut c = DMatrix::<f64>::zeros(n_h, ncols);
    for (i, (start, off, nb)) in blocks.iter().enumerate() {
        for kl in 0..nb.nrows() {
            for m in 0..nb.ncols() {
                c[(start + kl, off + m)] = p_hat[i] * nb[(kl, m)];
            }
        }
    }

    let z = if r.amax() == 0.0 || ncols == 0 {
        DVector::zeros(ncols)
    } else {
        let svd = c.clone().svd(true, true);
        let tol = CONSTRAINT_TOL * svd.singular_values.max();
        let mut z = svd.solve(&r, tol).expect("u and v were computed");
        // one refinement sweep recovers the digits lost in the factorisation
        let res = &r - &c * &z;
        z += svd.solve(&res, tol).expect("u and v were computed");
        z
    };
    let residual = if ncols == 0 { r.amax() } else { (&c * &z - &r).amax() };

    let mut rows = Vec::with_capacity(n_hat);
    for (i, (start, off, nb)) in blocks.iter().enumerate() {
        let w = nb.nrows();
        let mut dense = vec![0.0; w];
        for &(k, v) in &lin[i] {
            dense[k - start] += v;
        }
        if nb.ncols() > 0 {
            let zi = z.rows(*off, nb.ncols());
            let delta = nb * zi;
            for kl in 0..w {
                dense[kl] += delta[kl];
            }
        }
        rows.push(dense.into_iter().enumerate().map(|(kl, v)| (start + kl, v)).collect());
    }
    Attempt { rows, residual }
}

/// Builds `(T_c2f, T_f2c, support)` for an aligned interface.
pub fn build_base_pair(n_h: usize, n_hat: usize, ratio: Ratio, coarse_h: f64) -> Result<(SparseMatrix, SparseMatrix, usize)> {
    let expected = fine_count(n_h, ratio)?;
    if n_hat != expected {
        return Err(Error::Interpolation(format!(
            "{n_hat} fine nodes do not span {n_h} coarse nodes at ratio {ratio} (expected {expected})"
        )));
    }
    let mut best = f64::INFINITY;
    for width in SUPPORTS {
        let a = attempt(n_h, n_hat, ratio, width);
        best = best.min(a.residual);
        if a.residual <= CONSTRAINT_TOL {
            let fine_h = ratio.fine_spacing(coarse_h);
            let p_bar = trapezoid(n_h, coarse_h);
            let p_hat = trapezoid(n_hat, fine_h);
            let mut c2f = TripletBuilder::new(n_hat, n_h);
            let mut f2c = TripletBuilder::new(n_h, n_hat);
            for (i, row) in a.rows.iter().enumerate() {
                for &(k, v) in row {
                    c2f.push(i, k, v);
                    f2c.push(k, i, p_hat[i] / p_bar[k] * v);
                }
            }
            return Ok((c2f.build(), f2c.build(), width));
        }
    }
    let min_cells = (2 * ratio.coarse).max(4);
    Err(Error::Interpolation(format!(
        "constant-preserving restriction not attainable for {n_h} coarse nodes at ratio {ratio} \
         (constraint residual {best:.3e}); interfaces need at least {min_cells} coarse cells"
    )))
}

/// Applies the edge-halving transform: `T_W = B_c·T_f2c`, `T̂_W = T_c2f`.
pub fn apply_boundary_transform(t_c2f: &SparseMatrix, t_f2c: &SparseMatrix) -> (SparseMatrix, SparseMatrix, Vec<f64>) {
    let b_c = boundary_transform(t_f2c.rows());
    (t_f2c.scale_rows(&b_c), t_c2f.clone(), b_c)
}

pub fn build_interpolation_pair(n_h: usize, ratio: Ratio, coarse_h: f64) -> Result<InterpolationPair> {
    let n_hat = fine_count(n_h, ratio)?;
    let (t_c2f, t_f2c, support) = build_base_pair(n_h, n_hat, ratio, coarse_h)?;
    let (t_w, t_hat_w, b_c) = apply_boundary_transform(&t_c2f, &t_f2c);
    let fine_h = ratio.fine_spacing(coarse_h);
    Ok(InterpolationPair {
        ratio,
        n_h,
        n_hat,
        coarse_h,
        fine_h,
        support,
        t_c2f,
        t_f2c,
        b_c,
        t_w,
        t_hat_w,
        norms: interface_norms(n_h, n_hat, coarse_h, fine_h),
    })
}

/// Max interpolation errors split into interior and closure rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSplit {
    pub interior: f64,
    pub closure: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyReport {
    pub constant: ErrorSplit,
    pub linear: ErrorSplit,
    pub quadratic: ErrorSplit,
    /// Restriction of constants, all rows.
    pub restriction_constant: f64,
}

/// Errors of `T_c2f` on profiles sampled on the unit interval. Closure
/// rows are fine nodes within one coarse cell of either end.
pub fn accuracy_report(pair: &InterpolationPair) -> AccuracyReport {
    let len = (pair.n_h - 1) as f64;
    let coarse_s: Vec<f64> = (0..pair.n_h).map(|k| k as f64 / len).collect();
    let fine_s: Vec<f64> = (0..pair.n_hat)
        .map(|i| {
            let (k, t) = fine_position(i, pair.ratio);
            (k as f64 + t) / len
        })
        .collect();
    let cell = 1.0 / len;
    let split = |f: &dyn Fn(f64) -> f64| {
        let c: Vec<f64> = coarse_s.iter().map(|s| f(*s)).collect();
        let out = pair.t_c2f.mul_vec(&c);
        let mut e = ErrorSplit {
            interior: 0.0,
            closure: 0.0,
        };
        for (i, s) in fine_s.iter().enumerate() {
            let err = (out[i] - f(*s)).abs();
            if *s < cell - 1e-12 || *s > 1.0 - cell + 1e-12 {
                e.closure = e.closure.max(err);
            } else {
                e.interior = e.interior.max(err);
            }
        }
        e
    };
    let ones = vec![1.0; pair.n_hat];
    let restriction_constant = pair
        .t_f2c
        .mul_vec(&ones)
        .iter()
        .fold(0.0f64, |acc, v| acc.max((v - 1.0).abs()));
    AccuracyReport {
        constant: split(&|_| 1.0),
        linear: split(&|s| 0.3 + 1.7 * s),
        quadratic: split(&|s| s * s),
        restriction_constant,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(n_h: usize, ratio: &str) -> InterpolationPair {
        build_interpolation_pair(n_h, ratio.parse().unwrap(), 0.05).unwrap()
    }

    #[test]
    fn same_grid_is_identity() {
        let p = pair(9, "1:1");
        assert_eq!(p.t_c2f, SparseMatrix::identity(9));
        assert!(p.t_f2c.max_abs_diff(&SparseMatrix::identity(9)) < 1e-15);
        let bc = SparseMatrix::from_diagonal(&p.b_c);
        assert!(p.t_w.max_abs_diff(&bc) < 1e-15);
    }

    #[test]
    fn ratio_one_two_is_linear_interpolation() {
        let p = pair(11, "1:2");
        for i in 0..p.n_hat {
            if i % 2 == 0 {
                assert_eq!(p.t_c2f.get(i, i / 2), 1.0);
                assert_eq!(p.t_c2f.row(i).count(), 1);
            } else {
                assert_eq!(p.t_c2f.get(i, i / 2), 0.5);
                assert_eq!(p.t_c2f.get(i, i / 2 + 1), 0.5);
            }
        }
    }

    #[test]
    fn boundary_transform_halves_ends() {
        let b = boundary_transform(6);
        assert_eq!(b, vec![0.5, 1.0, 1.0, 1.0, 1.0, 0.5]);
    }

    #[test]
    fn compatibility_and_exactness_across_ratios() {
        for ratio in ["1:1", "1:2", "2:3", "2:5", "1:5", "1:10"] {
            for n_h in [5usize, 11, 41, 101] {
                let r: Ratio = ratio.parse().unwrap();
                let n_h = if r.fine_cells(n_h - 1).is_some() { n_h } else { n_h + 1 };
                let p = pair(n_h, ratio);
                assert!(p.aligned_residual() <= 1e-12, "{ratio} {n_h}: {}", p.aligned_residual());
                assert!(p.compatibility_residual() <= 1e-12, "{ratio} {n_h}");
                let acc = accuracy_report(&p);
                assert!(acc.constant.interior.max(acc.constant.closure) <= 1e-13, "{ratio} {n_h}");
                assert!(acc.linear.interior <= 1e-12, "{ratio} {n_h}");
                assert!(acc.restriction_constant <= 1e-12, "{ratio} {n_h}");
            }
        }
    }

    #[test]
    fn quadratic_error_is_second_order() {
        for ratio in ["1:5", "2:3"] {
            let coarse = accuracy_report(&pair(21, ratio)).quadratic.interior;
            let fine = accuracy_report(&pair(41, ratio)).quadratic.interior;
            let rate = coarse / fine;
            assert!((3.5..=4.5).contains(&rate), "{ratio}: {rate}");
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(pair(41, "2:3"), pair(41, "2:3"));
    }

    #[test]
    fn mismatched_counts_are_rejected() {
        assert!(build_base_pair(5, 7, Ratio::new(1, 2).unwrap(), 1.0).is_err());
        assert!(fine_count(4, Ratio::new(2, 3).unwrap()).is_err());
    }
}

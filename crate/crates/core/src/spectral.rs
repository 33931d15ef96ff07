//! Real block-diagonal form of special orthogonal matrices.
//!
//! `V = U · D · Uᵀ` where `D` holds 2×2 rotation blocks
//! `[[cos θ, sin θ], [−sin θ, cos θ]]` and 1×1 unit blocks.
//!
//! The eigenvalues of the symmetric part `(V + Vᵀ)/2` are the cosines of the
//! rotation angles and its eigenspaces are invariant under `V`. Inside each
//! (clustered) eigenspace the skew part `K = (V − Vᵀ)/2` separates the
//! individual planes: `−K²` has eigenvalue `sin²θ` on each plane, and for a
//! unit vector `v` in a plane the partner is `w = −K v / sin θ`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matfun::sym_eig;
use crate::matrix::{Matrix, SymMatrix};

/// Eigenvalues of the symmetric part closer than this are one eigenspace.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Directions whose residual norm falls below this after re-orthogonalization are dropped.
pub const DEPENDENCE_TOL: f64 = 1e-10;
/// `sin θ` below this marks a real eigenvector (eigenvalue ±1).
const SIN_TOL: f64 = 1e-12;
const ORTHO_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BlockSpec {
    /// Rotation by `theta ∈ (0, π]` acting on basis columns `rows.0`, `rows.1`.
    Rotation { theta: f64, rows: (usize, usize) },
    /// Fixed direction (eigenvalue 1) at basis column `row`.
    Unit { row: usize },
}

#[derive(Clone, Debug)]
pub struct OrthogonalDecomposition {
    /// Orthogonal basis; column `i` corresponds to row/column `i` of the block-diagonal part.
    pub basis: Matrix,
    pub blocks: Vec<BlockSpec>,
}

impl OrthogonalDecomposition {
    pub fn n(&self) -> usize {
        self.basis.n()
    }

    /// The block-diagonal middle factor `D`.
    pub fn block_diagonal(&self) -> Matrix {
        let mut d = Matrix::zeros(self.n());
        for b in &self.blocks {
            match *b {
                BlockSpec::Rotation { theta, rows } => {
                    let r = Matrix::rotation2(theta);
                    d = d.with_block(&[rows.0, rows.1], &r);
                }
                BlockSpec::Unit { row } => d[(row, row)] = 1.0,
            }
        }
        d
    }

    pub fn rotation_count(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| matches!(b, BlockSpec::Rotation { .. }))
            .count()
    }
}

/// `U · D · Uᵀ`.
pub fn assemble(d: &OrthogonalDecomposition) -> Matrix {
    let u = &d.basis;
    (&(u * &d.block_diagonal()) * &u.transpose()).clone()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the components along `basis` (two passes) and returns the residual norm.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for u in basis {
            let d = dot(u, v);
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= d * y);
        }
    }
    norm(v)
}

fn scale_in_place(v: &mut [f64], s: f64) {
    v.iter_mut().for_each(|x| *x *= s);
}

struct Plane {
    theta: f64,
    v: Vec<f64>,
    w: Vec<f64>,
}

/// Splits one clustered eigenspace (columns of `w_basis`, symmetric-part
/// eigenvalue ≈ `c`) into rotation planes and ±1 directions.
fn split_cluster(
    v_full: &Matrix,
    w_basis: &[Vec<f64>],
    c: f64,
    planes: &mut Vec<Plane>,
    units: &mut Vec<Vec<f64>>,
) -> Result<()> {
    let m = w_basis.len();
    let n = v_full.n();
    // T = Wᵀ V W restricted to the cluster
    let vw: Vec<Vec<f64>> = w_basis.iter().map(|w| v_full.mul_vec(w)).collect();
    let mut t = Matrix::zeros(m);
    for i in 0..m {
        for j in 0..m {
            t[(i, j)] = dot(&w_basis[i], &vw[j]);
        }
    }
    let k = t.skew_part();
    let g = SymMatrix::symmetrize(&(&k.transpose() * &k));
    let eig = sym_eig(&g)?;

    let mut used: Vec<Vec<f64>> = Vec::new();
    let mut minus: Vec<Vec<f64>> = Vec::new();
    for col in 0..m {
        let mut y = eig.vectors.column(col);
        let r = orthogonalize(&mut y, &used);
        if r < DEPENDENCE_TOL {
            continue;
        }
        scale_in_place(&mut y, 1.0 / r);
        let ky = k.mul_vec(&y);
        let s = norm(&ky);
        if s > SIN_TOL {
            let mut z: Vec<f64> = ky.iter().map(|x| -x / s).collect();
            let mut with_y = used.clone();
            with_y.push(y.clone());
            let rz = orthogonalize(&mut z, &with_y);
            if rz < DEPENDENCE_TOL {
                return Err(Error::NumericalFailure(
                    "degenerate rotation plane in block diagonalization".into(),
                ));
            }
            scale_in_place(&mut z, 1.0 / rz);
            let ty = t.mul_vec(&y);
            let tz = t.mul_vec(&z);
            // B = [y z]ᵀ T [y z]; angle from its rotation part
            let (b00, b01, b10, b11) = (dot(&y, &ty), dot(&y, &tz), dot(&z, &ty), dot(&z, &tz));
            let theta = (0.5 * (b01 - b10)).atan2(0.5 * (b00 + b11));
            used.push(y.clone());
            used.push(z.clone());
            planes.push(Plane {
                theta,
                v: lift(w_basis, &y, n),
                w: lift(w_basis, &z, n),
            });
        } else {
            if (c.abs() - 1.0).abs() > 1e-6 {
                return Err(Error::NumericalFailure(format!(
                    "real eigenvector found in a cluster with cosine {c}"
                )));
            }
            used.push(y.clone());
            if c > 0.0 {
                units.push(lift(w_basis, &y, n));
            } else {
                minus.push(lift(w_basis, &y, n));
            }
        }
    }
    if !minus.len().is_multiple_of(2) {
        return Err(Error::NumericalFailure(
            "odd number of -1 eigenvalues in a special orthogonal matrix".into(),
        ));
    }
    for pair in minus.chunks(2) {
        planes.push(Plane {
            theta: PI,
            v: pair[0].clone(),
            w: pair[1].clone(),
        });
    }
    Ok(())
}

fn lift(w_basis: &[Vec<f64>], y: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (w, &c) in w_basis.iter().zip(y) {
        out.iter_mut().zip(w).for_each(|(o, x)| *o += c * x);
    }
    out
}

/// Decomposes a special orthogonal `V` as `U · D · Uᵀ`.
///
/// Rotation blocks come first, ordered by decreasing `|θ|`, followed by
/// unit blocks. Every pair of −1 eigenvalues becomes a `Rotation(π)` block.
pub fn block_diagonalize(v: &Matrix) -> Result<OrthogonalDecomposition> {
    if !v.is_finite() {
        return Err(Error::InvalidInput("matrix entries must be finite".into()));
    }
    let n = v.n();
    let defect = v.orthogonality_defect();
    if defect > ORTHO_TOL {
        return Err(Error::NotOrthogonal { defect });
    }
    let det = v.det();
    if det < 0.0 {
        return Err(Error::NegativeDeterminant);
    }
    if (det - 1.0).abs() > ORTHO_TOL {
        return Err(Error::NotOrthogonal {
            defect: (det - 1.0).abs(),
        });
    }

    let eig = sym_eig(&SymMatrix::symmetrize(v))?;
    let mut planes = Vec::new();
    let mut units = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eig.values[end - 1] - eig.values[end] <= CLUSTER_TOL {
            end += 1;
        }
        let cluster: Vec<Vec<f64>> = (start..end).map(|j| eig.vectors.column(j)).collect();
        let c = eig.values[start..end].iter().sum::<f64>() / (end - start) as f64;
        split_cluster(v, &cluster, c, &mut planes, &mut units)?;
        start = end;
    }

    planes.sort_by(|a, b| b.theta.abs().total_cmp(&a.theta.abs()));
    let mut basis = Matrix::zeros(n);
    let mut blocks = Vec::with_capacity(planes.len() + units.len());
    let mut col = 0;
    for p in &planes {
        basis.set_column(col, &p.v);
        basis.set_column(col + 1, &p.w);
        blocks.push(BlockSpec::Rotation {
            theta: p.theta,
            rows: (col, col + 1),
        });
        col += 2;
    }
    for u in &units {
        basis.set_column(col, u);
        blocks.push(BlockSpec::Unit { row: col });
        col += 1;
    }
    if col != n {
        return Err(Error::NumericalFailure(format!(
            "block diagonalization recovered {col} of {n} directions"
        )));
    }
    Ok(OrthogonalDecomposition { basis, blocks })
}

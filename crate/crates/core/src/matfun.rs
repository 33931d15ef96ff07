//! Symmetric eigendecomposition and the matrix functions built on it.
//!
//! All functions of symmetric arguments go through [`sym_eig`], a cyclic
//! Jacobi solver. [`expm`] is the exception: it handles general square
//! matrices by scaling and squaring with a diagonal Padé approximant.

use crate::error::{Error, Result};
use crate::matrix::{certify_eigenvalues, Matrix, SpdMatrix, SymMatrix};

const JACOBI_REL_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 30;
/// Components within this relative margin of the largest magnitude count as tied.
const SIGN_TIE_TOL: f64 = 1e-12;

/// Eigenvectors (as columns) and eigenvalues sorted in descending order.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub vectors: Matrix,
    pub values: Vec<f64>,
}

impl EigenPair {
    /// `Q · diag(f(d)) · Qᵀ`, symmetrized.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let fd: Vec<f64> = self.values.iter().map(|&d| f(d)).collect();
        let q = &self.vectors;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|k| q[(i, k)] * fd[k] * q[(j, k)]).sum();
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenvalues are sorted descending. Each eigenvector is signed so that
/// its largest-magnitude component is positive (lowest index wins ties),
/// which makes the output reproducible bit-for-bit.
pub fn sym_eig(s: &SymMatrix) -> Result<EigenPair> {
    let n = s.n();
    let mut a = s.matrix().clone();
    let mut v = Matrix::identity(n);
    let thresh = JACOBI_REL_TOL * a.frobenius_norm();

    let off_norm = |a: &Matrix| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += a[(i, j)] * a[(i, j)];
                }
            }
        }
        acc.sqrt()
    };

    let mut converged = false;
    for sweep in 0..=JACOBI_MAX_SWEEPS {
        if off_norm(&a) <= thresh {
            converged = true;
            break;
        }
        if sweep == JACOBI_MAX_SWEEPS {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let h = aqq - app;
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let t = 1.0 / (theta.abs() + (theta * theta + 1.0).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[(r, p)];
                        let arq = a[(r, q)];
                        let nrp = c * arp - sn * arq;
                        let nrq = sn * arp + c * arq;
                        a[(r, p)] = nrp;
                        a[(p, r)] = nrp;
                        a[(r, q)] = nrq;
                        a[(q, r)] = nrq;
                    }
                }
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = c * vrp - sn * vrq;
                    v[(r, q)] = sn * vrp + c * vrq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(format!(
            "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps index order for exactly equal eigenvalues
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));

    let mut vectors = Matrix::zeros(n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(a[(src, src)]);
        let mut col = v.column(src);
        let big = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let lead = col
            .iter()
            .position(|x| x.abs() >= big * (1.0 - SIGN_TIE_TOL))
            .unwrap_or(0);
        if col[lead] < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
        vectors.set_column(dst, &col);
    }
    Ok(EigenPair { vectors, values })
}

fn certified_eig(s: &SpdMatrix) -> Result<EigenPair> {
    let eig = sym_eig(&s.as_sym())?;
    certify_eigenvalues(&eig.values)?;
    Ok(eig)
}

/// Principal square root of an SPD matrix.
pub fn spd_sqrt(s: &SpdMatrix) -> Result<SpdMatrix> {
    let eig = certified_eig(s)?;
    Ok(SpdMatrix::new_unchecked(eig.map(f64::sqrt)))
}

/// `Σ^{-1/2}` of an SPD matrix.
pub fn spd_inv_sqrt(s: &SpdMatrix) -> Result<SpdMatrix> {
    let eig = certified_eig(s)?;
    Ok(SpdMatrix::new_unchecked(eig.map(|d| 1.0 / d.sqrt())))
}

/// Inverse of an SPD matrix through its eigendecomposition.
pub fn spd_inv(s: &SpdMatrix) -> Result<SpdMatrix> {
    let eig = certified_eig(s)?;
    Ok(SpdMatrix::new_unchecked(eig.map(|d| 1.0 / d)))
}

/// Principal logarithm of an SPD matrix.
pub fn spd_log(s: &SpdMatrix) -> Result<SymMatrix> {
    let eig = certified_eig(s)?;
    Ok(SymMatrix::symmetrize(&eig.map(f64::ln)))
}

/// Exponential of a symmetric matrix.
pub fn sym_exp(a: &SymMatrix) -> Result<SpdMatrix> {
    let eig = sym_eig(a)?;
    Ok(SpdMatrix::new_unchecked(eig.map(f64::exp)))
}

/// Condition number `λ_max / λ_min`.
pub fn cond(s: &SpdMatrix) -> Result<f64> {
    let eig = certified_eig(s)?;
    Ok(eig.max() / eig.min())
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// 1-norm bounds below which the degree-m approximant needs no scaling.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539_398_330_063_23e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068e0;
const THETA13: f64 = 5.371920351148152e0;

fn lincomb(terms: &[(f64, &Matrix)], n: usize) -> Matrix {
    let mut out = Matrix::zeros(n);
    for (c, m) in terms {
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += c * m[(i, j)];
            }
        }
    }
    out
}

/// Low-degree Padé numerator/denominator halves `(U, V)` for m ∈ {3,5,7,9}.
fn pade_low(a: &Matrix, b: &[f64]) -> (Matrix, Matrix) {
    let n = a.n();
    let id = Matrix::identity(n);
    let a2 = a * a;
    let mut powers = vec![id];
    for _ in 1..b.len() / 2 {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let mut odd = Matrix::zeros(n);
    let mut even = Matrix::zeros(n);
    for (k, p) in powers.iter().enumerate() {
        odd = &odd + &p.scale(b[2 * k + 1]);
        even = &even + &p.scale(b[2 * k]);
    }
    (a * &odd, even)
}

/// General matrix exponential by scaling and squaring with a diagonal Padé
/// approximant of degree 3, 5, 7, 9 or 13 selected from `‖A‖₁`.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    if !a.is_finite() {
        return Err(Error::InvalidInput("matrix entries must be finite".into()));
    }
    let n = a.n();
    let norm = a.norm1();
    let (u, v, squarings) = if norm <= THETA3 {
        let (u, v) = pade_low(a, &PADE3);
        (u, v, 0)
    } else if norm <= THETA5 {
        let (u, v) = pade_low(a, &PADE5);
        (u, v, 0)
    } else if norm <= THETA7 {
        let (u, v) = pade_low(a, &PADE7);
        (u, v, 0)
    } else if norm <= THETA9 {
        let (u, v) = pade_low(a, &PADE9);
        (u, v, 0)
    } else {
        let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
        let a = a.scale(0.5f64.powi(s));
        let b = &PADE13;
        let id = Matrix::identity(n);
        let a2 = &a * &a;
        let a4 = &a2 * &a2;
        let a6 = &a2 * &a4;
        let inner_u = lincomb(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], n);
        let outer_u = lincomb(&[(b[7], &a6), (b[5], &a4), (b[3], &a2), (b[1], &id)], n);
        let u = &a * &(&(&a6 * &inner_u) + &outer_u);
        let inner_v = lincomb(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], n);
        let outer_v = lincomb(&[(b[6], &a6), (b[4], &a4), (b[2], &a2), (b[0], &id)], n);
        let v = &(&a6 * &inner_v) + &outer_v;
        (u, v, s)
    };
    let mut r = (&v - &u).solve(&(&v + &u)).map_err(|_| {
        Error::NumericalFailure("singular Padé denominator in matrix exponential".into())
    })?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// Result of a polar decomposition `Φ = V · S`.
#[derive(Clone, Debug)]
pub struct Polar {
    /// Orthogonal factor; its determinant carries the sign of `det Φ`.
    pub orthogonal: Matrix,
    /// `(ΦᵀΦ)^{1/2}`.
    pub spd: SpdMatrix,
}

/// Polar decomposition `Φ = V·S` with `V` orthogonal and `S = (ΦᵀΦ)^{1/2}`.
///
/// `V` comes from the scaled Newton iteration `X ← (γX + X⁻ᵀ/γ)/2`, which
/// delivers an orthogonal factor accurate to working precision even when
/// `ΦᵀΦ` is ill-conditioned; `S` is then the symmetric part of `VᵀΦ`.
pub fn polar(phi: &Matrix) -> Result<Polar> {
    let n = phi.n();
    if !phi.is_finite() {
        return Err(Error::InvalidInput("matrix entries must be finite".into()));
    }
    if phi.lu().is_singular() {
        return Err(Error::SingularInput);
    }
    let mut x = phi.clone();
    let mut scaled = true;
    let mut done = false;
    for _ in 0..100 {
        let xinv_t = x.inverse()?.transpose();
        let gamma = if scaled {
            (xinv_t.frobenius_norm() / x.frobenius_norm()).sqrt()
        } else {
            1.0
        };
        let next = (&x.scale(gamma) + &xinv_t.scale(1.0 / gamma)).scale(0.5);
        let delta = next.dist_frobenius(&x) / next.frobenius_norm();
        x = next;
        if done {
            break;
        }
        if delta < 1e-2 {
            scaled = false;
        }
        if delta < 1e-14 * (n as f64).sqrt() {
            // one more unscaled step polishes the last digits
            done = true;
        }
    }
    if !x.is_finite() || x.orthogonality_defect() > 1e-10 {
        return Err(Error::NumericalFailure(
            "polar iteration failed to converge".into(),
        ));
    }
    let s = SymMatrix::symmetrize(&(&x.transpose() * phi));
    let spd = SpdMatrix::from_sym(s).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::SingularInput,
        other => other,
    })?;
    Ok(Polar { orthogonal: x, spd })
}

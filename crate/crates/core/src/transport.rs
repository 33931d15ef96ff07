//! Monge maps between centered Gaussian distributions.
//!
//! For covariances `Σa`, `Σb` the optimal transport map pushing
//! `N(0, Σa)` onto `N(0, Σb)` is linear, `x ↦ M x`, with `M` the unique SPD
//! solution of `M Σa M = Σb`:
//!
//! ```text
//! M = Σa^{-1/2} (Σa^{1/2} Σb Σa^{1/2})^{1/2} Σa^{-1/2}
//! ```
//!
//! The inner root is taken as the SPD polar factor of `Σb^{1/2} Σa^{1/2}`.

use crate::error::{Error, Result};
use crate::matfun::{polar, spd_inv_sqrt, spd_sqrt};
use crate::matrix::{Matrix, SpdMatrix};

fn check_dims(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            found: b.n(),
        });
    }
    Ok(())
}

/// The SPD map `M` with `M·Σa·M = Σb`.
pub fn ot_map(sigma_a: &SpdMatrix, sigma_b: &SpdMatrix) -> Result<SpdMatrix> {
    check_dims(sigma_a, sigma_b)?;
    if sigma_a.n() == 2 {
        return ot_map_2x2(sigma_a, sigma_b);
    }
    // (Σa^{1/2} Σb Σa^{1/2})^{1/2} is the SPD polar factor of Σb^{1/2} Σa^{1/2}
    let half_a = spd_sqrt(sigma_a)?;
    let half_b = spd_sqrt(sigma_b)?;
    let inv_half = spd_inv_sqrt(sigma_a)?;
    let root = polar(&(&*half_b * &half_a))?.spd;
    let m = &(&*inv_half * &root) * &inv_half;
    SpdMatrix::from_computed(&m)
}

/// `M` is the geometric mean `Σa⁻¹ # Σb`. For 2×2 matrices of unit
/// determinant `A # B = (A + B)/√det(A + B)`.
fn ot_map_2x2(sigma_a: &SpdMatrix, sigma_b: &SpdMatrix) -> Result<SpdMatrix> {
    let det2 = |m: &Matrix| m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let da = det2(sigma_a);
    let db = det2(sigma_b);
    if !(da > 0.0 && db > 0.0) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: da.min(db),
        });
    }
    let (sa, sb) = (da.sqrt(), db.sqrt());
    // Σa⁻¹ scaled to unit determinant is adj(Σa)/√det Σa
    let a = Matrix::from_rows(&[
        [sigma_a[(1, 1)] / sa, -sigma_a[(0, 1)] / sa],
        [-sigma_a[(1, 0)] / sa, sigma_a[(0, 0)] / sa],
    ]);
    let b = sigma_b.scale(1.0 / sb);
    let sum = &a + &b;
    let m = sum.scale((sb / sa).sqrt() / det2(&sum).sqrt());
    SpdMatrix::from_computed(&m)
}

/// `‖M·Σa·M − Σb‖_F`.
pub fn ot_residual(m: &Matrix, sigma_a: &Matrix, sigma_b: &Matrix) -> Result<f64> {
    check_dims(m, sigma_a)?;
    check_dims(m, sigma_b)?;
    Ok((&(m * sigma_a) * m).dist_frobenius(sigma_b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(rows: &[[f64; 2]]) -> SpdMatrix {
        SpdMatrix::new(Matrix::from_rows(rows)).unwrap()
    }

    #[test]
    fn identity_source_gives_square_root() {
        let m = ot_map(&SpdMatrix::identity(2), &spd(&[[4.0, 0.0], [0.0, 1.0]])).unwrap();
        assert!(m.max_abs_diff(&Matrix::from_diag(&[2.0, 1.0])) < 1e-15);
    }

    #[test]
    fn equal_covariances_give_identity() {
        let s = spd(&[[3.0, 1.0], [1.0, 2.0]]);
        let m = ot_map(&s, &s).unwrap();
        assert!(m.max_abs_diff(&Matrix::identity(2)) < 1e-14);
    }

    #[test]
    fn recovers_intro_second_factor() {
        // Σb = M Σa M with M = [[2,1],[1,1]], Σa = diag(1/4, 4)
        let sa = spd(&[[0.25, 0.0], [0.0, 4.0]]);
        let sb = spd(&[[5.0, 4.5], [4.5, 4.25]]);
        let m = ot_map(&sa, &sb).unwrap();
        assert!(m.max_abs_diff(&Matrix::from_rows(&[[2.0, 1.0], [1.0, 1.0]])) < 1e-13);
        assert!(ot_residual(&m, &sa, &sb).unwrap() < 1e-10 * (1.0 + sb.frobenius_norm()));
    }

    #[test]
    fn residual_examples() {
        let s = spd(&[[3.0, 1.0], [1.0, 2.0]]);
        assert_eq!(ot_residual(&Matrix::identity(2), &s, &s).unwrap(), 0.0);
        let r = ot_residual(
            &Matrix::from_diag(&[2.0, 1.0]),
            &Matrix::identity(2),
            &Matrix::from_diag(&[4.0, 1.0]),
        )
        .unwrap();
        assert_eq!(r, 0.0);

        let sa = spd(&[[0.25, 0.0], [0.0, 4.0]]);
        let sb = spd(&[[5.0, 4.5], [4.5, 4.25]]);
        let m = ot_map(&sa, &sb).unwrap();
        let bumped = &*m + &Matrix::identity(2).scale(1e-3);
        assert!(ot_residual(&bumped, &sa, &sb).unwrap() > 1e-4);
    }

    #[test]
    fn dimension_mismatch() {
        let r = ot_map(&SpdMatrix::identity(2), &SpdMatrix::identity(3));
        assert_eq!(
            r,
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 3
            })
        );
        assert!(ot_residual(
            &Matrix::identity(2),
            &Matrix::identity(3),
            &Matrix::identity(2)
        )
        .is_err());
    }
}

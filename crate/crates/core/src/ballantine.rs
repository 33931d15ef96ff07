//! Factorization of arbitrary matrices with positive determinant into
//! bounded products of SPD matrices.
//!
//! `Φ = V·S` (polar) supplies one SPD factor `S`; the rotation `V` is brought
//! to block-diagonal form `U·D·Uᵀ`, each planar block is factored by the
//! k-factor scheme, the per-block factors are stacked stage by stage into
//! block-diagonal `M_i`, and conjugation `N_i = U·M_i·Uᵀ` keeps them SPD.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matfun::{polar, sym_eig};
use crate::matrix::{certify_eigenvalues, Matrix, SpdMatrix, SymMatrix, SYMMETRY_TOL};
use crate::planar::{build_chain, plan_scheme, FactorChain};
use crate::spectral::{block_diagonalize, BlockSpec};

/// `|det Φ|` below this is treated as singular.
pub const SINGULAR_DET: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorOptions {
    /// Factors per planar rotation (at least 3; 5 are needed for half turns).
    pub k_rotation: usize,
    /// Largest condition parameter λ the planner may use.
    pub lambda_budget: f64,
    /// Relative residual accepted by verification.
    pub tol_verify: f64,
}

impl Default for FactorOptions {
    fn default() -> Self {
        FactorOptions {
            k_rotation: 5,
            lambda_budget: 1000.0,
            tol_verify: 1e-8,
        }
    }
}

impl FactorOptions {
    pub fn validate(&self) -> Result<()> {
        if self.k_rotation < 3 {
            return Err(Error::InvalidParams(format!(
                "k_rotation must be >= 3, got {}",
                self.k_rotation
            )));
        }
        if !self.lambda_budget.is_finite() || self.lambda_budget < 1.0 {
            return Err(Error::InvalidParams(format!(
                "lambda budget must be >= 1, got {}",
                self.lambda_budget
            )));
        }
        if !self.tol_verify.is_finite() || self.tol_verify < 0.0 {
            return Err(Error::InvalidParams(
                "verification tolerance must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Factors the planar rotation `U_ψ`, `ψ ∈ (−π, π]`.
///
/// Negative angles reuse the chain for `|ψ|` in reverse order, whose product
/// is the transpose `U_{−|ψ|}`.
pub fn factor_rotation2(psi: f64, opts: &FactorOptions) -> Result<FactorChain> {
    opts.validate()?;
    if !psi.is_finite() || psi <= -std::f64::consts::PI || psi > std::f64::consts::PI {
        return Err(Error::InvalidParams(format!(
            "rotation angle must lie in (-pi, pi], got {psi}"
        )));
    }
    if psi == 0.0 {
        return Ok(FactorChain::identity(2));
    }
    let params = plan_scheme(psi.abs(), opts.k_rotation, opts.lambda_budget)?;
    let chain = build_chain(&params)?;
    Ok(if psi < 0.0 { chain.reversed() } else { chain })
}

/// Factors a special orthogonal matrix into at most `max stage count` SPD factors.
pub fn factor_orthogonal(v: &Matrix, opts: &FactorOptions) -> Result<FactorChain> {
    opts.validate()?;
    let n = v.n();
    let dec = block_diagonalize(v)?;

    let mut per_block: Vec<((usize, usize), FactorChain)> = Vec::new();
    for b in &dec.blocks {
        if let BlockSpec::Rotation { theta, rows } = *b {
            per_block.push((rows, factor_rotation2(theta, opts)?));
        }
    }
    if per_block.is_empty() {
        return Ok(FactorChain::identity(n));
    }
    let stages = per_block.iter().map(|(_, c)| c.len()).max().unwrap_or(1);

    let u = &dec.basis;
    let ut = u.transpose();
    let mut factors = Vec::with_capacity(stages);
    for i in 0..stages {
        let mut m = Matrix::identity(n);
        for ((r0, r1), chain) in &per_block {
            // shorter chains are padded with identity stages at the end
            if let Some(f) = chain.factors().get(i) {
                m = m.with_block(&[*r0, *r1], f);
            }
        }
        let conj = &(u * &m) * &ut;
        let spd = SpdMatrix::from_computed(&conj).map_err(|e| {
            Error::NumericalFailure(format!("conjugated stage {i} lost certification: {e}"))
        })?;
        factors.push(spd);
    }
    FactorChain::new(factors)
}

/// Factors any square `Φ` with `det Φ > 0` into SPD matrices: the polar
/// factor `S = (ΦᵀΦ)^{1/2}` first (rightmost), then the factors of the
/// orthogonal part.
pub fn factor_matrix(phi: &Matrix, opts: &FactorOptions) -> Result<FactorChain> {
    opts.validate()?;
    if !phi.is_finite() {
        return Err(Error::InvalidInput("matrix entries must be finite".into()));
    }
    let n = phi.n();
    let lu = phi.lu();
    let (sign, log_abs) = lu.log_abs_det();
    if lu.is_singular() || log_abs < SINGULAR_DET.ln() {
        return Err(Error::SingularInput);
    }
    if sign < 0.0 {
        return Err(Error::NonPositiveDeterminant { det: lu.det() });
    }
    let p = polar(phi)?;
    let id = Matrix::identity(n);
    if p.orthogonal.dist_frobenius(&id) <= 1e-12 {
        return FactorChain::new(vec![p.spd]);
    }
    let rest = factor_orthogonal(&p.orthogonal, opts)?;
    if p.spd.dist_frobenius(&id) <= 1e-10 {
        return Ok(rest);
    }
    let mut factors = Vec::with_capacity(rest.len() + 1);
    factors.push(p.spd);
    factors.extend(rest.into_factors());
    FactorChain::new(factors)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorReport {
    pub index: usize,
    pub symmetry_defect: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `None` when the factor is not positive definite.
    pub condition_number: Option<f64>,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub pass: bool,
    /// `‖∏ factors − target‖_F / ‖target‖_F`.
    pub residual: f64,
    pub tolerance: f64,
    pub factor_count: usize,
    pub factors: Vec<FactorReport>,
}

/// Checks that `c` multiplies out to `target` within `tol` (relative
/// Frobenius) and that every factor is certifiably SPD.
pub fn verify(c: &FactorChain, target: &Matrix, tol: f64) -> Result<VerificationReport> {
    verify_factors(c.factors().iter().map(|f| f.matrix()), target, tol)
}

/// [`verify`] over raw matrices, for factors that have not been certified.
pub fn verify_factors<'a>(
    factors: impl IntoIterator<Item = &'a Matrix>,
    target: &Matrix,
    tol: f64,
) -> Result<VerificationReport> {
    let n = target.n();
    let mut product = Matrix::identity(n);
    let mut reports = Vec::new();
    for (index, f) in factors.into_iter().enumerate() {
        if f.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: f.n(),
            });
        }
        product = f * &product;
        let symmetry_defect = f.symmetry_defect();
        let eig = sym_eig(&SymMatrix::symmetrize(f))?;
        let (max_eigenvalue, min_eigenvalue) = (eig.max(), eig.min());
        let certified = symmetry_defect <= SYMMETRY_TOL * (1.0 + f.frobenius_norm())
            && certify_eigenvalues(&eig.values).is_ok();
        reports.push(FactorReport {
            index,
            symmetry_defect,
            min_eigenvalue,
            max_eigenvalue,
            condition_number: (min_eigenvalue > 0.0).then(|| max_eigenvalue / min_eigenvalue),
            certified,
        });
    }
    if reports.is_empty() {
        return Err(Error::InvalidInput(
            "a chain needs at least one factor".into(),
        ));
    }
    let scale = target.frobenius_norm();
    let diff = product.dist_frobenius(target);
    let residual = if scale > 0.0 { diff / scale } else { diff };
    let pass = residual <= tol && reports.iter().all(|r| r.certified);
    Ok(VerificationReport {
        pass,
        residual,
        tolerance: tol,
        factor_count: reports.len(),
        factors: reports,
    })
}

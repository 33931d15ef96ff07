//! Planar rotations realized as products of SPD factors.
//!
//! The k-factor scheme walks a chain of unit-determinant covariances
//!
//! ```text
//! I = Σ₀ → Σ₁ = diag(λ, 1/λ) → U_θ Σ₁ U_θᵀ → … → U_θ^{k−2} Σ₁ U_θ^{k−2 ᵀ} → Σ_k = I
//! ```
//!
//! and takes each factor to be the Monge map between consecutive
//! covariances. Since every factor pushes `Σ_{j−1}` to `Σ_j` and the chain
//! starts and ends at `I`, the product `P = M_k ⋯ M₁` satisfies `P Pᵀ = I`
//! and is a rotation `U_φ`. The net angle `φ_k(θ, λ)` is what the sweep and
//! root-finding helpers below tabulate and invert.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::matfun::spd_log;
use crate::matrix::{Matrix, SpdMatrix, SymMatrix};
use crate::transport::ot_map;

/// Grid size of the internal sweep used to bracket roots.
pub const SOLVE_GRID_POINTS: usize = 2000;
/// Bisection steps after bracketing.
pub const BISECTION_STEPS: usize = 80;
/// Growth ratio of the λ grid searched by [`plan_scheme`].
pub const LAMBDA_GRID_RATIO: f64 = 1.25;
/// Largest allowed change of the unwrapped angle between adjacent sweep rows.
pub const MAX_SWEEP_INCREMENT: f64 = FRAC_PI_2;
/// Interval halvings allowed when a sweep step is too coarse.
pub const MAX_REFINE_DEPTH: usize = 40;

const ROTATION_TOL: f64 = 1e-8;
const SOLVE_TOL: f64 = 1e-9;

/// A planar rotation by `theta` radians, `[[cos θ, sin θ], [−sin θ, cos θ]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation2 {
    pub theta: f64,
}

impl Rotation2 {
    pub fn new(theta: f64) -> Self {
        Rotation2 { theta }
    }

    pub fn matrix(&self) -> Matrix {
        Matrix::rotation2(self.theta)
    }

    /// `U_θ Σ U_θᵀ`.
    pub fn conjugate(&self, sigma: &Matrix) -> Matrix {
        let u = self.matrix();
        &(&u * sigma) * &u.transpose()
    }
}

/// Parameters of the k-factor scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainParams {
    /// Condition parameter, `Σ₁ = diag(λ, 1/λ)`; at least 1.
    pub lambda: f64,
    /// Rotation per intermediate step, radians.
    pub theta: f64,
    /// Number of factors, at least 3.
    pub k: usize,
}

impl ChainParams {
    pub fn new(lambda: f64, theta: f64, k: usize) -> Result<Self> {
        let p = ChainParams { lambda, theta, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 1.0 {
            return Err(Error::InvalidParams(format!(
                "lambda must be a finite value >= 1, got {}",
                self.lambda
            )));
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidParams("theta must be finite".into()));
        }
        if self.k < 3 {
            return Err(Error::InvalidParams(format!(
                "factor count k must be >= 3, got {}",
                self.k
            )));
        }
        Ok(())
    }
}

/// An ordered list of SPD factors `M₁ … M_k`, applied right to left:
/// the chain represents `M_k ⋯ M₂ M₁`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorChain {
    factors: Vec<SpdMatrix>,
    params: Option<ChainParams>,
}

impl FactorChain {
    pub fn new(factors: Vec<SpdMatrix>) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| Error::InvalidInput("a chain needs at least one factor".into()))?;
        let n = first.n();
        for f in &factors {
            if f.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: f.n(),
                });
            }
        }
        Ok(FactorChain {
            factors,
            params: None,
        })
    }

    pub fn identity(n: usize) -> Self {
        FactorChain {
            factors: vec![SpdMatrix::identity(n)],
            params: None,
        }
    }

    pub fn with_params(mut self, params: Option<ChainParams>) -> Self {
        self.params = params;
        self
    }

    pub fn n(&self) -> usize {
        self.factors[0].n()
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> &[SpdMatrix] {
        &self.factors
    }

    pub fn into_factors(self) -> Vec<SpdMatrix> {
        self.factors
    }

    pub fn params(&self) -> Option<&ChainParams> {
        self.params.as_ref()
    }

    /// `M_k ⋯ M₁`.
    pub fn product(&self) -> Matrix {
        let mut p = Matrix::identity(self.n());
        for f in &self.factors {
            p = &**f * &p;
        }
        p
    }

    /// The chain with factor order reversed. For symmetric factors its
    /// product is the transpose of the original product.
    pub fn reversed(&self) -> FactorChain {
        let mut factors = self.factors.clone();
        factors.reverse();
        FactorChain {
            factors,
            params: None,
        }
    }
}

fn numerical(e: Error) -> Error {
    match e {
        Error::NotPositiveDefinite { min_eigenvalue } => Error::NumericalFailure(format!(
            "intermediate covariance lost positive definiteness (min eigenvalue {min_eigenvalue:e})"
        )),
        other => other,
    }
}

/// The covariance sequence `Σ₀ … Σ_k` of the scheme.
pub fn chain_covariances(p: &ChainParams) -> Result<Vec<SpdMatrix>> {
    p.validate()?;
    let mut covs = Vec::with_capacity(p.k + 1);
    covs.push(SpdMatrix::identity(2));
    let sigma1 = Matrix::from_diag(&[p.lambda, 1.0 / p.lambda]);
    for j in 1..p.k {
        // rotate Σ₁ by the accumulated angle rather than compounding products
        let rot = Rotation2::new((j - 1) as f64 * p.theta);
        let s = if j == 1 {
            sigma1.clone()
        } else {
            rot.conjugate(&sigma1)
        };
        covs.push(SpdMatrix::new_unchecked(
            SymMatrix::symmetrize(&s).into_matrix(),
        ));
    }
    covs.push(SpdMatrix::identity(2));
    Ok(covs)
}

/// Builds the k factors `M_j = ot_map(Σ_{j−1}, Σ_j)`.
pub fn build_chain(p: &ChainParams) -> Result<FactorChain> {
    p.validate()?;
    if p.lambda == 1.0 {
        return Ok(FactorChain {
            factors: vec![SpdMatrix::identity(2); p.k],
            params: Some(*p),
        });
    }
    let covs = chain_covariances(p)?;
    let mut factors = Vec::with_capacity(p.k);
    let r = p.lambda.sqrt();
    factors.push(SpdMatrix::new_unchecked(Matrix::from_diag(&[r, 1.0 / r])));
    for j in 2..p.k {
        factors.push(ot_map(&covs[j - 1], &covs[j]).map_err(numerical)?);
    }
    // Σ_{k−1}^{-1/2} = U Σ₁^{-1/2} Uᵀ
    let last =
        Rotation2::new((p.k - 2) as f64 * p.theta).conjugate(&Matrix::from_diag(&[1.0 / r, r]));
    factors.push(SpdMatrix::new_unchecked(
        SymMatrix::symmetrize(&last).into_matrix(),
    ));
    Ok(FactorChain {
        factors,
        params: Some(*p),
    })
}

/// Angle `φ` of a 2×2 chain whose product is the rotation `U_φ`, in `(−π, π]`.
pub fn net_rotation(c: &FactorChain) -> Result<f64> {
    net_rotation_with_tol(c, ROTATION_TOL)
}

/// [`net_rotation`] with a caller-chosen tolerance on the orthogonality
/// defect `‖PPᵀ − I‖_F` and on `|det P − 1|`.
pub fn net_rotation_with_tol(c: &FactorChain, tol: f64) -> Result<f64> {
    if c.n() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: c.n(),
        });
    }
    let p = c.product();
    let defect = (&p * &p.transpose()).dist_frobenius(&Matrix::identity(2));
    let det = p.det();
    if !(defect <= tol && (det - 1.0).abs() <= tol) {
        return Err(Error::NotARotation { defect, det });
    }
    let phi = p[(0, 1)].atan2(p[(0, 0)]);
    Ok(if phi <= -PI { PI } else { phi })
}

/// `φ_k(θ, λ)` wrapped to `(−π, π]`.
///
/// Rounding in the product grows like `ε·λ²`, so the rotation check is
/// relaxed accordingly for large λ.
pub fn rotation_angle(lambda: f64, theta: f64, k: usize) -> Result<f64> {
    let chain = build_chain(&ChainParams::new(lambda, theta, k)?)?;
    let tol = ROTATION_TOL.max(64.0 * f64::EPSILON * lambda * lambda);
    net_rotation_with_tol(&chain, tol)
}

/// Representative of `raw + 2πm` closest to `reference`.
pub fn unwrap_near(raw: f64, reference: f64) -> f64 {
    raw + TAU * ((reference - raw) / TAU).round()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub theta: f64,
    pub phi: f64,
}

/// Unwrapped net angle along a θ sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub lambda: f64,
    pub k: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn max_phi(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.phi)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Tabulates `φ_k(θ, λ)` on the uniform grid of `steps` points over
/// `[0, θ_max]`, unwrapped by branch continuation from `φ(0) = 0`.
///
/// Where two neighbouring grid points differ by more than
/// [`MAX_SWEEP_INCREMENT`] the interval is bisected and the intermediate
/// points are inserted into the table, so adjacent rows never jump by more
/// than π/2. If [`MAX_REFINE_DEPTH`] halvings do not suffice the sweep fails
/// with `NumericalFailure`.
pub fn phi_sweep(lambda: f64, k: usize, theta_max: f64, steps: usize) -> Result<SweepTable> {
    ChainParams::new(lambda, 0.0, k)?;
    if steps < 2 {
        return Err(Error::InvalidParams(
            "a sweep needs at least 2 steps".into(),
        ));
    }
    if !theta_max.is_finite() || theta_max <= 0.0 {
        return Err(Error::InvalidParams("theta_max must be positive".into()));
    }
    let angle = |theta: f64| rotation_angle(lambda, theta, k);

    let mut rows = vec![SweepRow {
        theta: 0.0,
        phi: 0.0,
    }];
    let last = (steps - 1) as f64;
    for i in 1..steps {
        let target = theta_max * i as f64 / last;
        // explicit stack of pending right endpoints, deepest first
        let mut pending: Vec<(f64, usize)> = vec![(target, 0)];
        while let Some(&(b, depth)) = pending.last() {
            let prev = *rows.last().unwrap();
            let phi = unwrap_near(angle(b)?, prev.phi);
            if (phi - prev.phi).abs() <= MAX_SWEEP_INCREMENT {
                rows.push(SweepRow { theta: b, phi });
                pending.pop();
            } else if depth >= MAX_REFINE_DEPTH {
                return Err(Error::NumericalFailure(format!(
                    "sweep cannot be unwrapped near theta = {b}; increase steps"
                )));
            } else {
                pending.push((0.5 * (prev.theta + b), depth + 1));
            }
        }
    }
    Ok(SweepTable { lambda, k, rows })
}

type SweepKey = (u64, usize);

fn sweep_cache() -> &'static Mutex<HashMap<SweepKey, Arc<SweepTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<SweepKey, Arc<SweepTable>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The bracketing sweep over `[0, π]` for `(λ, k)`, memoized. The table is
/// a pure function of its key, so sharing it across threads is safe.
fn bracket_sweep(lambda: f64, k: usize) -> Result<Arc<SweepTable>> {
    let key = (lambda.to_bits(), k);
    if let Some(t) = sweep_cache().lock().unwrap().get(&key) {
        return Ok(Arc::clone(t));
    }
    let table = Arc::new(phi_sweep(lambda, k, PI, SOLVE_GRID_POINTS)?);
    let mut cache = sweep_cache().lock().unwrap();
    if cache.len() >= 512 {
        cache.clear();
    }
    cache.insert(key, Arc::clone(&table));
    Ok(table)
}

/// Largest unwrapped `φ_k(θ, λ)` over `θ ∈ [0, π]`.
pub fn max_reachable(lambda: f64, k: usize) -> Result<f64> {
    Ok(bracket_sweep(lambda, k)?.max_phi())
}

/// Smallest `θ ≥ 0` in the first bracketing interval of the `[0, π]` sweep
/// with `φ_k(θ, λ) = ψ`.
pub fn solve_theta(lambda: f64, k: usize, psi: f64) -> Result<f64> {
    ChainParams::new(lambda, 0.0, k)?;
    if !psi.is_finite() || psi < 0.0 {
        return Err(Error::InvalidParams(format!(
            "target angle must be finite and >= 0, got {psi}"
        )));
    }
    if psi == 0.0 {
        return Ok(0.0);
    }
    let table = bracket_sweep(lambda, k)?;
    let rows = &table.rows;
    let bracket = rows.windows(2).find(|w| {
        let (a, b) = (w[0].phi - psi, w[1].phi - psi);
        a == 0.0 || (a < 0.0) != (b < 0.0) || b == 0.0
    });
    let Some(w) = bracket else {
        return Err(Error::TargetUnreachable {
            target: psi,
            max_achievable: table.max_phi(),
        });
    };
    if w[0].phi == psi {
        return Ok(w[0].theta);
    }
    let (mut lo, mut hi) = (w[0], w[1]);
    let rising = lo.phi < psi;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo.theta + hi.theta);
        if mid <= lo.theta || mid >= hi.theta {
            break;
        }
        let phi = unwrap_near(rotation_angle(lambda, mid, k)?, lo.phi);
        let row = SweepRow { theta: mid, phi };
        if (phi < psi) == rising {
            lo = row;
        } else {
            hi = row;
        }
    }
    let best = if (lo.phi - psi).abs() <= (hi.phi - psi).abs() {
        lo
    } else {
        hi
    };
    if (best.phi - psi).abs() > SOLVE_TOL {
        return Err(Error::NumericalFailure(format!(
            "bisection stalled {:e} rad from the target",
            (best.phi - psi).abs()
        )));
    }
    Ok(best.theta)
}

/// Chooses the best-conditioned scheme that reaches `ψ` with `k` factors:
/// the smallest λ on the grid `1.25^m ≤ λ_budget` whose sweep attains `ψ`,
/// together with the solved θ.
pub fn plan_scheme(psi: f64, k: usize, lambda_budget: f64) -> Result<ChainParams> {
    if !psi.is_finite() || !(0.0..=PI).contains(&psi) {
        return Err(Error::InvalidParams(format!(
            "target angle must lie in [0, pi], got {psi}"
        )));
    }
    if !lambda_budget.is_finite() || lambda_budget < 1.0 {
        return Err(Error::InvalidParams(format!(
            "lambda budget must be >= 1, got {lambda_budget}"
        )));
    }
    ChainParams::new(1.0, 0.0, k)?;
    if psi == 0.0 {
        return ChainParams::new(1.0, 0.0, k);
    }
    let unreachable = || -> Result<ChainParams> {
        let max_achievable = if lambda_budget > 1.0 {
            max_reachable(lambda_budget, k)?
        } else {
            0.0
        };
        Err(Error::TargetUnreachable {
            target: psi,
            max_achievable,
        })
    };
    // four factors only approach a half turn as λ → ∞
    if k <= 4 && psi >= PI {
        return unreachable();
    }
    let mut m = 1;
    loop {
        let lambda = LAMBDA_GRID_RATIO.powi(m);
        if lambda > lambda_budget * (1.0 + 1e-12) {
            return unreachable();
        }
        if max_reachable(lambda, k)? >= psi {
            let theta = solve_theta(lambda, k, psi)?;
            return ChainParams::new(lambda, theta, k);
        }
        m += 1;
    }
}

/// Symmetric generator `A` with `e^{A t_fn} Σ₀ e^{A t_fn} = U_θ Σ₀ U_θᵀ`:
/// the gradient (irrotational) flow that reaches the same terminal
/// covariance as rotating `Σ₀` by θ.
pub fn gradient_generator(sigma0: &SpdMatrix, theta: f64, t_fn: f64) -> Result<SymMatrix> {
    if sigma0.n() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: sigma0.n(),
        });
    }
    if !t_fn.is_finite() || t_fn <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "duration must be positive, got {t_fn}"
        )));
    }
    if !theta.is_finite() {
        return Err(Error::InvalidParams("theta must be finite".into()));
    }
    let target = SpdMatrix::from_computed(&Rotation2::new(theta).conjugate(sigma0))?;
    let m = ot_map(sigma0, &target)?;
    Ok(spd_log(&m)?.scale(1.0 / t_fn))
}

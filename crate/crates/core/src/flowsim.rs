//! Piecewise-constant gradient flows realizing a factor chain.
//!
//! Each factor `M_i = e^{A_i Δ_i}` becomes a symmetric generator `A_i`.
//! Particles follow `ẋ = A x` (advanced by exact exponential substeps) and
//! the ensemble covariance follows `Σ' = AΣ + ΣAᵀ` (advanced by RK4).

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::matfun::{expm, spd_log, sym_exp};
use crate::matrix::{Matrix, SpdMatrix, SymMatrix};
use crate::planar::FactorChain;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowSegment {
    pub generator: SymMatrix,
    pub duration: f64,
}

impl FlowSegment {
    pub fn new(generator: SymMatrix, duration: f64) -> Result<Self> {
        if !duration.is_finite() || duration <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "segment duration must be positive, got {duration}"
            )));
        }
        Ok(FlowSegment {
            generator,
            duration,
        })
    }

    /// `e^{AΔ}`.
    pub fn endpoint_map(&self) -> Result<SpdMatrix> {
        sym_exp(&self.generator.scale(self.duration))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleCloud {
    n: usize,
    positions: Vec<Vec<f64>>,
    time: f64,
}

impl ParticleCloud {
    pub fn new(n: usize, positions: Vec<Vec<f64>>) -> Result<Self> {
        Self::at_time(n, positions, 0.0)
    }

    pub fn at_time(n: usize, positions: Vec<Vec<f64>>, time: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput(
                "particle dimension must be positive".into(),
            ));
        }
        if positions.is_empty() {
            return Err(Error::InvalidInput("particle cloud is empty".into()));
        }
        for (i, p) in positions.iter().enumerate() {
            if p.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "particle {i} has non-finite coordinates"
                )));
            }
        }
        if !time.is_finite() {
            return Err(Error::InvalidInput("time stamp must be finite".into()));
        }
        Ok(ParticleCloud { n, positions, time })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Population covariance about the sample mean (1/N normalization).
    pub fn sample_covariance(&self) -> Matrix {
        let n = self.n;
        let count = self.positions.len() as f64;
        let mut mean = vec![0.0; n];
        for p in &self.positions {
            mean.iter_mut().zip(p).for_each(|(m, x)| *m += x / count);
        }
        let mut c = Matrix::zeros(n);
        for p in &self.positions {
            for i in 0..n {
                for j in 0..n {
                    c[(i, j)] += (p[i] - mean[i]) * (p[j] - mean[j]) / count;
                }
            }
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `positions[s][p]` is particle `p` at sample `s`.
    pub positions: Vec<Vec<Vec<f64>>>,
    pub covariances: Vec<Matrix>,
    /// Sample index at which each segment ends.
    pub segment_ends: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_positions(&self) -> &[Vec<f64>] {
        self.positions.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn final_covariance(&self) -> &Matrix {
        self.covariances
            .last()
            .expect("trajectory has an initial sample")
    }
}

/// Generators `A_i = log(M_i)/Δ_i`.
pub fn segments_from_chain(c: &FactorChain, durations: &[f64]) -> Result<Vec<FlowSegment>> {
    if durations.len() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: c.len(),
            found: durations.len(),
        });
    }
    c.factors()
        .iter()
        .zip(durations)
        .map(|(m, &d)| {
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "segment duration must be positive, got {d}"
                )));
            }
            FlowSegment::new(spd_log(m)?.scale(1.0 / d), d)
        })
        .collect()
}

/// `e^{A_k Δ_k} ⋯ e^{A_1 Δ_1}`.
pub fn transition_matrix(segments: &[FlowSegment]) -> Result<Matrix> {
    let first = segments
        .first()
        .ok_or_else(|| Error::InvalidInput("no segments".into()))?;
    let mut p = Matrix::identity(first.generator.n());
    for s in segments {
        p = &*s.endpoint_map()? * &p;
    }
    Ok(p)
}

fn lyapunov_rhs(a: &Matrix, s: &Matrix) -> Matrix {
    let as_ = a * s;
    &as_ + &as_.transpose()
}

fn rk4_step(a: &Matrix, s: &Matrix, h: f64) -> Matrix {
    let k1 = lyapunov_rhs(a, s);
    let k2 = lyapunov_rhs(a, &(s + &k1.scale(0.5 * h)));
    let k3 = lyapunov_rhs(a, &(s + &k2.scale(0.5 * h)));
    let k4 = lyapunov_rhs(a, &(s + &k3.scale(h)));
    let incr = &(&(&k1 + &k2.scale(2.0)) + &k3.scale(2.0)) + &k4;
    SymMatrix::symmetrize(&(s + &incr.scale(h / 6.0))).into_matrix()
}

/// Simulates from the cloud's sample covariance, falling back to the
/// identity when the cloud is too small to have an SPD covariance.
pub fn simulate(segments: &[FlowSegment], cloud: &ParticleCloud, dt: f64) -> Result<Trajectory> {
    let sigma0 = SpdMatrix::from_computed(&cloud.sample_covariance())
        .unwrap_or_else(|_| SpdMatrix::identity(cloud.n()));
    simulate_with_covariance(segments, cloud, &sigma0, dt)
}

pub fn simulate_with_covariance(
    segments: &[FlowSegment],
    cloud: &ParticleCloud,
    sigma0: &SpdMatrix,
    dt: f64,
) -> Result<Trajectory> {
    if segments.is_empty() {
        return Err(Error::InvalidInput("no segments".into()));
    }
    let n = cloud.n();
    for s in segments {
        if s.generator.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: s.generator.n(),
            });
        }
    }
    if sigma0.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: sigma0.n(),
        });
    }
    let min_duration = segments
        .iter()
        .map(|s| s.duration)
        .fold(f64::INFINITY, f64::min);
    if !dt.is_finite() || dt <= 0.0 || dt > min_duration * (1.0 + 1e-12) {
        return Err(Error::InvalidStep(format!(
            "step must satisfy 0 < dt <= {min_duration}, got {dt}"
        )));
    }

    let mut t = cloud.time();
    let mut x: Vec<Vec<f64>> = cloud.positions().to_vec();
    let mut sigma = sigma0.matrix().clone();
    let mut traj = Trajectory {
        times: vec![t],
        positions: vec![x.clone()],
        covariances: vec![sigma.clone()],
        segment_ends: Vec::with_capacity(segments.len()),
    };

    for seg in segments {
        let a = seg.generator.matrix();
        let full = ((seg.duration / dt) * (1.0 + 1e-12)).floor() as usize;
        let rem = seg.duration - full as f64 * dt;
        let mut steps = vec![(dt, full)];
        if rem > 1e-9 * dt {
            steps.push((rem, 1));
        }
        let start = t;
        let mut elapsed = 0.0;
        let mut taken = 0usize;
        let total = full + usize::from(rem > 1e-9 * dt);
        for (h, count) in steps {
            let prop = expm(&a.scale(h))?;
            for _ in 0..count {
                for p in x.iter_mut() {
                    *p = prop.mul_vec(p);
                }
                sigma = rk4_step(a, &sigma, h);
                taken += 1;
                elapsed += h;
                t = if taken == total {
                    start + seg.duration
                } else {
                    start + elapsed
                };
                traj.times.push(t);
                traj.positions.push(x.clone());
                traj.covariances.push(sigma.clone());
            }
        }
        if !sigma.is_finite() {
            return Err(Error::NumericalFailure("covariance diverged".into()));
        }
        traj.segment_ends.push(traj.times.len() - 1);
    }
    Ok(traj)
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn index_label(i: usize, j: usize, n: usize) -> String {
    if n < 10 {
        format!("{}{}", i + 1, j + 1)
    } else {
        format!("{}_{}", i + 1, j + 1)
    }
}

/// Rows `t,particle_id,x1..xn`.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    let n = traj
        .positions
        .first()
        .and_then(|p| p.first())
        .map_or(0, Vec::len);
    let mut header = String::from("t,particle_id");
    for i in 1..=n {
        header.push_str(&format!(",x{i}"));
    }
    writeln!(w, "{header}")?;
    for (t, ps) in traj.times.iter().zip(&traj.positions) {
        for (id, p) in ps.iter().enumerate() {
            let coords: Vec<String> = p.iter().map(|&x| fmt_num(x)).collect();
            writeln!(w, "{},{},{}", fmt_num(*t), id, coords.join(","))?;
        }
    }
    Ok(())
}

/// Rows `t,sigma_11,sigma_12,…,sigma_nn` (full square, row-major).
pub fn write_covariance_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    let n = traj.covariances.first().map_or(0, Matrix::n);
    let mut header = String::from("t");
    for i in 0..n {
        for j in 0..n {
            header.push_str(&format!(",sigma_{}", index_label(i, j, n)));
        }
    }
    writeln!(w, "{header}")?;
    for (t, s) in traj.times.iter().zip(&traj.covariances) {
        let vals: Vec<String> = s.as_slice().iter().map(|&x| fmt_num(x)).collect();
        writeln!(w, "{},{}", fmt_num(*t), vals.join(","))?;
    }
    Ok(())
}

/// The three-factor example: `M₁ = diag(1/2, 2)`, `M₂ = [[2,1],[1,1]]` and
/// `M₃ = Σ₂^{-1/2}` with `Σ₂ = M₂M₁²M₂`, whose product is a rotation by
/// `atan(1/2)`.
pub fn intro_chain() -> FactorChain {
    let m1 = Matrix::from_diag(&[0.5, 2.0]);
    let m2 = Matrix::from_rows(&[[2.0, 1.0], [1.0, 1.0]]);
    let sigma2 = &(&(&m2 * &m1) * &m1) * &m2;
    let m3 =
        crate::matfun::spd_inv_sqrt(&SpdMatrix::from_computed(&sigma2).expect("SPD")).expect("SPD");
    let factors = vec![
        SpdMatrix::new(m1).expect("SPD"),
        SpdMatrix::new(m2).expect("SPD"),
        m3,
    ];
    FactorChain::new(factors).expect("square factors")
}

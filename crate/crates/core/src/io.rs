//! File formats: JSON matrices and factor chains, CSV particle clouds and sweeps.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowsim::ParticleCloud;
use crate::matrix::{Matrix, SpdMatrix};
use crate::planar::{ChainParams, FactorChain, SweepTable};

/// `{"n": 2, "data": [row-major entries]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub n: usize,
    pub data: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainMeta {
    pub lambda: f64,
    pub theta_rad: f64,
    pub k: usize,
}

/// `{"n": 2, "factors": [[...], ...], "meta": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub n: usize,
    pub factors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<ChainMeta>,
}

fn parse_err(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

fn matrix_from_flat(n: usize, data: Vec<f64>, what: &str) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::Parse(format!("{what}: n must be positive")));
    }
    let expected = n
        .checked_mul(n)
        .ok_or_else(|| Error::Parse(format!("{what}: n = {n} is too large")))?;
    if data.len() != expected {
        return Err(Error::Parse(format!(
            "{what}: expected {expected} entries for n = {n}, found {}",
            data.len()
        )));
    }
    Matrix::from_row_major(n, data).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

impl MatrixFile {
    pub fn from_matrix(m: &Matrix) -> Self {
        MatrixFile {
            n: m.n(),
            data: m.as_slice().to_vec(),
        }
    }

    pub fn into_matrix(self) -> Result<Matrix> {
        matrix_from_flat(self.n, self.data, "matrix")
    }
}

impl ChainFile {
    pub fn from_chain(c: &FactorChain) -> Self {
        ChainFile {
            n: c.n(),
            factors: c.factors().iter().map(|f| f.as_slice().to_vec()).collect(),
            meta: c.params().map(|p| ChainMeta {
                lambda: p.lambda,
                theta_rad: p.theta,
                k: p.k,
            }),
        }
    }

    /// Every factor must pass SPD certification.
    pub fn into_chain(self) -> Result<FactorChain> {
        if self.factors.is_empty() {
            return Err(Error::Parse(
                "chain: at least one factor is required".into(),
            ));
        }
        let n = self.n;
        let factors = self
            .factors
            .into_iter()
            .enumerate()
            .map(|(i, data)| {
                let m = matrix_from_flat(n, data, &format!("factor {i}"))?;
                SpdMatrix::new(m).map_err(|e| Error::Parse(format!("factor {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let params = match self.meta {
            Some(m) => Some(
                ChainParams::new(m.lambda, m.theta_rad, m.k)
                    .map_err(|e| Error::Parse(format!("meta: {e}")))?,
            ),
            None => None,
        };
        Ok(FactorChain::new(factors)?.with_params(params))
    }
}

pub fn parse_matrix_json(text: &str) -> Result<Matrix> {
    serde_json::from_str::<MatrixFile>(text)
        .map_err(parse_err)?
        .into_matrix()
}

pub fn matrix_to_json(m: &Matrix) -> String {
    serde_json::to_string(&MatrixFile::from_matrix(m)).expect("finite matrix serializes")
}

pub fn parse_chain_json(text: &str) -> Result<FactorChain> {
    serde_json::from_str::<ChainFile>(text)
        .map_err(parse_err)?
        .into_chain()
}

pub fn chain_to_json(c: &FactorChain) -> String {
    serde_json::to_string_pretty(&ChainFile::from_chain(c)).expect("finite chain serializes")
}

/// Particle cloud from CSV with header `x1,…,xn`, one particle per row.
pub fn parse_particles_csv(text: &str) -> Result<ParticleCloud> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("particles: {e}")))?
        .clone();
    let n = headers.len();
    if n == 0 {
        return Err(Error::Parse("particles: empty header".into()));
    }
    for (i, h) in headers.iter().enumerate() {
        if h != format!("x{}", i + 1) {
            return Err(Error::Parse(format!(
                "particles: column {} must be named x{}, found {h:?}",
                i + 1,
                i + 1
            )));
        }
    }
    let mut positions = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("particles: {e}")))?;
        let p = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        Error::Parse(format!("particles: row {}: invalid number {f:?}", row + 1))
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        positions.push(p);
    }
    ParticleCloud::new(n, positions).map_err(|e| Error::Parse(format!("particles: {e}")))
}

/// Rows `theta_deg,lambda,phi_deg` for each table in turn.
pub fn write_sweep_csv<W: Write>(tables: &[SweepTable], mut w: W) -> io::Result<()> {
    writeln!(w, "theta_deg,lambda,phi_deg")?;
    for t in tables {
        for r in &t.rows {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e}",
                r.theta.to_degrees(),
                t.lambda,
                r.phi.to_degrees()
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planar::{build_chain, phi_sweep};

    #[test]
    fn matrix_round_trip() {
        let m = Matrix::from_rows(&[[0.1, -2.5e-300], [1.0 / 3.0, 7.0]]);
        let back = parse_matrix_json(&matrix_to_json(&m)).unwrap();
        assert_eq!(back.as_slice(), m.as_slice());
    }

    #[test]
    fn matrix_errors() {
        assert!(parse_matrix_json(r#"{"n": 2, "data": [1, 2, 3]}"#).is_err());
        assert!(parse_matrix_json(r#"{"n": 0, "data": []}"#).is_err());
        assert!(parse_matrix_json(r#"{"n": 1, "data": [1e999]}"#).is_err());
        assert!(parse_matrix_json(r#"{"n": 1, "data": [1], "x": 0}"#).is_err());
        assert!(parse_matrix_json(r#"{"n": 18446744073709551615, "data": []}"#).is_err());
        assert!(parse_matrix_json("nope").is_err());
    }

    #[test]
    fn chain_round_trip_is_bit_exact() {
        let c = build_chain(&ChainParams::new(30.0, 1.2, 5).unwrap()).unwrap();
        let back = parse_chain_json(&chain_to_json(&c)).unwrap();
        assert_eq!(back.factors(), c.factors());
        assert_eq!(back.params(), c.params());
    }

    #[test]
    fn chain_rejects_non_spd_factor() {
        let text = r#"{"n": 2, "factors": [[1, 2, 2, 1]]}"#;
        assert!(matches!(parse_chain_json(text), Err(Error::Parse(_))));
        assert!(parse_chain_json(r#"{"n": 2, "factors": []}"#).is_err());
        let ok = parse_chain_json(r#"{"n": 2, "factors": [[1, 0, 0, 1]]}"#).unwrap();
        assert_eq!(ok.len(), 1);
        assert!(ok.params().is_none());
    }

    #[test]
    fn particles() {
        let cloud = parse_particles_csv("x1,x2\n1,0\n0.5, -2\n").unwrap();
        assert_eq!(cloud.n(), 2);
        assert_eq!(cloud.positions()[1], vec![0.5, -2.0]);
        assert!(parse_particles_csv("x1,x3\n1,0\n").is_err());
        assert!(parse_particles_csv("x1,x2\n1\n").is_err());
        assert!(parse_particles_csv("x1,x2\n1,nan\n").is_err());
        assert!(parse_particles_csv("x1,x2\n").is_err());
        assert!(parse_particles_csv("").is_err());
    }

    #[test]
    fn sweep_csv() {
        let t = phi_sweep(1.0, 3, 1.0, 3).unwrap();
        let mut out = Vec::new();
        write_sweep_csv(&[t], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("theta_deg,lambda,phi_deg\n"));
    }
}

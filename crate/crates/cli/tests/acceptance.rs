//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use pdfactor::flowsim::intro_chain;
use pdfactor::matfun::{cond, sym_exp};
use pdfactor::planar::{gradient_generator, net_rotation_with_tol, rotation_angle, Rotation2};
use pdfactor::sampling::{self, random_positive_det, random_spd, random_special_orthogonal};
use pdfactor::*;
use rand::Rng;

const BIN: &str = env!("CARGO_BIN_EXE_pdfactor");

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn m2(rows: [[f64; 2]; 2]) -> Matrix {
    Matrix::from_rows(&rows)
}

fn rounded_half_turn() -> Vec<Matrix> {
    vec![
        m2([[5.48, 0.0], [0.0, 0.18]]),
        m2([[0.34, 0.92], [0.92, 5.50]]),
        m2([[4.33, -2.35], [-2.35, 1.50]]),
        m2([[3.32, 2.71], [2.71, 2.52]]),
        m2([[1.58, -2.34], [-2.34, 4.08]]),
    ]
}

fn mirrored(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    out[(0, 1)] = -out[(0, 1)];
    out[(1, 0)] = -out[(1, 0)];
    out
}

fn intro_example() -> Outcome {
    let printed = FactorChain::new(vec![
        SpdMatrix::new(m2([[0.5, 0.0], [0.0, 2.0]])).unwrap(),
        SpdMatrix::new(m2([[2.0, 1.0], [1.0, 1.0]])).unwrap(),
        SpdMatrix::new(m2([[1.5652, -1.3416], [-1.3416, 1.7889]])).unwrap(),
    ])
    .unwrap();
    let expect = m2([[0.8944, 0.4472], [-0.4472, 0.8944]]);
    let diff = printed.product().max_abs_diff(&expect);
    // the printed factors are rounded to four decimals
    let phi = net_rotation_with_tol(&printed, 1e-3).map(f64::to_degrees);
    let ok_phi = matches!(phi, Ok(p) if (p - 26.565).abs() <= 0.05);
    (
        diff <= 5e-4 && ok_phi,
        format!("max entry error {diff:.2e}, net rotation {phi:?} deg"),
    )
}

fn half_turn_chain() -> Result<(f64, FactorChain)> {
    let theta = solve_theta(30.0, 5, PI)?;
    Ok((theta, build_chain(&ChainParams::new(30.0, theta, 5)?)?))
}

fn half_turn_anchor() -> Outcome {
    let (theta, chain) = match half_turn_chain() {
        Ok(x) => x,
        Err(e) => return (false, format!("solve failed: {e}")),
    };
    let theta_deg = theta.to_degrees();
    let ok_theta = (theta_deg - 70.3).abs() <= 0.1;
    let rounded_factors = rounded_half_turn();
    let direct = chain
        .factors()
        .iter()
        .zip(&rounded_factors)
        .map(|(f, p)| f.max_abs_diff(p))
        .fold(0.0, f64::max);
    // same factors under the opposite rotation-sign convention
    let mirror = chain
        .factors()
        .iter()
        .zip(&rounded_factors)
        .map(|(f, p)| f.max_abs_diff(&mirrored(p)))
        .fold(0.0, f64::max);
    let ok_factors = direct.min(mirror) <= 0.01;
    let residual = chain.product().dist_frobenius(&(-&Matrix::identity(2)));
    let ok_product = residual <= 1e-10;
    (
        ok_theta && ok_factors && ok_product,
        format!(
            "theta = {theta_deg:.4} deg (want 70.3 +- 0.1), factor deviation {:.3} \
             (direct {direct:.3}, mirrored {mirror:.3}; want <= 0.01), \
             |product + I|_F = {residual:.2e}",
            direct.min(mirror)
        ),
    )
}

fn endpoint_conditioning() -> Outcome {
    let (_, chain) = match half_turn_chain() {
        Ok(x) => x,
        Err(e) => return (false, format!("solve failed: {e}")),
    };
    let conds: Vec<f64> = chain.factors().iter().map(|f| cond(f).unwrap()).collect();
    let ends = [conds[0], conds[4]];
    let ok_ends = ends.iter().all(|c| ((c - 30.0) / 30.0).abs() <= 1e-8);
    let middle = &conds[1..4];
    let ok_middle = middle.iter().all(|c| (25.0..=40.0).contains(c));
    (
        ok_ends && ok_middle,
        format!("endpoint cond {ends:?}, middle cond {middle:?}"),
    )
}

fn four_factor_limit() -> Outcome {
    let table = match phi_sweep(1e4, 4, PI / 2.0, 4000) {
        Ok(t) => t,
        Err(e) => return (false, format!("sweep failed: {e}")),
    };
    let max_deg = table.max_phi().to_degrees();
    let starts_at_zero = table.rows[0].phi == 0.0;
    let continuous = table
        .rows
        .windows(2)
        .all(|w| (w[1].phi - w[0].phi).abs() <= PI / 2.0);
    let flat = phi_sweep(1.0, 4, PI / 2.0, 200)
        .map(|t| t.rows.iter().all(|r| r.phi == 0.0))
        .unwrap_or(false);
    let mut odd_err: f64 = 0.0;
    for &lambda in &[3.0, 30.0] {
        for k in 3..=5 {
            for i in 1..=20 {
                let th = i as f64 * 0.075;
                let plus = rotation_angle(lambda, th, k).unwrap();
                let minus = rotation_angle(lambda, -th, k).unwrap();
                odd_err = odd_err.max((pdfactor::planar::unwrap_near(-minus, plus) - plus).abs());
            }
        }
    }
    (
        max_deg >= 175.0 && starts_at_zero && continuous && flat && odd_err <= 1e-9,
        format!(
            "max phi_4(., 1e4) = {max_deg:.3} deg, phi(0) = 0: {starts_at_zero}, \
             continuous: {continuous}, lambda = 1 flat: {flat}, odd-symmetry error {odd_err:.1e}"
        ),
    )
}

fn general_factorization() -> Outcome {
    let mut rng = sampling::rng_for(5);
    let opts = FactorOptions::default();
    let (mut worst_res, mut most_factors, mut worst_sym) = (0.0f64, 0usize, 0.0f64);
    let mut min_eig = f64::INFINITY;
    let mut failures = 0;
    for _ in 0..500 {
        let n = rng.gen_range(2..=8);
        let phi = random_positive_det(&mut rng, n);
        let chain = match factor_matrix(&phi, &opts) {
            Ok(c) => c,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let r = verify(&chain, &phi, 1e-8).unwrap();
        worst_res = worst_res.max(r.residual);
        most_factors = most_factors.max(r.factor_count);
        for f in &r.factors {
            worst_sym = worst_sym.max(f.symmetry_defect);
            min_eig = min_eig.min(f.min_eigenvalue);
        }
    }
    (
        failures == 0
            && worst_res <= 1e-8
            && most_factors <= 6
            && min_eig > 0.0
            && worst_sym <= 1e-12,
        format!(
            "{failures} errors, worst residual {worst_res:.2e}, most factors {most_factors}, \
             smallest eigenvalue {min_eig:.2e}, worst symmetry defect {worst_sym:.1e}"
        ),
    )
}

fn gradient_generator_check() -> Outcome {
    let mut rng = sampling::rng_for(6);
    let (mut worst, mut worst_trace) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let s0 = random_spd(&mut rng, 2, 100.0);
        let theta = rng.gen_range(-PI..PI);
        let t_fn = rng.gen_range(0.5..2.0);
        let a = match gradient_generator(&s0, theta, t_fn) {
            Ok(a) => a,
            Err(e) => return (false, format!("generator failed: {e}")),
        };
        let e = sym_exp(&a.scale(t_fn)).unwrap();
        let lhs = &(&*e * &s0) * &e;
        let rhs = Rotation2::new(theta).conjugate(&s0);
        worst = worst.max(lhs.dist_frobenius(&rhs) / (1.0 + s0.frobenius_norm()));
        worst_trace = worst_trace.max(a.trace().abs());
    }
    (
        worst <= 1e-10 && worst_trace <= 1e-12,
        format!("worst scaled mismatch {worst:.2e}, worst |trace| {worst_trace:.1e}"),
    )
}

fn segment_end_errors(dt: f64) -> (f64, f64) {
    let segs = segments_from_chain(&intro_chain(), &[1.0, 1.0, 1.0]).unwrap();
    let cloud = ParticleCloud::new(2, vec![vec![1.0, 0.0]]).unwrap();
    let sigma0 = SpdMatrix::identity(2);
    let traj = simulate_with_covariance(&segs, &cloud, &sigma0, dt).unwrap();
    let mut exact = sigma0.matrix().clone();
    let mut err: f64 = 0.0;
    for (seg, &idx) in segs.iter().zip(&traj.segment_ends) {
        let m = seg.endpoint_map().unwrap();
        exact = &(&*m * &exact) * &*m;
        err = err.max(traj.covariances[idx].dist_frobenius(&exact));
    }
    let det0 = sigma0.det();
    let drift = traj
        .covariances
        .iter()
        .map(|c| ((c.det() - det0) / det0).abs())
        .fold(0.0, f64::max);
    (err, drift)
}

fn flow_simulation() -> Outcome {
    let (coarse, _) = segment_end_errors(1e-2);
    let (fine, drift) = segment_end_errors(1e-3);
    let order = (coarse / fine).log10();
    (
        fine <= 1e-6 && drift <= 1e-6 && order >= 3.7,
        format!(
            "segment-end error {fine:.2e} at dt=1e-3 ({coarse:.2e} at 1e-2), observed order {order:.2}, \
             det drift {drift:.1e}"
        ),
    )
}

fn transport_oracle() -> Outcome {
    let mut rng = sampling::rng_for(8);
    let (mut res, mut inv, mut cong) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let n = rng.gen_range(1..=10);
        let a = random_spd(&mut rng, n, 1e4);
        let b = random_spd(&mut rng, n, 1e4);
        let m = ot_map(&a, &b).unwrap();
        res = res.max(ot_residual(&m, &a, &b).unwrap() / (1.0 + b.frobenius_norm()));

        let back = ot_map(&b, &a).unwrap();
        let m_inv = m.inverse().unwrap();
        inv = inv.max(back.dist_frobenius(&m_inv) / (1.0 + m_inv.frobenius_norm()));

        let q = random_special_orthogonal(&mut rng, n);
        let qt = q.transpose();
        let qa = SpdMatrix::from_computed(&(&(&q * &a) * &qt)).unwrap();
        let qb = SpdMatrix::from_computed(&(&(&q * &b) * &qt)).unwrap();
        let qm = ot_map(&qa, &qb).unwrap();
        let expect = &(&q * &m) * &qt;
        cong = cong.max(qm.dist_frobenius(&expect) / (1.0 + m.frobenius_norm()));
    }
    (
        res <= 1e-9 && inv <= 1e-9 && cong <= 1e-9,
        format!(
            "worst scaled residual {res:.2e}, inverse symmetry {inv:.2e}, congruence {cong:.2e}"
        ),
    )
}

fn block_round_trip() -> Outcome {
    let mut rng = sampling::rng_for(9);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(2..=12);
        let v = random_special_orthogonal(&mut rng, n);
        match block_diagonalize(&v) {
            Ok(d) => worst = worst.max(assemble(&d).dist_frobenius(&v)),
            Err(e) => return (false, format!("decomposition failed: {e}")),
        }
    }
    let mut half_turns = true;
    for n in (2..=12).step_by(2) {
        let d = block_diagonalize(&(-&Matrix::identity(n))).unwrap();
        half_turns &= d.blocks.len() == n / 2
            && d.blocks
                .iter()
                .all(|b| matches!(b, BlockSpec::Rotation { theta, .. } if *theta == PI));
    }
    (
        worst <= 1e-9 && half_turns,
        format!("worst reassembly error {worst:.2e}, -I gives n/2 half turns: {half_turns}"),
    )
}

fn cli_contract() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let write = |name: &str, text: &str| {
        std::fs::write(dir.path().join(name), text).unwrap();
        path(name)
    };
    let run = |args: &[&str]| {
        let o = Command::new(BIN).args(args).output().unwrap();
        (
            o.status.code().unwrap_or(-1),
            String::from_utf8_lossy(&o.stdout).into_owned(),
        )
    };

    let minus = write("minus.json", r#"{"n": 2, "data": [-1, 0, 0, -1]}"#);
    let general = write(
        "general.json",
        r#"{"n": 3, "data": [0, -2, 0.5, 1, 0.3, 0, 0.2, 0, 1.5]}"#,
    );
    let reflect = write("reflect.json", r#"{"n": 2, "data": [1, 0, 0, -1]}"#);
    let chain = path("chain.json");
    let chain3 = path("chain3.json");

    let (c0, _) = run(&["factor", &minus, "-o", &chain]);
    let (c1, _) = run(&["factor", &reflect, "-o", &path("r.json")]);
    let (c2, _) = run(&["factor", &minus, "-o", &path("u.json"), "--factors", "4"]);
    let rounded = rounded_half_turn()
        .iter()
        .map(|m| format!("{:?}", m.as_slice()))
        .collect::<Vec<_>>()
        .join(",");
    let rounded = write(
        "rounded.json",
        &format!(r#"{{"n": 2, "factors": [{rounded}]}}"#),
    );
    let (c3, _) = run(&["verify", "--chain", &rounded, "--target", &minus]);
    let codes_ok = (c0, c1, c2, c3) == (0, 1, 2, 3);

    let (f3, _) = run(&["factor", &general, "-o", &chain3]);
    let (v3, _) = run(&["verify", "--chain", &chain3, "--target", &general]);
    let (v2, _) = run(&["verify", "--chain", &chain, "--target", &minus]);
    let round_trip = (f3, v3, v2) == (0, 0, 0);

    let (cs, csv) = run(&[
        "sweep",
        "--k",
        "5",
        "--lambda",
        "30",
        "--theta-max",
        "90",
        "--steps",
        "900",
    ]);
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[0], f[2])
        })
        .collect();
    let near = rows
        .iter()
        .any(|&(t, p)| (t - 70.3).abs() <= 0.2 && (p - 180.0).abs() <= 0.2);
    let crossing = rows
        .windows(2)
        .find(|w| w[0].1 < 180.0 && w[1].1 >= 180.0)
        .map(|w| w[0].0 + (180.0 - w[0].1) * (w[1].0 - w[0].0) / (w[1].1 - w[0].1));
    let at_70_3 = rows
        .iter()
        .min_by(|a, b| (a.0 - 70.3).abs().total_cmp(&(b.0 - 70.3).abs()))
        .map(|r| r.1);
    (
        codes_ok && round_trip && cs == 0 && near,
        format!(
            "exit codes {:?} (want 0,1,2,3), factor->verify round trip {round_trip}, \
             180 deg crossing at theta = {crossing:.3?} deg, phi near 70.3 deg = {at_70_3:.3?} \
             (want within 0.2 of 180)",
            (c0, c1, c2, c3)
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("intro example regression", intro_example),
        ("-I anchor", half_turn_anchor),
        ("endpoint conditioning", endpoint_conditioning),
        ("k=4 limit", four_factor_limit),
        ("general factorization soundness", general_factorization),
        ("gradient generator", gradient_generator_check),
        ("flow simulation", flow_simulation),
        ("OT map oracle equivalence", transport_oracle),
        ("block diagonalization round trip", block_round_trip),
        ("CLI contract", cli_contract),
    ];
    println!("seed {}", sampling::seed());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = check();
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} [{:.1}s] {}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            name,
            start.elapsed().as_secs_f64(),
            detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

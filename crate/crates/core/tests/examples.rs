use std::f64::consts::PI;

use pdfactor::flowsim::intro_chain;
use pdfactor::io::{chain_to_json, parse_chain_json};
use pdfactor::planar::net_rotation_with_tol;
use pdfactor::*;

fn minus_identity() -> Matrix {
    -&Matrix::identity(2)
}

#[test]
fn intro_chain_rotates_by_atan_half() {
    let c = intro_chain();
    let phi = net_rotation(&c).unwrap();
    assert!((phi - 0.5f64.atan()).abs() < 1e-12);
    let m3 = Matrix::from_rows(&[[1.5652, -1.3416], [-1.3416, 1.7889]]);
    assert!(c.factors()[2].max_abs_diff(&m3) < 1e-4);
}

#[test]
fn printed_intro_factor_needs_loose_tolerance() {
    let printed = FactorChain::new(vec![
        SpdMatrix::new(Matrix::from_diag(&[0.5, 2.0])).unwrap(),
        SpdMatrix::new(Matrix::from_rows(&[[2.0, 1.0], [1.0, 1.0]])).unwrap(),
        SpdMatrix::new(Matrix::from_rows(&[[1.5652, -1.3416], [-1.3416, 1.7889]])).unwrap(),
    ])
    .unwrap();
    assert!(matches!(
        net_rotation(&printed),
        Err(Error::NotARotation { .. })
    ));
    let phi = net_rotation_with_tol(&printed, 1e-3).unwrap();
    assert!((phi.to_degrees() - 26.565).abs() < 0.05);
}

#[test]
fn half_turn_solved_chain() {
    let theta = solve_theta(30.0, 5, PI).unwrap();
    let c = build_chain(&ChainParams::new(30.0, theta, 5).unwrap()).unwrap();
    assert!(c.product().dist_frobenius(&minus_identity()) <= 1e-10);
}

#[test]
fn factor_then_verify_through_json() {
    let phi = Matrix::from_rows(&[[0.0, -2.0, 0.5], [1.0, 0.3, 0.0], [0.2, 0.0, 1.5]]);
    assert!(phi.det() > 0.0);
    let c = factor_matrix(&phi, &FactorOptions::default()).unwrap();
    let back = parse_chain_json(&chain_to_json(&c)).unwrap();
    assert!(verify(&back, &phi, 1e-8).unwrap().pass);
}

#[test]
fn even_minus_identity_splits_into_half_turns() {
    for n in [2, 4, 6] {
        let d = block_diagonalize(&(-&Matrix::identity(n))).unwrap();
        assert_eq!(d.blocks.len(), n / 2);
        for b in &d.blocks {
            assert!(matches!(b, BlockSpec::Rotation { theta, .. } if *theta == PI));
        }
    }
}

#[test]
fn minus_identity_flow_reaches_antipode() {
    let c = factor_matrix(&minus_identity(), &FactorOptions::default()).unwrap();
    let segs = segments_from_chain(&c, &vec![1.0; c.len()]).unwrap();
    let cloud = ParticleCloud::new(2, vec![vec![1.0, 1.0]]).unwrap();
    let traj = simulate(&segs, &cloud, 1e-2).unwrap();
    let end = &traj.final_positions()[0];
    assert!((end[0] + 1.0).abs() < 1e-6 && (end[1] + 1.0).abs() < 1e-6);
    assert!(
        transition_matrix(&segs)
            .unwrap()
            .dist_frobenius(&minus_identity())
            < 1e-8
    );
}

#[test]
fn positions_at_segment_ends_follow_partial_products() {
    let c = factor_matrix(
        &Matrix::from_rows(&[[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 2.0]]),
        &FactorOptions::default(),
    )
    .unwrap();
    let segs = segments_from_chain(&c, &vec![0.5; c.len()]).unwrap();
    let x0 = vec![0.3, -1.2, 0.7];
    let cloud = ParticleCloud::new(3, vec![x0.clone()]).unwrap();
    let traj = simulate(&segs, &cloud, 0.01).unwrap();
    let mut partial = Matrix::identity(3);
    for (f, &idx) in c.factors().iter().zip(&traj.segment_ends) {
        partial = &**f * &partial;
        let expect = partial.mul_vec(&x0);
        let got = &traj.positions[idx][0];
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

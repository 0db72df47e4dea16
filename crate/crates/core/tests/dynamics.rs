mod common;

use common::{c, max_front_speed, small_spec};
use ptssh_core::dynamics::{
    front_speed, initial_state, propagate_expm, propagate_spectral, reflection_signal, run_quench, run_quenches,
    time_grid, DynamicsError, LightCone, QuenchProtocol,
};
use ptssh_core::exec::Execution;
use ptssh_core::lattice::{build_hamiltonian, HybridChainSpec};
use ptssh_core::linalg::{norm2, ComplexMatrix, C64};
use ptssh_core::spectral::{decompose, Side};

fn max_deviation(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).norm()))
        .fold(0.0, f64::max)
}

fn small_protocol(post: HybridChainSpec, side: Side) -> QuenchProtocol {
    QuenchProtocol::new(post.with_v(0.1), post, side)
}

fn plain_reference(side: Side) -> QuenchProtocol {
    QuenchProtocol::new(
        HybridChainSpec::reference(0.1).plain(),
        HybridChainSpec::reference(0.5).plain(),
        side,
    )
}

#[test]
fn hermitian_evolution_is_unitary() {
    let post = small_spec(0.5).plain();
    let psi0 = initial_state(&small_protocol(post, Side::Left)).unwrap();
    let h = build_hamiltonian(&post).unwrap();
    let states = propagate_expm(&h, &psi0, &time_grid(200.0, 400)).unwrap();
    for psi in &states {
        assert!((norm2(psi) - 1.0).abs() < 1e-10);
    }
}

#[test]
fn single_site_gain_and_loss() {
    let h = ComplexMatrix::from_rows(&[vec![c(-0.3, -0.1), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-0.3, 0.1)]]).unwrap();
    let times = time_grid(20.0, 40);
    let states = propagate_expm(&h, &[c(1.0, 0.0), c(0.0, 0.0)], &times).unwrap();
    for (t, psi) in times.iter().zip(&states) {
        let want = (-0.2 * t).exp();
        assert!((psi[0].norm_sqr() - want).abs() < 1e-12 * want.max(1.0), "t = {t}");
        assert_eq!(psi[1], c(0.0, 0.0));
    }
}

#[test]
fn propagators_agree_on_small_chains() {
    let times = time_grid(50.0, 100);
    for post in [
        small_spec(0.5),
        small_spec(0.5).plain(),
        small_spec(0.7),
        small_spec(0.25),
    ] {
        let psi0 = initial_state(&small_protocol(post, Side::Right)).unwrap();
        let h = build_hamiltonian(&post).unwrap();
        let dec = decompose(&h, true).unwrap();
        let a = propagate_expm(&h, &psi0, &times).unwrap();
        let b = propagate_spectral(&dec, &psi0, &times).unwrap();
        let tol = if post.u_im == 0.0 { 1e-10 } else { 1e-6 };
        let dev = max_deviation(&a, &b);
        assert!(dev < tol, "v = {}, u_im = {}: {dev:e}", post.v, post.u_im);
        assert!(max_deviation(&a[..1], std::slice::from_ref(&psi0)) == 0.0);
        assert!(max_deviation(&b[..1], &[psi0]) < 1e-10);
    }
}

#[test]
fn spectral_expansion_refuses_defective_input() {
    let h = build_hamiltonian(&small_spec(0.5)).unwrap();
    let mut dec = decompose(&h, true).unwrap();
    dec.defective.push(3);
    let psi0 = initial_state(&small_protocol(small_spec(0.5), Side::Left)).unwrap();
    assert!(matches!(
        propagate_spectral(&dec, &psi0, &time_grid(1.0, 2)),
        Err(DynamicsError::Defective(1))
    ));
    dec.left_eigenvectors = None;
    assert!(matches!(
        propagate_spectral(&dec, &psi0, &time_grid(1.0, 2)),
        Err(DynamicsError::MissingLeft)
    ));
}

#[test]
fn light_cone_invariants() {
    let protocol = small_protocol(small_spec(0.5), Side::Left);
    let cone = run_quench(&protocol).unwrap();
    let psi0 = initial_state(&protocol).unwrap();
    assert_eq!(cone.times.len(), protocol.n_time_steps + 1);
    assert!((cone.norm_series[0] - 1.0).abs() < 1e-12);
    for (p, z) in cone.density[0].iter().zip(&psi0) {
        assert!((p - z.norm_sqr()).abs() < 1e-12);
    }
    assert!(cone.density.iter().flatten().all(|&p| p >= 0.0));
}

#[test]
fn hermitian_quench_conserves_norm() {
    let cone = run_quench(&plain_reference(Side::Left)).unwrap();
    assert!(cone.norm_series.iter().all(|n| (n - 1.0).abs() < 1e-10));
}

fn assert_mirrored(left: &LightCone, right: &LightCone) {
    let n = left.n_sites();
    for (a, b) in left.density.iter().zip(&right.density) {
        for s in 0..n {
            assert!((a[s] - b[n - 1 - s]).abs() < 1e-10);
        }
    }
}

#[test]
fn plain_quench_is_mirror_symmetric() {
    let left = run_quench(&plain_reference(Side::Left)).unwrap();
    let right = run_quench(&plain_reference(Side::Right)).unwrap();
    assert_mirrored(&left, &right);
}

#[test]
fn real_centered_region_is_mirror_symmetric() {
    let post = HybridChainSpec {
        u_im: 0.0,
        ..small_spec(0.5)
    };
    let cones = run_quenches(
        &[small_protocol(post, Side::Left), small_protocol(post, Side::Right)],
        Execution::default(),
    );
    assert_mirrored(cones[0].as_ref().unwrap(), cones[1].as_ref().unwrap());
}

#[test]
fn halving_the_step_leaves_the_final_density() {
    let post = small_spec(0.5);
    let psi0 = initial_state(&small_protocol(post, Side::Right)).unwrap();
    let h = build_hamiltonian(&post).unwrap();
    let coarse = propagate_expm(&h, &psi0, &time_grid(60.0, 120)).unwrap();
    let fine = propagate_expm(&h, &psi0, &time_grid(60.0, 240)).unwrap();
    let (a, b) = (coarse.last().unwrap(), fine.last().unwrap());
    let dev = a
        .iter()
        .zip(b)
        .map(|(p, q)| (p.norm_sqr() - q.norm_sqr()).abs())
        .fold(0.0, f64::max);
    assert!(dev < 1e-8, "{dev:e}");
}

#[test]
fn front_speed_matches_dispersion() {
    let oracle = max_front_speed(0.5, 0.4);
    assert!((oracle - 0.8).abs() < 1e-9);
    let left = front_speed(&run_quench(&plain_reference(Side::Left)).unwrap()).unwrap();
    let right = front_speed(&run_quench(&plain_reference(Side::Right)).unwrap()).unwrap();
    assert!((left - oracle).abs() < 0.1 * oracle, "left {left}");
    assert!((right - oracle).abs() < 0.1 * oracle, "right {right}");
    assert!((left - right).abs() < 0.05 * left.max(right));
}

#[test]
fn disconnected_dimers_do_not_transport() {
    let post = HybridChainSpec {
        w: 0.0,
        ..small_spec(0.5).plain()
    };
    let protocol = QuenchProtocol::new(post, post, Side::Left);
    let mut psi0 = vec![c(0.0, 0.0); 40];
    psi0[0] = c(1.0, 0.0);
    let h = build_hamiltonian(&post).unwrap();
    let times = protocol.times();
    let density: Vec<Vec<f64>> = propagate_expm(&h, &psi0, &times)
        .unwrap()
        .iter()
        .map(|psi| psi.iter().map(|z| z.norm_sqr()).collect())
        .collect();
    let cone = LightCone {
        norm_series: density.iter().map(|r| r.iter().sum()).collect(),
        times,
        density,
        protocol,
    };
    assert!(matches!(front_speed(&cone), Err(DynamicsError::FitWindow(_))));
}

#[test]
fn missing_quench_is_non_transporting() {
    let spec = HybridChainSpec::reference(0.1);
    let cone = run_quench(&QuenchProtocol::new(spec, spec, Side::Left)).unwrap();
    assert!(matches!(
        reflection_signal(&cone, 1),
        Err(DynamicsError::NonTransporting(1))
    ));
}

#[test]
fn reflection_signal_bounds() {
    let protocol = small_protocol(small_spec(0.5), Side::Left);
    let cone = run_quench(&protocol).unwrap();
    let sig = reflection_signal(&cone, 1).unwrap();
    let peak = sig.series.iter().map(|p| p.1).fold(0.0, f64::max);
    assert!(sig.reemergence_peak <= peak);
    assert!(0.0 <= sig.dip_interval.0 && sig.dip_interval.0 <= sig.dip_interval.1);
    assert!(sig.dip_interval.1 <= protocol.t_max);
    assert!(matches!(
        reflection_signal(&cone, 41),
        Err(DynamicsError::SiteOutOfRange { .. })
    ));
}

#[test]
fn pre_quench_must_host_the_edge_state() {
    let post = HybridChainSpec::reference(0.6);
    let protocol = QuenchProtocol::new(post, post.with_v(0.5), Side::Left);
    assert!(matches!(run_quench(&protocol), Err(DynamicsError::NoEdgeState { .. })));
}

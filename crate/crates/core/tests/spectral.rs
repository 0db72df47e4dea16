mod common;

use common::{c, chain_tridiagonal, match_distance, small_spec, tridiagonal_eigenvalues};
use ptssh_core::exec::Execution;
use ptssh_core::lattice::{build_hamiltonian, HybridChainSpec};
use ptssh_core::linalg::{norm2, ComplexMatrix, C64};
use ptssh_core::spectral::{
    band_sweep, band_sweep_with, decompose, decompose_spec, edge_overlap, edge_overlap_with, find_edge_states,
    linear_grid, EdgeCriteria, EdgeSide, Side, SpectralDecomposition, SpectralError,
};

fn conjugation_gap(values: &[C64]) -> f64 {
    let conj: Vec<C64> = values.iter().map(|e| e.conj()).collect();
    match_distance(values, &conj)
}

fn max_residual(h: &ComplexMatrix, dec: &SpectralDecomposition) -> f64 {
    dec.eigenvalues
        .iter()
        .zip(&dec.right_eigenvectors)
        .map(|(e, psi)| {
            let r: Vec<C64> = h.matvec(psi).iter().zip(psi).map(|(a, b)| a - e * b).collect();
            norm2(&r)
        })
        .fold(0.0, f64::max)
}

fn small_matrix() -> Vec<HybridChainSpec> {
    let mut specs = Vec::new();
    for v in [0.0, 0.1, 0.2, 0.3, 0.35, 0.4, 0.45, 0.5, 0.8] {
        specs.push(small_spec(v));
        specs.push(small_spec(v).plain());
    }
    specs.push(HybridChainSpec {
        n_sites: 24,
        pt_first_site: 9,
        pt_last_site: 16,
        u_im: 0.25,
        ..small_spec(0.3)
    });
    specs
}

#[test]
fn agrees_with_characteristic_polynomial() {
    for spec in small_matrix() {
        let dec = decompose_spec(&spec, false).unwrap();
        let (diag, off) = chain_tridiagonal(&spec);
        let roots = tridiagonal_eigenvalues(&diag, &off);
        let gap = match_distance(&roots, &dec.eigenvalues);
        // near-degenerate edge pairs limit the oracle to about sqrt(eps)
        assert!(gap < 1e-7, "v = {}, u_im = {}: gap {gap:e}", spec.v, spec.u_im);
    }
}

#[test]
fn oracle_roots_are_conjugation_closed() {
    for spec in small_matrix() {
        let (diag, off) = chain_tridiagonal(&spec);
        let roots = tridiagonal_eigenvalues(&diag, &off);
        let dec = decompose_spec(&spec, false).unwrap();
        assert!(conjugation_gap(&dec.eigenvalues) < 1e-8, "v = {}", spec.v);
        assert!(conjugation_gap(&roots) < 1e-7, "v = {}", spec.v);
    }
}

#[test]
fn residuals_at_small_dimension() {
    for spec in small_matrix() {
        let h = build_hamiltonian(&spec).unwrap();
        let dec = decompose(&h, true).unwrap();
        assert!(max_residual(&h, &dec) <= 1e-9 * h.norm_fro());
        for (i, e) in dec.eigenvalues.windows(2).enumerate() {
            let ordered = e[0].re < e[1].re || (e[0].re == e[1].re && e[0].im <= e[1].im);
            assert!(ordered, "unsorted at {i}");
        }
    }
}

#[test]
fn reference_chain_two_zero_modes() {
    let spec = HybridChainSpec::reference(0.1);
    let h = build_hamiltonian(&spec).unwrap();
    let dec = decompose(&h, false).unwrap();
    assert_eq!(dec.eigenvalues.iter().filter(|e| e.norm() < 1e-6).count(), 2);
    assert!(max_residual(&h, &dec) <= 1e-9 * h.norm_fro());
    assert!(conjugation_gap(&dec.eigenvalues) < 1e-8);
}

#[test]
fn biorthonormal_away_from_exceptional_points() {
    for v in [0.2, 0.6] {
        let dec = decompose_spec(&small_spec(v), true).unwrap();
        assert!(dec.defective.is_empty());
        let left = dec.left_eigenvectors.as_ref().unwrap();
        for (f, l) in left.iter().enumerate() {
            for (g, r) in dec.right_eigenvectors.iter().enumerate() {
                let s: C64 = l.iter().zip(r).map(|(a, b)| a * b).sum();
                let want = if f == g { c(1.0, 0.0) } else { c(0.0, 0.0) };
                assert!((s - want).norm() < 1e-8, "v = {v}, ({f}, {g}): {s}");
            }
        }
    }
}

#[test]
fn two_site_and_dimerized() {
    let h = ComplexMatrix::from_rows(&[vec![c(0.0, 0.0), c(0.3, 0.0)], vec![c(0.3, 0.0), c(0.0, 0.0)]]).unwrap();
    let dec = decompose(&h, true).unwrap();
    assert!((dec.eigenvalues[0] - c(-0.3, 0.0)).norm() < 1e-14);
    assert!((dec.eigenvalues[1] - c(0.3, 0.0)).norm() < 1e-14);

    let spec = HybridChainSpec {
        n_sites: 4,
        v: 0.0,
        w: 0.7,
        u_re: 0.0,
        u_im: 0.0,
        pt_first_site: 1,
        pt_last_site: 2,
    };
    let dec = decompose_spec(&spec, false).unwrap();
    let want = [-0.7, 0.0, 0.0, 0.7];
    for (e, w) in dec.eigenvalues.iter().zip(want) {
        assert!((e - c(w, 0.0)).norm() < 1e-14);
    }
    let reports = find_edge_states(&dec, 1e-6, 1);
    assert_eq!(reports.len(), 2);
    assert_eq!((reports[0].side, reports[1].side), (EdgeSide::Left, EdgeSide::Right));
    for r in &reports {
        assert!((r.edge_weight - 1.0).abs() < 1e-12);
        assert!((r.ipr - 1.0).abs() < 1e-12);
    }
}

#[test]
fn edge_states_of_reference_chain() {
    let dec = decompose_spec(&HybridChainSpec::reference(0.1), false).unwrap();
    let reports = find_edge_states(&dec, 1e-6, 10);
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0].side, EdgeSide::Left);
    assert_eq!(reports[1].side, EdgeSide::Right);
    assert!(reports.iter().all(|r| r.edge_weight > 0.99));

    let after = decompose_spec(&HybridChainSpec::reference(0.5), false).unwrap();
    assert!(find_edge_states(&after, 1e-6, 10).is_empty());
}

#[test]
fn plain_chain_has_two_edge_states_and_chiral_spectrum() {
    for (n, v) in [(40, 0.1), (60, 0.25), (220, 0.3)] {
        let spec = HybridChainSpec {
            n_sites: n,
            ..small_spec(v).plain()
        };
        let dec = decompose_spec(&spec, false).unwrap();
        let flipped: Vec<C64> = dec.eigenvalues.iter().map(|e| -e).collect();
        assert!(match_distance(&dec.eigenvalues, &flipped) < 1e-9);
        let tol = if n == 40 { 1e-4 } else { 1e-6 };
        assert_eq!(find_edge_states(&dec, tol, 10).len(), 2, "n = {n}, v = {v}");
    }
}

#[test]
fn overlap_examples() {
    let overlap = |v: f64, criteria: &EdgeCriteria| {
        let spec = HybridChainSpec::reference(v);
        let hybrid = decompose_spec(&spec, false).unwrap();
        let plain = decompose_spec(&spec.plain(), false).unwrap();
        edge_overlap_with(&hybrid, &plain, Side::Left, criteria).unwrap()
    };
    let near = overlap(0.1, &EdgeCriteria::default());
    assert!(near > 0.99);
    // the v = 0.35 pair splits to about 1e-6, past the default tolerance
    let wide = EdgeCriteria {
        energy_tol: 1e-5,
        ..EdgeCriteria::default()
    };
    let far = overlap(0.35, &wide);
    assert!(far < overlap(0.1, &wide), "{far}");
    assert!(far > 0.8, "{far}");
}

#[test]
fn overlap_is_symmetric_and_phase_blind() {
    let a = decompose_spec(&HybridChainSpec::reference(0.15), false).unwrap();
    let b = decompose_spec(&HybridChainSpec::reference(0.15).plain(), false).unwrap();
    for side in [Side::Left, Side::Right] {
        let ab = edge_overlap(&a, &b, side).unwrap();
        let ba = edge_overlap(&b, &a, side).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        let mut rotated = a.clone();
        let phase = C64::from_polar(1.0, 1.234);
        rotated
            .right_eigenvectors
            .iter_mut()
            .for_each(|psi| psi.iter_mut().for_each(|x| *x *= phase));
        assert!((edge_overlap(&rotated, &b, side).unwrap() - ab).abs() < 1e-12);
        assert!((edge_overlap(&a, &a, side).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn overlap_without_edge_state_names_side() {
    let a = decompose_spec(&HybridChainSpec::reference(0.6), false).unwrap();
    let b = decompose_spec(&HybridChainSpec::reference(0.1), false).unwrap();
    match edge_overlap(&a, &b, Side::Right) {
        Err(SpectralError::MissingEdgeState(side)) => assert_eq!(side, Side::Right),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn hermitian_sweep_is_real_and_sorted() {
    let base = small_spec(0.0);
    let hermitian = HybridChainSpec { u_im: 0.0, ..base };
    let mut grid = linear_grid(0.0, 0.8, 0.05);
    grid.reverse();
    let table = band_sweep(&hermitian, &grid).unwrap();
    assert!(table.rows.windows(2).all(|r| r[0].v < r[1].v));
    for row in &table.rows {
        assert_eq!(row.eigenvalues.len(), 40);
        assert!(row.max_abs_im() < 1e-10, "v = {}", row.v);
    }
}

#[test]
fn sweep_is_identical_in_both_modes() {
    let grid = linear_grid(0.0, 0.8, 0.1);
    let seq = band_sweep_with(&small_spec(0.0), &grid, Execution::Sequential).unwrap();
    let par = band_sweep_with(&small_spec(0.0), &grid, Execution::default()).unwrap();
    for (a, b) in seq.rows.iter().zip(&par.rows) {
        assert_eq!(a.v, b.v);
        assert_eq!(a.eigenvalues, b.eigenvalues);
    }
}

#[test]
fn sweep_error_names_the_offending_v() {
    match band_sweep(&small_spec(0.0), &[0.1, f64::NAN]) {
        Err(e) => assert!(matches!(
            e,
            SpectralError::NonFiniteParameter(_) | SpectralError::Sweep { .. }
        )),
        Ok(_) => panic!("NaN accepted"),
    }
}

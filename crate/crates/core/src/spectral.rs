//! Complex spectrum, edge-state detection and band sweeps of the hybrid chain.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::lattice::{build_hamiltonian, HybridChainSpec, LatticeError};
use crate::linalg::{
    dot, eigen_decompose, fix_phase, hermitian_eigen, norm2, normalize, ComplexMatrix, LinalgError, C64,
};

/// Residual bound relative to the Frobenius norm of the matrix.
pub const RESIDUAL_RTOL: f64 = 1e-9;
pub const DEFAULT_ENERGY_TOL: f64 = 1e-6;
pub const DEFAULT_N_EDGE: usize = 10;
pub const DEFAULT_DELOCALIZED_BELOW: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("matrix dimension must be at least 2, got {0}")]
    TooSmall(usize),
    #[error("eigenpair {index} residual {residual:e} exceeds bound {bound:e}")]
    Residual { index: usize, residual: f64, bound: f64 },
    #[error("no edge state on the {0} side")]
    MissingEdgeState(Side),
    #[error("decompositions have different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("band sweep needs at least one v value")]
    EmptySweep,
    #[error("v = {0} is not finite")]
    NonFiniteParameter(f64),
    #[error("band sweep failed at v = {v}: {source}")]
    Sweep {
        v: f64,
        #[source]
        source: Box<SpectralError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn mirrored(self) -> Self {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeSide {
    Left,
    Right,
    Delocalized,
}

impl EdgeSide {
    fn rank(self) -> u8 {
        match self {
            EdgeSide::Left => 0,
            EdgeSide::Right => 1,
            EdgeSide::Delocalized => 2,
        }
    }
}

/// Eigenvalues sorted by (Re, Im) with unit right eigenvectors whose
/// largest component is real-positive. Left eigenvectors, when requested,
/// are row vectors paired with the right ones through the bilinear sum
/// `sum_i left[f][i] * right[g][i] = delta_fg`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<C64>,
    pub right_eigenvectors: Vec<Vec<C64>>,
    pub left_eigenvectors: Option<Vec<Vec<C64>>>,
    /// Pairs whose left/right overlap underflowed (near an exceptional
    /// point); their left vectors are not biorthonormalized.
    pub defective: Vec<usize>,
    /// Frobenius norm of the decomposed matrix.
    pub matrix_norm: f64,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn max_abs_im(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.im.abs()).fold(0.0, f64::max)
    }

    pub fn min_abs_re(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|e| e.re.abs())
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn decompose(h: &ComplexMatrix, with_left: bool) -> Result<SpectralDecomposition, SpectralError> {
    let n = h.dim();
    if n < 2 {
        return Err(SpectralError::TooSmall(n));
    }
    let raw = eigen_decompose(h, with_left)?;
    let norm = h.norm_fro();

    let bound = RESIDUAL_RTOL * norm;
    for (index, (value, vector)) in raw.values.iter().zip(&raw.right).enumerate() {
        let hv = h.matvec(vector);
        let residual = norm2(&hv.iter().zip(vector).map(|(a, b)| a - value * b).collect::<Vec<_>>());
        if residual > bound {
            return Err(SpectralError::Residual { index, residual, bound });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (raw.values[a], raw.values[b]);
        x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im))
    });
    let mut position = vec![0; n];
    for (new, &old) in order.iter().enumerate() {
        position[old] = new;
    }
    let mut defective: Vec<usize> = raw.defective.iter().map(|&i| position[i]).collect();
    defective.sort_unstable();

    Ok(SpectralDecomposition {
        eigenvalues: order.iter().map(|&i| raw.values[i]).collect(),
        right_eigenvectors: order.iter().map(|&i| raw.right[i].clone()).collect(),
        left_eigenvectors: raw.left.map(|left| order.iter().map(|&i| left[i].clone()).collect()),
        defective,
        matrix_norm: norm,
    })
}

/// Builds and decomposes the chain Hamiltonian.
pub fn decompose_spec(spec: &HybridChainSpec, with_left: bool) -> Result<SpectralDecomposition, SpectralError> {
    decompose(&build_hamiltonian(spec)?, with_left)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeCriteria {
    pub energy_tol: f64,
    pub n_edge: usize,
    /// Reports with edge weight below this are `Delocalized`.
    pub delocalized_below: f64,
}

impl Default for EdgeCriteria {
    fn default() -> Self {
        Self {
            energy_tol: DEFAULT_ENERGY_TOL,
            n_edge: DEFAULT_N_EDGE,
            delocalized_below: DEFAULT_DELOCALIZED_BELOW,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeStateReport {
    pub index: usize,
    pub energy: C64,
    pub side: EdgeSide,
    /// Probability in the outer `n_edge` sites at both ends.
    pub edge_weight: f64,
    pub ipr: f64,
    /// Unit-norm site amplitudes (site 1 first).
    #[serde(skip)]
    pub amplitudes: Vec<C64>,
}

fn window_weights(psi: &[C64], n_edge: usize) -> (f64, f64) {
    let n = psi.len();
    let m = n_edge.min(n / 2);
    let left = psi[..m].iter().map(|z| z.norm_sqr()).sum();
    let right = psi[n - m..].iter().map(|z| z.norm_sqr()).sum();
    (left, right)
}

fn ipr(psi: &[C64]) -> f64 {
    let p2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let p4: f64 = psi.iter().map(|z| z.norm_sqr().powi(2)).sum();
    p4 / (p2 * p2)
}

/// Orthonormal basis of the span of `vectors`, dropping dependent ones.
fn orthonormal_basis(vectors: &[&[C64]]) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for v in vectors {
        let mut x = v.to_vec();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &x);
                x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= c * bi);
            }
        }
        if normalize(&mut x) > 1e-8 {
            basis.push(x);
        }
    }
    basis
}

/// Rotates a set of (numerically) degenerate states into the basis that
/// diagonalizes the left-half projector, so that edge states living at
/// opposite ends come out separated. Returned in order of decreasing
/// left-half weight.
fn localize(vectors: &[&[C64]]) -> Result<Vec<Vec<C64>>, SpectralError> {
    let basis = orthonormal_basis(vectors);
    let k = basis.len();
    if k < 2 {
        return Ok(basis);
    }
    let half = basis[0].len() / 2;
    let proj = ComplexMatrix::from_fn(k, |a, b| {
        basis[a][..half]
            .iter()
            .zip(&basis[b][..half])
            .map(|(x, y)| x.conj() * y)
            .sum()
    });
    let (_, coeffs) = hermitian_eigen(&proj)?;
    Ok(coeffs
        .iter()
        .map(|u| {
            let mut v = vec![C64::new(0.0, 0.0); basis[0].len()];
            for (c, b) in u.iter().zip(&basis) {
                v.iter_mut().zip(b).for_each(|(vi, bi)| *vi += c * bi);
            }
            v
        })
        .collect())
}

fn degenerate_groups(dec: &SpectralDecomposition, candidates: &[usize]) -> Vec<Vec<usize>> {
    let tol = RESIDUAL_RTOL * dec.matrix_norm;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in candidates {
        let e = dec.eigenvalues[i];
        match groups
            .iter_mut()
            .find(|g| g.iter().any(|&j| (dec.eigenvalues[j] - e).norm() <= tol))
        {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups
}

fn make_report(index: usize, energy: C64, mut psi: Vec<C64>, criteria: &EdgeCriteria) -> EdgeStateReport {
    normalize(&mut psi);
    fix_phase(&mut psi);
    let (left, right) = window_weights(&psi, criteria.n_edge);
    let edge_weight = (left + right).clamp(0.0, 1.0);
    let side = if edge_weight < criteria.delocalized_below {
        EdgeSide::Delocalized
    } else if left >= right {
        EdgeSide::Left
    } else {
        EdgeSide::Right
    };
    EdgeStateReport {
        index,
        energy,
        side,
        edge_weight,
        ipr: ipr(&psi),
        amplitudes: psi,
    }
}

/// Near-zero-energy eigenstates classified by the end that holds them.
///
/// Eigenpairs whose energies agree to the residual tolerance span a
/// degenerate subspace in which the solver's basis is arbitrary; those are
/// rotated into maximally left/right-localized combinations first.
pub fn find_edge_states(dec: &SpectralDecomposition, energy_tol: f64, n_edge: usize) -> Vec<EdgeStateReport> {
    find_edge_states_with(
        dec,
        &EdgeCriteria {
            energy_tol,
            n_edge,
            ..EdgeCriteria::default()
        },
    )
}

pub fn find_edge_states_with(dec: &SpectralDecomposition, criteria: &EdgeCriteria) -> Vec<EdgeStateReport> {
    let candidates: Vec<usize> = (0..dec.dim())
        .filter(|&i| dec.eigenvalues[i].norm() < criteria.energy_tol)
        .collect();
    let mut reports = Vec::new();
    for group in degenerate_groups(dec, &candidates) {
        if group.len() == 1 {
            let i = group[0];
            reports.push(make_report(
                i,
                dec.eigenvalues[i],
                dec.right_eigenvectors[i].clone(),
                criteria,
            ));
            continue;
        }
        let vectors: Vec<&[C64]> = group.iter().map(|&i| dec.right_eigenvectors[i].as_slice()).collect();
        let energy = group.iter().map(|&i| dec.eigenvalues[i]).sum::<C64>() / group.len() as f64;
        let states = match localize(&vectors) {
            Ok(states) => states,
            Err(_) => vectors.iter().map(|v| v.to_vec()).collect(),
        };
        for psi in states {
            // attribute the combination to the eigenpair it overlaps most
            let index = *group
                .iter()
                .max_by(|&&a, &&b| {
                    dot(&dec.right_eigenvectors[a], &psi)
                        .norm()
                        .total_cmp(&dot(&dec.right_eigenvectors[b], &psi).norm())
                })
                .expect("group is non-empty");
            reports.push(make_report(index, energy, psi, criteria));
        }
    }
    reports.sort_by(|a, b| a.side.rank().cmp(&b.side.rank()).then(a.index.cmp(&b.index)));
    reports
}

/// The most `side`-localized unit vector in the span of the near-zero
/// eigenstates, if that vector is an edge state on `side`.
pub fn localized_edge_state(
    dec: &SpectralDecomposition,
    side: Side,
    criteria: &EdgeCriteria,
) -> Result<Vec<C64>, SpectralError> {
    let vectors: Vec<&[C64]> = (0..dec.dim())
        .filter(|&i| dec.eigenvalues[i].norm() < criteria.energy_tol)
        .map(|i| dec.right_eigenvectors[i].as_slice())
        .collect();
    let states = localize(&vectors)?;
    let psi = match side {
        Side::Left => states.first(),
        Side::Right => states.last(),
    }
    .ok_or(SpectralError::MissingEdgeState(side))?;
    let report = make_report(0, C64::new(0.0, 0.0), psi.clone(), criteria);
    let wanted = match side {
        Side::Left => EdgeSide::Left,
        Side::Right => EdgeSide::Right,
    };
    if report.side != wanted {
        return Err(SpectralError::MissingEdgeState(side));
    }
    Ok(report.amplitudes)
}

/// `|<psi_edge(a)|psi_edge(b)>|` for the edge states on `side`.
pub fn edge_overlap(
    dec_hybrid: &SpectralDecomposition,
    dec_plain: &SpectralDecomposition,
    side: Side,
) -> Result<f64, SpectralError> {
    edge_overlap_with(dec_hybrid, dec_plain, side, &EdgeCriteria::default())
}

pub fn edge_overlap_with(
    dec_hybrid: &SpectralDecomposition,
    dec_plain: &SpectralDecomposition,
    side: Side,
    criteria: &EdgeCriteria,
) -> Result<f64, SpectralError> {
    if dec_hybrid.dim() != dec_plain.dim() {
        return Err(SpectralError::DimensionMismatch(dec_hybrid.dim(), dec_plain.dim()));
    }
    let a = localized_edge_state(dec_hybrid, side, criteria)?;
    let b = localized_edge_state(dec_plain, side, criteria)?;
    Ok(dot(&a, &b).norm().min(1.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandRow {
    pub v: f64,
    pub eigenvalues: Vec<C64>,
}

impl BandRow {
    pub fn min_abs_re(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|e| e.re.abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_im(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.im.abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandSweepTable {
    /// The chain with its `v` ignored; every other parameter is fixed.
    pub base: HybridChainSpec,
    pub rows: Vec<BandRow>,
}

pub fn band_sweep(base: &HybridChainSpec, v_values: &[f64]) -> Result<BandSweepTable, SpectralError> {
    band_sweep_with(base, v_values, Execution::default())
}

pub fn band_sweep_with(
    base: &HybridChainSpec,
    v_values: &[f64],
    exec: Execution,
) -> Result<BandSweepTable, SpectralError> {
    if v_values.is_empty() {
        return Err(SpectralError::EmptySweep);
    }
    if let Some(&bad) = v_values.iter().find(|v| !v.is_finite()) {
        return Err(SpectralError::NonFiniteParameter(bad));
    }
    base.with_v(0.0).validate()?;
    let mut vs = v_values.to_vec();
    vs.sort_by(f64::total_cmp);

    let rows = exec::map(&vs, exec, |&v| {
        decompose_spec(&base.with_v(v), false)
            .map(|dec| BandRow {
                v,
                eigenvalues: dec.eigenvalues,
            })
            .map_err(|e| SpectralError::Sweep { v, source: Box::new(e) })
    });
    Ok(BandSweepTable {
        base: *base,
        rows: rows.into_iter().collect::<Result<_, _>>()?,
    })
}

/// `start, start + step, ...` up to and including `stop` (within half a step).
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 0.5).floor() as usize + 1;
    (0..count).map(|k| start + k as f64 * step).collect()
}

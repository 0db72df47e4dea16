//! Quench dynamics: exact propagation, light cones and end-site reflection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::lattice::{build_hamiltonian, HybridChainSpec, LatticeError};
use crate::linalg::{expm, norm2, ComplexMatrix, LinalgError, C64, PADE_THETA_13, ZERO};
use crate::spectral::{decompose, localized_edge_state, EdgeCriteria, Side, SpectralDecomposition, SpectralError};

pub const DEFAULT_TIME_STEPS: usize = 600;
pub const DEFAULT_DIP_FRACTION: f64 = 0.01;
const FRONT_FRACTION: f64 = 0.01;
const FRONT_WINDOW: (f64, f64) = (0.1, 0.8);
const MIN_FIT_SAMPLES: usize = 10;
const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("initial state has norm {0}, expected 1")]
    NotNormalized(f64),
    #[error("state has {state} components but the Hamiltonian is {dim}x{dim}")]
    DimensionMismatch { state: usize, dim: usize },
    #[error("invalid time grid: {0}")]
    TimeGrid(String),
    #[error("decomposition has no left eigenvectors")]
    MissingLeft,
    #[error("{0} eigenpairs are defective; use propagate_expm instead")]
    Defective(usize),
    #[error("invalid quench protocol: {0}")]
    Protocol(String),
    #[error("pre-quench chain (v = {v}) has no {side} edge state to start from: {source}")]
    NoEdgeState {
        side: Side,
        v: f64,
        #[source]
        source: SpectralError,
    },
    #[error("site {site} is outside 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("probability at site {0} never drops below the dip threshold: non-transporting protocol")]
    NonTransporting(usize),
    #[error("front fit window has {0} samples, need at least {MIN_FIT_SAMPLES}")]
    FitWindow(usize),
}

/// A sudden change of the chain parameters: the pre-quench edge state on
/// `initial_side` is evolved under the post-quench Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuenchProtocol {
    pub pre_spec: HybridChainSpec,
    pub post_spec: HybridChainSpec,
    pub initial_side: Side,
    pub t_max: f64,
    /// Number of intervals; the grid has `n_time_steps + 1` samples.
    pub n_time_steps: usize,
}

/// `1.2 * n_sites / (2 min(v, w))`: long enough for a front at the bulk
/// group velocity to cross the chain and come back partway.
pub fn default_t_max(post: &HybridChainSpec) -> f64 {
    let speed = 2.0 * post.v.abs().min(post.w.abs());
    if speed > 0.0 {
        1.2 * post.n_sites as f64 / speed
    } else {
        post.n_sites as f64
    }
}

impl QuenchProtocol {
    pub fn new(pre_spec: HybridChainSpec, post_spec: HybridChainSpec, initial_side: Side) -> Self {
        let t_max = default_t_max(&post_spec);
        Self {
            pre_spec,
            post_spec,
            initial_side,
            t_max,
            n_time_steps: DEFAULT_TIME_STEPS,
        }
    }

    /// v: 0.1 -> 0.5 on the 220-site reference chain.
    pub fn reference(initial_side: Side) -> Self {
        Self::new(
            HybridChainSpec::reference(0.1),
            HybridChainSpec::reference(0.5),
            initial_side,
        )
    }

    pub fn with_side(&self, initial_side: Side) -> Self {
        Self {
            initial_side,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        self.pre_spec.validate()?;
        self.post_spec.validate()?;
        let (a, b) = (&self.pre_spec, &self.post_spec);
        if a.n_sites != b.n_sites {
            return Err(DynamicsError::Protocol(format!(
                "n_sites differs ({} vs {})",
                a.n_sites, b.n_sites
            )));
        }
        if (a.pt_first_site, a.pt_last_site) != (b.pt_first_site, b.pt_last_site) {
            return Err(DynamicsError::Protocol("PT region bounds differ".into()));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(DynamicsError::Protocol(format!(
                "t_max = {} must be positive",
                self.t_max
            )));
        }
        if self.n_time_steps == 0 {
            return Err(DynamicsError::Protocol("n_time_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        time_grid(self.t_max, self.n_time_steps)
    }

    /// End site (1-based) where the initial state sits.
    pub fn origin_site(&self) -> usize {
        match self.initial_side {
            Side::Left => 1,
            Side::Right => self.pre_spec.n_sites,
        }
    }
}

pub fn time_grid(t_max: f64, n_steps: usize) -> Vec<f64> {
    (0..=n_steps).map(|k| t_max * k as f64 / n_steps as f64).collect()
}

fn check_grid(times: &[f64]) -> Result<f64, DynamicsError> {
    match times.first() {
        None => return Err(DynamicsError::TimeGrid("no times".into())),
        Some(&t0) if t0 != 0.0 => return Err(DynamicsError::TimeGrid(format!("starts at {t0}, not 0"))),
        _ => {}
    }
    if times.len() == 1 {
        return Ok(0.0);
    }
    let dt = times[1];
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DynamicsError::TimeGrid("not ascending".into()));
    }
    for (k, &t) in times.iter().enumerate() {
        if (t - k as f64 * dt).abs() > 1e-9 * dt.max(t.abs()) {
            return Err(DynamicsError::TimeGrid(format!(
                "sample {k} (t = {t}) is off the uniform grid"
            )));
        }
    }
    Ok(dt)
}

fn check_state(psi0: &[C64], dim: usize) -> Result<(), DynamicsError> {
    if psi0.len() != dim {
        return Err(DynamicsError::DimensionMismatch { state: psi0.len(), dim });
    }
    let norm = norm2(psi0);
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(DynamicsError::NotNormalized(norm));
    }
    Ok(())
}

/// `exp(-i h dt)`, split into substeps whose 1-norm stays inside the range
/// where the degree-13 Padé approximant needs no squaring.
pub fn step_propagator(h: &ComplexMatrix, dt: f64) -> Result<ComplexMatrix, DynamicsError> {
    let substeps = ((h.norm_one() * dt / PADE_THETA_13).ceil() as usize).max(1);
    let sub = expm(&h.scale(C64::new(0.0, -dt / substeps as f64)))?;
    let mut u = sub.clone();
    for _ in 1..substeps {
        u = u.matmul(&sub);
    }
    Ok(u)
}

/// `psi(t) = exp(-i h t) psi0` on a uniform grid starting at 0.
pub fn propagate_expm(h: &ComplexMatrix, psi0: &[C64], times: &[f64]) -> Result<Vec<Vec<C64>>, DynamicsError> {
    check_state(psi0, h.dim())?;
    let dt = check_grid(times)?;
    let mut states = Vec::with_capacity(times.len());
    states.push(psi0.to_vec());
    if times.len() > 1 {
        let u = step_propagator(h, dt)?;
        for _ in 1..times.len() {
            let next = u.matvec(states.last().expect("non-empty"));
            states.push(next);
        }
    }
    Ok(states)
}

/// Biorthogonal eigen-expansion `sum_f exp(-i E_f t) psi_f <L_f|psi0>`.
pub fn propagate_spectral(
    dec: &SpectralDecomposition,
    psi0: &[C64],
    times: &[f64],
) -> Result<Vec<Vec<C64>>, DynamicsError> {
    let left = dec.left_eigenvectors.as_ref().ok_or(DynamicsError::MissingLeft)?;
    if !dec.defective.is_empty() {
        return Err(DynamicsError::Defective(dec.defective.len()));
    }
    check_state(psi0, dec.dim())?;
    check_grid(times)?;
    let coeffs: Vec<C64> = left
        .iter()
        .map(|l| l.iter().zip(psi0).map(|(a, b)| a * b).sum())
        .collect();
    Ok(times
        .iter()
        .map(|&t| {
            let mut psi = vec![ZERO; dec.dim()];
            for ((e, c), r) in dec.eigenvalues.iter().zip(&coeffs).zip(&dec.right_eigenvectors) {
                let a = (C64::new(0.0, -t) * e).exp() * c;
                psi.iter_mut().zip(r).for_each(|(p, x)| *p += a * x);
            }
            psi
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LightCone {
    pub times: Vec<f64>,
    /// `density[t][site]`, unnormalized.
    pub density: Vec<Vec<f64>>,
    pub norm_series: Vec<f64>,
    pub protocol: QuenchProtocol,
}

impl LightCone {
    pub fn n_sites(&self) -> usize {
        self.protocol.pre_spec.n_sites
    }

    /// Density with every time slice scaled to unit total.
    pub fn renormalized(&self) -> Vec<Vec<f64>> {
        self.density
            .iter()
            .zip(&self.norm_series)
            .map(|(row, &n)| row.iter().map(|p| if n > 0.0 { p / n } else { 0.0 }).collect())
            .collect()
    }
}

/// The normalized `side` edge state of the pre-quench chain.
pub fn initial_state(protocol: &QuenchProtocol) -> Result<Vec<C64>, DynamicsError> {
    let side = protocol.initial_side;
    let no_edge = |source| DynamicsError::NoEdgeState {
        side,
        v: protocol.pre_spec.v,
        source,
    };
    let dec = decompose(&build_hamiltonian(&protocol.pre_spec)?, false).map_err(no_edge)?;
    localized_edge_state(&dec, side, &EdgeCriteria::default()).map_err(no_edge)
}

pub fn run_quench(protocol: &QuenchProtocol) -> Result<LightCone, DynamicsError> {
    protocol.validate()?;
    let psi0 = initial_state(protocol)?;
    let h = build_hamiltonian(&protocol.post_spec)?;
    let times = protocol.times();
    let states = propagate_expm(&h, &psi0, &times)?;
    let density: Vec<Vec<f64>> = states
        .iter()
        .map(|psi| psi.iter().map(|z| z.norm_sqr()).collect())
        .collect();
    let norm_series = density.iter().map(|row| row.iter().sum()).collect();
    Ok(LightCone {
        times,
        density,
        norm_series,
        protocol: protocol.clone(),
    })
}

/// Independent quench runs, in input order.
pub fn run_quenches(protocols: &[QuenchProtocol], exec: Execution) -> Vec<Result<LightCone, DynamicsError>> {
    exec::map(protocols, exec, run_quench)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReflectionSignal {
    pub site: usize,
    pub series: Vec<(f64, f64)>,
    pub dip_interval: (f64, f64),
    pub reemergence_peak: f64,
    pub threshold: f64,
}

pub fn reflection_signal(cone: &LightCone, site: usize) -> Result<ReflectionSignal, DynamicsError> {
    reflection_signal_with(cone, site, DEFAULT_DIP_FRACTION)
}

/// Probability at `site` over time. The dip is the longest contiguous run
/// of samples below `dip_fraction * P(site, 0)` (the earliest on ties), so
/// brief ringing right after the state leaves is skipped; the peak is the
/// largest probability after that run ends (0 if it lasts to the final
/// sample).
pub fn reflection_signal_with(
    cone: &LightCone,
    site: usize,
    dip_fraction: f64,
) -> Result<ReflectionSignal, DynamicsError> {
    let n = cone.n_sites();
    if site == 0 || site > n {
        return Err(DynamicsError::SiteOutOfRange { site, n_sites: n });
    }
    let series: Vec<(f64, f64)> = cone
        .times
        .iter()
        .zip(&cone.density)
        .map(|(&t, row)| (t, row[site - 1]))
        .collect();
    let threshold = dip_fraction * series[0].1;
    let mut best: Option<(usize, usize)> = None;
    let mut run_start = None;
    for (k, &(_, p)) in series.iter().enumerate() {
        match (p < threshold, run_start) {
            (true, None) => run_start = Some(k),
            (false, Some(a)) => {
                if best.is_none_or(|(b0, b1)| k - a > b1 + 1 - b0) {
                    best = Some((a, k - 1));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = run_start {
        let last = series.len() - 1;
        if best.is_none_or(|(b0, b1)| last + 1 - a > b1 + 1 - b0) {
            best = Some((a, last));
        }
    }
    let (start, end) = best.ok_or(DynamicsError::NonTransporting(site))?;
    let reemergence_peak = series[end + 1..].iter().map(|&(_, p)| p).fold(0.0, f64::max);
    Ok(ReflectionSignal {
        site,
        dip_interval: (series[start].0, series[end].0),
        reemergence_peak,
        threshold,
        series,
    })
}

/// Leading-edge position at each time: distance from the origin end of the
/// first site, scanning from the far end, where the cumulative density
/// exceeds 1% of the total.
pub fn front_positions(cone: &LightCone) -> Vec<f64> {
    let n = cone.n_sites();
    let from_right = cone.protocol.initial_side == Side::Left;
    cone.density
        .iter()
        .zip(&cone.norm_series)
        .map(|(row, &total)| {
            let mut acc = 0.0;
            for k in 0..n {
                let site = if from_right { n - 1 - k } else { k };
                acc += row[site];
                if acc > FRONT_FRACTION * total {
                    return (n - 1 - k) as f64;
                }
            }
            0.0
        })
        .collect()
}

/// Least-squares slope of the leading edge over the window where it has
/// covered 10% to 80% of the chain, before it first reaches the far end.
pub fn front_speed(cone: &LightCone) -> Result<f64, DynamicsError> {
    let span = (cone.n_sites() - 1) as f64;
    let (lo, hi) = (FRONT_WINDOW.0 * span, FRONT_WINDOW.1 * span);
    let positions = front_positions(cone);
    let arrival = positions.iter().position(|&x| x > hi).unwrap_or(positions.len());
    let (ts, xs): (Vec<f64>, Vec<f64>) = cone.times[..arrival]
        .iter()
        .zip(&positions[..arrival])
        .filter(|&(_, &x)| x >= lo)
        .map(|(&t, &x)| (t, x))
        .unzip();
    if ts.len() < MIN_FIT_SAMPLES {
        return Err(DynamicsError::FitWindow(ts.len()));
    }
    let m = ts.len() as f64;
    let (tm, xm) = (ts.iter().sum::<f64>() / m, xs.iter().sum::<f64>() / m);
    let sxy: f64 = ts.iter().zip(&xs).map(|(t, x)| (t - tm) * (x - xm)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    Ok((sxy / sxx).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn small_protocol(side: Side) -> QuenchProtocol {
        let pre = HybridChainSpec {
            n_sites: 40,
            pt_first_site: 17,
            pt_last_site: 24,
            ..HybridChainSpec::reference(0.1)
        };
        let post = pre.with_v(0.5);
        let mut p = QuenchProtocol::new(pre, post, side);
        p.n_time_steps = 200;
        p
    }

    #[test]
    fn single_site_decay() {
        let h = ComplexMatrix::from_rows(&[vec![c(-0.3, -0.1), ZERO], vec![ZERO, c(-0.3, 0.1)]]).unwrap();
        let times = time_grid(20.0, 40);
        let states = propagate_expm(&h, &[ONE, ZERO], &times).unwrap();
        for (t, psi) in times.iter().zip(&states) {
            assert!((psi[0].norm_sqr() - (-0.2 * t).exp()).abs() < 1e-13);
            assert_eq!(psi[1], ZERO);
        }
    }

    #[test]
    fn large_steps_are_substepped() {
        let h = build_hamiltonian(&HybridChainSpec::reference(0.3).plain()).unwrap();
        let mut psi0 = vec![ZERO; 220];
        psi0[110] = ONE;
        let coarse = propagate_expm(&h, &psi0, &time_grid(60.0, 2)).unwrap();
        let fine = propagate_expm(&h, &psi0, &time_grid(60.0, 120)).unwrap();
        let diff = coarse[2]
            .iter()
            .zip(&fine[120])
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
        assert!((norm2(&coarse[2]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_and_state_checks() {
        let h = ComplexMatrix::identity(2);
        assert!(matches!(
            propagate_expm(&h, &[ONE, ONE], &[0.0, 1.0]),
            Err(DynamicsError::NotNormalized(_))
        ));
        assert!(matches!(
            propagate_expm(&h, &[ONE], &[0.0, 1.0]),
            Err(DynamicsError::DimensionMismatch { .. })
        ));
        for bad in [vec![], vec![1.0, 2.0], vec![0.0, 1.0, 3.0], vec![0.0, -1.0]] {
            assert!(matches!(
                propagate_expm(&h, &[ONE, ZERO], &bad),
                Err(DynamicsError::TimeGrid(_))
            ));
        }
    }

    #[test]
    fn spectral_expansion_needs_left_vectors() {
        let dec = decompose(&ComplexMatrix::identity(3), false).unwrap();
        assert_eq!(
            propagate_spectral(&dec, &[ONE, ZERO, ZERO], &[0.0]).unwrap_err(),
            DynamicsError::MissingLeft
        );
    }

    #[test]
    fn spectral_expansion_refuses_defective_pairs() {
        let jordan = ComplexMatrix::from_rows(&[vec![ZERO, ONE], vec![ZERO, ZERO]]).unwrap();
        let dec = decompose(&jordan, true).unwrap();
        assert!(matches!(
            propagate_spectral(&dec, &[ONE, ZERO], &[0.0, 1.0]),
            Err(DynamicsError::Defective(_))
        ));
        assert!(propagate_expm(&jordan, &[ZERO, ONE], &[0.0, 1.0]).is_ok());
    }

    #[test]
    fn protocol_validation() {
        let p = small_protocol(Side::Left);
        assert!(p.validate().is_ok());
        let mut q = p.clone();
        q.post_spec.pt_first_site = 15;
        assert!(matches!(q.validate(), Err(DynamicsError::Protocol(_))));
        let mut q = p.clone();
        q.t_max = 0.0;
        assert!(q.validate().is_err());
        let mut q = p.clone();
        q.n_time_steps = 0;
        assert!(q.validate().is_err());
    }

    #[test]
    fn trivial_pre_quench_has_no_edge_state() {
        let mut p = small_protocol(Side::Right);
        p.pre_spec = p.pre_spec.with_v(0.6);
        let err = run_quench(&p).unwrap_err();
        assert!(matches!(err, DynamicsError::NoEdgeState { side: Side::Right, .. }));
        assert!(err.to_string().contains("right"));
    }

    #[test]
    fn light_cone_invariants() {
        let p = small_protocol(Side::Left);
        let cone = run_quench(&p).unwrap();
        let psi0 = initial_state(&p).unwrap();
        assert_eq!(cone.times.len(), 201);
        assert!((cone.norm_series[0] - 1.0).abs() < 1e-12);
        for (p0, z) in cone.density[0].iter().zip(&psi0) {
            assert!((p0 - z.norm_sqr()).abs() < 1e-12);
        }
        assert!(cone.density.iter().flatten().all(|&p| p >= 0.0));
        for row in cone.renormalized() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dip_detection() {
        let cone = run_quench(&small_protocol(Side::Left)).unwrap();
        let sig = reflection_signal(&cone, 1).unwrap();
        let max = sig.series.iter().map(|s| s.1).fold(0.0, f64::max);
        assert!(sig.reemergence_peak <= max);
        assert!(sig.dip_interval.0 > 0.0 && sig.dip_interval.0 <= sig.dip_interval.1);
        assert!(sig.dip_interval.1 <= cone.protocol.t_max);
        assert!(matches!(
            reflection_signal(&cone, 41),
            Err(DynamicsError::SiteOutOfRange { .. })
        ));
    }

    #[test]
    fn longest_dip_wins_over_early_ringing() {
        let p = small_protocol(Side::Left);
        let trace = [1.0, 0.005, 0.5, 0.001, 0.001, 0.001, 0.3, 0.2, 0.001];
        let cone = LightCone {
            times: (0..trace.len()).map(|k| k as f64).collect(),
            density: trace
                .iter()
                .map(|&p| {
                    let mut row = vec![0.0; 40];
                    row[0] = p;
                    row
                })
                .collect(),
            norm_series: vec![1.0; trace.len()],
            protocol: p,
        };
        let sig = reflection_signal(&cone, 1).unwrap();
        assert_eq!(sig.dip_interval, (3.0, 5.0));
        assert_eq!(sig.reemergence_peak, 0.3);
    }

    #[test]
    fn frozen_state_is_not_transporting() {
        let mut p = small_protocol(Side::Left);
        p.post_spec = p.pre_spec;
        let cone = run_quench(&p).unwrap();
        assert_eq!(
            reflection_signal(&cone, 1).unwrap_err(),
            DynamicsError::NonTransporting(1)
        );
    }

    #[test]
    fn dimerized_post_quench_has_no_front() {
        let mut p = small_protocol(Side::Left);
        p.pre_spec = p.pre_spec.plain();
        p.post_spec = HybridChainSpec {
            v: 0.5,
            w: 0.0,
            ..p.pre_spec
        };
        p.t_max = 100.0;
        let cone = run_quench(&p).unwrap();
        assert!(matches!(front_speed(&cone), Err(DynamicsError::FitWindow(_))));
    }

    #[test]
    fn batch_preserves_order() {
        let ps = [small_protocol(Side::Left), small_protocol(Side::Right)];
        let out = run_quenches(&ps, Execution::default());
        assert_eq!(out[0].as_ref().unwrap().protocol.initial_side, Side::Left);
        assert_eq!(out[1].as_ref().unwrap().protocol.initial_side, Side::Right);
    }
}

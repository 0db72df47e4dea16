//! Continuum scattering off a stack of complex potential slabs.
//!
//! Units with hbar^2 / 2m = 1, so a slab of potential `V` carries the
//! wavevector `k = sqrt(E - V)`. A slab maps the state `(psi, -i psi')`
//! across its length; the stack product applies its slabs right to left,
//! so the last slab in the list is the one the left-incoming wave meets
//! first.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::linalg::C64;

/// `|sigma|` below this makes the S-matrix conversion ill-conditioned.
pub const SIGMA_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScatterError {
    #[error("slab length {0} must be finite and positive")]
    Length(f64),
    #[error("slab potential {0} is not finite")]
    Potential(C64),
    #[error("energy {0} must be finite and positive")]
    Energy(f64),
    #[error("energy {energy} sits at the band edge of a slab with potential {potential} (k = 0)")]
    BandEdge { energy: f64, potential: C64 },
    #[error("transfer matrix has sigma = {sigma} at energy {energy}; resonance or ill-conditioned S-matrix")]
    Resonance { energy: f64, sigma: C64 },
    #[error("scattering matrix has s12 = 0; it has no transfer matrix")]
    NoTransfer,
    #[error("invalid stack: {0}")]
    Stack(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSlab {
    pub v_complex: C64,
    pub length: f64,
}

impl PotentialSlab {
    pub fn new(v_complex: C64, length: f64) -> Result<Self, ScatterError> {
        let slab = Self { v_complex, length };
        slab.validate()?;
        Ok(slab)
    }

    pub fn validate(&self) -> Result<(), ScatterError> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(ScatterError::Length(self.length));
        }
        if !(self.v_complex.re.is_finite() && self.v_complex.im.is_finite()) {
            return Err(ScatterError::Potential(self.v_complex));
        }
        Ok(())
    }
}

/// Flat description of a stack of identical AB blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackSpec {
    pub n_blocks: usize,
    pub l_a: f64,
    pub l_b: f64,
    pub u_re: f64,
    pub u_im: f64,
}

impl StackSpec {
    /// Ten blocks of `-0.3 -+ 0.1i` with lengths 6 and 10.
    pub fn reference() -> Self {
        Self {
            n_blocks: 10,
            l_a: 6.0,
            l_b: 10.0,
            u_re: -0.3,
            u_im: 0.1,
        }
    }

    pub fn hermitian(&self) -> Self {
        Self { u_im: 0.0, ..*self }
    }

    pub fn build(&self) -> Result<PotentialStack, ScatterError> {
        if !(self.u_re.is_finite() && self.u_im.is_finite()) {
            return Err(ScatterError::Stack("potential must be finite".into()));
        }
        if self.u_im < 0.0 {
            return Err(ScatterError::Stack(format!(
                "u_im = {} must be non-negative",
                self.u_im
            )));
        }
        let a = PotentialSlab::new(C64::new(self.u_re, -self.u_im), self.l_a)?;
        let b = PotentialSlab::new(C64::new(self.u_re, self.u_im), self.l_b)?;
        Ok(PotentialStack {
            slabs: (0..self.n_blocks).flat_map(|_| [a, b]).collect(),
            n_blocks: self.n_blocks,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialStack {
    pub slabs: Vec<PotentialSlab>,
    pub n_blocks: usize,
}

impl PotentialStack {
    pub fn reference() -> Self {
        StackSpec::reference().build().expect("reference stack is valid")
    }

    /// The stack seen from the other side.
    pub fn reversed(&self) -> Self {
        Self {
            slabs: self.slabs.iter().rev().copied().collect(),
            n_blocks: self.n_blocks,
        }
    }

    pub fn validate(&self) -> Result<(), ScatterError> {
        self.slabs.iter().try_for_each(PotentialSlab::validate)
    }
}

/// `[[alpha, beta], [gamma, sigma]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub alpha: C64,
    pub beta: C64,
    pub gamma: C64,
    pub sigma: C64,
}

impl TransferMatrix {
    pub const IDENTITY: Self = Self {
        alpha: C64::new(1.0, 0.0),
        beta: C64::new(0.0, 0.0),
        gamma: C64::new(0.0, 0.0),
        sigma: C64::new(1.0, 0.0),
    };

    pub fn mul(&self, o: &Self) -> Self {
        Self {
            alpha: self.alpha * o.alpha + self.beta * o.gamma,
            beta: self.alpha * o.beta + self.beta * o.sigma,
            gamma: self.gamma * o.alpha + self.sigma * o.gamma,
            sigma: self.gamma * o.beta + self.sigma * o.sigma,
        }
    }

    pub fn det(&self) -> C64 {
        self.alpha * self.sigma - self.beta * self.gamma
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        [
            self.alpha - o.alpha,
            self.beta - o.beta,
            self.gamma - o.gamma,
            self.sigma - o.sigma,
        ]
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        [self.alpha, self.beta, self.gamma, self.sigma]
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Inverse of [`scattering_matrix`].
    pub fn from_scattering(s: &ScatteringResult) -> Result<Self, ScatterError> {
        if s.s12 == C64::new(0.0, 0.0) {
            return Err(ScatterError::NoTransfer);
        }
        let sigma = s.s12.inv();
        let gamma = -s.s11 * sigma;
        let beta = s.s22 * sigma;
        Ok(Self {
            alpha: s.s21 + beta * gamma / sigma,
            beta,
            gamma,
            sigma,
        })
    }
}

fn check_energy(energy: f64) -> Result<(), ScatterError> {
    if energy.is_finite() && energy > 0.0 {
        Ok(())
    } else {
        Err(ScatterError::Energy(energy))
    }
}

pub fn slab_transfer(slab: &PotentialSlab, energy: f64) -> Result<TransferMatrix, ScatterError> {
    slab.validate()?;
    if !energy.is_finite() {
        return Err(ScatterError::Energy(energy));
    }
    let k = (C64::new(energy, 0.0) - slab.v_complex).sqrt();
    if k == C64::new(0.0, 0.0) {
        return Err(ScatterError::BandEdge {
            energy,
            potential: slab.v_complex,
        });
    }
    let kl = k * slab.length;
    let (cos, sin) = (kl.cos(), kl.sin());
    let i = C64::i();
    Ok(TransferMatrix {
        alpha: cos,
        beta: i * sin / k,
        gamma: i * k * sin,
        sigma: cos,
    })
}

pub fn stack_transfer(stack: &PotentialStack, energy: f64) -> Result<TransferMatrix, ScatterError> {
    check_energy(energy)?;
    let k0 = energy.sqrt();
    let mut inner = TransferMatrix::IDENTITY;
    for slab in &stack.slabs {
        inner = inner.mul(&slab_transfer(slab, energy)?);
    }
    let one = C64::new(1.0, 0.0);
    let t_l = TransferMatrix {
        alpha: one,
        beta: one,
        gamma: C64::new(k0, 0.0),
        sigma: C64::new(-k0, 0.0),
    };
    let half = C64::new(0.5, 0.0);
    let t_r_inv = TransferMatrix {
        alpha: half,
        beta: half / k0,
        gamma: half,
        sigma: -half / k0,
    };
    Ok(t_r_inv.mul(&inner).mul(&t_l))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringResult {
    pub energy: f64,
    pub s11: C64,
    pub s12: C64,
    pub s21: C64,
    pub s22: C64,
    pub r_left: f64,
    pub r_right: f64,
    pub transmission: f64,
}

impl ScatteringResult {
    pub fn asymmetry(&self) -> f64 {
        (self.r_left - self.r_right).abs()
    }
}

pub fn scattering_matrix(t: &TransferMatrix, energy: f64) -> Result<ScatteringResult, ScatterError> {
    let TransferMatrix {
        alpha,
        beta,
        gamma,
        sigma,
    } = *t;
    if sigma.norm().is_nan() || sigma.norm() < SIGMA_FLOOR {
        return Err(ScatterError::Resonance { energy, sigma });
    }
    let (s11, s12, s21, s22) = (-gamma / sigma, sigma.inv(), alpha - beta * gamma / sigma, beta / sigma);
    Ok(ScatteringResult {
        energy,
        s11,
        s12,
        s21,
        s22,
        r_left: s11.norm_sqr(),
        r_right: s22.norm_sqr(),
        transmission: s21.norm_sqr(),
    })
}

pub fn scatter_at(stack: &PotentialStack, energy: f64) -> Result<ScatteringResult, ScatterError> {
    scattering_matrix(&stack_transfer(stack, energy)?, energy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub energy: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionSweep {
    pub results: Vec<ScatteringResult>,
    pub failures: Vec<SweepFailure>,
}

impl ReflectionSweep {
    pub fn max_asymmetry(&self) -> Option<&ScatteringResult> {
        self.results
            .iter()
            .max_by(|a, b| a.asymmetry().total_cmp(&b.asymmetry()))
    }
}

pub fn reflection_sweep(stack: &PotentialStack, energies: &[f64]) -> ReflectionSweep {
    reflection_sweep_with(stack, energies, Execution::default())
}

/// Scatters at each energy independently; failed energies are collected.
pub fn reflection_sweep_with(stack: &PotentialStack, energies: &[f64], exec: Execution) -> ReflectionSweep {
    let mut sweep = ReflectionSweep {
        results: Vec::with_capacity(energies.len()),
        failures: Vec::new(),
    };
    for (energy, outcome) in energies
        .iter()
        .zip(exec::map(energies, exec, |&e| scatter_at(stack, e)))
    {
        match outcome {
            Ok(r) => sweep.results.push(r),
            Err(e) => sweep.failures.push(SweepFailure {
                energy: *energy,
                message: e.to_string(),
            }),
        }
    }
    sweep
}

/// `n` points spaced evenly in log between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|k| match k {
                    0 => lo,
                    k if k == n - 1 => hi,
                    k => (a + (b - a) * k as f64 / (n - 1) as f64).exp(),
                })
                .collect()
        }
    }
}

//! Hybrid SSH chain with an embedded PT-symmetric segment.
//!
//! Sites are numbered from 1 and alternate A, B, A, B, ...; site `2k-1` and
//! site `2k` form unit cell `k`. Intracell bonds carry `v`, intercell bonds
//! `w`. Inside the PT region A sites carry `u_re - i u_im` and B sites
//! `u_re + i u_im`; every other onsite energy is zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{ComplexMatrix, C64, ZERO};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("n_sites must be a positive even number, got {0}")]
    SiteCount(usize),
    #[error("PT region {first}..={last} is outside 1..={n_sites}")]
    RegionBounds { first: usize, last: usize, n_sites: usize },
    #[error("PT region {first}..={last} must start on an A site (odd) and end on a B site (even)")]
    RegionParity { first: usize, last: usize },
    #[error("u_im must be non-negative, got {0}")]
    NegativeGainLoss(f64),
    #[error("{field} must be finite, got {value}")]
    NonFinite { field: &'static str, value: f64 },
    #[error("invalid chain config: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sublattice {
    A,
    B,
}

/// Sublattice of a 1-based site index.
pub fn sublattice(site: usize) -> Sublattice {
    if site % 2 == 1 {
        Sublattice::A
    } else {
        Sublattice::B
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridChainSpec {
    pub n_sites: usize,
    pub v: f64,
    pub w: f64,
    pub u_re: f64,
    pub u_im: f64,
    pub pt_first_site: usize,
    pub pt_last_site: usize,
}

impl HybridChainSpec {
    /// 220 sites, w = 0.4, u = -0.3 -/+ 0.1i on sites 101..=120.
    pub fn reference(v: f64) -> Self {
        Self {
            n_sites: 220,
            v,
            w: 0.4,
            u_re: -0.3,
            u_im: 0.1,
            pt_first_site: 101,
            pt_last_site: 120,
        }
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        if self.n_sites == 0 || !self.n_sites.is_multiple_of(2) {
            return Err(LatticeError::SiteCount(self.n_sites));
        }
        for (field, value) in [("v", self.v), ("w", self.w), ("u_re", self.u_re), ("u_im", self.u_im)] {
            if !value.is_finite() {
                return Err(LatticeError::NonFinite { field, value });
            }
        }
        if self.u_im < 0.0 {
            return Err(LatticeError::NegativeGainLoss(self.u_im));
        }
        let (first, last) = (self.pt_first_site, self.pt_last_site);
        if first < 1 || first > last || last > self.n_sites {
            return Err(LatticeError::RegionBounds {
                first,
                last,
                n_sites: self.n_sites,
            });
        }
        if first % 2 != 1 || last % 2 != 0 {
            return Err(LatticeError::RegionParity { first, last });
        }
        Ok(())
    }

    pub fn with_v(&self, v: f64) -> Self {
        Self { v, ..*self }
    }

    /// Same chain with the PT region switched off (plain SSH).
    pub fn plain(&self) -> Self {
        Self {
            u_re: 0.0,
            u_im: 0.0,
            ..*self
        }
    }

    pub fn pt_cells(&self) -> usize {
        (self.pt_last_site + 1 - self.pt_first_site) / 2
    }

    pub fn in_pt_region(&self, site: usize) -> bool {
        (self.pt_first_site..=self.pt_last_site).contains(&site)
    }

    /// Onsite energy of a 1-based site.
    pub fn onsite(&self, site: usize) -> C64 {
        if !self.in_pt_region(site) {
            return ZERO;
        }
        match sublattice(site) {
            Sublattice::A => C64::new(self.u_re, -self.u_im),
            Sublattice::B => C64::new(self.u_re, self.u_im),
        }
    }

    /// Hopping between site `s` and `s + 1` (1-based).
    pub fn bond(&self, site: usize) -> f64 {
        match sublattice(site) {
            Sublattice::A => self.v,
            Sublattice::B => self.w,
        }
    }

    pub fn from_config_str(text: &str) -> Result<Self, LatticeError> {
        let spec: Self = toml::from_str(text).map_err(|e| LatticeError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_config_string(&self) -> String {
        toml::to_string(self).expect("flat struct of numbers always serializes")
    }
}

/// Tridiagonal Hamiltonian of the hybrid chain.
pub fn build_hamiltonian(spec: &HybridChainSpec) -> Result<ComplexMatrix, LatticeError> {
    spec.validate()?;
    let n = spec.n_sites;
    let mut h = ComplexMatrix::zeros(n);
    for site in 1..=n {
        let i = site - 1;
        h[(i, i)] = spec.onsite(site);
        if site < n {
            let t = C64::new(spec.bond(site), 0.0);
            h[(i, i + 1)] = t;
            h[(i + 1, i)] = t;
        }
    }
    Ok(h)
}

/// Checks `(PT) H (PT)^-1 = H` on the PT block: complex conjugation combined
/// with site reversal about the centre of the region must reproduce every
/// entry of the block.
pub fn pt_symmetry_check(h: &ComplexMatrix, spec: &HybridChainSpec) -> bool {
    if spec.validate().is_err() || h.dim() != spec.n_sites {
        return false;
    }
    let (a, b) = (spec.pt_first_site - 1, spec.pt_last_site - 1);
    let mirror = |i: usize| a + b - i;
    (a..=b).all(|i| (a..=b).all(|j| h[(i, j)] == h[(mirror(i), mirror(j))].conj()))
}

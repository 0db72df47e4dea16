//! Reference computations that share no code with the library.
#![allow(dead_code)]

use ptssh_core::lattice::HybridChainSpec;
use ptssh_core::linalg::C64;
use ptssh_core::scatter::{PotentialStack, TransferMatrix};

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// The 40-site chain with the PT region scaled to sites 17..=24.
pub fn small_spec(v: f64) -> HybridChainSpec {
    HybridChainSpec {
        n_sites: 40,
        v,
        w: 0.4,
        u_re: -0.3,
        u_im: 0.1,
        pt_first_site: 17,
        pt_last_site: 24,
    }
}

/// Diagonal and off-diagonal couplings written out directly from the
/// model definition.
pub fn chain_tridiagonal(spec: &HybridChainSpec) -> (Vec<C64>, Vec<f64>) {
    let n = spec.n_sites;
    let diag = (1..=n)
        .map(|s| {
            if s < spec.pt_first_site || s > spec.pt_last_site {
                c(0.0, 0.0)
            } else if s % 2 == 1 {
                c(spec.u_re, -spec.u_im)
            } else {
                c(spec.u_re, spec.u_im)
            }
        })
        .collect();
    let off = (1..n).map(|s| if s % 2 == 1 { spec.v } else { spec.w }).collect();
    (diag, off)
}

/// `det(T - z)` and its derivative for a symmetric tridiagonal `T` by the
/// three-term recurrence.
fn char_poly(diag: &[C64], off: &[f64], z: C64) -> (C64, C64) {
    let (mut p0, mut p1) = (c(1.0, 0.0), diag[0] - z);
    let (mut d0, mut d1) = (c(0.0, 0.0), c(-1.0, 0.0));
    for k in 1..diag.len() {
        let b2 = off[k - 1] * off[k - 1];
        let p2 = (diag[k] - z) * p1 - p0 * b2;
        let d2 = -p1 + (diag[k] - z) * d1 - d0 * b2;
        (p0, p1, d0, d1) = (p1, p2, d1, d2);
    }
    (p1, d1)
}

/// All roots of the characteristic polynomial by simultaneous
/// Aberth-Ehrlich iteration.
pub fn tridiagonal_eigenvalues(diag: &[C64], off: &[f64]) -> Vec<C64> {
    let n = diag.len();
    let center = diag.iter().sum::<C64>() / n as f64;
    let radius = (0..n)
        .map(|i| {
            let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { off[i].abs() } else { 0.0 };
            (diag[i] - center).norm() + left + right
        })
        .fold(0.0, f64::max)
        .max(1e-3);
    let mut z: Vec<C64> = (0..n)
        .map(|k| center + C64::from_polar(radius, 0.4 + std::f64::consts::TAU * k as f64 / n as f64))
        .collect();
    for _ in 0..2000 {
        let mut biggest: f64 = 0.0;
        for i in 0..n {
            let (p, dp) = char_poly(diag, off, z[i]);
            if p == c(0.0, 0.0) {
                continue;
            }
            let ratio = p / dp;
            let repulsion: C64 = (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let step = ratio / (c(1.0, 0.0) - ratio * repulsion);
            z[i] -= step;
            biggest = biggest.max(step.norm());
        }
        if biggest < 1e-15 * radius {
            break;
        }
    }
    z
}

/// Largest distance from an element of `a` to its nearest partner in `b`,
/// pairing greedily without reuse.
pub fn match_distance(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("same length");
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

type Mat2 = [[C64; 2]; 2];

fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Fundamental matrix of `psi'' = (v - e) psi` over `length`, mapping
/// `(psi, psi')` at the start to the end, by classical RK4.
pub fn ode_fundamental(v: C64, e: f64, length: f64, step: f64) -> Mat2 {
    let q = v - e;
    let n = (length / step).ceil().max(1.0) as usize;
    let h = length / n as f64;
    let f = |y: [C64; 2]| [y[1], q * y[0]];
    let mut cols = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
    for y in cols.iter_mut() {
        for _ in 0..n {
            let k1 = f(*y);
            let k2 = f([y[0] + k1[0] * (h / 2.0), y[1] + k1[1] * (h / 2.0)]);
            let k3 = f([y[0] + k2[0] * (h / 2.0), y[1] + k2[1] * (h / 2.0)]);
            let k4 = f([y[0] + k3[0] * h, y[1] + k3[1] * h]);
            for i in 0..2 {
                y[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
            }
        }
    }
    [[cols[0][0], cols[1][0]], [cols[0][1], cols[1][1]]]
}

/// `(psi, psi')` fundamental matrix rewritten in the `(psi, -i psi')` basis.
pub fn to_wave_basis(f: &Mat2) -> TransferMatrix {
    let i = c(0.0, 1.0);
    TransferMatrix {
        alpha: f[0][0],
        beta: f[0][1] * i,
        gamma: -i * f[1][0],
        sigma: f[1][1],
    }
}

/// Whole-stack transfer matrix between asymptotic plane-wave amplitudes,
/// integrating the slabs in spatial order (the last listed slab first).
pub fn ode_stack_transfer(stack: &PotentialStack, e: f64, step: f64) -> TransferMatrix {
    let mut total: Mat2 = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
    for slab in stack.slabs.iter().rev() {
        total = mat2_mul(&ode_fundamental(slab.v_complex, e, slab.length, step), &total);
    }
    let inner = to_wave_basis(&total);
    // amplitudes (a, b) of a e^{ikx} + b e^{-ikx} at x = 0 on each side
    let k0 = e.sqrt();
    let one = c(1.0, 0.0);
    let t_l = TransferMatrix {
        alpha: one,
        beta: one,
        gamma: c(k0, 0.0),
        sigma: c(-k0, 0.0),
    };
    let t_r_inv = TransferMatrix {
        alpha: c(0.5, 0.0),
        beta: c(0.5 / k0, 0.0),
        gamma: c(0.5, 0.0),
        sigma: c(-0.5 / k0, 0.0),
    };
    t_r_inv.mul(&inner).mul(&t_l)
}

/// Textbook transmission through a real rectangular barrier or well of
/// height `v0` and width `l` (units with hbar^2 / 2m = 1).
pub fn rectangular_transmission(v0: f64, l: f64, e: f64) -> f64 {
    let x = if e > v0 {
        let k = (e - v0).sqrt();
        (k * l).sin().powi(2) / (4.0 * e * (e - v0))
    } else {
        let kappa = (v0 - e).sqrt();
        (kappa * l).sinh().powi(2) / (4.0 * e * (v0 - e))
    };
    1.0 / (1.0 + v0 * v0 * x)
}

/// Two times the largest group velocity of `E(k) = |v + w e^{ik}|`, in
/// sites per unit time.
pub fn max_front_speed(v: f64, w: f64) -> f64 {
    let n = 200_000;
    (0..=n)
        .map(|j| {
            let k = std::f64::consts::PI * j as f64 / n as f64;
            let e = (v * v + w * w + 2.0 * v * w * k.cos()).sqrt();
            if e > 0.0 {
                (v * w * k.sin() / e).abs()
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
        * 2.0
}

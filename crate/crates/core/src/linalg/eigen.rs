//! General complex eigensolver.
//!
//! `A = Z T Z^H` is computed by Householder reduction to upper Hessenberg
//! form followed by implicit single-shift QR sweeps (Wilkinson shifts,
//! exceptional shifts every 10 stalled sweeps). Eigenvectors of the
//! triangular factor come from back-substitution.
//!
//! Back-substitution loses accuracy when two eigenvalues are closer than
//! roughly `sqrt(eps) * |A|`: the two vectors collapse onto each other. Such
//! clusters (the pair of zero-energy edge states is the typical case) are
//! recomputed by inverse iteration with Gram-Schmidt against the cluster
//! members already accepted, so the cluster's invariant subspace is spanned.

use super::{dot, dot_plain, fix_phase, norm2, normalize, ComplexMatrix, LinalgError, Lu, C64, ONE, ZERO};

const EPS: f64 = f64::EPSILON;
const SAFE_MIN: f64 = f64::MIN_POSITIVE;
/// Relative eigenvalue separation below which pairs are treated as a cluster.
const CLUSTER_RTOL: f64 = 1e-8;
/// Relative residual accepted for a repaired cluster vector.
const REPAIR_RTOL: f64 = 1e-11;
/// `|<L|psi>|` (unit vectors) below which a pair is flagged as near-defective.
const DEFECTIVE_OVERLAP: f64 = 1e-10;
const INVERSE_ITERATIONS: usize = 3;

#[inline]
fn cabs1(z: C64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Schur factorization `A = Z T Z^H`, `T` upper triangular, `Z` unitary.
#[derive(Debug, Clone)]
pub struct Schur {
    pub t: ComplexMatrix,
    pub z: ComplexMatrix,
    pub sweeps: usize,
}

/// Eigenvalues with unit right eigenvectors and, optionally, left row
/// eigenvectors normalized so that `sum_i left[f][i] * right[g][i] = delta_fg`.
#[derive(Debug, Clone)]
pub struct EigenvectorPair {
    pub values: Vec<C64>,
    pub right: Vec<Vec<C64>>,
    pub left: Option<Vec<Vec<C64>>>,
    /// Indices whose left/right overlap underflowed; their left vectors are
    /// unit-normalized rather than biorthonormalized.
    pub defective: Vec<usize>,
}

/// Givens rotation `[[c, s], [-conj(s), c]]` mapping `(x, y)` to `(r, 0)`.
fn givens(x: C64, y: C64) -> (f64, C64, C64) {
    if y == ZERO {
        (1.0, ZERO, x)
    } else if x == ZERO {
        let ay = y.norm();
        (0.0, y.conj() / ay, C64::new(ay, 0.0))
    } else {
        let ax = x.norm();
        let nrm = ax.hypot(y.norm());
        let alpha = x / ax;
        (ax / nrm, alpha * y.conj() / nrm, alpha * nrm)
    }
}

fn hessenberg(h: &mut ComplexMatrix, z: &mut ComplexMatrix) {
    let n = h.dim();
    if n < 3 {
        return;
    }
    let mut v = vec![ZERO; n];
    for k in 0..n - 2 {
        let tail: f64 = (k + 2..n).map(|i| h[(i, k)].norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let m = n - k - 1;
        let x0 = h[(k + 1, k)];
        let xnorm = (tail + x0.norm_sqr()).sqrt();
        let phase = if x0 == ZERO { ONE } else { x0 / x0.norm() };
        let beta = -phase * xnorm;
        for i in 0..m {
            v[i] = h[(k + 1 + i, k)];
        }
        v[0] -= beta;
        normalize(&mut v[..m]);

        for j in k..n {
            let s: C64 = (0..m).map(|i| v[i].conj() * h[(k + 1 + i, j)]).sum();
            for i in 0..m {
                h[(k + 1 + i, j)] -= 2.0 * v[i] * s;
            }
        }
        for r in 0..n {
            let s: C64 = (0..m).map(|i| h[(r, k + 1 + i)] * v[i]).sum();
            for i in 0..m {
                h[(r, k + 1 + i)] -= 2.0 * s * v[i].conj();
            }
            let s: C64 = (0..m).map(|i| z[(r, k + 1 + i)] * v[i]).sum();
            for i in 0..m {
                z[(r, k + 1 + i)] -= 2.0 * s * v[i].conj();
            }
        }
        h[(k + 1, k)] = beta;
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
}

fn wilkinson_shift(h: &ComplexMatrix, i: usize) -> C64 {
    let mut t = h[(i, i)];
    let u = h[(i - 1, i)].sqrt() * h[(i, i - 1)].sqrt();
    let s = cabs1(u);
    if s != 0.0 {
        let x = 0.5 * (h[(i - 1, i - 1)] - t);
        let sx = cabs1(x);
        let s = s.max(sx);
        let mut y = s * ((x / s) * (x / s) + (u / s) * (u / s)).sqrt();
        if sx > 0.0 {
            let xs = x / sx;
            if xs.re * y.re + xs.im * y.im < 0.0 {
                y = -y;
            }
        }
        t -= u * (u / (x + y));
    }
    t
}

/// Complex Schur decomposition of a general square matrix.
pub fn schur(a: &ComplexMatrix) -> Result<Schur, LinalgError> {
    let n = a.dim();
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let mut h = a.clone();
    let mut z = ComplexMatrix::identity(n);
    hessenberg(&mut h, &mut z);

    let scale = a.norm_fro().max(SAFE_MIN);
    let budget = 30 * n.max(10);
    let mut sweeps = 0usize;
    let mut stalled = 0usize;
    let mut hi = n - 1;

    while hi > 0 {
        let mut lo = 0;
        for k in (1..=hi).rev() {
            let sub = cabs1(h[(k, k - 1)]);
            let mut diag = cabs1(h[(k - 1, k - 1)]) + cabs1(h[(k, k)]);
            if diag == 0.0 {
                diag = scale;
            }
            if sub <= EPS * diag || sub <= SAFE_MIN {
                h[(k, k - 1)] = ZERO;
                lo = k;
                break;
            }
        }
        if lo == hi {
            hi -= 1;
            stalled = 0;
            continue;
        }
        if sweeps >= budget {
            return Err(LinalgError::NoConvergence {
                iterations: sweeps,
                block_start: lo,
                block_end: hi,
                subdiagonal: h[(hi, hi - 1)].norm(),
            });
        }
        sweeps += 1;
        stalled += 1;

        let mu = match stalled {
            10 => h[(lo, lo)] + 0.75 * h[(lo + 1, lo)].re.abs(),
            20 => h[(hi, hi)] + 0.75 * h[(hi, hi - 1)].re.abs(),
            _ => wilkinson_shift(&h, hi),
        };
        if stalled >= 20 {
            stalled = 0;
        }

        let mut x = h[(lo, lo)] - mu;
        let mut y = h[(lo + 1, lo)];
        for k in lo..hi {
            if k > lo {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
            }
            let (c, s, r) = givens(x, y);
            if k > lo {
                h[(k, k - 1)] = r;
                h[(k + 1, k - 1)] = ZERO;
            }
            for j in k..n {
                let p = h[(k, j)];
                let q = h[(k + 1, j)];
                h[(k, j)] = c * p + s * q;
                h[(k + 1, j)] = -s.conj() * p + c * q;
            }
            let rows = (k + 2).min(hi);
            for r in 0..=rows {
                let p = h[(r, k)];
                let q = h[(r, k + 1)];
                h[(r, k)] = c * p + s.conj() * q;
                h[(r, k + 1)] = -s * p + c * q;
            }
            for r in 0..n {
                let p = z[(r, k)];
                let q = z[(r, k + 1)];
                z[(r, k)] = c * p + s.conj() * q;
                z[(r, k + 1)] = -s * p + c * q;
            }
        }
    }

    Ok(Schur { t: h, z, sweeps })
}

impl Schur {
    pub fn eigenvalues(&self) -> Vec<C64> {
        self.t.diagonal()
    }

    fn small_divisor(&self) -> f64 {
        (EPS * self.t.norm_fro()).max(SAFE_MIN)
    }

    /// Right eigenvector for diagonal position `k`, in the original basis,
    /// unit-normalized.
    pub fn right_eigenvector(&self, k: usize) -> Vec<C64> {
        let n = self.t.dim();
        let t = &self.t;
        let lambda = t[(k, k)];
        let smin = self.small_divisor();
        let mut x = vec![ZERO; n];
        x[k] = ONE;
        for i in (0..k).rev() {
            let s: C64 = (i + 1..=k).map(|j| t[(i, j)] * x[j]).sum();
            let mut d = t[(i, i)] - lambda;
            if cabs1(d) < smin {
                d = C64::new(smin, 0.0);
            }
            x[i] = -s / d;
            if cabs1(x[i]) > 1e150 {
                let inv = 1.0 / x[i].norm();
                for v in x.iter_mut().take(k + 1) {
                    *v *= inv;
                }
            }
        }
        let mut out: Vec<C64> = (0..n).map(|r| (0..=k).map(|j| self.z[(r, j)] * x[j]).sum()).collect();
        normalize(&mut out);
        out
    }

    /// Left (row) eigenvector for diagonal position `k`: `l A = lambda l`,
    /// unit-normalized.
    pub fn left_eigenvector(&self, k: usize) -> Vec<C64> {
        let n = self.t.dim();
        let t = &self.t;
        let lambda = t[(k, k)];
        let smin = self.small_divisor();
        let mut y = vec![ZERO; n];
        y[k] = ONE;
        for j in k + 1..n {
            let s: C64 = (k..j).map(|i| y[i] * t[(i, j)]).sum();
            let mut d = lambda - t[(j, j)];
            if cabs1(d) < smin {
                d = C64::new(smin, 0.0);
            }
            y[j] = s / d;
            if cabs1(y[j]) > 1e150 {
                let inv = 1.0 / y[j].norm();
                for v in y.iter_mut().skip(k) {
                    *v *= inv;
                }
            }
        }
        let mut out: Vec<C64> = (0..n)
            .map(|m| (k..n).map(|j| y[j] * self.z[(m, j)].conj()).sum())
            .collect();
        normalize(&mut out);
        out
    }
}

fn residual(a: &ComplexMatrix, lambda: C64, x: &[C64]) -> f64 {
    let ax = a.matvec(x);
    ax.iter()
        .zip(x)
        .map(|(p, q)| (p - lambda * q).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn gram_schmidt(x: &mut [C64], basis: &[Vec<C64>]) {
    // twice is enough
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, x);
            for (xi, bi) in x.iter_mut().zip(b) {
                *xi -= c * bi;
            }
        }
    }
}

/// Deterministic start vector that is generically not orthogonal to anything.
fn scrambled_start(n: usize, salt: usize) -> Vec<C64> {
    let golden = 0.618_033_988_749_895_f64;
    let mut v: Vec<C64> = (0..n)
        .map(|i| {
            let phi = ((i + 1) as f64 * golden + salt as f64 * 0.414_213_562) % 1.0;
            C64::from_polar(1.0 + 0.5 * phi, std::f64::consts::TAU * phi)
        })
        .collect();
    normalize(&mut v);
    v
}

fn inverse_iterate(lu: &Lu, start: &[C64], against: &[Vec<C64>], salt: usize) -> Vec<C64> {
    let mut x = start.to_vec();
    gram_schmidt(&mut x, against);
    if normalize(&mut x) < 1e-3 {
        x = scrambled_start(start.len(), salt);
        gram_schmidt(&mut x, against);
        normalize(&mut x);
    }
    for _ in 0..INVERSE_ITERATIONS {
        x = lu.solve(&x);
        gram_schmidt(&mut x, against);
        normalize(&mut x);
    }
    x
}

/// Groups indices whose eigenvalues lie within `tol` of each other
/// (transitively). Singletons are omitted.
fn clusters(values: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b] = a;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().filter(|g| g.len() > 1).collect()
}

/// Recomputes the vectors of each cluster (and any isolated vector whose
/// residual is poor) by inverse iteration on `a`.
fn repair_vectors(
    a: &ComplexMatrix,
    values: &[C64],
    vectors: &mut [Vec<C64>],
    groups: &[Vec<usize>],
) -> Result<(), LinalgError> {
    let n = a.dim();
    let scale = a.norm_fro().max(SAFE_MIN);
    let tol = REPAIR_RTOL * scale;
    let floor = -(EPS * scale);
    let shifted = |sigma: C64| {
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] -= sigma;
        }
        Lu::factor(&m, floor)
    };

    let mut in_cluster = vec![false; values.len()];
    for group in groups {
        let sigma = group.iter().map(|&i| values[i]).sum::<C64>() / group.len() as f64;
        let lu = shifted(sigma)?;
        let mut accepted: Vec<Vec<C64>> = Vec::with_capacity(group.len());
        for (salt, &idx) in group.iter().enumerate() {
            in_cluster[idx] = true;
            let mut x = inverse_iterate(&lu, &vectors[idx], &accepted, salt);
            if residual(a, values[idx], &x) > tol {
                // not enough independent directions: near-defective cluster
                x = inverse_iterate(&lu, &vectors[idx], &[], salt);
            }
            accepted.push(x.clone());
            vectors[idx] = x;
        }
    }
    for (idx, v) in vectors.iter_mut().enumerate() {
        if !in_cluster[idx] && residual(a, values[idx], v) > tol {
            let lu = shifted(values[idx])?;
            *v = inverse_iterate(&lu, v, &[], idx);
        }
    }
    Ok(())
}

/// Full eigendecomposition of a general complex matrix.
pub fn eigen_decompose(a: &ComplexMatrix, with_left: bool) -> Result<EigenvectorPair, LinalgError> {
    let n = a.dim();
    let s = schur(a)?;
    let values = s.eigenvalues();
    let scale = a.norm_fro().max(SAFE_MIN);
    let groups = clusters(&values, CLUSTER_RTOL * scale);

    let mut right: Vec<Vec<C64>> = (0..n).map(|k| s.right_eigenvector(k)).collect();
    repair_vectors(a, &values, &mut right, &groups)?;
    for v in right.iter_mut() {
        normalize(v);
        fix_phase(v);
    }

    let mut defective = Vec::new();
    let left = if with_left {
        // rows l with l A = lambda l are conj of columns y with A^H y = conj(lambda) y
        let ah = a.conj_transpose();
        let conj_values: Vec<C64> = values.iter().map(|z| z.conj()).collect();
        let mut cols: Vec<Vec<C64>> = (0..n)
            .map(|k| s.left_eigenvector(k).iter().map(|z| z.conj()).collect())
            .collect();
        repair_vectors(&ah, &conj_values, &mut cols, &groups)?;
        let mut left: Vec<Vec<C64>> = cols
            .into_iter()
            .map(|c| c.into_iter().map(|z| z.conj()).collect())
            .collect();
        biorthonormalize(&mut left, &right, &groups, &mut defective);
        Some(left)
    } else {
        None
    };

    Ok(EigenvectorPair {
        values,
        right,
        left,
        defective,
    })
}

fn biorthonormalize(left: &mut [Vec<C64>], right: &[Vec<C64>], groups: &[Vec<usize>], defective: &mut Vec<usize>) {
    let mut grouped = vec![false; left.len()];
    for group in groups {
        for &i in group {
            grouped[i] = true;
            normalize(&mut left[i]);
        }
        let k = group.len();
        let gram = ComplexMatrix::from_fn(k, |a, b| dot_plain(&left[group[a]], &right[group[b]]));
        match Lu::factor(&gram, DEFECTIVE_OVERLAP) {
            Ok(lu) => {
                // L' = G^{-1} L, so that L' R = I on the cluster
                let inv = lu.solve_matrix(&ComplexMatrix::identity(k));
                let old: Vec<Vec<C64>> = group.iter().map(|&i| left[i].clone()).collect();
                for (a, &i) in group.iter().enumerate() {
                    let row = &mut left[i];
                    row.iter_mut().for_each(|z| *z = ZERO);
                    for (b, ob) in old.iter().enumerate() {
                        let g = inv[(a, b)];
                        for (z, o) in row.iter_mut().zip(ob) {
                            *z += g * o;
                        }
                    }
                }
            }
            Err(_) => defective.extend(group.iter().copied()),
        }
    }
    for i in 0..left.len() {
        if grouped[i] {
            continue;
        }
        normalize(&mut left[i]);
        let overlap = dot_plain(&left[i], &right[i]);
        if overlap.norm() < DEFECTIVE_OVERLAP {
            defective.push(i);
        } else {
            let inv = 1.0 / overlap;
            left[i].iter_mut().for_each(|z| *z *= inv);
        }
    }
    defective.sort_unstable();
}

/// Eigenvalues (descending) and orthonormal eigenvectors of a small
/// Hermitian matrix.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<(Vec<f64>, Vec<Vec<C64>>), LinalgError> {
    let n = m.dim();
    let s = schur(m)?;
    let mut pairs: Vec<(f64, Vec<C64>)> = (0..n)
        .map(|k| {
            let mut v: Vec<C64> = (0..n).map(|r| s.z[(r, k)]).collect();
            normalize(&mut v);
            (s.t[(k, k)].re, v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(pairs.into_iter().unzip())
}

#[allow(dead_code)]
pub(crate) fn max_residual(a: &ComplexMatrix, e: &EigenvectorPair) -> f64 {
    e.values
        .iter()
        .zip(&e.right)
        .map(|(&l, v)| residual(a, l, v) / norm2(v))
        .fold(0.0, f64::max)
}

//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants of degree 3, 5, 7, 9 or 13, the degree chosen from the
//! 1-norm so that the backward error stays at unit roundoff (Higham 2005).

use super::{ComplexMatrix, LinalgError, Lu, C64};

const THETA: [(usize, f64); 5] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
    (13, 5.371_920_351_148_152),
];

/// Largest 1-norm handled by the degree-13 approximant without squaring.
pub const PADE_THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `U` (odd part) and `V` (even part) of the degree-m Padé numerator for
/// m <= 9, from the even powers `pows = [I, A^2, A^4, ...]`.
fn odd_even_low(a: &ComplexMatrix, pows: &[ComplexMatrix], b: &[f64]) -> (ComplexMatrix, ComplexMatrix) {
    let n = a.dim();
    let mut u_inner = ComplexMatrix::zeros(n);
    let mut v = ComplexMatrix::zeros(n);
    for (j, p) in pows.iter().enumerate() {
        u_inner = u_inner.add_scaled(p, re(b[2 * j + 1]));
        v = v.add_scaled(p, re(b[2 * j]));
    }
    (a.matmul(&u_inner), v)
}

fn pade(a: &ComplexMatrix, degree: usize) -> Result<ComplexMatrix, LinalgError> {
    let n = a.dim();
    let eye = ComplexMatrix::identity(n);
    let a2 = a.matmul(a);
    let (u, v) = match degree {
        3 => odd_even_low(a, &[eye, a2], &B3),
        5 => {
            let a4 = a2.matmul(&a2);
            odd_even_low(a, &[eye, a2, a4], &B5)
        }
        7 => {
            let a4 = a2.matmul(&a2);
            let a6 = a4.matmul(&a2);
            odd_even_low(a, &[eye, a2, a4, a6], &B7)
        }
        9 => {
            let a4 = a2.matmul(&a2);
            let a6 = a4.matmul(&a2);
            let a8 = a6.matmul(&a2);
            odd_even_low(a, &[eye, a2, a4, a6, a8], &B9)
        }
        _ => {
            let b = &B13;
            let a4 = a2.matmul(&a2);
            let a6 = a4.matmul(&a2);
            let w1 = a6.scale(re(b[13])).add_scaled(&a4, re(b[11])).add_scaled(&a2, re(b[9]));
            let w2 = a6
                .matmul(&w1)
                .add_scaled(&a6, re(b[7]))
                .add_scaled(&a4, re(b[5]))
                .add_scaled(&a2, re(b[3]))
                .add_scaled(&eye, re(b[1]));
            let z1 = a6.scale(re(b[12])).add_scaled(&a4, re(b[10])).add_scaled(&a2, re(b[8]));
            let v = a6
                .matmul(&z1)
                .add_scaled(&a6, re(b[6]))
                .add_scaled(&a4, re(b[4]))
                .add_scaled(&a2, re(b[2]))
                .add_scaled(&eye, re(b[0]));
            (a.matmul(&w2), v)
        }
    };
    let lu = Lu::factor(&v.sub(&u), 0.0)?;
    Ok(lu.solve_matrix(&v.add(&u)))
}

/// `exp(a)`.
pub fn expm(a: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let n = a.dim();
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let norm = a.norm_one();
    for &(degree, theta) in &THETA[..4] {
        if norm <= theta {
            return pade(a, degree);
        }
    }
    let squarings = if norm > PADE_THETA_13 {
        (norm / PADE_THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(re(0.5f64.powi(squarings)));
    let mut r = pade(&scaled, 13)?;
    for _ in 0..squarings {
        r = r.matmul(&r);
    }
    Ok(r)
}

//! Independent numerical oracles shared by the integration tests. Nothing
//! here calls into the library's density code.
#![allow(dead_code)]

use std::f64::consts::PI;

pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

pub fn laplace_pdf(x: f64, loc: f64, b: f64) -> f64 {
    (-(x - loc).abs() / b).exp() / (2.0 * b)
}

pub fn cauchy_pdf(x: f64, loc: f64, g: f64) -> f64 {
    let z = (x - loc) / g;
    1.0 / (PI * g * (1.0 + z * z))
}

/// Gaussian mixture density from parallel parameter slices.
pub fn gmm_pdf(w: &[f64], means: &[f64], sds: &[f64], x: f64) -> f64 {
    w.iter()
        .zip(means)
        .zip(sds)
        .map(|((w, m), s)| w * normal_pdf(x, *m, *s))
        .sum()
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn adapt(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adapt(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + adapt(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature on `[a, b]`, pre-split into `pieces` panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + h * i as f64;
            let hi = lo + h;
            let (flo, fhi) = (f(lo), f(hi));
            let (m, fm, whole) = simpson(&f, lo, flo, hi, fhi);
            adapt(&f, lo, flo, hi, fhi, m, fm, whole, tol / pieces as f64, 40)
        })
        .sum()
}

/// `Σ p_i ln(p_i / q_i)`.
pub fn discrete_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}

/// `-Σ p_i ln p_i`.
pub fn discrete_entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|x| **x > 0.0)
        .map(|x| x * x.ln())
        .sum::<f64>()
}

/// Mixture of pmfs with weights `w`.
pub fn mix_pmf(w: &[f64], comps: &[Vec<f64>]) -> Vec<f64> {
    let n = comps[0].len();
    (0..n)
        .map(|a| w.iter().zip(comps).map(|(wi, c)| wi * c[a]).sum())
        .collect()
}

/// Shannon entropy of a 1-D density by quadrature.
pub fn entropy_quad(pdf: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    integrate(
        |x| {
            let p = pdf(x);
            if p > 0.0 {
                -p * p.ln()
            } else {
                0.0
            }
        },
        a,
        b,
        400,
        1e-12,
    )
}

/// Smallest eigenvalue of a 1x1 or 2x2 symmetric matrix in closed form.
pub fn min_eigenvalue_sym(a: &[Vec<f64>]) -> f64 {
    match a.len() {
        1 => a[0][0],
        2 => {
            let (p, q, r) = (a[0][0], a[1][1], a[0][1]);
            0.5 * (p + q) - (0.25 * (p - q) * (p - q) + r * r).sqrt()
        }
        n => panic!("unsupported size {n}"),
    }
}

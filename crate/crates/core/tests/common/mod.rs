#![allow(dead_code)]

use backstep::coefficients::{CoefficientFamily, ProblemSpec, TimeProfile};
use backstep::kernel::{solve_direct_kernel, solve_inverse_kernel, KernelGrid, PicardOptions};
use backstep::poly::{Poly, Poly2};

pub fn spec(c1: &[f64], c2: TimeProfile, f: Poly2, lambda0: f64) -> ProblemSpec {
    ProblemSpec::new(
        CoefficientFamily {
            c1: Poly::new(c1.to_vec()),
            c2,
            f,
        },
        lambda0,
        2.0,
    )
}

/// `f ≡ 0`, `c1 = r x²`.
pub fn quadratic(r: f64, lambda0: f64) -> ProblemSpec {
    spec(
        &[0.0, 0.0, r],
        TimeProfile::default(),
        Poly2::zero(),
        lambda0,
    )
}

/// `f = 1 + xy`, `c1 = 2x²`, `λ0 = 10`.
pub fn with_convolution() -> ProblemSpec {
    spec(
        &[0.0, 0.0, 2.0],
        TimeProfile::default(),
        Poly2::new(vec![vec![1.0], vec![0.0, 1.0]]),
        10.0,
    )
}

pub fn opts(n_xi: usize) -> PicardOptions {
    PicardOptions::new(n_xi, 1e-10, 200)
}

pub fn direct(spec: &ProblemSpec, n_xi: usize) -> KernelGrid {
    solve_direct_kernel(spec, &opts(n_xi)).expect("direct kernel")
}

pub fn inverse(spec: &ProblemSpec, n_xi: usize) -> KernelGrid {
    solve_inverse_kernel(spec, &opts(n_xi)).expect("inverse kernel")
}

/// The kernel of the null problem, identically zero.
pub fn zero_kernel(n_xi: usize) -> KernelGrid {
    direct(&quadratic(0.0, 0.0), n_xi)
}

/// `I1(z) = (1/π) ∫_0^π e^{z cos θ} cos θ dθ` by composite Simpson.
pub fn bessel_i1(z: f64) -> f64 {
    let n = 2000;
    let h = std::f64::consts::PI / n as f64;
    let g = |t: f64| (z * t.cos()).exp() * t.cos();
    let mut acc = g(0.0) + g(std::f64::consts::PI);
    for i in 1..n {
        acc += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0 / std::f64::consts::PI
}

/// `I2(z) = (1/π) ∫_0^π e^{z cos θ} cos 2θ dθ` by composite Simpson.
pub fn bessel_i2(z: f64) -> f64 {
    let n = 2000;
    let h = std::f64::consts::PI / n as f64;
    let g = |t: f64| (z * t.cos()).exp() * (2.0 * t).cos();
    let mut acc = g(0.0) + g(std::f64::consts::PI);
    for i in 1..n {
        acc += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0 / std::f64::consts::PI
}

/// Composite Simpson on `[a, b]` with `n` (even) panels.
pub fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Direct kernel for `c ≡ 0`, `f ≡ 0`: `λ0 x I1(z)/z`, `z = √(λ0(x² − y²))`.
pub fn bessel_kernel(lambda0: f64, x: f64, y: f64) -> f64 {
    let z = (lambda0 * (x * x - y * y)).max(0.0).sqrt();
    if z < 1e-8 {
        lambda0 * x / 2.0
    } else {
        lambda0 * x * bessel_i1(z) / z
    }
}

/// `∂k/∂x` of [`bessel_kernel`]: `λ0 (I1(z)/z + λ0 x² I2(z)/z²)`.
pub fn bessel_kernel_dx(lambda0: f64, x: f64, y: f64) -> f64 {
    let z = (lambda0 * (x * x - y * y)).max(0.0).sqrt();
    if z < 1e-6 {
        lambda0 * (0.5 + lambda0 * x * x / 8.0)
    } else {
        lambda0 * (bessel_i1(z) / z + lambda0 * x * x * bessel_i2(z) / (z * z))
    }
}

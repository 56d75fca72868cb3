//! Analytic solution of the exterior problem at `k = 0`.
//!
//! With no divergence penalty the Euler–Lagrange system decouples into a
//! componentwise Laplace problem, so the shifted solution is the harmonic
//! extension of the boundary data `g(ν) = ν⊗ν − e_z⊗e_z`.  Splitting `g`
//! into its spherical average and the remaining degree-2 harmonic,
//!
//! ```text
//! g = c0 + g2(ν),   c0 = I/3 − e_z⊗e_z,   g2(ν) = ν⊗ν − I/3,
//! ```
//!
//! the decaying exterior extension is `Q(x) = c0 / r + g2(x/r) / r³`.  With a
//! far Dirichlet truncation at `r = R` (zero shifted data there, matching the
//! finite-element domain) the radial factors become the two-point harmonic
//! profiles for degrees 0 and 2.
//!
//! This module is the independent oracle against which both the
//! representation formula and the finite-element solver are validated; it
//! never calls into either.

use crate::qtensor::QTensor;

/// Spherical-average part of the boundary data, `c0 = I/3 − e_z⊗e_z`.
fn c0() -> QTensor {
    QTensor::new(1.0 / 3.0, 1.0 / 3.0, -2.0 / 3.0, 0.0, 0.0, 0.0)
}

/// Degree-2 part evaluated at a direction: `g2(ν) = ν⊗ν − I/3`.
fn g2(nu: [f64; 3]) -> QTensor {
    QTensor::new(
        nu[0] * nu[0] - 1.0 / 3.0,
        nu[1] * nu[1] - 1.0 / 3.0,
        nu[2] * nu[2] - 1.0 / 3.0,
        nu[0] * nu[1],
        nu[0] * nu[2],
        nu[1] * nu[2],
    )
}

/// Radial profiles `(f0, f2)` at radius `r`, both equal to 1 at `r = 1`.
///
/// * `outer_radius = None`: decaying free-space profiles `1/r` and `1/r³`.
/// * `outer_radius = Some(R)`: harmonic profiles vanishing at `r = R`
///   (`(1/r − 1/R)/(1 − 1/R)` and the degree-2 analogue `A r² + B r⁻³`).
fn radial_profiles(r: f64, outer_radius: Option<f64>) -> (f64, f64) {
    match outer_radius {
        None => (1.0 / r, 1.0 / (r * r * r)),
        Some(big_r) => {
            let f0 = (1.0 / r - 1.0 / big_r) / (1.0 - 1.0 / big_r);
            let r5 = big_r.powi(5);
            let a = -1.0 / (r5 - 1.0);
            let b = r5 / (r5 - 1.0);
            let f2 = a * r * r + b / (r * r * r);
            (f0, f2)
        }
    }
}

/// Shifted solution `Q − Q_∞` at a point with `|p| ≥ 1`.
///
/// `outer_radius` selects free space (`None`) or the truncated shell used by
/// the finite-element route (`Some(R)`).
pub fn shifted_solution(p: [f64; 3], outer_radius: Option<f64>) -> QTensor {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let nu = [p[0] / r, p[1] / r, p[2] / r];
    let (f0, f2) = radial_profiles(r, outer_radius);
    c0().scale(f0).add(&g2(nu).scale(f2))
}

/// Full tensor `Q = (Q − Q_∞) + Q_∞`.
pub fn full_solution(p: [f64; 3], outer_radius: Option<f64>) -> QTensor {
    shifted_solution(p, outer_radius).add(&crate::qtensor::q_infinity())
}

/// Conormal data `N(Q)` of the free-space solution on the unit sphere.
///
/// At `k = 0`, `N(Q) = −∂Q/∂ν` with the outward-of-fluid normal `ν = −x̂`,
/// i.e. `+∂Q/∂r`; differentiating the radial profiles at `r = 1` gives
/// `N(Q)(ν) = −c0 − 3 g2(ν)`.
pub fn free_space_neumann(nu: [f64; 3]) -> QTensor {
    c0().scale(-1.0).add(&g2(nu).scale(-3.0))
}

/// Equatorial Saturn-ring radius of the analytic solution: along the ray
/// `(ρ, 0, 0)` the radial and vertical eigenvalues of the full tensor cross
/// where `1/ρ³ + f(ρ)/ρ`-type profiles balance.  In free space the condition
/// reduces to `ρ³ = ρ² + 1`; with truncation at `R` the profiles above are
/// used directly.  Solved by bisection to 1e-12.
pub fn ring_radius(outer_radius: Option<f64>) -> f64 {
    // Crossing of full Q11 and Q33 on the equator:
    // shifted difference Q11 − Q33 equals g2-part (ν=e_x) f2·(2/3+1/3)=f2
    // plus c0 part f0·(1/3+2/3)=f0, and the far-field offset contributes −1.
    let gap = |rho: f64| {
        let (f0, f2) = radial_profiles(rho, outer_radius);
        f2 + f0 - 1.0
    };
    let (mut a, mut b) = (1.0 + 1e-9, 4.0);
    debug_assert!(gap(a) > 0.0 && gap(b) < 0.0);
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        if gap(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

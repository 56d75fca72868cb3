//! The differential operators of the problem and the sphere-integral
//! calculus behind the representation formula, applied to arbitrary smooth
//! tensor fields via central finite differences and product quadrature.
//!
//! Sign conventions: `ν` always denotes the normal pointing OUT of the fluid
//! domain — on the colloid surface `ν = −x/|x|`, and on a small sphere around
//! an interior pole `ν` points toward the pole.

use crate::qtensor::QTensor;
use crate::{fundsol, Error, Result};

/// A smooth symmetric-matrix field together with the finite-difference step
/// used to approximate its derivatives (central differences, O(h²)).
pub struct TensorFieldFn<'a> {
    pub f: Box<dyn Fn([f64; 3]) -> QTensor + 'a>,
    pub h: f64,
}

impl<'a> TensorFieldFn<'a> {
    /// Default step 1e-3; callers probing convergence build several wrappers
    /// with halved steps.
    pub fn new(f: impl Fn([f64; 3]) -> QTensor + 'a) -> Self {
        TensorFieldFn {
            f: Box::new(f),
            h: 1e-3,
        }
    }

    pub fn with_step(f: impl Fn([f64; 3]) -> QTensor + 'a, h: f64) -> Self {
        TensorFieldFn { f: Box::new(f), h }
    }

    fn eval(&self, p: [f64; 3]) -> [[f64; 3]; 3] {
        (self.f)(p).to_matrix()
    }

    /// First partials: `grad[l][i][j] = ∂_l f_ij` at `p`.
    pub fn gradient(&self, p: [f64; 3]) -> [[[f64; 3]; 3]; 3] {
        let h = self.h;
        let mut g = [[[0.0; 3]; 3]; 3];
        for l in 0..3 {
            let mut pp = p;
            let mut pm = p;
            pp[l] += h;
            pm[l] -= h;
            let fp = self.eval(pp);
            let fm = self.eval(pm);
            for i in 0..3 {
                for j in 0..3 {
                    g[l][i][j] = (fp[i][j] - fm[i][j]) / (2.0 * h);
                }
            }
        }
        g
    }

    /// Second partials: `hess[a][b][i][j] = ∂_a ∂_b f_ij` at `p`.
    fn hessian(&self, p: [f64; 3]) -> [[[[f64; 3]; 3]; 3]; 3] {
        let h = self.h;
        let f0 = self.eval(p);
        let mut hes = [[[[0.0; 3]; 3]; 3]; 3];
        for a in 0..3 {
            let mut pp = p;
            let mut pm = p;
            pp[a] += h;
            pm[a] -= h;
            let fp = self.eval(pp);
            let fm = self.eval(pm);
            for i in 0..3 {
                for j in 0..3 {
                    hes[a][a][i][j] = (fp[i][j] - 2.0 * f0[i][j] + fm[i][j]) / (h * h);
                }
            }
        }
        for a in 0..3 {
            for b in (a + 1)..3 {
                let mut ppp = p;
                let mut ppm = p;
                let mut pmp = p;
                let mut pmm = p;
                ppp[a] += h;
                ppp[b] += h;
                ppm[a] += h;
                ppm[b] -= h;
                pmp[a] -= h;
                pmp[b] += h;
                pmm[a] -= h;
                pmm[b] -= h;
                let fpp = self.eval(ppp);
                let fpm = self.eval(ppm);
                let fmp = self.eval(pmp);
                let fmm = self.eval(pmm);
                for i in 0..3 {
                    for j in 0..3 {
                        let v = (fpp[i][j] - fpm[i][j] - fmp[i][j] + fmm[i][j]) / (4.0 * h * h);
                        hes[a][b][i][j] = v;
                        hes[b][a][i][j] = v;
                    }
                }
            }
        }
        hes
    }
}

/// Euler–Lagrange operator of the energy:
/// `D(Q)_ij = −ΔQ_ij − (k/2)(∂_j Div(Q)_i + ∂_i Div(Q)_j − (2/3) div(Div Q) δ_ij)`.
pub fn apply_d(f: &TensorFieldFn, p: [f64; 3], k: f64) -> QTensor {
    let hes = f.hessian(p);
    let mut out = [[0.0; 3]; 3];
    // ∂_a Div(Q)_i = Σ_l ∂_a ∂_l Q_il ; div Div Q = Σ_{i,l} ∂_i ∂_l Q_il
    let mut ddiv = [[0.0; 3]; 3]; // ddiv[a][i] = ∂_a Div(Q)_i
    for a in 0..3 {
        for i in 0..3 {
            ddiv[a][i] = (0..3).map(|l| hes[a][l][i][l]).sum();
        }
    }
    let divdiv: f64 = (0..3).map(|i| ddiv[i][i]).sum();
    for i in 0..3 {
        for j in 0..3 {
            let lap: f64 = (0..3).map(|a| hes[a][a][i][j]).sum();
            let delta = if i == j { 1.0 } else { 0.0 };
            out[i][j] =
                -lap - 0.5 * k * (ddiv[j][i] + ddiv[i][j] - 2.0 / 3.0 * divdiv * delta);
        }
    }
    QTensor::from_matrix(&out)
}

/// Adjoint operator:
/// `D*(φ)_ij = −Δφ_ij − (k/2)(∂_j Div(φ)_i + ∂_i Div(φ)_j) + (k/3) ∂_i ∂_j tr φ`.
pub fn apply_dstar(f: &TensorFieldFn, p: [f64; 3], k: f64) -> QTensor {
    let hes = f.hessian(p);
    let mut ddiv = [[0.0; 3]; 3];
    for a in 0..3 {
        for i in 0..3 {
            ddiv[a][i] = (0..3).map(|l| hes[a][l][i][l]).sum();
        }
    }
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let lap: f64 = (0..3).map(|a| hes[a][a][i][j]).sum();
            let ddtr: f64 = (0..3).map(|l| hes[i][j][l][l]).sum();
            out[i][j] = -lap - 0.5 * k * (ddiv[j][i] + ddiv[i][j]) + k / 3.0 * ddtr;
        }
    }
    QTensor::from_matrix(&out)
}

/// Boundary operator applied to kernels in the representation formula:
/// `L(φ)_ij = ∂φ_ij/∂ν + (k/2)(Div(φ)_i ν_j + Div(φ)_j ν_i) − (k/3) ∂_j tr(φ) ν_i`.
///
/// Note the last term is not symmetric in `(i, j)`; the full matrix is
/// returned as computed (no symmetrization) inside a [`QTensor`] whose
/// off-diagonal slots hold the symmetrized average — callers needing the raw
/// asymmetric matrix use [`boundary_l_matrix`].
pub fn boundary_l(f: &TensorFieldFn, p: [f64; 3], nu: [f64; 3], k: f64) -> Result<QTensor> {
    Ok(QTensor::from_matrix(&boundary_l_matrix(f, p, nu, k)?))
}

/// The (generally asymmetric) matrix of `L(φ)` — see [`boundary_l`].
pub fn boundary_l_matrix(
    f: &TensorFieldFn,
    p: [f64; 3],
    nu: [f64; 3],
    k: f64,
) -> Result<[[f64; 3]; 3]> {
    check_unit(nu)?;
    let g = f.gradient(p);
    let mut out = [[0.0; 3]; 3];
    let div = field_divergence(&g);
    let dtr: [f64; 3] = [
        g[0][0][0] + g[0][1][1] + g[0][2][2],
        g[1][0][0] + g[1][1][1] + g[1][2][2],
        g[2][0][0] + g[2][1][1] + g[2][2][2],
    ];
    for i in 0..3 {
        for j in 0..3 {
            let dnu: f64 = (0..3).map(|l| nu[l] * g[l][i][j]).sum();
            out[i][j] = dnu + 0.5 * k * (div[i] * nu[j] + div[j] * nu[i])
                - k / 3.0 * dtr[j] * nu[i];
        }
    }
    Ok(out)
}

/// Conormal (Neumann-type) boundary data of the solution:
/// `N(Q)_ij = −∂Q_ij/∂ν − (k/2)(Div(Q)_i ν_j + Div(Q)_j ν_i) + (k/3)(Div Q · ν) δ_ij`.
///
/// `Div Q · ν` is the 3-vector `Div Q` dotted with `ν`.  For traceless `Q`
/// the result is traceless.
pub fn boundary_n(f: &TensorFieldFn, p: [f64; 3], nu: [f64; 3], k: f64) -> Result<QTensor> {
    check_unit(nu)?;
    let g = f.gradient(p);
    Ok(boundary_n_from_gradient(&g, nu, k))
}

/// Same as [`boundary_n`], but from a precomputed gradient (used by the FEM
/// boundary-data extraction, where the gradient mixes exact tangential parts
/// with a fitted radial part).
pub fn boundary_n_from_gradient(g: &[[[f64; 3]; 3]; 3], nu: [f64; 3], k: f64) -> QTensor {
    let div = field_divergence(g);
    let div_nu: f64 = (0..3).map(|i| div[i] * nu[i]).sum();
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let dnu: f64 = (0..3).map(|l| nu[l] * g[l][i][j]).sum();
            let delta = if i == j { 1.0 } else { 0.0 };
            out[i][j] = -dnu - 0.5 * k * (div[i] * nu[j] + div[j] * nu[i])
                + k / 3.0 * div_nu * delta;
        }
    }
    QTensor::from_matrix(&out)
}

/// `Div(Q)_i = Σ_l ∂_l Q_il` from a gradient tensor.
fn field_divergence(g: &[[[f64; 3]; 3]; 3]) -> [f64; 3] {
    [
        g[0][0][0] + g[1][0][1] + g[2][0][2],
        g[0][1][0] + g[1][1][1] + g[2][1][2],
        g[0][2][0] + g[1][2][1] + g[2][2][2],
    ]
}

pub(crate) fn check_unit(nu: [f64; 3]) -> Result<()> {
    let n = (nu[0] * nu[0] + nu[1] * nu[1] + nu[2] * nu[2]).sqrt();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "normal must be a unit vector, |nu| = {n}"
        )));
    }
    Ok(())
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton iteration on the
/// Legendre recurrence; standard textbook construction).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Initial guess (Chebyshev-like).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' by recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Product surface quadrature on a sphere of radius `eps` centered at
/// `center`: Gauss–Legendre in `cos θ` times a uniform trapezoid in `φ`.
/// Calls `f(point, outward_unit_normal, weight)` for every node; weights sum
/// to the sphere area `4π eps²`.
pub fn sphere_quadrature_apply(
    center: [f64; 3],
    eps: f64,
    n_theta: usize,
    n_phi: usize,
    mut f: impl FnMut([f64; 3], [f64; 3], f64),
) {
    let (ct, wt) = gauss_legendre(n_theta);
    let dphi = std::f64::consts::TAU / n_phi as f64;
    for (c, w) in ct.iter().zip(wt.iter()) {
        let st = (1.0 - c * c).sqrt();
        for ip in 0..n_phi {
            let phi = (ip as f64 + 0.5) * dphi;
            let dir = [st * phi.cos(), st * phi.sin(), *c];
            let p = [
                center[0] + eps * dir[0],
                center[1] + eps * dir[1],
                center[2] + eps * dir[2],
            ];
            f(p, dir, w * dphi * eps * eps);
        }
    }
}

/// Surface integral `∫_{∂B_eps(c)} (x−c)^{p1} (y−c)^{p2} (z−c)^{p3} / r⁶ dS`
/// for exponents summing to 4.  Analytically independent of `eps` and of the
/// center: `4π/5` when some exponent is 4, `4π/15` for the pattern (2,2,0),
/// zero whenever any exponent is odd.
pub fn sphere_monomial_integral(p1: u32, p2: u32, p3: u32, eps: f64) -> Result<f64> {
    sphere_monomial_integral_at([0.0; 3], p1, p2, p3, eps)
}

/// Center-shifted variant of [`sphere_monomial_integral`].
pub fn sphere_monomial_integral_at(
    center: [f64; 3],
    p1: u32,
    p2: u32,
    p3: u32,
    eps: f64,
) -> Result<f64> {
    if p1 + p2 + p3 != 4 {
        return Err(Error::InvalidArgument(format!(
            "exponents must sum to 4, got ({p1}, {p2}, {p3})"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sphere radius must be positive, got {eps}"
        )));
    }
    let mut acc = 0.0;
    sphere_quadrature_apply(center, eps, 64, 128, |p, _dir, w| {
        let d = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
        let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        let num = d[0].powi(p1 as i32) * d[1].powi(p2 as i32) * d[2].powi(p3 as i32);
        acc += w * num / (r2 * r2 * r2);
    });
    Ok(acc)
}

/// The full 3×3 matrix of constants
/// `C^mn_ij = ∫_{∂B_eps(p)} L(F^mn_p)_ij dS`, computed by quadrature with the
/// normal pointing toward the pole (out of the fluid).  The limit value is
/// the indicator of `(i,j) ∈ {(m,n), (n,m)}` and is independent of `eps` by
/// kernel homogeneity.
pub fn c_constant_matrix(m: usize, n: usize, k: f64, eps: f64) -> Result<[[f64; 3]; 3]> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sphere radius must be positive, got {eps}"
        )));
    }
    // The kernel is translation invariant; integrate around the origin.
    // Derivative step tied to eps keeps the relative FD error scale-free.
    let field = TensorFieldFn::with_step(
        move |x| fundsol::fundamental(m, n, x, k).expect("off-pole evaluation"),
        1e-4 * eps,
    );
    let mut acc = [[0.0; 3]; 3];
    let mut err: Result<()> = Ok(());
    sphere_quadrature_apply([0.0; 3], eps, 64, 128, |p, dir, w| {
        if err.is_err() {
            return;
        }
        let nu = [-dir[0], -dir[1], -dir[2]];
        match boundary_l_matrix(&field, p, nu, k) {
            Ok(l) => {
                for i in 0..3 {
                    for j in 0..3 {
                        acc[i][j] += w * l[i][j];
                    }
                }
            }
            Err(e) => err = Err(e),
        }
    });
    err?;
    Ok(acc)
}

/// Single entry `C^mn_ij` (zero-based `i`, `j` are NOT used here: `i`, `j`
/// are 1-based like `m`, `n`, matching the analytic statement).
pub fn c_constant(m: usize, n: usize, i: usize, j: usize, k: f64, eps: f64) -> Result<f64> {
    if !(1..=3).contains(&i) || !(1..=3).contains(&j) {
        return Err(Error::InvalidArgument(format!(
            "component indices must be in 1..=3, got ({i}, {j})"
        )));
    }
    Ok(c_constant_matrix(m, n, k, eps)?[i - 1][j - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fundsol::INDEX_PAIRS;
    use std::f64::consts::PI;

    #[test]
    fn d_of_constant_and_linear_fields_vanishes() {
        let c = QTensor::new(0.3, -0.1, -0.2, 0.5, 0.4, -0.6);
        let f = TensorFieldFn::new(move |_| c);
        assert!(apply_d(&f, [0.2, 0.3, -0.1], 2.0).norm() < 1e-9);

        let a = QTensor::new(1.0, 2.0, -3.0, 0.5, -0.5, 0.25);
        let lin = TensorFieldFn::new(move |x| a.scale(x[0]));
        assert!(apply_d(&lin, [0.2, -0.4, 0.9], 2.0).norm() < 1e-9);
    }

    #[test]
    fn d_hand_value_quadratic_field() {
        // Q12 = Q21 = x1 x2, all other components zero:
        // D(Q) = k diag(−1/3, −1/3, 2/3).
        let f = TensorFieldFn::new(|x| QTensor::new(0.0, 0.0, 0.0, x[0] * x[1], 0.0, 0.0));
        let k = 1.7;
        let d = apply_d(&f, [0.3, -0.8, 0.5], k);
        let want = QTensor::new(-k / 3.0, -k / 3.0, 2.0 * k / 3.0, 0.0, 0.0, 0.0);
        assert!(d.sub(&want).norm() < 1e-8, "{d:?}");
    }

    #[test]
    fn dstar_hand_value_quadratic_field() {
        // φ12 = φ21 = x1 x2 (traceless): D*(φ) = diag(−k, −k, 0).
        let f = TensorFieldFn::new(|x| QTensor::new(0.0, 0.0, 0.0, x[0] * x[1], 0.0, 0.0));
        let k = 2.3;
        let d = apply_dstar(&f, [1.0, 0.5, -0.5], k);
        let want = QTensor::new(-k, -k, 0.0, 0.0, 0.0, 0.0);
        assert!(d.sub(&want).norm() < 1e-8, "{d:?}");
    }

    #[test]
    fn dstar_k0_is_componentwise_laplacian() {
        let f = |x: [f64; 3]| {
            QTensor::new(
                x[0] * x[0] * x[1],
                x[1] * x[2],
                -x[0] * x[2] * x[2],
                x[0] * x[1] * x[2],
                x[1] * x[1],
                x[2] * x[2] * x[2],
            )
        };
        let p = [0.4, -0.2, 0.7];
        let tf = TensorFieldFn::new(f);
        let d = apply_dstar(&tf, p, 0.0);
        // −Δ componentwise, by hand.
        let want = QTensor::new(
            -2.0 * p[1],
            0.0,
            2.0 * p[0],
            0.0,
            -2.0,
            -6.0 * p[2],
        );
        assert!(d.sub(&want).norm() < 1e-7, "{d:?}");
    }

    #[test]
    fn dstar_annihilates_fundamental_solutions_with_order() {
        // FD application of D* to each kernel at off-pole points: the exact
        // value is zero, so the residual must shrink at O(h²) (observed
        // order ≥ 1.8 under halving).
        let pts = [[0.7, 0.3, -0.5], [1.5, -1.0, 0.8], [0.5, 0.1, 0.2]];
        for &(m, n) in &INDEX_PAIRS {
            for &p in &pts {
                for &k in &[0.5, 5.0] {
                    // Steps large enough that O(h²) truncation dominates the
                    // rounding floor of the second-difference stencils.
                    let r1 = {
                        let f = TensorFieldFn::with_step(
                            move |x| fundsol::fundamental(m, n, x, k).unwrap(),
                            8e-3,
                        );
                        apply_dstar(&f, p, k).norm()
                    };
                    let r2 = {
                        let f = TensorFieldFn::with_step(
                            move |x| fundsol::fundamental(m, n, x, k).unwrap(),
                            4e-3,
                        );
                        apply_dstar(&f, p, k).norm()
                    };
                    let order = (r1 / r2).log2();
                    assert!(
                        order >= 1.8,
                        "F^{m}{n} at {p:?}, k={k}: residuals {r1:.3e} -> {r2:.3e}, order {order:.2}"
                    );
                }
            }
        }
    }

    #[test]
    fn boundary_operators_on_simple_fields() {
        let c = QTensor::new(0.2, -0.1, -0.1, 0.7, 0.0, 0.3);
        let f = TensorFieldFn::new(move |_| c);
        let nu = [0.0, 0.0, 1.0];
        assert!(boundary_l(&f, [0.1; 3], nu, 3.0).unwrap().norm() < 1e-10);
        assert!(boundary_n(&f, [0.1; 3], nu, 3.0).unwrap().norm() < 1e-10);

        // k = 0: L is the plain normal derivative, N its negative.
        let g = TensorFieldFn::new(|x| QTensor::new(x[2], -x[2], 0.0, x[0], 0.0, 0.0));
        let l = boundary_l(&g, [0.0; 3], nu, 0.0).unwrap();
        assert!(l.sub(&QTensor::new(1.0, -1.0, 0.0, 0.0, 0.0, 0.0)).norm() < 1e-9);
        let nq = boundary_n(&g, [0.0; 3], nu, 0.0).unwrap();
        assert!(nq.add(&QTensor::new(1.0, -1.0, 0.0, 0.0, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn boundary_n_linear_field_hand_value() {
        // Q(x) = A x1, nu = e1:
        // N(Q) = −A − (k/2)(a1⊗e1 + e1⊗a1) + (k/3)(a1·e1) I,
        // where a1 = (A11, A12, A13) is the first column of A.
        let a = QTensor::new(0.6, -0.2, -0.4, 0.3, -0.7, 0.1);
        let f = TensorFieldFn::new(move |x| a.scale(x[0]));
        let k = 1.9;
        let nu = [1.0, 0.0, 0.0];
        let got = boundary_n(&f, [0.3, 0.1, 0.2], nu, k).unwrap();
        let a1 = [a.q11, a.q12, a.q13];
        let mut want = [[0.0; 3]; 3];
        let am = a.to_matrix();
        for i in 0..3 {
            for j in 0..3 {
                let delta = if i == j { 1.0 } else { 0.0 };
                want[i][j] = -am[i][j]
                    - 0.5
                        * k
                        * (a1[i] * (j == 0) as i32 as f64 + a1[j] * (i == 0) as i32 as f64)
                    + k / 3.0 * a1[0] * delta;
            }
        }
        assert!(got.sub(&QTensor::from_matrix(&want)).norm() < 1e-9);
    }

    #[test]
    fn boundary_l_matches_hand_expansion_on_polynomial_field() {
        // Random-ish polynomial field, nu not axis-aligned: compare the
        // implementation against a directly coded expansion of the formula
        // with analytic derivatives.
        let f = |x: [f64; 3]| {
            QTensor::new(
                x[0] * x[1],
                x[1] * x[2],
                x[0] * x[2],
                x[0] * x[0],
                x[1] * x[1],
                x[2] * x[2],
            )
        };
        let p = [0.3, -0.5, 0.7];
        let nu = [2.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0];
        let k = 2.5;
        let tf = TensorFieldFn::new(f);
        let got = boundary_l_matrix(&tf, p, nu, k).unwrap();
        // Analytic gradient g[l][i][j] = ∂_l Q_ij.
        let (x, y, z) = (p[0], p[1], p[2]);
        let g = [
            [[y, 2.0 * x, 0.0], [2.0 * x, 0.0, 0.0], [0.0, 0.0, z]],
            [[x, 0.0, 2.0 * y], [0.0, z, 0.0], [2.0 * y, 0.0, 0.0]],
            [[0.0, 0.0, 0.0], [0.0, y, 2.0 * z], [0.0, 2.0 * z, x]],
        ];
        let div = [
            g[0][0][0] + g[1][0][1] + g[2][0][2],
            g[0][1][0] + g[1][1][1] + g[2][1][2],
            g[0][2][0] + g[1][2][1] + g[2][2][2],
        ];
        let dtr = [
            g[0][0][0] + g[0][1][1] + g[0][2][2],
            g[1][0][0] + g[1][1][1] + g[1][2][2],
            g[2][0][0] + g[2][1][1] + g[2][2][2],
        ];
        for i in 0..3 {
            for j in 0..3 {
                let dnu: f64 = (0..3).map(|l| nu[l] * g[l][i][j]).sum();
                let want = dnu + 0.5 * k * (div[i] * nu[j] + div[j] * nu[i])
                    - k / 3.0 * dtr[j] * nu[i];
                assert!((got[i][j] - want).abs() < 1e-8, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn sphere_monomial_table() {
        for eps in [0.5, 1.25] {
            assert!((sphere_monomial_integral(4, 0, 0, eps).unwrap() - 4.0 * PI / 5.0).abs() < 1e-8);
            assert!((sphere_monomial_integral(0, 4, 0, eps).unwrap() - 4.0 * PI / 5.0).abs() < 1e-8);
            assert!(
                (sphere_monomial_integral(2, 2, 0, eps).unwrap() - 4.0 * PI / 15.0).abs() < 1e-8
            );
            assert!(
                (sphere_monomial_integral(0, 2, 2, eps).unwrap() - 4.0 * PI / 15.0).abs() < 1e-8
            );
            assert!(sphere_monomial_integral(3, 1, 0, eps).unwrap().abs() < 1e-8);
            assert!(sphere_monomial_integral(1, 1, 2, eps).unwrap().abs() < 1e-8);
        }
        assert!(sphere_monomial_integral(3, 0, 0, 1.0).is_err());
    }

    #[test]
    fn sphere_monomial_translation_invariance() {
        let a = sphere_monomial_integral(2, 1, 1, 0.7).unwrap();
        let b = sphere_monomial_integral_at([3.0, -2.0, 5.0], 2, 1, 1, 0.7).unwrap();
        assert!((a - b).abs() < 1e-10);
        let c = sphere_monomial_integral(4, 0, 0, 0.7).unwrap();
        let d = sphere_monomial_integral_at([1.0, 1.0, 1.0], 4, 0, 0, 0.7).unwrap();
        assert!((c - d).abs() < 1e-10);
    }

    #[test]
    fn c_constant_indicator_f11() {
        let k = 0.5;
        let c = c_constant_matrix(1, 1, k, 0.5).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if (i, j) == (0, 0) { 1.0 } else { 0.0 };
                assert!((c[i][j] - want).abs() < 1e-6, "C^11_{}{} = {}", i + 1, j + 1, c[i][j]);
            }
        }
    }

    #[test]
    fn c_constant_off_diagonal_sums_to_two() {
        let k = 0.5;
        let c = c_constant_matrix(1, 2, k, 0.5).unwrap();
        assert!((c[0][1] - 1.0).abs() < 1e-6);
        assert!((c[1][0] - 1.0).abs() < 1e-6);
        assert!(c[0][0].abs() < 1e-6 && c[2][2].abs() < 1e-6);
        assert!((c_constant(1, 2, 1, 2, k, 0.5).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn c_constant_eps_independent() {
        let a = c_constant(1, 1, 1, 1, 5.0, 0.5).unwrap();
        let b = c_constant(1, 1, 1, 1, 5.0, 0.25).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn adjoint_duality_compact_fields() {
        // ∫⟨φ, D(Q)⟩ = ∫⟨D*(φ), Q⟩ for fields vanishing to second order on
        // the boundary of the box [-1,1]³ (all boundary terms vanish).
        let bump = |x: [f64; 3]| {
            let b = (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]) * (1.0 - x[2] * x[2]);
            b * b * b
        };
        let phi = move |x: [f64; 3]| {
            QTensor::new(x[0], -x[1], x[2] * x[0], 0.3, x[1], -0.2).scale(bump(x))
        };
        let q = move |x: [f64; 3]| {
            QTensor::new(x[1] * x[2], 0.5, -x[0], x[2], 0.1 * x[0], x[1]).scale(bump(x))
        };
        let k = 1.3;
        let tphi = TensorFieldFn::with_step(phi, 1e-3);
        let tq = TensorFieldFn::with_step(q, 1e-3);
        // The integrands are polynomials of modest degree: 12-point
        // Gauss-Legendre per axis integrates them exactly up to FD error.
        let (nodes, weights) = gauss_legendre(12);
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for (ix, wx) in nodes.iter().zip(weights.iter()) {
            for (iy, wy) in nodes.iter().zip(weights.iter()) {
                for (iz, wz) in nodes.iter().zip(weights.iter()) {
                    let p = [*ix, *iy, *iz];
                    let w = wx * wy * wz;
                    lhs += w * phi(p).dot(&apply_d(&tq, p, k));
                    rhs += w * apply_dstar(&tphi, p, k).dot(&q(p));
                }
            }
        }
        assert!((lhs - rhs).abs() < 1e-4, "lhs {lhs} rhs {rhs}");
    }
}

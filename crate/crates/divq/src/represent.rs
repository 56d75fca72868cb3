//! Boundary representation formula: the value of the shifted solution at an
//! exterior point `p` from Dirichlet and conormal data on the unit sphere,
//!
//! ```text
//! (2 − δ_mn) Q_mn(p) = − ∫_{∂Ω} ⟨F^mn_p, N(Q)⟩ dS − ∫_{∂Ω} ⟨L(F^mn_p), Q_b − Q_∞⟩ dS ,
//! ```
//!
//! with the normal pointing out of the fluid (`ν = −x` on the unit sphere).
//! The primary mode is verification — closing the loop against the `k = 0`
//! analytic solution and against the volume solver; [`recover_neumann`] is an
//! experimental exterior-collocation solve for the unknown conormal data.

use crate::operators::{boundary_l_matrix, gauss_legendre, TensorFieldFn};
use crate::qtensor::{traceless_basis, QTensor, Vec5};
use crate::{fundsol, Error, Result};
use std::io::{BufRead, Write};

/// Evaluation points closer to the unit sphere than this margin are rejected:
/// the fixed product quadrature cannot resolve the near-singular kernels.
pub const EVAL_MARGIN: f64 = 0.2;

/// Nodes and weights of a product quadrature on the unit sphere
/// (Gauss–Legendre in `cos θ` × uniform trapezoid in `φ`); weights sum to 4π
/// and the rule integrates spherical polynomials of degree up to
/// `min(2 n_theta − 1, n_phi − 1)` exactly.
#[derive(Clone, Debug)]
pub struct SphereQuadrature {
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Product quadrature with `n_theta × n_phi` nodes.
pub fn build_quadrature(n_theta: usize, n_phi: usize) -> Result<SphereQuadrature> {
    if n_theta < 2 || n_phi < 4 {
        return Err(Error::InvalidArgument(format!(
            "quadrature needs n_theta >= 2 and n_phi >= 4, got {n_theta} x {n_phi}"
        )));
    }
    let (ct, wt) = gauss_legendre(n_theta);
    let dphi = std::f64::consts::TAU / n_phi as f64;
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    for (c, w) in ct.iter().zip(wt.iter()) {
        let st = (1.0 - c * c).sqrt();
        for ip in 0..n_phi {
            let phi = (ip as f64 + 0.5) * dphi;
            nodes.push([st * phi.cos(), st * phi.sin(), *c]);
            weights.push(w * dphi);
        }
    }
    Ok(SphereQuadrature { nodes, weights })
}

impl SphereQuadrature {
    /// Integrates a scalar function over the unit sphere.
    pub fn integrate(&self, mut f: impl FnMut([f64; 3]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(x, w)| w * f(*x))
            .sum()
    }
}

/// Dirichlet and conormal boundary fields on the unit sphere.
///
/// `dirichlet` carries the shifted trace `Q_b − Q_∞` (traceless pointwise);
/// `neumann` carries `N(Q)` with the out-of-fluid normal convention.
pub struct BoundaryData<'a> {
    pub dirichlet: Box<dyn Fn([f64; 3]) -> QTensor + 'a>,
    pub neumann: Box<dyn Fn([f64; 3]) -> QTensor + 'a>,
}

impl<'a> BoundaryData<'a> {
    pub fn new(
        dirichlet: impl Fn([f64; 3]) -> QTensor + 'a,
        neumann: impl Fn([f64; 3]) -> QTensor + 'a,
    ) -> Self {
        BoundaryData {
            dirichlet: Box::new(dirichlet),
            neumann: Box::new(neumann),
        }
    }

    /// The exact boundary data of the colloid problem paired with the
    /// analytic free-space conormal data of the `k = 0` solution.
    pub fn analytic_k0() -> Self {
        BoundaryData::new(
            |x| crate::qtensor::boundary_data(x).expect("unit-sphere node"),
            crate::harmonic::free_space_neumann,
        )
    }

    /// Exact Dirichlet data paired with conormal values known at the
    /// quadrature nodes (evaluation looks up the nearest node, which is
    /// exact when the same quadrature drives the boundary integrals).
    pub fn with_node_neumann(quad: &SphereQuadrature, values: Vec<QTensor>) -> Self {
        let nodes = quad.nodes.clone();
        BoundaryData::new(
            |x| crate::qtensor::boundary_data(x).expect("unit-sphere node"),
            move |x| {
                let idx = nodes
                    .iter()
                    .enumerate()
                    .min_by(|(_, a), (_, b)| {
                        let da: f64 = (0..3).map(|i| (a[i] - x[i]).powi(2)).sum();
                        let db: f64 = (0..3).map(|i| (b[i] - x[i]).powi(2)).sum();
                        da.partial_cmp(&db).unwrap()
                    })
                    .map(|(i, _)| i)
                    .unwrap();
                values[idx]
            },
        )
    }
}

/// Conormal data `N(Q)` at the quadrature nodes extracted from a volume
/// solution of the standard exterior problem.
///
/// The tangential part of the surface gradient is exact (differentiating
/// the radial extension of the anchoring data `ν⊗ν − e_z⊗e_z`); the radial
/// derivative comes from a one-sided second-order difference of the sampled
/// field at radii `1, 1 + step, 1 + 2·step`.
pub fn neumann_from_solution(
    sample_shifted: &dyn Fn([f64; 3]) -> crate::Result<QTensor>,
    quad: &SphereQuadrature,
    k: f64,
    step: f64,
) -> Result<Vec<QTensor>> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument("radial step must be positive".into()));
    }
    neumann_from_solution_at_radii(sample_shifted, quad, k, 1.0 + step, 1.0 + 2.0 * step)
}

/// Like [`neumann_from_solution`], but with explicitly chosen sample radii
/// `1 < r1 < r2`.  When the volume solution is a piecewise-linear finite
/// element field on a layered mesh, choosing `r1`, `r2` equal to the first
/// two layer radii samples the field exactly at vertex spheres and avoids
/// radial interpolation error inside elements.
pub fn neumann_from_solution_at_radii(
    sample_shifted: &dyn Fn([f64; 3]) -> crate::Result<QTensor>,
    quad: &SphereQuadrature,
    k: f64,
    r1: f64,
    r2: f64,
) -> Result<Vec<QTensor>> {
    if !(1.0 < r1 && r1 < r2) {
        return Err(Error::InvalidArgument(format!(
            "sample radii must satisfy 1 < r1 < r2, got r1 = {r1}, r2 = {r2}"
        )));
    }
    // One-sided derivative at r = 1 of the quadratic through
    // (1, q0), (r1, q1), (r2, q2) with offsets a = r1 - 1, b = r2 - 1:
    //   q'(1) = -q0 (a + b)/(a b) + q1 b/(a (b - a)) - q2 a/(b (b - a)).
    let a = r1 - 1.0;
    let b = r2 - 1.0;
    let (c0, c1, c2) = (
        -(a + b) / (a * b),
        b / (a * (b - a)),
        -a / (b * (b - a)),
    );
    let mut out = Vec::with_capacity(quad.nodes.len());
    for x in &quad.nodes {
        let nu = [-x[0], -x[1], -x[2]];
        let q0 = crate::qtensor::boundary_data(*x)?;
        let q1 = sample_shifted([r1 * x[0], r1 * x[1], r1 * x[2]])?;
        let q2 = sample_shifted([r2 * x[0], r2 * x[1], r2 * x[2]])?;
        let dr = q0.scale(c0).add(&q1.scale(c1)).add(&q2.scale(c2));
        // Gradient of the degree-0 radial extension of ν⊗ν − e_z⊗e_z at
        // |x| = 1 (purely tangential), plus the radial derivative.
        let mut grad = [[[0.0f64; 3]; 3]; 3];
        for l in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let mut g = -2.0 * x[i] * x[j] * x[l];
                    if l == i {
                        g += x[j];
                    }
                    if l == j {
                        g += x[i];
                    }
                    grad[l][i][j] = g + x[l] * dr.get(i, j);
                }
            }
        }
        out.push(crate::operators::boundary_n_from_gradient(&grad, nu, k));
    }
    Ok(out)
}

/// Least-squares fit of scattered boundary tensor values by spherical
/// polynomials (monomials in `(x, y, z)` of total degree ≤ `degree`,
/// restricted to the unit sphere), evaluated at the quadrature nodes.
///
/// Positions are normalized to unit directions.  With smooth data of low
/// angular degree this both interpolates between scattered sample points
/// (e.g. mesh boundary vertices) and averages out pointwise recovery noise.
pub fn fit_boundary_values(
    positions: &[[f64; 3]],
    values: &[QTensor],
    quad: &SphereQuadrature,
    degree: u32,
) -> Result<Vec<QTensor>> {
    if positions.len() != values.len() {
        return Err(Error::InvalidArgument(format!(
            "positions ({}) and values ({}) must agree",
            positions.len(),
            values.len()
        )));
    }
    let mut mons = Vec::new();
    for d in 0..=degree {
        for i in 0..=d {
            for j in 0..=(d - i) {
                mons.push((i as i32, j as i32, (d - i - j) as i32));
            }
        }
    }
    if positions.len() < mons.len() {
        return Err(Error::InvalidArgument(format!(
            "degree {degree} needs at least {} sample points, got {}",
            mons.len(),
            positions.len()
        )));
    }
    let dirs: Vec<[f64; 3]> = positions
        .iter()
        .map(|x| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            [x[0] / r, x[1] / r, x[2] / r]
        })
        .collect();
    let n = dirs.len();
    let m = mons.len();
    let a = nalgebra::DMatrix::from_fn(n, m, |r, c| {
        let (i, j, k) = mons[c];
        dirs[r][0].powi(i) * dirs[r][1].powi(j) * dirs[r][2].powi(k)
    });
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eval = nalgebra::DMatrix::from_fn(quad.nodes.len(), m, |r, c| {
        let (i, j, k) = mons[c];
        quad.nodes[r][0].powi(i) * quad.nodes[r][1].powi(j) * quad.nodes[r][2].powi(k)
    });
    let getters: [fn(&QTensor) -> f64; 6] = [
        |q| q.q11,
        |q| q.q22,
        |q| q.q33,
        |q| q.q12,
        |q| q.q13,
        |q| q.q23,
    ];
    let mut comps = Vec::with_capacity(6);
    for get in getters {
        let b = nalgebra::DVector::from_iterator(n, values.iter().map(get));
        let coef = svd
            .solve(&b, 1e-12 * smax)
            .map_err(|e| Error::IllConditioned(format!("boundary fit: {e}")))?;
        comps.push(&eval * &coef);
    }
    Ok((0..quad.nodes.len())
        .map(|r| QTensor {
            q11: comps[0][r],
            q22: comps[1][r],
            q33: comps[2][r],
            q12: comps[3][r],
            q13: comps[4][r],
            q23: comps[5][r],
        })
        .collect())
}

fn check_eval_point(p: [f64; 3]) -> Result<f64> {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    if r < 1.0 + EVAL_MARGIN {
        return Err(Error::OutsideDomain(format!(
            "evaluation point must satisfy |p| >= {}, got |p| = {r}",
            1.0 + EVAL_MARGIN
        )));
    }
    Ok(r)
}

/// Raw boundary integral for one index pair, before the `(2 − δ_mn)` factor
/// is divided out.
fn raw_integral(
    m: usize,
    n: usize,
    p: [f64; 3],
    data: &BoundaryData,
    k: f64,
    quad: &SphereQuadrature,
) -> Result<f64> {
    let kernel = TensorFieldFn::with_step(
        move |x| fundsol::fundamental_translated(m, n, x, p, k).expect("off-pole"),
        1e-5,
    );
    let mut acc = 0.0;
    for (x, w) in quad.nodes.iter().zip(quad.weights.iter()) {
        let nu = [-x[0], -x[1], -x[2]];
        let f = fundsol::fundamental_translated(m, n, *x, p, k)?;
        let l = boundary_l_matrix(&kernel, *x, nu, k)?;
        let q_d = (data.dirichlet)(*x);
        let n_q = (data.neumann)(*x);
        let l_dot_q: f64 = (0..3)
            .map(|i| (0..3).map(|j| l[i][j] * q_d.get(i, j)).sum::<f64>())
            .sum();
        acc += w * (-f.dot(&n_q) - l_dot_q);
    }
    Ok(acc)
}

/// Component `Q_mn(p)` of the shifted solution (the `(2 − δ_mn)` factor is
/// divided out internally).
pub fn evaluate(
    m: usize,
    n: usize,
    p: [f64; 3],
    data: &BoundaryData,
    k: f64,
    quad: &SphereQuadrature,
) -> Result<f64> {
    check_eval_point(p)?;
    let factor = if m == n { 1.0 } else { 2.0 };
    Ok(raw_integral(m, n, p, data, k, quad)? / factor)
}

/// Full shifted tensor assembled from the six scalar evaluations.
pub fn evaluate_tensor(
    p: [f64; 3],
    data: &BoundaryData,
    k: f64,
    quad: &SphereQuadrature,
) -> Result<QTensor> {
    check_eval_point(p)?;
    let mut out = QTensor::ZERO;
    for &(m, n) in &fundsol::INDEX_PAIRS {
        let v = evaluate(m, n, p, data, k, quad)?;
        match (m, n) {
            (1, 1) => out.q11 = v,
            (2, 2) => out.q22 = v,
            (3, 3) => out.q33 = v,
            (1, 2) => out.q12 = v,
            (1, 3) => out.q13 = v,
            (2, 3) => out.q23 = v,
            _ => unreachable!(),
        }
    }
    Ok(out)
}

/// Result of the experimental conormal-data recovery.
pub struct NeumannRecovery {
    /// Recovered `N(Q)` value at each quadrature node.
    pub values: Vec<QTensor>,
    /// `‖A x − b‖` of the collocation system.
    pub residual: f64,
    /// `‖b‖`, for a relative residual.
    pub rhs_norm: f64,
    /// Condition-number estimate of the normal equations (ratio of extreme
    /// eigenvalues of `AᵀA`, square-rooted).
    pub condition: f64,
}

/// EXPERIMENTAL: recovers the conormal data `N(Q)` at the quadrature nodes by
/// least squares, imposing the representation formula at exterior collocation
/// points against reference values of the shifted solution.
///
/// Whether this collocation system is uniquely solvable for `k ≠ 0` is an
/// open question; the conditioning is always reported, the solve fails soft
/// (with diagnostics) when the normal equations are numerically singular, and
/// no uniqueness is asserted.
///
/// `reference` supplies shifted-solution values at the collocation points
/// (from the volume solver, or the analytic solution at `k = 0`).
pub fn recover_neumann(
    dirichlet: &dyn Fn([f64; 3]) -> QTensor,
    k: f64,
    quad: &SphereQuadrature,
    collocation: &[[f64; 3]],
    reference: &dyn Fn([f64; 3]) -> QTensor,
) -> Result<NeumannRecovery> {
    let n_nodes = quad.nodes.len();
    if collocation.len() < 6 * n_nodes {
        return Err(Error::InvalidArgument(format!(
            "need at least 6 collocation points per quadrature node ({} for {n_nodes} nodes), got {}",
            6 * n_nodes,
            collocation.len()
        )));
    }
    for p in collocation {
        check_eval_point(*p)?;
    }
    let basis = traceless_basis();
    let n_unknowns = 5 * n_nodes;
    let n_rows = 6 * collocation.len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(n_rows, n_unknowns);
    let mut b = nalgebra::DVector::<f64>::zeros(n_rows);

    for (ci, p) in collocation.iter().enumerate() {
        let p = *p;
        let q_ref = reference(p);
        for (pi, &(m, n)) in fundsol::INDEX_PAIRS.iter().enumerate() {
            let row = 6 * ci + pi;
            let factor = if m == n { 1.0 } else { 2.0 };
            let kernel = TensorFieldFn::with_step(
                move |x| fundsol::fundamental_translated(m, n, x, p, k).expect("off-pole"),
                1e-5,
            );
            let mut rhs = -factor
                * match (m, n) {
                    (1, 1) => q_ref.q11,
                    (2, 2) => q_ref.q22,
                    (3, 3) => q_ref.q33,
                    (1, 2) => q_ref.q12,
                    (1, 3) => q_ref.q13,
                    (2, 3) => q_ref.q23,
                    _ => unreachable!(),
                };
            for (qi, (x, w)) in quad.nodes.iter().zip(quad.weights.iter()).enumerate() {
                let nu = [-x[0], -x[1], -x[2]];
                let f = fundsol::fundamental_translated(m, n, *x, p, k)?;
                let l = boundary_l_matrix(&kernel, *x, nu, k)?;
                let q_d = dirichlet(*x);
                let l_dot_q: f64 = (0..3)
                    .map(|i| (0..3).map(|j| l[i][j] * q_d.get(i, j)).sum::<f64>())
                    .sum();
                rhs -= w * l_dot_q;
                for (ai, e) in basis.iter().enumerate() {
                    a[(row, 5 * qi + ai)] = w * f.dot(e);
                }
            }
            b[row] = rhs;
        }
    }

    // The smooth kernels barely see high-order spherical harmonics of the
    // unknown, so the collocation matrix is severely rank-deficient in
    // exact arithmetic.  A truncated-SVD pseudo-inverse returns the
    // minimum-norm solution, which pins down the well-determined low-order
    // content while suppressing noise along the near-null space.
    let svd = nalgebra::SVD::new(a.clone(), true, true);
    let sig_max = svd
        .singular_values
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    let sig_min = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::MAX, f64::min);
    let condition = if sig_min > 0.0 {
        sig_max / sig_min
    } else {
        f64::INFINITY
    };
    let x = svd.solve(&b, 1e-8 * sig_max.max(f64::MIN_POSITIVE)).map_err(|e| {
        Error::IllConditioned(format!(
            "collocation system singular (condition {condition:.3e}): {e}"
        ))
    })?;
    let residual = (&a * &x - &b).norm();
    let rhs_norm = b.norm();
    let values = (0..n_nodes)
        .map(|qi| {
            Vec5([
                x[5 * qi],
                x[5 * qi + 1],
                x[5 * qi + 2],
                x[5 * qi + 3],
                x[5 * qi + 4],
            ])
            .decode()
        })
        .collect();
    Ok(NeumannRecovery {
        values,
        residual,
        rhs_norm,
        condition,
    })
}

/// Reads evaluation points from a CSV file with `x,y,z` per line; a non-
/// numeric first line is treated as a header and skipped.
pub fn read_points_csv(path: &std::path::Path) -> Result<Vec<[f64; 3]>> {
    let file = std::fs::File::open(path)?;
    let mut points = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "line {}: expected 3 comma-separated coordinates",
                lineno + 1
            )));
        }
        match (
            fields[0].parse::<f64>(),
            fields[1].parse::<f64>(),
            fields[2].parse::<f64>(),
        ) {
            (Ok(x), Ok(y), Ok(z)) => points.push([x, y, z]),
            _ if lineno == 0 => continue, // header row
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "line {}: unparsable coordinates '{trimmed}'",
                    lineno + 1
                )))
            }
        }
    }
    Ok(points)
}

/// Writes evaluated tensors as CSV rows `x,y,z,q11,q22,q33,q12,q13,q23`.
pub fn write_tensors_csv(
    path: &std::path::Path,
    rows: &[([f64; 3], QTensor)],
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "x,y,z,q11,q22,q33,q12,q13,q23")?;
    for (p, q) in rows {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{}",
            p[0], p[1], p[2], q.q11, q.q22, q.q33, q.q12, q.q13, q.q23
        )?;
    }
    Ok(())
}

//! Q-tensor value types: symmetric traceless 3×3 matrices, their component
//! encodings, eigen-analysis and the biaxiality parameter, plus the boundary
//! data of the exterior colloid problem.

use crate::{Error, Result};

/// Symmetric 3×3 matrix with only the upper triangle stored.
///
/// Values produced by the traceless constructors ([`uniaxial_from_director`],
/// [`boundary_data`], [`Vec5::decode`]) satisfy `|tr Q| ≤ 1e-12`; general
/// symmetric (not necessarily traceless) values are allowed so the type can
/// also carry kernel values and operator outputs.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct QTensor {
    pub q11: f64,
    pub q22: f64,
    pub q33: f64,
    pub q12: f64,
    pub q13: f64,
    pub q23: f64,
}

impl QTensor {
    pub const ZERO: QTensor = QTensor {
        q11: 0.0,
        q22: 0.0,
        q33: 0.0,
        q12: 0.0,
        q13: 0.0,
        q23: 0.0,
    };

    pub fn new(q11: f64, q22: f64, q33: f64, q12: f64, q13: f64, q23: f64) -> Self {
        QTensor {
            q11,
            q22,
            q33,
            q12,
            q13,
            q23,
        }
    }

    /// Builds from a full 3×3 matrix, symmetrizing the off-diagonal entries.
    pub fn from_matrix(m: &[[f64; 3]; 3]) -> Self {
        QTensor {
            q11: m[0][0],
            q22: m[1][1],
            q33: m[2][2],
            q12: 0.5 * (m[0][1] + m[1][0]),
            q13: 0.5 * (m[0][2] + m[2][0]),
            q23: 0.5 * (m[1][2] + m[2][1]),
        }
    }

    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        [
            [self.q11, self.q12, self.q13],
            [self.q12, self.q22, self.q23],
            [self.q13, self.q23, self.q33],
        ]
    }

    /// Entry (i, j) with zero-based indices.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i.min(j), i.max(j)) {
            (0, 0) => self.q11,
            (1, 1) => self.q22,
            (2, 2) => self.q33,
            (0, 1) => self.q12,
            (0, 2) => self.q13,
            (1, 2) => self.q23,
            _ => panic!("index out of range: ({i}, {j})"),
        }
    }

    pub fn trace(&self) -> f64 {
        self.q11 + self.q22 + self.q33
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Full double contraction `Σ_ij A_ij B_ij` (off-diagonals counted twice).
    pub fn dot(&self, other: &QTensor) -> f64 {
        self.q11 * other.q11
            + self.q22 * other.q22
            + self.q33 * other.q33
            + 2.0 * (self.q12 * other.q12 + self.q13 * other.q13 + self.q23 * other.q23)
    }

    pub fn scale(&self, s: f64) -> QTensor {
        QTensor {
            q11: s * self.q11,
            q22: s * self.q22,
            q33: s * self.q33,
            q12: s * self.q12,
            q13: s * self.q13,
            q23: s * self.q23,
        }
    }

    pub fn add(&self, other: &QTensor) -> QTensor {
        QTensor {
            q11: self.q11 + other.q11,
            q22: self.q22 + other.q22,
            q33: self.q33 + other.q33,
            q12: self.q12 + other.q12,
            q13: self.q13 + other.q13,
            q23: self.q23 + other.q23,
        }
    }

    pub fn sub(&self, other: &QTensor) -> QTensor {
        self.add(&other.scale(-1.0))
    }

    /// `tr(Q²)` and `tr(Q³)` of the symmetric matrix.
    fn trace_powers(&self) -> (f64, f64) {
        let m = self.to_matrix();
        let mut tr2 = 0.0;
        let mut tr3 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                tr2 += m[i][j] * m[j][i];
                for l in 0..3 {
                    tr3 += m[i][j] * m[j][l] * m[l][i];
                }
            }
        }
        (tr2, tr3)
    }

    /// Biaxiality parameter `β(Q) = 1 − 6 tr(Q³)² / tr(Q²)³`, clamped to
    /// `[0, 1]`.  Vanishes exactly on uniaxial states; `β(0) = 0` by
    /// convention (the defining expression is 0/0 at the isotropic state).
    pub fn biaxiality(&self) -> f64 {
        if self.norm() < 1e-10 {
            return 0.0;
        }
        let (tr2, tr3) = self.trace_powers();
        (1.0 - 6.0 * tr3 * tr3 / (tr2 * tr2 * tr2)).clamp(0.0, 1.0)
    }

    /// Eigen-decomposition, sorted descending.  See [`EigenSystem`].
    pub fn eigen(&self) -> EigenSystem {
        eigen_symmetric(self)
    }
}

/// The uniform far-field state `Q_∞ = e_z⊗e_z − I/3`.
pub fn q_infinity() -> QTensor {
    QTensor::new(-1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0, 0.0, 0.0, 0.0)
}

/// Uniaxial tensor `s (m⊗m − I/3)` for a unit director `m`.
///
/// Any real `s` is accepted; negative `s` describes oblate states and
/// classification is left to the caller.
pub fn uniaxial_from_director(m: [f64; 3], s: f64) -> Result<QTensor> {
    let len2 = m[0] * m[0] + m[1] * m[1] + m[2] * m[2];
    if (len2.sqrt() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "director must be a unit vector, |m| = {}",
            len2.sqrt()
        )));
    }
    Ok(QTensor {
        q11: s * (m[0] * m[0] - 1.0 / 3.0),
        q22: s * (m[1] * m[1] - 1.0 / 3.0),
        q33: s * (m[2] * m[2] - 1.0 / 3.0),
        q12: s * m[0] * m[1],
        q13: s * m[0] * m[2],
        q23: s * m[1] * m[2],
    })
}

/// Shifted Dirichlet data `ν⊗ν − e_z⊗e_z` of the exterior problem at a point
/// `p` on the unit sphere (`ν = p`).  This is `Q_b − Q_∞` with homeotropic
/// anchoring `Q_b = ν⊗ν − I/3`.
pub fn boundary_data(p: [f64; 3]) -> Result<QTensor> {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    if (r - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "boundary point must lie on the unit sphere, |p| = {r}"
        )));
    }
    Ok(QTensor {
        q11: p[0] * p[0],
        q22: p[1] * p[1],
        q33: p[2] * p[2] - 1.0,
        q12: p[0] * p[1],
        q13: p[0] * p[2],
        q23: p[1] * p[2],
    })
}

/// Six-component encoding in the ordering `(Q11, Q22, Q33, Q12, Q13, Q23)`
/// used by the Fourier symbol matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec6(pub [f64; 6]);

impl Vec6 {
    pub fn from_qtensor(q: &QTensor) -> Self {
        Vec6([q.q11, q.q22, q.q33, q.q12, q.q13, q.q23])
    }

    pub fn to_qtensor(&self) -> QTensor {
        let c = self.0;
        QTensor::new(c[0], c[1], c[2], c[3], c[4], c[5])
    }
}

/// Orthonormal traceless basis (Frobenius inner product):
///
/// ```text
/// E1 = (e1⊗e1 − e2⊗e2)/√2            E2 = (2 e3⊗e3 − e1⊗e1 − e2⊗e2)/√6
/// E3 = (e1⊗e2 + e2⊗e1)/√2            E4 = (e1⊗e3 + e3⊗e1)/√2
/// E5 = (e2⊗e3 + e3⊗e2)/√2
/// ```
///
/// Orthonormality means energy norms transfer to coefficient space without
/// mass-matrix corrections, and any coefficient vector decodes to an exactly
/// traceless tensor — this is how the FEM enforces the trace constraint
/// structurally.
pub fn traceless_basis() -> [QTensor; 5] {
    let s2 = std::f64::consts::SQRT_2;
    let s6 = 6.0_f64.sqrt();
    [
        QTensor::new(1.0 / s2, -1.0 / s2, 0.0, 0.0, 0.0, 0.0),
        QTensor::new(-1.0 / s6, -1.0 / s6, 2.0 / s6, 0.0, 0.0, 0.0),
        QTensor::new(0.0, 0.0, 0.0, 1.0 / s2, 0.0, 0.0),
        QTensor::new(0.0, 0.0, 0.0, 0.0, 1.0 / s2, 0.0),
        QTensor::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0 / s2),
    ]
}

/// Coefficients in the fixed orthonormal traceless basis `E1..E5`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec5(pub [f64; 5]);

impl Vec5 {
    pub const ZERO: Vec5 = Vec5([0.0; 5]);

    /// Projects onto the traceless basis; exact for traceless input.
    pub fn encode(q: &QTensor) -> Self {
        let basis = traceless_basis();
        let mut a = [0.0; 5];
        for (ai, e) in a.iter_mut().zip(basis.iter()) {
            *ai = q.dot(e);
        }
        Vec5(a)
    }

    pub fn decode(&self) -> QTensor {
        let basis = traceless_basis();
        let mut q = QTensor::ZERO;
        for (ai, e) in self.0.iter().zip(basis.iter()) {
            q = q.add(&e.scale(*ai));
        }
        // Rebuild the last diagonal entry from the other two so the trace is
        // exactly zero in floating point, not merely to rounding.
        q.q33 = -(q.q11 + q.q22);
        q
    }

    /// Euclidean norm; equals the Frobenius norm of the decoded tensor.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// Eigen-decomposition of a symmetric 3×3 matrix.
///
/// Eigenvalues are sorted descending and eigenvectors are orthonormal with a
/// deterministic sign convention: the first component of each eigenvector
/// whose magnitude exceeds 1e-12 is made positive.
#[derive(Clone, Copy, Debug)]
pub struct EigenSystem {
    /// `λ1 ≥ λ2 ≥ λ3`.
    pub eigenvalues: [f64; 3],
    /// `eigenvectors[i]` belongs to `eigenvalues[i]`.
    pub eigenvectors: [[f64; 3]; 3],
}

impl EigenSystem {
    /// Eigenvector of the largest eigenvalue (the director).
    pub fn director(&self) -> [f64; 3] {
        self.eigenvectors[0]
    }

    /// Gap between the two leading eigenvalues.
    pub fn leading_gap(&self) -> f64 {
        self.eigenvalues[0] - self.eigenvalues[1]
    }
}

fn normalize_sign(v: &mut [f64; 3]) {
    for c in v.iter() {
        if c.abs() > 1e-12 {
            if *c < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            return;
        }
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Closed-form symmetric 3×3 eigenvalues via the trigonometric method, with a
/// cyclic-Jacobi fallback when the discriminant is nearly degenerate (repeated
/// eigenvalues make the cross-product eigenvector extraction unstable).
fn eigen_symmetric(q: &QTensor) -> EigenSystem {
    let m = q.to_matrix();
    let p1 = q.q12 * q.q12 + q.q13 * q.q13 + q.q23 * q.q23;
    let scale = q.norm().max(1.0);
    if p1 == 0.0 {
        // Already diagonal.
        let mut pairs = [
            (m[0][0], [1.0, 0.0, 0.0]),
            (m[1][1], [0.0, 1.0, 0.0]),
            (m[2][2], [0.0, 0.0, 1.0]),
        ];
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        return EigenSystem {
            eigenvalues: [pairs[0].0, pairs[1].0, pairs[2].0],
            eigenvectors: [pairs[0].1, pairs[1].1, pairs[2].1],
        };
    }

    let tr = q.trace();
    let qm = tr / 3.0;
    let p2 = (m[0][0] - qm).powi(2) + (m[1][1] - qm).powi(2) + (m[2][2] - qm).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    // B = (A - qm I)/p ; r = det(B)/2 ∈ [-1, 1]
    let b = [
        [(m[0][0] - qm) / p, m[0][1] / p, m[0][2] / p],
        [m[1][0] / p, (m[1][1] - qm) / p, m[1][2] / p],
        [m[2][0] / p, m[2][1] / p, (m[2][2] - qm) / p],
    ];
    let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det_b / 2.0).clamp(-1.0, 1.0);

    // Discriminant of the shifted characteristic polynomial; |r| → 1 signals
    // a (nearly) repeated eigenvalue.
    if 1.0 - r.abs() < 1e-13 {
        return jacobi_eigen(q);
    }

    let phi = r.acos() / 3.0;
    let l1 = qm + 2.0 * p * phi.cos();
    let l3 = qm + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let l2 = tr - l1 - l3;
    let lambda = [l1, l2, l3]; // already descending for phi ∈ [0, π/3]

    // Eigenvectors from cross products of rows of (A − λI).
    let mut vecs = [[0.0; 3]; 3];
    for (vi, &l) in vecs.iter_mut().zip(lambda.iter()) {
        let a = [
            [m[0][0] - l, m[0][1], m[0][2]],
            [m[1][0], m[1][1] - l, m[1][2]],
            [m[2][0], m[2][1], m[2][2] - l],
        ];
        let c01 = cross(a[0], a[1]);
        let c02 = cross(a[0], a[2]);
        let c12 = cross(a[1], a[2]);
        let (mut best, mut best_n) = (c01, norm3(c01));
        if norm3(c02) > best_n {
            best = c02;
            best_n = norm3(c02);
        }
        if norm3(c12) > best_n {
            best = c12;
            best_n = norm3(c12);
        }
        if best_n < 1e-12 * scale * scale {
            return jacobi_eigen(q);
        }
        *vi = [best[0] / best_n, best[1] / best_n, best[2] / best_n];
    }

    // Re-orthogonalize the last vector for a guaranteed right-handed frame.
    vecs[2] = cross(vecs[0], vecs[1]);
    let n2 = norm3(vecs[2]);
    if n2 < 1e-12 {
        return jacobi_eigen(q);
    }
    vecs[2] = [vecs[2][0] / n2, vecs[2][1] / n2, vecs[2][2] / n2];
    for v in vecs.iter_mut() {
        normalize_sign(v);
    }
    EigenSystem {
        eigenvalues: lambda,
        eigenvectors: vecs,
    }
}

/// Cyclic Jacobi iteration; unconditionally stable fallback.
fn jacobi_eigen(q: &QTensor) -> EigenSystem {
    let mut a = q.to_matrix();
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _sweep in 0..50 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off < 1e-30 {
            break;
        }
        for (p, r) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][r].abs() < 1e-300 {
                continue;
            }
            let theta = (a[r][r] - a[p][p]) / (2.0 * a[p][r]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut rot = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            rot[p][p] = c;
            rot[r][r] = c;
            rot[p][r] = s;
            rot[r][p] = -s;
            // a = rotᵀ a rot ; v = v rot
            let mut tmp = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    tmp[i][j] = (0..3).map(|l| a[i][l] * rot[l][j]).sum();
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    a[i][j] = (0..3).map(|l| rot[l][i] * tmp[l][j]).sum();
                }
            }
            let mut vt = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    vt[i][j] = (0..3).map(|l| v[i][l] * rot[l][j]).sum();
                }
            }
            v = vt;
        }
    }
    let mut idx = [0, 1, 2];
    idx.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let mut vecs = [[0.0; 3]; 3];
    for (slot, &i) in idx.iter().enumerate() {
        vecs[slot] = [v[0][i], v[1][i], v[2][i]];
        normalize_sign(&mut vecs[slot]);
    }
    EigenSystem {
        eigenvalues: [a[idx[0]][idx[0]], a[idx[1]][idx[1]], a[idx[2]][idx[2]]],
        eigenvectors: vecs,
    }
}

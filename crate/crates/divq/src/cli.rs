//! Command implementations behind the `divq` binary: analytic verification,
//! mesh generation, the volume solve, boundary-representation evaluation,
//! and post-processing.  Every command is deterministic for a given
//! configuration; reruns produce byte-identical files.

use crate::analysis::{self, Locator, PlaneSpec};
use crate::config::RunConfig;
use crate::fem;
use crate::fundsol::{self, INDEX_PAIRS};
use crate::operators;
use crate::output::{self, CheckLine};
use crate::qtensor::QTensor;
use crate::represent;
use crate::{harmonic, Error, Result};
use serde::Serialize;
use std::io::Write;

/// Output directory, honoring the only supported environment override.
pub fn effective_out_dir(cfg: &RunConfig) -> std::path::PathBuf {
    match std::env::var_os("DIVQ_OUT_DIR") {
        Some(dir) if !dir.is_empty() => dir.into(),
        _ => cfg.output.dir.clone(),
    }
}

const K_SWEEP: [f64; 5] = [-0.9, 0.0, 1.0, 5.0, 20.0];

/// Runs the analytic audit suite and writes a JSON-lines report; returns
/// whether every check passed.
///
/// `inject_scale` is a test hook: a value ≠ 1 rescales the fundamental
/// solution inside the transform-consistency check, which must then fail
/// (negative control for the audit itself).
pub fn cmd_verify(out: &mut impl Write, inject_scale: f64) -> Result<bool> {
    let mut lines: Vec<CheckLine> = Vec::new();

    // Spot value of the transformed kernel.
    let fhat = fundsol::fhat11([1.0, 0.0, 0.0], 1.0)?;
    lines.push(
        CheckLine::bounded("fhat-spot-value", (fhat.0[0] - 0.6).abs(), 1e-12)
            .with_detail("first component of the transformed (1,1) kernel at ξ = e₁, k = 1"),
    );

    // Transform consistency: at k = 0 the kernel must collapse to the known
    // inverse transform 1/(4π|x|) in the matching tensor slots.
    let mut worst = 0.0f64;
    for &(m, n) in &INDEX_PAIRS {
        for p in [[1.1, 0.4, -0.3], [0.2, -1.5, 0.9], [2.0, 1.0, 2.0]] {
            let f = fundsol::fundamental(m, n, p, 0.0)?.scale(inject_scale);
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            let mut want = QTensor::ZERO;
            let scale = 1.0 / (4.0 * std::f64::consts::PI * r);
            match (m, n) {
                (1, 1) => want.q11 = scale,
                (2, 2) => want.q22 = scale,
                (3, 3) => want.q33 = scale,
                (1, 2) => want.q12 = scale,
                (1, 3) => want.q13 = scale,
                (2, 3) => want.q23 = scale,
                _ => unreachable!(),
            }
            worst = worst.max(f.sub(&want).norm());
        }
    }
    lines.push(
        CheckLine::bounded("fourier-consistency", worst, 1e-12)
            .with_detail("k = 0 collapse of the kernel to the Laplace fundamental solution"),
    );

    // Adjoint annihilation away from the pole, for the full k sweep.
    for k in K_SWEEP {
        let mut worst = 0.0f64;
        for &(m, n) in &INDEX_PAIRS {
            let f = operators::TensorFieldFn::new(move |x| {
                fundsol::fundamental(m, n, x, k).expect("off-pole")
            });
            for p in [[1.3, 0.7, -0.5], [-0.4, 1.9, 0.8]] {
                worst = worst.max(operators::apply_dstar(&f, p, k).norm());
            }
        }
        lines.push(
            CheckLine::bounded(format!("dstar-annihilation-k{k}"), worst, 5e-5)
                .with_detail("finite-difference residual of the adjoint applied to all kernels"),
        );
    }

    // Surface monomial integrals against the closed-form table.
    let mut worst = 0.0f64;
    for a in 0..=4usize {
        for b in 0..=(4 - a) {
            let c = 4 - a - b;
            let got =
                operators::sphere_monomial_integral(a as u32, b as u32, c as u32, 1e-3)?;
            let want = {
                let mut sorted = [a, b, c];
                sorted.sort_unstable();
                match sorted {
                    [0, 0, 4] => 4.0 * std::f64::consts::PI / 5.0,
                    [0, 2, 2] => 4.0 * std::f64::consts::PI / 15.0,
                    _ => 0.0,
                }
            };
            worst = worst.max((got - want).abs());
        }
    }
    lines.push(
        CheckLine::bounded("monomial-integrals", worst, 1e-9)
            .with_detail("degree-4 surface moments over a small sphere"),
    );

    // Pole-strength constants: indicator structure for every pair.
    let mut worst = 0.0f64;
    for &(m, n) in &INDEX_PAIRS {
        for i in 1..=3usize {
            for j in i..=3 {
                let got = operators::c_constant(m, n, i, j, 1.0, 1e-3)?;
                let want = if (i, j) == (m, n) { 1.0 } else { 0.0 };
                worst = worst.max((got - want).abs());
            }
        }
    }
    lines.push(
        CheckLine::bounded("pole-constants", worst, 1e-6)
            .with_detail("small-sphere limits around the kernel singularity"),
    );

    // Representation-formula closure against the analytic solution.
    let quad = represent::build_quadrature(32, 64)?;
    let data = represent::BoundaryData::analytic_k0();
    let v = represent::evaluate(1, 1, [2.0, 0.0, 0.0], &data, 0.0, &quad)?;
    lines.push(
        CheckLine::bounded("representation-closure-axis", (v - 0.25).abs(), 1e-6)
            .with_detail("component value at (2,0,0) against the analytic solution"),
    );
    let p = [1.5, 0.3, 0.2];
    let got = represent::evaluate_tensor(p, &data, 0.0, &quad)?;
    let want = harmonic::shifted_solution(p, None);
    lines.push(
        CheckLine::bounded("representation-closure-tensor", got.sub(&want).norm(), 1e-4)
            .with_detail("full tensor at an off-axis point against the analytic solution"),
    );

    output::write_report(out, &lines)?;
    Ok(lines.iter().all(|l| l.passed))
}

/// Mesh summary written by `divq mesh`.
#[derive(Serialize, Debug)]
pub struct MeshSummary {
    pub vertices: usize,
    pub tets: usize,
    pub boundary_triangles: usize,
    pub outer_radius: f64,
    pub min_dihedral_deg: f64,
    pub total_volume: f64,
    pub mesh_hash: u64,
}

/// Builds the configured mesh, validates it, and writes `mesh.vtk` plus a
/// JSON summary line.
pub fn cmd_mesh(cfg: &RunConfig, out: &mut impl Write) -> Result<MeshSummary> {
    let mesh = cfg.build_mesh()?;
    let dir = effective_out_dir(cfg);
    std::fs::create_dir_all(&dir)?;
    output::write_vtk(
        &dir.join("mesh.vtk"),
        &mesh,
        &fem::QField::zero(mesh.vertices.len()),
    )?;
    let q = mesh.quality();
    let summary = MeshSummary {
        vertices: mesh.vertices.len(),
        tets: mesh.tets.len(),
        boundary_triangles: mesh.boundary_tris.len(),
        outer_radius: mesh.outer_radius,
        min_dihedral_deg: q.min_dihedral_deg,
        total_volume: q.total_volume,
        mesh_hash: mesh.hash(),
    };
    writeln!(
        out,
        "{}",
        serde_json::to_string(&summary).map_err(|e| Error::InvalidArgument(e.to_string()))?
    )?;
    Ok(summary)
}

/// Solve summary written by `divq solve`.
#[derive(Serialize, Debug)]
pub struct SolveSummary {
    pub k: f64,
    pub vertices: usize,
    pub tets: usize,
    pub energy: f64,
    pub cg_iterations: usize,
    pub mesh_hash: u64,
    pub ring_radius: Option<f64>,
    pub ring_z_offset: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ring_note: Option<String>,
}

/// Solves the exterior problem and writes the checkpoint, the VTK field
/// file, the ring report, and a JSON summary line.
pub fn cmd_solve(cfg: &RunConfig, out: &mut impl Write) -> Result<SolveSummary> {
    let mesh = cfg.build_mesh()?;
    let system = fem::assemble(&mesh, cfg.k)?;
    let sol = fem::solve_cg_with(
        &system,
        cfg.solver.tol,
        cfg.solver.max_iter,
        cfg.solver.jacobi,
        None,
    )?;
    let field = system.field_from_solution(&sol.x);
    let energy = fem::energy(&field, &mesh, cfg.k)?;

    let dir = effective_out_dir(cfg);
    std::fs::create_dir_all(&dir)?;
    fem::save_checkpoint(&field, mesh.hash(), &dir.join("solution.csv"))?;
    output::write_vtk(&dir.join("solution.vtk"), &mesh, &field)?;

    let (ring_radius, ring_z_offset, ring_note) =
        match analysis::ring_radius(&field, &mesh, cfg.analysis.ring_threshold) {
            Ok(report) => {
                output::write_ring_csv(&dir.join("ring.csv"), &report)?;
                (Some(report.radius), Some(report.z_offset), None)
            }
            Err(Error::NoRing(msg)) => (None, None, Some(msg)),
            Err(e) => return Err(e),
        };

    let summary = SolveSummary {
        k: cfg.k,
        vertices: mesh.vertices.len(),
        tets: mesh.tets.len(),
        energy,
        cg_iterations: sol.iterations,
        mesh_hash: mesh.hash(),
        ring_radius,
        ring_z_offset,
        ring_note,
    };
    writeln!(
        out,
        "{}",
        serde_json::to_string(&summary).map_err(|e| Error::InvalidArgument(e.to_string()))?
    )?;
    Ok(summary)
}

/// Data source for `divq represent`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RepresentMode {
    /// Analytic conormal data; requires `k = 0`.
    Analytic,
    /// Conormal data extracted from a prior solve checkpoint; the deltas
    /// compare against the sampled volume solution.
    Fem,
}

/// Represent summary (also written as a JSON line).
#[derive(Serialize, Debug)]
pub struct RepresentSummary {
    pub points: usize,
    pub evaluated: usize,
    pub skipped: usize,
    pub max_delta: f64,
}

/// Evaluates the boundary representation formula at the points from a CSV
/// file and writes per-point tensors plus a delta against the reference
/// (analytic solution or sampled volume solution).
pub fn cmd_represent(
    cfg: &RunConfig,
    points_path: &std::path::Path,
    mode: RepresentMode,
    out: &mut impl Write,
) -> Result<RepresentSummary> {
    let points = represent::read_points_csv(points_path)?;
    let dir = effective_out_dir(cfg);
    std::fs::create_dir_all(&dir)?;
    let quad = represent::build_quadrature(32, 64)?;

    // Reference sampler and boundary data per mode.
    let mesh;
    let field;
    let locator;
    let (data, reference): (
        represent::BoundaryData,
        Box<dyn Fn([f64; 3]) -> Result<QTensor>>,
    ) = match mode {
        RepresentMode::Analytic => {
            if cfg.k != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "analytic mode requires k = 0 (configured k = {})",
                    cfg.k
                )));
            }
            (
                represent::BoundaryData::analytic_k0(),
                Box::new(|p| Ok(harmonic::shifted_solution(p, None))),
            )
        }
        RepresentMode::Fem => {
            mesh = cfg.build_mesh()?;
            field = fem::load_checkpoint(&dir.join("solution.csv"), mesh.hash())?;
            locator = Locator::new(&mesh);
            let flux = fem::inner_boundary_flux(&mesh, &field, cfg.k)?;
            let positions: Vec<[f64; 3]> = flux.iter().map(|(v, _)| mesh.vertices[*v]).collect();
            let tensors: Vec<QTensor> = flux.iter().map(|(_, q)| *q).collect();
            let values = represent::fit_boundary_values(&positions, &tensors, &quad, 6)?;
            let data = represent::BoundaryData::with_node_neumann(&quad, values);
            (data, Box::new(|p| locator.sample(&field, p)))
        }
    };

    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("represent.csv"))?);
    writeln!(f, "x,y,z,status,q11,q22,q33,q12,q13,q23,delta")?;
    let mut evaluated = 0usize;
    let mut skipped = 0usize;
    let mut max_delta = 0.0f64;
    for p in &points {
        match represent::evaluate_tensor(*p, &data, cfg.k, &quad) {
            Ok(q) => {
                let delta = match reference(*p) {
                    Ok(r) => q.sub(&r).norm(),
                    Err(_) => f64::NAN, // outside the meshed shell
                };
                if delta.is_finite() {
                    max_delta = max_delta.max(delta);
                }
                writeln!(
                    f,
                    "{},{},{},ok,{},{},{},{},{},{},{}",
                    p[0], p[1], p[2], q.q11, q.q22, q.q33, q.q12, q.q13, q.q23, delta
                )?;
                evaluated += 1;
            }
            Err(Error::OutsideDomain(_)) => {
                writeln!(f, "{},{},{},skipped_margin,,,,,,,", p[0], p[1], p[2])?;
                skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    drop(f);

    let summary = RepresentSummary {
        points: points.len(),
        evaluated,
        skipped,
        max_delta,
    };
    writeln!(
        out,
        "{}",
        serde_json::to_string(&summary).map_err(|e| Error::InvalidArgument(e.to_string()))?
    )?;
    Ok(summary)
}

/// Post-processes a prior solve: ring report, planar field maps, and decay
/// profiles.
pub fn cmd_analyze(cfg: &RunConfig, out: &mut impl Write) -> Result<()> {
    let mesh = cfg.build_mesh()?;
    let dir = effective_out_dir(cfg);
    let field = fem::load_checkpoint(&dir.join("solution.csv"), mesh.hash())?;

    match analysis::ring_radius(&field, &mesh, cfg.analysis.ring_threshold) {
        Ok(report) => {
            output::write_ring_csv(&dir.join("ring.csv"), &report)?;
            writeln!(
                out,
                "{{\"ring_radius\":{},\"ring_z_offset\":{}}}",
                report.radius, report.z_offset
            )?;
        }
        Err(Error::NoRing(msg)) => writeln!(out, "{{\"ring_note\":{:?}}}", msg)?,
        Err(e) => return Err(e),
    }

    let plane = PlaneSpec::xz(cfg.analysis.plane_half_extent);
    let grid = analysis::field_maps(&field, &mesh, &plane, cfg.analysis.plane_resolution)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("maps.csv"))?);
    writeln!(f, "x,y,z,normQ,biaxiality,dx,dy,dz")?;
    for row in &grid {
        for cell in row.iter().flatten() {
            let d = cell.director.unwrap_or([0.0, 0.0, 0.0]);
            writeln!(
                f,
                "{},{},{},{},{},{},{},{}",
                cell.position[0],
                cell.position[1],
                cell.position[2],
                cell.norm_q,
                cell.biaxiality,
                d[0],
                d[1],
                d[2]
            )?;
        }
    }
    drop(f);

    let s = 0.5f64.sqrt();
    let dirs = [[1.0, 0.0, 0.0], [s, 0.0, s], [0.0, 0.0, 1.0]];
    let n_r = 50;
    let radii: Vec<f64> = (0..=n_r)
        .map(|i| 1.0 + (mesh.outer_radius - 1.0) * i as f64 / n_r as f64)
        .collect();
    let table = analysis::decay_profile(&field, &mesh, &dirs, &radii)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("decay.csv"))?);
    writeln!(f, "rho,equatorial,oblique,vertical")?;
    for (i, r) in radii.iter().enumerate() {
        writeln!(f, "{},{},{},{}", r, table[0][i], table[1][i], table[2][i])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_passes_and_negative_control_fails() {
        let mut buf = Vec::new();
        assert!(cmd_verify(&mut buf, 1.0).unwrap());
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().count() >= 9);
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["passed"], true, "{line}");
        }
        for k in K_SWEEP {
            assert!(text.contains(&format!("dstar-annihilation-k{k}")));
        }

        // Injected kernel rescale must break the transform consistency.
        let mut buf = Vec::new();
        assert!(!cmd_verify(&mut buf, 1.001).unwrap());
        let text = String::from_utf8(buf).unwrap();
        let broken: Vec<&str> = text
            .lines()
            .filter(|l| l.contains("\"passed\":false"))
            .collect();
        assert_eq!(broken.len(), 1);
        assert!(broken[0].contains("fourier-consistency"));
    }

    #[test]
    fn solve_and_analyze_pipeline() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::from_str_checked(
            "[problem]\nk = 0\n[mesh]\nn_surface = 6\nn_radial = 5\nouter_radius = 8\ngrading = 1.6\n",
        )
        .unwrap();
        cfg.output.dir = dir.path().join("out");

        let mut log = Vec::new();
        let summary = cmd_solve(&cfg, &mut log).unwrap();
        assert!(summary.energy > 0.0);
        let radius = summary.ring_radius.expect("ring expected at k = 0");
        assert!((radius - harmonic::ring_radius(Some(8.0))).abs() < 0.1);
        for name in ["solution.csv", "solution.vtk", "ring.csv"] {
            assert!(cfg.output.dir.join(name).exists(), "{name}");
        }

        let mut log = Vec::new();
        cmd_analyze(&cfg, &mut log).unwrap();
        for name in ["maps.csv", "decay.csv"] {
            assert!(cfg.output.dir.join(name).exists(), "{name}");
        }
        let decay = std::fs::read_to_string(cfg.output.dir.join("decay.csv")).unwrap();
        assert!(decay.lines().count() > 50);
    }

    #[test]
    fn represent_analytic_mode() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::default();
        cfg.output.dir = dir.path().to_path_buf();
        let points = dir.path().join("points.csv");
        std::fs::write(&points, "x,y,z\n2,0,0\n0,0,1.7\n1.05,0,0\n").unwrap();
        let mut log = Vec::new();
        let summary =
            cmd_represent(&cfg, &points, RepresentMode::Analytic, &mut log).unwrap();
        assert_eq!(summary.evaluated, 2);
        assert_eq!(summary.skipped, 1);
        assert!(summary.max_delta <= 1e-4, "max delta {}", summary.max_delta);
        let csv = std::fs::read_to_string(dir.path().join("represent.csv")).unwrap();
        assert!(csv.contains("skipped_margin"));

        // Empty points file: empty output, success.
        std::fs::write(&points, "x,y,z\n").unwrap();
        let summary =
            cmd_represent(&cfg, &points, RepresentMode::Analytic, &mut Vec::new()).unwrap();
        assert_eq!(summary.points, 0);
    }

    #[test]
    fn represent_analytic_mode_requires_k0() {
        let mut cfg = RunConfig::default();
        cfg.k = 2.0;
        let dir = tempfile::tempdir().unwrap();
        let points = dir.path().join("points.csv");
        std::fs::write(&points, "2,0,0\n").unwrap();
        assert!(cmd_represent(&cfg, &points, RepresentMode::Analytic, &mut Vec::new()).is_err());
    }
}

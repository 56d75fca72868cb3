//! File emission: legacy ASCII VTK unstructured grids, CSV tables, and
//! JSON-lines reports.  All writers format floats with Rust's shortest
//! round-trip representation and iterate in fixed order, so reruns produce
//! byte-identical files.

use crate::analysis::RingReport;
use crate::fem::QField;
use crate::mesh::TetMesh;
use crate::qtensor::QTensor;
use crate::Result;
use serde::Serialize;
use std::io::Write;

/// Writes the mesh and the FULL tensor `Q = field + Q_∞` as a legacy ASCII
/// VTK unstructured grid with point-data arrays `normQ`, `biaxiality`,
/// `director` (zero vector where the director is degenerate), and the six
/// independent components of `Q`.
pub fn write_vtk(path: &std::path::Path, mesh: &TetMesh, field: &QField) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let n = mesh.vertices.len();
    let m = mesh.tets.len();
    writeln!(f, "# vtk DataFile Version 2.0")?;
    writeln!(f, "Q-tensor field around a spherical colloid")?;
    writeln!(f, "ASCII")?;
    writeln!(f, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(f, "POINTS {n} double")?;
    for v in &mesh.vertices {
        writeln!(f, "{} {} {}", v[0], v[1], v[2])?;
    }
    writeln!(f, "CELLS {m} {}", 5 * m)?;
    for t in &mesh.tets {
        writeln!(f, "4 {} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(f, "CELL_TYPES {m}")?;
    for _ in 0..m {
        writeln!(f, "10")?; // VTK_TETRA
    }
    let full: Vec<QTensor> = (0..n).map(|v| field.full_tensor(v)).collect();
    writeln!(f, "POINT_DATA {n}")?;
    writeln!(f, "SCALARS normQ double 1")?;
    writeln!(f, "LOOKUP_TABLE default")?;
    for q in &full {
        writeln!(f, "{}", q.norm())?;
    }
    writeln!(f, "SCALARS biaxiality double 1")?;
    writeln!(f, "LOOKUP_TABLE default")?;
    for q in &full {
        writeln!(f, "{}", q.biaxiality())?;
    }
    writeln!(f, "VECTORS director double")?;
    for q in &full {
        let es = q.eigen();
        let d = if es.leading_gap() < 1e-8 {
            [0.0, 0.0, 0.0]
        } else {
            es.director()
        };
        writeln!(f, "{} {} {}", d[0], d[1], d[2])?;
    }
    writeln!(f, "FIELD tensor 1")?;
    writeln!(f, "Q 6 {n} double")?;
    for q in &full {
        writeln!(f, "{} {} {} {} {} {}", q.q11, q.q22, q.q33, q.q12, q.q13, q.q23)?;
    }
    Ok(())
}

/// Writes a ring report as CSV: a summary row followed by the equatorial
/// gap profile.
pub fn write_ring_csv(path: &std::path::Path, report: &RingReport) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "radius,z_offset,gap_at_ring")?;
    writeln!(f, "{},{},{}", report.radius, report.z_offset, report.gap_at_ring)?;
    writeln!(f, "rho,leading_gap")?;
    for (rho, gap) in &report.gap_profile {
        writeln!(f, "{rho},{gap}")?;
    }
    Ok(())
}

/// One line of a JSON-lines check report.
#[derive(Serialize, Debug, Clone)]
pub struct CheckLine {
    pub check: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckLine {
    /// A check that passes when `value ≤ tolerance`.
    pub fn bounded(check: impl Into<String>, value: f64, tolerance: f64) -> Self {
        CheckLine {
            check: check.into(),
            passed: value.is_finite() && value <= tolerance,
            value,
            tolerance,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

/// Serializes check lines as JSON-lines to any writer.
pub fn write_report(out: &mut impl Write, lines: &[CheckLine]) -> Result<()> {
    for line in lines {
        let json = serde_json::to_string(line)
            .map_err(|e| crate::Error::InvalidArgument(format!("report serialization: {e}")))?;
        writeln!(out, "{json}")?;
    }
    Ok(())
}

//! Run configuration: plain-text `key = value` files with `[section]`
//! headers and `#` comments.
//!
//! ```text
//! [problem]
//! k = 5.0
//!
//! [mesh]
//! source = generated        # or: msh
//! n_surface = 8
//! n_radial = 6
//! outer_radius = 10
//! grading = 1.5
//! # for source = msh:
//! # path = shell.msh
//! # inner_tag = 1
//! # outer_tag = 2
//!
//! [solver]
//! tol = 1e-8
//! max_iter = 200000
//! preconditioner = jacobi   # or: none
//!
//! [output]
//! dir = out
//!
//! [analysis]
//! ring_threshold = 0.08
//! plane_half_extent = 5.0
//! plane_resolution = 40
//! ```

use crate::mesh::{BoundaryTag, TetMesh};
use crate::{Error, Result};
use std::collections::HashMap;

/// Where the mesh comes from: the built-in generator or an MSH 2.2 file.
#[derive(Clone, Debug, PartialEq)]
pub enum MeshSource {
    Generated {
        n_surface: usize,
        n_radial: usize,
        outer_radius: f64,
        grading: f64,
    },
    Msh {
        path: std::path::PathBuf,
        inner_tag: i64,
        outer_tag: i64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub jacobi: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: std::path::PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisConfig {
    pub ring_threshold: f64,
    pub plane_half_extent: f64,
    pub plane_resolution: usize,
}

/// Full run configuration with validated invariants (`k > −1`, exactly one
/// mesh source).
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub k: f64,
    pub mesh: MeshSource,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub analysis: AnalysisConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 0.0,
            mesh: MeshSource::Generated {
                n_surface: 8,
                n_radial: 6,
                outer_radius: 10.0,
                grading: 1.5,
            },
            solver: SolverConfig {
                tol: 1e-8,
                max_iter: 200_000,
                jacobi: true,
            },
            output: OutputConfig {
                dir: std::path::PathBuf::from("out"),
            },
            analysis: AnalysisConfig {
                ring_threshold: 0.08,
                plane_half_extent: 5.0,
                plane_resolution: 40,
            },
        }
    }
}

fn parse_num<T: std::str::FromStr>(section: &str, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| {
        Error::Config(format!("[{section}] {key}: cannot parse '{v}'"))
    })
}

impl RunConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_str_checked(&std::fs::read_to_string(path)?)
    }

    pub fn from_str_checked(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        // Mesh settings are collected first: the source key decides which
        // are meaningful, and mixing the two groups is an error.
        let mut mesh_kv: HashMap<String, String> = HashMap::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                match section.as_str() {
                    "problem" | "mesh" | "solver" | "output" | "analysis" => {}
                    other => {
                        return Err(Error::Config(format!(
                            "line {}: unknown section [{other}]",
                            lineno + 1
                        )))
                    }
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            match (section.as_str(), key) {
                ("problem", "k") => cfg.k = parse_num(&section, key, value)?,
                ("mesh", _) => {
                    mesh_kv.insert(key.to_string(), value.to_string());
                }
                ("solver", "tol") => cfg.solver.tol = parse_num(&section, key, value)?,
                ("solver", "max_iter") => {
                    cfg.solver.max_iter = parse_num(&section, key, value)?
                }
                ("solver", "preconditioner") => {
                    cfg.solver.jacobi = match value {
                        "jacobi" => true,
                        "none" => false,
                        other => {
                            return Err(Error::Config(format!(
                                "[solver] preconditioner: unknown value '{other}'"
                            )))
                        }
                    }
                }
                ("output", "dir") => cfg.output.dir = value.into(),
                ("analysis", "ring_threshold") => {
                    cfg.analysis.ring_threshold = parse_num(&section, key, value)?
                }
                ("analysis", "plane_half_extent") => {
                    cfg.analysis.plane_half_extent = parse_num(&section, key, value)?
                }
                ("analysis", "plane_resolution") => {
                    cfg.analysis.plane_resolution = parse_num(&section, key, value)?
                }
                (sec, key) => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key '{key}' in section [{sec}]",
                        lineno + 1
                    )))
                }
            }
        }

        cfg.mesh = Self::mesh_source(&mesh_kv)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn mesh_source(kv: &HashMap<String, String>) -> Result<MeshSource> {
        let generated_keys = ["n_surface", "n_radial", "outer_radius", "grading"];
        let msh_keys = ["path", "inner_tag", "outer_tag"];
        let source = kv.get("source").map(String::as_str).unwrap_or("generated");
        for (k, _) in kv.iter() {
            let known = k == "source"
                || generated_keys.contains(&k.as_str())
                || msh_keys.contains(&k.as_str());
            if !known {
                return Err(Error::Config(format!("[mesh] unknown key '{k}'")));
            }
        }
        match source {
            "generated" => {
                if let Some(k) = msh_keys.iter().find(|k| kv.contains_key(**k)) {
                    return Err(Error::Config(format!(
                        "[mesh] key '{k}' belongs to source = msh, but source is 'generated'"
                    )));
                }
                let mut src = match RunConfig::default().mesh {
                    MeshSource::Generated { .. } => RunConfig::default().mesh,
                    _ => unreachable!(),
                };
                if let MeshSource::Generated {
                    ref mut n_surface,
                    ref mut n_radial,
                    ref mut outer_radius,
                    ref mut grading,
                } = src
                {
                    if let Some(v) = kv.get("n_surface") {
                        *n_surface = parse_num("mesh", "n_surface", v)?;
                    }
                    if let Some(v) = kv.get("n_radial") {
                        *n_radial = parse_num("mesh", "n_radial", v)?;
                    }
                    if let Some(v) = kv.get("outer_radius") {
                        *outer_radius = parse_num("mesh", "outer_radius", v)?;
                    }
                    if let Some(v) = kv.get("grading") {
                        *grading = parse_num("mesh", "grading", v)?;
                    }
                }
                Ok(src)
            }
            "msh" => {
                if let Some(k) = generated_keys.iter().find(|k| kv.contains_key(**k)) {
                    return Err(Error::Config(format!(
                        "[mesh] key '{k}' belongs to source = generated, but source is 'msh'"
                    )));
                }
                let path = kv
                    .get("path")
                    .ok_or_else(|| Error::Config("[mesh] source = msh requires 'path'".into()))?;
                Ok(MeshSource::Msh {
                    path: path.into(),
                    inner_tag: kv
                        .get("inner_tag")
                        .map(|v| parse_num("mesh", "inner_tag", v))
                        .transpose()?
                        .unwrap_or(1),
                    outer_tag: kv
                        .get("outer_tag")
                        .map(|v| parse_num("mesh", "outer_tag", v))
                        .transpose()?
                        .unwrap_or(2),
                })
            }
            other => Err(Error::Config(format!(
                "[mesh] source must be 'generated' or 'msh', got '{other}'"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > -1.0) {
            return Err(Error::Config(format!(
                "k must be greater than -1, got {}",
                self.k
            )));
        }
        if self.solver.tol <= 0.0 || self.solver.max_iter == 0 {
            return Err(Error::Config("solver tol and max_iter must be positive".into()));
        }
        if self.analysis.ring_threshold <= 0.0 || self.analysis.plane_resolution == 0 {
            return Err(Error::Config("analysis parameters must be positive".into()));
        }
        Ok(())
    }

    /// Builds (or loads) the configured mesh.
    pub fn build_mesh(&self) -> Result<TetMesh> {
        match &self.mesh {
            MeshSource::Generated {
                n_surface,
                n_radial,
                outer_radius,
                grading,
            } => crate::mesh::cubed_sphere_shell(*n_surface, *n_radial, *outer_radius, *grading),
            MeshSource::Msh {
                path,
                inner_tag,
                outer_tag,
            } => {
                let mut tags = HashMap::new();
                tags.insert(*inner_tag, BoundaryTag::Inner);
                tags.insert(*outer_tag, BoundaryTag::Outer);
                let mesh = crate::mesh::read_msh(path, &tags)?;
                mesh.validate()?;
                Ok(mesh)
            }
        }
    }
}

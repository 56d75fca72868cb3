//! Tetrahedral meshes of the computational shell `{1 ≤ |x| ≤ R}`.
//!
//! Two sources: a built-in cubed-sphere generator (cube-surface grid
//! projected to the unit sphere, extruded radially with geometric grading,
//! prisms split into tetrahedra by a global-index rule so adjacent cells
//! conform), and a reader for the Gmsh MSH 2.2 ASCII format.

use crate::{Error, Result};
use std::collections::HashMap;
use std::io::BufRead;

/// Which boundary sphere a surface triangle belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    /// Particle surface `|x| = 1`.
    Inner,
    /// Truncation sphere `|x| = R`.
    Outer,
}

/// Tetrahedral mesh of the spherical shell with tagged boundary triangles.
#[derive(Clone, Debug)]
pub struct TetMesh {
    pub vertices: Vec<[f64; 3]>,
    /// Four vertex indices per tetrahedron, positively oriented.
    pub tets: Vec<[usize; 4]>,
    pub boundary_tris: Vec<([usize; 3], BoundaryTag)>,
    pub outer_radius: f64,
}

/// Signed volume of the tetrahedron `(a, b, c, d)`, positive for a
/// right-handed ordering.
pub fn signed_volume(a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let w = [d[0] - a[0], d[1] - a[1], d[2] - a[2]];
    (u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0])
        + u[2] * (v[0] * w[1] - v[1] * w[0]))
        / 6.0
}

/// Quality summary of a mesh.
#[derive(Clone, Copy, Debug)]
pub struct MeshQuality {
    pub min_dihedral_deg: f64,
    pub min_volume: f64,
    pub total_volume: f64,
}

impl TetMesh {
    pub fn tet_volume(&self, t: usize) -> f64 {
        let [a, b, c, d] = self.tets[t];
        signed_volume(self.vertices[a], self.vertices[b], self.vertices[c], self.vertices[d])
    }

    /// Sorted, deduplicated vertex indices appearing on triangles with the
    /// given tag.
    pub fn boundary_vertices(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .boundary_tris
            .iter()
            .filter(|(_, t)| *t == tag)
            .flat_map(|(tri, _)| tri.iter().copied())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Structural validation: positive volumes, boundary-vertex radii,
    /// face incidence (boundary faces on exactly one tet, interior on two),
    /// and agreement of the tagged triangles with the incidence count.
    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        for (ti, tet) in self.tets.iter().enumerate() {
            if tet.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("tet {ti} references missing vertex")));
            }
            let vol = self.tet_volume(ti);
            if vol <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "tet {ti} has non-positive volume {vol:.3e}"
                )));
            }
        }
        for (tri, tag) in &self.boundary_tris {
            let target = match tag {
                BoundaryTag::Inner => 1.0,
                BoundaryTag::Outer => self.outer_radius,
            };
            for &v in tri {
                if v >= nv {
                    return Err(Error::InvalidMesh("boundary triangle references missing vertex".into()));
                }
                let x = self.vertices[v];
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                if (r - target).abs() > 1e-9 {
                    return Err(Error::InvalidMesh(format!(
                        "vertex {v} on {tag:?} boundary has radius {r}, expected {target}"
                    )));
                }
            }
        }
        // Face incidence.
        let mut counts: HashMap<[usize; 3], usize> = HashMap::new();
        for tet in &self.tets {
            for f in tet_faces(tet) {
                *counts.entry(sorted3(f)).or_insert(0) += 1;
            }
        }
        for (face, c) in &counts {
            if *c > 2 {
                return Err(Error::InvalidMesh(format!(
                    "face {face:?} shared by {c} tets"
                )));
            }
        }
        let mut tagged: HashMap<[usize; 3], usize> = HashMap::new();
        for (tri, _) in &self.boundary_tris {
            *tagged.entry(sorted3(*tri)).or_insert(0) += 1;
        }
        for (face, c) in &counts {
            let is_boundary = *c == 1;
            let is_tagged = tagged.contains_key(face);
            if is_boundary != is_tagged {
                return Err(Error::InvalidMesh(format!(
                    "face {face:?}: incidence {c}, tagged {is_tagged}"
                )));
            }
        }
        for face in tagged.keys() {
            if !counts.contains_key(face) {
                return Err(Error::InvalidMesh(format!(
                    "tagged triangle {face:?} is not a face of any tet"
                )));
            }
        }
        Ok(())
    }

    /// FNV-1a hash over the full connectivity and geometry, used to bind
    /// solution checkpoints to the mesh they were computed on.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(&(self.vertices.len() as u64).to_le_bytes());
        eat(&(self.tets.len() as u64).to_le_bytes());
        eat(&(self.boundary_tris.len() as u64).to_le_bytes());
        eat(&self.outer_radius.to_bits().to_le_bytes());
        for v in &self.vertices {
            for c in v {
                eat(&c.to_bits().to_le_bytes());
            }
        }
        for t in &self.tets {
            for &i in t {
                eat(&(i as u64).to_le_bytes());
            }
        }
        for (tri, tag) in &self.boundary_tris {
            for &i in tri {
                eat(&(i as u64).to_le_bytes());
            }
            eat(&[match tag {
                BoundaryTag::Inner => 1u8,
                BoundaryTag::Outer => 2u8,
            }]);
        }
        h
    }

    /// Minimum dihedral angle, minimum element volume, and total volume.
    pub fn quality(&self) -> MeshQuality {
        let mut min_dihedral = f64::MAX;
        let mut min_volume = f64::MAX;
        let mut total = 0.0;
        for (ti, tet) in self.tets.iter().enumerate() {
            let vol = self.tet_volume(ti);
            min_volume = min_volume.min(vol);
            total += vol;
            let p: Vec<[f64; 3]> = tet.iter().map(|&v| self.vertices[v]).collect();
            // Inward face normals: face i is opposite vertex i.
            let mut normals = [[0.0f64; 3]; 4];
            for i in 0..4 {
                let idx: Vec<usize> = (0..4).filter(|&j| j != i).collect();
                let (a, b, c) = (p[idx[0]], p[idx[1]], p[idx[2]]);
                let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
                let mut n = [
                    u[1] * v[2] - u[2] * v[1],
                    u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0],
                ];
                let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
                for d in 0..3 {
                    n[d] /= len;
                }
                // Orient toward the opposite vertex.
                let to_opp = [p[i][0] - a[0], p[i][1] - a[1], p[i][2] - a[2]];
                if n[0] * to_opp[0] + n[1] * to_opp[1] + n[2] * to_opp[2] < 0.0 {
                    for d in 0..3 {
                        n[d] = -n[d];
                    }
                }
                normals[i] = n;
            }
            for i in 0..4 {
                for j in (i + 1)..4 {
                    let dot: f64 = (0..3).map(|d| normals[i][d] * normals[j][d]).sum();
                    let angle = std::f64::consts::PI - dot.clamp(-1.0, 1.0).acos();
                    min_dihedral = min_dihedral.min(angle);
                }
            }
        }
        MeshQuality {
            min_dihedral_deg: min_dihedral.to_degrees(),
            min_volume,
            total_volume: total,
        }
    }
}

fn tet_faces(t: &[usize; 4]) -> [[usize; 3]; 4] {
    [
        [t[1], t[2], t[3]],
        [t[0], t[2], t[3]],
        [t[0], t[1], t[3]],
        [t[0], t[1], t[2]],
    ]
}

fn sorted3(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

/// Surface triangulation of the unit sphere via a cubed-sphere grid with `n`
/// subdivisions per cube-face edge: `6n² + 2` vertices, `12n²` triangles.
/// Quad diagonals pass through the quad's smallest global vertex index, so
/// the triangulation is uniquely determined by the vertex numbering.
fn cube_sphere_surface(n: usize) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    // Deduplicated lattice points on the surface of the integer cube
    // {0..n}³, numbered in lexicographic order for determinism.
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut verts: Vec<[f64; 3]> = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            for k in 0..=n {
                if i == 0 || i == n || j == 0 || j == n || k == 0 || k == n {
                    let id = verts.len();
                    index.insert([i, j, k], id);
                    let p = [
                        2.0 * i as f64 / n as f64 - 1.0,
                        2.0 * j as f64 / n as f64 - 1.0,
                        2.0 * k as f64 / n as f64 - 1.0,
                    ];
                    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                    verts.push([p[0] / r, p[1] / r, p[2] / r]);
                }
            }
        }
    }
    // One quad per face cell on each of the six cube faces.
    let mut tris: Vec<[usize; 3]> = Vec::new();
    let faces: [Box<dyn Fn(usize, usize) -> [usize; 3]>; 6] = [
        Box::new(move |u, v| [0, u, v]),
        Box::new(move |u, v| [n, u, v]),
        Box::new(move |u, v| [u, 0, v]),
        Box::new(move |u, v| [u, n, v]),
        Box::new(move |u, v| [u, v, 0]),
        Box::new(move |u, v| [u, v, n]),
    ];
    for face in &faces {
        for u in 0..n {
            for v in 0..n {
                let q = [
                    index[&face(u, v)],
                    index[&face(u + 1, v)],
                    index[&face(u + 1, v + 1)],
                    index[&face(u, v + 1)],
                ];
                let min_pos = (0..4).min_by_key(|&i| q[i]).unwrap();
                // Diagonal through the smallest index: triangles
                // (m, m+1, m+2) and (m, m+2, m+3) cyclically.
                let m = min_pos;
                tris.push([q[m], q[(m + 1) % 4], q[(m + 2) % 4]]);
                tris.push([q[m], q[(m + 2) % 4], q[(m + 3) % 4]]);
            }
        }
    }
    (verts, tris)
}

/// Radii of the `n_radial + 1` layers from 1 to `R`, geometrically graded so
/// the first layer has thickness `(R − 1)(g − 1)/(g^{n_radial} − 1)`.
pub fn layer_radii(n_radial: usize, outer_radius: f64, grading: f64) -> Vec<f64> {
    let mut radii = Vec::with_capacity(n_radial + 1);
    if (grading - 1.0).abs() < 1e-12 {
        for l in 0..=n_radial {
            radii.push(1.0 + (outer_radius - 1.0) * l as f64 / n_radial as f64);
        }
    } else {
        let denom = grading.powi(n_radial as i32) - 1.0;
        for l in 0..=n_radial {
            radii.push(1.0 + (outer_radius - 1.0) * (grading.powi(l as i32) - 1.0) / denom);
        }
    }
    radii[0] = 1.0;
    radii[n_radial] = outer_radius;
    radii
}

/// Generates a tetrahedral mesh of the shell `{1 ≤ |x| ≤ R}`: cubed-sphere
/// surface grid, radial extrusion with geometric grading (finer near the
/// particle), each triangular prism split into 3 tets with quad-face
/// diagonals through the smallest global vertex index so the mesh conforms.
pub fn cubed_sphere_shell(
    n_surface: usize,
    n_radial: usize,
    outer_radius: f64,
    grading: f64,
) -> Result<TetMesh> {
    if n_surface < 2 || n_radial < 2 {
        return Err(Error::InvalidArgument(format!(
            "need n_surface >= 2 and n_radial >= 2, got {n_surface}, {n_radial}"
        )));
    }
    if outer_radius <= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "outer radius must exceed 1, got {outer_radius}"
        )));
    }
    if grading < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "grading must be >= 1, got {grading}"
        )));
    }
    let (surf, tris) = cube_sphere_surface(n_surface);
    let radii = layer_radii(n_radial, outer_radius, grading);
    let nsv = surf.len();

    let mut vertices = Vec::with_capacity(nsv * radii.len());
    for r in &radii {
        for s in &surf {
            vertices.push([s[0] * r, s[1] * r, s[2] * r]);
        }
    }

    let mut tets = Vec::with_capacity(3 * tris.len() * n_radial);
    for layer in 0..n_radial {
        let base = layer * nsv;
        for tri in &tris {
            // Rotate so the smallest surface index leads; vertex ids grow
            // with the layer, so this is also the smallest prism vertex.
            let m = (0..3).min_by_key(|&i| tri[i]).unwrap();
            let (a, b, c) = (tri[m] + base, tri[(m + 1) % 3] + base, tri[(m + 2) % 3] + base);
            let (at, bt, ct) = (a + nsv, b + nsv, c + nsv);
            // Quad faces through `a` take diagonals a–bt and a–ct; the third
            // quad face (b, c, ct, bt) takes the diagonal through min(b, c).
            let prism_tets: [[usize; 4]; 3] = if b < c {
                // diagonal b–ct on the face (b, c, ct, bt)
                [[a, b, c, ct], [a, b, ct, bt], [a, bt, ct, at]]
            } else {
                // diagonal c–bt
                [[a, b, c, bt], [a, bt, c, ct], [a, bt, ct, at]]
            };
            for mut t in prism_tets {
                let vol = signed_volume(
                    vertices[t[0]],
                    vertices[t[1]],
                    vertices[t[2]],
                    vertices[t[3]],
                );
                if vol < 0.0 {
                    t.swap(2, 3);
                }
                tets.push(t);
            }
        }
    }

    let mut boundary_tris = Vec::with_capacity(2 * tris.len());
    let top = n_radial * nsv;
    for tri in &tris {
        boundary_tris.push(([tri[0], tri[1], tri[2]], BoundaryTag::Inner));
        boundary_tris.push(([tri[0] + top, tri[1] + top, tri[2] + top], BoundaryTag::Outer));
    }

    let mesh = TetMesh {
        vertices,
        tets,
        boundary_tris,
        outer_radius,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Reads a Gmsh MSH 2.2 ASCII mesh.  Element types 2 (3-node triangle) and
/// 4 (4-node tet) are accepted; a triangle's first physical tag is mapped to
/// a boundary side through `tag_map`.  Binary files and other format
/// versions are rejected.
pub fn read_msh(path: &std::path::Path, tag_map: &HashMap<i64, BoundaryTag>) -> Result<TetMesh> {
    let file = std::fs::File::open(path)?;
    let mut lines = std::io::BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<String>>>()?
        .into_iter();

    fn next(lines: &mut impl Iterator<Item = String>) -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::MeshFormat("unexpected end of file".into()))
    }

    let header = next(&mut lines)?;
    if header.trim() != "$MeshFormat" {
        return Err(Error::MeshFormat(format!(
            "expected $MeshFormat, found '{}'",
            header.trim()
        )));
    }
    let fmt = next(&mut lines)?;
    let parts: Vec<&str> = fmt.split_whitespace().collect();
    if parts.len() < 3 {
        return Err(Error::MeshFormat(format!("malformed format line '{fmt}'")));
    }
    if parts[0] != "2.2" {
        return Err(Error::MeshFormat(format!(
            "unsupported MSH version '{}', only 2.2 ASCII is accepted",
            parts[0]
        )));
    }
    if parts[1] != "0" {
        return Err(Error::MeshFormat("binary MSH files are not supported".into()));
    }
    if next(&mut lines)?.trim() != "$EndMeshFormat" {
        return Err(Error::MeshFormat("missing $EndMeshFormat".into()));
    }

    let mut id_to_index: HashMap<i64, usize> = HashMap::new();
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut tets: Vec<[usize; 4]> = Vec::new();
    let mut boundary_tris: Vec<([usize; 3], BoundaryTag)> = Vec::new();
    let mut untagged: Vec<i64> = Vec::new();

    loop {
        let section = match lines.next() {
            Some(s) => s,
            None => break,
        };
        match section.trim() {
            "$Nodes" => {
                let n: usize = next(&mut lines)?
                    .trim()
                    .parse()
                    .map_err(|_| Error::MeshFormat("bad node count".into()))?;
                for _ in 0..n {
                    let line = next(&mut lines)?;
                    let f: Vec<&str> = line.split_whitespace().collect();
                    if f.len() < 4 {
                        return Err(Error::MeshFormat(format!("bad node line '{line}'")));
                    }
                    let id: i64 = f[0]
                        .parse()
                        .map_err(|_| Error::MeshFormat(format!("bad node id in '{line}'")))?;
                    let coords: Vec<f64> = f[1..4]
                        .iter()
                        .map(|s| s.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::MeshFormat(format!("bad coordinates in '{line}'")))?;
                    id_to_index.insert(id, vertices.len());
                    vertices.push([coords[0], coords[1], coords[2]]);
                }
                if next(&mut lines)?.trim() != "$EndNodes" {
                    return Err(Error::MeshFormat("missing $EndNodes".into()));
                }
            }
            "$Elements" => {
                let n: usize = next(&mut lines)?
                    .trim()
                    .parse()
                    .map_err(|_| Error::MeshFormat("bad element count".into()))?;
                for _ in 0..n {
                    let line = next(&mut lines)?;
                    let f: Vec<i64> = line
                        .split_whitespace()
                        .map(|s| s.parse::<i64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::MeshFormat(format!("bad element line '{line}'")))?;
                    if f.len() < 3 {
                        return Err(Error::MeshFormat(format!("bad element line '{line}'")));
                    }
                    let (elem_id, etype, ntags) = (f[0], f[1], f[2] as usize);
                    let node_ids = &f[3 + ntags..];
                    let lookup = |id: i64| -> Result<usize> {
                        id_to_index
                            .get(&id)
                            .copied()
                            .ok_or_else(|| Error::MeshFormat(format!("element references unknown node {id}")))
                    };
                    match etype {
                        2 => {
                            if node_ids.len() != 3 {
                                return Err(Error::MeshFormat(format!(
                                    "triangle {elem_id} has {} nodes",
                                    node_ids.len()
                                )));
                            }
                            let tag = if ntags >= 1 { tag_map.get(&f[3]).copied() } else { None };
                            match tag {
                                Some(t) => boundary_tris.push((
                                    [lookup(node_ids[0])?, lookup(node_ids[1])?, lookup(node_ids[2])?],
                                    t,
                                )),
                                None => untagged.push(elem_id),
                            }
                        }
                        4 => {
                            if node_ids.len() != 4 {
                                return Err(Error::MeshFormat(format!(
                                    "tet {elem_id} has {} nodes",
                                    node_ids.len()
                                )));
                            }
                            tets.push([
                                lookup(node_ids[0])?,
                                lookup(node_ids[1])?,
                                lookup(node_ids[2])?,
                                lookup(node_ids[3])?,
                            ]);
                        }
                        other => {
                            return Err(Error::MeshFormat(format!(
                                "unsupported element type {other} (only 2 and 4)"
                            )))
                        }
                    }
                }
                if next(&mut lines)?.trim() != "$EndElements" {
                    return Err(Error::MeshFormat("missing $EndElements".into()));
                }
            }
            "" => continue,
            other => {
                // Skip unknown sections up to their matching end marker.
                let end = format!("$End{}", other.trim_start_matches('$'));
                loop {
                    let l = next(&mut lines)?;
                    if l.trim() == end {
                        break;
                    }
                }
            }
        }
    }

    if !untagged.is_empty() {
        return Err(Error::MeshFormat(format!(
            "boundary triangles with unmapped physical tags: elements {untagged:?}"
        )));
    }

    // Repair tet orientation (Gmsh does not guarantee a sign convention).
    for t in &mut tets {
        if signed_volume(vertices[t[0]], vertices[t[1]], vertices[t[2]], vertices[t[3]]) < 0.0 {
            t.swap(2, 3);
        }
    }

    let outer_radius = boundary_tris
        .iter()
        .filter(|(_, tag)| *tag == BoundaryTag::Outer)
        .flat_map(|(tri, _)| tri.iter())
        .map(|&v| {
            let x = vertices[v];
            (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
        })
        .fold(0.0f64, f64::max);
    let outer_radius = if outer_radius > 0.0 {
        outer_radius
    } else {
        vertices
            .iter()
            .map(|x| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt())
            .fold(0.0f64, f64::max)
    };

    Ok(TetMesh {
        vertices,
        tets,
        boundary_tris,
        outer_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn counting_example() {
        let mesh = cubed_sphere_shell(2, 2, 10.0, 1.0).unwrap();
        assert_eq!(mesh.vertices.len(), 78); // (6·2²+2) vertices × 3 layers
        assert_eq!(mesh.tets.len(), 288);
        assert_eq!(mesh.boundary_tris.len(), 2 * 48);
    }

    #[test]
    fn generated_mesh_validates_and_has_positive_volumes() {
        for grading in [1.0, 1.6, 2.0] {
            let mesh = cubed_sphere_shell(4, 4, 8.0, grading).unwrap();
            mesh.validate().unwrap();
            let q = mesh.quality();
            assert!(q.min_volume > 0.0);
            assert!(q.min_dihedral_deg > 5.0, "min dihedral {}", q.min_dihedral_deg);
        }
    }

    #[test]
    fn shell_volume_converges() {
        let r = 10.0;
        let mesh = cubed_sphere_shell(16, 12, r, 1.3).unwrap();
        let want = 4.0 * PI / 3.0 * (r * r * r - 1.0);
        let got = mesh.quality().total_volume;
        assert!(
            (got - want).abs() / want < 0.02,
            "volume {got} vs {want} ({:.2}%)",
            100.0 * (got - want).abs() / want
        );
    }

    #[test]
    fn grading_controls_first_layer_thickness() {
        let (nr, r, g) = (6usize, 10.0, 1.8);
        let radii = layer_radii(nr, r, g);
        assert_eq!(radii.len(), nr + 1);
        assert!((radii[0] - 1.0).abs() < 1e-15 && (radii[nr] - r).abs() < 1e-15);
        let t1 = radii[1] - radii[0];
        let want = (r - 1.0) * (g - 1.0) / (g.powi(nr as i32) - 1.0);
        assert!((t1 - want).abs() < 1e-12);
        // Ratio of successive layer thicknesses equals the grading.
        for l in 1..nr {
            let ratio = (radii[l + 1] - radii[l]) / (radii[l] - radii[l - 1]);
            assert!((ratio - g).abs() < 1e-9);
        }
    }

    #[test]
    fn nested_refinement_shares_layer_radii() {
        // Doubling n_radial while square-rooting the grading keeps every
        // coarse layer radius, giving nested meshes for convergence studies.
        let coarse = layer_radii(4, 10.0, 2.25);
        let fine = layer_radii(8, 10.0, 1.5);
        for (l, rc) in coarse.iter().enumerate() {
            assert!((fine[2 * l] - rc).abs() < 1e-9);
        }
    }

    #[test]
    fn boundary_vertices_lie_on_spheres() {
        let mesh = cubed_sphere_shell(3, 3, 5.0, 1.4).unwrap();
        for v in mesh.boundary_vertices(BoundaryTag::Inner) {
            let x = mesh.vertices[v];
            assert!(((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() - 1.0).abs() < 1e-12);
        }
        for v in mesh.boundary_vertices(BoundaryTag::Outer) {
            let x = mesh.vertices[v];
            assert!(((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(cubed_sphere_shell(1, 4, 10.0, 1.0).is_err());
        assert!(cubed_sphere_shell(4, 1, 10.0, 1.0).is_err());
        assert!(cubed_sphere_shell(4, 4, 0.5, 1.0).is_err());
        assert!(cubed_sphere_shell(4, 4, 10.0, 0.9).is_err());
    }

    #[test]
    fn hash_is_sensitive_to_geometry() {
        let a = cubed_sphere_shell(3, 3, 5.0, 1.4).unwrap();
        let b = cubed_sphere_shell(3, 3, 5.0, 1.4).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = cubed_sphere_shell(3, 3, 5.0, 1.5).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    fn write_fixture(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mesh.msh");
        std::fs::write(&path, content).unwrap();
        (dir, path)
    }

    #[test]
    fn reads_two_tet_fixture() {
        // Five nodes, two tets sharing a face, one tagged triangle whose
        // vertices all lie on the unit sphere.
        let msh = "\
$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
5
1 1 0 0
2 0 1 0
3 0 0 1
4 -1 0 0
5 0.2 0.2 0.2
$EndNodes
$Elements
3
1 2 2 7 0 1 2 3
2 4 2 1 0 1 2 3 5
3 4 2 1 0 2 4 3 5
$EndElements
";
        let mut tag_map = HashMap::new();
        tag_map.insert(7i64, BoundaryTag::Inner);
        let (_dir, path) = write_fixture(msh);
        let mesh = read_msh(&path, &tag_map).unwrap();
        assert_eq!(mesh.vertices.len(), 5);
        assert_eq!(mesh.tets.len(), 2);
        assert_eq!(mesh.boundary_tris.len(), 1);
        assert!(mesh.tet_volume(0) > 0.0 && mesh.tet_volume(1) > 0.0);
    }

    #[test]
    fn rejects_binary_and_new_versions() {
        let (_d1, p1) = write_fixture("$MeshFormat\n2.2 1 8\n$EndMeshFormat\n");
        let err = read_msh(&p1, &HashMap::new()).unwrap_err();
        assert!(err.to_string().contains("binary"));

        let (_d2, p2) = write_fixture("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n");
        let err = read_msh(&p2, &HashMap::new()).unwrap_err();
        assert!(err.to_string().contains("4.1"));
    }

    #[test]
    fn rejects_untagged_boundary_triangles() {
        let msh = "\
$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
3
1 1 0 0
2 0 1 0
3 0 0 1
$EndNodes
$Elements
1
9 2 2 42 0 1 2 3
$EndElements
";
        let (_dir, path) = write_fixture(msh);
        let err = read_msh(&path, &HashMap::new()).unwrap_err();
        assert!(err.to_string().contains('9'), "{err}");
    }

    #[test]
    fn rejects_unsupported_element_type() {
        let msh = "\
$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
2
1 0 0 0
2 1 0 0
$EndNodes
$Elements
1
1 1 0 1 2
$EndElements
";
        let (_dir, path) = write_fixture(msh);
        assert!(read_msh(&path, &HashMap::new()).is_err());
    }

    #[test]
    fn validate_catches_inverted_tet_and_bad_radius() {
        let mut mesh = cubed_sphere_shell(2, 2, 4.0, 1.0).unwrap();
        mesh.tets[0].swap(0, 1);
        assert!(mesh.validate().is_err());

        let mut mesh = cubed_sphere_shell(2, 2, 4.0, 1.0).unwrap();
        let v = mesh.boundary_vertices(BoundaryTag::Inner)[0];
        mesh.vertices[v][0] += 0.1;
        assert!(mesh.validate().is_err());
    }
}

//! ASCII OBJ and PLY reading and writing (triangles only).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::TriangleMesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("ply") => Ok(MeshFormat::Ply),
            _ => Err(Error::InvalidArgument(format!(
                "unsupported mesh extension: {}",
                path.display()
            ))),
        }
    }
}

/// Loads an ASCII OBJ or PLY file and multiplies every coordinate by
/// `unit_scale` (e.g. 1000 for meter-stored data).
pub fn load_mesh(path: impl AsRef<Path>, unit_scale: f64) -> Result<TriangleMesh> {
    let path = path.as_ref();
    if !(unit_scale.is_finite() && unit_scale > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "unit_scale must be positive, got {unit_scale}"
        )));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (vertices, faces) = match MeshFormat::from_path(path)? {
        MeshFormat::Obj => parse_obj(path, &text)?,
        MeshFormat::Ply => parse_ply(path, &text)?,
    };
    let vertices = vertices
        .into_iter()
        .map(|v| [v[0] * unit_scale, v[1] * unit_scale, v[2] * unit_scale])
        .collect();
    TriangleMesh::new(vertices, faces)
}

/// Writes `mesh` in the format implied by the extension. Coordinates are
/// printed in shortest round-trip form, so reloading is exact.
pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if mesh.num_vertices() == 0 {
        return Err(Error::InvalidArgument("empty mesh".into()));
    }
    let text = match MeshFormat::from_path(path)? {
        MeshFormat::Obj => format_obj(mesh),
        MeshFormat::Ply => format_ply(mesh),
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn format_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::with_capacity(mesh.num_vertices() * 48 + mesh.num_faces() * 24);
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

fn format_ply(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", mesh.num_vertices());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    let _ = writeln!(s, "element face {}", mesh.num_faces());
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", v[0], v[1], v[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    s
}

type Parsed = (Vec<[f64; 3]>, Vec<[usize; 3]>);

fn parse_obj(path: &Path, text: &str) -> Result<Parsed> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let xyz: Vec<&str> = tok.collect();
                if xyz.len() < 3 {
                    return Err(Error::parse(path, line_no, "vertex needs 3 coordinates"));
                }
                let mut v = [0.0; 3];
                for (slot, t) in v.iter_mut().zip(&xyz[..3]) {
                    *slot = t.parse().map_err(|_| {
                        Error::parse(path, line_no, format!("bad coordinate {t:?}"))
                    })?;
                }
                vertices.push(v);
            }
            Some("f") => {
                let idx: Vec<&str> = tok.collect();
                if idx.len() != 3 {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("non-triangle face at line {line_no}"),
                    ));
                }
                let mut f = [0usize; 3];
                for (slot, t) in f.iter_mut().zip(&idx) {
                    let first = t.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| {
                        Error::parse(path, line_no, format!("bad face index {t:?}"))
                    })?;
                    let n = vertices.len() as i64;
                    // OBJ allows negative indices relative to the current vertex count.
                    let resolved = if i > 0 { i - 1 } else { n + i };
                    if i == 0 || resolved < 0 || resolved >= n {
                        return Err(Error::parse(
                            path,
                            line_no,
                            format!("face index {i} out of range"),
                        ));
                    }
                    *slot = resolved as usize;
                }
                faces.push(f);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

fn parse_ply(path: &Path, text: &str) -> Result<Parsed> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::parse(path, 1, "missing ply magic")),
    }
    let mut n_vertices = None;
    let mut n_faces = None;
    let mut vertex_props: Vec<String> = Vec::new();
    let mut current = "";
    let mut header_end = None;
    for (no, line) in lines.by_ref() {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", _] => {}
            ["format", other, ..] => {
                return Err(Error::parse(path, no, format!("unsupported format {other}")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let c: usize = count
                    .parse()
                    .map_err(|_| Error::parse(path, no, "bad element count"))?;
                current = match *name {
                    "vertex" => {
                        n_vertices = Some(c);
                        "vertex"
                    }
                    "face" => {
                        n_faces = Some(c);
                        "face"
                    }
                    _ => {
                        if c > 0 {
                            return Err(Error::parse(
                                path,
                                no,
                                format!("unsupported element {name}"),
                            ));
                        }
                        "other"
                    }
                };
            }
            ["property", "list", _, _, _name] => {
                if current != "face" {
                    return Err(Error::parse(path, no, "list property outside face element"));
                }
            }
            ["property", _ty, name] => {
                if current == "vertex" {
                    vertex_props.push((*name).to_string());
                }
            }
            ["end_header"] => {
                header_end = Some(no);
                break;
            }
            _ => return Err(Error::parse(path, no, format!("unexpected header line {line:?}"))),
        }
    }
    let header_end = header_end.ok_or_else(|| Error::parse(path, 1, "missing end_header"))?;
    let nv = n_vertices.unwrap_or(0);
    let nf = n_faces.unwrap_or(0);
    let pos = |axis: &str| -> Result<usize> {
        vertex_props
            .iter()
            .position(|p| p == axis)
            .ok_or_else(|| Error::parse(path, header_end, format!("missing vertex property {axis}")))
    };
    let (px, py, pz) = (pos("x")?, pos("y")?, pos("z")?);

    let mut body = lines.filter(|(_, l)| !l.is_empty());
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (no, line) = body
            .next()
            .ok_or_else(|| Error::parse(path, header_end, "unexpected end of vertex list"))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, no, "bad vertex value"))?;
        if vals.len() != vertex_props.len() {
            return Err(Error::parse(path, no, "vertex property count mismatch"));
        }
        vertices.push([vals[px], vals[py], vals[pz]]);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (no, line) = body
            .next()
            .ok_or_else(|| Error::parse(path, header_end, "unexpected end of face list"))?;
        let vals: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, no, "bad face value"))?;
        if vals.first() != Some(&3) || vals.len() != 4 {
            return Err(Error::parse(path, no, format!("non-triangle face at line {no}")));
        }
        if vals[1..].iter().any(|&i| i >= nv) {
            return Err(Error::parse(path, no, "face index out of range"));
        }
        faces.push([vals[1], vals[2], vals[3]]);
    }
    Ok((vertices, faces))
}

//! OFF and OBJ readers/writers. Only geometry is read: OBJ `v`/`f` records,
//! OFF vertex and face blocks. Polygons are fan-triangulated.

use std::fmt::Write as _;
use std::path::Path;

use super::{GeomError, Mesh, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<MeshFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(MeshFormat::Off),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }
}

pub fn load_mesh(path: &Path, format: Option<MeshFormat>) -> Result<Mesh, GeomError> {
    let format = format
        .or_else(|| MeshFormat::from_path(path))
        .ok_or_else(|| GeomError::UnknownFormat(path.display().to_string()))?;
    let text = std::fs::read_to_string(path).map_err(|source| GeomError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let (v, t) = match format {
        MeshFormat::Off => parse_off(&text)?,
        MeshFormat::Obj => parse_obj(&text)?,
    };
    Mesh::from_triangles(v, t)
}

fn perr(line: usize, message: impl Into<String>) -> GeomError {
    GeomError::Parse {
        line,
        message: message.into(),
    }
}

fn fan(poly: &[u32], out: &mut Vec<[u32; 3]>) {
    for k in 1..poly.len().saturating_sub(1) {
        out.push([poly[0], poly[k], poly[k + 1]]);
    }
}

pub type Soup = (Vec<Vec3>, Vec<[u32; 3]>);

pub fn parse_off(text: &str) -> Result<Soup, GeomError> {
    // (line number, tokens) with comments and blank lines removed
    let mut lines = text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then(|| (i + 1, l))
    });
    let (ln, header) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
    let rest = header
        .strip_prefix("OFF")
        .ok_or_else(|| perr(ln, "missing OFF header"))?
        .trim();
    let (ln, counts) = if rest.is_empty() {
        lines
            .next()
            .ok_or_else(|| perr(ln, "missing counts line"))?
    } else {
        (ln, rest)
    };
    let counts: Vec<usize> = counts
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| perr(ln, format!("bad count '{s}'"))))
        .collect::<Result<_, _>>()?;
    if counts.len() < 2 {
        return Err(perr(ln, "expected vertex and face counts"));
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| perr(ln, "unexpected end of vertex block"))?;
        let xyz: Vec<f64> = l
            .split_whitespace()
            .take(3)
            .map(|s| {
                s.parse()
                    .map_err(|_| perr(ln, format!("bad coordinate '{s}'")))
            })
            .collect::<Result<_, _>>()?;
        if xyz.len() != 3 {
            return Err(perr(ln, "vertex needs 3 coordinates"));
        }
        vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| perr(ln, "unexpected end of face block"))?;
        let mut it = l.split_whitespace();
        let n: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| perr(ln, "bad face vertex count"))?;
        let idx: Vec<u32> = it
            .take(n)
            .map(|s| match s.parse::<u32>() {
                Ok(i) if (i as usize) < nv => Ok(i),
                _ => Err(perr(ln, format!("bad vertex index '{s}'"))),
            })
            .collect::<Result<_, _>>()?;
        if idx.len() != n || n < 3 {
            return Err(perr(ln, "face needs at least 3 indices"));
        }
        fan(&idx, &mut triangles);
    }
    Ok((vertices, triangles))
}

pub fn parse_obj(text: &str) -> Result<Soup, GeomError> {
    let mut vertices = Vec::new();
    let mut faces: Vec<(usize, Vec<i64>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let line = line.split('#').next().unwrap_or("");
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let xyz: Vec<f64> = it
                    .take(3)
                    .map(|s| {
                        s.parse()
                            .map_err(|_| perr(ln, format!("bad coordinate '{s}'")))
                    })
                    .collect::<Result<_, _>>()?;
                if xyz.len() != 3 {
                    return Err(perr(ln, "vertex needs 3 coordinates"));
                }
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("f") => {
                let idx: Vec<i64> = it
                    .map(|s| {
                        s.split('/')
                            .next()
                            .and_then(|v| v.parse::<i64>().ok())
                            .ok_or_else(|| perr(ln, format!("bad face token '{s}'")))
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(perr(ln, "face needs at least 3 indices"));
                }
                faces.push((ln, idx));
            }
            _ => {}
        }
    }
    let n = vertices.len() as i64;
    let mut triangles = Vec::new();
    for (ln, idx) in faces {
        let poly: Vec<u32> = idx
            .iter()
            .map(|&k| {
                // 1-based, negative values count back from the end
                let r = if k > 0 { k - 1 } else { n + k };
                if k == 0 || r < 0 || r >= n {
                    Err(perr(ln, format!("vertex index {k} out of range")))
                } else {
                    Ok(r as u32)
                }
            })
            .collect::<Result<_, _>>()?;
        fan(&poly, &mut triangles);
    }
    Ok((vertices, triangles))
}

pub fn write_off(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "OFF\n{} {} 0",
        mesh.vertices().len(),
        mesh.triangles().len()
    );
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

pub fn write_obj(mesh: &Mesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

//! ASCII OBJ / PLY reading and writing.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{GeometryError, Rgb, TriangleMesh, Vec3};

/// Formats a real with 9 significant digits, positional where that stays
/// short, scientific otherwise.
pub fn format_real(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".to_string() } else { format!("{x}") };
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if (-5..9).contains(&exp) {
        let (int_part, frac_part) = if exp >= 0 {
            let split = exp as usize + 1;
            (digits[..split].to_string(), digits[split..].to_string())
        } else {
            ("0".to_string(), "0".repeat((-exp - 1) as usize) + &digits)
        };
        out.push_str(&int_part);
        let frac = frac_part.trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
    } else {
        out.push_str(&digits[..1]);
        let frac = digits[1..].trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
        let _ = write!(out, "e{exp}");
    }
    out
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GeometryError + '_ {
    move |source| GeometryError::Io { path: path.to_path_buf(), source }
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh, GeometryError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    match extension(path).as_str() {
        "obj" => {
            let text = String::from_utf8(bytes)
                .map_err(|_| GeometryError::UnsupportedFormat("OBJ file is not valid UTF-8 text".into()))?;
            parse_obj(&text)
        }
        "ply" => parse_ply(&bytes),
        other => Err(GeometryError::UnsupportedFormat(format!("unknown extension '{other}'"))),
    }
}

pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<(), GeometryError> {
    let path = path.as_ref();
    mesh.validate()?;
    let text = match extension(path).as_str() {
        "obj" => write_obj(mesh),
        "ply" => write_ply(mesh),
        other => return Err(GeometryError::UnsupportedFormat(format!("unknown extension '{other}'"))),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(path))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

fn parse_err(line: usize, message: impl Into<String>) -> GeometryError {
    GeometryError::Parse { line, message: message.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, GeometryError> {
    tok.parse::<f64>().map_err(|_| parse_err(line, format!("invalid number '{tok}'")))
}

fn parse_obj(text: &str) -> Result<TriangleMesh, GeometryError> {
    let mut vertices = Vec::new();
    let mut colors: Vec<Rgb> = Vec::new();
    let mut faces = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let vals = toks.map(|t| parse_f64(t, line_no)).collect::<Result<Vec<_>, _>>()?;
                match vals.len() {
                    3 | 4 => vertices.push(Vec3::new(vals[0], vals[1], vals[2])),
                    6 => {
                        vertices.push(Vec3::new(vals[0], vals[1], vals[2]));
                        colors.push([vals[3], vals[4], vals[5]]);
                    }
                    n => return Err(parse_err(line_no, format!("vertex has {n} values"))),
                }
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in toks {
                    let head = tok.split('/').next().unwrap_or("");
                    let i: i64 = head.parse().map_err(|_| parse_err(line_no, format!("invalid face index '{tok}'")))?;
                    let resolved = match i {
                        0 => return Err(parse_err(line_no, "face index 0 is invalid in OBJ")),
                        i if i > 0 => (i - 1) as usize,
                        i => {
                            let back = (-i) as usize;
                            if back > vertices.len() {
                                return Err(parse_err(line_no, format!("relative face index {i} out of range")));
                            }
                            vertices.len() - back
                        }
                    };
                    idx.push(resolved);
                }
                if idx.len() < 3 {
                    return Err(parse_err(line_no, "face has fewer than 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    let vertex_colors = match colors.len() {
        0 => None,
        n if n == vertices.len() => Some(colors),
        _ => return Err(parse_err(0, "only some vertices carry colors")),
    };
    TriangleMesh::new(vertices, faces, vertex_colors)
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    // (name, scalar type, is_list)
    properties: Vec<(String, String, bool)>,
}

fn parse_ply(bytes: &[u8]) -> Result<TriangleMesh, GeometryError> {
    let text = std::str::from_utf8(bytes).map_err(|_| {
        GeometryError::UnsupportedFormat("PLY is not ASCII (binary PLY is not supported)".into())
    })?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(parse_err(1, "missing 'ply' magic")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        let (no, line) = lines.next().ok_or_else(|| parse_err(0, "unterminated header"))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => {}
            ["format", kind, ..] => {
                return Err(GeometryError::UnsupportedFormat(format!("PLY format '{kind}' (only ascii is supported)")));
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: count.parse().map_err(|_| parse_err(no, "invalid element count"))?,
                properties: Vec::new(),
            }),
            ["property", "list", _, ty, name] => elements
                .last_mut()
                .ok_or_else(|| parse_err(no, "property before element"))?
                .properties
                .push((name.to_string(), ty.to_string(), true)),
            ["property", ty, name] => elements
                .last_mut()
                .ok_or_else(|| parse_err(no, "property before element"))?
                .properties
                .push((name.to_string(), ty.to_string(), false)),
            ["end_header"] => break,
            _ => return Err(parse_err(no, format!("unrecognized header line '{line}'"))),
        }
    }

    let mut vertices = Vec::new();
    let mut colors = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            let (no, line) = lines.next().ok_or_else(|| parse_err(0, format!("missing {} data", el.name)))?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            let mut pos = 0;
            let mut xyz = [f64::NAN; 3];
            let mut rgb = [f64::NAN; 3];
            let mut has_color = false;
            for (pname, ty, is_list) in &el.properties {
                let next = |pos: &mut usize| -> Result<&str, GeometryError> {
                    let t = toks.get(*pos).copied().ok_or_else(|| parse_err(no, "too few values"))?;
                    *pos += 1;
                    Ok(t)
                };
                if *is_list {
                    let n: usize = next(&mut pos)?.parse().map_err(|_| parse_err(no, "invalid list length"))?;
                    let mut idx = Vec::with_capacity(n);
                    for _ in 0..n {
                        let t = next(&mut pos)?;
                        idx.push(t.parse::<usize>().map_err(|_| parse_err(no, format!("invalid index '{t}'")))?);
                    }
                    if el.name == "face" && (pname == "vertex_indices" || pname == "vertex_index") {
                        if n < 3 {
                            return Err(parse_err(no, "face has fewer than 3 vertices"));
                        }
                        for k in 1..n - 1 {
                            faces.push([idx[0], idx[k], idx[k + 1]]);
                        }
                    }
                    continue;
                }
                let value = parse_f64(next(&mut pos)?, no)?;
                if el.name != "vertex" {
                    continue;
                }
                let is_byte = matches!(ty.as_str(), "uchar" | "uint8" | "char" | "int8");
                let channel = |v: f64| if is_byte { v / 255.0 } else { v };
                match pname.as_str() {
                    "x" => xyz[0] = value,
                    "y" => xyz[1] = value,
                    "z" => xyz[2] = value,
                    "red" | "r" => (rgb[0], has_color) = (channel(value), true),
                    "green" | "g" => (rgb[1], has_color) = (channel(value), true),
                    "blue" | "b" => (rgb[2], has_color) = (channel(value), true),
                    _ => {}
                }
            }
            if el.name == "vertex" {
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
                if has_color {
                    colors.push(rgb);
                }
            }
        }
    }
    let vertex_colors = (!colors.is_empty()).then_some(colors);
    TriangleMesh::new(vertices, faces, vertex_colors)
}

fn write_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for (i, v) in mesh.vertices.iter().enumerate() {
        let _ = write!(s, "v {} {} {}", format_real(v.x), format_real(v.y), format_real(v.z));
        if let Some(c) = &mesh.vertex_colors {
            let _ = write!(s, " {} {} {}", format_real(c[i][0]), format_real(c[i][1]), format_real(c[i][2]));
        }
        s.push('\n');
    }
    for f in &mesh.faces {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

fn write_ply(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", mesh.vertices.len());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    if mesh.vertex_colors.is_some() {
        s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    let _ = writeln!(s, "element face {}", mesh.faces.len());
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    let to_byte = |c: f64| (c.clamp(0.0, 1.0) * 255.0).round() as u8;
    for (i, v) in mesh.vertices.iter().enumerate() {
        let _ = write!(s, "{} {} {}", format_real(v.x), format_real(v.y), format_real(v.z));
        if let Some(c) = &mesh.vertex_colors {
            let _ = write!(s, " {} {} {}", to_byte(c[i][0]), to_byte(c[i][1]), to_byte(c[i][2]));
        }
        s.push('\n');
    }
    for f in &mesh.faces {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    s
}

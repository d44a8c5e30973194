//! Wavefront OBJ/MTL output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::image::save_rgba_png;
use super::write_file;
use crate::error::{Error, Result};
use crate::export::{Mesh, TexturedMesh};

fn push_vertices(out: &mut String, mesh: &Mesh) {
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
}

/// Plain triangle mesh; indices are written 1-based.
pub fn save_obj(mesh: &Mesh, path: &Path) -> Result<()> {
    let mut out = String::from("# gramhd mesh\n");
    push_vertices(&mut out, mesh);
    for t in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    write_file(path, out.as_bytes())
}

/// Writes `<stem>.obj`, `<stem>.mtl` and one RGBA PNG per surface into `dir`.
/// Each surface is its own object with a material whose diffuse and alpha
/// maps are its texture. OBJ's `v` axis points up the image, so texture
/// coordinates are written as `(u, 1 - v)`. Returns every path written.
pub fn save_textured_obj(meshes: &[TexturedMesh], dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    if stem.is_empty() || stem.contains(['/', '\\']) {
        return Err(Error::InvalidArgument(format!("bad file stem `{stem}`")));
    }
    let mtl_name = format!("{stem}.mtl");
    let mut obj = format!("# gramhd textured mesh\nmtllib {mtl_name}\n");
    let mut mtl = String::from("# gramhd materials\n");
    let mut written = Vec::new();
    let mut base = 1usize;
    for tm in meshes {
        let m = &tm.mesh;
        if m.uvs.len() != m.vertices.len() {
            return Err(Error::InvalidArgument(format!(
                "surface {} has {} uvs for {} vertices",
                tm.surface_index,
                m.uvs.len(),
                m.vertices.len()
            )));
        }
        let name = format!("surface_{:02}", tm.surface_index);
        let tex_name = format!("{stem}_{name}.png");
        let tex = &tm.texture;
        let tex_path = dir.join(&tex_name);
        save_rgba_png(tex.height(), tex.width(), &tex.to_rgba(), &tex_path)?;
        written.push(tex_path);
        let _ = write!(
            mtl,
            "newmtl {name}\nKa 0 0 0\nKd 1 1 1\nKs 0 0 0\nd 1\nillum 1\nmap_Kd {tex_name}\nmap_d {tex_name}\n"
        );
        let _ = writeln!(obj, "o {name}\nusemtl {name}");
        push_vertices(&mut obj, m);
        for uv in &m.uvs {
            let _ = writeln!(obj, "vt {} {}", uv[0], 1.0 - uv[1]);
        }
        for t in &m.triangles {
            let [a, b, c] = t.map(|i| i as usize + base);
            let _ = writeln!(obj, "f {a}/{a} {b}/{b} {c}/{c}");
        }
        base += m.vertices.len();
    }
    let obj_path = dir.join(format!("{stem}.obj"));
    let mtl_path = dir.join(&mtl_name);
    write_file(&obj_path, obj.as_bytes())?;
    write_file(&mtl_path, mtl.as_bytes())?;
    written.push(obj_path);
    written.push(mtl_path);
    Ok(written)
}

use std::collections::HashMap;

use super::fusion::OccupancyGrid;
use super::tables::{CORNERS, EDGES, EDGE_TABLE, TRIANGLE_TABLE};
use super::{Mesh, MIN_TRIANGLE_AREA};

/// Extracts the `level` isosurface with linearly interpolated edge crossings.
/// Vertices are shared between neighbouring cells. A level outside the open
/// value range gives an empty mesh.
pub fn marching_cubes(grid: &OccupancyGrid, level: f64) -> Mesh {
    let n = grid.spec.resolution;
    let (lo, hi) = grid
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v as f64), hi.max(v as f64))
        });
    if !(level > lo && level < hi) || n < 2 {
        return Mesh::default();
    }
    let node = |i: usize, j: usize, k: usize| (k * n + j) * n + i;
    let mut mesh = Mesh::default();
    // lattice edge (start node, axis) -> vertex index
    let mut edge_vertex: HashMap<(usize, usize), u32> = HashMap::new();
    for k in 0..n - 1 {
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let corner = |c: usize| {
                    let o = CORNERS[c];
                    (i + o[0], j + o[1], k + o[2])
                };
                let mut vals = [0.0f64; 8];
                let mut case = 0usize;
                for (c, v) in vals.iter_mut().enumerate() {
                    let (a, b, d) = corner(c);
                    *v = grid.values[node(a, b, d)] as f64;
                    if *v < level {
                        case |= 1 << c;
                    }
                }
                let edges = EDGE_TABLE[case];
                if edges == 0 {
                    continue;
                }
                let mut ids = [u32::MAX; 12];
                for (e, [c0, c1]) in EDGES.iter().enumerate() {
                    if edges & (1 << e) == 0 {
                        continue;
                    }
                    let (p0, p1) = (corner(*c0), corner(*c1));
                    let start = p0.min(p1);
                    let (s, t) = if p0 <= p1 { (*c0, *c1) } else { (*c1, *c0) };
                    let axis = (0..3).find(|&a| CORNERS[*c0][a] != CORNERS[*c1][a]).expect("edge spans one axis");
                    let key = (node(start.0, start.1, start.2), axis);
                    ids[e] = *edge_vertex.entry(key).or_insert_with(|| {
                        let (va, vb) = (vals[s], vals[t]);
                        let f = if vb != va { (level - va) / (vb - va) } else { 0.5 };
                        let pa = grid.spec.point(start.0, start.1, start.2);
                        let end = if s == *c0 { p1 } else { p0 };
                        let pb = grid.spec.point(end.0, end.1, end.2);
                        mesh.vertices.push(pa + (pb - pa) * f.clamp(0.0, 1.0));
                        (mesh.vertices.len() - 1) as u32
                    });
                }
                for tri in TRIANGLE_TABLE[case].chunks_exact(3) {
                    if tri[0] < 0 {
                        break;
                    }
                    let t = [ids[tri[0] as usize], ids[tri[1] as usize], ids[tri[2] as usize]];
                    if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                        continue;
                    }
                    if mesh.triangle_area(t) < MIN_TRIANGLE_AREA {
                        continue;
                    }
                    mesh.triangles.push(t);
                }
            }
        }
    }
    mesh.compact();
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::export::fusion::GridSpec;
    use crate::math::Vec3;

    fn sphere_grid(n: usize) -> OccupancyGrid {
        let spec = GridSpec {
            resolution: n,
            min: Vec3::new(-1.0, -1.0, -1.0),
            max: Vec3::new(1.0, 1.0, 1.0),
        };
        OccupancyGrid::from_fn(spec, |p| p.norm()).unwrap()
    }

    #[test]
    fn tables_are_consistent() {
        for case in 0..256 {
            let mut used = 0u16;
            for &e in TRIANGLE_TABLE[case].iter().take_while(|e| **e >= 0) {
                used |= 1 << e;
            }
            assert_eq!(used, EDGE_TABLE[case], "case {case}");
            // an edge is crossed iff its corners differ in inside-ness
            for (e, [a, b]) in EDGES.iter().enumerate() {
                let crossed = ((case >> a) & 1) != ((case >> b) & 1);
                assert_eq!(crossed, EDGE_TABLE[case] & (1 << e) != 0);
            }
        }
    }

    #[test]
    fn sphere_distance_field_vertices_on_sphere() {
        let g = sphere_grid(41);
        let m = marching_cubes(&g, 0.6);
        assert!(!m.is_empty());
        let half_voxel = 0.5 * g.voxel_size();
        for v in &m.vertices {
            assert!((v.norm() - 0.6).abs() < half_voxel);
        }
    }

    #[test]
    fn closed_surface_is_watertight() {
        let m = marching_cubes(&sphere_grid(24), 0.7);
        let mut count: HashMap<(u32, u32), usize> = HashMap::new();
        for t in &m.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        assert!(count.values().all(|&c| c == 2));
    }

    #[test]
    fn constant_or_out_of_range_level_is_empty() {
        let spec = GridSpec::default();
        let spec = GridSpec { resolution: 8, ..spec };
        let flat = OccupancyGrid::from_fn(spec, |_| 0.3).unwrap();
        assert!(marching_cubes(&flat, 0.3).is_empty());
        assert!(marching_cubes(&sphere_grid(8), 5.0).is_empty());
    }

    #[test]
    fn linear_field_gives_planar_mesh() {
        let g = sphere_grid(17);
        let lin = OccupancyGrid::from_fn(g.spec, |p| 0.3 * p.x - 0.2 * p.y + 0.5 * p.z).unwrap();
        let m = marching_cubes(&lin, 0.05);
        assert!(!m.is_empty());
        for v in &m.vertices {
            assert!((0.3 * v.x - 0.2 * v.y + 0.5 * v.z - 0.05).abs() < 1e-6);
        }
    }

    #[test]
    fn vertices_lie_on_lattice_edges() {
        let g = sphere_grid(12);
        let s = g.spec.spacing();
        let m = marching_cubes(&g, 0.55);
        for v in &m.vertices {
            let f = [(v.x + 1.0) / s.x, (v.y + 1.0) / s.y, (v.z + 1.0) / s.z];
            let off_lattice = f.iter().filter(|c| (*c - c.round()).abs() > 1e-9).count();
            assert!(off_lattice <= 1);
        }
    }
}

//! Raw float32 grids with small headers: map stacks (`GRMS`), depth maps
//! (`GRMD`) and occupancy grids (`GRMO`).

use std::path::Path;

use super::binary::{dim, put_f32s, put_f64, put_u32, Reader};
use super::{read_file, write_file, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::export::{GridSpec, OccupancyGrid};
use crate::gridding::{MapStack, SurfaceMeta, Warp};
use crate::math::Vec3;
use crate::render::DepthMap;

pub const MAPS_MAGIC: [u8; 4] = *b"GRMS";
pub const DEPTH_MAGIC: [u8; 4] = *b"GRMD";
pub const GRID_MAGIC: [u8; 4] = *b"GRMO";

fn check_version(r: &mut Reader) -> Result<()> {
    match r.u32()? {
        FORMAT_VERSION => Ok(()),
        v => Err(Error::UnsupportedVersion(v)),
    }
}

/// Header: magic, version, N, H, W, C; then per surface `half_width: f64`,
/// `is_background: u8`, `warp: u8` (0 linear, 1 background transform);
/// then the `N x H x W x C` payload.
pub fn encode_maps(maps: &MapStack) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(24 + maps.len() * 10 + maps.data.len() * 4);
    out.extend_from_slice(&MAPS_MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    for (v, what) in [
        (maps.len(), "surface count"),
        (maps.height, "height"),
        (maps.width, "width"),
        (maps.channels, "channels"),
    ] {
        put_u32(&mut out, dim(v, what)?);
    }
    for m in &maps.meta {
        put_f64(&mut out, m.half_width);
        out.push(u8::from(m.is_background));
        out.push(match m.warp {
            Warp::Linear => 0,
            Warp::BgTrans => 1,
        });
    }
    put_f32s(&mut out, &maps.data);
    Ok(out)
}

pub fn decode_maps(bytes: &[u8]) -> Result<MapStack> {
    let mut r = Reader::new(bytes, "map file");
    r.magic(MAPS_MAGIC)?;
    check_version(&mut r)?;
    let [n, h, w, c] = [r.u32()?, r.u32()?, r.u32()?, r.u32()?].map(|v| v as usize);
    let mut meta = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let half_width = r.f64()?;
        let is_background = match r.u8()? {
            0 => false,
            1 => true,
            b => return Err(Error::ModelFormat(format!("map file: bad background flag {b}"))),
        };
        let warp = match r.u8()? {
            0 => Warp::Linear,
            1 => Warp::BgTrans,
            b => return Err(Error::ModelFormat(format!("map file: unknown warp tag {b}"))),
        };
        meta.push(SurfaceMeta {
            half_width,
            is_background,
            warp,
        });
    }
    let count = [n, h, w, c]
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| Error::ModelFormat("map file: size overflow".into()))?;
    let data = r.f32s(count)?;
    r.finish()?;
    MapStack::new(meta, h, w, c, data)
}

pub fn save_maps(maps: &MapStack, path: &Path) -> Result<()> {
    write_file(path, &encode_maps(maps)?)
}

pub fn load_maps(path: &Path) -> Result<MapStack> {
    decode_maps(&read_file(path)?)
}

/// 16-byte header (magic, version, H, W), then the depth plane and the
/// coverage plane.
pub fn encode_depth(depth: &DepthMap) -> Result<Vec<u8>> {
    let n = depth.height * depth.width;
    if depth.depth.len() != n || depth.coverage.len() != n {
        return Err(Error::InvalidArgument("depth map planes do not match its size".into()));
    }
    let mut out = Vec::with_capacity(16 + 8 * n);
    out.extend_from_slice(&DEPTH_MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u32(&mut out, dim(depth.height, "height")?);
    put_u32(&mut out, dim(depth.width, "width")?);
    put_f32s(&mut out, &depth.depth);
    put_f32s(&mut out, &depth.coverage);
    Ok(out)
}

pub fn decode_depth(bytes: &[u8]) -> Result<DepthMap> {
    let mut r = Reader::new(bytes, "depth file");
    r.magic(DEPTH_MAGIC)?;
    check_version(&mut r)?;
    let (height, width) = (r.u32()? as usize, r.u32()? as usize);
    let n = height
        .checked_mul(width)
        .ok_or_else(|| Error::ModelFormat("depth file: size overflow".into()))?;
    let depth = r.f32s(n)?;
    let coverage = r.f32s(n)?;
    r.finish()?;
    Ok(DepthMap {
        height,
        width,
        depth,
        coverage,
    })
}

pub fn save_depth(depth: &DepthMap, path: &Path) -> Result<()> {
    write_file(path, &encode_depth(depth)?)
}

pub fn load_depth(path: &Path) -> Result<DepthMap> {
    decode_depth(&read_file(path)?)
}

/// Header: magic, version, resolution, box min and max as six `f64`; then
/// `resolution³` values with x fastest.
pub fn encode_grid(grid: &OccupancyGrid) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(60 + grid.values.len() * 4);
    out.extend_from_slice(&GRID_MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u32(&mut out, dim(grid.spec.resolution, "resolution")?);
    for v in [grid.spec.min, grid.spec.max] {
        for c in [v.x, v.y, v.z] {
            put_f64(&mut out, c);
        }
    }
    put_f32s(&mut out, &grid.values);
    Ok(out)
}

pub fn decode_grid(bytes: &[u8]) -> Result<OccupancyGrid> {
    let mut r = Reader::new(bytes, "occupancy file");
    r.magic(GRID_MAGIC)?;
    check_version(&mut r)?;
    let resolution = r.u32()? as usize;
    let min = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
    let max = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
    let n = resolution
        .checked_pow(3)
        .ok_or_else(|| Error::ModelFormat("occupancy file: size overflow".into()))?;
    let values = r.f32s(n)?;
    r.finish()?;
    OccupancyGrid::new(GridSpec { resolution, min, max }, values)
}

pub fn save_grid(grid: &OccupancyGrid, path: &Path) -> Result<()> {
    write_file(path, &encode_grid(grid)?)
}

pub fn load_grid(path: &Path) -> Result<OccupancyGrid> {
    decode_grid(&read_file(path)?)
}

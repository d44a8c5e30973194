//! 8-bit PNG input and output.

use std::io::Cursor;
use std::path::Path;

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::gridding::MapStack;
use crate::render::Image;

/// Quantizes `[0, 1]` floats to bytes by rounding to nearest.
pub fn to_rgb8(values: &[f32]) -> Vec<u8> {
    values
        .iter()
        .map(|&v| {
            let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
            (v * 255.0).round() as u8
        })
        .collect()
}

fn encode(width: usize, height: usize, color: png::ColorType, bytes: &[u8]) -> Result<Vec<u8>> {
    let err = |e: png::EncodingError| Error::Image(e.to_string());
    let (w, h) = (
        u32::try_from(width).map_err(|_| Error::Image("image too wide".into()))?,
        u32::try_from(height).map_err(|_| Error::Image("image too tall".into()))?,
    );
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w, h);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(err)?;
        writer.write_image_data(bytes).map_err(err)?;
        writer.finish().map_err(err)?;
    }
    Ok(out)
}

pub fn save_png(image: &Image, path: &Path) -> Result<()> {
    if image.height == 0 || image.width == 0 {
        return Err(Error::Image("cannot write an empty image".into()));
    }
    let bytes = encode(image.width, image.height, png::ColorType::Rgb, &to_rgb8(&image.data))?;
    write_file(path, &bytes)
}

/// Writes row-major `H x W x 4` values as an RGBA PNG.
pub fn save_rgba_png(height: usize, width: usize, rgba: &[f32], path: &Path) -> Result<()> {
    if height == 0 || width == 0 || rgba.len() != height * width * 4 {
        return Err(Error::Image(format!(
            "rgba image {height}x{width} needs {} values, got {}",
            height * width * 4,
            rgba.len()
        )));
    }
    let bytes = encode(width, height, png::ColorType::Rgba, &to_rgb8(rgba))?;
    write_file(path, &bytes)
}

/// Reads an 8-bit grey, RGB or RGBA PNG as an RGB image in `[0, 1]`; alpha is
/// dropped.
pub fn load_png(path: &Path) -> Result<Image> {
    let bytes = read_file(path)?;
    let err = |e: png::DecodingError| Error::Image(format!("{}: {e}", path.display()));
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = dec.read_info().map_err(err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Image(format!("{}: image too large", path.display())))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(err)?;
    let (h, w) = (info.height as usize, info.width as usize);
    let stride = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => return Err(Error::Image(format!("{}: unsupported color type {other:?}", path.display()))),
    };
    let mut data = Vec::with_capacity(h * w * 3);
    for row in buf.chunks_exact(info.line_size).take(h) {
        for px in row[..w * stride].chunks_exact(stride) {
            let rgb = if stride < 3 { [px[0]; 3] } else { [px[0], px[1], px[2]] };
            data.extend(rgb.iter().map(|&b| b as f32 / 255.0));
        }
    }
    Image::new(h, w, data)
}

/// Tiles every surface's radiance over black, weighted by occupancy, into one
/// image: `ceil(sqrt(N))` tiles per row, surface 0 top-left, one-pixel gaps.
pub fn contact_sheet(maps: &MapStack) -> Result<Image> {
    if maps.is_empty() || maps.height == 0 || maps.width == 0 {
        return Err(Error::InvalidArgument("contact sheet of empty maps".into()));
    }
    let n = maps.len();
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let (th, tw) = (maps.height + 1, maps.width + 1);
    let mut img = Image::zeros(rows * th - 1, cols * tw - 1);
    for i in 0..n {
        let (r0, c0) = ((i / cols) * th, (i % cols) * tw);
        for r in 0..maps.height {
            for c in 0..maps.width {
                let t = maps.texel(i, r, c);
                let a = t[3].clamp(0.0, 1.0);
                img.set_pixel(r0 + r, c0 + c, [t[0] * a, t[1] * a, t[2] * a]);
            }
        }
    }
    Ok(img)
}

//! Image file I/O: binary PGM (P5), 8-bit PNG, and raw f64 dumps.
//!
//! Quantization convention: byte `b` maps to `b / 255.0`; floats export as
//! `round(clamp(v, 0, 1) * 255)`. Because quantization is lossy, every 8-bit
//! export can be paired with a raw dump (`.f64`) holding the full doubles:
//! a 16-byte header (magic `SRF0`, then height/width/channels as u32 LE)
//! followed by the samples in little-endian f64.

use std::fs;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// `v/255` for each byte.
pub fn byte_to_unit(b: u8) -> f64 {
    b as f64 / 255.0
}

/// `round(clamp(v,0,1)*255)`.
pub fn unit_to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Reads a PGM or PNG image by file extension.
pub fn read_image(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let path = path.as_ref();
    match extension(path)? {
        "pgm" => read_pgm(path),
        "png" => read_png(path),
        ext => Err(Error::format(format!("unsupported image format `.{ext}`"))),
    }
}

/// Writes an image as PGM (single channel) or PNG (gray or RGB) by file
/// extension, quantizing to 8 bits.
pub fn write_image(img: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match extension(path)? {
        "pgm" => write_pgm(img, path),
        "png" => write_png(img, path),
        ext => Err(Error::format(format!("unsupported image format `.{ext}`"))),
    }
}

fn extension(path: &Path) -> Result<&str> {
    path.extension()
        .and_then(|e| e.to_str())
        .ok_or_else(|| Error::format(format!("no file extension on {}", path.display())))
}

/// Binary PGM, `P5`, maxval 255, single channel.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let bytes = fs::read(path.as_ref())?;
    let mut pos = 0usize;

    let magic = take_token(&bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(Error::format(format!(
            "not a binary PGM (magic {:?})",
            String::from_utf8_lossy(&magic)
        )));
    }
    let width: usize = parse_token(&bytes, &mut pos)?;
    let height: usize = parse_token(&bytes, &mut pos)?;
    let maxval: usize = parse_token(&bytes, &mut pos)?;
    if maxval != 255 {
        return Err(Error::format(format!("unsupported PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height;
    if bytes.len() < pos + need {
        return Err(Error::format(format!(
            "truncated PGM: need {need} raster bytes, found {}",
            bytes.len().saturating_sub(pos)
        )));
    }
    let data = bytes[pos..pos + need].iter().map(|&b| byte_to_unit(b)).collect();
    ImageGrid::from_vec(height, width, 1, data)
}

pub fn write_pgm(img: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    if img.channels() != 1 {
        return Err(Error::dimension("PGM supports a single channel"));
    }
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| unit_to_byte(v)));
    fs::write(path.as_ref(), out)?;
    Ok(())
}

// PGM header tokens are whitespace-separated, with `#` comments
fn take_token(bytes: &[u8], pos: &mut usize) -> Result<Vec<u8>> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format("truncated PGM header"));
    }
    Ok(bytes[start..*pos].to_vec())
}

fn parse_token(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    let tok = take_token(bytes, pos)?;
    std::str::from_utf8(&tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format("bad integer in PGM header"))
}

/// 8-bit grayscale or RGB PNG.
pub fn read_png(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let dynimg = image::open(path.as_ref())
        .map_err(|e| Error::format(format!("png decode: {e}")))?;
    match dynimg {
        image::DynamicImage::ImageLuma8(img) => {
            let (w, h) = img.dimensions();
            let data = img.pixels().map(|p| byte_to_unit(p.0[0])).collect();
            ImageGrid::from_vec(h as usize, w as usize, 1, data)
        }
        other => {
            let img = other.to_rgb8();
            let (w, h) = img.dimensions();
            let (h, w) = (h as usize, w as usize);
            let mut data = vec![0.0; h * w * 3];
            for (i, p) in img.pixels().enumerate() {
                for c in 0..3 {
                    data[c * h * w + i] = byte_to_unit(p.0[c]);
                }
            }
            ImageGrid::from_vec(h, w, 3, data)
        }
    }
}

pub fn write_png(img: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    let (h, w) = img.shape();
    match img.channels() {
        1 => {
            let buf: Vec<u8> = img.data().iter().map(|&v| unit_to_byte(v)).collect();
            image::GrayImage::from_raw(w as u32, h as u32, buf)
                .expect("buffer size")
                .save(path.as_ref())
                .map_err(|e| Error::format(format!("png encode: {e}")))
        }
        3 => {
            let mut buf = vec![0u8; h * w * 3];
            for i in 0..h * w {
                for c in 0..3 {
                    buf[i * 3 + c] = unit_to_byte(img.plane(c)[i]);
                }
            }
            image::RgbImage::from_raw(w as u32, h as u32, buf)
                .expect("buffer size")
                .save(path.as_ref())
                .map_err(|e| Error::format(format!("png encode: {e}")))
        }
        n => Err(Error::dimension(format!(
            "PNG export supports 1 or 3 channels, got {n}"
        ))),
    }
}

const F64_MAGIC: &[u8; 4] = b"SRF0";

/// Writes the raw float dump (16-byte header + little-endian f64 samples).
pub fn write_f64_dump(img: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::with_capacity(16 + img.data().len() * 8);
    out.extend_from_slice(F64_MAGIC);
    out.extend_from_slice(&(img.height() as u32).to_le_bytes());
    out.extend_from_slice(&(img.width() as u32).to_le_bytes());
    out.extend_from_slice(&(img.channels() as u32).to_le_bytes());
    for v in img.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path.as_ref(), out)?;
    Ok(())
}

/// Reads a raw float dump written by [`write_f64_dump`]; bit-exact.
pub fn read_f64_dump(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let mut file = fs::File::open(path.as_ref())?;
    let mut header = [0u8; 16];
    file.read_exact(&mut header)
        .map_err(|_| Error::format("truncated f64 dump header"))?;
    if &header[0..4] != F64_MAGIC {
        return Err(Error::format("bad f64 dump magic"));
    }
    let h = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let c = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let mut raw = Vec::new();
    file.read_to_end(&mut raw)?;
    if raw.len() != h * w * c * 8 {
        return Err(Error::format(format!(
            "truncated f64 dump: {} payload bytes for {h}x{w}x{c}",
            raw.len()
        )));
    }
    let data = raw
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    ImageGrid::from_vec(h, w, c, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::clamp_to_unit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quantized_random(h: usize, w: usize, seed: u64) -> ImageGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..h * w)
            .map(|_| byte_to_unit(rng.gen_range(0..=255u8)))
            .collect();
        ImageGrid::from_vec(h, w, 1, data).unwrap()
    }

    #[test]
    fn byte_scaling_convention() {
        assert_eq!(byte_to_unit(255), 1.0);
        assert_eq!(byte_to_unit(0), 0.0);
        assert!((byte_to_unit(128) - 128.0 / 255.0).abs() < 1e-15);
        assert_eq!(unit_to_byte(1.2), 255);
        assert_eq!(unit_to_byte(-0.5), 0);
    }

    #[test]
    fn pgm_round_trip_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        let img = quantized_random(16, 16, 1);
        write_pgm(&img, &path).unwrap();
        let back = read_pgm(&path).unwrap();
        assert_eq!(back, img);
        // and the file bytes themselves are reproducible
        write_pgm(&back, dir.path().join("y.pgm")).unwrap();
        assert_eq!(
            fs::read(&path).unwrap(),
            fs::read(dir.path().join("y.pgm")).unwrap()
        );
    }

    #[test]
    fn pgm_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        fs::write(&path, b"P6\n2 2\n255\nxxxx").unwrap();
        assert!(matches!(read_pgm(&path), Err(Error::Format(_))));
        fs::write(&path, b"P5\n4 4\n255\nxx").unwrap();
        assert!(matches!(read_pgm(&path), Err(Error::Format(_))));
        assert!(matches!(
            read_pgm(dir.path().join("missing.pgm")),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn png_gray_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let img = quantized_random(12, 9, 2);
        write_png(&img, &path).unwrap();
        assert_eq!(read_png(&path).unwrap(), img);
    }

    #[test]
    fn png_rgb_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgb.png");
        let planes: Vec<ImageGrid> = (0..3).map(|i| quantized_random(8, 8, i)).collect();
        let rgb = ImageGrid::from_channels(&planes).unwrap();
        write_png(&rgb, &path).unwrap();
        assert_eq!(read_png(&path).unwrap(), rgb);
    }

    #[test]
    fn f64_dump_round_trip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.f64");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..6 * 5 * 2).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let img = ImageGrid::from_vec(6, 5, 2, data).unwrap();
        write_f64_dump(&img, &path).unwrap();
        let back = read_f64_dump(&path).unwrap();
        assert_eq!(back.data().len(), img.data().len());
        for (a, b) in back.data().iter().zip(img.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn quantize_then_roundtrip_is_stable() {
        // quantized write/read/write reaches a fixed point immediately
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let raw = ImageGrid::from_vec(
            8,
            8,
            1,
            (0..64).map(|_| rng.gen_range(-0.2..1.2)).collect(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.pgm");
        write_pgm(&clamp_to_unit(&raw), &path).unwrap();
        let once = read_pgm(&path).unwrap();
        write_pgm(&once, &path).unwrap();
        assert_eq!(read_pgm(&path).unwrap(), once);
    }
}

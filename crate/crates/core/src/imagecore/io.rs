//! 8-bit image files: PNG, binary PPM (P6) and binary PGM (P5).
//!
//! Masks are written as 0/255 grayscale. Channel values are mapped with
//! `c / 255` on load and rounded on save, so 8-bit data survives a
//! save/load cycle unchanged.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use super::{quantize, BinaryMask, GrayMap, Grid, Rgb, RgbImage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FileKind {
    Png,
    Pnm,
}

fn kind_from_extension(path: &Path) -> Result<FileKind> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("png") => Ok(FileKind::Png),
        Some("ppm" | "pgm" | "pnm") => Ok(FileKind::Pnm),
        _ => Err(Error::UnsupportedFormat(format!(
            "{}: expected .png, .ppm or .pgm",
            path.display()
        ))),
    }
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let bytes = fs::read(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    let format = image::guess_format(&bytes).map_err(|_| {
        Error::UnsupportedFormat(format!("{}: unrecognized file signature", path.display()))
    })?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Pnm) {
        return Err(Error::UnsupportedFormat(format!(
            "{}: {format:?} is not PNG/PPM/PGM",
            path.display()
        )));
    }
    image::load_from_memory_with_format(&bytes, format)
        .map_err(|e| Error::UnsupportedFormat(format!("{}: {e}", path.display())))
}

/// Load an 8-bit RGB image (grayscale files are expanded to three channels).
pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let rgb = decode(path)?.into_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb.pixels().map(|p| Rgb::from_u8(p.0)).collect();
    Grid::from_vec(w as usize, h as usize, data)
}

/// Load a mask; any level >= 128 is foreground.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let gray = decode(path)?.into_luma8();
    let (w, h) = gray.dimensions();
    let data = gray.pixels().map(|p| p.0[0] >= 128).collect();
    Grid::from_vec(w as usize, h as usize, data)
}

fn write_file(
    path: &Path,
    kind: FileKind,
    bytes: &[u8],
    w: usize,
    h: usize,
    color: ExtendedColorType,
) -> Result<()> {
    let unwritable = |source| Error::Unwritable {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(unwritable)?;
    let mut out = BufWriter::new(file);
    let (w, h) = (w as u32, h as u32);
    let encoded = match kind {
        FileKind::Png => PngEncoder::new(&mut out).write_image(bytes, w, h, color),
        FileKind::Pnm => {
            let subtype = match color {
                ExtendedColorType::L8 => PnmSubtype::Graymap(SampleEncoding::Binary),
                _ => PnmSubtype::Pixmap(SampleEncoding::Binary),
            };
            PnmEncoder::new(&mut out)
                .with_subtype(subtype)
                .write_image(bytes, w, h, color)
        }
    };
    encoded.map_err(|e| match e {
        image::ImageError::IoError(source) => unwritable(source),
        other => Error::UnsupportedFormat(other.to_string()),
    })?;
    out.flush().map_err(unwritable)
}

/// Save as PNG or binary PPM depending on the extension.
pub fn save_image(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let kind = kind_from_extension(path)?;
    if kind == FileKind::Pnm && has_extension(path, "pgm") {
        return Err(Error::UnsupportedFormat(format!(
            "{}: color images are written as .ppm or .png",
            path.display()
        )));
    }
    let bytes: Vec<u8> = img.data().iter().flat_map(|p| p.to_u8()).collect();
    write_file(
        path,
        kind,
        &bytes,
        img.width(),
        img.height(),
        ExtendedColorType::Rgb8,
    )
}

/// Save a mask as 0/255 grayscale (binary PGM or PNG).
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let kind = kind_from_extension(path)?;
    let bytes: Vec<u8> = mask
        .data()
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect();
    write_file(
        path,
        kind,
        &bytes,
        mask.width(),
        mask.height(),
        ExtendedColorType::L8,
    )
}

/// Save a real-valued map affinely mapped from `[lo, hi]` onto `0..=255`.
pub fn save_gray(map: &GrayMap, lo: f64, hi: f64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let kind = kind_from_extension(path)?;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let bytes: Vec<u8> = map
        .data()
        .iter()
        .map(|&v| quantize((v - lo) / span))
        .collect();
    write_file(
        path,
        kind,
        &bytes,
        map.width(),
        map.height(),
        ExtendedColorType::L8,
    )
}

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RgbImage {
        Grid::from_vec(
            2,
            2,
            vec![
                Rgb::from_u8([0, 10, 20]),
                Rgb::from_u8([255, 128, 1]),
                Rgb::from_u8([7, 7, 7]),
                Rgb::from_u8([200, 100, 50]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn png_and_ppm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["a.png", "a.ppm"] {
            let path = dir.path().join(name);
            save_image(&sample(), &path).unwrap();
            let back = load_image(&path).unwrap();
            let a: Vec<_> = sample().data().iter().map(|p| p.to_u8()).collect();
            let b: Vec<_> = back.data().iter().map(|p| p.to_u8()).collect();
            assert_eq!(a, b, "{name}");
        }
    }

    #[test]
    fn empty_file_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.png");
        fs::write(&path, b"").unwrap();
        assert!(matches!(
            load_image(&path),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn missing_file_is_unreadable() {
        let err = load_image("/nonexistent/frame.png").unwrap_err();
        assert!(matches!(err, Error::Unreadable { .. }));
    }

    #[test]
    fn mask_pgm_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        save_mask(&BinaryMask::full(3, 3), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5"));
        assert_eq!(&bytes[bytes.len() - 9..], &[255u8; 9]);
        let header = &bytes[..bytes.len() - 9];
        let text = std::str::from_utf8(header).unwrap();
        let fields: Vec<&str> = text.split_whitespace().collect();
        assert_eq!(fields, ["P5", "3", "3", "255"]);
        assert_eq!(load_mask(&path).unwrap(), BinaryMask::full(3, 3));
    }

    #[test]
    fn unknown_extension_rejected() {
        let err = save_mask(&BinaryMask::full(1, 1), "/tmp/x.bmp").unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat(_)));
    }
}

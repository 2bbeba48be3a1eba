//! PNG/JPEG decoding into 8-bit RGB and PNG encoding.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use darkforge_core::{GrayPlane, RgbImage};
use image::{ExtendedColorType, ImageEncoder, ImageReader};
use walkdir::WalkDir;

use crate::error::{Error, Result};

const EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// An image file below a corpus root. `key` is the root-relative path with `/` separators.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CorpusEntry {
    pub key: String,
    pub path: PathBuf,
}

/// Image files under `root` by extension, sorted by key.
pub fn list_images(root: &Path) -> Result<Vec<CorpusEntry>> {
    let mut entries = Vec::new();
    for entry in WalkDir::new(root).follow_links(true) {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::Io { path, source: e.into() }
        })?;
        if !entry.file_type().is_file() || !has_image_extension(entry.path()) {
            continue;
        }
        let rel = entry.path().strip_prefix(root).expect("walkdir yields paths under root");
        let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        entries.push(CorpusEntry { key, path: entry.path().to_path_buf() });
    }
    entries.sort();
    Ok(entries)
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| EXTENSIONS.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

/// Decodes by content sniffing; alpha is dropped and gray is replicated to RGB.
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let decode = |source| Error::Decode { path: path.to_path_buf(), source };
    let img = ImageReader::open(path)
        .map_err(Error::io(path))?
        .with_guessed_format()
        .map_err(Error::io(path))?
        .decode()
        .map_err(decode)?
        .to_rgb8();
    let (w, h) = img.dimensions();
    Ok(RgbImage::new(w as usize, h as usize, img.into_raw())?)
}

pub fn encode_png_rgb(img: &RgbImage) -> Result<Vec<u8>> {
    encode(img.as_raw(), img.width(), img.height(), ExtendedColorType::Rgb8)
}

/// Binary plane as an 8-bit gray PNG, 0 → 0 and anything positive → 255.
pub fn encode_png_mask(mask: &GrayPlane) -> Result<Vec<u8>> {
    let data: Vec<u8> = mask.as_raw().iter().map(|&v| if v > 0.0 { 255 } else { 0 }).collect();
    encode(&data, mask.width(), mask.height(), ExtendedColorType::L8)
}

fn encode(data: &[u8], w: usize, h: usize, color: ExtendedColorType) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(data, w as u32, h as u32, color)
        .map_err(Error::Encode)?;
    Ok(out.into_inner())
}

pub fn save_png_rgb(path: &Path, img: &RgbImage) -> Result<Vec<u8>> {
    let bytes = encode_png_rgb(img)?;
    write_file(path, &bytes)?;
    Ok(bytes)
}

/// Writes `bytes`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    fs::write(path, bytes).map_err(Error::io(path))
}

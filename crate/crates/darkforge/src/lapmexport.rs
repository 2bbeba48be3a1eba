//! Writes a mask pyramid as PNGs, texture planes as raw tensors and a JSON sidecar.

use std::path::Path;

use darkforge_core::lapm::{lapm_pyramid, LapmConfig, LapmParams};
use darkforge_core::{GrayPlane, RgbImage};
use serde::Serialize;

use crate::error::Result;
use crate::imageio::{encode_png_mask, write_file};
use crate::manifest::{write_json, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRecord {
    pub level: u32,
    pub width: usize,
    pub height: usize,
    pub mask: String,
    pub texture: String,
    /// Share of mask pixels set to 1.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LapmSidecar {
    pub schema_version: u32,
    pub lambda: f64,
    pub tau_photon: f64,
    pub eps: f64,
    pub levels: u32,
    pub params: LapmParams,
    pub trainable_parameters: usize,
    pub base_mask: String,
    pub pyramid: Vec<LevelRecord>,
}

fn coverage(mask: &GrayPlane) -> f64 {
    let n = mask.as_raw().len();
    if n == 0 {
        return 0.0;
    }
    mask.as_raw().iter().filter(|&&v| v > 0.0).count() as f64 / n as f64
}

/// Files: `mask_0.png` (full resolution), `mask_<k>.png` and `texture_<k>.f64`
/// for k = 1..=levels, and `lapm.json`.
pub fn export_lapm(img: &RgbImage, out_dir: &Path, cfg: &LapmConfig, params: &LapmParams) -> Result<LapmSidecar> {
    let pyramid = lapm_pyramid(&img.to_float(), cfg, params)?;
    write_file(&out_dir.join("mask_0.png"), &encode_png_mask(&pyramid.base_mask)?)?;
    let mut records = Vec::with_capacity(pyramid.masks.len());
    for (k, (mask, texture)) in pyramid.masks.iter().zip(&pyramid.textures).enumerate() {
        let level = k as u32 + 1;
        let mask_name = format!("mask_{level}.png");
        let texture_name = format!("texture_{level}.f64");
        write_file(&out_dir.join(&mask_name), &encode_png_mask(mask)?)?;
        crate::tensorfile::write(&out_dir.join(&texture_name), &[texture.height(), texture.width()], texture.as_raw())?;
        records.push(LevelRecord {
            level,
            width: mask.width(),
            height: mask.height(),
            mask: mask_name,
            texture: texture_name,
            coverage: coverage(mask),
        });
    }
    let sidecar = LapmSidecar {
        schema_version: SCHEMA_VERSION,
        lambda: cfg.lambda,
        tau_photon: cfg.tau_photon,
        eps: cfg.eps,
        levels: cfg.levels,
        params: *params,
        trainable_parameters: LapmParams::TRAINABLE,
        base_mask: "mask_0.png".into(),
        pyramid: records,
    };
    write_json(&out_dir.join("lapm.json"), &sidecar)?;
    Ok(sidecar)
}

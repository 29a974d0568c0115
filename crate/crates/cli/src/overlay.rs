//! RGB overlays of scribbles on their dense segmentation.
//!
//! Background is gray, each dense class is a translucent tint of its palette
//! colour and scribbled pixels are painted in the full palette colour.
//! Ignored pixels show the dense rendering unchanged.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use scribble_core::{read_nifti, LabelSlice};

use crate::InvalidInput;

pub type Rgb = [u8; 3];

/// Colour of class `c` is `PALETTE[c % 12]`; class 0 scribbles are white.
pub const PALETTE: [Rgb; 12] = [
    [255, 255, 255],
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
];

pub const BACKGROUND: Rgb = [128, 128, 128];

/// Opacity of a dense class tint over the gray background.
pub const FILL_ALPHA: f64 = 0.4;

pub fn class_color(class: u32) -> Rgb {
    PALETTE[class as usize % PALETTE.len()]
}

/// Colour of a dense label in the base rendering.
pub fn fill_color(class: u32) -> Rgb {
    if class == 0 {
        return BACKGROUND;
    }
    let c = class_color(class);
    std::array::from_fn(|i| (f64::from(BACKGROUND[i]) * (1.0 - FILL_ALPHA) + f64::from(c[i]) * FILL_ALPHA).round() as u8)
}

/// Row-major RGB pixels, `scale` output pixels per slice pixel each way.
pub fn render(dense: &LabelSlice, dense_ignore: u32, scribbles: Option<(&LabelSlice, u32)>, scale: usize) -> Vec<u8> {
    let [w, h] = dense.extents;
    let mut out = Vec::with_capacity(w * h * scale * scale * 3);
    for j in 0..h {
        let row: Vec<u8> = (0..w)
            .flat_map(|i| {
                let d = dense.get(i, j);
                let mut color = if d == dense_ignore { BACKGROUND } else { fill_color(d) };
                if let Some((s, ignore)) = scribbles {
                    let l = s.get(i, j);
                    if l != ignore {
                        color = class_color(l);
                    }
                }
                std::iter::repeat_n(color, scale).flatten()
            })
            .collect();
        for _ in 0..scale {
            out.extend_from_slice(&row);
        }
    }
    out
}

pub fn write_png(path: &Path, width: usize, height: usize, rgb: &[u8]) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    writer.write_image_data(rgb)?;
    writer.finish()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct OverlayOptions {
    pub dense: PathBuf,
    pub scribbles: Option<PathBuf>,
    pub slice: usize,
    pub axis: usize,
    pub scale: usize,
    pub out: PathBuf,
}

pub fn run_overlay(opts: &OverlayOptions) -> anyhow::Result<()> {
    if opts.scale == 0 {
        bail!(InvalidInput("scale must be at least 1".into()));
    }
    let dense = read_nifti(&opts.dense).map_err(|e| InvalidInput(e.to_string()))?;
    let dense_slice = dense.slice(opts.axis, opts.slice).map_err(|e| InvalidInput(e.to_string()))?;
    let scribble_slice = match &opts.scribbles {
        Some(path) => {
            let s = read_nifti(path).map_err(|e| InvalidInput(e.to_string()))?;
            s.check_same_grid(&dense).map_err(|e| InvalidInput(format!("grid mismatch: {e}")))?;
            Some((s.slice(opts.axis, opts.slice)?, s.ignore_label()))
        }
        None => None,
    };
    let rgb = render(
        &dense_slice,
        dense.ignore_label(),
        scribble_slice.as_ref().map(|(s, i)| (s, *i)),
        opts.scale,
    );
    let [w, h] = dense_slice.extents;
    write_png(&opts.out, w * opts.scale, h * opts.scale, &rgb)
}

//! Intermediate representations: label images built from crossing
//! annotations, and crossing-likelihood maps built from fabric images.
//!
//! The likelihood map is the seam between image analysis and post-processing.
//! It is either produced classically here or read from an 8-bit PNG written
//! by an externally trained network with the same width and height as the
//! pre-processed input.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Stage, StageExt};
use crate::io;
use crate::pattern::{CrossPoint, RepColors};
use crate::pre::{self, AxisParams, WarpShade};
use crate::raster::{Raster, Tri, TriImage};
use crate::scalar::Scalar;

/// Shape used to stamp crossings into a label image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MidRepKind {
    Impulse,
    Gaussian { sigma: f64 },
    Box { window: usize },
}

impl Default for MidRepKind {
    fn default() -> Self {
        MidRepKind::Box { window: 9 }
    }
}

impl MidRepKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MidRepKind::Impulse => Ok(()),
            MidRepKind::Gaussian { sigma } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            MidRepKind::Gaussian { sigma } => Err(Error::InvalidParameter(format!("gaussian sigma must be > 0, got {sigma}"))),
            MidRepKind::Box { window } if window % 2 == 1 => Ok(()),
            MidRepKind::Box { window } => Err(Error::InvalidParameter(format!("box window must be odd, got {window}"))),
        }
    }

    /// Label image of `crossings` on a `width x height` canvas.
    pub fn build<T: Scalar>(&self, crossings: &[CrossPoint], width: usize, height: usize) -> Result<Raster<T>> {
        self.validate()?;
        match *self {
            MidRepKind::Impulse => Ok(build_impulse(crossings, width, height)?.to_gray()),
            MidRepKind::Box { window } => Ok(build_box(crossings, width, height, window)?.to_gray()),
            MidRepKind::Gaussian { sigma } => build_gaussian(crossings, width, height, sigma),
        }
    }
}

fn pixel_of(p: &CrossPoint, width: usize, height: usize) -> Result<(usize, usize)> {
    let (x, y) = p.pixel();
    if x < 0 || y < 0 || x >= width as i64 || y >= height as i64 || p.v > 1 {
        return Err(Error::InvalidInput(format!(
            "crossing ({}, {}, {}) is not a valid crossing on a {width}x{height} image",
            p.x, p.y, p.v
        )));
    }
    Ok((x as usize, y as usize))
}

/// Impulse image: the crossing value at each crossing pixel, 0.5 elsewhere.
pub fn build_impulse(crossings: &[CrossPoint], width: usize, height: usize) -> Result<TriImage> {
    let mut out = TriImage::filled(width, height, Tri::Half)?;
    for p in crossings {
        let (x, y) = pixel_of(p, width, height)?;
        if out.get(x, y) != Tri::Half {
            return Err(Error::Collision { x, y });
        }
        out.set(x, y, Tri::from_bit(p.v));
    }
    Ok(out)
}

/// Box image: 1 where a weft-on-top crossing lies in the `window x window`
/// neighbourhood, else 0 where a warp-on-top crossing does, else 0.5.
pub fn build_box(crossings: &[CrossPoint], width: usize, height: usize, window: usize) -> Result<TriImage> {
    MidRepKind::Box { window }.validate()?;
    let half = (window / 2) as i64;
    let mut out = TriImage::filled(width, height, Tri::Half)?;
    let pixels = crossings
        .iter()
        .map(|p| pixel_of(p, width, height).map(|px| (px, p.v)))
        .collect::<Result<Vec<_>>>()?;
    // Zeros first so that ones win wherever windows overlap.
    for bit in [0u8, 1] {
        for &((cx, cy), _) in pixels.iter().filter(|(_, v)| *v == bit) {
            let (cx, cy) = (cx as i64, cy as i64);
            let x0 = (cx - half).max(0) as usize;
            let x1 = (cx + half).min(width as i64 - 1) as usize;
            let y0 = (cy - half).max(0) as usize;
            let y1 = (cy + half).min(height as i64 - 1) as usize;
            for y in y0..=y1 {
                for x in x0..=x1 {
                    out.set(x, y, Tri::from_bit(bit));
                }
            }
        }
    }
    Ok(out)
}

/// Number of crossing pairs whose boxes of size `window` would touch or overlap.
pub fn box_conflicts(crossings: &[CrossPoint], window: usize) -> usize {
    let reach = window as i64;
    let pixels: Vec<(i64, i64)> = crossings.iter().map(CrossPoint::pixel).collect();
    let mut count = 0;
    for (i, a) in pixels.iter().enumerate() {
        for b in &pixels[i + 1..] {
            if (a.0 - b.0).abs() <= reach && (a.1 - b.1).abs() <= reach {
                count += 1;
            }
        }
    }
    count
}

/// Gaussian image: signed bumps of amplitude 0.5 around a 0.5 background.
///
/// Each crossing peaks at exactly its value on its own pixel. Where bumps
/// overlap, the value farther from 0.5 wins.
pub fn build_gaussian<T: Scalar>(crossings: &[CrossPoint], width: usize, height: usize, sigma: f64) -> Result<Raster<T>> {
    MidRepKind::Gaussian { sigma }.validate()?;
    let reach = (4.0 * sigma).ceil() as i64;
    let mut out = Raster::filled(width, height, T::half())?;
    for p in crossings {
        let (cx, cy) = pixel_of(p, width, height)?;
        let sign = if p.v == 1 { 1.0 } else { -1.0 };
        let (cx, cy) = (cx as i64, cy as i64);
        for y in (cy - reach).max(0)..=(cy + reach).min(height as i64 - 1) {
            for x in (cx - reach).max(0)..=(cx + reach).min(width as i64 - 1) {
                let r2 = ((x - cx).pow(2) + (y - cy).pow(2)) as f64;
                let v = T::of(0.5 + sign * 0.5 * (-r2 / (2.0 * sigma * sigma)).exp());
                let current = out.get(x as usize, y as usize);
                if (v - T::half()).abs() > (current - T::half()).abs() {
                    out.set(x as usize, y as usize, v);
                }
            }
        }
    }
    Ok(out)
}

/// Settings for the classical likelihood backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalParams {
    pub open_radius: f64,
    pub axes: AxisParams,
    pub warp_shade: WarpShade,
    pub window: usize,
}

impl Default for ClassicalParams {
    fn default() -> Self {
        Self {
            open_radius: pre::DEFAULT_OPEN_RADIUS,
            axes: AxisParams::default(),
            warp_shade: WarpShade::Dark,
            window: 9,
        }
    }
}

/// Likelihood map computed without a network: pre-process, find yarn axes
/// and colors, classify each grid point and stamp the box representation.
pub fn classical_likelihood<T: Scalar>(img: &Raster<T>, params: &ClassicalParams) -> Result<Raster<T>> {
    let pre = pre::preprocess(img, params.open_radius).stage(Stage::Preprocess)?;
    let colors = pre::estimate_rep_colors(&pre, params.warp_shade).stage(Stage::Colors)?;
    classical_from_preprocessed(&pre, &colors, params)
}

/// [`classical_likelihood`] for an image that is already pre-processed.
pub fn classical_from_preprocessed<T: Scalar>(pre: &Raster<T>, colors: &RepColors, params: &ClassicalParams) -> Result<Raster<T>> {
    let grid = pre::estimate_yarn_axes(pre, &params.axes).stage(Stage::Axes)?;
    let crossings = pre::initial_crossings(pre, &grid, colors);
    Ok(build_box(&crossings, pre.width(), pre.height(), params.window)
        .stage(Stage::Likelihood)?
        .to_gray())
}

/// Reads an externally produced likelihood map and checks its size.
pub fn load_likelihood<T: Scalar>(path: &Path, expected_width: usize, expected_height: usize) -> Result<Raster<T>> {
    let map: Raster<T> = io::load_gray_png_strict(path)?;
    if map.width() != expected_width || map.height() != expected_height {
        return Err(Error::ContractViolation(format!(
            "likelihood map {} is {}x{}, expected {}x{}",
            path.display(),
            map.width(),
            map.height(),
            expected_width,
            expected_height
        )));
    }
    Ok(map)
}

pub fn save_likelihood<T: Scalar>(map: &Raster<T>, path: &Path) -> Result<()> {
    io::save_gray_png(map, path)
}

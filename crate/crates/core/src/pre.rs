//! Pre-processing of fabric images: fiber-noise removal, yarn-axis
//! estimation, representative colors and the initial crossing states.

use serde::{Deserialize, Serialize};

use crate::error::{Axis, Error, Result};
use crate::imgproc::{log_response, morph_open};
use crate::pattern::{CrossPoint, CrossPointSet, RepColors, YarnGrid};
use crate::profile::{column_profile, dominant_minima, row_profile, smooth};
use crate::raster::Raster;
use crate::scalar::Scalar;

/// Opening radius that removes loose fibers without eroding whole yarns.
pub const DEFAULT_OPEN_RADIUS: f64 = 5.5;

/// Removes thin bright fibers with a grayscale opening.
pub fn preprocess<T: Scalar>(img: &Raster<T>, radius: f64) -> Result<Raster<T>> {
    img.validate_unit_range()?;
    morph_open(img, radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisParams {
    /// Gaussian scale of the LoG edge detector, in pixels.
    pub sigma: f64,
    /// Half-width of the moving average applied to the projection profiles.
    pub smooth_halfwidth: usize,
}

impl Default for AxisParams {
    /// Tuned for yarns about 20 px apart. Edges must stay resolvable at this
    /// scale, so `sigma` has to be well below half the yarn spacing.
    fn default() -> Self {
        Self {
            sigma: 1.5,
            smooth_halfwidth: 5,
        }
    }
}

/// Edge power: magnitude of the LoG response, scaled so its maximum is 1.
pub fn edge_power<T: Scalar>(img: &Raster<T>, sigma: f64) -> Result<Raster<T>> {
    let raw = log_response(img, sigma)?;
    let peak = raw.data().iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let scale = T::one().max(img.data().iter().fold(T::zero(), |m, v| m.max(v.abs())));
    if !(peak > T::epsilon().sqrt() * scale) {
        return Ok(raw.map(|_| T::zero()));
    }
    Ok(raw.map(|v| v.abs() / peak))
}

/// Yarn positions at the local minima of smoothed row and column profiles.
///
/// Rows give weft positions, columns give warp positions. Minima within
/// `smooth_halfwidth` of the image border are discarded, as are minima with
/// a deeper one closer than `smooth_halfwidth`.
pub fn axes_from_profile_image<T: Scalar>(energy: &Raster<T>, smooth_halfwidth: usize) -> Result<YarnGrid> {
    let find = |profile: Vec<T>, axis: Axis| -> Result<Vec<f64>> {
        let minima = dominant_minima(&smooth(&profile, smooth_halfwidth), smooth_halfwidth, smooth_halfwidth);
        if minima.is_empty() {
            return Err(Error::AxisEstimation {
                axis,
                reason: "profile has no interior local minimum".into(),
            });
        }
        Ok(minima)
    };
    let weft_y = find(row_profile(energy), Axis::Weft)?;
    let warp_x = find(column_profile(energy), Axis::Warp)?;
    Ok(YarnGrid { warp_x, weft_y })
}

/// Estimates warp and weft centre lines where the LoG edge power is lowest.
pub fn estimate_yarn_axes<T: Scalar>(img: &Raster<T>, params: &AxisParams) -> Result<YarnGrid> {
    let energy = edge_power(img, params.sigma)?;
    axes_from_profile_image(&energy, params.smooth_halfwidth)
}

/// Which intensity cluster belongs to the warp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarpShade {
    #[default]
    Dark,
    Light,
}

/// Two-cluster Otsu split of the intensities; reports the cluster means.
pub fn estimate_rep_colors<T: Scalar>(img: &Raster<T>, warp_shade: WarpShade) -> Result<RepColors> {
    let mut values: Vec<f64> = img.data().iter().map(|v| v.to_f64_lossy()).collect();
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if values[0] == values[n - 1] || values.iter().any(|v| v.is_nan()) {
        return Err(Error::DegenerateColors);
    }

    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0f64);
    for v in &values {
        prefix.push(prefix.last().unwrap() + v);
    }
    let total = prefix[n];

    // Candidate splits sit between distinct neighbouring values; the lower
    // class takes values[..k]. Maximize between-class variance.
    let mut best: Option<(f64, usize)> = None;
    for k in 1..n {
        if values[k - 1] == values[k] {
            continue;
        }
        let (n0, n1) = (k as f64, (n - k) as f64);
        let m0 = prefix[k] / n0;
        let m1 = (total - prefix[k]) / n1;
        let score = n0 * n1 * (m1 - m0) * (m1 - m0);
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, k));
        }
    }
    let (_, k) = best.ok_or(Error::DegenerateColors)?;
    let dark = mean_of(&values[..k]);
    let light = mean_of(&values[k..]);
    match warp_shade {
        WarpShade::Dark => RepColors::new(dark, light),
        WarpShade::Light => RepColors::new(light, dark),
    }
}

fn mean_of(values: &[f64]) -> f64 {
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return first;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// One crossing per grid point, valued by which color its 3x3 mean is closer to.
///
/// A mean exactly halfway between the two colors is classified as 0.
pub fn initial_crossings<T: Scalar>(img: &Raster<T>, grid: &YarnGrid, colors: &RepColors) -> CrossPointSet {
    grid.points()
        .map(|(_, _, x, y)| {
            let mean = img.mean3x3(x.round() as isize, y.round() as isize).to_f64_lossy();
            CrossPoint::new(x, y, colors.classify(mean))
        })
        .collect()
}

//! Post-processing of a likelihood map into a weave pattern, and the
//! end-to-end [`decode`] pipeline.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Stage, StageExt};
use crate::imgproc::{ccl, distance_transform, neighbours4};
use crate::midrep::{self, ClassicalParams};
use crate::pattern::{BinaryPattern, CrossPoint, CrossPointSet, RepColors, YarnGrid};
use crate::pre::{self, axes_from_profile_image};
use crate::raster::{BinaryMask, Raster, Tri, TriImage};
use crate::scalar::Scalar;

/// Maps a likelihood map to {0, 0.5, 1}: below `low` is 0, above `high` is 1.
///
/// Values equal to either threshold become 0.5.
pub fn trivalue<T: Scalar>(map: &Raster<T>, low: T, high: T) -> TriImage {
    map.map(|v| {
        if v < low {
            Tri::Zero
        } else if v > high {
            Tri::One
        } else {
            Tri::Half
        }
    })
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut a: u32) -> u32 {
        while self.parent[a as usize] != a {
            let grand = self.parent[self.parent[a as usize] as usize];
            self.parent[a as usize] = grand;
            a = grand;
        }
        a
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        // Smaller label becomes the root so results do not depend on visit order.
        match ra.cmp(&rb) {
            std::cmp::Ordering::Less => self.parent[rb as usize] = ra,
            std::cmp::Ordering::Greater => self.parent[ra as usize] = rb,
            std::cmp::Ordering::Equal => {}
        }
    }
}

/// Merges touching 0- and 1-regions, repainting each merged cluster with
/// its majority value. Equal counts repaint to 1.
///
/// Regions are value-uniform 4-connected components. Two regions join a
/// cluster when some pixel of one is 4-adjacent to a pixel of the other with
/// the opposite value; clusters are closed under this relation. Background
/// pixels are never changed.
pub fn merge_regions(tri: &TriImage) -> TriImage {
    let regions = ccl(tri);
    let labels = &regions.labels;
    let (w, h) = (tri.width(), tri.height());
    let mut clusters = DisjointSet::new(regions.count as usize + 1);
    let mut mixed = false;
    for y in 0..h {
        for x in 0..w {
            let v = tri.get(x, y);
            if v.is_background() {
                continue;
            }
            for (nx, ny) in neighbours4(x, y, w, h).filter(|&(nx, ny)| nx > x || ny > y) {
                let n = tri.get(nx, ny);
                if !n.is_background() && n != v {
                    clusters.union(labels.get(x, y), labels.get(nx, ny));
                    mixed = true;
                }
            }
        }
    }
    if !mixed {
        return tri.clone();
    }

    let mut counts = vec![[0usize; 2]; regions.count as usize + 1];
    for (v, &label) in tri.data().iter().zip(labels.data()) {
        if let Some(bit) = v.bit() {
            let root = clusters.find(label);
            counts[root as usize][bit as usize] += 1;
        }
    }
    let mut out = tri.clone();
    for (v, &label) in out.data_mut().iter_mut().zip(labels.data()) {
        if !v.is_background() {
            let [zeros, ones] = counts[clusters.find(label) as usize];
            *v = if zeros > ones { Tri::Zero } else { Tri::One };
        }
    }
    out
}

/// A region's representative point, with the region's size and label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub point: CrossPoint,
    pub area: usize,
    pub label: u32,
}

/// One candidate per non-background region, at the mean of its pixel
/// coordinates. The centroid of a non-convex region may lie outside it.
pub fn extract_representatives(tri: &TriImage) -> Vec<Candidate> {
    let regions = ccl(tri);
    let n = regions.count as usize;
    let mut sums = vec![(0u64, 0u64, 0usize, 0u8); n + 1];
    for y in 0..tri.height() {
        for x in 0..tri.width() {
            let label = regions.labels.get(x, y) as usize;
            if label != 0 {
                let entry = &mut sums[label];
                entry.0 += x as u64;
                entry.1 += y as u64;
                entry.2 += 1;
                entry.3 = tri.get(x, y).bit().expect("labelled pixels are crossings");
            }
        }
    }
    sums.iter()
        .enumerate()
        .skip(1)
        .map(|(label, &(sx, sy, area, v))| Candidate {
            point: CrossPoint::new(sx as f64 / area as f64, sy as f64 / area as f64, v),
            area,
            label: label as u32,
        })
        .collect()
}

/// Yarn axes from the distance transform of the rasterized crossings.
///
/// Columns and rows that pass through many crossings have low summed
/// distance; their smoothed profile minima become warp and weft positions.
pub fn reestimate_axes(crossings: &[CrossPoint], width: usize, height: usize, smooth_halfwidth: usize) -> Result<YarnGrid> {
    if crossings.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 crossings to re-estimate axes, got {}",
            crossings.len()
        )));
    }
    let mut mask = BinaryMask::filled(width, height, false)?;
    for p in crossings {
        let (x, y) = p.pixel();
        if x < 0 || y < 0 || x >= width as i64 || y >= height as i64 {
            return Err(Error::InvalidInput(format!("crossing ({}, {}) lies outside the image", p.x, p.y)));
        }
        mask.set(x as usize, y as usize, true);
    }
    let dt: Raster<f64> = distance_transform(&mask)?;
    axes_from_profile_image(&dt, smooth_halfwidth)
}

/// Reads the pattern off the grid.
///
/// Each grid point takes the value of the nearest candidate within `s`
/// pixels; equal distances prefer the larger region, then the lower label.
/// Grid points with no candidate in range fall back to the color of the 3x3
/// neighbourhood of the grid pixel in `img`.
pub fn assign_grid<T: Scalar>(
    candidates: &[Candidate],
    grid: &YarnGrid,
    img: &Raster<T>,
    colors: &RepColors,
    s: f64,
) -> Result<BinaryPattern> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("grid has no warp or no weft".into()));
    }
    let mut pattern = BinaryPattern::zeros(grid.weft_y.len(), grid.warp_x.len())?;
    for (i, j, x, y) in grid.points() {
        let best = candidates
            .iter()
            .map(|c| (c.point.distance(x, y), c))
            .filter(|(d, _)| *d <= s)
            .min_by(|(da, a), (db, b)| {
                da.total_cmp(db)
                    .then(b.area.cmp(&a.area))
                    .then(a.label.cmp(&b.label))
            });
        let v = match best {
            Some((_, c)) => c.point.v,
            None => colors.classify(img.mean3x3(x.round() as isize, y.round() as isize).to_f64_lossy()),
        };
        pattern.set(i, j, v);
    }
    Ok(pattern)
}

/// Where the likelihood map comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Classical,
    /// 8-bit gray PNG of the same size as the input image.
    External(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    /// Grid-assignment radius in pixels.
    pub s: f64,
    pub low_threshold: f64,
    pub high_threshold: f64,
    pub smooth_halfwidth: usize,
    /// Candidates closer than this to the image edge are dropped.
    pub border_margin: f64,
    pub classical: ClassicalParams,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            s: 10.0,
            low_threshold: 0.25,
            high_threshold: 0.75,
            smooth_halfwidth: 5,
            border_margin: 5.0,
            classical: ClassicalParams::default(),
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.s > 0.0 && self.s.is_finite()) {
            return bad(format!("s must be positive, got {}", self.s));
        }
        if !(0.0 < self.low_threshold && self.low_threshold < self.high_threshold && self.high_threshold < 1.0) {
            return bad(format!(
                "thresholds must satisfy 0 < low < high < 1, got ({}, {})",
                self.low_threshold, self.high_threshold
            ));
        }
        if !(self.border_margin >= 0.0 && self.border_margin.is_finite()) {
            return bad(format!("border_margin must be non-negative, got {}", self.border_margin));
        }
        if !(self.classical.axes.sigma > 0.0) {
            return bad(format!("LoG sigma must be positive, got {}", self.classical.axes.sigma));
        }
        if !(self.classical.open_radius >= 0.0) {
            return bad(format!("opening radius must be non-negative, got {}", self.classical.open_radius));
        }
        midrep::MidRepKind::Box { window: self.classical.window }.validate()
    }
}

/// Intermediate images kept for debugging.
#[derive(Debug, Clone)]
pub struct Stages<T> {
    pub likelihood: Raster<T>,
    pub tri: TriImage,
    pub merged: TriImage,
}

#[derive(Debug, Clone)]
pub struct DecodeOutput<T> {
    pub pattern: BinaryPattern,
    pub crossings: CrossPointSet,
    pub grid: YarnGrid,
    pub colors: RepColors,
    pub stages: Stages<T>,
}

fn near_border(p: &CrossPoint, width: usize, height: usize, margin: f64) -> bool {
    let edge = p.x.min(p.y).min((width - 1) as f64 - p.x).min((height - 1) as f64 - p.y);
    edge < margin
}

/// Decodes a fabric image into its weave pattern.
///
/// Errors carry the stage that raised them.
pub fn decode<T: Scalar>(img: &Raster<T>, backend: &Backend, cfg: &DecodeConfig) -> Result<DecodeOutput<T>> {
    cfg.validate()?;
    let pre = pre::preprocess(img, cfg.classical.open_radius).stage(Stage::Preprocess)?;
    let colors = pre::estimate_rep_colors(&pre, cfg.classical.warp_shade).stage(Stage::Colors)?;
    let likelihood = match backend {
        Backend::Classical => midrep::classical_from_preprocessed(&pre, &colors, &cfg.classical)?,
        Backend::External(path) => midrep::load_likelihood(path, img.width(), img.height()).stage(Stage::Likelihood)?,
    };

    let tri = trivalue(&likelihood, T::of(cfg.low_threshold), T::of(cfg.high_threshold));
    let merged = merge_regions(&tri);
    let candidates: Vec<Candidate> = extract_representatives(&merged)
        .into_iter()
        .filter(|c| !near_border(&c.point, img.width(), img.height(), cfg.border_margin))
        .collect();
    let crossings: CrossPointSet = candidates.iter().map(|c| c.point).collect();
    let grid = reestimate_axes(&crossings, img.width(), img.height(), cfg.smooth_halfwidth).stage(Stage::Reestimate)?;
    let pattern = assign_grid(&candidates, &grid, &pre, &colors, cfg.s).stage(Stage::Assign)?;
    Ok(DecodeOutput {
        pattern,
        crossings,
        grid,
        colors,
        stages: Stages { likelihood, tri, merged },
    })
}

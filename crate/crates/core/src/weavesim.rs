//! Synthetic fabric renderer: draws a weave pattern as an image together with
//! exact ground-truth crossings, and writes augmented datasets.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, Annotation};
use crate::pattern::{BinaryPattern, CrossPoint, CrossPointSet, RepColors, YarnGrid};
use crate::raster::Raster;
use crate::scalar::Scalar;

/// Border pixels of a yarn band are drawn at this fraction of the yarn color.
const BORDER_SHADE: f64 = 0.7;
const FIBER_VALUE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderParams {
    pub width: usize,
    pub height: usize,
    pub warp_spacing: f64,
    pub weft_spacing: f64,
    /// Band width as a fraction of the yarn spacing.
    pub yarn_width_ratio: f64,
    /// Peak displacement of a yarn from its nominal axis, in pixels.
    pub jitter_amp: f64,
    /// Wavelength of the sinusoidal yarn displacement, in pixels.
    pub jitter_wavelength: f64,
    pub warp_color: f64,
    pub weft_color: f64,
    /// Color of the gaps between yarns.
    pub background: f64,
    /// Target fraction of pixels covered by bright fiber streaks.
    pub fiber_noise_density: f64,
    pub seed: u64,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self {
            width: 512,
            height: 320,
            warp_spacing: 20.0,
            weft_spacing: 20.0,
            yarn_width_ratio: 0.9,
            jitter_amp: 0.0,
            jitter_wavelength: 160.0,
            warp_color: 0.15,
            weft_color: 0.85,
            background: 0.05,
            fiber_noise_density: 0.0,
            seed: 0,
        }
    }
}

impl RenderParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.width == 0 || self.height == 0 {
            return bad("canvas dimensions must be positive".into());
        }
        for (name, s) in [("warp_spacing", self.warp_spacing), ("weft_spacing", self.weft_spacing)] {
            if !(s >= 6.0) || !s.is_finite() {
                return bad(format!("{name} must be >= 6 px, got {s}"));
            }
        }
        if !(self.yarn_width_ratio > 0.0 && self.yarn_width_ratio <= 1.0) {
            return bad(format!("yarn_width_ratio must be in (0, 1], got {}", self.yarn_width_ratio));
        }
        let min_spacing = self.warp_spacing.min(self.weft_spacing);
        if !(self.jitter_amp >= 0.0 && self.jitter_amp < min_spacing / 4.0) {
            return bad(format!(
                "jitter_amp must be in [0, spacing/4) = [0, {}), got {}",
                min_spacing / 4.0,
                self.jitter_amp
            ));
        }
        if !(self.jitter_wavelength > 0.0) || !self.jitter_wavelength.is_finite() {
            return bad("jitter_wavelength must be positive".into());
        }
        for (name, c) in [
            ("warp_color", self.warp_color),
            ("weft_color", self.weft_color),
            ("background", self.background),
        ] {
            if !(0.0..=1.0).contains(&c) {
                return bad(format!("{name} must be in [0, 1], got {c}"));
            }
        }
        if self.warp_color == self.weft_color {
            return bad("warp_color and weft_color must differ".into());
        }
        if !(0.0..=1.0).contains(&self.fiber_noise_density) {
            return bad(format!("fiber_noise_density must be in [0, 1], got {}", self.fiber_noise_density));
        }
        Ok(())
    }

    /// Largest pattern (rows, cols) that fits the canvas.
    pub fn capacity(&self) -> (usize, usize) {
        (
            (self.height as f64 / self.weft_spacing).floor() as usize,
            (self.width as f64 / self.warp_spacing).floor() as usize,
        )
    }

    pub fn colors(&self) -> RepColors {
        RepColors {
            warp: self.warp_color,
            weft: self.weft_color,
        }
    }
}

/// Exact annotation of a rendered fabric.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Row-major: crossing of weft `i` and warp `j` is at index `i * cols + j`.
    pub crossings: CrossPointSet,
    /// Nominal (undisplaced) yarn axes.
    pub grid: YarnGrid,
    pub pattern: BinaryPattern,
    pub colors: RepColors,
    pub width: usize,
    pub height: usize,
}

impl GroundTruth {
    pub fn annotation(&self, image: impl Into<String>) -> Annotation {
        Annotation::new(image, &self.grid, &self.crossings, self.colors)
    }

    pub fn mirror_horizontal(&self) -> Self {
        let w1 = (self.width - 1) as f64;
        let cols = self.pattern.cols();
        Self {
            crossings: self.reordered(|i, j| (i, cols - 1 - j), |p| CrossPoint::new(w1 - p.x, p.y, p.v)),
            grid: self.grid.mirror_horizontal(self.width),
            pattern: self.pattern.reverse_cols(),
            ..self.clone()
        }
    }

    pub fn mirror_vertical(&self) -> Self {
        let h1 = (self.height - 1) as f64;
        let rows = self.pattern.rows();
        Self {
            crossings: self.reordered(|i, j| (rows - 1 - i, j), |p| CrossPoint::new(p.x, h1 - p.y, p.v)),
            grid: self.grid.mirror_vertical(self.height),
            pattern: self.pattern.reverse_rows(),
            ..self.clone()
        }
    }

    pub fn rotate_180(&self) -> Self {
        self.mirror_horizontal().mirror_vertical()
    }

    /// Rebuilds the row-major crossing list after a flip that maps cell
    /// `(i, j)` of the result back to cell `source(i, j)` of `self`.
    fn reordered(&self, source: impl Fn(usize, usize) -> (usize, usize), map: impl Fn(&CrossPoint) -> CrossPoint) -> CrossPointSet {
        let (rows, cols) = (self.pattern.rows(), self.pattern.cols());
        (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| {
                let (si, sj) = source(i, j);
                map(&self.crossings[si * cols + sj])
            })
            .collect()
    }
}

/// I.i.d. Bernoulli(`density`) pattern, reproducible per seed.
pub fn random_pattern(rows: usize, cols: usize, density: f64, seed: u64) -> Result<BinaryPattern> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidParameter(format!("density must be in [0, 1], got {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BinaryPattern::from_fn(rows, cols, |_, _| u8::from(rng.gen_bool(density)))
}

struct Layout {
    warp_center: Vec<f64>,
    weft_center: Vec<f64>,
    warp_phase: Vec<f64>,
    weft_phase: Vec<f64>,
    amp: f64,
    k: f64,
}

impl Layout {
    fn warp_x(&self, j: usize, y: f64) -> f64 {
        self.warp_center[j] + self.amp * (self.k * y + self.warp_phase[j]).sin()
    }

    fn weft_y(&self, i: usize, x: f64) -> f64 {
        self.weft_center[i] + self.amp * (self.k * x + self.weft_phase[i]).sin()
    }

    /// Intersection of displaced warp `j` and weft `i` by fixed-point iteration.
    fn crossing(&self, i: usize, j: usize) -> (f64, f64) {
        let (mut x, mut y) = (self.warp_center[j], self.weft_center[i]);
        if self.amp == 0.0 {
            return (x, y);
        }
        // Contraction factor is amp * k < 2π/4 * spacing / wavelength, well below 1.
        for _ in 0..100 {
            let nx = self.warp_x(j, y);
            let ny = self.weft_y(i, nx);
            let done = (nx - x).abs() < 1e-13 && (ny - y).abs() < 1e-13;
            x = nx;
            y = ny;
            if done {
                break;
            }
        }
        (x, y)
    }
}

/// Nearest band among `centers` to `pos`, with its distance.
fn nearest_band(centers: impl Iterator<Item = (usize, f64)>, pos: f64) -> Option<(usize, f64)> {
    centers
        .map(|(idx, c)| (idx, (pos - c).abs()))
        .fold(None, |best, cand| match best {
            Some((_, d)) if d <= cand.1 => best,
            _ => Some(cand),
        })
}

/// Renders `pattern` onto a fresh canvas.
///
/// Wefts are horizontal bands spanning the canvas width, warps vertical
/// bands spanning its height. Where two bands cross, the yarn the pattern
/// puts on top is the one drawn.
pub fn render<T: Scalar>(pattern: &BinaryPattern, params: &RenderParams) -> Result<(Raster<T>, GroundTruth)> {
    params.validate()?;
    let (rows, cols) = (pattern.rows(), pattern.cols());
    if cols as f64 * params.warp_spacing > params.width as f64 || rows as f64 * params.weft_spacing > params.height as f64 {
        return Err(Error::Layout(format!(
            "{rows}x{cols} pattern at spacing {}x{} needs {}x{} px, canvas is {}x{}",
            params.weft_spacing,
            params.warp_spacing,
            cols as f64 * params.warp_spacing,
            rows as f64 * params.weft_spacing,
            params.width,
            params.height
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let layout = Layout {
        warp_center: (0..cols).map(|j| (j as f64 + 0.5) * params.warp_spacing).collect(),
        weft_center: (0..rows).map(|i| (i as f64 + 0.5) * params.weft_spacing).collect(),
        warp_phase: (0..cols).map(|_| rng.gen_range(0.0..2.0 * PI)).collect(),
        weft_phase: (0..rows).map(|_| rng.gen_range(0.0..2.0 * PI)).collect(),
        amp: params.jitter_amp,
        k: 2.0 * PI / params.jitter_wavelength,
    };
    let warp_half = params.yarn_width_ratio * params.warp_spacing / 2.0;
    let weft_half = params.yarn_width_ratio * params.weft_spacing / 2.0;
    let shade = |color: f64, dist: f64, half: f64| if half - dist < 1.0 { color * BORDER_SHADE } else { color };

    let (w, h) = (params.width, params.height);
    // Displaced yarn centres per canvas row (warps) and column (wefts).
    let warp_rows: Vec<Vec<f64>> = (0..h).map(|y| (0..cols).map(|j| layout.warp_x(j, y as f64)).collect()).collect();
    let weft_cols: Vec<Vec<f64>> = (0..w).map(|x| (0..rows).map(|i| layout.weft_y(i, x as f64)).collect()).collect();

    let mut img = Raster::from_fn(w, h, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let warp = nearest_band(warp_rows[y].iter().copied().enumerate(), xf).filter(|&(_, d)| d <= warp_half);
        let weft = nearest_band(weft_cols[x].iter().copied().enumerate(), yf).filter(|&(_, d)| d <= weft_half);
        let v = match (weft, warp) {
            (Some((i, dy)), Some((j, dx))) => {
                if pattern.get(i, j) == 1 {
                    shade(params.weft_color, dy, weft_half)
                } else {
                    shade(params.warp_color, dx, warp_half)
                }
            }
            (Some((_, dy)), None) => shade(params.weft_color, dy, weft_half),
            (None, Some((_, dx))) => shade(params.warp_color, dx, warp_half),
            (None, None) => params.background,
        };
        T::of(v)
    })?;

    if params.fiber_noise_density > 0.0 {
        add_fiber_streaks(&mut img, params.fiber_noise_density, &mut rng);
    }

    let crossings = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .map(|(i, j)| {
            let (x, y) = layout.crossing(i, j);
            CrossPoint::new(x, y, pattern.get(i, j))
        })
        .collect();
    let truth = GroundTruth {
        crossings,
        grid: YarnGrid {
            warp_x: layout.warp_center.clone(),
            weft_y: layout.weft_center.clone(),
        },
        pattern: pattern.clone(),
        colors: params.colors(),
        width: w,
        height: h,
    };
    Ok((img, truth))
}

/// Draws 1-px bright straight streaks until `density` of the canvas is covered.
fn add_fiber_streaks<T: Scalar>(img: &mut Raster<T>, density: f64, rng: &mut ChaCha8Rng) {
    let (w, h) = (img.width(), img.height());
    let target = (density * (w * h) as f64).round() as usize;
    let mut covered = vec![false; w * h];
    let mut count = 0usize;
    let value = T::of(FIBER_VALUE);
    while count < target {
        let (x0, y0) = (rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64));
        let angle = rng.gen_range(0.0..PI);
        let len = rng.gen_range(8..=24);
        for t in 0..len {
            let x = (x0 + t as f64 * angle.cos()).round();
            let y = (y0 + t as f64 * angle.sin()).round();
            if x < 0.0 || y < 0.0 || x >= w as f64 || y >= h as f64 {
                break;
            }
            let idx = y as usize * w + x as usize;
            if !covered[idx] {
                covered[idx] = true;
                count += 1;
                img.data_mut()[idx] = value;
                if count >= target {
                    break;
                }
            }
        }
    }
}

/// The four dataset views: original plus its mirrors and half-turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Augment {
    Original,
    MirrorHorizontal,
    MirrorVertical,
    Rotate180,
}

impl Augment {
    pub const ALL: [Augment; 4] = [
        Augment::Original,
        Augment::MirrorHorizontal,
        Augment::MirrorVertical,
        Augment::Rotate180,
    ];

    pub fn suffix(self) -> &'static str {
        match self {
            Augment::Original => "",
            Augment::MirrorHorizontal => "_hflip",
            Augment::MirrorVertical => "_vflip",
            Augment::Rotate180 => "_rot180",
        }
    }

    pub fn apply<T: Scalar>(self, img: &Raster<T>, truth: &GroundTruth) -> (Raster<T>, GroundTruth) {
        match self {
            Augment::Original => (img.clone(), truth.clone()),
            Augment::MirrorHorizontal => (img.mirror_horizontal(), truth.mirror_horizontal()),
            Augment::MirrorVertical => (img.mirror_vertical(), truth.mirror_vertical()),
            Augment::Rotate180 => (img.rotate_180(), truth.rotate_180()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image: String,
    pub truth: String,
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// SplitMix64 step, used to derive independent per-sample seeds.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Renders `n` random fabrics (4n with augmentation) into `out_dir`.
///
/// Each sample gets `<stem>.png`, `<stem>.json` (annotation) and `<stem>.pbm`;
/// `manifest.jsonl` lists one `{image, truth}` record per sample in order.
pub fn gen_dataset(n: usize, params: &RenderParams, density: f64, augment: bool, out_dir: &Path) -> Result<Vec<ManifestEntry>> {
    if n == 0 {
        return Err(Error::InvalidInput("dataset size must be at least 1".into()));
    }
    params.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (rows, cols) = params.capacity();
    let views: &[Augment] = if augment { &Augment::ALL } else { &Augment::ALL[..1] };

    let per_sample: Vec<Vec<ManifestEntry>> = (0..n)
        .into_par_iter()
        .map(|k| -> Result<Vec<ManifestEntry>> {
            let seed = derive_seed(params.seed, k as u64);
            let pattern = random_pattern(rows, cols, density, seed)?;
            let sample_params = RenderParams { seed, ..params.clone() };
            let (img, truth) = render::<f64>(&pattern, &sample_params)?;
            views
                .iter()
                .map(|view| {
                    let (vi, vt) = view.apply(&img, &truth);
                    let stem = format!("sample_{k:04}{}", view.suffix());
                    let image = format!("{stem}.png");
                    let truth_file = format!("{stem}.json");
                    io::save_gray_png(&vi, &out_dir.join(&image))?;
                    vt.annotation(image.clone()).save(&out_dir.join(&truth_file))?;
                    io::save_pattern(&vt.pattern, &out_dir.join(format!("{stem}.pbm")))?;
                    Ok(ManifestEntry { image, truth: truth_file })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let entries: Vec<ManifestEntry> = per_sample.into_iter().flatten().collect();
    let mut manifest = String::new();
    for e in &entries {
        manifest.push_str(&serde_json::to_string(e).expect("manifest entry serializes"));
        manifest.push('\n');
    }
    io::write_atomic(&out_dir.join(MANIFEST_FILE), manifest.as_bytes())?;
    Ok(entries)
}

pub fn manifest_path(out_dir: &Path) -> PathBuf {
    out_dir.join(MANIFEST_FILE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_pattern_extremes_and_errors() {
        assert!(random_pattern(4, 5, 0.0, 1).unwrap().cells().iter().all(|&c| c == 0));
        assert!(random_pattern(4, 5, 1.0, 1).unwrap().cells().iter().all(|&c| c == 1));
        assert!(random_pattern(0, 5, 0.5, 1).is_err());
        assert!(random_pattern(3, 5, 1.5, 1).is_err());
        assert_eq!(random_pattern(16, 25, 0.5, 9).unwrap(), random_pattern(16, 25, 0.5, 9).unwrap());
    }

    #[test]
    fn random_pattern_mean_concentrates() {
        // Binomial(400, 0.5): std of the mean is 0.025, so [0.4, 0.6] is a 4-sigma band.
        for seed in 0..100 {
            let p = random_pattern(16, 25, 0.5, seed).unwrap();
            let mean = p.cells().iter().map(|&c| c as f64).sum::<f64>() / 400.0;
            assert!((0.4..=0.6).contains(&mean), "seed {seed}: {mean}");
        }
    }

    #[test]
    fn single_crossing_shows_top_yarn() {
        let params = RenderParams::default();
        let p = BinaryPattern::new(1, 1, vec![1]).unwrap();
        let (img, truth) = render::<f64>(&p, &params).unwrap();
        assert_eq!(truth.crossings, vec![CrossPoint::new(10.0, 10.0, 1)]);
        assert_eq!(img.get(10, 10), params.weft_color);
        let p0 = BinaryPattern::new(1, 1, vec![0]).unwrap();
        let (img0, _) = render::<f64>(&p0, &params).unwrap();
        assert_eq!(img0.get(10, 10), params.warp_color);
    }

    #[test]
    fn jitter_free_crossings_sit_on_nominal_grid() {
        let params = RenderParams::default();
        let p = random_pattern(16, 25, 0.5, 3).unwrap();
        let (img, truth) = render::<f64>(&p, &params).unwrap();
        for (idx, c) in truth.crossings.iter().enumerate() {
            let (i, j) = (idx / 25, idx % 25);
            assert_eq!((c.x, c.y), ((j as f64 + 0.5) * 20.0, (i as f64 + 0.5) * 20.0));
            let expected = if c.v == 1 { params.weft_color } else { params.warp_color };
            assert_eq!(img.get(c.x as usize, c.y as usize), expected);
        }
        let zeros = BinaryPattern::zeros(16, 25).unwrap();
        let (img, truth) = render::<f64>(&zeros, &params).unwrap();
        assert!(truth.crossings.iter().all(|c| img.get(c.x as usize, c.y as usize) == params.warp_color));
    }

    #[test]
    fn jittered_crossings_stay_within_amplitude_and_show_top_yarn() {
        let params = RenderParams {
            jitter_amp: 2.0,
            seed: 11,
            ..RenderParams::default()
        };
        let p = random_pattern(16, 25, 0.5, 4).unwrap();
        let (img, truth) = render::<f64>(&p, &params).unwrap();
        let mut moved = 0;
        for (idx, c) in truth.crossings.iter().enumerate() {
            let (nx, ny) = ((idx % 25) as f64 * 20.0 + 10.0, (idx / 25) as f64 * 20.0 + 10.0);
            assert!((c.x - nx).abs() <= 2.0 + 1e-9 && (c.y - ny).abs() <= 2.0 + 1e-9);
            moved += usize::from(c.x != nx || c.y != ny);
            let (px, py) = c.pixel();
            let expected = if c.v == 1 { params.weft_color } else { params.warp_color };
            assert_eq!(img.get(px as usize, py as usize), expected);
        }
        assert!(moved > 300);
    }

    #[test]
    fn layout_and_parameter_errors() {
        let params = RenderParams::default();
        let big = BinaryPattern::zeros(17, 25).unwrap();
        assert!(matches!(render::<f64>(&big, &params), Err(Error::Layout(_))));
        let bad = RenderParams {
            jitter_amp: 5.0,
            ..RenderParams::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidParameter(_))));
        let bad = RenderParams {
            warp_spacing: 5.0,
            ..RenderParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn augmented_truth_inverts() {
        let params = RenderParams {
            jitter_amp: 2.0,
            seed: 5,
            ..RenderParams::default()
        };
        let p = random_pattern(16, 25, 0.5, 5).unwrap();
        let (_, truth) = render::<f64>(&p, &params).unwrap();
        // Sub-pixel coordinates lose low bits in `w - 1 - x`, so compare them loosely.
        let close = |a: &GroundTruth, b: &GroundTruth| {
            assert_eq!((&a.pattern, &a.grid), (&b.pattern, &b.grid));
            for (c, d) in a.crossings.iter().zip(&b.crossings) {
                assert!((c.x - d.x).abs() < 1e-9 && (c.y - d.y).abs() < 1e-9 && c.v == d.v);
            }
        };
        close(&truth.mirror_horizontal().mirror_horizontal(), &truth);
        close(&truth.mirror_vertical().mirror_vertical(), &truth);
        close(&truth.rotate_180().rotate_180(), &truth);
        let rot = truth.rotate_180();
        for (idx, c) in rot.crossings.iter().enumerate() {
            let src = truth.crossings[truth.crossings.len() - 1 - idx];
            assert_eq!((c.x, c.y, c.v), (511.0 - src.x, 319.0 - src.y, src.v));
        }
        let (_, clean) = render::<f64>(&p, &RenderParams::default()).unwrap();
        assert_eq!(clean.rotate_180().rotate_180(), clean);
    }

    #[test]
    fn fiber_streaks_hit_density() {
        let params = RenderParams {
            fiber_noise_density: 0.02,
            ..RenderParams::default()
        };
        let p = random_pattern(16, 25, 0.5, 1).unwrap();
        let (noisy, _) = render::<f64>(&p, &params).unwrap();
        let clean = render::<f64>(&p, &RenderParams::default()).unwrap().0;
        let covered = noisy.data().iter().filter(|&&v| v == FIBER_VALUE).count();
        assert_eq!(covered, (0.02f64 * 512.0 * 320.0).round() as usize);
        let differs = noisy.data().iter().zip(clean.data()).filter(|(a, b)| a != b).count();
        assert!(differs <= covered);
    }
}

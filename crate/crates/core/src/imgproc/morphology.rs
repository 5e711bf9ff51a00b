//! Grayscale opening with a disk structuring element.
//!
//! Pixels outside the image never take part in a min or max, which is the
//! same as padding with +inf for erosion and -inf for dilation. Erosion and
//! dilation restricted this way stay adjoint, so the opening is idempotent
//! right up to the image border.

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::scalar::Scalar;

/// Disk of the given radius as one horizontal half-width per row offset.
///
/// A pixel at offset `(dx, dy)` belongs to the disk when `dx² + dy² <= radius²`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Disk {
    /// `half_widths[i]` is the half-width of row offset `dy = i - reach`.
    half_widths: Vec<usize>,
    reach: usize,
}

impl Disk {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "disk radius must be finite and >= 0, got {radius}"
            )));
        }
        let r2 = radius * radius;
        let reach = radius.floor() as usize;
        let half_widths = (0..=2 * reach)
            .map(|i| {
                let dy = i as f64 - reach as f64;
                let mut k = 0usize;
                while ((k + 1) as f64).powi(2) + dy * dy <= r2 {
                    k += 1;
                }
                k
            })
            .collect();
        Ok(Self { half_widths, reach })
    }

    pub fn reach(&self) -> usize {
        self.reach
    }

    /// Whether offset `(dx, dy)` is inside the disk.
    pub fn contains(&self, dx: isize, dy: isize) -> bool {
        let Some(i) = dy.checked_add(self.reach as isize) else {
            return false;
        };
        if i < 0 || i as usize >= self.half_widths.len() {
            return false;
        }
        dx.unsigned_abs() <= self.half_widths[i as usize]
    }

    pub fn area(&self) -> usize {
        self.half_widths.iter().map(|k| 2 * k + 1).sum()
    }
}

pub fn erode<T: Scalar>(img: &Raster<T>, disk: &Disk) -> Raster<T> {
    rank_filter(img, disk, |a, b| a.min(b))
}

pub fn dilate<T: Scalar>(img: &Raster<T>, disk: &Disk) -> Raster<T> {
    rank_filter(img, disk, |a, b| a.max(b))
}

/// Grayscale opening: erosion followed by dilation with the same disk.
pub fn morph_open<T: Scalar>(img: &Raster<T>, radius: f64) -> Result<Raster<T>> {
    let disk = Disk::new(radius)?;
    Ok(dilate(&erode(img, &disk), &disk))
}

fn rank_filter<T: Scalar>(img: &Raster<T>, disk: &Disk, pick: impl Fn(T, T) -> T + Copy) -> Raster<T> {
    let (w, h) = (img.width(), img.height());

    // 1-D filtered copies of every row, one per distinct half-width.
    let mut widths: Vec<usize> = disk.half_widths.clone();
    widths.sort_unstable();
    widths.dedup();
    let filtered: Vec<Vec<T>> = widths
        .iter()
        .map(|&k| {
            let mut out = Vec::with_capacity(w * h);
            for y in 0..h {
                let row = img.row(y);
                for x in 0..w {
                    let lo = x.saturating_sub(k);
                    let hi = (x + k).min(w - 1);
                    let mut acc = row[lo];
                    for &v in &row[lo + 1..=hi] {
                        acc = pick(acc, v);
                    }
                    out.push(acc);
                }
            }
            out
        })
        .collect();
    let slot: Vec<usize> = disk
        .half_widths
        .iter()
        .map(|k| widths.binary_search(k).expect("width is present"))
        .collect();

    let reach = disk.reach as isize;
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let mut acc: Option<T> = None;
            for dy in -reach..=reach {
                let yy = y as isize + dy;
                if yy < 0 || yy >= h as isize {
                    continue;
                }
                let v = filtered[slot[(dy + reach) as usize]][yy as usize * w + x];
                acc = Some(match acc {
                    Some(a) => pick(a, v),
                    None => v,
                });
            }
            out.set(x, y, acc.expect("row offset 0 is always inside"));
        }
    }
    out
}

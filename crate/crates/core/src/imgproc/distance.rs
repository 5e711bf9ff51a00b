//! Exact Euclidean distance transform (Felzenszwalb–Huttenlocher lower envelope).

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Raster};
use crate::scalar::Scalar;

/// Squared distance from every pixel to the nearest `true` pixel.
///
/// Pixels outside the mask count as background. All arithmetic on the
/// squared distances is integral, so results are exact.
pub fn squared_distance_transform(mask: &BinaryMask) -> Result<Raster<u64>> {
    let (w, h) = (mask.width(), mask.height());
    if !mask.data().iter().any(|&b| b) {
        return Err(Error::EmptyObject);
    }

    // Vertical pass: distance to the nearest object pixel in the same column.
    let mut column: Vec<Option<u64>> = vec![None; w * h];
    for x in 0..w {
        let mut last: Option<usize> = None;
        for y in 0..h {
            if mask.get(x, y) {
                last = Some(y);
            }
            column[y * w + x] = last.map(|l| (y - l) as u64);
        }
        let mut next: Option<usize> = None;
        for y in (0..h).rev() {
            if mask.get(x, y) {
                next = Some(y);
            }
            if let Some(n) = next {
                let d = (n - y) as u64;
                let slot = &mut column[y * w + x];
                *slot = Some(slot.map_or(d, |c| c.min(d)));
            }
        }
    }

    // Horizontal pass: lower envelope of parabolas (x - q)^2 + g(q)^2.
    let mut out = vec![0u64; w * h];
    let mut sites: Vec<(i64, i64)> = Vec::with_capacity(w);
    let mut bounds: Vec<f64> = Vec::with_capacity(w + 1);
    for y in 0..h {
        sites.clear();
        bounds.clear();
        for q in 0..w {
            let Some(g) = column[y * w + q] else { continue };
            let site = (q as i64, (g * g) as i64);
            while let Some(&top) = sites.last() {
                let s = intersection(top, site);
                if s <= *bounds.last().expect("one bound per site") {
                    sites.pop();
                    bounds.pop();
                } else {
                    break;
                }
            }
            bounds.push(match sites.last() {
                Some(&top) => intersection(top, site),
                None => f64::NEG_INFINITY,
            });
            sites.push(site);
        }
        // The horizontal pass only sees columns holding objects; every row
        // has at least one because the mask is non-empty.
        let mut k = 0usize;
        for x in 0..w {
            while k + 1 < sites.len() && bounds[k + 1] < x as f64 {
                k += 1;
            }
            let (q, f) = sites[k];
            let dx = x as i64 - q;
            out[y * w + x] = (dx * dx + f) as u64;
        }
    }
    Raster::from_vec(w, h, out)
}

fn intersection((q, fq): (i64, i64), (r, fr): (i64, i64)) -> f64 {
    ((fr + r * r) - (fq + q * q)) as f64 / (2 * (r - q)) as f64
}

/// Euclidean distance from every pixel to the nearest object pixel, in pixels.
pub fn distance_transform<T: Scalar>(mask: &BinaryMask) -> Result<Raster<T>> {
    Ok(squared_distance_transform(mask)?.map(|d2| T::of((d2 as f64).sqrt())))
}

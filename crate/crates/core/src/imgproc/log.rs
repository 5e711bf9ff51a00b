//! Laplacian-of-Gaussian filtering.
//!
//! The kernel is applied separably as `Gxx + Gyy`, truncated at `±ceil(3σ)`,
//! with edge replication at the border. Taps are accumulated in symmetric
//! pairs `k[i]·(a[x-i] + a[x+i])`, which makes the response bit-identical
//! under mirroring of the input.

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
struct SymmetricKernel<T> {
    /// Taps for offsets `0..=radius`; offset `-i` shares tap `i`.
    taps: Vec<T>,
}

impl<T: Scalar> SymmetricKernel<T> {
    fn radius(&self) -> usize {
        self.taps.len() - 1
    }
}

fn kernels<T: Scalar>(sigma: f64) -> Result<(SymmetricKernel<T>, SymmetricKernel<T>)> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "LoG sigma must be finite and > 0, got {sigma}"
        )));
    }
    let radius = (3.0 * sigma).ceil() as usize;
    let gauss: Vec<f64> = (0..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = gauss[0] + 2.0 * gauss[1..].iter().sum::<f64>();
    let gauss: Vec<f64> = gauss.iter().map(|g| g / total).collect();

    // Second derivative of the normalised Gaussian, shifted to zero sum so
    // that flat regions respond with exactly zero.
    let s2 = sigma * sigma;
    let mut second: Vec<f64> = gauss
        .iter()
        .enumerate()
        .map(|(i, g)| ((i * i) as f64 - s2) / (s2 * s2) * g)
        .collect();
    let n = (2 * radius + 1) as f64;
    let mean = (second[0] + 2.0 * second[1..].iter().sum::<f64>()) / n;
    second.iter_mut().for_each(|v| *v -= mean);

    Ok((
        SymmetricKernel {
            taps: gauss.into_iter().map(T::of).collect(),
        },
        SymmetricKernel {
            taps: second.into_iter().map(T::of).collect(),
        },
    ))
}

fn convolve_rows<T: Scalar>(img: &Raster<T>, k: &SymmetricKernel<T>) -> Raster<T> {
    let r = k.radius() as isize;
    let w = img.width() as isize;
    let mut out = img.clone();
    for y in 0..img.height() {
        let row = img.row(y);
        let at = |x: isize| row[x.clamp(0, w - 1) as usize];
        for x in 0..w {
            let mut acc = k.taps[0] * at(x);
            for i in 1..=r {
                acc = acc + k.taps[i as usize] * (at(x - i) + at(x + i));
            }
            out.set(x as usize, y, acc);
        }
    }
    out
}

fn convolve_cols<T: Scalar>(img: &Raster<T>, k: &SymmetricKernel<T>) -> Raster<T> {
    let r = k.radius() as isize;
    let mut out = img.clone();
    for y in 0..img.height() as isize {
        for x in 0..img.width() {
            let at = |yy: isize| img.get_clamped(x as isize, yy);
            let mut acc = k.taps[0] * at(y);
            for i in 1..=r {
                acc = acc + k.taps[i as usize] * (at(y - i) + at(y + i));
            }
            out.set(x, y as usize, acc);
        }
    }
    out
}

/// Raw (unscaled) Laplacian-of-Gaussian response.
pub fn log_response<T: Scalar>(img: &Raster<T>, sigma: f64) -> Result<Raster<T>> {
    let (gauss, second) = kernels::<T>(sigma)?;
    let xx = convolve_cols(&convolve_rows(img, &second), &gauss);
    let yy = convolve_cols(&convolve_rows(img, &gauss), &second);
    let data = xx.data().iter().zip(yy.data()).map(|(a, b)| *a + *b).collect();
    Raster::from_vec(img.width(), img.height(), data)
}

/// Affine map of `raw` onto `[0, 1]`; a degenerate range yields constant 0.5.
pub fn rescale_unit<T: Scalar>(raw: &Raster<T>) -> Raster<T> {
    let (lo, hi) = min_max(raw.data());
    let scale = T::one().max(lo.abs()).max(hi.abs());
    if !(hi - lo > T::epsilon().sqrt() * scale) {
        return raw.map(|_| T::half());
    }
    let span = hi - lo;
    raw.map(|v| ((v - lo) / span).min(T::one()).max(T::zero()))
}

/// Laplacian of Gaussian rescaled to `[0, 1]`.
pub fn log_filter<T: Scalar>(img: &Raster<T>, sigma: f64) -> Result<Raster<T>> {
    Ok(rescale_unit(&log_response(img, sigma)?))
}

pub(crate) fn min_max<T: Scalar>(data: &[T]) -> (T, T) {
    data.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn sigma_must_be_positive() {
        let img = Raster::filled(8, 8, 0.3f64).unwrap();
        assert!(matches!(log_filter(&img, 0.0), Err(Error::InvalidParameter(_))));
        assert!(log_filter(&img, -2.0).is_err());
    }

    #[test]
    fn constant_image_gives_constant_half() {
        let img = Raster::filled(40, 30, 0.37f64).unwrap();
        let raw = log_response(&img, 11.0).unwrap();
        assert!(raw.data().iter().all(|v| v.abs() < 1e-12));
        let out = log_filter(&img, 11.0).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn step_edge_extremes_flank_the_edge() {
        let img = Raster::from_fn(64, 16, |x, _| if x < 32 { 0.0f64 } else { 1.0 }).unwrap();
        for sigma in [1.0, 2.0, 4.0] {
            let raw = log_response(&img, sigma).unwrap();
            let row = raw.row(8);
            let (mut pos, mut neg) = (0usize, 0usize);
            for x in 0..64 {
                if row[x] > row[pos] {
                    pos = x;
                }
                if row[x] < row[neg] {
                    neg = x;
                }
            }
            // Dark side is concave up, bright side concave down.
            assert!(pos < 32 && neg >= 32, "sigma {sigma}: pos {pos}, neg {neg}");
            let reach = sigma + 1.0;
            assert!((31.5 - pos as f64) <= reach && (neg as f64 - 31.5) <= reach);
            // Zero crossing sits on the edge.
            assert!(row[31] > 0.0 && row[32] < 0.0);
        }
    }

    fn grating_amplitude(freq: f64, sigma: f64) -> f64 {
        let img = Raster::from_fn(400, 8, |x, _| 0.5 + 0.4 * (2.0 * PI * freq * x as f64).cos()).unwrap();
        let raw = log_response(&img, sigma).unwrap();
        raw.row(4)[100..300].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Continuous LoG transfer function magnitude for a 1-D grating.
    fn analytic_gain(freq: f64, sigma: f64) -> f64 {
        let w = 2.0 * PI * freq;
        w * w * (-0.5 * w * w * sigma * sigma).exp()
    }

    #[test]
    fn grating_gain_ratio_follows_transfer_function() {
        let sigma = 3.0;
        let (f1, f2) = (0.03, 0.09);
        let measured = grating_amplitude(f1, sigma) / grating_amplitude(f2, sigma);
        let expected = analytic_gain(f1, sigma) / analytic_gain(f2, sigma);
        assert!((measured / expected - 1.0).abs() < 0.10, "{measured} vs {expected}");
    }

    #[test]
    fn peak_frequency_follows_transfer_function() {
        let sigma = 3.0;
        let peak = 1.0 / (PI * sigma * 2f64.sqrt());
        let best = (0..=40)
            .map(|i| 0.02 + i as f64 * 0.0025)
            .max_by(|a, b| grating_amplitude(*a, sigma).total_cmp(&grating_amplitude(*b, sigma)))
            .unwrap();
        assert!((best / peak - 1.0).abs() < 0.10, "{best} vs {peak}");
    }

    proptest! {
        #[test]
        fn commutes_with_mirroring(w in 1usize..30, h in 1usize..30, sigma in 0.5f64..4.0, seed in any::<u64>()) {
            let mut s = seed;
            let img = Raster::from_fn(w, h, |_, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64
            }).unwrap();
            let out = log_filter(&img, sigma).unwrap();
            prop_assert_eq!(log_filter(&img.mirror_horizontal(), sigma).unwrap(), out.mirror_horizontal());
            prop_assert_eq!(log_filter(&img.mirror_vertical(), sigma).unwrap(), out.mirror_vertical());
            prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

//! 1-D projection profiles and their minima, used to locate yarn axes.
//!
//! Every sum here pairs the two ends of its range before accumulating, so a
//! reversed input produces a bit-for-bit reversed output. That keeps the
//! axis estimates exactly equivariant under image mirroring.

use crate::raster::Raster;
use crate::scalar::Scalar;

/// Sum whose result does not depend on the direction the slice is read in.
pub fn symmetric_sum<T: Scalar>(values: &[T]) -> T {
    let n = values.len();
    let mut acc = T::zero();
    for i in 0..n / 2 {
        acc = acc + (values[i] + values[n - 1 - i]);
    }
    if n % 2 == 1 {
        acc = acc + values[n / 2];
    }
    acc
}

/// Sum of every row, indexed by `y`.
pub fn row_profile<T: Scalar>(img: &Raster<T>) -> Vec<T> {
    (0..img.height()).map(|y| symmetric_sum(img.row(y))).collect()
}

/// Sum of every column, indexed by `x`.
pub fn column_profile<T: Scalar>(img: &Raster<T>) -> Vec<T> {
    let mut column = Vec::with_capacity(img.height());
    (0..img.width())
        .map(|x| {
            column.clear();
            column.extend((0..img.height()).map(|y| img.get(x, y)));
            symmetric_sum(&column)
        })
        .collect()
}

/// Moving average over `±halfwidth` samples; the window is truncated at the ends.
pub fn smooth<T: Scalar>(seq: &[T], halfwidth: usize) -> Vec<T> {
    let n = seq.len();
    (0..n)
        .map(|i| {
            let mut acc = seq[i];
            let mut count = 1usize;
            for d in 1..=halfwidth {
                let left = i.checked_sub(d).map(|j| seq[j]);
                let right = (i + d < n).then(|| seq[i + d]);
                match (left, right) {
                    (Some(a), Some(b)) => {
                        acc = acc + (a + b);
                        count += 2;
                    }
                    (Some(v), None) | (None, Some(v)) => {
                        acc = acc + v;
                        count += 1;
                    }
                    (None, None) => {}
                }
            }
            acc / T::of(count as f64)
        })
        .collect()
}

/// Positions of strict local minima of `seq`.
///
/// Runs of values equal within a small tolerance form a plateau; a plateau
/// lower than both of its neighbours counts as one minimum at its centre.
/// Minima closer than `border` samples to either end are dropped.
pub fn local_minima<T: Scalar>(seq: &[T], border: usize) -> Vec<f64> {
    local_minima_with_values(seq, border).into_iter().map(|(p, _)| p).collect()
}

fn local_minima_with_values<T: Scalar>(seq: &[T], border: usize) -> Vec<(f64, T)> {
    let n = seq.len();
    if n < 3 {
        return Vec::new();
    }
    let (lo, hi) = crate::imgproc::min_max(seq);
    let tol = (hi - lo) * T::plateau_eps();
    if !(hi - lo > T::zero()) {
        return Vec::new();
    }

    let mut minima = Vec::new();
    let mut start = 0usize;
    while start < n {
        let mut end = start;
        while end + 1 < n && (seq[end + 1] - seq[end]).abs() <= tol {
            end += 1;
        }
        if start > 0 && end + 1 < n && seq[start - 1] > seq[start] && seq[end + 1] > seq[end] {
            let pos = (start + end) as f64 / 2.0;
            if pos >= border as f64 && pos <= (n - 1 - border) as f64 {
                minima.push((pos, seq[start]));
            }
        }
        start = end + 1;
    }
    minima
}

/// Local minima with weaker neighbours suppressed.
///
/// Any minimum with a strictly lower minimum within `radius` samples is
/// dropped, so shallow ripples next to a real trough do not count as
/// separate yarns. Equal-valued minima never suppress each other.
pub fn dominant_minima<T: Scalar>(seq: &[T], border: usize, radius: usize) -> Vec<f64> {
    let minima = local_minima_with_values(seq, border);
    minima
        .iter()
        .filter(|(pos, value)| {
            !minima
                .iter()
                .any(|(p, v)| (p - pos).abs() <= radius as f64 && v < value)
        })
        .map(|(pos, _)| *pos)
        .collect()
}

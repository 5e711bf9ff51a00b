//! 4-connected component labelling of tri-valued images.

use crate::raster::{LabelMap, Raster, Tri, TriImage};

/// 4-neighbours of `(x, y)` inside a `w x h` raster.
pub(crate) fn neighbours4(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    let left = (x > 0).then(|| (x - 1, y));
    let right = (x + 1 < w).then(|| (x + 1, y));
    let up = (y > 0).then(|| (x, y - 1));
    let down = (y + 1 < h).then(|| (x, y + 1));
    [left, right, up, down].into_iter().flatten()
}

/// Labels value-uniform 4-connected regions of non-background pixels.
///
/// 0-pixels and 1-pixels never share a region. Labels are numbered `1..=K`
/// in raster order of each region's first pixel; background is 0.
pub fn ccl(img: &TriImage) -> LabelMap {
    let (w, h) = (img.width(), img.height());
    let mut labels = Raster::filled(w, h, 0u32).expect("same size as a valid raster");
    let mut count = 0u32;
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let value = img.get(x, y);
            if value == Tri::Half || labels.get(x, y) != 0 {
                continue;
            }
            count += 1;
            labels.set(x, y, count);
            stack.push((x, y));
            while let Some((px, py)) = stack.pop() {
                for (nx, ny) in neighbours4(px, py, w, h) {
                    if labels.get(nx, ny) == 0 && img.get(nx, ny) == value {
                        labels.set(nx, ny, count);
                        stack.push((nx, ny));
                    }
                }
            }
        }
    }
    LabelMap { labels, count }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tri_from(rows: &[&str]) -> TriImage {
        let h = rows.len();
        let w = rows[0].len();
        TriImage::from_fn(w, h, |x, y| match rows[y].as_bytes()[x] {
            b'0' => Tri::Zero,
            b'1' => Tri::One,
            _ => Tri::Half,
        })
        .unwrap()
    }

    /// Reference count: repeated flood fill over a visited set.
    fn flood_count(img: &TriImage) -> u32 {
        let (w, h) = (img.width(), img.height());
        let mut seen = vec![false; w * h];
        let mut count = 0;
        for start in 0..w * h {
            let v = img.data()[start];
            if v == Tri::Half || seen[start] {
                continue;
            }
            count += 1;
            let mut queue = std::collections::VecDeque::from([start]);
            seen[start] = true;
            while let Some(i) = queue.pop_front() {
                let (x, y) = (i % w, i / w);
                let cand = [
                    (x > 0).then(|| i - 1),
                    (x + 1 < w).then(|| i + 1),
                    (y > 0).then(|| i - w),
                    (y + 1 < h).then(|| i + w),
                ];
                for j in cand.into_iter().flatten() {
                    if !seen[j] && img.data()[j] == v {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        count
    }

    #[test]
    fn two_disjoint_blocks() {
        let img = tri_from(&[
            "111.....", //
            "111..111", //
            "111..111", //
            ".....111", //
        ]);
        let map = ccl(&img);
        assert_eq!(map.count, 2);
        assert_eq!(map.labels.get(0, 0), 1);
        assert_eq!(map.labels.get(7, 3), 2);
        assert_eq!(map.labels.get(4, 0), 0);
    }

    #[test]
    fn checkerboard_has_no_diagonal_links() {
        let img = TriImage::from_fn(6, 5, |x, y| if (x + y) % 2 == 0 { Tri::One } else { Tri::Zero }).unwrap();
        assert_eq!(ccl(&img).count, 30);
        let sparse = TriImage::from_fn(6, 6, |x, y| if (x + y) % 2 == 0 { Tri::One } else { Tri::Half }).unwrap();
        assert_eq!(ccl(&sparse).count, 18);
    }

    #[test]
    fn adjacent_values_stay_separate() {
        let img = tri_from(&["0011", "0011"]);
        assert_eq!(ccl(&img).count, 2);
    }

    #[test]
    fn empty_foreground() {
        let img = TriImage::filled(4, 4, Tri::Half).unwrap();
        assert_eq!(ccl(&img).count, 0);
    }

    proptest! {
        #[test]
        fn count_matches_flood_fill_and_is_translation_stable(
            w in 1usize..20, h in 1usize..20, cells in proptest::collection::vec(0u8..3, 400), dx in 0usize..5, dy in 0usize..5,
        ) {
            let img = TriImage::from_fn(w, h, |x, y| match cells[y * 20 + x] { 0 => Tri::Zero, 1 => Tri::Half, _ => Tri::One }).unwrap();
            let map = ccl(&img);
            prop_assert_eq!(map.count, flood_count(&img));
            let labels: std::collections::BTreeSet<u32> = map.labels.data().iter().copied().filter(|&l| l > 0).collect();
            prop_assert_eq!(labels.len() as u32, map.count);
            let shifted = TriImage::from_fn(w + dx, h + dy, |x, y| {
                if x < dx || y < dy { Tri::Half } else { img.get(x - dx, y - dy) }
            }).unwrap();
            prop_assert_eq!(ccl(&shifted).count, map.count);
        }
    }
}

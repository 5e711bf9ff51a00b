//! File formats: 8-bit gray PNG rasters, PBM weave patterns and annotation JSON.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ColorType, ImageEncoder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::{BinaryPattern, CrossPoint, RepColors, YarnGrid};
use crate::raster::{BinaryMask, Raster};
use crate::scalar::Scalar;

/// Writes `bytes` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Quantizes a unit-range value to a byte: `round(v * 255)`, clamped.
pub fn to_byte<T: Scalar>(v: T) -> u8 {
    let v = v.to_f64_lossy();
    if v.is_nan() {
        return 0;
    }
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn from_byte<T: Scalar>(b: u8) -> T {
    T::of(b as f64 / 255.0)
}

pub fn encode_gray_png(width: usize, height: usize, bytes: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(bytes, width as u32, height as u32, ColorType::L8.into())
        .map_err(|e| Error::Format {
            what: "PNG",
            reason: e.to_string(),
        })?;
    Ok(out)
}

pub fn gray_png_bytes<T: Scalar>(img: &Raster<T>) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = img.data().iter().map(|&v| to_byte(v)).collect();
    encode_gray_png(img.width(), img.height(), &bytes)
}

pub fn save_gray_png<T: Scalar>(img: &Raster<T>, path: &Path) -> Result<()> {
    write_atomic(path, &gray_png_bytes(img)?)
}

pub fn save_mask_png(mask: &BinaryMask, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_atomic(path, &encode_gray_png(mask.width(), mask.height(), &bytes)?)
}

fn decode_image(path: &Path) -> Result<image::DynamicImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    image::load_from_memory(&bytes).map_err(|e| Error::Format {
        what: "image",
        reason: format!("{}: {e}", path.display()),
    })
}

/// Loads any readable image as gray levels in `[0, 1]` (colour is converted to luma).
pub fn load_gray<T: Scalar>(path: &Path) -> Result<Raster<T>> {
    let img = decode_image(path)?.into_luma8();
    let (w, h) = img.dimensions();
    Raster::from_vec(w as usize, h as usize, img.into_raw().into_iter().map(from_byte).collect())
}

/// Loads a PNG that must be 8-bit single channel; anything else is a contract violation.
pub fn load_gray_png_strict<T: Scalar>(path: &Path) -> Result<Raster<T>> {
    let img = decode_image(path)?;
    let image::DynamicImage::ImageLuma8(gray) = img else {
        return Err(Error::ContractViolation(format!(
            "{} is {:?}, expected 8-bit single-channel",
            path.display(),
            img.color()
        )));
    };
    let (w, h) = gray.dimensions();
    Raster::from_vec(w as usize, h as usize, gray.into_raw().into_iter().map(from_byte).collect())
}

pub fn load_mask_png(path: &Path) -> Result<BinaryMask> {
    let img = decode_image(path)?.into_luma8();
    let (w, h) = img.dimensions();
    Raster::from_vec(w as usize, h as usize, img.into_raw().into_iter().map(|b| b >= 128).collect())
}

/// Plain PBM (`P1`): rows are wefts, columns are warps, 1 = weft on top.
pub fn pattern_to_pbm(pattern: &BinaryPattern) -> String {
    let mut out = format!("P1\n{} {}\n", pattern.cols(), pattern.rows());
    for r in 0..pattern.rows() {
        let line: Vec<&str> = (0..pattern.cols())
            .map(|c| if pattern.get(r, c) == 1 { "1" } else { "0" })
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parses either a `P1` PBM or a plain grid of `0`/`1` characters, one row per line.
pub fn parse_pattern(text: &str) -> Result<BinaryPattern> {
    let bad = |reason: String| Error::Format { what: "pattern", reason };
    let stripped: Vec<&str> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .collect();
    let mut tokens = stripped.iter().flat_map(|l| l.split_whitespace());

    if tokens.clone().next() == Some("P1") {
        tokens.next();
        let mut dim = |name: &str| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| bad(format!("missing {name}")))?
                .parse::<usize>()
                .map_err(|e| bad(format!("bad {name}: {e}")))
        };
        let cols = dim("width")?;
        let rows = dim("height")?;
        // Plain PBM allows bits with or without separating whitespace.
        let mut cells = Vec::with_capacity(rows * cols);
        for ch in tokens.flat_map(|t| t.chars()) {
            match ch {
                '0' => cells.push(0),
                '1' => cells.push(1),
                other => return Err(bad(format!("unexpected character {other:?} in raster"))),
            }
        }
        if cells.len() != rows * cols {
            return Err(bad(format!("expected {} bits, found {}", rows * cols, cells.len())));
        }
        return BinaryPattern::new(rows, cols, cells).map_err(|e| bad(e.to_string()));
    }

    let mut rows: Vec<Vec<u8>> = Vec::new();
    for line in stripped.iter().filter(|l| !l.trim().is_empty()) {
        let mut row = Vec::new();
        for ch in line.chars().filter(|c| !c.is_whitespace()) {
            match ch {
                '0' => row.push(0),
                '1' => row.push(1),
                other => return Err(bad(format!("unexpected character {other:?}"))),
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(bad("rows have different lengths".into()));
    }
    let n = rows.len();
    BinaryPattern::new(n, cols, rows.concat()).map_err(|e| bad(e.to_string()))
}

pub fn save_pattern(pattern: &BinaryPattern, path: &Path) -> Result<()> {
    write_atomic(path, pattern_to_pbm(pattern).as_bytes())
}

pub fn load_pattern(path: &Path) -> Result<BinaryPattern> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pattern(&text)
}

/// Annotation file shared by ground truth, decode output and annotation sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub image: String,
    pub warp_x: Vec<f64>,
    pub weft_y: Vec<f64>,
    pub crossings: Vec<CrossPoint>,
    pub colors: RepColors,
}

impl Annotation {
    pub fn new(image: impl Into<String>, grid: &YarnGrid, crossings: &[CrossPoint], colors: RepColors) -> Self {
        Self {
            image: image.into(),
            warp_x: grid.warp_x.clone(),
            weft_y: grid.weft_y.clone(),
            crossings: crossings.to_vec(),
            colors,
        }
    }

    pub fn grid(&self) -> Result<YarnGrid> {
        YarnGrid::new(self.warp_x.clone(), self.weft_y.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotation serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            what: "annotation",
            reason: format!("{}: {e}", path.display()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pbm_round_trip_and_plain_grid() {
        let p = BinaryPattern::new(2, 3, vec![1, 0, 1, 0, 0, 1]).unwrap();
        let text = pattern_to_pbm(&p);
        assert_eq!(text, "P1\n3 2\n1 0 1\n0 0 1\n");
        assert_eq!(parse_pattern(&text).unwrap(), p);
        assert_eq!(parse_pattern("P1 # c\n3 2\n101001\n").unwrap(), p);
        assert_eq!(parse_pattern("101\n001\n").unwrap(), p);
    }

    #[test]
    fn malformed_patterns_are_rejected() {
        for bad in ["P1\n3 2\n1 0 1\n", "P1\nx 2\n", "10\n1\n", "1 2\n", "P1\n2 1\n1 x\n", ""] {
            assert!(matches!(parse_pattern(bad), Err(Error::Format { .. })), "{bad:?}");
        }
    }

    #[test]
    fn byte_quantization() {
        assert_eq!(to_byte(0.5f64), 128);
        assert_eq!(to_byte(1.2f64), 255);
        assert_eq!(to_byte(-0.1f32), 0);
        assert!((from_byte::<f64>(128) - 0.501_960_784_313_725_5).abs() < 1e-15);
    }

    #[test]
    fn annotation_rejects_unknown_keys() {
        let json = r#"{"image":"a.png","warp_x":[1],"weft_y":[2],"crossings":[{"x":1,"y":2,"v":1}],"colors":{"warp":0.1,"weft":0.9},"extra":1}"#;
        assert!(serde_json::from_str::<Annotation>(json).is_err());
        let ok = json.replace(r#","extra":1"#, "");
        let a: Annotation = serde_json::from_str(&ok).unwrap();
        assert_eq!(a.crossings[0], CrossPoint::new(1.0, 2.0, 1));
    }
}

//! Row-major rasters and the pixel types the pipeline moves between stages.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major 2-D raster. Index `(x, y)` addresses column `x` of row `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<P> {
    width: usize,
    height: usize,
    data: Vec<P>,
}

impl<P: Copy> Raster<P> {
    pub fn filled(width: usize, height: usize, value: P) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: vec![value; width * height],
        })
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<P>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "raster data has {} values, expected {}x{}={}",
                data.len(),
                width,
                height,
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> P) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> P {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: P) {
        self.data[y * self.width + x] = value;
    }

    /// Pixel at `(x, y)` with out-of-range coordinates clamped to the border.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> P {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.get(cx, cy)
    }

    pub fn data(&self) -> &[P] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [P] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<P> {
        self.data
    }

    pub fn row(&self, y: usize) -> &[P] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn same_size<Q>(&self, other: &Raster<Q>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map<Q: Copy>(&self, f: impl FnMut(P) -> Q) -> Raster<Q> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().copied().map(f).collect(),
        }
    }

    /// Left-right mirror: `(x, y) -> (W-1-x, y)`.
    pub fn mirror_horizontal(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            data.extend(self.row(y).iter().rev().copied());
        }
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Top-bottom mirror: `(x, y) -> (x, H-1-y)`.
    pub fn mirror_vertical(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for y in (0..self.height).rev() {
            data.extend_from_slice(self.row(y));
        }
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn rotate_180(&self) -> Self {
        let mut data = self.data.clone();
        data.reverse();
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

impl<T: Scalar> Raster<T> {
    /// Checks that every value lies in `[0, 1]`.
    pub fn validate_unit_range(&self) -> Result<()> {
        if let Some(pos) = self
            .data
            .iter()
            .position(|v| !(*v >= T::zero() && *v <= T::one()))
        {
            return Err(Error::InvalidInput(format!(
                "pixel ({}, {}) = {:?} outside [0, 1]",
                pos % self.width,
                pos / self.width,
                self.data[pos]
            )));
        }
        Ok(())
    }

    /// Mean of the 3x3 neighbourhood around `(x, y)` with edge replication.
    ///
    /// Summed in mirror-symmetric pairs so the result is bit-identical under
    /// horizontal and vertical mirroring of the image.
    pub fn mean3x3(&self, x: isize, y: isize) -> T {
        let row = |yy: isize| {
            (self.get_clamped(x - 1, yy) + self.get_clamped(x + 1, yy)) + self.get_clamped(x, yy)
        };
        ((row(y - 1) + row(y + 1)) + row(y)) / T::of(9.0)
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput(format!(
            "raster dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

/// Tri-valued pixel: crossing with warp on top, background, crossing with weft on top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Tri {
    Zero,
    #[default]
    Half,
    One,
}

impl Tri {
    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Tri::Zero
        } else {
            Tri::One
        }
    }

    /// `Some(0)`/`Some(1)` for crossing pixels, `None` for background.
    pub fn bit(self) -> Option<u8> {
        match self {
            Tri::Zero => Some(0),
            Tri::One => Some(1),
            Tri::Half => None,
        }
    }

    pub fn is_background(self) -> bool {
        self == Tri::Half
    }

    pub fn value<T: Scalar>(self) -> T {
        match self {
            Tri::Zero => T::zero(),
            Tri::Half => T::half(),
            Tri::One => T::one(),
        }
    }

    /// Exact inverse of [`Tri::value`]; any other value is rejected.
    pub fn from_value<T: Scalar>(v: T) -> Option<Self> {
        if v == T::zero() {
            Some(Tri::Zero)
        } else if v == T::half() {
            Some(Tri::Half)
        } else if v == T::one() {
            Some(Tri::One)
        } else {
            None
        }
    }
}

pub type TriImage = Raster<Tri>;
pub type BinaryMask = Raster<bool>;

impl TriImage {
    pub fn to_gray<T: Scalar>(&self) -> Raster<T> {
        self.map(Tri::value)
    }
}

/// Connected-component labels; 0 is background, regions are `1..=count`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub labels: Raster<u32>,
    pub count: u32,
}

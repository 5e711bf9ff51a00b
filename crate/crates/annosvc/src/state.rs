//! Editable annotation state and the edits a client may apply to it.

use serde::{Deserialize, Serialize};
use weftcodec::pattern::nearest_crossing;
use weftcodec::pre::initial_crossings;
use weftcodec::{CrossPoint, GrayImage, RepColors, YarnGrid};

use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationState {
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub grid: YarnGrid,
    pub crossings: Vec<CrossPoint>,
    pub colors: RepColors,
    /// Bumped by exactly one for every applied edit.
    pub revision: u64,
    /// Set when automatic initialization could not complete.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Edit {
    AddWarp { x: f64 },
    AddWeft { y: f64 },
    MoveWarp { index: usize, x: f64 },
    MoveWeft { index: usize, y: f64 },
    DeleteWarp { index: usize },
    DeleteWeft { index: usize },
    /// One crossing per grid point, valued from the image.
    RecomputeCrossings,
    /// Toggles the crossing nearest to `(x, y)`.
    FlipNearest { x: f64, y: f64 },
    AddCrossing { x: f64, y: f64, v: u8 },
    /// Removes the crossing nearest to `(x, y)`.
    DeleteCrossing { x: f64, y: f64 },
    MoveCrossing { id: usize, x: f64, y: f64 },
}

fn reject<T>(msg: impl Into<String>) -> Result<T, ServiceError> {
    Err(ServiceError::Rejected(msg.into()))
}

fn check_coord(value: f64, limit: usize, name: &str) -> Result<(), ServiceError> {
    if value.is_finite() && value >= 0.0 && value <= (limit - 1) as f64 {
        Ok(())
    } else {
        reject(format!("{name} = {value} is outside 0..={}", limit - 1))
    }
}

/// Inserts or replaces a yarn position, keeping the list strictly increasing.
fn place(axis: &mut Vec<f64>, replace: Option<usize>, value: f64, name: &str) -> Result<(), ServiceError> {
    if let Some(index) = replace {
        if index >= axis.len() {
            return reject(format!("{name} index {index} out of range (have {})", axis.len()));
        }
        axis.remove(index);
    }
    if axis.contains(&value) {
        return reject(format!("a {name} already lies at {value}"));
    }
    let at = axis.partition_point(|&v| v < value);
    axis.insert(at, value);
    Ok(())
}

fn remove(axis: &mut Vec<f64>, index: usize, name: &str) -> Result<(), ServiceError> {
    if index >= axis.len() {
        return reject(format!("{name} index {index} out of range (have {})", axis.len()));
    }
    axis.remove(index);
    Ok(())
}

impl AnnotationState {
    /// Returns the edited state; `self` is left untouched either way.
    ///
    /// `img` is the pre-processed image the crossings are valued from.
    pub fn apply(&self, edit: &Edit, img: &GrayImage) -> Result<AnnotationState, ServiceError> {
        let mut next = self.clone();
        let (w, h) = (self.width, self.height);
        match *edit {
            Edit::AddWarp { x } => {
                check_coord(x, w, "x")?;
                place(&mut next.grid.warp_x, None, x, "warp")?;
            }
            Edit::AddWeft { y } => {
                check_coord(y, h, "y")?;
                place(&mut next.grid.weft_y, None, y, "weft")?;
            }
            Edit::MoveWarp { index, x } => {
                check_coord(x, w, "x")?;
                place(&mut next.grid.warp_x, Some(index), x, "warp")?;
            }
            Edit::MoveWeft { index, y } => {
                check_coord(y, h, "y")?;
                place(&mut next.grid.weft_y, Some(index), y, "weft")?;
            }
            Edit::DeleteWarp { index } => remove(&mut next.grid.warp_x, index, "warp")?,
            Edit::DeleteWeft { index } => remove(&mut next.grid.weft_y, index, "weft")?,
            Edit::RecomputeCrossings => {
                next.crossings = initial_crossings(img, &next.grid, &next.colors);
            }
            Edit::FlipNearest { x, y } => {
                let Some((i, _)) = nearest_crossing(&next.crossings, x, y) else {
                    return reject("there are no crossings to flip");
                };
                next.crossings[i].v = 1 - next.crossings[i].v;
            }
            Edit::AddCrossing { x, y, v } => {
                check_coord(x, w, "x")?;
                check_coord(y, h, "y")?;
                if v > 1 {
                    return reject(format!("crossing value must be 0 or 1, got {v}"));
                }
                next.crossings.push(CrossPoint::new(x, y, v));
            }
            Edit::DeleteCrossing { x, y } => {
                let Some((i, _)) = nearest_crossing(&next.crossings, x, y) else {
                    return reject("there are no crossings to delete");
                };
                next.crossings.remove(i);
            }
            Edit::MoveCrossing { id, x, y } => {
                check_coord(x, w, "x")?;
                check_coord(y, h, "y")?;
                let Some(p) = next.crossings.get_mut(id) else {
                    return reject(format!("crossing {id} does not exist"));
                };
                p.x = x;
                p.y = y;
            }
        }
        next.revision += 1;
        Ok(next)
    }
}

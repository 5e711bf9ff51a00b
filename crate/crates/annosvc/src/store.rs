//! In-memory session registry with on-disk journaling.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use weftcodec::io::{self, Annotation};
use weftcodec::midrep::{ClassicalParams, MidRepKind};
use weftcodec::postproc::{assign_grid, Candidate};
use weftcodec::pre::{estimate_rep_colors, estimate_yarn_axes, initial_crossings, preprocess};
use weftcodec::{BinaryPattern, GrayImage, RepColors, YarnGrid};

use crate::state::{AnnotationState, Edit};
use crate::ServiceError;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Directory holding the fabric images offered to clients.
    pub image_dir: PathBuf,
    /// Where session journals and exports are written.
    pub state_dir: PathBuf,
    pub classical: ClassicalParams,
    /// Grid-assignment radius used when exporting a pattern.
    pub s: f64,
}

impl ServiceConfig {
    pub fn new(image_dir: impl Into<PathBuf>, state_dir: impl Into<PathBuf>) -> Self {
        Self {
            image_dir: image_dir.into(),
            state_dir: state_dir.into(),
            classical: ClassicalParams::default(),
            s: 10.0,
        }
    }
}

struct Session {
    state: AnnotationState,
    /// Pre-processed image that crossings are valued from.
    image: GrayImage,
}

/// Paths written by an export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedFiles {
    pub labels: PathBuf,
    pub annotation: PathBuf,
    pub pattern: PathBuf,
}

/// Builds the starting state of a session from a raw fabric image.
///
/// If colors or yarn axes cannot be estimated the session still opens, with
/// a warning and an empty grid, so the user can lay out yarns by hand.
pub fn initial_state(name: &str, raw: &GrayImage, params: &ClassicalParams) -> Result<(AnnotationState, GrayImage), ServiceError> {
    let pre = preprocess(raw, params.open_radius)?;
    let mut warnings = Vec::new();
    let colors = estimate_rep_colors(&pre, params.warp_shade).unwrap_or_else(|e| {
        warnings.push(e.to_string());
        RepColors { warp: 0.0, weft: 1.0 }
    });
    let grid = if warnings.is_empty() {
        estimate_yarn_axes(&pre, &params.axes).unwrap_or_else(|e| {
            warnings.push(e.to_string());
            YarnGrid::default()
        })
    } else {
        YarnGrid::default()
    };
    let crossings = initial_crossings(&pre, &grid, &colors);
    let state = AnnotationState {
        image: name.to_string(),
        width: pre.width(),
        height: pre.height(),
        grid,
        crossings,
        colors,
        revision: 0,
        warning: (!warnings.is_empty()).then(|| warnings.join("; ")),
    };
    Ok((state, pre))
}

/// Label image, annotation and pattern for a session state.
pub fn export_to(state: &AnnotationState, image: &GrayImage, kind: MidRepKind, s: f64, dir: &Path) -> Result<ExportedFiles, ServiceError> {
    if state.crossings.is_empty() {
        return Err(ServiceError::InvalidState("the session has no crossings to export".into()));
    }
    if state.grid.is_empty() {
        return Err(ServiceError::InvalidState("the session grid needs at least one warp and one weft".into()));
    }
    let labels = kind.build::<f64>(&state.crossings, state.width, state.height)?;
    let candidates: Vec<Candidate> = state
        .crossings
        .iter()
        .enumerate()
        .map(|(i, &point)| Candidate {
            point,
            area: 1,
            label: i as u32 + 1,
        })
        .collect();
    let pattern: BinaryPattern = assign_grid(&candidates, &state.grid, image, &state.colors, s)?;

    fs::create_dir_all(dir).map_err(|e| weftcodec::Error::io(dir, e))?;
    let kind_name = match kind {
        MidRepKind::Impulse => "impulse",
        MidRepKind::Gaussian { .. } => "gaussian",
        MidRepKind::Box { .. } => "box",
    };
    let files = ExportedFiles {
        labels: dir.join(format!("labels_{kind_name}.png")),
        annotation: dir.join("annotation.json"),
        pattern: dir.join("pattern.pbm"),
    };
    io::save_gray_png(&labels, &files.labels)?;
    Annotation::new(&state.image, &state.grid, &state.crossings, state.colors).save(&files.annotation)?;
    io::save_pattern(&pattern, &files.pattern)?;
    Ok(files)
}

pub struct SessionStore {
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
}

impl SessionStore {
    pub fn new(config: ServiceConfig) -> Result<Self, ServiceError> {
        fs::create_dir_all(&config.state_dir).map_err(|e| weftcodec::Error::io(&config.state_dir, e))?;
        Ok(Self {
            config,
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    /// PNG file names in the image directory, sorted.
    pub fn list_images(&self) -> Result<Vec<String>, ServiceError> {
        let dir = &self.config.image_dir;
        let entries = fs::read_dir(dir).map_err(|e| weftcodec::Error::io(dir, e))?;
        let mut names: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().is_ok_and(|t| t.is_file()))
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| n.to_ascii_lowercase().ends_with(".png"))
            .collect();
        names.sort();
        Ok(names)
    }

    /// Resolves an image id to a path; only listed images are reachable.
    pub fn image_path(&self, id: &str) -> Result<PathBuf, ServiceError> {
        if self.list_images()?.iter().any(|n| n == id) {
            Ok(self.config.image_dir.join(id))
        } else {
            Err(ServiceError::UnknownImage(id.to_string()))
        }
    }

    pub fn open_session(&self, image_id: &str) -> Result<(String, AnnotationState), ServiceError> {
        let path = self.image_path(image_id)?;
        let raw: GrayImage = io::load_gray(&path)?;
        let (state, image) = initial_state(image_id, &raw, &self.config.classical)?;
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        self.persist(&id, &state)?;
        self.sessions
            .lock()
            .expect("session map lock")
            .insert(id.clone(), Arc::new(Mutex::new(Session { state: state.clone(), image })));
        Ok((id, state))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions
            .lock()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn state(&self, id: &str) -> Result<AnnotationState, ServiceError> {
        Ok(self.session(id)?.lock().expect("session lock").state.clone())
    }

    /// Applies `edit` if `base_revision` is current. The journal is written
    /// before the new state becomes visible; on any failure nothing changes.
    pub fn apply(&self, id: &str, edit: &Edit, base_revision: u64) -> Result<AnnotationState, ServiceError> {
        let session = self.session(id)?;
        let mut session = session.lock().expect("session lock");
        if session.state.revision != base_revision {
            return Err(ServiceError::Conflict {
                base: base_revision,
                current: session.state.revision,
            });
        }
        let next = session.state.apply(edit, &session.image)?;
        self.persist(id, &next)?;
        session.state = next.clone();
        Ok(next)
    }

    pub fn export(&self, id: &str, kind: MidRepKind) -> Result<ExportedFiles, ServiceError> {
        let session = self.session(id)?;
        let session = session.lock().expect("session lock");
        export_to(&session.state, &session.image, kind, self.config.s, &self.config.state_dir.join(id))
    }

    pub fn journal_path(&self, id: &str) -> PathBuf {
        self.config.state_dir.join(format!("{id}.json"))
    }

    fn persist(&self, id: &str, state: &AnnotationState) -> Result<(), ServiceError> {
        let json = serde_json::to_string_pretty(state).expect("state serializes") + "\n";
        io::write_atomic(&self.journal_path(id), json.as_bytes())?;
        Ok(())
    }
}

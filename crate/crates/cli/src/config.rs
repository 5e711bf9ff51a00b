//! Flat `key = value` configuration file shared by all subcommands.

use std::path::Path;

use serde::Deserialize;
use weftcodec::postproc::DecodeConfig;
use weftcodec::pre::WarpShade;
use weftcodec::weavesim::RenderParams;
use weftcodec::{Error, Result};

/// Every key is optional; missing keys keep their built-in defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolConfig {
    // Decoding.
    pub s: Option<f64>,
    pub low_threshold: Option<f64>,
    pub high_threshold: Option<f64>,
    pub smooth_halfwidth: Option<usize>,
    pub border_margin: Option<f64>,
    pub open_radius: Option<f64>,
    pub log_sigma: Option<f64>,
    pub axis_smooth_halfwidth: Option<usize>,
    pub warp_shade: Option<WarpShade>,
    pub box_window: Option<usize>,
    // Rendering.
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub warp_spacing: Option<f64>,
    pub weft_spacing: Option<f64>,
    pub yarn_width_ratio: Option<f64>,
    pub jitter_amp: Option<f64>,
    pub jitter_wavelength: Option<f64>,
    pub warp_color: Option<f64>,
    pub weft_color: Option<f64>,
    pub background: Option<f64>,
    pub fiber_noise_density: Option<f64>,
    pub seed: Option<u64>,
    pub density: Option<f64>,
    // Batch processing.
    pub jobs: Option<usize>,
}

fn set<T: Copy>(target: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *target = v;
    }
}

impl ToolConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format {
            what: "config",
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Format { what, reason } => Error::Format {
                what,
                reason: format!("{}: {reason}", path.display()),
            },
            other => other,
        })
    }

    /// Decode settings with this file applied. Not validated: flags may still override.
    pub fn decode_config(&self) -> DecodeConfig {
        let mut cfg = DecodeConfig::default();
        set(&mut cfg.s, self.s);
        set(&mut cfg.low_threshold, self.low_threshold);
        set(&mut cfg.high_threshold, self.high_threshold);
        set(&mut cfg.smooth_halfwidth, self.smooth_halfwidth);
        set(&mut cfg.border_margin, self.border_margin);
        set(&mut cfg.classical.open_radius, self.open_radius);
        set(&mut cfg.classical.axes.sigma, self.log_sigma);
        set(&mut cfg.classical.axes.smooth_halfwidth, self.axis_smooth_halfwidth);
        set(&mut cfg.classical.warp_shade, self.warp_shade);
        set(&mut cfg.classical.window, self.box_window);
        cfg
    }

    /// Render settings with this file applied. Not validated: flags may still override.
    pub fn render_params(&self) -> RenderParams {
        let mut p = RenderParams::default();
        set(&mut p.width, self.width);
        set(&mut p.height, self.height);
        set(&mut p.warp_spacing, self.warp_spacing);
        set(&mut p.weft_spacing, self.weft_spacing);
        set(&mut p.yarn_width_ratio, self.yarn_width_ratio);
        set(&mut p.jitter_amp, self.jitter_amp);
        set(&mut p.jitter_wavelength, self.jitter_wavelength);
        set(&mut p.warp_color, self.warp_color);
        set(&mut p.weft_color, self.weft_color);
        set(&mut p.background, self.background);
        set(&mut p.fiber_noise_density, self.fiber_noise_density);
        set(&mut p.seed, self.seed);
        p
    }
}

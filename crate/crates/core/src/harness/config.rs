use std::path::Path;

use serde::Deserialize;

use super::HarnessError;
use crate::geometry::CameraIntrinsics;
use crate::pose_estimation::LmSettings;
use crate::tracking::TrackerConfig;

/// Camera orbit around the model origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSpec {
    pub radius: f64,
    /// Camera height angle above the model's horizontal plane (degrees).
    pub elevation_deg: f64,
    pub start_azimuth_deg: f64,
    pub rate_deg_per_frame: f64,
}

impl Default for OrbitSpec {
    fn default() -> Self {
        Self {
            radius: 150.0,
            elevation_deg: 0.0,
            start_azimuth_deg: 20.0,
            rate_deg_per_frame: 0.5,
        }
    }
}

/// Uniform block in front of the model, grown from a corner of its outline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccluderSpec {
    /// Share of the visible projected edge length the band must cover.
    pub fraction: f64,
    pub intensity: u8,
}

/// Everything a config file can set. Every key is optional.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub intrinsics: CameraIntrinsics,
    pub tracker: TrackerConfig,
    pub orbit: OrbitSpec,
    pub noise_sigma: f64,
    pub occluder: Option<OccluderSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics::qvga(),
            tracker: TrackerConfig::default(),
            orbit: OrbitSpec::default(),
            noise_sigma: 2.0,
            occluder: None,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    fx: Option<f64>,
    fy: Option<f64>,
    cx: Option<f64>,
    cy: Option<f64>,
    width: Option<u32>,
    height: Option<u32>,
    sampling_step: Option<f64>,
    search_range: Option<u32>,
    gradient_threshold: Option<f64>,
    lm_max_iter: Option<u32>,
    lm_lambda0: Option<f64>,
    coast_frames: Option<u32>,
    orbit_radius: Option<f64>,
    orbit_elevation: Option<f64>,
    orbit_start: Option<f64>,
    orbit_rate: Option<f64>,
    noise: Option<f64>,
    occluder_fraction: Option<f64>,
    occluder_intensity: Option<u8>,
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.message().to_string()))?;
        let mut cfg = RunConfig::default();
        let k = cfg.intrinsics;
        cfg.intrinsics = CameraIntrinsics::new(
            raw.fx.unwrap_or(k.fx),
            raw.fy.unwrap_or(k.fy),
            raw.cx.unwrap_or(k.cx),
            raw.cy.unwrap_or(k.cy),
            raw.width.unwrap_or(k.width),
            raw.height.unwrap_or(k.height),
        )
        .map_err(|e| HarnessError::Config(e.to_string()))?;

        let t = &mut cfg.tracker;
        t.sampling_step = raw.sampling_step.unwrap_or(t.sampling_step);
        t.search_range = raw.search_range.unwrap_or(t.search_range);
        t.gradient_threshold = raw.gradient_threshold.unwrap_or(t.gradient_threshold);
        t.coast_frames = raw.coast_frames.unwrap_or(t.coast_frames);
        t.lm = LmSettings {
            max_iterations: raw.lm_max_iter.unwrap_or(t.lm.max_iterations),
            lambda0: raw.lm_lambda0.unwrap_or(t.lm.lambda0),
            ..t.lm.clone()
        };
        t.validate().map_err(HarnessError::Config)?;

        let o = &mut cfg.orbit;
        o.radius = raw.orbit_radius.unwrap_or(o.radius);
        o.elevation_deg = raw.orbit_elevation.unwrap_or(o.elevation_deg);
        o.start_azimuth_deg = raw.orbit_start.unwrap_or(o.start_azimuth_deg);
        o.rate_deg_per_frame = raw.orbit_rate.unwrap_or(o.rate_deg_per_frame);
        if !(o.radius > 0.0) {
            return Err(HarnessError::Config("orbit_radius must be > 0".into()));
        }

        cfg.noise_sigma = raw.noise.unwrap_or(cfg.noise_sigma);
        if !(cfg.noise_sigma >= 0.0) {
            return Err(HarnessError::Config("noise must be >= 0".into()));
        }
        if let Some(fraction) = raw.occluder_fraction {
            if !(0.0..1.0).contains(&fraction) {
                return Err(HarnessError::Config(
                    "occluder_fraction must be in [0, 1)".into(),
                ));
            }
            cfg.occluder = Some(OccluderSpec {
                fraction,
                intensity: raw.occluder_intensity.unwrap_or(200),
            });
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn keys_override_defaults() {
        let cfg = RunConfig::parse(
            "# desk\nfx = 480\nsearch_range = 12\nlm_lambda0 = 0.01\ncoast_frames = 5\n",
        )
        .unwrap();
        assert_eq!(cfg.intrinsics.fx, 480.0);
        assert_eq!(cfg.intrinsics.fy, 500.0);
        assert_eq!(cfg.tracker.search_range, 12);
        assert_eq!(cfg.tracker.lm.lambda0, 0.01);
        assert_eq!(cfg.tracker.coast_frames, 5);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse("fx = -1").is_err());
        assert!(RunConfig::parse("bogus = 3").is_err());
        assert!(RunConfig::parse("fx 500").is_err());
        assert!(RunConfig::parse("sampling_step = 0.5").is_err());
        assert!(RunConfig::parse("occluder_fraction = 1.5").is_err());
    }
}

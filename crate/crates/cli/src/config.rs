//! Run configuration: one TOML file with nested sections, unknown keys
//! rejected, every field defaulted and overridable from the command line.

use serde::Deserialize;
use thiserror::Error;

use q2fmm_core::cost::{ArithmeticCostModel, HardwareKind, HardwareModel};
use q2fmm_core::lattice::{LatticeError, LatticeSpec};
use q2fmm_core::synth::SynthesisOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    pub width: u32,
    pub height: u32,
    pub spinful: bool,
    pub hopping_t: f64,
    pub onsite_v0: f64,
    pub electron_count: u32,
    /// Optional interaction-range truncation in lattice units.
    pub cutoff: Option<f64>,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self {
            width: 4,
            height: 4,
            spinful: false,
            hopping_t: 1.0,
            onsite_v0: 0.0,
            electron_count: 8,
            cutoff: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisSection {
    pub order_p: u32,
    pub eps_b: f64,
    pub use_copy: bool,
    pub use_fanout: bool,
    pub delta_t: f64,
    pub trotter_order: u8,
}

impl Default for SynthesisSection {
    fn default() -> Self {
        let d = SynthesisOptions::default();
        Self {
            order_p: d.order_p,
            eps_b: d.eps_b,
            use_copy: d.use_copy,
            use_fanout: d.use_fanout,
            delta_t: d.delta_t,
            trotter_order: d.trotter_order,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HardwareSection {
    /// `nearest_neighbor`, `shuttling` or `shuttling_fanout`.
    pub kind: String,
    pub shuttle_depth_cost: u64,
    pub fanout_depth_cost: u64,
    /// `as_built` or `literature`.
    pub arithmetic: String,
    pub collective_shuttle: bool,
}

impl Default for HardwareSection {
    fn default() -> Self {
        Self {
            kind: "nearest_neighbor".into(),
            shuttle_depth_cost: 1,
            fanout_depth_cost: 1,
            arithmetic: "as_built".into(),
            collective_shuttle: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub widths: Vec<u32>,
    pub p_values: Vec<u32>,
    /// Sampled states per sweep point.
    pub states: usize,
    pub trotter_steps: Vec<u32>,
    /// Dense-oracle lattice for the Trotter sweep (any small dimensions).
    pub trotter_width: u32,
    pub trotter_height: u32,
    pub t_total: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            widths: vec![4, 8, 16, 32, 64],
            p_values: vec![1, 2, 3, 4, 5],
            states: 50,
            trotter_steps: vec![],
            trotter_width: 3,
            trotter_height: 3,
            t_total: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub jobs: usize,
    pub out_dir: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 1,
            out_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub lattice: LatticeSection,
    pub synthesis: SynthesisSection,
    pub hardware: HardwareSection,
    pub sweep: SweepSection,
    pub run: RunSection,
}

impl RunConfig {
    pub fn load(path: Option<&std::path::Path>) -> Result<Self, ConfigError> {
        let cfg = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                toml::from_str(&text)?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.lattice_spec()?;
        self.hardware_model()?;
        let opts = self.synthesis_options();
        opts.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(xi) = self.lattice.cutoff {
            if xi < 1.0 {
                return Err(ConfigError::Invalid(format!(
                    "cutoff {xi} is below the nearest-neighbor spacing 1"
                )));
            }
        }
        Ok(())
    }

    pub fn lattice_spec(&self) -> Result<LatticeSpec, ConfigError> {
        Ok(LatticeSpec::new(
            self.lattice.width,
            self.lattice.height,
            self.lattice.spinful,
            self.lattice.hopping_t,
            self.lattice.onsite_v0,
            self.lattice.electron_count,
        )?)
    }

    pub fn synthesis_options(&self) -> SynthesisOptions {
        SynthesisOptions {
            order_p: self.synthesis.order_p,
            eps_b: self.synthesis.eps_b,
            use_copy: self.synthesis.use_copy,
            use_fanout: self.synthesis.use_fanout,
            spinful: self.lattice.spinful,
            delta_t: self.synthesis.delta_t,
            trotter_order: self.synthesis.trotter_order,
        }
    }

    pub fn hardware_model(&self) -> Result<HardwareModel, ConfigError> {
        let kind = match self.hardware.kind.as_str() {
            "nearest_neighbor" => HardwareKind::NearestNeighbor2D,
            "shuttling" => HardwareKind::Shuttling,
            "shuttling_fanout" => HardwareKind::ShuttlingFanout,
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown hardware kind {other:?}; expected nearest_neighbor, shuttling or shuttling_fanout"
                )))
            }
        };
        let arithmetic = match self.hardware.arithmetic.as_str() {
            "as_built" => ArithmeticCostModel::AsBuilt,
            "literature" => ArithmeticCostModel::Literature,
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown arithmetic model {other:?}; expected as_built or literature"
                )))
            }
        };
        Ok(HardwareModel {
            kind,
            shuttle_depth_cost: self.hardware.shuttle_depth_cost,
            fanout_depth_cost: self.hardware.fanout_depth_cost,
            arithmetic,
            collective_shuttle: self.hardware.collective_shuttle,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = RunConfig::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.run.seed, 0);
    }

    #[test]
    fn unknown_keys_rejected() {
        let toml = "[lattice]\nwidth = 4\nheight = 4\nwobble = 3\n";
        let err = toml::from_str::<RunConfig>(toml).unwrap_err();
        assert!(err.to_string().contains("wobble"));
    }

    #[test]
    fn bad_lattice_rejected() {
        let toml = "[lattice]\nwidth = 5\nheight = 5\n";
        let cfg: RunConfig = toml::from_str(toml).unwrap();
        assert!(cfg.validate().is_err());
    }
}

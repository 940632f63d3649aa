use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build, InitScheme, Network, NetworkConfig};
use crate::autodiff::ParamVector;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized network definition and parameter values.
///
/// Frozen output weights are regenerated from the seed on load and checked
/// against the stored copy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: NetworkConfig,
    pub init: InitScheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frozen_output: Option<Vec<f64>>,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(net: &Network, theta: &ParamVector) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config: net.config.clone(),
            init: net.init,
            frozen_output: net.frozen_output.clone(),
            params: theta.as_slice().to_vec(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        Ok(ck)
    }

    pub fn restore(&self) -> Result<(Network, ParamVector)> {
        let (net, init) = build(self.config.clone(), self.init)?;
        if net.frozen_output != self.frozen_output {
            return Err(Error::InvalidConfig(
                "frozen output weights do not match the seed".into(),
            ));
        }
        let theta = init.with_data(self.params.clone())?;
        Ok((net, theta))
    }
}

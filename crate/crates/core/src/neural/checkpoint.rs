use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::network::{Architecture, DenseNetwork};
use super::optimizer::{Adam, AdamConfig};
use crate::error::{Error, Result};

/// JSON manifest with the parameters as a base64 blob of little-endian `f64`s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub architecture: Architecture,
    pub step: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<AdamConfig>,
    pub parameters: String,
}

impl Checkpoint {
    pub fn capture(network: &DenseNetwork, optimizer: Option<&Adam>) -> Self {
        let bytes: Vec<u8> = network
            .flat_parameters()
            .iter()
            .flat_map(|p| p.to_le_bytes())
            .collect();
        Self {
            architecture: network.architecture().clone(),
            step: optimizer.map_or(0, Adam::step),
            optimizer: optimizer.map(|o| *o.config()),
            parameters: STANDARD.encode(bytes),
        }
    }

    /// Rebuilds the network, checking it against `expected` when given.
    pub fn restore(&self, expected: Option<&Architecture>) -> Result<DenseNetwork> {
        if let Some(expected) = expected {
            if expected != &self.architecture {
                return Err(Error::Usage(format!(
                    "checkpoint architecture {:?} does not match expected {:?}",
                    self.architecture.sizes, expected.sizes
                )));
            }
        }
        let architecture = Architecture::new(self.architecture.sizes.clone(), self.architecture.activations.clone())?;
        let bytes = STANDARD
            .decode(&self.parameters)
            .map_err(|e| Error::Usage(format!("checkpoint parameter blob is not valid base64: {e}")))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Usage("checkpoint parameter blob length is not a multiple of 8".into()));
        }
        let params: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut network = DenseNetwork::zeros(architecture);
        network.set_flat_parameters(&params)?;
        Ok(network)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn arch() -> Architecture {
        Architecture::new(
            vec![4, 6, 2],
            vec![Activation::Relu, Activation::ScaledTanh { scale: std::f64::consts::PI }],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("actor.json");
        let net = DenseNetwork::new(arch(), &mut ChaCha8Rng::seed_from_u64(1));
        let opt = Adam::new(AdamConfig::default(), &net);
        Checkpoint::capture(&net, Some(&opt)).save(&path).unwrap();
        let restored = Checkpoint::load(&path).unwrap().restore(Some(&arch())).unwrap();
        assert_eq!(restored.flat_parameters(), net.flat_parameters());
        let x = [0.1, -0.2, 0.3, 0.9];
        assert_eq!(restored.predict_one(&x).unwrap(), net.predict_one(&x).unwrap());
    }

    #[test]
    fn architecture_mismatch_is_rejected() {
        let net = DenseNetwork::new(arch(), &mut ChaCha8Rng::seed_from_u64(1));
        let other = Architecture::new(vec![4, 5, 2], vec![Activation::Relu, Activation::Linear]).unwrap();
        assert!(Checkpoint::capture(&net, None).restore(Some(&other)).is_err());
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let net = DenseNetwork::new(arch(), &mut ChaCha8Rng::seed_from_u64(1));
        let mut ckpt = Checkpoint::capture(&net, None);
        ckpt.parameters = STANDARD.encode([0u8; 16]);
        assert!(ckpt.restore(None).is_err());
    }
}

//! Pipeline bundle directory: `cnn.json`, `elm.json`, `manifest.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PipelineConfig, PipelineModel};
use crate::cnn::CnnModel;
use crate::elm::ElmModel;
use crate::{Error, Result, FORMAT_VERSION};

pub const BUNDLE_CNN_FILE: &str = "cnn.json";
pub const BUNDLE_ELM_FILE: &str = "elm.json";
pub const BUNDLE_MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format_version: u32,
    pub architecture: String,
    pub seed: u64,
    pub hyperparameters: PipelineConfig,
    pub threshold: f64,
}

impl PipelineModel {
    /// Writes the three bundle files into `dir`, creating it if needed.
    pub fn save_bundle(&self, dir: &Path, seed: u64, config: &PipelineConfig) -> Result<BundleManifest> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.cnn.save(&dir.join(BUNDLE_CNN_FILE))?;
        self.elm.save(&dir.join(BUNDLE_ELM_FILE))?;
        let manifest = BundleManifest {
            format_version: FORMAT_VERSION,
            architecture: self.cnn.architecture().to_string(),
            seed,
            hyperparameters: config.clone(),
            threshold: self.threshold,
        };
        let path = dir.join(BUNDLE_MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }

    pub fn load_bundle(dir: &Path) -> Result<(Self, BundleManifest)> {
        let path = dir.join(BUNDLE_MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: BundleManifest = serde_json::from_str(&text)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: manifest.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let cnn = CnnModel::load(&dir.join(BUNDLE_CNN_FILE))?;
        if cnn.architecture().to_string() != manifest.architecture {
            return Err(Error::Shape(format!(
                "manifest architecture {} but CNN file holds {}",
                manifest.architecture,
                cnn.architecture()
            )));
        }
        let elm = ElmModel::load(&dir.join(BUNDLE_ELM_FILE))?;
        Ok((Self::new(cnn, elm, manifest.threshold)?, manifest))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::CnnArchitecture;
    use crate::elm::random_elm;
    use crate::numerics::{Matrix, RngStream};

    fn model() -> PipelineModel {
        let mut s = RngStream::new(1, 0);
        let cnn = CnnModel::new(CnnArchitecture::parse("in_2c_2p").unwrap(), 2, &mut s).freeze();
        let n = cnn.feature_dim();
        let (w, b) = random_elm(n, 6, &mut s);
        let x = s.matrix(10, n, 0.0, 1.0);
        let t = crate::elm::one_hot(&[0, 1, 0, 1, 0, 1, 0, 1, 0, 1], 2).unwrap();
        PipelineModel::new(cnn, ElmModel::fit(w, b, &x, &t).unwrap(), 0.4).unwrap()
    }

    #[test]
    fn bundle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = model();
        let config = PipelineConfig::default();
        let written = m.save_bundle(dir.path(), 5, &config).unwrap();
        let (loaded, manifest) = PipelineModel::load_bundle(dir.path()).unwrap();
        assert_eq!(loaded, m);
        assert_eq!(manifest, written);
        assert_eq!(manifest.architecture, "in_2c_2p");
        let img = Matrix::from_fn(32, 32, |y, x| ((y + x) % 7) as f64 / 7.0);
        assert_eq!(loaded.predict_epg(&img).unwrap(), m.predict_epg(&img).unwrap());
    }

    #[test]
    fn missing_bundle_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        model().save_bundle(dir.path(), 5, &PipelineConfig::default()).unwrap();
        std::fs::remove_file(dir.path().join(BUNDLE_ELM_FILE)).unwrap();
        assert!(matches!(PipelineModel::load_bundle(dir.path()), Err(Error::Io { .. })));
    }

    #[test]
    fn unfrozen_cnn_rejected() {
        let mut s = RngStream::new(1, 0);
        let cnn = CnnModel::new(CnnArchitecture::parse("in_2c_2p").unwrap(), 2, &mut s);
        let m = model();
        assert!(matches!(PipelineModel::new(cnn, m.elm, 0.5), Err(Error::State(_))));
    }
}

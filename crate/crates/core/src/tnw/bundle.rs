//! Model directory: `manifest.json`, `kernel.json` (network checkpoint) and
//! `control.csv` / `treatment.csv` holding the stored rows with normalized
//! outcomes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{FeatureScaler, TnwModel};
use crate::datagen::{read_csv_path, write_csv_path, Group, GroupNorm};
use crate::nn::KernelMLP;
use crate::{Error, Result};

const BUNDLE_FORMAT: &str = "tnw-model/1";

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    kernel: String,
    control: String,
    treatment: String,
    scaler: FeatureScaler,
    norm: GroupNorm,
}

impl TnwModel {
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = Manifest {
            format: BUNDLE_FORMAT.into(),
            kernel: "kernel.json".into(),
            control: "control.csv".into(),
            treatment: "treatment.csv".into(),
            scaler: self.scaler().clone(),
            norm: *self.norm(),
        };
        self.kernel().save_checkpoint(&dir.join(&manifest.kernel))?;
        write_csv_path(self.stored(Group::Control), &dir.join(&manifest.control))?;
        write_csv_path(self.stored(Group::Treatment), &dir.join(&manifest.treatment))?;
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.format != BUNDLE_FORMAT {
            return Err(Error::Parse(format!("unsupported model format `{}`", manifest.format)));
        }
        let kernel = KernelMLP::load_checkpoint(&dir.join(&manifest.kernel))?;
        let control = read_csv_path(&dir.join(&manifest.control))?;
        let treatment = read_csv_path(&dir.join(&manifest.treatment))?;
        TnwModel::new(kernel, manifest.scaler, manifest.norm, control, treatment)
    }
}

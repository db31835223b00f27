use serde::{Deserialize, Serialize};

use super::model_id::ModelId;
use crate::baselines::MinLeaf;
use crate::datagen::Family;
use crate::tnw::TnwConfig;
use crate::{Error, Result};

/// Hyperparameter grids searched for the baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOverrides {
    pub forest_trees: Vec<usize>,
    pub forest_depths: Vec<usize>,
    pub forest_min_leaf: Vec<MinLeaf>,
    pub forest_bootstrap: bool,
    pub bandwidths: Vec<f64>,
}

impl Default for GridOverrides {
    fn default() -> Self {
        let mut bandwidths: Vec<f64> = (-8..=10).map(|i| 10f64.powi(i)).collect();
        bandwidths.extend([0.5, 5.0, 50.0, 100.0, 200.0, 500.0, 700.0]);
        GridOverrides {
            forest_trees: vec![10, 50, 100, 300],
            forest_depths: vec![2, 3, 4, 5, 6, 7],
            forest_min_leaf: vec![
                MinLeaf::Count(1),
                MinLeaf::Fraction(0.05),
                MinLeaf::Fraction(0.1),
                MinLeaf::Fraction(0.2),
            ],
            forest_bootstrap: true,
            bandwidths,
        }
    }
}

/// One experiment cell: a family, a training-set shape, the models to run
/// and how many replications to average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub family: Family,
    /// Training controls.
    pub c: usize,
    /// Treatments per control.
    pub ratio: f64,
    /// Feature dimension.
    pub d: usize,
    pub models: Vec<ModelId>,
    pub tnw: TnwConfig,
    pub replications: usize,
    pub base_seed: u64,
    pub noise_std: f64,
    pub val_fraction: f64,
    pub test_points: usize,
    pub grids: GridOverrides,
    /// Write wall-clock seconds into the results file. Off by default so
    /// that results files are byte-reproducible; timings always go to a
    /// separate file.
    pub inline_timing: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            family: Family::Spiral,
            c: 100,
            ratio: 0.1,
            d: 10,
            models: ModelId::ALL.to_vec(),
            tnw: TnwConfig::default(),
            replications: 10,
            base_seed: 0,
            noise_std: 0.0,
            val_fraction: 0.2,
            test_points: crate::datagen::TEST_POINTS,
            grids: GridOverrides::default(),
            inline_timing: false,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.models.is_empty() {
            return Err(Error::invalid("no models selected"));
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::invalid(format!("ratio {} outside (0, 1]", self.ratio)));
        }
        if self.c < 10 {
            return Err(Error::invalid("at least 10 controls are required"));
        }
        if self.d == 0 || self.test_points == 0 {
            return Err(Error::invalid("d and test_points must be positive"));
        }
        Ok(())
    }

    /// Loss coefficient used for TNW: the configured value or the family default.
    pub fn alpha(&self) -> f64 {
        self.tnw.alpha_or(self.family.default_alpha())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Number of training controls.
    Controls,
    /// Treatments per control.
    Ratio,
    /// TNW loss coefficient.
    Alpha,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Controls => "controls",
            Axis::Ratio => "ratio",
            Axis::Alpha => "alpha",
        }
    }

    /// `base` with the axis set to `value`.
    pub fn apply(self, base: &ExperimentSpec, value: f64) -> Result<ExperimentSpec> {
        let mut spec = base.clone();
        match self {
            Axis::Controls => {
                if value < 10.0 || value.fract() != 0.0 {
                    return Err(Error::invalid(format!(
                        "controls value {value} must be an integer ≥ 10"
                    )));
                }
                spec.c = value as usize;
            }
            Axis::Ratio => {
                if !(value > 0.0 && value <= 1.0) {
                    return Err(Error::invalid(format!("ratio value {value} outside (0, 1]")));
                }
                spec.ratio = value;
            }
            Axis::Alpha => {
                if !(value >= 0.0) || !value.is_finite() {
                    return Err(Error::invalid(format!("alpha value {value} must be non-negative")));
                }
                spec.tnw.alpha = Some(value);
            }
        }
        Ok(spec)
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "controls" => Ok(Axis::Controls),
            "ratio" => Ok(Axis::Ratio),
            "alpha" => Ok(Axis::Alpha),
            _ => Err(Error::Unknown {
                kind: "axis",
                name: s.into(),
            }),
        }
    }
}

/// A sweep over one axis. As a TOML file:
///
/// ```toml
/// axis = "controls"
/// values = [100, 250, 500]
///
/// [experiment]
/// family = "spiral"
/// replications = 5
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    #[serde(default)]
    pub experiment: ExperimentSpec,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("sweep needs at least one axis value"));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("sweep values must be strictly increasing"));
        }
        for &v in &self.values {
            self.axis.apply(&self.experiment, v)?.validate()?;
        }
        Ok(())
    }

    /// Parses a config file. Without `axis` and `values` the file describes
    /// a single experiment, run as a one-point sweep over its own `c`.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let raw: ConfigFile = toml::from_str(s)?;
        let spec = match (raw.axis, raw.values) {
            (Some(axis), Some(values)) => SweepSpec {
                axis,
                values,
                experiment: raw.experiment,
            },
            (None, None) => SweepSpec::single(raw.experiment),
            _ => return Err(Error::invalid("`axis` and `values` must be given together")),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_toml_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// A single-point sweep that runs `experiment` as configured.
    pub fn single(experiment: ExperimentSpec) -> Self {
        SweepSpec {
            axis: Axis::Controls,
            values: vec![experiment.c as f64],
            experiment,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    axis: Option<Axis>,
    values: Option<Vec<f64>>,
    #[serde(default)]
    experiment: ExperimentSpec,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tnw::SubsetSize;

    #[test]
    fn parses_a_sweep_file() {
        let s = SweepSpec::from_toml_str(
            r#"
            axis = "controls"
            values = [100, 250, 500]

            [experiment]
            family = "power"
            models = ["TNW", "X-RF"]
            replications = 3

            [experiment.tnw]
            epochs = 5
            m = 0.5
            n = 40
            "#,
        )
        .unwrap();
        assert_eq!(s.values, vec![100.0, 250.0, 500.0]);
        assert_eq!(s.experiment.family, Family::Power);
        assert_eq!(s.experiment.models, vec![ModelId::Tnw, ModelId::XRf]);
        assert_eq!(s.experiment.tnw.n, SubsetSize::Count(40));
        assert_eq!(s.experiment.tnw.m, SubsetSize::Fraction(0.5));
        assert_eq!(s.experiment.grids, GridOverrides::default());
    }

    #[test]
    fn rejects_bad_sweeps() {
        assert!(SweepSpec::from_toml_str("axis = \"ratio\"\nvalues = [0.2, 0.1]").is_err());
        assert!(SweepSpec::from_toml_str("axis = \"ratio\"\nvalues = [0.5, 1.5]").is_err());
        assert!(SweepSpec::from_toml_str("axis = \"alpha\"\nvalues = []").is_err());
        assert!(SweepSpec::from_toml_str("axis = \"controls\"\nvalues = [5]").is_err());
        assert!(SweepSpec::from_toml_str("axis = \"depth\"\nvalues = [1]").is_err());
        assert!(SweepSpec::from_toml_str("axis = \"alpha\"\nvalues = [0]\nbogus = 1").is_err());
        assert!(SweepSpec::from_toml_str("axis = \"alpha\"").is_err());
    }

    #[test]
    fn experiment_only_file_is_a_single_cell() {
        let s = SweepSpec::from_toml_str("[experiment]\nc = 250\nfamily = \"indicator\"").unwrap();
        assert_eq!(s.axis, Axis::Controls);
        assert_eq!(s.values, vec![250.0]);
        assert_eq!(s.experiment.family, Family::Indicator);
        assert_eq!(
            SweepSpec::from_toml_str("").unwrap().experiment,
            ExperimentSpec::default()
        );
    }

    #[test]
    fn grid_cardinalities() {
        let g = GridOverrides::default();
        assert_eq!(
            g.forest_trees.len() * g.forest_depths.len() * g.forest_min_leaf.len(),
            96
        );
        assert_eq!(g.bandwidths.len(), 26);
    }
}

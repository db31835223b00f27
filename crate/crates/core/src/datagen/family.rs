use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Group};
use crate::nn::Matrix;
use crate::rng::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Spiral,
    Logarithmic,
    Power,
    Indicator,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Spiral, Family::Logarithmic, Family::Power, Family::Indicator];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Spiral => "spiral",
            Family::Logarithmic => "logarithmic",
            Family::Power => "power",
            Family::Indicator => "indicator",
        }
    }

    /// Interval of the latent parameter `t`; `None` for the indicator family.
    pub fn latent_range(self) -> Option<(f64, f64)> {
        match self {
            Family::Spiral => Some((0.0, 10.0)),
            Family::Logarithmic => Some((0.5, 5.0)),
            Family::Power => Some((0.0, 5.0)),
            Family::Indicator => None,
        }
    }

    /// Default treatment-loss coefficient for the trainable-kernel model.
    pub fn default_alpha(self) -> f64 {
        match self {
            Family::Spiral => 0.1,
            _ => 0.5,
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spiral" => Ok(Family::Spiral),
            "logarithmic" | "log" => Ok(Family::Logarithmic),
            "power" => Ok(Family::Power),
            "indicator" => Ok(Family::Indicator),
            _ => Err(Error::Unknown {
                kind: "family",
                name: s.to_string(),
            }),
        }
    }
}

// Sampling intervals per family.
const SPIRAL_CONTROL: (f64, f64) = (1.0, 4.0);
const SPIRAL_TREATMENT: (f64, f64) = (8.0, 10.0);
const LOG_A_MAGNITUDE: (f64, f64) = (1.0, 4.0);
const LOG_B_CONTROL: (f64, f64) = (1.0, 4.0);
const LOG_B_TREATMENT: (f64, f64) = (-4.0, -1.0);
const POWER_A_CONTROL: (f64, f64) = (1.0, 2.0);
const POWER_B_CONTROL: (f64, f64) = (0.25, 1.0);
const POWER_A_TREATMENT: (f64, f64) = (2.0, 4.0);
const POWER_B_TREATMENT: (f64, f64) = (1.0, 2.0);
const POWER_CENTER: f64 = 2.5;
const INDICATOR_BETA: (f64, f64) = (-5.0, 5.0);
const INDICATOR_X: (f64, f64) = (-1.0, 1.0);

/// Per-replication parameters of a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FamilyParams {
    Spiral {
        a_c: f64,
        b_c: f64,
        a_t: f64,
        b_t: f64,
    },
    Logarithmic {
        /// Feature scales, shared by both groups.
        a: Vec<f64>,
        b_c: f64,
        b_t: f64,
    },
    Power {
        a_c: f64,
        b_c: f64,
        a_t: f64,
        b_t: f64,
        s: f64,
    },
    Indicator {
        beta: Vec<f64>,
    },
}

fn uniform(rng: &mut Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.random_range(lo..=hi)
}

fn within(v: f64, (lo, hi): (f64, f64)) -> bool {
    (lo..=hi).contains(&v)
}

impl FamilyParams {
    pub fn family(&self) -> Family {
        match self {
            FamilyParams::Spiral { .. } => Family::Spiral,
            FamilyParams::Logarithmic { .. } => Family::Logarithmic,
            FamilyParams::Power { .. } => Family::Power,
            FamilyParams::Indicator { .. } => Family::Indicator,
        }
    }

    pub fn sample(family: Family, d: usize, rng: &mut Rng) -> Self {
        match family {
            Family::Spiral => FamilyParams::Spiral {
                a_c: uniform(rng, SPIRAL_CONTROL),
                b_c: uniform(rng, SPIRAL_CONTROL),
                a_t: uniform(rng, SPIRAL_TREATMENT),
                b_t: uniform(rng, SPIRAL_TREATMENT),
            },
            Family::Logarithmic => {
                let a = (0..d)
                    .map(|_| {
                        let m = uniform(rng, LOG_A_MAGNITUDE);
                        if rng.random_bool(0.5) {
                            m
                        } else {
                            -m
                        }
                    })
                    .collect();
                FamilyParams::Logarithmic {
                    a,
                    b_c: uniform(rng, LOG_B_CONTROL),
                    b_t: uniform(rng, LOG_B_TREATMENT),
                }
            }
            Family::Power => FamilyParams::Power {
                a_c: uniform(rng, POWER_A_CONTROL),
                b_c: uniform(rng, POWER_B_CONTROL),
                a_t: uniform(rng, POWER_A_TREATMENT),
                b_t: uniform(rng, POWER_B_TREATMENT),
                s: POWER_CENTER,
            },
            Family::Indicator => FamilyParams::Indicator {
                beta: (0..d).map(|_| uniform(rng, INDICATOR_BETA)).collect(),
            },
        }
    }

    /// Checks every parameter against its sampling interval.
    pub fn check_ranges(&self) -> Result<()> {
        let ok = match self {
            FamilyParams::Spiral { a_c, b_c, a_t, b_t } => {
                within(*a_c, SPIRAL_CONTROL)
                    && within(*b_c, SPIRAL_CONTROL)
                    && within(*a_t, SPIRAL_TREATMENT)
                    && within(*b_t, SPIRAL_TREATMENT)
            }
            FamilyParams::Logarithmic { a, b_c, b_t } => {
                a.iter().all(|v| within(v.abs(), LOG_A_MAGNITUDE))
                    && within(*b_c, LOG_B_CONTROL)
                    && within(*b_t, LOG_B_TREATMENT)
            }
            FamilyParams::Power { a_c, b_c, a_t, b_t, s } => {
                within(*a_c, POWER_A_CONTROL)
                    && within(*b_c, POWER_B_CONTROL)
                    && within(*a_t, POWER_A_TREATMENT)
                    && within(*b_t, POWER_B_TREATMENT)
                    && *s == POWER_CENTER
            }
            FamilyParams::Indicator { beta } => beta.iter().all(|&b| within(b, INDICATOR_BETA)),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("family parameters out of range: {self:?}")))
        }
    }

    fn check_shape(&self, d: usize) -> Result<()> {
        match self {
            FamilyParams::Logarithmic { a, .. } if a.len() != d => Err(Error::Dimension {
                context: "logarithmic feature scales",
                expected: d,
                actual: a.len(),
            }),
            FamilyParams::Indicator { beta } if beta.len() != d => Err(Error::Dimension {
                context: "indicator beta",
                expected: d,
                actual: beta.len(),
            }),
            FamilyParams::Indicator { .. } if d < 2 => {
                Err(Error::invalid("indicator family needs at least 2 features"))
            }
            FamilyParams::Power { b_c, b_t, .. } if !(*b_c > 0.0 && *b_t > 0.0) => {
                Err(Error::invalid("power family width b must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Everything needed to regenerate a replication's data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub d: usize,
    pub noise_std: f64,
    pub seed: u64,
    pub params: FamilyParams,
}

impl GeneratorSpec {
    /// Draws fresh family parameters from `seed`.
    pub fn sample(family: Family, d: usize, noise_std: f64, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, &[rng::label("family-params")]);
        let params = FamilyParams::sample(family, d, &mut rng);
        Self::with_params(d, noise_std, seed, params)
    }

    /// Uses explicit parameters; only shapes and signs are validated.
    pub fn with_params(d: usize, noise_std: f64, seed: u64, params: FamilyParams) -> Result<Self> {
        if d < 1 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        if !(noise_std >= 0.0) || !noise_std.is_finite() {
            return Err(Error::invalid("noise_std must be finite and non-negative"));
        }
        params.check_shape(d)?;
        Ok(GeneratorSpec {
            family: params.family(),
            d,
            noise_std,
            seed,
            params,
        })
    }

    pub fn oracle(&self) -> TruthOracle {
        TruthOracle {
            params: self.params.clone(),
        }
    }

    /// `count` rows of `group`, drawn from the stream labelled `stream`.
    pub fn generate(&self, count: usize, group: Group, stream: u64) -> Result<Dataset> {
        let mut rng = rng::stream(self.seed, &[rng::label("rows"), stream, group as u64]);
        match self.family {
            Family::Spiral => gen_spiral(self, count, group, &mut rng),
            Family::Logarithmic => gen_logarithmic(self, count, group, &mut rng),
            Family::Power => gen_power(self, count, group, &mut rng),
            Family::Indicator => gen_indicator(self, count, group, &mut rng),
        }
    }
}

/// Noise-free response functions of a replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthOracle {
    params: FamilyParams,
}

impl TruthOracle {
    pub fn params(&self) -> &FamilyParams {
        &self.params
    }

    /// Noise-free response of `group` at a point. Latent-driven families
    /// read `latent_t`; the indicator family reads `features`.
    pub fn response(&self, group: Group, features: &[f64], latent_t: Option<f64>) -> Result<f64> {
        let need_t = || {
            latent_t
                .ok_or_else(|| Error::invalid(format!("{} family needs the latent parameter t", self.params.family())))
        };
        let treated = group == Group::Treatment;
        Ok(match &self.params {
            FamilyParams::Spiral { a_c, b_c, a_t, b_t } => {
                let t = need_t()?;
                let (a, b) = if treated { (a_t, b_t) } else { (a_c, b_c) };
                a * t + b
            }
            FamilyParams::Logarithmic { b_c, b_t, .. } => {
                let t = need_t()?;
                let b = if treated { b_t } else { b_c };
                b * (t.ln() + t.sin())
            }
            FamilyParams::Power { a_c, b_c, a_t, b_t, s } => {
                let t = need_t()?;
                let (a, b) = if treated { (a_t, b_t) } else { (a_c, b_c) };
                a * (-(t - s).powi(2) / b).exp()
            }
            FamilyParams::Indicator { beta } => {
                if features.len() != beta.len() {
                    return Err(Error::Dimension {
                        context: "indicator features",
                        expected: beta.len(),
                        actual: features.len(),
                    });
                }
                let mut y: f64 = features.iter().zip(beta).map(|(x, b)| x * b).sum();
                if features[0] > 0.5 {
                    y += 5.0;
                }
                if treated && features[1] > 0.1 {
                    y += 8.0;
                }
                y
            }
        })
    }

    pub fn g0(&self, features: &[f64], latent_t: Option<f64>) -> Result<f64> {
        self.response(Group::Control, features, latent_t)
    }

    pub fn g1(&self, features: &[f64], latent_t: Option<f64>) -> Result<f64> {
        self.response(Group::Treatment, features, latent_t)
    }
}

/// `τ = g1 − g0` at a point.
pub fn true_cate(oracle: &TruthOracle, features: &[f64], latent_t: Option<f64>) -> Result<f64> {
    Ok(oracle.g1(features, latent_t)? - oracle.g0(features, latent_t)?)
}

/// `(t sin(t), t cos(t), …, t sin(kt), t cos(kt))`, truncated to `d` entries
/// so that odd `d` ends with `t sin(⌈d/2⌉ t)`.
pub fn spiral_features(t: f64, d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| {
            let k = (i / 2 + 1) as f64;
            if i % 2 == 0 {
                t * (k * t).sin()
            } else {
                t * (k * t).cos()
            }
        })
        .collect()
}

/// One-based feature numbers `i` with `0.8 < i/√d < 1.6`; in the power
/// family these are replaced by standard normal draws.
pub fn power_noise_features(d: usize) -> Vec<usize> {
    let root = (d as f64).sqrt();
    (1..=d)
        .filter(|&i| {
            let r = i as f64 / root;
            r > 0.8 && r < 1.6
        })
        .collect()
}

fn noisy(spec: &GeneratorSpec, rng: &mut Rng, y: f64) -> f64 {
    if spec.noise_std > 0.0 {
        let e: f64 = StandardNormal.sample(rng);
        y + spec.noise_std * e
    } else {
        y
    }
}

fn expect_family(spec: &GeneratorSpec, family: Family) -> Result<()> {
    if spec.family != family {
        return Err(Error::invalid(format!(
            "generator spec is for the {} family, not {family}",
            spec.family
        )));
    }
    Ok(())
}

fn latent_rows<F>(spec: &GeneratorSpec, count: usize, group: Group, rng: &mut Rng, mut features: F) -> Result<Dataset>
where
    F: FnMut(f64, &mut Rng) -> Vec<f64>,
{
    let range = spec.family.latent_range().expect("latent family");
    let oracle = spec.oracle();
    let mut data = Vec::with_capacity(count * spec.d);
    let mut outcomes = Vec::with_capacity(count);
    let mut ts = Vec::with_capacity(count);
    for _ in 0..count {
        let t = uniform(rng, range);
        let x = features(t, rng);
        let y = oracle.response(group, &x, Some(t))?;
        outcomes.push(noisy(spec, rng, y));
        data.extend(x);
        ts.push(t);
    }
    Dataset::new(
        Matrix::new(count, spec.d, data)?,
        outcomes,
        vec![group; count],
        Some(ts),
    )
}

/// Rows on a `d`-dimensional Archimedean spiral with `y = a t + b`.
pub fn gen_spiral(spec: &GeneratorSpec, count: usize, group: Group, rng: &mut Rng) -> Result<Dataset> {
    expect_family(spec, Family::Spiral)?;
    let d = spec.d;
    latent_rows(spec, count, group, rng, |t, _| spiral_features(t, d))
}

/// `x_k = a_k ln t`, `y = b (ln t + sin t)`.
pub fn gen_logarithmic(spec: &GeneratorSpec, count: usize, group: Group, rng: &mut Rng) -> Result<Dataset> {
    expect_family(spec, Family::Logarithmic)?;
    let FamilyParams::Logarithmic { a, .. } = &spec.params else {
        unreachable!("family checked")
    };
    latent_rows(spec, count, group, rng, |t, _| {
        let l = t.ln();
        a.iter().map(|ak| ak * l).collect()
    })
}

/// `x_i = t^{i/√d}` except the near-linear indices, which are `N(0, 1)`;
/// `y = a exp(−(t − s)² / b)`.
pub fn gen_power(spec: &GeneratorSpec, count: usize, group: Group, rng: &mut Rng) -> Result<Dataset> {
    expect_family(spec, Family::Power)?;
    let d = spec.d;
    let root = (d as f64).sqrt();
    let noise = power_noise_features(d);
    latent_rows(spec, count, group, rng, |t, rng| {
        (1..=d)
            .map(|i| {
                if noise.contains(&i) {
                    StandardNormal.sample(rng)
                } else {
                    t.powf(i as f64 / root)
                }
            })
            .collect()
    })
}

/// `x ~ U[−1, 1]^d`; responses from the indicator oracle.
pub fn gen_indicator(spec: &GeneratorSpec, count: usize, group: Group, rng: &mut Rng) -> Result<Dataset> {
    expect_family(spec, Family::Indicator)?;
    let oracle = spec.oracle();
    let mut data = Vec::with_capacity(count * spec.d);
    let mut outcomes = Vec::with_capacity(count);
    for _ in 0..count {
        let x: Vec<f64> = (0..spec.d).map(|_| uniform(rng, INDICATOR_X)).collect();
        let y = oracle.response(group, &x, None)?;
        outcomes.push(noisy(spec, rng, y));
        data.extend(x);
    }
    Dataset::new(Matrix::new(count, spec.d, data)?, outcomes, vec![group; count], None)
}

use serde::{Deserialize, Serialize};

use crate::baselines::MetaKind;
use crate::{Error, Result};

/// Estimators compared by the harness, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    #[serde(rename = "T-NW")]
    TNw,
    #[serde(rename = "S-NW")]
    SNw,
    #[serde(rename = "X-NW")]
    XNw,
    #[serde(rename = "T-RF")]
    TRf,
    #[serde(rename = "S-RF")]
    SRf,
    #[serde(rename = "X-RF")]
    XRf,
    #[serde(rename = "TNW")]
    Tnw,
}

impl ModelId {
    pub const ALL: [ModelId; 7] = [
        ModelId::TNw,
        ModelId::SNw,
        ModelId::XNw,
        ModelId::TRf,
        ModelId::SRf,
        ModelId::XRf,
        ModelId::Tnw,
    ];

    pub const BASELINES: [ModelId; 6] = [
        ModelId::TNw,
        ModelId::SNw,
        ModelId::XNw,
        ModelId::TRf,
        ModelId::SRf,
        ModelId::XRf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::TNw => "T-NW",
            ModelId::SNw => "S-NW",
            ModelId::XNw => "X-NW",
            ModelId::TRf => "T-RF",
            ModelId::SRf => "S-RF",
            ModelId::XRf => "X-RF",
            ModelId::Tnw => "TNW",
        }
    }

    /// Meta-learner kind and whether the base is a forest; `None` for TNW.
    pub fn meta(self) -> Option<(MetaKind, bool)> {
        match self {
            ModelId::TNw => Some((MetaKind::T, false)),
            ModelId::SNw => Some((MetaKind::S, false)),
            ModelId::XNw => Some((MetaKind::X, false)),
            ModelId::TRf => Some((MetaKind::T, true)),
            ModelId::SRf => Some((MetaKind::S, true)),
            ModelId::XRf => Some((MetaKind::X, true)),
            ModelId::Tnw => None,
        }
    }

    /// Parses a comma-separated list, e.g. `TNW,X-RF`.
    pub fn parse_list(s: &str) -> Result<Vec<ModelId>> {
        let mut out: Vec<ModelId> = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::invalid("model list is empty"));
        }
        Ok(out)
    }
}

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        ModelId::ALL
            .into_iter()
            .find(|m| m.as_str() == norm || (norm == "TNW-CATE" && *m == ModelId::Tnw))
            .ok_or_else(|| Error::Unknown {
                kind: "model",
                name: s.to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for m in ModelId::ALL {
            assert_eq!(m.as_str().parse::<ModelId>().unwrap(), m);
        }
        assert_eq!(
            ModelId::parse_list("x-rf, TNW,T-NW,TNW").unwrap(),
            vec![ModelId::TNw, ModelId::XRf, ModelId::Tnw]
        );
        assert!("Q-RF".parse::<ModelId>().is_err());
        assert!(ModelId::parse_list(" , ").is_err());
    }
}

//! On-disk layout for one generated split:
//!
//! ```text
//! generator.json   family parameters and seed
//! train.csv        control and treatment rows
//! validation.csv
//! test.csv         t,x1..xd,g0,g1,cate (noise-free)
//! ```

use std::io::Write;
use std::path::Path;

use super::dataset::Group;
use super::export::{read_csv_path, write_csv_path};
use super::family::GeneratorSpec;
use super::split::{GroupPair, Split, TestSet};
use crate::{Error, Result};

pub const GENERATOR_FILE: &str = "generator.json";

pub fn write_generator(spec: &GeneratorSpec, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(spec).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_generator(path: &Path) -> Result<GeneratorSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spec: GeneratorSpec =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let checked = GeneratorSpec::with_params(spec.d, spec.noise_std, spec.seed, spec.params)?;
    if checked.family != spec.family {
        return Err(Error::Parse(format!(
            "{}: family `{}` does not match its parameters",
            path.display(),
            spec.family.as_str()
        )));
    }
    Ok(checked)
}

pub fn write_test_csv(test: &TestSet, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    let d = test.features.cols();
    let mut header = String::from("t");
    for k in 1..=d {
        header.push_str(&format!(",x{k}"));
    }
    header.push_str(",g0,g1,cate");
    writeln!(w, "{header}").map_err(io)?;
    for i in 0..test.len() {
        let mut line = test.latent_t.as_ref().map(|t| t[i].to_string()).unwrap_or_default();
        for v in test.features.row(i) {
            line.push(',');
            line.push_str(&v.to_string());
        }
        line.push_str(&format!(",{},{},{}", test.g0[i], test.g1[i], test.true_cate[i]));
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes the split and its generator into `dir`, creating it if needed.
pub fn write_split_dir(dir: &Path, spec: &GeneratorSpec, split: &Split) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_generator(spec, &dir.join(GENERATOR_FILE))?;
    write_csv_path(&split.train.combined()?, &dir.join("train.csv"))?;
    write_csv_path(&split.validation.combined()?, &dir.join("validation.csv"))?;
    write_test_csv(&split.test, &dir.join("test.csv"))
}

fn read_pair(path: &Path) -> Result<GroupPair> {
    let data = read_csv_path(path)?;
    Ok(GroupPair {
        control: data.filter_group(Group::Control),
        treatment: data.filter_group(Group::Treatment),
    })
}

/// Generator plus training and validation partitions of a split directory.
#[derive(Debug, Clone)]
pub struct SplitDir {
    pub generator: GeneratorSpec,
    pub train: GroupPair,
    pub validation: GroupPair,
}

pub fn read_split_dir(dir: &Path) -> Result<SplitDir> {
    let generator = read_generator(&dir.join(GENERATOR_FILE))?;
    let train = read_pair(&dir.join("train.csv"))?;
    let validation = read_pair(&dir.join("validation.csv"))?;
    for (name, pair) in [("train", &train), ("validation", &validation)] {
        for data in [&pair.control, &pair.treatment] {
            if data.is_empty() {
                return Err(Error::invalid(format!("{name}.csv is missing a group")));
            }
            if data.dim() != generator.d {
                return Err(Error::Dimension {
                    context: "split directory features",
                    expected: generator.d,
                    actual: data.dim(),
                });
            }
        }
    }
    Ok(SplitDir {
        generator,
        train,
        validation,
    })
}

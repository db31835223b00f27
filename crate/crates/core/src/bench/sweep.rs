use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;

use super::config::{Axis, SweepSpec};
use super::model_id::ModelId;
use super::replication::{run_replication, ResultRow};
use crate::datagen::Family;
use crate::{Error, Result};

pub const RESULTS_HEADER: &str = "model,axis,value,replication,cate_mse,control_mse,treatment_mse,seconds";
pub const SUMMARY_HEADER: &str = "model,family,axis,value,replications,failed,cate_mse_mean,cate_mse_std,control_mse_mean,control_mse_std,treatment_mse_mean,treatment_mse_std";
const TIMINGS_HEADER: &str = "model,axis,value,replication,seconds";
const FAILURES_HEADER: &str = "model,axis,value,replication,error";

/// Mean and standard deviation over the successful replications of one
/// (axis value, model) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub model: ModelId,
    pub family: Family,
    pub axis: Axis,
    pub value: f64,
    pub replications: usize,
    pub failed: usize,
    pub cate_mse: (f64, f64),
    pub control_mse: (f64, f64),
    pub treatment_mse: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub inline_timing: bool,
}

/// Sample mean and standard deviation (`n − 1` denominator, 0 for one value).
fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups rows by (axis value, model) in first-seen order.
pub fn aggregate(rows: &[ResultRow], family: Family) -> Vec<SummaryRow> {
    let mut keys: Vec<(f64, ModelId)> = Vec::new();
    for r in rows {
        if !keys
            .iter()
            .any(|&(v, m)| v.to_bits() == r.value.to_bits() && m == r.model)
        {
            keys.push((r.value, r.model));
        }
    }
    keys.into_iter()
        .map(|(value, model)| {
            let cell: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.value.to_bits() == value.to_bits() && r.model == model)
                .collect();
            let pick = |f: fn(&ResultRow) -> Option<f64>| -> Vec<f64> { cell.iter().filter_map(|r| f(r)).collect() };
            let cate = pick(|r| r.cate_mse);
            SummaryRow {
                model,
                family,
                axis: cell[0].axis,
                value,
                replications: cate.len(),
                failed: cell.len() - cate.len(),
                cate_mse: mean_std(&cate),
                control_mse: mean_std(&pick(|r| r.control_mse)),
                treatment_mse: mean_std(&pick(|r| r.treatment_mse)),
            }
        })
        .collect()
}

pub fn sweep(spec: &SweepSpec) -> Result<SweepOutput> {
    sweep_with_progress(spec, |_| {})
}

/// Runs every (axis value, replication) cell, possibly in parallel; output
/// order is fixed by (axis value, model, replication) regardless.
pub fn sweep_with_progress<F>(spec: &SweepSpec, progress: F) -> Result<SweepOutput>
where
    F: Fn(&ResultRow) + Sync,
{
    spec.validate()?;
    let reps = spec.experiment.replications;
    let cells: Vec<(usize, f64, usize)> = spec
        .values
        .iter()
        .enumerate()
        .flat_map(|(i, &v)| (0..reps).map(move |r| (i, v, r)))
        .collect();
    let results: Vec<Vec<ResultRow>> = cells
        .par_iter()
        .map(|&(i, value, rep)| {
            let cell_spec = spec.axis.apply(&spec.experiment, value)?;
            let rows = run_replication(&cell_spec, spec.axis, value, i, rep)?;
            rows.iter().for_each(&progress);
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<(usize, ResultRow)> = cells
        .iter()
        .zip(results)
        .flat_map(|(&(i, _, _), rs)| rs.into_iter().map(move |r| (i, r)))
        .collect();
    rows.sort_by_key(|(i, r)| (*i, r.model, r.replication));
    let rows: Vec<ResultRow> = rows.into_iter().map(|(_, r)| r).collect();
    let summary = aggregate(&rows, spec.experiment.family);
    Ok(SweepOutput {
        rows,
        summary,
        inline_timing: spec.experiment.inline_timing,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Per-replication results. The `seconds` column is left empty unless
/// `inline_timing` is set, which keeps the file reproducible byte for byte.
pub fn write_results_csv<W: Write>(mut w: W, rows: &[ResultRow], inline_timing: bool) -> Result<()> {
    let io = |e| Error::io("results", e);
    writeln!(w, "{RESULTS_HEADER}").map_err(io)?;
    for r in rows {
        let seconds = if inline_timing {
            r.seconds.to_string()
        } else {
            String::new()
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.model,
            r.axis,
            r.value,
            r.replication,
            opt(r.cate_mse),
            opt(r.control_mse),
            opt(r.treatment_mse),
            seconds
        )
        .map_err(io)?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(mut w: W, summary: &[SummaryRow]) -> Result<()> {
    let io = |e| Error::io("summary", e);
    writeln!(w, "{SUMMARY_HEADER}").map_err(io)?;
    for s in summary {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            s.model,
            s.family,
            s.axis,
            s.value,
            s.replications,
            s.failed,
            s.cate_mse.0,
            s.cate_mse.1,
            s.control_mse.0,
            s.control_mse.1,
            s.treatment_mse.0,
            s.treatment_mse.1
        )
        .map_err(io)?;
    }
    Ok(())
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad number {field:?}")))
}

pub fn read_summary_csv<R: BufRead>(r: R) -> Result<Vec<SummaryRow>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("summary", e))?;
        let line_no = i + 1;
        if i == 0 {
            if line.trim() != SUMMARY_HEADER {
                return Err(Error::Parse(format!("unexpected summary header {line:?}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(Error::Parse(format!(
                "line {line_no}: expected 12 fields, got {}",
                f.len()
            )));
        }
        let num = |k: usize| parse_f64(f[k], line_no);
        let count = |k: usize| {
            f[k].parse::<usize>()
                .map_err(|_| Error::Parse(format!("line {line_no}: bad count {:?}", f[k])))
        };
        out.push(SummaryRow {
            model: f[0].parse()?,
            family: f[1].parse()?,
            axis: f[2].parse()?,
            value: num(3)?,
            replications: count(4)?,
            failed: count(5)?,
            cate_mse: (num(6)?, num(7)?),
            control_mse: (num(8)?, num(9)?),
            treatment_mse: (num(10)?, num(11)?),
        });
    }
    Ok(out)
}

impl SweepOutput {
    pub fn results_csv(&self) -> String {
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &self.rows, self.inline_timing).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn summary_csv(&self) -> String {
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &self.summary).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn timings_csv(&self) -> String {
        let mut s = format!("{TIMINGS_HEADER}\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.model, r.axis, r.value, r.replication, r.seconds
            ));
        }
        s
    }

    pub fn failures_csv(&self) -> String {
        let mut s = format!("{FAILURES_HEADER}\n");
        for r in self.rows.iter().filter(|r| !r.ok()) {
            let e = r.error.as_deref().unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.model,
                r.axis,
                r.value,
                r.replication,
                csv_field(e)
            ));
        }
        s
    }

    /// Writes `results.csv`, `summary.csv`, `failures.csv` and `timings.csv`
    /// into `dir`. Only the timings differ between identical runs.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("results.csv", self.results_csv()),
            ("summary.csv", self.summary_csv()),
            ("failures.csv", self.failures_csv()),
            ("timings.csv", self.timings_csv()),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(model: ModelId, value: f64, rep: usize, cate: Option<f64>) -> ResultRow {
        ResultRow {
            model,
            axis: Axis::Controls,
            value,
            replication: rep,
            cate_mse: cate,
            control_mse: cate.map(|c| c * 2.0),
            treatment_mse: cate.map(|c| c * 3.0),
            seconds: 1.5,
            error: cate.is_none().then(|| "diverged, \"badly\"".to_string()),
        }
    }

    #[test]
    fn aggregates_mean_and_sample_std() {
        let rows = vec![
            row(ModelId::TRf, 100.0, 0, Some(1.0)),
            row(ModelId::TRf, 100.0, 1, Some(3.0)),
            row(ModelId::TRf, 100.0, 2, None),
            row(ModelId::Tnw, 100.0, 0, Some(0.5)),
        ];
        let s = aggregate(&rows, Family::Spiral);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].cate_mse, (2.0, 2f64.sqrt()));
        assert_eq!(s[0].replications, 2);
        assert_eq!(s[0].failed, 1);
        assert_eq!(s[1].cate_mse, (0.5, 0.0));
        assert_eq!(s[1].treatment_mse, (1.5, 0.0));
    }

    #[test]
    fn results_file_leaves_seconds_blank_by_default() {
        let out = SweepOutput {
            rows: vec![row(ModelId::XRf, 0.1, 0, Some(0.25)), row(ModelId::Tnw, 0.1, 0, None)],
            summary: vec![],
            inline_timing: false,
        };
        let text = out.results_csv();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], RESULTS_HEADER);
        assert_eq!(lines[1], "X-RF,controls,0.1,0,0.25,0.5,0.75,");
        assert_eq!(lines[2], "TNW,controls,0.1,0,,,,");
        assert!(out.failures_csv().contains("\"diverged, \"\"badly\"\"\""));
        assert!(out.timings_csv().contains("X-RF,controls,0.1,0,1.5"));
        let timed = SweepOutput {
            inline_timing: true,
            ..out
        };
        assert!(timed.results_csv().lines().nth(1).unwrap().ends_with(",1.5"));
    }

    #[test]
    fn summary_round_trips() {
        let rows = vec![
            row(ModelId::SNw, 250.0, 0, Some(0.1 + 0.2)),
            row(ModelId::SNw, 250.0, 1, Some(1.0 / 3.0)),
        ];
        let s = aggregate(&rows, Family::Power);
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &s).unwrap();
        assert_eq!(read_summary_csv(&buf[..]).unwrap(), s);
    }
}

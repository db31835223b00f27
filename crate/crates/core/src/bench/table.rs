use std::fmt::Write as _;

use super::config::Axis;
use super::model_id::ModelId;
use super::sweep::SummaryRow;
use crate::datagen::Family;

/// Published CATE MSE for each model and family at 100 controls and 10 %
/// treatments, shown next to measured values for orientation only.
pub fn reference_value(family: Family, model: ModelId) -> Option<f64> {
    let row: [f64; 4] = match model {
        ModelId::TNw => [3.806, 0.377, 1.722, 0.650],
        ModelId::SNw => [3.629, 0.341, 1.719, 0.549],
        ModelId::XNw => [3.279, 0.542, 0.632, 0.353],
        ModelId::TRf => [2.278, 0.051, 2.743, 0.337],
        ModelId::SRf => [2.575, 0.060, 0.839, 0.434],
        ModelId::XRf => [1.385, 0.202, 0.805, 0.061],
        ModelId::Tnw => [0.232, 0.026, 0.353, 0.257],
    };
    let col = match family {
        Family::Spiral => 0,
        Family::Logarithmic => 1,
        Family::Power => 2,
        Family::Indicator => 3,
    };
    Some(row[col])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Cate,
    Control,
    Treatment,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Cate => "cate_mse",
            Metric::Control => "control_mse",
            Metric::Treatment => "treatment_mse",
        }
    }

    fn of(self, s: &SummaryRow) -> (f64, f64) {
        match self {
            Metric::Cate => s.cate_mse,
            Metric::Control => s.control_mse,
            Metric::Treatment => s.treatment_mse,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "cate" | "cate_mse" => Ok(Metric::Cate),
            "control" | "control_mse" => Ok(Metric::Control),
            "treatment" | "treatment_mse" => Ok(Metric::Treatment),
            _ => Err(crate::Error::Unknown {
                kind: "metric",
                name: s.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub family: Family,
    pub axis: Axis,
    pub value: f64,
    pub label: String,
}

/// Models by columns (families or axis values) with the lowest mean of each
/// column flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub metric: Metric,
    pub columns: Vec<Column>,
    pub models: Vec<ModelId>,
    /// `cells[model][column]`: mean and std, `None` when absent or all failed.
    pub cells: Vec<Vec<Option<(f64, f64)>>>,
    pub best: Vec<Vec<bool>>,
    pub with_reference: bool,
}

pub fn emit_table(summary: &[SummaryRow], metric: Metric, with_reference: bool) -> Table {
    let mut columns: Vec<Column> = Vec::new();
    for s in summary {
        let seen = columns
            .iter()
            .any(|c| c.family == s.family && c.axis == s.axis && c.value.to_bits() == s.value.to_bits());
        if !seen {
            columns.push(Column {
                family: s.family,
                axis: s.axis,
                value: s.value,
                label: String::new(),
            });
        }
    }
    let one_per_family = columns
        .iter()
        .enumerate()
        .all(|(i, c)| columns[..i].iter().all(|o| o.family != c.family));
    for c in &mut columns {
        c.label = if one_per_family {
            c.family.to_string()
        } else {
            format!("{} {}={}", c.family, c.axis, c.value)
        };
    }

    let mut models: Vec<ModelId> = summary.iter().map(|s| s.model).collect();
    models.sort();
    models.dedup();

    let cells: Vec<Vec<Option<(f64, f64)>>> = models
        .iter()
        .map(|&m| {
            columns
                .iter()
                .map(|c| {
                    summary
                        .iter()
                        .find(|s| {
                            s.model == m
                                && s.family == c.family
                                && s.axis == c.axis
                                && s.value.to_bits() == c.value.to_bits()
                        })
                        .filter(|s| s.replications > 0)
                        .map(|s| metric.of(s))
                })
                .collect()
        })
        .collect();

    let mut best = vec![vec![false; columns.len()]; models.len()];
    for j in 0..columns.len() {
        let min = cells
            .iter()
            .filter_map(|row| row[j].map(|(m, _)| m))
            .fold(f64::INFINITY, f64::min);
        for (i, row) in cells.iter().enumerate() {
            best[i][j] = row[j].is_some_and(|(m, _)| m == min);
        }
    }

    Table {
        metric,
        columns,
        models,
        cells,
        best,
        with_reference,
    }
}

impl Table {
    fn cell_text(&self, i: usize, j: usize) -> String {
        let mut s = match self.cells[i][j] {
            Some((mean, std)) => format!("{mean:.4} ± {std:.4}"),
            None => "-".to_string(),
        };
        if self.best[i][j] {
            s.push('*');
        }
        if self.with_reference {
            if let Some(r) = reference_value(self.columns[j].family, self.models[i]) {
                let _ = write!(s, " (ref {r:.3})");
            }
        }
        s
    }

    /// Aligned plain-text table; `*` marks the best mean of each column.
    pub fn to_text(&self) -> String {
        let mut grid: Vec<Vec<String>> = Vec::with_capacity(self.models.len() + 1);
        let mut header = vec!["model".to_string()];
        header.extend(self.columns.iter().map(|c| c.label.clone()));
        grid.push(header);
        for (i, m) in self.models.iter().enumerate() {
            let mut line = vec![m.to_string()];
            line.extend((0..self.columns.len()).map(|j| self.cell_text(i, j)));
            grid.push(line);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|k| grid.iter().map(|r| r[k].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = format!("{} (mean ± std over replications, * = best)\n", self.metric.as_str());
        for r in &grid {
            let cells: Vec<String> = r
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    /// One line per (model, column) with full-precision values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,family,axis,value,metric,mean,std,best,reference\n");
        for (i, m) in self.models.iter().enumerate() {
            for (j, c) in self.columns.iter().enumerate() {
                let (mean, std) = match self.cells[i][j] {
                    Some((a, b)) => (a.to_string(), b.to_string()),
                    None => (String::new(), String::new()),
                };
                let reference = if self.with_reference {
                    reference_value(c.family, *m).map(|r| r.to_string()).unwrap_or_default()
                } else {
                    String::new()
                };
                let _ = writeln!(
                    out,
                    "{m},{},{},{},{},{mean},{std},{},{reference}",
                    c.family,
                    c.axis,
                    c.value,
                    self.metric.as_str(),
                    self.best[i][j]
                );
            }
        }
        out
    }
}

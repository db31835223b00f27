//! Delimited text export: header `group,t,x1..xd,y`, one row per example.
//! Values are written in shortest round-trip form, so reading back is exact.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::dataset::{Dataset, Group};
use crate::nn::Matrix;
use crate::{Error, Result};

pub fn write_csv<W: Write>(data: &Dataset, mut out: W) -> std::io::Result<()> {
    let d = data.dim();
    let mut header = String::from("group,t");
    for k in 1..=d {
        header.push_str(&format!(",x{k}"));
    }
    header.push_str(",y");
    writeln!(out, "{header}")?;
    let latent = data.latent_t();
    for i in 0..data.len() {
        let mut line = String::with_capacity(32 * (d + 3));
        line.push_str(data.groups()[i].as_str());
        line.push(',');
        if let Some(t) = latent {
            line.push_str(&t[i].to_string());
        }
        for v in data.features().row(i) {
            line.push(',');
            line.push_str(&v.to_string());
        }
        line.push(',');
        line.push_str(&data.outcomes()[i].to_string());
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_csv_path(data: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(data, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad number `{s}`")))
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Dataset> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty dataset file".into()))?
        .map_err(|e| Error::Parse(e.to_string()))?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 4 || cols[0] != "group" || cols[1] != "t" || cols[cols.len() - 1] != "y" {
        return Err(Error::Parse(format!("unexpected header `{header}`")));
    }
    let d = cols.len() - 3;
    let mut data = Vec::new();
    let mut outcomes = Vec::new();
    let mut groups = Vec::new();
    let mut latent = Vec::new();
    let mut latent_present: Option<bool> = None;
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = n + 2;
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != d + 3 {
            return Err(Error::Parse(format!(
                "line {lineno}: expected {} fields, found {}",
                d + 3,
                fields.len()
            )));
        }
        groups.push(fields[0].parse::<Group>()?);
        let has_t = !fields[1].is_empty();
        match latent_present {
            None => latent_present = Some(has_t),
            Some(p) if p != has_t => {
                return Err(Error::Parse(format!(
                    "line {lineno}: latent t present on some rows only"
                )))
            }
            _ => {}
        }
        if has_t {
            latent.push(parse_f64(fields[1], lineno)?);
        }
        for f in &fields[2..2 + d] {
            data.push(parse_f64(f, lineno)?);
        }
        outcomes.push(parse_f64(fields[d + 2], lineno)?);
    }
    let rows = outcomes.len();
    Dataset::new(
        Matrix::new(rows, d, data)?,
        outcomes,
        groups,
        latent_present.unwrap_or(false).then_some(latent),
    )
}

pub fn read_csv_path(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let ds = Dataset::new(
            Matrix::from_rows(&[[0.1, 1.0 / 3.0], [-2.5e-17, 7.0]]).unwrap(),
            vec![std::f64::consts::PI, -0.0],
            vec![Group::Control, Group::Treatment],
            Some(vec![0.5, 9.999999999999998]),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("group,t,x1,x2,y\n"));
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn missing_latent_round_trips() {
        let ds = Dataset::single_group(
            Matrix::from_rows(&[[1.0], [2.0]]).unwrap(),
            vec![3.0, 4.0],
            Group::Treatment,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        assert_eq!(read_csv(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn rejects_malformed_rows() {
        assert!(read_csv("group,t,x1,y\ncontrol,,1\n".as_bytes()).is_err());
        assert!(read_csv("a,b\n".as_bytes()).is_err());
        assert!(read_csv("group,t,x1,y\nplacebo,,1,2\n".as_bytes()).is_err());
    }
}

//! Plain-text panel files: `#` comment lines, a header
//! `z_1,...,z_m,y_1,...,y_k`, then one row per time period.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{at_path, Error, Result};
use crate::simulate::PanelData;

/// Header line for a panel with `m` instruments and `k` outcomes.
pub fn panel_header(m: usize, k: usize) -> String {
    (1..=m)
        .map(|j| format!("z_{j}"))
        .chain((1..=k).map(|j| format!("y_{j}")))
        .collect::<Vec<_>>()
        .join(",")
}

/// Writes `panel` with each comment on its own `# ` line. Values use the
/// shortest representation that parses back to the same bits.
pub fn write_panel<W: Write>(panel: &PanelData, comments: &[String], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "{}", panel_header(panel.m(), panel.k()))?;
    let mut line = String::new();
    for t in 0..panel.rows() {
        line.clear();
        for (i, v) in panel.z_row(t).iter().chain(panel.y_row(t)).enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_panel(panel: &PanelData, comments: &[String], path: &Path) -> Result<()> {
    write_panel(panel, comments, File::create(path).map_err(at_path(path))?)
}

fn column_counts(header: &csv::StringRecord) -> Result<(usize, usize)> {
    let mut m = 0;
    let mut k = 0;
    for (i, name) in header.iter().enumerate() {
        let name = name.trim();
        let expected_z = format!("z_{}", m + 1);
        let expected_y = format!("y_{}", k + 1);
        if k == 0 && name == expected_z {
            m += 1;
        } else if name == expected_y {
            k += 1;
        } else {
            return Err(Error::Parse(format!(
                "header column {} is '{name}', expected '{}'",
                i + 1,
                if k == 0 { expected_z } else { expected_y }
            )));
        }
    }
    if m == 0 || k == 0 {
        return Err(Error::Parse("header needs at least one z_ and one y_ column".into()));
    }
    Ok((m, k))
}

/// Parses a panel from any reader.
pub fn read_panel<R: Read>(input: R) -> Result<PanelData> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let (m, k) = column_counts(rdr.headers()?)?;
    let mut z = Vec::new();
    let mut y = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != m + k {
            return Err(Error::Parse(format!(
                "data row {} has {} fields, expected {}",
                row + 1,
                rec.len(),
                m + k
            )));
        }
        for (i, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("data row {}: '{field}' is not a number", row + 1)))?;
            if i < m {
                z.push(v);
            } else {
                y.push(v);
            }
        }
    }
    PanelData::new(z, m, y, k)
}

pub fn load_panel(path: &Path) -> Result<PanelData> {
    read_panel(File::open(path).map_err(at_path(path))?)
}

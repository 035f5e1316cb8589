//! CSV encoding of [`DataTable`].
//!
//! Layout: one header row, feature columns first, then `group`, then the
//! label column (`label` or `y`) when present. Reals are written with the
//! shortest representation that parses back to the same `f64`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::table::{DataTable, Group};
use crate::error::{Result, StereoError};

pub const GROUP_COLUMN: &str = "group";
const LABEL_COLUMNS: [&str; 2] = ["label", "y"];

pub fn write_csv<W: Write>(table: &DataTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = table.column_names().iter().map(String::as_str).collect();
    header.push(GROUP_COLUMN);
    if table.label().is_some() {
        header.push(table.label_name());
    }
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..table.n_rows() {
        record.clear();
        record.extend(table.row(i).iter().map(|v| v.to_string()));
        record.push(table.group(i).as_u8().to_string());
        if let Some(l) = table.label() {
            record.push(l[i].to_string());
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<DataTable> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let group_col = header
        .iter()
        .position(|h| h == GROUP_COLUMN)
        .ok_or_else(|| StereoError::structural("csv has no 'group' column"))?;
    let label_col = header
        .iter()
        .position(|h| LABEL_COLUMNS.contains(&h.as_str()));
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&j| j != group_col && Some(j) != label_col)
        .collect();

    let mut features = Vec::new();
    let mut group = Vec::new();
    let mut label = label_col.map(|_| Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |j: usize| -> Result<f64> {
            let raw = rec.get(j).unwrap_or("").trim();
            raw.parse::<f64>().map_err(|_| {
                StereoError::structural(format!(
                    "row {}: cannot parse '{raw}' in column '{}'",
                    line + 1,
                    header[j]
                ))
            })
        };
        for &j in &feature_cols {
            features.push(parse(j)?);
        }
        group.push(Group::try_from(parse(group_col)?)?);
        if let (Some(j), Some(l)) = (label_col, label.as_mut()) {
            l.push(parse(j)?);
        }
    }
    let names = feature_cols.iter().map(|&j| header[j].clone()).collect();
    let table = DataTable::from_flat(names, features, group, label)?;
    Ok(match label_col {
        Some(j) => table.with_label_name(header[j].clone()),
        None => table,
    })
}

pub fn write_csv_file(table: &DataTable, path: &Path) -> Result<()> {
    write_csv(table, File::create(path)?)
}

pub fn read_csv_file(path: &Path) -> Result<DataTable> {
    read_csv(File::open(path)?)
}

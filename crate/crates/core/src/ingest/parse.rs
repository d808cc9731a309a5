use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One NGSIM row, still in the dataset's native feet-based units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub vehicle_id: u32,
    pub frame_id: u64,
    /// Lateral position, ft.
    pub local_x: f64,
    /// Longitudinal position, ft.
    pub local_y: f64,
    /// ft/s
    pub v_vel: f64,
    /// ft/s²
    pub v_acc: f64,
    pub lane_id: u32,
    /// 1 = motorcycle, 2 = car, 3 = truck
    pub v_class: u8,
}

const COLUMNS: [&str; 8] = [
    "Vehicle_ID", "Frame_ID", "Local_X", "Local_Y", "v_Vel", "v_Acc", "Lane_ID", "v_Class",
];

pub fn parse_csv(path: &Path, location: Option<&str>) -> Result<Vec<RawRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_reader(file, path, location)
}

/// Parses NGSIM rows and returns them ordered by vehicle, then frame.
/// Extra columns are ignored. When `location` is given and the file has a
/// `Location` column, only matching rows are kept. Duplicate
/// (vehicle, frame) rows keep their first occurrence.
pub fn parse_reader<R: Read>(reader: R, path: &Path, location: Option<&str>) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let fmt = |line: u64, msg: String| Error::Format {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let headers = rdr.headers().map_err(|e| fmt(1, e.to_string()))?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let mut idx = [0usize; 8];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = find(name).ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })?;
    }
    let loc_idx = location.and_then(|_| find("Location"));
    let width = headers.len();

    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            fmt(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() < width {
            return Err(fmt(line, format!("expected {width} fields, found {}", rec.len())));
        }
        if let (Some(li), Some(want)) = (loc_idx, location) {
            if !rec[li].eq_ignore_ascii_case(want) {
                continue;
            }
        }
        let num = |k: usize| -> Result<f64> {
            let cell = &rec[idx[k]];
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| fmt(line, format!("column `{}`: `{cell}` is not a number", COLUMNS[k])))
        };
        let int = |k: usize| -> Result<u64> {
            let v = num(k)?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(fmt(line, format!("column `{}`: `{v}` is not a non-negative integer", COLUMNS[k])));
            }
            Ok(v as u64)
        };
        out.push(RawRecord {
            vehicle_id: int(0)? as u32,
            frame_id: int(1)?,
            local_x: num(2)?,
            local_y: num(3)?,
            v_vel: num(4)?,
            v_acc: num(5)?,
            lane_id: int(6)? as u32,
            v_class: int(7)? as u8,
        });
    }
    out.sort_by_key(|r| (r.vehicle_id, r.frame_id));
    out.dedup_by_key(|r| (r.vehicle_id, r.frame_id));
    Ok(out)
}

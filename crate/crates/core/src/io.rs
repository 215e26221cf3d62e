//! File formats: field CSV, trajectory directories, energy ledgers and decay
//! reports.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{EnergyLedger, Trajectory};
use crate::grid::Grid;
use crate::harness::{DecayFitReport, GridSpec};
use crate::model::{ModelParams, StateField};

pub const FIELD_HEADER: [&str; 5] = ["x", "v", "u", "z", "y"];
pub const LEDGER_HEADER: [&str; 7] = ["t", "E0", "E1", "E2", "y_l2_sq", "damping_integral", "residual"];
pub const REPORT_HEADER: [&str; 7] = ["norm", "ell", "slope", "predicted", "tolerance", "residual", "pass"];

/// Writes `x,v,u,z,y` rows with round-trip precision.
pub fn write_field_csv<W: Write>(writer: W, state: &StateField) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(FIELD_HEADER)?;
    let x = state.grid().x();
    for (j, x) in x.iter().enumerate() {
        w.write_record([
            x.to_string(),
            state.v()[j].to_string(),
            state.u()[j].to_string(),
            state.z()[j].to_string(),
            state.y()[j].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_rows<R: Read>(reader: R) -> Result<Vec<[f64; 5]>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(FIELD_HEADER) {
        return Err(Error::Parse(format!(
            "expected header x,v,u,z,y, found {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 5 {
            return Err(Error::Parse(format!("row {}: expected 5 fields, found {}", line + 1, rec.len())));
        }
        let mut row = [0.0; 5];
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: {field:?} is not a number", line + 1)))?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("row {}, column {}", line + 1, FIELD_HEADER[k])));
            }
            row[k] = v;
        }
        rows.push(row);
    }
    Ok(rows)
}

fn rows_to_state(rows: &[[f64; 5]], grid: &Grid) -> Result<StateField> {
    if rows.len() != grid.n() {
        return Err(Error::GridMismatch(format!(
            "field has {} rows, grid has N = {}",
            rows.len(),
            grid.n()
        )));
    }
    let tol = 1e-9 * grid.length().max(1.0);
    for (j, (row, x)) in rows.iter().zip(grid.x()).enumerate() {
        if (row[0] - x).abs() > tol {
            return Err(Error::GridMismatch(format!(
                "row {}: x = {} but the grid point is {x}",
                j + 1,
                row[0]
            )));
        }
    }
    let comps: [Vec<f64>; 4] = std::array::from_fn(|k| rows.iter().map(|r| r[k + 1]).collect());
    StateField::from_components(grid.clone(), comps)
}

/// Reads a field and checks it against `grid`.
pub fn read_field_csv<R: Read>(reader: R, grid: &Grid) -> Result<StateField> {
    rows_to_state(&parse_rows(reader)?, grid)
}

/// Reads a field and reconstructs its grid from the samples: `N` rows,
/// uniform ascending `x` starting at `-L/2`.
pub fn read_field_csv_infer<R: Read>(reader: R) -> Result<StateField> {
    let rows = parse_rows(reader)?;
    if rows.len() < 2 {
        return Err(Error::InvalidGrid(format!("{} rows cannot define a grid", rows.len())));
    }
    let n = rows.len();
    let dx = rows[1][0] - rows[0][0];
    if !(dx > 0.0) {
        return Err(Error::InvalidGrid("x must be strictly ascending".into()));
    }
    let grid = Grid::new(dx * n as f64, n)?;
    rows_to_state(&rows, &grid)
}

pub fn save_field(path: &Path, state: &StateField) -> Result<()> {
    write_field_csv(fs::File::create(path)?, state)
}

pub fn load_field(path: &Path) -> Result<StateField> {
    read_field_csv_infer(fs::File::open(path)?)
}

/// Contents of `meta.json` in a trajectory directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub grid: GridSpec,
    pub params: ModelParams,
    pub times: Vec<f64>,
    pub files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
}

impl TrajectoryMeta {
    pub fn from_json(text: &str) -> Result<Self> {
        let meta: Self = serde_json::from_str(text)?;
        meta.grid.build()?;
        if meta.times.len() != meta.files.len() {
            return Err(Error::Parse(format!(
                "{} times for {} snapshot files",
                meta.times.len(),
                meta.files.len()
            )));
        }
        if meta.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parse("snapshot times must be strictly increasing".into()));
        }
        for f in &meta.files {
            if f.contains(['/', '\\']) || f == ".." || f.is_empty() {
                return Err(Error::Parse(format!("snapshot file name {f:?} is not a plain name")));
            }
        }
        Ok(meta)
    }
}

/// Writes `meta.json` and one `snap_XXXX.csv` per snapshot.
pub fn write_trajectory(dir: &Path, traj: &Trajectory, mode: Option<&str>) -> Result<TrajectoryMeta> {
    fs::create_dir_all(dir)?;
    let grid = traj.grid();
    let files: Vec<String> = (0..traj.states.len()).map(|k| format!("snap_{k:04}.csv")).collect();
    for (state, name) in traj.states.iter().zip(&files) {
        save_field(&dir.join(name), state)?;
    }
    let meta = TrajectoryMeta {
        grid: GridSpec {
            length: grid.length(),
            n: grid.n(),
        },
        params: traj.params.clone(),
        times: traj.times.clone(),
        files,
        mode: mode.map(str::to_owned),
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(meta)
}

pub fn read_trajectory(dir: &Path) -> Result<Trajectory> {
    let meta = TrajectoryMeta::from_json(&fs::read_to_string(dir.join("meta.json"))?)?;
    let grid = meta.grid.build()?;
    let states = meta
        .files
        .iter()
        .map(|f| read_field_csv(fs::File::open(dir.join(f))?, &grid))
        .collect::<Result<Vec<_>>>()?;
    if states.is_empty() {
        return Err(Error::InsufficientData("trajectory without snapshots".into()));
    }
    Ok(Trajectory {
        params: meta.params,
        times: meta.times,
        states,
        steps: None,
    })
}

pub fn write_ledger_csv<W: Write>(writer: W, ledger: &EnergyLedger) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(LEDGER_HEADER)?;
    for i in 0..ledger.t.len() {
        w.write_record(
            [
                ledger.t[i],
                ledger.e0[i],
                ledger.e1[i],
                ledger.e2[i],
                ledger.y_l2_sq[i],
                ledger.damping_integral[i],
                ledger.residual[i],
            ]
            .map(|v| v.to_string()),
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report_csv<W: Write>(writer: W, reports: &[DecayFitReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.write_record([
            r.norm.to_string(),
            r.ell.to_string(),
            r.slope.to_string(),
            r.predicted.to_string(),
            r.tolerance.to_string(),
            r.residual.to_string(),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> StateField {
        let g = Grid::new(10.0, 16).unwrap();
        let x = g.x();
        let f = |k: f64| x.iter().map(|x| (k * x).sin() / 3.0).collect::<Vec<_>>();
        StateField::new(g, f(1.0), f(2.0), f(0.3), f(-1.7)).unwrap()
    }

    #[test]
    fn field_round_trip_is_exact() {
        let s = sample();
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,v,u,z,y\n"));
        assert_eq!(read_field_csv(buf.as_slice(), s.grid()).unwrap(), s);
        assert_eq!(read_field_csv_infer(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn row_count_is_validated() {
        let s = sample();
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let short: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_field_csv(short.as_bytes(), s.grid()), Err(Error::GridMismatch(_))));
        assert!(read_field_csv_infer(short.as_bytes()).is_err());
    }

    #[test]
    fn malformed_input() {
        let g = Grid::new(10.0, 8).unwrap();
        assert!(matches!(read_field_csv("a,b\n1,2\n".as_bytes(), &g), Err(Error::Parse(_))));
        assert!(read_field_csv("x,v,u,z,y\n1,2,3\n".as_bytes(), &g).is_err());
        assert!(matches!(read_field_csv("x,v,u,z,y\n1,2,3,4,zz\n".as_bytes(), &g), Err(Error::Parse(_))));
        assert!(matches!(read_field_csv("x,v,u,z,y\n1,2,3,4,NaN\n".as_bytes(), &g), Err(Error::NonFinite(_))));
    }

    #[test]
    fn shifted_grid_is_rejected() {
        let s = sample();
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &s).unwrap();
        let other = Grid::new(12.0, 16).unwrap();
        assert!(matches!(read_field_csv(buf.as_slice(), &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn meta_validation() {
        let good = r#"{"grid":{"L":10,"N":16},"params":{"a":1,"gamma":1},"times":[0,1],"files":["a.csv","b.csv"]}"#;
        assert!(TrajectoryMeta::from_json(good).is_ok());
        let bad = good.replace("\"b.csv\"", "\"../b.csv\"");
        assert!(TrajectoryMeta::from_json(&bad).is_err());
        let bad = good.replace("[0,1]", "[1,0]");
        assert!(TrajectoryMeta::from_json(&bad).is_err());
        let bad = good.replace("\"N\":16", "\"N\":15");
        assert!(TrajectoryMeta::from_json(&bad).is_err());
    }
}

//! CSV ingestion of distributional panels, CSV/JSON export of fitted models
//! and the files read back by the prediction command.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dense::FittedDenseModel;
use crate::eigen::EigenSystem;
use crate::error::{Error, Result};
use crate::frechet::{BarycenterPath, Design, Observation, Panel, Payload, Subject};
use crate::grid;
use crate::measure::GridMeasure;
use crate::sparse::FittedSparseModel;
use crate::transport::{norm1, sign, TransportMap};

/// Layout of a long-format panel file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelFormat {
    /// One row per sample: subject, time, value.
    LongSamples,
    /// One row per quantile level: subject, time, level, quantile.
    LongQuantiles,
}

/// Column names and unit conventions of a panel file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelSchema {
    pub format: PanelFormat,
    pub subject: String,
    pub time: String,
    /// Sample value (long_samples) or quantile (long_quantiles) column.
    pub value: String,
    /// Quantile level column (long_quantiles only).
    pub level: String,
    /// Support `[a, b]` of the distributions, mapped affinely onto `[0, 1]`.
    pub support: [f64; 2],
    /// Time range mapped onto `[0, 1]`; the observed range when absent.
    pub time_range: Option<[f64; 2]>,
    /// Sampling design; inferred from the time sets when absent.
    pub design: Option<Design>,
}

impl Default for PanelSchema {
    fn default() -> Self {
        Self {
            format: PanelFormat::LongSamples,
            subject: "subject".into(),
            time: "time".into(),
            value: "value".into(),
            level: "level".into(),
            support: [0.0, 1.0],
            time_range: None,
            design: None,
        }
    }
}

impl PanelSchema {
    /// Schema matching the files written by [`export_panel`].
    pub fn normalized_quantiles() -> Self {
        Self {
            format: PanelFormat::LongQuantiles,
            value: "q".into(),
            time_range: Some([0.0, 1.0]),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = vec![&self.subject, &self.time, &self.value];
        if self.format == PanelFormat::LongQuantiles {
            names.push(&self.level);
        }
        for (i, a) in names.iter().enumerate() {
            if names[i + 1..].contains(a) {
                return Err(Error::Config(format!("column name `{a}` used twice")));
            }
        }
        let [a, b] = self.support;
        if !(b > a) {
            return Err(Error::Config(format!("support [{a}, {b}] must satisfy b > a")));
        }
        if let Some([lo, hi]) = self.time_range {
            if !(hi > lo) {
                return Err(Error::Config(format!("time range [{lo}, {hi}] must satisfy hi > lo")));
            }
        }
        Ok(())
    }

    /// Reads and validates a schema file (see [`load_config`]).
    pub fn from_path(path: &Path) -> Result<Self> {
        let schema: Self = load_config(path)?;
        schema.validate()?;
        Ok(schema)
    }
}

/// Reads a configuration file: TOML when the extension is `.toml`, JSON otherwise.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let parsed = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| e.to_string())
    } else {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Affine map between original units and `[0, 1]`: `original = offset + scale * unit`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub offset: f64,
    pub scale: f64,
}

impl AffineMap {
    pub fn identity() -> Self {
        Self { offset: 0.0, scale: 1.0 }
    }

    pub fn from_range(lo: f64, hi: f64) -> Self {
        Self {
            offset: lo,
            scale: hi - lo,
        }
    }

    pub fn to_unit(&self, x: f64) -> f64 {
        if self.offset == 0.0 && self.scale == 1.0 {
            return x;
        }
        (x - self.offset) / self.scale
    }

    pub fn to_original(&self, u: f64) -> f64 {
        if self.offset == 0.0 && self.scale == 1.0 {
            return u;
        }
        self.offset + self.scale * u
    }
}

/// A panel read from disk, with the unit maps that were applied.
#[derive(Debug, Clone)]
pub struct IngestedPanel {
    pub panel: Panel<Payload>,
    pub time_map: AffineMap,
    pub support_map: AffineMap,
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
        row: 0,
        msg: format!("missing column `{name}`"),
    })
}

fn field(rec: &csv::StringRecord, idx: usize, row: usize) -> Result<&str> {
    rec.get(idx).ok_or_else(|| Error::Parse {
        row,
        msg: "row has too few fields".into(),
    })
}

fn number(rec: &csv::StringRecord, idx: usize, row: usize, what: &str) -> Result<f64> {
    let s = field(rec, idx, row)?;
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            row,
            msg: format!("{what} `{s}` is not a finite number"),
        }),
    }
}

/// Observations of one `(subject, time)` cell, with the data rows they came from.
struct Cell {
    time: f64,
    rows: Vec<usize>,
    values: Vec<f64>,
    levels: Vec<f64>,
}

/// Reads a long-format CSV panel.
///
/// Sample values and quantiles are mapped from `schema.support` onto `[0, 1]`,
/// times from `schema.time_range` (or the observed range) onto `[0, 1]`.
/// Sample cells become empirical quantile functions on `grid_size` levels;
/// quantile cells must list exactly the levels `j / (M - 1)` for one common `M`.
/// Row numbers in errors count data rows from 1; row 0 is the header.
pub fn ingest_panel(path: &Path, schema: &PanelSchema, grid_size: usize) -> Result<IngestedPanel> {
    ingest_reader(File::open(path)?, schema, grid_size)
}

/// [`ingest_panel`] on any reader.
pub fn ingest_reader<R: Read>(reader: R, schema: &PanelSchema, grid_size: usize) -> Result<IngestedPanel> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let subject_col = column(&headers, &schema.subject)?;
    let time_col = column(&headers, &schema.time)?;
    let value_col = column(&headers, &schema.value)?;
    let level_col = match schema.format {
        PanelFormat::LongQuantiles => Some(column(&headers, &schema.level)?),
        PanelFormat::LongSamples => None,
    };
    let support_map = AffineMap::from_range(schema.support[0], schema.support[1]);

    let mut order: Vec<String> = Vec::new();
    let mut cells: HashMap<String, Vec<Cell>> = HashMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        let id = field(&rec, subject_col, row)?.to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                row,
                msg: "empty subject identifier".into(),
            });
        }
        let time = number(&rec, time_col, row, "time")?;
        let raw = number(&rec, value_col, row, "value")?;
        let v = support_map.to_unit(raw);
        if !(-1e-12..=1.0 + 1e-12).contains(&v) {
            return Err(Error::Parse {
                row,
                msg: format!("value {raw} outside support [{}, {}]", schema.support[0], schema.support[1]),
            });
        }
        let level = match level_col {
            Some(c) => Some(number(&rec, c, row, "level")?),
            None => None,
        };
        let subject_cells = cells.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Vec::new()
        });
        let cell = match subject_cells.iter_mut().position(|c| c.time == time) {
            Some(i) => &mut subject_cells[i],
            None => {
                subject_cells.push(Cell {
                    time,
                    rows: Vec::new(),
                    values: Vec::new(),
                    levels: Vec::new(),
                });
                subject_cells.last_mut().expect("just pushed")
            }
        };
        if let Some(l) = level {
            if let Some(i) = cell.levels.iter().position(|&x| x == l) {
                return Err(Error::Parse {
                    row,
                    msg: format!("duplicate level {l} for subject `{id}` at time {time} (first at row {})", cell.rows[i]),
                });
            }
            cell.levels.push(l);
        }
        cell.rows.push(row);
        cell.values.push(v.clamp(0.0, 1.0));
    }
    if order.is_empty() {
        return Err(Error::InvalidInput("panel file has no data rows".into()));
    }

    let (tlo, thi) = match schema.time_range {
        Some([lo, hi]) => (lo, hi),
        None => cells
            .values()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c.time), hi.max(c.time))),
    };
    let time_map = if thi > tlo {
        AffineMap::from_range(tlo, thi)
    } else {
        AffineMap { offset: tlo, scale: 1.0 }
    };

    let mut subjects = Vec::with_capacity(order.len());
    for id in &order {
        let mut observations = Vec::new();
        for cell in cells.remove(id).expect("subject recorded") {
            let t = time_map.to_unit(cell.time);
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Parse {
                    row: cell.rows[0],
                    msg: format!("time {} outside the time range [{tlo}, {thi}]", cell.time),
                });
            }
            let measure = match schema.format {
                PanelFormat::LongSamples => GridMeasure::empirical(&cell.values, grid_size)?,
                PanelFormat::LongQuantiles => quantile_cell(&cell, id)?,
            };
            observations.push(Observation {
                t,
                value: Payload::Measure(measure),
            });
        }
        subjects.push(Subject {
            id: id.clone(),
            observations,
        });
    }
    let design = schema.design.unwrap_or_else(|| {
        let first = subjects[0].times_sorted();
        if subjects.iter().all(|s| s.times_sorted() == first) {
            Design::Fixed
        } else {
            Design::Random
        }
    });
    Ok(IngestedPanel {
        panel: Panel::new(subjects, design)?,
        time_map,
        support_map,
    })
}

impl<P> Subject<P> {
    fn times_sorted(&self) -> Vec<f64> {
        let mut t = self.times();
        t.sort_by(f64::total_cmp);
        t
    }
}

fn quantile_cell(cell: &Cell, id: &str) -> Result<GridMeasure> {
    let mut idx: Vec<usize> = (0..cell.levels.len()).collect();
    idx.sort_by(|&a, &b| cell.levels[a].total_cmp(&cell.levels[b]));
    let m = idx.len();
    if m < 2 {
        return Err(Error::Parse {
            row: cell.rows[0],
            msg: format!("subject `{id}` at time {} has fewer than 2 quantile levels", cell.time),
        });
    }
    for (j, &i) in idx.iter().enumerate() {
        if (cell.levels[i] - grid::node(j, m)).abs() > 1e-9 {
            return Err(Error::Parse {
                row: cell.rows[i],
                msg: format!("level {} is not on the {m}-point grid j/{}", cell.levels[i], m - 1),
            });
        }
    }
    for w in idx.windows(2) {
        if cell.values[w[1]] < cell.values[w[0]] {
            return Err(Error::Parse {
                row: cell.rows[w[1]],
                msg: format!("quantile decreases with level for subject `{id}` at time {}", cell.time),
            });
        }
    }
    GridMeasure::new(idx.iter().map(|&i| cell.values[i]).collect())
}

/// Writes a measure panel as long-format quantiles in normalized units
/// (columns `subject,time,level,q`), readable with
/// [`PanelSchema::normalized_quantiles`].
pub fn export_panel<W: Write>(panel: &Panel<GridMeasure>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["subject", "time", "level", "q"])?;
    for s in panel.subjects() {
        for o in &s.observations {
            let m = o.value.grid_size();
            for (j, q) in o.value.qvals().iter().enumerate() {
                w.write_record([s.id.clone(), o.t.to_string(), grid::node(j, m).to_string(), q.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a single quantile function from a two-column CSV (`level,q`).
pub fn read_quantile_csv(path: &Path) -> Result<GridMeasure> {
    let schema = PanelSchema {
        format: PanelFormat::LongQuantiles,
        value: "q".into(),
        ..Default::default()
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let level_col = column(&headers, &schema.level)?;
    let q_col = column(&headers, &schema.value)?;
    let mut cell = Cell {
        time: 0.0,
        rows: Vec::new(),
        values: Vec::new(),
        levels: Vec::new(),
    };
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        let l = number(&rec, level_col, row, "level")?;
        if cell.levels.contains(&l) {
            return Err(Error::Parse {
                row,
                msg: format!("duplicate level {l}"),
            });
        }
        let q = number(&rec, q_col, row, "q")?;
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Parse {
                row,
                msg: format!("quantile {q} outside [0, 1]"),
            });
        }
        cell.levels.push(l);
        cell.values.push(q);
        cell.rows.push(row);
    }
    quantile_cell(&cell, "input")
}

/// Writes a transport map as CSV columns `u,T`.
pub fn write_transport_csv<W: Write>(map: &TransportMap, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u", "T"])?;
    let m = map.grid_size();
    for (j, v) in map.tvals().iter().enumerate() {
        w.write_record([grid::node(j, m).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Either kind of fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum FittedModel {
    Dense(FittedDenseModel),
    Sparse(FittedSparseModel),
}

impl FittedModel {
    pub fn eig(&self) -> &EigenSystem {
        match self {
            FittedModel::Dense(m) => &m.eig,
            FittedModel::Sparse(m) => &m.eig,
        }
    }

    pub fn ncomp(&self) -> usize {
        match self {
            FittedModel::Dense(m) => m.ncomp,
            FittedModel::Sparse(m) => m.ncomp,
        }
    }

    pub fn subjects(&self) -> &[crate::dense::SubjectFit] {
        match self {
            FittedModel::Dense(m) => &m.subjects,
            FittedModel::Sparse(m) => &m.subjects,
        }
    }

    /// Predicted transport of a subject at a normalized time.
    pub fn predict(&self, id: &str, t: f64) -> Result<TransportMap> {
        match self {
            FittedModel::Dense(m) => crate::dense::predict_dense(m, id, t),
            FittedModel::Sparse(m) => crate::sparse::predict_sparse(m, id, t),
        }
    }
}

/// Fitted model together with the unit maps of its input panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub time_map: AffineMap,
    pub support_map: AffineMap,
    pub model: FittedModel,
}

impl SavedModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
    }
}

fn create(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(dir.join(name))?)))
}

/// Writes `eigenfunctions.csv` (one row per time node, in original time units).
pub fn write_eigenfunctions(dir: &Path, eig: &EigenSystem, count: usize, time_map: &AffineMap) -> Result<()> {
    let mut w = create(dir, "eigenfunctions.csv")?;
    let mut header = vec!["time".to_string()];
    header.extend((1..=count).map(|k| format!("phi{k}")));
    w.write_record(&header)?;
    let g = eig.grid_size();
    for j in 0..g {
        let mut row = vec![time_map.to_original(grid::node(j, g)).to_string()];
        row.extend((0..count).map(|k| eig.eigenfunctions[k][j].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `scores.csv` with one row per subject.
pub fn write_scores(dir: &Path, model: &FittedModel) -> Result<()> {
    let count = model.ncomp();
    let mut w = create(dir, "scores.csv")?;
    let mut header = vec!["subject".to_string()];
    header.extend((1..=count).map(|k| format!("score{k}")));
    w.write_record(&header)?;
    for s in model.subjects() {
        let mut row = vec![s.id.clone()];
        row.extend(s.scores[..count].iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `sign_mass.csv`: sign and transported mass of every centered observation.
pub fn write_sign_mass(dir: &Path, panel: &Panel<TransportMap>, time_map: &AffineMap) -> Result<()> {
    let mut w = create(dir, "sign_mass.csv")?;
    w.write_record(["subject", "time", "sign", "mass"])?;
    for s in panel.subjects() {
        for o in &s.observations {
            w.write_record([
                s.id.clone(),
                time_map.to_original(o.t).to_string(),
                sign(&o.value).to_string(),
                norm1(&o.value).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `barycenter.csv` (columns `time,level,q`) in original units.
pub fn write_barycenter(dir: &Path, path: &BarycenterPath, time_map: &AffineMap, support_map: &AffineMap) -> Result<()> {
    let mut w = create(dir, "barycenter.csv")?;
    w.write_record(["time", "level", "q"])?;
    for (t, m) in path.times.iter().zip(&path.measures) {
        let g = m.grid_size();
        for (j, q) in m.qvals().iter().enumerate() {
            w.write_record([
                time_map.to_original(*t).to_string(),
                grid::node(j, g).to_string(),
                support_map.to_original(*q).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

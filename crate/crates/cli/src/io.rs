//! On-disk formats: point CSVs, graph JSON, measure CSV + sidecar, feature
//! matrices, manifests, models, t-test tables and saliency grids.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! file reads back to bit-identical values.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use cellnet_core::aggregation::{SaliencyGrid, Scenario};
use cellnet_core::measures::SpectralMeta;
use cellnet_core::ml::{Fitted, SvmParams, TTestTable};
use cellnet_core::{CellGraph, DatasetManifest, FeatureVector, Grade, LayoutEntry, Level, Measure, MeasureConfig, MeasureTable, PointSet};
use serde::{Deserialize, Serialize};

/// Graph file format tag.
pub const GRAPH_FORMAT: &str = "cellnet-graph";
/// Model file format tag.
pub const MODEL_FORMAT: &str = "cellnet-model";
/// Measure sidecar format tag.
pub const MEASURES_FORMAT: &str = "cellnet-measures";
/// Version written into every versioned file.
pub const FORMAT_VERSION: u32 = 1;

const MEASURE_HEADER: [&str; 8] = [
    "node_id",
    "degree",
    "clustering",
    "closeness",
    "degree_centrality",
    "betweenness",
    "eigenvector",
    "katz",
];

/// Shortest round-trip text of `v`; scientific notation for very small or
/// very large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

/// Writes `bytes` to `path` through a temporary file and rename, so readers
/// never observe a half-written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    create_parent(path)?;
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// Reads any JSON document.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))
}

fn parse_f64(field: &str, path: &Path, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .with_context(|| format!("{}:{line}: bad number {field:?}", path.display()))
}

// ---- points ----

/// Writes `node_id,x,y`.
pub fn write_points(path: &Path, points: &PointSet) -> Result<()> {
    let header: Vec<String> = ["node_id", "x", "y"].iter().map(|s| s.to_string()).collect();
    let rows = points
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| vec![i.to_string(), fmt_f64(p[0]), fmt_f64(p[1])]);
    write_atomic(path, &csv_bytes(&header, rows)?)
}

/// Reads a point file; node ids must be `0..n` in file order. Without an
/// explicit extent the bounding box (rounded up) is used.
pub fn read_points(path: &Path, patch_id: &str, extent: Option<[f64; 2]>) -> Result<PointSet> {
    let mut rdr = open_csv(path)?;
    let header = rdr.headers()?.clone();
    ensure!(
        header.iter().map(str::trim).eq(["node_id", "x", "y"]),
        "{}: expected header node_id,x,y",
        path.display()
    );
    let mut pts = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let id: usize = rec[0]
            .trim()
            .parse()
            .with_context(|| format!("{}:{line}: bad node id", path.display()))?;
        ensure!(id == i, "{}:{line}: node ids must be dense and ordered (got {id}, expected {i})", path.display());
        pts.push([parse_f64(&rec[1], path, line)?, parse_f64(&rec[2], path, line)?]);
    }
    let extent = extent.unwrap_or_else(|| {
        let w = pts.iter().map(|p| p[0]).fold(0.0, f64::max).floor() + 1.0;
        let h = pts.iter().map(|p| p[1]).fold(0.0, f64::max).floor() + 1.0;
        [w, h]
    });
    Ok(PointSet::new(patch_id, pts, extent)?)
}

// ---- graphs ----

#[derive(Serialize, Deserialize)]
struct GraphFile {
    format: String,
    version: u32,
    graph: CellGraph,
}

/// Writes a graph container.
pub fn write_graph(path: &Path, graph: &CellGraph) -> Result<()> {
    let file = GraphFile {
        format: GRAPH_FORMAT.into(),
        version: FORMAT_VERSION,
        graph: graph.clone(),
    };
    let mut s = serde_json::to_string(&file)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// Reads and validates a graph container.
pub fn read_graph(path: &Path) -> Result<CellGraph> {
    let file: GraphFile = read_json(path)?;
    ensure!(file.format == GRAPH_FORMAT, "{}: not a graph file", path.display());
    ensure!(file.version == FORMAT_VERSION, "{}: unsupported graph version {}", path.display(), file.version);
    file.graph.check_invariants()?;
    Ok(file.graph)
}

// ---- measure tables ----

#[derive(Debug, Serialize, Deserialize)]
struct MeasureSidecar {
    format: String,
    version: u32,
    spectral: Vec<SpectralMeta>,
    config: Option<MeasureConfig>,
}

/// Sidecar path of a measure CSV: `x.csv` -> `x.meta.json`.
pub fn sidecar_path(table: &Path) -> PathBuf {
    table.with_extension("meta.json")
}

/// Writes the per-node CSV and its JSON sidecar (α, β, λ, warnings, config).
pub fn write_measures(path: &Path, table: &MeasureTable, config: Option<&MeasureConfig>) -> Result<()> {
    let header: Vec<String> = MEASURE_HEADER.iter().map(|s| s.to_string()).collect();
    let columns: Vec<Vec<f64>> = Measure::ALL[1..].iter().map(|&m| table.values(m)).collect();
    let rows = (0..table.n_nodes()).map(|i| {
        let mut r = vec![i.to_string(), table.degree[i].to_string()];
        r.extend(columns.iter().map(|c| fmt_f64(c[i])));
        r
    });
    write_atomic(path, &csv_bytes(&header, rows)?)?;
    write_json(
        &sidecar_path(path),
        &MeasureSidecar {
            format: MEASURES_FORMAT.into(),
            version: FORMAT_VERSION,
            spectral: table.spectral.clone(),
            config: config.cloned(),
        },
    )
}

/// Reads a measure CSV; the sidecar is optional.
pub fn read_measures(path: &Path) -> Result<MeasureTable> {
    let mut rdr = open_csv(path)?;
    ensure!(
        rdr.headers()?.iter().map(str::trim).eq(MEASURE_HEADER),
        "{}: unexpected measure header",
        path.display()
    );
    let mut t = MeasureTable {
        degree: Vec::new(),
        clustering: Vec::new(),
        closeness: Vec::new(),
        degree_centrality: Vec::new(),
        betweenness: Vec::new(),
        eigenvector: Vec::new(),
        katz: Vec::new(),
        spectral: Vec::new(),
    };
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        ensure!(rec[0].trim() == i.to_string(), "{}:{line}: node ids must be dense", path.display());
        t.degree.push(
            rec[1]
                .trim()
                .parse()
                .with_context(|| format!("{}:{line}: bad degree", path.display()))?,
        );
        let cols = [
            &mut t.clustering,
            &mut t.closeness,
            &mut t.degree_centrality,
            &mut t.betweenness,
            &mut t.eigenvector,
            &mut t.katz,
        ];
        for (k, col) in cols.into_iter().enumerate() {
            col.push(parse_f64(&rec[k + 2], path, line)?);
        }
    }
    let side = sidecar_path(path);
    if side.exists() {
        let meta: MeasureSidecar = read_json(&side)?;
        ensure!(meta.format == MEASURES_FORMAT, "{}: not a measure sidecar", side.display());
        t.spectral = meta.spectral;
    }
    t.check_invariants()?;
    Ok(t)
}

// ---- feature matrices ----

/// Rows of feature vectors with sample ids, all under one layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// Sample id per row (patch or image id).
    pub ids: Vec<String>,
    /// Column layout.
    pub layout: Vec<LayoutEntry>,
    /// Values, one row per id.
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    /// Stacks vectors; all layouts must match.
    pub fn from_vectors(items: Vec<(String, FeatureVector)>) -> Result<Self> {
        let layout = items.first().map(|(_, v)| v.layout.clone()).unwrap_or_default();
        let mut m = FeatureMatrix {
            ids: Vec::new(),
            layout,
            rows: Vec::new(),
        };
        for (id, v) in items {
            ensure!(v.layout == m.layout, "feature layout of {id} differs");
            m.ids.push(id);
            m.rows.push(v.values);
        }
        Ok(m)
    }

    /// Column names.
    pub fn column_names(&self) -> Vec<String> {
        self.layout.iter().map(LayoutEntry::column_name).collect()
    }

    /// Row of one sample.
    pub fn row(&self, id: &str) -> Option<&[f64]> {
        self.ids.iter().position(|i| i == id).map(|k| self.rows[k].as_slice())
    }

    /// Row as a vector at the given level.
    pub fn vector(&self, k: usize, level: Level) -> FeatureVector {
        FeatureVector {
            values: self.rows[k].clone(),
            layout: self.layout.clone(),
            level,
        }
    }
}

/// Writes `sample_id,<measure>__<feature>,...`.
pub fn write_feature_matrix(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let mut header = vec!["sample_id".to_string()];
    header.extend(m.column_names());
    let rows = m.ids.iter().zip(&m.rows).map(|(id, r)| {
        let mut out = vec![id.clone()];
        out.extend(r.iter().copied().map(fmt_f64));
        out
    });
    write_atomic(path, &csv_bytes(&header, rows)?)
}

/// Appends one row, creating the file (with header) if needed.
pub fn append_feature_row(path: &Path, id: &str, v: &FeatureVector) -> Result<()> {
    let row = FeatureMatrix {
        ids: vec![id.to_string()],
        layout: v.layout.clone(),
        rows: vec![v.values.clone()],
    };
    if !path.exists() {
        return write_feature_matrix(path, &row);
    }
    let existing = read_feature_matrix(path)?;
    ensure!(existing.layout == v.layout, "{}: feature layout differs from existing header", path.display());
    ensure!(!existing.ids.iter().any(|i| i == id), "{}: sample {id} already present", path.display());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(fs::OpenOptions::new().append(true).open(path)?);
    let mut rec = vec![id.to_string()];
    rec.extend(v.values.iter().copied().map(fmt_f64));
    w.write_record(&rec)?;
    w.flush()?;
    Ok(())
}

/// Reads a feature matrix and parses its column layout.
pub fn read_feature_matrix(path: &Path) -> Result<FeatureMatrix> {
    let mut rdr = open_csv(path)?;
    let header = rdr.headers()?.clone();
    ensure!(header.get(0).map(str::trim) == Some("sample_id"), "{}: first column must be sample_id", path.display());
    let layout = header
        .iter()
        .skip(1)
        .map(|c| LayoutEntry::parse(c.trim()).map_err(anyhow::Error::from))
        .collect::<Result<Vec<_>>>()
        .with_context(|| format!("{}: bad column name", path.display()))?;
    let mut m = FeatureMatrix {
        ids: Vec::new(),
        layout,
        rows: Vec::new(),
    };
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        ensure!(rec.len() == m.layout.len() + 1, "{}:{}: wrong field count", path.display(), i + 2);
        m.ids.push(rec[0].to_string());
        m.rows.push(
            rec.iter()
                .skip(1)
                .map(|f| parse_f64(f, path, i + 2))
                .collect::<Result<_>>()?,
        );
    }
    Ok(m)
}

// ---- manifests ----

/// Reads a manifest JSON.
pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    read_json(path)
}

/// Writes a manifest JSON.
pub fn write_manifest(path: &Path, m: &DatasetManifest) -> Result<()> {
    write_json(path, m)
}

// ---- models ----

/// Versioned model container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    /// Format tag.
    pub format: String,
    /// Format version.
    pub version: u32,
    /// Scenario the model was trained for.
    pub scenario: Scenario,
    /// Full input layout (column names) the model expects.
    pub input_columns: Vec<String>,
    /// Names of the selected columns.
    pub selected_columns: Vec<String>,
    /// Chosen `(C, gamma)`.
    pub params: SvmParams,
    /// Inner cross-validated accuracy of the chosen configuration.
    pub inner_accuracy: f64,
    /// Forward-selection curve.
    pub sfs_curve: Vec<f64>,
    /// Trained classifier (every SVM field: support vectors, duals, offsets,
    /// standardisation, selected indices).
    pub model: Fitted,
}

/// Writes a model container.
pub fn write_model(path: &Path, m: &ModelFile) -> Result<()> {
    write_json(path, m)
}

/// Reads and checks a model container.
pub fn read_model(path: &Path) -> Result<ModelFile> {
    let m: ModelFile = read_json(path)?;
    ensure!(m.format == MODEL_FORMAT, "{}: not a model file", path.display());
    ensure!(m.version == FORMAT_VERSION, "{}: unsupported model version {}", path.display(), m.version);
    Ok(m)
}

// ---- t-test tables ----

fn pair_name(p: (Grade, Grade)) -> String {
    format!("grade{}_vs_grade{}", p.0, p.1)
}

/// Wide p-value table: one row per measure, one column per grade pair;
/// undefined entries are `NA`.
pub fn write_ttest(path: &Path, table: &TTestTable) -> Result<()> {
    let mut header = vec!["measure".to_string()];
    header.extend(table.pairs.iter().map(|&p| pair_name(p)));
    let rows = table.measures.iter().zip(&table.entries).map(|(m, row)| {
        let mut r = vec![m.name().to_string()];
        r.extend(row.iter().map(|e| e.map_or_else(|| "NA".to_string(), |t| fmt_f64(t.p_value))));
        r
    });
    write_atomic(path, &csv_bytes(&header, rows)?)?;
    write_json(&path.with_extension("json"), table)
}

/// Reads the wide p-value table back as `(measure, pair) -> p`.
pub fn read_ttest_pvalues(path: &Path) -> Result<Vec<(Measure, String, Option<f64>)>> {
    let mut rdr = open_csv(path)?;
    let header = rdr.headers()?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let m: Measure = rec[0].parse()?;
        for (k, f) in rec.iter().enumerate().skip(1) {
            let p = if f == "NA" { None } else { Some(parse_f64(f, path, 0)?) };
            out.push((m, header[k].to_string(), p));
        }
    }
    Ok(out)
}

// ---- saliency grids ----

/// Long-format grid: `grade,row,col,x0,y0,score`; missing cells have an empty score.
pub fn write_grid(path: &Path, grid: &SaliencyGrid, classes: &[Grade]) -> Result<()> {
    ensure!(classes.len() == grid.cells.len(), "class list does not match grid");
    let header: Vec<String> = ["grade", "row", "col", "x0", "y0", "score"].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (k, &g) in classes.iter().enumerate() {
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                rows.push(vec![
                    g.to_string(),
                    r.to_string(),
                    c.to_string(),
                    fmt_f64(c as f64 * grid.cell_size),
                    fmt_f64(r as f64 * grid.cell_size),
                    grid.get(k, r, c).map(fmt_f64).unwrap_or_default(),
                ]);
            }
        }
    }
    write_atomic(path, &csv_bytes(&header, rows)?)
}

/// One grid CSV record: `(grade, row, col, score)`.
pub type GridCell = (Grade, usize, usize, Option<f64>);

/// Reads a grid CSV.
pub fn read_grid(path: &Path) -> Result<Vec<GridCell>> {
    let mut rdr = open_csv(path)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let score = if rec[5].is_empty() { None } else { Some(parse_f64(&rec[5], path, i + 2)?) };
        out.push((rec[0].parse()?, rec[1].parse()?, rec[2].parse()?, score));
    }
    Ok(out)
}

/// Appends a line to a text log.
pub fn append_line(path: &Path, line: &str) -> Result<()> {
    create_parent(path)?;
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{line}")?;
    Ok(())
}

/// Fails unless `path` exists.
pub fn require(path: &Path) -> Result<()> {
    if !path.exists() {
        bail!("missing input {}", path.display());
    }
    Ok(())
}

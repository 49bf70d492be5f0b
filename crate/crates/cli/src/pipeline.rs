//! End-to-end run: graphs, measures, patch features, image-level sample
//! sets, cross-validation per scenario, final models and the t-test table.
//!
//! Layout of a run directory:
//!
//! ```text
//! graphs/<patch>.json          measures/<patch>.csv (+ .meta.json)
//! features/patches.csv         features/image_measures.csv   features/image_features.csv
//! reports/<scenario>.json      reports/sfs_curves.csv        reports/summary.csv
//! models/<scenario>.json       ttest.csv (+ ttest.json)      stage_log.tsv
//! ```
//!
//! Every stage skips outputs that already exist, so an interrupted run
//! resumes where it stopped.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use cellnet_core::aggregation::{aggregate_features, aggregate_measures, Scenario};
use cellnet_core::measures::Measure;
use cellnet_core::ml::{cross_validate, grade_ttest, select_and_fit, CvConfig, CvReport, SampleSet, TTestTable};
use cellnet_core::model::validate_manifest;
use cellnet_core::{build_graph, compute_all_measures, featurize, DatasetManifest, Grade, Level, MeasureTable};
use rayon::prelude::*;

use crate::config::{PipelineConfig, TTestUnit};
use crate::io::{self, FeatureMatrix, ModelFile};

/// Failure of one stage, optionally for one patch.
#[derive(Debug, thiserror::Error)]
#[error("stage {stage} failed{}", patch_id.as_ref().map(|p| format!(" for patch {p}")).unwrap_or_default())]
pub struct StageError {
    /// Stage name.
    pub stage: &'static str,
    /// Patch being processed, if any.
    pub patch_id: Option<String>,
    /// Underlying error.
    pub source: anyhow::Error,
}

fn stage_err<'a>(stage: &'static str, patch_id: Option<&'a str>) -> impl FnOnce(anyhow::Error) -> StageError + 'a {
    move |source| StageError {
        stage,
        patch_id: patch_id.map(str::to_string),
        source,
    }
}

/// Whether a stage output was produced now or found on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageAction {
    /// Written by this run.
    Computed,
    /// Already present.
    Reused,
}

impl StageAction {
    fn name(self) -> &'static str {
        match self {
            StageAction::Computed => "computed",
            StageAction::Reused => "reused",
        }
    }
}

/// Files of a run directory.
#[derive(Debug, Clone)]
pub struct RunPaths {
    /// Run directory.
    pub root: PathBuf,
}

impl RunPaths {
    /// Paths under `root`.
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    /// Graph of a patch.
    pub fn graph(&self, pid: &str) -> PathBuf {
        self.root.join("graphs").join(format!("{pid}.json"))
    }
    /// Measure table of a patch.
    pub fn measures(&self, pid: &str) -> PathBuf {
        self.root.join("measures").join(format!("{pid}.csv"))
    }
    /// Patch-level feature matrix.
    pub fn patch_features(&self) -> PathBuf {
        self.root.join("features").join("patches.csv")
    }
    /// Image-level sample matrix of a scenario (patch matrix for predictions).
    pub fn scenario_features(&self, s: Scenario) -> PathBuf {
        match s {
            Scenario::Predictions => self.patch_features(),
            Scenario::Measures => self.root.join("features").join("image_measures.csv"),
            Scenario::Features => self.root.join("features").join("image_features.csv"),
        }
    }
    /// Cross-validation report of a scenario.
    pub fn report(&self, s: Scenario) -> PathBuf {
        self.root.join("reports").join(format!("{}.json", s.name()))
    }
    /// Forward-selection curves of every scenario and fold.
    pub fn sfs_curves(&self) -> PathBuf {
        self.root.join("reports").join("sfs_curves.csv")
    }
    /// Mean and std accuracy per scenario.
    pub fn summary(&self) -> PathBuf {
        self.root.join("reports").join("summary.csv")
    }
    /// Final model of a scenario.
    pub fn model(&self, s: Scenario) -> PathBuf {
        self.root.join("models").join(format!("{}.json", s.name()))
    }
    /// t-test table.
    pub fn ttest(&self) -> PathBuf {
        self.root.join("ttest.csv")
    }
    /// Stage log.
    pub fn stage_log(&self) -> PathBuf {
        self.root.join("stage_log.tsv")
    }
}

/// Inputs of a run.
#[derive(Debug, Clone)]
pub struct RunInputs {
    /// Dataset manifest with folds.
    pub manifest: DatasetManifest,
    /// Directory holding `<patch_id>.csv` point files.
    pub points_dir: PathBuf,
    /// Output directory.
    pub out: PathBuf,
}

/// Outcome of a run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    /// Report per evaluated scenario.
    pub reports: BTreeMap<Scenario, CvReport>,
    /// t-test table.
    pub ttest: TTestTable,
    /// `(stage, patch or artifact, action)` in the order logged.
    pub log: Vec<(String, String, StageAction)>,
}

struct StageLog {
    path: PathBuf,
    entries: Vec<(String, String, StageAction)>,
}

impl StageLog {
    fn record(&mut self, stage: &str, item: &str, action: StageAction) -> Result<()> {
        log::debug!("{stage} {item}: {}", action.name());
        io::append_line(&self.path, &format!("{stage}\t{item}\t{}", action.name()))?;
        self.entries.push((stage.to_string(), item.to_string(), action));
        Ok(())
    }
}

#[derive(Default)]
struct Clock {
    stage: Option<(&'static str, std::time::Instant)>,
}

impl Clock {
    fn lap(&mut self, next: &'static str) {
        if let Some((name, t)) = self.stage.replace((next, std::time::Instant::now())) {
            log::info!("stage {name}: {:.2?}", t.elapsed());
        }
    }
}

/// Reads the stage log of a run directory.
pub fn read_stage_log(path: &Path) -> Result<Vec<(String, String, String)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .map(|l| {
            let mut it = l.split('\t');
            match (it.next(), it.next(), it.next()) {
                (Some(a), Some(b), Some(c)) => Ok((a.to_string(), b.to_string(), c.to_string())),
                _ => bail!("malformed stage log line: {l}"),
            }
        })
        .collect()
}

/// Checks the manifest is usable for a run.
pub fn check_manifest(manifest: &DatasetManifest) -> Result<()> {
    ensure!(!manifest.images.is_empty(), "manifest has no images");
    ensure!(
        manifest.images.iter().all(|im| !im.patches.is_empty()),
        "every image needs at least one patch"
    );
    let violations = validate_manifest(manifest);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        bail!("invalid manifest: {}", list.join("; "));
    }
    Ok(())
}

/// Reads the point file of a patch and builds its graph.
pub fn patch_graph(points_dir: &Path, pid: &str, cfg: &PipelineConfig) -> Result<cellnet_core::CellGraph> {
    let pts = io::read_points(&points_dir.join(format!("{pid}.csv")), pid, cfg.patch_extent)?;
    Ok(build_graph(&pts, &cfg.build)?)
}

/// Measures of a graph, tagged with the patch id.
pub fn patch_measures(g: &cellnet_core::CellGraph, pid: &str, cfg: &PipelineConfig) -> Result<MeasureTable> {
    let mut t = compute_all_measures(g, &cfg.measures)?;
    for meta in &mut t.spectral {
        meta.source = pid.to_string();
    }
    Ok(t)
}

fn per_patch<T: Send>(
    pids: &[&str],
    stage: &'static str,
    log: &mut StageLog,
    exists: impl Fn(&str) -> bool + Sync,
    work: impl Fn(&str) -> Result<T> + Sync,
) -> Result<()> {
    let actions: Vec<StageAction> = pids
        .par_iter()
        .map(|&pid| {
            if exists(pid) {
                return Ok(StageAction::Reused);
            }
            work(pid).map_err(stage_err(stage, Some(pid)))?;
            Ok(StageAction::Computed)
        })
        .collect::<std::result::Result<_, StageError>>()?;
    for (pid, a) in pids.iter().zip(actions) {
        log.record(stage, pid, a)?;
    }
    Ok(())
}

/// Image-level sample set for a scenario. Prediction rows are patch ids;
/// other scenarios have one row per image id. Rows follow manifest order.
pub fn sample_set(manifest: &DatasetManifest, m: &FeatureMatrix, scenario: Scenario) -> Result<SampleSet> {
    let mut set = SampleSet {
        rows: Vec::new(),
        row_image: Vec::new(),
        image_ids: Vec::new(),
        grades: Vec::new(),
        folds: Vec::new(),
        columns: m.column_names(),
    };
    let index: BTreeMap<&str, usize> = m.ids.iter().enumerate().map(|(k, id)| (id.as_str(), k)).collect();
    for (i, im) in manifest.images.iter().enumerate() {
        set.image_ids.push(im.image_id.clone());
        set.grades.push(im.grade);
        set.folds.push(
            manifest
                .fold_of(&im.image_id)
                .with_context(|| format!("image {} has no fold", im.image_id))?,
        );
        let ids: Vec<&str> = match scenario {
            Scenario::Predictions => im.patches.iter().map(|p| p.patch_id.as_str()).collect(),
            _ => vec![im.image_id.as_str()],
        };
        for id in ids {
            let k = *index.get(id).with_context(|| format!("no feature row for {id}"))?;
            set.rows.push(m.rows[k].clone());
            set.row_image.push(i);
        }
    }
    set.validate()?;
    Ok(set)
}

/// Image-level matrix of a scenario built from patch artifacts.
pub fn image_matrix(
    manifest: &DatasetManifest,
    scenario: Scenario,
    tables: &BTreeMap<String, MeasureTable>,
    patch_features: &FeatureMatrix,
    cfg: &PipelineConfig,
) -> Result<FeatureMatrix> {
    let index: BTreeMap<&str, usize> = patch_features.ids.iter().enumerate().map(|(k, id)| (id.as_str(), k)).collect();
    let items = manifest
        .images
        .par_iter()
        .map(|im| {
            let v = match scenario {
                Scenario::Predictions => bail!("prediction scenario has no image-level matrix"),
                Scenario::Measures => {
                    let ts: Vec<MeasureTable> = im
                        .patches
                        .iter()
                        .map(|p| tables.get(&p.patch_id).cloned().with_context(|| format!("no measures for {}", p.patch_id)))
                        .collect::<Result<_>>()?;
                    let mut v = featurize(&aggregate_measures(&ts)?, &cfg.features)?;
                    v.level = Level::Image;
                    v
                }
                Scenario::Features => {
                    let vs: Vec<_> = im
                        .patches
                        .iter()
                        .map(|p| {
                            let k = *index
                                .get(p.patch_id.as_str())
                                .with_context(|| format!("no features for {}", p.patch_id))?;
                            Ok(patch_features.vector(k, Level::Patch))
                        })
                        .collect::<Result<_>>()?;
                    aggregate_features(&vs)?
                }
            };
            Ok((im.image_id.clone(), v))
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::from_vectors(items)
}

/// Per-measure, per-grade samples for the t-test.
pub fn ttest_samples(
    manifest: &DatasetManifest,
    tables: &BTreeMap<String, MeasureTable>,
    unit: TTestUnit,
) -> Result<BTreeMap<Measure, BTreeMap<Grade, Vec<f64>>>> {
    let mut out: BTreeMap<Measure, BTreeMap<Grade, Vec<f64>>> = BTreeMap::new();
    for im in &manifest.images {
        for m in Measure::ALL {
            let mut values = Vec::new();
            for p in &im.patches {
                let t = tables.get(&p.patch_id).with_context(|| format!("no measures for {}", p.patch_id))?;
                values.extend(t.values(m));
            }
            let slot = out.entry(m).or_default().entry(im.grade).or_default();
            match unit {
                TTestUnit::PooledNodes => slot.extend(values),
                TTestUnit::ImageMeans if !values.is_empty() => {
                    slot.push(values.iter().sum::<f64>() / values.len() as f64)
                }
                TTestUnit::ImageMeans => {}
            }
        }
    }
    Ok(out)
}

/// Model container of a selection trained on every image of `set`.
pub fn train_model(set: &SampleSet, scenario: Scenario, cv: &CvConfig) -> Result<ModelFile> {
    let images: Vec<usize> = (0..set.n_images()).collect();
    let sel = select_and_fit(set, &images, cv, cv.seed)?;
    Ok(ModelFile {
        format: io::MODEL_FORMAT.to_string(),
        version: io::FORMAT_VERSION,
        scenario,
        input_columns: set.columns.clone(),
        selected_columns: sel.columns.iter().map(|&c| set.columns[c].clone()).collect(),
        params: sel.params,
        inner_accuracy: sel.inner_accuracy,
        sfs_curve: sel.sfs_curve,
        model: sel.model,
    })
}

fn sfs_curves_csv(reports: &BTreeMap<Scenario, CvReport>) -> String {
    let mut s = String::from("scenario,fold,n_features,accuracy,best_accuracy\n");
    for (sc, r) in reports {
        for f in &r.folds {
            let mut best = f64::NEG_INFINITY;
            for (i, &a) in f.sfs_curve.iter().enumerate() {
                best = best.max(a);
                let _ = writeln!(s, "{},{},{},{},{}", sc.name(), f.fold, i + 1, io::fmt_f64(a), io::fmt_f64(best));
            }
        }
    }
    s
}

fn summary_csv(reports: &BTreeMap<Scenario, CvReport>) -> String {
    let mut s = String::from("scenario,mean_accuracy,std_accuracy,n_folds\n");
    for (sc, r) in reports {
        let _ = writeln!(s, "{},{},{},{}", sc.name(), io::fmt_f64(r.mean_accuracy), io::fmt_f64(r.std_accuracy), r.folds.len());
    }
    s
}

/// Runs every stage, reusing artifacts already in `inputs.out`.
pub fn run_pipeline(inputs: &RunInputs, cfg: &PipelineConfig) -> Result<RunSummary> {
    cfg.validate().map_err(stage_err("config", None))?;
    check_manifest(&inputs.manifest).map_err(stage_err("manifest", None))?;
    let paths = RunPaths::new(&inputs.out);
    std::fs::create_dir_all(&paths.root).with_context(|| format!("creating {}", paths.root.display()))?;
    let mut log = StageLog {
        path: paths.stage_log(),
        entries: Vec::new(),
    };
    let manifest = &inputs.manifest;
    let pids: Vec<&str> = manifest.patch_ids().collect();
    let mut clock = Clock::default();

    clock.lap("graph");
    per_patch(&pids, "graph", &mut log, |p| paths.graph(p).exists(), |pid| {
        let g = patch_graph(&inputs.points_dir, pid, cfg)?;
        io::write_graph(&paths.graph(pid), &g)
    })?;

    clock.lap("measures");
    per_patch(&pids, "measures", &mut log, |p| paths.measures(p).exists(), |pid| {
        let g = io::read_graph(&paths.graph(pid))?;
        let t = patch_measures(&g, pid, cfg)?;
        io::write_measures(&paths.measures(pid), &t, Some(&cfg.measures))
    })?;

    let tables: BTreeMap<String, MeasureTable> = pids
        .par_iter()
        .map(|&pid| {
            io::read_measures(&paths.measures(pid))
                .map(|t| (pid.to_string(), t))
                .map_err(stage_err("measures", Some(pid)))
        })
        .collect::<std::result::Result<_, StageError>>()?;

    clock.lap("features");
    let pf = paths.patch_features();
    if pf.exists() {
        log.record("features", "patches", StageAction::Reused)?;
    } else {
        let items = pids
            .par_iter()
            .map(|&pid| {
                featurize(&tables[pid], &cfg.features)
                    .map(|v| (pid.to_string(), v))
                    .map_err(|e| stage_err("features", Some(pid))(e.into()))
            })
            .collect::<std::result::Result<Vec<_>, StageError>>()?;
        io::write_feature_matrix(&pf, &FeatureMatrix::from_vectors(items)?)?;
        log.record("features", "patches", StageAction::Computed)?;
    }
    let patch_features = io::read_feature_matrix(&pf).map_err(stage_err("features", None))?;

    clock.lap("aggregate");
    let mut sets = BTreeMap::new();
    for &sc in &cfg.scenarios {
        let path = paths.scenario_features(sc);
        if sc != Scenario::Predictions {
            if path.exists() {
                log.record("aggregate", sc.name(), StageAction::Reused)?;
            } else {
                let m = image_matrix(manifest, sc, &tables, &patch_features, cfg).map_err(stage_err("aggregate", None))?;
                io::write_feature_matrix(&path, &m)?;
                log.record("aggregate", sc.name(), StageAction::Computed)?;
            }
        }
        let m = io::read_feature_matrix(&path).map_err(stage_err("aggregate", None))?;
        sets.insert(sc, sample_set(manifest, &m, sc).map_err(stage_err("aggregate", None))?);
    }

    clock.lap("evaluate");
    let todo: Vec<Scenario> = cfg.scenarios.iter().copied().filter(|&s| !paths.report(s).exists()).collect();
    let fresh = todo
        .par_iter()
        .map(|&sc| {
            cross_validate(&sets[&sc], &cfg.cv)
                .map(|r| (sc, r))
                .map_err(|e| stage_err("evaluate", None)(anyhow::Error::from(e).context(sc.name())))
        })
        .collect::<std::result::Result<Vec<_>, StageError>>()?;
    for (sc, r) in &fresh {
        io::write_json(&paths.report(*sc), r)?;
    }
    let mut reports = BTreeMap::new();
    for &sc in &cfg.scenarios {
        let action = if todo.contains(&sc) { StageAction::Computed } else { StageAction::Reused };
        log.record("evaluate", sc.name(), action)?;
        reports.insert(sc, io::read_json::<CvReport>(&paths.report(sc)).map_err(stage_err("evaluate", None))?);
    }
    io::write_atomic(&paths.sfs_curves(), sfs_curves_csv(&reports).as_bytes())?;
    io::write_atomic(&paths.summary(), summary_csv(&reports).as_bytes())?;

    clock.lap("train");
    let todo: Vec<Scenario> = cfg.scenarios.iter().copied().filter(|&s| !paths.model(s).exists()).collect();
    let models = todo
        .par_iter()
        .map(|&sc| train_model(&sets[&sc], sc, &cfg.cv).map(|m| (sc, m)).map_err(stage_err("train", None)))
        .collect::<std::result::Result<Vec<_>, StageError>>()?;
    for (sc, m) in &models {
        io::write_model(&paths.model(*sc), m)?;
    }
    for &sc in &cfg.scenarios {
        let action = if todo.contains(&sc) { StageAction::Computed } else { StageAction::Reused };
        log.record("train", sc.name(), action)?;
    }

    clock.lap("ttest");
    let samples = ttest_samples(manifest, &tables, cfg.ttest_unit).map_err(stage_err("ttest", None))?;
    let ttest = grade_ttest(&samples);
    if paths.ttest().exists() {
        log.record("ttest", "table", StageAction::Reused)?;
    } else {
        io::write_ttest(&paths.ttest(), &ttest)?;
        log.record("ttest", "table", StageAction::Computed)?;
    }

    clock.lap("done");
    Ok(RunSummary {
        reports,
        ttest,
        log: log.entries,
    })
}

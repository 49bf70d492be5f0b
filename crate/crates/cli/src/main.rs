use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{ensure, Context, Result};
use cellnet::config::{PipelineConfig, TTestUnit};
use cellnet::io;
use cellnet::pipeline::{self, RunInputs, StageError};
use cellnet::synth;
use cellnet_core::aggregation::{majority_vote, saliency_grid, Scenario, ScoredPatch};
use cellnet_core::folds::split_folds;
use cellnet_core::ml::{cross_validate, forward_select, grade_ttest, pooled_cv_accuracy, Fitted, SfsConfig, SvmParams};
use cellnet_core::model::N_FOLDS;
use cellnet_core::{build_graph, featurize, Grade, MeasureTable, Symmetrization};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

#[derive(Parser)]
#[command(name = "cellnet", version, about = "Cell social-network features and tissue grading")]
struct Cli {
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Pipeline configuration (.toml or .json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct SamplesArgs {
    /// Aggregation scenario the matrix belongs to.
    #[arg(long)]
    scenario: Scenario,
    /// Manifest with folds.
    #[arg(long)]
    manifest: PathBuf,
    /// Feature matrix (patch rows for predictions, image rows otherwise).
    #[arg(long)]
    features: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SymArg {
    Union,
    Mutual,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic three-grade point-process dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        images_per_class: Option<usize>,
    },
    /// Assign stratified folds to a manifest.
    SplitFolds {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = N_FOLDS)]
        folds: usize,
    },
    /// Build the cell graph of one point file.
    BuildGraph {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        patch_id: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        radius: Option<f64>,
        /// `mutual` keeps only edges proposed by both endpoints.
        #[arg(long, value_enum)]
        symmetrize: Option<SymArg>,
    },
    /// Compute every per-node measure of a graph.
    Measures {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Report raw betweenness pair counts.
        #[arg(long)]
        unnormalized: bool,
        /// Sample this many pivots for betweenness and closeness.
        #[arg(long)]
        pivots: Option<usize>,
    },
    /// Append the feature vector of one measure table to a matrix.
    Featurize {
        #[arg(long, alias = "measures")]
        table: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Row id (default: the measure file stem).
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Patch-to-image aggregation over a run directory.
    Aggregate {
        #[arg(long)]
        scenario: Scenario,
        #[arg(long)]
        manifest: PathBuf,
        /// Run directory with measures/ and features/patches.csv.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Patch model, required by the predictions scenario.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Select features and parameters on every image, then train.
    Train {
        #[command(flatten)]
        samples: SamplesArgs,
        /// `C1,C2,..:g1,g2,..`
        #[arg(long)]
        grid: Option<String>,
        /// Use every column.
        #[arg(long)]
        no_sfs: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Nested cross-validation report.
    Evaluate {
        #[command(flatten)]
        samples: SamplesArgs,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        no_sfs: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forward selection scored over the manifest folds.
    SelectFeatures {
        #[command(flatten)]
        samples: SamplesArgs,
        #[arg(long = "max", default_value_t = 30)]
        max_features: usize,
        #[arg(long, default_value_t = 5)]
        patience: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grade-wise t-test table of the measures in a run directory.
    Ttest {
        #[arg(long)]
        manifest: PathBuf,
        /// Run directory with measures/.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use every node value instead of per-image means.
        #[arg(long)]
        pooled_nodes: bool,
    },
    /// Class-score grid of one image from overlapping patches.
    Heatmap {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Directory of point files (default: points/ next to the manifest).
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long, default_value_t = 896.0)]
        stride: f64,
        /// Image to map (default: the first in the manifest).
        #[arg(long)]
        image: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline into a run directory.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Restrict to these scenarios.
        #[arg(long, value_delimiter = ',')]
        scenario: Vec<Scenario>,
    },
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad number {v:?}")))
        .collect()
}

fn parse_grid(s: &str) -> Result<Vec<SvmParams>> {
    let (cs, gs) = s.split_once(':').context("grid must look like C1,C2:g1,g2")?;
    Ok(SvmParams::grid(&parse_list(cs)?, &parse_list(gs)?))
}

fn points_dir(manifest: &Path, points: Option<PathBuf>) -> PathBuf {
    points.unwrap_or_else(|| manifest.parent().unwrap_or(Path::new(".")).join("points"))
}

fn read_tables(manifest: &cellnet_core::DatasetManifest, run: &Path) -> Result<BTreeMap<String, MeasureTable>> {
    let paths = pipeline::RunPaths::new(run);
    manifest
        .patch_ids()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&pid| Ok((pid.to_string(), io::read_measures(&paths.measures(pid))?)))
        .collect()
}

fn cv_config(cfg: &PipelineConfig, grid: Option<&str>, no_sfs: bool) -> Result<cellnet_core::ml::CvConfig> {
    let mut cv = cfg.cv.clone();
    if let Some(g) = grid {
        cv.grid = parse_grid(g)?;
    }
    if no_sfs {
        cv.sfs = None;
    }
    Ok(cv)
}

fn load_samples(a: &SamplesArgs) -> Result<(cellnet_core::ml::SampleSet, cellnet_core::DatasetManifest)> {
    let manifest = io::read_manifest(&a.manifest)?;
    let m = io::read_feature_matrix(&a.features)?;
    Ok((pipeline::sample_set(&manifest, &m, a.scenario)?, manifest))
}

fn scores_vector(model: &Fitted, classes: &[Grade], row: &[f64]) -> Result<(Grade, Vec<f64>)> {
    match model {
        Fitted::Constant(g) => Ok((*g, classes.iter().map(|c| f64::from(u8::from(c == g))).collect())),
        Fitted::Svm(m) => {
            let p = m.predict(row)?;
            Ok((p.grade, classes.iter().map(|c| p.scores.get(c).copied().unwrap_or(0.0)).collect()))
        }
    }
}

fn model_classes(model: &Fitted) -> Vec<Grade> {
    match model {
        Fitted::Constant(g) => vec![*g],
        Fitted::Svm(m) => m.classes.clone(),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    cfg.validate()?;
    if let Some(w) = cli.workers {
        ensure!(w >= 1, "--workers must be >= 1");
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global()?;
    }
    match cli.cmd {
        Cmd::Synth { out, images_per_class } => {
            if let Some(n) = images_per_class {
                cfg.synth.images_per_class = n;
            }
            let ds = synth::generate(&cfg.synth)?;
            synth::write_dataset(&ds, &out)?;
            log::info!("wrote {} patches to {}", ds.patches.len(), out.display());
        }
        Cmd::SplitFolds { manifest, out, folds } => {
            let m = io::read_manifest(&manifest)?;
            io::write_manifest(&out, &split_folds(&m, folds, cfg.synth.rng_seed)?)?;
        }
        Cmd::BuildGraph {
            points,
            out,
            patch_id,
            k,
            radius,
            symmetrize,
        } => {
            let pid = match patch_id {
                Some(p) => p,
                None => points.file_stem().and_then(|s| s.to_str()).unwrap_or("patch").to_string(),
            };
            let mut b = cfg.build.clone();
            b.k = k.unwrap_or(b.k);
            b.radius = radius.unwrap_or(b.radius);
            match symmetrize {
                Some(SymArg::Union) => b.symmetrization = Symmetrization::Union,
                Some(SymArg::Mutual) => b.symmetrization = Symmetrization::Mutual,
                None => {}
            }
            let pts = io::read_points(&points, &pid, cfg.patch_extent)?;
            io::write_graph(&out, &build_graph(&pts, &b)?)?;
        }
        Cmd::Measures {
            graph,
            out,
            unnormalized,
            pivots,
        } => {
            let mut mc = cfg.measures.clone();
            if unnormalized {
                mc.bc_normalized = false;
            }
            if let Some(p) = pivots {
                mc.betweenness_mode = cellnet_core::measures::PathMode::Pivots(p);
                mc.closeness_mode = cellnet_core::measures::PathMode::Pivots(p);
            }
            cfg.measures = mc;
            let pid = graph.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();
            let g = io::read_graph(&graph)?;
            let t = pipeline::patch_measures(&g, &pid, &cfg)?;
            io::write_measures(&out, &t, Some(&cfg.measures))?;
        }
        Cmd::Featurize { table: measures, out, id, bins } => {
            if let Some(b) = bins {
                cfg.features.default_bins = b;
            }
            let id = match id {
                Some(i) => i,
                None => measures.file_stem().and_then(|s| s.to_str()).context("cannot derive row id")?.to_string(),
            };
            let t = io::read_measures(&measures)?;
            io::append_feature_row(&out, &id, &featurize(&t, &cfg.features)?)?;
        }
        Cmd::Aggregate {
            scenario,
            manifest,
            input,
            out,
            model,
        } => {
            let m = io::read_manifest(&manifest)?;
            let paths = pipeline::RunPaths::new(&input);
            let patch_features = io::read_feature_matrix(&paths.patch_features())?;
            if scenario == Scenario::Predictions {
                let model = io::read_model(&model.context("--model is required for the predictions scenario")?)?;
                let set = pipeline::sample_set(&m, &patch_features, scenario)?;
                let classes = model_classes(&model.model);
                let mut s = String::from("image_id,truth,predicted\n");
                for (i, im) in m.images.iter().enumerate() {
                    let mut labels = Vec::new();
                    let mut scores: BTreeMap<Grade, f64> = BTreeMap::new();
                    for (row, _) in set.rows.iter().zip(&set.row_image).filter(|(_, &r)| r == i) {
                        let (g, v) = scores_vector(&model.model, &classes, row)?;
                        labels.push(g);
                        for (c, x) in classes.iter().zip(v) {
                            *scores.entry(*c).or_default() += x;
                        }
                    }
                    s.push_str(&format!("{},{},{}\n", im.image_id, im.grade, majority_vote(&labels, Some(&scores))?));
                }
                io::write_atomic(&out, s.as_bytes())?;
            } else {
                let tables = read_tables(&m, &input)?;
                let mat = pipeline::image_matrix(&m, scenario, &tables, &patch_features, &cfg)?;
                io::write_feature_matrix(&out, &mat)?;
            }
        }
        Cmd::Train {
            samples,
            grid,
            no_sfs,
            out,
        } => {
            let cv = cv_config(&cfg, grid.as_deref(), no_sfs)?;
            let (set, _) = load_samples(&samples)?;
            io::write_model(&out, &pipeline::train_model(&set, samples.scenario, &cv)?)?;
        }
        Cmd::Evaluate {
            samples,
            grid,
            no_sfs,
            out,
        } => {
            let cv = cv_config(&cfg, grid.as_deref(), no_sfs)?;
            let (set, _) = load_samples(&samples)?;
            io::write_json(&out, &cross_validate(&set, &cv)?)?;
        }
        Cmd::SelectFeatures {
            samples,
            max_features,
            patience,
            out,
        } => {
            let sfs = SfsConfig {
                max_features,
                patience,
                params: cfg.cv.sfs.map(|s| s.params).unwrap_or_default(),
            };
            let (set, _) = load_samples(&samples)?;
            let images: Vec<usize> = (0..set.n_images()).collect();
            let r = forward_select(set.n_features(), &sfs, |cols| {
                pooled_cv_accuracy(&set, &images, &set.folds, set.n_folds(), cols, sfs.params)
            })?;
            let name = |c: &usize| set.columns[*c].clone();
            io::write_json(
                &out,
                &json!({
                    "selected": r.selected.iter().map(name).collect::<Vec<_>>(),
                    "order": r.order.iter().map(name).collect::<Vec<_>>(),
                    "curve": r.curve,
                    "best_curve": r.best_curve(),
                }),
            )?;
        }
        Cmd::Ttest {
            manifest,
            input,
            out,
            pooled_nodes,
        } => {
            let m = io::read_manifest(&manifest)?;
            let tables = read_tables(&m, &input)?;
            let unit = if pooled_nodes { TTestUnit::PooledNodes } else { cfg.ttest_unit };
            io::write_ttest(&out, &grade_ttest(&pipeline::ttest_samples(&m, &tables, unit)?))?;
        }
        Cmd::Heatmap {
            model,
            manifest,
            points,
            stride,
            image,
            out,
        } => {
            let model = io::read_model(&model)?;
            ensure!(model.scenario != Scenario::Measures, "heatmap needs a patch-compatible model (predictions or features)");
            let m = io::read_manifest(&manifest)?;
            let dir = points_dir(&manifest, points);
            let im = match &image {
                Some(id) => m.image(id).with_context(|| format!("unknown image {id}"))?,
                None => m.images.first().context("manifest has no images")?,
            };
            let classes = model_classes(&model.model);
            let scored = im
                .patches
                .par_iter()
                .map(|p| {
                    let g = pipeline::patch_graph(&dir, &p.patch_id, &cfg)?;
                    let v = featurize(&pipeline::patch_measures(&g, &p.patch_id, &cfg)?, &cfg.features)?;
                    let names: Vec<String> = v.layout.iter().map(|e| e.column_name()).collect();
                    ensure!(names == model.input_columns, "patch feature layout differs from the model input");
                    let (_, scores) = scores_vector(&model.model, &classes, &v.values)?;
                    Ok(ScoredPatch {
                        row: p.row,
                        col: p.col,
                        scores,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let extent = cfg.patch_extent.context("heatmap needs patch_extent in the configuration")?;
            let grid = saliency_grid(&scored, extent[0], stride, classes.len())?;
            io::write_grid(&out, &grid, &classes)?;
        }
        Cmd::Run {
            manifest,
            points,
            out,
            scenario,
        } => {
            if !scenario.is_empty() {
                cfg.scenarios = scenario;
            }
            let inputs = RunInputs {
                manifest: io::read_manifest(&manifest)?,
                points_dir: points_dir(&manifest, points),
                out,
            };
            let summary = pipeline::run_pipeline(&inputs, &cfg)?;
            for (sc, r) in &summary.reports {
                println!("{}\t{:.4}\t{:.4}", sc.name(), r.mean_accuracy, r.std_accuracy);
            }
        }
    }
    Ok(())
}

fn error_json(e: &anyhow::Error) -> serde_json::Value {
    let stage = e.downcast_ref::<StageError>();
    json!({
        "error": format!("{e:#}"),
        "stage": stage.map(|s| s.stage),
        "patch_id": stage.and_then(|s| s.patch_id.clone()),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": e.to_string().trim(), "stage": "arguments", "patch_id": null }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}

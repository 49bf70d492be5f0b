mod common;

use std::collections::BTreeMap;
use std::path::Path;

use cellnet::io;
use cellnet::pipeline::{read_stage_log, run_pipeline, RunInputs, RunPaths, StageError};
use cellnet_core::aggregation::Scenario;
use cellnet_core::DatasetManifest;
use common::*;

fn inputs(manifest: &Path, out: &Path) -> RunInputs {
    RunInputs {
        manifest: io::read_manifest(manifest).unwrap(),
        points_dir: manifest.parent().unwrap().join("points"),
        out: out.to_path_buf(),
    }
}

fn outputs(paths: &RunPaths) -> BTreeMap<String, Vec<u8>> {
    let mut files = vec![paths.sfs_curves(), paths.summary(), paths.ttest(), paths.patch_features()];
    for s in Scenario::ALL {
        files.extend([paths.report(s), paths.model(s), paths.scenario_features(s)]);
    }
    files
        .into_iter()
        .map(|p| (p.display().to_string().replace(&paths.root.display().to_string(), ""), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn resumed_run_matches_fresh_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(3);
    let manifest = write_small_dataset(dir.path(), &cfg);
    let fresh = RunPaths::new(dir.path().join("fresh"));
    let first = run_pipeline(&inputs(&manifest, &fresh.root), &cfg).unwrap();

    let log = read_stage_log(&fresh.stage_log()).unwrap();
    let pids: Vec<String> = io::read_manifest(&manifest).unwrap().patch_ids().map(String::from).collect();
    for stage in ["graph", "measures"] {
        let seen: Vec<&String> = log.iter().filter(|(s, _, _)| s == stage).map(|(_, p, _)| p).collect();
        assert_eq!(seen, pids.iter().collect::<Vec<_>>(), "{stage} touches each patch once, in manifest order");
    }
    assert!(log.iter().all(|(_, _, a)| a == "computed"));

    // Interrupt-and-resume: copy the fresh run, delete artifacts from several stages.
    let resumed = RunPaths::new(dir.path().join("resumed"));
    copy_dir(&fresh.root, &resumed.root);
    std::fs::remove_file(resumed.stage_log()).unwrap();
    std::fs::remove_file(resumed.graph(&pids[0])).unwrap();
    std::fs::remove_file(resumed.measures(&pids[0])).unwrap();
    std::fs::remove_file(resumed.measures(&pids[5])).unwrap();
    std::fs::remove_file(resumed.report(Scenario::Measures)).unwrap();
    std::fs::remove_file(resumed.model(Scenario::Predictions)).unwrap();
    std::fs::remove_file(resumed.ttest()).unwrap();
    let second = run_pipeline(&inputs(&manifest, &resumed.root), &cfg).unwrap();
    assert_eq!(first.reports, second.reports);
    assert_eq!(outputs(&fresh), outputs(&resumed));

    let log = read_stage_log(&resumed.stage_log()).unwrap();
    let action = |stage: &str, item: &str| {
        log.iter().find(|(s, i, _)| s == stage && i == item).map(|(_, _, a)| a.clone()).unwrap()
    };
    assert_eq!(action("graph", &pids[0]), "computed");
    assert_eq!(action("graph", &pids[1]), "reused");
    assert_eq!(action("measures", &pids[5]), "computed");
    assert_eq!(action("evaluate", "measures"), "computed");
    assert_eq!(action("evaluate", "features"), "reused");
    assert_eq!(action("train", "predictions"), "computed");
    assert_eq!(log.iter().filter(|(s, _, _)| s == "measures").count(), pids.len());

    // A fresh run elsewhere with the same seed is identical as well.
    let again = RunPaths::new(dir.path().join("again"));
    run_pipeline(&inputs(&manifest, &again.root), &cfg).unwrap();
    assert_eq!(outputs(&fresh), outputs(&again));
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let target = to.join(e.file_name());
        if e.path().is_dir() {
            copy_dir(&e.path(), &target);
        } else {
            std::fs::copy(e.path(), target).unwrap();
        }
    }
}

#[test]
fn empty_manifest_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = RunInputs {
        manifest: DatasetManifest::default(),
        points_dir: dir.path().to_path_buf(),
        out: dir.path().join("run"),
    };
    let e = run_pipeline(&inputs, &small_config(0)).unwrap_err();
    let stage = e.downcast_ref::<StageError>().expect("stage error");
    assert_eq!(stage.stage, "manifest");
}

#[test]
fn failing_patch_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(1);
    let manifest = write_small_dataset(dir.path(), &cfg);
    let m = io::read_manifest(&manifest).unwrap();
    let victim = m.images[4].patches[0].patch_id.clone();
    std::fs::write(manifest.parent().unwrap().join("points").join(format!("{victim}.csv")), "node_id,x,y\n0,1,1\n1,nan,2\n").unwrap();
    let e = run_pipeline(&inputs(&manifest, &dir.path().join("run")), &cfg).unwrap_err();
    let stage = e.downcast_ref::<StageError>().expect("stage error");
    assert_eq!(stage.stage, "graph");
    assert_eq!(stage.patch_id.as_deref(), Some(victim.as_str()));
}

//! Stratified fold assignment.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{DatasetManifest, Grade};

/// Fold index per item: within each class, items are shuffled with `seed` and
/// dealt round-robin. The dealing position carries over between classes so
/// total fold sizes also differ by at most one.
pub fn stratified_assignment(labels: &[Grade], n_folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: BTreeMap<Grade, Vec<usize>> = BTreeMap::new();
    for (i, &g) in labels.iter().enumerate() {
        by_class.entry(g).or_default().push(i);
    }
    let mut fold = alloc::vec![0; labels.len()];
    let mut next = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            fold[i] = next % n_folds;
            next += 1;
        }
    }
    fold
}

/// Assigns every image of `manifest` to one of `n_folds` stratified folds.
pub fn split_folds(manifest: &DatasetManifest, n_folds: usize, seed: u64) -> Result<DatasetManifest> {
    if n_folds == 0 {
        return Err(Error::InvalidConfig("n_folds must be >= 1".into()));
    }
    if manifest.images.is_empty() {
        return Err(Error::TooFewImages("manifest has no images".into()));
    }
    let labels: Vec<Grade> = manifest.images.iter().map(|im| im.grade).collect();
    let mut per_class: BTreeMap<Grade, usize> = BTreeMap::new();
    for &g in &labels {
        *per_class.entry(g).or_default() += 1;
    }
    if let Some((g, c)) = per_class.iter().find(|(_, &c)| c < n_folds) {
        return Err(Error::TooFewImages(format!("grade {g} has {c} images, need {n_folds}")));
    }
    let folds = stratified_assignment(&labels, n_folds, seed);
    let mut out = manifest.clone();
    out.folds = manifest
        .images
        .iter()
        .zip(folds)
        .map(|(im, f)| (im.image_id.clone(), f))
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_manifest, ImageEntry};

    fn manifest(counts: &[(Grade, usize)]) -> DatasetManifest {
        let mut m = DatasetManifest::default();
        for &(g, c) in counts {
            for i in 0..c {
                m.images.push(ImageEntry {
                    image_id: format!("g{g}_{i}"),
                    grade: g,
                    patches: Vec::new(),
                });
            }
        }
        m
    }

    fn fold_counts(m: &DatasetManifest, grade: Grade) -> [usize; 3] {
        let mut c = [0; 3];
        for im in m.images.iter().filter(|im| im.grade == grade) {
            c[m.folds[&im.image_id]] += 1;
        }
        c
    }

    #[test]
    fn nine_images_one_per_class_per_fold() {
        let m = split_folds(&manifest(&[(1, 3), (2, 3), (3, 3)]), 3, 11).unwrap();
        for g in 1..=3 {
            assert_eq!(fold_counts(&m, g), [1, 1, 1]);
        }
        assert!(validate_manifest(&m).is_empty());
    }

    #[test]
    fn uneven_grade_counts_stay_within_one() {
        for seed in 0..20 {
            let m = split_folds(&manifest(&[(1, 71), (2, 33), (3, 35)]), 3, seed).unwrap();
            for g in 1..=3 {
                let c = fold_counts(&m, g);
                assert!(c.iter().max().unwrap() - c.iter().min().unwrap() <= 1, "{c:?}");
            }
            assert!(validate_manifest(&m).is_empty());
        }
    }

    #[test]
    fn seeded() {
        let base = manifest(&[(1, 10), (2, 10)]);
        assert_eq!(split_folds(&base, 3, 5).unwrap(), split_folds(&base, 3, 5).unwrap());
        assert_ne!(split_folds(&base, 3, 5).unwrap().folds, split_folds(&base, 3, 6).unwrap().folds);
    }

    #[test]
    fn too_few_images() {
        assert!(matches!(
            split_folds(&manifest(&[(1, 5), (2, 2)]), 3, 0),
            Err(Error::TooFewImages(_))
        ));
        assert!(split_folds(&DatasetManifest::default(), 3, 0).is_err());
    }
}

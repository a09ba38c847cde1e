//! Face corpus ingestion from `root/<identity>/<image>` trees, identity
//! selection and seeded train/test splits.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

/// Grayscale crop size of the face corpus, `(width, height)`.
pub const EXPECTED_DIMS: (usize, usize) = (84, 112);

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "pgm", "pnm"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Identities need strictly more than this many decodable images.
    pub min_images_exclusive: usize,
    /// Required `(width, height)`; `None` accepts any uniform size.
    pub expected_dims: Option<(usize, usize)>,
    /// Bilinearly resize mismatched images to `expected_dims` instead of failing.
    pub resize: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            min_images_exclusive: 100,
            expected_dims: Some(EXPECTED_DIMS),
            resize: false,
        }
    }
}

/// Decoded grayscale faces with identity labels, sorted by (identity, file name).
#[derive(Debug, Clone)]
pub struct FaceImageSet {
    pub images: Vec<GrayImage>,
    pub labels: Vec<usize>,
    pub names: Vec<String>,
    /// `identity/file` relative to the corpus root.
    pub paths: Vec<String>,
}

impl FaceImageSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn count_of(&self, label: usize) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// SHA-256 over paths, names, dimensions and pixels in corpus order.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for ((img, &label), path) in self.images.iter().zip(&self.labels).zip(&self.paths) {
            hasher.update(path.as_bytes());
            hasher.update([0]);
            hasher.update(self.names[label].as_bytes());
            hasher.update([0]);
            hasher.update((img.width() as u32).to_le_bytes());
            hasher.update((img.height() as u32).to_le_bytes());
            hasher.update(img.pixels());
        }
        to_hex(&hasher.finalize())
    }

    /// Writes the set as PNG files under `root/<identity>/`.
    pub fn write_tree(&self, root: impl AsRef<Path>) -> Result<()> {
        let root = root.as_ref();
        for (img, path) in self.images.iter().zip(&self.paths) {
            let target = root.join(path);
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            img.save_png(&target)?;
        }
        Ok(())
    }
}

pub(crate) fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCount {
    pub name: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

/// Record of what was ingested and why anything was left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceCorpusManifest {
    pub root: PathBuf,
    pub options: IngestOptions,
    /// Selected identities in label order.
    pub identities: Vec<IdentityCount>,
    pub excluded_identities: Vec<IdentityCount>,
    pub total_selected: usize,
    pub skipped_files: Vec<SkippedFile>,
    pub resized_files: usize,
    pub image_width: usize,
    pub image_height: usize,
    pub content_sha256: String,
}

fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| !n.starts_with('.'))
                .unwrap_or(false)
        })
        .collect();
    entries.sort();
    Ok(entries)
}

/// Loads and selects identities from a `root/<identity>/<image>` tree.
pub fn ingest(root: impl AsRef<Path>, options: &IngestOptions) -> Result<(FaceImageSet, FaceCorpusManifest)> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root is not a directory"),
        ));
    }
    let mut files: Vec<(String, PathBuf)> = Vec::new();
    for dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let identity = dir.file_name().unwrap().to_string_lossy().into_owned();
        for file in sorted_entries(&dir)? {
            if file.is_file() && is_image_file(&file) {
                files.push((identity.clone(), file));
            }
        }
    }

    let decoded: Vec<std::result::Result<GrayImage, String>> = files
        .par_iter()
        .map(|(_, path)| GrayImage::open(path).map_err(|e| e.to_string()))
        .collect();

    let mut skipped_files = Vec::new();
    let mut per_identity: BTreeMap<String, Vec<(String, GrayImage)>> = BTreeMap::new();
    for ((identity, path), result) in files.iter().zip(decoded) {
        let rel = format!("{identity}/{}", path.file_name().unwrap().to_string_lossy());
        match result {
            Ok(img) => per_identity.entry(identity.clone()).or_default().push((rel, img)),
            Err(reason) => {
                log::warn!("skipping {}: {reason}", path.display());
                skipped_files.push(SkippedFile { path: rel, reason });
            }
        }
    }
    if per_identity.is_empty() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no decodable images under the dataset root"),
        ));
    }

    let mut identities = Vec::new();
    let mut excluded_identities = Vec::new();
    let mut set = FaceImageSet {
        images: Vec::new(),
        labels: Vec::new(),
        names: Vec::new(),
        paths: Vec::new(),
    };
    for (name, items) in per_identity {
        let count = items.len();
        if count <= options.min_images_exclusive {
            excluded_identities.push(IdentityCount { name, count });
            continue;
        }
        let label = set.names.len();
        for (rel, img) in items {
            set.images.push(img);
            set.labels.push(label);
            set.paths.push(rel);
        }
        identities.push(IdentityCount {
            name: name.clone(),
            count,
        });
        set.names.push(name);
    }
    if set.is_empty() {
        return Err(Error::Argument(format!(
            "no identity has more than {} images",
            options.min_images_exclusive
        )));
    }

    let dims_of = |img: &GrayImage| (img.width(), img.height());
    let target = match options.expected_dims {
        Some(d) => d,
        None => {
            let mut freq: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            set.images.iter().for_each(|img| *freq.entry(dims_of(img)).or_default() += 1);
            freq.into_iter().max_by_key(|&(d, n)| (n, std::cmp::Reverse(d))).unwrap().0
        }
    };
    let offenders: Vec<usize> = (0..set.len()).filter(|&i| dims_of(&set.images[i]) != target).collect();
    let mut resized_files = 0;
    if !offenders.is_empty() {
        if options.resize && options.expected_dims.is_some() {
            for &i in &offenders {
                set.images[i] = set.images[i].resize_bilinear(target.0, target.1)?;
            }
            resized_files = offenders.len();
        } else {
            let listed: Vec<String> = offenders
                .iter()
                .take(20)
                .map(|&i| {
                    let (w, h) = dims_of(&set.images[i]);
                    format!("{} ({w}x{h})", set.paths[i])
                })
                .collect();
            return Err(Error::Dimension(format!(
                "{} images are not {}x{}: {}{}",
                offenders.len(),
                target.0,
                target.1,
                listed.join(", "),
                if offenders.len() > 20 { ", ..." } else { "" }
            )));
        }
    }

    let manifest = FaceCorpusManifest {
        root: root.to_path_buf(),
        options: options.clone(),
        total_selected: set.len(),
        identities,
        excluded_identities,
        skipped_files,
        resized_files,
        image_width: target.0,
        image_height: target.1,
        content_sha256: set.content_hash(),
    };
    Ok((set, manifest))
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Argument(format!("train fraction {fraction} is outside (0, 1)")));
    }
    Ok(())
}

/// Seeded random split into `round(n * fraction)` train and the rest test,
/// each returned in ascending order.
pub fn split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    check_fraction(fraction)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (n as f64 * fraction).round() as usize;
    let mut test = idx.split_off(n_train);
    idx.sort_unstable();
    test.sort_unstable();
    Ok((idx, test))
}

/// Per-label seeded split keeping each class at `round(n_c * fraction)` training items.
pub fn stratified_split(labels: &[usize], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    check_fraction(fraction)?;
    let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (_, mut idx) in by_label {
        idx.shuffle(&mut rng);
        let n_train = (idx.len() as f64 * fraction).round() as usize;
        test.extend(idx.split_off(n_train));
        train.extend(idx);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Deterministic stand-in face corpus for demos, tests and benchmarks.
///
/// Each identity owns a fixed layout of bright and dark blobs; every image
/// jitters that layout by a few pixels, varies contrast and adds noise.
pub fn synthetic_faces(
    identities: usize,
    per_identity: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> FaceImageSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = FaceImageSet {
        images: Vec::new(),
        labels: Vec::new(),
        names: (0..identities).map(|i| format!("person_{i:02}")).collect(),
        paths: Vec::new(),
    };
    for label in 0..identities {
        let blobs: Vec<(f64, f64, f64, f64)> = (0..7)
            .map(|_| {
                (
                    rng.gen_range(0.15..0.85) * height as f64,
                    rng.gen_range(0.15..0.85) * width as f64,
                    rng.gen_range(2.5..8.0),
                    rng.gen_range(-90.0..90.0),
                )
            })
            .collect();
        for k in 0..per_identity {
            let (dy, dx) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let contrast = rng.gen_range(0.8..1.2);
            let base = rng.gen_range(90.0..150.0);
            let pixels: Vec<u8> = (0..width * height)
                .map(|i| {
                    let (r, c) = ((i / width) as f64, (i % width) as f64);
                    let shade: f64 = blobs
                        .iter()
                        .map(|&(br, bc, s, amp)| {
                            let d2 = (r - br - dy).powi(2) + (c - bc - dx).powi(2);
                            amp * (-d2 / (2.0 * s * s)).exp()
                        })
                        .sum();
                    let noise: f64 = rng.gen_range(-12.0..12.0);
                    (base + contrast * shade + noise).round().clamp(0.0, 255.0) as u8
                })
                .collect();
            set.images.push(GrayImage::new(width, height, pixels).expect("sized buffer"));
            set.labels.push(label);
            set.paths.push(format!("{}/{}_{k:04}.png", set.names[label], set.names[label]));
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        let (train, test) = split(1140, 0.8, 7).unwrap();
        assert_eq!((train.len(), test.len()), (912, 228));
        let (train, test) = split(2, 0.5, 0).unwrap();
        assert_eq!((train.len(), test.len()), (1, 1));
    }

    #[test]
    fn split_is_a_seeded_partition() {
        let a = split(50, 0.8, 3).unwrap();
        assert_eq!(a, split(50, 0.8, 3).unwrap());
        assert_ne!(a, split(50, 0.8, 4).unwrap());
        let mut all: Vec<usize> = a.0.iter().chain(&a.1).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn fraction_out_of_range() {
        assert!(split(10, 0.0, 0).is_err());
        assert!(split(10, 1.0, 0).is_err());
        assert!(stratified_split(&[0, 1], 1.5, 0).is_err());
    }

    #[test]
    fn stratified_keeps_class_shares() {
        let labels: Vec<usize> = (0..100).map(|i| if i < 80 { 0 } else { 1 }).collect();
        let (train, test) = stratified_split(&labels, 0.75, 1).unwrap();
        assert_eq!(train.iter().filter(|&&i| labels[i] == 1).count(), 15);
        assert_eq!(train.len() + test.len(), 100);
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = synthetic_faces(2, 3, 20, 24, 9);
        let b = synthetic_faces(2, 3, 20, 24, 9);
        assert_eq!(a.content_hash(), b.content_hash());
        assert_eq!(a.len(), 6);
        assert_eq!(a.paths[4], "person_01/person_01_0001.png");
    }
}

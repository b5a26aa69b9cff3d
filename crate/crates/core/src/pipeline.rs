//! End-to-end stages as run by the command-line tool: extract, train,
//! evaluate, predict and the linear/RBF × kernel-PCA comparison table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::colorspace::{rgb_to_hsv, rgb_to_lab, LabImage, PlaneImage};
use crate::dataset::{
    load_manifest, resolve, split, ClassLabel, ClassMode, ManifestEntry, RgbImage, RoiMask,
    SplitSpec, Target,
};
use crate::detector::{detect, DetectorParams, InterestPoint};
use crate::eval_metrics::{
    aggregate_image, confusion, metrics, EvalLevel, MetricsReport, PointVote,
};
use crate::features::{extract, PointSample, DEFAULT_WINDOW};
use crate::learn::{train_svm, KernelSpec, Prediction, SvmModel, TrainConfig, DEFAULT_GAMMA};
use crate::{Error, Result};

pub const MODEL_VERSION: &str = "capsule-screen-model/1";
pub const REPORT_VERSION: &str = "capsule-screen-report/1";

/// Plane the detector runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    L,
    A,
    B,
    H,
    S,
    V,
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l" => Ok(Channel::L),
            "a" => Ok(Channel::A),
            "b" => Ok(Channel::B),
            "h" => Ok(Channel::H),
            "s" => Ok(Channel::S),
            "v" => Ok(Channel::V),
            other => Err(format!(
                "unknown channel '{other}' (expected L, a, b, H, S or V)"
            )),
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::L => "L",
            Channel::A => "a",
            Channel::B => "b",
            Channel::H => "H",
            Channel::S => "S",
            Channel::V => "V",
        })
    }
}

fn channel_plane(img: &RgbImage, lab: &LabImage, channel: Channel) -> PlaneImage {
    match channel {
        Channel::L => lab.l.clone(),
        Channel::A => lab.a.clone(),
        Channel::B => lab.b.clone(),
        Channel::H => rgb_to_hsv(img).h,
        Channel::S => rgb_to_hsv(img).s,
        Channel::V => rgb_to_hsv(img).v,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractConfig {
    pub channel: Channel,
    pub detector: DetectorParams,
    pub window: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            channel: Channel::A,
            detector: DetectorParams::default(),
            window: DEFAULT_WINDOW,
        }
    }
}

/// Interest points and their descriptors for one frame.
#[derive(Debug, Clone)]
pub struct FrameFeatures {
    pub points: Vec<InterestPoint>,
    pub features: Vec<crate::features::FeatureVector>,
}

pub fn extract_frame(
    image: &RgbImage,
    mask: Option<&RoiMask>,
    config: &ExtractConfig,
) -> Result<FrameFeatures> {
    let lab = rgb_to_lab(image);
    let plane = channel_plane(image, &lab, config.channel);
    let points = detect(&plane, mask, &config.detector)?;
    let features = extract(&lab, &points, config.window)?;
    Ok(FrameFeatures { points, features })
}

/// Loads the frame (and mask, if any) of one manifest entry.
pub fn load_entry(manifest: &Path, entry: &ManifestEntry) -> Result<(RgbImage, Option<RoiMask>)> {
    let image = RgbImage::load(&resolve(manifest, &entry.image_path))?;
    let mask = match &entry.mask_path {
        Some(p) => {
            let mask = RoiMask::load(&resolve(manifest, p))?;
            if (mask.width(), mask.height()) != (image.width(), image.height()) {
                return Err(Error::Data(format!(
                    "mask {}x{} does not match image {}x{}",
                    mask.width(),
                    mask.height(),
                    image.width(),
                    image.height()
                )));
            }
            if entry.label.is_lesion() && mask.count() == 0 {
                return Err(Error::Data("mask of an abnormal frame is empty".into()));
            }
            Some(mask)
        }
        None => None,
    };
    Ok((image, mask))
}

pub fn extract_entry(
    manifest: &Path,
    entry: &ManifestEntry,
    config: &ExtractConfig,
) -> Result<Vec<PointSample>> {
    let (image, mask) = load_entry(manifest, entry)?;
    let frame = extract_frame(&image, mask.as_ref(), config)?;
    Ok(frame
        .points
        .iter()
        .zip(frame.features)
        .map(|(p, features)| PointSample {
            image_id: entry.image_id.clone(),
            x: p.x,
            y: p.y,
            scale: p.scale,
            features,
            label: entry.label,
        })
        .collect())
}

#[derive(Debug)]
pub struct ExtractOutcome {
    /// Rows in manifest order.
    pub samples: Vec<PointSample>,
    pub images: usize,
    pub failures: Vec<(String, Error)>,
}

/// Extracts every manifest entry. Images are processed in parallel; rows
/// keep manifest order. A failing entry is recorded and skipped.
pub fn extract_manifest(manifest: &Path, config: &ExtractConfig) -> Result<ExtractOutcome> {
    config.detector.validate()?;
    let entries = load_manifest(manifest)?;
    let results: Vec<Result<Vec<PointSample>>> = entries
        .par_iter()
        .map(|e| extract_entry(manifest, e, config))
        .collect();
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for (entry, r) in entries.iter().zip(results) {
        match r {
            Ok(rows) => samples.extend(rows),
            Err(e) => failures.push((entry.image_id.clone(), e)),
        }
    }
    Ok(ExtractOutcome {
        samples,
        images: entries.len() - failures.len(),
        failures,
    })
}

/// What the `train` stage writes: the classifier plus the image-level split
/// it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: String,
    pub mode: ClassMode,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub train_ids: Vec<String>,
    pub classifier: SvmModel,
}

impl ModelFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: ModelFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        if model.version != MODEL_VERSION {
            return Err(Error::Data(format!(
                "unsupported model version '{}', expected '{MODEL_VERSION}'",
                model.version
            )));
        }
        let k = model.classifier.classes.len();
        if model.classifier.machines.len() != k * k.saturating_sub(1) / 2 {
            return Err(Error::Data(format!(
                "model has {} machines for {k} classes",
                model.classifier.machines.len()
            )));
        }
        Ok(model)
    }
}

/// Sidecar listing held-out image ids next to a model file.
pub fn test_ids_path(model: &Path) -> PathBuf {
    model.with_extension("test_ids.txt")
}

pub fn write_ids(path: &Path, ids: &[String]) -> Result<()> {
    let mut text = String::new();
    for id in ids {
        text.push_str(id);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_ids(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: ModelFile,
    pub test_ids: Vec<String>,
}

/// Image ids with their label, sorted by id.
fn image_labels(samples: &[PointSample]) -> Result<Vec<(String, ClassLabel)>> {
    let mut labels: BTreeMap<&str, ClassLabel> = BTreeMap::new();
    for s in samples {
        if let Some(prev) = labels.insert(&s.image_id, s.label) {
            if prev != s.label {
                return Err(Error::Data(format!(
                    "image '{}' appears with labels {prev} and {}",
                    s.image_id, s.label
                )));
            }
        }
    }
    Ok(labels
        .into_iter()
        .map(|(id, l)| (id.to_string(), l))
        .collect())
}

/// Splits images, then trains on the points of the training images.
pub fn train_from_samples(
    samples: &[PointSample],
    mode: ClassMode,
    split_spec: &SplitSpec,
    config: &TrainConfig,
) -> Result<Trained> {
    let images = image_labels(samples)?;
    if images.is_empty() {
        return Err(Error::Data("feature table is empty".into()));
    }
    let (train, test) = split(&images, split_spec)?;
    let train_ids: BTreeSet<&str> = train.iter().map(|(id, _)| id.as_str()).collect();
    let (xs, ts): (Vec<[f64; 9]>, Vec<Target>) = samples
        .iter()
        .filter(|s| train_ids.contains(s.image_id.as_str()))
        .map(|s| (s.features.to_array(), s.label.target(mode)))
        .unzip();
    let classifier = train_svm(&xs, &ts, config)?;
    Ok(Trained {
        model: ModelFile {
            version: MODEL_VERSION.to_string(),
            mode,
            train_fraction: split_spec.train_fraction,
            split_seed: split_spec.seed,
            train_ids: train.into_iter().map(|(id, _)| id).collect(),
            classifier,
        },
        test_ids: test.into_iter().map(|(id, _)| id).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub mode: ClassMode,
    pub kernel: String,
    pub c: f64,
    pub gamma: Option<f64>,
    pub kpca: bool,
    pub seed: u64,
    pub split_seed: u64,
    pub train_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: String,
    pub config: ReportConfig,
    pub test_images: usize,
    pub point: MetricsReport,
    pub image: MetricsReport,
}

impl EvalReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn report_config(model: &ModelFile) -> ReportConfig {
    let cfg = &model.classifier.config;
    ReportConfig {
        mode: model.mode,
        kernel: cfg.kernel.name().to_string(),
        c: cfg.c,
        gamma: match cfg.kernel {
            KernelSpec::Rbf { gamma } => Some(gamma),
            KernelSpec::Linear => None,
        },
        kpca: cfg.use_kpca,
        seed: cfg.seed,
        split_seed: model.split_seed,
        train_fraction: model.train_fraction,
    }
}

/// Point- and image-level metrics over the held-out images `test_ids`.
///
/// Refuses ids the model was trained on, and test images without any
/// extracted point.
pub fn evaluate(
    model: &ModelFile,
    samples: &[PointSample],
    test_ids: &[String],
) -> Result<EvalReport> {
    if test_ids.is_empty() {
        return Err(Error::Data("no test images to evaluate".into()));
    }
    let train: BTreeSet<&str> = model.train_ids.iter().map(String::as_str).collect();
    if let Some(leak) = test_ids.iter().find(|id| train.contains(id.as_str())) {
        return Err(Error::Data(format!(
            "refusing to evaluate '{leak}': it was used to train the model"
        )));
    }
    let wanted: BTreeSet<&str> = test_ids.iter().map(String::as_str).collect();
    let test: Vec<&PointSample> = samples
        .iter()
        .filter(|s| wanted.contains(s.image_id.as_str()))
        .collect();
    let present: BTreeSet<&str> = test.iter().map(|s| s.image_id.as_str()).collect();
    if let Some(missing) = wanted.difference(&present).next() {
        return Err(Error::Data(format!(
            "test image '{missing}' has no rows in the feature table"
        )));
    }
    let clf = &model.classifier;
    let predictions: Vec<Prediction> = test
        .par_iter()
        .map(|s| clf.predict(&s.features.to_array()))
        .collect::<Result<_>>()?;

    let truths: Vec<Target> = test.iter().map(|s| s.label.target(model.mode)).collect();
    let preds: Vec<Target> = predictions.iter().map(|p| p.target).collect();
    let point = metrics(&confusion(&clf.classes, &truths, &preds)?, EvalLevel::Point)?;

    let votes: Vec<PointVote> = test
        .iter()
        .zip(&predictions)
        .map(|(s, p)| PointVote {
            image_id: s.image_id.clone(),
            predicted: p.target,
            margin: p.margin,
        })
        .collect();
    let per_image = aggregate_image(&votes)?;
    let image_truth: BTreeMap<&str, Target> = test
        .iter()
        .map(|s| (s.image_id.as_str(), s.label.target(model.mode)))
        .collect();
    let img_truths: Vec<Target> = per_image
        .keys()
        .map(|id| image_truth[id.as_str()])
        .collect();
    let img_preds: Vec<Target> = per_image.values().copied().collect();
    let image = metrics(
        &confusion(&clf.classes, &img_truths, &img_preds)?,
        EvalLevel::Image,
    )?;

    Ok(EvalReport {
        version: REPORT_VERSION.to_string(),
        config: report_config(model),
        test_images: per_image.len(),
        point,
        image,
    })
}

#[derive(Debug, Clone)]
pub struct FramePrediction {
    pub points: Vec<(InterestPoint, Prediction)>,
    pub label: Target,
}

pub fn predict_frame(
    model: &ModelFile,
    image: &RgbImage,
    mask: Option<&RoiMask>,
    config: &ExtractConfig,
) -> Result<FramePrediction> {
    let frame = extract_frame(image, mask, config)?;
    if frame.points.is_empty() {
        return Err(Error::Data("no interest points detected".into()));
    }
    let mut points = Vec::with_capacity(frame.points.len());
    let mut votes = Vec::with_capacity(frame.points.len());
    for (p, f) in frame.points.into_iter().zip(&frame.features) {
        let pred = model.classifier.predict(&f.to_array())?;
        votes.push(PointVote {
            image_id: String::new(),
            predicted: pred.target,
            margin: pred.margin,
        });
        points.push((p, pred));
    }
    let label = aggregate_image(&votes)?
        .into_values()
        .next()
        .expect("one image");
    Ok(FramePrediction { points, label })
}

/// Hyperparameters shared by all rows of a comparison table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableConfig {
    pub split: SplitSpec,
    pub c: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            split: SplitSpec::default(),
            c: 1.0,
            gamma: DEFAULT_GAMMA,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub version: String,
    pub rows: Vec<EvalReport>,
}

/// Trains and evaluates linear/RBF × kernel PCA off/on for each mode.
pub fn comparison_table(
    samples: &[PointSample],
    modes: &[ClassMode],
    config: &TableConfig,
) -> Result<TableReport> {
    let mut rows = Vec::new();
    for &mode in modes {
        for kernel in [
            KernelSpec::Linear,
            KernelSpec::Rbf {
                gamma: config.gamma,
            },
        ] {
            for use_kpca in [false, true] {
                let train_cfg = TrainConfig {
                    kernel,
                    c: config.c,
                    use_kpca,
                    seed: config.seed,
                    ..Default::default()
                };
                let trained = train_from_samples(samples, mode, &config.split, &train_cfg)?;
                rows.push(evaluate(&trained.model, samples, &trained.test_ids)?);
            }
        }
    }
    Ok(TableReport {
        version: REPORT_VERSION.to_string(),
        rows,
    })
}

/// Plain-text rendering of a comparison table, one line per configuration.
pub fn render_table(table: &TableReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:<7} {:<5} {:>9} {:>9} {:>9} {:>9}",
        "mode", "kernel", "kpca", "pt F1", "pt acc%", "img F1", "img acc%"
    );
    for r in &table.rows {
        let mode = match r.config.mode {
            ClassMode::Biclass => "bi-class",
            ClassMode::Multiclass => "multi",
        };
        let _ = writeln!(
            out,
            "{:<10} {:<7} {:<5} {:>9.2} {:>9.2} {:>9.2} {:>9.2}",
            mode,
            r.config.kernel,
            if r.config.kpca { "on" } else { "off" },
            r.point.macro_f1,
            100.0 * r.point.accuracy,
            r.image.macro_f1,
            100.0 * r.image.accuracy
        );
    }
    out
}

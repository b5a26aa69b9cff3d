//! Frames, ROI masks, labels and manifests.

mod split;
mod synth;

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use split::{split, SplitItem, SplitSpec};
pub use synth::{lesion_signature, synth_dataset, SynthConfig, FRAME_SIZE};

/// Interleaved 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter("image dimensions must be positive".into()));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Dimension {
                expected: width * height * 3,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|e| Error::image(path, e))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        Self::new(w as usize, h as usize, img.into_raw())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        image::save_buffer(
            path,
            &self.data,
            self.width as u32,
            self.height as u32,
            image::ColorType::Rgb8,
        )
        .map_err(|e| Error::image(path, e))
    }
}

/// Per-pixel region-of-interest flags; `true` marks the annotated lesion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl RoiMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Dimension {
                expected: width * height,
                actual: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let bits = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)` of the set bits.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.bits[y * self.width + x] {
                    bb = Some(match bb {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        bb
    }

    /// Reads an 8-bit grayscale PNG; any nonzero sample is inside the ROI.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|e| Error::image(path, e))?
            .to_luma8();
        let (w, h) = img.dimensions();
        let bits = img.into_raw().into_iter().map(|v| v != 0).collect();
        Self::new(w as usize, h as usize, bits)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let raw: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        image::save_buffer(
            path,
            &raw,
            self.width as u32,
            self.height as u32,
            image::ColorType::L8,
        )
        .map_err(|e| Error::image(path, e))
    }
}

/// Frame-level ground truth: `Normal` plus the seven lesion classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassLabel {
    Normal,
    Angioectasia,
    Aphthae,
    ChylousCyst,
    NodularLymphangiectasia,
    Polypoid,
    VascularLesion,
    Bleeding,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 8] = [
        ClassLabel::Normal,
        ClassLabel::Angioectasia,
        ClassLabel::Aphthae,
        ClassLabel::ChylousCyst,
        ClassLabel::NodularLymphangiectasia,
        ClassLabel::Polypoid,
        ClassLabel::VascularLesion,
        ClassLabel::Bleeding,
    ];

    pub fn token(self) -> &'static str {
        match self {
            ClassLabel::Normal => "normal",
            ClassLabel::Angioectasia => "angioectasia",
            ClassLabel::Aphthae => "aphthae",
            ClassLabel::ChylousCyst => "chylous_cyst",
            ClassLabel::NodularLymphangiectasia => "nodular_lymphangiectasia",
            ClassLabel::Polypoid => "polypoid",
            ClassLabel::VascularLesion => "vascular_lesion",
            ClassLabel::Bleeding => "bleeding",
        }
    }

    pub fn is_lesion(self) -> bool {
        self != ClassLabel::Normal
    }

    /// The classifier target for this label under `mode`.
    pub fn target(self, mode: ClassMode) -> Target {
        match (mode, self) {
            (ClassMode::Biclass, l) if l.is_lesion() => Target::Abnormal,
            (_, l) => Target::Label(l),
        }
    }
}

fn normalize_token(s: &str) -> String {
    s.trim()
        .chars()
        .filter(|c| !matches!(c, '_' | '-' | ' '))
        .flat_map(char::to_lowercase)
        .collect()
}

impl FromStr for ClassLabel {
    type Err = String;

    /// Case-insensitive; `_`, `-` and spaces are ignored.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm = normalize_token(s);
        ClassLabel::ALL
            .into_iter()
            .find(|l| normalize_token(l.token()) == norm)
            .ok_or_else(|| s.trim().to_string())
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Normal-vs-abnormal screening, or the full per-lesion labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassMode {
    Biclass,
    Multiclass,
}

impl FromStr for ClassMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "biclass" | "binary" => Ok(ClassMode::Biclass),
            "multiclass" => Ok(ClassMode::Multiclass),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

impl fmt::Display for ClassMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassMode::Biclass => "biclass",
            ClassMode::Multiclass => "multiclass",
        })
    }
}

/// What a classifier predicts: a manifest label, or the collapsed
/// `Abnormal` class used in bi-class screening.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    Label(ClassLabel),
    Abnormal,
}

impl Target {
    pub fn token(self) -> &'static str {
        match self {
            Target::Label(l) => l.token(),
            Target::Abnormal => "abnormal",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if normalize_token(s) == "abnormal" {
            Ok(Target::Abnormal)
        } else {
            s.parse().map(Target::Label)
        }
    }
}

impl Serialize for Target {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.token())
    }
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse()
            .map_err(|t| serde::de::Error::custom(format!("unknown class '{t}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image_id: String,
    pub image_path: PathBuf,
    pub mask_path: Option<PathBuf>,
    pub label: ClassLabel,
}

pub const MANIFEST_HEADER: [&str; 4] = ["image_id", "image_path", "label", "mask_path"];

#[derive(Debug, Deserialize)]
struct ManifestRow {
    image_id: String,
    image_path: String,
    label: String,
    mask_path: Option<String>,
}

/// Reads a manifest CSV. Image and mask paths stay as written (relative to
/// the manifest's directory); see [`resolve`].
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let header = reader.headers().map_err(|e| Error::csv(path, e))?;
    if header.iter().ne(MANIFEST_HEADER) {
        return Err(Error::Header(format!(
            "expected '{}', found '{}'",
            MANIFEST_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (i, row) in reader.deserialize::<ManifestRow>().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| Error::MalformedRow {
            row: row_no,
            message: e.to_string(),
        })?;
        let label = row
            .label
            .parse::<ClassLabel>()
            .map_err(|token| Error::UnknownLabel { token, row: row_no })?;
        if row.image_id.is_empty() {
            return Err(Error::MalformedRow {
                row: row_no,
                message: "empty image_id".into(),
            });
        }
        if !seen.insert(row.image_id.clone()) {
            return Err(Error::DuplicateId(row.image_id));
        }
        let mask_path = row.mask_path.filter(|m| !m.is_empty()).map(PathBuf::from);
        if label == ClassLabel::Normal && mask_path.is_some() {
            return Err(Error::MalformedRow {
                row: row_no,
                message: "normal entries carry no mask".into(),
            });
        }
        entries.push(ManifestEntry {
            image_id: row.image_id,
            image_path: PathBuf::from(row.image_path),
            mask_path,
            label,
        });
    }
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let wrap = |e| Error::csv(path, e);
    w.write_record(MANIFEST_HEADER).map_err(wrap)?;
    for e in entries {
        let mask = e
            .mask_path
            .as_ref()
            .map(|p| p.to_string_lossy().into_owned())
            .unwrap_or_default();
        w.write_record([
            e.image_id.as_str(),
            &e.image_path.to_string_lossy(),
            e.label.token(),
            &mask,
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Resolves a manifest-relative path against the manifest's directory.
pub fn resolve(manifest: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest.parent().unwrap_or(Path::new(".")).join(p)
    }
}

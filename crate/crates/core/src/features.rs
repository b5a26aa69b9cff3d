//! Lab max/min descriptor around each interest point, and the feature table.

use std::path::Path;

use crate::colorspace::{LabImage, PlaneImage};
use crate::dataset::ClassLabel;
use crate::detector::InterestPoint;
use crate::{Error, Result};

pub const DEFAULT_WINDOW: usize = 36;
pub const FEATURE_DIM: usize = 9;

/// Centre values plus window extrema of each Lab channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub l: f64,
    pub a: f64,
    pub b: f64,
    pub max_l: f64,
    pub min_l: f64,
    pub max_a: f64,
    pub min_a: f64,
    pub max_b: f64,
    pub min_b: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_DIM] {
        [
            self.l, self.a, self.b, self.max_l, self.min_l, self.max_a, self.min_a, self.max_b,
            self.min_b,
        ]
    }

    pub fn from_array(v: [f64; FEATURE_DIM]) -> Self {
        let [l, a, b, max_l, min_l, max_a, min_a, max_b, min_b] = v;
        Self {
            l,
            a,
            b,
            max_l,
            min_l,
            max_a,
            min_a,
            max_b,
            min_b,
        }
    }
}

/// One row of the feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSample {
    pub image_id: String,
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    pub features: FeatureVector,
    pub label: ClassLabel,
}

/// Inclusive index range of an even `window` centred on `c`, clamped to
/// `[0, len)`: offsets `-window/2 ..= window/2 - 1`.
pub fn window_range(c: usize, window: usize, len: usize) -> (usize, usize) {
    let half = window / 2;
    (c.saturating_sub(half), (c + half - 1).min(len - 1))
}

fn extrema(plane: &PlaneImage, xs: (usize, usize), ys: (usize, usize)) -> (f64, f64) {
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for y in ys.0..=ys.1 {
        for x in xs.0..=xs.1 {
            let v = plane.get(x, y);
            max = max.max(v);
            min = min.min(v);
        }
    }
    (max, min)
}

/// Feature vector for each point, in input order. Extrema are read from
/// the full Lab image, independent of any ROI.
pub fn extract(
    lab: &LabImage,
    points: &[InterestPoint],
    window: usize,
) -> Result<Vec<FeatureVector>> {
    if window < 2 || !window.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "feature window must be even and at least 2, got {window}"
        )));
    }
    let (w, h) = (lab.width(), lab.height());
    points
        .iter()
        .map(|p| {
            if !(p.x >= 0.0 && p.y >= 0.0 && p.x < w as f64 && p.y < h as f64) {
                return Err(Error::Data(format!(
                    "point ({}, {}) outside {w}x{h} image",
                    p.x, p.y
                )));
            }
            let (x, y) = (p.x.round() as usize, p.y.round() as usize);
            let (x, y) = (x.min(w - 1), y.min(h - 1));
            let xs = window_range(x, window, w);
            let ys = window_range(y, window, h);
            let (max_l, min_l) = extrema(&lab.l, xs, ys);
            let (max_a, min_a) = extrema(&lab.a, xs, ys);
            let (max_b, min_b) = extrema(&lab.b, xs, ys);
            Ok(FeatureVector {
                l: lab.l.get(x, y),
                a: lab.a.get(x, y),
                b: lab.b.get(x, y),
                max_l,
                min_l,
                max_a,
                min_a,
                max_b,
                min_b,
            })
        })
        .collect()
}

pub const CSV_HEADER: [&str; 14] = [
    "image_id", "x", "y", "scale", "L", "a", "b", "max_L", "min_L", "max_a", "min_a", "max_b",
    "min_b", "label",
];

fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv(path: &Path, samples: &[PointSample]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(std::io::BufWriter::new(file), samples).map_err(|e| Error::csv(path, e))
}

pub fn write_csv_to<W: std::io::Write>(out: W, samples: &[PointSample]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for s in samples {
        let mut rec = Vec::with_capacity(CSV_HEADER.len());
        rec.push(s.image_id.clone());
        rec.extend([s.x, s.y, s.scale].map(fmt_real));
        rec.extend(s.features.to_array().map(fmt_real));
        rec.push(s.label.token().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<PointSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let header = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    if let Some(missing) = CSV_HEADER.iter().find(|c| !header.iter().any(|h| h == **c)) {
        return Err(Error::Header(format!("missing column '{missing}'")));
    }
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Header(format!(
            "expected '{}', found '{}'",
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut samples = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::MalformedRow {
                row,
                message: format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len()),
            });
        }
        let real = |k: usize| -> Result<f64> {
            let v: f64 = rec[k].trim().parse().map_err(|_| Error::MalformedRow {
                row,
                message: format!("column '{}': '{}' is not a number", CSV_HEADER[k], &rec[k]),
            })?;
            if !v.is_finite() {
                return Err(Error::MalformedRow {
                    row,
                    message: format!("column '{}' is not finite", CSV_HEADER[k]),
                });
            }
            Ok(v)
        };
        let mut feats = [0.0; FEATURE_DIM];
        for (k, f) in feats.iter_mut().enumerate() {
            *f = real(4 + k)?;
        }
        let label = rec[13]
            .parse::<ClassLabel>()
            .map_err(|token| Error::UnknownLabel { token, row })?;
        samples.push(PointSample {
            image_id: rec[0].to_string(),
            x: real(1)?,
            y: real(2)?,
            scale: real(3)?,
            features: FeatureVector::from_array(feats),
            label,
        });
    }
    Ok(samples)
}

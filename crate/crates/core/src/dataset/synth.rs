//! Synthetic mucosa frames with one coloured elliptical lesion per abnormal
//! frame. Stands in for clinical data when checking the pipeline end to end.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{write_manifest, ClassLabel, ManifestEntry, RgbImage, RoiMask};
use crate::colorspace::lab_to_srgb;
use crate::{Error, Result};

pub const FRAME_SIZE: usize = 320;

/// Mean mucosa colour in Lab.
const MUCOSA_LAB: [f64; 3] = [62.0, 24.0, 20.0];

/// Target Lab colour of each lesion class. `None` for `Normal`.
pub fn lesion_signature(label: ClassLabel) -> Option<[f64; 3]> {
    match label {
        ClassLabel::Normal => None,
        ClassLabel::Bleeding => Some([40.0, 56.0, 36.0]),
        ClassLabel::Angioectasia => Some([52.0, 46.0, 14.0]),
        ClassLabel::Aphthae => Some([84.0, 4.0, 30.0]),
        ClassLabel::ChylousCyst => Some([86.0, 12.0, -2.0]),
        ClassLabel::NodularLymphangiectasia => Some([76.0, 14.0, 10.0]),
        ClassLabel::Polypoid => Some([50.0, 30.0, 42.0]),
        ClassLabel::VascularLesion => Some([34.0, 36.0, -2.0]),
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_per_class: usize,
    pub classes: Vec<ClassLabel>,
    pub seed: u64,
}

/// Smooth value noise on a `cells`×`cells` lattice, values in roughly [-1, 1].
struct ValueNoise {
    cells: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut impl Rng, cells: usize) -> Self {
        let n = cells + 1;
        let lattice = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Self { cells, lattice }
    }

    fn sample(&self, u: f64, v: f64) -> f64 {
        let n = self.cells + 1;
        let fx = u * self.cells as f64;
        let fy = v * self.cells as f64;
        let x0 = (fx.floor() as usize).min(self.cells - 1);
        let y0 = (fy.floor() as usize).min(self.cells - 1);
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let tx = smooth(fx - x0 as f64);
        let ty = smooth(fy - y0 as f64);
        let at = |x: usize, y: usize| self.lattice[y * n + x];
        let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1, y0) * tx;
        let bottom = at(x0, y0 + 1) * (1.0 - tx) + at(x0 + 1, y0 + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

struct Ellipse {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    cos: f64,
    sin: f64,
}

impl Ellipse {
    /// Normalised radius: 1 on the boundary.
    fn radius(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.cx;
        let dy = y - self.cy;
        let u = (dx * self.cos + dy * self.sin) / self.rx;
        let v = (-dx * self.sin + dy * self.cos) / self.ry;
        (u * u + v * v).sqrt()
    }
}

/// Isotropic Gaussian spot added to the Lab channels.
struct Spot {
    cx: f64,
    cy: f64,
    sigma: f64,
    shift: [f64; 3],
}

impl Spot {
    fn weight(&self, x: f64, y: f64) -> f64 {
        let d2 = (x - self.cx).powi(2) + (y - self.cy).powi(2);
        let s2 = self.sigma * self.sigma;
        if d2 > 16.0 * s2 {
            0.0
        } else {
            (-d2 / (2.0 * s2)).exp()
        }
    }
}

/// Straight mucosal fold: a darker ridge with a Gaussian cross-section.
struct Fold {
    px: f64,
    py: f64,
    nx: f64,
    ny: f64,
    width: f64,
    depth: f64,
}

impl Fold {
    fn shift(&self, x: f64, y: f64) -> f64 {
        let d = (x - self.px) * self.nx + (y - self.py) * self.ny;
        -self.depth * (-d * d / (2.0 * self.width * self.width)).exp()
    }
}

/// Renders one frame (and its mask for lesion classes).
///
/// Mucosa carries low-frequency shading, vignetting, folds and specular
/// highlights, all of which live mostly in L. Lesions are ellipses of the
/// class colour with small reddish dots inside.
fn render(label: ClassLabel, rng: &mut ChaCha8Rng) -> (RgbImage, Option<RoiMask>) {
    let size = FRAME_SIZE;
    let extent = size as f64;
    let shade = [ValueNoise::new(rng, 4), ValueNoise::new(rng, 9)];
    let chroma_a = ValueNoise::new(rng, 5);
    let chroma_b = ValueNoise::new(rng, 5);
    let tint = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];

    let folds: Vec<Fold> = (0..rng.random_range(1..=3))
        .map(|_| {
            let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
            Fold {
                px: rng.random_range(0.0..extent),
                py: rng.random_range(0.0..extent),
                nx: angle.cos(),
                ny: angle.sin(),
                width: rng.random_range(2.5..5.0),
                depth: rng.random_range(8.0..14.0),
            }
        })
        .collect();
    let spots: Vec<Spot> = (0..rng.random_range(5..=9))
        .map(|_| {
            let gain = rng.random_range(22.0..34.0);
            Spot {
                cx: rng.random_range(10.0..extent - 10.0),
                cy: rng.random_range(10.0..extent - 10.0),
                sigma: rng.random_range(1.5..3.5),
                shift: [gain, -0.1 * gain, -0.1 * gain],
            }
        })
        .collect();

    let lesion = lesion_signature(label).map(|sig| {
        let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let ellipse = Ellipse {
            cx: rng.random_range(90.0..230.0),
            cy: rng.random_range(90.0..230.0),
            rx: rng.random_range(26.0..42.0),
            ry: rng.random_range(22.0..36.0),
            cos: angle.cos(),
            sin: angle.sin(),
        };
        let jitter = [
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        ];
        let texture = ValueNoise::new(rng, 24);
        (sig, ellipse, jitter, texture)
    });
    let dots: Vec<Spot> = match &lesion {
        Some((_, e, _, _)) => (0..rng.random_range(4..=8))
            .map(|_| {
                let r = 0.7 * rng.random_range(0.0f64..1.0).sqrt();
                let t = rng.random_range(0.0..2.0 * std::f64::consts::PI);
                let (u, v) = (r * e.rx * t.cos(), r * e.ry * t.sin());
                Spot {
                    cx: e.cx + u * e.cos - v * e.sin,
                    cy: e.cy + u * e.sin + v * e.cos,
                    sigma: rng.random_range(2.0..3.5),
                    shift: [-3.0, rng.random_range(9.0..14.0), 2.0],
                }
            })
            .collect(),
        None => Vec::new(),
    };
    let centre = (extent - 1.0) / 2.0;
    let mut data = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let (fx, fy) = (x as f64, y as f64);
            let u = fx / extent;
            let v = fy / extent;
            let r2 = ((fx - centre).powi(2) + (fy - centre).powi(2)) / (centre * centre);
            let shading = 10.0 * shade[0].sample(u, v) + 5.0 * shade[1].sample(u, v) - 14.0 * r2
                + folds.iter().map(|f| f.shift(fx, fy)).sum::<f64>();
            let mut lab = [
                MUCOSA_LAB[0] + shading + rng.random_range(-0.8..0.8),
                MUCOSA_LAB[1] + tint[0] + 2.0 * chroma_a.sample(u, v) + rng.random_range(-0.5..0.5),
                MUCOSA_LAB[2] + tint[1] + 2.5 * chroma_b.sample(u, v) + rng.random_range(-0.5..0.5),
            ];
            if let Some((sig, ellipse, jitter, texture)) = &lesion {
                let r = ellipse.radius(fx, fy);
                // Solid core, linear fall-off over the outer 20% of the radius.
                let w = ((1.0 - r) / 0.2).clamp(0.0, 1.0);
                if w > 0.0 {
                    let t = texture.sample(u, v);
                    let mut inner = [
                        sig[0] + jitter[0] + 0.4 * shading + 3.0 * t,
                        sig[1] + jitter[1] + 2.0 * t,
                        sig[2] + jitter[2] - 2.0 * t,
                    ];
                    for d in &dots {
                        let g = d.weight(fx, fy);
                        for (c, s) in inner.iter_mut().zip(d.shift) {
                            *c += g * s;
                        }
                    }
                    for (c, i) in lab.iter_mut().zip(inner) {
                        *c = (1.0 - w) * *c + w * i;
                    }
                }
            }
            for s in &spots {
                let g = s.weight(fx, fy);
                for (c, d) in lab.iter_mut().zip(s.shift) {
                    *c += g * d;
                }
            }
            data.extend_from_slice(&lab_to_srgb(lab));
        }
    }
    let image = RgbImage::new(size, size, data).expect("frame dimensions are fixed");
    let mask = lesion.map(|(_, ellipse, _, _)| {
        RoiMask::from_fn(size, size, |x, y| ellipse.radius(x as f64, y as f64) <= 1.0)
    });
    (image, mask)
}

/// Generates `n_per_class` frames per class under `out_dir` and writes
/// `out_dir/manifest.csv`. Returns the manifest path.
///
/// Layout: `images/<id>.png`, `masks/<id>_mask.png`, ids `<label>_<nnnn>`.
/// Frames are generated sequentially from one seeded stream, so output is a
/// pure function of the configuration.
pub fn synth_dataset(config: &SynthConfig, out_dir: &Path) -> Result<PathBuf> {
    if !config.classes.contains(&ClassLabel::Normal) {
        return Err(Error::Parameter(
            "synthetic classes must include normal".into(),
        ));
    }
    let mut classes = config.classes.clone();
    classes.sort();
    classes.dedup();

    let images_dir = out_dir.join("images");
    let masks_dir = out_dir.join("masks");
    for d in [out_dir, &images_dir, &masks_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut entries = Vec::with_capacity(classes.len() * config.n_per_class);
    for &label in &classes {
        for i in 0..config.n_per_class {
            let image_id = format!("{}_{i:04}", label.token());
            let (image, mask) = render(label, &mut rng);
            let image_path = PathBuf::from("images").join(format!("{image_id}.png"));
            image.save(&out_dir.join(&image_path))?;
            let mask_path = match mask {
                Some(mask) => {
                    let p = PathBuf::from("masks").join(format!("{image_id}_mask.png"));
                    mask.save(&out_dir.join(&p))?;
                    Some(p)
                }
                None => None,
            };
            entries.push(ManifestEntry {
                image_id,
                image_path,
                mask_path,
                label,
            });
        }
    }
    let manifest = out_dir.join("manifest.csv");
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}

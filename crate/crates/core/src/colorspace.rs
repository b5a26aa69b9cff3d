//! sRGB to CIELab / HSV conversion.
//!
//! The Lab path is the usual IEC 61966-2-1 one: undo the sRGB transfer curve,
//! map linear RGB to XYZ with the sRGB primaries, then normalise by the D65
//! white and apply the CIE cube-root compander. Everything runs in `f64`.

use std::sync::OnceLock;

use crate::dataset::RgbImage;
use crate::{Error, Result};

const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];

/// D65 reference white as the image of linear RGB (1, 1, 1), so sRGB white
/// lands on L = 100, a = b = 0 exactly.
pub const D65_WHITE: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

// (6/29)^3 and the slope/offset of the linear branch below it.
const LAB_EPSILON: f64 = 216.0 / 24389.0;
const LAB_DELTA: f64 = 6.0 / 29.0;

/// Single-channel real-valued raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl PlaneImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter("plane dimensions must be positive".into()));
        }
        if data.len() != width * height {
            return Err(Error::Dimension {
                expected: width * height,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("plane contains non-finite values".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0 && value.is_finite());
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// The three CIELab planes of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    pub l: PlaneImage,
    pub a: PlaneImage,
    pub b: PlaneImage,
}

impl LabImage {
    pub fn width(&self) -> usize {
        self.l.width()
    }

    pub fn height(&self) -> usize {
        self.l.height()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsvImage {
    pub h: PlaneImage,
    pub s: PlaneImage,
    pub v: PlaneImage,
}

#[inline]
fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON {
        t.cbrt()
    } else {
        t / (3.0 * LAB_DELTA * LAB_DELTA) + 4.0 / 29.0
    }
}

#[inline]
fn lab_f_inv(t: f64) -> f64 {
    if t > LAB_DELTA {
        t * t * t
    } else {
        3.0 * LAB_DELTA * LAB_DELTA * (t - 4.0 / 29.0)
    }
}

/// Linear-light value of each 8-bit sRGB code.
fn decode_table() -> &'static [f64; 256] {
    static TABLE: OnceLock<[f64; 256]> = OnceLock::new();
    TABLE.get_or_init(|| std::array::from_fn(|c| srgb_to_linear(c as f64 / 255.0)))
}

/// Converts one 8-bit sRGB triple to `[L, a, b]`.
pub fn srgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let table = decode_table();
    let lin = rgb.map(|c| table[c as usize]);
    let mut xyz = [0.0; 3];
    for (row, out) in RGB_TO_XYZ.iter().zip(xyz.iter_mut()) {
        *out = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
    }
    let fx = lab_f(xyz[0] / D65_WHITE[0]);
    let fy = lab_f(xyz[1] / D65_WHITE[1]);
    let fz = lab_f(xyz[2] / D65_WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Inverse of [`srgb_to_lab`], clipping out-of-gamut colours. Used by the
/// synthetic frame generator.
pub fn lab_to_srgb(lab: [f64; 3]) -> [u8; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = [
        D65_WHITE[0] * lab_f_inv(fx),
        D65_WHITE[1] * lab_f_inv(fy),
        D65_WHITE[2] * lab_f_inv(fz),
    ];
    let mut out = [0u8; 3];
    for (row, o) in XYZ_TO_RGB.iter().zip(out.iter_mut()) {
        let lin = row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2];
        let c = linear_to_srgb(lin.clamp(0.0, 1.0));
        *o = (c * 255.0).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Converts one 8-bit triple to `[H (degrees), S, V]`.
pub fn srgb_to_hsv(rgb: [u8; 3]) -> [f64; 3] {
    let max = rgb.iter().copied().max().unwrap_or(0);
    let min = rgb.iter().copied().min().unwrap_or(0);
    let v = f64::from(max) / 255.0;
    if max == 0 || max == min {
        return [0.0, 0.0, v];
    }
    let delta = f64::from(max - min);
    let s = delta / f64::from(max);
    let [r, g, b] = rgb.map(f64::from);
    let sector = if rgb[0] == max {
        (g - b) / delta
    } else if rgb[1] == max {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let mut h = 60.0 * sector;
    if h < 0.0 {
        h += 360.0;
    }
    if h >= 360.0 {
        h -= 360.0;
    }
    [h, s, v]
}

fn convert3(img: &RgbImage, f: impl Fn([u8; 3]) -> [f64; 3]) -> [PlaneImage; 3] {
    let n = img.width() * img.height();
    let mut planes = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    for px in img.data().chunks_exact(3) {
        let v = f([px[0], px[1], px[2]]);
        for (plane, value) in planes.iter_mut().zip(v) {
            plane.push(value);
        }
    }
    planes.map(|data| PlaneImage {
        width: img.width(),
        height: img.height(),
        data,
    })
}

pub fn rgb_to_lab(img: &RgbImage) -> LabImage {
    let [l, a, b] = convert3(img, srgb_to_lab);
    LabImage { l, a, b }
}

pub fn rgb_to_hsv(img: &RgbImage) -> HsvImage {
    let [h, s, v] = convert3(img, srgb_to_hsv);
    HsvImage { h, s, v }
}

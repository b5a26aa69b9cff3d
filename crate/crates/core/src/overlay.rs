//! Draws detected interest points onto a frame, coloured by predicted class,
//! with a swatch legend in a strip to the right.

use crate::dataset::{RgbImage, Target};
use crate::detector::InterestPoint;

pub const LEGEND_WIDTH: usize = 48;
const SWATCH: usize = 16;
const SWATCH_GAP: usize = 8;

/// Fixed colour per class so overlays from different models agree.
pub fn class_colour(t: Target) -> [u8; 3] {
    use crate::dataset::ClassLabel::*;
    match t {
        Target::Label(Normal) => [40, 200, 60],
        Target::Abnormal => [255, 40, 40],
        Target::Label(Angioectasia) => [255, 140, 0],
        Target::Label(Aphthae) => [255, 255, 255],
        Target::Label(ChylousCyst) => [255, 240, 80],
        Target::Label(NodularLymphangiectasia) => [180, 80, 255],
        Target::Label(Polypoid) => [0, 200, 255],
        Target::Label(VascularLesion) => [30, 60, 255],
        Target::Label(Bleeding) => [255, 0, 120],
    }
}

struct Canvas {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Canvas {
    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            let i = (y as usize * self.width + x as usize) * 3;
            self.data[i..i + 3].copy_from_slice(&c);
        }
    }

    /// Outline restricted to columns `< clip_x`.
    fn circle(&mut self, cx: f64, cy: f64, r: f64, c: [u8; 3], clip_x: usize) {
        let steps = ((2.0 * std::f64::consts::PI * r * 2.0).ceil() as usize).max(16);
        for k in 0..steps {
            let t = 2.0 * std::f64::consts::PI * k as f64 / steps as f64;
            let x = (cx + r * t.cos()).round() as i64;
            let y = (cy + r * t.sin()).round() as i64;
            if x < clip_x as i64 {
                self.put(x, y, c);
            }
        }
    }
}

/// Returns a `(width + LEGEND_WIDTH) × height` image: the frame with one
/// circle of radius `2.5·scale` per point, and a legend swatch per class in
/// `legend` order.
pub fn render(frame: &RgbImage, points: &[(InterestPoint, Target)], legend: &[Target]) -> RgbImage {
    let (w, h) = (frame.width(), frame.height());
    let width = w + LEGEND_WIDTH;
    let mut canvas = Canvas {
        width,
        height: h,
        data: vec![0; width * h * 3],
    };
    for y in 0..h {
        let src = &frame.data()[y * w * 3..(y + 1) * w * 3];
        canvas.data[y * width * 3..y * width * 3 + w * 3].copy_from_slice(src);
    }
    for (p, t) in points {
        let c = class_colour(*t);
        canvas.circle(p.x, p.y, 2.5 * p.scale, c, w);
        canvas.put(p.x.round() as i64, p.y.round() as i64, c);
    }
    for (i, t) in legend.iter().enumerate() {
        let top = SWATCH_GAP + i * (SWATCH + SWATCH_GAP);
        let left = w + (LEGEND_WIDTH - SWATCH) / 2;
        for y in top..(top + SWATCH).min(h) {
            for x in left..left + SWATCH {
                canvas.put(x as i64, y as i64, class_colour(*t));
            }
        }
    }
    RgbImage::new(width, h, canvas.data).expect("canvas dimensions are consistent")
}

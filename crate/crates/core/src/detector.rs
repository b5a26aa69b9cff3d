//! Fast-Hessian interest points.
//!
//! Second derivatives are approximated with box filters evaluated in constant
//! time on an [`IntegralImage`]. A filter of side `L` has lobes of `L/3`
//! pixels; responses are normalised by `1/L²` and scored as
//! `Dxx·Dyy − (0.9·Dxy)²`. Local maxima over a 3×3×3 neighbourhood in
//! (x, y, filter size) become interest points.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::colorspace::PlaneImage;
use crate::dataset::RoiMask;
use crate::{Error, Result};

/// Weight on `Dxy` compensating for the box approximation.
pub const DXY_WEIGHT: f64 = 0.9;

/// Threshold below which halving stops and the top-k fallback takes over.
const THRESHOLD_FLOOR: f64 = 1e-12;

/// Summed-area table with a zero first row and column.
#[derive(Debug, Clone)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    sums: Vec<f64>,
}

impl IntegralImage {
    pub fn new(plane: &PlaneImage) -> Self {
        let (w, h) = (plane.width(), plane.height());
        let stride = w + 1;
        let mut sums = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += plane.get(x, y);
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self {
            width: w,
            height: h,
            sums,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Sum over columns `[0, i)` and rows `[0, j)`.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.sums[j * (self.width + 1) + i]
    }

    /// Sum over the `w`×`h` box whose top-left pixel is `(x, y)`. The box
    /// must lie inside the plane.
    #[inline]
    pub fn box_sum(&self, x: usize, y: usize, w: usize, h: usize) -> f64 {
        debug_assert!(x + w <= self.width && y + h <= self.height);
        self.at(x + w, y + h) - self.at(x, y + h) - self.at(x + w, y) + self.at(x, y)
    }
}

/// Normalised box-filter second derivatives at one pixel and filter size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hessian {
    pub dxx: f64,
    pub dyy: f64,
    pub dxy: f64,
}

impl Hessian {
    pub fn determinant(&self) -> f64 {
        self.dxx * self.dyy - (DXY_WEIGHT * self.dxy).powi(2)
    }

    pub fn trace(&self) -> f64 {
        self.dxx + self.dyy
    }
}

/// Half-width of a filter of side `size`: the filter covers
/// `[x - border, x + border]`.
#[inline]
pub fn filter_border(size: usize) -> usize {
    (size - 1) / 2
}

/// Box-filter Hessian at `(x, y)`, or `None` when the filter does not fit.
pub fn hessian(ii: &IntegralImage, x: usize, y: usize, size: usize) -> Option<Hessian> {
    let b = filter_border(size);
    if x < b || y < b || x + b >= ii.width() || y + b >= ii.height() {
        return None;
    }
    let l = size / 3;
    let span = 2 * l - 1;
    let dxx =
        ii.box_sum(x - b, y + 1 - l, size, span) - 3.0 * ii.box_sum(x - l / 2, y + 1 - l, l, span);
    let dyy =
        ii.box_sum(x + 1 - l, y - b, span, size) - 3.0 * ii.box_sum(x + 1 - l, y - l / 2, span, l);
    let dxy = ii.box_sum(x + 1, y - l, l, l) + ii.box_sum(x - l, y + 1, l, l)
        - ii.box_sum(x - l, y - l, l, l)
        - ii.box_sum(x + 1, y + 1, l, l);
    let norm = 1.0 / (size * size) as f64;
    Some(Hessian {
        dxx: dxx * norm,
        dyy: dyy * norm,
        dxy: dxy * norm,
    })
}

/// Determinant-of-Hessian responses for one filter size over the whole
/// plane. Positions where the filter does not fit hold `NEG_INFINITY`.
pub fn response_layer(ii: &IntegralImage, size: usize) -> Vec<f64> {
    let (w, h) = (ii.width(), ii.height());
    let mut out = vec![f64::NEG_INFINITY; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, v) in row.iter_mut().enumerate() {
            if let Some(hs) = hessian(ii, x, y, size) {
                *v = hs.determinant();
            }
        }
    });
    out
}

/// Scale assigned to a filter of side `size`.
pub fn filter_scale(size: usize) -> f64 {
    1.2 * size as f64 / 9.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub threshold: f64,
    pub octaves: usize,
    pub intervals_per_octave: usize,
    pub initial_filter: usize,
    pub min_points: usize,
    pub max_points: usize,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            threshold: 1.0,
            octaves: 4,
            intervals_per_octave: 4,
            initial_filter: 9,
            min_points: 5,
            max_points: 50,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::Parameter(format!(
                "threshold must be finite and non-negative, got {}",
                self.threshold
            )));
        }
        if self.initial_filter % 6 != 3 {
            return Err(Error::Parameter(format!(
                "initial filter size must be 3 mod 6, got {}",
                self.initial_filter
            )));
        }
        if self.octaves == 0 || self.intervals_per_octave == 0 {
            return Err(Error::Parameter(
                "octaves and intervals must be positive".into(),
            ));
        }
        if self.min_points > self.max_points {
            return Err(Error::Parameter(format!(
                "min points {} exceeds max points {}",
                self.min_points, self.max_points
            )));
        }
        Ok(())
    }

    /// Filter sizes `initial + 6·i·2^o` over all octaves and intervals,
    /// sorted and deduplicated.
    pub fn filter_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = (0..self.octaves)
            .flat_map(|o| {
                (0..self.intervals_per_octave).map(move |i| self.initial_filter + 6 * i * (1 << o))
            })
            .collect();
        sizes.sort_unstable();
        sizes.dedup();
        sizes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterestPoint {
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    pub response: f64,
    /// `true` when the Hessian trace is negative (bright blob on a darker
    /// surround).
    pub bright: bool,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    x: usize,
    y: usize,
    size: usize,
    response: f64,
}

fn rank(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    b.response
        .total_cmp(&a.response)
        .then(a.y.cmp(&b.y))
        .then(a.x.cmp(&b.x))
        .then(a.size.cmp(&b.size))
}

/// Scale-space maxima (non-strict) of the stacked response layers.
fn local_maxima(layers: &[Vec<f64>], sizes: &[usize], w: usize, h: usize) -> Vec<Candidate> {
    (1..layers.len().saturating_sub(1))
        .into_par_iter()
        .flat_map_iter(|s| {
            // The largest of the three filters sets the usable border.
            let border = filter_border(sizes[s + 1]) + 1;
            let mut found = Vec::new();
            if w <= 2 * border || h <= 2 * border {
                return found;
            }
            for y in border..h - border {
                for x in border..w - border {
                    let v = layers[s][y * w + x];
                    let is_max = (s - 1..=s + 1).all(|t| {
                        (y - 1..=y + 1)
                            .all(|yy| (x - 1..=x + 1).all(|xx| layers[t][yy * w + xx] <= v))
                    });
                    if is_max {
                        found.push(Candidate {
                            x,
                            y,
                            size: sizes[s],
                            response: v,
                        });
                    }
                }
            }
            found
        })
        .collect()
}

/// Detects interest points on `plane`, keeping those whose centre lies in
/// `mask` (the whole frame when `None`).
///
/// Responses are computed over the full plane so box filters see context
/// beyond the ROI. If fewer than `min_points` maxima clear the threshold it
/// is halved until they do; once it falls below 1e-12 the strongest
/// `min_points` maxima are taken regardless, topped up with the strongest
/// remaining in-mask samples (kept apart where possible) if there are not
/// enough maxima. Output is
/// sorted by response (ties by y, x, scale) and capped at `max_points`.
pub fn detect(
    plane: &PlaneImage,
    mask: Option<&RoiMask>,
    params: &DetectorParams,
) -> Result<Vec<InterestPoint>> {
    params.validate()?;
    let (w, h) = (plane.width(), plane.height());
    let min_side = 3 * params.initial_filter;
    if w < min_side || h < min_side {
        return Err(Error::Data(format!(
            "plane {w}x{h} is smaller than the {min_side}px minimum filter support"
        )));
    }
    if let Some(m) = mask {
        if (m.width(), m.height()) != (w, h) {
            return Err(Error::Data(format!(
                "mask {}x{} does not match plane {w}x{h}",
                m.width(),
                m.height()
            )));
        }
    }
    let in_mask = |x: usize, y: usize| mask.is_none_or(|m| m.contains(x, y));

    let sizes: Vec<usize> = params
        .filter_sizes()
        .into_iter()
        .filter(|&s| s <= w.min(h))
        .collect();
    let ii = IntegralImage::new(plane);
    let layers: Vec<Vec<f64>> = sizes.par_iter().map(|&s| response_layer(&ii, s)).collect();

    let mut maxima: Vec<Candidate> = local_maxima(&layers, &sizes, w, h)
        .into_iter()
        .filter(|c| in_mask(c.x, c.y))
        .collect();
    maxima.sort_by(rank);

    let mut threshold = params.threshold;
    let mut chosen: Vec<Candidate> = loop {
        let above: Vec<Candidate> = maxima
            .iter()
            .copied()
            .filter(|c| c.response >= threshold)
            .collect();
        if above.len() >= params.min_points {
            break above;
        }
        if threshold < THRESHOLD_FLOOR {
            let mut top: Vec<Candidate> = maxima.iter().copied().take(params.min_points).collect();
            if top.len() < params.min_points {
                top_up(&mut top, &layers, &sizes, w, h, params.min_points, &in_mask);
            }
            break top;
        }
        threshold /= 2.0;
    };
    chosen.sort_by(rank);
    chosen.truncate(params.max_points);

    Ok(chosen
        .into_iter()
        .map(|c| {
            let trace = hessian(&ii, c.x, c.y, c.size).map_or(0.0, |hs| hs.trace());
            InterestPoint {
                x: c.x as f64,
                y: c.y as f64,
                scale: filter_scale(c.size),
                response: c.response,
                bright: trace < 0.0,
            }
        })
        .collect())
}

/// Adds the strongest in-mask samples at positions not yet chosen. Samples
/// closer than `2.5·scale` to a chosen point are skipped while others
/// remain, so the additions spread over the region.
fn top_up(
    chosen: &mut Vec<Candidate>,
    layers: &[Vec<f64>],
    sizes: &[usize],
    w: usize,
    h: usize,
    want: usize,
    in_mask: &impl Fn(usize, usize) -> bool,
) {
    let mut pool: Vec<Candidate> = Vec::new();
    for (layer, &size) in layers.iter().zip(sizes) {
        for y in 0..h {
            for x in 0..w {
                let v = layer[y * w + x];
                if v.is_finite() && in_mask(x, y) {
                    pool.push(Candidate {
                        x,
                        y,
                        size,
                        response: v,
                    });
                }
            }
        }
    }
    pool.sort_by(rank);
    let spaced = |a: &Candidate, b: &Candidate| {
        let r = 2.5 * filter_scale(a.size.max(b.size));
        let d2 = (a.x as f64 - b.x as f64).powi(2) + (a.y as f64 - b.y as f64).powi(2);
        d2 >= r * r
    };
    for strict in [true, false] {
        for c in &pool {
            if chosen.len() >= want {
                return;
            }
            let clear = chosen
                .iter()
                .all(|k| (k.x, k.y) != (c.x, c.y) && (!strict || spaced(k, c)));
            if clear {
                chosen.push(*c);
            }
        }
    }
}

//! Perceptual image distance used for archive retrieval.
//!
//! The default metric is a fixed grid descriptor: the image is resampled to
//! 64x64 grayscale (bilinear), split into an 8x8 grid of 8x8-pixel cells, and
//! each cell contributes its mean intensity and its mean forward-difference
//! gradient magnitude. Distance is the Euclidean norm of the difference of the
//! two 128-dimensional descriptors.

use super::ArchiveError;
use crate::image::Image;
use crate::scalar::Real;

pub const GRID_SIDE: usize = 64;
pub const CELL: usize = 8;
pub const FEATURE_DIM: usize = 2 * (GRID_SIDE / CELL) * (GRID_SIDE / CELL);

/// A perceptual distance with per-image embeddings, so archive entries can
/// memoize their side of the computation.
pub trait PerceptualMetric: Send + Sync {
    fn embed(&self, image: &Image) -> Vec<f64>;

    fn feature_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    fn distance(&self, a: &Image, b: &Image) -> Result<f64, ArchiveError> {
        check_dims(a, b)?;
        Ok(self.feature_distance(&self.embed(a), &self.embed(b)))
    }
}

pub(crate) fn check_dims(a: &Image, b: &Image) -> Result<(), ArchiveError> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(ArchiveError::DimensionMismatch {
            left: (a.width(), a.height()),
            right: (b.width(), b.height()),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GridFeatureMetric;

impl PerceptualMetric for GridFeatureMetric {
    fn embed(&self, image: &Image) -> Vec<f64> {
        grid_features::<f64>(image)
    }
}

/// Distance under the default grid-feature metric.
pub fn image_distance(a: &Image, b: &Image) -> Result<f64, ArchiveError> {
    GridFeatureMetric.distance(a, b)
}

fn grayscale<T: Real>(image: &Image) -> Vec<T> {
    image
        .as_bytes()
        .chunks_exact(3)
        .map(|p| {
            T::of((0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0)
        })
        .collect()
}

/// Bilinear resample with pixel-center alignment.
pub fn resize_bilinear<T: Real>(
    src: &[T],
    width: usize,
    height: usize,
    out_w: usize,
    out_h: usize,
) -> Vec<T> {
    let sx = T::of(width as f64 / out_w as f64);
    let sy = T::of(height as f64 / out_h as f64);
    let half = T::of(0.5);
    let coord = |d: usize, scale: T, n: usize| -> (usize, usize, T) {
        let max = T::of((n - 1) as f64);
        let c = ((T::of(d as f64) + half) * scale - half).max(T::zero()).min(max);
        let c0 = c.floor();
        let i0 = c0.to_usize().unwrap_or(0);
        (i0, (i0 + 1).min(n - 1), c - c0)
    };
    let mut out = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let (y0, y1, fy) = coord(y, sy, height);
        for x in 0..out_w {
            let (x0, x1, fx) = coord(x, sx, width);
            let top = src[y0 * width + x0] * (T::one() - fx) + src[y0 * width + x1] * fx;
            let bottom = src[y1 * width + x0] * (T::one() - fx) + src[y1 * width + x1] * fx;
            out.push(top * (T::one() - fy) + bottom * fy);
        }
    }
    out
}

/// The 128-dimensional grid descriptor, laid out cell-major as
/// `[mean_0, grad_0, mean_1, grad_1, ...]`.
pub fn grid_features<T: Real>(image: &Image) -> Vec<T> {
    let gray = grayscale::<T>(image);
    let g = resize_bilinear(
        &gray,
        image.width() as usize,
        image.height() as usize,
        GRID_SIDE,
        GRID_SIDE,
    );
    let at = |x: usize, y: usize| g[y * GRID_SIDE + x];
    let cells = GRID_SIDE / CELL;
    let count = T::of((CELL * CELL) as f64);
    let mut features = Vec::with_capacity(FEATURE_DIM);
    for cy in 0..cells {
        for cx in 0..cells {
            let mut mean = T::zero();
            let mut grad = T::zero();
            for y in cy * CELL..(cy + 1) * CELL {
                for x in cx * CELL..(cx + 1) * CELL {
                    let v = at(x, y);
                    let dx = if x + 1 < GRID_SIDE { at(x + 1, y) - v } else { T::zero() };
                    let dy = if y + 1 < GRID_SIDE { at(x, y + 1) - v } else { T::zero() };
                    mean = mean + v;
                    grad = grad + (dx * dx + dy * dy).sqrt();
                }
            }
            features.push(mean / count);
            features.push(grad / count);
        }
    }
    features
}

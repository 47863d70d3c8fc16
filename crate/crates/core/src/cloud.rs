use alloc::vec::Vec;

use crate::camera::Pixel;
use crate::point::{self, Point3};

/// Unordered (or image-organized) set of world-frame points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    /// Source pixel of each point when the cloud was lifted from depth.
    pub pixel_index: Option<Vec<Pixel>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self { points, pixel_index: None }
    }

    pub fn with_pixels(points: Vec<Point3>, pixels: Vec<Pixel>) -> Self {
        debug_assert_eq!(points.len(), pixels.len());
        Self { points, pixel_index: Some(pixels) }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Point3> {
        point::centroid(&self.points)
    }

    /// Sub-cloud of the given indices, keeping pixel provenance.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let points = indices.iter().map(|&i| self.points[i]).collect();
        let pixel_index =
            self.pixel_index.as_ref().map(|px| indices.iter().map(|&i| px[i]).collect());
        PointCloud { points, pixel_index }
    }

    /// Keeps points for which `keep` returns true.
    pub fn retain_by(&self, mut keep: impl FnMut(usize, &Point3) -> bool) -> PointCloud {
        let indices: Vec<usize> =
            self.points.iter().enumerate().filter(|(i, p)| keep(*i, p)).map(|(i, _)| i).collect();
        self.select(&indices)
    }

    /// Whether pixel provenance is present, consistent, and inside `width`×`height`.
    pub fn pixels_within(&self, width: usize, height: usize) -> bool {
        match &self.pixel_index {
            None => true,
            Some(px) => {
                px.len() == self.points.len()
                    && px.iter().all(|p| (p.row as usize) < height && (p.col as usize) < width)
            }
        }
    }
}

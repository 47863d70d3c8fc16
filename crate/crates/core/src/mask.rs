//! Binary image masks.

use alloc::vec;
use alloc::vec::Vec;

use crate::camera::Pixel;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![false; width * height] }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), width * height, "mask data length mismatch");
        Self { width, height, data }
    }

    /// Mask with the given pixels set; out-of-bounds pixels are ignored.
    pub fn from_pixels(width: usize, height: usize, pixels: impl IntoIterator<Item = Pixel>) -> Self {
        let mut m = Self::new(width, height);
        for px in pixels {
            if m.in_bounds(px.row as i64, px.col as i64) {
                m.set(px, true);
            }
        }
        m
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn in_bounds(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width
    }

    #[inline]
    pub fn get(&self, px: Pixel) -> bool {
        self.data[px.row as usize * self.width + px.col as usize]
    }

    /// Out-of-bounds reads are `false`.
    #[inline]
    pub fn get_signed(&self, row: i64, col: i64) -> bool {
        self.in_bounds(row, col) && self.data[row as usize * self.width + col as usize]
    }

    #[inline]
    pub fn get_index(&self, idx: usize) -> bool {
        self.data[idx]
    }

    #[inline]
    pub fn set(&mut self, px: Pixel, value: bool) {
        self.data[px.row as usize * self.width + px.col as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|v| *v)
    }

    /// Set pixels in row-major order.
    pub fn pixels(&self) -> Vec<Pixel> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| **v)
            .map(|(i, _)| Pixel::new((i / self.width) as u32, (i % self.width) as u32))
            .collect()
    }

    /// Square (Chebyshev) dilation by `radius` pixels, clipped at the border.
    pub fn dilate(&self, radius: usize) -> BinaryMask {
        if radius == 0 {
            return self.clone();
        }
        let r = radius as i64;
        // Separable: horizontal pass then vertical pass.
        let mut horiz = vec![false; self.data.len()];
        for row in 0..self.height {
            for col in 0..self.width {
                if self.data[row * self.width + col] {
                    let lo = (col as i64 - r).max(0) as usize;
                    let hi = ((col as i64 + r) as usize).min(self.width - 1);
                    horiz[row * self.width + lo..=row * self.width + hi].fill(true);
                }
            }
        }
        let mut out = vec![false; self.data.len()];
        for row in 0..self.height {
            for col in 0..self.width {
                if horiz[row * self.width + col] {
                    let lo = (row as i64 - r).max(0) as usize;
                    let hi = ((row as i64 + r) as usize).min(self.height - 1);
                    for rr in lo..=hi {
                        out[rr * self.width + col] = true;
                    }
                }
            }
        }
        BinaryMask { width: self.width, height: self.height, data: out }
    }

    /// 8-connected components, labelled in row-major discovery order.
    /// Returns per-pixel labels (`u32::MAX` for background) and component sizes.
    pub fn components(&self) -> (Vec<u32>, Vec<usize>) {
        let mut labels = vec![u32::MAX; self.data.len()];
        let mut sizes = Vec::new();
        let mut stack = Vec::new();
        for start in 0..self.data.len() {
            if !self.data[start] || labels[start] != u32::MAX {
                continue;
            }
            let label = sizes.len() as u32;
            let mut size = 0usize;
            labels[start] = label;
            stack.push(start);
            while let Some(idx) = stack.pop() {
                size += 1;
                let (row, col) = ((idx / self.width) as i64, (idx % self.width) as i64);
                for (dr, dc) in NEIGHBORS_8 {
                    let (nr, nc) = (row + dr, col + dc);
                    if self.get_signed(nr, nc) {
                        let n = nr as usize * self.width + nc as usize;
                        if labels[n] == u32::MAX {
                            labels[n] = label;
                            stack.push(n);
                        }
                    }
                }
            }
            sizes.push(size);
        }
        (labels, sizes)
    }

    /// Keeps only the largest 8-connected component (lowest label on ties).
    pub fn largest_component(&self) -> BinaryMask {
        let (labels, sizes) = self.components();
        let mut out = BinaryMask::new(self.width, self.height);
        let Some(best) = argmax_first(&sizes) else {
            return out;
        };
        for (i, l) in labels.iter().enumerate() {
            if *l == best as u32 {
                out.data[i] = true;
            }
        }
        out
    }
}

/// 8-neighborhood offsets `(drow, dcol)` in clockwise order starting north.
pub const NEIGHBORS_8: [(i64, i64); 8] =
    [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)];

fn argmax_first(values: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

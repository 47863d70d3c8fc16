//! Moore-neighbor boundary tracing.

use alloc::vec::Vec;

use crate::camera::Pixel;
use crate::mask::{BinaryMask, NEIGHBORS_8};

/// Ordered outer boundary of the region containing the first set pixel in
/// row-major order, traced clockwise (in image coordinates) with Jacob's
/// stopping criterion. Empty for an empty mask.
pub fn trace_boundary(mask: &BinaryMask) -> Vec<Pixel> {
    let Some(start) = mask.data().iter().position(|v| *v) else {
        return Vec::new();
    };
    let start = Pixel::new((start / mask.width()) as u32, (start % mask.width()) as u32);
    let mut contour = alloc::vec![start];
    // Entered from the west: the west neighbor of the first pixel is background.
    let mut backtrack = 6usize;
    let mut p = start;
    let mut second: Option<Pixel> = None;
    let limit = 4 * mask.count() + 8;
    for _ in 0..limit {
        let mut found = None;
        for k in 1..=8 {
            let d = (backtrack + k) % 8;
            let (dr, dc) = NEIGHBORS_8[d];
            let (r, c) = (p.row as i64 + dr, p.col as i64 + dc);
            if mask.get_signed(r, c) {
                found = Some((Pixel::new(r as u32, c as u32), d));
                break;
            }
        }
        let Some((q, d)) = found else {
            break; // isolated pixel
        };
        if p == start {
            match second {
                None => second = Some(q),
                Some(s) if s == q => break,
                Some(_) => {}
            }
        }
        // The pixel examined just before `q` is background; re-express it relative to `q`.
        let prev = NEIGHBORS_8[(d + 7) % 8];
        let off = (prev.0 - NEIGHBORS_8[d].0, prev.1 - NEIGHBORS_8[d].1);
        backtrack = NEIGHBORS_8.iter().position(|o| *o == off).expect("adjacent ring offsets");
        p = q;
        if p == start {
            continue;
        }
        contour.push(p);
    }
    contour
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_boundary_is_its_perimeter() {
        let mut m = BinaryMask::new(10, 10);
        for r in 2..7 {
            for c in 3..8 {
                m.set(Pixel::new(r, c), true);
            }
        }
        let b = trace_boundary(&m);
        assert_eq!(b.len(), 16);
        assert_eq!(b[0], Pixel::new(2, 3));
        assert_eq!(b[1], Pixel::new(2, 4));
        // All perimeter pixels, each once.
        let mut sorted = b.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 16);
        assert!(b.iter().all(|p| p.row == 2 || p.row == 6 || p.col == 3 || p.col == 7));
        // Consecutive pixels are 8-adjacent.
        for w in b.windows(2) {
            assert!(w[0].distance(w[1]) < 1.5);
        }
    }

    #[test]
    fn single_pixel_region() {
        let mut m = BinaryMask::new(3, 3);
        m.set(Pixel::new(1, 1), true);
        assert_eq!(trace_boundary(&m), alloc::vec![Pixel::new(1, 1)]);
    }
}

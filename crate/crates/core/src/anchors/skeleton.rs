//! Zhang-Suen thinning.

use alloc::vec::Vec;

use crate::camera::Pixel;
use crate::mask::BinaryMask;

/// Thins a mask to a one-pixel-wide 8-connected skeleton.
///
/// Runs both Zhang-Suen sub-iterations until a full pass deletes nothing,
/// so the output is a fixed point (thinning it again changes nothing).
pub fn skeletonize(mask: &BinaryMask) -> BinaryMask {
    let mut m = mask.clone();
    let mut candidates: Vec<Pixel> = m.pixels();
    let mut to_delete = Vec::new();
    loop {
        let mut changed = false;
        for step in 0..2 {
            to_delete.clear();
            for &px in &candidates {
                if m.get(px) && deletable(&m, px, step) {
                    to_delete.push(px);
                }
            }
            for &px in &to_delete {
                m.set(px, false);
            }
            changed |= !to_delete.is_empty();
        }
        if !changed {
            break;
        }
        candidates.retain(|px| m.get(*px));
    }
    m
}

/// Neighbors P2..P9: N, NE, E, SE, S, SW, W, NW.
fn neighbors(m: &BinaryMask, px: Pixel) -> [bool; 8] {
    let (r, c) = (px.row as i64, px.col as i64);
    [
        m.get_signed(r - 1, c),
        m.get_signed(r - 1, c + 1),
        m.get_signed(r, c + 1),
        m.get_signed(r + 1, c + 1),
        m.get_signed(r + 1, c),
        m.get_signed(r + 1, c - 1),
        m.get_signed(r, c - 1),
        m.get_signed(r - 1, c - 1),
    ]
}

fn deletable(m: &BinaryMask, px: Pixel, step: usize) -> bool {
    let p = neighbors(m, px);
    let b = p.iter().filter(|v| **v).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
    if a != 1 {
        return false;
    }
    let [p2, _, p4, _, p6, _, p8, _] = p;
    if step == 0 {
        !(p2 && p4 && p6) && !(p4 && p6 && p8)
    } else {
        !(p2 && p4 && p8) && !(p2 && p6 && p8)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(w: usize, h: usize, r0: usize, r1: usize, c0: usize, c1: usize) -> BinaryMask {
        let mut m = BinaryMask::new(w, h);
        for r in r0..r1 {
            for c in c0..c1 {
                m.set(Pixel::new(r as u32, c as u32), true);
            }
        }
        m
    }

    #[test]
    fn bar_thins_to_its_midline() {
        // Columns 5..25, three rows. Textbook Zhang-Suen trims one pixel at
        // the west end and two at the east end; the expected columns were
        // produced by an independent reference implementation.
        let m = rect(30, 9, 3, 6, 5, 25);
        let px = skeletonize(&m).pixels();
        assert!(px.iter().all(|p| p.row == 4), "{px:?}");
        let cols: Vec<u32> = px.iter().map(|p| p.col).collect();
        assert_eq!(cols, (6..=22).collect::<Vec<u32>>());
    }

    #[test]
    fn single_pixel_is_a_fixed_point() {
        let mut m = BinaryMask::new(3, 3);
        m.set(Pixel::new(1, 1), true);
        assert_eq!(skeletonize(&m), m);
    }

    #[test]
    fn thinning_is_idempotent() {
        let mut m = rect(40, 40, 5, 30, 8, 14);
        for c in 8..35 {
            for r in 20..26 {
                m.set(Pixel::new(r, c), true);
            }
        }
        let s = skeletonize(&m);
        assert_eq!(skeletonize(&s), s);
    }
}

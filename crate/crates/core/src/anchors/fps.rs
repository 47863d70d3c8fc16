//! Farthest point sampling.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::point::Point3;

/// Greedy farthest point sampling.
///
/// Each step picks the point whose distance to everything already selected
/// (seeds included) is largest, ties to the lowest index. Seeds are never
/// returned. Without seeds the first pick is index 0. Returns `k` indices in
/// selection order.
pub fn fps(points: &[Point3], k: usize, seeds: &[Point3]) -> Result<Vec<usize>> {
    if k > points.len() {
        return Err(Error::InvalidInput(format!("cannot select {k} of {} points", points.len())));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut min_d2 = vec![f64::INFINITY; points.len()];
    for s in seeds {
        for (d, p) in min_d2.iter_mut().zip(points) {
            *d = d.min(p.distance_squared(*s));
        }
    }
    let mut chosen = vec![false; points.len()];
    let mut selected = Vec::with_capacity(k);
    let mut next = if seeds.is_empty() { Some(0) } else { argmax(&min_d2, &chosen) };
    while let Some(i) = next {
        selected.push(i);
        chosen[i] = true;
        if selected.len() == k {
            break;
        }
        let s = points[i];
        for (d, p) in min_d2.iter_mut().zip(points) {
            *d = d.min(p.distance_squared(s));
        }
        next = argmax(&min_d2, &chosen);
    }
    Ok(selected)
}

fn argmax(values: &[f64], chosen: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if !chosen[i] && best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_example() {
        let pts: Vec<Point3> = (0..=10).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        assert_eq!(fps(&pts, 2, &[Point3::ORIGIN]).unwrap(), vec![10, 5]);
    }

    #[test]
    fn zero_and_too_many() {
        let pts = [Point3::ORIGIN, Point3::new(1.0, 0.0, 0.0)];
        assert!(fps(&pts, 0, &[]).unwrap().is_empty());
        assert!(matches!(fps(&pts, 3, &[]), Err(Error::InvalidInput(_))));
        assert_eq!(fps(&pts, 2, &[]).unwrap(), vec![0, 1]);
    }
}

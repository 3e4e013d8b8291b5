//! Image measurements used to score reconstructions.

use crate::phantom::Image;

/// Connected bright region of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    /// Intensity-weighted centroid, (row, col) in fractional pixel units.
    pub centroid: (f64, f64),
    pub mass: f64,
    pub peak: f64,
    pub pixels: usize,
}

/// 8-connected components of pixels at or above `rel_threshold * max`.
///
/// Returns an empty list when the image maximum is not positive. Blobs are ordered by
/// decreasing peak value.
pub fn find_blobs(image: &Image, rel_threshold: f64) -> Vec<Blob> {
    let max = image.max();
    if !(max > 0.0) {
        return Vec::new();
    }
    let cut = rel_threshold * max;
    let n = image.side;
    let mut seen = vec![false; n * n];
    let mut blobs = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n * n {
        if seen[start] || image.data[start] < cut {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut m, mut sr, mut sc, mut peak, mut count) = (0.0, 0.0, 0.0, f64::NEG_INFINITY, 0);
        while let Some(i) = stack.pop() {
            let (r, c) = (i / n, i % n);
            let v = image.data[i];
            m += v;
            sr += v * r as f64;
            sc += v * c as f64;
            peak = peak.max(v);
            count += 1;
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let (rr, cc) = (r as isize + dr, c as isize + dc);
                    if rr < 0 || cc < 0 || rr >= n as isize || cc >= n as isize {
                        continue;
                    }
                    let j = rr as usize * n + cc as usize;
                    if !seen[j] && image.data[j] >= cut {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        blobs.push(Blob {
            centroid: (sr / m, sc / m),
            mass: m,
            peak,
            pixels: count,
        });
    }
    blobs.sort_by(|a, b| b.peak.total_cmp(&a.peak));
    blobs
}

/// Intensity-weighted centroid of all pixels at or above `rel_threshold * max`.
pub fn intensity_centroid(image: &Image, rel_threshold: f64) -> Option<(f64, f64)> {
    let max = image.max();
    if !(max > 0.0) {
        return None;
    }
    let cut = rel_threshold * max;
    let (mut m, mut sr, mut sc) = (0.0, 0.0, 0.0);
    for (i, &v) in image.data.iter().enumerate() {
        if v >= cut {
            m += v;
            sr += v * (i / image.side) as f64;
            sc += v * (i % image.side) as f64;
        }
    }
    Some((sr / m, sc / m))
}

pub fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_separate_blobs() {
        let mut img = Image::zeros(8);
        img.set(1, 1, 1.0);
        img.set(1, 2, 1.0);
        img.set(6, 6, 0.5);
        let blobs = find_blobs(&img, 0.3);
        assert_eq!(blobs.len(), 2);
        assert_eq!(blobs[0].centroid, (1.0, 1.5));
        assert_eq!(blobs[1].centroid, (6.0, 6.0));
        assert_eq!(find_blobs(&img, 0.6).len(), 1);
    }

    #[test]
    fn empty_image_has_no_centroid() {
        let img = Image::zeros(4);
        assert!(find_blobs(&img, 0.5).is_empty());
        assert!(intensity_centroid(&img, 0.5).is_none());
    }

    #[test]
    fn centroid_ignores_faint_background() {
        let mut img = Image::zeros(5);
        img.data.iter_mut().for_each(|v| *v = 0.1);
        img.set(3, 1, 1.0);
        assert_eq!(intensity_centroid(&img, 0.5), Some((3.0, 1.0)));
    }
}

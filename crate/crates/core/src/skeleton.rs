//! Zhang–Suen two-subiteration morphological thinning and skeleton length
//! measurement for road masks.

use crate::raster::BinaryMask;

/// Thin a binary mask to a 1-pixel-wide 8-connected skeleton. The result is
/// a subset of the input and preserves the connectivity of each component;
/// re-applying it is a no-op.
pub fn skeletonize(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width, mask.height);
    let mut img = mask.clone();
    let mut to_delete: Vec<usize> = Vec::new();

    loop {
        let mut changed = false;
        for sub in 0..2 {
            to_delete.clear();
            for y in 0..h {
                for x in 0..w {
                    if !img.at(x, y) {
                        continue;
                    }
                    let p = neighborhood(&img, x, y);
                    let b = p.iter().filter(|&&v| v).count();
                    if !(2..=6).contains(&b) {
                        continue;
                    }
                    if transitions(&p) != 1 {
                        continue;
                    }
                    // p = [P2, P3, P4, P5, P6, P7, P8, P9] (N, NE, E, SE, S, SW, W, NW)
                    let (c1, c2) = if sub == 0 {
                        // P2·P4·P6 = 0 and P4·P6·P8 = 0
                        (p[0] && p[2] && p[4], p[2] && p[4] && p[6])
                    } else {
                        // P2·P4·P8 = 0 and P2·P6·P8 = 0
                        (p[0] && p[2] && p[6], p[0] && p[4] && p[6])
                    };
                    if !c1 && !c2 {
                        to_delete.push(y * w + x);
                    }
                }
            }
            if !to_delete.is_empty() {
                changed = true;
                for &i in &to_delete {
                    img.data[i] = false;
                }
            }
        }
        if !changed {
            return img;
        }
    }
}

/// The 8-neighborhood [P2..P9] clockwise from north; outside pixels read 0.
fn neighborhood(img: &BinaryMask, x: usize, y: usize) -> [bool; 8] {
    let get = |dx: i64, dy: i64| -> bool {
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        nx >= 0
            && ny >= 0
            && nx < img.width as i64
            && ny < img.height as i64
            && img.at(nx as usize, ny as usize)
    };
    [
        get(0, -1),  // P2 N
        get(1, -1),  // P3 NE
        get(1, 0),   // P4 E
        get(1, 1),   // P5 SE
        get(0, 1),   // P6 S
        get(-1, 1),  // P7 SW
        get(-1, 0),  // P8 W
        get(-1, -1), // P9 NW
    ]
}

/// Number of 0→1 transitions in the circular sequence P2, P3, …, P9, P2.
fn transitions(p: &[bool; 8]) -> usize {
    (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count()
}

/// Skeleton length: each unordered pair of adjacent skeleton pixels
/// contributes one step (rook steps length 1, diagonal steps √2), scaled by
/// the ground resolution.
pub fn road_length_m(skeleton: &BinaryMask, meters_per_pixel: f64) -> f64 {
    let (w, h) = (skeleton.width, skeleton.height);
    let mut length = 0.0;
    // Forward-only offsets so each pair is counted once.
    const STEPS: [(i64, i64, bool); 4] =
        [(1, 0, false), (0, 1, false), (1, 1, true), (1, -1, true)];
    for y in 0..h {
        for x in 0..w {
            if !skeleton.at(x, y) {
                continue;
            }
            for &(dx, dy, diagonal) in &STEPS {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                if skeleton.at(nx as usize, ny as usize) {
                    length += if diagonal { std::f64::consts::SQRT_2 } else { 1.0 };
                }
            }
        }
    }
    length * meters_per_pixel
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::post::connected_components;

    fn bar(w: usize, h: usize, x0: usize, x1: usize, y0: usize, y1: usize) -> BinaryMask {
        let mut m = BinaryMask::new(w, h);
        for y in y0..y1 {
            for x in x0..x1 {
                m.set(x, y, true);
            }
        }
        m
    }

    #[test]
    fn horizontal_bar_thins_to_centerline() {
        // 3×20 bar → a single thin line, one component before and after.
        let mask = bar(24, 9, 2, 22, 3, 6);
        let skel = skeletonize(&mask);
        assert!(skel.is_subset_of(&mask));
        assert_eq!(connected_components(&skel, 1).len(), 1);
        // Thin: no 2×2 block fully set.
        for y in 0..8 {
            for x in 0..23 {
                let block =
                    skel.at(x, y) && skel.at(x + 1, y) && skel.at(x, y + 1) && skel.at(x + 1, y + 1);
                assert!(!block, "2x2 block at ({x},{y})");
            }
        }
        // Roughly one row worth of pixels.
        assert!(skel.count() <= 20 && skel.count() >= 14, "count {}", skel.count());
    }

    #[test]
    fn thin_line_is_fixed_point() {
        let line = bar(16, 5, 1, 15, 2, 3);
        let once = skeletonize(&line);
        assert_eq!(once, line);
        let twice = skeletonize(&once);
        assert_eq!(twice, once);
    }

    #[test]
    fn skeleton_is_idempotent_on_random_shapes() {
        let mut rng = crate::seed::rng_from_seed(55);
        use rand::Rng;
        for _ in 0..20 {
            let mut m = BinaryMask::new(24, 24);
            // A few random rectangles.
            for _ in 0..3 {
                let x0 = rng.gen_range(0..16);
                let y0 = rng.gen_range(0..16);
                let dw = rng.gen_range(3..8);
                let dh = rng.gen_range(3..8);
                for y in y0..(y0 + dh).min(24) {
                    for x in x0..(x0 + dw).min(24) {
                        m.set(x, y, true);
                    }
                }
            }
            let s1 = skeletonize(&m);
            let s2 = skeletonize(&s1);
            assert!(s1.is_subset_of(&m));
            assert_eq!(s1, s2);
            assert_eq!(
                connected_components(&m, 1).len(),
                connected_components(&s1, 1).len()
            );
        }
    }

    #[test]
    fn plus_sign_thins_to_single_junction() {
        // Thick plus (3-wide arms): the skeleton keeps one pixel with four
        // rook neighbors where the arms cross.
        let mut plus = BinaryMask::new(15, 15);
        for y in 1..14 {
            for x in 6..9 {
                plus.set(x, y, true);
            }
        }
        for y in 6..9 {
            for x in 1..14 {
                plus.set(x, y, true);
            }
        }
        let skel = skeletonize(&plus);
        assert!(skel.is_subset_of(&plus));
        assert_eq!(connected_components(&skel, 1).len(), 1);
        let mut junctions = 0;
        for y in 1..14 {
            for x in 1..14 {
                if skel.at(x, y)
                    && skel.at(x - 1, y)
                    && skel.at(x + 1, y)
                    && skel.at(x, y - 1)
                    && skel.at(x, y + 1)
                {
                    junctions += 1;
                }
            }
        }
        assert_eq!(junctions, 1, "skeleton: {skel:?}");
    }

    #[test]
    fn already_thin_plus_is_unchanged() {
        // 7×7 one-pixel-wide plus: already a skeleton, including its
        // 4-degree junction pixel.
        let mut thin = BinaryMask::new(9, 9);
        for i in 1..8 {
            thin.set(i, 4, true);
            thin.set(4, i, true);
        }
        assert_eq!(skeletonize(&thin), thin);
    }

    #[test]
    fn straight_line_length_is_99m() {
        let line = bar(102, 3, 1, 101, 1, 2);
        assert_eq!(line.count(), 100);
        let len = road_length_m(&line, 1.0);
        assert_eq!(len, 99.0);
    }

    #[test]
    fn empty_skeleton_has_zero_length() {
        assert_eq!(road_length_m(&BinaryMask::new(8, 8), 1.0), 0.0);
    }

    #[test]
    fn diagonal_length_uses_sqrt2_steps() {
        let mut m = BinaryMask::new(52, 52);
        for i in 1..51 {
            m.set(i, i, true);
        }
        let len = road_length_m(&m, 1.0);
        assert!((len - 49.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
        // Scale by meters per pixel.
        let len2 = road_length_m(&m, 0.6536);
        assert!((len2 - 49.0 * std::f64::consts::SQRT_2 * 0.6536).abs() < 1e-12);
    }

    #[test]
    fn skeleton_never_adds_pixels() {
        let mask = bar(10, 10, 2, 8, 2, 8);
        let skel = skeletonize(&mask);
        assert!(skel.is_subset_of(&mask));
    }
}

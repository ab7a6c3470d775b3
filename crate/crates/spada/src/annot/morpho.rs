//! Raster morphology: per-class thinning and buffering.

use crate::raster::{LabelRaster, UNLABELED};

/// Neighborhood around `(r, c)` in the order N, NE, E, SE, S, SW, W, NW.
/// Out-of-bounds neighbors read as background.
#[inline]
fn neighborhood(mask: &[bool], h: usize, w: usize, r: usize, c: usize) -> [bool; 8] {
    let at = |dr: isize, dc: isize| -> bool {
        let nr = r as isize + dr;
        let nc = c as isize + dc;
        if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
            false
        } else {
            mask[nr as usize * w + nc as usize]
        }
    };
    [
        at(-1, 0),
        at(-1, 1),
        at(0, 1),
        at(1, 1),
        at(1, 0),
        at(1, -1),
        at(0, -1),
        at(-1, -1),
    ]
}

/// Zhang-Suen binary thinning (8-connectivity), in place. Each pass runs
/// the two sub-iterations with simultaneous deletion; the loop stops at a
/// fixpoint, which makes the operation idempotent on its own output.
pub fn thin_mask(mask: &mut [bool], h: usize, w: usize) {
    debug_assert_eq!(mask.len(), h * w);
    let mut to_delete = Vec::new();
    loop {
        let mut changed = false;
        for phase in 0..2 {
            to_delete.clear();
            for r in 0..h {
                for c in 0..w {
                    if !mask[r * w + c] {
                        continue;
                    }
                    let n = neighborhood(mask, h, w, r, c);
                    let count = n.iter().filter(|&&b| b).count();
                    if !(2..=6).contains(&count) {
                        continue;
                    }
                    let transitions = (0..8)
                        .filter(|&i| !n[i] && n[(i + 1) % 8])
                        .count();
                    if transitions != 1 {
                        continue;
                    }
                    // n = [N, NE, E, SE, S, SW, W, NW]
                    let deletable = if phase == 0 {
                        !(n[0] && n[2] && n[4]) && !(n[2] && n[4] && n[6])
                    } else {
                        !(n[0] && n[2] && n[6]) && !(n[0] && n[4] && n[6])
                    };
                    if deletable {
                        to_delete.push(r * w + c);
                    }
                }
            }
            if !to_delete.is_empty() {
                changed = true;
                for &i in &to_delete {
                    mask[i] = false;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// Thins every class mask independently; removed pixels become
/// [`UNLABELED`]. Class masks are disjoint, so the per-class skeletons
/// can be written into one output raster.
pub fn skeletonize(labels: &LabelRaster) -> LabelRaster {
    let (h, w) = (labels.height(), labels.width());
    let mut out = vec![UNLABELED; h * w];
    let mut mask = vec![false; h * w];
    for class in classes_present(labels) {
        for (i, &v) in labels.values().iter().enumerate() {
            mask[i] = v == class;
        }
        thin_mask(&mut mask, h, w);
        for (i, &keep) in mask.iter().enumerate() {
            if keep {
                out[i] = class;
            }
        }
    }
    LabelRaster::new(out, h, w).expect("subset of a valid raster")
}

fn classes_present(labels: &LabelRaster) -> Vec<u8> {
    let mut seen = [false; 256];
    for &v in labels.values() {
        seen[v as usize] = true;
    }
    (0..255u8).filter(|&c| seen[c as usize]).collect()
}

/// Offsets within a Euclidean disk of the given radius, with squared
/// distances.
fn disk_offsets(radius: usize) -> Vec<(isize, isize, u32)> {
    let r = radius as isize;
    let r2 = (radius * radius) as u32;
    let mut offsets = Vec::new();
    for dr in -r..=r {
        for dc in -r..=r {
            let d2 = (dr * dr + dc * dc) as u32;
            if d2 <= r2 {
                offsets.push((dr, dc, d2));
            }
        }
    }
    offsets
}

/// Per-class morphological dilation with a Euclidean disk. Where two
/// classes reach the same pixel, the nearest labeled source wins; exact
/// ties go to the lower class id, which makes the result independent of
/// evaluation order.
pub fn buffer(labels: &LabelRaster, radius: usize) -> LabelRaster {
    if radius == 0 {
        return labels.clone();
    }
    let (h, w) = (labels.height(), labels.width());
    let offsets = disk_offsets(radius);
    let mut best_class = vec![UNLABELED; h * w];
    let mut best_dist = vec![u32::MAX; h * w];
    for r in 0..h {
        for c in 0..w {
            let class = labels.get(r, c);
            if class == UNLABELED {
                continue;
            }
            for &(dr, dc, d2) in &offsets {
                let nr = r as isize + dr;
                let nc = c as isize + dc;
                if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                    continue;
                }
                let t = nr as usize * w + nc as usize;
                if d2 < best_dist[t] || (d2 == best_dist[t] && class < best_class[t]) {
                    best_dist[t] = d2;
                    best_class[t] = class;
                }
            }
        }
    }
    LabelRaster::new(best_class, h, w).expect("classes copied from a valid raster")
}

//! Boundary supervision for the gate head.

use alloc::vec::Vec;

use crate::labels::{LabelMap, IGNORE};

/// 0 on pixels whose class differs from at least one 4-neighbor, 1
/// elsewhere. Ignored pixels stay [`IGNORE`] and never count as a differing
/// neighbor.
pub fn boundary_ground_truth(labels: &LabelMap) -> Vec<u8> {
    let (h, w) = (labels.height(), labels.width());
    let d = labels.data();
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let v = d[y * w + x];
            if v == IGNORE {
                out.push(IGNORE);
                continue;
            }
            let differs = |ny: usize, nx: usize| {
                let n = d[ny * w + nx];
                n != IGNORE && n != v
            };
            let edge = (y > 0 && differs(y - 1, x))
                || (y + 1 < h && differs(y + 1, x))
                || (x > 0 && differs(y, x - 1))
                || (x + 1 < w && differs(y, x + 1));
            out.push(if edge { 0 } else { 1 });
        }
    }
    out
}

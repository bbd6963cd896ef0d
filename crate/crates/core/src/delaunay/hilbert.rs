//! Insertion ordering along a Hilbert curve.

const ORDER: u32 = 16;

/// Index of cell `(x, y)` on a Hilbert curve over a `2^16 × 2^16` grid.
fn hilbert_index(mut x: u32, mut y: u32) -> u64 {
    let n = 1u32 << ORDER;
    let mut d = 0u64;
    let mut s = n / 2;
    while s > 0 {
        let rx = u32::from(x & s > 0);
        let ry = u32::from(y & s > 0);
        d += u64::from(s) * u64::from(s) * u64::from((3 * rx) ^ ry);
        if ry == 0 {
            if rx == 1 {
                x = n - 1 - x;
                y = n - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s /= 2;
    }
    d
}

/// Permutation of `0..points.len()` along the Hilbert curve of the bounding
/// box, ties broken by `priority`.
pub(crate) fn hilbert_order(points: &[[f64; 2]], priority: impl Fn(usize) -> u32) -> Vec<u32> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let scale = f64::from((1u32 << ORDER) - 1) / span;
    let mut keyed: Vec<(u64, u32, u32)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let gx = ((p[0] - lo[0]) * scale) as u32;
            let gy = ((p[1] - lo[1]) * scale) as u32;
            (hilbert_index(gx, gy), priority(i), i as u32)
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

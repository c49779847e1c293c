use crate::zorder::ZKey;

/// Linear piece of the key -> CDF map with an error envelope.
///
/// Every point the segment covers satisfies
/// `y + l0 * (z - x) <= cdf(z) <= y + l1 * (z - x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearSegment {
    pub x: ZKey,
    pub y: f64,
    pub l0: f64,
    pub l1: f64,
}

impl LinearSegment {
    /// `(low, high)` CDF bounds at `z`, clamped to `[0, 1]`.
    pub fn band(&self, z: ZKey) -> (f64, f64) {
        let dx = z.delta_f64(self.x);
        let a = self.y + self.l0 * dx;
        let b = self.y + self.l1 * dx;
        (a.min(b).clamp(0.0, 1.0), a.max(b).clamp(0.0, 1.0))
    }
}

/// Greedy single-pass segmentation of Z-sorted `(key, cdf)` points.
///
/// A segment is anchored at its first point and keeps the smallest and largest
/// slope from the anchor to every later point. A point joins if the envelope
/// width at that point stays within `2 * b_err`; otherwise it starts the next
/// segment. Since every earlier point is closer to the anchor, their envelope
/// widths are no larger.
pub fn fit_segments(points: &[(ZKey, f64)], b_err: f64) -> Vec<LinearSegment> {
    let mut out = Vec::new();
    let mut iter = points.iter().copied().peekable();
    while let Some((x, y)) = iter.next() {
        let mut seg = LinearSegment { x, y, l0: 0.0, l1: 0.0 };
        let mut first = true;
        while let Some(&(z, c)) = iter.peek() {
            let dx = z.delta_f64(x);
            if dx <= 0.0 {
                // duplicate key: same point as the anchor
                iter.next();
                continue;
            }
            let s = (c - y) / dx;
            let (l0, l1) = if first { (s, s) } else { (seg.l0.min(s), seg.l1.max(s)) };
            if (l1 - l0) * dx > 2.0 * b_err {
                break;
            }
            seg.l0 = l0;
            seg.l1 = l1;
            first = false;
            iter.next();
        }
        out.push(seg);
    }
    out
}

/// Segment whose start is the last one at or before `z` (the first if none).
pub(crate) fn find_segment(segments: &[LinearSegment], z: ZKey) -> Option<&LinearSegment> {
    let i = segments.partition_point(|s| s.x <= z);
    segments.get(i.saturating_sub(1))
}

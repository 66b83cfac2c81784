//! Step arithmetic of the segmented data-collection protocol.
//!
//! Segments run back to back with a cooldown at every boundary between
//! consecutive segments; the total cooldown is split equally.

/// Segment lengths divided by `scale`, rounded up.
pub fn scaled_segments(segments: &[u64], scale: u64) -> Vec<u64> {
    assert!(scale >= 1, "scale must be at least 1");
    segments.iter().map(|s| s.div_ceil(scale)).collect()
}

/// Steps completed when each cooldown starts.
pub fn boundaries(segments: &[u64]) -> Vec<u64> {
    let mut acc = 0;
    let mut out = Vec::new();
    for s in segments.iter().take(segments.len().saturating_sub(1)) {
        acc += s;
        out.push(acc);
    }
    out
}

pub fn cooldown_per_boundary(total_seconds: f64, segments: &[u64]) -> f64 {
    match segments.len() {
        0 | 1 => 0.0,
        n => total_seconds / (n - 1) as f64,
    }
}

/// Downtime accrued by a run of `steps` steps: one cooldown per boundary
/// strictly inside the run.
pub fn downtime_for(steps: u64, segments: &[u64], total_seconds: f64) -> f64 {
    let crossed = boundaries(segments).iter().filter(|&&b| b < steps).count();
    crossed as f64 * cooldown_per_boundary(total_seconds, segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundaries_are_partial_sums() {
        assert_eq!(boundaries(&[2, 3, 4]), vec![2, 5]);
        assert!(boundaries(&[7]).is_empty());
    }

    #[test]
    fn downtime_counts_interior_boundaries() {
        let segs = [10, 10, 10];
        assert_eq!(downtime_for(10, &segs, 100.0), 0.0);
        assert_eq!(downtime_for(11, &segs, 100.0), 50.0);
        assert_eq!(downtime_for(30, &segs, 100.0), 100.0);
    }
}

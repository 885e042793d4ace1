//! Squared Euclidean distance, the only metric used by the toolkit.
//!
//! Vectors are stored as `f32`; the sum is accumulated in `f64`.

#[inline]
pub fn sq_l2(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = *x as f64 - *y as f64;
        acc += d * d;
    }
    acc
}

/// A vertex id paired with its distance to the query; orders by distance,
/// then by id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub dist: f64,
    pub id: u32,
}

impl Scored {
    pub fn new(dist: f64, id: u32) -> Self {
        Self { dist, id }
    }
}

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then_with(|| self.id.cmp(&other.id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_values() {
        assert_eq!(sq_l2(&[0.0, 0.0], &[3.0, 4.0]), 25.0);
        assert_eq!(sq_l2(&[1.5], &[1.5]), 0.0);
        assert_eq!(sq_l2(&[], &[]), 0.0);
    }

    #[test]
    fn scored_ties_break_by_id() {
        assert!(Scored::new(1.0, 2) < Scored::new(1.0, 3));
        assert!(Scored::new(0.5, 9) < Scored::new(1.0, 0));
    }
}

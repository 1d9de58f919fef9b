use serde::{Deserialize, Serialize};

use super::Vec3;

/// Axis-aligned bounding box. `min <= max` component-wise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    /// Tight box around a set of points; `None` when the iterator is empty.
    pub fn from_points<'a, I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a Vec3>,
    {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let mut b = Self::new(first, first);
        for p in iter {
            b.min = b.min.inf(p);
            b.max = b.max.sup(p);
        }
        Some(b)
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn longest_extent(&self) -> f64 {
        self.extent().max()
    }

    pub fn is_valid(&self) -> bool {
        self.min.iter().chain(self.max.iter()).all(|v| v.is_finite())
            && (0..3).all(|a| self.min[a] <= self.max[a])
    }

    /// Grows every side by `fraction` of the longest extent.
    pub fn padded(&self, fraction: f64) -> Self {
        let pad = Vec3::repeat(self.longest_extent() * fraction);
        Self::new(self.min - pad, self.max + pad)
    }

    pub fn intersection(&self, other: &Aabb) -> Option<Aabb> {
        let b = Aabb::new(self.min.sup(&other.min), self.max.inf(&other.max));
        (0..3).all(|a| b.min[a] <= b.max[a]).then_some(b)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padding_uses_longest_extent() {
        let b = Aabb::new(Vec3::zeros(), Vec3::new(2.0, 1.0, 0.0)).padded(0.1);
        assert_eq!(b.min, Vec3::new(-0.2, -0.2, -0.2));
        assert_eq!(b.max, Vec3::new(2.2, 1.2, 0.2));
    }

    #[test]
    fn disjoint_intersection_is_none() {
        let a = Aabb::new(Vec3::zeros(), Vec3::repeat(1.0));
        let b = Aabb::new(Vec3::repeat(2.0), Vec3::repeat(3.0));
        assert!(a.intersection(&b).is_none());
        let c = Aabb::new(Vec3::repeat(0.5), Vec3::repeat(3.0));
        assert_eq!(a.intersection(&c).unwrap(), Aabb::new(Vec3::repeat(0.5), Vec3::repeat(1.0)));
    }
}

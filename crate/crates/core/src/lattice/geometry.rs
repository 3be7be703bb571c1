use std::fmt;

use serde::{Deserialize, Serialize};

/// A point of Z^ν. Ordered lexicographically on its coordinates.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(Vec<i32>);

impl Site {
    pub fn new(coords: impl Into<Vec<i32>>) -> Self {
        Site(coords.into())
    }

    pub fn origin(nu: usize) -> Self {
        Site(vec![0; nu])
    }

    pub fn coords(&self) -> &[i32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Graph (L1) distance on Z^ν.
    pub fn distance(&self, other: &Site) -> u32 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.abs_diff(*b))
            .sum()
    }

    pub fn translate(&self, by: &Site) -> Site {
        Site(self.0.iter().zip(&by.0).map(|(a, b)| a + b).collect())
    }

    pub fn neg(&self) -> Site {
        Site(self.0.iter().map(|a| -a).collect())
    }

    /// All lattice points within L1 distance `radius`.
    pub fn ball(&self, radius: u32) -> Vec<Site> {
        let mut out = Vec::new();
        let mut cur = self.0.clone();
        ball_rec(&self.0, 0, radius as i64, &mut cur, &mut out);
        out
    }
}

fn ball_rec(center: &[i32], k: usize, budget: i64, cur: &mut Vec<i32>, out: &mut Vec<Site>) {
    if k == center.len() {
        out.push(Site(cur.clone()));
        return;
    }
    for off in -budget..=budget {
        cur[k] = center[k] + off as i32;
        ball_rec(center, k + 1, budget - off.abs(), cur, out);
    }
    cur[k] = center[k];
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A finite region: sorted, duplicate-free list of sites. The empty region
/// is valid.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<Site>", into = "Vec<Site>")]
pub struct Region(Vec<Site>);

impl From<Vec<Site>> for Region {
    fn from(v: Vec<Site>) -> Self {
        Region::new(v)
    }
}

impl From<Region> for Vec<Site> {
    fn from(r: Region) -> Self {
        r.0
    }
}

impl FromIterator<Site> for Region {
    fn from_iter<I: IntoIterator<Item = Site>>(iter: I) -> Self {
        Region::new(iter.into_iter().collect::<Vec<_>>())
    }
}

impl Region {
    pub fn new(mut sites: Vec<Site>) -> Self {
        sites.sort();
        sites.dedup();
        Region(sites)
    }

    pub fn empty() -> Self {
        Region(Vec::new())
    }

    pub fn single(site: Site) -> Self {
        Region(vec![site])
    }

    /// Sites `0..n` of a one-dimensional chain.
    pub fn chain(n: usize) -> Self {
        Region((0..n as i32).map(|i| Site(vec![i])).collect())
    }

    /// All sites with every coordinate in `lo..=hi`.
    pub fn hypercube(nu: usize, lo: i32, hi: i32) -> Self {
        let extents = vec![(lo, hi); nu];
        Self::boxed(&extents)
    }

    /// Box with per-dimension inclusive bounds.
    pub fn boxed(extents: &[(i32, i32)]) -> Self {
        let mut sites = vec![Vec::new()];
        for &(lo, hi) in extents {
            let mut next = Vec::new();
            for prefix in &sites {
                for c in lo..=hi {
                    let mut p: Vec<i32> = prefix.clone();
                    p.push(c);
                    next.push(p);
                }
            }
            sites = next;
        }
        if extents.is_empty() {
            return Region::empty();
        }
        Region::new(sites.into_iter().map(Site).collect())
    }

    pub fn sites(&self) -> &[Site] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Site> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min_site(&self) -> Option<&Site> {
        self.0.first()
    }

    pub fn contains(&self, s: &Site) -> bool {
        self.0.binary_search(s).is_ok()
    }

    pub fn position(&self, s: &Site) -> Option<usize> {
        self.0.binary_search(s).ok()
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.0.iter().all(|s| other.contains(s))
    }

    pub fn intersects(&self, other: &Region) -> bool {
        self.0.iter().any(|s| other.contains(s))
    }

    pub fn union(&self, other: &Region) -> Region {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        Region::new(v)
    }

    pub fn intersection(&self, other: &Region) -> Region {
        Region(self.0.iter().filter(|s| other.contains(s)).cloned().collect())
    }

    pub fn difference(&self, other: &Region) -> Region {
        Region(self.0.iter().filter(|s| !other.contains(s)).cloned().collect())
    }

    pub fn translate(&self, by: &Site) -> Region {
        Region::new(self.0.iter().map(|s| s.translate(by)).collect())
    }

    /// Largest pairwise graph distance.
    pub fn diameter(&self) -> u32 {
        let mut d = 0;
        for (i, a) in self.0.iter().enumerate() {
            for b in &self.0[i + 1..] {
                d = d.max(a.distance(b));
            }
        }
        d
    }

    /// Sub-region picked out by a bitmask over this region's site order.
    pub fn subset_from_mask(&self, mask: u64) -> Region {
        Region(
            self.0
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, s)| s.clone())
                .collect(),
        )
    }

    /// Bitmask of `sub` relative to this region's site order.
    pub fn mask_of(&self, sub: &Region) -> Option<u64> {
        let mut m = 0u64;
        for s in sub.iter() {
            m |= 1 << self.position(s)?;
        }
        Some(m)
    }

    /// Pairs at graph distance one, in lexicographic order.
    pub fn bonds(&self) -> Vec<(Site, Site)> {
        let mut out = Vec::new();
        for (i, a) in self.0.iter().enumerate() {
            for b in &self.0[i + 1..] {
                if a.distance(b) == 1 {
                    out.push((a.clone(), b.clone()));
                }
            }
        }
        out
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_is_sorted_and_deduplicated() {
        let r = Region::new(vec![Site::new([2]), Site::new([0]), Site::new([2])]);
        assert_eq!(r.sites(), &[Site::new([0]), Site::new([2])]);
        assert_eq!(r.min_site(), Some(&Site::new([0])));
    }

    #[test]
    fn set_operations() {
        let a = Region::chain(3);
        let b = Region::new(vec![Site::new([2]), Site::new([3])]);
        assert_eq!(a.union(&b).len(), 4);
        assert_eq!(a.intersection(&b), Region::single(Site::new([2])));
        assert_eq!(a.difference(&b), Region::chain(2));
        assert!(Region::empty().is_subset(&a));
        assert!(!b.is_subset(&a));
    }

    #[test]
    fn lexicographic_order_in_two_dimensions() {
        let r = Region::hypercube(2, 0, 1);
        let coords: Vec<_> = r.iter().map(|s| s.coords().to_vec()).collect();
        assert_eq!(coords, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(r.bonds().len(), 4);
    }

    #[test]
    fn ball_sizes() {
        assert_eq!(Site::origin(1).ball(1).len(), 3);
        assert_eq!(Site::origin(2).ball(1).len(), 5);
        assert_eq!(Site::origin(3).ball(1).len(), 7);
        assert_eq!(Site::origin(2).ball(2).len(), 13);
    }

    #[test]
    fn masks_round_trip() {
        let r = Region::chain(4);
        let sub = r.subset_from_mask(0b1010);
        assert_eq!(r.mask_of(&sub), Some(0b1010));
    }
}

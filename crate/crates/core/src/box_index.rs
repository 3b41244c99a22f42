//! Bucket grid over axis-aligned boxes for overlap and point queries.
//!
//! Bucket boundaries follow the quantiles of the box corners on each axis, so
//! meshes that are strongly graded toward the boundary still spread evenly.

/// Closed axis-aligned box.
pub trait AaBox {
    fn lo(&self) -> &[f64];
    fn hi(&self) -> &[f64];
}

#[derive(Debug, Clone)]
pub struct BoxIndex {
    dim: usize,
    /// Interior split points per axis, ascending.
    splits: Vec<Vec<f64>>,
    /// Per axis bucket count.
    counts: Vec<usize>,
    buckets: Vec<Vec<u32>>,
}

impl BoxIndex {
    pub fn new<B: AaBox>(boxes: &[B]) -> Self {
        let dim = boxes.first().map_or(1, |b| b.lo().len());
        let per_axis = ((boxes.len() as f64).powf(1.0 / dim as f64).ceil() as usize).clamp(1, 1024);
        let mut splits = Vec::with_capacity(dim);
        for axis in 0..dim {
            let mut coords: Vec<f64> = boxes.iter().map(|b| b.lo()[axis]).collect();
            coords.sort_by(f64::total_cmp);
            coords.dedup();
            let mut s: Vec<f64> = (1..per_axis).map(|q| coords[q * coords.len() / per_axis]).collect();
            s.dedup();
            splits.push(s);
        }
        let counts: Vec<usize> = splits.iter().map(|s| s.len() + 1).collect();
        let total: usize = counts.iter().product();
        let mut index = Self { dim, splits, counts, buckets: vec![Vec::new(); total] };
        for (id, b) in boxes.iter().enumerate() {
            let range = index.range(b.lo(), b.hi());
            index.for_each_bucket(&range, |bucket| bucket.push(id as u32));
        }
        index
    }

    fn bucket_of(&self, axis: usize, x: f64) -> usize {
        self.splits[axis].partition_point(|&s| s <= x)
    }

    fn range(&self, lo: &[f64], hi: &[f64]) -> Vec<(usize, usize)> {
        (0..self.dim)
            .map(|axis| {
                // A box ending exactly on a split also touches the bucket to its left.
                let first = self.splits[axis].partition_point(|&s| s < lo[axis]);
                let last = self.bucket_of(axis, hi[axis]);
                (first, last)
            })
            .collect()
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (&i, &c)| acc * c + i)
    }

    fn for_each_bucket(&mut self, range: &[(usize, usize)], mut f: impl FnMut(&mut Vec<u32>)) {
        let mut idx: Vec<usize> = range.iter().map(|r| r.0).collect();
        loop {
            let flat = self.flat(&idx);
            f(&mut self.buckets[flat]);
            if !advance(&mut idx, range) {
                break;
            }
        }
    }

    /// Ids of boxes whose closed extent may meet the closed query box.
    pub fn candidates(&self, lo: &[f64], hi: &[f64]) -> Vec<u32> {
        let range = self.range(lo, hi);
        let mut idx: Vec<usize> = range.iter().map(|r| r.0).collect();
        let mut out = Vec::new();
        loop {
            out.extend_from_slice(&self.buckets[self.flat(&idx)]);
            if !advance(&mut idx, &range) {
                break;
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Ids of boxes that may contain `p`.
    pub fn candidates_at(&self, p: &[f64]) -> Vec<u32> {
        self.candidates(p, p)
    }
}

fn advance(idx: &mut [usize], range: &[(usize, usize)]) -> bool {
    for axis in (0..idx.len()).rev() {
        if idx[axis] < range[axis].1 {
            idx[axis] += 1;
            return true;
        }
        idx[axis] = range[axis].0;
    }
    false
}

/// Whether the open interiors of two boxes intersect.
pub fn interiors_overlap<A: AaBox, B: AaBox>(a: &A, b: &B) -> bool {
    a.lo().iter().zip(a.hi()).zip(b.lo().iter().zip(b.hi())).all(|((&alo, &ahi), (&blo, &bhi))| alo < bhi && blo < ahi)
}

/// Whether `p` lies in the closed box.
pub fn contains<A: AaBox>(a: &A, p: &[f64]) -> bool {
    a.lo().iter().zip(a.hi()).zip(p).all(|((&lo, &hi), &x)| lo <= x && x <= hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct B(Vec<f64>, Vec<f64>);

    impl AaBox for B {
        fn lo(&self) -> &[f64] {
            &self.0
        }
        fn hi(&self) -> &[f64] {
            &self.1
        }
    }

    fn grid(n: usize) -> Vec<B> {
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let x = -1.0 + 2.0 * i as f64 / n as f64;
                let y = -1.0 + 2.0 * j as f64 / n as f64;
                out.push(B(vec![x, y], vec![x + 2.0 / n as f64, y + 2.0 / n as f64]));
            }
        }
        out
    }

    #[test]
    fn every_containing_box_is_a_candidate() {
        let boxes = grid(7);
        let index = BoxIndex::new(&boxes);
        for p in [[0.0, 0.0], [-1.0, -1.0], [1.0, 1.0], [0.3, -0.71], [-1.0 + 2.0 / 7.0, 0.5]] {
            let cands = index.candidates_at(&p);
            for (id, b) in boxes.iter().enumerate() {
                if contains(b, &p) {
                    assert!(cands.contains(&(id as u32)), "{p:?} misses {id}");
                }
            }
        }
    }

    #[test]
    fn overlap_detection() {
        let a = B(vec![0.0, 0.0], vec![1.0, 1.0]);
        let b = B(vec![1.0, 0.0], vec![2.0, 1.0]);
        let c = B(vec![0.5, 0.5], vec![1.5, 0.75]);
        assert!(!interiors_overlap(&a, &b));
        assert!(interiors_overlap(&a, &c));
        assert!(interiors_overlap(&b, &c));
    }

    #[test]
    fn neighbours_found_through_shared_faces() {
        let boxes = grid(7);
        let index = BoxIndex::new(&boxes);
        let b = &boxes[24];
        let cands = index.candidates(b.lo(), b.hi());
        let touching: Vec<u32> = boxes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.0.iter().zip(&c.1).zip(b.0.iter().zip(&b.1)).all(|((a0, a1), (b0, b1))| a0 <= b1 && b0 <= a1))
            .map(|(i, _)| i as u32)
            .collect();
        // the cell itself plus its 8 touching neighbours
        assert_eq!(touching.len(), 9);
        assert!(touching.iter().all(|i| cands.contains(i)));
        assert!(cands.len() < boxes.len());
    }
}

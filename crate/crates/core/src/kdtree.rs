//! Exact 2-d tree for radius-bounded k-nearest-neighbour queries.
//!
//! All comparisons use squared Euclidean distances computed as
//! `dx * dx + dy * dy`, the same expression a brute-force scan uses, so tree
//! and scan agree bit for bit.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

const LEAF_SIZE: usize = 8;

/// Squared distance between two points.
#[inline]
pub fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Candidate ordered by `(squared distance, node id)`.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    d2: f64,
    id: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.id.cmp(&other.id))
    }
}

/// Static 2-d tree over a borrowed point slice.
#[derive(Debug)]
pub struct KdTree<'a> {
    points: &'a [[f64; 2]],
    order: Vec<usize>,
    // Split axis for the internal node whose pivot sits at this position of `order`.
    axis: Vec<u8>,
}

impl<'a> KdTree<'a> {
    /// Builds the tree. Coordinates are assumed finite.
    pub fn new(points: &'a [[f64; 2]]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut axis = alloc::vec![0u8; points.len()];
        build(points, &mut order, &mut axis, 0);
        Self { points, order, axis }
    }

    /// Number of indexed points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// True when the tree is empty.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Up to `k` nodes with squared distance `< r2` from node `query`, excluding
    /// `query`, sorted by `(squared distance, id)`. Returns `(id, squared distance)`.
    pub fn knn_within(&self, query: usize, r2: f64, k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut search = Search {
            tree: self,
            q: self.points[query],
            exclude: query,
            r2,
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        };
        search.visit(0, self.order.len());
        let mut found = search.heap.into_sorted_vec();
        found.truncate(k);
        found.into_iter().map(|c| (c.id, c.d2)).collect()
    }
}

fn build(points: &[[f64; 2]], order: &mut [usize], axis: &mut [u8], offset: usize) {
    let n = order.len();
    if n <= LEAF_SIZE {
        return;
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for &i in order.iter() {
        for d in 0..2 {
            lo[d] = lo[d].min(points[i][d]);
            hi[d] = hi[d].max(points[i][d]);
        }
    }
    let ax = usize::from(hi[1] - lo[1] > hi[0] - lo[0]);
    let mid = n / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][ax].total_cmp(&points[b][ax]).then(a.cmp(&b))
    });
    axis[offset + mid] = ax as u8;
    let (left, rest) = order.split_at_mut(mid);
    build(points, left, axis, offset);
    build(points, &mut rest[1..], axis, offset + mid + 1);
}

struct Search<'t, 'a> {
    tree: &'t KdTree<'a>,
    q: [f64; 2],
    exclude: usize,
    r2: f64,
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl Search<'_, '_> {
    #[inline]
    fn offer(&mut self, id: usize) {
        if id == self.exclude {
            return;
        }
        let d2 = dist2(self.q, self.tree.points[id]);
        if d2 >= self.r2 {
            return;
        }
        let c = Candidate { d2, id };
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(worst) = self.heap.peek() {
            if c < *worst {
                self.heap.pop();
                self.heap.push(c);
            }
        }
    }

    fn worst_d2(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            self.heap.peek().map_or(f64::INFINITY, |c| c.d2)
        }
    }

    fn visit(&mut self, lo: usize, hi: usize) {
        let n = hi - lo;
        if n <= LEAF_SIZE {
            for pos in lo..hi {
                self.offer(self.tree.order[pos]);
            }
            return;
        }
        let mid = lo + n / 2;
        let pivot = self.tree.order[mid];
        let ax = self.tree.axis[mid] as usize;
        self.offer(pivot);
        let diff = self.q[ax] - self.tree.points[pivot][ax];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.visit(near.0, near.1);
        let plane = diff * diff;
        // Equal distances may still win on the id tie-break, hence `<=`.
        if plane < self.r2 && plane <= self.worst_d2() {
            self.visit(far.0, far.1);
        }
    }
}

/// Brute-force counterpart of [`KdTree::knn_within`].
pub fn brute_force_knn_within(points: &[[f64; 2]], query: usize, r2: f64, k: usize) -> Vec<(usize, f64)> {
    let q = points[query];
    let mut all: Vec<(usize, f64)> = points
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != query)
        .map(|(i, &p)| (i, dist2(q, p)))
        .filter(|&(_, d2)| d2 < r2)
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

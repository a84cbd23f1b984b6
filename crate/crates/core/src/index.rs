//! Static kd-tree over n-dimensional points with pluggable metrics.
//!
//! The tree is built once per batch and never mutated. Queries are driven by
//! a [`QueryMetric`] (point distance plus a lower bound over boxes) and a
//! [`Visitor`] that collects results and reports the current pruning radius.

const LEAF_SIZE: usize = 16;

/// Below this many points queries fall back to an exhaustive scan.
pub const EXHAUSTIVE_THRESHOLD: usize = 200;

pub trait QueryMetric {
    fn center(&self) -> &[f64];
    fn distance(&self, p: &[f64]) -> f64;
    /// Lower bound on `distance` over the box `[lo, hi]`.
    fn box_lower_bound(&self, lo: &[f64], hi: &[f64]) -> f64;
}

pub trait Visitor {
    fn visit(&mut self, item: u32, distance: f64);
    /// Points farther than this can be pruned.
    fn bound(&self) -> f64;
}

/// Euclidean distance from a fixed centre to a box.
pub fn euclidean_box_distance(c: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    c.iter()
        .zip(lo.iter().zip(hi))
        .map(|(x, (l, h))| {
            let d = if x < l {
                l - x
            } else if x > h {
                x - h
            } else {
                0.0
            };
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug)]
pub struct KdTree {
    dim: usize,
    points: Vec<f64>,
    items: Vec<u32>,
    nodes: Vec<Node>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl KdTree {
    /// Builds a tree over `(item, coords)` pairs.
    pub fn build<'a, I>(dim: usize, entries: I) -> Self
    where
        I: IntoIterator<Item = (u32, &'a [f64])>,
    {
        let mut items = Vec::new();
        let mut raw = Vec::new();
        for (id, p) in entries {
            debug_assert_eq!(p.len(), dim);
            items.push(id);
            raw.extend_from_slice(p);
        }
        let count = items.len();
        let mut order: Vec<usize> = (0..count).collect();
        let mut tree = KdTree {
            dim,
            points: Vec::with_capacity(raw.len()),
            items: Vec::with_capacity(count),
            nodes: Vec::new(),
            lo: vec![f64::INFINITY; dim],
            hi: vec![f64::NEG_INFINITY; dim],
        };
        for i in 0..count {
            for a in 0..dim {
                let v = raw[i * dim + a];
                tree.lo[a] = tree.lo[a].min(v);
                tree.hi[a] = tree.hi[a].max(v);
            }
        }
        if count > 0 {
            tree.build_node(&raw, &mut order[..], 0);
            for &i in &order {
                tree.points.extend_from_slice(&raw[i * dim..(i + 1) * dim]);
                tree.items.push(items[i]);
            }
        }
        tree
    }

    fn build_node(&mut self, raw: &[f64], order: &mut [usize], offset: usize) -> usize {
        let id = self.nodes.len();
        if order.len() <= LEAF_SIZE {
            self.nodes.push(Node::Leaf {
                start: offset,
                end: offset + order.len(),
            });
            return id;
        }
        // split the widest axis at the median
        let dim = self.dim;
        let mut axis = 0;
        let mut widest = -1.0;
        for a in 0..dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in order.iter() {
                let v = raw[i * dim + a];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > widest {
                widest = hi - lo;
                axis = a;
            }
        }
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&x, &y| {
            raw[x * dim + axis]
                .total_cmp(&raw[y * dim + axis])
                .then(x.cmp(&y))
        });
        let value = raw[order[mid] * dim + axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let (left_part, right_part) = order.split_at_mut(mid);
        let left = self.build_node(raw, left_part, offset);
        let right = self.build_node(raw, right_part, offset + mid);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Visits every point whose distance could be within the visitor's bound.
    pub fn search<M: QueryMetric, V: Visitor>(&self, metric: &M, visitor: &mut V) {
        if self.items.is_empty() {
            return;
        }
        if self.items.len() < EXHAUSTIVE_THRESHOLD {
            for (i, &item) in self.items.iter().enumerate() {
                let d = metric.distance(&self.points[i * self.dim..(i + 1) * self.dim]);
                if d <= visitor.bound() {
                    visitor.visit(item, d);
                }
            }
            return;
        }
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        self.search_node(0, metric, visitor, &mut lo, &mut hi);
    }

    fn search_node<M: QueryMetric, V: Visitor>(
        &self,
        node: usize,
        metric: &M,
        visitor: &mut V,
        lo: &mut [f64],
        hi: &mut [f64],
    ) {
        if metric.box_lower_bound(lo, hi) > visitor.bound() {
            return;
        }
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start..end {
                    let d = metric.distance(&self.points[i * self.dim..(i + 1) * self.dim]);
                    if d <= visitor.bound() {
                        visitor.visit(self.items[i], d);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let near_left = metric.center()[axis] < value;
                let order = if near_left {
                    [(left, true), (right, false)]
                } else {
                    [(right, false), (left, true)]
                };
                for (child, is_left) in order {
                    if is_left {
                        let saved = hi[axis];
                        hi[axis] = value;
                        self.search_node(child, metric, visitor, lo, hi);
                        hi[axis] = saved;
                    } else {
                        let saved = lo[axis];
                        lo[axis] = value;
                        self.search_node(child, metric, visitor, lo, hi);
                        lo[axis] = saved;
                    }
                }
            }
        }
    }
}

/// Euclidean metric centred on a query point.
pub struct Euclidean<'a> {
    pub center: &'a [f64],
}

impl QueryMetric for Euclidean<'_> {
    fn center(&self) -> &[f64] {
        self.center
    }

    fn distance(&self, p: &[f64]) -> f64 {
        crate::space::dist(self.center, p)
    }

    fn box_lower_bound(&self, lo: &[f64], hi: &[f64]) -> f64 {
        euclidean_box_distance(self.center, lo, hi)
    }
}

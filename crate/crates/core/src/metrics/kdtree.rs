//! Exact nearest-neighbour search.
//!
//! Results match a brute-force scan bit for bit: distances use the same
//! squared-norm expression and ties resolve to the lowest point index.

use crate::geometry::Vec3;

const LEAF: usize = 12;

#[derive(Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug)]
pub struct KdTree {
    points: Vec<Vec3>,
    /// Original index of each entry of `points`.
    index: Vec<usize>,
    nodes: Vec<Node>,
}

#[inline]
pub fn squared_distance(a: &Vec3, b: &Vec3) -> f64 {
    (a - b).norm_squared()
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        if !points.is_empty() {
            build(points, &mut order, 0, &mut nodes);
        }
        Self {
            points: order.iter().map(|&i| points[i]).collect(),
            index: order,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the nearest point. Panics when empty.
    pub fn nearest(&self, q: &Vec3) -> (usize, f64) {
        assert!(!self.is_empty(), "nearest neighbour in an empty tree");
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        best
    }

    fn search(&self, id: usize, q: &Vec3, best: &mut (usize, f64)) {
        match self.nodes[id] {
            Node::Leaf { start, end } => {
                for k in start..end {
                    let d = squared_distance(q, &self.points[k]);
                    let i = self.index[k];
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // Equal distances must still be visited for the index tie-break.
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn build(points: &[Vec3], order: &mut [usize], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    if order.len() <= LEAF {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + order.len(),
        });
        return id;
    }
    let (mut lo, mut hi) = (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY));
    for &i in order.iter() {
        lo = lo.inf(&points[i]);
        hi = hi.sup(&points[i]);
    }
    let axis = (hi - lo).imax();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let value = points[order[mid]][axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (l, r) = order.split_at_mut(mid);
    // Left holds coordinates <= value and right >= value, so the
    // plane distance bounds every point on the far side.
    let left = build(points, l, offset, nodes);
    let right = build(points, r, offset + mid, nodes);
    nodes[id] = Node::Split { axis, value, left, right };
    id
}

/// Brute-force reference used by tests and small inputs.
pub fn nearest_brute(points: &[Vec3], q: &Vec3) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = squared_distance(q, p);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

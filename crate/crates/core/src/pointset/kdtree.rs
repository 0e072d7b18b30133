//! Static kd-tree for exact radius and nearest-neighbor queries.

const LEAF_SIZE: usize = 16;
const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
struct Node {
    begin: usize,
    end: usize,
    split_dim: usize,
    split: f64,
    left: usize,
    right: usize,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    /// Coordinates in tree order.
    coords: Vec<f64>,
    /// `order[k]` is the global index stored at tree position `k`.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// Euclidean distance; the one distance routine used everywhere in the crate.
#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl KdTree {
    pub fn build(dim: usize, coords: &[f64]) -> Self {
        let n = coords.len() / dim;
        let mut order: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::new();
        if n > 0 {
            build_node(dim, coords, &mut order, 0, n, &mut nodes);
        }
        let mut tree_coords = Vec::with_capacity(coords.len());
        for &i in &order {
            tree_coords.extend_from_slice(&coords[i * dim..(i + 1) * dim]);
        }
        Self { dim, coords: tree_coords, order, nodes }
    }

    #[inline]
    fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    /// Global indices `j` with `distance(x_j, center) ≤ radius`, unsorted.
    pub fn within_radius(&self, center: &[f64], radius: f64, out: &mut Vec<usize>) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.left == NONE {
                for k in node.begin..node.end {
                    if distance(self.point(k), center) <= radius {
                        out.push(self.order[k]);
                    }
                }
                continue;
            }
            let diff = center[node.split_dim] - node.split;
            let (near, far) = if diff <= 0.0 { (node.left, node.right) } else { (node.right, node.left) };
            if diff.abs() <= radius {
                stack.push(far);
            }
            stack.push(near);
        }
    }

    /// Nearest site to `query`, skipping global index `skip`.
    pub fn nearest(&self, query: &[f64], skip: Option<usize>) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (NONE, f64::INFINITY);
        self.nearest_rec(0, query, skip, &mut best);
        (best.0 != NONE).then_some(best)
    }

    fn nearest_rec(&self, id: usize, query: &[f64], skip: Option<usize>, best: &mut (usize, f64)) {
        let node = &self.nodes[id];
        if node.left == NONE {
            for k in node.begin..node.end {
                let g = self.order[k];
                if Some(g) == skip {
                    continue;
                }
                let d = distance(self.point(k), query);
                if d < best.1 || (d == best.1 && g < best.0) {
                    *best = (g, d);
                }
            }
            return;
        }
        let diff = query[node.split_dim] - node.split;
        let (near, far) = if diff <= 0.0 { (node.left, node.right) } else { (node.right, node.left) };
        self.nearest_rec(near, query, skip, best);
        if diff.abs() <= best.1 {
            self.nearest_rec(far, query, skip, best);
        }
    }
}

fn build_node(
    dim: usize,
    coords: &[f64],
    order: &mut [usize],
    begin: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    nodes.push(Node { begin, end, split_dim: 0, split: 0.0, left: NONE, right: NONE });
    if end - begin <= LEAF_SIZE {
        return id;
    }
    let slice = &mut order[begin..end];
    let mut best_dim = 0;
    let mut best_spread = -1.0;
    for d in 0..dim {
        let (lo, hi) = slice.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            let v = coords[i * dim + d];
            (lo.min(v), hi.max(v))
        });
        if hi - lo > best_spread {
            best_spread = hi - lo;
            best_dim = d;
        }
    }
    if best_spread <= 0.0 {
        return id;
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        coords[a * dim + best_dim].total_cmp(&coords[b * dim + best_dim])
    });
    let split = coords[slice[mid] * dim + best_dim];
    // Points left of `mid` have coordinate ≤ split, right of it ≥ split.
    let left = build_node(dim, coords, order, begin, begin + mid, nodes);
    let right = build_node(dim, coords, order, begin + mid, end, nodes);
    let node = &mut nodes[id];
    node.split_dim = best_dim;
    node.split = split;
    node.left = left;
    node.right = right;
    id
}

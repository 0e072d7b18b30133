use super::sites::{BoundingBox, DataSiteSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterNode {
    /// Range `[begin, end)` into the tree permutation.
    pub begin: usize,
    pub end: usize,
    pub level: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Bounding box of the node's points.
    pub bbox: BoundingBox,
}

impl ClusterNode {
    pub fn len(&self) -> usize {
        self.end - self.begin
    }

    pub fn is_empty(&self) -> bool {
        self.begin == self.end
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Binary cluster tree from recursive median bisection along the longest box axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTree {
    nodes: Vec<ClusterNode>,
    permutation: Vec<usize>,
    leaf_capacity: usize,
}

impl ClusterTree {
    pub fn build(sites: &DataSiteSet, leaf_capacity: usize) -> Result<Self> {
        if leaf_capacity == 0 {
            return Err(Error::InvalidInput("leaf capacity must be positive".into()));
        }
        let dim = sites.dim();
        let mut permutation: Vec<usize> = (0..sites.len()).collect();
        let mut nodes: Vec<ClusterNode> = Vec::new();
        // (begin, end, level, parent)
        let mut pending = vec![(0usize, sites.len(), 0usize, None::<usize>)];
        while let Some((begin, end, level, parent)) = pending.pop() {
            let slice = &mut permutation[begin..end];
            let coords: Vec<f64> = slice.iter().flat_map(|&i| sites.point(i).iter().copied()).collect();
            let bbox = BoundingBox::around(dim, &coords);
            let id = nodes.len();
            if let Some(p) = parent {
                nodes[p].children.push(id);
            }
            let n = end - begin;
            if n > leaf_capacity {
                let axis = (0..dim)
                    .fold((0usize, f64::NEG_INFINITY), |best, d| {
                        let e = bbox.extent(d);
                        if e > best.1 { (d, e) } else { best }
                    })
                    .0;
                slice.sort_by(|&a, &b| {
                    sites.point(a)[axis].total_cmp(&sites.point(b)[axis]).then(a.cmp(&b))
                });
                let mid = begin + n.div_ceil(2);
                // Right child pushed first so the left child gets the next id.
                pending.push((mid, end, level + 1, Some(id)));
                pending.push((begin, mid, level + 1, Some(id)));
            }
            nodes.push(ClusterNode { begin, end, level, parent, children: Vec::new(), bbox });
        }
        Ok(Self { nodes, permutation, leaf_capacity })
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn nodes(&self) -> &[ClusterNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &ClusterNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `permutation[k]` is the global site index at tree position `k`.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    /// Global site indices owned by a node.
    pub fn indices(&self, id: usize) -> &[usize] {
        let n = &self.nodes[id];
        &self.permutation[n.begin..n.end]
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf())
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    /// Node ids in breadth-first order (root first, then level by level).
    pub fn breadth_first(&self) -> Vec<usize> {
        let mut order = vec![self.root()];
        let mut k = 0;
        while k < order.len() {
            let id = order[k];
            order.extend_from_slice(&self.nodes[id].children);
            k += 1;
        }
        order
    }

    /// Node ids with every child before its parent.
    pub fn post_order(&self) -> Vec<usize> {
        let mut order = self.breadth_first();
        order.reverse();
        order
    }
}

/// Builds the cluster tree for `sites`.
pub fn build_cluster_tree(sites: &DataSiteSet, leaf_capacity: usize) -> Result<ClusterTree> {
    ClusterTree::build(sites, leaf_capacity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::sites::generate_uniform;

    fn check_invariants(tree: &ClusterTree, n: usize) {
        let mut seen = vec![false; n];
        for &p in tree.permutation() {
            assert!(!seen[p]);
            seen[p] = true;
        }
        assert!(seen.iter().all(|&s| s));
        for (id, node) in tree.nodes().iter().enumerate() {
            if node.is_leaf() {
                assert!(node.len() >= 1 && node.len() <= tree.leaf_capacity());
            } else {
                let mut covered = node.begin;
                for &c in &node.children {
                    let child = tree.node(c);
                    assert_eq!(child.begin, covered);
                    assert_eq!(child.parent, Some(id));
                    assert_eq!(child.level, node.level + 1);
                    covered = child.end;
                }
                assert_eq!(covered, node.end);
            }
        }
    }

    #[test]
    fn four_points_split_evenly() {
        let s = DataSiteSet::new(1, vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], BoundingBox::unit_cube(1)).unwrap();
        let t = build_cluster_tree(&s, 2).unwrap();
        assert_eq!(t.len(), 3);
        let root = t.node(0);
        assert_eq!(root.children.len(), 2);
        assert_eq!(t.indices(root.children[0]), &[0, 1]);
        assert_eq!(t.indices(root.children[1]), &[2, 3]);
    }

    #[test]
    fn uniform_tree_invariants() {
        let s = generate_uniform(1000, 2, 7);
        let t = build_cluster_tree(&s, 32).unwrap();
        check_invariants(&t, 1000);
        let mut union: Vec<usize> = t.leaves().flat_map(|l| t.indices(l).to_vec()).collect();
        union.sort_unstable();
        assert_eq!(union, (0..1000).collect::<Vec<_>>());
        assert!(t.depth() <= 6);
    }

    #[test]
    fn single_point_tree() {
        let s = generate_uniform(1, 3, 1);
        let t = build_cluster_tree(&s, 4).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.node(0).is_leaf());
    }

    #[test]
    fn post_order_visits_children_first() {
        let s = generate_uniform(300, 2, 3);
        let t = build_cluster_tree(&s, 8).unwrap();
        let order = t.post_order();
        let mut pos = vec![0; t.len()];
        for (k, &id) in order.iter().enumerate() {
            pos[id] = k;
        }
        for (id, n) in t.nodes().iter().enumerate() {
            for &c in &n.children {
                assert!(pos[c] < pos[id]);
            }
        }
    }
}

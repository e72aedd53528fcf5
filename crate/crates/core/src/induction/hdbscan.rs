//! Hierarchical density clustering over cosine distance.
//!
//! Follows the usual HDBSCAN construction: core distances, mutual
//! reachability, minimum spanning tree, single-linkage hierarchy, condensed
//! tree and excess-of-mass selection (a lone root cluster may be selected).
//! MST edges longer than `max_distance` are cut first, so points that are far
//! from everything can never be pulled into a cluster however few of them
//! there are.

use std::collections::VecDeque;

use crate::vector;

/// Distances are floored here before taking `1 / d`, so exact duplicates get a
/// large but finite density.
const MIN_DISTANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    pub min_cluster_size: usize,
    /// Mutual-reachability distance above which points are never linked.
    pub max_distance: f64,
}

impl ClusterParams {
    pub fn new(min_cluster_size: usize) -> Self {
        Self {
            min_cluster_size,
            max_distance: f64::INFINITY,
        }
    }
}

/// Per-point cluster labels (`None` = noise), numbered by first appearance.
/// Every cluster has at least `min_cluster_size` members.
pub fn density_cluster<P: AsRef<[f32]>>(points: &[P], params: &ClusterParams) -> Vec<Option<usize>> {
    let n = points.len();
    let m = params.min_cluster_size.max(2);
    if n < m {
        return vec![None; n];
    }
    let pts: Vec<&[f32]> = points.iter().map(|p| p.as_ref()).collect();
    let norms: Vec<f64> = pts.iter().map(|p| vector::norm(p)).collect();
    let dist = |i: usize, j: usize| -> f64 {
        let denom = norms[i] * norms[j];
        let cos = if denom <= 1e-300 {
            0.0
        } else {
            (vector::dot(pts[i], pts[j]) / denom).clamp(-1.0, 1.0)
        };
        (1.0 - cos).max(0.0)
    };

    let core = core_distances(n, m - 1, &dist);
    let mst = prim_mst(n, &|i, j| dist(i, j).max(core[i]).max(core[j]));
    let tree = SingleLinkage::build(n, mst, params.max_distance);

    let mut raw = vec![None; n];
    let mut next = 0usize;
    for root in tree.roots() {
        if tree.size(root) < m {
            continue;
        }
        let condensed = Condensed::build(&tree, root, m);
        for members in condensed.select() {
            for p in members {
                raw[p] = Some(next);
            }
            next += 1;
        }
    }

    // Renumber by first appearance for a stable, order-derived labelling.
    let mut remap = vec![usize::MAX; next];
    let mut count = 0;
    raw.iter()
        .map(|l| {
            l.map(|c| {
                if remap[c] == usize::MAX {
                    remap[c] = count;
                    count += 1;
                }
                remap[c]
            })
        })
        .collect()
}

/// Distance to the `k`-th nearest other point.
fn core_distances(n: usize, k: usize, dist: &dyn Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut buf = Vec::with_capacity(n);
    (0..n)
        .map(|i| {
            buf.clear();
            buf.extend((0..n).filter(|&j| j != i).map(|j| dist(i, j)));
            let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect()
}

/// Dense Prim's algorithm; ties go to the lowest index.
fn prim_mst(n: usize, weight: &dyn Fn(usize, usize) -> f64) -> Vec<(usize, usize, f64)> {
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let w = weight(current, j);
            if w < best[j] {
                best[j] = w;
                from[j] = current;
            }
            if next == usize::MAX || best[j] < best[next] {
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push((from[next], next, best[next]));
        current = next;
    }
    edges
}

/// Single-linkage dendrogram. Nodes `0..n` are points; merge `k` is node `n + k`.
struct SingleLinkage {
    n: usize,
    merges: Vec<(usize, usize, f64)>,
    sizes: Vec<usize>,
    top: Vec<usize>,
}

impl SingleLinkage {
    fn build(n: usize, mut edges: Vec<(usize, usize, f64)>, max_distance: f64) -> Self {
        edges.sort_by(|a, b| a.2.total_cmp(&b.2));
        let mut parent: Vec<usize> = (0..2 * n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut merges = Vec::new();
        let mut sizes = vec![1usize; n];
        for (a, b, w) in edges {
            if w > max_distance {
                continue;
            }
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            let node = n + merges.len();
            parent[ra] = node;
            parent[rb] = node;
            sizes.push(sizes[ra] + sizes[rb]);
            merges.push((ra, rb, w));
        }
        let mut top: Vec<usize> = (0..n).map(|p| find(&mut parent, p)).collect();
        top.sort_unstable();
        top.dedup();
        Self { n, merges, sizes, top }
    }

    fn roots(&self) -> Vec<usize> {
        self.top.clone()
    }

    fn size(&self, node: usize) -> usize {
        self.sizes[node]
    }

    fn children(&self, node: usize) -> Option<(usize, usize, f64)> {
        node.checked_sub(self.n).map(|k| self.merges[k])
    }

    fn leaves(&self, node: usize, out: &mut Vec<usize>) {
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            match self.children(x) {
                Some((a, b, _)) => {
                    stack.push(a);
                    stack.push(b);
                }
                None => out.push(x),
            }
        }
    }
}

struct CondensedCluster {
    birth: f64,
    children: Vec<usize>,
    /// Points leaving this cluster and the density at which they leave.
    fallen: Vec<(usize, f64)>,
    size: usize,
}

/// Condensed tree of one connected component; cluster 0 is the root.
struct Condensed {
    clusters: Vec<CondensedCluster>,
}

impl Condensed {
    fn build(tree: &SingleLinkage, root: usize, m: usize) -> Self {
        let mut clusters = vec![CondensedCluster {
            birth: 0.0,
            children: Vec::new(),
            fallen: Vec::new(),
            size: tree.size(root),
        }];
        let mut queue = VecDeque::from([(root, 0usize)]);
        let mut leaves = Vec::new();
        while let Some((node, label)) = queue.pop_front() {
            let Some((a, b, d)) = tree.children(node) else {
                continue;
            };
            let lambda = 1.0 / d.max(MIN_DISTANCE);
            let (sa, sb) = (tree.size(a), tree.size(b));
            let mut fall = |child: usize, clusters: &mut Vec<CondensedCluster>| {
                leaves.clear();
                tree.leaves(child, &mut leaves);
                clusters[label].fallen.extend(leaves.iter().map(|&p| (p, lambda)));
            };
            match (sa >= m, sb >= m) {
                (true, true) => {
                    for (child, size) in [(a, sa), (b, sb)] {
                        let id = clusters.len();
                        clusters.push(CondensedCluster {
                            birth: lambda,
                            children: Vec::new(),
                            fallen: Vec::new(),
                            size,
                        });
                        clusters[label].children.push(id);
                        queue.push_back((child, id));
                    }
                }
                (true, false) => {
                    fall(b, &mut clusters);
                    queue.push_back((a, label));
                }
                (false, true) => {
                    fall(a, &mut clusters);
                    queue.push_back((b, label));
                }
                (false, false) => {
                    fall(a, &mut clusters);
                    fall(b, &mut clusters);
                }
            }
        }
        Self { clusters }
    }

    fn stability(&self, c: usize) -> f64 {
        let cl = &self.clusters[c];
        let points: f64 = cl.fallen.iter().map(|&(_, l)| l - cl.birth).sum();
        let kids: f64 = cl
            .children
            .iter()
            .map(|&k| (self.clusters[k].birth - cl.birth) * self.clusters[k].size as f64)
            .sum();
        points + kids
    }

    /// Excess-of-mass selection; returns the members of each selected cluster.
    fn select(&self) -> Vec<Vec<usize>> {
        let k = self.clusters.len();
        let mut stab: Vec<f64> = (0..k).map(|c| self.stability(c)).collect();
        let mut selected = vec![true; k];
        // Children always have larger ids than their parent.
        for c in (0..k).rev() {
            let kids = &self.clusters[c].children;
            if kids.is_empty() {
                continue;
            }
            let subtree: f64 = kids.iter().map(|&x| stab[x]).sum();
            if subtree > stab[c] {
                selected[c] = false;
                stab[c] = subtree;
            } else {
                let mut stack = kids.clone();
                while let Some(x) = stack.pop() {
                    selected[x] = false;
                    stack.extend(&self.clusters[x].children);
                }
            }
        }

        let mut out = Vec::new();
        for c in (0..k).filter(|&c| selected[c]) {
            let members = if c == 0 {
                self.root_members()
            } else {
                self.subtree_points(c)
            };
            if !members.is_empty() {
                out.push(members);
            }
        }
        out
    }

    fn subtree_points(&self, c: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![c];
        while let Some(x) = stack.pop() {
            out.extend(self.clusters[x].fallen.iter().map(|&(p, _)| p));
            stack.extend(&self.clusters[x].children);
        }
        out
    }

    /// A selected root keeps only points whose exit density reaches the
    /// densest event directly under it; earlier leavers are noise.
    fn root_members(&self) -> Vec<usize> {
        let root = &self.clusters[0];
        let threshold = root
            .fallen
            .iter()
            .map(|&(_, l)| l)
            .chain(root.children.iter().map(|&k| self.clusters[k].birth))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(x) = stack.pop() {
            let cl = &self.clusters[x];
            out.extend(cl.fallen.iter().filter(|&&(_, l)| l >= threshold).map(|&(p, _)| p));
            stack.extend(&cl.children);
        }
        out
    }
}

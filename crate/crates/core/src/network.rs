//! Signed dependency graphs over features: construction from partial
//! associations, basic graph metrics, Louvain community detection under a
//! constant-Potts quality, and partition comparison.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    /// Signed weight; the sign drives display, community detection uses |w|.
    pub weight: f64,
}

/// Undirected weighted graph over named feature nodes. No self loops, at most
/// one edge per pair, weights nonzero.
#[derive(Debug, Clone)]
pub struct DepGraph {
    names: Vec<String>,
    edges: Vec<Edge>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl DepGraph {
    pub fn new(names: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::InvalidInput("graph needs at least one node".into()));
        }
        let mut adj = vec![Vec::new(); n];
        let mut seen = std::collections::HashSet::new();
        for e in &edges {
            if e.i >= n || e.j >= n {
                return Err(Error::InvalidInput("edge endpoint out of range".into()));
            }
            if e.i == e.j {
                return Err(Error::InvalidInput("self loops are not allowed".into()));
            }
            if e.weight == 0.0 {
                return Err(Error::InvalidInput("zero-weight edge".into()));
            }
            let key = (e.i.min(e.j), e.i.max(e.j));
            if !seen.insert(key) {
                return Err(Error::InvalidInput("duplicate edge".into()));
            }
            adj[e.i].push((e.j, e.weight));
            adj[e.j].push((e.i, e.weight));
        }
        Ok(DepGraph { names, edges, adj })
    }

    pub fn n_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adj[node]
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.adj[i].iter().find(|&&(k, _)| k == j).map(|&(_, w)| w)
    }
}

/// Keeps edge (i, j) iff |rho_ij| is strictly above `threshold`, with the
/// signed value as weight.
pub fn build_graph(
    names: Vec<String>,
    partial: &DMatrix<f64>,
    threshold: f64,
) -> Result<DepGraph> {
    if partial.nrows() != partial.ncols() || partial.nrows() != names.len() {
        return Err(Error::InvalidInput(
            "partial-association matrix does not match the node list".into(),
        ));
    }
    if threshold < 0.0 {
        return Err(Error::InvalidInput("threshold must be nonnegative".into()));
    }
    let p = names.len();
    let mut edges = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            let w = partial[(i, j)];
            if w.abs() > threshold {
                edges.push(Edge { i, j, weight: w });
            }
        }
    }
    DepGraph::new(names, edges)
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphMetrics {
    pub degrees: Vec<usize>,
    /// Principal eigenvector of the |weight| adjacency, scaled to max 1.
    pub eigencentrality: Vec<f64>,
    pub density: f64,
    /// Longest shortest unweighted path within the largest connected
    /// component.
    pub diameter: usize,
}

pub fn graph_metrics(g: &DepGraph) -> Result<GraphMetrics> {
    let n = g.n_nodes();
    let degrees: Vec<usize> = (0..n).map(|v| g.neighbors(v).len()).collect();
    let density = if n >= 2 {
        g.edges().len() as f64 / (n * (n - 1) / 2) as f64
    } else {
        0.0
    };
    Ok(GraphMetrics {
        degrees,
        eigencentrality: eigencentrality(g)?,
        density,
        diameter: diameter(g),
    })
}

/// Power iteration on |w| adjacency shifted by (1 + max row sum) I so the
/// leading eigenvalue is strictly dominant even on bipartite graphs.
fn eigencentrality(g: &DepGraph) -> Result<Vec<f64>> {
    let n = g.n_nodes();
    if g.edges().is_empty() {
        return Ok(vec![1.0; n]);
    }
    let shift = 1.0
        + (0..n)
            .map(|v| g.neighbors(v).iter().map(|(_, w)| w.abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
    let mut v = vec![1.0f64; n];
    let max_steps = 10_000;
    for _ in 0..max_steps {
        let mut next = vec![0.0f64; n];
        for (node, out) in next.iter_mut().enumerate() {
            let mut acc = shift * v[node];
            for &(nbr, w) in g.neighbors(node) {
                acc += w.abs() * v[nbr];
            }
            *out = acc;
        }
        let norm = next.iter().copied().fold(0.0f64, f64::max);
        for x in next.iter_mut() {
            *x /= norm;
        }
        let delta = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        v = next;
        if delta < 1e-13 {
            return Ok(v);
        }
    }
    Err(Error::Convergence {
        max_iter: max_steps,
    })
}

fn components(g: &DepGraph) -> Vec<Vec<usize>> {
    let n = g.n_nodes();
    let mut comp = vec![usize::MAX; n];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &(v, _) in g.neighbors(u) {
                if comp[v] == usize::MAX {
                    comp[v] = id;
                    members.push(v);
                    queue.push_back(v);
                }
            }
        }
        out.push(members);
    }
    out
}

fn diameter(g: &DepGraph) -> usize {
    let comps = components(g);
    let largest = comps
        .iter()
        .max_by_key(|c| c.len())
        .expect("at least one component");
    let mut best = 0usize;
    for &start in largest {
        let mut dist = vec![usize::MAX; g.n_nodes()];
        dist[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &(v, _) in g.neighbors(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for &v in largest {
            best = best.max(dist[v]);
        }
    }
    best
}

/// Node-to-community assignment with contiguous ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommunityPartition {
    pub assignment: Vec<usize>,
    pub n_communities: usize,
}

impl CommunityPartition {
    /// Normalizes arbitrary labels to 0..k-1 in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut remap: Vec<(usize, usize)> = Vec::new();
        let mut assignment = Vec::with_capacity(labels.len());
        for &l in labels {
            let id = match remap.iter().find(|(old, _)| *old == l) {
                Some(&(_, new)) => new,
                None => {
                    let new = remap.len();
                    remap.push((l, new));
                    new
                }
            };
            assignment.push(id);
        }
        CommunityPartition {
            assignment,
            n_communities: remap.len(),
        }
    }
}

/// Constant-Potts quality: sum over same-community pairs of (w_ij - gamma),
/// where w_ij is |weight| for present edges and 0 otherwise.
pub fn cpm_quality(g: &DepGraph, part: &CommunityPartition, resolution: f64) -> f64 {
    let mut internal = 0.0;
    for e in g.edges() {
        if part.assignment[e.i] == part.assignment[e.j] {
            internal += e.weight.abs();
        }
    }
    let mut sizes = vec![0u64; part.n_communities];
    for &c in &part.assignment {
        sizes[c] += 1;
    }
    let pairs: u64 = sizes.iter().map(|&s| s * (s - 1) / 2).sum();
    internal - resolution * pairs as f64
}

struct LevelGraph {
    adj: Vec<Vec<(usize, f64)>>,
    /// Number of original nodes inside each super-node.
    sizes: Vec<u64>,
}

impl LevelGraph {
    fn n(&self) -> usize {
        self.sizes.len()
    }
}

/// Louvain local moving + aggregation with the CPM objective on absolute
/// weights: start from singletons, sweep nodes in seeded random order moving
/// each to the neighboring community with the largest strictly positive gain,
/// then collapse communities into super-nodes and repeat. Deterministic for a
/// fixed (graph, resolution, seed).
pub fn louvain_cpm(g: &DepGraph, resolution: f64, seed: u64) -> CommunityPartition {
    let n = g.n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut level = LevelGraph {
        adj: (0..n)
            .map(|v| {
                g.neighbors(v)
                    .iter()
                    .map(|&(u, w)| (u, w.abs()))
                    .collect()
            })
            .collect(),
        sizes: vec![1; n],
    };
    // membership[v] = community of original node v, in level-node ids
    let mut membership: Vec<usize> = (0..n).collect();

    loop {
        let (local, improved) = local_moving(&level, resolution, &mut rng);
        let n_communities = 1 + local.iter().copied().max().unwrap_or(0);
        if !improved || n_communities == level.n() {
            for m in membership.iter_mut() {
                *m = local[*m];
            }
            break;
        }
        for m in membership.iter_mut() {
            *m = local[*m];
        }
        level = aggregate(&level, &local, n_communities);
    }
    CommunityPartition::from_labels(&membership)
}

/// One level of the local-moving phase. Returns contiguous community labels
/// and whether any move happened.
fn local_moving(level: &LevelGraph, resolution: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    let n = level.n();
    let mut community: Vec<usize> = (0..n).collect();
    // total original size per community
    let mut comm_size: Vec<u64> = level.sizes.clone();
    let mut improved_ever = false;

    let mut order: Vec<usize> = (0..n).collect();
    loop {
        order.shuffle(rng);
        let mut moved = false;
        for &v in &order {
            let home = community[v];
            let size_v = level.sizes[v];
            // links from v to each adjacent community (self loops excluded;
            // they are constant under any move)
            let mut link: Vec<(usize, f64)> = Vec::new();
            for &(u, w) in &level.adj[v] {
                if u == v {
                    continue;
                }
                let c = community[u];
                match link.iter_mut().find(|(cc, _)| *cc == c) {
                    Some((_, acc)) => *acc += w,
                    None => link.push((c, w)),
                }
            }
            let to_home = link
                .iter()
                .find(|(c, _)| *c == home)
                .map_or(0.0, |&(_, w)| w);
            // gain of leaving home (removing v from its community)
            let removal = -(to_home - resolution * size_v as f64 * (comm_size[home] - size_v) as f64);
            let mut best_gain = 0.0f64;
            let mut best_comm = home;
            link.sort_by_key(|&(c, _)| c);
            for &(c, w) in &link {
                if c == home {
                    continue;
                }
                let gain = removal + (w - resolution * size_v as f64 * comm_size[c] as f64);
                if gain > best_gain {
                    best_gain = gain;
                    best_comm = c;
                }
            }
            if best_comm != home {
                community[v] = best_comm;
                comm_size[home] -= size_v;
                comm_size[best_comm] += size_v;
                moved = true;
                improved_ever = true;
            }
        }
        if !moved {
            break;
        }
    }

    // relabel to contiguous ids in node order
    let part = CommunityPartition::from_labels(&community);
    (part.assignment, improved_ever)
}

fn aggregate(level: &LevelGraph, community: &[usize], n_communities: usize) -> LevelGraph {
    let mut sizes = vec![0u64; n_communities];
    for (v, &c) in community.iter().enumerate() {
        sizes[c] += level.sizes[v];
    }
    let mut weight: Vec<std::collections::BTreeMap<usize, f64>> =
        vec![std::collections::BTreeMap::new(); n_communities];
    for (v, nbrs) in level.adj.iter().enumerate() {
        let cv = community[v];
        for &(u, w) in nbrs {
            let cu = community[u];
            // each undirected edge appears twice in adj; halve off-diagonal
            // accumulation by only taking v <= u, self loops once via v == u
            if v > u {
                continue;
            }
            *weight[cv].entry(cu).or_insert(0.0) += w;
            if cv != cu {
                *weight[cu].entry(cv).or_insert(0.0) += w;
            }
        }
    }
    let adj = weight
        .into_iter()
        .map(|m| m.into_iter().collect::<Vec<(usize, f64)>>())
        .collect();
    LevelGraph { adj, sizes }
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionComparison {
    /// n_communities(a) - n_communities(b).
    pub delta_communities: i64,
    /// Adjusted Rand index in [-1, 1]; 1 iff identical up to relabeling.
    pub ari: f64,
}

pub fn compare_partitions(
    a: &CommunityPartition,
    b: &CommunityPartition,
) -> Result<PartitionComparison> {
    if a.assignment.len() != b.assignment.len() {
        return Err(Error::SchemaMismatch(format!(
            "partitions cover {} vs {} nodes",
            a.assignment.len(),
            b.assignment.len()
        )));
    }
    let n = a.assignment.len();
    if n < 2 {
        return Ok(PartitionComparison {
            delta_communities: a.n_communities as i64 - b.n_communities as i64,
            ari: 1.0,
        });
    }
    let mut table = vec![vec![0u64; b.n_communities]; a.n_communities];
    let mut rows = vec![0u64; a.n_communities];
    let mut cols = vec![0u64; b.n_communities];
    for i in 0..n {
        table[a.assignment[i]][b.assignment[i]] += 1;
        rows[a.assignment[i]] += 1;
        cols[b.assignment[i]] += 1;
    }
    let choose2 = |x: u64| (x * x.saturating_sub(1) / 2) as f64;
    let index: f64 = table
        .iter()
        .flat_map(|r| r.iter())
        .map(|&x| choose2(x))
        .sum();
    let sum_a: f64 = rows.iter().map(|&x| choose2(x)).sum();
    let sum_b: f64 = cols.iter().map(|&x| choose2(x)).sum();
    let total = choose2(n as u64);
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    let ari = if (max_index - expected).abs() < 1e-12 {
        // degenerate only when both partitions are all-singletons or both are
        // a single block; identical either way
        1.0
    } else {
        (index - expected) / (max_index - expected)
    };
    Ok(PartitionComparison {
        delta_communities: a.n_communities as i64 - b.n_communities as i64,
        ari,
    })
}

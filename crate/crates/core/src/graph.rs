//! Undirected simple graphs, random generators, degree statistics and
//! node rewiring.
//!
//! Node ids are 0-based. Adjacency lists are kept sorted, which makes
//! equality of two graphs a byte-for-byte comparison of their lists.

use std::fmt::Write as _;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use crate::error::{param, Error, Result};
use crate::rng::{label, stream};

/// Largest `n` accepted by [`node_distance`].
pub const NODE_DISTANCE_MAX_N: usize = 12;

/// An undirected simple graph on nodes `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Graph {
    adj: Vec<Vec<u32>>,
}

impl Graph {
    /// The graph on `n` nodes with no edges.
    pub fn empty(n: usize) -> Self {
        Graph {
            adj: vec![Vec::new(); n],
        }
    }

    /// The complete graph `K_n`.
    pub fn complete(n: usize) -> Self {
        let adj = (0..n)
            .map(|i| (0..n as u32).filter(|&j| j as usize != i).collect())
            .collect();
        Graph { adj }
    }

    /// Builds a graph from an edge list. Repeated edges are merged.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        check_node_count(n)?;
        let mut adj = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(param(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(param(format!("self-loop at node {i}")));
            }
            adj[i].push(j as u32);
            adj[j].push(i as u32);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Graph { adj })
    }

    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Sorted neighbor list of node `i`.
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.adj[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&(j as u32)).is_ok()
    }

    /// Number of edges `m`.
    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges `(i, j)` with `i < j` in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj.iter().enumerate().flat_map(|(i, list)| {
            list.iter()
                .map(|&j| j as usize)
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    /// Checks symmetry, sortedness and the absence of self-loops.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        for (i, list) in self.adj.iter().enumerate() {
            for w in list.windows(2) {
                if w[0] >= w[1] {
                    return Err(param(format!("adjacency of node {i} not strictly sorted")));
                }
            }
            for &j in list {
                let j = j as usize;
                if j >= n {
                    return Err(param(format!("node {i} lists out-of-range neighbor {j}")));
                }
                if j == i {
                    return Err(param(format!("self-loop at node {i}")));
                }
                if !self.has_edge(j, i) {
                    return Err(param(format!("edge ({i}, {j}) is not symmetric")));
                }
            }
        }
        Ok(())
    }

    /// Serializes as `"n m"` followed by one `"i j"` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n(), self.edge_count());
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    /// Parses the format written by [`Graph::to_edge_list`].
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header line".into()))?;
        let (n, m) = parse_pair(header)?;
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            let (i, j) = parse_pair(line)?;
            if i >= j {
                return Err(Error::Parse(format!("edge line `{line}` must satisfy i < j")));
            }
            edges.push((i, j));
        }
        if edges.len() != m {
            return Err(Error::Parse(format!(
                "header declares {m} edges but {} were listed",
                edges.len()
            )));
        }
        let g = Graph::from_edges(n, edges).map_err(|e| Error::Parse(e.to_string()))?;
        if g.edge_count() != m {
            return Err(Error::Parse("duplicate edges in edge list".into()));
        }
        Ok(g)
    }
}

fn parse_pair(line: &str) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace().map(str::parse::<usize>);
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
        _ => Err(Error::Parse(format!("expected two integers, got `{line}`"))),
    }
}

fn check_node_count(n: usize) -> Result<()> {
    if n > u32::MAX as usize {
        return Err(param(format!("n = {n} exceeds the u32 node id range")));
    }
    Ok(())
}

fn check_positive(n: usize) -> Result<()> {
    if n == 0 {
        return Err(param("n must be at least 1"));
    }
    check_node_count(n)
}

/// Samples `G(n, p)`.
pub fn generate_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    check_positive(n)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(param(format!("edge probability {p} outside [0, 1]")));
    }
    let mut rng = stream(seed, &[label::GRAPH]);
    Ok(er_with(n, p, &mut rng))
}

// Rows are filled in increasing (i, j) order, so lists come out sorted.
fn er_with<R: RngCore>(n: usize, p: f64, rng: &mut R) -> Graph {
    if p == 0.0 {
        return Graph::empty(n);
    }
    if p == 1.0 {
        return Graph::complete(n);
    }
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    if p < 0.25 {
        // Geometric skipping over each row.
        let lq = (-p).ln_1p();
        for i in 0..n {
            let mut j = i;
            loop {
                let u: f64 = rng.random();
                let skip = ((1.0 - u).ln() / lq).floor();
                if skip >= (n - j) as f64 {
                    break;
                }
                j += 1 + skip as usize;
                if j >= n {
                    break;
                }
                adj[i].push(j as u32);
                adj[j].push(i as u32);
            }
        }
    } else {
        let cap = (n as f64 * p * 1.05) as usize + 16;
        for list in &mut adj {
            list.reserve_exact(cap);
        }
        let threshold = (p * 18_446_744_073_709_551_616.0) as u64;
        for i in 0..n {
            for j in i + 1..n {
                if rng.next_u64() < threshold {
                    adj[i].push(j as u32);
                    adj[j].push(i as u32);
                }
            }
        }
        for list in &mut adj {
            list.shrink_to_fit();
        }
    }
    Graph { adj }
}

/// Samples a uniform `d`-regular graph by configuration-model pairing,
/// restarting on any self-loop or repeated edge. Gives up after `1000·n`
/// attempts.
///
/// For `d > (n−1)/2` the sparser complement is sampled instead. A restart
/// succeeds with probability about `e^{−(d²−1)/4}`, so degrees well above
/// 5 on both sides fail.
pub fn generate_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    check_positive(n)?;
    if d >= n {
        return Err(param(format!("degree {d} must be below n = {n}")));
    }
    if (n * d) % 2 != 0 {
        return Err(param(format!("n·d = {} must be even", n * d)));
    }
    if d == 0 {
        return Ok(Graph::empty(n));
    }
    if d == n - 1 {
        return Ok(Graph::complete(n));
    }
    if 2 * d > n - 1 {
        return Ok(complement(&pairing(n, n - 1 - d, seed)?));
    }
    pairing(n, d, seed)
}

fn complement(g: &Graph) -> Graph {
    let n = g.n();
    let adj = (0..n)
        .map(|i| {
            let mut nb = g.adj[i].iter().peekable();
            (0..n as u32)
                .filter(|&j| {
                    if nb.peek() == Some(&&j) {
                        nb.next();
                        false
                    } else {
                        j != i as u32
                    }
                })
                .collect()
        })
        .collect();
    Graph { adj }
}

fn pairing(n: usize, d: usize, seed: u64) -> Result<Graph> {
    if d == 0 {
        return Ok(Graph::empty(n));
    }
    let mut rng = stream(seed, &[label::GRAPH]);
    let mut points: Vec<u32> = (0..n as u32)
        .flat_map(|i| std::iter::repeat_n(i, d))
        .collect();
    let mut adj: Vec<Vec<u32>> = vec![Vec::with_capacity(d); n];
    'attempt: for _ in 0..1000 * n {
        points.shuffle(&mut rng);
        for list in &mut adj {
            list.clear();
        }
        for pair in points.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b || adj[a as usize].contains(&b) {
                continue 'attempt;
            }
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        return Ok(Graph { adj });
    }
    Err(Error::Generation(format!(
        "no simple {d}-regular pairing on {n} nodes within {} attempts",
        1000 * n
    )))
}

/// The starpartite graph with the given center set: every center is adjacent
/// to every other node and there are no other edges.
pub fn starpartite(n: usize, centers: &[usize]) -> Result<Graph> {
    check_node_count(n)?;
    let is_center = membership(n, centers)?;
    let center_ids: Vec<u32> = (0..n as u32).filter(|&i| is_center[i as usize]).collect();
    let adj = (0..n)
        .map(|i| {
            if is_center[i] {
                (0..n as u32).filter(|&j| j as usize != i).collect()
            } else {
                center_ids.clone()
            }
        })
        .collect();
    Ok(Graph { adj })
}

/// Samples a starpartite graph whose `t` centers are a uniform subset.
pub fn generate_starpartite(n: usize, t: usize, seed: u64) -> Result<Graph> {
    check_positive(n)?;
    if t > n {
        return Err(param(format!("center count {t} exceeds n = {n}")));
    }
    let mut rng = stream(seed, &[label::GRAPH]);
    let centers = index::sample(&mut rng, n, t).into_vec();
    starpartite(n, &centers)
}

/// A clique on `members`; all other nodes isolated.
pub fn clique_on(n: usize, members: &[usize]) -> Result<Graph> {
    check_node_count(n)?;
    let inside = membership(n, members)?;
    let ids: Vec<u32> = (0..n as u32).filter(|&i| inside[i as usize]).collect();
    let adj = (0..n)
        .map(|i| {
            if inside[i] {
                ids.iter().copied().filter(|&j| j as usize != i).collect()
            } else {
                Vec::new()
            }
        })
        .collect();
    Ok(Graph { adj })
}

/// Samples a `k`-clique on a uniform node subset plus isolated nodes.
pub fn generate_clique_plus_isolated(n: usize, k: usize, seed: u64) -> Result<Graph> {
    check_positive(n)?;
    if k > n {
        return Err(param(format!("clique size {k} exceeds n = {n}")));
    }
    let mut rng = stream(seed, &[label::GRAPH]);
    let members = index::sample(&mut rng, n, k).into_vec();
    clique_on(n, &members)
}

/// Samples `G(n, min(density, D/(2n)))` and then deletes edges until every
/// degree is at most `D`.
///
/// Truncation repeatedly takes the node of highest degree (lowest id on ties)
/// and removes its edge to the neighbor of highest degree (lowest id on ties).
pub fn generate_bounded(n: usize, max_degree: usize, density: f64, seed: u64) -> Result<Graph> {
    check_positive(n)?;
    if max_degree >= n {
        return Err(param(format!("degree bound {max_degree} must be below n = {n}")));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(param(format!("density {density} outside [0, 1]")));
    }
    let p = density.min(max_degree as f64 / (2.0 * n as f64));
    let mut rng = stream(seed, &[label::GRAPH]);
    let mut g = er_with(n, p, &mut rng);
    loop {
        let worst = (0..n).rev().max_by_key(|&i| g.adj[i].len()).unwrap_or(0);
        if g.adj[worst].len() <= max_degree {
            break;
        }
        let victim = g.adj[worst]
            .iter()
            .rev()
            .copied()
            .max_by_key(|&j| g.adj[j as usize].len())
            .expect("node above the bound has neighbors");
        remove_sorted(&mut g.adj[worst], victim);
        remove_sorted(&mut g.adj[victim as usize], worst as u32);
    }
    Ok(g)
}

fn remove_sorted(list: &mut Vec<u32>, x: u32) {
    if let Ok(pos) = list.binary_search(&x) {
        list.remove(pos);
    }
}

fn membership(n: usize, nodes: &[usize]) -> Result<Vec<bool>> {
    let mut inside = vec![false; n];
    for &i in nodes {
        if i >= n {
            return Err(param(format!("node {i} out of range for n = {n}")));
        }
        inside[i] = true;
    }
    Ok(inside)
}

/// Empirical degree distribution `D_G`, indexed by degree `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreePmf {
    probs: Vec<f64>,
}

impl DegreePmf {
    /// Wraps a probability vector, checking nonnegativity and unit mass.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(param("degree pmf must be nonempty"));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(param("degree pmf entries must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(param(format!("degree pmf sums to {total}, not 1")));
        }
        Ok(DegreePmf { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of nodes the pmf is defined over (its length).
    pub fn n(&self) -> usize {
        self.probs.len()
    }

    /// Average degree.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(d, p)| d as f64 * p)
            .sum()
    }
}

/// The degree distribution of `g`.
pub fn degree_pmf(g: &Graph) -> DegreePmf {
    let n = g.n().max(1);
    let mut counts = vec![0usize; n];
    for i in 0..g.n() {
        counts[g.degree(i)] += 1;
    }
    if g.n() == 0 {
        counts[0] = 1;
    }
    let total = g.n().max(1) as f64;
    DegreePmf {
        probs: counts.into_iter().map(|c| c as f64 / total).collect(),
    }
}

/// Replaces the neighborhood of node `i` with `new_neighbors`.
pub fn rewire_node(g: &Graph, i: usize, new_neighbors: &[usize]) -> Result<Graph> {
    let n = g.n();
    if i >= n {
        return Err(param(format!("node {i} out of range for n = {n}")));
    }
    if new_neighbors.contains(&i) {
        return Err(param(format!("rewiring node {i} to itself would add a self-loop")));
    }
    let inside = membership(n, new_neighbors)?;
    let mut adj = g.adj.clone();
    for &j in &g.adj[i] {
        remove_sorted(&mut adj[j as usize], i as u32);
    }
    adj[i] = (0..n as u32).filter(|&j| inside[j as usize]).collect();
    for j in 0..n {
        if inside[j] {
            let list = &mut adj[j];
            if let Err(pos) = list.binary_search(&(i as u32)) {
                list.insert(pos, i as u32);
            }
        }
    }
    Ok(Graph { adj })
}

fn check_same_size(g: &Graph, h: &Graph) -> Result<()> {
    if g.n() != h.n() {
        return Err(param(format!("graphs have {} and {} nodes", g.n(), h.n())));
    }
    Ok(())
}

/// Minimum number of nodes whose rewiring turns `g` into `h`.
///
/// This is the minimum vertex cover of the symmetric difference of the edge
/// sets, found by exhaustive search. Only `n ≤ 12` is accepted.
pub fn node_distance(g: &Graph, h: &Graph) -> Result<usize> {
    check_same_size(g, h)?;
    let n = g.n();
    if n > NODE_DISTANCE_MAX_N {
        return Err(param(format!(
            "exact node distance limited to n ≤ {NODE_DISTANCE_MAX_N}; use node_distance_upper"
        )));
    }
    let diff: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| g.has_edge(i, j) != h.has_edge(i, j))
        .collect();
    let best = (0u32..1 << n)
        .filter(|mask| {
            diff.iter()
                .all(|&(i, j)| mask & (1 << i) != 0 || mask & (1 << j) != 0)
        })
        .map(u32::count_ones)
        .min()
        .unwrap_or(0);
    Ok(best as usize)
}

/// Number of nodes whose neighborhoods differ between `g` and `h`, an upper
/// bound on [`node_distance`].
pub fn node_distance_upper(g: &Graph, h: &Graph) -> Result<usize> {
    check_same_size(g, h)?;
    Ok((0..g.n()).filter(|&i| g.adj[i] != h.adj[i]).count())
}

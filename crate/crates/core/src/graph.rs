//! Simple undirected graphs, vertex cuts, and the exhaustive c-balanced
//! separator oracle.
//!
//! The edge-list text format is a header line `n m` followed by one `i j`
//! line per edge (0-based ids). Lines starting with `#` are comments. The
//! declared `m` is informational; duplicate edges collapse.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Largest vertex count the exhaustive oracle accepts by default.
pub const DEFAULT_BRUTE_FORCE_CAP: usize = 20;

/// Hard limit imposed by the `u64` subset masks used in enumeration.
const MASK_BITS: usize = 63;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    /// Sorted, deduplicated pairs with `i < j`.
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph from an edge list. Duplicates (in either orientation)
    /// collapse; self-loops and out-of-range endpoints are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("vertex count must be positive".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) has an endpoint outside [0, {n})"
                )));
            }
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at vertex {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Graph { n, edges: set.into_iter().collect() })
    }

    /// Parses the edge-list text format.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut header: Option<usize> = None;
        let mut set = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse_err = |message: String| Error::Parse { line: line_no, message };
            if fields.len() != 2 {
                return Err(parse_err(format!("expected two integers, found {:?}", line)));
            }
            let a: usize = fields[0]
                .parse()
                .map_err(|_| parse_err(format!("invalid integer {:?}", fields[0])))?;
            let b: usize = fields[1]
                .parse()
                .map_err(|_| parse_err(format!("invalid integer {:?}", fields[1])))?;
            match header {
                None => {
                    if a == 0 {
                        return Err(parse_err("vertex count must be positive".into()));
                    }
                    header = Some(a);
                }
                Some(n) => {
                    if a >= n || b >= n {
                        let v = if a >= n { a } else { b };
                        return Err(parse_err(format!("vertex {v} out of range for n = {n}")));
                    }
                    if a == b {
                        return Err(parse_err(format!("self-loop at vertex {a}")));
                    }
                    set.insert((a.min(b), a.max(b)));
                }
            }
        }
        let n = header.ok_or(Error::Parse { line: 0, message: "missing `n m` header".into() })?;
        Ok(Graph { n, edges: set.into_iter().collect() })
    }

    /// Parses a DIMACS graph (`p edge n m`, `e u v` with 1-based ids, `c` comments).
    pub fn parse_dimacs(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut set = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let fields: Vec<&str> = raw.split_whitespace().collect();
            let parse_err = |message: String| Error::Parse { line: line_no, message };
            let int = |s: &str| -> Result<usize> {
                s.parse().map_err(|_| parse_err(format!("invalid integer {s:?}")))
            };
            match fields.first().copied() {
                None | Some("c") => {}
                Some("p") => {
                    if fields.len() != 4 {
                        return Err(parse_err("expected `p <format> <n> <m>`".into()));
                    }
                    let count = int(fields[2])?;
                    if count == 0 {
                        return Err(parse_err("vertex count must be positive".into()));
                    }
                    n = Some(count);
                }
                Some("e") => {
                    let n = n.ok_or_else(|| parse_err("edge before `p` line".into()))?;
                    if fields.len() < 3 {
                        return Err(parse_err("expected `e <u> <v>`".into()));
                    }
                    let (a, b) = (int(fields[1])?, int(fields[2])?);
                    if a == 0 || b == 0 || a > n || b > n {
                        return Err(parse_err(format!("vertex out of range 1..={n}")));
                    }
                    if a == b {
                        return Err(parse_err(format!("self-loop at vertex {a}")));
                    }
                    set.insert(((a - 1).min(b - 1), (a - 1).max(b - 1)));
                }
                Some(other) => return Err(parse_err(format!("unknown line type {other:?}"))),
            }
        }
        let n = n.ok_or(Error::Parse { line: 0, message: "missing `p` line".into() })?;
        Ok(Graph { n, edges: set.into_iter().collect() })
    }

    /// Renders the graph in the edge-list text format.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    pub fn empty(n: usize) -> Result<Self> {
        Graph::new(n, [])
    }

    pub fn path(n: usize) -> Result<Self> {
        Graph::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter("a cycle needs at least 3 vertices".into()));
        }
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn complete(n: usize) -> Result<Self> {
        Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    /// `K_{a,b}` with parts `0..a` and `a..a+b`.
    pub fn complete_bipartite(a: usize, b: usize) -> Result<Self> {
        Graph::new(a + b, (0..a).flat_map(|i| (a..a + b).map(move |j| (i, j))))
    }

    /// Star `K_{1,leaves}` with centre 0.
    pub fn star(leaves: usize) -> Result<Self> {
        Graph::new(leaves + 1, (1..=leaves).map(|i| (0, i)))
    }

    /// The Petersen graph: outer 5-cycle 0..5, inner pentagram 5..10, spokes i -- i+5.
    pub fn petersen() -> Self {
        let outer = (0..5).map(|i| (i, (i + 1) % 5));
        let inner = (0..5).map(|i| (5 + i, 5 + (i + 2) % 5));
        let spokes = (0..5).map(|i| (i, i + 5));
        Graph::new(10, outer.chain(inner).chain(spokes)).expect("static edge list")
    }

    /// Subgraph induced by `keep`, relabelled to `0..keep.len()` in the given order.
    pub fn induced(&self, keep: &[usize]) -> Result<Self> {
        let mut index = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            if old >= self.n {
                return Err(Error::InvalidParameter(format!("vertex {old} out of range")));
            }
            index[old] = new;
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(a, b)| index[a] != usize::MAX && index[b] != usize::MAX)
            .map(|&(a, b)| (index[a], index[b]));
        Graph::new(keep.len(), edges)
    }

    /// Erdős–Rényi `G(n, prob)`.
    pub fn gnp(n: usize, prob: f64, rng: &mut impl rand::Rng) -> Result<Self> {
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::InvalidParameter(format!("edge probability {prob} not in [0, 1]")));
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < prob {
                    edges.push((i, j));
                }
            }
        }
        Graph::new(n, edges)
    }

    fn adjacency_masks(&self) -> Vec<u64> {
        let mut masks = vec![0u64; self.n];
        for &(a, b) in &self.edges {
            masks[a] |= 1 << b;
            masks[b] |= 1 << a;
        }
        masks
    }
}

/// A vertex subset `S` of a graph on `n` vertices. The complement is implied.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cut {
    n: usize,
    members: Vec<usize>,
}

impl Cut {
    pub fn new(n: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = members.into_iter().collect();
        if let Some(&v) = set.iter().find(|&&v| v >= n) {
            return Err(Error::InvalidParameter(format!("cut member {v} outside [0, {n})")));
        }
        Ok(Cut { n, members: set.into_iter().collect() })
    }

    pub fn from_mask(n: usize, mask: u64) -> Self {
        let members = (0..n.min(64)).filter(|&v| mask >> v & 1 == 1).collect();
        Cut { n, members }
    }

    pub fn from_indicator(indicator: &[bool]) -> Self {
        let members = indicator.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        Cut { n: indicator.len(), members }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    pub fn indicator(&self) -> Vec<bool> {
        let mut ind = vec![false; self.n];
        for &v in &self.members {
            ind[v] = true;
        }
        ind
    }

    pub fn complement(&self) -> Cut {
        let ind = self.indicator();
        Cut { n: self.n, members: (0..self.n).filter(|&v| !ind[v]).collect() }
    }

    /// Size of the smaller side divided by `n`.
    pub fn balance(&self) -> f64 {
        self.len().min(self.n - self.len()) as f64 / self.n as f64
    }

    fn check_graph(&self, g: &Graph) {
        assert_eq!(self.n, g.n(), "cut built for n = {} used with a graph on {} vertices", self.n, g.n());
    }
}

/// Number of edges with exactly one endpoint in `s`.
pub fn cut_size(g: &Graph, s: &Cut) -> usize {
    s.check_graph(g);
    let ind = s.indicator();
    g.edges().iter().filter(|&&(a, b)| ind[a] != ind[b]).count()
}

/// `|E(S, S̄)| / |S|` kept as an exact ratio of integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sparsity {
    pub cut_edges: usize,
    pub side_size: usize,
}

impl Sparsity {
    pub fn value(&self) -> f64 {
        self.cut_edges as f64 / self.side_size as f64
    }
}

pub fn sparsity(g: &Graph, s: &Cut) -> Result<Sparsity> {
    if s.is_empty() || s.len() == g.n() {
        return Err(Error::UndefinedSparsity { size: s.len(), n: g.n() });
    }
    Ok(Sparsity { cut_edges: cut_size(g, s), side_size: s.len() })
}

/// `cn < size < (1 - c)n`, both inequalities strict.
pub fn size_is_c_balanced(n: usize, size: usize, c: f64) -> bool {
    let n = n as f64;
    let k = size as f64;
    c * n < k && k < (1.0 - c) * n
}

pub fn is_c_balanced(g: &Graph, s: &Cut, c: f64) -> bool {
    s.check_graph(g);
    size_is_c_balanced(g.n(), s.len(), c)
}

/// Errors unless some subset size is c-balanced for `n`.
pub fn ensure_balance_feasible(n: usize, c: f64) -> Result<()> {
    if !(c > 0.0) || !(0..=n).any(|k| size_is_c_balanced(n, k, c)) {
        return Err(Error::InfeasibleBalance { n, c });
    }
    Ok(())
}

/// True when the sorted member list of `a` precedes that of `b`.
fn lex_less(a: u64, b: u64) -> bool {
    let diff = a ^ b;
    if diff == 0 {
        return false;
    }
    let d = diff.trailing_zeros();
    let above = if d >= 63 { 0 } else { !0u64 << (d + 1) };
    if a >> d & 1 == 1 {
        // `a` continues with d; `b` continues with something larger, or ends.
        b & above != 0
    } else {
        a & above == 0
    }
}

/// Minimum cut size over all c-balanced subsets, by exhaustive enumeration,
/// with the default vertex cap.
pub fn exact_balanced_separator(g: &Graph, c: f64) -> Result<(Cut, usize)> {
    exact_balanced_separator_with_cap(g, c, DEFAULT_BRUTE_FORCE_CAP)
}

/// Exhaustive oracle. Ties are broken towards the lexicographically smallest
/// member list.
pub fn exact_balanced_separator_with_cap(g: &Graph, c: f64, cap: usize) -> Result<(Cut, usize)> {
    let n = g.n();
    if n > cap.min(MASK_BITS) {
        return Err(Error::BruteForceCap { n, cap: cap.min(MASK_BITS) });
    }
    ensure_balance_feasible(n, c)?;
    let adj = g.adjacency_masks();
    let full = if n == 64 { !0 } else { (1u64 << n) - 1 };
    let mut best: Option<(usize, u64)> = None;
    for mask in 0..=full {
        if !size_is_c_balanced(n, mask.count_ones() as usize, c) {
            continue;
        }
        let mut size = 0usize;
        let mut rest = mask;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            size += (adj[v] & !mask & full).count_ones() as usize;
        }
        let better = match best {
            None => true,
            Some((bs, bm)) => size < bs || (size == bs && lex_less(mask, bm)),
        };
        if better {
            best = Some((size, mask));
        }
    }
    let (size, mask) = best.ok_or(Error::InfeasibleBalance { n, c })?;
    Ok((Cut::from_mask(n, mask), size))
}

/// All c-balanced cuts of an `n`-vertex graph with their cut sizes, ordered by
/// cut size and then lexicographically. Only sensible for small `n`.
pub fn balanced_cuts_by_size(g: &Graph, c: f64, cap: usize) -> Result<Vec<(Cut, usize)>> {
    let n = g.n();
    if n > cap.min(MASK_BITS) {
        return Err(Error::BruteForceCap { n, cap: cap.min(MASK_BITS) });
    }
    ensure_balance_feasible(n, c)?;
    let mut all: Vec<(Cut, usize)> = (0..(1u64 << n))
        .filter(|m| size_is_c_balanced(n, m.count_ones() as usize, c))
        .map(|m| {
            let cut = Cut::from_mask(n, m);
            let size = cut_size(g, &cut);
            (cut, size)
        })
        .collect();
    all.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.members.cmp(&b.0.members)));
    Ok(all)
}

/// A uniformly random c-balanced cut: a balanced size is drawn uniformly,
/// then a uniform subset of that size.
pub fn random_balanced_cut(n: usize, c: f64, rng: &mut impl rand::Rng) -> Result<Cut> {
    ensure_balance_feasible(n, c)?;
    let sizes: Vec<usize> = (0..=n).filter(|&k| size_is_c_balanced(n, k, c)).collect();
    let k = sizes[rng.random_range(0..sizes.len())];
    let members = rand::seq::index::sample(rng, n, k).into_vec();
    Cut::new(n, members)
}

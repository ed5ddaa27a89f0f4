//! Overlapping decompositions: partitions, layer growth, DOF maps and
//! partition-of-unity weights.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{DofGraph, Grid};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LayerConfig {
    pub overlap_layers: usize,
    pub oversample_layers: usize,
}

impl Default for LayerConfig {
    fn default() -> Self {
        Self { overlap_layers: 2, oversample_layers: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PuMode {
    Multiplicity,
    #[default]
    Ramp,
}

impl std::str::FromStr for PuMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "multiplicity" => Ok(Self::Multiplicity),
            "ramp" => Ok(Self::Ramp),
            other => Err(Error::InvalidArgument(format!("unknown partition of unity mode `{other}`"))),
        }
    }
}

/// Overlapping cover of the cells with the matching DOF index lists.
///
/// All cell and DOF lists are sorted ascending. `pu[j][k]` is the weight of
/// `dofs_overlap[j][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub core: Vec<Vec<usize>>,
    pub overlap: Vec<Vec<usize>>,
    pub oversample: Vec<Vec<usize>>,
    pub dofs_overlap: Vec<Vec<usize>>,
    pub dofs_oversample: Vec<Vec<usize>>,
    pub pu: Vec<Vec<f64>>,
    pub dofs_per_cell: usize,
    pub layers: LayerConfig,
    pub pu_mode: PuMode,
}

impl Decomposition {
    pub fn build(
        graph: &DofGraph,
        core: Vec<Vec<usize>>,
        layers: LayerConfig,
        pu_mode: PuMode,
        dofs_per_cell: usize,
    ) -> Result<Self> {
        let n = graph.num_vertices();
        if core.is_empty() {
            return Err(Error::InvalidArgument("decomposition needs at least one subdomain".into()));
        }
        let mut owner = vec![usize::MAX; n];
        for (j, set) in core.iter().enumerate() {
            for &c in set {
                if c >= n {
                    return Err(Error::IndexOutOfRange { index: c, dim: n });
                }
                if owner[c] != usize::MAX {
                    return Err(Error::InvalidArgument(format!("cell {c} belongs to subdomains {} and {j}", owner[c])));
                }
                owner[c] = j;
            }
        }
        if let Some(c) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::UncoveredDof(c * dofs_per_cell));
        }
        let core: Vec<Vec<usize>> = core
            .into_iter()
            .map(|mut s| {
                s.sort_unstable();
                s
            })
            .collect();
        let overlap: Vec<Vec<usize>> = core.iter().map(|s| extend_layers(s, graph, layers.overlap_layers)).collect();
        let oversample: Vec<Vec<usize>> = overlap.iter().map(|s| extend_layers(s, graph, layers.oversample_layers)).collect();
        let cell_pu = build_pu(graph, &overlap, pu_mode, layers.overlap_layers)?;
        let expand = |cells: &[usize]| -> Vec<usize> {
            cells.iter().flat_map(|&c| (0..dofs_per_cell).map(move |l| c * dofs_per_cell + l)).collect()
        };
        let dofs_overlap: Vec<Vec<usize>> = overlap.iter().map(|s| expand(s)).collect();
        let dofs_oversample: Vec<Vec<usize>> = oversample.iter().map(|s| expand(s)).collect();
        let pu = cell_pu
            .iter()
            .map(|w| w.iter().flat_map(|&x| std::iter::repeat(x).take(dofs_per_cell)).collect())
            .collect();
        Ok(Self { core, overlap, oversample, dofs_overlap, dofs_oversample, pu, dofs_per_cell, layers, pu_mode })
    }

    pub fn num_subdomains(&self) -> usize {
        self.core.len()
    }

    pub fn num_dofs(&self) -> usize {
        self.core.iter().map(Vec::len).sum::<usize>() * self.dofs_per_cell
    }

    /// Positions of `dofs_overlap[j]` inside `dofs_oversample[j]`.
    pub fn overlap_in_oversample(&self, j: usize) -> Vec<usize> {
        let os = &self.dofs_oversample[j];
        let mut out = Vec::with_capacity(self.dofs_overlap[j].len());
        let mut k = 0;
        for &d in &self.dofs_overlap[j] {
            while os[k] != d {
                k += 1;
            }
            out.push(k);
        }
        out
    }

    /// Line-oriented dump of the subdomain cell lists.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for j in 0..self.num_subdomains() {
            for (label, set) in [("core", &self.core[j]), ("overlap", &self.overlap[j]), ("oversample", &self.oversample[j])] {
                let cells: Vec<String> = set.iter().map(usize::to_string).collect();
                writeln!(s, "{j} {label} {}", cells.join(" ")).unwrap();
            }
        }
        s
    }
}

/// `px x py` rectangular blocks of equal size, numbered row-major.
pub fn partition_structured(grid: &Grid, px: usize, py: usize) -> Result<Vec<Vec<usize>>> {
    let (nx, ny) = (grid.nx(), grid.ny());
    if px == 0 || py == 0 || nx % px != 0 || ny % py != 0 {
        return Err(Error::InvalidArgument(format!("{px}x{py} blocks do not divide the {nx}x{ny} grid")));
    }
    let (bx, by) = (nx / px, ny / py);
    let mut parts = vec![Vec::with_capacity(bx * by); px * py];
    for c in 0..grid.num_cells() {
        let (ix, iy) = grid.cell_ij(c);
        parts[(iy / by) * px + ix / bx].push(c);
    }
    Ok(parts)
}

/// Recursive graph-growing bisection with exact target sizes.
pub fn partition_greedy(graph: &DofGraph, m: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = graph.num_vertices();
    if m == 0 {
        return Err(Error::InvalidArgument("subdomain count must be positive".into()));
    }
    if m > n {
        return Err(Error::InvalidArgument(format!("cannot split {n} cells into {m} subdomains")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = vec![false; n];
    let mut dist = vec![usize::MAX; n];
    let mut out = Vec::with_capacity(m);
    let mut stack = vec![((0..n).collect::<Vec<_>>(), m)];
    while let Some((set, parts)) = stack.pop() {
        if parts == 1 {
            let mut s = set;
            s.sort_unstable();
            out.push(s);
            continue;
        }
        let m1 = parts / 2;
        let target = (set.len() * m1 + parts / 2) / parts;
        for &v in &set {
            mask[v] = true;
        }
        let start = set[rng.gen_range(0..set.len())];
        let root = pseudo_peripheral(graph, &set, &mask, &mut dist, start);
        let first = grow(graph, &set, &mask, &mut dist, root, target);
        let mut in_first = vec![false; n];
        for &v in &first {
            in_first[v] = true;
        }
        let second: Vec<usize> = set.iter().copied().filter(|&v| !in_first[v]).collect();
        for &v in &set {
            mask[v] = false;
        }
        stack.push((second, parts - m1));
        stack.push((first, m1));
    }
    Ok(out)
}

fn bfs_within(graph: &DofGraph, set: &[usize], mask: &[bool], dist: &mut [usize], root: usize) -> Vec<usize> {
    for &v in set {
        dist[v] = usize::MAX;
    }
    let mut order = Vec::with_capacity(set.len());
    let mut queue = VecDeque::new();
    dist[root] = 0;
    queue.push_back(root);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &w in graph.neighbors(v) {
            if mask[w] && dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    order
}

fn pseudo_peripheral(graph: &DofGraph, set: &[usize], mask: &[bool], dist: &mut [usize], start: usize) -> usize {
    let mut root = start;
    let mut ecc = 0;
    for _ in 0..8 {
        let order = bfs_within(graph, set, mask, dist, root);
        let far = *order.last().unwrap();
        if dist[far] <= ecc {
            break;
        }
        ecc = dist[far];
        root = far;
    }
    root
}

/// BFS growth from `root` until `target` vertices are collected; disconnected
/// leftovers are appended in set order.
fn grow(graph: &DofGraph, set: &[usize], mask: &[bool], dist: &mut [usize], root: usize, target: usize) -> Vec<usize> {
    let mut order = bfs_within(graph, set, mask, dist, root);
    if order.len() < target {
        for &v in set {
            if dist[v] == usize::MAX {
                order.push(v);
            }
        }
    }
    order.truncate(target);
    order
}

/// Closure of a cell set under `k` layers of face adjacency, sorted.
pub fn extend_layers(core: &[usize], graph: &DofGraph, k: usize) -> Vec<usize> {
    let n = graph.num_vertices();
    let mut inside = vec![false; n];
    let mut frontier: Vec<usize> = Vec::with_capacity(core.len());
    for &c in core {
        if !inside[c] {
            inside[c] = true;
            frontier.push(c);
        }
    }
    let mut all = frontier.clone();
    for _ in 0..k {
        let mut next = Vec::new();
        for &v in &frontier {
            for &w in graph.neighbors(v) {
                if !inside[w] {
                    inside[w] = true;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        all.extend_from_slice(&next);
        frontier = next;
    }
    all.sort_unstable();
    all
}

/// Per-cell partition-of-unity weights for each overlap set, aligned with the
/// sorted cell lists.
pub fn build_pu(graph: &DofGraph, overlap: &[Vec<usize>], mode: PuMode, overlap_layers: usize) -> Result<Vec<Vec<f64>>> {
    let n = graph.num_vertices();
    let raw: Vec<Vec<f64>> = match mode {
        PuMode::Multiplicity => overlap.iter().map(|s| vec![1.0; s.len()]).collect(),
        PuMode::Ramp => {
            let cap = overlap_layers + 1;
            overlap.iter().map(|s| ramp_weights(graph, s, cap)).collect()
        }
    };
    let mut total = vec![0.0; n];
    for (set, w) in overlap.iter().zip(&raw) {
        for (&c, &x) in set.iter().zip(w) {
            total[c] += x;
        }
    }
    if let Some(c) = total.iter().position(|&t| t == 0.0) {
        return Err(Error::UncoveredDof(c));
    }
    Ok(overlap.iter().zip(raw).map(|(set, w)| set.iter().zip(w).map(|(&c, x)| x / total[c]).collect()).collect())
}

/// `min(d, cap)` with `d` the graph distance to the nearest cell outside the set.
fn ramp_weights(graph: &DofGraph, set: &[usize], cap: usize) -> Vec<f64> {
    let n = graph.num_vertices();
    let mut inside = vec![false; n];
    for &c in set {
        inside[c] = true;
    }
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for &c in set {
        if graph.neighbors(c).iter().any(|&w| !inside[w]) {
            dist[c] = 1;
            queue.push_back(c);
        }
    }
    while let Some(v) = queue.pop_front() {
        if dist[v] >= cap {
            continue;
        }
        for &w in graph.neighbors(v) {
            if inside[w] && dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    set.iter().map(|&c| dist[c].min(cap) as f64).collect()
}

/// Gathers `x[dofs]`.
pub fn restriction_apply<T: Scalar>(dofs: &[usize], x: &[T]) -> Result<Vec<T>> {
    dofs.iter()
        .map(|&d| x.get(d).copied().ok_or(Error::IndexOutOfRange { index: d, dim: x.len() }))
        .collect()
}

/// `y[dofs] += w .* xl`, with unit weights when `weights` is `None`.
pub fn prolong_add<T: Scalar>(dofs: &[usize], weights: Option<&[T]>, xl: &[T], y: &mut [T]) -> Result<()> {
    if xl.len() != dofs.len() {
        return Err(Error::DimensionMismatch { expected: dofs.len(), got: xl.len() });
    }
    if let Some(w) = weights {
        if w.len() != dofs.len() {
            return Err(Error::DimensionMismatch { expected: dofs.len(), got: w.len() });
        }
    }
    for (k, &d) in dofs.iter().enumerate() {
        if d >= y.len() {
            return Err(Error::IndexOutOfRange { index: d, dim: y.len() });
        }
        let v = match weights {
            Some(w) => w[k] * xl[k],
            None => xl[k],
        };
        y[d] += v;
    }
    Ok(())
}

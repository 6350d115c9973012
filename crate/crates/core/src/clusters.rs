//! Loop clusters: union-find over loops sharing a vertex, cluster spins,
//! crossing events and the normalizing constants `Z_r`, `Z_gamma`.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::graph::{GreenTable, LatticeDomain, Shape, EXIT};
use crate::loopsoup::{DiscreteLoop, LoopSoupSampler, ThickLoop, ThickLoopSampler};
use crate::mc::{binomial_summary, fit_log_frequencies, run_replicas, LineFit, RunSpec, Summary};

const NONE: u32 = u32::MAX;

/// Radius of the macroscopic target circle.
pub fn target_radius() -> f64 {
    (-1.0f64).exp()
}

impl AsRef<[u32]> for DiscreteLoop {
    fn as_ref(&self) -> &[u32] {
        &self.visits
    }
}

#[derive(Debug, Clone)]
struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a as usize] < self.size[b as usize] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b as usize] = a;
        self.size[a as usize] += self.size[b as usize];
    }
}

/// Partition of loops into clusters. Cluster ids follow the order in which
/// clusters first appear in the loop list.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPartition {
    pub loop_to_cluster: Vec<usize>,
    /// Sorted vertex set of each cluster.
    pub cluster_vertices: Vec<Vec<u32>>,
    pub spins: Vec<i8>,
    vertex_cluster: Vec<u32>,
}

/// Clusters of `loops` (vertex lists on a domain with `n_vertices`
/// vertices). All spins start at `+1`; see [`ClusterPartition::randomize_spins`].
pub fn build_clusters<L: AsRef<[u32]>>(loops: &[L], n_vertices: usize) -> Result<ClusterPartition> {
    let mut first_loop = vec![NONE; n_vertices];
    let mut uf = UnionFind::new(loops.len());
    for (li, l) in loops.iter().enumerate() {
        let l = l.as_ref();
        if l.is_empty() {
            return Err(invalid("loops", format!("loop {li} is empty")));
        }
        for &v in l {
            let slot = first_loop
                .get_mut(v as usize)
                .ok_or_else(|| invalid("loops", format!("vertex {v} outside the domain")))?;
            if *slot == NONE {
                *slot = li as u32;
            } else {
                uf.union(*slot, li as u32);
            }
        }
    }
    let mut root_id = vec![NONE; loops.len()];
    let mut loop_to_cluster = Vec::with_capacity(loops.len());
    let mut count = 0u32;
    for li in 0..loops.len() {
        let root = uf.find(li as u32) as usize;
        if root_id[root] == NONE {
            root_id[root] = count;
            count += 1;
        }
        loop_to_cluster.push(root_id[root] as usize);
    }
    let mut cluster_vertices = vec![Vec::new(); count as usize];
    let mut vertex_cluster = vec![NONE; n_vertices];
    for (v, &l) in first_loop.iter().enumerate() {
        if l != NONE {
            let c = loop_to_cluster[l as usize];
            cluster_vertices[c].push(v as u32);
            vertex_cluster[v] = c as u32;
        }
    }
    Ok(ClusterPartition {
        loop_to_cluster,
        cluster_vertices,
        spins: vec![1; count as usize],
        vertex_cluster,
    })
}

impl ClusterPartition {
    pub fn len(&self) -> usize {
        self.cluster_vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cluster_vertices.is_empty()
    }

    /// Cluster containing vertex `v`, if some loop visits it.
    pub fn cluster_of(&self, v: usize) -> Option<usize> {
        match self.vertex_cluster.get(v) {
            Some(&c) if c != NONE => Some(c as usize),
            _ => None,
        }
    }

    /// Independent fair signs, one per cluster.
    pub fn randomize_spins<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for s in &mut self.spins {
            *s = if rng.random::<bool>() { 1 } else { -1 };
        }
    }

    /// Flags of the clusters that visit some vertex of `set`.
    pub fn touching(&self, set: &[usize]) -> Vec<bool> {
        let mut hit = vec![false; self.len()];
        for &v in set {
            if let Some(c) = self.cluster_of(v) {
                hit[c] = true;
            }
        }
        hit
    }
}

/// Whether some cluster visits both `a` and `b`.
pub fn crossing_event(partition: &ClusterPartition, a: &[usize], b: &[usize]) -> bool {
    let from_a = partition.touching(a);
    b.iter().any(|&v| partition.cluster_of(v).is_some_and(|c| from_a[c]))
}

/// Per-vertex spins: a visited vertex carries its cluster's spin, an
/// unvisited one the spin of the nearest visited vertex in lattice
/// distance (ties to the lowest index) and is flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSpins {
    pub spin: Vec<i8>,
    pub flagged: Vec<bool>,
}

pub fn vertex_spins(domain: &LatticeDomain, partition: &ClusterPartition) -> VertexSpins {
    let n = domain.len();
    let mut spin = vec![0i8; n];
    let mut flagged = vec![true; n];
    let mut queue = VecDeque::new();
    for v in 0..n {
        if let Some(c) = partition.cluster_of(v) {
            spin[v] = partition.spins[c];
            flagged[v] = false;
            queue.push_back(v);
        }
    }
    if queue.is_empty() {
        // No loop at all: every vertex gets +1.
        spin.fill(1);
        return VertexSpins { spin, flagged };
    }
    let mut seen: Vec<bool> = flagged.iter().map(|f| !f).collect();
    while let Some(v) = queue.pop_front() {
        for &w in domain.neighbors(v) {
            if w != EXIT && !seen[w as usize] {
                seen[w as usize] = true;
                spin[w as usize] = spin[v];
                queue.push_back(w as usize);
            }
        }
    }
    VertexSpins { spin, flagged }
}

/// Vertices within `1/N` of the target circle.
pub fn target_shell(domain: &LatticeDomain) -> Vec<usize> {
    let h = 1.0 / domain.mesh() as f64;
    let r = target_radius();
    domain.vertices_in_annulus(r - h, r + h)
}

fn check_disc(domain: &LatticeDomain) -> Result<()> {
    if domain.shape() != Some(Shape::UnitDisc) {
        return Err(invalid("domain", "crossing estimators need the unit disc"));
    }
    Ok(())
}

fn check_radius(domain: &LatticeDomain, r: f64) -> Result<()> {
    if !(r > 0.0 && r <= target_radius()) {
        return Err(invalid("r", "radius must lie in (0, 1/e]"));
    }
    if r * (domain.mesh() as f64) < 1.0 {
        return Err(invalid("r", "radius below the mesh size"));
    }
    Ok(())
}

/// Smallest radius among vertices whose cluster reaches the target shell
/// (infinite when none does). The crossing event for the disc of radius `r`
/// is `min_radius <= r`.
fn min_radius_connected(domain: &LatticeDomain, partition: &ClusterPartition, shell: &[usize]) -> f64 {
    let reach = partition.touching(shell);
    partition
        .cluster_vertices
        .iter()
        .zip(&reach)
        .filter(|(_, &r)| r)
        .flat_map(|(vs, _)| vs.iter())
        .map(|&v| domain.radius(v as usize))
        .fold(f64::INFINITY, f64::min)
}

/// Crossing frequencies over a shared set of replicas.
#[derive(Debug, Clone)]
pub struct CrossingCurve {
    /// Parameter of each event (radius or gamma).
    pub levels: Vec<f64>,
    /// `hits[i][k]`: event `k` occurred in replica `i`.
    pub hits: Vec<Vec<bool>>,
}

impl CrossingCurve {
    pub fn summary(&self, k: usize) -> Summary {
        binomial_summary(self.hits.iter().map(|h| h[k]))
    }

    pub fn summaries(&self) -> Vec<Summary> {
        (0..self.levels.len()).map(|k| self.summary(k)).collect()
    }

    /// Frequency of "event `a` and not event `b`" with its binomial error;
    /// for nested events this is the paired difference of the two
    /// frequencies.
    pub fn difference(&self, a: usize, b: usize) -> Summary {
        binomial_summary(self.hits.iter().map(|h| h[a] && !h[b]))
    }

    /// Line through `(xs[k], ln frequency_k)` with a delta-method slope
    /// error in `slope_se_weights`.
    pub fn fit(&self, xs: &[f64]) -> Result<LineFit> {
        fit_log_frequencies(&self.hits, xs)
    }
}

/// `Z_r` for several radii, all evaluated on the same soups.
pub fn estimate_zr_curve(
    domain: &LatticeDomain,
    green: &GreenTable,
    theta: f64,
    radii: &[f64],
    spec: &RunSpec,
) -> Result<CrossingCurve> {
    check_disc(domain)?;
    for &r in radii {
        check_radius(domain, r)?;
    }
    let sampler = LoopSoupSampler::new(domain, green, theta)?;
    let shell = target_shell(domain);
    let n = domain.len();
    let hits = run_replicas(spec, |_, rng| {
        let loops = sampler.sample_loops(rng)?;
        let partition = build_clusters(&loops, n)?;
        let reach = min_radius_connected(domain, &partition, &shell);
        Ok(radii.iter().map(|&r| reach <= r).collect())
    })?;
    Ok(CrossingCurve {
        levels: radii.to_vec(),
        hits,
    })
}

/// Frequency of a loop cluster joining the disc of radius `r` to the
/// target circle.
pub fn estimate_zr(domain: &LatticeDomain, green: &GreenTable, theta: f64, r: f64, spec: &RunSpec) -> Result<Summary> {
    Ok(estimate_zr_curve(domain, green, theta, &[r], spec)?.summary(0))
}

/// Whether the thick loop, merged with the soup clusters, reaches the
/// target shell. `shell_mask` marks shell vertices and `reach` the clusters
/// touching the shell.
fn thick_loop_reaches(thick: &ThickLoop, partition: &ClusterPartition, shell_mask: &[bool], reach: &[bool]) -> bool {
    !thick.is_empty()
        && thick
            .vertices()
            .any(|v| shell_mask[v as usize] || partition.cluster_of(v as usize).is_some_and(|c| reach[c]))
}

/// `Z_gamma` records for several gammas on shared soups, with nested
/// thick loops at the origin.
#[derive(Debug, Clone)]
pub struct ThickCrossing {
    pub curve: CrossingCurve,
    /// `nonempty[i][k]`: the thick loop at level `k` of replica `i` has a
    /// bridge.
    pub nonempty: Vec<Vec<bool>>,
}

impl ThickCrossing {
    pub fn nonempty_summary(&self, k: usize) -> Summary {
        binomial_summary(self.nonempty.iter().map(|h| h[k]))
    }
}

pub fn estimate_zgamma_curve(
    domain: &LatticeDomain,
    green: &GreenTable,
    theta: f64,
    gammas: &[f64],
    spec: &RunSpec,
) -> Result<ThickCrossing> {
    check_disc(domain)?;
    if gammas.is_empty() {
        return Err(invalid("gamma", "need at least one value"));
    }
    let mut order: Vec<usize> = (0..gammas.len()).collect();
    order.sort_by(|&a, &b| gammas[a].total_cmp(&gammas[b]));
    let levels: Vec<f64> = order.iter().map(|&k| gammas[k] * gammas[k] / 2.0).collect();
    if levels.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(invalid("gamma", "must be positive"));
    }
    let sampler = LoopSoupSampler::new(domain, green, theta)?;
    let thick = ThickLoopSampler::new(domain, green, domain.origin())?;
    let shell = target_shell(domain);
    let mut shell_mask = vec![false; domain.len()];
    for &v in &shell {
        shell_mask[v] = true;
    }
    let n = domain.len();
    let records = run_replicas(spec, |_, rng| {
        let loops = sampler.sample_loops(rng)?;
        let partition = build_clusters(&loops, n)?;
        let reach = partition.touching(&shell);
        let nested = thick.sample_nested(&levels, rng)?;
        let mut hit = vec![false; gammas.len()];
        let mut nonempty = vec![false; gammas.len()];
        for (t, &k) in nested.iter().zip(&order) {
            hit[k] = thick_loop_reaches(t, &partition, &shell_mask, &reach);
            nonempty[k] = !t.is_empty();
        }
        Ok((hit, nonempty))
    })?;
    let (hits, nonempty) = records.into_iter().unzip();
    Ok(ThickCrossing {
        curve: CrossingCurve {
            levels: gammas.to_vec(),
            hits,
        },
        nonempty,
    })
}

/// Frequency of the thick loop at the origin (thickness `gamma^2/2`)
/// joining the target circle through the soup.
pub fn estimate_zgamma(
    domain: &LatticeDomain,
    green: &GreenTable,
    theta: f64,
    gamma: f64,
    spec: &RunSpec,
) -> Result<Summary> {
    Ok(estimate_zgamma_curve(domain, green, theta, &[gamma], spec)?
        .curve
        .summary(0))
}

/// Discrete Minkowski estimate `(1/Z_r)(1/N^2) #{x : dist(x, C) <= r}` for
/// cluster `cluster_id`, with Euclidean distance between lattice points.
pub fn minkowski_estimate(
    domain: &LatticeDomain,
    partition: &ClusterPartition,
    cluster_id: usize,
    r: f64,
    zr: f64,
) -> Result<f64> {
    if !(zr > 0.0 && zr.is_finite()) {
        return Err(invalid("Zr", "must be positive"));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(invalid("r", "must be nonnegative"));
    }
    let cluster = partition
        .cluster_vertices
        .get(cluster_id)
        .ok_or(Error::UnknownCluster(cluster_id))?;
    let n2 = (domain.mesh() * domain.mesh()) as f64;
    if r >= domain.diameter_bound() {
        return Ok(domain.len() as f64 / n2 / zr);
    }
    let reach = r * domain.mesh() as f64;
    let m = reach.floor() as i32;
    let r2 = reach * reach;
    let stencil: Vec<(i32, i32)> = (-m..=m)
        .flat_map(|i| (-m..=m).map(move |j| (i, j)))
        .filter(|&(i, j)| ((i * i + j * j) as f64) <= r2 + 1e-9)
        .collect();
    let mut marked = vec![false; domain.len()];
    let mut count = 0usize;
    for &v in cluster {
        let (a, b) = domain.coords(v as usize);
        for &(i, j) in &stencil {
            if let Some(w) = domain.index_of(a + i, b + j) {
                if !marked[w] {
                    marked[w] = true;
                    count += 1;
                }
            }
        }
    }
    Ok(count as f64 / n2 / zr)
}

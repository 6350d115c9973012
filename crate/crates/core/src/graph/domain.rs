use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Marker for a neighbor slot that leaves the domain (killing).
pub const EXIT: u32 = u32::MAX;

/// Unit steps in the order used by every neighbor table.
pub const STEPS: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Smallest mesh accepted by [`build_domain`].
pub const MIN_MESH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// Open unit disc centered at the origin.
    UnitDisc,
    /// Open square `(-1, 1)^2`.
    UnitSquare,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::UnitDisc => "disc",
            Shape::UnitSquare => "square",
        }
    }

    /// Whether lattice point `(i, j) / mesh` lies at distance at least
    /// `1 / mesh` from the boundary.
    fn admits(self, mesh: i64, i: i64, j: i64) -> bool {
        let m = mesh - 1;
        match self {
            Shape::UnitDisc => i * i + j * j <= m * m,
            Shape::UnitSquare => i.abs() <= m && j.abs() <= m,
        }
    }
}

impl std::str::FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "disc" => Ok(Shape::UnitDisc),
            "square" => Ok(Shape::UnitSquare),
            other => Err(format!("unknown domain `{other}` (expected disc or square)")),
        }
    }
}

/// Vertices of `(1/N) Z^2` inside a planar domain, in lexicographic order
/// of their integer coordinates, with killed simple random walk adjacency.
#[derive(Debug, Clone)]
pub struct LatticeDomain {
    mesh: usize,
    shape: Option<Shape>,
    coords: Vec<(i32, i32)>,
    neighbors: Vec<[u32; 4]>,
    exit_degree: Vec<u8>,
    origin: usize,
    lookup: Lookup,
}

#[derive(Debug, Clone)]
struct Lookup {
    min: (i32, i32),
    width: usize,
    height: usize,
    slots: Vec<u32>,
}

impl Lookup {
    fn new(coords: &[(i32, i32)]) -> Self {
        let min_i = coords.iter().map(|c| c.0).min().unwrap_or(0);
        let max_i = coords.iter().map(|c| c.0).max().unwrap_or(0);
        let min_j = coords.iter().map(|c| c.1).min().unwrap_or(0);
        let max_j = coords.iter().map(|c| c.1).max().unwrap_or(0);
        let width = (max_i - min_i + 1) as usize;
        let height = (max_j - min_j + 1) as usize;
        let mut slots = vec![EXIT; width * height];
        for (v, &(i, j)) in coords.iter().enumerate() {
            slots[(i - min_i) as usize * height + (j - min_j) as usize] = v as u32;
        }
        Self {
            min: (min_i, min_j),
            width,
            height,
            slots,
        }
    }

    fn get(&self, i: i32, j: i32) -> Option<usize> {
        let di = i - self.min.0;
        let dj = j - self.min.1;
        if di < 0 || dj < 0 || di as usize >= self.width || dj as usize >= self.height {
            return None;
        }
        match self.slots[di as usize * self.height + dj as usize] {
            EXIT => None,
            v => Some(v as usize),
        }
    }
}

/// Origin-connected lattice approximation of `shape` at mesh `1/mesh`.
pub fn build_domain(shape: Shape, mesh: usize) -> Result<LatticeDomain> {
    if mesh < MIN_MESH {
        return Err(Error::DegenerateDomain(format!(
            "mesh {mesh} is below the minimum {MIN_MESH}"
        )));
    }
    let m = mesh as i64;
    let side = 2 * mesh + 1;
    let idx = |i: i64, j: i64| (i + m) as usize * side + (j + m) as usize;
    let mut seen = vec![false; side * side];
    let mut queue = VecDeque::from([(0i64, 0i64)]);
    seen[idx(0, 0)] = true;
    let mut points = Vec::new();
    while let Some((i, j)) = queue.pop_front() {
        points.push((i as i32, j as i32));
        for (di, dj) in STEPS {
            let (a, b) = (i + di as i64, j + dj as i64);
            if a.abs() > m || b.abs() > m || seen[idx(a, b)] || !shape.admits(m, a, b) {
                continue;
            }
            seen[idx(a, b)] = true;
            queue.push_back((a, b));
        }
    }
    let mut domain = LatticeDomain::from_points(mesh, &points)?;
    domain.shape = Some(shape);
    Ok(domain)
}

impl LatticeDomain {
    /// Domain made of an explicit connected set of integer lattice points.
    pub fn from_points(mesh: usize, points: &[(i32, i32)]) -> Result<Self> {
        if mesh == 0 {
            return Err(Error::DegenerateDomain("mesh must be positive".into()));
        }
        if points.is_empty() {
            return Err(Error::DegenerateDomain("no vertices".into()));
        }
        let mut coords = points.to_vec();
        coords.sort_unstable();
        coords.dedup();
        let lookup = Lookup::new(&coords);
        let mut neighbors = Vec::with_capacity(coords.len());
        let mut exit_degree = Vec::with_capacity(coords.len());
        for &(i, j) in &coords {
            let mut nb = [EXIT; 4];
            for (slot, (di, dj)) in STEPS.iter().enumerate() {
                if let Some(w) = lookup.get(i + di, j + dj) {
                    nb[slot] = w as u32;
                }
            }
            exit_degree.push(nb.iter().filter(|&&w| w == EXIT).count() as u8);
            neighbors.push(nb);
        }
        let origin = lookup.get(0, 0).unwrap_or(0);
        let domain = Self {
            mesh,
            shape: None,
            coords,
            neighbors,
            exit_degree,
            origin,
            lookup,
        };
        if domain.component_size(origin) != domain.len() {
            return Err(Error::DegenerateDomain("vertex set is not connected".into()));
        }
        if domain.exit_degree.iter().all(|&d| d == 0) {
            return Err(Error::DegenerateDomain("no killing: walk is recurrent".into()));
        }
        Ok(domain)
    }

    fn component_size(&self, start: usize) -> usize {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 0;
        while let Some(v) = stack.pop() {
            count += 1;
            for &w in &self.neighbors[v] {
                if w != EXIT && !seen[w as usize] {
                    seen[w as usize] = true;
                    stack.push(w as usize);
                }
            }
        }
        count
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn mesh(&self) -> usize {
        self.mesh
    }

    pub fn shape(&self) -> Option<Shape> {
        self.shape
    }

    /// Index of the vertex at the origin (or of the first vertex when the
    /// origin is not part of a custom point set).
    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn coords(&self, v: usize) -> (i32, i32) {
        self.coords[v]
    }

    pub fn position(&self, v: usize) -> (f64, f64) {
        let (i, j) = self.coords[v];
        let n = self.mesh as f64;
        (i as f64 / n, j as f64 / n)
    }

    /// Euclidean norm of the vertex position.
    pub fn radius(&self, v: usize) -> f64 {
        let (x, y) = self.position(v);
        x.hypot(y)
    }

    pub fn neighbors(&self, v: usize) -> &[u32; 4] {
        &self.neighbors[v]
    }

    pub(crate) fn neighbor_table(&self) -> &[[u32; 4]] {
        &self.neighbors
    }

    pub fn exit_degree(&self, v: usize) -> usize {
        self.exit_degree[v] as usize
    }

    pub fn index_of(&self, i: i32, j: i32) -> Option<usize> {
        self.lookup.get(i, j)
    }

    /// Vertex closest to the point `(x, y)` in domain units.
    pub fn nearest_vertex(&self, x: f64, y: f64) -> Option<usize> {
        let n = self.mesh as f64;
        self.index_of((x * n).round() as i32, (y * n).round() as i32)
    }

    /// Lebesgue measure represented by the vertex set, `|D_N| / N^2`.
    pub fn area(&self) -> f64 {
        self.len() as f64 / (self.mesh * self.mesh) as f64
    }

    /// Vertices whose distance to the origin lies in `[lo, hi]`.
    pub fn vertices_in_annulus(&self, lo: f64, hi: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&v| {
                let r = self.radius(v);
                r >= lo && r <= hi
            })
            .collect()
    }

    /// Largest distance between two vertices, bounded by twice the largest
    /// vertex radius.
    pub fn diameter_bound(&self) -> f64 {
        2.0 * (0..self.len()).map(|v| self.radius(v)).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_vertex_count_matches_enumeration() {
        // Brute force: points of (1/8)Z^2 in the open square (-1,1)^2 at
        // distance >= 1/8 from its boundary.
        let n = 8i32;
        let mut count = 0;
        for i in -n..=n {
            for j in -n..=n {
                let (x, y) = (i as f64 / n as f64, j as f64 / n as f64);
                let dist = 1.0 - x.abs().max(y.abs());
                if x.abs() < 1.0 && y.abs() < 1.0 && dist >= 1.0 / n as f64 - 1e-12 {
                    count += 1;
                }
            }
        }
        let d = build_domain(Shape::UnitSquare, 8).unwrap();
        assert_eq!(d.len(), count);
        assert_eq!(count, 15 * 15);
    }

    #[test]
    fn disc_vertices_keep_distance_from_boundary() {
        let d = build_domain(Shape::UnitDisc, 8).unwrap();
        for v in 0..d.len() {
            assert!(d.radius(v) <= 1.0 - 1.0 / 8.0 + 1e-12);
        }
        assert_eq!(d.coords(d.origin()), (0, 0));
    }

    #[test]
    fn small_mesh_is_rejected() {
        assert!(matches!(
            build_domain(Shape::UnitDisc, 4),
            Err(Error::DegenerateDomain(_))
        ));
    }

    #[test]
    fn adjacency_is_symmetric_and_degrees_add_up() {
        for shape in [Shape::UnitDisc, Shape::UnitSquare] {
            let d = build_domain(shape, 16).unwrap();
            for v in 0..d.len() {
                let interior = d.neighbors(v).iter().filter(|&&w| w != EXIT).count();
                assert_eq!(interior + d.exit_degree(v), 4);
                for &w in d.neighbors(v) {
                    if w != EXIT {
                        assert!(d.neighbors(w as usize).contains(&(v as u32)));
                    }
                }
            }
        }
    }

    #[test]
    fn vertices_are_lexicographically_ordered() {
        let d = build_domain(Shape::UnitDisc, 12).unwrap();
        for v in 1..d.len() {
            assert!(d.coords(v - 1) < d.coords(v));
        }
        for v in 0..d.len() {
            let (i, j) = d.coords(v);
            assert_eq!(d.index_of(i, j), Some(v));
        }
    }

    #[test]
    fn disconnected_points_are_rejected() {
        assert!(LatticeDomain::from_points(4, &[(0, 0), (2, 0)]).is_err());
    }
}

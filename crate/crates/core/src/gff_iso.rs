//! Statistical checks of the isomorphism theorems: Le Jan's identity on
//! lattice domains and the BFS–Dynkin identity on tiny weighted graphs.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::graph::{GreenTable, LatticeDomain};
use crate::loopsoup::LoopSoupSampler;
use crate::mc::{gamma_cdf, ks_statistic, ks_two_sample, run_replicas, summarize, RunSpec, Summary};
use crate::special::{wick_gff, wick_local};

/// Largest fixture size.
pub const MAX_TINY_VERTICES: usize = 6;

/// Attempts allowed when conditioning a walk to hit its target.
const HIT_CAP: u64 = 10_000_000;

/// Continuous-time chain on at most six vertices: jump rate `W[u][v]`
/// between neighbors and killing rate `kappa[u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyGraph {
    weights: DMatrix<f64>,
    killing: Vec<f64>,
    rates: Vec<f64>,
    green: DMatrix<f64>,
}

impl TinyGraph {
    pub fn new(weights: Vec<Vec<f64>>, killing: Vec<f64>) -> Result<Self> {
        let n = killing.len();
        if n == 0 || n > MAX_TINY_VERTICES {
            return Err(invalid("graph", format!("need 1..={MAX_TINY_VERTICES} vertices")));
        }
        if weights.len() != n || weights.iter().any(|r| r.len() != n) {
            return Err(invalid("graph", "weight matrix shape differs from the killing vector"));
        }
        let w = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { weights[i][j] });
        if (0..n).any(|i| (0..n).any(|j| w[(i, j)] < 0.0 || w[(i, j)] != w[(j, i)])) {
            return Err(invalid("graph", "weights must be symmetric and nonnegative"));
        }
        if killing.iter().any(|&k| !(k >= 0.0)) || killing.iter().all(|&k| k == 0.0) {
            return Err(invalid("graph", "killing must be nonnegative and positive somewhere"));
        }
        let rates: Vec<f64> = (0..n).map(|i| w.row(i).sum() + killing[i]).collect();
        let generator = DMatrix::from_diagonal(&DVector::from_vec(rates.clone())) - &w;
        // Positive definiteness of the generator is transience.
        let chol = generator
            .clone()
            .cholesky()
            .ok_or_else(|| invalid("graph", "chain is not transient"))?;
        let green = chol.inverse();
        Ok(Self {
            weights: w,
            killing,
            rates,
            green,
        })
    }

    /// Two vertices joined by a unit edge, each killed at rate 2.
    pub fn k2() -> Self {
        Self::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![2.0, 2.0]).expect("valid fixture")
    }

    /// Path 0 - 1 - 2 with unit edges and strong killing at the ends.
    pub fn path3() -> Self {
        Self::new(
            vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]],
            vec![1.5, 1.0, 1.5],
        )
        .expect("valid fixture")
    }

    /// Fixture by name: `k2` or `path3`, optionally prefixed by `builtin:`.
    pub fn builtin(name: &str) -> Result<Self> {
        match name.strip_prefix("builtin:").unwrap_or(name) {
            "k2" => Ok(Self::k2()),
            "path3" => Ok(Self::path3()),
            other => Err(invalid("graph", format!("unknown fixture `{other}`"))),
        }
    }

    pub fn len(&self) -> usize {
        self.killing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.killing.is_empty()
    }

    /// `G = (diag(lambda) - W)^{-1}`, the expected time spent at `y` from `x`.
    pub fn green(&self) -> &DMatrix<f64> {
        &self.green
    }

    /// Probability of returning to `y` after leaving it, before killing.
    pub fn return_probability(&self, y: usize) -> f64 {
        1.0 - 1.0 / (self.rates[y] * self.green[(y, y)])
    }

    /// One jump of the skeleton chain; `None` is killing.
    fn jump<R: Rng + ?Sized>(&self, u: usize, rng: &mut R) -> Option<usize> {
        let mut t = rng.random::<f64>() * self.rates[u];
        for v in 0..self.len() {
            t -= self.weights[(u, v)];
            if t < 0.0 {
                return Some(v);
            }
        }
        None
    }

    /// Walk from `from` until it hits `to` (returning the visited vertices
    /// before `to`), or `None` if killed first. With `from == to` the walk
    /// must leave first.
    fn walk_until<R: Rng + ?Sized>(&self, from: usize, to: usize, rng: &mut R) -> Option<Vec<usize>> {
        let mut path = Vec::new();
        let mut cur = from;
        loop {
            if cur != to || (path.is_empty() && from == to) {
                path.push(cur);
            }
            cur = self.jump(cur, rng)?;
            if cur == to {
                return Some(path);
            }
        }
    }

    /// Path from `x` to `y` under the normalized path measure: the walk
    /// conditioned to hit `y` before dying, stopped at `y`, followed by a
    /// geometric number of excursions from `y`. Returns the local times and
    /// the number of returns to `y`.
    pub fn sample_path_measure<R: Rng + ?Sized>(&self, x: usize, y: usize, rng: &mut R) -> Result<(Vec<f64>, u64)> {
        let n = self.len();
        if x >= n || y >= n {
            return Err(invalid("x", "vertex outside the graph"));
        }
        if !(self.green[(x, y)] > 0.0) {
            return Err(invalid("y", "vertices are not connected"));
        }
        let mut visits = Vec::new();
        let mut tries = 0u64;
        let head = loop {
            tries += 1;
            if tries > HIT_CAP {
                return Err(Error::Starvation {
                    vertex: x,
                    steps: tries,
                });
            }
            if x == y {
                break Vec::new();
            }
            if let Some(p) = self.walk_until(x, y, rng) {
                break p;
            }
        };
        visits.extend(head);
        visits.push(y);
        let r = self.return_probability(y);
        let u: f64 = 1.0 - rng.random::<f64>();
        let k = if r > 0.0 { (u.ln() / r.ln()).floor() as u64 } else { 0 };
        for _ in 0..k {
            let mut tries = 0u64;
            let exc = loop {
                tries += 1;
                if tries > HIT_CAP {
                    return Err(Error::Starvation {
                        vertex: y,
                        steps: tries,
                    });
                }
                if let Some(p) = self.walk_until(y, y, rng) {
                    break p;
                }
            };
            visits.extend(&exc[1..]);
            visits.push(y);
        }
        let mut local = vec![0.0; n];
        for v in visits {
            let hold = Exp::new(self.rates[v]).map_err(|e| Error::Numerical(e.to_string()))?;
            local[v] += hold.sample(rng);
        }
        Ok((local, k))
    }

    /// Centered Gaussian vector with covariance `G`.
    pub fn sample_gff<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let l = self
            .green
            .clone()
            .cholesky()
            .expect("Green matrix of a transient chain is positive definite")
            .l();
        let xi = DVector::from_fn(self.len(), |_, _| rng.sample(StandardNormal));
        l * xi
    }
}

/// Test functional of the occupation field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    /// `F(l) = exp(-sum_v l_v)`.
    ExpTotal,
    /// `F = 1`.
    One,
}

impl Functional {
    fn eval(self, occupation: impl Iterator<Item = f64>) -> f64 {
        match self {
            Functional::ExpTotal => (-occupation.sum::<f64>()).exp(),
            Functional::One => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfsDynkinReport {
    /// `E[phi_x phi_y F(phi^2/2)]`.
    pub lhs: Summary,
    /// `G(x,y) E[F(phi^2/2 + l_path)]`.
    pub rhs: Summary,
    /// Closed-form value of both sides.
    pub exact: f64,
}

/// Closed form of `E[phi_x phi_y F(phi^2/2)]` for `F = exp(-sum)`:
/// `det(I + G)^{-1/2} [(G^{-1} + I)^{-1}]_{xy}`.
pub fn bfs_dynkin_exact(graph: &TinyGraph, x: usize, y: usize, functional: Functional) -> f64 {
    let g = graph.green();
    match functional {
        Functional::One => g[(x, y)],
        Functional::ExpTotal => {
            let n = graph.len();
            let id = DMatrix::<f64>::identity(n, n);
            let tilted = (g.clone().try_inverse().expect("invertible") + &id)
                .try_inverse()
                .expect("invertible");
            (&id + g).determinant().powf(-0.5) * tilted[(x, y)]
        }
    }
}

pub fn bfs_dynkin_check(
    graph: &TinyGraph,
    x: usize,
    y: usize,
    functional: Functional,
    spec: &RunSpec,
) -> Result<BfsDynkinReport> {
    if x == y {
        return Err(invalid("y", "need two distinct vertices"));
    }
    if x >= graph.len() || y >= graph.len() {
        return Err(invalid("x", "vertex outside the graph"));
    }
    if !(graph.green()[(x, y)] > 0.0) {
        return Err(invalid("y", "vertices are not connected"));
    }
    let gxy = graph.green()[(x, y)];
    let rows = run_replicas(spec, |_, rng| {
        let phi = graph.sample_gff(rng);
        let lhs = phi[x] * phi[y] * functional.eval(phi.iter().map(|p| p * p / 2.0));
        let rhs = match functional {
            Functional::One => gxy,
            Functional::ExpTotal => {
                let psi = graph.sample_gff(rng);
                let (local, _) = graph.sample_path_measure(x, y, rng)?;
                gxy * functional.eval(psi.iter().zip(&local).map(|(p, l)| p * p / 2.0 + l))
            }
        };
        Ok((lhs, rhs))
    })?;
    let (l, r): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let rhs = match functional {
        // Zero variance: report the identity exactly.
        Functional::One => Summary {
            mean: gxy,
            se: 0.0,
            n: r.len(),
        },
        Functional::ExpTotal => summarize(&r),
    };
    Ok(BfsDynkinReport {
        lhs: summarize(&l),
        rhs,
        exact: bfs_dynkin_exact(graph, x, y, functional),
    })
}

/// Le Jan's identity at intensity 1/2: the occupation field of the soup
/// against half the square of the free field.
#[derive(Debug, Clone, PartialEq)]
pub struct LeJanReport {
    /// Two-sample KS distance between `l_x` and `phi_x^2/2`.
    pub ks_two_sample: f64,
    /// KS distances of `l_x / G(x,x)` and `phi_x^2 / (2 G(x,x))` to Gamma(1/2, 1).
    pub ks_occupation_gamma: f64,
    pub ks_gff_gamma: f64,
    /// `E[:l_x: :l_y:]`.
    pub cov_occupation: Summary,
    /// `E[(1/2):phi_x^2: (1/2):phi_y^2:]`.
    pub cov_gff: Summary,
    /// `G(x,y)^2 / 2`.
    pub predicted: f64,
    pub g_xx: f64,
    pub g_xy: f64,
}

pub fn lejan_check(
    domain: &LatticeDomain,
    green: &GreenTable,
    x: usize,
    y: usize,
    spec: &RunSpec,
) -> Result<LeJanReport> {
    let theta = 0.5;
    if x >= domain.len() || y >= domain.len() {
        return Err(invalid("probe", "vertex outside the domain"));
    }
    let sampler = LoopSoupSampler::new(domain, green, theta)?;
    let (gx, gy) = (green.column(x), green.column(y));
    let (g_xx, g_yy, g_xy) = (gx[x], gy[y], gx[y]);
    let soup = run_replicas(spec, |_, rng| {
        let s = sampler.sample(rng)?;
        Ok((s.occupation[x], s.occupation[y]))
    })?;
    let gff = run_replicas(&spec.stream(1), |_, rng| {
        let phi = green.sample_gff(rng);
        Ok((phi[x], phi[y]))
    })?;
    let lx: Vec<f64> = soup.iter().map(|p| p.0).collect();
    let half_sq: Vec<f64> = gff.iter().map(|p| p.0 * p.0 / 2.0).collect();
    let cov_occ = soup
        .iter()
        .map(|&(a, b)| Ok(wick_local(a, g_xx, 1, theta)? * wick_local(b, g_yy, 1, theta)?))
        .collect::<Result<Vec<f64>>>()?;
    let cov_gff = gff
        .iter()
        .map(|&(a, b)| Ok(0.25 * wick_gff(a, g_xx, 2)? * wick_gff(b, g_yy, 2)?))
        .collect::<Result<Vec<f64>>>()?;
    let gamma_half = |t: f64| gamma_cdf(theta, t);
    Ok(LeJanReport {
        ks_two_sample: ks_two_sample(&lx, &half_sq)?,
        ks_occupation_gamma: ks_statistic(&lx.iter().map(|v| v / g_xx).collect::<Vec<_>>(), gamma_half)?,
        ks_gff_gamma: ks_statistic(&half_sq.iter().map(|v| v / g_xx).collect::<Vec<_>>(), gamma_half)?,
        cov_occupation: summarize(&cov_occ),
        cov_gff: summarize(&cov_gff),
        predicted: 0.5 * g_xy * g_xy,
        g_xx,
        g_xy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_domain, Shape};
    use crate::mc::McRng;
    use rand::SeedableRng;

    #[test]
    fn fixtures_and_validation() {
        let k2 = TinyGraph::k2();
        // diag(3,3) - [[0,1],[1,0]] inverted.
        assert!((k2.green()[(0, 0)] - 3.0 / 8.0).abs() < 1e-15);
        assert!((k2.green()[(0, 1)] - 1.0 / 8.0).abs() < 1e-15);
        assert!(TinyGraph::builtin("builtin:path3").is_ok());
        assert!(TinyGraph::builtin("k7").is_err());
        assert!(TinyGraph::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0, 0.0]).is_err());
        assert!(TinyGraph::new(vec![vec![0.0, 1.0], vec![2.0, 0.0]], vec![1.0, 1.0]).is_err());
        assert!(TinyGraph::new(vec![vec![0.0; 7]; 7], vec![1.0; 7]).is_err());
    }

    #[test]
    fn disconnected_pair_is_rejected() {
        let g = TinyGraph::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]], vec![1.0, 1.0]).unwrap();
        assert!(bfs_dynkin_check(&g, 0, 1, Functional::One, &RunSpec::new(1, 10)).is_err());
    }

    #[test]
    fn constant_functional_is_the_green_identity() {
        for g in [TinyGraph::k2(), TinyGraph::path3()] {
            let r = bfs_dynkin_check(&g, 0, 1, Functional::One, &RunSpec::new(2, 20_000)).unwrap();
            assert_eq!(r.rhs.mean, g.green()[(0, 1)]);
            assert_eq!(r.rhs.se, 0.0);
            assert!(r.lhs.within(r.exact, 3.0));
        }
    }

    #[test]
    fn closed_form_matches_quadrature_on_k2() {
        // Direct 2D integral of phi_0 phi_1 e^{-|phi|^2/2} against N(0, G).
        let g = TinyGraph::k2();
        let cov = g.green();
        let inv = cov.clone().try_inverse().unwrap();
        let det = cov.determinant();
        let (h, m) = (0.02, 200);
        let mut acc = 0.0;
        for i in -m..=m {
            for j in -m..=m {
                let (a, b) = (i as f64 * h, j as f64 * h);
                let q = inv[(0, 0)] * a * a + 2.0 * inv[(0, 1)] * a * b + inv[(1, 1)] * b * b;
                acc += a * b * (-(q + a * a + b * b) / 2.0).exp();
            }
        }
        acc *= h * h / (2.0 * std::f64::consts::PI * det.sqrt());
        let exact = bfs_dynkin_exact(&g, 0, 1, Functional::ExpTotal);
        assert!((acc - exact).abs() < 1e-10, "{acc} vs {exact}");
    }

    #[test]
    fn returns_at_target_are_geometric() {
        let g = TinyGraph::path3();
        let r = g.return_probability(2);
        let mut rng = McRng::seed_from_u64(3);
        let m = 40_000;
        let mut counts = [0usize; 5];
        for _ in 0..m {
            let (_, k) = g.sample_path_measure(0, 2, &mut rng).unwrap();
            counts[(k as usize).min(4)] += 1;
        }
        let mut chi2 = 0.0;
        for (k, &c) in counts.iter().enumerate() {
            let p = if k < 4 { (1.0 - r) * r.powi(k as i32) } else { r.powi(4) };
            let e = p * m as f64;
            chi2 += (c as f64 - e).powi(2) / e;
        }
        // 4 degrees of freedom, 0.1% quantile.
        assert!(chi2 < 18.47, "chi2 = {chi2}");
    }

    #[test]
    fn path_local_time_has_green_mean() {
        // The path measure has total mass G(x,y) and E_path[l_v] G(x,y)
        // equals G(x,v) G(v,y).
        let g = TinyGraph::path3();
        let mut rng = McRng::seed_from_u64(4);
        let m = 40_000;
        let mut acc: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(m)).collect();
        for _ in 0..m {
            let (l, _) = g.sample_path_measure(0, 2, &mut rng).unwrap();
            for v in 0..3 {
                acc[v].push(l[v]);
            }
        }
        let gm = g.green();
        for v in 0..3 {
            let target = gm[(0, v)] * gm[(v, 2)] / gm[(0, 2)];
            assert!(summarize(&acc[v]).within(target, 3.0), "v={v}");
        }
    }

    #[test]
    fn lejan_on_small_disc() {
        let d = build_domain(Shape::UnitDisc, 8).unwrap();
        let g = GreenTable::new(&d).unwrap();
        let x = d.origin();
        let y = d.index_of(1, 0).unwrap();
        let r = lejan_check(&d, &g, x, y, &RunSpec::new(5, 4000)).unwrap();
        assert!(r.ks_two_sample < 1.73 * (2.0f64 / 4000.0).sqrt());
        assert!(r.cov_occupation.within(r.predicted, 3.0));
        assert!(r.cov_gff.within(r.predicted, 3.0));
    }
}

//! Random walk loop soup on a lattice domain, its continuous-time
//! occupation field and the thick loop at a point.
//!
//! Loops are sampled root by root: vertex `x_i` roots the loops whose
//! minimal vertex (in index order) is `x_i`. With `r_i` the probability of
//! returning to `x_i` before leaving the domain or visiting a vertex of
//! smaller index, loops rooted at `x_i` with `k` returns form a Poisson
//! family of intensity `theta r_i^k / k`. Summing over `k` gives a
//! Poisson(`-theta ln(1 - r_i)`) loop count with i.i.d. logarithmic return
//! counts.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, Gamma, Poisson};

use crate::error::{invalid, Error, Result};
use crate::graph::{GreenTable, LatticeDomain, EXIT};

/// Steps allowed while sampling one excursion (all rejected attempts
/// included) before the root is declared starved.
pub const STARVATION_CAP: u64 = 10_000_000;

/// Return probabilities below this are treated as zero.
const MIN_RETURN: f64 = 1e-12;

/// Mean holding time at each visit.
pub const HOLDING_MEAN: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLoop {
    pub root: u32,
    /// Number of returns to the root, `k >= 1`.
    pub returns: u32,
    /// Closed walk; starts and ends at `root`.
    pub visits: Vec<u32>,
    /// Holding time of every visit but the closing one; empty when the
    /// soup was sampled without times.
    pub holding: Vec<f64>,
}

impl DiscreteLoop {
    /// Visited vertices, the closing return excluded.
    pub fn vertices(&self) -> &[u32] {
        &self.visits[..self.visits.len() - 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopSoupSample {
    pub theta: f64,
    pub loops: Vec<DiscreteLoop>,
    pub trivial_field: Vec<f64>,
    pub occupation: Vec<f64>,
}

/// Occupation recomputed from holding times and the trivial field.
pub fn recompute_occupation(loops: &[DiscreteLoop], trivial_field: &[f64]) -> Vec<f64> {
    let mut occ = vec![0.0; trivial_field.len()];
    for l in loops {
        for (&v, &h) in l.visits.iter().zip(&l.holding) {
            occ[v as usize] += h;
        }
    }
    for (o, t) in occ.iter_mut().zip(trivial_field) {
        *o += t;
    }
    occ
}

/// Occupation field of a sample; checks it against a recomputation in
/// debug builds.
pub fn occupation_field(sample: &LoopSoupSample) -> Vec<f64> {
    let occ = recompute_occupation(&sample.loops, &sample.trivial_field);
    debug_assert!(occ
        .iter()
        .zip(&sample.occupation)
        .all(|(a, b)| a.to_bits() == b.to_bits()));
    occ
}

/// Union of two independent soups: a soup at intensity `theta_a + theta_b`.
pub fn superpose(a: &LoopSoupSample, b: &LoopSoupSample) -> Result<LoopSoupSample> {
    if a.trivial_field.len() != b.trivial_field.len() {
        return Err(invalid("sample", "soups live on different domains"));
    }
    let loops: Vec<_> = a.loops.iter().chain(&b.loops).cloned().collect();
    let trivial_field: Vec<f64> = a
        .trivial_field
        .iter()
        .zip(&b.trivial_field)
        .map(|(x, y)| x + y)
        .collect();
    let occupation = recompute_occupation(&loops, &trivial_field);
    Ok(LoopSoupSample {
        theta: a.theta + b.theta,
        loops,
        trivial_field,
        occupation,
    })
}

/// Simple random walk driven by two random bits per step.
struct Walker<'a> {
    nb: &'a [[u32; 4]],
    bits: u64,
    left: u32,
}

impl<'a> Walker<'a> {
    fn new(nb: &'a [[u32; 4]]) -> Self {
        Self { nb, bits: 0, left: 0 }
    }

    #[inline]
    fn direction<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> usize {
        if self.left == 0 {
            self.bits = rng.next_u64();
            self.left = 32;
        }
        let d = (self.bits & 3) as usize;
        self.bits >>= 2;
        self.left -= 1;
        d
    }

    /// Appends to `out` the interior of one first-return excursion from
    /// `root` that avoids vertices below `min`.
    fn excursion<R: RngCore + ?Sized>(&mut self, root: u32, min: u32, rng: &mut R, out: &mut Vec<u32>) -> Result<()> {
        let start = out.len();
        let mut steps = 0u64;
        loop {
            out.truncate(start);
            let mut cur = root;
            loop {
                steps += 1;
                if steps > STARVATION_CAP {
                    out.truncate(start);
                    return Err(Error::Starvation {
                        vertex: root as usize,
                        steps,
                    });
                }
                let dir = self.direction(rng);
                let next = self.nb[cur as usize][dir];
                if next == EXIT || next < min {
                    break;
                }
                if next == root {
                    return Ok(());
                }
                out.push(next);
                cur = next;
            }
        }
    }

    /// Closed walk at `root` made of `k` excursions.
    fn closed_walk<R: RngCore + ?Sized>(&mut self, root: u32, min: u32, k: u64, rng: &mut R) -> Result<Vec<u32>> {
        let mut visits = vec![root];
        for _ in 0..k {
            self.excursion(root, min, rng, &mut visits)?;
            visits.push(root);
        }
        Ok(visits)
    }
}

/// Draws `k >= 1` with `P(k) = r^k / (k (-ln(1 - r)))` by inversion.
pub(crate) fn sample_logarithmic<R: Rng + ?Sized>(r: f64, rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    let norm = -(-r).ln_1p();
    let mut p = r / norm;
    let mut cdf = p;
    let mut k = 1u64;
    while u > cdf && p > 0.0 {
        k += 1;
        p *= r * (k - 1) as f64 / k as f64;
        cdf += p;
    }
    k
}

/// Draws `k >= 1` with `P(k) = (1 - r) r^{k-1}`.
pub(crate) fn sample_geometric<R: Rng + ?Sized>(r: f64, rng: &mut R) -> u64 {
    if r <= 0.0 {
        return 1;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    1 + (u.ln() / r.ln()).floor() as u64
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid("theta", "intensity must be positive"));
    }
    Ok(())
}

/// Loop soup sampler at a fixed intensity on a fixed domain. Shareable
/// across replica threads.
#[derive(Debug, Clone)]
pub struct LoopSoupSampler<'a> {
    domain: &'a LatticeDomain,
    theta: f64,
    rooted: Vec<f64>,
    counts: Vec<Option<Poisson<f64>>>,
    trivial: Gamma<f64>,
}

impl<'a> LoopSoupSampler<'a> {
    pub fn new(domain: &'a LatticeDomain, green: &GreenTable, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        if green.len() != domain.len() {
            return Err(invalid("green", "Green table was built for another domain"));
        }
        let rooted: Vec<f64> = green
            .rooted_return_probabilities()
            .into_iter()
            .map(|r| if r < MIN_RETURN { 0.0 } else { r })
            .collect();
        let counts = rooted
            .iter()
            .map(|&r| {
                if r == 0.0 {
                    return Ok(None);
                }
                let mean = -theta * (-r).ln_1p();
                Poisson::new(mean)
                    .map(Some)
                    .map_err(|e| Error::Numerical(format!("loop count law: {e}")))
            })
            .collect::<Result<_>>()?;
        let trivial =
            Gamma::new(theta, HOLDING_MEAN).map_err(|e| Error::Numerical(format!("trivial field law: {e}")))?;
        Ok(Self {
            domain,
            theta,
            rooted,
            counts,
            trivial,
        })
    }

    pub fn domain(&self) -> &'a LatticeDomain {
        self.domain
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Return probability of vertex `i` restricted to vertices `>= i`.
    pub fn rooted_return_probability(&self, i: usize) -> f64 {
        self.rooted[i]
    }

    /// Loop skeletons only (no holding times, no trivial field); enough for
    /// cluster statistics.
    pub fn sample_loops<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<DiscreteLoop>> {
        let mut walker = Walker::new(self.domain.neighbor_table());
        let mut loops = Vec::new();
        for (i, law) in self.counts.iter().enumerate() {
            let Some(law) = law else { continue };
            let m = law.sample(rng) as u64;
            for _ in 0..m {
                let k = sample_logarithmic(self.rooted[i], rng);
                let visits = walker.closed_walk(i as u32, i as u32, k, rng)?;
                loops.push(DiscreteLoop {
                    root: i as u32,
                    returns: k as u32,
                    visits,
                    holding: Vec::new(),
                });
            }
        }
        Ok(loops)
    }

    /// Full sample with continuous-time occupation field.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LoopSoupSample> {
        let mut loops = self.sample_loops(rng)?;
        for l in &mut loops {
            l.holding = (0..l.visits.len() - 1)
                .map(|_| HOLDING_MEAN * rng.sample::<f64, _>(Exp1))
                .collect();
        }
        let trivial_field: Vec<f64> = (0..self.domain.len()).map(|_| self.trivial.sample(rng)).collect();
        let occupation = recompute_occupation(&loops, &trivial_field);
        Ok(LoopSoupSample {
            theta: self.theta,
            loops,
            trivial_field,
            occupation,
        })
    }
}

/// One soup at intensity `theta` on `domain`.
pub fn sample_loop_soup<R: Rng + ?Sized>(
    domain: &LatticeDomain,
    green: &GreenTable,
    theta: f64,
    rng: &mut R,
) -> Result<LoopSoupSample> {
    LoopSoupSampler::new(domain, green, theta)?.sample(rng)
}

/// Concatenation at `base` of the excursions of a Poisson process of
/// intensity `a` times the excursion measure at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThickLoop {
    pub base: u32,
    pub a: f64,
    /// Closed walks from `base` to `base`.
    pub bridges: Vec<Vec<u32>>,
}

impl ThickLoop {
    pub fn is_empty(&self) -> bool {
        self.bridges.is_empty()
    }

    /// All visited vertices (with repetitions).
    pub fn vertices(&self) -> impl Iterator<Item = u32> + '_ {
        self.bridges.iter().flatten().copied()
    }

    /// Largest sup-norm distance (in domain units) from the base.
    pub fn radius(&self, domain: &LatticeDomain) -> f64 {
        let (bx, by) = domain.coords(self.base as usize);
        let far = self
            .vertices()
            .map(|v| {
                let (i, j) = domain.coords(v as usize);
                (i - bx).abs().max((j - by).abs())
            })
            .max()
            .unwrap_or(0);
        far as f64 / domain.mesh() as f64
    }
}

/// Thick loops at a fixed vertex. Keeps the full-domain return probability.
#[derive(Debug, Clone)]
pub struct ThickLoopSampler<'a> {
    domain: &'a LatticeDomain,
    base: usize,
    r: f64,
}

impl<'a> ThickLoopSampler<'a> {
    pub fn new(domain: &'a LatticeDomain, green: &GreenTable, base: usize) -> Result<Self> {
        if base >= domain.len() {
            return Err(invalid("x", "vertex outside the domain"));
        }
        if green.len() != domain.len() {
            return Err(invalid("green", "Green table was built for another domain"));
        }
        let r = green.return_probability(base);
        Ok(Self {
            domain,
            base,
            r: if r < MIN_RETURN { 0.0 } else { r },
        })
    }

    pub fn return_probability(&self) -> f64 {
        self.r
    }

    /// Mean number of bridges at thickness `a`.
    pub fn bridge_rate(&self, a: f64) -> f64 {
        a * self.r / (1.0 - self.r)
    }

    pub fn sample<R: Rng + ?Sized>(&self, a: f64, rng: &mut R) -> Result<ThickLoop> {
        Ok(self.sample_nested(&[a], rng)?.pop().expect("one level"))
    }

    /// Coupled thick loops for increasing thicknesses: each loop contains
    /// the bridges of the previous one plus an independent Poisson batch of
    /// intensity `a_k - a_{k-1}`.
    pub fn sample_nested<R: Rng + ?Sized>(&self, levels: &[f64], rng: &mut R) -> Result<Vec<ThickLoop>> {
        let mut prev = 0.0;
        for &a in levels {
            if !(a > 0.0 && a.is_finite()) {
                return Err(invalid("a", "thickness must be positive"));
            }
            if a < prev {
                return Err(invalid("a", "levels must be nondecreasing"));
            }
            prev = a;
        }
        let mut walker = Walker::new(self.domain.neighbor_table());
        let mut bridges: Vec<Vec<u32>> = Vec::new();
        let mut out = Vec::with_capacity(levels.len());
        let mut prev = 0.0;
        for &a in levels {
            let rate = self.bridge_rate(a - prev);
            if rate > 0.0 {
                let n = Poisson::new(rate)
                    .map_err(|e| Error::Numerical(format!("bridge count law: {e}")))?
                    .sample(rng) as u64;
                for _ in 0..n {
                    let k = sample_geometric(self.r, rng);
                    bridges.push(walker.closed_walk(self.base as u32, 0, k, rng)?);
                }
            }
            out.push(ThickLoop {
                base: self.base as u32,
                a,
                bridges: bridges.clone(),
            });
            prev = a;
        }
        Ok(out)
    }
}

/// One thick loop at `x` with thickness `a = gamma^2 / 2`.
pub fn sample_thick_loop<R: Rng + ?Sized>(
    domain: &LatticeDomain,
    green: &GreenTable,
    x: usize,
    a: f64,
    rng: &mut R,
) -> Result<ThickLoop> {
    ThickLoopSampler::new(domain, green, x)?.sample(a, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_domain, Shape};
    use crate::mc::{gamma_cdf, ks_statistic, summarize, McRng};
    use rand::SeedableRng;

    fn disc(n: usize) -> (LatticeDomain, GreenTable) {
        let d = build_domain(Shape::UnitDisc, n).unwrap();
        let g = GreenTable::new(&d).unwrap();
        (d, g)
    }

    #[test]
    fn loops_are_well_formed() {
        let (d, g) = disc(10);
        let s = LoopSoupSampler::new(&d, &g, 1.0).unwrap();
        let mut rng = McRng::seed_from_u64(3);
        let sample = s.sample(&mut rng).unwrap();
        assert!(!sample.loops.is_empty());
        for l in &sample.loops {
            assert_eq!(l.visits.first(), Some(&l.root));
            assert_eq!(l.visits.last(), Some(&l.root));
            assert!(l.visits.iter().all(|&v| v >= l.root));
            let root_hits = l.visits.iter().filter(|&&v| v == l.root).count();
            assert_eq!(root_hits as u32, l.returns + 1);
            assert_eq!(l.holding.len(), l.visits.len() - 1);
            for w in l.visits.windows(2) {
                assert!(d.neighbors(w[0] as usize).contains(&w[1]));
            }
        }
        assert!(sample.occupation.iter().all(|&x| x > 0.0));
        assert_eq!(occupation_field(&sample), sample.occupation);
    }

    #[test]
    fn identical_seeds_give_identical_samples() {
        let (d, g) = disc(10);
        let s = LoopSoupSampler::new(&d, &g, 0.5).unwrap();
        let a = s.sample(&mut McRng::seed_from_u64(9)).unwrap();
        let b = s.sample(&mut McRng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn occupation_examples() {
        let trivial = vec![0.5, 0.25];
        assert_eq!(recompute_occupation(&[], &trivial), trivial);
        let l = DiscreteLoop {
            root: 0,
            returns: 2,
            visits: vec![0, 1, 0, 1, 0],
            holding: vec![0.1, 0.2, 0.3, 0.4],
        };
        let occ = recompute_occupation(&[l], &trivial);
        assert_eq!(occ[0], 0.1 + 0.3 + 0.5);
        assert_eq!(occ[1], 0.2 + 0.4 + 0.25);
    }

    #[test]
    fn rejects_nonpositive_intensity() {
        let (d, g) = disc(8);
        assert!(LoopSoupSampler::new(&d, &g, 0.0).is_err());
        assert!(LoopSoupSampler::new(&d, &g, -1.0).is_err());
    }

    #[test]
    fn logarithmic_law_frequencies() {
        let r = 0.6;
        let mut rng = McRng::seed_from_u64(5);
        let m = 200_000;
        let mut counts = [0usize; 4];
        for _ in 0..m {
            let k = sample_logarithmic(r, &mut rng) as usize;
            if k <= 3 {
                counts[k] += 1;
            }
        }
        let norm = -(1.0f64 - r).ln();
        for (k, &count) in counts.iter().enumerate().skip(1).take(3) {
            let p = r.powi(k as i32) / (k as f64 * norm);
            let se = (p * (1.0 - p) / m as f64).sqrt();
            assert!((count as f64 / m as f64 - p).abs() < 4.0 * se);
        }
    }

    #[test]
    fn occupation_over_green_is_gamma_on_small_disc() {
        let (d, g) = disc(8);
        let x = d.origin();
        let gxx = g.diagonal(x);
        for &theta in &[0.5, 1.0] {
            let s = LoopSoupSampler::new(&d, &g, theta).unwrap();
            let mut rng = McRng::seed_from_u64(18);
            let vals: Vec<f64> = (0..5000)
                .map(|_| s.sample(&mut rng).unwrap().occupation[x] / gxx)
                .collect();
            let mean = summarize(&vals);
            assert!(mean.within(theta, 3.0), "theta={theta} mean={mean:?}");
            let ks = ks_statistic(&vals, |t| gamma_cdf(theta, t)).unwrap();
            assert!(ks < 1.63 / (vals.len() as f64).sqrt(), "ks={ks}");
        }
    }

    #[test]
    fn thick_loop_void_probability() {
        let (d, g) = disc(10);
        let t = ThickLoopSampler::new(&d, &g, d.origin()).unwrap();
        let a = 0.02;
        let mut rng = McRng::seed_from_u64(23);
        let m = 20_000;
        let hits: Vec<f64> = (0..m)
            .map(|_| !t.sample(a, &mut rng).unwrap().is_empty() as u8 as f64)
            .collect();
        let p = 1.0 - (-t.bridge_rate(a)).exp();
        assert!(summarize(&hits).within(p, 3.0));
        // Linear in a to first order.
        assert!((p / t.bridge_rate(a) - 1.0).abs() < 0.05);
    }

    #[test]
    fn nested_thick_loops_are_increasing() {
        let (d, g) = disc(10);
        let t = ThickLoopSampler::new(&d, &g, d.origin()).unwrap();
        let mut rng = McRng::seed_from_u64(2);
        for _ in 0..50 {
            let v = t.sample_nested(&[0.1, 0.5, 1.0], &mut rng).unwrap();
            for w in v.windows(2) {
                assert!(w[1].bridges.starts_with(&w[0].bridges));
                assert!(w[1].radius(&d) >= w[0].radius(&d));
            }
            for b in &v[2].bridges {
                assert_eq!(b.first(), Some(&(d.origin() as u32)));
                assert_eq!(b.last(), Some(&(d.origin() as u32)));
            }
        }
        assert!(t.sample_nested(&[0.5, 0.1], &mut rng).is_err());
        assert!(t.sample(0.0, &mut rng).is_err());
    }
}

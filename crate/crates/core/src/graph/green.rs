use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::domain::{LatticeDomain, EXIT};
use crate::error::{Error, Result};

/// Vertex counts above which a dense Green matrix is refused.
pub const DENSE_LIMIT: usize = 4096;

/// Envelope Cholesky factor `A = L L^T` of `A = I - P`, where `P` is the
/// transition matrix of the killed walk. Rows are stored in *reverse*
/// vertex order (position `p` holds vertex `n - 1 - p`), so the leading
/// block of positions `0..=p` is the domain restricted to vertices with
/// index `>= n - 1 - p`.
#[derive(Debug, Clone)]
struct EnvelopeCholesky {
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
    // Σ_k L[p][k]^2 over off-diagonal entries, kept before the square root
    // for accuracy when the pivot is close to one.
    offdiag_mass: Vec<f64>,
}

impl EnvelopeCholesky {
    fn factor(domain: &LatticeDomain) -> Result<Self> {
        let n = domain.len();
        let pos = |v: usize| n - 1 - v;
        let mut first = Vec::with_capacity(n);
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for p in 0..n {
            let v = n - 1 - p;
            let lo = domain
                .neighbors(v)
                .iter()
                .filter(|&&w| w != EXIT)
                .map(|&w| pos(w as usize))
                .fold(p, usize::min);
            first.push(lo);
            offset.push(offset[p] + p - lo + 1);
        }
        let mut data = vec![0.0; offset[n]];
        let mut offdiag_mass = vec![0.0; n];
        for p in 0..n {
            let v = n - 1 - p;
            let (lo, start) = (first[p], offset[p]);
            for &w in domain.neighbors(v) {
                if w != EXIT {
                    let q = pos(w as usize);
                    if q < p {
                        data[start + q - lo] = -0.25;
                    }
                }
            }
            let (done, rest) = data.split_at_mut(start);
            let row = &mut rest[..p - lo + 1];
            for q in lo..p {
                let qlo = first[q];
                let k0 = lo.max(qlo);
                let qrow = &done[offset[q]..offset[q + 1]];
                let dot: f64 = row[k0 - lo..q - lo]
                    .iter()
                    .zip(&qrow[k0 - qlo..q - qlo])
                    .map(|(a, b)| a * b)
                    .sum();
                row[q - lo] = (row[q - lo] - dot) / qrow[q - qlo];
            }
            let mass: f64 = row[..p - lo].iter().map(|x| x * x).sum();
            let pivot = 1.0 - mass;
            if !(pivot > 0.0) {
                return Err(Error::Numerical(format!("non-positive pivot {pivot:e} at vertex {v}")));
            }
            row[p - lo] = pivot.sqrt();
            offdiag_mass[p] = mass;
        }
        Ok(Self {
            first,
            offset,
            data,
            offdiag_mass,
        })
    }

    fn len(&self) -> usize {
        self.first.len()
    }

    fn row(&self, p: usize) -> &[f64] {
        &self.data[self.offset[p]..self.offset[p + 1]]
    }

    /// Solves `L y = b` in place; entries before `start` must be zero.
    fn forward(&self, b: &mut [f64], start: usize) {
        for p in start..self.len() {
            let lo = self.first[p];
            let row = self.row(p);
            let k0 = lo.max(start);
            let dot: f64 = row[k0 - lo..p - lo].iter().zip(&b[k0..p]).map(|(a, x)| a * x).sum();
            b[p] = (b[p] - dot) / row[p - lo];
        }
    }

    /// Solves `L^T x = y` in place.
    fn backward(&self, y: &mut [f64]) {
        for p in (0..self.len()).rev() {
            let lo = self.first[p];
            let row = self.row(p);
            let x = y[p] / row[p - lo];
            y[p] = x;
            for (target, l) in y[lo..p].iter_mut().zip(&row[..p - lo]) {
                *target -= l * x;
            }
        }
    }
}

/// Green function `G = (1/4)(I - P)^{-1}` of simple random walk killed on
/// leaving a [`LatticeDomain`]. Columns are produced on demand from a
/// sparse factorization.
#[derive(Debug, Clone)]
pub struct GreenTable {
    chol: EnvelopeCholesky,
}

impl GreenTable {
    pub fn new(domain: &LatticeDomain) -> Result<Self> {
        Ok(Self {
            chol: EnvelopeCholesky::factor(domain)?,
        })
    }

    pub fn len(&self) -> usize {
        self.chol.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn pos(&self, v: usize) -> usize {
        self.len() - 1 - v
    }

    /// Column `G(., y)` indexed by vertex.
    pub fn column(&self, y: usize) -> Vec<f64> {
        let n = self.len();
        let mut b = vec![0.0; n];
        let p = self.pos(y);
        b[p] = 0.25;
        self.chol.forward(&mut b, p);
        self.chol.backward(&mut b);
        b.reverse();
        b
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.column(y)[x]
    }

    pub fn diagonal(&self, x: usize) -> f64 {
        self.get(x, x)
    }

    /// Full matrix; only for small domains.
    pub fn dense(&self) -> Result<DMatrix<f64>> {
        let n = self.len();
        if n > DENSE_LIMIT {
            return Err(Error::InvalidParameter {
                name: "domain",
                reason: format!("{n} vertices exceed the dense limit {DENSE_LIMIT}"),
            });
        }
        let mut g = DMatrix::zeros(n, n);
        for y in 0..n {
            let col = self.column(y);
            g.set_column(y, &nalgebra::DVector::from_vec(col));
        }
        Ok(g)
    }

    /// Probability that the walk started at `x` returns to `x` before
    /// leaving the domain.
    pub fn return_probability(&self, x: usize) -> f64 {
        (1.0 - 1.0 / (4.0 * self.diagonal(x))).max(0.0)
    }

    /// Probability that the walk started at vertex `i` returns to `i` before
    /// leaving the domain or visiting any vertex of smaller index.
    pub fn rooted_return_probability(&self, i: usize) -> f64 {
        self.chol.offdiag_mass[self.pos(i)]
    }

    /// All rooted return probabilities, indexed by vertex.
    pub fn rooted_return_probabilities(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.rooted_return_probability(i)).collect()
    }

    /// Draws a centered Gaussian vector with covariance `G`.
    pub fn sample_gff<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.len();
        let mut xi: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        self.chol.backward(&mut xi);
        xi.reverse();
        for x in &mut xi {
            *x *= 0.5;
        }
        xi
    }
}

/// Green function of simple random walk killed on leaving `domain`.
pub fn green_function(domain: &LatticeDomain) -> Result<GreenTable> {
    GreenTable::new(domain)
}

/// Discrete GFF on `domain` with covariance `green`.
pub fn sample_gff<R: Rng + ?Sized>(domain: &LatticeDomain, green: &GreenTable, rng: &mut R) -> Result<Vec<f64>> {
    if green.len() != domain.len() {
        return Err(Error::InvalidParameter {
            name: "green",
            reason: "Green table was built for another domain".into(),
        });
    }
    Ok(green.sample_gff(rng))
}

//! Reproducible replica orchestration and the statistics used to judge
//! Monte Carlo output.
//!
//! Every replica draws from its own generator, seeded from the pair
//! `(master_seed, replica_index)` through SplitMix64 mixing, so the output
//! of [`run_replicas`] depends only on the [`RunSpec`] and never on how the
//! work was scheduled across threads.

mod rng;
mod stats;

pub use rng::{derive_seed, replica_rng, splitmix64, McRng};
pub use stats::{
    binomial_summary, covariance_summary, fit_log_frequencies, fit_slope, gamma_cdf, ks_statistic, ks_two_sample,
    summarize, LineFit, Summary,
};

use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// Replica layout of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSpec {
    pub master_seed: u64,
    pub replicas: u64,
    pub workers: usize,
}

impl RunSpec {
    pub fn new(master_seed: u64, replicas: u64) -> Self {
        Self {
            master_seed,
            replicas,
            workers: 1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    /// Same layout with an independent seed stream for a second estimator.
    pub fn stream(&self, tag: u64) -> Self {
        Self {
            master_seed: derive_seed(self.master_seed, tag),
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(invalid("replicas", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(invalid("workers", "must be at least 1"));
        }
        Ok(())
    }
}

/// Runs `task` once per replica and returns the records in replica order.
///
/// A task error or panic is reported with the index of the replica that
/// raised it; when several replicas fail, the lowest index wins. Rejected
/// parameters are returned unwrapped, since they do not depend on the
/// replica.
pub fn run_replicas<T, F>(spec: &RunSpec, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut McRng) -> Result<T> + Sync,
{
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| invalid("workers", e.to_string()))?;

    let seed = spec.master_seed;
    let outcomes: Vec<Result<T>> = pool.install(|| {
        (0..spec.replicas)
            .into_par_iter()
            .map(|i| {
                let mut rng = replica_rng(seed, i);
                match catch_unwind(AssertUnwindSafe(|| task(i, &mut rng))) {
                    Ok(Ok(record)) => Ok(record),
                    Ok(Err(e @ Error::InvalidParameter { .. })) => Err(e),
                    Ok(Err(e)) => Err(Error::Replica {
                        replica: i,
                        message: e.to_string(),
                    }),
                    Err(payload) => Err(Error::Replica {
                        replica: i,
                        message: panic_message(payload),
                    }),
                }
            })
            .collect()
    });
    outcomes.into_iter().collect()
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        format!("panicked: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("panicked: {s}")
    } else {
        "panicked".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draw(spec: &RunSpec) -> Vec<(u64, u64, f64)> {
        run_replicas(spec, |i, rng| Ok((i, rng.random::<u64>(), rng.random::<f64>()))).unwrap()
    }

    #[test]
    fn worker_count_does_not_change_records() {
        let one = draw(&RunSpec::new(42, 200).with_workers(1));
        let eight = draw(&RunSpec::new(42, 200).with_workers(8));
        assert_eq!(one, eight);
        assert!(one.iter().enumerate().all(|(k, r)| r.0 == k as u64));
    }

    #[test]
    fn single_replica_gives_single_record() {
        assert_eq!(draw(&RunSpec::new(7, 1)).len(), 1);
    }

    #[test]
    fn zero_replicas_is_rejected() {
        assert!(run_replicas(&RunSpec::new(1, 0), |_, _| Ok(())).is_err());
    }

    #[test]
    fn failures_carry_the_replica_index() {
        let err = run_replicas(&RunSpec::new(3, 10).with_workers(4), |i, _| {
            if i == 6 {
                panic!("boom");
            }
            if i == 8 {
                return Err(invalid("x", "bad"));
            }
            Ok(i)
        })
        .unwrap_err();
        match err {
            Error::Replica { replica, message } => {
                assert_eq!(replica, 6);
                assert!(message.contains("boom"));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn rejected_parameters_pass_through() {
        let err = run_replicas(&RunSpec::new(3, 5), |i, _| {
            if i == 2 {
                Err(invalid("x", "bad"))
            } else {
                Ok(i)
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "x", .. }));
    }

    #[test]
    fn streams_are_distinct() {
        let spec = RunSpec::new(11, 4);
        assert_ne!(draw(&spec), draw(&spec.stream(1)));
        assert_eq!(draw(&spec.stream(1)), draw(&spec.stream(1)));
    }
}

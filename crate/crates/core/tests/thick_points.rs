use loopfield::fields::{thick_point_measure, thick_threshold};
use loopfield::graph::{build_domain, GreenTable, Shape};
use loopfield::loopsoup::LoopSoupSampler;
use loopfield::mc::{run_replicas, summarize, RunSpec};

#[test]
fn total_mass_is_finite_and_positive() {
    let (theta, a, mesh) = (0.5, 0.25, 64);
    let d = build_domain(Shape::UnitDisc, mesh).unwrap();
    let g = GreenTable::new(&d).unwrap();
    let sampler = LoopSoupSampler::new(&d, &g, theta).unwrap();
    let threshold = thick_threshold(a, mesh);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let rows = run_replicas(&RunSpec::new(31, 2000).with_workers(workers), |_, rng| {
        let s = sampler.sample(rng)?;
        let m = thick_point_measure(&d, &s.occupation, theta, a)?;
        let thick = s.occupation.iter().filter(|&&l| l >= threshold).count();
        assert_eq!(m.atoms.len(), thick);
        Ok(m.total_mass())
    })
    .unwrap();
    assert!(rows.iter().all(|m| m.is_finite() && *m >= 0.0));
    let mass = summarize(&rows);
    assert!(mass.mean.is_finite() && mass.mean > 0.0, "{mass:?}");
    assert!(mass.mean > 3.0 * mass.se, "{mass:?}");
}

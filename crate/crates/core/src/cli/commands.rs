use std::collections::HashMap;
use std::str::FromStr;

use serde::Serialize;

use super::args::*;
use super::{emit, CliError, VERSION};
use crate::bessel1d::{check_duality, check_martingale_with, sample_besq, signed_field};
use crate::clusters::{
    build_clusters, estimate_zgamma_curve, estimate_zr, estimate_zr_curve, minkowski_estimate, vertex_spins,
};
use crate::error::Error;
use crate::fields::{discrete_field, m_gamma_density, thick_point_measure, thick_threshold};
use crate::gff_iso::{bfs_dynkin_check, lejan_check, Functional, TinyGraph};
use crate::graph::{build_domain, GreenTable, LatticeDomain, Shape};
use crate::loopsoup::LoopSoupSampler;
use crate::mc::{fit_slope, run_replicas, RunSpec};
use crate::special::{estimate_wick_covariance, run_identity_grid, IdentityKind, IdentityReport};

type CliResult<T> = Result<T, CliError>;

/// Resolved run settings shared by every command.
struct Context<'a> {
    cli: &'a Cli,
    seed: u64,
}

impl Context<'_> {
    fn spec(&self, default_replicas: u64) -> RunSpec {
        let workers = self
            .cli
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        RunSpec::new(self.seed, self.cli.replicas.unwrap_or(default_replicas)).with_workers(workers)
    }

    /// `# cmd: loopfield <sub> <flags> seed=<s> version=<v>`; workers,
    /// output path and config file are left out since they never change
    /// the results.
    fn header(&self, sub: &str, flags: &[(&str, String)]) -> String {
        let mut line = format!("# cmd: loopfield {sub}");
        for (k, v) in flags {
            line.push_str(&format!(" --{k} {v}"));
        }
        line.push_str(&format!(" seed={} version={VERSION}", self.seed));
        line
    }

    fn write_csv(&self, sub: &str, flags: &[(&str, String)], table: Table) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(table.columns).map_err(Error::from)?;
        for row in &table.rows {
            w.write_record(row).map_err(Error::from)?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        emit(self.cli.out.as_deref(), &self.header(sub, flags), &body)
    }
}

struct Table {
    columns: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &'static [&'static str]) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

fn f(x: f64) -> String {
    x.to_string()
}

pub(super) fn execute(cli: &Cli) -> CliResult<()> {
    let ctx = Context {
        cli,
        seed: cli.seed.unwrap_or(0),
    };
    match &cli.command {
        Command::SampleOccupation(a) => sample_occupation(&ctx, a),
        Command::Crossing(a) => crossing(&ctx, a),
        Command::Zgamma(a) => zgamma(&ctx, a),
        Command::Field(a) => field(&ctx, a),
        Command::WickCov(a) => wick_cov(&ctx, a),
        Command::IdentityCheck(a) => identity_check(&ctx, a),
        Command::GffIso(a) => gff_iso(&ctx, a),
        Command::BfsDynkin(a) => bfs_dynkin(&ctx, a),
        Command::Besq(a) => besq(&ctx, a),
        Command::Duality1d(a) => duality1d(&ctx, a),
        Command::Martingale1d(a) => martingale1d(&ctx, a),
        Command::Minkowski(a) => minkowski(&ctx, a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `x,y`.
fn parse_point(flag: &str, s: &str) -> CliResult<(f64, f64)> {
    let bad = || usage(format!("--{flag}: expected `x,y`, got `{s}`"));
    let (x, y) = s.split_once(',').ok_or_else(bad)?;
    let x = x.trim().parse::<f64>().map_err(|_| bad())?;
    let y = y.trim().parse::<f64>().map_err(|_| bad())?;
    Ok((x, y))
}

/// Parses a comma-separated list of numbers; `e-k` means `exp(-k)`.
fn parse_list(flag: &str, s: &str) -> CliResult<Vec<f64>> {
    let items: CliResult<Vec<f64>> = s
        .split(',')
        .map(|tok| {
            let tok = tok.trim();
            let value = match tok.strip_prefix("e-") {
                Some(k) => k.parse::<f64>().map(|k| (-k).exp()),
                None => tok.parse::<f64>(),
            };
            value.map_err(|_| usage(format!("--{flag}: cannot read `{tok}`")))
        })
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(usage(format!("--{flag}: empty list")));
    }
    Ok(items)
}

fn domain_and_green(shape: Shape, mesh: usize) -> CliResult<(LatticeDomain, GreenTable)> {
    let domain = build_domain(shape, mesh)?;
    let green = GreenTable::new(&domain)?;
    Ok((domain, green))
}

fn vertex_at(domain: &LatticeDomain, flag: &str, p: (f64, f64)) -> CliResult<usize> {
    domain
        .nearest_vertex(p.0, p.1)
        .ok_or_else(|| usage(format!("--{flag}: point ({}, {}) is outside the domain", p.0, p.1)))
}

fn probe_vertices(domain: &LatticeDomain, probes: &[String]) -> CliResult<(Vec<usize>, String)> {
    if probes.is_empty() {
        return Ok((vec![domain.origin()], "0,0".to_string()));
    }
    let mut vs = Vec::new();
    for p in probes {
        vs.push(vertex_at(domain, "probe", parse_point("probe", p)?)?);
    }
    Ok((vs, probes.join(" --probe ")))
}

fn sample_occupation(ctx: &Context, a: &OccupationArgs) -> CliResult<()> {
    let shape = Shape::from_str(&a.domain).map_err(usage)?;
    let (domain, green) = domain_and_green(shape, a.mesh)?;
    let (probes, probe_text) = probe_vertices(&domain, &a.probes)?;
    let spec = ctx.spec(1000);
    let sampler = LoopSoupSampler::new(&domain, &green, a.theta)?;
    let rows = run_replicas(&spec, |_, rng| {
        let s = sampler.sample(rng)?;
        Ok(probes.iter().map(|&v| s.occupation[v]).collect::<Vec<_>>())
    })?;
    let mut table = Table::new(&["replica", "probe_index", "occupation", "occupation_over_G"]);
    for (i, row) in rows.iter().enumerate() {
        for (k, (&v, &ell)) in probes.iter().zip(row).enumerate() {
            table.push(vec![i.to_string(), k.to_string(), f(ell), f(ell / green.diagonal(v))]);
        }
    }
    ctx.write_csv(
        "sample-occupation",
        &[
            ("theta", f(a.theta)),
            ("mesh", a.mesh.to_string()),
            ("domain", shape.name().to_string()),
            ("probe", probe_text),
            ("replicas", spec.replicas.to_string()),
        ],
        table,
    )
}

/// Weighted line through `(x_k, ln p_k)` with weights `(p_k / se_k)^2`, so
/// the fit can be recomputed from the CSV columns alone.
fn frequency_fit(xs: &[f64], estimates: &[f64], ses: &[f64]) -> (String, String) {
    let ok = estimates.iter().zip(ses).all(|(&p, &s)| p > 0.0 && s > 0.0);
    if xs.len() < 3 || !ok {
        return (String::new(), String::new());
    }
    let ys: Vec<f64> = estimates.iter().map(|p| p.ln()).collect();
    let ws: Vec<f64> = estimates.iter().zip(ses).map(|(p, s)| (p / s).powi(2)).collect();
    match fit_slope(xs, &ys, &ws) {
        Ok(fit) => (f(fit.slope), f(fit.intercept)),
        Err(_) => (String::new(), String::new()),
    }
}

fn crossing(ctx: &Context, a: &CrossingArgs) -> CliResult<()> {
    let radii = parse_list("r-list", &a.r_list)?;
    let (domain, green) = domain_and_green(Shape::UnitDisc, a.mesh)?;
    let spec = ctx.spec(1000);
    let curve = estimate_zr_curve(&domain, &green, a.theta, &radii, &spec)?;
    let sums = curve.summaries();
    let xs: Vec<f64> = radii.iter().map(|r| (1.0 / r).ln().ln()).collect();
    let est: Vec<f64> = sums.iter().map(|s| s.mean).collect();
    let ses: Vec<f64> = sums.iter().map(|s| s.se).collect();
    let (slope, intercept) = frequency_fit(&xs, &est, &ses);
    let mut table = Table::new(&["r", "estimate", "se", "n", "fit_slope", "fit_intercept"]);
    for (r, s) in radii.iter().zip(&sums) {
        table.push(vec![
            f(*r),
            f(s.mean),
            f(s.se),
            s.n.to_string(),
            slope.clone(),
            intercept.clone(),
        ]);
    }
    ctx.write_csv(
        "crossing",
        &[
            ("theta", f(a.theta)),
            ("mesh", a.mesh.to_string()),
            ("r-list", a.r_list.clone()),
            ("replicas", spec.replicas.to_string()),
        ],
        table,
    )
}

fn zgamma(ctx: &Context, a: &ZgammaArgs) -> CliResult<()> {
    let gammas = parse_list("gamma-list", &a.gamma_list)?;
    let (domain, green) = domain_and_green(Shape::UnitDisc, a.mesh)?;
    let spec = ctx.spec(1000);
    let res = estimate_zgamma_curve(&domain, &green, a.theta, &gammas, &spec)?;
    let sums = res.curve.summaries();
    let xs: Vec<f64> = gammas.iter().map(|g| g.ln()).collect();
    let est: Vec<f64> = sums.iter().map(|s| s.mean).collect();
    let ses: Vec<f64> = sums.iter().map(|s| s.se).collect();
    let (slope, intercept) = frequency_fit(&xs, &est, &ses);
    let mut table = Table::new(&[
        "gamma",
        "estimate",
        "se",
        "n",
        "nonempty_fraction",
        "fit_slope",
        "fit_intercept",
    ]);
    for (k, (g, s)) in gammas.iter().zip(&sums).enumerate() {
        table.push(vec![
            f(*g),
            f(s.mean),
            f(s.se),
            s.n.to_string(),
            f(res.nonempty_summary(k).mean),
            slope.clone(),
            intercept.clone(),
        ]);
    }
    ctx.write_csv(
        "zgamma",
        &[
            ("theta", f(a.theta)),
            ("mesh", a.mesh.to_string()),
            ("gamma-list", a.gamma_list.clone()),
            ("replicas", spec.replicas.to_string()),
        ],
        table,
    )
}

fn field(ctx: &Context, a: &FieldArgs) -> CliResult<()> {
    let (domain, green) = domain_and_green(Shape::UnitDisc, a.mesh)?;
    let (probes, probe_text) = probe_vertices(&domain, &a.probes)?;
    let level = a.gamma * a.gamma / 2.0;
    let threshold = thick_threshold(level, a.mesh);
    // Rejects out-of-range parameters before any sampling.
    m_gamma_density(1.0, 1, a.gamma, a.theta, green.diagonal(domain.origin()))?;
    let spec = ctx.spec(200);
    let sampler = LoopSoupSampler::new(&domain, &green, a.theta)?;
    let n = domain.len();
    let rows = run_replicas(&spec, |_, rng| {
        let s = sampler.sample(rng)?;
        let mut partition = build_clusters(&s.loops, n)?;
        partition.randomize_spins(rng);
        let spins = vertex_spins(&domain, &partition);
        let h = discrete_field(&s.occupation, &spins, a.theta)?;
        let measure = thick_point_measure(&domain, &s.occupation, a.theta, level)?;
        let weights: HashMap<u32, f64> = measure.atoms.iter().copied().collect();
        probes
            .iter()
            .map(|&v| {
                let ell = s.occupation[v];
                let spin = spins.spin[v];
                Ok(vec![
                    f(ell),
                    spin.to_string(),
                    f(h.values[v]),
                    f(m_gamma_density(ell, spin, a.gamma, a.theta, green.diagonal(v))?),
                    u8::from(ell >= threshold).to_string(),
                    f(weights.get(&(v as u32)).copied().unwrap_or(0.0)),
                    u8::from(spins.flagged[v]).to_string(),
                ])
            })
            .collect::<crate::Result<Vec<_>>>()
    })?;
    let mut table = Table::new(&[
        "replica",
        "probe",
        "ell",
        "spin",
        "h_value",
        "m_gamma_density",
        "thick",
        "weight",
        "flagged",
    ]);
    for (i, probe_rows) in rows.into_iter().enumerate() {
        for (k, rest) in probe_rows.into_iter().enumerate() {
            let mut row = vec![i.to_string(), k.to_string()];
            row.extend(rest);
            table.push(row);
        }
    }
    ctx.write_csv(
        "field",
        &[
            ("theta", f(a.theta)),
            ("gamma", f(a.gamma)),
            ("mesh", a.mesh.to_string()),
            ("probe", probe_text),
            ("replicas", spec.replicas.to_string()),
        ],
        table,
    )
}

fn wick_cov(ctx: &Context, a: &WickArgs) -> CliResult<()> {
    let (domain, green) = domain_and_green(Shape::UnitDisc, a.mesh)?;
    let z = vertex_at(&domain, "z", parse_point("z", &a.z)?)?;
    let w = vertex_at(&domain, "w", parse_point("w", &a.w)?)?;
    let spec = ctx.spec(10_000);
    let res = estimate_wick_covariance(&domain, &green, a.theta, a.n, a.m, z, w, &spec)?;
    let mut table = Table::new(&["theta", "n", "m", "estimate", "se", "predicted", "G_zw", "replicas"]);
    table.push(vec![
        f(a.theta),
        a.n.to_string(),
        a.m.to_string(),
        f(res.estimate.mean),
        f(res.estimate.se),
        f(res.predicted),
        f(res.g_zw),
        spec.replicas.to_string(),
    ]);
    ctx.write_csv(
        "wick-cov",
        &[
            ("theta", f(a.theta)),
            ("n", a.n.to_string()),
            ("m", a.m.to_string()),
            ("mesh", a.mesh.to_string()),
            ("z", a.z.clone()),
            ("w", a.w.clone()),
            ("replicas", spec.replicas.to_string()),
        ],
        table,
    )
}

#[derive(Serialize)]
struct IdentityOutput {
    /// The invocation header, kept inside the document so it stays valid JSON.
    cmd: String,
    passed: bool,
    reports: Vec<IdentityReport>,
}

fn identity_check(ctx: &Context, a: &IdentityArgs) -> CliResult<()> {
    if a.grid != "default" {
        return Err(usage(format!("--grid: unknown grid `{}` (only `default`)", a.grid)));
    }
    let kinds: Vec<IdentityKind> = if a.which == "all" {
        IdentityKind::ALL.to_vec()
    } else {
        vec![IdentityKind::parse(&a.which).ok_or_else(|| {
            usage(format!(
                "--which: unknown identity `{}` (laguerre-bessel, hermite-laguerre, hermite-exp, m-gamma, all)",
                a.which
            ))
        })?]
    };
    let reports = kinds
        .into_iter()
        .map(run_identity_grid)
        .collect::<crate::Result<Vec<_>>>()?;
    let passed = reports.iter().all(|r| r.passed);
    let doc = IdentityOutput {
        cmd: ctx.header(
            "identity-check",
            &[("which", a.which.clone()), ("grid", a.grid.clone())],
        ),
        passed,
        reports,
    };
    let mut body = serde_json::to_vec_pretty(&doc).map_err(Error::from)?;
    body.push(b'\n');
    match ctx.cli.out.as_deref() {
        Some(p) => std::fs::write(p, &body).map_err(Error::from)?,
        None => print!("{}", String::from_utf8_lossy(&body)),
    }
    if !passed {
        let failing: Vec<&str> = doc.reports.iter().filter(|r| !r.passed).map(|r| r.which).collect();
        return Err(CliError::Runtime(Error::Numerical(format!(
            "identity residual above tolerance: {}",
            failing.join(", ")
        ))));
    }
    Ok(())
}

fn gff_iso(ctx: &Context, a: &GffIsoArgs) -> CliResult<()> {
    let (domain, green) = domain_and_green(Shape::UnitDisc, a.mesh)?;
    let x = vertex_at(&domain, "x", parse_point("x", &a.x)?)?;
    let y = vertex_at(&domain, "y", parse_point("y", &a.y)?)?;
    let spec = ctx.spec(5000);
    let r = lejan_check(&domain, &green, x, y, &spec)?;
    let mut table = Table::new(&[
        "ks_two_sample",
        "ks_occupation_gamma",
        "ks_gff_gamma",
        "cov_occupation",
        "cov_occupation_se",
        "cov_gff",
        "cov_gff_se",
        "predicted",
        "G_xx",
        "G_xy",
    ]);
    table.push(vec![
        f(r.ks_two_sample),
        f(r.ks_occupation_gamma),
        f(r.ks_gff_gamma),
        f(r.cov_occupation.mean),
        f(r.cov_occupation.se),
        f(r.cov_gff.mean),
        f(r.cov_gff.se),
        f(r.predicted),
        f(r.g_xx),
        f(r.g_xy),
    ]);
    ctx.write_csv(
        "gff-iso",
        &[
            ("mesh", a.mesh.to_string()),
            ("x", a.x.clone()),
            ("y", a.y.clone()),
            ("replicas", spec.replicas.to_string()),
        ],
        table,
    )
}

fn bfs_dynkin(ctx: &Context, a: &BfsArgs) -> CliResult<()> {
    let name = a
        .graph
        .strip_prefix("builtin:")
        .ok_or_else(|| usage(format!("--graph: expected `builtin:<name>`, got `{}`", a.graph)))?;
    let graph = TinyGraph::builtin(name)?;
    let functional = match a.functional.as_str() {
        "exp" => Functional::ExpTotal,
        "one" => Functional::One,
        other => return Err(usage(format!("--functional: unknown `{other}` (exp or one)"))),
    };
    let spec = ctx.spec(100_000);
    let r = bfs_dynkin_check(&graph, a.x, a.y, functional, &spec)?;
    let mut table = Table::new(&["graph", "x", "y", "lhs", "lhs_se", "rhs", "rhs_se", "exact"]);
    table.push(vec![
        a.graph.clone(),
        a.x.to_string(),
        a.y.to_string(),
        f(r.lhs.mean),
        f(r.lhs.se),
        f(r.rhs.mean),
        f(r.rhs.se),
        f(r.exact),
    ]);
    ctx.write_csv(
        "bfs-dynkin",
        &[
            ("graph", a.graph.clone()),
            ("x", a.x.to_string()),
            ("y", a.y.to_string()),
            ("functional", a.functional.clone()),
            ("replicas", spec.replicas.to_string()),
        ],
        table,
    )
}

fn besq(ctx: &Context, a: &BesqArgs) -> CliResult<()> {
    let times = parse_list("probe-times", &a.probe_times)?;
    if times.iter().any(|&t| !(t > 0.0 && t <= a.horizon)) {
        return Err(usage("--probe-times: every time must lie in (0, horizon]"));
    }
    let spec = ctx.spec(10_000);
    let (theta, horizon, dt) = (a.theta, a.horizon, a.dt);
    let rows = run_replicas(&spec, |_, rng| {
        let mut path = sample_besq(theta, horizon, dt, rng)?;
        let h = signed_field(&mut path, rng);
        times
            .iter()
            .map(|&t| {
                let k = path.index(t)?;
                Ok((path.values[k], h[k]))
            })
            .collect::<crate::Result<Vec<_>>>()
    })?;
    let mut table = Table::new(&["replica", "t", "R", "h"]);
    for (i, row) in rows.iter().enumerate() {
        for (&t, &(r, h)) in times.iter().zip(row) {
            table.push(vec![i.to_string(), f(t), f(r), f(h)]);
        }
    }
    ctx.write_csv(
        "besq",
        &[
            ("theta", f(a.theta)),
            ("horizon", f(a.horizon)),
            ("dt", f(a.dt)),
            ("probe-times", a.probe_times.clone()),
            ("replicas", spec.replicas.to_string()),
        ],
        table,
    )
}

fn duality1d(ctx: &Context, a: &DualityArgs) -> CliResult<()> {
    let spec = ctx.spec(100_000);
    let r = check_duality(a.theta, a.x, a.y, a.dt, &spec)?;
    let mut table = Table::new(&[
        "theta",
        "x",
        "y",
        "dt",
        "lhs",
        "lhs_se",
        "rhs",
        "rel_error",
        "lhs_low_threshold",
        "lhs_high_threshold",
        "zero_fraction",
    ]);
    table.push(vec![
        f(a.theta),
        f(a.x),
        f(a.y),
        f(a.dt),
        f(r.lhs.mean),
        f(r.lhs.se),
        f(r.rhs),
        f(r.relative_error()),
        f(r.lhs_low_threshold.mean),
        f(r.lhs_high_threshold.mean),
        f(r.zero_fraction),
    ]);
    ctx.write_csv(
        "duality1d",
        &[
            ("theta", f(a.theta)),
            ("x", f(a.x)),
            ("y", f(a.y)),
            ("dt", f(a.dt)),
            ("replicas", spec.replicas.to_string()),
        ],
        table,
    )
}

fn martingale1d(ctx: &Context, a: &MartingaleArgs) -> CliResult<()> {
    let times = parse_list("times", &a.times)?;
    let theta_poly = a.theta_poly.unwrap_or(a.theta);
    let spec = ctx.spec(10_000);
    let rows = check_martingale_with(a.theta, theta_poly, a.n, &times, &spec)?;
    let mut table = Table::new(&["t", "n", "theta", "theta_poly", "mean", "se"]);
    for (t, s) in rows {
        table.push(vec![
            f(t),
            a.n.to_string(),
            f(a.theta),
            f(theta_poly),
            f(s.mean),
            f(s.se),
        ]);
    }
    ctx.write_csv(
        "martingale1d",
        &[
            ("theta", f(a.theta)),
            ("n", a.n.to_string()),
            ("times", a.times.clone()),
            ("theta-poly", f(theta_poly)),
            ("replicas", spec.replicas.to_string()),
        ],
        table,
    )
}

fn minkowski(ctx: &Context, a: &MinkowskiArgs) -> CliResult<()> {
    let (domain, green) = domain_and_green(Shape::UnitDisc, a.mesh)?;
    let spec = ctx.spec(200);
    let zr = match a.zr {
        Some(z) => z,
        None => estimate_zr(&domain, &green, a.theta, a.r, &spec.stream(1))?.mean,
    };
    if !(zr > 0.0) {
        return Err(CliError::Runtime(Error::Numerical(
            "estimated Z_r is zero; pass --zr or raise --replicas".into(),
        )));
    }
    let sampler = LoopSoupSampler::new(&domain, &green, a.theta)?;
    let n = domain.len();
    let rows = run_replicas(&spec, |_, rng| {
        let loops = sampler.sample_loops(rng)?;
        let partition = build_clusters(&loops, n)?;
        let largest = (0..partition.len()).max_by_key(|&c| (partition.cluster_vertices[c].len(), usize::MAX - c));
        largest
            .map(|c| {
                let m = minkowski_estimate(&domain, &partition, c, a.r, zr)?;
                Ok((c, partition.cluster_vertices[c].len(), m))
            })
            .transpose()
    })?;
    let mut table = Table::new(&["replica", "cluster", "size", "r", "zr", "minkowski"]);
    for (i, row) in rows.iter().enumerate() {
        if let Some((c, size, m)) = row {
            table.push(vec![
                i.to_string(),
                c.to_string(),
                size.to_string(),
                f(a.r),
                f(zr),
                f(*m),
            ]);
        }
    }
    let mut flags = vec![("theta", f(a.theta)), ("mesh", a.mesh.to_string()), ("r", f(a.r))];
    if let Some(z) = a.zr {
        flags.push(("zr", f(z)));
    }
    flags.push(("replicas", spec.replicas.to_string()));
    ctx.write_csv("minkowski", &flags, table)
}

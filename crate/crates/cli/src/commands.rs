use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use transport_core::dyson::{kernel_norm, r1_tail_mass, rl_sweep, v_apply};
use transport_core::geometry::Vec2;
use transport_core::grid::PhaseGridFunction;
use transport_core::resolvent::{Resolvent, TraceNodes, TraceTag};
use transport_core::spectra::{resolvent_set_test, scan_spectrum, spectral_bound, TraceSampling};
use transport_core::streaming::{evolve_fn, laplace_transform};
use transport_core::{selftest, Error, C64};

use crate::config::RunConfig;
use crate::output::{num, write_json, CsvOut, SCHEMA_VERSION};
use crate::{Command, Failure};

/// Failures after validation are numerical unless they hit a resource cap.
fn compute(e: Error) -> Failure {
    match e {
        Error::ResourceLimit(m) => Failure::Resource(m),
        other => Failure::Numerical(other.to_string()),
    }
}

fn setup(e: Error) -> Failure {
    match e {
        Error::ResourceLimit(m) => Failure::Resource(m),
        other => Failure::Config(other.to_string()),
    }
}

fn metadata(cmd: Command, cfg: Option<&RunConfig>, seed: u64, results: Value) -> Value {
    json!({
        "command": cmd.name(),
        "schema_version": SCHEMA_VERSION,
        "program_version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": cfg,
        "results": results,
    })
}

fn phase_columns(x: Vec2, v: Vec2) -> [String; 4] {
    [num(x.x), num(x.y), num(v.x), num(v.y)]
}

pub fn run(cmd: Command, cfg: Option<&RunConfig>, out: &Path, seed: u64) -> Result<(), Failure> {
    if cmd == Command::Selftest {
        return selftest(cfg, out, seed);
    }
    let Some(cfg) = cfg else {
        return Err(Failure::Config(format!("{} needs --config", cmd.name())));
    };
    let results = match cmd {
        Command::Spectrum => spectrum(cfg, out)?,
        Command::Evolve => evolve(cfg, out)?,
        Command::ResolventVerify => resolvent_verify(cfg, out, seed)?,
        Command::Dyson => dyson(cfg, out, seed)?,
        Command::RlScan => rl_scan(cfg, out)?,
        Command::Selftest => unreachable!(),
    };
    write_json(out, "run.json", &metadata(cmd, Some(cfg), seed, results))
}

fn spectrum(cfg: &RunConfig, out: &Path) -> Result<Value, Failure> {
    let domain = cfg.domain()?;
    let sigma = cfg.sigma()?;
    let gamma = cfg.gamma()?;
    if gamma.value() >= 1.0 {
        return Err(Failure::Config(
            "spectrum needs γ < 1; for γ = 1 the spectrum is not given by F_k".into(),
        ));
    }
    let scan = cfg.scan()?;
    let cloud = scan_spectrum(&scan, &domain, &sigma, gamma).map_err(compute)?;
    let bound = spectral_bound(&cloud).map_err(compute)?;
    let mut csv = CsvOut::create(
        out,
        "spectrum.csv",
        "spectrum",
        &["x", "y", "vx", "vy", "k", "re", "im", "tau", "theta"],
    )?;
    for s in &cloud {
        let [x, y, vx, vy] = phase_columns(s.point.x, s.point.v);
        csv.row([
            x,
            y,
            vx,
            vy,
            s.k.to_string(),
            num(s.value.re),
            num(s.value.im),
            num(s.tau),
            num(s.theta),
        ])?;
    }
    csv.finish()?;
    let sampling = TraceSampling::from_samples(&cloud);
    let (inside, margin) = resolvent_set_test(C64::new(bound + 0.1, 0.0), gamma, &sampling, None);
    Ok(json!({
        "samples": cloud.len(),
        "spectral_bound": bound,
        "tau_floor": scan.tau_floor(&domain),
        "resolvent_set_above_bound": { "lambda": bound + 0.1, "inside": inside, "margin": margin },
    }))
}

fn evolve(cfg: &RunConfig, out: &Path) -> Result<Value, Failure> {
    cfg.require_homogeneous()?;
    let domain = cfg.domain()?;
    let sigma = cfg.sigma()?;
    let gamma = cfg.gamma()?;
    let times = cfg.evolve_times()?;
    let grid = cfg.phase_grid(&domain)?;
    let phi = cfg.initial()?;
    let phi0 = PhaseGridFunction::from_fn(grid.clone(), &phi);
    let norm0 = phi0.p_norm(2.0).map_err(compute)?;
    let mut header = vec!["t"];
    header.extend(grid.csv_header());
    let mut csv = CsvOut::create(out, "evolve.csv", "evolve", &header)?;
    let mut norms = Vec::new();
    for &t in &times {
        let u = evolve_fn(&phi, grid.clone(), t, &sigma, gamma).map_err(compute)?;
        for i in 0..grid.len() {
            csv.row(std::iter::once(num(t)).chain(u.csv_record(i).into_iter().map(num)))?;
        }
        norms.push(json!({
            "t": t,
            "l2_norm": u.p_norm(2.0).map_err(compute)?,
            "contraction_bound": norm0 * (-sigma.floor() * t).exp(),
        }));
    }
    csv.finish()?;
    Ok(json!({ "nodes": grid.len(), "initial_l2_norm": norm0, "norms": norms }))
}

fn resolvent_verify(cfg: &RunConfig, out: &Path, seed: u64) -> Result<Value, Failure> {
    cfg.require_homogeneous()?;
    let domain = cfg.domain()?;
    let sigma = cfg.sigma()?;
    let gamma = cfg.gamma()?;
    let lambdas = cfg.lambdas()?;
    let grid = cfg.phase_grid(&domain)?;
    let spec = &cfg.resolvent_verify;
    let phi = cfg.initial()?;
    let phi_bound = cfg.initial_bound();
    let mut resolvents = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        if !(lambda.re + sigma.floor() > 0.0) {
            return Err(Failure::Config(format!(
                "Re λ = {} must exceed -Σ_floor = {} for the Laplace comparison",
                lambda.re,
                -sigma.floor()
            )));
        }
        resolvents.push(Resolvent::new(&domain, &sigma, gamma, lambda).map_err(setup)?);
    }
    let vel = &grid.velocity;
    let pairs: Vec<(Vec2, f64)> = vel
        .nodes()
        .iter()
        .copied()
        .zip(vel.weights().iter().copied())
        .collect();
    let boundary = domain
        .boundary_quadrature(spec.boundary_resolution)
        .map_err(setup)?;
    let incoming = TraceNodes::new(&boundary, &pairs, TraceTag::Incoming);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = CsvOut::create(
        out,
        "resolvent.csv",
        "resolvent-verify",
        &[
            "lambda_re",
            "lambda_im",
            "x",
            "y",
            "vx",
            "vy",
            "closed_re",
            "closed_im",
            "laplace_re",
            "laplace_im",
            "rel_error",
        ],
    )?;
    let mut report = Vec::new();
    for r in &resolvents {
        let lambda = r.lambda();
        let mut worst: f64 = 0.0;
        for _ in 0..spec.samples {
            let p = grid.point(rng.gen_range(0..grid.len()));
            let closed = r.apply(&phi, p).map_err(compute)?;
            let quad =
                laplace_transform(&phi, phi_bound, &domain, &sigma, gamma, p, lambda, spec.tol)
                    .map_err(compute)?;
            let err = (closed - quad).norm() / quad.norm().max(f64::MIN_POSITIVE);
            worst = worst.max(err);
            let [x, y, vx, vy] = phase_columns(p.x, p.v);
            csv.row([
                num(lambda.re),
                num(lambda.im),
                x,
                y,
                vx,
                vy,
                num(closed.re),
                num(closed.im),
                num(quad.re),
                num(quad.im),
                num(err),
            ])?;
        }
        let residual = if incoming.is_empty() {
            0.0
        } else {
            r.boundary_residual(&phi, &incoming).map_err(compute)?
        };
        report.push(json!({
            "lambda": [lambda.re, lambda.im],
            "max_rel_error": worst,
            "boundary_residual": residual,
            "trace_nodes": incoming.len(),
        }));
    }
    csv.finish()?;
    Ok(json!({ "per_lambda": report }))
}

fn dyson(cfg: &RunConfig, out: &Path, seed: u64) -> Result<Value, Failure> {
    cfg.require_homogeneous()?;
    let domain = cfg.domain()?;
    let sigma = cfg.sigma()?;
    let gamma = cfg.gamma()?;
    let kernel = cfg.kernel()?;
    let dcfg = cfg.dyson()?;
    let grid = cfg.phase_grid(&domain)?;
    kernel.tabulate(&grid).map_err(setup)?;
    let t = cfg.dyson.t;
    let phi = PhaseGridFunction::from_fn(grid.clone(), cfg.initial()?);
    let res = v_apply(&phi, t, dcfg, &kernel, &sigma, gamma).map_err(compute)?;
    let mut csv = CsvOut::create(out, "dyson.csv", "dyson", &grid.csv_header())?;
    for i in 0..grid.len() {
        csv.row(res.value.csv_record(i).into_iter().map(num))?;
    }
    csv.finish()?;
    let r1 = match cfg.dyson.r1_rank {
        Some(rank) => {
            let tail = r1_tail_mass(
                grid.clone(),
                t,
                dcfg.nodes_per_unit_time,
                &kernel,
                &sigma,
                gamma,
                rank,
                seed,
            )
            .map_err(compute)?;
            json!({
                "rank": tail.rank,
                "frobenius2": tail.frobenius2,
                "leading": tail.leading,
                "tail_ratio": tail.tail_ratio,
            })
        }
        None => Value::Null,
    };
    Ok(json!({
        "t": t,
        "nodes": grid.len(),
        "kernel_norm_bound": kernel_norm(&kernel, &grid),
        "term_norms": res.term_norms,
        "duhamel_residual": res.residual,
        "r1": r1,
    }))
}

fn rl_scan(cfg: &RunConfig, out: &Path) -> Result<Value, Failure> {
    if cfg.kernel.is_none() {
        return Err(Failure::Config("rl-scan needs a kernel".into()));
    }
    let domain = cfg.domain()?;
    let sigma = cfg.sigma()?;
    let kernel = cfg.kernel()?;
    let (sweep, parity) = cfg.sweep()?;
    let s = &cfg.rl_scan;
    let res = rl_sweep(
        s.alpha, &s.betas, s.n, parity, &kernel, &kernel, &domain, &sigma, sweep,
    )
    .map_err(compute)?;
    let mut csv = CsvOut::create(
        out,
        "rl_scan.csv",
        "rl-scan",
        &["beta", "estimate", "envelope"],
    )?;
    for ((b, e), env) in res.betas.iter().zip(&res.estimates).zip(&res.envelope) {
        csv.row([num(*b), num(*e), num(*env)])?;
    }
    csv.finish()?;
    Ok(json!({
        "term_index": parity.term_index(s.n),
        "analytic_bound": res.bound,
        "decay_ratio": res.decay_ratio(),
    }))
}

fn selftest(cfg: Option<&RunConfig>, out: &Path, seed: u64) -> Result<(), Failure> {
    let checks = selftest::run(seed).map_err(compute)?;
    let mut csv = CsvOut::create(
        out,
        "selftest.csv",
        "selftest",
        &["check", "samples", "worst", "tolerance", "passed"],
    )?;
    for c in &checks {
        csv.row([
            c.name.to_string(),
            c.samples.to_string(),
            num(c.worst),
            num(c.tolerance),
            c.passed().to_string(),
        ])?;
    }
    csv.finish()?;
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| c.name)
        .collect();
    let results = json!({ "checks": checks.len(), "failed": failed });
    write_json(
        out,
        "run.json",
        &metadata(Command::Selftest, cfg, seed, results),
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "self-test checks failed: {}",
            failed.join(", ")
        )))
    }
}

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use icdd::dns::{porous_lattice, solve_dns, DnsSolution};
use icdd::homogenization::{solve_cell_problem, CellSolution};
use icdd::icdd::{assemble_problem, IcddGeometry, IcddSolution, Physics};
use icdd::mesh::ObstacleLattice;
use icdd::validation::{compare, convergence_slope, delta_sweep, ErrorReport};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::RunConfig;

/// Files produced by a command, held in memory until the run has succeeded.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub iterations: Vec<usize>,
    pub summary: Value,
}

impl Artifacts {
    fn add(&mut self, name: &str, body: Vec<u8>) {
        self.files.push((name.to_string(), body));
    }

    fn add_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> icdd::Result<()>) -> Result<()> {
        let mut buf = vec![];
        f(&mut buf).with_context(|| format!("rendering {name}"))?;
        self.add(name, buf);
        Ok(())
    }
}

fn e(v: f64) -> String {
    format!("{v:.8e}")
}

fn cell_solution(cfg: &RunConfig) -> Result<CellSolution> {
    let s = cfg.check_alignment(cfg.cell_resolution)?;
    Ok(solve_cell_problem(&ObstacleLattice::unit_cell(s)?, cfg.cell_resolution, &cfg.fem)?)
}

fn dns_solution(cfg: &RunConfig, l: f64) -> Result<DnsSolution> {
    let s = cfg.check_alignment(cfg.dns_per_cell)?;
    Ok(solve_dns(&cfg.preset, porous_lattice(&cfg.preset, l, s)?, cfg.dns_per_cell, &cfg.fem)?)
}

fn icdd_solution(cfg: &RunConfig, l: f64, k_hat: f64) -> Result<IcddSolution> {
    let geometry = IcddGeometry {
        domain: cfg.preset.domain,
        y_p: 0.0,
        delta: cfg.delta_star(l)?,
        h: l / cfg.icdd_per_cell as f64,
    };
    let physics = Physics { preset: cfg.preset, permeability: k_hat * l * l };
    Ok(assemble_problem(geometry, physics, &cfg.fem)?.solve(&cfg.krylov)?)
}

/// Explicit value, then the published one, then the cell problem.
fn k_hat(cfg: &RunConfig) -> Result<(f64, &'static str)> {
    if let Some(k) = cfg.k_hat {
        return Ok((k, "config"));
    }
    if let Some(k) = cfg.obstacle.published_k_hat {
        return Ok((k, "published"));
    }
    Ok((cell_solution(cfg)?.k_hat(), "cell problem"))
}

pub fn cell(cfg: &RunConfig) -> Result<Artifacts> {
    let c = cell_solution(cfg)?;
    let k = c.permeability;
    let mut csv = String::from("shape,side,porosity,k_hat,k11,k12,k21,k22,delta_hat\n");
    writeln!(
        csv,
        "square,{},{},{},{},{},{},{},{}",
        e(c.side_fraction),
        e(c.porosity),
        e(c.k_hat()),
        e(k[0][0]),
        e(k[0][1]),
        e(k[1][0]),
        e(k[1][1]),
        e(cfg.obstacle.delta_hat()?)
    )?;
    let mut a = Artifacts::default();
    a.add("cell.csv", csv.into_bytes());
    a.summary = json!({ "porosity": c.porosity, "k_hat": c.k_hat(), "resolution": cfg.cell_resolution });
    Ok(a)
}

pub fn icdd(cfg: &RunConfig) -> Result<Artifacts> {
    let l = cfg.cell_size;
    let (k, source) = k_hat(cfg)?;
    let sol = icdd_solution(cfg, l, k)?;
    let it = &sol.interface;
    let mut a = Artifacts::default();
    a.add_with("icdd.csv", |w| sol.composite.write_csv(w))?;
    a.add_with("icdd.vtk", |w| sol.composite.write_vtk(w))?;
    let mut res = String::from("iteration,residual\n");
    for (i, r) in it.history.iter().enumerate() {
        writeln!(res, "{i},{}", e(*r))?;
    }
    a.add("residuals.csv", res.into_bytes());
    let mut log = String::new();
    writeln!(log, "configuration {} case {} cell size {}", cfg.obstacle.name, cfg.preset.case.number(), e(l))?;
    writeln!(log, "permeability K_hat {} ({source}), K {}", e(k), e(k * l * l))?;
    writeln!(log, "gamma_p y {}", e(sol.composite.y_p))?;
    writeln!(log, "gamma_f y {} (requested {})", e(sol.composite.y_f), e(-cfg.delta_star(l)?))?;
    writeln!(log, "krylov iterations {} residual {}", it.iterations, e(it.residual))?;
    writeln!(log, "matching {} {}", e(sol.matching[0]), e(sol.matching[1]))?;
    writeln!(log, "dual {} {}", e(sol.dual[0]), e(sol.dual[1]))?;
    a.add("icdd.log", log.into_bytes());
    a.iterations.push(it.iterations);
    a.summary = json!({
        "y_f": sol.composite.y_f,
        "y_p": sol.composite.y_p,
        "residual": it.residual,
        "k_hat": k,
        "k_hat_source": source,
    });
    Ok(a)
}

pub fn dns(cfg: &RunConfig) -> Result<Artifacts> {
    let d = dns_solution(cfg, cfg.cell_size)?;
    let mut a = Artifacts::default();
    a.add_with("dns.csv", |w| d.write_csv(w))?;
    a.add_with("dns.vtk", |w| d.write_vtk(w))?;
    a.summary = json!({
        "nodes": d.field.values.len(),
        "mean_speed_y0": d.mean_speed(0.0)?,
    });
    Ok(a)
}

pub fn validate(cfg: &RunConfig) -> Result<Artifacts> {
    if cfg.cell_sizes.len() < 2 {
        bail!("validate needs at least two cell sizes");
    }
    cfg.check_alignment(cfg.dns_per_cell)?;
    let cell = cell_solution(cfg)?;
    let k = cfg.k_hat.unwrap_or(cell.k_hat());
    let runs: Vec<(ErrorReport, usize)> = cfg
        .cell_sizes
        .par_iter()
        .map(|&l| -> Result<_> {
            let d = dns_solution(cfg, l)?;
            let sol = icdd_solution(cfg, l, k)?;
            Ok((compare(&d, &sol.composite, &cell)?, sol.interface.iterations))
        })
        .collect::<Result<_>>()?;
    let name = cfg.obstacle.name;
    let mut errors = String::from("config,cell_size,metric,value\n");
    for (r, _) in &runs {
        for (m, v) in r.metrics() {
            writeln!(errors, "{name},{},{m},{}", e(r.cell_size), e(v))?;
        }
    }
    let h: Vec<f64> = runs.iter().map(|r| r.0.cell_size).collect();
    let mut slopes = String::from("config,metric,slope\n");
    let mut summary = serde_json::Map::new();
    for (i, (m, _)) in runs[0].0.metrics().iter().enumerate() {
        let vals: Vec<f64> = runs.iter().map(|r| r.0.metrics()[i].1).collect();
        let s = convergence_slope(&h, &vals)?;
        writeln!(slopes, "{name},{m},{}", e(s))?;
        summary.insert(format!("slope_{m}"), json!(s));
    }
    let mut a = Artifacts::default();
    a.add("errors.csv", errors.into_bytes());
    a.add("slopes.csv", slopes.into_bytes());
    a.iterations = runs.iter().map(|r| r.1).collect();
    summary.insert("k_hat".into(), json!(k));
    a.summary = Value::Object(summary);
    Ok(a)
}

pub fn sweep(cfg: &RunConfig) -> Result<Artifacts> {
    let l = cfg.cell_size;
    cfg.check_alignment(cfg.dns_per_cell)?;
    let (k, source) = match cfg.k_hat {
        Some(k) => (k, "config"),
        None => (cell_solution(cfg)?.k_hat(), "cell problem"),
    };
    let d = dns_solution(cfg, l)?;
    let star = cfg.delta_star(l)?;
    let h = l / cfg.dns_per_cell as f64;
    let y_ref = cfg.y_ref.unwrap_or(-(star / h).round().max(1.0) * h);
    let deltas: Vec<f64> = cfg.factors.iter().map(|f| f * star).collect();
    let rows = delta_sweep(&d, k * l * l, &deltas, y_ref, &cfg.fem, &cfg.krylov)?;
    let mut csv = String::from("factor,delta,y_f,error,iterations\n");
    for (f, r) in cfg.factors.iter().zip(&rows) {
        writeln!(csv, "{},{},{},{},{}", e(*f), e(r.delta), e(r.y_f), e(r.error), r.iterations)?;
    }
    let best = icdd::validation::sweep_minimizer(&rows).map(|i| cfg.factors[i]);
    let mut a = Artifacts::default();
    a.add("sweep.csv", csv.into_bytes());
    a.iterations = rows.iter().map(|r| r.iterations).collect();
    a.summary = json!({ "delta_star": star, "y_ref": y_ref, "best_factor": best, "k_hat": k, "k_hat_source": source });
    Ok(a)
}

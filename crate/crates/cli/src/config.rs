use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use icdd::fem::FemConfig;
use icdd::homogenization::{delta_hat, delta_star, DEFAULT_CELL_RESOLUTION};
use icdd::linalg::KrylovConfig;
use icdd::presets::{Configuration, ObstacleShape, TestCase, TestCasePreset, CELL_SIZES};
use serde::Deserialize;

/// Keys accepted in each section; anything else is rejected up front.
const KNOWN: [(&str, &[&str]); 5] = [
    ("problem", &["case", "configuration", "side", "k_hat", "cell_size", "cell_sizes"]),
    ("discretization", &["order", "dns_per_cell", "icdd_per_cell", "cell_resolution"]),
    ("solver", &["tol", "max_iter"]),
    ("sweep", &["factors", "y_ref"]),
    ("output", &["dir"]),
];

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub discretization: DiscretizationSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub case: Option<String>,
    pub configuration: Option<String>,
    /// Square obstacle side as a fraction of the cell; overrides the configuration's obstacle.
    pub side: Option<f64>,
    /// Dimensionless permeability; defaults to the published value or the cell problem.
    pub k_hat: Option<f64>,
    pub cell_size: Option<f64>,
    pub cell_sizes: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSection {
    pub order: Option<usize>,
    pub dns_per_cell: Option<usize>,
    pub icdd_per_cell: Option<usize>,
    pub cell_resolution: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub factors: Option<Vec<f64>>,
    pub y_ref: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// Obstacle used by a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub shape: ObstacleShape,
    /// Published permeability, when the obstacle is a table configuration.
    pub published_k_hat: Option<f64>,
    pub name: &'static str,
}

impl Obstacle {
    pub fn porosity(&self) -> f64 {
        self.shape.porosity()
    }

    pub fn square_side(&self) -> Result<f64> {
        match self.shape {
            ObstacleShape::Square(s) => Ok(s),
            ObstacleShape::Circle(r) => {
                bail!(
                    "configuration {} has circular obstacles (r = {r}); only square obstacles can be resolved",
                    self.name
                )
            }
        }
    }

    /// Dimensionless overlap depth from the porosity fit.
    pub fn delta_hat(&self) -> Result<f64> {
        Ok(delta_hat(self.porosity())?)
    }
}

/// Validated run settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub preset: TestCasePreset,
    pub obstacle: Obstacle,
    pub k_hat: Option<f64>,
    pub cell_size: f64,
    pub cell_sizes: Vec<f64>,
    pub fem: FemConfig,
    pub dns_per_cell: usize,
    pub icdd_per_cell: usize,
    pub cell_resolution: usize,
    pub krylov: KrylovConfig,
    pub factors: Vec<f64>,
    pub y_ref: Option<f64>,
    pub out: Option<PathBuf>,
}

/// Dotted paths of keys outside the documented set.
pub fn unknown_keys(table: &toml::Table) -> Vec<String> {
    let mut out = vec![];
    for (section, value) in table {
        match KNOWN.iter().find(|(s, _)| s == section) {
            None => out.push(section.clone()),
            Some((_, keys)) => match value.as_table() {
                Some(t) => {
                    out.extend(t.keys().filter(|k| !keys.contains(&k.as_str())).map(|k| format!("{section}.{k}")))
                }
                None => out.push(format!("{section} (expected a section)")),
            },
        }
    }
    out
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        bail!("{name} must be positive and finite, got {v}")
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let table: toml::Table = text.parse().context("config is not valid TOML")?;
        let unknown = unknown_keys(&table);
        if !unknown.is_empty() {
            bail!("unknown config keys: {}", unknown.join(", "));
        }
        let file: FileConfig = toml::Value::Table(table).try_into().context("invalid config value")?;
        RunConfig::from_file(file)
    }

    pub fn from_file(f: FileConfig) -> Result<RunConfig> {
        let p = f.problem;
        let case: TestCase = p.case.as_deref().unwrap_or("1").parse()?;
        let conf: Option<Configuration> = p.configuration.as_deref().map(str::parse).transpose()?;
        let obstacle = match (p.side, conf) {
            (Some(s), _) => {
                if !(s > 0.0 && s < 1.0) {
                    bail!("problem.side must lie in (0, 1), got {s}");
                }
                Obstacle { shape: ObstacleShape::Square(s), published_k_hat: None, name: "custom" }
            }
            (None, Some(c)) => Obstacle { shape: c.shape, published_k_hat: Some(c.k_hat), name: c.name },
            (None, None) => bail!("set problem.configuration (C1..C4) or problem.side"),
        };
        let k_hat = p.k_hat.map(|k| positive("problem.k_hat", k)).transpose()?;
        let cell_size = positive("problem.cell_size", p.cell_size.unwrap_or(CELL_SIZES[0]))?;
        let cell_sizes = p.cell_sizes.unwrap_or_else(|| CELL_SIZES.to_vec());
        if cell_sizes.is_empty() {
            bail!("problem.cell_sizes is empty");
        }
        for &l in &cell_sizes {
            positive("problem.cell_sizes entry", l)?;
        }

        let d = f.discretization;
        let fem = FemConfig::new(d.order.unwrap_or(1));
        fem.validate()?;
        let nonzero = |name: &str, v: usize| if v == 0 { bail!("{name} must be at least 1") } else { Ok(v) };
        let dns_per_cell = nonzero("discretization.dns_per_cell", d.dns_per_cell.unwrap_or(10))?;
        let icdd_per_cell = nonzero("discretization.icdd_per_cell", d.icdd_per_cell.unwrap_or(10))?;
        let cell_resolution =
            nonzero("discretization.cell_resolution", d.cell_resolution.unwrap_or(DEFAULT_CELL_RESOLUTION))?;

        let krylov = KrylovConfig {
            tol: f.solver.tol.unwrap_or(KrylovConfig::default().tol),
            max_iter: f.solver.max_iter.unwrap_or(KrylovConfig::default().max_iter),
            ..KrylovConfig::default()
        };
        krylov.validate()?;

        let factors = f.sweep.factors.unwrap_or_else(|| vec![0.5, 1.0, 1.5]);
        if factors.is_empty() {
            bail!("sweep.factors is empty");
        }
        for &v in &factors {
            positive("sweep.factors entry", v)?;
        }

        Ok(RunConfig {
            preset: TestCasePreset::new(case),
            obstacle,
            k_hat,
            cell_size,
            cell_sizes,
            fem,
            dns_per_cell,
            icdd_per_cell,
            cell_resolution,
            krylov,
            factors,
            y_ref: f.sweep.y_ref,
            out: f.output.dir,
        })
    }

    /// Dimensional overlap depth at cell size `l`.
    pub fn delta_star(&self, l: f64) -> Result<f64> {
        Ok(delta_star(self.obstacle.porosity(), l)?)
    }

    /// Square obstacles must sit on grid lines of `n` elements per cell.
    pub fn check_alignment(&self, n: usize) -> Result<f64> {
        let s = self.obstacle.square_side()?;
        let cells = s * n as f64;
        let margin = 0.5 * (n as f64 - cells);
        if (cells - cells.round()).abs() > 1e-9 || (margin - margin.round()).abs() > 1e-9 {
            bail!("obstacle side {s} is not aligned with {n} elements per cell (need side * n and (1 - side) * n / 2 integral)");
        }
        Ok(s)
    }
}

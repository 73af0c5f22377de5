//! Obstacle configurations and the three microscale test cases.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{IcddError, Result};
use crate::fem::{BoundaryCondition, BoundarySpec, VectorFn};
use crate::homogenization::{delta_star, permeability_dimensional};
use crate::mesh::{BoundaryTag, RectDomain};

/// Dynamic viscosity of the test fluid, kg/(m s).
pub const VISCOSITY: f64 = 1e-3;
/// Density of the test fluid, kg/m^3.
pub const DENSITY: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObstacleShape {
    /// Side as a fraction of the cell.
    Square(f64),
    /// Radius as a fraction of the cell.
    Circle(f64),
}

impl ObstacleShape {
    /// Fluid area fraction of the unit cell.
    pub fn porosity(&self) -> f64 {
        match *self {
            ObstacleShape::Square(s) => 1.0 - s * s,
            ObstacleShape::Circle(r) => 1.0 - PI * r * r,
        }
    }
}

/// Obstacle configuration with its published dimensionless permeability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Configuration {
    pub name: &'static str,
    pub shape: ObstacleShape,
    pub k_hat: f64,
}

pub const C1: Configuration = Configuration { name: "C1", shape: ObstacleShape::Square(0.8), k_hat: 7.231e-4 };
pub const C2: Configuration = Configuration { name: "C2", shape: ObstacleShape::Square(0.6), k_hat: 6.326e-3 };
pub const C3: Configuration = Configuration { name: "C3", shape: ObstacleShape::Circle(0.4), k_hat: 1.828e-3 };
pub const C4: Configuration = Configuration { name: "C4", shape: ObstacleShape::Circle(0.3), k_hat: 1.098e-2 };

pub const CONFIGURATIONS: [Configuration; 4] = [C1, C2, C3, C4];

/// Cell sizes used with every configuration.
pub const CELL_SIZES: [f64; 3] = [0.1, 0.05, 0.025];

/// Published permeabilities of the unit-cell table: `(shape, K_hat, porosity)`.
pub const CELL_TABLE: [(ObstacleShape, f64, f64); 8] = [
    (ObstacleShape::Circle(0.2), 3.295e-2, 0.874),
    (ObstacleShape::Circle(0.3), 1.098e-2, 0.717),
    (ObstacleShape::Circle(0.4), 1.828e-3, 0.497),
    (ObstacleShape::Circle(0.45), 3.173e-4, 0.364),
    (ObstacleShape::Square(0.4), 2.358e-2, 0.840),
    (ObstacleShape::Square(0.6), 6.326e-3, 0.640),
    (ObstacleShape::Square(0.8), 7.231e-4, 0.360),
    (ObstacleShape::Square(0.9), 8.651e-5, 0.190),
];

impl Configuration {
    pub fn porosity(&self) -> f64 {
        self.shape.porosity()
    }

    /// `K = l^2 K_hat`.
    pub fn permeability(&self, cell_size: f64) -> Result<f64> {
        permeability_dimensional(self.k_hat, cell_size)
    }

    pub fn delta_star(&self, cell_size: f64) -> Result<f64> {
        delta_star(self.porosity(), cell_size)
    }

    /// Square side fraction, when DNS can resolve the obstacle exactly.
    pub fn square_side(&self) -> Option<f64> {
        match self.shape {
            ObstacleShape::Square(s) => Some(s),
            ObstacleShape::Circle(_) => None,
        }
    }
}

impl FromStr for Configuration {
    type Err = IcddError;

    fn from_str(s: &str) -> Result<Self> {
        CONFIGURATIONS
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| IcddError::Parse(format!("unknown configuration `{s}` (expected C1..C4)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestCase {
    /// Lid-driven cavity over the porous bed.
    Cavity,
    /// Flow driven through the bed by a normal stress at the bottom.
    NormalFiltration,
    /// As `NormalFiltration` with an additional oblique body force.
    ObliqueFiltration,
}

impl TestCase {
    pub const ALL: [TestCase; 3] = [TestCase::Cavity, TestCase::NormalFiltration, TestCase::ObliqueFiltration];

    pub fn number(self) -> usize {
        match self {
            TestCase::Cavity => 1,
            TestCase::NormalFiltration => 2,
            TestCase::ObliqueFiltration => 3,
        }
    }
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for TestCase {
    type Err = IcddError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim_start_matches('#') {
            "1" | "cavity" => Ok(TestCase::Cavity),
            "2" | "normal" => Ok(TestCase::NormalFiltration),
            "3" | "oblique" => Ok(TestCase::ObliqueFiltration),
            _ => Err(IcddError::Parse(format!("unknown test case `{s}` (expected 1, 2 or 3)"))),
        }
    }
}

/// Data of one test case. The porous bed fills `y < 0`, the free fluid `y > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestCasePreset {
    pub case: TestCase,
    pub domain: RectDomain,
    pub mu: f64,
    pub rho: f64,
    /// Constant body force.
    pub force: [f64; 2],
    /// Peak lid speed (cavity only).
    pub lid_speed: f64,
    /// Stress prescribed on the bottom (filtration cases).
    pub bottom_traction: [f64; 2],
}

impl TestCasePreset {
    pub fn new(case: TestCase) -> Self {
        let rect = |a, b, c, d| RectDomain { x_min: a, x_max: b, y_min: c, y_max: d };
        let base = TestCasePreset {
            case,
            domain: rect(-0.5, 0.5, -0.5, 1.0),
            mu: VISCOSITY,
            rho: DENSITY,
            force: [0.0, 0.0],
            lid_speed: 0.0,
            bottom_traction: [0.0, 0.0],
        };
        match case {
            TestCase::Cavity => TestCasePreset { lid_speed: 1e-6, ..base },
            TestCase::NormalFiltration => {
                TestCasePreset { domain: rect(-0.25, 0.25, -0.5, 1.0), bottom_traction: [0.0, -1e-7], ..base }
            }
            TestCase::ObliqueFiltration => TestCasePreset {
                domain: rect(-0.5, 0.5, -0.5, 0.5),
                force: [1e-8, -1e-7],
                bottom_traction: [0.0, -1e-7],
                ..base
            },
        }
    }

    /// Multiplies all driving data by `s`.
    pub fn scaled(mut self, s: f64) -> Self {
        self.force = [s * self.force[0], s * self.force[1]];
        self.lid_speed *= s;
        self.bottom_traction = [s * self.bottom_traction[0], s * self.bottom_traction[1]];
        self
    }

    /// Porous part `y < 0` of the domain.
    pub fn porous_region(&self) -> RectDomain {
        RectDomain { y_max: 0.0, ..self.domain }
    }

    pub fn force_fn(&self) -> Option<VectorFn> {
        let f = self.force;
        (f != [0.0, 0.0]).then(|| Arc::new(move |_: f64, _: f64| f) as VectorFn)
    }

    /// Pressure is fixed only up to a constant when every boundary carries
    /// velocity data.
    pub fn null_mean_pressure(&self) -> bool {
        self.case == TestCase::Cavity
    }

    fn top(&self) -> BoundaryCondition {
        match self.case {
            TestCase::Cavity => {
                let u = self.lid_speed;
                BoundaryCondition::velocity(move |x, _| [(1.0 - 4.0 * x * x) * u, 0.0])
            }
            _ => BoundaryCondition::traction([0.0, 0.0]),
        }
    }

    fn bottom(&self) -> BoundaryCondition {
        match self.case {
            TestCase::Cavity => BoundaryCondition::no_slip(),
            _ => BoundaryCondition::traction(self.bottom_traction),
        }
    }

    /// Conditions of the pore-resolved problem.
    pub fn dns_conditions(&self) -> BoundarySpec {
        BoundarySpec::new()
            .with(BoundaryTag::Left, BoundaryCondition::no_slip())
            .with(BoundaryTag::Right, BoundaryCondition::no_slip())
            .with(BoundaryTag::Top, self.top())
            .with(BoundaryTag::Bottom, self.bottom())
            .with(BoundaryTag::Obstacle, BoundaryCondition::no_slip())
    }

    /// Conditions of the Stokes subdomain, whose bottom is the interface.
    pub fn stokes_conditions(&self) -> BoundarySpec {
        BoundarySpec::new()
            .with(BoundaryTag::Left, BoundaryCondition::no_slip())
            .with(BoundaryTag::Right, BoundaryCondition::no_slip())
            .with(BoundaryTag::Top, self.top())
            .with(BoundaryTag::Bottom, BoundaryCondition::Interface)
    }

    /// Conditions of the Darcy subdomain, whose top is the interface. Walls
    /// become impermeable; stresses become pressure data.
    pub fn darcy_conditions(&self) -> BoundarySpec {
        BoundarySpec::new()
            .with(BoundaryTag::Left, BoundaryCondition::Impermeable)
            .with(BoundaryTag::Right, BoundaryCondition::Impermeable)
            .with(BoundaryTag::Top, BoundaryCondition::Interface)
            .with(BoundaryTag::Bottom, self.bottom())
    }
}

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{IcddError, Result};
use crate::mesh::{BoundaryTag, StructuredMesh};

pub type VectorFn = Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryCondition {
    /// Prescribed velocity.
    Velocity(VectorFn),
    /// Prescribed normal stress `(mu grad u - p I) n`.
    Traction(VectorFn),
    /// `u . n = 0`.
    Impermeable,
    /// Prescribed pressure.
    Pressure(ScalarFn),
    /// Data supplied through the interface unknowns.
    Interface,
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BoundaryCondition::Velocity(_) => "Velocity",
            BoundaryCondition::Traction(_) => "Traction",
            BoundaryCondition::Impermeable => "Impermeable",
            BoundaryCondition::Pressure(_) => "Pressure",
            BoundaryCondition::Interface => "Interface",
        };
        f.write_str(s)
    }
}

impl BoundaryCondition {
    pub fn no_slip() -> Self {
        BoundaryCondition::Velocity(Arc::new(|_, _| [0.0, 0.0]))
    }

    pub fn velocity(f: impl Fn(f64, f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        BoundaryCondition::Velocity(Arc::new(f))
    }

    pub fn traction(t: [f64; 2]) -> Self {
        BoundaryCondition::Traction(Arc::new(move |_, _| t))
    }

    pub fn pressure(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        BoundaryCondition::Pressure(Arc::new(f))
    }
}

/// One condition per boundary tag.
#[derive(Debug, Clone, Default)]
pub struct BoundarySpec {
    conditions: BTreeMap<BoundaryTag, BoundaryCondition>,
}

impl BoundarySpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, tag: BoundaryTag, cond: BoundaryCondition) -> Self {
        self.conditions.insert(tag, cond);
        self
    }

    pub fn set(&mut self, tag: BoundaryTag, cond: BoundaryCondition) {
        self.conditions.insert(tag, cond);
    }

    pub fn get(&self, tag: BoundaryTag) -> Option<&BoundaryCondition> {
        self.conditions.get(&tag)
    }

    pub fn iter(&self) -> impl Iterator<Item = (BoundaryTag, &BoundaryCondition)> {
        self.conditions.iter().map(|(t, c)| (*t, c))
    }

    /// Every tag present on the mesh must carry a condition.
    pub fn check(&self, mesh: &StructuredMesh) -> Result<()> {
        for e in mesh.boundary_edges() {
            if !self.conditions.contains_key(&e.tag) {
                return Err(IcddError::UnmatchedBoundary(e.tag.name().into()));
            }
        }
        Ok(())
    }
}

//! A loaded habitat together with its grids, kernel and cached attractors.

use std::sync::OnceLock;

use thiserror::Error;

use crate::config::{Config, GridSettings, RunSettings};
use crate::discretize::{self, CellGrid, DiscretizeError, SampledKernel, WrappedKernel};
use crate::evolve::{self, CellField, CoefTable, PeriodicOrbit, Species, TimeGrid};
use crate::habitat::{Coef, CoefficientBounds, HabitatError, HabitatSpec};
use crate::spectral::{self, LinearProblem, SpectralError, SpectralSettings};

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Habitat(#[from] HabitatError),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
}

#[derive(Debug, Clone)]
pub struct Orbits {
    pub ustar: PeriodicOrbit,
    pub vstar: PeriodicOrbit,
}

#[derive(Debug)]
pub struct Lab {
    pub habitat: HabitatSpec,
    pub grid: GridSettings,
    pub run: RunSettings,
    pub cell: CellGrid,
    /// Time grid of the linear period maps (`grid.nt` steps).
    pub spectral_time: TimeGrid,
    /// Euler grid of the nonlinear dynamics, refined to respect the step cap.
    pub evolve_time: TimeGrid,
    pub kernel: SampledKernel,
    pub wrapped: WrappedKernel,
    /// Coefficients on the Euler grid.
    pub coefs: CoefTable,
    pub bounds: CoefficientBounds,
    pub spectral: SpectralSettings,
    orbits: OnceLock<Orbits>,
}

/// A coefficient expression sampled exactly at cell nodes.
pub struct ExprField<'a> {
    habitat: &'a HabitatSpec,
    coef: Coef,
    cell: CellGrid,
}

impl CellField for ExprField<'_> {
    fn value(&self, t: f64, j: usize) -> f64 {
        self.habitat
            .eval(self.coef, t, self.cell.x(j))
            .unwrap_or(f64::NAN)
    }
}

impl Lab {
    pub fn new(config: Config) -> Result<Self, LabError> {
        Self::from_parts(config.habitat, config.grid, config.run)
    }

    pub fn from_parts(habitat: HabitatSpec, grid: GridSettings, run: RunSettings) -> Result<Self, LabError> {
        let cell = CellGrid::new(habitat.period_x, grid.nx)?;
        let bounds = habitat.bounds(grid.check_nt, grid.check_nx)?;
        let spectral_time = TimeGrid::new(habitat.period_t, grid.nt);
        let evolve_time = TimeGrid::new(
            habitat.period_t,
            evolve::stable_nt(habitat.period_t, &bounds, grid.nt),
        );
        let kernel = discretize::sample_kernel(habitat.kernel, cell.dx)?;
        let wrapped = discretize::wrap_to_cell(&kernel, &cell);
        let coefs = CoefTable::build(&habitat, &evolve_time, &cell)?;
        Ok(Lab {
            habitat,
            grid,
            run,
            cell,
            spectral_time,
            evolve_time,
            kernel,
            wrapped,
            coefs,
            bounds,
            spectral: SpectralSettings::default(),
            orbits: OnceLock::new(),
        })
    }

    pub fn coef_field(&self, coef: Coef) -> ExprField<'_> {
        ExprField {
            habitat: &self.habitat,
            coef,
            cell: self.cell,
        }
    }

    pub fn growth_problem(&self, a: &dyn CellField) -> LinearProblem {
        LinearProblem::new(&self.kernel, self.cell, self.spectral_time, a)
    }

    /// `u*` and `v*`, computed on first use.
    pub fn orbits(&self) -> Result<&Orbits, SpectralError> {
        if let Some(o) = self.orbits.get() {
            return Ok(o);
        }
        let ustar = spectral::periodic_attractor(self, Species::One)?;
        let vstar = spectral::periodic_attractor(self, Species::Two)?;
        let _ = self.orbits.set(Orbits { ustar, vstar });
        Ok(self.orbits.get().expect("just set"))
    }

    /// `a1 - c1 v*`: growth of species 1 invading the `v*` resident.
    pub fn invasion_field<'a>(&'a self, o: &'a Orbits) -> impl CellField + 'a {
        let (a1, c1) = (self.coef_field(Coef::A1), self.coef_field(Coef::C1));
        move |t: f64, j: usize| a1.value(t, j) - c1.value(t, j) * o.vstar.interpolate(t, j)
    }

    /// `a2 - b2 u*`: growth of species 2 against the `u*` resident.
    pub fn resident_field<'a>(&'a self, o: &'a Orbits) -> impl CellField + 'a {
        let (a2, b2) = (self.coef_field(Coef::A2), self.coef_field(Coef::B2));
        move |t: f64, j: usize| a2.value(t, j) - b2.value(t, j) * o.ustar.interpolate(t, j)
    }
}

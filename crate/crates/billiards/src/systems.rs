//! Billiards as `Z^d` extensions: the collision map on boundary
//! coordinates and the time-`t` map of the flow.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::Serialize;
use zmix_core::error::SystemError;
use zmix_core::{CocycleSystem, DimSplit, ExtendedState, LatticeVector};

use crate::billiard::Billiard;
use crate::flight::BoundaryPoint;
use crate::measure::{free_area, CellMeasure};

fn jump(billiard: &Billiard) -> Option<i64> {
    billiard
        .config()
        .free_path_bound()
        .map(|b| b.ceil() as i64 + 1)
}

/// Collision map of a billiard. The boundary measure of a cell is
/// `cos(phi) |v| dr dphi`, reported relative to cell zero. Under a
/// thermostat the invariant measure is not explicit and `nu` is used as
/// the initial law.
#[derive(Debug)]
pub struct LorentzSystem {
    billiard: Billiard,
    cell0: CellMeasure,
    cache: Mutex<HashMap<[i64; 2], Arc<CellMeasure>>>,
}

impl LorentzSystem {
    pub fn new(billiard: Billiard) -> Self {
        let cell0 = CellMeasure::new(billiard.config(), billiard.field(), [0, 0]);
        LorentzSystem {
            billiard,
            cell0,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn billiard(&self) -> &Billiard {
        &self.billiard
    }

    fn cell(&self, translate: [i64; 2]) -> Arc<CellMeasure> {
        if let Some(m) = self.cache.lock().expect("cache lock").get(&translate) {
            return m.clone();
        }
        let m = Arc::new(CellMeasure::new(
            self.billiard.config(),
            self.billiard.field(),
            translate,
        ));
        self.cache
            .lock()
            .expect("cache lock")
            .insert(translate, m.clone());
        m
    }

    /// The boundary measure of cell zero.
    pub fn cell_zero(&self) -> &CellMeasure {
        &self.cell0
    }
}

impl CocycleSystem for LorentzSystem {
    type Base = BoundaryPoint;

    fn split(&self) -> DimSplit {
        self.billiard.config().geometry().split()
    }

    fn step(
        &self,
        x: &ExtendedState<BoundaryPoint>,
    ) -> Result<ExtendedState<BoundaryPoint>, SystemError> {
        let e = self.billiard.collision_map(x)?;
        if e.grazing {
            return Err(SystemError::Grazing);
        }
        Ok(e.boundary)
    }

    fn sample_base<R: Rng + ?Sized>(&self, rng: &mut R) -> BoundaryPoint {
        let cell = self.billiard.config().geometry().cell_of([0, 0]);
        self.cell0
            .sample(self.billiard.field(), cell, rng)
            .expect("cell zero carries boundary")
            .base
    }

    fn sample_base_in_cell<R: Rng + ?Sized>(
        &self,
        cell: &LatticeVector,
        rng: &mut R,
    ) -> Option<BoundaryPoint> {
        let t = self.billiard.config().geometry().translate_of(cell);
        self.cell(t)
            .sample(self.billiard.field(), *cell, rng)
            .map(|x| x.base)
    }

    fn cell_measure(&self, cell: &LatticeVector) -> f64 {
        let t = self.billiard.config().geometry().translate_of(cell);
        self.cell(t).mass / self.cell0.mass
    }

    fn base_metric(&self, a: &BoundaryPoint, b: &BoundaryPoint) -> f64 {
        if a.id != b.id {
            return f64::INFINITY;
        }
        (a.r - b.r).abs() + (a.phi - b.phi).abs()
    }

    fn jump_bound(&self) -> Option<i64> {
        jump(&self.billiard)
    }
}

/// Phase point of the flow: position relative to the cell's lattice
/// translate and velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowPoint {
    pub q: [f64; 2],
    pub v: [f64; 2],
}

/// Time-`dt` map of a billiard flow; Liouville measure `dq dtheta` on the
/// energy surface.
#[derive(Debug)]
pub struct BilliardFlow {
    billiard: Billiard,
    dt: f64,
    area0: f64,
}

impl BilliardFlow {
    pub fn new(billiard: Billiard, dt: f64) -> zmix_core::error::Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(zmix_core::Error::Argument(format!(
                "flow time step {dt} must be positive"
            )));
        }
        let area0 = free_area(billiard.config(), [0, 0]);
        Ok(BilliardFlow {
            billiard,
            dt,
            area0,
        })
    }

    pub fn billiard(&self) -> &Billiard {
        &self.billiard
    }

    pub fn time_step(&self) -> f64 {
        self.dt
    }

    fn absolute(&self, x: &ExtendedState<FlowPoint>) -> [f64; 2] {
        let t = self.billiard.config().geometry().translate_of(&x.cell);
        [x.base.q[0] + t[0] as f64, x.base.q[1] + t[1] as f64]
    }

    fn relative(&self, q: [f64; 2], v: [f64; 2]) -> ExtendedState<FlowPoint> {
        let g = self.billiard.config().geometry();
        let cell = g.cell_containing(q);
        let t = g.translate_of(&cell);
        ExtendedState::new(
            FlowPoint {
                q: [q[0] - t[0] as f64, q[1] - t[1] as f64],
                v,
            },
            cell,
        )
    }
}

impl CocycleSystem for BilliardFlow {
    type Base = FlowPoint;

    fn split(&self) -> DimSplit {
        self.billiard.config().geometry().split()
    }

    fn step(&self, x: &ExtendedState<FlowPoint>) -> Result<ExtendedState<FlowPoint>, SystemError> {
        self.flow(x, self.dt)
    }

    fn flow(
        &self,
        x: &ExtendedState<FlowPoint>,
        t: f64,
    ) -> Result<ExtendedState<FlowPoint>, SystemError> {
        let out = self.billiard.flow(self.absolute(x), x.base.v, t)?;
        if out.events.iter().any(|e| e.grazing) {
            return Err(SystemError::Grazing);
        }
        Ok(self.relative(out.q, out.v))
    }

    fn sample_base<R: Rng + ?Sized>(&self, rng: &mut R) -> FlowPoint {
        let zero = self.billiard.config().geometry().cell_of([0, 0]);
        loop {
            if let Some(p) = self.sample_base_in_cell(&zero, rng) {
                return p;
            }
        }
    }

    fn sample_base_in_cell<R: Rng + ?Sized>(
        &self,
        cell: &LatticeVector,
        rng: &mut R,
    ) -> Option<FlowPoint> {
        let t = self.billiard.config().geometry().translate_of(cell);
        let q = [rng.random::<f64>(), rng.random::<f64>()];
        let abs = [q[0] + t[0] as f64, q[1] + t[1] as f64];
        if !self.billiard.config().is_free(abs) {
            return None;
        }
        let a = rng.random::<f64>() * std::f64::consts::TAU;
        let s = self.billiard.speed_at(abs).ok()?;
        Some(FlowPoint {
            q,
            v: [s * a.cos(), s * a.sin()],
        })
    }

    fn cell_measure(&self, cell: &LatticeVector) -> f64 {
        let t = self.billiard.config().geometry().translate_of(cell);
        free_area(self.billiard.config(), t) / self.area0
    }

    fn base_metric(&self, a: &FlowPoint, b: &FlowPoint) -> f64 {
        (a.q[0] - b.q[0]).hypot(a.q[1] - b.q[1]) + (a.v[0] - b.v[0]).hypot(a.v[1] - b.v[1])
    }

    fn jump_bound(&self) -> Option<i64> {
        // a unit-speed particle crosses at most ceil(dt) + 1 cells per axis
        self.billiard
            .field()
            .is_free()
            .then(|| self.dt.ceil() as i64 + 1)
    }
}

//! A scatterer configuration together with a field: collision map, lifts
//! of boundary points and the continuous-time flow.

use std::sync::Arc;

use zmix_core::error::{Result, SystemError};
use zmix_core::{ExtendedState, LatticeVector};

use crate::field::{FieldFlight, FieldSpec};
use crate::flight::{
    boundary_coords, dot, flight_limit, free_flight, make_event, norm, BoundaryCoord,
    CollisionEvent, Flight,
};
use crate::geometry::{ScattererConfig, ScattererRef};

/// Distance a departure point is pushed off its scatterer before a field
/// flight, so that the impact search does not rediscover the departure.
const DEPARTURE_OFFSET: f64 = 1e-11;

#[derive(Clone, Debug)]
pub struct Billiard {
    config: Arc<ScattererConfig>,
    field: FieldSpec,
    accel_bound: f64,
    limit: f64,
}

/// Result of flowing for a fixed time.
#[derive(Clone, Debug)]
pub struct FlowOutcome {
    /// Absolute position.
    pub q: [f64; 2],
    pub v: [f64; 2],
    pub events: Vec<CollisionEvent>,
}

impl Billiard {
    pub fn new(config: ScattererConfig, field: FieldSpec) -> Result<Self> {
        Self::shared(Arc::new(config), field)
    }

    pub fn shared(config: Arc<ScattererConfig>, field: FieldSpec) -> Result<Self> {
        let accel_bound = field.validate(&config)?;
        let limit = flight_limit(&config);
        Ok(Billiard {
            config,
            field,
            accel_bound,
            limit,
        })
    }

    pub fn free(config: ScattererConfig) -> Self {
        Self::new(config, FieldSpec::None).expect("free motion always validates")
    }

    pub fn config(&self) -> &ScattererConfig {
        &self.config
    }

    pub fn config_arc(&self) -> Arc<ScattererConfig> {
        self.config.clone()
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    /// Search limit on the path length of one flight.
    pub fn limit(&self) -> f64 {
        self.limit
    }

    /// Speed of a trajectory at the absolute point `q` (1 without potential).
    pub fn speed_at(&self, q: [f64; 2]) -> std::result::Result<f64, SystemError> {
        self.field.speed_at(q)
    }

    /// Flight from the local point `q` in the frame at `origin`.
    fn fly(
        &self,
        origin: [i64; 2],
        q: [f64; 2],
        v: [f64; 2],
        depart: Option<ScattererRef>,
        t_stop: Option<f64>,
    ) -> std::result::Result<Flight, SystemError> {
        if self.field.is_free() {
            return free_flight(&self.config, origin, q, v, depart, t_stop, self.limit);
        }
        let (mut q, mut v) = (q, v);
        if let Some(s) = depart {
            let disk = self.config.local_disk(s, origin);
            let d = [q[0] - disk.center[0], q[1] - disk.center[1]];
            let l = norm(d);
            let want = disk.radius + DEPARTURE_OFFSET;
            if l < want {
                q = [
                    disk.center[0] + d[0] * want / l,
                    disk.center[1] + d[1] * want / l,
                ];
                if self.field.energy().is_some() {
                    let abs = [q[0] + origin[0] as f64, q[1] + origin[1] as f64];
                    let k = self.field.speed_at(abs)? / norm(v);
                    v = [v[0] * k, v[1] * k];
                }
            }
        }
        FieldFlight {
            config: &self.config,
            field: &self.field,
            accel_bound: self.accel_bound,
            limit: self.limit,
        }
        .run(origin, q, v, t_stop)
    }

    fn check_velocity(&self, q: [f64; 2], v: [f64; 2]) -> std::result::Result<(), SystemError> {
        let speed = norm(v);
        let want = match &self.field {
            FieldSpec::None => Some(1.0),
            FieldSpec::Thermostat { .. } => None,
            _ => Some(self.field.speed_at(q)?),
        };
        let ok = match want {
            Some(w) => (speed - w).abs() <= 1e-8 * w.max(1.0),
            None => speed > 0.0 && speed.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(SystemError::Domain {
                coordinate: "velocity".into(),
                detail: format!("speed {speed} is off the energy surface ({want:?})"),
            })
        }
    }

    fn check_point(&self, q: [f64; 2]) -> std::result::Result<(), SystemError> {
        if self.config.is_free(q) {
            Ok(())
        } else {
            Err(SystemError::Domain {
                coordinate: "position".into(),
                detail: format!("{q:?} lies inside a scatterer or beyond a wall"),
            })
        }
    }

    /// First collision of the trajectory through the absolute free point
    /// `q` with velocity `v`.
    pub fn next_collision(
        &self,
        q: [f64; 2],
        v: [f64; 2],
    ) -> std::result::Result<CollisionEvent, SystemError> {
        self.check_point(q)?;
        self.check_velocity(q, v)?;
        let origin = [q[0].floor() as i64, q[1].floor() as i64];
        let local = [q[0] - origin[0] as f64, q[1] - origin[1] as f64];
        let start = self.config.geometry().cell_containing(q);
        match self.fly(origin, local, v, None, None)? {
            Flight::Hit {
                t,
                q: hit,
                v,
                scatterer,
                walls,
            } => Ok(make_event(
                &self.config,
                origin,
                t,
                hit,
                v,
                scatterer,
                walls,
                start,
            )),
            Flight::Stopped { .. } => unreachable!("no stop time was given"),
        }
    }

    /// Phase point leaving the boundary point `x`: scatterer, absolute
    /// position and outgoing velocity.
    pub fn lift(
        &self,
        x: &BoundaryCoord,
    ) -> std::result::Result<(ScattererRef, [f64; 2], [f64; 2]), SystemError> {
        let geometry = self.config.geometry();
        if !geometry.split().contains(&x.cell) {
            return Err(SystemError::Domain {
                coordinate: "cell".into(),
                detail: format!("{} is outside the lattice", x.cell),
            });
        }
        let s = ScattererRef {
            id: x.base.id,
            translate: geometry.translate_of(&x.cell),
        };
        if !self.config.exists(s) {
            return Err(SystemError::Domain {
                coordinate: "id".into(),
                detail: format!("no scatterer {} in cell {}", x.base.id, x.cell),
            });
        }
        let disk = self.config.disk(s);
        let p = x.base;
        if !(p.r >= 0.0 && p.r < disk.perimeter() && p.phi.abs() <= std::f64::consts::FRAC_PI_2) {
            return Err(SystemError::Domain {
                coordinate: "boundary".into(),
                detail: format!("(r, phi) = ({}, {}) out of range", p.r, p.phi),
            });
        }
        let theta = p.r / disk.radius;
        let q = disk.point(theta);
        if !geometry.contains(q) {
            return Err(SystemError::Domain {
                coordinate: "r".into(),
                detail: "boundary point lies beyond a wall".into(),
            });
        }
        let n = [theta.cos(), theta.sin()];
        let t = [-n[1], n[0]];
        let speed = match self.field.energy() {
            Some(_) => self.field.speed_at(q)?,
            None => 1.0,
        };
        let (c, sn) = (p.phi.cos(), p.phi.sin());
        let v = [
            speed * (c * n[0] + sn * t[0]),
            speed * (c * n[1] + sn * t[1]),
        ];
        Ok((s, q, v))
    }

    /// Collision map on the boundary, with the full event.
    pub fn collision_map(
        &self,
        x: &BoundaryCoord,
    ) -> std::result::Result<CollisionEvent, SystemError> {
        let (s, q, v) = self.lift(x)?;
        let origin = s.translate;
        let local = [q[0] - origin[0] as f64, q[1] - origin[1] as f64];
        match self.fly(origin, local, v, Some(s), None)? {
            Flight::Hit {
                t,
                q: hit,
                v,
                scatterer,
                walls,
            } => Ok(make_event(
                &self.config,
                origin,
                t,
                hit,
                v,
                scatterer,
                walls,
                x.cell.clone(),
            )),
            Flight::Stopped { .. } => unreachable!("no stop time was given"),
        }
    }

    /// Flow the absolute phase point `(q, v)` for time `t >= 0`, recording
    /// every collision on the way.
    pub fn flow(
        &self,
        q: [f64; 2],
        v: [f64; 2],
        t: f64,
    ) -> std::result::Result<FlowOutcome, SystemError> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(SystemError::Domain {
                coordinate: "time".into(),
                detail: format!("t = {t}"),
            });
        }
        self.check_point(q)?;
        self.check_velocity(q, v)?;
        let (mut q, mut v) = (q, v);
        let mut depart: Option<ScattererRef> = None;
        let mut left = t;
        let mut events = Vec::new();
        loop {
            let origin = [q[0].floor() as i64, q[1].floor() as i64];
            let local = [q[0] - origin[0] as f64, q[1] - origin[1] as f64];
            let start = self.config.geometry().cell_containing(q);
            match self.fly(origin, local, v, depart, Some(left))? {
                Flight::Stopped {
                    q: end, v: vend, ..
                } => {
                    return Ok(FlowOutcome {
                        q: [end[0] + origin[0] as f64, end[1] + origin[1] as f64],
                        v: vend,
                        events,
                    });
                }
                Flight::Hit {
                    t: dt,
                    q: hit,
                    v: vin,
                    scatterer,
                    walls,
                } => {
                    let e = make_event(&self.config, origin, dt, hit, vin, scatterer, walls, start);
                    left -= dt;
                    q = e.q;
                    v = e.v_post;
                    depart = Some(scatterer);
                    events.push(e);
                    if events.len() as u64 > crate::field::MAX_STEPS {
                        return Err(SystemError::Trapped {
                            events: events.len() as u64,
                        });
                    }
                }
            }
        }
    }

    /// Boundary coordinates of an outgoing phase point on scatterer `s`.
    pub fn project(&self, s: ScattererRef, q: [f64; 2], v: [f64; 2]) -> BoundaryCoord {
        let disk = self.config.disk(s);
        let d = [q[0] - disk.center[0], q[1] - disk.center[1]];
        let l = norm(d);
        let n = [d[0] / l, d[1] / l];
        debug_assert!(dot(v, n) >= -1e-9 * norm(v));
        let (r, phi) = boundary_coords(n, disk.radius, v);
        let cell: LatticeVector = self.config.geometry().cell_of(s.translate);
        ExtendedState::new(crate::flight::BoundaryPoint { id: s.id, r, phi }, cell)
    }
}

/// First collision from a free point under a field.
pub fn next_collision_field(
    config: &ScattererConfig,
    field: &FieldSpec,
    q: [f64; 2],
    v: [f64; 2],
) -> Result<CollisionEvent> {
    let b = Billiard::new(config.clone(), field.clone())?;
    Ok(b.next_collision(q, v)?)
}

/// One application of the collision map with free motion.
pub fn collision_map(
    config: &ScattererConfig,
    x: &BoundaryCoord,
) -> Result<(BoundaryCoord, CollisionEvent)> {
    let b = Billiard::free(config.clone());
    let e = b.collision_map(x)?;
    Ok((e.boundary.clone(), e))
}

/// Free billiard flow for time `t`.
pub fn billiard_flow(
    config: &ScattererConfig,
    q: [f64; 2],
    v: [f64; 2],
    t: f64,
) -> Result<FlowOutcome> {
    Ok(Billiard::free(config.clone()).flow(q, v, t)?)
}

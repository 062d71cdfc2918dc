//! Trajectory dumps.

use zmix_core::error::SystemError;
use zmix_core::report::{fmt_f64, CsvTable};

use crate::billiard::Billiard;
use crate::flight::BoundaryCoord;

/// Run `n` collisions from `x` and tabulate
/// `(event, cell_x, cell_y, r, phi, flight_time)`. The initial state is
/// row 0 with flight time 0. Cells of strip geometries have `cell_y = 0`.
pub fn trajectory_table(
    billiard: &Billiard,
    x: &BoundaryCoord,
    n: u64,
) -> Result<CsvTable, SystemError> {
    let mut t = CsvTable::new(&["event", "cell_x", "cell_y", "r", "phi", "flight_time"]);
    let g = billiard.config().geometry();
    let row = |k: u64, x: &BoundaryCoord, time: f64| {
        let tr = g.translate_of(&x.cell);
        vec![
            k.to_string(),
            tr[0].to_string(),
            tr[1].to_string(),
            fmt_f64(x.base.r),
            fmt_f64(x.base.phi),
            fmt_f64(time),
        ]
    };
    t.push(row(0, x, 0.0));
    let mut s = x.clone();
    for k in 1..=n {
        let e = billiard.collision_map(&s)?;
        s = e.boundary;
        t.push(row(k, &s, e.time));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flight::BoundaryPoint;
    use crate::geometry::{reference_spec, ScattererConfig};
    use zmix_core::report::CsvTable;
    use zmix_core::{ExtendedState, LatticeVector};

    #[test]
    fn dump_roundtrips_through_csv() {
        let b = Billiard::free(ScattererConfig::new(reference_spec()).unwrap());
        let x = ExtendedState::new(
            BoundaryPoint {
                id: 1,
                r: 0.2,
                phi: 0.3,
            },
            LatticeVector::new(&[2, -1]),
        );
        let t = trajectory_table(&b, &x, 20).unwrap();
        let back = CsvTable::parse(&t.render()).unwrap();
        assert_eq!(back, t);
        assert_eq!(t.rows.len(), 21);
        assert_eq!(t.rows[0][1..3], ["2".to_string(), "-1".to_string()]);
        let e = b.collision_map(&x).unwrap();
        assert_eq!(t.rows[1][5], fmt_f64(e.time));
    }
}

//! Piecewise-quadratic transfer of coarse trajectories onto a fine time grid.
//!
//! A fine time in coarse interval `[t~(m-1), t~m)` (the last one closed) takes
//! the Lagrange parabola through knots `m-2, m-1, m`; the first interval reuses
//! the parabola through knots `0, 1, 2`.

use crate::error::{NirbError, Result};
use crate::integrators::{FieldTrajectory, TimeGrid};

/// Knot indices and Lagrange weights for fine time index `n`.
pub fn stencil(coarse: &TimeGrid, fine: &TimeGrid, n: usize) -> ([usize; 3], [f64; 3]) {
    let big_m = coarse.steps;
    let big_n = fine.steps;
    // position in coarse-step units, exact whenever the grids share a knot
    let num = n as u128 * big_m as u128;
    let s = num as f64 / big_n as f64;
    let floor = (num / big_n as u128) as usize;
    let m = (floor + 1).min(big_m);
    let first = if m <= 1 { 0 } else { m - 2 };
    let knots = [first, first + 1, first + 2];
    let x = knots.map(|k| k as f64);
    let w = [
        (s - x[1]) * (s - x[2]) / ((x[0] - x[1]) * (x[0] - x[2])),
        (s - x[0]) * (s - x[2]) / ((x[1] - x[0]) * (x[1] - x[2])),
        (s - x[0]) * (s - x[1]) / ((x[2] - x[0]) * (x[2] - x[1])),
    ];
    (knots, w)
}

pub fn check_grids(coarse: &TimeGrid, fine: &TimeGrid) -> Result<()> {
    if coarse.steps < 2 {
        return Err(NirbError::InvalidArgument(format!(
            "quadratic interpolation needs at least 2 coarse steps, got {}",
            coarse.steps
        )));
    }
    if !coarse.same_window(fine) {
        return Err(NirbError::InvalidArgument(format!(
            "fine window [{}, {}] differs from coarse window [{}, {}]",
            fine.t0, fine.t_end, coarse.t0, coarse.t_end
        )));
    }
    Ok(())
}

pub fn quadratic_time_interp(coarse: &FieldTrajectory, fine_grid: &TimeGrid) -> Result<FieldTrajectory> {
    let cg = coarse.grid();
    check_grids(cg, fine_grid)?;
    let rows = (0..fine_grid.len())
        .map(|n| {
            let (k, w) = stencil(cg, fine_grid, n);
            let (a, b, c) = (coarse.row(k[0]), coarse.row(k[1]), coarse.row(k[2]));
            (0..coarse.n_nodes())
                .map(|i| w[0] * a[i] + w[1] * b[i] + w[2] * c[i])
                .collect()
        })
        .collect();
    FieldTrajectory::new(*fine_grid, rows, coarse.param().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_traj(grid: TimeGrid, f: impl Fn(f64) -> f64) -> FieldTrajectory {
        let rows = (0..grid.len()).map(|m| vec![f(grid.time(m)), 2.0 * f(grid.time(m))]).collect();
        FieldTrajectory::new(grid, rows, vec![]).unwrap()
    }

    #[test]
    fn reproduces_quadratics_and_constants() {
        let cg = TimeGrid::new(1.0, 2.0, 5).unwrap();
        let fg = TimeGrid::new(1.0, 2.0, 17).unwrap();
        let out = quadratic_time_interp(&scalar_traj(cg, |t| t * t), &fg).unwrap();
        for n in 0..fg.len() {
            let t = fg.time(n);
            assert!((out.row(n)[0] - t * t).abs() <= 1e-12);
        }
        let out = quadratic_time_interp(&scalar_traj(cg, |_| 4.0), &fg).unwrap();
        assert!(out.rows().iter().all(|r| (r[0] - 4.0).abs() < 1e-13));
    }

    #[test]
    fn knots_are_reproduced() {
        let cg = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let fg = TimeGrid::new(0.0, 1.0, 8).unwrap();
        let coarse = scalar_traj(cg, |t| (5.0 * t).sin());
        let out = quadratic_time_interp(&coarse, &fg).unwrap();
        for m in 0..=4 {
            assert_eq!(out.row(2 * m), coarse.row(m));
        }
    }

    #[test]
    fn first_interval_uses_first_parabola() {
        let cg = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let fg = TimeGrid::new(0.0, 1.0, 8).unwrap();
        let (k, _) = stencil(&cg, &fg, 1);
        assert_eq!(k, [0, 1, 2]);
        let (k, _) = stencil(&cg, &fg, 3);
        assert_eq!(k, [0, 1, 2]);
        let (k, _) = stencil(&cg, &fg, 5);
        assert_eq!(k, [1, 2, 3]);
        let (k, _) = stencil(&cg, &fg, 8);
        assert_eq!(k, [2, 3, 4]);
    }

    #[test]
    fn rejects_bad_grids() {
        let c1 = TimeGrid::new(0.0, 1.0, 1).unwrap();
        let f = TimeGrid::new(0.0, 1.0, 4).unwrap();
        assert!(quadratic_time_interp(&scalar_traj(c1, |t| t), &f).is_err());
        let c = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let f2 = TimeGrid::new(0.0, 1.5, 4).unwrap();
        assert!(quadratic_time_interp(&scalar_traj(c, |t| t), &f2).is_err());
    }
}

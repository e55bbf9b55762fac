use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{build_hamiltonian, expm_hermitian, filtered_propagator, loglog_slope, matrix_power, operator_norm, SpinOperator, C64};
use crate::error::{invalid, Result};
use crate::filter::{decouple_distance_expr, normalized_filter_vector, FilterExpr};
use crate::lp::{Axis, CouplingProfile};
use crate::pulse::materialize_compressed;

/// Native X-type couplings and one filter per target axis.
#[derive(Debug, Clone, PartialEq)]
pub struct HeisenbergTarget {
    pub native: Vec<f64>,
    pub filters: [FilterExpr; 3],
}

impl HeisenbergTarget {
    /// Three-qubit XYZ chain with nearest-neighbour couplings `(1/2, -1/2, 1/4)`.
    pub fn xyz_demo() -> Self {
        let x = decouple_distance_expr(2);
        let y = FilterExpr::product(vec![FilterExpr::Lambda(1), decouple_distance_expr(2)]);
        let z = FilterExpr::product(vec![decouple_distance_expr(2), decouple_distance_expr(2)]);
        HeisenbergTarget { native: vec![1.0, 1.0], filters: [x, y, z] }
    }

    pub fn n(&self) -> usize {
        self.native.len() + 1
    }

    /// Target couplings per axis: native times each normalized filter.
    pub fn profile(&self) -> Result<CouplingProfile> {
        let dim = self.native.len();
        let axis = |f: &FilterExpr| -> Result<Vec<f64>> {
            let v = normalized_filter_vector(f, dim)?.to_f64();
            Ok(self.native.iter().zip(v).map(|(a, b)| a * b).collect())
        };
        Ok(CouplingProfile {
            n: self.n(),
            omega_x: axis(&self.filters[0])?,
            omega_y: axis(&self.filters[1])?,
            omega_z: axis(&self.filters[2])?,
            b: 0.0,
        })
    }
}

/// `Π_j exp(-iπ/4 σ^a_j)`; conjugating by it maps `X_jX_k` to `Y_jY_k` for
/// `a = Z` and to `Z_jZ_k` for `a = Y`.
pub fn global_rotation(n: usize, axis: Axis) -> SpinOperator {
    let c = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let s = C64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2);
    let zero = C64::new(0.0, 0.0);
    let sigma = match axis {
        Axis::X => DMatrix::from_row_slice(2, 2, &[zero, C64::new(1.0, 0.0), C64::new(1.0, 0.0), zero]),
        Axis::Y => DMatrix::from_row_slice(2, 2, &[zero, C64::new(0.0, -1.0), C64::new(0.0, 1.0), zero]),
        Axis::Z => DMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), zero, zero, C64::new(-1.0, 0.0)]),
    };
    let g = DMatrix::<C64>::identity(2, 2) * c + sigma * s;
    let mut m = DMatrix::<C64>::identity(1, 1);
    for _ in 0..n {
        m = m.kronecker(&g);
    }
    SpinOperator { n, matrix: m }
}

pub fn heisenberg_hamiltonian(target: &HeisenbergTarget) -> Result<SpinOperator> {
    build_hamiltonian(&target.profile()?)
}

/// Second-order sandwich per slice of length `τ = t/r`:
/// `A_x(τ/2) A_y(τ/2) A_z(τ) A_y(τ/2) A_x(τ/2)`, where `A_x` is the filtered
/// X chain, `A_y = G_z† F_y G_z` and `A_z = G_y† F_z G_y`.
pub fn heisenberg_evolution(target: &HeisenbergTarget, t: f64, r: usize) -> Result<SpinOperator> {
    if r == 0 {
        return invalid("Trotter number must be at least 1");
    }
    let n = target.n();
    let h_i = build_hamiltonian(&CouplingProfile::ising(target.native.clone()))?;
    let tau = t / r as f64;
    let schedules = target.filters.iter().map(|f| materialize_compressed(f, n)).collect::<Result<Vec<_>>>()?;
    let g_z = global_rotation(n, Axis::Z);
    let g_y = global_rotation(n, Axis::Y);
    let a_x = |s: f64| filtered_propagator(&schedules[0], &h_i, s);
    let a_y = |s: f64| filtered_propagator(&schedules[1], &h_i, s).map(|f| g_z.conjugate(&f));
    let a_z = |s: f64| filtered_propagator(&schedules[2], &h_i, s).map(|f| g_y.conjugate(&f));
    let half_x = a_x(tau / 2.0)?;
    let half_y = a_y(tau / 2.0)?;
    let full_z = a_z(tau)?;
    let slice = &half_x.matrix * &half_y.matrix * &full_z.matrix * &half_y.matrix * &half_x.matrix;
    Ok(SpinOperator { n, matrix: matrix_power(&slice, r) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergReport {
    pub t: f64,
    /// `(r, ‖U_H - exp(-i H_XYZ t)‖)`.
    pub rows: Vec<(usize, f64)>,
    pub slope: Option<f64>,
}

pub fn heisenberg_convergence(target: &HeisenbergTarget, t: f64, r_values: &[usize]) -> Result<HeisenbergReport> {
    let exact = expm_hermitian(&heisenberg_hamiltonian(target)?, t);
    let mut rows = Vec::new();
    for &r in r_values {
        let u = heisenberg_evolution(target, t, r)?;
        rows.push((r, operator_norm(&(&u.matrix - &exact.matrix))));
    }
    let xs: Vec<f64> = rows.iter().map(|&(r, _)| r as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|&(_, e)| e).collect();
    let slope = if ys.iter().all(|&e| e > 1e-13) { loglog_slope(&xs, &ys) } else { None };
    Ok(HeisenbergReport { t, rows, slope })
}

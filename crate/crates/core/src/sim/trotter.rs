use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    average_hamiltonian, build_hamiltonian, expm_hermitian, field_hamiltonian, loglog_slope, operator_norm, pure_trace_distance,
    random_state, split_step, SpinOperator,
};
use crate::error::{invalid, Result};
use crate::filter::FilterExpr;
use crate::lp::CouplingProfile;
use crate::pulse::materialize_compressed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrotterMode {
    /// Filtered interaction and field as two terms.
    BothSwitchable,
    /// Field always on; the interaction is switched off only down to `δ H_I`.
    FieldSwitchableDelta,
    /// One term per merged pulse interval, field included in each.
    Pessimistic,
}

impl std::str::FromStr for TrotterMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" | "both_switchable" => Ok(TrotterMode::BothSwitchable),
            "delta" | "field_switchable_delta" => Ok(TrotterMode::FieldSwitchableDelta),
            "pessimistic" => Ok(TrotterMode::Pessimistic),
            other => invalid(format!("unknown Trotter mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrotterConfig {
    pub mode: TrotterMode,
    pub r_values: Vec<usize>,
    pub delta: f64,
    pub t: f64,
    pub trace_states: usize,
    pub seed: u64,
}

impl Default for TrotterConfig {
    fn default() -> Self {
        TrotterConfig {
            mode: TrotterMode::BothSwitchable,
            r_values: vec![4, 8, 16, 32],
            delta: 1e-3,
            t: 1.0,
            trace_states: 20,
            seed: 0,
        }
    }
}

/// Native Ising chain (`omega_x`, field `b`) and the filter applied to it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrotterSystem {
    pub native: CouplingProfile,
    pub filter: FilterExpr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrotterRow {
    pub r: usize,
    pub measured_error: f64,
    pub bound: f64,
    /// Largest pure-state trace distance seen for this `r`.
    pub max_trace_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrotterReport {
    pub mode: TrotterMode,
    pub m: usize,
    pub norm_h: f64,
    pub t: f64,
    pub rows: Vec<TrotterRow>,
    pub slope: Option<f64>,
    pub bounds_hold: bool,
    pub trace_checks_hold: bool,
    /// Burst mode only: `‖V_δ - V‖` against `δ‖H_I‖t`.
    pub drift: Option<(f64, f64)>,
}

/// Builds the term list of the chosen mode, measures `‖V - U_r‖` and checks
/// it against `16 m³ ‖H‖³ t³ / r²`.
pub fn trotter_error_report(config: &TrotterConfig, system: &TrotterSystem) -> Result<TrotterReport> {
    let native = &system.native;
    native.validate()?;
    if config.r_values.contains(&0) {
        return invalid("Trotter numbers must be at least 1");
    }
    let n = native.n;
    let mut bare = native.clone();
    bare.b = 0.0;
    let h_i = build_hamiltonian(&bare)?;
    let h_t = field_hamiltonian(n, native.b);
    let schedule = materialize_compressed(&system.filter, n)?;
    let h_f = average_hamiltonian(&schedule, &h_i)?;

    let (terms, h, drift): (Vec<SpinOperator>, SpinOperator, Option<(f64, f64)>) = match config.mode {
        TrotterMode::BothSwitchable => (vec![h_f.clone(), h_t.clone()], h_f.add(&h_t), None),
        TrotterMode::FieldSwitchableDelta => {
            if !(config.delta > 0.0 && config.delta < 1.0) {
                return invalid("burst parameter delta must lie in (0, 1)");
            }
            let second = h_i.scale(config.delta).add(&h_t);
            let h = h_f.add(&second);
            let ideal = expm_hermitian(&h_f.add(&h_t), config.t);
            let v = expm_hermitian(&h, config.t);
            let d = operator_norm(&(&v.matrix - &ideal.matrix));
            (vec![h_f.clone(), second], h, Some((d, config.delta * h_i.norm() * config.t)))
        }
        TrotterMode::Pessimistic => {
            let weights = schedule.normalized_weights_f64();
            let terms: Vec<SpinOperator> = schedule
                .segments()
                .iter()
                .zip(weights)
                .map(|(g, w)| h_i.conjugate_by_z_layer(g.signs.basis_mask()).add(&h_t).scale(w))
                .collect();
            let h = terms.iter().skip(1).fold(terms[0].clone(), |a, b| a.add(b));
            (terms, h, None)
        }
    };
    let m = terms.len();
    let norm_h = h.norm();
    let v = expm_hermitian(&h, config.t);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let states: Vec<_> = (0..config.trace_states).map(|_| random_state(n, &mut rng)).collect();

    let mut rows = Vec::new();
    let mut trace_ok = true;
    for &r in &config.r_values {
        let u = split_step(&terms, config.t, r)?;
        let measured = operator_norm(&(&v.matrix - &u.matrix));
        let bound = 16.0 * (m as f64).powi(3) * norm_h.powi(3) * config.t.powi(3) / (r as f64).powi(2);
        let mut worst: f64 = 0.0;
        for psi in &states {
            let td = pure_trace_distance(&v, &u, psi);
            worst = worst.max(td);
            if td > measured + 1e-12 {
                trace_ok = false;
            }
        }
        rows.push(TrotterRow { r, measured_error: measured, bound, max_trace_distance: worst });
    }
    let rs: Vec<f64> = config.r_values.iter().map(|&r| r as f64).collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.measured_error).collect();
    // Errors at machine precision carry no scaling information.
    let slope = if errs.iter().all(|&e| e > 1e-13) { loglog_slope(&rs, &errs) } else { None };
    Ok(TrotterReport {
        mode: config.mode,
        m,
        norm_h,
        t: config.t,
        bounds_hold: rows.iter().all(|r| r.measured_error <= r.bound),
        rows,
        slope,
        trace_checks_hold: trace_ok,
        drift,
    })
}

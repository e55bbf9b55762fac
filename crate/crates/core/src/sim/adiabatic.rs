use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{
    average_hamiltonian, build_hamiltonian, check_qubits, field_hamiltonian, ground_state, loglog_slope, Spectral, SpinOperator, C64,
    ADIABATIC_MAX_QUBITS,
};
use crate::error::{invalid, Result};
use crate::filter::{nearest_neighbour_expr, FilterExpr};
use crate::lp::CouplingProfile;
use crate::pulse::materialize_compressed;

/// Overlap the unfiltered exact ramp must reach for a ramp time to count as adiabatic.
pub const ADIABATIC_OVERLAP: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticConfig {
    pub n: usize,
    /// Strength `ω` of `H_s = -(ω/2) Σ Z_j`.
    pub omega: f64,
    /// Ramp time; `None` picks [`default_tau`].
    pub tau: Option<f64>,
    pub steps: Vec<usize>,
    pub filter: FilterExpr,
    /// Interaction of `H_a`; the field entry is ignored.
    pub native: CouplingProfile,
}

impl AdiabaticConfig {
    /// All-to-all chain with unit couplings filtered down to nearest neighbours.
    pub fn all_to_all_nearest_neighbour(n: usize) -> Self {
        let filter = nearest_neighbour_expr(n);
        AdiabaticConfig {
            n,
            omega: 1.0,
            tau: None,
            steps: vec![2, 4, 8, 16, 32],
            filter,
            native: CouplingProfile::ising(vec![1.0; n - 1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticStep {
    pub r: usize,
    pub dt: f64,
    /// `1 - |⟨φ|ψ⟩|²` at the end of the ramp.
    pub infidelity: f64,
    /// `Var_{g_s}(H(t_f)) Δt² / 4`.
    pub predicted: f64,
    pub ratio: f64,
    /// Ground-space overlap of `ψ(τ)` with the filtered target Hamiltonian.
    pub target_overlap: f64,
    pub per_step_infidelity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticReport {
    pub n: usize,
    pub omega: f64,
    pub tau: f64,
    pub tau_auto: bool,
    pub variance: f64,
    pub steps: Vec<AdiabaticStep>,
    pub slope: Option<f64>,
    /// Ground-space overlap reached by the exact unfiltered ramp.
    pub unfiltered_overlap: f64,
    /// `|⟨g_t|g_a⟩|²` with both states fixed by exact ramps (the ground spaces are degenerate).
    pub gt_ga_overlap: f64,
    pub degeneracy_target: usize,
    pub degeneracy_native: usize,
    pub six_step_infidelity: f64,
    pub warnings: Vec<String>,
}

struct Ramp {
    h_s: SpinOperator,
    h_end: SpinOperator,
    tau: f64,
}

impl Ramp {
    fn at(&self, t: f64) -> SpinOperator {
        let s = t / self.tau;
        self.h_s.scale(1.0 - s).add(&self.h_end.scale(s))
    }

    fn derivative(&self) -> SpinOperator {
        self.h_end.sub(&self.h_s).scale(1.0 / self.tau)
    }

    /// Midpoint steps fine enough to stand in for the exact evolution.
    fn exact(&self, psi0: &DVector<C64>) -> DVector<C64> {
        let steps = ((200.0 * self.tau).ceil() as usize).max(1000);
        let dt = self.tau / steps as f64;
        let mut psi = psi0.clone();
        for j in 0..steps {
            let h = self.at((j as f64 + 0.5) * dt);
            psi = Spectral::new(&h).propagator(dt) * psi;
        }
        psi
    }
}

fn normalized(v: DVector<C64>) -> DVector<C64> {
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// Smallest `τ` on the grid `0.5, 1.0, ...` (up to 100) at which the exact
/// unfiltered ramp ends with ground-space overlap at least 0.99.
pub fn default_tau(h_s: &SpinOperator, h_a: &SpinOperator) -> Result<(f64, f64)> {
    let g_s = ground_state(h_s)?;
    let g_a = ground_state(h_a)?;
    let mut best = (f64::NAN, 0.0);
    for i in 1..=200 {
        let tau = 0.5 * i as f64;
        let ramp = Ramp { h_s: h_s.clone(), h_end: h_a.clone(), tau };
        let o = g_a.overlap(&ramp.exact(&g_s.state));
        if o >= ADIABATIC_OVERLAP {
            return Ok((tau, o));
        }
        best = (tau, o);
    }
    Ok(best)
}

/// Stroboscopic filtered ramp `ψ` (piecewise-constant steps at the left end of
/// each interval) against `φ`, which adds the `½ Ḣ Δt²` correction, for each `R`.
pub fn adiabatic_run(config: &AdiabaticConfig) -> Result<AdiabaticReport> {
    let n = config.n;
    check_qubits(n, ADIABATIC_MAX_QUBITS)?;
    if config.native.n != n {
        return Err(crate::Error::QubitMismatch(config.native.n, n));
    }
    if config.steps.is_empty() || config.steps.contains(&0) {
        return invalid("step counts must be at least 1");
    }
    let h_s = field_hamiltonian(n, -config.omega / 2.0);
    let mut bare = config.native.clone();
    bare.b = 0.0;
    let h_a = build_hamiltonian(&bare)?;
    let schedule = materialize_compressed(&config.filter, n)?;
    let h_t = average_hamiltonian(&schedule, &h_a)?;

    let mut warnings = Vec::new();
    let (tau, tau_auto) = match config.tau {
        Some(t) if t > 0.0 => (t, false),
        Some(_) => return invalid("tau must be positive"),
        None => (default_tau(&h_s, &h_a)?.0, true),
    };
    let g_s = ground_state(&h_s)?;
    let g_a = ground_state(&h_a)?;
    let g_t = ground_state(&h_t)?;
    let unfiltered = Ramp { h_s: h_s.clone(), h_end: h_a.clone(), tau }.exact(&g_s.state);
    let unfiltered_overlap = g_a.overlap(&unfiltered);
    if unfiltered_overlap < ADIABATIC_OVERLAP {
        warnings.push(format!(
            "ramp is not adiabatic: unfiltered overlap {unfiltered_overlap:.4} < {ADIABATIC_OVERLAP}"
        ));
    }
    let filtered = Ramp { h_s: h_s.clone(), h_end: h_t.clone(), tau }.exact(&g_s.state);
    let ga = normalized(&g_a.space * (g_a.space.adjoint() * &unfiltered));
    let gt = normalized(&g_t.space * (g_t.space.adjoint() * &filtered));
    let gt_ga_overlap = gt.dotc(&ga).norm_sqr();

    let psi0 = &g_s.state;
    let ht_psi = h_t.apply(psi0);
    let variance = (ht_psi.dotc(&ht_psi) - psi0.dotc(&ht_psi).powi(2)).re;
    let ramp = Ramp { h_s, h_end: h_t, tau };
    let h_dot = ramp.derivative();

    let run = |r: usize| -> AdiabaticStep {
        let dt = tau / r as f64;
        let mut psi = psi0.clone();
        let mut phi = psi0.clone();
        let mut series = Vec::with_capacity(r);
        for j in 0..r {
            let h = ramp.at(j as f64 * dt);
            let corrected = h.add(&h_dot.scale(0.5 * dt));
            psi = Spectral::new(&h).propagator(dt) * psi;
            phi = Spectral::new(&corrected).propagator(dt) * phi;
            series.push(1.0 - phi.dotc(&psi).norm_sqr());
        }
        let infidelity = *series.last().unwrap();
        let predicted = variance * dt * dt / 4.0;
        AdiabaticStep { r, dt, infidelity, predicted, ratio: infidelity / predicted, target_overlap: g_t.overlap(&psi), per_step_infidelity: series }
    };
    let steps: Vec<AdiabaticStep> = config.steps.iter().map(|&r| run(r)).collect();
    let six_step_infidelity = run(6).infidelity;
    let xs: Vec<f64> = steps.iter().map(|s| s.r as f64).collect();
    let ys: Vec<f64> = steps.iter().map(|s| s.infidelity).collect();
    Ok(AdiabaticReport {
        n,
        omega: config.omega,
        tau,
        tau_auto,
        variance,
        slope: loglog_slope(&xs, &ys),
        steps,
        unfiltered_overlap,
        gt_ga_overlap,
        degeneracy_target: g_t.degeneracy,
        degeneracy_native: g_a.degeneracy,
        six_step_infidelity,
        warnings,
    })
}

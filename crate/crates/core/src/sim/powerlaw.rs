use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_qubits, ising_filtered_phases, POWER_LAW_MAX_QUBITS, C64};
use crate::delta::{power_law_expr, power_law_partial_sum, power_law_tail};
use crate::error::Result;
use crate::pulse::materialize_compressed;
use crate::rational;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawRow {
    pub d: usize,
    /// Effective coupling read off the propagator, scaled back by the program duration.
    pub extracted: f64,
    /// `Ω_d (1 - f^L)/(1 - f)`.
    pub expected_partial: f64,
    /// `(N+1) / (2 d^{n+1})`.
    pub limit: f64,
    pub deviation: f64,
    /// `Ω_d |f|^L / (1 - f)`.
    pub tail_bound: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawReport {
    pub n: usize,
    pub exponent: u32,
    pub levels: usize,
    pub segments: usize,
    pub total_time: f64,
    /// Largest residual of the phase fit (zero up to round-off in the commuting case).
    pub fit_residual: f64,
    pub rows: Vec<PowerLawRow>,
    pub all_within: bool,
}

/// Least-squares couplings `g_d` from X-basis phases `φ_s = -T Σ_d g_d C_d(s)`.
pub fn extract_ising_profile(phases: &[f64], n: usize, total_time: f64) -> (Vec<f64>, f64) {
    let dim = 1usize << n;
    let bit = |s: usize, j: usize| s >> (n - 1 - j) & 1;
    let a = DMatrix::from_fn(dim, n - 1, |s, col| {
        let d = col + 1;
        (0..n - d).map(|j| if bit(s, j) == bit(s, j + d) { 1.0 } else { -1.0 }).sum::<f64>()
    });
    let b = DVector::from_iterator(dim, phases.iter().map(|p| -p / total_time));
    let g = a.clone().svd(true, true).solve(&b, 1e-12).expect("SVD with both factors");
    let res = (&a * &g - &b).amax() * total_time;
    (g.iter().cloned().collect(), res)
}

/// Applies `Σ_{x<L} Λ_{N+1}^x` to `Ω_d = 1/d^n` and compares the extracted
/// profile to `(N+1)/(2 d^{n+1})` within the geometric tail.
pub fn verify_power_law(exponent: u32, levels: usize, n: usize) -> Result<PowerLawReport> {
    check_qubits(n, POWER_LAW_MAX_QUBITS)?;
    let expr = power_law_expr(levels, n)?;
    let schedule = materialize_compressed(&expr, n)?;
    let omega: Vec<f64> = (1..n).map(|d| (d as f64).powi(-(exponent as i32))).collect();
    // Keep every phase inside (-π, π) so the logarithm is unambiguous.
    let total_time = 1.0 / (1..n).map(|d| (n - d) as f64 * omega[d - 1]).sum::<f64>();
    let phases = ising_filtered_phases(&schedule, &omega, total_time)?;
    let unwrapped: Vec<f64> = phases.iter().map(|&p| C64::from_polar(1.0, p).arg()).collect();
    let (g, fit_residual) = extract_ising_profile(&unwrapped, n, total_time);
    let duration = rational::to_f64(&expr.duration());
    let rows: Vec<PowerLawRow> = (1..n)
        .map(|d| {
            let od = omega[d - 1];
            let extracted = g[d - 1] * duration;
            let limit = (n as f64 + 1.0) / (2.0 * (d as f64).powi(exponent as i32 + 1));
            let deviation = (extracted - limit).abs();
            let tail_bound = od * power_law_tail(d, levels, n);
            PowerLawRow {
                d,
                extracted,
                expected_partial: od * rational::to_f64(&power_law_partial_sum(d, levels, n)),
                limit,
                deviation,
                tail_bound,
                within: deviation <= tail_bound + 1e-9,
            }
        })
        .collect();
    Ok(PowerLawReport {
        n,
        exponent,
        levels,
        segments: schedule.segment_count(),
        total_time,
        fit_residual,
        all_within: rows.iter().all(|r| r.within),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_chain_matches_partial_sums() {
        let rep = verify_power_law(1, 4, 5).unwrap();
        assert!(rep.all_within);
        assert!(rep.fit_residual < 1e-10);
        for r in &rep.rows {
            assert!((r.extracted - r.expected_partial).abs() < 1e-9, "{r:?}");
        }
    }
}

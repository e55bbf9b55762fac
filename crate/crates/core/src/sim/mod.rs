//! Dense state-vector simulation for small chains. Qubit 1 is the most
//! significant bit of the basis index; `ħ = 1` and times are in units of `1/Ω_1`.

mod adiabatic;
mod heisenberg;
mod powerlaw;
mod trotter;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

pub use adiabatic::{adiabatic_run, default_tau, AdiabaticConfig, AdiabaticReport, AdiabaticStep};
pub use heisenberg::{
    global_rotation, heisenberg_convergence, heisenberg_evolution, heisenberg_hamiltonian, HeisenbergReport, HeisenbergTarget,
};
pub use powerlaw::{extract_ising_profile, verify_power_law, PowerLawReport, PowerLawRow};
pub use trotter::{trotter_error_report, TrotterConfig, TrotterMode, TrotterReport, TrotterRow, TrotterSystem};

use crate::error::{Error, Result};
use crate::lp::CouplingProfile;
use crate::pulse::PulseSchedule;

pub type C64 = Complex64;

pub const MAX_QUBITS: usize = 12;
pub const ADIABATIC_MAX_QUBITS: usize = 8;
pub const POWER_LAW_MAX_QUBITS: usize = 8;

/// Dense `2^N x 2^N` operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperator {
    pub n: usize,
    pub matrix: DMatrix<C64>,
}

fn check_qubits(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::TooManyQubits { n, cap });
    }
    if n == 0 {
        return crate::error::invalid("need at least one qubit");
    }
    Ok(())
}

impl SpinOperator {
    pub fn zeros(n: usize) -> Self {
        SpinOperator { n, matrix: DMatrix::zeros(1 << n, 1 << n) }
    }

    pub fn identity(n: usize) -> Self {
        SpinOperator { n, matrix: DMatrix::identity(1 << n, 1 << n) }
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn adjoint(&self) -> Self {
        SpinOperator { n: self.n, matrix: self.matrix.adjoint() }
    }

    pub fn add(&self, other: &SpinOperator) -> Self {
        SpinOperator { n: self.n, matrix: &self.matrix + &other.matrix }
    }

    pub fn sub(&self, other: &SpinOperator) -> Self {
        SpinOperator { n: self.n, matrix: &self.matrix - &other.matrix }
    }

    pub fn scale(&self, s: f64) -> Self {
        SpinOperator { n: self.n, matrix: &self.matrix * C64::new(s, 0.0) }
    }

    pub fn mul(&self, other: &SpinOperator) -> Self {
        SpinOperator { n: self.n, matrix: &self.matrix * &other.matrix }
    }

    /// `A† B A` with `A = self`.
    pub fn conjugate(&self, b: &SpinOperator) -> Self {
        SpinOperator { n: self.n, matrix: self.matrix.adjoint() * &b.matrix * &self.matrix }
    }

    /// Largest singular value.
    pub fn norm(&self) -> f64 {
        operator_norm(&self.matrix)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `‖U†U - I‖`.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.matrix.adjoint() * &self.matrix - DMatrix::<C64>::identity(self.dim(), self.dim());
        operator_norm(&d)
    }

    /// `P A P` for the Z layer `P = Π Z_j` over the set bits of `mask`.
    pub fn conjugate_by_z_layer(&self, mask: usize) -> Self {
        let mut m = self.matrix.clone();
        apply_z_layer(&mut m, mask);
        SpinOperator { n: self.n, matrix: m }
    }

    pub fn apply(&self, psi: &DVector<C64>) -> DVector<C64> {
        &self.matrix * psi
    }
}

fn parity(x: usize) -> bool {
    x.count_ones() % 2 == 1
}

fn apply_z_layer(m: &mut DMatrix<C64>, mask: usize) {
    if mask == 0 {
        return;
    }
    let dim = m.nrows();
    for c in 0..dim {
        let pc = parity(c & mask);
        for r in 0..dim {
            if pc != parity(r & mask) {
                m[(r, c)] = -m[(r, c)];
            }
        }
    }
}

pub fn operator_norm(m: &DMatrix<C64>) -> f64 {
    if m.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return 0.0;
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

fn bit(s: usize, n: usize, j: usize) -> bool {
    s >> (n - 1 - j) & 1 == 1
}

/// Single-site Pauli operator on qubit `j` (0-based); `axis` is 'x', 'y' or 'z'.
pub fn pauli(n: usize, j: usize, axis: char) -> SpinOperator {
    let dim = 1 << n;
    let mut m = DMatrix::zeros(dim, dim);
    let flip = 1 << (n - 1 - j);
    for s in 0..dim {
        let b = bit(s, n, j);
        match axis {
            'x' => m[(s ^ flip, s)] = C64::new(1.0, 0.0),
            'y' => m[(s ^ flip, s)] = if b { C64::new(0.0, -1.0) } else { C64::new(0.0, 1.0) },
            'z' => m[(s, s)] = C64::new(if b { -1.0 } else { 1.0 }, 0.0),
            _ => panic!("unknown axis {axis}"),
        }
    }
    SpinOperator { n, matrix: m }
}

/// `Σ_d Σ_{j=1}^{N-d} (Ω^x_d X_jX_{j+d} + Ω^y_d Y_jY_{j+d} + Ω^z_d Z_jZ_{j+d}) + B Σ_j Z_j`.
pub fn build_hamiltonian(p: &CouplingProfile) -> Result<SpinOperator> {
    p.validate()?;
    let n = p.n;
    check_qubits(n, MAX_QUBITS)?;
    let dim = 1 << n;
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for s in 0..dim {
        let mut diag = 0.0;
        for j in 0..n {
            diag += if bit(s, n, j) { -p.b } else { p.b };
        }
        for d in 1..n {
            let (ox, oy, oz) = (p.omega_x[d - 1], p.omega_y[d - 1], p.omega_z[d - 1]);
            for j in 0..n - d {
                let k = j + d;
                let same = bit(s, n, j) == bit(s, n, k);
                diag += if same { oz } else { -oz };
                let t = s ^ (1 << (n - 1 - j)) ^ (1 << (n - 1 - k));
                let off = ox + if same { -oy } else { oy };
                if off != 0.0 {
                    m[(t, s)] += C64::new(off, 0.0);
                }
            }
        }
        m[(s, s)] += C64::new(diag, 0.0);
    }
    Ok(SpinOperator { n, matrix: m })
}

/// Pure X-type Ising Hamiltonian with the given couplings.
pub fn ising_hamiltonian(omega: &[f64]) -> Result<SpinOperator> {
    build_hamiltonian(&CouplingProfile::ising(omega.to_vec()))
}

/// `B Σ_j Z_j`.
pub fn field_hamiltonian(n: usize, b: f64) -> SpinOperator {
    let mut p = CouplingProfile::zero(n);
    p.b = b;
    build_hamiltonian(&p).expect("valid field profile")
}

/// Eigendecomposition of a Hermitian operator, reusable for many evolution times.
#[derive(Debug, Clone)]
pub struct Spectral {
    pub values: DVector<f64>,
    pub vectors: DMatrix<C64>,
}

impl Spectral {
    pub fn new(h: &SpinOperator) -> Self {
        let e = h.matrix.clone().symmetric_eigen();
        Spectral { values: e.eigenvalues, vectors: e.eigenvectors }
    }

    /// `exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> DMatrix<C64> {
        let mut vd = self.vectors.clone();
        for (k, mut col) in vd.column_iter_mut().enumerate() {
            col *= C64::from_polar(1.0, -self.values[k] * t);
        }
        vd * self.vectors.adjoint()
    }
}

/// `exp(-i H t)` via Hermitian eigendecomposition.
pub fn expm_hermitian(h: &SpinOperator, t: f64) -> SpinOperator {
    SpinOperator { n: h.n, matrix: Spectral::new(h).propagator(t) }
}

/// `Π_l P_l exp(-i H Δt_l) P_l` with `Δt_l = T w_l / Σw`, later segments on the left.
pub fn filtered_propagator(schedule: &PulseSchedule, h: &SpinOperator, total_time: f64) -> Result<SpinOperator> {
    if schedule.qubit_count() != h.n {
        return Err(Error::QubitMismatch(schedule.qubit_count(), h.n));
    }
    let eig = Spectral::new(h);
    let weights = schedule.normalized_weights_f64();
    let mut cache: HashMap<u64, DMatrix<C64>> = HashMap::new();
    let mut u = DMatrix::<C64>::identity(h.dim(), h.dim());
    for (seg, w) in schedule.segments().iter().zip(weights) {
        let dt = total_time * w;
        let base = cache.entry(dt.to_bits()).or_insert_with(|| eig.propagator(dt));
        let mut step = base.clone();
        apply_z_layer(&mut step, seg.signs.basis_mask());
        u = step * u;
    }
    Ok(SpinOperator { n: h.n, matrix: u })
}

/// First-order average `Σ_l ŵ_l P_l H P_l` over the schedule.
pub fn average_hamiltonian(schedule: &PulseSchedule, h: &SpinOperator) -> Result<SpinOperator> {
    if schedule.qubit_count() != h.n {
        return Err(Error::QubitMismatch(schedule.qubit_count(), h.n));
    }
    let mut acc = SpinOperator::zeros(h.n);
    for (seg, w) in schedule.segments().iter().zip(schedule.normalized_weights_f64()) {
        acc = acc.add(&h.conjugate_by_z_layer(seg.signs.basis_mask()).scale(w));
    }
    Ok(acc)
}

/// Ising energies `Σ_d Ω_d Σ_j x_j x_{j+d}` of every X-basis state (bit set means `x = -1`).
pub fn ising_energies(omega: &[f64]) -> Vec<f64> {
    let n = omega.len() + 1;
    (0..1usize << n)
        .map(|s| {
            let mut e = 0.0;
            for d in 1..n {
                for j in 0..n - d {
                    e += if bit(s, n, j) == bit(s, n, j + d) { omega[d - 1] } else { -omega[d - 1] };
                }
            }
            e
        })
        .collect()
}

/// Phases of the filtered propagator of a pure X Ising chain in the X basis.
/// A Z layer flips `x_j` for its qubits, so every segment only permutes the
/// diagonal energies and the whole product stays diagonal.
pub fn ising_filtered_phases(schedule: &PulseSchedule, omega: &[f64], total_time: f64) -> Result<Vec<f64>> {
    let n = omega.len() + 1;
    if schedule.qubit_count() != n {
        return Err(Error::QubitMismatch(schedule.qubit_count(), n));
    }
    check_qubits(n, 20)?;
    let energies = ising_energies(omega);
    let mut phase = vec![0.0; energies.len()];
    for (seg, w) in schedule.segments().iter().zip(schedule.normalized_weights_f64()) {
        let mask = seg.signs.basis_mask();
        let dt = total_time * w;
        for (s, p) in phase.iter_mut().enumerate() {
            *p -= energies[s ^ mask] * dt;
        }
    }
    Ok(phase)
}

/// `H^{⊗N}`.
pub fn hadamard_all(n: usize) -> SpinOperator {
    let dim = 1 << n;
    let norm = (dim as f64).sqrt().recip();
    let m = DMatrix::from_fn(dim, dim, |r, c| {
        C64::new(if parity(r & c) { -norm } else { norm }, 0.0)
    });
    SpinOperator { n, matrix: m }
}

/// Filtered propagator for a pure X Ising chain assembled from [`ising_filtered_phases`].
pub fn ising_filtered_propagator(schedule: &PulseSchedule, omega: &[f64], total_time: f64) -> Result<SpinOperator> {
    let n = omega.len() + 1;
    check_qubits(n, MAX_QUBITS)?;
    let phases = ising_filtered_phases(schedule, omega, total_time)?;
    let h = hadamard_all(n);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(phases.len(), phases.iter().map(|&p| C64::from_polar(1.0, p))));
    Ok(SpinOperator { n, matrix: &h.matrix * d * &h.matrix })
}

/// `(Π_{j=1..m} e^{-iH_j t/2r} Π_{j=m..1} e^{-iH_j t/2r})^r`.
pub fn split_step(terms: &[SpinOperator], t: f64, r: usize) -> Result<SpinOperator> {
    let Some(first) = terms.first() else {
        return crate::error::invalid("split_step needs at least one term");
    };
    if r == 0 {
        return crate::error::invalid("Trotter number must be at least 1");
    }
    let n = first.n;
    let halves: Vec<DMatrix<C64>> = terms.iter().map(|h| Spectral::new(h).propagator(t / (2.0 * r as f64))).collect();
    let dim = 1 << n;
    let mut slice = DMatrix::<C64>::identity(dim, dim);
    for e in &halves {
        slice = e * slice;
    }
    for e in halves.iter().rev() {
        slice = e * slice;
    }
    Ok(SpinOperator { n, matrix: matrix_power(&slice, r) })
}

pub(crate) fn matrix_power(m: &DMatrix<C64>, mut r: usize) -> DMatrix<C64> {
    let mut base = m.clone();
    let mut acc = DMatrix::<C64>::identity(m.nrows(), m.ncols());
    while r > 0 {
        if r & 1 == 1 {
            acc = &acc * &base;
        }
        base = &base * &base;
        r >>= 1;
    }
    acc
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    /// Lowest eigenvector, first significant amplitude real and positive.
    pub state: DVector<C64>,
    /// Orthonormal basis of the ground space (one column per degenerate state).
    pub space: DMatrix<C64>,
    pub degeneracy: usize,
    /// Gap above the ground space.
    pub gap: f64,
}

impl GroundState {
    pub fn is_degenerate(&self) -> bool {
        self.degeneracy > 1
    }

    /// `‖P_g ψ‖²` for a normalized `ψ`.
    pub fn overlap(&self, psi: &DVector<C64>) -> f64 {
        (self.space.adjoint() * psi).norm_squared()
    }
}

pub const DEGENERACY_TOL: f64 = 1e-10;

pub fn ground_state(h: &SpinOperator) -> Result<GroundState> {
    if h.hermiticity_defect() > 1e-12 {
        return crate::error::invalid("ground_state needs a Hermitian operator");
    }
    let eig = Spectral::new(h);
    let mut order: Vec<usize> = (0..eig.values.len()).collect();
    order.sort_by(|&a, &b| eig.values[a].total_cmp(&eig.values[b]));
    let e0 = eig.values[order[0]];
    let ground: Vec<usize> = order.iter().copied().take_while(|&i| eig.values[i] - e0 < DEGENERACY_TOL).collect();
    let gap = order.get(ground.len()).map(|&i| eig.values[i] - e0).unwrap_or(f64::INFINITY);
    let mut state = eig.vectors.column(order[0]).into_owned();
    if let Some(a) = state.iter().find(|z| z.norm() > 1e-12).copied() {
        state *= a.conj() / a.norm();
    }
    let space = DMatrix::from_columns(&ground.iter().map(|&i| eig.vectors.column(i)).collect::<Vec<_>>());
    Ok(GroundState { energy: e0, state, space, degeneracy: ground.len(), gap })
}

/// Uniformly drawn components, normalized.
pub fn random_state<R: Rng>(n: usize, rng: &mut R) -> DVector<C64> {
    let v = DVector::from_fn(1 << n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let norm = v.norm();
    v / C64::new(norm, 0.0)
}

/// `½ Tr|VρV† - UρU†|` for the pure state `ρ = |ψ⟩⟨ψ|`.
pub fn pure_trace_distance(v: &SpinOperator, u: &SpinOperator, psi: &DVector<C64>) -> f64 {
    let a = v.apply(psi);
    let b = u.apply(psi);
    let o = a.dotc(&b).norm_sqr();
    (1.0 - o).max(0.0).sqrt()
}

/// Least-squares slope of `ln y` against `ln x` over positive entries.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(_, &y)| y > 0.0).map(|(&x, &y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Some(crate::delta::least_squares_line(&x, &y).0)
}

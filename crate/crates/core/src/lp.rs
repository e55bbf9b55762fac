//! Minimum-time compilation of a target coupling profile into nonnegative
//! durations over a basis of filters.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::delta::{self, universality_certificate};
use crate::error::{invalid, Error, Result};
use crate::filter::{self, resource_estimate, FilterExpr, FilterVector};
use crate::rational::{self, Rational};

/// Pivot elements smaller than this are treated as zero.
pub const PIVOT_TOL: f64 = 1e-11;
/// Residual accepted for a compiled program (infinity norm).
pub const RESIDUAL_TOL: f64 = 1e-8;
const COST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Couplings per axis at distances `1..n-1` and a transverse field, in units of
/// the native `Ω_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingProfile {
    pub n: usize,
    pub omega_x: Vec<f64>,
    pub omega_y: Vec<f64>,
    pub omega_z: Vec<f64>,
    pub b: f64,
}

impl CouplingProfile {
    pub fn zero(n: usize) -> Self {
        let d = n.saturating_sub(1);
        CouplingProfile { n, omega_x: vec![0.0; d], omega_y: vec![0.0; d], omega_z: vec![0.0; d], b: 0.0 }
    }

    /// Pure X-type Ising profile.
    pub fn ising(omega: Vec<f64>) -> Self {
        let n = omega.len() + 1;
        CouplingProfile { n, omega_y: vec![0.0; n - 1], omega_z: vec![0.0; n - 1], omega_x: omega, b: 0.0 }
    }

    pub fn dimension(&self) -> usize {
        self.n - 1
    }

    pub fn axis(&self, a: Axis) -> &[f64] {
        match a {
            Axis::X => &self.omega_x,
            Axis::Y => &self.omega_y,
            Axis::Z => &self.omega_z,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return invalid("profile needs n >= 2");
        }
        for v in [&self.omega_x, &self.omega_y, &self.omega_z] {
            if v.len() != self.n - 1 {
                return Err(Error::DimensionMismatch { expected: self.n - 1, got: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return invalid("profile entries must be finite");
            }
        }
        if !self.b.is_finite() {
            return invalid("field b must be finite");
        }
        Ok(())
    }

    /// Multiplies every axis entrywise by a filter vector.
    pub fn filtered(&self, f: &[f64]) -> CouplingProfile {
        let m = |v: &[f64]| v.iter().zip(f).map(|(a, b)| a * b).collect();
        CouplingProfile { n: self.n, omega_x: m(&self.omega_x), omega_y: m(&self.omega_y), omega_z: m(&self.omega_z), b: self.b }
    }
}

/// `Ω_eff / Ω` entrywise; a zero native coupling is only allowed under a zero target.
pub fn target_ratio(target: &[f64], native: &[f64]) -> Result<Vec<f64>> {
    if target.len() != native.len() {
        return Err(Error::DimensionMismatch { expected: native.len(), got: target.len() });
    }
    target
        .iter()
        .zip(native)
        .enumerate()
        .map(|(i, (&t, &n))| {
            if n == 0.0 {
                if t == 0.0 {
                    Ok(0.0)
                } else {
                    Err(Error::ZeroNative(i + 1))
                }
            } else {
                Ok(t / n)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// `y` with `c - Aᵀy >= 0` at optimality.
    pub duals: Vec<f64>,
    pub basis: Vec<usize>,
    pub iterations: usize,
}

/// `y` with `Aᵀy <= 0` and `bᵀy > 0`: no `t >= 0` solves `At = b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarkasCertificate {
    pub y: Vec<f64>,
    pub b_dot_y: f64,
    pub max_at_y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible(FarkasCertificate),
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
    iterations: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn reduced_cost(&self, cost: &[f64], j: usize) -> f64 {
        cost[j] - self.rows.iter().zip(&self.basis).map(|(r, &b)| cost[b] * r[j]).sum::<f64>()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
        self.iterations += 1;
    }

    /// Bland's rule over columns `< allowed`; `Err` on an unbounded ray.
    fn run(&mut self, cost: &[f64], allowed: usize) -> Result<()> {
        let cap = 50_000 + 50 * self.width * self.rows.len().max(1);
        loop {
            if self.iterations > cap {
                return invalid("simplex iteration cap reached");
            }
            let Some(enter) = (0..allowed).find(|&j| !self.basis.contains(&j) && self.reduced_cost(cost, j) < -COST_TOL) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][enter];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * br.abs().max(1.0);
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, enter),
                None => return invalid("linear program is unbounded"),
            }
        }
    }

    /// `c_B B⁻¹` read off the artificial columns starting at `art`.
    fn duals(&self, cost: &[f64], art: usize, d: usize) -> Vec<f64> {
        (0..d).map(|i| self.rows.iter().zip(&self.basis).map(|(r, &b)| cost[b] * r[art + i]).sum()).collect()
    }
}

/// `min cᵀt` subject to `A t = b`, `t >= 0`, by two-phase primal simplex with
/// Bland's rule. Optimal answers are basic, so at most `D` entries are nonzero.
pub fn solve_lp(a: &DMatrix<f64>, b: &[f64], c: &[f64]) -> Result<LpOutcome> {
    let (d, m) = a.shape();
    if b.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: b.len() });
    }
    if c.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: c.len() });
    }
    if a.iter().chain(b).chain(c).any(|x| !x.is_finite()) {
        return invalid("LP data must be finite");
    }
    let signs: Vec<f64> = b.iter().map(|&x| if x < 0.0 { -1.0 } else { 1.0 }).collect();
    let width = m + d;
    let rows = (0..d)
        .map(|i| {
            let mut r = vec![0.0; width + 1];
            for j in 0..m {
                r[j] = signs[i] * a[(i, j)];
            }
            r[m + i] = 1.0;
            r[width] = signs[i] * b[i];
            r
        })
        .collect();
    let mut t = Tableau { rows, basis: (m..m + d).collect(), width, iterations: 0 };

    let mut phase1 = vec![0.0; width];
    phase1[m..].iter_mut().for_each(|v| *v = 1.0);
    t.run(&phase1, width)?;
    let infeas: f64 = (0..d).filter(|&i| t.basis[i] >= m).map(|i| t.rhs(i)).sum();
    let scale = b.iter().fold(1.0f64, |s, x| s.max(x.abs()));
    if infeas > 1e-9 * scale {
        let y: Vec<f64> = t.duals(&phase1, m, d).iter().zip(&signs).map(|(y, s)| y * s).collect();
        let norm = y.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
        let y: Vec<f64> = y.iter().map(|v| v / norm).collect();
        let b_dot_y = y.iter().zip(b).map(|(y, b)| y * b).sum();
        let max_at_y = (0..m).map(|j| (0..d).map(|i| a[(i, j)] * y[i]).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max);
        return Ok(LpOutcome::Infeasible(FarkasCertificate { y, b_dot_y, max_at_y }));
    }

    // Drive zero-level artificials out of the basis; rows where that fails are redundant.
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= m {
            match (0..m).find(|&j| t.rows[i][j].abs() > PIVOT_TOL) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    let mut cost = c.to_vec();
    cost.resize(width, 0.0);
    t.run(&cost, m)?;

    let mut x = vec![0.0; m];
    for (i, &bv) in t.basis.iter().enumerate() {
        x[bv] = t.rhs(i).max(0.0);
    }
    refine(a, b, &mut x, &t.basis);
    let duals: Vec<f64> = t.duals(&cost, m, d).iter().zip(&signs).map(|(y, s)| y * s).collect();
    let objective = x.iter().zip(c).map(|(x, c)| x * c).sum();
    let mut basis = t.basis.clone();
    basis.sort_unstable();
    Ok(LpOutcome::Optimal(LpSolution { x, objective, duals, basis, iterations: t.iterations }))
}

/// Re-solves the basic columns against the original data to shed pivot round-off.
fn refine(a: &DMatrix<f64>, b: &[f64], x: &mut [f64], basis: &[usize]) {
    let d = a.nrows();
    if basis.is_empty() {
        return;
    }
    let cols = DMatrix::from_fn(d, basis.len(), |i, k| a[(i, basis[k])]);
    let rhs = DVector::from_column_slice(b);
    let Ok(svd) = cols.clone().svd(true, true).solve(&rhs, 1e-13) else { return };
    if svd.iter().any(|v| *v < -1e-9 || !v.is_finite()) {
        return;
    }
    let before = residual_of(a, b, x);
    let mut trial = x.to_vec();
    for (k, &j) in basis.iter().enumerate() {
        trial[j] = svd[k].max(0.0);
    }
    if residual_of(a, b, &trial) <= before {
        x.copy_from_slice(&trial);
    }
}

fn residual_of(a: &DMatrix<f64>, b: &[f64], x: &[f64]) -> f64 {
    (0..a.nrows())
        .map(|i| ((0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum::<f64>() - b[i]).abs())
        .fold(0.0, f64::max)
}

/// Maximum violation of `c - Aᵀy >= 0`.
pub fn dual_infeasibility(a: &DMatrix<f64>, c: &[f64], y: &[f64]) -> f64 {
    (0..a.ncols())
        .map(|j| -(c[j] - (0..a.nrows()).map(|i| a[(i, j)] * y[i]).sum::<f64>()))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Primitive,
    Product,
    Delta,
    PowerLaw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisEntry {
    pub expr: FilterExpr,
    /// Duration-normalized vector.
    pub vector: FilterVector,
    pub vector_f64: Vec<f64>,
    /// Cost per unit time.
    pub cost: f64,
    pub kind: EntryKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    /// Every filter costs one per unit time.
    #[default]
    Unit,
    /// `1 + pulse layers` of the materialized filter.
    PulseLayers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisOptions {
    pub max_concat_depth: usize,
    pub include_delta_basis: bool,
    /// Adds `Σ_{x<L} Λ_{N+1}^x` for `L = 1..=levels`.
    pub power_law_levels: Option<usize>,
    pub max_size: usize,
    pub cost: CostModel,
    /// Restricts primitives to the `Λ` family.
    pub lambda_only: bool,
}

impl Default for BasisOptions {
    fn default() -> Self {
        BasisOptions {
            max_concat_depth: 1,
            include_delta_basis: false,
            power_law_levels: None,
            max_size: 4096,
            cost: CostModel::Unit,
            lambda_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBasis {
    pub n: usize,
    pub entries: Vec<BasisEntry>,
    /// Set when the size cap cut the product levels short.
    pub truncated: bool,
}

impl FilterBasis {
    pub fn dimension(&self) -> usize {
        self.n - 1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dimension(), self.len(), |i, j| self.entries[j].vector_f64[i])
    }

    pub fn costs(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.cost).collect()
    }

    /// Appends an entry unless its vector is already present.
    pub fn push(&mut self, expr: FilterExpr, kind: EntryKind, cost: CostModel) -> Result<bool> {
        let vector = filter::normalized_filter_vector(&expr, self.dimension())?;
        if self.entries.iter().any(|e| e.vector == vector) {
            return Ok(false);
        }
        let cost = match cost {
            CostModel::Unit => 1.0,
            CostModel::PulseLayers => 1.0 + resource_estimate(&expr, self.n)?.pulse_layers as f64,
        };
        self.entries.push(BasisEntry { vector_f64: vector.to_f64(), vector, expr, cost, kind });
        Ok(true)
    }
}

/// Primitives `Λ_0..Λ_N`, `Γ_2..Γ_{N-1}`, products with one more primitive per
/// level up to the depth cap (deduplicated by vector), then optional delta
/// recipes and power-law programs.
pub fn build_basis(n: usize, opts: &BasisOptions) -> Result<FilterBasis> {
    if n < 3 {
        return invalid("basis needs N >= 3");
    }
    let dim = n - 1;
    let mut primitives: Vec<(FilterExpr, FilterVector)> = (0..=n as u64)
        .map(FilterExpr::Lambda)
        .chain(if opts.lambda_only { 0..0 } else { 2..n as u64 }.map(FilterExpr::Gamma))
        .map(|e| {
            let v = filter::filter_vector(&e, dim)?;
            Ok((e, v))
        })
        .collect::<Result<_>>()?;
    let mut seen: HashSet<FilterVector> = HashSet::new();
    primitives.retain(|(_, v)| seen.insert(v.clone()));

    let mut basis = FilterBasis { n, entries: Vec::new(), truncated: false };
    for (e, _) in &primitives {
        basis.push(e.clone(), EntryKind::Primitive, opts.cost)?;
    }
    let movers: Vec<&(FilterExpr, FilterVector)> = primitives.iter().filter(|(e, _)| *e != FilterExpr::identity()).collect();
    let mut level: Vec<(FilterExpr, FilterVector)> = movers.iter().map(|p| (*p).clone()).collect();
    'levels: for _ in 0..opts.max_concat_depth {
        let mut next = Vec::new();
        for (le, lv) in &level {
            for (pe, pv) in &movers {
                let v = lv.hadamard(pv);
                if !seen.insert(v.clone()) {
                    continue;
                }
                if basis.len() >= opts.max_size {
                    basis.truncated = true;
                    break 'levels;
                }
                let e = FilterExpr::Product(vec![le.clone(), pe.clone()]);
                basis.push(e.clone(), EntryKind::Product, opts.cost)?;
                next.push((e, v));
            }
        }
        level = next;
    }
    if opts.include_delta_basis {
        let cert = universality_certificate(n)?;
        for r in cert.recipes {
            // Deltas go in even when a product already hits the same direction:
            // vectors are normalized, so an equal vector means an equal column.
            basis.push(r.expr, EntryKind::Delta, opts.cost)?;
        }
    }
    if let Some(levels) = opts.power_law_levels {
        for l in 2..=levels {
            basis.push(delta::power_law_expr(l, n)?, EntryKind::PowerLaw, opts.cost)?;
        }
    }
    Ok(basis)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramTerm {
    pub index: usize,
    pub expr: FilterExpr,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledProgram {
    pub terms: Vec<ProgramTerm>,
    pub objective: f64,
    #[serde(rename = "residual")]
    pub residual_inf_norm: f64,
    /// Residual recomputed in rational arithmetic from the returned durations.
    pub exact_residual: f64,
    pub total_time: f64,
    pub dual_infeasibility: f64,
}

impl CompiledProgram {
    pub fn nonzero_terms(&self) -> usize {
        self.terms.iter().filter(|t| t.t > 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CompileOutcome {
    Program(CompiledProgram),
    Infeasible(FarkasCertificate),
}

/// Solves `min Σ c_j t_j` subject to `Σ t_j f_j = target`, `t >= 0`.
pub fn compile(target: &[f64], basis: &FilterBasis) -> Result<CompileOutcome> {
    if target.len() != basis.dimension() {
        return Err(Error::DimensionMismatch { expected: basis.dimension(), got: target.len() });
    }
    if basis.is_empty() {
        return invalid("empty basis");
    }
    let a = basis.matrix();
    let c = basis.costs();
    let sol = match solve_lp(&a, target, &c)? {
        LpOutcome::Infeasible(cert) => return Ok(CompileOutcome::Infeasible(cert)),
        LpOutcome::Optimal(s) => s,
    };
    let terms: Vec<ProgramTerm> = sol
        .x
        .iter()
        .enumerate()
        .filter(|(_, &t)| t > 0.0)
        .map(|(i, &t)| ProgramTerm { index: i, expr: basis.entries[i].expr.clone(), t })
        .collect();
    let mut program = CompiledProgram {
        total_time: terms.iter().map(|t| t.t).sum(),
        objective: sol.objective,
        residual_inf_norm: 0.0,
        exact_residual: 0.0,
        dual_infeasibility: dual_infeasibility(&a, &c, &sol.duals),
        terms,
    };
    program.residual_inf_norm = residual(&program, target, basis)?;
    program.exact_residual = exact_residual(&program, target, basis)?;
    Ok(CompileOutcome::Program(program))
}

/// `‖Σ t_j f_j - target‖_∞` in floating point.
pub fn residual(program: &CompiledProgram, target: &[f64], basis: &FilterBasis) -> Result<f64> {
    let mut acc = vec![0.0; basis.dimension()];
    for term in &program.terms {
        let e = basis.entries.get(term.index).ok_or_else(|| Error::InvalidArgument(format!("basis index {} out of range", term.index)))?;
        for (a, v) in acc.iter_mut().zip(&e.vector_f64) {
            *a += term.t * v;
        }
    }
    Ok(acc.iter().zip(target).map(|(a, t)| (a - t).abs()).fold(0.0, f64::max))
}

/// Same norm with durations, targets and filter vectors taken as exact rationals.
pub fn exact_residual(program: &CompiledProgram, target: &[f64], basis: &FilterBasis) -> Result<f64> {
    let exact = |x: f64| rational::from_f64(x).ok_or_else(|| Error::InvalidArgument("non-finite value".into()));
    let mut acc: Vec<Rational> = target.iter().map(|&t| exact(t).map(|r| -r)).collect::<Result<_>>()?;
    for term in &program.terms {
        let e = basis.entries.get(term.index).ok_or_else(|| Error::InvalidArgument(format!("basis index {} out of range", term.index)))?;
        let t = exact(term.t)?;
        for (a, v) in acc.iter_mut().zip(&e.vector.values) {
            *a += &t * v;
        }
    }
    Ok(acc.iter().map(|r| rational::to_f64(&r.abs())).fold(0.0, f64::max))
}

/// Checks a Farkas certificate against the basis and target.
pub fn certifies_infeasibility(cert: &FarkasCertificate, target: &[f64], basis: &FilterBasis) -> bool {
    let a = basis.matrix();
    let by: f64 = cert.y.iter().zip(target).map(|(y, b)| y * b).sum();
    let max_aty = (0..a.ncols()).map(|j| (0..a.nrows()).map(|i| a[(i, j)] * cert.y[i]).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max);
    by > 1e-9 && max_aty <= 1e-9
}

//! Kronecker-delta filters for every distance and sign, the worst-case
//! strength function `s(Q)`, and power-law increment programs.

use std::io::Write;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::filter::{self, lambda_f64, lambda_value, FilterExpr, FilterVector};
use crate::rational::{self, ceil_log2_ratio, int, rat, Rational};
use crate::Precision;

/// Absolute tolerance for float-mode delta verification.
pub const FLOAT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    DistanceOne,
    DistanceTwo,
    DistanceThree,
    DistanceFour,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRecipe {
    pub target_distance: usize,
    pub sign: i8,
    pub n: usize,
    pub construction: Construction,
    pub expr: FilterExpr,
    /// Closed-form concatenation count.
    pub predicted_concatenations: i64,
    /// Second closed form where two disagreeing ones are in circulation (d = 2).
    pub alternative_prediction: Option<i64>,
    /// Concatenation depth of `expr`.
    pub concatenations: u32,
    /// `|f(d)|` of the duration-normalized vector.
    pub achieved_strength: f64,
    #[serde(with = "rational::serde_str")]
    pub achieved_strength_exact: Rational,
    /// Set when the closed-form ladder left survivors and had to be patched.
    pub adjustment: Option<String>,
}

impl DeltaRecipe {
    pub fn count_matches(&self) -> bool {
        self.concatenations as i64 == self.predicted_concatenations
    }
}

fn lam(k: u64) -> FilterExpr {
    FilterExpr::Lambda(k)
}

fn plus_identity(k: u64, w: Rational) -> FilterExpr {
    FilterExpr::Sum(vec![(Rational::one(), lam(k)), (w, lam(0))])
}

/// `(Λ_k + Λ_0)(Λ_k + w Λ_0)` pairs of the binary ladder.
fn ladder_pair(k: u64, w: Rational) -> [FilterExpr; 2] {
    [plus_identity(k, Rational::one()), plus_identity(k, w)]
}

/// Closed-form concatenation counts.
pub fn predicted_concatenations(d: usize, n: usize) -> (i64, Option<i64>) {
    let n = n as u128;
    match d {
        1 => (2 * ceil_log2_ratio(n + 1, 1) - 3, None),
        2 => (2 * ceil_log2_ratio(n, 1) - 4, Some(ceil_log2_ratio(n - 1, 1) - 2)),
        3 => (2 * ceil_log2_ratio(n + 2, 9) + 1, None),
        4 => (2 * ceil_log2_ratio(n + 3, 12) + 1, None),
        q => {
            let q = q as u128;
            (ceil_log2_ratio(n - 1, 1) + 2 * ceil_log2_ratio(n - 1, q), None)
        }
    }
}

/// Factors after the base for the four small-distance cases, with ladder size `m`.
fn small_factors(d: usize, m: i64) -> Vec<FilterExpr> {
    let mut fs = Vec::new();
    match d {
        1 => {
            fs.push(plus_identity(2, Rational::one()));
            for e in 2..=m {
                fs.extend(ladder_pair(1 << e, Rational::one() - rat(1, 1 << (e - 1))));
            }
        }
        2 => {
            fs.push(plus_identity(1, Rational::one()));
            if m >= 1 {
                fs.push(plus_identity(4, Rational::one()));
                for e in 2..=m {
                    fs.extend(ladder_pair(2 << e, Rational::one() - rat(1, 1 << (e - 1))));
                }
            }
        }
        3 | 4 => {
            let (head, step) = if d == 3 {
                (FilterExpr::Sum(vec![(Rational::one(), FilterExpr::Gamma(3)), (rat(1, 3), lam(0))]), 9)
            } else {
                (FilterExpr::Gamma(4), 12)
            };
            fs.push(head);
            for e in 0..=m {
                // 1 - 1/(3 * 2^(e-1))
                let w = Rational::one() - rat(2, 3 * (1 << e));
                fs.extend(ladder_pair(step << e, w));
            }
        }
        _ => unreachable!(),
    }
    fs
}

fn closed_form_ladder(d: usize, n: usize) -> i64 {
    let n = n as u128;
    match d {
        1 => ceil_log2_ratio(n + 1, 1) - 1,
        2 => {
            let e_max = (n - 1) / 2;
            if e_max < 2 {
                0
            } else {
                ceil_log2_ratio(e_max + 2, 1) - 1
            }
        }
        3 => ceil_log2_ratio(n + 2, 9) - 1,
        4 => ceil_log2_ratio(n + 3, 12) - 1,
        _ => unreachable!(),
    }
}

fn generic_factors(q: usize, n: usize) -> Vec<FilterExpr> {
    let (q64, nn) = (q as u64, n as u128);
    let m = ceil_log2_ratio(nn - 1, 1);
    let p = ceil_log2_ratio(nn - 1, q as u128);
    let top = if p == 0 { m - 1 } else { m };
    let beta = rat(q as i64, q as i64 - 4);
    let mut fs = Vec::new();
    for e in 0..=top {
        fs.push(FilterExpr::Sum(vec![(Rational::one(), lam(1 << e)), (beta.clone(), FilterExpr::Gamma(q64))]));
    }
    if p >= 1 {
        fs.push(plus_identity(2 * q64, Rational::one()));
        for e in 2..=p {
            fs.extend(ladder_pair(q64 << e, Rational::one() - rat(1, 1 << (e - 1))));
        }
    }
    fs
}

fn base_for(d: usize, sign: i8) -> FilterExpr {
    if sign < 0 {
        lam(d as u64)
    } else {
        lam(0)
    }
}

/// Entries other than `d` that are nonzero, and whether `f(d)` has the sign asked for.
fn survivors(expr: &FilterExpr, d: usize, n: usize, sign: i8) -> (Vec<usize>, bool) {
    let v: Vec<Rational> = (1..n as u64).map(|x| expr.value_at(x)).collect();
    let s: Vec<usize> = (1..n).filter(|&x| x != d && !v[x - 1].is_zero()).collect();
    let on = &v[d - 1];
    let ok = if sign < 0 { on.is_negative() } else { on.is_positive() };
    (s, ok)
}

/// A `Λ_k` base that vanishes on every survivor with the right sign at `d`.
fn substitute_base(d: usize, n: usize, sign: i8, survivors: &[usize]) -> Option<u64> {
    (1..=4 * n as u64).find(|&k| {
        let at = lambda_value(k, d as u64);
        let sign_ok = if sign < 0 { at.is_negative() } else { at.is_positive() };
        sign_ok && survivors.iter().all(|&s| lambda_value(k, s as u64).is_zero())
    })
}

/// Delta filter nonzero only at distance `d`, with the requested sign.
pub fn delta_expr(d: usize, n: usize, sign: i8) -> Result<DeltaRecipe> {
    if n < 2 || d < 1 || d >= n {
        return invalid(format!("need 1 <= d <= N-1, got d = {d}, N = {n}"));
    }
    if sign != 1 && sign != -1 {
        return invalid("sign must be +1 or -1");
    }
    let (construction, mut m) = match d {
        1 => (Construction::DistanceOne, closed_form_ladder(1, n)),
        2 => (Construction::DistanceTwo, closed_form_ladder(2, n)),
        3 => (Construction::DistanceThree, closed_form_ladder(3, n)),
        4 => (Construction::DistanceFour, closed_form_ladder(4, n)),
        _ => (Construction::Generic, 0),
    };
    let factors = |m: i64| if d <= 4 { small_factors(d, m) } else { generic_factors(d, n) };
    let assemble = |base: FilterExpr, fs: Vec<FilterExpr>| {
        let mut all = vec![base];
        all.extend(fs);
        FilterExpr::chain(all)
    };

    let mut expr = assemble(base_for(d, sign), factors(m));
    let mut adjustment = None;
    let (rest, ok) = survivors(&expr, d, n, sign);
    if !rest.is_empty() || !ok {
        if let Some(k) = substitute_base(d, n, sign, &rest) {
            expr = assemble(lam(k), factors(m));
            adjustment = Some(format!("base L{k} replaces L{} to cancel survivors at {rest:?}", if sign < 0 { d } else { 0 }));
        } else if d <= 4 {
            let start = m;
            loop {
                m += 1;
                expr = assemble(base_for(d, sign), factors(m));
                let (rest, ok) = survivors(&expr, d, n, sign);
                if rest.is_empty() && ok {
                    break;
                }
                if m > start + 64 {
                    return invalid(format!("no delta construction found for d = {d}, N = {n}"));
                }
            }
            adjustment = Some(format!("ladder extended from {} to {} rungs", start + 1, m + 1));
        }
        let (rest, ok) = survivors(&expr, d, n, sign);
        if !rest.is_empty() || !ok {
            return invalid(format!("delta construction for d = {d}, N = {n} leaves survivors at {rest:?}"));
        }
    }

    let (predicted, alternative) = predicted_concatenations(d, n);
    let strength = (expr.value_at(d as u64) / expr.duration()).abs();
    Ok(DeltaRecipe {
        target_distance: d,
        sign,
        n,
        construction,
        concatenations: expr.concatenation_depth(),
        expr,
        predicted_concatenations: predicted,
        alternative_prediction: alternative,
        achieved_strength: rational::to_f64(&strength),
        achieved_strength_exact: strength,
        adjustment,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub n: usize,
    pub target_distance: usize,
    pub sign: i8,
    pub exact: bool,
    /// Normalized value at the target distance.
    pub on_target: f64,
    pub max_off_target: f64,
    /// Off-target distances whose value is nonzero (or above tolerance in float mode).
    pub offending: Vec<(usize, f64)>,
    pub sign_ok: bool,
    pub concatenations: u32,
    pub predicted_concatenations: i64,
    pub alternative_prediction: Option<i64>,
    pub count_matches: bool,
    pub passed: bool,
}

pub fn verify_delta(r: &DeltaRecipe, n: usize, tol: f64, precision: Precision) -> Result<DeltaReport> {
    if r.target_distance >= n {
        return Err(Error::DimensionMismatch { expected: n - 1, got: r.target_distance });
    }
    let dim = n - 1;
    let d = r.target_distance;
    let (values, exact): (Vec<f64>, Option<FilterVector>) = match precision {
        Precision::Rational => {
            let v = filter::normalized_filter_vector(&r.expr, dim)?;
            (v.to_f64(), Some(v))
        }
        Precision::Float64 => {
            let t = r.expr.duration_f64();
            (filter::filter_vector_f64(&r.expr, dim)?.into_iter().map(|x| x / t).collect(), None)
        }
    };
    let offending: Vec<(usize, f64)> = match &exact {
        Some(v) => (1..=dim).filter(|&x| x != d && !v.at(x).is_zero()).map(|x| (x, values[x - 1])).collect(),
        None => (1..=dim).filter(|&x| x != d && values[x - 1].abs() > tol).map(|x| (x, values[x - 1])).collect(),
    };
    let max_off = (1..=dim).filter(|&x| x != d).map(|x| values[x - 1].abs()).fold(0.0, f64::max);
    let on = values[d - 1];
    let sign_ok = match &exact {
        Some(v) => {
            if r.sign < 0 {
                v.at(d).is_negative()
            } else {
                v.at(d).is_positive()
            }
        }
        None => on * r.sign as f64 > tol,
    };
    let count_matches = r.count_matches();
    Ok(DeltaReport {
        n,
        target_distance: d,
        sign: r.sign,
        exact: exact.is_some(),
        on_target: on,
        max_off_target: max_off,
        passed: offending.is_empty() && sign_ok,
        offending,
        sign_ok,
        concatenations: r.concatenations,
        predicted_concatenations: r.predicted_concatenations,
        alternative_prediction: r.alternative_prediction,
        count_matches,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalityCertificate {
    pub n: usize,
    /// Index `2(d-1)` is the negative recipe for `d`, `2(d-1)+1` the positive one.
    pub recipes: Vec<DeltaRecipe>,
    #[serde(with = "rational::serde_str")]
    pub half_width_exact: Rational,
    pub half_width: f64,
}

impl UniversalityCertificate {
    pub fn recipe(&self, d: usize, sign: i8) -> &DeltaRecipe {
        &self.recipes[2 * (d - 1) + usize::from(sign > 0)]
    }

    /// Per-unit-time recipe durations reproducing `target`; `None` outside the cube.
    pub fn decompose(&self, target: &[f64]) -> Option<Vec<(usize, f64)>> {
        if target.len() != self.n - 1 || target.iter().any(|t| t.abs() > self.half_width * (1.0 + 1e-12)) {
            return None;
        }
        let mut out = Vec::new();
        for (i, &t) in target.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let sign = if t < 0.0 { -1 } else { 1 };
            let idx = 2 * i + usize::from(sign > 0);
            out.push((idx, t.abs() / self.recipes[idx].achieved_strength));
        }
        Some(out)
    }
}

/// The `2(N-1)` delta recipes and the half-width of the cube they span.
pub fn universality_certificate(n: usize) -> Result<UniversalityCertificate> {
    if n < 3 {
        return invalid("universality certificate needs N >= 3");
    }
    let recipes: Vec<DeltaRecipe> = (1..n)
        .into_par_iter()
        .flat_map_iter(|d| [delta_expr(d, n, -1), delta_expr(d, n, 1)])
        .collect::<Result<_>>()?;
    let h = recipes.iter().map(|r| r.achieved_strength_exact.clone()).min().unwrap_or_else(Rational::zero);
    Ok(UniversalityCertificate { n, half_width: rational::to_f64(&h), half_width_exact: h, recipes })
}

/// `-log2 6`, the conjectured envelope exponent.
pub fn envelope_exponent() -> f64 {
    -(6f64.log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrengthSample {
    pub q: u64,
    pub n: u64,
    pub s_raw: f64,
    pub s_normalized: f64,
    /// `Q^(-log2 6)`.
    pub guide: f64,
}

/// `s(Q) = Π_{e=0}^{m} (f^Λ_{2^e}(Q) + Q/(Q-4))` with `m = ceil(log2(N-1))`,
/// raw and with every factor divided by `1 + Q/(Q-4)`.
pub fn strength_sq(q: u64, n: u64) -> Result<StrengthSample> {
    if q <= 4 {
        return invalid(format!("s(Q) needs Q > 4, got {q}"));
    }
    if q >= n {
        return invalid(format!("s(Q) needs Q <= N-1, got Q = {q}, N = {n}"));
    }
    let m = ceil_log2_ratio(n as u128 - 1, 1);
    let beta = q as f64 / (q as f64 - 4.0);
    let (mut raw, mut norm) = (1.0, 1.0);
    for e in 0..=m {
        let f = lambda_f64(1u64 << e, q) + beta;
        raw *= f;
        norm *= f / (1.0 + beta);
    }
    Ok(StrengthSample { q, n, s_raw: raw, s_normalized: norm, guide: (q as f64).powf(envelope_exponent()) })
}

/// Samples `qmin..=qmax` at chain length `n`, in parallel on the current rayon pool.
pub fn strength_sweep(n: u64, qmin: u64, qmax: u64) -> Result<Vec<StrengthSample>> {
    if qmin > qmax {
        return invalid("qmin exceeds qmax");
    }
    strength_sq(qmin, n)?;
    strength_sq(qmax, n)?;
    (qmin..=qmax).into_par_iter().map(|q| strength_sq(q, n)).collect()
}

pub fn write_strength_csv<W: Write>(samples: &[StrengthSample], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["Q", "sQ_raw", "sQ_normalized", "guide_Q_pow"])?;
    for s in samples {
        wr.write_record([s.q.to_string(), s.s_raw.to_string(), s.s_normalized.to_string(), s.guide.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Per-bin minima `(Q, s)` used in the fit.
    pub points: Vec<(u64, f64)>,
}

/// Least-squares line through the per-bin minima of `ln s` against `ln Q`,
/// using equal-width bins in `ln Q` (`bins_per_octave` per factor of two).
pub fn fit_lower_envelope(samples: &[StrengthSample], bins_per_octave: usize, normalized: bool) -> Result<EnvelopeFit> {
    if samples.len() < 2 || bins_per_octave == 0 {
        return invalid("envelope fit needs at least two samples");
    }
    let ln = |q: u64| (q as f64).ln();
    let lo = samples.iter().map(|s| ln(s.q)).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| ln(s.q)).fold(f64::NEG_INFINITY, f64::max);
    let octaves = (hi - lo) / std::f64::consts::LN_2;
    let bins = ((octaves * bins_per_octave as f64).round() as usize).max(2);
    let width = (hi - lo) / bins as f64 * (1.0 + 1e-12);
    let mut best: Vec<Option<(u64, f64)>> = vec![None; bins];
    for s in samples {
        let v = if normalized { s.s_normalized } else { s.s_raw };
        let b = (((ln(s.q) - lo) / width) as usize).min(bins - 1);
        if best[b].is_none_or(|(_, x)| v < x) {
            best[b] = Some((s.q, v));
        }
    }
    let points: Vec<(u64, f64)> = best.into_iter().flatten().collect();
    if points.len() < 2 {
        return invalid("envelope fit needs samples in at least two bins");
    }
    let xs: Vec<f64> = points.iter().map(|&(q, _)| ln(q)).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, v)| v.ln()).collect();
    let (slope, intercept) = least_squares_line(&xs, &ys);
    Ok(EnvelopeFit { slope, intercept, points })
}

pub(crate) fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Pearson correlation of `ln s(Q)` with `ln s(2Q)` over pairs present in the sweep.
pub fn octave_correlation(samples: &[StrengthSample]) -> Option<f64> {
    let first = samples.first()?.q;
    let idx = |q: u64| q.checked_sub(first).map(|i| i as usize).filter(|&i| i < samples.len() && samples[i].q == q);
    let mut a = Vec::new();
    let mut b = Vec::new();
    for s in samples {
        if let Some(j) = idx(2 * s.q) {
            a.push(s.s_raw.ln());
            b.push(samples[j].s_raw.ln());
        }
    }
    if a.len() < 3 {
        return None;
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    Some(cov / (va * vb).sqrt())
}

/// `x`-fold concatenation of `Λ_k`.
pub fn lambda_power(k: u64, x: usize) -> FilterExpr {
    match x {
        0 => FilterExpr::identity(),
        1 => lam(k),
        _ => FilterExpr::chain(vec![lam(k); x]),
    }
}

/// `Σ_{x<L} Λ_{N+1}^x` with unit weights; at distance `d` this is the partial
/// geometric sum of `f = 1 - 2d/(N+1)`, tending to `(N+1)/(2d)`.
pub fn power_law_expr(levels: usize, n: usize) -> Result<FilterExpr> {
    if levels < 1 || n < 2 {
        return invalid("power_law_expr needs L >= 1 and N >= 2");
    }
    power_law_from_weights(&vec![Rational::one(); levels], n as u64 + 1)
}

/// `Σ_i α_i Λ_k^i`; every weight must be nonnegative.
pub fn power_law_from_weights(alphas: &[Rational], k: u64) -> Result<FilterExpr> {
    if alphas.is_empty() {
        return invalid("need at least one weight");
    }
    let terms = alphas
        .iter()
        .enumerate()
        .filter(|(_, a)| !a.is_zero())
        .map(|(i, a)| (a.clone(), lambda_power(k, i)))
        .collect::<Vec<_>>();
    if terms.is_empty() {
        return Err(Error::ZeroDuration);
    }
    FilterExpr::sum(terms)
}

/// Program for a target `Σ_i c_i (d - k/2)^i` (valid for `d <= k`). Since
/// `d - k/2 = -(k/2) f^Λ_k(d)`, the weights are `α_i = c_i (-k/2)^i`; targets
/// whose coefficients do not alternate in sign need a negative weight and are
/// rejected.
pub fn taylor_power_law_expr(coeffs: &[Rational], k: u64) -> Result<FilterExpr> {
    let half = -rat(k as i64, 2);
    let mut p = Rational::one();
    let mut alphas = Vec::with_capacity(coeffs.len());
    for c in coeffs {
        let a = c * &p;
        if a.is_negative() {
            return Err(Error::NegativeWeight(rational::format(&a)));
        }
        alphas.push(a);
        p *= &half;
    }
    power_law_from_weights(&alphas, k)
}

/// Geometric-tail bound `|f|^L / (1 - f)` on the gap between the `L`-level
/// profile and its limit, with `f = 1 - 2d/(N+1)`.
pub fn power_law_tail(d: usize, levels: usize, n: usize) -> f64 {
    let f = 1.0 - 2.0 * d as f64 / (n as f64 + 1.0);
    f.abs().powi(levels as i32) / (1.0 - f)
}

/// Exact partial sum `(1 - f^L)/(1 - f)` for comparison with the expression.
pub fn power_law_partial_sum(d: usize, levels: usize, n: usize) -> Rational {
    let f = int(1) - rat(2 * d as i64, n as i64 + 1);
    let mut acc = Rational::zero();
    let mut p = Rational::one();
    for _ in 0..levels {
        acc += &p;
        p *= &f;
    }
    acc
}

//! Pulse schedules: per-qubit ±1 control-propagator signs over weighted segments.

use std::collections::HashMap;
use std::io::Write;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::filter::{FilterExpr, FilterVector, ResourceCount};
use crate::rational::{self, rat, Rational};

/// One layer of signs; a set bit means the qubit's propagator is `-1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignRow {
    n: usize,
    bits: Vec<u64>,
}

impl SignRow {
    pub fn plus(n: usize) -> Self {
        SignRow { n, bits: vec![0; n.div_ceil(64)] }
    }

    pub fn from_signs(signs: &[i8]) -> Self {
        let mut r = SignRow::plus(signs.len());
        for (i, &s) in signs.iter().enumerate() {
            assert!(s == 1 || s == -1, "signs must be +1 or -1");
            if s < 0 {
                r.flip(i);
            }
        }
        r
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Whether qubit `i` (0-based) carries `-1`.
    pub fn is_negative(&self, i: usize) -> bool {
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn sign(&self, i: usize) -> i8 {
        if self.is_negative(i) {
            -1
        } else {
            1
        }
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i / 64] ^= 1 << (i % 64);
    }

    pub fn signs(&self) -> Vec<i8> {
        (0..self.n).map(|i| self.sign(i)).collect()
    }

    /// Entrywise product of sign rows.
    pub fn mul(&self, other: &SignRow) -> SignRow {
        assert_eq!(self.n, other.n);
        SignRow { n: self.n, bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a ^ b).collect() }
    }

    pub fn count_negative(&self) -> u32 {
        self.bits.iter().map(|b| b.count_ones()).sum()
    }

    pub fn is_identity(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    /// Representative with qubit 1 at `+1`; rows differing by a global sign
    /// conjugate a two-body Hamiltonian identically.
    pub fn canonical(&self) -> SignRow {
        if self.n == 0 || !self.is_negative(0) {
            return self.clone();
        }
        let mut r = self.clone();
        for (w, b) in r.bits.iter_mut().enumerate() {
            let width = (self.n - 64 * w).min(64);
            let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
            *b ^= mask;
        }
        r
    }

    /// Bit mask over the basis-state index convention used by the simulator
    /// (qubit 1 is the most significant bit).
    pub fn basis_mask(&self) -> usize {
        assert!(self.n <= usize::BITS as usize);
        let mut m = 0usize;
        for i in 0..self.n {
            if self.is_negative(i) {
                m |= 1 << (self.n - 1 - i);
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub weight: Rational,
    pub signs: SignRow,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PulseSchedule {
    n: usize,
    segments: Vec<Segment>,
    depth: u32,
}

impl PulseSchedule {
    pub fn new(n: usize, segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return invalid("schedule needs at least one segment");
        }
        for s in &segments {
            if s.signs.len() != n {
                return Err(Error::QubitMismatch(n, s.signs.len()));
            }
            if !s.weight.is_positive() {
                return invalid("segment durations must be positive");
            }
        }
        Ok(PulseSchedule { n, segments, depth: 0 })
    }

    pub fn qubit_count(&self) -> usize {
        self.n
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    /// Concatenations recorded while building this schedule.
    pub fn concatenation_depth(&self) -> u32 {
        self.depth
    }

    pub fn total_weight(&self) -> Rational {
        self.segments.iter().fold(Rational::zero(), |a, s| a + &s.weight)
    }

    /// Segment weights divided by the total, as floats.
    pub fn normalized_weights_f64(&self) -> Vec<f64> {
        let t = self.total_weight();
        self.segments.iter().map(|s| rational::to_f64(&(&s.weight / &t))).collect()
    }

    /// Sign trajectory with adjacent identical rows merged.
    pub fn trajectory(&self, total_time: f64) -> SignTrajectory {
        let total = self.total_weight();
        let mut intervals: Vec<Interval> = Vec::new();
        let mut cum = Rational::zero();
        for s in &self.segments {
            let start = time_of(&cum, &total, total_time);
            cum += &s.weight;
            let end = time_of(&cum, &total, total_time);
            match intervals.last_mut() {
                Some(last) if last.signs == s.signs => last.end = end,
                _ => intervals.push(Interval { start, end, signs: s.signs.clone() }),
            }
        }
        SignTrajectory { n: self.n, total_time, intervals }
    }

    /// Integer weights over a common denominator when they fit in `i128`.
    fn integer_weights(&self) -> Option<Vec<i128>> {
        let mut l = BigInt::one();
        for s in &self.segments {
            l = l.lcm(s.weight.denom());
        }
        let mut out = Vec::with_capacity(self.segments.len());
        let mut total: i128 = 0;
        for s in &self.segments {
            let v = (s.weight.numer() * (&l / s.weight.denom())).to_i128()?;
            total = total.checked_add(v)?;
            out.push(v);
        }
        Some(out)
    }
}

fn time_of(cum: &Rational, total: &Rational, total_time: f64) -> f64 {
    rational::to_f64(&(cum / total)) * total_time
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return invalid(format!("qubit count must be at least 2, got {n}"));
    }
    Ok(())
}

/// Free evolution: one segment, all `+1`.
pub fn schedule_identity(n: usize) -> Result<PulseSchedule> {
    check_n(n)?;
    PulseSchedule::new(n, vec![Segment { weight: Rational::one(), signs: SignRow::plus(n) }])
}

/// `k` equal segments; qubit `i` in segment `j` carries `(-1)^floor((i-j-1)/k)`.
pub fn schedule_lambda(k: u64, n: usize) -> Result<PulseSchedule> {
    if k < 1 {
        return Err(Error::InvalidIndex { kind: "lambda", k, min: 1 });
    }
    check_n(n)?;
    let w = rat(1, k as i64);
    let k = k as i64;
    let segments = (1..=k)
        .map(|j| {
            let mut row = SignRow::plus(n);
            for i in 1..=n as i64 {
                if (i - j - 1).div_euclid(k).rem_euclid(2) == 1 {
                    row.flip((i - 1) as usize);
                }
            }
            Segment { weight: w.clone(), signs: row }
        })
        .collect();
    PulseSchedule::new(n, segments)
}

/// `k` equal segments; qubit `i` in segment `j` is `+1` iff `i ≡ j (mod k)`.
pub fn schedule_gamma(k: u64, n: usize) -> Result<PulseSchedule> {
    if k < 2 {
        return Err(Error::InvalidIndex { kind: "gamma", k, min: 2 });
    }
    check_n(n)?;
    let w = rat(1, k as i64);
    let k = k as i64;
    let segments = (1..=k)
        .map(|j| {
            let mut row = SignRow::plus(n);
            for i in 1..=n as i64 {
                if (i - j).rem_euclid(k) != 0 {
                    row.flip((i - 1) as usize);
                }
            }
            Segment { weight: w.clone(), signs: row }
        })
        .collect();
    PulseSchedule::new(n, segments)
}

pub(crate) fn primitive_schedule(expr: &FilterExpr, n: usize) -> Result<PulseSchedule> {
    match expr {
        FilterExpr::Lambda(0) => schedule_identity(n),
        FilterExpr::Lambda(k) => schedule_lambda(*k, n),
        FilterExpr::Gamma(k) => schedule_gamma(*k, n),
        _ => invalid("not a primitive filter"),
    }
}

/// Nests `inner` inside every segment of `outer`; durations multiply.
pub fn concatenate(outer: &PulseSchedule, inner: &PulseSchedule) -> Result<PulseSchedule> {
    if outer.n != inner.n {
        return Err(Error::QubitMismatch(outer.n, inner.n));
    }
    let mut segments = Vec::with_capacity(outer.segments.len() * inner.segments.len());
    for a in &outer.segments {
        for b in &inner.segments {
            segments.push(Segment { weight: &a.weight * &b.weight, signs: a.signs.mul(&b.signs) });
        }
    }
    Ok(PulseSchedule { n: outer.n, segments, depth: outer.depth.max(inner.depth) + 1 })
}

/// Back-to-back parts, part `p` rescaled to total weight `duration_p`.
pub fn sequence(parts: &[(PulseSchedule, Rational)]) -> Result<PulseSchedule> {
    let Some((first, _)) = parts.first() else {
        return invalid("sequence needs at least one part");
    };
    let n = first.n;
    let mut segments = Vec::new();
    let mut depth = 0;
    for (s, dur) in parts {
        if s.n != n {
            return Err(Error::QubitMismatch(n, s.n));
        }
        if !dur.is_positive() {
            return invalid("sequence durations must be positive");
        }
        let scale = dur / s.total_weight();
        segments.extend(s.segments.iter().map(|g| Segment { weight: &g.weight * &scale, signs: g.signs.clone() }));
        depth = depth.max(s.depth);
    }
    Ok(PulseSchedule { n, segments, depth })
}

/// Duration-weighted pair correlations `Σ_l w_l [w_j]_l [w_{j+d}]_l`, checked
/// for independence of `j`.
pub fn realized_filter_unnormalized(s: &PulseSchedule) -> Result<FilterVector> {
    let n = s.n;
    if let Some(w) = s.integer_weights() {
        let mut l = BigInt::one();
        for g in &s.segments {
            l = l.lcm(g.weight.denom());
        }
        let mut values = Vec::with_capacity(n - 1);
        for d in 1..n {
            let dot = |j: usize| -> i128 {
                s.segments
                    .iter()
                    .zip(&w)
                    .map(|(g, &wl)| if g.signs.is_negative(j) != g.signs.is_negative(j + d) { -wl } else { wl })
                    .sum()
            };
            let v0 = dot(0);
            if let Some(j) = (1..n - d).find(|&j| dot(j) != v0) {
                return Err(Error::NotTranslationInvariant { j: j + 1, d });
            }
            values.push(Rational::new(BigInt::from(v0), l.clone()));
        }
        return Ok(FilterVector::new(values));
    }
    let mut values = Vec::with_capacity(n - 1);
    for d in 1..n {
        let dot = |j: usize| -> Rational {
            s.segments.iter().fold(Rational::zero(), |acc, g| {
                if g.signs.is_negative(j) != g.signs.is_negative(j + d) {
                    acc - &g.weight
                } else {
                    acc + &g.weight
                }
            })
        };
        let v0 = dot(0);
        if let Some(j) = (1..n - d).find(|&j| dot(j) != v0) {
            return Err(Error::NotTranslationInvariant { j: j + 1, d });
        }
        values.push(v0);
    }
    Ok(FilterVector::new(values))
}

/// Normalized filter realized by a schedule.
pub fn realized_filter(s: &PulseSchedule) -> Result<FilterVector> {
    let v = realized_filter_unnormalized(s)?;
    Ok(v.scale(&s.total_weight().recip()))
}

/// Explicit schedule for an expression. Sums become sequences (each child
/// running for `w * duration(child)`), products become concatenations.
pub fn materialize(expr: &FilterExpr, n: usize) -> Result<PulseSchedule> {
    expr.validate()?;
    build(expr, n, false)
}

/// Like [`materialize`] but merges rows equal up to a global sign after every
/// step. The result is only equivalent for two-body Hamiltonians whose terms
/// commute with each other (pure Ising); it keeps deep products tractable.
pub fn materialize_compressed(expr: &FilterExpr, n: usize) -> Result<PulseSchedule> {
    expr.validate()?;
    build(expr, n, true)
}

fn build(expr: &FilterExpr, n: usize, merge: bool) -> Result<PulseSchedule> {
    let s = match expr {
        FilterExpr::Lambda(_) | FilterExpr::Gamma(_) => primitive_schedule(expr, n)?,
        FilterExpr::Sum(terms) => {
            let mut parts = Vec::new();
            for (w, e) in terms {
                if w.is_zero() {
                    continue;
                }
                let child = build(e, n, merge)?;
                let dur = w * child.total_weight();
                parts.push((child, dur));
            }
            if parts.is_empty() {
                return Err(Error::ZeroDuration);
            }
            sequence(&parts)?
        }
        FilterExpr::Product(fs) => {
            let mut acc: Option<PulseSchedule> = None;
            for f in fs {
                let child = build(f, n, merge)?;
                let next = match acc {
                    None => child,
                    Some(a) => concatenate(&a, &child)?,
                };
                acc = Some(if merge { compress(&next) } else { next });
            }
            match acc {
                Some(a) => a,
                None => schedule_identity(n)?,
            }
        }
    };
    Ok(if merge { compress(&s) } else { s })
}

/// Merges rows equal up to a global sign, summing their weights, in order of
/// first appearance.
pub fn compress(s: &PulseSchedule) -> PulseSchedule {
    let mut index: HashMap<SignRow, usize> = HashMap::new();
    let mut segments: Vec<Segment> = Vec::new();
    for g in &s.segments {
        let c = g.signs.canonical();
        match index.get(&c) {
            Some(&i) => segments[i].weight += &g.weight,
            None => {
                index.insert(c.clone(), segments.len());
                segments.push(Segment { weight: g.weight.clone(), signs: c });
            }
        }
    }
    PulseSchedule { n: s.n, segments, depth: s.depth }
}

/// Pulse layers and spin flips, counting the dressing layer at `t = 0` and the
/// undressing layer at `t = T`.
pub fn count_resources(s: &PulseSchedule) -> ResourceCount {
    let mut rc = BoundarySummary::of_schedule(s).count();
    rc.concatenation_depth = s.depth;
    rc
}

/// Flip patterns at every boundary of a schedule, kept as a multiset so that
/// concatenation and sequencing can be tallied without building the schedule.
#[derive(Debug, Clone)]
pub(crate) struct BoundarySummary {
    first: SignRow,
    last: SignRow,
    interior: HashMap<SignRow, u128>,
    segments: u128,
}

impl BoundarySummary {
    pub(crate) fn identity(n: usize) -> Self {
        BoundarySummary { first: SignRow::plus(n), last: SignRow::plus(n), interior: HashMap::new(), segments: 1 }
    }

    pub(crate) fn of_schedule(s: &PulseSchedule) -> Self {
        let mut interior = HashMap::new();
        for w in s.segments.windows(2) {
            *interior.entry(w[0].signs.mul(&w[1].signs)).or_insert(0u128) += 1;
        }
        BoundarySummary {
            first: s.segments[0].signs.clone(),
            last: s.segments[s.segments.len() - 1].signs.clone(),
            interior,
            segments: s.segments.len() as u128,
        }
    }

    /// `self` outer, `inner` nested in each of its segments.
    pub(crate) fn concatenate(&self, inner: &BoundarySummary) -> BoundarySummary {
        let mut interior: HashMap<SignRow, u128> = HashMap::new();
        for (p, c) in &inner.interior {
            let e = interior.entry(p.clone()).or_insert(0);
            *e = e.saturating_add(c.saturating_mul(self.segments));
        }
        let wrap = inner.last.mul(&inner.first);
        for (p, c) in &self.interior {
            let e = interior.entry(p.mul(&wrap)).or_insert(0);
            *e = e.saturating_add(*c);
        }
        BoundarySummary {
            first: self.first.mul(&inner.first),
            last: self.last.mul(&inner.last),
            interior,
            segments: self.segments.saturating_mul(inner.segments),
        }
    }

    pub(crate) fn sequence(parts: Vec<BoundarySummary>) -> Option<BoundarySummary> {
        let mut it = parts.into_iter();
        let mut acc = it.next()?;
        for p in it {
            let e = acc.interior.entry(acc.last.mul(&p.first)).or_insert(0);
            *e = e.saturating_add(1);
            for (k, c) in p.interior {
                let e = acc.interior.entry(k).or_insert(0);
                *e = e.saturating_add(c);
            }
            acc.last = p.last;
            acc.segments = acc.segments.saturating_add(p.segments);
        }
        Some(acc)
    }

    pub(crate) fn count(&self) -> ResourceCount {
        let mut layers: u128 = 0;
        let mut flips: u128 = 0;
        for edge in [&self.first, &self.last] {
            if !edge.is_identity() {
                layers += 1;
                flips += edge.count_negative() as u128;
            }
        }
        for (p, c) in &self.interior {
            if !p.is_identity() {
                layers = layers.saturating_add(*c);
                flips = flips.saturating_add(c.saturating_mul(p.count_negative() as u128));
            }
        }
        ResourceCount { concatenation_depth: 0, pulse_layers: layers, spin_flips: flips, segment_count: self.segments }
    }
}

/// Time-sorted single-qubit Z applications; qubits are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlattenedSchedule {
    pub n: usize,
    pub total_time: f64,
    pub flips: Vec<(f64, usize)>,
}

impl FlattenedSchedule {
    /// Distinct flip times.
    pub fn pulse_layers(&self) -> usize {
        let mut layers = 0;
        let mut last: Option<f64> = None;
        for &(t, _) in &self.flips {
            if last != Some(t) {
                layers += 1;
                last = Some(t);
            }
        }
        layers
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["time", "qubit"])?;
        for (t, q) in &self.flips {
            wr.write_record([t.to_string(), q.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn flatten(s: &PulseSchedule, total_time: f64) -> Result<FlattenedSchedule> {
    if !(total_time > 0.0 && total_time.is_finite()) {
        return invalid("total_time must be positive");
    }
    let total = s.total_weight();
    let mut flips = Vec::new();
    let mut prev = SignRow::plus(s.n);
    let mut cum = Rational::zero();
    for g in &s.segments {
        let t = time_of(&cum, &total, total_time);
        let diff = prev.mul(&g.signs);
        flips.extend((0..s.n).filter(|&i| diff.is_negative(i)).map(|i| (t, i + 1)));
        prev = g.signs.clone();
        cum += &g.weight;
    }
    flips.extend((0..s.n).filter(|&i| prev.is_negative(i)).map(|i| (total_time, i + 1)));
    Ok(FlattenedSchedule { n: s.n, total_time, flips })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub signs: SignRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignTrajectory {
    pub n: usize,
    pub total_time: f64,
    pub intervals: Vec<Interval>,
}

/// Rebuilds the sign trajectory implied by a list of flips.
pub fn reconstruct(f: &FlattenedSchedule) -> Result<SignTrajectory> {
    let mut row = SignRow::plus(f.n);
    let mut intervals: Vec<Interval> = Vec::new();
    let mut t_prev = 0.0;
    let mut i = 0;
    while i < f.flips.len() {
        let t = f.flips[i].0;
        if t < t_prev {
            return invalid("flip events are not time-sorted");
        }
        if t > t_prev {
            intervals.push(Interval { start: t_prev, end: t, signs: row.clone() });
            t_prev = t;
        }
        while i < f.flips.len() && f.flips[i].0 == t {
            let q = f.flips[i].1;
            if q == 0 || q > f.n {
                return invalid(format!("qubit index {q} out of range"));
            }
            row.flip(q - 1);
            i += 1;
        }
    }
    if t_prev < f.total_time {
        intervals.push(Interval { start: t_prev, end: f.total_time, signs: row.clone() });
    }
    if !row.is_identity() {
        return invalid("trajectory does not return to all +1 at the end");
    }
    Ok(SignTrajectory { n: f.n, total_time: f.total_time, intervals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{self, eval_gamma, eval_lambda};
    use crate::rational::int;

    fn rows(s: &PulseSchedule) -> Vec<Vec<i8>> {
        s.segments().iter().map(|g| g.signs.signs()).collect()
    }

    #[test]
    fn lambda_two_three_rows() {
        let s = schedule_lambda(2, 3).unwrap();
        assert_eq!(rows(&s), vec![vec![-1, 1, 1], vec![-1, -1, 1]]);
        assert_eq!(realized_filter(&s).unwrap(), FilterVector::from_ints(&[0, -1]));
        let rc = count_resources(&s);
        assert_eq!((rc.spin_flips, rc.pulse_layers), (4, 3));
    }

    #[test]
    fn lambda_one_alternates() {
        let s = schedule_lambda(1, 6).unwrap();
        assert_eq!(s.segment_count(), 1);
        let f = realized_filter(&s).unwrap();
        for d in 1..6 {
            assert_eq!(*f.at(d), int(if d % 2 == 0 { 1 } else { -1 }));
        }
    }

    #[test]
    fn gamma_examples() {
        let f = realized_filter(&schedule_gamma(4, 8).unwrap()).unwrap();
        for d in 1..4 {
            assert_eq!(*f.at(d), int(0));
        }
        assert_eq!(*f.at(4), int(1));
        let f = realized_filter(&schedule_gamma(3, 7).unwrap()).unwrap();
        assert_eq!(*f.at(1), rat(-1, 3));
        assert!(schedule_gamma(1, 4).is_err());
    }

    #[test]
    fn small_oracle_sweep() {
        for n in 2..=12 {
            for k in 1..=8u64 {
                let f = realized_filter(&schedule_lambda(k, n).unwrap()).unwrap();
                for d in 1..n {
                    assert_eq!(*f.at(d), eval_lambda(k, d as u64).unwrap());
                }
                if k >= 2 {
                    let f = realized_filter(&schedule_gamma(k, n).unwrap()).unwrap();
                    for d in 1..n {
                        assert_eq!(*f.at(d), eval_gamma(k, d as u64).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn concatenation_examples() {
        let n = 5;
        let l1 = schedule_lambda(1, n).unwrap();
        let c = concatenate(&l1, &l1).unwrap();
        assert_eq!(realized_filter(&c).unwrap(), FilterVector::from_ints(&[1, 1, 1, 1]));

        let a = schedule_lambda(2, 4).unwrap();
        let b = schedule_lambda(3, 4).unwrap();
        let c = concatenate(&a, &b).unwrap();
        assert_eq!(c.segment_count(), 6);
        let expect = realized_filter(&a).unwrap().hadamard(&realized_filter(&b).unwrap());
        assert_eq!(realized_filter(&c).unwrap(), expect);

        let id = schedule_identity(4).unwrap();
        assert_eq!(rows(&concatenate(&a, &id).unwrap()), rows(&a));
    }

    #[test]
    fn sequence_examples() {
        let l2 = schedule_lambda(2, 4).unwrap();
        let l0 = schedule_identity(4).unwrap();
        let s = sequence(&[(l2.clone(), int(1)), (l0.clone(), int(1))]).unwrap();
        assert_eq!(*realized_filter_unnormalized(&s).unwrap().at(2), int(0));
        let s = sequence(&[(l2.clone(), int(3))]).unwrap();
        assert_eq!(realized_filter_unnormalized(&s).unwrap(), realized_filter(&l2).unwrap().scale(&int(3)));

        let l1 = schedule_lambda(1, 3).unwrap();
        let half = rat(1, 2);
        let mix = sequence(&[(schedule_identity(3).unwrap(), half.clone()), (l1, half)]).unwrap();
        let l2 = schedule_lambda(2, 3).unwrap();
        assert_eq!(realized_filter(&mix).unwrap(), realized_filter(&concatenate(&l2, &l2).unwrap()).unwrap());
        assert!(sequence(&[(l0, int(0))]).is_err());
    }

    #[test]
    fn materialize_examples() {
        let s = materialize(&FilterExpr::Lambda(0), 5).unwrap();
        assert_eq!(s.segment_count(), 1);
        assert!(s.segments()[0].signs.is_identity());
        let e = FilterExpr::product(vec![FilterExpr::Lambda(2), FilterExpr::Lambda(3)]);
        let s = materialize(&e, 4).unwrap();
        let c = concatenate(&schedule_lambda(2, 4).unwrap(), &schedule_lambda(3, 4).unwrap()).unwrap();
        assert_eq!(s, c);
        let e = FilterExpr::product(vec![filter::decouple_distance_expr(2), filter::decouple_distance_expr(3)]);
        let s = materialize(&e, 4).unwrap();
        assert_eq!(realized_filter_unnormalized(&s).unwrap(), filter::filter_vector(&e, 3).unwrap());
        assert_eq!(realized_filter(&compress(&s)).unwrap(), realized_filter(&s).unwrap());
    }

    #[test]
    fn flatten_examples() {
        let f = flatten(&schedule_identity(4).unwrap(), 1.0).unwrap();
        assert!(f.flips.is_empty());
        assert_eq!(f.total_time, 1.0);
        let f = flatten(&schedule_lambda(2, 3).unwrap(), 1.0).unwrap();
        assert_eq!(f.flips, vec![(0.0, 1), (0.5, 2), (1.0, 1), (1.0, 2)]);
        assert_eq!(f.pulse_layers(), 3);
        let s = schedule_lambda(3, 5).unwrap();
        assert_eq!(reconstruct(&flatten(&s, 2.0).unwrap()).unwrap(), s.trajectory(2.0));
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.starts_with(r#"{"n":3,"total_time":1.0,"flips":[[0.0,1]"#));
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("time,qubit\n0,1\n0.5,2\n"));
    }

    #[test]
    fn canonical_rows() {
        let r = SignRow::from_signs(&[-1, 1, -1]);
        assert_eq!(r.canonical().signs(), vec![1, -1, 1]);
        let mut big = SignRow::plus(70);
        big.flip(0);
        big.flip(69);
        let c = big.canonical();
        assert_eq!(c.count_negative(), 68);
        assert!(!c.is_negative(0) && !c.is_negative(69));
    }
}

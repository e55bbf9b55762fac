//! Primitive filter functions and the positive algebra over them.
//!
//! `Λ_k` is a triangle wave of period `2k` in distance, `Γ_k` boosts distances
//! that are multiples of `k`. Weighted sums are durations (no normalization);
//! products are entrywise.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::{self, BoundarySummary};
use crate::rational::{self, int, rat, Rational};

/// `f^Λ_k(d)`; `k = 0` is free evolution.
pub fn eval_lambda(k: u64, d: u64) -> Result<Rational> {
    if k == 0 {
        return Err(Error::InvalidIndex { kind: "lambda", k, min: 1 });
    }
    Ok(lambda_value(k, d))
}

/// `f^Γ_k(d)`.
pub fn eval_gamma(k: u64, d: u64) -> Result<Rational> {
    if k == 0 {
        return Err(Error::InvalidIndex { kind: "gamma", k, min: 1 });
    }
    Ok(gamma_value(k, d))
}

pub fn eval_lambda_f64(k: u64, d: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidIndex { kind: "lambda", k, min: 1 });
    }
    Ok(lambda_f64(k, d))
}

pub fn eval_gamma_f64(k: u64, d: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidIndex { kind: "gamma", k, min: 1 });
    }
    Ok(gamma_f64(k, d))
}

pub(crate) fn lambda_value(k: u64, d: u64) -> Rational {
    if k == 0 {
        return Rational::one();
    }
    let (q, r) = (d / k, d % k);
    let v = rat(k as i64 - 2 * r as i64, k as i64);
    if q % 2 == 0 {
        v
    } else {
        -v
    }
}

pub(crate) fn gamma_value(k: u64, d: u64) -> Rational {
    if d.is_multiple_of(k) {
        Rational::one()
    } else {
        rat(k as i64 - 4, k as i64)
    }
}

pub(crate) fn lambda_f64(k: u64, d: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let (q, r) = (d / k, d % k);
    let v = 1.0 - 2.0 * r as f64 / k as f64;
    if q % 2 == 0 {
        v
    } else {
        -v
    }
}

pub(crate) fn gamma_f64(k: u64, d: u64) -> f64 {
    if d.is_multiple_of(k) {
        1.0
    } else {
        1.0 - 4.0 / k as f64
    }
}

/// Values `f(1), ..., f(D)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FilterVector {
    pub values: Vec<Rational>,
}

impl FilterVector {
    pub fn new(values: Vec<Rational>) -> Self {
        FilterVector { values }
    }

    pub fn from_ints(values: &[i64]) -> Self {
        FilterVector { values: values.iter().map(|&v| int(v)).collect() }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    /// Entry at distance `d` (1-based).
    pub fn at(&self, d: usize) -> &Rational {
        &self.values[d - 1]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(rational::to_f64).collect()
    }

    pub fn scale(&self, s: &Rational) -> FilterVector {
        FilterVector { values: self.values.iter().map(|v| v * s).collect() }
    }

    pub fn hadamard(&self, other: &FilterVector) -> FilterVector {
        assert_eq!(self.dimension(), other.dimension());
        FilterVector {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn add(&self, other: &FilterVector) -> FilterVector {
        assert_eq!(self.dimension(), other.dimension());
        FilterVector {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn max_abs(&self) -> Rational {
        self.values.iter().map(|v| v.abs()).max().unwrap_or_else(Rational::zero)
    }

    /// Distances with a nonzero entry.
    pub fn support(&self) -> Vec<usize> {
        (1..=self.dimension()).filter(|&d| !self.at(d).is_zero()).collect()
    }
}

impl fmt::Display for FilterVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", rational::format(v))?;
        }
        write!(f, ")")
    }
}

/// Composition tree of primitive filters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "json::Node", into = "json::Node")]
pub enum FilterExpr {
    /// `Λ_k`; `Λ_0` is free evolution.
    Lambda(u64),
    /// `Γ_k` with `k >= 2`.
    Gamma(u64),
    /// Sequential application; weights are durations.
    Sum(Vec<(Rational, FilterExpr)>),
    /// Concatenation.
    Product(Vec<FilterExpr>),
}

impl FilterExpr {
    pub fn identity() -> Self {
        FilterExpr::Lambda(0)
    }

    pub fn lambda(k: u64) -> Self {
        FilterExpr::Lambda(k)
    }

    /// `Γ_1` is the identity and normalizes to `Λ_0`.
    pub fn gamma(k: u64) -> Result<Self> {
        match k {
            0 => Err(Error::InvalidIndex { kind: "gamma", k, min: 1 }),
            1 => Ok(FilterExpr::Lambda(0)),
            _ => Ok(FilterExpr::Gamma(k)),
        }
    }

    pub fn sum(terms: Vec<(Rational, FilterExpr)>) -> Result<Self> {
        if let Some((w, _)) = terms.iter().find(|(w, _)| w.is_negative()) {
            return Err(Error::NegativeWeight(rational::format(w)));
        }
        Ok(FilterExpr::Sum(terms))
    }

    pub fn product(factors: Vec<FilterExpr>) -> Self {
        FilterExpr::Product(factors)
    }

    /// Left-nested binary products, one concatenation per factor after the first.
    pub fn chain(factors: Vec<FilterExpr>) -> Self {
        let mut it = factors.into_iter();
        let first = it.next().unwrap_or_else(FilterExpr::identity);
        it.fold(first, |acc, f| FilterExpr::Product(vec![acc, f]))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FilterExpr::Lambda(_) => Ok(()),
            FilterExpr::Gamma(k) if *k < 2 => Err(Error::InvalidIndex { kind: "gamma", k: *k, min: 2 }),
            FilterExpr::Gamma(_) => Ok(()),
            FilterExpr::Sum(terms) => {
                for (w, e) in terms {
                    if w.is_negative() {
                        return Err(Error::NegativeWeight(rational::format(w)));
                    }
                    e.validate()?;
                }
                Ok(())
            }
            FilterExpr::Product(fs) => fs.iter().try_for_each(|f| f.validate()),
        }
    }

    pub fn is_primitive(&self) -> bool {
        matches!(self, FilterExpr::Lambda(_) | FilterExpr::Gamma(_))
    }

    /// Maximum number of `Product` nodes on a root-to-leaf path.
    pub fn concatenation_depth(&self) -> u32 {
        match self {
            FilterExpr::Lambda(_) | FilterExpr::Gamma(_) => 0,
            FilterExpr::Sum(t) => t.iter().map(|(_, e)| e.concatenation_depth()).max().unwrap_or(0),
            FilterExpr::Product(fs) => 1 + fs.iter().map(|e| e.concatenation_depth()).max().unwrap_or(0),
        }
    }

    /// Primitives take unit time; sums add weighted durations, products multiply.
    pub fn duration(&self) -> Rational {
        match self {
            FilterExpr::Lambda(_) | FilterExpr::Gamma(_) => Rational::one(),
            FilterExpr::Sum(t) => t.iter().map(|(w, e)| w * e.duration()).fold(Rational::zero(), |a, b| a + b),
            FilterExpr::Product(fs) => fs.iter().map(|e| e.duration()).fold(Rational::one(), |a, b| a * b),
        }
    }

    pub fn duration_f64(&self) -> f64 {
        match self {
            FilterExpr::Lambda(_) | FilterExpr::Gamma(_) => 1.0,
            FilterExpr::Sum(t) => t.iter().map(|(w, e)| rational::to_f64(w) * e.duration_f64()).sum(),
            FilterExpr::Product(fs) => fs.iter().map(|e| e.duration_f64()).product(),
        }
    }

    /// Unnormalized value at distance `d`.
    pub fn value_at(&self, d: u64) -> Rational {
        match self {
            FilterExpr::Lambda(k) => lambda_value(*k, d),
            FilterExpr::Gamma(k) => gamma_value(*k, d),
            FilterExpr::Sum(t) => t.iter().map(|(w, e)| w * e.value_at(d)).fold(Rational::zero(), |a, b| a + b),
            FilterExpr::Product(fs) => {
                let mut acc = Rational::one();
                for f in fs {
                    if acc.is_zero() {
                        break;
                    }
                    acc *= f.value_at(d);
                }
                acc
            }
        }
    }

    pub fn value_at_f64(&self, d: u64) -> f64 {
        match self {
            FilterExpr::Lambda(k) => lambda_f64(*k, d),
            FilterExpr::Gamma(k) => gamma_f64(*k, d),
            FilterExpr::Sum(t) => t.iter().map(|(w, e)| rational::to_f64(w) * e.value_at_f64(d)).sum(),
            FilterExpr::Product(fs) => fs.iter().map(|e| e.value_at_f64(d)).product(),
        }
    }
}

impl fmt::Display for FilterExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterExpr::Lambda(k) => write!(f, "L{k}"),
            FilterExpr::Gamma(k) => write!(f, "G{k}"),
            FilterExpr::Sum(t) => {
                write!(f, "(")?;
                for (i, (w, e)) in t.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    if w.is_one() {
                        write!(f, "{e}")?;
                    } else {
                        write!(f, "{}*{e}", rational::format(w))?;
                    }
                }
                write!(f, ")")
            }
            FilterExpr::Product(fs) => {
                write!(f, "[")?;
                for (i, e) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " o ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// Unnormalized filter vector over distances `1..=dim`.
pub fn filter_vector(expr: &FilterExpr, dim: usize) -> Result<FilterVector> {
    if dim == 0 {
        return crate::error::invalid("dimension must be at least 1");
    }
    expr.validate()?;
    Ok(FilterVector::new((1..=dim as u64).map(|d| expr.value_at(d)).collect()))
}

pub fn filter_vector_f64(expr: &FilterExpr, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 {
        return crate::error::invalid("dimension must be at least 1");
    }
    expr.validate()?;
    Ok((1..=dim as u64).map(|d| expr.value_at_f64(d)).collect())
}

/// Filter vector per unit time.
pub fn normalized_filter_vector(expr: &FilterExpr, dim: usize) -> Result<FilterVector> {
    let v = filter_vector(expr, dim)?;
    let t = expr.duration();
    if t.is_zero() {
        return Err(Error::ZeroDuration);
    }
    Ok(v.scale(&t.recip()))
}

/// `Λ_k + Λ_0`: zero at `d = k` (and odd multiples of `k`).
pub fn decouple_distance_expr(k: u64) -> FilterExpr {
    FilterExpr::Sum(vec![(Rational::one(), FilterExpr::Lambda(k)), (Rational::one(), FilterExpr::Lambda(0))])
}

/// `Π_{k=2}^{N-1} (Λ_k + Λ_0)`, which keeps only `d = 1` for `N <= 4`.
pub fn nearest_neighbour_expr(n: usize) -> FilterExpr {
    FilterExpr::Product((2..n as u64).map(decouple_distance_expr).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceCount {
    pub concatenation_depth: u32,
    pub pulse_layers: u128,
    pub spin_flips: u128,
    pub segment_count: u128,
}

/// Resource totals of `materialize(expr, n)` computed from boundary summaries only.
pub fn resource_estimate(expr: &FilterExpr, n: usize) -> Result<ResourceCount> {
    if n < 2 {
        return crate::error::invalid("resource_estimate needs N >= 2");
    }
    expr.validate()?;
    let summary = summarize(expr, n)?.ok_or(Error::ZeroDuration)?;
    let mut rc = summary.count();
    rc.concatenation_depth = expr.concatenation_depth();
    Ok(rc)
}

fn summarize(expr: &FilterExpr, n: usize) -> Result<Option<BoundarySummary>> {
    Ok(match expr {
        FilterExpr::Lambda(_) | FilterExpr::Gamma(_) => {
            Some(BoundarySummary::of_schedule(&pulse::primitive_schedule(expr, n)?))
        }
        FilterExpr::Sum(terms) => {
            let mut parts = Vec::new();
            for (w, e) in terms {
                if w.is_zero() {
                    continue;
                }
                if let Some(s) = summarize(e, n)? {
                    parts.push(s);
                }
            }
            BoundarySummary::sequence(parts)
        }
        FilterExpr::Product(fs) => {
            let mut acc: Option<BoundarySummary> = None;
            for f in fs {
                let Some(s) = summarize(f, n)? else { return Ok(None) };
                acc = Some(match acc {
                    None => s,
                    Some(a) => a.concatenate(&s),
                });
            }
            Some(acc.unwrap_or_else(|| BoundarySummary::identity(n)))
        }
    })
}

mod json {
    use serde::{Deserialize, Serialize};

    use super::FilterExpr;
    use crate::rational;

    #[derive(Serialize, Deserialize)]
    #[serde(tag = "op", rename_all = "lowercase", deny_unknown_fields)]
    pub enum Node {
        Lambda { k: u64 },
        Gamma { k: u64 },
        Sum { terms: Vec<Term> },
        Prod { factors: Vec<Node> },
    }

    #[derive(Serialize, Deserialize)]
    pub struct Term {
        pub w: Weight,
        pub e: Node,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    pub enum Weight {
        Num(serde_json::Number),
        Text(String),
    }

    impl TryFrom<Node> for FilterExpr {
        type Error = String;

        fn try_from(n: Node) -> Result<Self, String> {
            Ok(match n {
                Node::Lambda { k } => FilterExpr::Lambda(k),
                Node::Gamma { k } => FilterExpr::gamma(k).map_err(|e| e.to_string())?,
                Node::Sum { terms } => {
                    let mut out = Vec::with_capacity(terms.len());
                    for t in terms {
                        let w = match &t.w {
                            Weight::Num(x) => rational::parse(&x.to_string()),
                            Weight::Text(s) => rational::parse(s),
                        }
                        .ok_or_else(|| "unparseable weight".to_string())?;
                        out.push((w, FilterExpr::try_from(t.e)?));
                    }
                    FilterExpr::sum(out).map_err(|e| e.to_string())?
                }
                Node::Prod { factors } => FilterExpr::Product(
                    factors.into_iter().map(FilterExpr::try_from).collect::<Result<_, _>>()?,
                ),
            })
        }
    }

    impl From<FilterExpr> for Node {
        fn from(e: FilterExpr) -> Node {
            match e {
                FilterExpr::Lambda(k) => Node::Lambda { k },
                FilterExpr::Gamma(k) => Node::Gamma { k },
                FilterExpr::Sum(t) => Node::Sum {
                    terms: t
                        .into_iter()
                        .map(|(w, e)| {
                            let w = if w.denom() == &1.into() {
                                match i64::try_from(w.numer()) {
                                    Ok(v) => Weight::Num(v.into()),
                                    Err(_) => Weight::Text(rational::format(&w)),
                                }
                            } else {
                                Weight::Text(rational::format(&w))
                            };
                            Term { w, e: e.into() }
                        })
                        .collect(),
                },
                FilterExpr::Product(fs) => Node::Prod { factors: fs.into_iter().map(Node::from).collect() },
            }
        }
    }
}

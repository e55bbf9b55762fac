//! Filter algebra, pulse schedules, delta-vector constructions, an LP compiler
//! over filter bases, and a dense small-N spin simulator for checking all of it.

pub mod delta;
pub mod error;
pub mod filter;
pub mod io;
pub mod lp;
pub mod pulse;
pub mod rational;
pub mod sim;

pub use error::{Error, Result};
pub use filter::{FilterExpr, FilterVector};
pub use rational::Rational;

/// Arithmetic path for operations that have both an exact and a float version.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    Rational,
    Float64,
}

impl Precision {
    pub const ENV_VAR: &'static str = "HAMFORGE_PRECISION";

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rational" | "exact" => Ok(Precision::Rational),
            "float64" | "f64" | "float" => Ok(Precision::Float64),
            other => error::invalid(format!("unknown precision '{other}'")),
        }
    }

    /// Reads `HAMFORGE_PRECISION`; unset means rational.
    pub fn from_env() -> Result<Self> {
        match std::env::var(Self::ENV_VAR) {
            Ok(v) => Self::parse(&v),
            Err(_) => Ok(Precision::Rational),
        }
    }
}

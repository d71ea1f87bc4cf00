use crate::error::{domain, Result};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquationKind {
    Wave,
    Heat,
}

impl EquationKind {
    pub fn name(self) -> &'static str {
        match self {
            EquationKind::Wave => "wave",
            EquationKind::Heat => "heat",
        }
    }
}

impl fmt::Display for EquationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EquationKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wave" => Ok(EquationKind::Wave),
            "heat" => Ok(EquationKind::Heat),
            other => Err(format!("unknown equation '{other}' (expected wave or heat)")),
        }
    }
}

/// Constant initial data. The heat equation ignores `v0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialData {
    pub u0: f64,
    pub v0: f64,
}

impl InitialData {
    pub fn new(u0: f64, v0: f64) -> Result<Self> {
        if !(u0 >= 0.0 && u0.is_finite()) || !(v0 >= 0.0 && v0.is_finite()) {
            return domain(format!("initial data must be finite and nonnegative (u0={u0}, v0={v0})"));
        }
        Ok(Self { u0, v0 })
    }

    /// Solution of the homogeneous problem at time t (x-independent).
    pub fn w(&self, kind: EquationKind, t: f64) -> f64 {
        match kind {
            EquationKind::Wave => self.u0 + t * self.v0,
            EquationKind::Heat => self.u0,
        }
    }
}

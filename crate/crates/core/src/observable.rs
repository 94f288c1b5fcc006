//! Named scalar observables `f` whose time averages are estimated.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis indices are zero-based internally; the text form `x1` is axis 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    Constant { value: f64 },
    Coordinate { axis: usize },
    /// `x_axis^power`.
    Monomial { axis: usize, power: u32 },
    /// `cos(mode·x_axis)`.
    Cosine { axis: usize, mode: u32 },
    /// `sin(mode·x_axis)`.
    Sine { axis: usize, mode: u32 },
}

impl Observable {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Observable::Constant { value } => value,
            Observable::Coordinate { axis } => x[axis],
            Observable::Monomial { axis, power } => x[axis].powi(power as i32),
            Observable::Cosine { axis, mode } => (mode as f64 * x[axis]).cos(),
            Observable::Sine { axis, mode } => (mode as f64 * x[axis]).sin(),
        }
    }

    pub fn axis(&self) -> Option<usize> {
        match *self {
            Observable::Constant { .. } => None,
            Observable::Coordinate { axis }
            | Observable::Monomial { axis, .. }
            | Observable::Cosine { axis, .. }
            | Observable::Sine { axis, .. } => Some(axis),
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self.axis() {
            Some(a) if a >= dim => Err(Error::config(format!(
                "observable {self} refers to axis {} but the state space has dimension {dim}",
                a + 1
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Observable::Constant { value } => write!(f, "const:{value}"),
            Observable::Coordinate { axis } => write!(f, "x{}", axis + 1),
            Observable::Monomial { axis, power } => write!(f, "x{}^{power}", axis + 1),
            Observable::Cosine { axis, mode } => write!(f, "cos({mode}x{})", axis + 1),
            Observable::Sine { axis, mode } => write!(f, "sin({mode}x{})", axis + 1),
        }
    }
}

fn parse_axis(s: &str) -> Option<usize> {
    let n: usize = s.strip_prefix('x')?.parse().ok()?;
    n.checked_sub(1)
}

impl FromStr for Observable {
    type Err = Error;

    /// Accepts `x2`, `x1^3`, `cos(2x1)`, `sin(x2)`, `const:1.5`, `zero`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::config(format!("cannot parse observable '{s}'"));
        if s == "zero" {
            return Ok(Observable::Constant { value: 0.0 });
        }
        if let Some(v) = s.strip_prefix("const:") {
            return Ok(Observable::Constant {
                value: v.parse().map_err(|_| bad())?,
            });
        }
        for (prefix, is_cos) in [("cos(", true), ("sin(", false)] {
            if let Some(inner) = s.strip_prefix(prefix).and_then(|r| r.strip_suffix(')')) {
                let split = inner.find('x').ok_or_else(bad)?;
                let mode = match &inner[..split] {
                    "" => 1,
                    m => m.parse().map_err(|_| bad())?,
                };
                let axis = parse_axis(&inner[split..]).ok_or_else(bad)?;
                return Ok(if is_cos {
                    Observable::Cosine { axis, mode }
                } else {
                    Observable::Sine { axis, mode }
                });
            }
        }
        if let Some((base, pow)) = s.split_once('^') {
            let axis = parse_axis(base).ok_or_else(bad)?;
            let power = pow.parse().map_err(|_| bad())?;
            return Ok(Observable::Monomial { axis, power });
        }
        parse_axis(s)
            .map(|axis| Observable::Coordinate { axis })
            .ok_or_else(bad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for text in ["x1", "x3^2", "cos(2x1)", "sin(1x2)", "const:1.5"] {
            let obs: Observable = text.parse().unwrap();
            assert_eq!(obs.to_string().parse::<Observable>().unwrap(), obs);
        }
        assert_eq!("sin(x2)".parse::<Observable>().unwrap(), Observable::Sine { axis: 1, mode: 1 });
        assert_eq!("zero".parse::<Observable>().unwrap(), Observable::Constant { value: 0.0 });
    }

    #[test]
    fn rejects_garbage() {
        for text in ["x0", "y1", "cos(2y1)", "x1^a", "const:abc", ""] {
            assert!(text.parse::<Observable>().is_err(), "{text}");
        }
    }

    #[test]
    fn evaluates() {
        let x = [0.5, -2.0];
        assert_eq!("x2".parse::<Observable>().unwrap().eval(&x), -2.0);
        assert_eq!("x2^3".parse::<Observable>().unwrap().eval(&x), -8.0);
        assert_eq!("cos(2x1)".parse::<Observable>().unwrap().eval(&x), 1.0f64.cos());
    }

    #[test]
    fn axis_check() {
        let obs: Observable = "x3".parse().unwrap();
        assert!(obs.check_dim(2).is_err());
        assert!(obs.check_dim(3).is_ok());
    }
}

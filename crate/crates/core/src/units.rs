use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::fmt;

/// Unit in which information quantities are displayed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Nats,
    #[default]
    Bits,
}

impl Units {
    pub fn to_nats(self, value: f64) -> f64 {
        match self {
            Units::Nats => value,
            Units::Bits => value * LN_2,
        }
    }

    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats / LN_2,
        }
    }
}

impl std::str::FromStr for Units {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nats" => Ok(Units::Nats),
            "bits" => Ok(Units::Bits),
            other => Err(format!("unknown unit `{other}` (expected nats or bits)")),
        }
    }
}

/// A coding rate. Stored in nats; constructed and read in either unit.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct Rate(f64);

impl Rate {
    pub const ZERO: Rate = Rate(0.0);

    pub fn nats(value: f64) -> Self {
        Rate(value)
    }

    pub fn bits(value: f64) -> Self {
        Rate(value * LN_2)
    }

    pub fn in_nats(self) -> f64 {
        self.0
    }

    pub fn in_bits(self) -> f64 {
        self.0 / LN_2
    }

    pub fn in_units(self, units: Units) -> f64 {
        units.from_nats(self.0)
    }
}

impl std::ops::Add for Rate {
    type Output = Rate;
    fn add(self, rhs: Rate) -> Rate {
        Rate(self.0 + rhs.0)
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} bits", self.in_bits())
    }
}

/// A Kullback-Leibler divergence or mutual information, in nats.
///
/// An infinite value flags a support violation rather than an error, so
/// constraint checks can simply treat it as infeasible.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Divergence(f64);

impl Divergence {
    pub fn from_nats(value: f64) -> Self {
        Divergence(value)
    }

    pub fn nats(self) -> f64 {
        self.0
    }

    pub fn bits(self) -> f64 {
        self.0 / LN_2
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

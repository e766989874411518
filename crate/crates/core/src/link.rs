//! Odd bijections `g: R -> (-1, 1)` linking the latent process `Z` to the
//! multiplier process `U = g(Z)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    /// `(2 / pi) atan(x)`
    #[default]
    Arctan,
    /// `(sqrt(1 + 4x^2) - 1) / (2x)`, continuous at 0 with value 0
    Algebraic,
    /// `(e^x - 1) / (e^x + 1)`
    Logistic,
}

impl Link {
    pub fn forward(self, x: f64) -> f64 {
        match self {
            Link::Arctan => 2.0 / PI * x.atan(),
            // rationalized form avoids the 0/0 at the origin
            Link::Algebraic => 2.0 * x / ((1.0 + 4.0 * x * x).sqrt() + 1.0),
            Link::Logistic => (0.5 * x).tanh(),
        }
    }

    /// Inverse map on `(-1, 1)`.
    pub fn inverse(self, y: f64) -> f64 {
        match self {
            Link::Arctan => (0.5 * PI * y).tan(),
            Link::Algebraic => y / (1.0 - y * y),
            Link::Logistic => 2.0 * y.atanh(),
        }
    }
}

impl std::str::FromStr for Link {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "arctan" | "g1" => Ok(Link::Arctan),
            "algebraic" | "g2" => Ok(Link::Algebraic),
            "logistic" | "g3" => Ok(Link::Logistic),
            other => Err(format!("unknown link `{other}`")),
        }
    }
}

//! Smoothing kernels: symmetric densities supported on `[-1, 1]`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Epanechnikov,
    Uniform,
    Triweight,
}

impl Kernel {
    /// Kernel density at `x`; zero outside `[-1, 1]`.
    pub fn eval(self, x: f64) -> f64 {
        if x.abs() > 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Epanechnikov => 0.75 * (1.0 - x * x),
            Kernel::Uniform => 0.5,
            Kernel::Triweight => {
                let v = 1.0 - x * x;
                35.0 / 32.0 * v * v * v
            }
        }
    }

    /// `K_h(x) = K(x / h) / h`.
    #[inline]
    pub fn scaled(self, x: f64, h: f64) -> f64 {
        self.eval(x / h) / h
    }
}

impl std::str::FromStr for Kernel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            "uniform" => Ok(Kernel::Uniform),
            "triweight" => Ok(Kernel::Triweight),
            other => Err(format!("unknown kernel `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_are_densities() {
        for k in [Kernel::Epanechnikov, Kernel::Uniform, Kernel::Triweight] {
            let n = 20_000;
            let mass: f64 = (0..n)
                .map(|i| k.eval(-1.0 + 2.0 * (i as f64 + 0.5) / n as f64) * 2.0 / n as f64)
                .sum();
            assert!((mass - 1.0).abs() < 1e-6, "{k:?} mass {mass}");
            assert_eq!(k.eval(0.3), k.eval(-0.3));
            assert_eq!(k.eval(1.01), 0.0);
        }
    }
}

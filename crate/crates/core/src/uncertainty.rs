//! Values with 1σ uncertainties and quadrature propagation through products.

use serde::{Deserialize, Serialize};

/// A measured or derived quantity with a 1σ uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl Measured {
    pub const fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }

    pub const fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0 }
    }

    pub fn relative(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.sigma / self.value
        }
    }

    /// Product with relative errors added in quadrature.
    pub fn product(factors: &[Measured]) -> Measured {
        let value: f64 = factors.iter().map(|m| m.value).product();
        let rel_sq: f64 = factors.iter().map(|m| m.relative().powi(2)).sum();
        Measured::new(value, value.abs() * rel_sq.sqrt())
    }

    /// Parenthesis notation: uncertainty rounded to one significant digit,
    /// or two when its leading digit is 1 (0.91 ± 0.04 → "0.91(4)",
    /// 89.6 ± 1.0 → "89.6(10)").
    pub fn paren(&self) -> String {
        if self.sigma <= 0.0 {
            return format!("{}", self.value);
        }
        let mut exp = self.sigma.abs().log10().floor() as i32;
        let mut mantissa = (self.sigma / 10f64.powi(exp)).round() as i64;
        if mantissa >= 10 {
            mantissa = 1;
            exp += 1;
        }
        if mantissa == 1 {
            exp -= 1;
            mantissa = (self.sigma / 10f64.powi(exp)).round() as i64;
        }
        let digits = (-exp).max(0) as usize;
        format!("{:.*}({})", digits, self.value, mantissa)
    }

    /// Same notation with value and sigma scaled to percent.
    pub fn paren_percent(&self) -> String {
        format!("{}%", Measured::new(self.value * 100.0, self.sigma * 100.0).paren())
    }
}

impl std::fmt::Display for Measured {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.paren())
    }
}

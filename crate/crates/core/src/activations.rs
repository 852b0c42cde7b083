//! Scalar activation functions with exact first derivatives.
//!
//! Hidden layers always use [`Activation::Logistic`]. The output layer uses
//! [`Activation::Softplus`] for unbounded counts and [`Activation::Logistic`]
//! when the response is a success probability. [`Activation::Identity`]
//! reproduces the exactly linear model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Logistic,
    Softplus,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Logistic => "logistic",
            Activation::Softplus => "softplus",
            Activation::Identity => "identity",
        }
    }

    /// Checked evaluation; rejects non-finite input.
    pub fn eval(self, x: f64) -> Result<f64> {
        check_finite(x)?;
        Ok(self.value(x))
    }

    /// Checked first derivative; rejects non-finite input.
    pub fn deriv(self, x: f64) -> Result<f64> {
        check_finite(x)?;
        Ok(self.slope(x))
    }

    /// Unchecked evaluation used on hot paths.
    #[inline]
    pub fn value(self, x: f64) -> f64 {
        match self {
            Activation::Logistic => logistic(x),
            Activation::Softplus => softplus(x),
            Activation::Identity => x,
        }
    }

    /// Unchecked derivative used on hot paths.
    #[inline]
    pub fn slope(self, x: f64) -> f64 {
        match self {
            // g(1 - g) with 1 - g(x) = g(-x), which stays positive in both tails
            Activation::Logistic => logistic(x) * logistic(-x),
            Activation::Softplus => logistic(x),
            Activation::Identity => 1.0,
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(Activation::Logistic),
            "softplus" => Ok(Activation::Softplus),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::usage(format!("unknown activation '{other}'"))),
        }
    }
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("activation input {x} is not finite")))
    }
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` written as `max(x, 0) + ln(1 + e^-|x|)` so it never overflows.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const KINDS: [Activation; 3] = [
        Activation::Logistic,
        Activation::Softplus,
        Activation::Identity,
    ];

    #[test]
    fn known_values() {
        assert_eq!(Activation::Logistic.eval(0.0).unwrap(), 0.5);
        assert_abs_diff_eq!(
            Activation::Softplus.eval(0.0).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        // ln(1 + e^40) = 40 + ln(1 + e^-40) and e^-40 ~ 4.2e-18.
        assert_abs_diff_eq!(Activation::Softplus.eval(40.0).unwrap(), 40.0, epsilon = 1e-12);
        assert_eq!(Activation::Logistic.deriv(0.0).unwrap(), 0.25);
        assert_eq!(Activation::Softplus.deriv(0.0).unwrap(), 0.5);
    }

    #[test]
    fn logistic_derivative_at_two() {
        let h = 1e-6;
        let f = |x| Activation::Logistic.eval(x).unwrap();
        let fd = (f(2.0 + h) - f(2.0 - h)) / (2.0 * h);
        let d = Activation::Logistic.deriv(2.0).unwrap();
        assert_abs_diff_eq!(d, fd, epsilon = 1e-8);
        assert_abs_diff_eq!(d, 0.104994, epsilon = 1e-6);
    }

    #[test]
    fn extreme_inputs_stay_finite() {
        for kind in KINDS {
            for x in [-700.0, 700.0] {
                assert!(kind.eval(x).unwrap().is_finite());
                assert!(kind.deriv(x).unwrap().is_finite());
            }
        }
        assert_eq!(Activation::Softplus.eval(700.0).unwrap(), 700.0);
        assert!(Activation::Softplus.eval(-700.0).unwrap() > 0.0);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        for kind in KINDS {
            assert!(matches!(kind.eval(f64::NAN), Err(Error::Domain(_))));
            assert!(matches!(kind.deriv(f64::INFINITY), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn parse_round_trip() {
        for kind in KINDS {
            assert_eq!(kind.name().parse::<Activation>().unwrap(), kind);
        }
        assert!("relu".parse::<Activation>().is_err());
    }

    proptest! {
        #[test]
        fn derivative_positive(x in -700.0f64..700.0) {
            prop_assert_eq!(Activation::Identity.deriv(x).unwrap(), 1.0);
            prop_assert!(Activation::Logistic.deriv(x).unwrap() > 0.0);
            prop_assert!(Activation::Softplus.deriv(x).unwrap() > 0.0);
        }

        #[test]
        fn derivative_matches_central_difference(x in -50.0f64..50.0) {
            let h = 1e-5 * (1.0 + x.abs());
            for kind in KINDS {
                let fd = (kind.value(x + h) - kind.value(x - h)) / (2.0 * h);
                prop_assert!((kind.deriv(x).unwrap() - fd).abs() < 1e-6);
            }
        }

        #[test]
        fn logistic_symmetry(x in -700.0f64..700.0) {
            prop_assert!((logistic(x) + logistic(-x) - 1.0).abs() <= 1e-14);
        }

        #[test]
        fn softplus_symmetry(x in -700.0f64..700.0) {
            let lhs = softplus(x) - softplus(-x);
            prop_assert!((lhs - x).abs() <= 1e-12);
        }
    }
}

use serde::{Deserialize, Serialize};

/// Activation functions that get polynomial replacements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn eval(self, x: f64) -> f64 {
        activation(self, x)
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Self::Relu),
            "sigmoid" => Ok(Self::Sigmoid),
            "tanh" => Ok(Self::Tanh),
            other => Err(format!("unknown activation '{other}'")),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Closed-form activation value. Tanh is evaluated as `2·σ(2x) − 1`.
pub fn activation(kind: Activation, x: f64) -> f64 {
    match kind {
        Activation::Relu => x.max(0.0),
        Activation::Sigmoid => sigmoid(x),
        Activation::Tanh => 2.0 * sigmoid(2.0 * x) - 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(activation(Activation::Relu, -3.0), 0.0);
        assert_eq!(activation(Activation::Relu, 2.5), 2.5);
        assert_eq!(activation(Activation::Sigmoid, 0.0), 0.5);
        assert_eq!(activation(Activation::Tanh, 0.0), 0.0);
    }

    #[test]
    fn tanh_matches_std_and_identity() {
        for i in -400..=400 {
            let x = i as f64 * 0.05;
            let t = activation(Activation::Tanh, x);
            assert!((t - x.tanh()).abs() < 1e-12);
            assert!((t - (2.0 * activation(Activation::Sigmoid, 2.0 * x) - 1.0)).abs() <= 1e-12);
        }
    }

    #[test]
    fn sigmoid_is_stable_for_large_inputs() {
        assert_eq!(activation(Activation::Sigmoid, 800.0), 1.0);
        assert_eq!(activation(Activation::Sigmoid, -800.0), 0.0);
    }
}

use serde::{Deserialize, Serialize};

/// Elementwise nonlinearity of a dense layer.
///
/// `Square` is not a usual deep-learning activation; it makes exactly quadratic
/// networks expressible, which the second-order machinery reproduces without
/// truncation error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Sigmoid,
    Tanh,
    Softplus,
    Square,
    Relu,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Activation {
    pub fn is_smooth(self) -> bool {
        !matches!(self, Activation::Relu)
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Softplus => softplus(x),
            Activation::Square => x * x,
            Activation::Relu => x.max(0.0),
        }
    }

    /// First derivative. At the relu kink the left derivative (0) is used.
    pub fn d1(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Softplus => sigmoid(x),
            Activation::Square => 2.0 * x,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn d2(self, x: f64) -> f64 {
        match self {
            Activation::Identity | Activation::Relu => 0.0,
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Activation::Softplus => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Square => 2.0,
        }
    }

    /// Third derivative, needed when second-order tangents flow through a tape.
    pub fn d3(self, x: f64) -> f64 {
        match self {
            Activation::Identity | Activation::Relu | Activation::Square => 0.0,
            Activation::Sigmoid => {
                let s = sigmoid(x);
                let d = s * (1.0 - s);
                d * (1.0 - 6.0 * d)
            }
            Activation::Tanh => {
                let t = x.tanh();
                let d = 1.0 - t * t;
                -2.0 * d * (1.0 - 3.0 * t * t)
            }
            Activation::Softplus => {
                let s = sigmoid(x);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Softplus => "softplus",
            Activation::Square => "square",
            Activation::Relu => "relu",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "identity" | "linear" => Activation::Identity,
            "sigmoid" => Activation::Sigmoid,
            "tanh" => Activation::Tanh,
            "softplus" => Activation::Softplus,
            "square" => Activation::Square,
            "relu" => Activation::Relu,
            other => return Err(format!("unknown activation `{other}`")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [Activation; 6] = [
        Activation::Identity,
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Softplus,
        Activation::Square,
        Activation::Relu,
    ];

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-5;
        for act in ALL {
            for &x in &[-2.3, -0.4, 0.7, 1.9] {
                let fd1 = (act.apply(x + h) - act.apply(x - h)) / (2.0 * h);
                let fd2 = (act.d1(x + h) - act.d1(x - h)) / (2.0 * h);
                let fd3 = (act.d2(x + h) - act.d2(x - h)) / (2.0 * h);
                assert!((fd1 - act.d1(x)).abs() < 1e-8, "{act:?} d1 at {x}");
                assert!((fd2 - act.d2(x)).abs() < 1e-8, "{act:?} d2 at {x}");
                assert!((fd3 - act.d3(x)).abs() < 1e-8, "{act:?} d3 at {x}");
            }
        }
    }

    #[test]
    fn relu_uses_left_derivative_at_kink() {
        assert_eq!(Activation::Relu.d1(0.0), 0.0);
        assert!(!Activation::Relu.is_smooth());
        assert!(Activation::Softplus.is_smooth());
    }

    #[test]
    fn softplus_is_stable_for_large_inputs() {
        assert_eq!(Activation::Softplus.apply(800.0), 800.0);
        assert!(Activation::Softplus.apply(-800.0) >= 0.0);
        assert_eq!(Activation::Sigmoid.apply(-1000.0), 0.0);
        assert_eq!(Activation::Sigmoid.apply(1000.0), 1.0);
    }
}

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::convex::{self, AffinePiece, ConvexFn, MaxAffine, Quadratic};
use crate::error::{Error, Result};
use crate::maops;

/// A convex function as read from JSON. Accepted shapes:
///
/// - `{"pieces": [{"a": [..], "b": f}, ..]}`, optionally with `"beta"` for its softmax smoothing;
/// - `{"vertices": [[..], ..], "shift": [..]}`, the support function `h_P(x - shift)`;
/// - `{"quadratic": [[..], ..], "linear": [..], "constant": f}`, `1/2 x^T A x + <c, x> + d`;
/// - `{"exponentials": [[..], ..]}`, `sum_i exp(-<x_i, y>)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionJson {
    Pieces {
        pieces: Vec<AffinePiece>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
    Support {
        vertices: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<Vec<f64>>,
    },
    Quadratic {
        quadratic: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        linear: Option<Vec<f64>>,
        #[serde(default)]
        constant: f64,
    },
    Exponentials {
        exponentials: Vec<Vec<f64>>,
    },
}

impl FunctionJson {
    pub fn to_function(&self) -> Result<ConvexFn> {
        match self {
            FunctionJson::Pieces { pieces, beta } => {
                let f = MaxAffine::new(pieces.clone())?;
                Ok(match beta {
                    Some(b) if *b > 0.0 => ConvexFn::Smooth(f.softmax(*b)),
                    Some(b) => return Err(Error::Invalid(format!("softmax temperature must be positive, got {b}"))),
                    None => ConvexFn::MaxAffine(f),
                })
            }
            FunctionJson::Support { vertices, shift } => {
                let n = vertices.first().map(|v| v.len()).ok_or(Error::Empty("polytope vertices"))?;
                let x = shift.clone().unwrap_or_else(|| vec![0.0; n]);
                Ok(ConvexFn::MaxAffine(convex::support_function_at(vertices, &x)?))
            }
            FunctionJson::Quadratic { quadratic, linear, constant } => {
                let n = quadratic.len();
                if quadratic.iter().any(|r| r.len() != n) {
                    return Err(Error::Invalid("quadratic matrix must be square".into()));
                }
                let a = DMatrix::from_fn(n, n, |i, j| quadratic[i][j]);
                let c = linear.clone().unwrap_or_else(|| vec![0.0; n]);
                Ok(ConvexFn::from(Quadratic::new(a, c, *constant)?))
            }
            FunctionJson::Exponentials { exponentials } => {
                let n = exponentials.first().map(|v| v.len()).ok_or(Error::Empty("exponential directions"))?;
                if exponentials.iter().any(|v| v.len() != n) {
                    return Err(Error::Invalid("exponential directions differ in length".into()));
                }
                Ok(ConvexFn::Smooth(maops::exp_sum(exponentials)))
            }
        }
    }
}

/// A complex scalar, `{"re": f, "im": f}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueJson {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ValueJson {
    fn from(z: Complex64) -> Self {
        ValueJson { re: z.re, im: z.im }
    }
}

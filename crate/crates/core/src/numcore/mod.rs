//! Dense matrix core: a row-major `f64` matrix, the differentiable
//! primitives used by the encoders and pooling heads, and a
//! central-difference gradient checker.

mod gradcheck;
mod mat;
mod ops;

pub use gradcheck::{grad_check, grad_check_piecewise, relative_error, GradCheckReport, ParamSet, DEFAULT_STEP, REL_ERROR_FLOOR};
pub use mat::{argmax, dot, ordered_sum, sigmoid, Axis, Mat};
pub use ops::{axis_max_backward, matmul_backward, sigmoid_backward, softmax_backward, softmax_vec, tanh_backward};

//! One stochastic gradient step of the negative-sampling objective.
//!
//! For a (center, context) pair with negatives `n_1..n_k` the loss is
//!
//! ```text
//! L = -log sigma(v'_ctx . v_c) - sum_i log sigma(-v'_{n_i} . v_c)
//! ```
//!
//! All gradients are evaluated at the pre-update parameters, so repeated rows
//! (a negative equal to the context, or duplicate negatives) accumulate
//! additively exactly as differentiation of `L` dictates.

use crate::embedding::matrix::{dot, EmbeddingMatrix};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`, stable for large |x|. Note `-log sigma(x) = softplus(-x)`.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Reusable buffers for the update kernel; one per training worker.
pub(crate) struct StepScratch {
    center: Vec<f64>,
    grad_center: Vec<f64>,
    coeffs: Vec<(usize, f64)>,
}

impl StepScratch {
    pub(crate) fn new(dim: usize) -> StepScratch {
        StepScratch {
            center: vec![0.0; dim],
            grad_center: vec![0.0; dim],
            coeffs: Vec::with_capacity(32),
        }
    }
}

/// Applies one SGD step directly on the backing buffers.
///
/// # Safety
///
/// `input` and `output` must each point to `rows * dim` valid `f64`s, and
/// `center`, `context`, and every negative must be `< rows`. Concurrent
/// callers may race on the same rows (lost updates are tolerated by the
/// training contract); the caller must guarantee the allocations stay alive.
#[allow(clippy::too_many_arguments)]
pub(crate) unsafe fn sgns_step_raw(
    input: *mut f64,
    output: *mut f64,
    dim: usize,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
    scratch: &mut StepScratch,
) -> f64 {
    let center_row = std::slice::from_raw_parts_mut(input.add(center * dim), dim);
    scratch.center.copy_from_slice(center_row);
    scratch.grad_center.fill(0.0);
    scratch.coeffs.clear();

    let mut loss = 0.0;
    // Read pass: dot products, loss, and the center gradient, all against the
    // pre-update output rows.
    for (i, &row) in std::iter::once(&context).chain(negatives).enumerate() {
        let out_row = std::slice::from_raw_parts(output.add(row * dim), dim);
        let d = dot(&scratch.center, out_row);
        let coeff = if i == 0 {
            loss += softplus(-d);
            sigmoid(d) - 1.0
        } else {
            loss += softplus(d);
            sigmoid(d)
        };
        for (g, &o) in scratch.grad_center.iter_mut().zip(out_row) {
            *g += coeff * o;
        }
        scratch.coeffs.push((row, coeff));
    }
    // Write pass: each output row moves by a multiple of the (copied) center
    // vector, so aliased rows compose additively in any order.
    for &(row, coeff) in &scratch.coeffs {
        let out_row = std::slice::from_raw_parts_mut(output.add(row * dim), dim);
        for (o, &c) in out_row.iter_mut().zip(&scratch.center) {
            *o -= lr * coeff * c;
        }
    }
    for (v, &g) in center_row.iter_mut().zip(&scratch.grad_center) {
        *v -= lr * g;
    }
    loss
}

/// The loss the step minimizes, without touching the matrix.
pub fn sgns_loss(
    m: &EmbeddingMatrix,
    center: usize,
    context: usize,
    negatives: &[usize],
) -> f64 {
    let vc = m.input_vector(center);
    let mut loss = softplus(-dot(vc, m.output_vector(context)));
    for &n in negatives {
        loss += softplus(dot(vc, m.output_vector(n)));
    }
    loss
}

/// Applies one SGD update for the pair `(center, context)` with the given
/// negative draws and returns the loss evaluated before the update. Only the
/// rows named in the arguments are touched.
pub fn sgns_step(
    center: usize,
    context: usize,
    negatives: &[usize],
    m: &mut EmbeddingMatrix,
    lr: f64,
) -> f64 {
    let rows = m.vocab().len();
    assert!(center < rows && context < rows, "term id out of range");
    assert!(negatives.iter().all(|&n| n < rows), "negative id out of range");
    let dim = m.dim();
    let mut scratch = StepScratch::new(dim);
    unsafe {
        sgns_step_raw(
            m.input.as_mut_ptr(),
            m.output.as_mut_ptr(),
            dim,
            center,
            context,
            negatives,
            lr,
            &mut scratch,
        )
    }
}

//! Dense `f64` tensors with a reverse-mode tape.
//!
//! Everything the translation networks need lives here: the [`Tape`] that
//! records differentiable operations, the layer primitives (convolution,
//! transposed convolution, dense, batch norm, LSTM cell, activations), the
//! losses, the [`Adam`] optimizer and a central-difference gradient oracle.
//!
//! Trainable values are [`Param`]s: shared, interior-mutable tensors. A param
//! enters a computation through [`Tape::param`]; [`Tape::backward`] adds the
//! resulting gradient into the param's `grad` buffer.

mod adam;
mod conv;
mod error;
mod gemm;
mod gradcheck;
mod init;
mod linear;
mod loss;
mod lstm;
mod norm;
mod ops;
mod tape;

use std::cell::{Ref, RefCell, RefMut};
use std::rc::Rc;

pub use adam::{Adam, AdamConfig, Moments};
pub use conv::{conv_output_len, conv_transpose_output_len};
pub use error::TensorError;
pub use gradcheck::{finite_diff_check, finite_diff_check_param, relative_error};
pub use init::{normal_tensor, seeded_rng};
pub use lstm::{LstmState, LstmWeights};
pub use norm::{BatchStats, NormMode, BN_EPSILON, BN_MOMENTUM};
pub use ops::Activation;
pub use tape::{Tape, Var};

/// Result alias for tensor operations.
pub type Result<T> = std::result::Result<T, TensorError>;

/// An n-dimensional array of `f64` in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
}

impl Tensor {
    pub fn new(shape: impl Into<Vec<usize>>, values: Vec<f64>) -> Result<Self> {
        let shape = shape.into();
        if shape.contains(&0) {
            return Err(TensorError::InvalidShape { shape });
        }
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(TensorError::DataLength {
                expected,
                got: values.len(),
            });
        }
        Ok(Self {
            shape,
            values,
            grad: None,
            requires_grad: false,
        })
    }

    /// Panics on a zero extent; use [`Tensor::new`] for validated construction.
    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: f64) -> Self {
        let shape = shape.into();
        let len = shape.iter().product();
        Self::new(shape, vec![value; len]).expect("extents must be positive")
    }

    pub fn scalar(value: f64) -> Self {
        Self::new(Vec::new(), vec![value]).expect("scalar shape is valid")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn set_requires_grad(&mut self, on: bool) {
        self.requires_grad = on;
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    pub(crate) fn accumulate_grad(&mut self, delta: &[f64]) {
        debug_assert_eq!(delta.len(), self.values.len());
        match &mut self.grad {
            Some(g) => g.iter_mut().zip(delta).for_each(|(a, b)| *a += b),
            None => self.grad = Some(delta.to_vec()),
        }
    }

    /// Same values under a new shape with the same element count.
    pub fn reshape(mut self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        if n != self.values.len() || shape.contains(&0) {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                left: self.shape,
                right: shape,
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// A trainable (or buffered) tensor shared by reference.
///
/// Cloning a `Param` clones the handle, not the data: both handles observe
/// every update. This is how the discriminator and classifier share a trunk.
#[derive(Clone, Debug)]
pub struct Param(Rc<RefCell<Tensor>>);

impl Param {
    /// A trainable parameter (`requires_grad = true`).
    pub fn new(mut tensor: Tensor) -> Self {
        tensor.requires_grad = true;
        Self(Rc::new(RefCell::new(tensor)))
    }

    /// A non-trainable buffer such as batch-norm running statistics.
    pub fn buffer(mut tensor: Tensor) -> Self {
        tensor.requires_grad = false;
        Self(Rc::new(RefCell::new(tensor)))
    }

    pub fn borrow(&self) -> Ref<'_, Tensor> {
        self.0.borrow()
    }

    pub fn borrow_mut(&self) -> RefMut<'_, Tensor> {
        self.0.borrow_mut()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.0.borrow().shape.clone()
    }

    pub fn len(&self) -> usize {
        self.0.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.borrow().is_empty()
    }

    pub fn ptr_eq(&self, other: &Param) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }

    pub fn zero_grad(&self) {
        self.0.borrow_mut().zero_grad();
    }

    pub fn set_requires_grad(&self, on: bool) {
        self.0.borrow_mut().requires_grad = on;
    }

    /// Overwrite the values, keeping the shape.
    pub fn assign(&self, values: &[f64]) -> Result<()> {
        let mut t = self.0.borrow_mut();
        if t.values.len() != values.len() {
            return Err(TensorError::DataLength {
                expected: t.values.len(),
                got: values.len(),
            });
        }
        t.values.copy_from_slice(values);
        Ok(())
    }

    pub fn snapshot(&self) -> Tensor {
        let t = self.0.borrow();
        Tensor::new(t.shape.clone(), t.values.clone()).expect("param shape is valid")
    }
}

/// A parameter together with its stable, checkpoint-visible name.
pub type NamedParam = (String, Param);

/// Zero the gradients of every param in the list.
pub fn zero_grads(params: &[NamedParam]) {
    for (_, p) in params {
        p.zero_grad();
    }
}

/// Toggle `requires_grad` for every param in the list.
pub fn set_trainable(params: &[NamedParam], on: bool) {
    for (_, p) in params {
        p.set_requires_grad(on);
    }
}

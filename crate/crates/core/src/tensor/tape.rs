use std::cell::{Cell, RefCell};
use std::fmt;

use super::{Param, Result, Tensor, TensorError};

/// Backward rule of one recorded op: receives the gradient of the op's output,
/// read access to every node value, and a sink for parent gradients.
pub(crate) type BackwardFn = Box<dyn Fn(&[f64], &[Node], &mut GradSink<'_>)>;

pub(crate) struct Node {
    pub(crate) shape: Vec<usize>,
    pub(crate) value: Vec<f64>,
    pub(crate) requires_grad: bool,
    backward: Option<BackwardFn>,
    param: Option<Param>,
}

/// Collects parent gradients during the reverse sweep.
pub(crate) struct GradSink<'a> {
    grads: &'a mut [Option<Vec<f64>>],
    nodes: &'a [Node],
}

impl GradSink<'_> {
    pub(crate) fn wants(&self, id: usize) -> bool {
        self.nodes[id].requires_grad
    }

    /// Gradient buffer of node `id`, zero-initialised on first touch.
    pub(crate) fn slot(&mut self, id: usize) -> &mut [f64] {
        let len = self.nodes[id].value.len();
        self.grads[id].get_or_insert_with(|| vec![0.0; len])
    }

    pub(crate) fn add(&mut self, id: usize, delta: &[f64]) {
        if self.wants(id) {
            self.slot(id).iter_mut().zip(delta).for_each(|(a, b)| *a += b);
        }
    }
}

/// Records differentiable operations for a single forward/backward cycle.
///
/// Construction and backward are single-threaded. [`Tape::backward`] consumes
/// the recording; any [`Var`] created before it becomes stale and panics if
/// used again.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    generation: Cell<u64>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    pub(crate) tape: &'t Tape,
    pub(crate) id: usize,
    generation: u64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{} {:?})", self.id, self.shape())
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            generation: Cell::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// A leaf holding a copy of the param's current values. Gradients flow
    /// back into the param only if it `requires_grad` at this moment.
    pub fn param(&self, p: &Param) -> Var<'_> {
        let t = p.borrow();
        let requires_grad = t.requires_grad();
        let node = Node {
            shape: t.shape().to_vec(),
            value: t.values().to_vec(),
            requires_grad,
            backward: None,
            param: requires_grad.then(|| p.clone()),
        };
        drop(t);
        self.push_node(node)
    }

    /// A leaf that never receives gradients.
    pub fn constant(&self, t: &Tensor) -> Var<'_> {
        self.constant_raw(t.shape().to_vec(), t.values().to_vec())
    }

    pub(crate) fn constant_raw(&self, shape: Vec<usize>, value: Vec<f64>) -> Var<'_> {
        self.push_node(Node {
            shape,
            value,
            requires_grad: false,
            backward: None,
            param: None,
        })
    }

    pub fn zeros(&self, shape: &[usize]) -> Var<'_> {
        let n = shape.iter().product();
        self.constant_raw(shape.to_vec(), vec![0.0; n])
    }

    /// Record an op output. The backward rule is dropped when no parent
    /// requires a gradient.
    pub(crate) fn push(
        &self,
        shape: Vec<usize>,
        value: Vec<f64>,
        parents: &[Var<'_>],
        backward: BackwardFn,
    ) -> Var<'_> {
        let requires_grad = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|p| {
                self.check(p);
                nodes[p.id].requires_grad
            })
        };
        self.push_node(Node {
            shape,
            value,
            requires_grad,
            backward: requires_grad.then_some(backward),
            param: None,
        })
    }

    /// Swap in a backward rule that needs to know its own output id.
    pub(crate) fn replace_backward(&self, out: Var<'_>, backward: BackwardFn) {
        self.check(&out);
        let mut nodes = self.nodes.borrow_mut();
        let node = &mut nodes[out.id];
        if node.requires_grad {
            node.backward = Some(backward);
        }
    }

    fn push_node(&self, node: Node) -> Var<'_> {
        debug_assert_eq!(node.shape.iter().product::<usize>(), node.value.len());
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var {
            tape: self,
            id: nodes.len() - 1,
            generation: self.generation.get(),
        }
    }

    fn check(&self, v: &Var<'_>) {
        assert!(
            std::ptr::eq(v.tape, self) && v.generation == self.generation.get(),
            "stale Var: its tape has been consumed by backward"
        );
    }

    /// Reverse sweep from a scalar `loss`. Gradients are *added* to every
    /// reachable trainable param, so repeated passes without zeroing
    /// accumulate. The tape is cleared afterwards.
    pub fn backward(&self, loss: Var<'_>) -> Result<()> {
        self.check(&loss);
        let nodes = std::mem::take(&mut *self.nodes.borrow_mut());
        self.generation.set(self.generation.get() + 1);
        let root = &nodes[loss.id];
        if root.value.len() != 1 {
            return Err(TensorError::NonScalarLoss {
                shape: root.shape.clone(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..nodes.len()).map(|_| None).collect();
        if !root.requires_grad {
            return Ok(());
        }
        grads[loss.id] = Some(vec![1.0]);
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if let Some(rule) = &node.backward {
                let mut sink = GradSink {
                    grads: &mut grads,
                    nodes: &nodes,
                };
                rule(&g, &nodes, &mut sink);
            } else if let Some(p) = &node.param {
                p.borrow_mut().accumulate_grad(&g);
            }
        }
        Ok(())
    }

    /// Drop the recording without a backward pass.
    pub fn clear(&self) {
        self.nodes.borrow_mut().clear();
        self.generation.set(self.generation.get() + 1);
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.check(self);
        self.tape.nodes.borrow()[self.id].shape.clone()
    }

    pub fn len(&self) -> usize {
        self.with_value(|v| v.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.check(self);
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    pub fn with_value<R>(&self, f: impl FnOnce(&[f64]) -> R) -> R {
        self.tape.check(self);
        f(&self.tape.nodes.borrow()[self.id].value)
    }

    /// Copy of the current value as a standalone tensor.
    pub fn value(&self) -> Tensor {
        self.tape.check(self);
        let nodes = self.tape.nodes.borrow();
        let n = &nodes[self.id];
        Tensor::new(n.shape.clone(), n.value.clone()).expect("node shapes are valid")
    }

    /// Value of a single-element var.
    pub fn item(&self) -> f64 {
        self.with_value(|v| v[0])
    }

    /// A constant copy on the same tape; gradients stop here.
    pub fn detach(&self) -> Var<'t> {
        let (shape, value) = {
            self.tape.check(self);
            let nodes = self.tape.nodes.borrow();
            (nodes[self.id].shape.clone(), nodes[self.id].value.clone())
        };
        self.tape.constant_raw(shape, value)
    }
}

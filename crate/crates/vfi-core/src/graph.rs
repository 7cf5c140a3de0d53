//! Reverse-mode autodiff tape.
//!
//! A [`Graph`] records one forward evaluation as an append-only list of nodes;
//! node ids are therefore already a topological order and [`Graph::backward`]
//! is a single reverse sweep. Each op pushes a value plus a closure that, given
//! the output gradient, emits gradient contributions for its parents. Closures
//! capture the input tensors they need (cheap `Arc` clones).
//!
//! Graphs are per-forward-pass and not shared across threads; parallelism
//! lives inside the ops (see [`crate::parallel`]), which keeps concurrent
//! forward passes over distinct inputs safe.

use std::cell::RefCell;
use std::collections::HashMap;

use crate::cost::CostCounters;
use crate::tensor::Tensor;

type BackFn = Box<dyn Fn(&Tensor, &mut dyn FnMut(usize, Tensor))>;

struct Node {
    value: Tensor,
    backward: Option<BackFn>,
}

#[derive(Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node in a [`Graph`]. Copyable; all tensor ops hang off it.
#[derive(Clone, Copy)]
pub struct Var<'g> {
    pub(crate) graph: &'g Graph,
    pub(crate) id: usize,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a constant with no gradient path.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, None)
    }

    pub(crate) fn op(&self, value: Tensor, backward: BackFn) -> Var<'_> {
        self.push(value, Some(backward))
    }

    fn push(&self, value: Tensor, backward: Option<BackFn>) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, backward });
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reverse sweep from `root` (must be scalar-shaped, `[1]`).
    ///
    /// Returns gradients for every node reached; unreached nodes stay `None`.
    pub fn backward(&self, root: Var) -> Gradients {
        let nodes = self.nodes.borrow();
        assert_eq!(
            nodes[root.id].value.len(),
            1,
            "backward root must be a scalar"
        );
        let mut grads: Vec<Option<Tensor>> = Vec::new();
        grads.resize_with(nodes.len(), || None);
        grads[root.id] = Some(Tensor::scalar(1.0));

        for id in (0..=root.id).rev() {
            let grad = match &grads[id] {
                Some(g) => g.clone(),
                None => continue,
            };
            if let Some(back) = &nodes[id].backward {
                back(&grad, &mut |parent, contribution| {
                    debug_assert!(parent < id, "gradient must flow to earlier nodes");
                    grads[parent] = Some(match grads[parent].take() {
                        Some(acc) => acc.add(&contribution),
                        None => contribution,
                    });
                });
            }
        }
        Gradients { grads }
    }
}

impl<'g> Var<'g> {
    /// Snapshot of the node's value (cheap: shares the buffer).
    pub fn value(&self) -> Tensor {
        self.graph.nodes.borrow()[self.id].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn len(&self) -> usize {
        self.graph.nodes.borrow()[self.id].value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn id(&self) -> usize {
        self.id
    }
}

/// Result of a backward sweep.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        self.by_id(var.id)
    }

    pub fn by_id(&self, id: usize) -> Option<&Tensor> {
        self.grads.get(id).and_then(|g| g.as_ref())
    }
}

/// Forward-evaluation context: the graph plus parameter binding.
///
/// Parameters are plain tensors owned by the model; the first use in a pass
/// binds the tensor's buffer to a leaf node so gradients can be looked up by
/// parameter after the backward sweep. Optional cost counters let the
/// benchmark harness observe attention work without changing any signature.
pub struct Cx<'g> {
    pub graph: &'g Graph,
    bound: RefCell<HashMap<usize, usize>>,
    pub counters: Option<&'g CostCounters>,
}

impl<'g> Cx<'g> {
    pub fn new(graph: &'g Graph) -> Self {
        Self {
            graph,
            bound: RefCell::new(HashMap::new()),
            counters: None,
        }
    }

    pub fn with_counters(graph: &'g Graph, counters: &'g CostCounters) -> Self {
        Self {
            graph,
            bound: RefCell::new(HashMap::new()),
            counters: Some(counters),
        }
    }

    /// Constant input (no gradient tracked).
    pub fn constant(&self, value: Tensor) -> Var<'g> {
        self.graph.leaf(value)
    }

    /// Bind a parameter tensor; repeated calls with the same buffer return the
    /// same leaf so gradient contributions accumulate correctly.
    pub fn param(&self, tensor: &Tensor) -> Var<'g> {
        let key = tensor.buffer_id();
        if let Some(&id) = self.bound.borrow().get(&key) {
            return Var {
                graph: self.graph,
                id,
            };
        }
        let var = self.graph.leaf(tensor.clone());
        self.bound.borrow_mut().insert(key, var.id);
        var
    }

    /// Gradient of a bound parameter after `backward`, if it received one.
    pub fn grad_of<'a>(&self, grads: &'a Gradients, tensor: &Tensor) -> Option<&'a Tensor> {
        let id = *self.bound.borrow().get(&tensor.buffer_id())?;
        grads.by_id(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops;

    #[test]
    fn chain_of_adds_accumulates() {
        let g = Graph::new();
        let x = g.leaf(Tensor::from_vec(vec![1.0, 2.0], &[2]));
        // y = x + x; loss = sum(y) => dloss/dx = 2 per element
        let y = ops::add(x, x);
        let loss = ops::sum_all(y);
        assert_eq!(loss.value().data()[0], 6.0);
        let grads = g.backward(loss);
        let gx = grads.get(x).unwrap();
        assert_eq!(gx.data(), &[2.0, 2.0]);
    }

    #[test]
    fn params_bind_once() {
        let g = Graph::new();
        let cx = Cx::new(&g);
        let w = Tensor::from_vec(vec![3.0], &[1]);
        let a = cx.param(&w);
        let b = cx.param(&w);
        assert_eq!(a.id(), b.id());
        let loss = ops::mul(a, b); // w^2, d/dw = 2w = 6
        let grads = g.backward(loss);
        assert_eq!(cx.grad_of(&grads, &w).unwrap().data(), &[6.0]);
    }
}

//! Reductions to scalars.
//!
//! Sums run sequentially on purpose: a fixed accumulation order keeps training
//! losses bit-reproducible regardless of thread count.

use crate::graph::Var;
use crate::tensor::Tensor;

pub fn sum_all(x: Var<'_>) -> Var<'_> {
    let xv = x.value();
    let total: f64 = xv.iter().sum();
    let xid = x.id;
    let shape = xv.shape().to_vec();
    x.graph.op(
        Tensor::scalar(total),
        Box::new(move |g, sink| {
            sink(xid, Tensor::full(&shape, g.data()[0]));
        }),
    )
}

pub fn mean_all(x: Var<'_>) -> Var<'_> {
    let n = x.len();
    scale_scalar(sum_all(x), 1.0 / n as f64)
}

fn scale_scalar(x: Var<'_>, s: f64) -> Var<'_> {
    crate::ops::scale(x, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    #[test]
    fn mean_backward_divides() {
        let g = Graph::new();
        let x = g.leaf(Tensor::from_vec(vec![1.0, 2.0, 3.0, 6.0], &[4]));
        let m = mean_all(x);
        assert_eq!(m.value().data()[0], 3.0);
        let grads = g.backward(m);
        assert_eq!(grads.get(x).unwrap().data(), &[0.25; 4]);
    }
}

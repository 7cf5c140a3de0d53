//! Pointwise ops with analytic derivatives.

use crate::graph::Var;
use crate::parallel;
use crate::tensor::Tensor;

fn unary<'g, F, D>(x: Var<'g>, f: F, df: D) -> Var<'g>
where
    F: Fn(f64) -> f64 + Sync + Send,
    D: Fn(f64) -> f64 + Sync + Send + 'static,
{
    let xv = x.value();
    let mut out = vec![0.0; xv.len()];
    parallel::map_into(&mut out, xv.data(), &f);
    let value = Tensor::from_vec(out, xv.shape());
    let xid = x.id;
    x.graph.op(
        value,
        Box::new(move |g, sink| {
            let mut gx = vec![0.0; xv.len()];
            parallel::zip_into(&mut gx, g.data(), xv.data(), |gv, v| gv * df(v));
            sink(xid, Tensor::from_vec(gx, xv.shape()));
        }),
    )
}

pub fn add<'g>(a: Var<'g>, b: Var<'g>) -> Var<'g> {
    let (av, bv) = (a.value(), b.value());
    assert_eq!(av.shape(), bv.shape(), "add: shape mismatch");
    let mut out = vec![0.0; av.len()];
    parallel::zip_into(&mut out, av.data(), bv.data(), |x, y| x + y);
    let (aid, bid) = (a.id, b.id);
    a.graph.op(
        Tensor::from_vec(out, av.shape()),
        Box::new(move |g, sink| {
            sink(aid, g.clone());
            sink(bid, g.clone());
        }),
    )
}

pub fn sub<'g>(a: Var<'g>, b: Var<'g>) -> Var<'g> {
    let (av, bv) = (a.value(), b.value());
    assert_eq!(av.shape(), bv.shape(), "sub: shape mismatch");
    let mut out = vec![0.0; av.len()];
    parallel::zip_into(&mut out, av.data(), bv.data(), |x, y| x - y);
    let (aid, bid) = (a.id, b.id);
    a.graph.op(
        Tensor::from_vec(out, av.shape()),
        Box::new(move |g, sink| {
            sink(aid, g.clone());
            sink(bid, g.scale(-1.0));
        }),
    )
}

/// Hadamard product.
pub fn mul<'g>(a: Var<'g>, b: Var<'g>) -> Var<'g> {
    let (av, bv) = (a.value(), b.value());
    assert_eq!(av.shape(), bv.shape(), "mul: shape mismatch");
    let mut out = vec![0.0; av.len()];
    parallel::zip_into(&mut out, av.data(), bv.data(), |x, y| x * y);
    let (aid, bid) = (a.id, b.id);
    a.graph.op(
        Tensor::from_vec(out, av.shape()),
        Box::new(move |g, sink| {
            let mut ga = vec![0.0; bv.len()];
            parallel::zip_into(&mut ga, g.data(), bv.data(), |gv, y| gv * y);
            sink(aid, Tensor::from_vec(ga, bv.shape()));
            let mut gb = vec![0.0; av.len()];
            parallel::zip_into(&mut gb, g.data(), av.data(), |gv, x| gv * x);
            sink(bid, Tensor::from_vec(gb, av.shape()));
        }),
    )
}

pub fn scale(x: Var<'_>, s: f64) -> Var<'_> {
    unary(x, move |v| v * s, move |_| s)
}

/// |x| with the subgradient 0 at the origin.
pub fn abs(x: Var<'_>) -> Var<'_> {
    unary(
        x,
        f64::abs,
        |v| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        },
    )
}

pub fn relu(x: Var<'_>) -> Var<'_> {
    unary(x, |v| v.max(0.0), |v| if v > 0.0 { 1.0 } else { 0.0 })
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact GELU, `x * Phi(x)` with the Gaussian CDF.
pub fn gelu(x: Var<'_>) -> Var<'_> {
    unary(
        x,
        |v| v * normal_cdf(v),
        |v| normal_cdf(v) + v * FRAC_1_SQRT_2PI * (-0.5 * v * v).exp(),
    )
}

fn normal_cdf(v: f64) -> f64 {
    0.5 * (1.0 + libm::erf(v * std::f64::consts::FRAC_1_SQRT_2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::ops::sum_all;

    #[test]
    fn gelu_known_values() {
        let g = Graph::new();
        let x = g.leaf(Tensor::from_vec(vec![0.0, 1.0, -1.0], &[3]));
        let y = gelu(x).value();
        assert!((y.data()[0]).abs() < 1e-15);
        // Phi(1) = 0.841344746...
        assert!((y.data()[1] - 0.841_344_746_068_543).abs() < 1e-12);
        assert!((y.data()[2] + (1.0 - 0.841_344_746_068_543)).abs() < 1e-12);
    }

    #[test]
    fn mul_gradients() {
        let g = Graph::new();
        let a = g.leaf(Tensor::from_vec(vec![2.0, 3.0], &[2]));
        let b = g.leaf(Tensor::from_vec(vec![5.0, 7.0], &[2]));
        let loss = sum_all(mul(a, b));
        let grads = g.backward(loss);
        assert_eq!(grads.get(a).unwrap().data(), &[5.0, 7.0]);
        assert_eq!(grads.get(b).unwrap().data(), &[2.0, 3.0]);
    }
}

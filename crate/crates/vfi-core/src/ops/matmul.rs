//! Batched matrix products and the dense layer.
//!
//! Loops are ordered so the innermost axis walks contiguous memory, and
//! parallelism splits over disjoint output rows.

use crate::graph::Var;
use crate::parallel;
use crate::tensor::Tensor;

fn dims3(shape: &[usize], what: &str) -> (usize, usize, usize) {
    assert_eq!(shape.len(), 3, "{what}: expected rank 3, got {shape:?}");
    (shape[0], shape[1], shape[2])
}

/// `[B, N, K] x [B, K, M] -> [B, N, M]`
pub fn bmm<'g>(a: Var<'g>, b: Var<'g>) -> Var<'g> {
    let (av, bv) = (a.value(), b.value());
    let (ba, n, k) = dims3(av.shape(), "bmm lhs");
    let (bb, k2, m) = dims3(bv.shape(), "bmm rhs");
    assert_eq!(ba, bb, "bmm: batch mismatch");
    assert_eq!(k, k2, "bmm: inner dim mismatch");

    let value = bmm_raw(av.data(), bv.data(), ba, n, k, m);
    let (aid, bid) = (a.id, b.id);
    a.graph.op(
        Tensor::from_vec(value, &[ba, n, m]),
        Box::new(move |g, sink| {
            let gd = g.data();
            // dA[b,n,k] = sum_m g[b,n,m] * B[b,k,m]
            let bd = bv.data();
            let mut ga = vec![0.0; ba * n * k];
            parallel::for_each_chunk_mut(&mut ga, k, |row, out| {
                let (bi, ni) = (row / n, row % n);
                let g_row = &gd[(bi * n + ni) * m..(bi * n + ni + 1) * m];
                for (kk, o) in out.iter_mut().enumerate() {
                    let b_row = &bd[(bi * k + kk) * m..(bi * k + kk + 1) * m];
                    *o = dot(g_row, b_row);
                }
            });
            sink(aid, Tensor::from_vec(ga, av.shape()));
            // dB[b,k,m] = sum_n A[b,n,k] * g[b,n,m]
            let ad = av.data();
            let mut gb = vec![0.0; ba * k * m];
            parallel::for_each_chunk_mut(&mut gb, k * m, |bi, out| {
                for ni in 0..n {
                    let g_row = &gd[(bi * n + ni) * m..(bi * n + ni + 1) * m];
                    let a_row = &ad[(bi * n + ni) * k..(bi * n + ni + 1) * k];
                    for (kk, &aval) in a_row.iter().enumerate() {
                        axpy(aval, g_row, &mut out[kk * m..(kk + 1) * m]);
                    }
                }
            });
            sink(bid, Tensor::from_vec(gb, bv.shape()));
        }),
    )
}

/// `[B, N, K] x [B, M, K]^T -> [B, N, M]` (right operand row-major by M).
pub fn bmm_nt<'g>(a: Var<'g>, b: Var<'g>) -> Var<'g> {
    let (av, bv) = (a.value(), b.value());
    let (ba, n, k) = dims3(av.shape(), "bmm_nt lhs");
    let (bb, m, k2) = dims3(bv.shape(), "bmm_nt rhs");
    assert_eq!(ba, bb, "bmm_nt: batch mismatch");
    assert_eq!(k, k2, "bmm_nt: inner dim mismatch");

    let ad = av.data();
    let bd = bv.data();
    let mut value = vec![0.0; ba * n * m];
    parallel::for_each_chunk_mut(&mut value, m, |row, out| {
        let (bi, ni) = (row / n, row % n);
        let a_row = &ad[(bi * n + ni) * k..(bi * n + ni + 1) * k];
        for (mi, o) in out.iter_mut().enumerate() {
            let b_row = &bd[(bi * m + mi) * k..(bi * m + mi + 1) * k];
            *o = dot(a_row, b_row);
        }
    });
    let (aid, bid) = (a.id, b.id);
    a.graph.op(
        Tensor::from_vec(value, &[ba, n, m]),
        Box::new(move |g, sink| {
            let gd = g.data();
            let bd = bv.data();
            // dA[b,n,k] = sum_m g[b,n,m] * B[b,m,k]
            let mut ga = vec![0.0; ba * n * k];
            parallel::for_each_chunk_mut(&mut ga, k, |row, out| {
                let (bi, ni) = (row / n, row % n);
                let g_row = &gd[(bi * n + ni) * m..(bi * n + ni + 1) * m];
                for (mi, &gval) in g_row.iter().enumerate() {
                    let b_row = &bd[(bi * m + mi) * k..(bi * m + mi + 1) * k];
                    axpy(gval, b_row, out);
                }
            });
            sink(aid, Tensor::from_vec(ga, av.shape()));
            // dB[b,m,k] = sum_n g[b,n,m] * A[b,n,k]
            let ad = av.data();
            let mut gb = vec![0.0; ba * m * k];
            parallel::for_each_chunk_mut(&mut gb, k, |row, out| {
                let (bi, mi) = (row / m, row % m);
                for ni in 0..n {
                    let gval = gd[(bi * n + ni) * m + mi];
                    let a_row = &ad[(bi * n + ni) * k..(bi * n + ni + 1) * k];
                    axpy(gval, a_row, out);
                }
            });
            sink(bid, Tensor::from_vec(gb, bv.shape()));
        }),
    )
}

/// Dense layer `[R, C] x [C, D] + [D] -> [R, D]`.
pub fn linear<'g>(x: Var<'g>, weight: Var<'g>, bias: Option<Var<'g>>) -> Var<'g> {
    let (xv, wv) = (x.value(), weight.value());
    assert_eq!(xv.shape().len(), 2, "linear input must be [R, C]");
    let (r, c) = (xv.shape()[0], xv.shape()[1]);
    let (c2, d) = (wv.shape()[0], wv.shape()[1]);
    assert_eq!(c, c2, "linear: feature dim mismatch");
    let bv = bias.map(|b| b.value());
    if let Some(b) = &bv {
        assert_eq!(b.shape(), &[d], "linear: bias shape");
    }

    let xd = xv.data();
    let wd = wv.data();
    let mut value = vec![0.0; r * d];
    parallel::for_each_chunk_mut(&mut value, d, |ri, out| {
        if let Some(b) = &bv {
            out.copy_from_slice(b.data());
        }
        let x_row = &xd[ri * c..(ri + 1) * c];
        for (ci, &xval) in x_row.iter().enumerate() {
            axpy(xval, &wd[ci * d..(ci + 1) * d], out);
        }
    });

    let (xid, wid) = (x.id, weight.id);
    let bid = bias.map(|b| b.id);
    x.graph.op(
        Tensor::from_vec(value, &[r, d]),
        Box::new(move |g, sink| {
            let gd = g.data();
            let wd = wv.data();
            // dX[r,c] = dot(g[r,:], W[c,:])
            let mut gx = vec![0.0; r * c];
            parallel::for_each_chunk_mut(&mut gx, c, |ri, out| {
                let g_row = &gd[ri * d..(ri + 1) * d];
                for (ci, o) in out.iter_mut().enumerate() {
                    *o = dot(g_row, &wd[ci * d..(ci + 1) * d]);
                }
            });
            sink(xid, Tensor::from_vec(gx, xv.shape()));
            // dW[c,d] = sum_r x[r,c] * g[r,d]
            let xd = xv.data();
            let mut gw = vec![0.0; c * d];
            parallel::for_each_chunk_mut(&mut gw, d, |ci, out| {
                for ri in 0..r {
                    axpy(xd[ri * c + ci], &gd[ri * d..(ri + 1) * d], out);
                }
            });
            sink(wid, Tensor::from_vec(gw, wv.shape()));
            if let Some(bid) = bid {
                let mut gb = vec![0.0; d];
                for ri in 0..r {
                    for (o, &gv) in gb.iter_mut().zip(&gd[ri * d..(ri + 1) * d]) {
                        *o += gv;
                    }
                }
                sink(bid, Tensor::from_vec(gb, &[d]));
            }
        }),
    )
}

pub(crate) fn bmm_raw(ad: &[f64], bd: &[f64], ba: usize, n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; ba * n * m];
    parallel::for_each_chunk_mut(&mut out, m, |row, o| {
        let (bi, ni) = (row / n, row % n);
        let a_row = &ad[(bi * n + ni) * k..(bi * n + ni + 1) * k];
        for (kk, &aval) in a_row.iter().enumerate() {
            axpy(aval, &bd[(bi * k + kk) * m..(bi * k + kk + 1) * m], o);
        }
    });
    out
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::ops::sum_all;

    #[test]
    fn bmm_matches_hand_product() {
        let g = Graph::new();
        // [1,2,3] x [1,3,2]
        let a = g.leaf(Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[1, 2, 3]));
        let b = g.leaf(Tensor::from_vec(
            vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0],
            &[1, 3, 2],
        ));
        let c = bmm(a, b);
        assert_eq!(c.value().data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn bmm_nt_equals_bmm_of_transpose() {
        let g = Graph::new();
        let a = g.leaf(Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0], &[1, 2, 2]));
        let bt = g.leaf(Tensor::from_vec(vec![5.0, 6.0, 7.0, 8.0], &[1, 2, 2]));
        // bmm_nt(a, bt) = a * bt^T; row m of bt = column m
        let c = bmm_nt(a, bt);
        assert_eq!(c.value().data(), &[17.0, 23.0, 39.0, 53.0]);
    }

    #[test]
    fn linear_bias_gradient_sums_rows() {
        let g = Graph::new();
        let x = g.leaf(Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0], &[2, 2]));
        let w = g.leaf(Tensor::from_vec(vec![1.0, 0.0, 0.0, 1.0], &[2, 2]));
        let b = g.leaf(Tensor::from_vec(vec![0.5, -0.5], &[2]));
        let y = linear(x, w, Some(b));
        assert_eq!(y.value().data(), &[1.5, 1.5, 3.5, 3.5]);
        let grads = g.backward(sum_all(y));
        assert_eq!(grads.get(b).unwrap().data(), &[2.0, 2.0]);
        assert_eq!(grads.get(w).unwrap().data(), &[4.0, 4.0, 6.0, 6.0]);
    }
}

//! Define-by-run gradient tape.
//!
//! A [`Tape`] is rebuilt for every forward pass. Operations record a backward
//! rule whenever any input requires gradients; [`Tape::backward`] runs one
//! reverse topological sweep and accumulates gradients at fan-out points.
//! A tape is confined to one execution context and never shared.

use super::{
    broadcast_zip, matmul_value, reduce_to_shape, transpose_value, ParamSet, Tensor,
};
use crate::rng::Stream;
use rand_distr::{Distribution, StandardNormal};
use std::collections::BTreeMap;

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

type BackwardFn = Box<dyn Fn(&Tensor) -> Vec<Tensor>>;

struct Node {
    value: Tensor,
    parents: Vec<usize>,
    backward: Option<BackwardFn>,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to tape variables.
pub struct Gradients {
    by_node: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.by_node[var.0].as_ref()
    }
}

/// Iterates contiguous lanes of `shape` along `axis`; yields (base, stride, len).
fn lanes(shape: &[usize], axis: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    assert!(axis < shape.len(), "axis {axis} out of range for shape {shape:?}");
    let lane = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    (0..outer).flat_map(move |o| {
        (0..inner).map(move |i| (o * lane * inner + i, inner, lane))
    })
}

fn shape_without_axis(shape: &[usize], axis: usize) -> Vec<usize> {
    let mut s = shape.to_vec();
    s.remove(axis);
    s
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Tensor, parents: Vec<usize>, backward: Option<BackwardFn>) -> Var {
        let needs_grad = backward.is_some();
        self.nodes.push(Node { value, parents, backward, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// Records a leaf. Gradients accumulate here when `requires_grad` is set.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, parents: vec![], backward: None, needs_grad: requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn constant_scalar(&mut self, value: f64) -> Var {
        self.constant(Tensor::scalar(value))
    }

    fn any_needs_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        forward: impl Fn(f64, f64) -> f64,
        backward: impl Fn(&Tensor, &Tensor, &Tensor, &Tensor) -> (Tensor, Tensor) + 'static,
    ) -> Var {
        let value = broadcast_zip(self.value(a), self.value(b), forward);
        if !self.any_needs_grad(&[a, b]) {
            return self.push(value, vec![], None);
        }
        let (va, vb) = (self.value(a).clone(), self.value(b).clone());
        let out = value.clone();
        let rule: BackwardFn = Box::new(move |grad| {
            let (ga, gb) = backward(grad, &va, &vb, &out);
            vec![ga, gb]
        });
        self.push(value, vec![a.0, b.0], Some(rule))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x + y, |g, va, vb, _| {
            (reduce_to_shape(g, va.shape()), reduce_to_shape(g, vb.shape()))
        })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x - y, |g, va, vb, _| {
            let gb = reduce_to_shape(g, vb.shape()).map(|v| -v);
            (reduce_to_shape(g, va.shape()), gb)
        })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x * y, |g, va, vb, _| {
            let ga = reduce_to_shape(&broadcast_zip(g, vb, |x, y| x * y), va.shape());
            let gb = reduce_to_shape(&broadcast_zip(g, va, |x, y| x * y), vb.shape());
            (ga, gb)
        })
    }

    fn unary(
        &mut self,
        a: Var,
        forward: impl Fn(f64) -> f64,
        // derivative as a function of (input, output)
        derivative: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Var {
        let value = self.value(a).map(forward);
        if !self.nodes[a.0].needs_grad {
            return self.push(value, vec![], None);
        }
        let input = self.value(a).clone();
        let output = value.clone();
        let rule: BackwardFn = Box::new(move |grad| {
            let data = grad
                .data()
                .iter()
                .zip(input.data())
                .zip(output.data())
                .map(|((&g, &x), &y)| g * derivative(x, y))
                .collect();
            vec![Tensor::new(input.shape().to_vec(), data)]
        });
        self.push(value, vec![a.0], Some(rule))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, move |x| x * c, move |_, _| c)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, move |x| x + c, |_, _| 1.0)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), |x, _| if x > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        self.unary(
            a,
            move |x| if x > 0.0 { x } else { slope * x },
            move |x, _| if x > 0.0 { 1.0 } else { slope },
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, |x| 1.0 / (1.0 + (-x).exp()), |_, y| y * (1.0 - y))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, |_, y| 1.0 - y * y)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, |_, y| y)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, |x, _| 2.0 * x)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = matmul_value(self.value(a), self.value(b));
        if !self.any_needs_grad(&[a, b]) {
            return self.push(value, vec![], None);
        }
        let (va, vb) = (self.value(a).clone(), self.value(b).clone());
        let rule: BackwardFn = Box::new(move |grad| {
            let ga = matmul_value(grad, &transpose_value(&vb));
            let gb = matmul_value(&transpose_value(&va), grad);
            vec![ga, gb]
        });
        self.push(value, vec![a.0, b.0], Some(rule))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = transpose_value(self.value(a));
        if !self.nodes[a.0].needs_grad {
            return self.push(value, vec![], None);
        }
        let rule: BackwardFn = Box::new(move |grad| vec![transpose_value(grad)]);
        self.push(value, vec![a.0], Some(rule))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Var {
        let value = self.value(a).reshaped(shape);
        if !self.nodes[a.0].needs_grad {
            return self.push(value, vec![], None);
        }
        let orig = self.value(a).shape().to_vec();
        let rule: BackwardFn = Box::new(move |grad| vec![grad.reshaped(orig.clone())]);
        self.push(value, vec![a.0], Some(rule))
    }

    /// Concatenation along `axis`; all inputs must agree on the other axes.
    pub fn concat(&mut self, vars: &[Var], axis: usize) -> Var {
        assert!(!vars.is_empty(), "concat of zero tensors");
        let shapes: Vec<Vec<usize>> = vars.iter().map(|v| self.value(*v).shape().to_vec()).collect();
        let rank = shapes[0].len();
        for s in &shapes {
            assert!(
                s.len() == rank
                    && s.iter().enumerate().all(|(i, &d)| i == axis || d == shapes[0][i]),
                "shape mismatch: {:?} vs {:?} in concat along axis {axis}",
                shapes[0],
                s
            );
        }
        let mut out_shape = shapes[0].clone();
        out_shape[axis] = shapes.iter().map(|s| s[axis]).sum();
        let inner: usize = out_shape[axis + 1..].iter().product();
        let outer: usize = out_shape[..axis].iter().product();
        let mut data = vec![0.0; out_shape.iter().product()];
        let out_lane = out_shape[axis] * inner;
        let mut offset = 0usize;
        for (v, s) in vars.iter().zip(&shapes) {
            let src = self.value(*v).data();
            let lane = s[axis] * inner;
            for o in 0..outer {
                data[o * out_lane + offset..o * out_lane + offset + lane]
                    .copy_from_slice(&src[o * lane..(o + 1) * lane]);
            }
            offset += lane;
        }
        let value = Tensor::new(out_shape.clone(), data);
        if !self.any_needs_grad(vars) {
            return self.push(value, vec![], None);
        }
        let shapes_c = shapes.clone();
        let rule: BackwardFn = Box::new(move |grad| {
            let out_lane = out_shape[axis] * inner;
            let mut grads = Vec::with_capacity(shapes_c.len());
            let mut offset = 0usize;
            for s in &shapes_c {
                let lane = s[axis] * inner;
                let mut gdata = vec![0.0; s.iter().product()];
                for o in 0..outer {
                    gdata[o * lane..(o + 1) * lane].copy_from_slice(
                        &grad.data()[o * out_lane + offset..o * out_lane + offset + lane],
                    );
                }
                grads.push(Tensor::new(s.clone(), gdata));
                offset += lane;
            }
            grads
        });
        self.push(value, vars.iter().map(|v| v.0).collect(), Some(rule))
    }

    /// Slice `[start, end)` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, end: usize) -> Var {
        let in_shape = self.value(a).shape().to_vec();
        assert!(
            axis < in_shape.len() && start < end && end <= in_shape[axis],
            "invalid slice [{start}, {end}) along axis {axis} of shape {in_shape:?}"
        );
        let inner: usize = in_shape[axis + 1..].iter().product();
        let outer: usize = in_shape[..axis].iter().product();
        let in_lane = in_shape[axis] * inner;
        let mut out_shape = in_shape.clone();
        out_shape[axis] = end - start;
        let out_lane = out_shape[axis] * inner;
        let src = self.value(a).data();
        let mut data = vec![0.0; out_shape.iter().product()];
        for o in 0..outer {
            data[o * out_lane..(o + 1) * out_lane].copy_from_slice(
                &src[o * in_lane + start * inner..o * in_lane + end * inner],
            );
        }
        let value = Tensor::new(out_shape, data);
        if !self.nodes[a.0].needs_grad {
            return self.push(value, vec![], None);
        }
        let rule: BackwardFn = Box::new(move |grad| {
            let mut gdata = vec![0.0; in_shape.iter().product()];
            for o in 0..outer {
                gdata[o * in_lane + start * inner..o * in_lane + end * inner]
                    .copy_from_slice(&grad.data()[o * out_lane..(o + 1) * out_lane]);
            }
            vec![Tensor::new(in_shape.clone(), gdata)]
        });
        self.push(value, vec![a.0], Some(rule))
    }

    /// Row gather from a 2-D table: `(n, d)` rows at `indices` -> `(|ix|, d)`.
    /// Doubles as the embedding lookup.
    pub fn rows(&mut self, table: Var, indices: &[usize]) -> Var {
        let t = self.value(table);
        assert_eq!(t.shape().len(), 2, "rows() needs a 2-D table, got {:?}", t.shape());
        let (n, d) = (t.shape()[0], t.shape()[1]);
        for &ix in indices {
            assert!(ix < n, "row index {ix} out of range for table with {n} rows");
        }
        let mut data = Vec::with_capacity(indices.len() * d);
        for &ix in indices {
            data.extend_from_slice(&t.data()[ix * d..(ix + 1) * d]);
        }
        let value = Tensor::new(vec![indices.len(), d], data);
        if !self.nodes[table.0].needs_grad {
            return self.push(value, vec![], None);
        }
        let ixs = indices.to_vec();
        let rule: BackwardFn = Box::new(move |grad| {
            let mut gdata = vec![0.0; n * d];
            for (pos, &ix) in ixs.iter().enumerate() {
                for j in 0..d {
                    gdata[ix * d + j] += grad.data()[pos * d + j];
                }
            }
            vec![Tensor::new(vec![n, d], gdata)]
        });
        self.push(value, vec![table.0], Some(rule))
    }

    /// Picks one entry along the last axis per leading row: `(n, c)` with
    /// `indices` of length n -> `(n,)`.
    pub fn gather_last(&mut self, a: Var, indices: &[usize]) -> Var {
        let t = self.value(a);
        assert_eq!(t.shape().len(), 2, "gather_last needs a 2-D tensor, got {:?}", t.shape());
        let (n, c) = (t.shape()[0], t.shape()[1]);
        assert_eq!(n, indices.len(), "gather_last: {n} rows vs {} indices", indices.len());
        let mut data = Vec::with_capacity(n);
        for (i, &ix) in indices.iter().enumerate() {
            assert!(ix < c, "index {ix} out of range for {c} columns");
            data.push(t.data()[i * c + ix]);
        }
        let value = Tensor::new(vec![n], data);
        if !self.nodes[a.0].needs_grad {
            return self.push(value, vec![], None);
        }
        let ixs = indices.to_vec();
        let rule: BackwardFn = Box::new(move |grad| {
            let mut gdata = vec![0.0; n * c];
            for (i, &ix) in ixs.iter().enumerate() {
                gdata[i * c + ix] = grad.data()[i];
            }
            vec![Tensor::new(vec![n, c], gdata)]
        });
        self.push(value, vec![a.0], Some(rule))
    }

    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Var {
        let t = self.value(a);
        let in_shape = t.shape().to_vec();
        let out_shape = shape_without_axis(&in_shape, axis);
        let mut data = vec![0.0; out_shape.iter().product::<usize>().max(1)];
        for (pos, (base, stride, len)) in lanes(&in_shape, axis).enumerate() {
            let mut acc = 0.0;
            for s in 0..len {
                acc += t.data()[base + s * stride];
            }
            data[pos] = acc;
        }
        let value = Tensor::new(out_shape, data);
        if !self.nodes[a.0].needs_grad {
            return self.push(value, vec![], None);
        }
        let rule: BackwardFn = Box::new(move |grad| {
            let mut gdata = vec![0.0; in_shape.iter().product()];
            for (pos, (base, stride, len)) in lanes(&in_shape, axis).enumerate() {
                for s in 0..len {
                    gdata[base + s * stride] = grad.data()[pos];
                }
            }
            vec![Tensor::new(in_shape.clone(), gdata)]
        });
        self.push(value, vec![a.0], Some(rule))
    }

    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Var {
        let len = self.value(a).shape()[axis] as f64;
        let s = self.sum_axis(a, axis);
        self.scale(s, 1.0 / len)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let value = Tensor::scalar(t.data().iter().sum());
        if !self.nodes[a.0].needs_grad {
            return self.push(value, vec![], None);
        }
        let shape = t.shape().to_vec();
        let rule: BackwardFn = Box::new(move |grad| vec![Tensor::filled(&shape, grad.item())]);
        self.push(value, vec![a.0], Some(rule))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n)
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Var {
        let t = self.value(a);
        let shape = t.shape().to_vec();
        let mut data = vec![0.0; t.len()];
        for (base, stride, len) in lanes(&shape, axis) {
            let max = (0..len)
                .map(|s| t.data()[base + s * stride])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut norm = 0.0;
            for s in 0..len {
                let e = (t.data()[base + s * stride] - max).exp();
                data[base + s * stride] = e;
                norm += e;
            }
            for s in 0..len {
                data[base + s * stride] /= norm;
            }
        }
        let value = Tensor::new(shape.clone(), data);
        if !self.nodes[a.0].needs_grad {
            return self.push(value, vec![], None);
        }
        let y = value.clone();
        let rule: BackwardFn = Box::new(move |grad| {
            let mut gdata = vec![0.0; y.len()];
            for (base, stride, len) in lanes(&shape, axis) {
                let mut dot = 0.0;
                for s in 0..len {
                    dot += grad.data()[base + s * stride] * y.data()[base + s * stride];
                }
                for s in 0..len {
                    let ix = base + s * stride;
                    gdata[ix] = y.data()[ix] * (grad.data()[ix] - dot);
                }
            }
            vec![Tensor::new(shape.clone(), gdata)]
        });
        self.push(value, vec![a.0], Some(rule))
    }

    pub fn log_softmax(&mut self, a: Var, axis: usize) -> Var {
        let t = self.value(a);
        let shape = t.shape().to_vec();
        let mut data = vec![0.0; t.len()];
        for (base, stride, len) in lanes(&shape, axis) {
            let max = (0..len)
                .map(|s| t.data()[base + s * stride])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut norm = 0.0;
            for s in 0..len {
                norm += (t.data()[base + s * stride] - max).exp();
            }
            let log_norm = max + norm.ln();
            for s in 0..len {
                data[base + s * stride] = t.data()[base + s * stride] - log_norm;
            }
        }
        let value = Tensor::new(shape.clone(), data);
        if !self.nodes[a.0].needs_grad {
            return self.push(value, vec![], None);
        }
        let y = value.clone();
        let rule: BackwardFn = Box::new(move |grad| {
            let mut gdata = vec![0.0; y.len()];
            for (base, stride, len) in lanes(&shape, axis) {
                let mut gsum = 0.0;
                for s in 0..len {
                    gsum += grad.data()[base + s * stride];
                }
                for s in 0..len {
                    let ix = base + s * stride;
                    gdata[ix] = grad.data()[ix] - y.data()[ix].exp() * gsum;
                }
            }
            vec![Tensor::new(shape.clone(), gdata)]
        });
        self.push(value, vec![a.0], Some(rule))
    }

    /// Normalizes the last axis to zero mean / unit variance (no affine part;
    /// compose with `mul`/`add` for gain and bias).
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Var {
        let t = self.value(a);
        let shape = t.shape().to_vec();
        let axis = shape.len() - 1;
        let mut data = vec![0.0; t.len()];
        let mut inv_stds = Vec::new();
        for (base, stride, len) in lanes(&shape, axis) {
            let mut mean = 0.0;
            for s in 0..len {
                mean += t.data()[base + s * stride];
            }
            mean /= len as f64;
            let mut var = 0.0;
            for s in 0..len {
                let d = t.data()[base + s * stride] - mean;
                var += d * d;
            }
            var /= len as f64;
            let inv_std = 1.0 / (var + eps).sqrt();
            inv_stds.push(inv_std);
            for s in 0..len {
                let ix = base + s * stride;
                data[ix] = (t.data()[ix] - mean) * inv_std;
            }
        }
        let value = Tensor::new(shape.clone(), data);
        if !self.nodes[a.0].needs_grad {
            return self.push(value, vec![], None);
        }
        let y = value.clone();
        let rule: BackwardFn = Box::new(move |grad| {
            let mut gdata = vec![0.0; y.len()];
            for (lane_ix, (base, stride, len)) in lanes(&shape, axis).enumerate() {
                let inv_std = inv_stds[lane_ix];
                let mut gmean = 0.0;
                let mut gy_dot = 0.0;
                for s in 0..len {
                    let ix = base + s * stride;
                    gmean += grad.data()[ix];
                    gy_dot += grad.data()[ix] * y.data()[ix];
                }
                gmean /= len as f64;
                gy_dot /= len as f64;
                for s in 0..len {
                    let ix = base + s * stride;
                    gdata[ix] = inv_std * (grad.data()[ix] - gmean - y.data()[ix] * gy_dot);
                }
            }
            vec![Tensor::new(shape.clone(), gdata)]
        });
        self.push(value, vec![a.0], Some(rule))
    }

    /// Reverse sweep from a scalar loss.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(
            self.nodes[loss.0].value.len(),
            1,
            "backward requires a scalar loss, got shape {:?}",
            self.nodes[loss.0].value.shape()
        );
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for ix in (0..=loss.0).rev() {
            let Some(grad) = grads[ix].take() else { continue };
            if let Some(rule) = &self.nodes[ix].backward {
                let parent_grads = rule(&grad);
                for (parent, pg) in self.nodes[ix].parents.iter().zip(parent_grads) {
                    match &mut grads[*parent] {
                        Some(acc) => {
                            for (a, b) in acc.data_mut().iter_mut().zip(pg.data()) {
                                *a += b;
                            }
                        }
                        slot => *slot = Some(pg),
                    }
                }
            }
            if self.nodes[ix].parents.is_empty() && self.nodes[ix].needs_grad {
                grads[ix] = Some(grad);
            }
        }
        Gradients { by_node: grads }
    }
}

/// KL divergence between two diagonal Gaussians, summed over dimensions.
pub fn gaussian_kl(tape: &mut Tape, mu_q: Var, logvar_q: Var, mu_p: Var, logvar_p: Var) -> Var {
    assert_eq!(
        tape.value(mu_q).shape(),
        tape.value(mu_p).shape(),
        "shape mismatch: {:?} vs {:?} in gaussian_kl",
        tape.value(mu_q).shape(),
        tape.value(mu_p).shape()
    );
    let diff_logvar = tape.sub(logvar_p, logvar_q);
    let var_q = tape.exp(logvar_q);
    let mu_diff = tape.sub(mu_q, mu_p);
    let mu_diff_sq = tape.square(mu_diff);
    let numer = tape.add(var_q, mu_diff_sq);
    let neg_logvar_p = tape.neg(logvar_p);
    let inv_var_p = tape.exp(neg_logvar_p);
    let ratio = tape.mul(numer, inv_var_p);
    let inner = tape.add(diff_logvar, ratio);
    let inner = tape.add_scalar(inner, -1.0);
    let total = tape.sum_all(inner);
    tape.scale(total, 0.5)
}

/// `z = mu + exp(logvar / 2) * eps`, with `eps ~ N(0, I)` drawn from the
/// stream. Gradients flow to `mu` and `logvar` only.
pub fn reparameterize(tape: &mut Tape, mu: Var, logvar: Var, stream: &mut Stream) -> Var {
    assert_eq!(
        tape.value(mu).shape(),
        tape.value(logvar).shape(),
        "shape mismatch: {:?} vs {:?} in reparameterize",
        tape.value(mu).shape(),
        tape.value(logvar).shape()
    );
    let shape = tape.value(mu).shape().to_vec();
    let noise: Vec<f64> = (0..tape.value(mu).len())
        .map(|_| StandardNormal.sample(stream))
        .collect();
    let eps = tape.constant(Tensor::new(shape, noise));
    let half_logvar = tape.scale(logvar, 0.5);
    let std = tape.exp(half_logvar);
    let scaled = tape.mul(std, eps);
    tape.add(mu, scaled)
}

/// Binds every parameter in the set as a gradient-tracked leaf.
pub fn bind_params(tape: &mut Tape, params: &ParamSet) -> BTreeMap<String, Var> {
    params
        .iter()
        .map(|(name, tensor)| (name.clone(), tape.leaf(tensor.clone(), true)))
        .collect()
}

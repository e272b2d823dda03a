//! Dense `f64` tensors and a reverse-mode gradient tape.
//!
//! Everything is 64-bit: the models here are tiny and tight numerical tests
//! matter more than throughput. Broadcasting follows trailing-dimension
//! alignment (shapes are right-aligned; a dimension broadcasts when it is 1
//! or absent); anything fancier is a shape error.

mod gradcheck;
mod params;
mod tape;

pub use gradcheck::finite_diff_grad;
pub use params::{init_uniform, Adam, ParamSet};
pub use tape::{bind_params, gaussian_kl, reparameterize, Gradients, Tape, Var};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {shape:?} does not match data length {}",
            data.len()
        );
        Tensor { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![value; shape.iter().product()] }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { shape: vec![], data: vec![value] }
    }

    pub fn from_slice(values: &[f64]) -> Self {
        Tensor { shape: vec![values.len()], data: values.to_vec() }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on non-scalar tensor {:?}", self.shape);
        self.data[0]
    }

    pub fn reshaped(&self, shape: Vec<usize>) -> Tensor {
        Tensor::new(shape, self.data.clone())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Row `i` of a 2-D tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        assert_eq!(self.shape.len(), 2, "row() needs a 2-D tensor, got {:?}", self.shape);
        let cols = self.shape[1];
        &self.data[i * cols..(i + 1) * cols]
    }
}

/// Broadcast result shape under trailing alignment; panics on mismatch.
pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Vec<usize> {
    let rank = a.len().max(b.len());
    let mut out = vec![0usize; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() { 1 } else { a[i - (rank - a.len())] };
        let db = if i < rank - b.len() { 1 } else { b[i - (rank - b.len())] };
        out[i] = if da == db || db == 1 {
            da
        } else if da == 1 {
            db
        } else {
            panic!("shape mismatch: {a:?} vs {b:?} are not broadcast-compatible");
        };
    }
    out
}

fn strides_for(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![0usize; shape.len()];
    let mut acc = 1usize;
    for i in (0..shape.len()).rev() {
        strides[i] = acc;
        acc *= shape[i];
    }
    strides
}

/// Strides of `shape` viewed as the broadcast shape `out` (0 where broadcast).
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let strides = strides_for(shape);
    let pad = out.len() - shape.len();
    let mut result = vec![0usize; out.len()];
    for i in 0..out.len() {
        if i < pad {
            result[i] = 0;
        } else if shape[i - pad] == 1 && out[i] != 1 {
            result[i] = 0;
        } else {
            result[i] = strides[i - pad];
        }
    }
    result
}

/// Elementwise binary op with broadcasting.
pub(crate) fn broadcast_zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    if a.shape == b.shape {
        let data = a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
        return Tensor { shape: a.shape.clone(), data };
    }
    let out_shape = broadcast_shape(&a.shape, &b.shape);
    let sa = broadcast_strides(&a.shape, &out_shape);
    let sb = broadcast_strides(&b.shape, &out_shape);
    let total: usize = out_shape.iter().product();
    let mut data = Vec::with_capacity(total);
    let mut index = vec![0usize; out_shape.len()];
    let mut off_a = 0usize;
    let mut off_b = 0usize;
    for _ in 0..total {
        data.push(f(a.data[off_a], b.data[off_b]));
        // odometer increment
        for dim in (0..out_shape.len()).rev() {
            index[dim] += 1;
            off_a += sa[dim];
            off_b += sb[dim];
            if index[dim] < out_shape[dim] {
                break;
            }
            off_a -= sa[dim] * out_shape[dim];
            off_b -= sb[dim] * out_shape[dim];
            index[dim] = 0;
        }
    }
    Tensor { shape: out_shape, data }
}

/// Sums `grad` (shaped like a broadcast output) back down to `target` shape.
pub(crate) fn reduce_to_shape(grad: &Tensor, target: &[usize]) -> Tensor {
    if grad.shape == target {
        return grad.clone();
    }
    let out_shape = &grad.shape;
    let st = broadcast_strides(target, out_shape);
    let mut data = vec![0.0; target.iter().product()];
    let total: usize = out_shape.iter().product();
    let mut index = vec![0usize; out_shape.len()];
    let mut off_t = 0usize;
    for pos in 0..total {
        data[off_t] += grad.data[pos];
        for dim in (0..out_shape.len()).rev() {
            index[dim] += 1;
            off_t += st[dim];
            if index[dim] < out_shape[dim] {
                break;
            }
            off_t -= st[dim] * out_shape[dim];
            index[dim] = 0;
        }
    }
    Tensor { shape: target.to_vec(), data }
}

/// Plain 2-D matrix product `(n,k) x (k,m) -> (n,m)`.
pub(crate) fn matmul_value(a: &Tensor, b: &Tensor) -> Tensor {
    assert!(
        a.shape.len() == 2 && b.shape.len() == 2 && a.shape[1] == b.shape[0],
        "shape mismatch: {:?} vs {:?} in matmul",
        a.shape,
        b.shape
    );
    let (n, k) = (a.shape[0], a.shape[1]);
    let m = b.shape[1];
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let arow = &a.data[i * k..(i + 1) * k];
        let orow = &mut out[i * m..(i + 1) * m];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * m..(p + 1) * m];
            for j in 0..m {
                orow[j] += av * brow[j];
            }
        }
    }
    Tensor { shape: vec![n, m], data: out }
}

pub(crate) fn transpose_value(a: &Tensor) -> Tensor {
    assert_eq!(a.shape.len(), 2, "transpose needs a 2-D tensor, got {:?}", a.shape);
    let (n, m) = (a.shape[0], a.shape[1]);
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            out[j * n + i] = a.data[i * m + j];
        }
    }
    Tensor { shape: vec![m, n], data: out }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broadcast_row_vector() {
        let a = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Tensor::from_slice(&[10.0, 20.0, 30.0]);
        let c = broadcast_zip(&a, &b, |x, y| x + y);
        assert_eq!(c.shape(), &[2, 3]);
        assert_eq!(c.data(), &[11.0, 22.0, 33.0, 14.0, 25.0, 36.0]);
    }

    #[test]
    fn broadcast_outer_sum() {
        let a = Tensor::new(vec![3, 1], vec![1.0, 2.0, 3.0]);
        let b = Tensor::from_slice(&[10.0, 20.0]);
        let c = broadcast_zip(&a, &b, |x, y| x + y);
        assert_eq!(c.shape(), &[3, 2]);
        assert_eq!(c.data(), &[11.0, 21.0, 12.0, 22.0, 13.0, 23.0]);
    }

    #[test]
    fn reduce_undoes_broadcast() {
        let g = Tensor::new(vec![2, 3], vec![1.0; 6]);
        let r = reduce_to_shape(&g, &[3]);
        assert_eq!(r.data(), &[2.0, 2.0, 2.0]);
        let r2 = reduce_to_shape(&g, &[2, 1]);
        assert_eq!(r2.data(), &[3.0, 3.0]);
    }

    #[test]
    fn matmul_hand_checked() {
        let a = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Tensor::new(vec![3, 2], vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = matmul_value(&a, &b);
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    #[should_panic(expected = "shape mismatch")]
    fn incompatible_broadcast_panics() {
        let a = Tensor::from_slice(&[1.0, 2.0]);
        let b = Tensor::from_slice(&[1.0, 2.0, 3.0]);
        broadcast_zip(&a, &b, |x, y| x + y);
    }
}

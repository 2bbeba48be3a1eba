//! Gates, Hadamard product, channel concatenation and nearest upsampling.

use alloc::vec::Vec;

use super::Tensor;
use crate::error::{Error, Result};

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

pub fn sigmoid(z: &Tensor) -> Tensor {
    z.map(logistic)
}

/// Gradient of [`sigmoid`] given its output `y`: `g · y(1 − y)`.
pub fn sigmoid_backward(y: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    grad_out.expect_dims(y.dims(), "sigmoid grad_out")?;
    let data = y.as_raw().iter().zip(grad_out.as_raw()).map(|(&s, &g)| g * s * (1.0 - s)).collect();
    Ok(Tensor::from_parts(y.dims(), data))
}

/// `z / (1 + e^{−z})`, i.e. `z · sigmoid(z)`.
pub fn silu_gate(z: &Tensor) -> Tensor {
    z.map(|v| v / (1.0 + libm::exp(-v)))
}

/// Gradient of [`silu_gate`] at input `z`: `g · (s + z·s·(1 − s))`.
pub fn silu_gate_backward(z: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    grad_out.expect_dims(z.dims(), "silu grad_out")?;
    let data = z
        .as_raw()
        .iter()
        .zip(grad_out.as_raw())
        .map(|(&v, &g)| {
            let s = logistic(v);
            g * (s + v * s * (1.0 - s))
        })
        .collect();
    Ok(Tensor::from_parts(z.dims(), data))
}

pub fn hadamard(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    b.expect_dims(a.dims(), "hadamard")?;
    let data = a.as_raw().iter().zip(b.as_raw()).map(|(x, y)| x * y).collect();
    Ok(Tensor::from_parts(a.dims(), data))
}

/// Stacks `b`'s channels after `a`'s.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let [n, ca, h, w] = a.dims();
    let [nb, cb, hb, wb] = b.dims();
    if (n, h, w) != (nb, hb, wb) {
        return Err(Error::ShapeMismatch(alloc::format!(
            "concat needs equal N,H,W: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let plane = h * w;
    let mut data = Vec::with_capacity(a.len() + b.len());
    for i in 0..n {
        data.extend_from_slice(&a.as_raw()[i * ca * plane..(i + 1) * ca * plane]);
        data.extend_from_slice(&b.as_raw()[i * cb * plane..(i + 1) * cb * plane]);
    }
    Ok(Tensor::from_parts([n, ca + cb, h, w], data))
}

/// Replicates every pixel into an `s x s` block.
pub fn nearest_upsample(x: &Tensor, s: usize) -> Result<Tensor> {
    if s == 0 {
        return Err(Error::InvalidParameter("upsampling factor must be >= 1".into()));
    }
    let [n, c, h, w] = x.dims();
    let dims = [n, c, h * s, w * s];
    let xs = x.as_raw();
    let mut data = Vec::with_capacity(x.len() * s * s);
    for plane in 0..n * c {
        for oy in 0..h * s {
            let row = &xs[(plane * h + oy / s) * w..(plane * h + oy / s + 1) * w];
            for ox in 0..w * s {
                data.push(row[ox / s]);
            }
        }
    }
    Ok(Tensor::from_parts(dims, data))
}

/// Adjoint of [`nearest_upsample`]: sums each `s x s` block.
pub fn nearest_upsample_backward(grad_out: &Tensor, s: usize) -> Result<Tensor> {
    block_reduce(grad_out, s, 1.0)
}

/// `s x s` average pooling with stride `s`.
pub fn avg_pool(x: &Tensor, s: usize) -> Result<Tensor> {
    block_reduce(x, s, 1.0 / (s * s) as f64)
}

fn block_reduce(x: &Tensor, s: usize, weight: f64) -> Result<Tensor> {
    let [n, c, h, w] = x.dims();
    if s == 0 || h % s != 0 || w % s != 0 {
        return Err(Error::ShapeMismatch(alloc::format!("{h}x{w} is not a multiple of block size {s}")));
    }
    let (oh, ow) = (h / s, w / s);
    let xs = x.as_raw();
    let mut data = alloc::vec![0.0; n * c * oh * ow];
    for plane in 0..n * c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for dy in 0..s {
                    for dx in 0..s {
                        acc += xs[(plane * h + oy * s + dy) * w + ox * s + dx];
                    }
                }
                data[(plane * oh + oy) * ow + ox] = acc * weight;
            }
        }
    }
    Ok(Tensor::from_parts([n, c, oh, ow], data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn gate_values() {
        let z = Tensor::new([1, 1, 1, 3], vec![0.0, 1.0, 40.0]).unwrap();
        let s = silu_gate(&z);
        assert_eq!(s.as_raw()[0], 0.0);
        assert!((s.as_raw()[1] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((s.as_raw()[2] - 40.0).abs() < 1e-9);
        assert_eq!(sigmoid(&z).as_raw()[0], 0.5);
    }

    #[test]
    fn hadamard_and_concat() {
        let x = Tensor::from_fn([2, 3, 2, 2], |[a, b, c, d]| (a * 24 + b * 4 + c * 2 + d) as f64);
        assert_eq!(hadamard(&x, &Tensor::full(x.dims(), 1.0)).unwrap(), x);
        assert!(hadamard(&x, &Tensor::zeros([1, 3, 2, 2])).is_err());
        let y = Tensor::from_fn([2, 5, 2, 2], |[a, b, c, d]| -((a * 40 + b * 4 + c * 2 + d) as f64));
        let cat = concat_channels(&x, &y).unwrap();
        assert_eq!(cat.dims(), [2, 8, 2, 2]);
        assert_eq!(cat.slice_channels(0..3).unwrap(), x);
        assert_eq!(cat.slice_channels(3..8).unwrap(), y);
        assert!(concat_channels(&x, &Tensor::zeros([2, 1, 3, 2])).is_err());
    }

    #[test]
    fn upsample_replicates() {
        let x = Tensor::new([1, 1, 1, 1], vec![2.5]).unwrap();
        let u = nearest_upsample(&x, 2).unwrap();
        assert_eq!(u.dims(), [1, 1, 2, 2]);
        assert!(u.as_raw().iter().all(|&v| v == 2.5));
        let x = Tensor::from_fn([1, 2, 2, 3], |[_, c, h, w]| (c * 6 + h * 3 + w) as f64);
        assert_eq!(nearest_upsample(&x, 1).unwrap(), x);
        let u = nearest_upsample(&x, 3).unwrap();
        assert_eq!(u.sum(), 9.0 * x.sum());
        assert_eq!(u.get(0, 1, 5, 8), x.get(0, 1, 1, 2));
        assert_eq!(avg_pool(&u, 3).unwrap(), x);
    }

    #[test]
    fn upsample_adjoint() {
        let x = Tensor::from_fn([1, 2, 2, 2], |[_, c, h, w]| (c + h * 2 + w) as f64 - 1.5);
        let g = Tensor::from_fn([1, 2, 4, 4], |[_, c, h, w]| (c * 16 + h * 4 + w) as f64 * 0.1);
        let lhs = nearest_upsample(&x, 2).unwrap().dot(&g);
        let rhs = x.dot(&nearest_upsample_backward(&g, 2).unwrap());
        assert!((lhs - rhs).abs() < 1e-12);
    }
}

//! Direct 2-D cross-correlation (no kernel flip) with zero padding and groups.

use alloc::vec::Vec;

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2dParams {
    /// `(C_out, C_in / groups, Kh, Kw)`.
    pub weight: Tensor,
    pub bias: Option<Vec<f64>>,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl Conv2dParams {
    pub fn new(weight: Tensor, bias: Option<Vec<f64>>, stride: usize, padding: usize) -> Result<Self> {
        Self::grouped(weight, bias, stride, padding, 1)
    }

    pub fn grouped(weight: Tensor, bias: Option<Vec<f64>>, stride: usize, padding: usize, groups: usize) -> Result<Self> {
        let p = Self { weight, bias, stride, padding, groups };
        p.validate()?;
        Ok(p)
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dims()[1] * self.groups
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.weight.dims()[2], self.weight.dims()[3])
    }

    /// Number of weight scalars (bias excluded).
    pub fn weight_count(&self) -> usize {
        self.weight.len()
    }

    pub fn validate(&self) -> Result<()> {
        let [co, _, kh, kw] = self.weight.dims();
        if kh == 0 || kw == 0 {
            return Err(Error::InvalidParameter("kernel dims must be >= 1".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter("stride must be >= 1".into()));
        }
        if self.groups == 0 || co % self.groups != 0 {
            return Err(Error::InvalidParameter(alloc::format!(
                "groups {} must divide output channels {co}",
                self.groups
            )));
        }
        if let Some(b) = &self.bias {
            if b.len() != co {
                return Err(Error::ShapeMismatch(alloc::format!("bias has {} entries, expected {co}", b.len())));
            }
        }
        Ok(())
    }

    pub fn output_dims(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        let [n, c, h, w] = input;
        if c != self.in_channels() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "conv expects {} input channels, got {c}",
                self.in_channels()
            )));
        }
        let (kh, kw) = self.kernel();
        let (ph, pw) = (h + 2 * self.padding, w + 2 * self.padding);
        if ph < kh || pw < kw {
            return Err(Error::ShapeMismatch(alloc::format!("padded input {ph}x{pw} smaller than kernel {kh}x{kw}")));
        }
        Ok([n, self.out_channels(), (ph - kh) / self.stride + 1, (pw - kw) / self.stride + 1])
    }
}

/// Multiplications and additions executed by the forward loop.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCount {
    pub mults: u128,
    pub adds: u128,
}

impl OpCount {
    pub fn flops(&self) -> u128 {
        self.mults + self.adds
    }
}

trait Tally {
    fn mac(&mut self);
}

struct NoTally;

impl Tally for NoTally {
    #[inline(always)]
    fn mac(&mut self) {}
}

impl Tally for OpCount {
    #[inline(always)]
    fn mac(&mut self) {
        self.mults += 1;
        self.adds += 1;
    }
}

/// Input coordinate for output position `o` and tap `k`, or `None` inside the padding.
#[inline]
fn source(o: usize, k: usize, stride: usize, pad: usize, len: usize) -> Option<usize> {
    (o * stride + k).checked_sub(pad).filter(|&i| i < len)
}

fn forward_impl<T: Tally>(x: &Tensor, p: &Conv2dParams, tally: &mut T) -> Result<Tensor> {
    p.validate()?;
    let out_dims = p.output_dims(x.dims())?;
    let [n, _, h, w] = x.dims();
    let [_, co, oh, ow] = out_dims;
    let (kh, kw) = p.kernel();
    let cig = p.weight.dims()[1];
    let cog = co / p.groups;
    let wt = p.weight.as_raw();
    let xs = x.as_raw();
    let mut out = Vec::with_capacity(out_dims.iter().product());
    for b in 0..n {
        for oc in 0..co {
            let ic0 = (oc / cog) * cig;
            let bias = p.bias.as_ref().map_or(0.0, |bv| bv[oc]);
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias;
                    for icg in 0..cig {
                        let xbase = (b * x.channels() + ic0 + icg) * h * w;
                        let wbase = (oc * cig + icg) * kh * kw;
                        for ky in 0..kh {
                            let iy = source(oy, ky, p.stride, p.padding, h);
                            for kx in 0..kw {
                                let v = match (iy, source(ox, kx, p.stride, p.padding, w)) {
                                    (Some(iy), Some(ix)) => xs[xbase + iy * w + ix],
                                    _ => 0.0,
                                };
                                acc += wt[wbase + ky * kw + kx] * v;
                                tally.mac();
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
    }
    Ok(Tensor::from_parts(out_dims, out))
}

pub fn conv2d_forward(x: &Tensor, p: &Conv2dParams) -> Result<Tensor> {
    forward_impl(x, p, &mut NoTally)
}

/// Forward pass that also reports the multiply and add operations it executed
/// (padding taps included, one add per tap onto the bias-initialized accumulator).
pub fn conv2d_forward_counted(x: &Tensor, p: &Conv2dParams) -> Result<(Tensor, OpCount)> {
    let mut count = OpCount::default();
    let y = forward_impl(x, p, &mut count)?;
    Ok((y, count))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2dGrads {
    pub x: Tensor,
    pub weight: Tensor,
    pub bias: Option<Vec<f64>>,
}

pub fn conv2d_backward(x: &Tensor, p: &Conv2dParams, grad_out: &Tensor) -> Result<Conv2dGrads> {
    p.validate()?;
    let out_dims = p.output_dims(x.dims())?;
    grad_out.expect_dims(out_dims, "conv2d grad_out")?;
    let [n, ci, h, w] = x.dims();
    let [_, co, oh, ow] = out_dims;
    let (kh, kw) = p.kernel();
    let cig = p.weight.dims()[1];
    let cog = co / p.groups;
    let wt = p.weight.as_raw();
    let xs = x.as_raw();
    let gs = grad_out.as_raw();
    let mut gx = alloc::vec![0.0; x.len()];
    let mut gw = alloc::vec![0.0; p.weight.len()];
    let mut gb = p.bias.as_ref().map(|_| alloc::vec![0.0; co]);
    for b in 0..n {
        for oc in 0..co {
            let ic0 = (oc / cog) * cig;
            for oy in 0..oh {
                for ox in 0..ow {
                    let g = gs[((b * co + oc) * oh + oy) * ow + ox];
                    if let Some(gb) = gb.as_mut() {
                        gb[oc] += g;
                    }
                    for icg in 0..cig {
                        let xbase = (b * ci + ic0 + icg) * h * w;
                        let wbase = (oc * cig + icg) * kh * kw;
                        for ky in 0..kh {
                            let Some(iy) = source(oy, ky, p.stride, p.padding, h) else { continue };
                            for kx in 0..kw {
                                let Some(ix) = source(ox, kx, p.stride, p.padding, w) else { continue };
                                let xi = xbase + iy * w + ix;
                                let wi = wbase + ky * kw + kx;
                                gx[xi] += wt[wi] * g;
                                gw[wi] += xs[xi] * g;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(Conv2dGrads {
        x: Tensor::from_parts(x.dims(), gx),
        weight: Tensor::from_parts(p.weight.dims(), gw),
        bias: gb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn params(weight: Tensor, bias: Option<Vec<f64>>, stride: usize, padding: usize) -> Conv2dParams {
        Conv2dParams::new(weight, bias, stride, padding).unwrap()
    }

    #[test]
    fn one_by_one_scales() {
        let x = Tensor::new([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = params(Tensor::full([1, 1, 1, 1], 2.0), None, 1, 0);
        assert_eq!(conv2d_forward(&x, &p).unwrap().as_raw(), &[2.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn identity_kernel_is_exact() {
        let x = Tensor::from_fn([2, 3, 4, 5], |[n, c, h, w]| (n as f64 - 0.3 * c as f64) * 1.7 + (h * w) as f64 / 7.0);
        let w = Tensor::from_fn([3, 3, 1, 1], |[o, i, _, _]| if o == i { 1.0 } else { 0.0 });
        let p = params(w, Some(vec![0.0; 3]), 1, 0);
        assert_eq!(conv2d_forward(&x, &p).unwrap(), x);
    }

    #[test]
    fn all_ones_three_by_three() {
        let x = Tensor::full([1, 1, 5, 5], 1.0);
        let p = params(Tensor::full([1, 1, 3, 3], 1.0), None, 1, 0);
        let y = conv2d_forward(&x, &p).unwrap();
        assert_eq!(y.dims(), [1, 1, 3, 3]);
        assert!(y.as_raw().iter().all(|&v| v == 9.0));
        // With padding the corners see 4 taps.
        let p = params(Tensor::full([1, 1, 3, 3], 1.0), None, 1, 1);
        let y = conv2d_forward(&x, &p).unwrap();
        assert_eq!(y.get(0, 0, 0, 0), 4.0);
        assert_eq!(y.get(0, 0, 2, 2), 9.0);
    }

    #[test]
    fn stride_two_output_dims() {
        let p = params(Tensor::zeros([8, 4, 3, 3]), None, 2, 1);
        assert_eq!(p.output_dims([1, 4, 8, 8]).unwrap(), [1, 8, 4, 4]);
        assert_eq!(p.output_dims([1, 4, 7, 7]).unwrap(), [1, 8, 4, 4]);
        assert!(p.output_dims([1, 3, 8, 8]).is_err());
    }

    #[test]
    fn grouped_conv_keeps_groups_separate() {
        // Two groups, each 1 in -> 1 out, weights 2 and 3.
        let x = Tensor::new([1, 2, 1, 1], vec![5.0, 7.0]).unwrap();
        let p = Conv2dParams::grouped(Tensor::new([2, 1, 1, 1], vec![2.0, 3.0]).unwrap(), None, 1, 0, 2).unwrap();
        assert_eq!(conv2d_forward(&x, &p).unwrap().as_raw(), &[10.0, 21.0]);
    }

    #[test]
    fn scalar_chain_rule() {
        let x = Tensor::new([1, 1, 1, 1], vec![3.0]).unwrap();
        let p = params(Tensor::full([1, 1, 1, 1], -2.0), Some(vec![0.5]), 1, 0);
        let g = Tensor::new([1, 1, 1, 1], vec![4.0]).unwrap();
        let grads = conv2d_backward(&x, &p, &g).unwrap();
        assert_eq!(grads.x.as_raw(), &[-8.0]);
        assert_eq!(grads.weight.as_raw(), &[12.0]);
        assert_eq!(grads.bias, Some(vec![4.0]));
    }

    #[test]
    fn zero_cotangent_zero_grads() {
        let x = Tensor::from_fn([2, 3, 5, 5], |[a, b, c, d]| (a + b + c * d) as f64);
        let p = params(Tensor::full([4, 3, 3, 3], 0.1), Some(vec![1.0; 4]), 1, 1);
        let y = conv2d_forward(&x, &p).unwrap();
        let grads = conv2d_backward(&x, &p, &Tensor::zeros(y.dims())).unwrap();
        assert!(grads.x.as_raw().iter().chain(grads.weight.as_raw()).all(|&v| v == 0.0));
        assert_eq!(grads.bias, Some(vec![0.0; 4]));
        assert!(conv2d_backward(&x, &p, &Tensor::zeros([1, 1, 1, 1])).is_err());
    }

    #[test]
    fn counted_ops_match_two_macs_per_tap() {
        let x = Tensor::full([1, 2, 4, 4], 1.0);
        let p = params(Tensor::full([2, 2, 3, 3], 1.0), Some(vec![0.0; 2]), 1, 1);
        let (_, count) = conv2d_forward_counted(&x, &p).unwrap();
        assert_eq!(count.flops(), 1152);
    }
}

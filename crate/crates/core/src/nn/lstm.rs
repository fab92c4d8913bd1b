//! Standard LSTM layer (no peepholes) over batched sequences, with
//! backpropagation through time.
//!
//! Gate layout in the fused weight matrices is `[input | forget | candidate | output]`.

use alloc::vec::Vec;

use crate::error::{shape_err, Result};
use crate::math;
use crate::nn::params::uniform_matrix;
use crate::nn::{Matrix, Tensor3};
use crate::StimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub input_size: usize,
    pub hidden_size: usize,
    /// `input_size × 4·hidden_size`.
    pub w_x: Matrix,
    /// `hidden_size × 4·hidden_size`.
    pub w_h: Matrix,
    /// `1 × 4·hidden_size`.
    pub bias: Matrix,
}

/// Activations saved by [`LstmLayer::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    xs: Vec<Matrix>,
    /// Post-activation gates per step, `b × 4h`.
    gates: Vec<Matrix>,
    /// Cell states `c_0 .. c_l` (`c_0` is zero).
    cells: Vec<Matrix>,
    /// Hidden states `h_0 .. h_l` (`h_0` is zero).
    hiddens: Vec<Matrix>,
}

impl LstmLayer {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        LstmLayer {
            input_size,
            hidden_size,
            w_x: Matrix::zeros(input_size, 4 * hidden_size),
            w_h: Matrix::zeros(hidden_size, 4 * hidden_size),
            bias: Matrix::zeros(1, 4 * hidden_size),
        }
    }

    /// Uniform `±1/√fan_in` weights, forget-gate bias 1.
    pub fn init(input_size: usize, hidden_size: usize, rng: &mut StimRng) -> Self {
        let mut layer = LstmLayer {
            input_size,
            hidden_size,
            w_x: uniform_matrix(input_size, 4 * hidden_size, input_size, rng),
            w_h: uniform_matrix(hidden_size, 4 * hidden_size, hidden_size, rng),
            bias: Matrix::zeros(1, 4 * hidden_size),
        };
        for j in hidden_size..2 * hidden_size {
            layer.bias.set(0, j, 1.0);
        }
        layer
    }

    /// Runs the layer over `input` shaped `b × l × m` (b sequences of length
    /// l), from zero initial states. Returns hidden states `b × l × h`.
    pub fn forward(&self, input: &Tensor3) -> Result<(Tensor3, LstmCache)> {
        let (b, l, m) = input.dims();
        if m != self.input_size {
            return Err(shape_err!("lstm input width {m}, layer expects {}", self.input_size));
        }
        let h = self.hidden_size;
        let mut out = Tensor3::zeros(b, l, h);
        let mut cache = LstmCache {
            xs: Vec::with_capacity(l),
            gates: Vec::with_capacity(l),
            cells: Vec::with_capacity(l + 1),
            hiddens: Vec::with_capacity(l + 1),
        };
        cache.cells.push(Matrix::zeros(b, h));
        cache.hiddens.push(Matrix::zeros(b, h));
        for t in 0..l {
            let x = input.slice_axis1(t);
            let mut z = Matrix::zeros(b, 4 * h);
            x.matmul_into(&self.w_x, &mut z, true)?;
            cache.hiddens[t].matmul_into(&self.w_h, &mut z, true)?;
            let bias = self.bias.row(0);
            let mut c = Matrix::zeros(b, h);
            let mut hid = Matrix::zeros(b, h);
            for r in 0..b {
                let zr = z.row_mut(r);
                for (v, bv) in zr.iter_mut().zip(bias) {
                    *v += bv;
                }
                for j in 0..h {
                    zr[j] = math::sigmoid(zr[j]);
                    zr[h + j] = math::sigmoid(zr[h + j]);
                    zr[2 * h + j] = math::tanh(zr[2 * h + j]);
                    zr[3 * h + j] = math::sigmoid(zr[3 * h + j]);
                }
                let c_prev = cache.cells[t].row(r);
                let c_row = c.row_mut(r);
                for j in 0..h {
                    c_row[j] = zr[h + j] * c_prev[j] + zr[j] * zr[2 * h + j];
                }
                let h_row = hid.row_mut(r);
                for j in 0..h {
                    h_row[j] = zr[3 * h + j] * math::tanh(c_row[j]);
                }
            }
            out.set_slice_axis1(t, &hid);
            cache.xs.push(x);
            cache.gates.push(z);
            cache.cells.push(c);
            cache.hiddens.push(hid);
        }
        Ok((out, cache))
    }

    /// Backpropagates `d_out` (`b × l × h`) through the sequence,
    /// accumulating parameter gradients into `grads`. Returns the input
    /// gradient `b × l × m` when `need_input_grad` is set.
    pub fn backward(
        &self,
        cache: &LstmCache,
        d_out: &Tensor3,
        grads: &mut LstmLayer,
        need_input_grad: bool,
    ) -> Result<Option<Tensor3>> {
        let l = cache.gates.len();
        let h = self.hidden_size;
        let (b, dl, dh_w) = d_out.dims();
        if dl != l || dh_w != h {
            return Err(shape_err!("lstm backward expects {b}x{l}x{h}, got {:?}", d_out.dims()));
        }
        let mut d_input = need_input_grad.then(|| Tensor3::zeros(b, l, self.input_size));
        let mut dh_next = Matrix::zeros(b, h);
        let mut dc_next = Matrix::zeros(b, h);
        let mut dz = Matrix::zeros(b, 4 * h);
        for t in (0..l).rev() {
            let gates = &cache.gates[t];
            let c = &cache.cells[t + 1];
            let c_prev = &cache.cells[t];
            for r in 0..b {
                let g = gates.row(r);
                let dzr = dz.row_mut(r);
                for j in 0..h {
                    let (ig, fg, cg, og) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                    let tc = math::tanh(c.get(r, j));
                    let dh = d_out.get(r, t, j) + dh_next.get(r, j);
                    let dc = dh * og * (1.0 - tc * tc) + dc_next.get(r, j);
                    dzr[j] = dc * cg * ig * (1.0 - ig);
                    dzr[h + j] = dc * c_prev.get(r, j) * fg * (1.0 - fg);
                    dzr[2 * h + j] = dc * ig * (1.0 - cg * cg);
                    dzr[3 * h + j] = dh * tc * og * (1.0 - og);
                    dc_next.set(r, j, dc * fg);
                }
            }
            cache.xs[t].t_matmul_acc(&dz, &mut grads.w_x)?;
            cache.hiddens[t].t_matmul_acc(&dz, &mut grads.w_h)?;
            let gb = grads.bias.row_mut(0);
            for r in 0..b {
                for (acc, v) in gb.iter_mut().zip(dz.row(r)) {
                    *acc += v;
                }
            }
            dz.matmul_t_into(&self.w_h, &mut dh_next, false)?;
            if let Some(dx) = d_input.as_mut() {
                let mut dxt = Matrix::zeros(b, self.input_size);
                dz.matmul_t_into(&self.w_x, &mut dxt, false)?;
                dx.set_slice_axis1(t, &dxt);
            }
        }
        Ok(d_input)
    }
}

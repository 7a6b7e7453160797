//! Sub-network parameters, forward pass and backpropagation through time.
//!
//! Each sub-network is: input fully-connected layer with ReLU (dimension
//! expansion by the factor epsilon), K stacked LSTM layers unrolled over
//! L_I steps with weights shared across steps, and a linear head that maps
//! the last layer's L_I outputs to the tau1 * L_P predicted values.

use serde::{Deserialize, Serialize};

use crate::error::{CtpError, Result};
use crate::numerics::SimRng;

/// Small dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl RMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn init_uniform(rows: usize, cols: usize, rng: &mut SimRng) -> Self {
        let bound = 1.0 / (cols as f64).sqrt();
        Self {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect(),
        }
    }

    /// `out += self * x`.
    pub fn matvec_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            out[r] += acc;
        }
    }

    /// `out += self^T * x`.
    pub fn matvec_t_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * xr;
            }
        }
    }

    /// Rank-one accumulation `self += u v^T`.
    pub fn add_outer(&mut self, u: &[f64], v: &[f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for r in 0..self.rows {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            let ur = u[r];
            if ur == 0.0 {
                continue;
            }
            for (w, vi) in row.iter_mut().zip(v) {
                *w += ur * vi;
            }
        }
    }
}

/// One gate's parameters: input weights, recurrent weights, bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub wx: RMat,
    pub wy: RMat,
    pub b: Vec<f64>,
}

impl Gate {
    fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            wx: RMat::zeros(hidden, input),
            wy: RMat::zeros(hidden, hidden),
            b: vec![0.0; hidden],
        }
    }

    fn init(hidden: usize, input: usize, bias: f64, rng: &mut SimRng) -> Self {
        Self {
            wx: RMat::init_uniform(hidden, input, rng),
            wy: RMat::init_uniform(hidden, hidden, rng),
            b: vec![bias; hidden],
        }
    }

    fn preactivation(&self, x: &[f64], y_prev: &[f64]) -> Vec<f64> {
        let mut pre = self.b.clone();
        self.wx.matvec_acc(x, &mut pre);
        self.wy.matvec_acc(y_prev, &mut pre);
        pre
    }
}

/// Forget / input / output / candidate gate parameters of one LSTM layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerParams {
    pub forget: Gate,
    pub input: Gate,
    pub output: Gate,
    pub cand: Gate,
}

impl LstmLayerParams {
    fn zeros(hidden: usize) -> Self {
        Self {
            forget: Gate::zeros(hidden, hidden),
            input: Gate::zeros(hidden, hidden),
            output: Gate::zeros(hidden, hidden),
            cand: Gate::zeros(hidden, hidden),
        }
    }

    fn init(hidden: usize, rng: &mut SimRng) -> Self {
        // forget-gate bias starts at +1 so early training does not erase state
        Self {
            forget: Gate::init(hidden, hidden, 1.0, rng),
            input: Gate::init(hidden, hidden, 0.0, rng),
            output: Gate::init(hidden, hidden, 0.0, rng),
            cand: Gate::init(hidden, hidden, 0.0, rng),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations of one LSTM cell evaluation.
#[derive(Debug, Clone)]
pub struct CellOutput {
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub o: Vec<f64>,
    /// tanh candidate.
    pub z: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub y: Vec<f64>,
}

/// One LSTM cell step:
/// `f = sigma(Wfx x + Wfy y_prev + bf)` (input/output gates analogous),
/// `c = f . c_prev + i . tanh(Wcx x + Wcy y_prev + bc)`, `y = o . tanh(c)`.
pub fn lstm_cell_forward(
    layer: &LstmLayerParams,
    x: &[f64],
    y_prev: &[f64],
    c_prev: &[f64],
) -> CellOutput {
    let f: Vec<f64> = layer
        .forget
        .preactivation(x, y_prev)
        .into_iter()
        .map(sigmoid)
        .collect();
    let i: Vec<f64> = layer
        .input
        .preactivation(x, y_prev)
        .into_iter()
        .map(sigmoid)
        .collect();
    let o: Vec<f64> = layer
        .output
        .preactivation(x, y_prev)
        .into_iter()
        .map(sigmoid)
        .collect();
    let z: Vec<f64> = layer
        .cand
        .preactivation(x, y_prev)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let c: Vec<f64> = (0..f.len())
        .map(|n| f[n] * c_prev[n] + i[n] * z[n])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|&v| v.tanh()).collect();
    let y: Vec<f64> = o.iter().zip(&tanh_c).map(|(o, tc)| o * tc).collect();
    CellOutput {
        f,
        i,
        o,
        z,
        c,
        tanh_c,
        y,
    }
}

/// All weights and biases of one (R or I) sub-network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubNetwork {
    pub w_e: RMat,
    pub b_e: Vec<f64>,
    pub layers: Vec<LstmLayerParams>,
    pub w_p: RMat,
    pub b_p: Vec<f64>,
}

/// Shape constants of a sub-network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetDims {
    pub d_in: usize,
    pub hidden: usize,
    pub k_layers: usize,
    pub l_in: usize,
    pub d_out: usize,
}

impl SubNetwork {
    pub fn zeros(dims: NetDims) -> Self {
        Self {
            w_e: RMat::zeros(dims.hidden, dims.d_in),
            b_e: vec![0.0; dims.hidden],
            layers: (0..dims.k_layers)
                .map(|_| LstmLayerParams::zeros(dims.hidden))
                .collect(),
            w_p: RMat::zeros(dims.d_out, dims.hidden * dims.l_in),
            b_p: vec![0.0; dims.d_out],
        }
    }

    pub fn init(dims: NetDims, rng: &mut SimRng) -> Self {
        Self {
            w_e: RMat::init_uniform(dims.hidden, dims.d_in, rng),
            b_e: vec![0.0; dims.hidden],
            layers: (0..dims.k_layers)
                .map(|_| LstmLayerParams::init(dims.hidden, rng))
                .collect(),
            w_p: RMat::init_uniform(dims.d_out, dims.hidden * dims.l_in, rng),
            b_p: vec![0.0; dims.d_out],
        }
    }

    pub fn dims(&self) -> NetDims {
        NetDims {
            d_in: self.w_e.cols,
            hidden: self.w_e.rows,
            k_layers: self.layers.len(),
            l_in: self.w_p.cols / self.w_e.rows.max(1),
            d_out: self.w_p.rows,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims())
    }

    /// All parameter tensors in a fixed order (for the optimizer and for
    /// gradient checking).
    pub fn tensors(&self) -> Vec<&Vec<f64>> {
        let mut out = vec![&self.w_e.data, &self.b_e];
        for layer in &self.layers {
            for gate in [&layer.forget, &layer.input, &layer.output, &layer.cand] {
                out.push(&gate.wx.data);
                out.push(&gate.wy.data);
                out.push(&gate.b);
            }
        }
        out.push(&self.w_p.data);
        out.push(&self.b_p);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = Vec::new();
        out.push(&mut self.w_e.data);
        out.push(&mut self.b_e);
        for layer in &mut self.layers {
            for gate in [
                &mut layer.forget,
                &mut layer.input,
                &mut layer.output,
                &mut layer.cand,
            ] {
                out.push(&mut gate.wx.data);
                out.push(&mut gate.wy.data);
                out.push(&mut gate.b);
            }
        }
        out.push(&mut self.w_p.data);
        out.push(&mut self.b_p);
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Everything the backward pass needs from a forward evaluation.
pub struct ForwardCache {
    /// Normalized inputs, one per step.
    pub x: Vec<Vec<f64>>,
    /// Input-FC pre-activations and ReLU outputs per step.
    pub xh_pre: Vec<Vec<f64>>,
    pub xh: Vec<Vec<f64>>,
    /// `cells[k][t]` activations.
    pub cells: Vec<Vec<CellOutput>>,
    /// Head input (concatenated last-layer outputs).
    pub concat: Vec<f64>,
    pub out: Vec<f64>,
}

/// Run the sub-network over an already-normalized input sequence.
pub fn forward(net: &SubNetwork, inputs: &[Vec<f64>]) -> Result<ForwardCache> {
    let dims = net.dims();
    if inputs.len() != dims.l_in {
        return Err(CtpError::InvalidArgument(format!(
            "expected {} input steps, got {}",
            dims.l_in,
            inputs.len()
        )));
    }
    if let Some(bad) = inputs.iter().find(|v| v.len() != dims.d_in) {
        return Err(CtpError::InvalidArgument(format!(
            "input step has {} features, expected {}",
            bad.len(),
            dims.d_in
        )));
    }

    let hidden = dims.hidden;
    let mut xh_pre = Vec::with_capacity(inputs.len());
    let mut xh = Vec::with_capacity(inputs.len());
    let mut cells: Vec<Vec<CellOutput>> = vec![Vec::with_capacity(inputs.len()); dims.k_layers];

    for (t, x) in inputs.iter().enumerate() {
        let mut pre = net.b_e.clone();
        net.w_e.matvec_acc(x, &mut pre);
        let act: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
        xh_pre.push(pre);
        xh.push(act);

        for k in 0..dims.k_layers {
            let zeros = vec![0.0; hidden];
            let (y_prev, c_prev) = if t == 0 {
                (zeros.clone(), zeros.clone())
            } else {
                (cells[k][t - 1].y.clone(), cells[k][t - 1].c.clone())
            };
            let x_in = if k == 0 {
                xh[t].clone()
            } else {
                cells[k - 1][t].y.clone()
            };
            let cell = lstm_cell_forward(&net.layers[k], &x_in, &y_prev, &c_prev);
            cells[k].push(cell);
        }
    }

    let top = dims.k_layers - 1;
    let mut concat = Vec::with_capacity(hidden * inputs.len());
    for t in 0..inputs.len() {
        concat.extend_from_slice(&cells[top][t].y);
    }
    let mut out = net.b_p.clone();
    net.w_p.matvec_acc(&concat, &mut out);

    Ok(ForwardCache {
        x: inputs.to_vec(),
        xh_pre,
        xh,
        cells,
        concat,
        out,
    })
}

/// Exact reverse-mode gradients of a scalar loss with `d_out` as its
/// gradient w.r.t. the network output.
pub fn backward(net: &SubNetwork, cache: &ForwardCache, d_out: &[f64]) -> SubNetwork {
    let dims = net.dims();
    let hidden = dims.hidden;
    let steps = cache.x.len();
    let mut grad = net.zeros_like();

    // head
    grad.w_p.add_outer(d_out, &cache.concat);
    for (g, d) in grad.b_p.iter_mut().zip(d_out) {
        *g += d;
    }
    let mut d_concat = vec![0.0; cache.concat.len()];
    net.w_p.matvec_t_acc(d_out, &mut d_concat);

    // carries from step t+1 into step t, per layer
    let mut dy_carry = vec![vec![0.0; hidden]; dims.k_layers];
    let mut dc_carry = vec![vec![0.0; hidden]; dims.k_layers];

    for t in (0..steps).rev() {
        // gradient flowing into the layer output at this step from the
        // layer above (or the head for the top layer)
        let mut dx_above = vec![0.0; hidden];
        for k in (0..dims.k_layers).rev() {
            let cell = &cache.cells[k][t];
            let mut dy = std::mem::replace(&mut dy_carry[k], vec![0.0; hidden]);
            if k == dims.k_layers - 1 {
                for n in 0..hidden {
                    dy[n] += d_concat[t * hidden + n];
                }
            } else {
                for n in 0..hidden {
                    dy[n] += dx_above[n];
                }
            }

            let zeros = vec![0.0; hidden];
            let (y_prev, c_prev) = if t == 0 {
                (&zeros, &zeros)
            } else {
                (&cache.cells[k][t - 1].y, &cache.cells[k][t - 1].c)
            };
            let x_in = if k == 0 {
                &cache.xh[t]
            } else {
                &cache.cells[k - 1][t].y
            };

            let mut dpre_f = vec![0.0; hidden];
            let mut dpre_i = vec![0.0; hidden];
            let mut dpre_o = vec![0.0; hidden];
            let mut dpre_z = vec![0.0; hidden];
            let dc_in = std::mem::replace(&mut dc_carry[k], vec![0.0; hidden]);
            let mut dc_prev = vec![0.0; hidden];
            for n in 0..hidden {
                let d_o = dy[n] * cell.tanh_c[n];
                let dc = dc_in[n] + dy[n] * cell.o[n] * (1.0 - cell.tanh_c[n].powi(2));
                let d_f = dc * c_prev[n];
                let d_i = dc * cell.z[n];
                let d_z = dc * cell.i[n];
                dc_prev[n] = dc * cell.f[n];
                dpre_f[n] = d_f * cell.f[n] * (1.0 - cell.f[n]);
                dpre_i[n] = d_i * cell.i[n] * (1.0 - cell.i[n]);
                dpre_o[n] = d_o * cell.o[n] * (1.0 - cell.o[n]);
                dpre_z[n] = d_z * (1.0 - cell.z[n].powi(2));
            }
            dc_carry[k] = dc_prev;

            let glayer = &mut grad.layers[k];
            let mut dx = vec![0.0; x_in.len()];
            let mut dy_prev = vec![0.0; hidden];
            for (gate, dpre) in [
                (&mut glayer.forget, &dpre_f),
                (&mut glayer.input, &dpre_i),
                (&mut glayer.output, &dpre_o),
                (&mut glayer.cand, &dpre_z),
            ] {
                gate.wx.add_outer(dpre, x_in);
                gate.wy.add_outer(dpre, y_prev);
                for (g, d) in gate.b.iter_mut().zip(dpre.iter()) {
                    *g += d;
                }
            }
            for (params, dpre) in [
                (&net.layers[k].forget, &dpre_f),
                (&net.layers[k].input, &dpre_i),
                (&net.layers[k].output, &dpre_o),
                (&net.layers[k].cand, &dpre_z),
            ] {
                params.wx.matvec_t_acc(dpre, &mut dx);
                params.wy.matvec_t_acc(dpre, &mut dy_prev);
            }
            dy_carry[k] = dy_prev;
            dx_above = dx;
        }

        // input FC: dx_above is now the gradient into xh[t]
        let dpre_e: Vec<f64> = dx_above
            .iter()
            .zip(&cache.xh_pre[t])
            .map(|(&d, &pre)| if pre > 0.0 { d } else { 0.0 })
            .collect();
        grad.w_e.add_outer(&dpre_e, &cache.x[t]);
        for (g, d) in grad.b_e.iter_mut().zip(&dpre_e) {
            *g += d;
        }
    }

    grad
}

/// `acc += other` over every tensor.
pub fn accumulate(acc: &mut SubNetwork, other: &SubNetwork) {
    for (a, o) in acc.tensors_mut().into_iter().zip(other.tensors()) {
        for (av, ov) in a.iter_mut().zip(o) {
            *av += ov;
        }
    }
}

/// `net *= s` over every tensor.
pub fn scale_in_place(net: &mut SubNetwork, s: f64) {
    for t in net.tensors_mut() {
        for v in t.iter_mut() {
            *v *= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dims() -> NetDims {
        NetDims {
            d_in: 3,
            hidden: 4,
            k_layers: 2,
            l_in: 3,
            d_out: 2,
        }
    }

    #[test]
    fn cell_zero_params_halves_everything() {
        let layer = LstmLayerParams::zeros(3);
        let out = lstm_cell_forward(&layer, &[1.0, -2.0, 0.5], &[0.0; 3], &[0.0; 3]);
        for n in 0..3 {
            assert_eq!(out.f[n], 0.5);
            assert_eq!(out.i[n], 0.5);
            assert_eq!(out.o[n], 0.5);
            assert_eq!(out.c[n], 0.0);
            assert_eq!(out.y[n], 0.0);
        }

        let c0 = [0.8, -0.4, 0.1];
        let out = lstm_cell_forward(&layer, &[0.0; 3], &[0.0; 3], &c0);
        for n in 0..3 {
            assert!((out.c[n] - 0.5 * c0[n]).abs() < 1e-15);
            assert!((out.y[n] - 0.5 * (0.5 * c0[n]).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn cell_saturated_forget_gate_preserves_state() {
        let mut layer = LstmLayerParams::zeros(2);
        for b in layer.forget.b.iter_mut() {
            *b = 50.0;
        }
        let c0 = [1.5, -2.0];
        let out = lstm_cell_forward(&layer, &[0.0; 2], &[0.0; 2], &c0);
        for n in 0..2 {
            assert!((out.c[n] - c0[n]).abs() < 1e-12, "cell state leaked");
        }
    }

    #[test]
    fn forward_zero_params_outputs_bias() {
        let net = SubNetwork::zeros(tiny_dims());
        let inputs = vec![vec![0.3, -0.1, 2.0]; 3];
        let cache = forward(&net, &inputs).unwrap();
        assert_eq!(cache.out, vec![0.0, 0.0]);

        let mut with_bias = net.clone();
        with_bias.b_p = vec![0.7, -0.2];
        let cache = forward(&with_bias, &inputs).unwrap();
        assert_eq!(cache.out, vec![0.7, -0.2]);
    }

    #[test]
    fn forward_rejects_bad_shapes() {
        let net = SubNetwork::zeros(tiny_dims());
        assert!(forward(&net, &vec![vec![0.0; 3]; 2]).is_err());
        assert!(forward(&net, &vec![vec![0.0; 4]; 3]).is_err());
    }

    #[test]
    fn forward_depends_on_every_input_coordinate() {
        let mut rng = SimRng::from_seed(42);
        let net = SubNetwork::init(tiny_dims(), &mut rng);
        let inputs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..3).map(|_| rng.standard_normal()).collect())
            .collect();
        let base: f64 = forward(&net, &inputs).unwrap().out.iter().sum();
        for t in 0..3 {
            for j in 0..3 {
                let mut bumped = inputs.clone();
                bumped[t][j] += 1e-3;
                let out: f64 = forward(&net, &bumped).unwrap().out.iter().sum();
                assert!(
                    (out - base).abs() > 1e-12,
                    "output insensitive to input ({t},{j})"
                );
            }
        }
    }

    #[test]
    fn head_bias_gradient_is_output_error() {
        let mut rng = SimRng::from_seed(9);
        let net = SubNetwork::init(tiny_dims(), &mut rng);
        let inputs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..3).map(|_| rng.standard_normal()).collect())
            .collect();
        let cache = forward(&net, &inputs).unwrap();
        let d_out = vec![0.25, -1.5];
        let grad = backward(&net, &cache, &d_out);
        assert_eq!(grad.b_p, d_out);
    }

    #[test]
    fn zero_output_error_gives_zero_gradients() {
        let mut rng = SimRng::from_seed(10);
        let net = SubNetwork::init(tiny_dims(), &mut rng);
        let inputs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..3).map(|_| rng.standard_normal()).collect())
            .collect();
        let cache = forward(&net, &inputs).unwrap();
        let grad = backward(&net, &cache, &[0.0, 0.0]);
        for t in grad.tensors() {
            assert!(t.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        // per-coordinate central differences on a random tiny network
        let mut rng = SimRng::from_seed(77);
        let dims = NetDims {
            d_in: 2,
            hidden: 3,
            k_layers: 2,
            l_in: 2,
            d_out: 2,
        };
        let mut net = SubNetwork::init(dims, &mut rng);
        let inputs: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..2).map(|_| rng.standard_normal()).collect())
            .collect();
        let target: Vec<f64> = (0..2).map(|_| rng.standard_normal()).collect();

        let loss_of = |net: &SubNetwork| -> f64 {
            let out = forward(net, &inputs).unwrap().out;
            out.iter().zip(&target).map(|(o, t)| (o - t).powi(2)).sum()
        };

        let cache = forward(&net, &inputs).unwrap();
        let d_out: Vec<f64> = cache
            .out
            .iter()
            .zip(&target)
            .map(|(o, t)| 2.0 * (o - t))
            .collect();
        let grad = backward(&net, &cache, &d_out);
        let analytic: Vec<f64> = grad.tensors().iter().flat_map(|t| t.iter().copied()).collect();

        let eps = 1e-5;
        let mut idx = 0;
        let n_tensors = net.tensors().len();
        for ti in 0..n_tensors {
            let len = net.tensors()[ti].len();
            for j in 0..len {
                let orig = net.tensors()[ti][j];
                net.tensors_mut()[ti][j] = orig + eps;
                let up = loss_of(&net);
                net.tensors_mut()[ti][j] = orig - eps;
                let down = loss_of(&net);
                net.tensors_mut()[ti][j] = orig;
                let numeric = (up - down) / (2.0 * eps);
                let a = analytic[idx];
                let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-5);
                assert!(
                    rel <= 1e-4,
                    "tensor {ti} coord {j}: analytic {a}, numeric {numeric}, rel {rel}"
                );
                idx += 1;
            }
        }
    }
}

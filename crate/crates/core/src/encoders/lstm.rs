use rand::Rng;

use super::init_uniform;
use crate::error::{Error, Result};
use crate::numcore::{sigmoid, sigmoid_backward, tanh_backward, Mat};

/// Gate order used for the `w`, `u` and `b` arrays of [`LstmDirection`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    /// Candidate memory `C~`.
    Cell = 3,
}

pub const GATES: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Cell];

impl Gate {
    pub fn suffix(self) -> &'static str {
        match self {
            Gate::Input => "i",
            Gate::Forget => "f",
            Gate::Output => "o",
            Gate::Cell => "m",
        }
    }
}

/// Parameters of one LSTM direction: per gate `W` (`H x d`), `U` (`H x H`)
/// and `b` (`H x 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirection {
    pub w: [Mat; 4],
    pub u: [Mat; 4],
    pub b: [Mat; 4],
}

impl LstmDirection {
    pub fn new(w: [Mat; 4], u: [Mat; 4], b: [Mat; 4]) -> Result<Self> {
        let (h, d) = w[0].shape();
        for g in 0..4 {
            if w[g].shape() != (h, d) || u[g].shape() != (h, h) || b[g].shape() != (h, 1) {
                return Err(Error::Contract(format!(
                    "inconsistent LSTM gate shapes for hidden size {h}, input {d}"
                )));
            }
        }
        Ok(LstmDirection { w, u, b })
    }

    /// Glorot-uniform weights, zero biases except a forget-gate bias of 1.
    pub fn init(d: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let w = std::array::from_fn(|_| init_uniform(hidden, d, rng));
        let u = std::array::from_fn(|_| init_uniform(hidden, hidden, rng));
        let mut b: [Mat; 4] = std::array::from_fn(|_| Mat::zeros(hidden, 1));
        b[Gate::Forget as usize] = Mat::filled(hidden, 1, 1.0);
        LstmDirection { w, u, b }
    }

    pub fn hidden(&self) -> usize {
        self.w[0].rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w[0].cols()
    }

    pub fn zeros_like(&self) -> Self {
        let (h, d) = (self.hidden(), self.input_dim());
        LstmDirection {
            w: std::array::from_fn(|_| Mat::zeros(h, d)),
            u: std::array::from_fn(|_| Mat::zeros(h, h)),
            b: std::array::from_fn(|_| Mat::zeros(h, 1)),
        }
    }

    fn pre_activation(&self, gate: Gate, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
        let g = gate as usize;
        let wx = self.w[g].matvec(x)?;
        let uh = self.u[g].matvec(h_prev)?;
        Ok(wx
            .iter()
            .zip(&uh)
            .zip(self.b[g].data())
            .map(|((a, b), c)| a + b + c)
            .collect())
    }
}

/// Everything one time step produced, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub input: Vec<f64>,
    pub forget: Vec<f64>,
    pub output: Vec<f64>,
    pub candidate: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// One LSTM update:
///
/// ```text
/// i = sigmoid(W_i x + U_i h + b_i)     f = sigmoid(W_f x + U_f h + b_f)
/// o = sigmoid(W_o x + U_o h + b_o)     C~ = tanh(W_m x + U_m h + b_m)
/// C = i * C~ + f * C_prev              h = o * tanh(C)
/// ```
pub fn lstm_step(x: &[f64], h_prev: &[f64], c_prev: &[f64], p: &LstmDirection) -> Result<LstmStep> {
    let hidden = p.hidden();
    if h_prev.len() != hidden || c_prev.len() != hidden {
        return Err(Error::Contract(format!(
            "LSTM state has length {}/{}, hidden size is {hidden}",
            h_prev.len(),
            c_prev.len()
        )));
    }
    let input: Vec<f64> = p.pre_activation(Gate::Input, x, h_prev)?.into_iter().map(sigmoid).collect();
    let forget: Vec<f64> = p.pre_activation(Gate::Forget, x, h_prev)?.into_iter().map(sigmoid).collect();
    let output: Vec<f64> = p.pre_activation(Gate::Output, x, h_prev)?.into_iter().map(sigmoid).collect();
    let candidate: Vec<f64> = p.pre_activation(Gate::Cell, x, h_prev)?.into_iter().map(f64::tanh).collect();
    let c: Vec<f64> = (0..hidden)
        .map(|j| input[j] * candidate[j] + forget[j] * c_prev[j])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h = (0..hidden).map(|j| output[j] * tanh_c[j]).collect();
    Ok(LstmStep {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        input,
        forget,
        output,
        candidate,
        c,
        tanh_c,
        h,
    })
}

/// Runs one direction over `columns` in the given order from a zero state.
pub fn run_direction(columns: &[Vec<f64>], p: &LstmDirection) -> Result<Vec<LstmStep>> {
    let hidden = p.hidden();
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut steps = Vec::with_capacity(columns.len());
    for x in columns {
        let step = lstm_step(x, &h, &c, p)?;
        h.clone_from(&step.h);
        c.clone_from(&step.c);
        steps.push(step);
    }
    Ok(steps)
}

/// Backpropagation through time for one direction. `dh[t]` is the output
/// cotangent for step `t` (in processing order). Returns the input
/// cotangents in processing order.
pub fn direction_backward(
    steps: &[LstmStep],
    dh: &[Vec<f64>],
    p: &LstmDirection,
    grads: &mut LstmDirection,
) -> Result<Vec<Vec<f64>>> {
    let hidden = p.hidden();
    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];
    let mut dx = vec![Vec::new(); steps.len()];
    for t in (0..steps.len()).rev() {
        let s = &steps[t];
        let dh_t: Vec<f64> = dh[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
        let mut d_pre: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hidden]);
        let mut dc_prev = vec![0.0; hidden];
        for j in 0..hidden {
            let d_out = dh_t[j] * s.tanh_c[j];
            let dc = tanh_backward(s.tanh_c[j], dh_t[j] * s.output[j]) + dc_next[j];
            let d_in = dc * s.candidate[j];
            let d_cand = dc * s.input[j];
            let d_forget = dc * s.c_prev[j];
            dc_prev[j] = dc * s.forget[j];
            d_pre[Gate::Input as usize][j] = sigmoid_backward(s.input[j], d_in);
            d_pre[Gate::Forget as usize][j] = sigmoid_backward(s.forget[j], d_forget);
            d_pre[Gate::Output as usize][j] = sigmoid_backward(s.output[j], d_out);
            d_pre[Gate::Cell as usize][j] = tanh_backward(s.candidate[j], d_cand);
        }
        let mut dx_t = vec![0.0; p.input_dim()];
        let mut dh_prev = vec![0.0; hidden];
        for g in 0..4 {
            grads.w[g].add_assign(&Mat::outer(&d_pre[g], &s.x))?;
            grads.u[g].add_assign(&Mat::outer(&d_pre[g], &s.h_prev))?;
            for (b, d) in grads.b[g].data_mut().iter_mut().zip(&d_pre[g]) {
                *b += d;
            }
            for (acc, v) in dx_t.iter_mut().zip(p.w[g].tr_matvec(&d_pre[g])?) {
                *acc += v;
            }
            for (acc, v) in dh_prev.iter_mut().zip(p.u[g].tr_matvec(&d_pre[g])?) {
                *acc += v;
            }
        }
        dx[t] = dx_t;
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    Ok(dx)
}

/// Forward and backward LSTM directions. Output channels `c = 2H`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmParams {
    pub forward: LstmDirection,
    pub backward: LstmDirection,
}

impl BiLstmParams {
    pub fn new(forward: LstmDirection, backward: LstmDirection) -> Result<Self> {
        if forward.hidden() != backward.hidden() || forward.input_dim() != backward.input_dim() {
            return Err(Error::Contract("biLSTM directions disagree on shapes".into()));
        }
        Ok(BiLstmParams { forward, backward })
    }

    pub fn init(d: usize, hidden: usize, rng: &mut impl Rng) -> Result<Self> {
        if d == 0 || hidden == 0 {
            return Err(Error::Config("biLSTM dims must be >= 1".into()));
        }
        let forward = LstmDirection::init(d, hidden, rng);
        let backward = LstmDirection::init(d, hidden, rng);
        Ok(BiLstmParams { forward, backward })
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }

    pub fn channels(&self) -> usize {
        2 * self.hidden()
    }

    pub fn zeros_like(&self) -> Self {
        BiLstmParams {
            forward: self.forward.zeros_like(),
            backward: self.backward.zeros_like(),
        }
    }

    /// The same parameters with the two directions exchanged.
    pub fn swapped(&self) -> Self {
        BiLstmParams {
            forward: self.backward.clone(),
            backward: self.forward.clone(),
        }
    }
}

/// Per-direction step caches from [`bilstm_encode`]. `backward` is stored in
/// processing order, i.e. `backward[0]` read the last input column.
#[derive(Debug, Clone)]
pub struct BiLstmCache {
    pub forward: Vec<LstmStep>,
    pub backward: Vec<LstmStep>,
}

pub fn bilstm_encode(emb: &Mat, p: &BiLstmParams) -> Result<(Mat, BiLstmCache)> {
    if emb.rows() != p.forward.input_dim() {
        return Err(Error::shape("bilstm input", emb.shape(), (p.forward.input_dim(), emb.cols())));
    }
    let t_len = emb.cols();
    let hidden = p.hidden();
    let columns: Vec<Vec<f64>> = (0..t_len).map(|t| emb.col(t)).collect();
    let reversed: Vec<Vec<f64>> = columns.iter().rev().cloned().collect();
    let fwd = run_direction(&columns, &p.forward)?;
    let bwd = run_direction(&reversed, &p.backward)?;
    let mut out = Mat::zeros(2 * hidden, t_len);
    for t in 0..t_len {
        for j in 0..hidden {
            out[(j, t)] = fwd[t].h[j];
            out[(hidden + j, t)] = bwd[t_len - 1 - t].h[j];
        }
    }
    Ok((out, BiLstmCache { forward: fwd, backward: bwd }))
}

/// Column `t` stacks the forward state after reading positions `0..=t` over
/// the backward state after reading positions `t..T` right to left.
pub fn bilstm_forward(emb: &Mat, p: &BiLstmParams) -> Result<Mat> {
    bilstm_encode(emb, p).map(|(out, _)| out)
}

/// Accumulates parameter cotangents into `grads` and returns `d emb`.
pub fn bilstm_backward(
    cache: &BiLstmCache,
    dout: &Mat,
    p: &BiLstmParams,
    grads: &mut BiLstmParams,
) -> Result<Mat> {
    let hidden = p.hidden();
    let t_len = cache.forward.len();
    if dout.shape() != (2 * hidden, t_len) {
        return Err(Error::shape("bilstm_backward", dout.shape(), (2 * hidden, t_len)));
    }
    let dh_fwd: Vec<Vec<f64>> = (0..t_len)
        .map(|t| (0..hidden).map(|j| dout[(j, t)]).collect())
        .collect();
    let dh_bwd: Vec<Vec<f64>> = (0..t_len)
        .map(|s| (0..hidden).map(|j| dout[(hidden + j, t_len - 1 - s)]).collect())
        .collect();
    let dx_fwd = direction_backward(&cache.forward, &dh_fwd, &p.forward, &mut grads.forward)?;
    let dx_bwd = direction_backward(&cache.backward, &dh_bwd, &p.backward, &mut grads.backward)?;
    let d = p.forward.input_dim();
    let mut demb = Mat::zeros(d, t_len);
    for t in 0..t_len {
        demb.add_to_col(t, &dx_fwd[t]);
        demb.add_to_col(t, &dx_bwd[t_len - 1 - t]);
    }
    Ok(demb)
}

//! A deterministic few-thousand-parameter encoder-decoder over a character
//! vocabulary, with hand-written backpropagation and Adam.

// indexed loops mirror the gradient equations; iterator rewrites obscure them
#![allow(clippy::needless_range_loop)]
//!
//! Architecture: input characters are embedded, modulated by fixed
//! positional factors, and mean-pooled into a context vector that is passed
//! through a learned tanh layer. A single-layer tanh RNN decoder receives
//! the previous output embedding, its own state, and the context at every
//! step, and projects to character logits. Everything is f64 and free of
//! hidden global state, so losses, gradients, and greedy generations are
//! bit-reproducible for a fixed seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BackendError, ModelBackend, SeqPair};

const BOS: usize = 0;
const EOS: usize = 1;
const UNK: usize = 2;
const FIRST_CHAR: u8 = 0x20;
const LAST_CHAR: u8 = 0x7e;
/// BOS + EOS + UNK + printable ASCII.
const VOCAB: usize = 3 + (LAST_CHAR - FIRST_CHAR + 1) as usize;
const MAX_POS: usize = 512;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TinyConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub seed: u64,
}

impl Default for TinyConfig {
    fn default() -> Self {
        TinyConfig {
            embed_dim: 16,
            hidden_dim: 32,
            seed: 0,
        }
    }
}

impl TinyConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Offsets of each parameter block inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    d: usize,
    h: usize,
    e_enc: usize, // VOCAB x d
    w_enc: usize, // h x d
    b_enc: usize, // h
    e_dec: usize, // VOCAB x d
    w_e: usize,   // h x d
    w_s: usize,   // h x h
    w_c: usize,   // h x h
    b_s: usize,   // h
    w_o: usize,   // VOCAB x h
    b_o: usize,   // VOCAB
    total: usize,
}

impl Layout {
    fn new(d: usize, h: usize) -> Self {
        let e_enc = 0;
        let w_enc = e_enc + VOCAB * d;
        let b_enc = w_enc + h * d;
        let e_dec = b_enc + h;
        let w_e = e_dec + VOCAB * d;
        let w_s = w_e + h * d;
        let w_c = w_s + h * h;
        let b_s = w_c + h * h;
        let w_o = b_s + h;
        let b_o = w_o + VOCAB * h;
        let total = b_o + VOCAB;
        Layout {
            d,
            h,
            e_enc,
            w_enc,
            b_enc,
            e_dec,
            w_e,
            w_s,
            w_c,
            b_s,
            w_o,
            b_o,
            total,
        }
    }
}

pub struct TinyBackend {
    config: TinyConfig,
    layout: Layout,
    params: Vec<f64>,
    grad: Vec<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    adam_t: u64,
    /// Fixed positional modulation factors, MAX_POS x d, in (0.5, 1.5).
    pos: Vec<f64>,
}

fn token_to_index(token: u32) -> usize {
    let t = token as usize;
    if t < VOCAB {
        t
    } else {
        UNK
    }
}

fn index_to_char(index: usize) -> Option<char> {
    if index < 3 {
        None
    } else {
        Some((FIRST_CHAR + (index - 3) as u8) as char)
    }
}

impl TinyBackend {
    pub fn new(config: TinyConfig) -> Self {
        let layout = Layout::new(config.embed_dim, config.hidden_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = vec![0.0; layout.total];

        let uniform = |rng: &mut ChaCha8Rng, scale: f64| (rng.gen::<f64>() * 2.0 - 1.0) * scale;
        let emb_scale = 0.1;
        let d_scale = 1.0 / (layout.d as f64).sqrt();
        let h_scale = 1.0 / (layout.h as f64).sqrt();
        let blocks: [(usize, usize, f64); 6] = [
            (layout.e_enc, VOCAB * layout.d, emb_scale),
            (layout.w_enc, layout.h * layout.d, d_scale),
            (layout.e_dec, VOCAB * layout.d, emb_scale),
            (layout.w_e, layout.h * layout.d, d_scale),
            (layout.w_s, layout.h * layout.h, h_scale),
            (layout.w_c, layout.h * layout.h, h_scale),
        ];
        for (off, len, scale) in blocks {
            for value in &mut params[off..off + len] {
                *value = uniform(&mut rng, scale);
            }
        }
        for value in &mut params[layout.w_o..layout.w_o + VOCAB * layout.h] {
            *value = uniform(&mut rng, h_scale);
        }
        // biases stay zero

        let mut pos = vec![0.0; MAX_POS * layout.d];
        for t in 0..MAX_POS {
            for j in 0..layout.d {
                let wavelength = 10f64.powf(1.0 + 3.0 * j as f64 / layout.d as f64);
                pos[t * layout.d + j] = 1.0 + 0.5 * ((t + 1) as f64 / wavelength).sin();
            }
        }

        TinyBackend {
            config,
            grad: vec![0.0; layout.total],
            adam_m: vec![0.0; layout.total],
            adam_v: vec![0.0; layout.total],
            adam_t: 0,
            layout,
            params,
            pos,
        }
    }

    pub fn config(&self) -> &TinyConfig {
        &self.config
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    fn pos_row(&self, t: usize) -> &[f64] {
        let t = t.min(MAX_POS - 1);
        &self.pos[t * self.layout.d..(t + 1) * self.layout.d]
    }

    /// Mean of position-modulated input embeddings, then a learned tanh
    /// layer. Returns (h_enc, c).
    fn encode(&self, input: &[u32]) -> (Vec<f64>, Vec<f64>) {
        let Layout { d, h, .. } = self.layout;
        let mut h_enc = vec![0.0; d];
        if !input.is_empty() {
            for (t, &token) in input.iter().enumerate() {
                let row = self.layout.e_enc + token_to_index(token) * d;
                let pos = self.pos_row(t);
                for k in 0..d {
                    h_enc[k] += self.params[row + k] * pos[k];
                }
            }
            let inv = 1.0 / input.len() as f64;
            for value in &mut h_enc {
                *value *= inv;
            }
        }
        let mut c = vec![0.0; h];
        for j in 0..h {
            let row = self.layout.w_enc + j * d;
            let mut acc = self.params[self.layout.b_enc + j];
            for k in 0..d {
                acc += self.params[row + k] * h_enc[k];
            }
            c[j] = acc.tanh();
        }
        (h_enc, c)
    }

    /// One decoder step: state[t-1], previous token, context -> (state[t], logits).
    fn decode_step(&self, prev_state: &[f64], prev_token: usize, c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let Layout { d, h, .. } = self.layout;
        let emb = self.layout.e_dec + prev_token * d;
        let mut state = vec![0.0; h];
        for j in 0..h {
            let mut acc = self.params[self.layout.b_s + j];
            let w_e_row = self.layout.w_e + j * d;
            for k in 0..d {
                acc += self.params[w_e_row + k] * self.params[emb + k];
            }
            let w_s_row = self.layout.w_s + j * h;
            let w_c_row = self.layout.w_c + j * h;
            for k in 0..h {
                acc += self.params[w_s_row + k] * prev_state[k];
                acc += self.params[w_c_row + k] * c[k];
            }
            state[j] = acc.tanh();
        }
        let mut logits = vec![0.0; VOCAB];
        for (i, logit) in logits.iter_mut().enumerate() {
            let row = self.layout.w_o + i * h;
            let mut acc = self.params[self.layout.b_o + i];
            for j in 0..h {
                acc += self.params[row + j] * state[j];
            }
            *logit = acc;
        }
        (state, logits)
    }

    /// Forward pass with teacher forcing. Returns the per-sequence mean
    /// token cross-entropy and, when `trace` is set, everything the backward
    /// pass needs.
    fn forward(&self, pair: &SeqPair, trace: bool) -> (f64, Option<Trace>) {
        let (h_enc, c) = self.encode(&pair.input);

        // decoder inputs: BOS then target tokens; outputs: target tokens then EOS
        let steps = pair.target.len() + 1;
        let mut states: Vec<Vec<f64>> = Vec::with_capacity(if trace { steps + 1 } else { 2 });
        let mut probs: Vec<Vec<f64>> = Vec::with_capacity(if trace { steps } else { 0 });
        let mut loss = 0.0;

        let mut prev_state = c.clone();
        if trace {
            states.push(prev_state.clone());
        }
        for t in 0..steps {
            let prev_token = if t == 0 {
                BOS
            } else {
                token_to_index(pair.target[t - 1])
            };
            let expected = if t < pair.target.len() {
                token_to_index(pair.target[t])
            } else {
                EOS
            };
            let (state, logits) = self.decode_step(&prev_state, prev_token, &c);

            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = logits.iter().map(|z| (z - max).exp()).sum();
            loss += max + sum_exp.ln() - logits[expected];

            if trace {
                let p: Vec<f64> = logits.iter().map(|z| (z - max).exp() / sum_exp).collect();
                probs.push(p);
                states.push(state.clone());
            }
            prev_state = state;
        }
        loss /= steps as f64;

        let trace = trace.then_some(Trace {
            h_enc,
            c,
            states,
            probs,
        });
        (loss, trace)
    }

    /// Accumulate `scale x d(seq_loss)/d(params)` for one sequence.
    fn backward(&mut self, pair: &SeqPair, trace: &Trace, scale: f64) {
        let Layout { d, h, .. } = self.layout;
        let steps = pair.target.len() + 1;
        let inv_len = 1.0 / steps as f64;

        let mut dc = vec![0.0; h];
        let mut ds = vec![0.0; h];

        for t in (0..steps).rev() {
            let prev_token = if t == 0 {
                BOS
            } else {
                token_to_index(pair.target[t - 1])
            };
            let expected = if t < pair.target.len() {
                token_to_index(pair.target[t])
            } else {
                EOS
            };
            let state = &trace.states[t + 1];
            let prev_state = &trace.states[t];

            // softmax cross-entropy: dz = (p - onehot) / steps
            let mut dz = trace.probs[t].clone();
            dz[expected] -= 1.0;
            for value in &mut dz {
                *value *= inv_len;
            }

            for i in 0..VOCAB {
                if dz[i] == 0.0 {
                    continue;
                }
                self.grad[self.layout.b_o + i] += scale * dz[i];
                let row = self.layout.w_o + i * h;
                for j in 0..h {
                    self.grad[row + j] += scale * dz[i] * state[j];
                    ds[j] += self.params[row + j] * dz[i];
                }
            }

            // through tanh
            let mut da = vec![0.0; h];
            for j in 0..h {
                da[j] = ds[j] * (1.0 - state[j] * state[j]);
            }

            let emb = self.layout.e_dec + prev_token * d;
            let mut ds_prev = vec![0.0; h];
            for j in 0..h {
                let daj = da[j];
                if daj == 0.0 {
                    continue;
                }
                self.grad[self.layout.b_s + j] += scale * daj;
                let w_e_row = self.layout.w_e + j * d;
                for k in 0..d {
                    self.grad[w_e_row + k] += scale * daj * self.params[emb + k];
                    self.grad[emb + k] += scale * daj * self.params[w_e_row + k];
                }
                let w_s_row = self.layout.w_s + j * h;
                let w_c_row = self.layout.w_c + j * h;
                for k in 0..h {
                    self.grad[w_s_row + k] += scale * daj * prev_state[k];
                    ds_prev[k] += self.params[w_s_row + k] * daj;
                    self.grad[w_c_row + k] += scale * daj * trace.c[k];
                    dc[k] += self.params[w_c_row + k] * daj;
                }
            }
            ds = ds_prev;
        }

        // initial decoder state is the context vector
        for k in 0..h {
            dc[k] += ds[k];
        }

        // c = tanh(w_enc h_enc + b_enc)
        let mut dh_enc = vec![0.0; d];
        for j in 0..h {
            let dpre = dc[j] * (1.0 - trace.c[j] * trace.c[j]);
            if dpre == 0.0 {
                continue;
            }
            self.grad[self.layout.b_enc + j] += scale * dpre;
            let row = self.layout.w_enc + j * d;
            for k in 0..d {
                self.grad[row + k] += scale * dpre * trace.h_enc[k];
                dh_enc[k] += self.params[row + k] * dpre;
            }
        }

        // h_enc = mean of position-modulated input embeddings
        if !pair.input.is_empty() {
            let inv = 1.0 / pair.input.len() as f64;
            for (t, &token) in pair.input.iter().enumerate() {
                let row = self.layout.e_enc + token_to_index(token) * d;
                let pos_off = t.min(MAX_POS - 1) * d;
                for k in 0..d {
                    self.grad[row + k] += scale * dh_enc[k] * self.pos[pos_off + k] * inv;
                }
            }
        }
    }
}

struct Trace {
    h_enc: Vec<f64>,
    c: Vec<f64>,
    /// states[0] is the initial state (the context); states[t+1] follows step t.
    states: Vec<Vec<f64>>,
    probs: Vec<Vec<f64>>,
}

impl ModelBackend for TinyBackend {
    fn id(&self) -> String {
        format!("tiny-d{}-h{}", self.config.embed_dim, self.config.hidden_dim)
    }

    fn tokenize(&self, text: &str) -> Vec<u32> {
        text.chars()
            .map(|ch| {
                let b = ch as u32;
                if (FIRST_CHAR as u32..=LAST_CHAR as u32).contains(&b) {
                    3 + (b - FIRST_CHAR as u32)
                } else {
                    UNK as u32
                }
            })
            .collect()
    }

    fn accumulate_loss(&mut self, batch: &[SeqPair], weight: f64) -> Result<Vec<f64>, BackendError> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let scale = weight / batch.len() as f64;
        let mut losses = Vec::with_capacity(batch.len());
        for pair in batch {
            let (loss, trace) = self.forward(pair, true);
            if !loss.is_finite() {
                return Err(BackendError::NonFiniteLoss(loss));
            }
            if scale != 0.0 {
                self.backward(pair, &trace.expect("trace requested"), scale);
            } else {
                // weight 0: the term must not influence the update at all
                let _ = trace;
            }
            losses.push(loss);
        }
        Ok(losses)
    }

    fn eval_loss(&self, batch: &[SeqPair]) -> Result<Vec<f64>, BackendError> {
        batch
            .iter()
            .map(|pair| {
                let (loss, _) = self.forward(pair, false);
                if loss.is_finite() {
                    Ok(loss)
                } else {
                    Err(BackendError::NonFiniteLoss(loss))
                }
            })
            .collect()
    }

    fn apply_step(&mut self, learning_rate: f64) -> Result<(), BackendError> {
        self.adam_t += 1;
        let bias1 = 1.0 - ADAM_BETA1.powi(self.adam_t as i32);
        let bias2 = 1.0 - ADAM_BETA2.powi(self.adam_t as i32);
        for i in 0..self.params.len() {
            let g = self.grad[i];
            self.adam_m[i] = ADAM_BETA1 * self.adam_m[i] + (1.0 - ADAM_BETA1) * g;
            self.adam_v[i] = ADAM_BETA2 * self.adam_v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = self.adam_m[i] / bias1;
            let v_hat = self.adam_v[i] / bias2;
            self.params[i] -= learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
        self.grad.fill(0.0);
        Ok(())
    }

    fn generate(&self, input: &[u32], max_new_tokens: usize) -> Result<String, BackendError> {
        let (_, c) = self.encode(input);
        let mut state = c.clone();
        let mut prev_token = BOS;
        let mut out = String::new();
        for _ in 0..max_new_tokens {
            let (next_state, logits) = self.decode_step(&state, prev_token, &c);
            let mut best = 0;
            for (i, &z) in logits.iter().enumerate() {
                if z > logits[best] {
                    best = i;
                }
            }
            if best == EOS {
                break;
            }
            if let Some(ch) = index_to_char(best) {
                out.push(ch);
            } else {
                out.push('\u{fffd}');
            }
            state = next_state;
            prev_token = best;
        }
        Ok(out)
    }

    fn params(&self) -> Vec<f64> {
        self.params.clone()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<(), BackendError> {
        if params.len() != self.params.len() {
            return Err(BackendError::SnapshotShape {
                got: params.len(),
                expected: self.params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    fn gradient(&self) -> Vec<f64> {
        self.grad.clone()
    }

    fn supports_parallel_inference(&self) -> bool {
        true
    }
}

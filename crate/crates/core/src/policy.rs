//! Minimal autoregressive policy with one genuine top-k MoE block.
//!
//! Architecture: mean-pooled token embeddings feed a single mixture-of-experts
//! feed-forward block (softmax gate, top-k selection, weights renormalized
//! over the selected set, residual connection), followed by an output
//! projection to vocabulary logits. The smallest model with a real router.
//!
//! Gradients of token log-probabilities with respect to the flat parameter
//! vector are hand-derived backward passes; `gradcheck` and the test suite
//! verify them against central finite differences.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded_rng;

/// Dimensions and seed of the toy policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub context_window: usize,
    pub embed_dim: usize,
    pub num_experts: usize,
    pub top_k: usize,
    /// Parameter initialization seed.
    pub seed: i64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::InvalidConfig("vocab_size must be >= 2".into()));
        }
        if self.context_window == 0 || self.embed_dim == 0 || self.num_experts == 0 {
            return Err(Error::InvalidConfig("all dimensions must be >= 1".into()));
        }
        if self.top_k == 0 || self.top_k > self.num_experts {
            return Err(Error::InvalidConfig(format!(
                "top_k must be in 1..={}, got {}",
                self.num_experts, self.top_k
            )));
        }
        Ok(())
    }

    /// Natural log of the vocabulary size; the entropy upper bound in nats.
    pub fn log_vocab(&self) -> f64 {
        (self.vocab_size as f64).ln()
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self)
    }

    pub fn param_len(&self) -> usize {
        self.layout().total
    }
}

/// Offsets into the flat parameter vector.
///
/// Layout, in order: embedding table (`vocab_size x embed_dim`, row-major),
/// router gate (`num_experts x embed_dim`), per-expert blocks
/// (`w1[d x d], b1[d], w2[d x d], b2[d]` with hidden width = `embed_dim`),
/// output projection (`vocab_size x embed_dim`).
#[derive(Debug, Clone, Copy)]
pub struct ParamLayout {
    vocab: usize,
    dim: usize,
    gate_off: usize,
    experts_off: usize,
    expert_stride: usize,
    out_off: usize,
    pub total: usize,
}

impl ParamLayout {
    fn new(cfg: &ModelConfig) -> Self {
        let (v, d, e) = (cfg.vocab_size, cfg.embed_dim, cfg.num_experts);
        let gate_off = v * d;
        let experts_off = gate_off + e * d;
        let expert_stride = 2 * d * d + 2 * d;
        let out_off = experts_off + e * expert_stride;
        ParamLayout {
            vocab: v,
            dim: d,
            gate_off,
            experts_off,
            expert_stride,
            out_off,
            total: out_off + v * d,
        }
    }

    pub fn embed_row(&self, token: usize) -> std::ops::Range<usize> {
        debug_assert!(token < self.vocab);
        token * self.dim..(token + 1) * self.dim
    }

    pub fn gate_row(&self, expert: usize) -> std::ops::Range<usize> {
        let s = self.gate_off + expert * self.dim;
        s..s + self.dim
    }

    pub fn expert_w1(&self, expert: usize) -> std::ops::Range<usize> {
        let s = self.experts_off + expert * self.expert_stride;
        s..s + self.dim * self.dim
    }

    pub fn expert_b1(&self, expert: usize) -> std::ops::Range<usize> {
        let s = self.experts_off + expert * self.expert_stride + self.dim * self.dim;
        s..s + self.dim
    }

    pub fn expert_w2(&self, expert: usize) -> std::ops::Range<usize> {
        let s = self.experts_off + expert * self.expert_stride + self.dim * self.dim + self.dim;
        s..s + self.dim * self.dim
    }

    pub fn expert_b2(&self, expert: usize) -> std::ops::Range<usize> {
        let s = self.experts_off + expert * self.expert_stride + 2 * self.dim * self.dim + self.dim;
        s..s + self.dim
    }

    pub fn out_row(&self, token: usize) -> std::ops::Range<usize> {
        let s = self.out_off + token * self.dim;
        s..s + self.dim
    }
}

/// Flat parameter vector with the layout above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub data: Vec<f64>,
}

impl PolicyParams {
    /// Uniform init in [-0.1, 0.1] from the config seed.
    pub fn init(cfg: &ModelConfig) -> Self {
        let mut rng = seeded_rng(cfg.seed as u64);
        let data = (0..cfg.param_len())
            .map(|_| rng.random_range(-0.1..0.1))
            .collect();
        PolicyParams { data }
    }

    pub fn zeros_like(cfg: &ModelConfig) -> Self {
        PolicyParams {
            data: vec![0.0; cfg.param_len()],
        }
    }

    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        if self.data.len() != cfg.param_len() {
            return Err(Error::ParamLengthMismatch {
                got: self.data.len(),
                expected: cfg.param_len(),
            });
        }
        if !self.data.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteParams);
        }
        Ok(())
    }
}

/// One router choice: which experts handled a token and with what weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterDecision {
    pub token_position: usize,
    /// Selected experts, ordered by gate logit (descending, ties to lower index).
    pub expert_indices: Vec<usize>,
    /// Nonnegative, sums to 1 over the selected experts.
    pub gate_weights: Vec<f64>,
}

/// Per-token record: sampled token, its log-probability, and the entropy of
/// the distribution it was drawn from (both in nats).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenStep {
    pub token: usize,
    pub logprob: f64,
    pub entropy: f64,
}

/// Config plus parameters; the unit everything else operates on.
#[derive(Debug, Clone)]
pub struct Policy {
    pub config: ModelConfig,
    pub params: PolicyParams,
}

/// Everything one forward pass produced, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Mean-pooled context embedding.
    pub pooled: Vec<f64>,
    /// Clean gate logits (before any injected noise).
    pub gate_logits: Vec<f64>,
    /// Gate logits actually used for selection/weighting.
    pub effective_gate: Vec<f64>,
    pub selected: Vec<usize>,
    pub weights: Vec<f64>,
    /// Per selected expert: pre-activation, hidden, output.
    pub pre_act: Vec<Vec<f64>>,
    pub hidden: Vec<Vec<f64>>,
    pub expert_out: Vec<Vec<f64>>,
    pub moe_out: Vec<f64>,
    pub logits: Vec<f64>,
}

/// How the forward pass picks its expert set.
#[derive(Debug, Clone, Copy)]
pub enum Selection<'a> {
    /// Top-k by (possibly noise-shifted) gate logit.
    TopK,
    /// Replay a recorded expert set; weights still come from current gates.
    Replay(&'a [usize]),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Softmax of `values` restricted to `subset`, in subset order.
fn softmax_over(values: &[f64], subset: &[usize]) -> Vec<f64> {
    let m = subset
        .iter()
        .map(|&i| values[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = subset.iter().map(|&i| (values[i] - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Indices of the k largest entries, ties broken toward the lower index.
pub fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

impl Policy {
    /// Build a policy with seeded uniform initialization.
    pub fn init(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Policy {
            params: PolicyParams::init(&config),
            config,
        })
    }

    pub fn with_params(config: ModelConfig, params: PolicyParams) -> Result<Self> {
        config.validate()?;
        params.validate(&config)?;
        Ok(Policy { config, params })
    }

    fn check_context(&self, context: &[usize]) -> Result<()> {
        if context.is_empty() {
            return Err(Error::EmptyInput("context"));
        }
        if context.len() > self.config.context_window {
            return Err(Error::ContextTooLong {
                len: context.len(),
                window: self.config.context_window,
            });
        }
        for &t in context {
            assert!(t < self.config.vocab_size, "token {t} out of vocabulary");
        }
        Ok(())
    }

    /// Full forward pass with optional gate-logit bias (mismatch emulation)
    /// and optional replayed expert selection.
    pub fn forward_pass(
        &self,
        context: &[usize],
        gate_bias: Option<&[f64]>,
        selection: Selection<'_>,
    ) -> Result<ForwardPass> {
        self.check_context(context)?;
        let cfg = &self.config;
        let lay = cfg.layout();
        let d = cfg.embed_dim;
        let p = &self.params.data;

        let mut pooled = vec![0.0; d];
        for &t in context {
            let row = &p[lay.embed_row(t)];
            for (acc, w) in pooled.iter_mut().zip(row) {
                *acc += w;
            }
        }
        let inv_n = 1.0 / context.len() as f64;
        pooled.iter_mut().for_each(|v| *v *= inv_n);

        let gate_logits: Vec<f64> = (0..cfg.num_experts)
            .map(|e| dot(&p[lay.gate_row(e)], &pooled))
            .collect();
        let effective_gate: Vec<f64> = match gate_bias {
            Some(bias) => {
                debug_assert_eq!(bias.len(), cfg.num_experts);
                gate_logits.iter().zip(bias).map(|(g, b)| g + b).collect()
            }
            None => gate_logits.clone(),
        };

        let selected = match selection {
            Selection::TopK => top_k_indices(&effective_gate, cfg.top_k),
            Selection::Replay(experts) => {
                if experts.len() != cfg.top_k {
                    return Err(Error::OverrideWrongWidth {
                        given: experts.len(),
                        top_k: cfg.top_k,
                    });
                }
                for &e in experts {
                    if e >= cfg.num_experts {
                        return Err(Error::ExpertOutOfRange {
                            index: e,
                            num_experts: cfg.num_experts,
                        });
                    }
                }
                experts.to_vec()
            }
        };
        let weights = softmax_over(&effective_gate, &selected);

        let mut pre_act = Vec::with_capacity(selected.len());
        let mut hidden = Vec::with_capacity(selected.len());
        let mut expert_out = Vec::with_capacity(selected.len());
        let mut moe_out = pooled.clone();
        for (&e, &w) in selected.iter().zip(&weights) {
            let w1 = &p[lay.expert_w1(e)];
            let b1 = &p[lay.expert_b1(e)];
            let w2 = &p[lay.expert_w2(e)];
            let b2 = &p[lay.expert_b2(e)];
            let u: Vec<f64> = (0..d)
                .map(|i| dot(&w1[i * d..(i + 1) * d], &pooled) + b1[i])
                .collect();
            let h: Vec<f64> = u.iter().map(|v| v.tanh()).collect();
            let f: Vec<f64> = (0..d)
                .map(|i| dot(&w2[i * d..(i + 1) * d], &h) + b2[i])
                .collect();
            for i in 0..d {
                moe_out[i] += w * f[i];
            }
            pre_act.push(u);
            hidden.push(h);
            expert_out.push(f);
        }

        let logits: Vec<f64> = (0..cfg.vocab_size)
            .map(|v| dot(&p[lay.out_row(v)], &moe_out))
            .collect();
        if !logits.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteLogits);
        }

        Ok(ForwardPass {
            pooled,
            gate_logits,
            effective_gate,
            selected,
            weights,
            pre_act,
            hidden,
            expert_out,
            moe_out,
            logits,
        })
    }

    /// Next-token logits plus the router decisions of this forward pass.
    ///
    /// With an override, the returned decisions repeat the override's expert
    /// sets exactly; gate weights are recomputed by renormalizing the current
    /// gate logits over the overridden expert set.
    pub fn forward_logits(
        &self,
        context: &[usize],
        router_override: Option<&[RouterDecision]>,
    ) -> Result<(Vec<f64>, Vec<RouterDecision>)> {
        // This architecture has exactly one MoE invocation per forward pass.
        let selection = match router_override {
            Some(ds) => {
                if ds.is_empty() {
                    return Err(Error::OverrideTooShort { given: 0, needed: 1 });
                }
                Selection::Replay(&ds[0].expert_indices)
            }
            None => Selection::TopK,
        };
        let pass = self.forward_pass(context, None, selection)?;
        let decision = RouterDecision {
            token_position: context.len().saturating_sub(1),
            expert_indices: pass.selected.clone(),
            gate_weights: pass.weights.clone(),
        };
        Ok((pass.logits, vec![decision]))
    }

    /// Teacher-forced log-probs and entropies for `response` given `prompt`.
    ///
    /// `override_per_step` supplies the recorded router decisions (one list
    /// per response token) for replay; `temperature` must match the one used
    /// when the response was sampled for the replay identity to hold.
    pub fn sequence_logprobs(
        &self,
        prompt: &[usize],
        response: &[usize],
        override_per_step: Option<&[Vec<RouterDecision>]>,
        temperature: f64,
    ) -> Result<Vec<TokenStep>> {
        if let Some(ov) = override_per_step {
            if ov.len() < response.len() {
                return Err(Error::OverrideTooShort {
                    given: ov.len(),
                    needed: response.len(),
                });
            }
        }
        if prompt.len() + response.len() > self.config.context_window {
            return Err(Error::ContextTooLong {
                len: prompt.len() + response.len(),
                window: self.config.context_window,
            });
        }
        let mut context = prompt.to_vec();
        let mut steps = Vec::with_capacity(response.len());
        for (t, &token) in response.iter().enumerate() {
            let ov = override_per_step.map(|o| o[t].as_slice());
            let (logits, _) = self.forward_logits(&context, ov)?;
            let probs = token_distribution(&logits, temperature)?;
            steps.push(TokenStep {
                token,
                logprob: probs[token].ln(),
                entropy: token_entropy(&probs),
            });
            context.push(token);
        }
        Ok(steps)
    }

    /// Accumulate `weight * d log pi(token | context) / d theta` into `grad`.
    ///
    /// The expert selection is treated as constant (it is, almost everywhere);
    /// gradient flows through the renormalized gate weights, the selected
    /// experts, the residual path, and the pooled embedding.
    pub fn logprob_grad_accumulate(
        &self,
        context: &[usize],
        token: usize,
        override_decisions: Option<&[RouterDecision]>,
        temperature: f64,
        weight: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        let selection = match override_decisions {
            Some(ds) if !ds.is_empty() => Selection::Replay(&ds[0].expert_indices),
            Some(_) => return Err(Error::OverrideTooShort { given: 0, needed: 1 }),
            None => Selection::TopK,
        };
        let pass = self.forward_pass(context, None, selection)?;
        let cfg = &self.config;
        let lay = cfg.layout();
        let d = cfg.embed_dim;
        let p = &self.params.data;
        debug_assert_eq!(grad.len(), lay.total);

        let probs = token_distribution(&pass.logits, temperature)?;
        // d logprob / d logit_i = (1[i == token] - p_i) / T
        let inv_t = 1.0 / temperature;
        let mut dz: Vec<f64> = probs.iter().map(|&pi| -pi * inv_t).collect();
        dz[token] += inv_t;

        // Output projection and its pullback.
        let mut dy = vec![0.0; d];
        for v in 0..cfg.vocab_size {
            let row = lay.out_row(v);
            let w_row = &p[row.clone()];
            let g_row = &mut grad[row];
            for j in 0..d {
                g_row[j] += weight * dz[v] * pass.moe_out[j];
            }
            for j in 0..d {
                dy[j] += dz[v] * w_row[j];
            }
        }

        // Residual path.
        let mut dx = dy.clone();

        // Experts and gate weights.
        let dw_sel: Vec<f64> = pass
            .expert_out
            .iter()
            .map(|f| dot(&dy, f))
            .collect();
        let weighted_sum: f64 = pass.weights.iter().zip(&dw_sel).map(|(w, g)| w * g).sum();
        for (k, &e) in pass.selected.iter().enumerate() {
            let w_e = pass.weights[k];
            // df = w_e * dy
            let df: Vec<f64> = dy.iter().map(|v| w_e * v).collect();
            let h = &pass.hidden[k];
            {
                let g_w2 = &mut grad[lay.expert_w2(e)];
                for i in 0..d {
                    for j in 0..d {
                        g_w2[i * d + j] += weight * df[i] * h[j];
                    }
                }
            }
            {
                let g_b2 = &mut grad[lay.expert_b2(e)];
                for i in 0..d {
                    g_b2[i] += weight * df[i];
                }
            }
            let w2 = &p[lay.expert_w2(e)];
            let mut dh = vec![0.0; d];
            for i in 0..d {
                for j in 0..d {
                    dh[j] += df[i] * w2[i * d + j];
                }
            }
            let du: Vec<f64> = (0..d).map(|i| (1.0 - h[i] * h[i]) * dh[i]).collect();
            {
                let g_w1 = &mut grad[lay.expert_w1(e)];
                for i in 0..d {
                    for j in 0..d {
                        g_w1[i * d + j] += weight * du[i] * pass.pooled[j];
                    }
                }
            }
            {
                let g_b1 = &mut grad[lay.expert_b1(e)];
                for i in 0..d {
                    g_b1[i] += weight * du[i];
                }
            }
            let w1 = &p[lay.expert_w1(e)];
            for i in 0..d {
                for j in 0..d {
                    dx[j] += du[i] * w1[i * d + j];
                }
            }

            // Gate weights are a softmax over the selected set.
            let dg = w_e * (dw_sel[k] - weighted_sum);
            {
                let g_gate = &mut grad[lay.gate_row(e)];
                for j in 0..d {
                    g_gate[j] += weight * dg * pass.pooled[j];
                }
            }
            let gate_row = &p[lay.gate_row(e)];
            for j in 0..d {
                dx[j] += dg * gate_row[j];
            }
        }

        // Mean pooling spreads dx over every context embedding.
        let inv_n = 1.0 / context.len() as f64;
        for &t in context {
            let g_emb = &mut grad[lay.embed_row(t)];
            for j in 0..d {
                g_emb[j] += weight * inv_n * dx[j];
            }
        }
        Ok(())
    }
}

/// Softmax of `logits / temperature`.
pub fn token_distribution(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(Error::NonPositiveTemperature(temperature));
    }
    if !logits.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFiniteLogits);
    }
    let scaled: Vec<f64> = logits.iter().map(|z| z / temperature).collect();
    let m = scaled.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = scaled.iter().map(|z| (z - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

/// Shannon entropy in nats, with `0 * ln 0 == 0`.
pub fn token_entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

// ---------------------------------------------------------------------------
// Parameter snapshot I/O: fixed-width header (five u64 dims + i64 seed,
// little-endian) followed by the flat f64 parameter array, extension .params.
// ---------------------------------------------------------------------------

pub fn save_params(path: &std::path::Path, cfg: &ModelConfig, params: &PolicyParams) -> Result<()> {
    params.validate(cfg)?;
    let mut bytes = Vec::with_capacity(48 + params.data.len() * 8);
    for v in [
        cfg.vocab_size as u64,
        cfg.context_window as u64,
        cfg.embed_dim as u64,
        cfg.num_experts as u64,
        cfg.top_k as u64,
    ] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes.extend_from_slice(&cfg.seed.to_le_bytes());
    for x in &params.data {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_params(path: &std::path::Path) -> Result<(ModelConfig, PolicyParams)> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 48 || (bytes.len() - 48) % 8 != 0 {
        return Err(Error::InvalidConfig(format!(
            "parameter snapshot {} is truncated",
            path.display()
        )));
    }
    let mut u64s = [0u64; 5];
    for (i, v) in u64s.iter_mut().enumerate() {
        *v = u64::from_le_bytes(bytes[i * 8..(i + 1) * 8].try_into().unwrap());
    }
    let seed = i64::from_le_bytes(bytes[40..48].try_into().unwrap());
    let cfg = ModelConfig {
        vocab_size: u64s[0] as usize,
        context_window: u64s[1] as usize,
        embed_dim: u64s[2] as usize,
        num_experts: u64s[3] as usize,
        top_k: u64s[4] as usize,
        seed,
    };
    cfg.validate()?;
    let data: Vec<f64> = bytes[48..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let params = PolicyParams { data };
    params.validate(&cfg)?;
    Ok((cfg, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            vocab_size: 6,
            context_window: 16,
            embed_dim: 3,
            num_experts: 3,
            top_k: 2,
            seed: 11,
        }
    }

    #[test]
    fn uniform_logits_give_uniform_probs() {
        let probs = token_distribution(&[0.7; 5], 1.0).unwrap();
        for p in probs {
            assert_abs_diff_eq!(p, 0.2, epsilon = 1e-12);
        }
    }

    #[test]
    fn huge_temperature_flattens_distribution() {
        let probs = token_distribution(&[3.0, -1.0, 0.5, 2.0], 1e6).unwrap();
        for p in &probs {
            assert!((p - 0.25).abs() < 1e-4, "p = {p}");
        }
        assert_abs_diff_eq!(probs.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn softmax_matches_hand_computation() {
        // Direct evaluation of exp(z_i) / sum_j exp(z_j) for z = [2, 1, 0].
        let probs = token_distribution(&[2.0, 1.0, 0.0], 1.0).unwrap();
        let z = 2f64.exp() + 1f64.exp() + 1.0;
        assert_abs_diff_eq!(probs[0], 2f64.exp() / z, epsilon = 1e-12);
        assert_abs_diff_eq!(probs[1], 1f64.exp() / z, epsilon = 1e-12);
        assert_abs_diff_eq!(probs[2], 1.0 / z, epsilon = 1e-12);
    }

    #[test]
    fn temperature_must_be_positive() {
        assert!(token_distribution(&[0.0], 0.0).is_err());
        assert!(token_distribution(&[0.0], -1.0).is_err());
        assert!(token_distribution(&[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn entropy_degenerate_and_uniform() {
        assert_eq!(token_entropy(&[0.0, 1.0, 0.0]), 0.0);
        let v = 7;
        let uniform = vec![1.0 / v as f64; v];
        assert_abs_diff_eq!(token_entropy(&uniform), (v as f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn entropy_matches_hand_computation() {
        // -(1/2 ln 1/2 + 2 * 1/4 ln 1/4) = 3/2 ln 2
        let h = token_entropy(&[0.5, 0.25, 0.25]);
        assert_abs_diff_eq!(h, 1.5 * std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn identity_replay_reproduces_logits_bitwise() {
        let policy = Policy::init(tiny_config()).unwrap();
        let ctx = [1usize, 4, 2];
        let (logits, decisions) = policy.forward_logits(&ctx, None).unwrap();
        let (replayed, redecisions) = policy.forward_logits(&ctx, Some(&decisions)).unwrap();
        assert_eq!(logits, replayed);
        assert_eq!(decisions[0].expert_indices, redecisions[0].expert_indices);
    }

    #[test]
    fn single_expert_routing_is_forced() {
        let cfg = ModelConfig {
            num_experts: 1,
            top_k: 1,
            ..tiny_config()
        };
        let policy = Policy::init(cfg).unwrap();
        let (_, decisions) = policy.forward_logits(&[2, 3], None).unwrap();
        assert_eq!(decisions[0].expert_indices, vec![0]);
        assert_abs_diff_eq!(decisions[0].gate_weights[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gate_weights_sum_to_one() {
        let policy = Policy::init(tiny_config()).unwrap();
        let (_, decisions) = policy.forward_logits(&[0, 5, 1], None).unwrap();
        let d = &decisions[0];
        assert_eq!(d.expert_indices.len(), 2);
        assert!(d.gate_weights.iter().all(|&w| w >= 0.0));
        assert_abs_diff_eq!(d.gate_weights.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        let mut sorted = d.expert_indices.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), d.expert_indices.len(), "experts must be distinct");
    }

    #[test]
    fn context_too_long_is_rejected() {
        let policy = Policy::init(tiny_config()).unwrap();
        let ctx = vec![1usize; 17];
        assert!(matches!(
            policy.forward_logits(&ctx, None),
            Err(Error::ContextTooLong { .. })
        ));
    }

    #[test]
    fn override_expert_out_of_range_is_rejected() {
        let policy = Policy::init(tiny_config()).unwrap();
        let bad = RouterDecision {
            token_position: 0,
            expert_indices: vec![0, 9],
            gate_weights: vec![0.5, 0.5],
        };
        assert!(matches!(
            policy.forward_logits(&[1], Some(std::slice::from_ref(&bad))),
            Err(Error::ExpertOutOfRange { index: 9, .. })
        ));
    }

    #[test]
    fn empty_response_gives_empty_steps() {
        let policy = Policy::init(tiny_config()).unwrap();
        let steps = policy.sequence_logprobs(&[1, 2], &[], None, 1.0).unwrap();
        assert!(steps.is_empty());
    }

    #[test]
    fn sequence_logprobs_are_deterministic() {
        let policy = Policy::init(tiny_config()).unwrap();
        let a = policy.sequence_logprobs(&[1, 2], &[3, 0], None, 0.8).unwrap();
        let b = policy.sequence_logprobs(&[1, 2], &[3, 0], None, 0.8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn entropies_respect_vocab_bound() {
        let policy = Policy::init(tiny_config()).unwrap();
        let steps = policy
            .sequence_logprobs(&[1, 2, 3], &[4, 5, 0], None, 1.0)
            .unwrap();
        let bound = policy.config.log_vocab() + 1e-9;
        for s in steps {
            assert!(s.logprob <= 0.0);
            assert!(s.entropy >= 0.0 && s.entropy <= bound, "entropy {}", s.entropy);
        }
    }

    #[test]
    fn top_k_ties_break_to_lower_index() {
        assert_eq!(top_k_indices(&[1.0, 2.0, 2.0, 0.5], 2), vec![1, 2]);
        assert_eq!(top_k_indices(&[3.0, 3.0, 3.0], 2), vec![0, 1]);
    }

    #[test]
    fn params_roundtrip_through_snapshot() {
        let cfg = tiny_config();
        let params = PolicyParams::init(&cfg);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.params");
        save_params(&path, &cfg, &params).unwrap();
        let (cfg2, params2) = load_params(&path).unwrap();
        assert_eq!(cfg, cfg2);
        assert_eq!(params.data, params2.data);
    }
}

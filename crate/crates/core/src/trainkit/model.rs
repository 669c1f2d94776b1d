//! Mean-pooled embedding classifier.
//!
//! Each sequence is embedded token by token, averaged over its non-pad
//! prefix, passed through `tanh` hidden layers and a linear head, then
//! normalized with a softmax. An empty prefix pools to the zero vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::LossKind;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::seed::{stage_rng, SeededRng};
use crate::wordpiece::TokenSeq;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub hidden: Vec<usize>,
    pub num_classes: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl BackboneConfig {
    pub fn new(vocab_size: usize, num_classes: usize) -> Self {
        BackboneConfig {
            vocab_size,
            embedding_dim: 64,
            hidden: vec![128],
            num_classes,
            dropout_rate: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.embedding_dim == 0 || self.num_classes == 0 {
            return Err(Error::invalid(
                "vocab_size, embedding_dim and num_classes must be at least 1",
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Names and shapes of every parameter tensor, in canonical order.
    pub fn parameter_layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = vec![("embedding".to_string(), vec![self.vocab_size, self.embedding_dim])];
        let mut width = self.embedding_dim;
        for (i, &h) in self.hidden.iter().enumerate() {
            out.push((format!("hidden.{i}.weight"), vec![width, h]));
            out.push((format!("hidden.{i}.bias"), vec![h]));
            width = h;
        }
        out.push(("head.weight".into(), vec![width, self.num_classes]));
        out.push(("head.bias".into(), vec![self.num_classes]));
        out
    }
}

/// The interface the training loop needs from a classifier.
pub trait Backbone {
    fn num_classes(&self) -> usize;

    /// Class probability rows, one per item.
    fn forward(&self, batch: &[TokenSeq]) -> Result<Vec<Vec<f64>>>;

    /// Per-item losses and the gradient of the reduced batch objective for
    /// each parameter tensor. `dropout` supplies the mask stream in training.
    fn loss_and_gradients(
        &self,
        batch: &[TokenSeq],
        loss: &LossKind,
        dropout: Option<&mut SeededRng>,
    ) -> Result<(Vec<f64>, Vec<Tensor>)>;

    fn parameters(&self) -> Vec<&Tensor>;

    fn parameters_mut(&mut self) -> Vec<&mut Tensor>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    weight: Tensor,
    bias: Tensor,
}

impl Dense {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.data().to_vec();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.weight.row(i)) {
                *o += xi * w;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanPoolClassifier {
    config: BackboneConfig,
    embedding: Tensor,
    hidden: Vec<Dense>,
    head: Dense,
}

struct Trace {
    tokens: Vec<u32>,
    /// activations[0] is the pooled input; activations[i + 1] the output of
    /// hidden layer i after tanh and dropout.
    activations: Vec<Vec<f64>>,
    /// Per hidden layer: tanh output before dropout, and the dropout scale
    /// applied to each unit.
    pre_dropout: Vec<Vec<f64>>,
    masks: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn xavier(rng: &mut SeededRng, rows: usize, cols: usize) -> Tensor {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect();
    Tensor::from_vec(&[rows, cols], data).expect("shape matches")
}

impl MeanPoolClassifier {
    /// Seeded Xavier-uniform initialization; biases start at zero.
    pub fn new(config: BackboneConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = stage_rng(config.seed, "init");
        let embedding = xavier(&mut rng, config.vocab_size, config.embedding_dim);
        let mut width = config.embedding_dim;
        let mut hidden = Vec::with_capacity(config.hidden.len());
        for &h in &config.hidden {
            hidden.push(Dense {
                weight: xavier(&mut rng, width, h),
                bias: Tensor::zeros(&[h]),
            });
            width = h;
        }
        let head = Dense {
            weight: xavier(&mut rng, width, config.num_classes),
            bias: Tensor::zeros(&[config.num_classes]),
        };
        Ok(MeanPoolClassifier {
            config,
            embedding,
            hidden,
            head,
        })
    }

    /// Rebuilds a model from tensors in [`BackboneConfig::parameter_layout`] order.
    pub fn from_parameters(config: BackboneConfig, tensors: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        let layout = config.parameter_layout();
        if layout.len() != tensors.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter tensors, got {}",
                layout.len(),
                tensors.len()
            )));
        }
        for ((name, shape), t) in layout.iter().zip(&tensors) {
            if t.shape() != shape.as_slice() {
                return Err(Error::Shape(format!(
                    "{name}: expected shape {shape:?}, got {:?}",
                    t.shape()
                )));
            }
        }
        let mut it = tensors.into_iter();
        let embedding = it.next().expect("layout checked");
        let hidden = (0..config.hidden.len())
            .map(|_| Dense {
                weight: it.next().expect("layout checked"),
                bias: it.next().expect("layout checked"),
            })
            .collect();
        let head = Dense {
            weight: it.next().expect("layout checked"),
            bias: it.next().expect("layout checked"),
        };
        Ok(MeanPoolClassifier {
            config,
            embedding,
            hidden,
            head,
        })
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    /// Parameter tensors paired with their layout names.
    pub fn named_parameters(&self) -> Vec<(String, &Tensor)> {
        self.config
            .parameter_layout()
            .into_iter()
            .map(|(n, _)| n)
            .zip(self.parameters())
            .collect()
    }

    fn tokens_of(&self, seq: &TokenSeq) -> Result<Vec<u32>> {
        let tokens = seq
            .ids
            .get(..seq.length)
            .ok_or_else(|| Error::Shape(format!("length {} exceeds {} ids", seq.length, seq.ids.len())))?;
        if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= self.config.vocab_size) {
            return Err(Error::TokenOutOfRange {
                id: bad,
                size: self.config.vocab_size,
            });
        }
        Ok(tokens.to_vec())
    }

    fn trace(&self, seq: &TokenSeq, mut dropout: Option<&mut SeededRng>) -> Result<Trace> {
        let tokens = self.tokens_of(seq)?;
        let d = self.config.embedding_dim;
        let mut pooled = vec![0.0; d];
        if !tokens.is_empty() {
            for &t in &tokens {
                for (p, e) in pooled.iter_mut().zip(self.embedding.row(t as usize)) {
                    *p += e;
                }
            }
            let n = tokens.len() as f64;
            pooled.iter_mut().for_each(|p| *p /= n);
        }
        let rate = self.config.dropout_rate;
        let mut activations = vec![pooled];
        let mut pre_dropout = Vec::with_capacity(self.hidden.len());
        let mut masks = Vec::with_capacity(self.hidden.len());
        for layer in &self.hidden {
            let h: Vec<f64> = layer
                .apply(activations.last().expect("non-empty"))
                .into_iter()
                .map(f64::tanh)
                .collect();
            let mask: Vec<f64> = match dropout.as_deref_mut() {
                Some(rng) if rate > 0.0 => (0..h.len())
                    .map(|_| {
                        if rng.gen_bool(rate) {
                            0.0
                        } else {
                            1.0 / (1.0 - rate)
                        }
                    })
                    .collect(),
                _ => vec![1.0; h.len()],
            };
            activations.push(h.iter().zip(&mask).map(|(a, m)| a * m).collect());
            pre_dropout.push(h);
            masks.push(mask);
        }
        let logits = self.head.apply(activations.last().expect("non-empty"));
        Ok(Trace {
            tokens,
            activations,
            pre_dropout,
            masks,
            probs: softmax(&logits),
        })
    }

    fn accumulate(&self, trace: &Trace, dlogits: &[f64], grads: &mut [Tensor]) {
        let n_hidden = self.hidden.len();
        // gradient slots follow parameter_layout order
        let head_w = 1 + 2 * n_hidden;
        let last = trace.activations.last().expect("non-empty");
        for (i, &a) in last.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (g, &dz) in grads[head_w].row_mut(i).iter_mut().zip(dlogits) {
                *g += a * dz;
            }
        }
        for (g, &dz) in grads[head_w + 1].data_mut().iter_mut().zip(dlogits) {
            *g += dz;
        }
        let mut upstream: Vec<f64> = (0..last.len())
            .map(|i| {
                self.head
                    .weight
                    .row(i)
                    .iter()
                    .zip(dlogits)
                    .map(|(w, dz)| w * dz)
                    .sum()
            })
            .collect();

        for l in (0..n_hidden).rev() {
            let h = &trace.pre_dropout[l];
            let mask = &trace.masks[l];
            let delta: Vec<f64> = upstream
                .iter()
                .zip(h)
                .zip(mask)
                .map(|((u, h), m)| u * m * (1.0 - h * h))
                .collect();
            let input = &trace.activations[l];
            let (w_slot, b_slot) = (1 + 2 * l, 2 + 2 * l);
            for (i, &x) in input.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (g, &dv) in grads[w_slot].row_mut(i).iter_mut().zip(&delta) {
                    *g += x * dv;
                }
            }
            for (g, &dv) in grads[b_slot].data_mut().iter_mut().zip(&delta) {
                *g += dv;
            }
            upstream = (0..input.len())
                .map(|i| {
                    self.hidden[l]
                        .weight
                        .row(i)
                        .iter()
                        .zip(&delta)
                        .map(|(w, dv)| w * dv)
                        .sum()
                })
                .collect();
        }

        if trace.tokens.is_empty() {
            return;
        }
        let n = trace.tokens.len() as f64;
        for &t in &trace.tokens {
            for (g, &u) in grads[0].row_mut(t as usize).iter_mut().zip(&upstream) {
                *g += u / n;
            }
        }
    }
}

impl Backbone for MeanPoolClassifier {
    fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    fn forward(&self, batch: &[TokenSeq]) -> Result<Vec<Vec<f64>>> {
        batch
            .iter()
            .map(|s| self.trace(s, None).map(|t| t.probs))
            .collect()
    }

    fn loss_and_gradients(
        &self,
        batch: &[TokenSeq],
        loss: &LossKind,
        mut dropout: Option<&mut SeededRng>,
    ) -> Result<(Vec<f64>, Vec<Tensor>)> {
        let k = self.config.num_classes;
        let mut grads: Vec<Tensor> = self
            .config
            .parameter_layout()
            .iter()
            .map(|(_, shape)| Tensor::zeros(shape))
            .collect();
        let scale = loss.reduction().grad_scale(batch.len());
        let mut losses = Vec::with_capacity(batch.len());
        for seq in batch {
            if seq.label_id >= k {
                return Err(Error::ClassIdOutOfRange {
                    id: seq.label_id,
                    num_classes: k,
                });
            }
            let trace = self.trace(seq, dropout.as_deref_mut())?;
            losses.push(loss.item_loss(&trace.probs, seq.label_id));
            let dlogits: Vec<f64> = loss
                .logit_grad(&trace.probs, seq.label_id)
                .into_iter()
                .map(|g| g * scale)
                .collect();
            self.accumulate(&trace, &dlogits, &mut grads);
        }
        Ok((losses, grads))
    }

    fn parameters(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.embedding];
        for layer in &self.hidden {
            out.push(&layer.weight);
            out.push(&layer.bias);
        }
        out.push(&self.head.weight);
        out.push(&self.head.bias);
        out
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.embedding];
        for layer in &mut self.hidden {
            out.push(&mut layer.weight);
            out.push(&mut layer.bias);
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(ids: &[u32], capacity: usize) -> TokenSeq {
        let mut padded = ids.to_vec();
        padded.resize(capacity, 0);
        TokenSeq {
            id: String::new(),
            ids: padded,
            length: ids.len(),
            label_id: 0,
        }
    }

    fn model() -> MeanPoolClassifier {
        MeanPoolClassifier::new(BackboneConfig {
            hidden: vec![8, 5],
            embedding_dim: 6,
            ..BackboneConfig::new(20, 3)
        })
        .unwrap()
    }

    #[test]
    fn rows_are_distributions() {
        let m = model();
        let rows = m.forward(&[seq(&[1, 2, 3], 5), seq(&[19], 5)]).unwrap();
        for row in rows {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn empty_prefix_pools_to_zero() {
        let m = model();
        let a = m.forward(&[seq(&[], 4)]).unwrap();
        let b = m.forward(&[seq(&[], 4)]).unwrap();
        assert_eq!(a, b);
        assert!(a[0].iter().all(|p| p.is_finite()));
        // zero pooled input with zero biases gives equal logits
        assert!(a[0].iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn out_of_range_token_fails() {
        let m = model();
        assert!(matches!(
            m.forward(&[seq(&[20], 2)]),
            Err(Error::TokenOutOfRange { id: 20, .. })
        ));
    }

    #[test]
    fn layout_matches_parameters() {
        let m = model();
        let layout = m.config().parameter_layout();
        let params = m.parameters();
        assert_eq!(layout.len(), params.len());
        for ((_, shape), p) in layout.iter().zip(params) {
            assert_eq!(shape.as_slice(), p.shape());
        }
        let rebuilt = MeanPoolClassifier::from_parameters(
            m.config().clone(),
            m.parameters().into_iter().cloned().collect(),
        )
        .unwrap();
        assert_eq!(rebuilt, m);
    }

    #[test]
    fn config_validation() {
        assert!(BackboneConfig::new(0, 2).validate().is_err());
        let mut c = BackboneConfig::new(5, 2);
        c.dropout_rate = 1.0;
        assert!(c.validate().is_err());
        c.dropout_rate = 0.0;
        c.hidden = vec![0];
        assert!(c.validate().is_err());
    }
}

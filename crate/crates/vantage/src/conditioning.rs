//! Learnable viewpoint-token encoder and token sequence assembly.
//!
//! An encoded pose runs through a small ReLU MLP to produce one token in the
//! caption embedding space; the token is inserted immediately after the
//! object description so the generator's attention sees pose and object side
//! by side.

use crate::error::{Error, Result};
use crate::geometry::encoding::ViewpointEncoding;
use crate::nn::linear::Linear;
use crate::nn::ops::{relu, relu_backward};
use crate::nn::param::{NamedSlots, Param};
use crate::nn::rng;
use crate::scalar::Real;
use ndarray::{Array1, Array2, ArrayView1, Axis, Ix2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewpointMlpConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub output_dim: usize,
}

impl ViewpointMlpConfig {
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim: 1024,
            num_layers: 3,
            output_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers < 1 {
            return Err(Error::config("viewpoint MLP needs num_layers >= 1"));
        }
        if self.input_dim < 1 || self.hidden_dim < 1 || self.output_dim < 1 {
            return Err(Error::config("viewpoint MLP dims must be >= 1"));
        }
        Ok(())
    }
}

/// Affine-ReLU stack: ReLU between layers, none after the last.
#[derive(Debug, Clone)]
pub struct ViewpointMlp<R: Real> {
    pub cfg: ViewpointMlpConfig,
    pub layers: Vec<Linear<R>>,
}

/// Per-layer inputs retained for the backward pass.
pub struct MlpCache<R: Real> {
    inputs: Vec<Array2<R>>,
}

impl<R: Real> ViewpointMlp<R> {
    /// Hidden layers use fan-in scaled uniform init; the final layer starts
    /// near zero (std 0.02) so the fresh viewpoint token does not drown the
    /// caption embeddings.
    pub fn new(cfg: ViewpointMlpConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let mut layers = Vec::with_capacity(cfg.num_layers);
        for i in 0..cfg.num_layers {
            let in_dim = if i == 0 { cfg.input_dim } else { cfg.hidden_dim };
            let out_dim = if i + 1 == cfg.num_layers {
                cfg.output_dim
            } else {
                cfg.hidden_dim
            };
            let layer = if i + 1 == cfg.num_layers {
                Linear::new_gaussian(in_dim, out_dim, 0.02, rng)
            } else {
                Linear::new(in_dim, out_dim, rng)
            };
            layers.push(layer);
        }
        Ok(Self { cfg, layers })
    }

    pub fn forward_batch(&self, x: &Array2<R>) -> Result<Array2<R>> {
        Ok(self.forward_train(x)?.0)
    }

    pub fn forward_train(&self, x: &Array2<R>) -> Result<(Array2<R>, MlpCache<R>)> {
        if x.ncols() != self.cfg.input_dim {
            return Err(Error::shape(
                format!("encoding of length {}", self.cfg.input_dim),
                format!("length {}", x.ncols()),
            ));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            inputs.push(cur.clone());
            cur = layer.forward(&cur);
            if i + 1 < self.layers.len() {
                cur = relu(&cur);
            }
        }
        Ok((cur, MlpCache { inputs }))
    }

    /// Single-encoding forward.
    pub fn forward(&self, encoding: &ViewpointEncoding<R>) -> Result<Array1<R>> {
        let x = Array2::from_shape_vec((1, encoding.data.len()), encoding.data.clone())
            .expect("encoding row");
        let y = self.forward_batch(&x)?;
        Ok(y.index_axis(Axis(0), 0).to_owned())
    }

    /// Accumulates parameter grads; returns the gradient w.r.t. the input
    /// encodings.
    pub fn backward(&mut self, cache: &MlpCache<R>, dy: &Array2<R>) -> Array2<R> {
        let mut grad = dy.clone();
        for i in (0..self.layers.len()).rev() {
            if i + 1 < self.layers.len() {
                // The cached input of layer i+1 is the post-ReLU activation,
                // which is positive exactly where the pre-activation was.
                grad = relu_backward(&cache.inputs[i + 1], &grad);
            }
            grad = self.layers[i].backward(&cache.inputs[i], &grad);
        }
        grad
    }

    pub fn collect<'a>(&'a mut self, prefix: &str, out: &mut NamedSlots<'a, R>) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            layer.collect(&format!("{prefix}.layer{i}"), out);
        }
    }
}

/// Toy caption vocabulary: dense word ids plus a trainable embedding table.
#[derive(Debug, Clone)]
pub struct Vocabulary<R: Real> {
    words: Vec<String>,
    ids: BTreeMap<String, u32>,
    object_nouns: Vec<bool>,
    pub embed: Param<R, Ix2>,
}

impl<R: Real> Vocabulary<R> {
    /// Builds a vocabulary over the given words (deduplicated, sorted) with
    /// gaussian-initialized embeddings.
    pub fn new(
        words: impl IntoIterator<Item = String>,
        object_nouns: &[&str],
        dim: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let mut sorted: Vec<String> = words.into_iter().collect();
        sorted.sort();
        sorted.dedup();
        let ids = sorted
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect::<BTreeMap<_, _>>();
        let object_flags = sorted
            .iter()
            .map(|w| object_nouns.contains(&w.as_str()))
            .collect();
        let mut table = Array2::zeros((sorted.len(), dim));
        rng::fill_normal(table.view_mut(), 0.02, rng);
        Self {
            words: sorted,
            ids,
            object_nouns: object_flags,
            embed: Param::new(table),
        }
    }

    /// Rebuilds a vocabulary around an existing embedding table (checkpoint
    /// load path).
    pub fn from_parts(words: Vec<String>, object_nouns: Vec<bool>, embed: Array2<R>) -> Self {
        let ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Self {
            words,
            ids,
            object_nouns,
            embed: Param::new(embed),
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embed.w.ncols()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn object_noun_flags(&self) -> &[bool] {
        &self.object_nouns
    }

    pub fn id(&self, word: &str) -> Result<u32> {
        self.ids
            .get(word)
            .copied()
            .ok_or_else(|| Error::Vocab(format!("unknown word {word:?}")))
    }

    pub fn word(&self, id: u32) -> Result<&str> {
        self.words
            .get(id as usize)
            .map(|s| s.as_str())
            .ok_or_else(|| Error::Vocab(format!("id {id} out of range")))
    }

    pub fn is_object_noun(&self, id: u32) -> bool {
        self.object_nouns.get(id as usize).copied().unwrap_or(false)
    }

    pub fn encode_text(&self, text: &str) -> Result<Vec<u32>> {
        text.split_whitespace().map(|w| self.id(w)).collect()
    }

    /// Index just past the first object noun in the caption.
    pub fn object_span_end(&self, caption_ids: &[u32]) -> Result<usize> {
        caption_ids
            .iter()
            .position(|&id| self.is_object_noun(id))
            .map(|i| i + 1)
            .ok_or_else(|| Error::input("caption names no known object"))
    }
}

/// Embedded caption with one viewpoint token spliced in.
#[derive(Debug, Clone)]
pub struct TokenSequence<R: Real> {
    /// (length, d) embeddings; length = caption length + 1.
    pub embeddings: Array2<R>,
    pub viewpoint_index: usize,
    /// For each row, the vocabulary id it was looked up from (None at the
    /// viewpoint position). Used to route gradients back to the table.
    pub source_ids: Vec<Option<u32>>,
}

impl<R: Real> TokenSequence<R> {
    pub fn len(&self) -> usize {
        self.embeddings.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.nrows() == 0
    }
}

/// Embeds the caption tokens and inserts the viewpoint embedding immediately
/// after `object_span_end - 1`.
pub fn assemble_sequence<R: Real>(
    caption_ids: &[u32],
    object_span_end: usize,
    viewpoint_embedding: ArrayView1<'_, R>,
    vocab: &Vocabulary<R>,
) -> Result<TokenSequence<R>> {
    if caption_ids.is_empty() {
        return Err(Error::input("caption must be non-empty"));
    }
    if object_span_end > caption_ids.len() {
        return Err(Error::input(format!(
            "object_span_end {} exceeds caption length {}",
            object_span_end,
            caption_ids.len()
        )));
    }
    let d = vocab.dim();
    if viewpoint_embedding.len() != d {
        return Err(Error::shape(
            format!("viewpoint embedding of width {d}"),
            format!("width {}", viewpoint_embedding.len()),
        ));
    }
    for &id in caption_ids {
        if id as usize >= vocab.len() {
            return Err(Error::Vocab(format!("id {id} out of vocabulary")));
        }
    }
    let len = caption_ids.len() + 1;
    let mut embeddings = Array2::zeros((len, d));
    let mut source_ids = Vec::with_capacity(len);
    let mut row = 0usize;
    for (pos, &id) in caption_ids.iter().enumerate() {
        if pos == object_span_end {
            embeddings.row_mut(row).assign(&viewpoint_embedding);
            source_ids.push(None);
            row += 1;
        }
        embeddings.row_mut(row).assign(&vocab.embed.w.row(id as usize));
        source_ids.push(Some(id));
        row += 1;
    }
    if object_span_end == caption_ids.len() {
        embeddings.row_mut(row).assign(&viewpoint_embedding);
        source_ids.push(None);
    }
    Ok(TokenSequence {
        embeddings,
        viewpoint_index: object_span_end,
        source_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_vocab(d: usize) -> Vocabulary<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        Vocabulary::new(
            ["a", "photo", "of", "red", "arrowcar", "grass"]
                .into_iter()
                .map(str::to_string),
            &["arrowcar"],
            d,
            &mut rng,
        )
    }

    #[test]
    fn zero_weights_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = ViewpointMlpConfig {
            input_dim: 6,
            hidden_dim: 8,
            num_layers: 3,
            output_dim: 4,
        };
        let mut mlp = ViewpointMlp::<f64>::new(cfg, &mut rng).unwrap();
        for layer in &mut mlp.layers {
            layer.w.w.fill(0.0);
            layer.b.w.fill(0.0);
        }
        let enc = ViewpointEncoding {
            kind: crate::geometry::encoding::EncodingKind::Factorized,
            data: vec![0.1, 0.9, 0.2, 0.5, -0.1, 0.0],
        };
        let y = mlp.forward(&enc).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_layer_is_the_exact_linear_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = ViewpointMlpConfig {
            input_dim: 6,
            hidden_dim: 8,
            num_layers: 1,
            output_dim: 6,
        };
        let mut mlp = ViewpointMlp::<f64>::new(cfg, &mut rng).unwrap();
        // Identity weights, zero bias: output selects the input exactly.
        mlp.layers[0].w.w = ndarray::Array2::eye(6);
        mlp.layers[0].b.w.fill(0.0);
        let enc = ViewpointEncoding {
            kind: crate::geometry::encoding::EncodingKind::Factorized,
            data: vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        };
        let y = mlp.forward(&enc).unwrap();
        assert_eq!(y.to_vec(), vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = ViewpointMlpConfig::new(6, 4);
        let mlp = ViewpointMlp::<f64>::new(
            ViewpointMlpConfig {
                hidden_dim: 8,
                ..cfg
            },
            &mut rng,
        )
        .unwrap();
        let enc = ViewpointEncoding {
            kind: crate::geometry::encoding::EncodingKind::Factorized,
            data: vec![1.0; 5],
        };
        assert!(mlp.forward(&enc).is_err());
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = ViewpointMlpConfig {
            input_dim: 6,
            hidden_dim: 16,
            num_layers: 3,
            output_dim: 8,
        };
        let mlp = ViewpointMlp::<f64>::new(cfg, &mut rng).unwrap();
        let x = Array2::from_shape_fn((3, 6), |(i, j)| (i as f64) * 0.3 - (j as f64) * 0.1);
        let a = mlp.forward_batch(&x).unwrap();
        let b = mlp.forward_batch(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn assemble_inserts_after_object_span() {
        let vocab = test_vocab(4);
        let ids = vocab.encode_text("a photo of red arrowcar grass").unwrap();
        let span = vocab.object_span_end(&ids).unwrap();
        assert_eq!(span, 5);
        let v = Array1::from_vec(vec![9.0, 9.0, 9.0, 9.0]);
        let seq = assemble_sequence(&ids, span, v.view(), &vocab).unwrap();
        assert_eq!(seq.len(), ids.len() + 1);
        assert_eq!(seq.viewpoint_index, 5);
        assert_eq!(seq.embeddings.row(5).to_vec(), vec![9.0, 9.0, 9.0, 9.0]);
        // Caption tokens keep their order around the insertion.
        for (row, src) in seq.source_ids.iter().enumerate() {
            match src {
                Some(id) => {
                    let expected = if row < 5 { ids[row] } else { ids[row - 1] };
                    assert_eq!(*id, expected);
                }
                None => assert_eq!(row, 5),
            }
        }
    }

    #[test]
    fn assemble_boundary_puts_token_last() {
        let vocab = test_vocab(4);
        let ids = vocab.encode_text("a photo of red arrowcar").unwrap();
        let v = Array1::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let seq = assemble_sequence(&ids, ids.len(), v.view(), &vocab).unwrap();
        assert_eq!(seq.viewpoint_index, ids.len());
        assert_eq!(
            seq.embeddings.row(ids.len()).to_vec(),
            vec![1.0, 2.0, 3.0, 4.0]
        );
    }

    #[test]
    fn assemble_rejects_bad_inputs() {
        let vocab = test_vocab(4);
        let v = Array1::from_vec(vec![0.0; 4]);
        assert!(assemble_sequence::<f64>(&[], 0, v.view(), &vocab).is_err());
        assert!(assemble_sequence::<f64>(&[99], 0, v.view(), &vocab).is_err());
        assert!(assemble_sequence::<f64>(&[0, 1], 3, v.view(), &vocab).is_err());
    }
}

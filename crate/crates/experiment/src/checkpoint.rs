//! Plain-text model checkpoints.
//!
//! Version 1 layout (field order documented in the file header): filter_len,
//! hidden_dim, w1 rows, b1, w2 rows, b2, feat_mean, feat_std, train scalars.
//! Floats are written in shortest round-trip form, so load(save(x)) == x.

use anyhow::{bail, Context, Result};
use dmf_core::features::{FeatureStandardizer, FEATURE_COUNT};
use dmf_core::neural::{MlpParams, TrainConfig};
use std::path::Path;

const MAGIC: &str = "dmf-checkpoint v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: MlpParams,
    pub feat_mean: [f64; FEATURE_COUNT],
    pub feat_std: [f64; FEATURE_COUNT],
    pub train: TrainConfig,
}

impl Checkpoint {
    pub fn standardizer(&self) -> Result<FeatureStandardizer> {
        FeatureStandardizer::from_stats(self.feat_mean, self.feat_std)
            .context("rebuilding standardizer from checkpoint")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        out.push_str("# field order: filter_len, hidden_dim, w1 (hidden_dim rows of 16, row-major),\n");
        out.push_str("# b1 (1 row of hidden_dim), w2 (2*filter_len rows of hidden_dim, row-major),\n");
        out.push_str("# b2 (1 row of 2*filter_len), feat_mean (16), feat_std (16),\n");
        out.push_str("# train (learning_rate beta1 beta2 epsilon lambda_s1 lambda_s2 epochs symbols_per_epoch standardizer_warmup)\n");
        let l = self.params.filter_len();
        let h = self.params.hidden_dim();
        out.push_str(&format!("filter_len {l}\n"));
        out.push_str(&format!("hidden_dim {h}\n"));
        let row = |vals: &[f64]| -> String {
            vals.iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        out.push_str("w1\n");
        for r in self.params.w1.chunks(FEATURE_COUNT) {
            out.push_str(&row(r));
            out.push('\n');
        }
        out.push_str("b1\n");
        out.push_str(&row(&self.params.b1));
        out.push('\n');
        out.push_str("w2\n");
        for r in self.params.w2.chunks(h) {
            out.push_str(&row(r));
            out.push('\n');
        }
        out.push_str("b2\n");
        out.push_str(&row(&self.params.b2));
        out.push('\n');
        out.push_str("feat_mean\n");
        out.push_str(&row(&self.feat_mean));
        out.push('\n');
        out.push_str("feat_std\n");
        out.push_str(&row(&self.feat_std));
        out.push('\n');
        let t = &self.train;
        out.push_str("train\n");
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {} {}\n",
            t.learning_rate,
            t.beta1,
            t.beta2,
            t.epsilon,
            t.lambda_s1,
            t.lambda_s2,
            t.epochs,
            t.symbols_per_epoch,
            t.standardizer_warmup
        ));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let magic = lines.next().context("empty checkpoint")?;
        if magic.trim() != MAGIC {
            bail!("bad checkpoint header `{magic}` (expected `{MAGIC}`)");
        }
        let mut expect_kv = |key: &str| -> Result<usize> {
            let line = lines.next().with_context(|| format!("missing `{key}`"))?;
            let mut parts = line.split_whitespace();
            let k = parts.next().unwrap_or_default();
            if k != key {
                bail!("expected `{key}`, found `{k}`");
            }
            parts
                .next()
                .with_context(|| format!("missing value for `{key}`"))?
                .parse::<usize>()
                .with_context(|| format!("parsing `{key}`"))
        };
        let filter_len = expect_kv("filter_len")?;
        let hidden_dim = expect_kv("hidden_dim")?;
        if hidden_dim != dmf_core::neural::hidden_dim(filter_len) {
            bail!("hidden_dim {hidden_dim} does not match filter_len {filter_len}");
        }

        let mut params = MlpParams::zeros(filter_len);
        let mut read_block = |label: &str, rows: usize, cols: usize| -> Result<Vec<f64>> {
            let tag = lines.next().with_context(|| format!("missing `{label}`"))?;
            if tag.trim() != label {
                bail!("expected block `{label}`, found `{tag}`");
            }
            let mut values = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                let line = lines
                    .next()
                    .with_context(|| format!("missing row {r} of `{label}`"))?;
                for tok in line.split_whitespace() {
                    values.push(
                        tok.parse::<f64>()
                            .with_context(|| format!("parsing `{label}` row {r}"))?,
                    );
                }
            }
            if values.len() != rows * cols {
                bail!(
                    "block `{label}` holds {} values, expected {}",
                    values.len(),
                    rows * cols
                );
            }
            Ok(values)
        };
        params.w1 = read_block("w1", hidden_dim, FEATURE_COUNT)?;
        params.b1 = read_block("b1", 1, hidden_dim)?;
        params.w2 = read_block("w2", 2 * filter_len, hidden_dim)?;
        params.b2 = read_block("b2", 1, 2 * filter_len)?;
        let mean_v = read_block("feat_mean", 1, FEATURE_COUNT)?;
        let std_v = read_block("feat_std", 1, FEATURE_COUNT)?;
        let train_v = read_block("train", 1, 9)?;

        let mut feat_mean = [0.0; FEATURE_COUNT];
        feat_mean.copy_from_slice(&mean_v);
        let mut feat_std = [0.0; FEATURE_COUNT];
        feat_std.copy_from_slice(&std_v);
        let train = TrainConfig {
            learning_rate: train_v[0],
            beta1: train_v[1],
            beta2: train_v[2],
            epsilon: train_v[3],
            lambda_s1: train_v[4],
            lambda_s2: train_v[5],
            epochs: train_v[6] as usize,
            symbols_per_epoch: train_v[7] as usize,
            standardizer_warmup: train_v[8] as usize,
        };
        Ok(Self {
            params,
            feat_mean,
            feat_std,
            train,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())
            .with_context(|| format!("writing checkpoint {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading checkpoint {}", path.display()))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let params = MlpParams::random_init(31, 11, 0.37);
        let ck = Checkpoint {
            params,
            feat_mean: std::array::from_fn(|i| i as f64 * 0.1 - 0.73),
            feat_std: std::array::from_fn(|i| 1.0 + i as f64),
            train: TrainConfig::default(),
        };
        let text = ck.to_text();
        let back = Checkpoint::from_text(&text).unwrap();
        assert_eq!(ck, back);
    }

    #[test]
    fn header_mismatch_is_rejected() {
        assert!(Checkpoint::from_text("dmf-checkpoint v9\n").is_err());
        assert!(Checkpoint::from_text("").is_err());
    }
}

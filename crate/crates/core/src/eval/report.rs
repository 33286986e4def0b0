use serde::{Deserialize, Serialize};

use crate::error::{PcxError, Result};

/// Sample standard deviation (ddof = 1) over `sqrt(n)`; zero below two values.
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub method: String,
    pub prototypes: usize,
    pub seed: u64,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerScore {
    pub layer_index: usize,
    pub score: f64,
    pub standard_error: f64,
    pub samples: usize,
}

impl LayerScore {
    /// Score is the mean of `values`, SE their standard error.
    pub fn from_values(layer_index: usize, values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(PcxError::InvalidArgument(format!("no values for layer {layer_index}")));
        }
        Ok(Self {
            layer_index,
            score: values.iter().sum::<f64>() / values.len() as f64,
            standard_error: standard_error(values),
            samples: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub layers: Vec<LayerScore>,
    /// Mean of the per-layer scores.
    pub aggregate: f64,
    /// `sqrt(sum se^2) / L`, the SE of the layer mean under independence.
    pub standard_error: f64,
    pub config: EvalConfig,
    pub config_hash: String,
    pub sample_count: usize,
}

impl EvalReport {
    pub fn new(metric: &str, layers: Vec<LayerScore>, config: EvalConfig) -> Result<Self> {
        if layers.is_empty() {
            return Err(PcxError::InvalidArgument("report needs at least one layer".into()));
        }
        let l = layers.len() as f64;
        let aggregate = layers.iter().map(|s| s.score).sum::<f64>() / l;
        let standard_error = layers.iter().map(|s| s.standard_error.powi(2)).sum::<f64>().sqrt() / l;
        let sample_count = layers.iter().map(|s| s.samples).sum();
        Ok(Self {
            metric: metric.to_string(),
            aggregate,
            standard_error,
            config_hash: config_hash(&config),
            config,
            layers,
            sample_count,
        })
    }
}

/// FNV-1a over the config's canonical JSON, as 16 hex digits.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_error_matches_hand_value() {
        // sd of [1,2,3,4] with ddof 1 is sqrt(5/3)
        let se = standard_error(&[1.0, 2.0, 3.0, 4.0]);
        assert!((se - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(standard_error(&[7.0]), 0.0);
    }

    #[test]
    fn aggregate_is_layer_mean() {
        let cfg = EvalConfig {
            method: "lrp-eps".into(),
            prototypes: 8,
            seed: 1,
            folds: 10,
        };
        let r = EvalReport::new(
            "sparseness",
            vec![
                LayerScore::from_values(1, &[0.2, 0.4]).unwrap(),
                LayerScore::from_values(3, &[0.9]).unwrap(),
            ],
            cfg.clone(),
        )
        .unwrap();
        assert!((r.aggregate - (0.3 + 0.9) / 2.0).abs() < 1e-9);
        assert!(r.standard_error >= 0.0);
        assert_eq!(r.config_hash, config_hash(&cfg));
        let back: EvalReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}

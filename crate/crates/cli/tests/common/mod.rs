#![allow(dead_code)]

use std::path::{Path, PathBuf};

use clap::Parser;
use pcx_cli::manifest::{DatasetManifest, ManifestSample};
use pcx_cli::{run, Cli, CliResult};
use pcx_core::synth::{toy_network, Split};
use pcx_core::Tensor;

pub fn pcx(args: &[&str]) -> CliResult<String> {
    let cli = Cli::try_parse_from(std::iter::once("pcx").chain(args.iter().copied())).expect("arguments parse");
    run(cli)
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Paths of one synth -> attribute -> fit run.
pub struct Run {
    pub data: PathBuf,
    pub attr: PathBuf,
    pub store: PathBuf,
}

impl Run {
    pub fn in_dir(root: &Path) -> Self {
        Self {
            data: root.join("data"),
            attr: root.join("attr"),
            store: root.join("store"),
        }
    }

    pub fn net(&self) -> PathBuf {
        self.data.join("net.json")
    }

    pub fn manifest(&self) -> PathBuf {
        self.data.join("manifest.json")
    }

    pub fn split(&self, name: &str) -> PathBuf {
        self.data.join(format!("{name}.json"))
    }
}

/// Synthesizes data with `synth_args`, attributes every sample at the
/// default layer and fits `k` prototypes per class.
pub fn prepare(root: &Path, seed: &str, synth_args: &[&str], k: &str) -> Run {
    let r = Run::in_dir(root);
    let mut args = vec!["--seed", seed, "synth", "--out", s(&r.data)];
    args.extend_from_slice(synth_args);
    pcx(&args).expect("synth");
    pcx(&["attribute", "--net", s(&r.net()), "--manifest", s(&r.manifest()), "--out", s(&r.attr)]).expect("attribute");
    pcx(&["--seed", seed, "fit", "--attributions", s(&r.attr), "--k", k, "--out", s(&r.store)]).expect("fit");
    r
}

/// Writes `inputs` as a dataset for a `dense(I) -> relu -> dense(W)` net.
pub fn write_toy(dir: &Path, weights: &[Vec<f32>], inputs: &[(Vec<f32>, usize, Split)]) -> (PathBuf, PathBuf) {
    let classes = weights.len();
    let dim = weights[0].len();
    let net = toy_network(dim, classes, |c, j| weights[c][j]).unwrap();
    let net_path = dir.join("net.json");
    net.save(&net_path).unwrap();
    let samples = inputs
        .iter()
        .enumerate()
        .map(|(i, (x, label, split))| {
            let rel = format!("x{i}.pcxt");
            Tensor::from_vec(x.clone()).save(&dir.join(&rel)).unwrap();
            ManifestSample {
                id: format!("x{i}"),
                path: rel,
                label: *label,
                split: *split,
                strategy: None,
            }
        })
        .collect();
    let manifest_path = dir.join("manifest.json");
    DatasetManifest {
        class_count: classes,
        samples,
    }
    .save(&manifest_path)
    .unwrap();
    (net_path, manifest_path)
}

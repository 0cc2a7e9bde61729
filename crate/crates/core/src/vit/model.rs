use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::VitConfig;
use crate::error::{Error, Result};

pub const INIT_STDDEV: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct BlockOffsets {
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub wq: usize,
    pub wk: usize,
    pub wv: usize,
    pub wo: usize,
    pub ln2_g: usize,
    pub ln2_b: usize,
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct Offsets {
    pub patch_w: usize,
    pub patch_b: usize,
    pub cls: usize,
    pub pos: usize,
    pub blocks: Vec<BlockOffsets>,
    pub lnf_g: usize,
    pub lnf_b: usize,
    pub head_w: usize,
    pub head_b: usize,
}

/// Named tensors packed into one flat parameter vector.
#[derive(Clone, Debug)]
pub struct ParamLayout {
    specs: Vec<TensorSpec>,
    total: usize,
    pub(crate) off: Offsets,
}

impl ParamLayout {
    pub fn new(cfg: &VitConfig) -> Self {
        let (d, t, m) = (cfg.hidden_dim, cfg.token_count(), cfg.mlp_dim);
        let mut specs = Vec::new();
        let mut total = 0;
        let mut push = |name: String, shape: Vec<usize>| {
            let spec = TensorSpec {
                name,
                shape,
                offset: total,
            };
            total += spec.len();
            let off = spec.offset;
            specs.push(spec);
            off
        };
        let patch_w = push("patch_proj.weight".into(), vec![d, cfg.patch_dim()]);
        let patch_b = push("patch_proj.bias".into(), vec![d]);
        let cls = push("cls_token".into(), vec![d]);
        let pos = push("pos_embed".into(), vec![t, d]);
        let mut blocks = Vec::with_capacity(cfg.depth);
        for l in 0..cfg.depth {
            let p = |s: &str| format!("blocks.{l}.{s}");
            blocks.push(BlockOffsets {
                ln1_g: push(p("ln1.gain"), vec![d]),
                ln1_b: push(p("ln1.bias"), vec![d]),
                wq: push(p("attn.wq"), vec![d, d]),
                wk: push(p("attn.wk"), vec![d, d]),
                wv: push(p("attn.wv"), vec![d, d]),
                wo: push(p("attn.wo"), vec![d, d]),
                ln2_g: push(p("ln2.gain"), vec![d]),
                ln2_b: push(p("ln2.bias"), vec![d]),
                w1: push(p("mlp.w1"), vec![m, d]),
                b1: push(p("mlp.b1"), vec![m]),
                w2: push(p("mlp.w2"), vec![d, m]),
                b2: push(p("mlp.b2"), vec![d]),
            });
        }
        let lnf_g = push("final_ln.gain".into(), vec![d]);
        let lnf_b = push("final_ln.bias".into(), vec![d]);
        let head_w = push("head.weight".into(), vec![cfg.classes, d]);
        let head_b = push("head.bias".into(), vec![cfg.classes]);
        Self {
            specs,
            total,
            off: Offsets {
                patch_w,
                patch_b,
                cls,
                pos,
                blocks,
                lnf_g,
                lnf_b,
                head_w,
                head_b,
            },
        }
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn get(&self, name: &str) -> Option<&TensorSpec> {
        self.specs.iter().find(|s| s.name == name)
    }
}

#[derive(Clone, Debug)]
pub struct VitModel {
    config: VitConfig,
    layout: ParamLayout,
    pub(crate) params: Vec<f64>,
}

fn truncated_normal(rng: &mut impl Rng, std: f64) -> f64 {
    let normal = Normal::new(0.0, std).expect("positive stddev");
    loop {
        let x: f64 = normal.sample(rng);
        if x.abs() <= 2.0 * std {
            return x;
        }
    }
}

impl VitModel {
    /// Truncated-normal weights and positional embeddings, unit gains, zero biases and CLS token.
    pub fn init(config: VitConfig, rng: &mut impl Rng) -> Result<Self> {
        Self::init_with_stddev(config, INIT_STDDEV, rng)
    }

    pub fn init_with_stddev(config: VitConfig, std: f64, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        let mut params = vec![0.0; layout.total()];
        for spec in layout.specs() {
            let name = spec.name.as_str();
            let slice = &mut params[spec.range()];
            if name.ends_with(".gain") {
                slice.fill(1.0);
            } else if name.ends_with("weight") || name == "pos_embed" || is_matrix(name) {
                slice.iter_mut().for_each(|x| *x = truncated_normal(rng, std));
            }
        }
        Ok(Self { config, layout, params })
    }

    pub fn from_params(config: VitConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        if params.len() != layout.total() {
            return Err(Error::contract(format!(
                "{} parameters given; configuration needs {}",
                params.len(),
                layout.total()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite {
                layer: 0,
                stage: "parameters",
            });
        }
        Ok(Self { config, layout, params })
    }

    pub fn config(&self) -> &VitConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.layout.get(name).map(|s| &self.params[s.range()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.layout.get(name)?.range();
        Some(&mut self.params[range])
    }

    /// Classification head `(W_c, b_c)`, with `W_c` row-major `[classes, hidden]`.
    pub fn head(&self) -> (Vec<f64>, Vec<f64>) {
        let o = &self.layout.off;
        let (k, d) = (self.config.classes, self.config.hidden_dim);
        (
            self.params[o.head_w..o.head_w + k * d].to_vec(),
            self.params[o.head_b..o.head_b + k].to_vec(),
        )
    }
}

fn is_matrix(name: &str) -> bool {
    [".wq", ".wk", ".wv", ".wo", ".w1", ".w2"]
        .iter()
        .any(|s| name.ends_with(s))
}

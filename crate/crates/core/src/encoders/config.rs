use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Stride;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Gnn,
    Cnn,
    Rnn,
}

impl EncoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EncoderKind::Gnn => "gnn",
            EncoderKind::Cnn => "cnn",
            EncoderKind::Rnn => "rnn",
        }
    }
}

impl std::fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gnn" => Ok(EncoderKind::Gnn),
            "cnn" => Ok(EncoderKind::Cnn),
            "rnn" => Ok(EncoderKind::Rnn),
            other => Err(Error::Config(format!("unknown encoder kind {other:?}"))),
        }
    }
}

/// Nominal geometry of one gated convolution layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub n_filters: usize,
    pub filter_size: usize,
    pub stride: Stride,
}

impl ConvSpec {
    pub const fn new(n_filters: usize, filter_size: usize, stride: usize) -> Self {
        Self {
            n_filters,
            filter_size,
            stride: Stride::Step(stride),
        }
    }

    pub const fn full_span(n_filters: usize, filter_size: usize) -> Self {
        Self {
            n_filters,
            filter_size,
            stride: Stride::FullSpan,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnnConfig {
    pub annotation_conv: ConvSpec,
    pub hidden_conv: ConvSpec,
    /// Length of the zero-padded per-node state before its convolution.
    pub pad_len: usize,
    pub propagation_steps: usize,
    pub node_output_dim: usize,
    /// Convolutions applied to the flattened node outputs.
    pub trailing: Vec<ConvSpec>,
}

impl Default for GnnConfig {
    fn default() -> Self {
        Self {
            annotation_conv: ConvSpec::new(1, 2, 1),
            hidden_conv: ConvSpec::new(2, 10, 5),
            pad_len: 60,
            propagation_steps: 5,
            node_output_dim: 64,
            trailing: vec![
                ConvSpec::new(5, 4, 2),
                ConvSpec::new(10, 115, 5),
                ConvSpec::new(20, 60, 5),
                ConvSpec::full_span(40, 65),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnConfig {
    pub convs: Vec<ConvSpec>,
    pub pool_size: usize,
    pub pool_stride: usize,
    pub final_conv: ConvSpec,
}

impl CnnConfig {
    pub fn for_history(history_len: usize) -> Self {
        Self {
            convs: vec![ConvSpec::new(50, 5, 2), ConvSpec::new(50, 5, 2)],
            pool_size: 2,
            pool_stride: 2,
            final_conv: ConvSpec::full_span(50, (history_len / 4).max(1)),
        }
    }
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self::for_history(48)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RnnConfig {
    pub embed_dim: usize,
    pub hidden: usize,
}

impl Default for RnnConfig {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            hidden: 40,
        }
    }
}

/// Encoder architecture and sizes.
///
/// All three kinds carry their sections so one file can switch `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub history_len: usize,
    pub clusters: usize,
    #[serde(default)]
    pub gnn: GnnConfig,
    #[serde(default)]
    pub cnn: CnnConfig,
    #[serde(default)]
    pub rnn: RnnConfig,
    pub output_dim: usize,
}

impl EncoderConfig {
    /// Nominal architecture for `kind`.
    pub fn new(kind: EncoderKind, history_len: usize, clusters: usize) -> Self {
        let mut cfg = Self {
            kind,
            history_len,
            clusters,
            gnn: GnnConfig::default(),
            cnn: CnnConfig::for_history(history_len),
            rnn: RnnConfig::default(),
            output_dim: 0,
        };
        cfg.output_dim = match kind {
            EncoderKind::Gnn => cfg.gnn.trailing.last().map_or(0, |c| c.n_filters),
            EncoderKind::Cnn => cfg.cnn.final_conv.n_filters,
            EncoderKind::Rnn => cfg.rnn.hidden,
        };
        cfg
    }
}

/// Realized geometry of one layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerPlan {
    pub name: String,
    pub in_channels: usize,
    pub in_len: usize,
    pub filter_size: usize,
    pub stride: Stride,
    pub out_channels: usize,
    pub out_len: usize,
}

impl LayerPlan {
    pub fn out_size(&self) -> usize {
        self.out_channels * self.out_len
    }
}

/// Sizes of the graph stage of a GNN encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphPlan {
    pub hidden: usize,
    pub annotation_dim: usize,
    pub node_output_dim: usize,
    pub flattened_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapePlan {
    pub layers: Vec<LayerPlan>,
    pub graph: Option<GraphPlan>,
    pub code_len: usize,
}

impl ShapePlan {
    pub fn layer(&self, name: &str) -> Option<&LayerPlan> {
        self.layers.iter().find(|l| l.name == name)
    }
}

/// Realizes one convolution chain on an input of `in_len` positions.
///
/// Full-span layers take the whole remaining length. A nominal filter
/// longer than its input is tolerated only on the final layer of the
/// chain, which then becomes full-span.
fn plan_chain(
    prefix: &str,
    specs: &[ConvSpec],
    mut channels: usize,
    mut len: usize,
    final_is_last: bool,
) -> Result<Vec<LayerPlan>> {
    let mut out: Vec<LayerPlan> = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let last = final_is_last && i + 1 == specs.len();
        let (filter, stride) = match spec.stride {
            Stride::FullSpan => (len, Stride::FullSpan),
            Stride::Step(_) if spec.filter_size > len && last => (len, Stride::FullSpan),
            Stride::Step(0) => {
                return Err(Error::Config(format!("{prefix}[{i}]: stride must be at least 1")));
            }
            Stride::Step(s) if spec.filter_size <= len => (spec.filter_size, Stride::Step(s)),
            Stride::Step(_) => {
                let mut chain: Vec<String> = out
                    .iter()
                    .map(|l| format!("{}: len {} -> {}", l.name, l.in_len, l.out_len))
                    .collect();
                chain.push(format!(
                    "{prefix}[{i}]: filter {} exceeds input length {len}",
                    spec.filter_size
                ));
                return Err(Error::Config(format!(
                    "convolution chain does not fit: {}",
                    chain.join("; ")
                )));
            }
        };
        if filter == 0 || spec.n_filters == 0 {
            return Err(Error::Config(format!(
                "{prefix}[{i}]: empty layer (filter {filter}, {} filters)",
                spec.n_filters
            )));
        }
        let out_len = match stride {
            Stride::FullSpan => 1,
            Stride::Step(s) => (len - filter) / s + 1,
        };
        out.push(LayerPlan {
            name: format!("{prefix}[{i}]"),
            in_channels: channels,
            in_len: len,
            filter_size: filter,
            stride,
            out_channels: spec.n_filters,
            out_len,
        });
        channels = spec.n_filters;
        len = out_len;
    }
    Ok(out)
}

/// Realized per-layer shapes for `cfg`, checked against `cfg.output_dim`.
pub fn resolve_shapes(cfg: &EncoderConfig) -> Result<ShapePlan> {
    if cfg.history_len == 0 || cfg.clusters == 0 {
        return Err(Error::Config("history length and cluster count must be positive".into()));
    }
    if cfg.output_dim == 0 {
        return Err(Error::Config("encoder output dimension must be positive".into()));
    }
    let plan = match cfg.kind {
        EncoderKind::Gnn => {
            let g = &cfg.gnn;
            if g.pad_len < cfg.history_len {
                return Err(Error::Config(format!(
                    "padded state length {} is shorter than history {}",
                    g.pad_len, cfg.history_len
                )));
            }
            if g.node_output_dim == 0 {
                return Err(Error::Config("node output dimension must be positive".into()));
            }
            if g.trailing.is_empty() {
                return Err(Error::Config("GNN encoder needs at least one trailing convolution".into()));
            }
            let ann = plan_chain("annotation_conv", &[g.annotation_conv], 1, cfg.history_len, false)?;
            let hid = plan_chain("hidden_conv", &[g.hidden_conv], 1, g.pad_len, false)?;
            let graph = GraphPlan {
                hidden: hid[0].out_size(),
                annotation_dim: ann[0].out_size(),
                node_output_dim: g.node_output_dim,
                flattened_len: cfg.clusters * g.node_output_dim,
            };
            let trailing = plan_chain("trailing", &g.trailing, 1, graph.flattened_len, true)?;
            let code_len = trailing.last().map_or(0, LayerPlan::out_size);
            let mut layers = ann;
            layers.extend(hid);
            layers.extend(trailing);
            ShapePlan {
                layers,
                graph: Some(graph),
                code_len,
            }
        }
        EncoderKind::Cnn => {
            let c = &cfg.cnn;
            let mut layers = plan_chain("conv", &c.convs, cfg.clusters, cfg.history_len, false)?;
            let (ch, len) = layers
                .last()
                .map_or((cfg.clusters, cfg.history_len), |l| (l.out_channels, l.out_len));
            if c.pool_size == 0 || c.pool_stride == 0 || c.pool_size > len {
                return Err(Error::Config(format!(
                    "max pool of size {} / stride {} does not fit input length {len}",
                    c.pool_size, c.pool_stride
                )));
            }
            let pooled = (len - c.pool_size) / c.pool_stride + 1;
            layers.push(LayerPlan {
                name: "max_pool".into(),
                in_channels: ch,
                in_len: len,
                filter_size: c.pool_size,
                stride: Stride::Step(c.pool_stride),
                out_channels: ch,
                out_len: pooled,
            });
            layers.extend(plan_chain("final_conv", &[c.final_conv], ch, pooled, true)?);
            let code_len = layers.last().map_or(0, LayerPlan::out_size);
            ShapePlan {
                layers,
                graph: None,
                code_len,
            }
        }
        EncoderKind::Rnn => {
            if cfg.rnn.hidden == 0 || cfg.rnn.embed_dim == 0 {
                return Err(Error::Config("RNN encoder sizes must be positive".into()));
            }
            ShapePlan {
                layers: vec![LayerPlan {
                    name: "lstm".into(),
                    in_channels: cfg.clusters,
                    in_len: cfg.history_len,
                    filter_size: 1,
                    stride: Stride::Step(1),
                    out_channels: cfg.rnn.hidden,
                    out_len: 1,
                }],
                graph: None,
                code_len: cfg.rnn.hidden,
            }
        }
    };
    if plan.code_len != cfg.output_dim {
        return Err(Error::Config(format!(
            "encoder produces a code of length {} but output_dim is {}",
            plan.code_len, cfg.output_dim
        )));
    }
    Ok(plan)
}

//! Declarative network descriptions and their one-layer-per-line text form.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};
use crate::labels::Vocabulary;
use crate::layers::ConvSpec;
use crate::params::ParamKind;
use crate::scan::Direction;
use crate::tensor::Shape;

/// Stage-1 model variants compared in the ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Shallow CNN only.
    CnnS,
    /// Recurrent layer replaced by two 3x3x32 convolutions.
    CnnDeep,
    /// Ungated spatial RNN.
    Rnn,
    /// Spatially gated RNN.
    RnnG,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::CnnS, Variant::CnnDeep, Variant::Rnn, Variant::RnnG];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::CnnS => "CNN-S",
            Variant::CnnDeep => "CNN-Deep",
            Variant::Rnn => "RNN",
            Variant::RnnG => "RNN-G",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        Variant::ALL.into_iter().find(|v| v.tag().eq_ignore_ascii_case(s))
    }
}

/// Which network a spec describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetKind {
    Stage1(Variant),
    Eye,
    Nose,
    Mouth,
}

impl NetKind {
    pub fn tag(self) -> String {
        match self {
            NetKind::Stage1(v) => format!("stage1:{}", v.tag()),
            NetKind::Eye => "stage2:eye".into(),
            NetKind::Nose => "stage2:nose".into(),
            NetKind::Mouth => "stage2:mouth".into(),
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        match s {
            "stage2:eye" => Some(NetKind::Eye),
            "stage2:nose" => Some(NetKind::Nose),
            "stage2:mouth" => Some(NetKind::Mouth),
            _ => s.strip_prefix("stage1:").and_then(Variant::from_tag).map(NetKind::Stage1),
        }
    }

    pub fn is_stage1(self) -> bool {
        matches!(self, NetKind::Stage1(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeadKind {
    CoarseLabel,
    Gate,
    FinalLabel,
}

impl HeadKind {
    pub fn tag(self) -> &'static str {
        match self {
            HeadKind::CoarseLabel => "coarse_label",
            HeadKind::Gate => "gate",
            HeadKind::FinalLabel => "final_label",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        [HeadKind::CoarseLabel, HeadKind::Gate, HeadKind::FinalLabel].into_iter().find(|h| h.tag() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerOp {
    Conv { spec: ConvSpec, relu: bool },
    Deconv { spec: ConvSpec, relu: bool },
    Pool { window: usize, stride: usize },
    /// Channels `start..start + count` of the input.
    Slice { start: usize, count: usize },
    /// Four-directional recurrence; gated layers take the gate features as
    /// their second input.
    Srnn { channels: usize, gated: bool },
    Upsample { factor: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    pub name: String,
    pub op: LayerOp,
    pub inputs: Vec<String>,
}

/// Name of the network input tensor.
pub const INPUT: &str = "input";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub kind: NetKind,
    pub vocab: Vocabulary,
    /// Input channels, height, width.
    pub input: (usize, usize, usize),
    pub layers: Vec<Layer>,
    pub heads: Vec<(HeadKind, String)>,
}

/// Declared parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub dims: Vec<usize>,
    pub kind: ParamKind,
    /// Layer that owns the parameter.
    pub layer: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Census {
    pub conv: usize,
    pub pool: usize,
    pub deconv: usize,
    pub srnn: usize,
}

struct Builder {
    layers: Vec<Layer>,
}

impl Builder {
    fn push(&mut self, name: &str, op: LayerOp, inputs: &[&str]) -> String {
        self.layers.push(Layer {
            name: name.into(),
            op,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
        });
        name.into()
    }

    fn conv(&mut self, name: &str, input: &str, cin: usize, cout: usize, k: usize, relu: bool) -> String {
        self.push(name, LayerOp::Conv { spec: ConvSpec::same(cin, cout, k), relu }, &[input])
    }

    fn pool(&mut self, name: &str, input: &str) -> String {
        self.push(name, LayerOp::Pool { window: 2, stride: 2 }, &[input])
    }

    /// x2 learned upsampling: kernel 4, stride 2, pad 1.
    fn deconv(&mut self, name: &str, input: &str, cin: usize, cout: usize, relu: bool) -> String {
        self.push(name, LayerOp::Deconv { spec: ConvSpec::new(cin, cout, 4, 2, 1), relu }, &[input])
    }
}

/// Stage-1 face/hair/background network in its gated form.
pub fn build_stage1(num_classes: usize, input_size: usize) -> Result<NetworkSpec> {
    build_stage1_variant(Variant::RnnG, num_classes, input_size)
}

/// Stage-1 network for any ablation variant.
///
/// Square inputs that are a multiple of 4 up to 256 use the single-face
/// trunk; 512 selects the multi-face trunk with two extra 3x3x16 conv+pool
/// units and one extra deconvolution.
pub fn build_stage1_variant(variant: Variant, num_classes: usize, input_size: usize) -> Result<NetworkSpec> {
    let vocab = match num_classes {
        3 => Vocabulary::Coarse,
        11 => Vocabulary::Fine,
        n => return Err(Error::Unsupported(format!("{n}-class stage-1 network"))),
    };
    let multi_face = match input_size {
        512 => true,
        s if (16..=256).contains(&s) && s % 4 == 0 => false,
        s => return Err(Error::Unsupported(format!("stage-1 input size {s}"))),
    };
    let mut b = Builder { layers: Vec::new() };
    let mut t = b.conv("conv1", INPUT, 3, 16, 5, true);
    t = b.pool("pool2", &t);
    if multi_face {
        t = b.conv("conv2a", &t, 16, 16, 3, true);
        t = b.pool("pool2a", &t);
        t = b.conv("conv2b", &t, 16, 16, 3, true);
        t = b.pool("pool2b", &t);
    }
    t = b.conv("conv3", &t, 16, 32, 3, true);
    t = b.pool("pool4", &t);
    t = b.conv("conv5", &t, 32, 32, 3, true);
    if multi_face {
        t = b.deconv("deconv5a", &t, 32, 32, true);
    }
    let c = num_classes;
    let mut heads = Vec::new();
    let final_map = match variant {
        Variant::RnnG => {
            let d6 = b.deconv("deconv6", &t, 32, 16, false);
            let x = b.push("x_split", LayerOp::Slice { start: 0, count: 8 }, &[&d6]);
            let g = b.push("g_split", LayerOp::Slice { start: 8, count: 8 }, &[&d6]);
            heads.push((HeadKind::CoarseLabel, b.conv("coarse", &x, 8, c, 3, false)));
            heads.push((HeadKind::Gate, b.conv("gate", &g, 8, 1, 1, false)));
            let h = b.push("srnn", LayerOp::Srnn { channels: 8, gated: true }, &[&x, &g]);
            b.conv("classify", &h, 8, c, 1, false)
        }
        Variant::Rnn => {
            let d6 = b.deconv("deconv6", &t, 32, 8, false);
            heads.push((HeadKind::CoarseLabel, b.conv("coarse", &d6, 8, c, 3, false)));
            let h = b.push("srnn", LayerOp::Srnn { channels: 8, gated: false }, &[&d6]);
            b.conv("classify", &h, 8, c, 1, false)
        }
        Variant::CnnS => {
            let d6 = b.deconv("deconv6", &t, 32, 8, false);
            b.conv("classify", &d6, 8, c, 3, false)
        }
        Variant::CnnDeep => {
            let d6 = b.deconv("deconv6", &t, 32, 16, true);
            heads.push((HeadKind::CoarseLabel, b.conv("coarse", &d6, 16, c, 3, false)));
            let e1 = b.conv("deep1", &d6, 16, 32, 3, true);
            let e2 = b.conv("deep2", &e1, 32, 32, 3, true);
            b.conv("classify", &e2, 32, c, 1, false)
        }
    };
    let factor = if multi_face { 4 } else { 2 };
    let up = b.push("final", LayerOp::Upsample { factor }, &[&final_map]);
    heads.push((HeadKind::FinalLabel, up));
    let spec = NetworkSpec {
        kind: NetKind::Stage1(variant),
        vocab,
        input: (3, input_size, input_size),
        layers: b.layers,
        heads,
    };
    spec.infer_shapes(1)?;
    Ok(spec)
}

/// Stage-2 component network: five convolutions, two poolings, two
/// deconvolutions, no recurrent layer.
pub fn build_stage2(kind: NetKind) -> Result<NetworkSpec> {
    let (vocab, h, w) = match kind {
        NetKind::Eye => (Vocabulary::Eye, 64, 64),
        NetKind::Nose => (Vocabulary::Nose, 64, 64),
        NetKind::Mouth => (Vocabulary::Mouth, 32, 64),
        NetKind::Stage1(_) => return Err(Error::Unsupported("stage-1 kind passed to build_stage2".into())),
    };
    let c = vocab.len();
    let mut b = Builder { layers: Vec::new() };
    let mut t = b.conv("conv1", INPUT, 3, 16, 5, true);
    t = b.pool("pool1", &t);
    t = b.conv("conv2", &t, 16, 32, 3, true);
    t = b.pool("pool2", &t);
    t = b.conv("conv3", &t, 32, 32, 3, true);
    t = b.deconv("deconv1", &t, 32, 32, true);
    t = b.conv("conv4", &t, 32, 16, 3, true);
    t = b.deconv("deconv2", &t, 16, 16, true);
    let out = b.conv("classify", &t, 16, c, 3, false);
    let spec = NetworkSpec {
        kind,
        vocab,
        input: (3, h, w),
        layers: b.layers,
        heads: vec![(HeadKind::FinalLabel, out)],
    };
    spec.infer_shapes(1)?;
    Ok(spec)
}

impl NetworkSpec {
    pub fn classes(&self) -> usize {
        self.vocab.len()
    }

    pub fn census(&self) -> Census {
        let mut c = Census::default();
        for l in &self.layers {
            match l.op {
                LayerOp::Conv { .. } => c.conv += 1,
                LayerOp::Deconv { .. } => c.deconv += 1,
                LayerOp::Pool { .. } => c.pool += 1,
                LayerOp::Srnn { .. } => c.srnn += 1,
                _ => {}
            }
        }
        c
    }

    pub fn head(&self, kind: HeadKind) -> Option<&str> {
        self.heads.iter().find(|(k, _)| *k == kind).map(|(_, n)| n.as_str())
    }

    /// Resolves tensor names to value slots: slot 0 is the input, slot
    /// `i + 1` the output of layer `i`.
    pub fn slot_of(&self, name: &str) -> Option<usize> {
        if name == INPUT {
            return Some(0);
        }
        self.layers.iter().position(|l| l.name == name).map(|i| i + 1)
    }

    /// Shape of every value slot for a batch of `n`; fails on any mismatch.
    pub fn infer_shapes(&self, n: usize) -> Result<Vec<Shape>> {
        let (c, h, w) = self.input;
        let mut shapes = vec![Shape::new(n, c, h, w)];
        for (i, l) in self.layers.iter().enumerate() {
            if self.layers[..i].iter().any(|p| p.name == l.name) || l.name == INPUT {
                return Err(Error::Config(format!("duplicate layer name {}", l.name)));
            }
            let mut ins = Vec::with_capacity(l.inputs.len());
            for name in &l.inputs {
                match self.slot_of(name) {
                    Some(s) if s <= i => ins.push(shapes[s]),
                    _ => return Err(Error::Config(format!("layer {} reads unknown or later tensor {name}", l.name))),
                }
            }
            let arity = if let LayerOp::Srnn { gated: true, .. } = l.op { 2 } else { 1 };
            if ins.len() != arity {
                return Err(Error::Config(format!("layer {} expects {arity} inputs", l.name)));
            }
            let x = ins[0];
            let mismatch = |what: &str| Error::Shape(format!("layer {}: {what} (input {x})", l.name));
            let out = match l.op {
                LayerOp::Conv { spec, .. } => {
                    if x.c != spec.in_channels {
                        return Err(mismatch("channel count"));
                    }
                    let (ho, wo) = spec.output_extent(x.h, x.w)?;
                    Shape::new(n, spec.out_channels, ho, wo)
                }
                LayerOp::Deconv { spec, .. } => {
                    if x.c != spec.in_channels {
                        return Err(mismatch("channel count"));
                    }
                    let (ho, wo) = spec.transposed_extent(x.h, x.w)?;
                    Shape::new(n, spec.out_channels, ho, wo)
                }
                LayerOp::Pool { window, stride } => {
                    if window == 0 || stride == 0 || x.h % stride != 0 || x.w % stride != 0 || x.h < window || x.w < window {
                        return Err(mismatch("pool extent"));
                    }
                    Shape::new(n, x.c, (x.h - window) / stride + 1, (x.w - window) / stride + 1)
                }
                LayerOp::Slice { start, count } => {
                    if count == 0 || start + count > x.c {
                        return Err(mismatch("channel slice"));
                    }
                    x.with_channels(count)
                }
                LayerOp::Srnn { channels, .. } => {
                    if x.c != channels || ins.iter().any(|s| *s != x) {
                        return Err(mismatch("recurrent inputs"));
                    }
                    x
                }
                LayerOp::Upsample { factor } => {
                    if factor == 0 {
                        return Err(mismatch("upsample factor"));
                    }
                    Shape::new(n, x.c, x.h * factor, x.w * factor)
                }
            };
            shapes.push(out);
        }
        if self.layers.iter().filter(|l| matches!(l.op, LayerOp::Srnn { .. })).count() > 1 {
            return Err(Error::Config("at most one recurrent layer per network".into()));
        }
        for (kind, name) in &self.heads {
            let slot = self
                .slot_of(name)
                .ok_or_else(|| Error::Config(format!("head {} names unknown tensor {name}", kind.tag())))?;
            let s = shapes[slot];
            let want = if *kind == HeadKind::Gate { 1 } else { self.classes() };
            if s.c != want {
                return Err(Error::Shape(format!("head {} has {} channels, expected {want}", kind.tag(), s.c)));
            }
            if h % s.h != 0 || w % s.w != 0 || h / s.h != w / s.w {
                return Err(Error::Shape(format!("head {} extent {}x{} does not divide the input", kind.tag(), s.h, s.w)));
            }
        }
        if self.head(HeadKind::FinalLabel).is_none() {
            return Err(Error::Config("network has no final_label head".into()));
        }
        Ok(shapes)
    }

    /// Learnable parameters in a fixed order.
    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            match l.op {
                LayerOp::Conv { spec, .. } | LayerOp::Deconv { spec, .. } => {
                    let transposed = matches!(l.op, LayerOp::Deconv { .. });
                    let ws = spec.weight_shape(transposed);
                    out.push(ParamSpec {
                        name: format!("{}.weight", l.name),
                        dims: vec![ws.n, ws.c, ws.h, ws.w],
                        kind: ParamKind::Weight,
                        layer: i,
                    });
                    out.push(ParamSpec {
                        name: format!("{}.bias", l.name),
                        dims: vec![spec.out_channels],
                        kind: ParamKind::Bias,
                        layer: i,
                    });
                }
                LayerOp::Srnn { channels, .. } => {
                    for dir in Direction::ALL {
                        out.push(ParamSpec {
                            name: format!("{}.{}.omega", l.name, dir.tag()),
                            dims: vec![channels, channels],
                            kind: ParamKind::Transition,
                            layer: i,
                        });
                        out.push(ParamSpec {
                            name: format!("{}.{}.bias", l.name, dir.tag()),
                            dims: vec![channels],
                            kind: ParamKind::Bias,
                            layer: i,
                        });
                    }
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_specs().iter().map(|p| p.dims.iter().product::<usize>()).sum()
    }

    /// One layer per line; parsed back by [`NetworkSpec::from_text`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let (c, h, w) = self.input;
        let _ = writeln!(s, "net {}", self.kind.tag());
        let _ = writeln!(s, "vocab {}", self.vocab.tag());
        let _ = writeln!(s, "input {c}x{h}x{w}");
        for l in &self.layers {
            let ins = l.inputs.join(",");
            let relu = |r: bool| if r { " relu" } else { "" };
            let _ = match l.op {
                LayerOp::Conv { spec, relu: r } => writeln!(
                    s,
                    "{} = conv({ins}) {}->{} k={}x{} s={} p={}{}",
                    l.name, spec.in_channels, spec.out_channels, spec.kernel_h, spec.kernel_w, spec.stride, spec.padding, relu(r)
                ),
                LayerOp::Deconv { spec, relu: r } => writeln!(
                    s,
                    "{} = deconv({ins}) {}->{} k={}x{} s={} p={}{}",
                    l.name, spec.in_channels, spec.out_channels, spec.kernel_h, spec.kernel_w, spec.stride, spec.padding, relu(r)
                ),
                LayerOp::Pool { window, stride } => writeln!(s, "{} = maxpool({ins}) w={window} s={stride}", l.name),
                LayerOp::Slice { start, count } => writeln!(s, "{} = slice({ins}) {}..{}", l.name, start, start + count),
                LayerOp::Srnn { channels, gated } => {
                    writeln!(s, "{} = {}({ins}) d={channels}", l.name, if gated { "srnn_gated" } else { "srnn_plain" })
                }
                LayerOp::Upsample { factor } => writeln!(s, "{} = bilinear({ins}) x{factor}", l.name),
            };
        }
        for (k, n) in &self.heads {
            let _ = writeln!(s, "head {} {n}", k.tag());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<NetworkSpec> {
        let mut kind = None;
        let mut vocab = None;
        let mut input = None;
        let mut layers = Vec::new();
        let mut heads = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |msg: &str| Error::Parse { line: idx + 1, msg: msg.into() };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("net ") {
                kind = Some(NetKind::from_tag(rest.trim()).ok_or_else(|| err("unknown network kind"))?);
            } else if let Some(rest) = line.strip_prefix("vocab ") {
                vocab = Some(Vocabulary::from_tag(rest.trim()).ok_or_else(|| err("unknown vocabulary"))?);
            } else if let Some(rest) = line.strip_prefix("input ") {
                let dims: Vec<usize> = rest.trim().split('x').map(|v| v.parse().map_err(|_| err("bad input extent"))).collect::<Result<_>>()?;
                if dims.len() != 3 {
                    return Err(err("input needs CxHxW"));
                }
                input = Some((dims[0], dims[1], dims[2]));
            } else if let Some(rest) = line.strip_prefix("head ") {
                let mut it = rest.split_whitespace();
                let k = it.next().and_then(HeadKind::from_tag).ok_or_else(|| err("unknown head"))?;
                let n = it.next().ok_or_else(|| err("head without tensor"))?;
                heads.push((k, n.to_string()));
            } else {
                layers.push(parse_layer(line).map_err(|m| err(&m))?);
            }
        }
        let missing = |what: &str| Error::Parse { line: 0, msg: format!("missing {what} line") };
        let spec = NetworkSpec {
            kind: kind.ok_or_else(|| missing("net"))?,
            vocab: vocab.ok_or_else(|| missing("vocab"))?,
            input: input.ok_or_else(|| missing("input"))?,
            layers,
            heads,
        };
        spec.infer_shapes(1)?;
        Ok(spec)
    }
}

fn parse_layer(line: &str) -> core::result::Result<Layer, String> {
    let (name, rest) = line.split_once('=').ok_or("expected `name = op(inputs) ...`")?;
    let rest = rest.trim();
    let open = rest.find('(').ok_or("missing (")?;
    let close = rest.find(')').ok_or("missing )")?;
    let op_name = rest[..open].trim();
    let inputs: Vec<String> = rest[open + 1..close].split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    let args: Vec<&str> = rest[close + 1..].split_whitespace().collect();
    let num = |s: &str| s.parse::<usize>().map_err(|_| format!("bad number {s:?}"));
    let kv = |key: &str| -> core::result::Result<&str, String> {
        args.iter().find_map(|a| a.strip_prefix(key).and_then(|v| v.strip_prefix('='))).ok_or(format!("missing {key}="))
    };
    let conv_spec = || -> core::result::Result<ConvSpec, String> {
        let (cin, cout) = args.first().and_then(|a| a.split_once("->")).ok_or("missing in->out")?;
        let (kh, kw) = kv("k")?.split_once('x').ok_or("kernel must be HxW")?;
        Ok(ConvSpec {
            in_channels: num(cin)?,
            out_channels: num(cout)?,
            kernel_h: num(kh)?,
            kernel_w: num(kw)?,
            stride: num(kv("s")?)?,
            padding: num(kv("p")?)?,
        })
    };
    let relu = args.contains(&"relu");
    let op = match op_name {
        "conv" => LayerOp::Conv { spec: conv_spec()?, relu },
        "deconv" => LayerOp::Deconv { spec: conv_spec()?, relu },
        "maxpool" => LayerOp::Pool { window: num(kv("w")?)?, stride: num(kv("s")?)? },
        "slice" => {
            let (a, b) = args.first().and_then(|r| r.split_once("..")).ok_or("slice needs a..b")?;
            let (a, b) = (num(a)?, num(b)?);
            if b <= a {
                return Err("empty slice".into());
            }
            LayerOp::Slice { start: a, count: b - a }
        }
        "srnn_gated" | "srnn_plain" => LayerOp::Srnn { channels: num(kv("d")?)?, gated: op_name == "srnn_gated" },
        "bilinear" => LayerOp::Upsample { factor: num(args.first().and_then(|a| a.strip_prefix('x')).ok_or("missing xN")?)? },
        other => return Err(format!("unknown op {other}")),
    };
    Ok(Layer { name: name.trim().into(), op, inputs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage1_shapes() {
        let spec = build_stage1(3, 128).unwrap();
        let shapes = spec.infer_shapes(4).unwrap();
        let fin = shapes[spec.slot_of(spec.head(HeadKind::FinalLabel).unwrap()).unwrap()];
        assert_eq!(fin, Shape::new(4, 3, 128, 128));
        let gate = shapes[spec.slot_of(spec.head(HeadKind::Gate).unwrap()).unwrap()];
        assert_eq!(gate, Shape::new(4, 1, 64, 64));
        let d6 = shapes[spec.slot_of("deconv6").unwrap()];
        assert_eq!(d6.c, 16);
        assert_eq!(spec.census(), Census { conv: 6, pool: 2, deconv: 1, srnn: 1 });
    }

    #[test]
    fn stage1_parameter_budget() {
        // conv1 1216 + conv3 4640 + conv5 9248 + deconv6 8208 + coarse 219
        // + gate 9 + srnn 4 * (64 + 8) + classify 27
        let spec = build_stage1(3, 128).unwrap();
        assert_eq!(spec.param_count(), 23_855);
        assert!(spec.param_count() <= 120_000);
    }

    #[test]
    fn multi_face_trunk() {
        let spec = build_stage1(3, 512).unwrap();
        let shapes = spec.infer_shapes(1).unwrap();
        assert_eq!(*shapes.last().unwrap(), Shape::new(1, 3, 512, 512));
        let c = spec.census();
        assert_eq!((c.pool, c.deconv), (4, 2));
        assert!(matches!(build_stage1(3, 130), Err(Error::Unsupported(_))));
        assert!(matches!(build_stage1(4, 128), Err(Error::Unsupported(_))));
    }

    #[test]
    fn variants() {
        let s = build_stage1_variant(Variant::CnnS, 3, 64).unwrap();
        assert_eq!(s.census().srnn, 0);
        assert_eq!(s.heads.len(), 1);
        let d = build_stage1_variant(Variant::CnnDeep, 3, 64).unwrap();
        assert_eq!(d.census().srnn, 0);
        assert_eq!(d.census().conv, build_stage1_variant(Variant::CnnS, 3, 64).unwrap().census().conv + 3);
        let r = build_stage1_variant(Variant::Rnn, 3, 64).unwrap();
        assert!(r.layers.iter().any(|l| l.op == LayerOp::Srnn { channels: 8, gated: false }));
        assert!(r.head(HeadKind::Gate).is_none());
    }

    #[test]
    fn stage2_geometry() {
        let eye = build_stage2(NetKind::Eye).unwrap();
        assert_eq!(*eye.infer_shapes(1).unwrap().last().unwrap(), Shape::new(1, 3, 64, 64));
        let mouth = build_stage2(NetKind::Mouth).unwrap();
        assert_eq!(*mouth.infer_shapes(1).unwrap().last().unwrap(), Shape::new(1, 4, 32, 64));
        let nose = build_stage2(NetKind::Nose).unwrap();
        assert_eq!(nose.classes(), 2);
        for s in [eye, mouth, nose] {
            assert_eq!(s.census(), Census { conv: 5, pool: 2, deconv: 2, srnn: 0 });
        }
        assert!(build_stage2(NetKind::Stage1(Variant::RnnG)).is_err());
    }

    #[test]
    fn text_round_trip() {
        for spec in [
            build_stage1(3, 128).unwrap(),
            build_stage1_variant(Variant::CnnDeep, 11, 64).unwrap(),
            build_stage1(3, 512).unwrap(),
            build_stage2(NetKind::Mouth).unwrap(),
        ] {
            let text = spec.to_text();
            assert_eq!(NetworkSpec::from_text(&text).unwrap(), spec, "{text}");
        }
    }

    #[test]
    fn text_errors() {
        assert!(matches!(NetworkSpec::from_text("vocab coarse\ninput 3x8x8\n"), Err(Error::Parse { .. })));
        let bad = build_stage1(3, 64).unwrap().to_text().replace("conv3 = conv(pool2) 16->32", "conv3 = conv(pool2) 15->32");
        assert!(matches!(NetworkSpec::from_text(&bad), Err(Error::Shape(_))));
    }
}

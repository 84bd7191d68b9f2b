use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Output head of the encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Classify { classes: usize },
    Regress,
}

impl Task {
    pub fn outputs(&self) -> usize {
        match *self {
            Task::Classify { classes } => classes,
            Task::Regress => 1,
        }
    }
}

/// Weights of one attention + feed-forward layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    /// Node projection aggregated into hyperedges.
    pub wn: Matrix,
    /// Construction-side query for node-level attention.
    pub wc: Matrix,
    /// Node-side key for node-level attention.
    pub ws: Matrix,
    /// Construction embedding injection into hyperedge states.
    pub wg: Matrix,
    /// Hyperedge projection fused back into nodes.
    pub we: Matrix,
    /// Node-side query for edge-level attention.
    pub wo: Matrix,
    /// Hyperedge-side key for edge-level attention.
    pub wr: Matrix,
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub ln_gain: Vec<f64>,
    pub ln_bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Head {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelDims {
    pub d: usize,
    pub d_ff: usize,
    pub vocab: usize,
    pub layers: usize,
    pub task: Task,
    /// Added to the variance inside layer norm.
    pub ln_eps: f64,
}

impl ModelDims {
    /// One layer, `d_ff = 4 d`, `ln_eps = 1e-5`.
    pub fn new(d: usize, vocab: usize, task: Task) -> Self {
        ModelDims {
            d,
            d_ff: 4 * d,
            vocab,
            layers: 1,
            task,
            ln_eps: 1e-5,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d_ff == 0 || self.layers == 0 || self.task.outputs() == 0 {
            return Err(Error::Dimension("d, d_ff, layers and outputs must be at least 1".into()));
        }
        if !(self.ln_eps.is_finite() && self.ln_eps >= 0.0) {
            return Err(Error::Config("ln_eps must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RHgatParams {
    pub dims: ModelDims,
    pub seed: u64,
    pub layers: Vec<LayerParams>,
    /// Construction embedding table, one row per inventory entry.
    pub ec: Matrix,
    pub head: Head,
}

fn xavier(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound))
}

impl LayerParams {
    fn init(d: usize, d_ff: usize, rng: &mut ChaCha8Rng) -> Self {
        LayerParams {
            wn: xavier(d, d, rng),
            wc: xavier(d, d, rng),
            ws: xavier(d, d, rng),
            wg: xavier(d, d, rng),
            we: xavier(d, d, rng),
            wo: xavier(d, d, rng),
            wr: xavier(d, d, rng),
            w1: xavier(d_ff, d, rng),
            b1: vec![0.0; d_ff],
            w2: xavier(d, d_ff, rng),
            b2: vec![0.0; d],
            ln_gain: vec![1.0; d],
            ln_bias: vec![0.0; d],
        }
    }

    fn zeros(d: usize, d_ff: usize) -> Self {
        LayerParams {
            wn: Matrix::zeros(d, d),
            wc: Matrix::zeros(d, d),
            ws: Matrix::zeros(d, d),
            wg: Matrix::zeros(d, d),
            we: Matrix::zeros(d, d),
            wo: Matrix::zeros(d, d),
            wr: Matrix::zeros(d, d),
            w1: Matrix::zeros(d_ff, d),
            b1: vec![0.0; d_ff],
            w2: Matrix::zeros(d, d_ff),
            b2: vec![0.0; d],
            ln_gain: vec![0.0; d],
            ln_bias: vec![0.0; d],
        }
    }

    fn tensors(&self) -> [(&'static str, &[f64]); 13] {
        [
            ("wn", self.wn.as_slice()),
            ("wc", self.wc.as_slice()),
            ("ws", self.ws.as_slice()),
            ("wg", self.wg.as_slice()),
            ("we", self.we.as_slice()),
            ("wo", self.wo.as_slice()),
            ("wr", self.wr.as_slice()),
            ("w1", self.w1.as_slice()),
            ("b1", &self.b1),
            ("w2", self.w2.as_slice()),
            ("b2", &self.b2),
            ("ln_gain", &self.ln_gain),
            ("ln_bias", &self.ln_bias),
        ]
    }

    fn tensors_mut(&mut self) -> [(&'static str, &mut [f64]); 13] {
        [
            ("wn", self.wn.as_mut_slice()),
            ("wc", self.wc.as_mut_slice()),
            ("ws", self.ws.as_mut_slice()),
            ("wg", self.wg.as_mut_slice()),
            ("we", self.we.as_mut_slice()),
            ("wo", self.wo.as_mut_slice()),
            ("wr", self.wr.as_mut_slice()),
            ("w1", self.w1.as_mut_slice()),
            ("b1", &mut self.b1),
            ("w2", self.w2.as_mut_slice()),
            ("b2", &mut self.b2),
            ("ln_gain", &mut self.ln_gain),
            ("ln_bias", &mut self.ln_bias),
        ]
    }
}

const MAGIC: &[u8; 8] = b"RHGATPR1";

impl RHgatParams {
    /// Xavier-uniform weights, zero biases, unit layer-norm gain and `Ec` rows
    /// drawn from a standard normal scaled by `1/sqrt(d)`.
    pub fn init(dims: ModelDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = (0..dims.layers)
            .map(|_| LayerParams::init(dims.d, dims.d_ff, &mut rng))
            .collect();
        let scale = 1.0 / (dims.d as f64).sqrt();
        let ec = Matrix::from_fn(dims.vocab, dims.d, |_, _| {
            rng.sample::<f64, _>(StandardNormal) * scale
        });
        let outputs = dims.task.outputs();
        let head = Head {
            weight: xavier(outputs, dims.d, &mut rng),
            bias: vec![0.0; outputs],
        };
        Ok(RHgatParams {
            dims,
            seed,
            layers,
            ec,
            head,
        })
    }

    /// Same shapes, every value zero; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let d = self.dims.d;
        let outputs = self.dims.task.outputs();
        RHgatParams {
            dims: self.dims,
            seed: self.seed,
            layers: (0..self.dims.layers)
                .map(|_| LayerParams::zeros(d, self.dims.d_ff))
                .collect(),
            ec: Matrix::zeros(self.dims.vocab, d),
            head: Head {
                weight: Matrix::zeros(outputs, d),
                bias: vec![0.0; outputs],
            },
        }
    }

    /// Every tensor in serialization order, named `layer{l}.{field}`, `ec`,
    /// `head.weight`, `head.bias`.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for (name, t) in layer.tensors() {
                out.push((format!("layer{l}.{name}"), t));
            }
        }
        out.push(("ec".into(), self.ec.as_slice()));
        out.push(("head.weight".into(), self.head.weight.as_slice()));
        out.push(("head.bias".into(), &self.head.bias[..]));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (name, t) in layer.tensors_mut() {
                out.push((format!("layer{l}.{name}"), t));
            }
        }
        out.push(("ec".into(), self.ec.as_mut_slice()));
        out.push(("head.weight".into(), self.head.weight.as_mut_slice()));
        out.push(("head.bias".into(), &mut self.head.bias[..]));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, scale: f64, other: &RHgatParams) {
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (a, b) in dst.iter_mut().zip(src) {
                *a += scale * b;
            }
        }
    }

    /// Header (magic, dims, |V|, layer count, task, seed, ln_eps) followed by
    /// every tensor as row-major little-endian `f64`.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        let (kind, outputs) = match self.dims.task {
            Task::Classify { classes } => (0u64, classes as u64),
            Task::Regress => (1u64, 1u64),
        };
        for v in [
            self.dims.d as u64,
            self.dims.d_ff as u64,
            self.dims.vocab as u64,
            self.dims.layers as u64,
            kind,
            outputs,
            self.seed,
        ] {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&self.dims.ln_eps.to_le_bytes())?;
        for (_, t) in self.tensors() {
            for v in t {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Config("not a parameter file (bad magic)".into()));
        }
        let mut word = [0u8; 8];
        let mut next_u64 = |input: &mut R| -> Result<u64> {
            input.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let mut header = [0u64; 7];
        for h in header.iter_mut() {
            *h = next_u64(&mut input)?;
        }
        let ln_eps = f64::from_bits(next_u64(&mut input)?);
        let [d, d_ff, vocab, layers, kind, outputs, seed] = header;
        let task = match kind {
            0 => Task::Classify {
                classes: outputs as usize,
            },
            1 if outputs == 1 => Task::Regress,
            _ => return Err(Error::Config(format!("unknown task kind {kind}"))),
        };
        let dims = ModelDims {
            d: d as usize,
            d_ff: d_ff as usize,
            vocab: vocab as usize,
            layers: layers as usize,
            task,
            ln_eps,
        };
        dims.validate()?;
        let mut params = RHgatParams {
            dims,
            seed,
            layers: Vec::new(),
            ec: Matrix::zeros(0, 0),
            head: Head {
                weight: Matrix::zeros(0, 0),
                bias: Vec::new(),
            },
        }
        .zeros_like();
        for (_, t) in params.tensors_mut() {
            for v in t.iter_mut() {
                input.read_exact(&mut word)?;
                *v = f64::from_le_bytes(word);
            }
        }
        let mut rest = Vec::new();
        input.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Config("trailing bytes after parameters".into()));
        }
        Ok(params)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }
}

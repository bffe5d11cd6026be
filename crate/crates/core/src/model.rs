//! Representation encoder plus two outcome heads, with hand-derived
//! backpropagation.
//!
//! One shared encoder produces the representation for both groups; group
//! identity enters through head selection (and prototype bookkeeping), never
//! through separate encoders. The two heads share no parameters, so head-1
//! outputs are invariant to head-0 parameters and vice versa.

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    /// Dimension of the representation space; must equal the last encoder width.
    pub repr_dim: usize,
    /// Output width of each encoder layer.
    pub encoder_layers: Vec<usize>,
    /// Output width of each head layer; the last must be 1.
    pub head_layers: Vec<usize>,
    pub activation: Activation,
    pub init_scale: f64,
}

impl ModelConfig {
    /// Conventional default architecture: three 200-unit encoder layers and
    /// three 100-unit head layers under ELU.
    pub fn defaults(input_dim: usize) -> Self {
        ModelConfig {
            input_dim,
            repr_dim: 200,
            encoder_layers: vec![200, 200, 200],
            head_layers: vec![100, 100, 1],
            activation: Activation::elu(),
            init_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.repr_dim == 0 {
            return Err(Error::Config("input_dim and repr_dim must be at least 1".to_string()));
        }
        if self.encoder_layers.is_empty() || self.head_layers.is_empty() {
            return Err(Error::Config("encoder and heads need at least one layer".to_string()));
        }
        if self.encoder_layers.contains(&0) || self.head_layers.contains(&0) {
            return Err(Error::Config("layer widths must be at least 1".to_string()));
        }
        if *self.encoder_layers.last().unwrap() != self.repr_dim {
            return Err(Error::Config(format!(
                "last encoder width {} must equal repr_dim {}",
                self.encoder_layers.last().unwrap(),
                self.repr_dim
            )));
        }
        if *self.head_layers.last().unwrap() != 1 {
            return Err(Error::Config("heads must end in a single scalar output".to_string()));
        }
        if let Activation::Elu { alpha } = self.activation {
            if alpha <= 0.0 {
                return Err(Error::Config(format!("elu alpha must be positive, got {alpha}")));
            }
        }
        if self.init_scale <= 0.0 {
            return Err(Error::Config("init_scale must be positive".to_string()));
        }
        Ok(())
    }

    fn encoder_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.input_dim;
        for &w in &self.encoder_layers {
            dims.push((prev, w));
            prev = w;
        }
        dims
    }

    fn head_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.repr_dim;
        for &w in &self.head_layers {
            dims.push((prev, w));
            prev = w;
        }
        dims
    }
}

/// One dense layer: weights are in x out, bias is 1 x out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Matrix,
    pub b: Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub encoder: Vec<Layer>,
    pub head0: Vec<Layer>,
    pub head1: Vec<Layer>,
}

impl ModelParams {
    pub fn is_finite(&self) -> bool {
        self.blocks().all(|layer| layer.w.is_finite() && layer.b.is_finite())
    }

    pub fn blocks(&self) -> impl Iterator<Item = &Layer> {
        self.encoder.iter().chain(self.head0.iter()).chain(self.head1.iter())
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = &mut Layer> {
        self.encoder
            .iter_mut()
            .chain(self.head0.iter_mut())
            .chain(self.head1.iter_mut())
    }

    fn zeros_like(&self) -> ModelParams {
        let z = |layers: &Vec<Layer>| {
            layers
                .iter()
                .map(|l| Layer {
                    w: Matrix::zeros(l.w.rows(), l.w.cols()),
                    b: Matrix::zeros(l.b.rows(), l.b.cols()),
                })
                .collect()
        };
        ModelParams {
            encoder: z(&self.encoder),
            head0: z(&self.head0),
            head1: z(&self.head1),
        }
    }
}

/// Gradients with the same block structure as [`ModelParams`].
pub type ParamGrads = ModelParams;

/// Fan-in-scaled uniform initialization: weights drawn from
/// U(-b, b) with b = init_scale * sqrt(6 / fan_in); biases zero.
pub fn init_params(cfg: &ModelConfig, rng: &mut RngStream) -> Result<ModelParams> {
    cfg.validate()?;
    let mut make = |dims: &[(usize, usize)]| -> Vec<Layer> {
        dims.iter()
            .map(|&(fan_in, out)| {
                let bound = cfg.init_scale * (6.0 / fan_in as f64).sqrt();
                Layer {
                    w: Matrix::from_fn(fan_in, out, |_, _| rng.uniform(-bound, bound)),
                    b: Matrix::zeros(1, out),
                }
            })
            .collect()
    };
    Ok(ModelParams {
        encoder: make(&cfg.encoder_dims()),
        head0: make(&cfg.head_dims()),
        head1: make(&cfg.head_dims()),
    })
}

fn run_layers(
    layers: &[Layer],
    input: &Matrix,
    activation: Activation,
    linear_last: bool,
) -> Result<(Vec<Matrix>, Vec<Matrix>)> {
    let mut pre = Vec::with_capacity(layers.len());
    let mut post = Vec::with_capacity(layers.len());
    let mut cur = input.clone();
    for (idx, layer) in layers.iter().enumerate() {
        let z = cur.matmul(&layer.w)?.add_row_broadcast(&layer.b)?;
        let a = if linear_last && idx == layers.len() - 1 {
            z.clone()
        } else {
            activation.apply(&z)
        };
        pre.push(z);
        cur = a.clone();
        post.push(a);
    }
    Ok((pre, post))
}

/// Maps covariates to the shared representation.
pub fn encode(params: &ModelParams, cfg: &ModelConfig, x: &Matrix) -> Result<Matrix> {
    if x.cols() != cfg.input_dim {
        return Err(Error::shape(
            "encode",
            format!("{} columns vs input_dim {}", x.cols(), cfg.input_dim),
        ));
    }
    let (_, post) = run_layers(&params.encoder, x, cfg.activation, false)?;
    Ok(post.into_iter().last().unwrap())
}

/// Scalar prediction per representation row from the requested head.
pub fn predict(params: &ModelParams, cfg: &ModelConfig, phi: &Matrix, arm: u8) -> Result<Vec<f64>> {
    if phi.cols() != cfg.repr_dim {
        return Err(Error::shape(
            "predict",
            format!("{} columns vs repr_dim {}", phi.cols(), cfg.repr_dim),
        ));
    }
    let head = if arm == 1 { &params.head1 } else { &params.head0 };
    let (_, post) = run_layers(head, phi, cfg.activation, true)?;
    let out = post.into_iter().last().unwrap();
    Ok((0..out.rows()).map(|i| out.get(i, 0)).collect())
}

/// Cached activations from one forward pass over a batch, with each row
/// routed through the head of its own treatment arm.
pub struct ForwardPass {
    pub phi: Matrix,
    pub yhat: Vec<f64>,
    enc_pre: Vec<Matrix>,
    enc_post: Vec<Matrix>,
    /// Batch-local row indices per arm.
    arm_rows: [Vec<usize>; 2],
    head_pre: [Vec<Matrix>; 2],
    head_post: [Vec<Matrix>; 2],
}

pub fn forward(params: &ModelParams, cfg: &ModelConfig, x: &Matrix, t: &[u8]) -> Result<ForwardPass> {
    if t.len() != x.rows() {
        return Err(Error::shape(
            "forward",
            format!("{} rows vs {} treatments", x.rows(), t.len()),
        ));
    }
    let (enc_pre, enc_post) = run_layers(&params.encoder, x, cfg.activation, false)?;
    let phi = enc_post.last().cloned().unwrap_or_else(|| x.clone());

    let mut arm_rows: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &ti) in t.iter().enumerate() {
        arm_rows[ti as usize].push(i);
    }
    let mut head_pre: [Vec<Matrix>; 2] = [Vec::new(), Vec::new()];
    let mut head_post: [Vec<Matrix>; 2] = [Vec::new(), Vec::new()];
    let mut yhat = vec![0.0; x.rows()];
    for arm in 0..2usize {
        let head = if arm == 1 { &params.head1 } else { &params.head0 };
        let input = phi.gather_rows(&arm_rows[arm]);
        let (pre, post) = run_layers(head, &input, cfg.activation, true)?;
        if let Some(out) = post.last() {
            for (slot, &row) in arm_rows[arm].iter().enumerate() {
                yhat[row] = out.get(slot, 0);
            }
        }
        head_pre[arm] = pre;
        head_post[arm] = post;
    }
    Ok(ForwardPass {
        phi,
        yhat,
        enc_pre,
        enc_post,
        arm_rows,
        head_pre,
        head_post,
    })
}

#[allow(clippy::too_many_arguments)]
fn backprop_layers(
    layers: &[Layer],
    input: &Matrix,
    pre: &[Matrix],
    post: &[Matrix],
    activation: Activation,
    linear_last: bool,
    d_out: &Matrix,
    grads: &mut [Layer],
) -> Result<Matrix> {
    let mut delta = d_out.clone();
    for l in (0..layers.len()).rev() {
        if !(linear_last && l == layers.len() - 1) {
            delta = delta.hadamard(&activation.grad(&pre[l]))?;
        }
        let layer_input = if l == 0 { input } else { &post[l - 1] };
        grads[l].w.add_assign_scaled(&layer_input.tr_matmul(&delta)?, 1.0)?;
        grads[l].b.add_assign_scaled(&delta.col_sums(), 1.0)?;
        delta = delta.matmul_tr(&layers[l].w)?;
    }
    Ok(delta)
}

/// Backpropagates the per-sample prediction-loss gradient `dl_dyhat` plus an
/// optional representation-level gradient `dl_dphi` (the clustering pull)
/// through heads and encoder. Gradients cover every parameter block;
/// regularization terms are the caller's responsibility.
pub fn backward(
    params: &ModelParams,
    cfg: &ModelConfig,
    x: &Matrix,
    fwd: &ForwardPass,
    dl_dyhat: &[f64],
    dl_dphi: Option<&Matrix>,
) -> Result<ParamGrads> {
    if dl_dyhat.len() != x.rows() {
        return Err(Error::Usage(format!(
            "gradient length {} does not match the cached forward pass over {} rows",
            dl_dyhat.len(),
            x.rows()
        )));
    }
    let mut grads = params.zeros_like();

    let mut d_phi = match dl_dphi {
        Some(g) => {
            if g.shape() != fwd.phi.shape() {
                return Err(Error::shape(
                    "backward",
                    format!("{:?} vs representation {:?}", g.shape(), fwd.phi.shape()),
                ));
            }
            g.clone()
        }
        None => Matrix::zeros(fwd.phi.rows(), fwd.phi.cols()),
    };

    for arm in 0..2usize {
        let rows = &fwd.arm_rows[arm];
        if rows.is_empty() {
            continue;
        }
        let head = if arm == 1 { &params.head1 } else { &params.head0 };
        let head_grads = if arm == 1 { &mut grads.head1 } else { &mut grads.head0 };
        let d_out = Matrix::from_fn(rows.len(), 1, |i, _| dl_dyhat[rows[i]]);
        let input = fwd.phi.gather_rows(rows);
        let d_input = backprop_layers(
            head,
            &input,
            &fwd.head_pre[arm],
            &fwd.head_post[arm],
            cfg.activation,
            true,
            &d_out,
            head_grads,
        )?;
        d_phi.scatter_add_rows(rows, &d_input);
    }

    backprop_layers(
        &params.encoder,
        x,
        &fwd.enc_pre,
        &fwd.enc_post,
        cfg.activation,
        false,
        &d_phi,
        &mut grads.encoder,
    )?;
    Ok(grads)
}

//! The composed training objective and the mini-batch training loop.
//!
//! Total objective per step:
//! weighted prediction loss
//! + alpha * (cluster + beta * align + gamma_div * diversity)
//! + lambda * sum of squared weights (biases excluded).
//!
//! Assignments are recomputed from current representations (per batch by
//! default) and treated as constants inside each gradient step; prototypes
//! move by gradient descent, and cross-group pairing is refreshed once per
//! epoch.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activation::{sigmoid, softplus};
use crate::dataset::CausalDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{
    backward, encode, forward, init_params, predict, ModelConfig, ModelParams, ParamGrads,
};
use crate::prototypes::{
    assign, cluster_loss_grad_phi, handle_empty_cluster, init_prototypes, proto_loss,
    proto_loss_grad_mu, rematch_prototypes, AssignmentTable, PrototypeSet, RematchStrategy,
};
use crate::rng::RngStream;

/// Loss applied to factual outcomes inside the weighted prediction term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Pick from dataset metadata: logistic for binary outcomes, else squared.
    Auto,
    Squared,
    Logistic,
}

impl LossKind {
    pub fn resolve(self, ds: &CausalDataset) -> LossKind {
        match self {
            LossKind::Auto => {
                if ds.binary_outcome {
                    LossKind::Logistic
                } else {
                    LossKind::Squared
                }
            }
            other => other,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Sgd { momentum: 0.9 }
    }
}

/// When nearest-prototype assignments are recomputed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentRefresh {
    PerBatch,
    PerEpoch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the combined prototype loss.
    pub alpha: f64,
    /// Weight of the alignment term inside the prototype loss.
    pub beta: f64,
    /// Weight of the diversity term inside the prototype loss.
    pub gamma_div: f64,
    /// L2 weight-decay coefficient.
    pub lambda: f64,
    /// Prototypes per group.
    pub k: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub rematch: RematchStrategy,
    pub seed: u64,
    /// Separate stream for prototype initialization; derived from `seed`
    /// when absent.
    pub proto_seed: Option<u64>,
    pub optimizer: Optimizer,
    pub loss: LossKind,
    pub refresh: AssignmentRefresh,
    /// Sample mini-batches proportionally from both groups, guarding
    /// against single-group batches.
    pub stratified_batches: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 1.0,
            beta: 1.0,
            gamma_div: 0.1,
            lambda: 1e-4,
            k: 5,
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 400,
            patience: 30,
            rematch: RematchStrategy::Index,
            seed: 0,
            proto_seed: None,
            optimizer: Optimizer::default(),
            loss: LossKind::Auto,
            refresh: AssignmentRefresh::PerBatch,
            stratified_batches: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 || self.gamma_div < 0.0 || self.lambda < 0.0 {
            return Err(Error::Config("loss weights must be non-negative".to_string()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".to_string()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be at least 2".to_string()));
        }
        if self.patience < 1 || self.max_epochs < 1 {
            return Err(Error::Config("patience and max_epochs must be at least 1".to_string()));
        }
        if self.k < 1 {
            return Err(Error::Config("need at least one prototype per group".to_string()));
        }
        Ok(())
    }

    fn proto_stream_seed(&self) -> u64 {
        self.proto_seed.unwrap_or(self.seed ^ 0xA076_1D64_78BD_642F)
    }

    fn batch_stream_seed(&self) -> u64 {
        self.seed ^ 0xE703_7ED1_A0B4_28DB
    }
}

/// All loss components of one evaluation, plus their weighted total.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_pred: f64,
    pub l_cluster: f64,
    pub l_align: f64,
    pub l_div: f64,
    pub l_reg: f64,
    pub l_total: f64,
}

impl LossBreakdown {
    fn compose(pred: f64, cluster: f64, align: f64, div: f64, reg: f64, tcfg: &TrainConfig) -> Self {
        LossBreakdown {
            l_pred: pred,
            l_cluster: cluster,
            l_align: align,
            l_div: div,
            l_reg: reg,
            l_total: pred
                + tcfg.alpha * (cluster + tcfg.beta * align + tcfg.gamma_div * div)
                + tcfg.lambda * reg,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.l_total.is_finite()
    }
}

/// Balancing weights t/(2u) + (1-t)/(2(1-u)) with u the treated fraction of
/// the given slice.
fn balance_weights(t: &[u8]) -> Result<Vec<f64>> {
    let n = t.len();
    if n == 0 {
        return Err(Error::Usage("empty batch".to_string()));
    }
    let u = t.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    if u == 0.0 || u == 1.0 {
        return Err(Error::SingleGroup(format!(
            "treated fraction u={u} leaves the weighted loss undefined"
        )));
    }
    Ok(t.iter()
        .map(|&ti| {
            if ti == 1 {
                1.0 / (2.0 * u)
            } else {
                1.0 / (2.0 * (1.0 - u))
            }
        })
        .collect())
}

fn factual_loss(yhat: &[f64], t: &[u8], y: &[f64], kind: LossKind) -> Result<f64> {
    let w = balance_weights(t)?;
    let n = yhat.len() as f64;
    let mut acc = 0.0;
    for i in 0..yhat.len() {
        let li = match kind {
            LossKind::Squared | LossKind::Auto => {
                let d = yhat[i] - y[i];
                d * d
            }
            LossKind::Logistic => softplus(yhat[i]) - y[i] * yhat[i],
        };
        acc += w[i] * li;
    }
    Ok(acc / n)
}

fn factual_loss_grad(yhat: &[f64], t: &[u8], y: &[f64], kind: LossKind) -> Result<Vec<f64>> {
    let w = balance_weights(t)?;
    let n = yhat.len() as f64;
    Ok((0..yhat.len())
        .map(|i| {
            let d = match kind {
                LossKind::Squared | LossKind::Auto => 2.0 * (yhat[i] - y[i]),
                LossKind::Logistic => sigmoid(yhat[i]) - y[i],
            };
            w[i] * d / n
        })
        .collect())
}

/// Weighted factual prediction loss of the heads over given representations.
pub fn prediction_loss(
    params: &ModelParams,
    cfg: &ModelConfig,
    phi: &Matrix,
    t: &[u8],
    y: &[f64],
    kind: LossKind,
) -> Result<f64> {
    let yhat0 = predict(params, cfg, phi, 0)?;
    let yhat1 = predict(params, cfg, phi, 1)?;
    let yhat: Vec<f64> = t
        .iter()
        .enumerate()
        .map(|(i, &ti)| if ti == 1 { yhat1[i] } else { yhat0[i] })
        .collect();
    factual_loss(&yhat, t, y, kind)
}

/// Sum of squared entries over weight blocks; biases excluded.
pub fn l2_reg(params: &ModelParams) -> f64 {
    params.blocks().map(|layer| layer.w.frobenius_sq()).sum()
}

fn l2_reg_grads(params: &ModelParams, grads: &mut ParamGrads, lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    for (g, p) in grads.blocks_mut().zip(params.blocks()) {
        g.w.add_assign_scaled(&p.w, 2.0 * lambda).unwrap();
    }
}

/// Full objective over a dataset slice with assignments and pairing frozen.
#[allow(clippy::too_many_arguments)]
pub fn total_loss(
    params: &ModelParams,
    mcfg: &ModelConfig,
    x: &Matrix,
    t: &[u8],
    y: &[f64],
    protos: &PrototypeSet,
    table: &AssignmentTable,
    pairing: &[usize],
    tcfg: &TrainConfig,
    kind: LossKind,
) -> Result<LossBreakdown> {
    let fwd = forward(params, mcfg, x, t)?;
    let pred = factual_loss(&fwd.yhat, t, y, kind)?;
    let proto = proto_loss(&fwd.phi, table, protos, pairing, tcfg.beta, tcfg.gamma_div);
    Ok(LossBreakdown::compose(
        pred,
        proto.cluster,
        proto.align,
        proto.diversity,
        l2_reg(params),
        tcfg,
    ))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    #[serde(flatten)]
    pub train: LossBreakdown,
    pub valid_loss: f64,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub params: ModelParams,
    pub protos: PrototypeSet,
    pub pairing: Vec<usize>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub loss_kind: LossKind,
}

struct OptimizerState {
    step: u64,
    vel: ParamGrads,
    vel_protos: [Matrix; 2],
    sq: Option<ParamGrads>,
    sq_protos: Option<[Matrix; 2]>,
}

impl OptimizerState {
    fn new(params: &ModelParams, protos: &PrototypeSet, opt: Optimizer) -> Self {
        let zeros = params.clone().map_blocks(|_| 0.0);
        let zero_protos = [
            Matrix::zeros(protos.mu[0].rows(), protos.mu[0].cols()),
            Matrix::zeros(protos.mu[1].rows(), protos.mu[1].cols()),
        ];
        let adam = matches!(opt, Optimizer::Adam { .. });
        OptimizerState {
            step: 0,
            vel: zeros.clone(),
            vel_protos: zero_protos.clone(),
            sq: adam.then(|| zeros.clone()),
            sq_protos: adam.then(|| zero_protos.clone()),
        }
    }
}

impl ModelParams {
    fn map_blocks(mut self, f: impl Fn(f64) -> f64 + Copy) -> ModelParams {
        for layer in self.blocks_mut() {
            layer.w = layer.w.map(f);
            layer.b = layer.b.map(f);
        }
        self
    }
}

fn sgd_update(p: &mut Matrix, g: &Matrix, v: &mut Matrix, lr: f64, momentum: f64) {
    for i in 0..p.rows() {
        let (pr, gr) = (i, i);
        for j in 0..p.cols() {
            let vel = momentum * v.get(pr, j) - lr * g.get(gr, j);
            v.set(pr, j, vel);
            p.set(pr, j, p.get(pr, j) + vel);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_update(
    p: &mut Matrix,
    g: &Matrix,
    m: &mut Matrix,
    v: &mut Matrix,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
) {
    let bc1 = 1.0 - beta1.powi(step as i32);
    let bc2 = 1.0 - beta2.powi(step as i32);
    for i in 0..p.rows() {
        for j in 0..p.cols() {
            let grad = g.get(i, j);
            let mi = beta1 * m.get(i, j) + (1.0 - beta1) * grad;
            let vi = beta2 * v.get(i, j) + (1.0 - beta2) * grad * grad;
            m.set(i, j, mi);
            v.set(i, j, vi);
            let update = lr * (mi / bc1) / ((vi / bc2).sqrt() + eps);
            p.set(i, j, p.get(i, j) - update);
        }
    }
}

fn apply_updates(
    params: &mut ModelParams,
    protos: &mut PrototypeSet,
    grads: &ParamGrads,
    proto_grads: &[Matrix; 2],
    state: &mut OptimizerState,
    opt: Optimizer,
    lr: f64,
) {
    state.step += 1;
    match opt {
        Optimizer::Sgd { momentum } => {
            for ((p, g), v) in params
                .blocks_mut()
                .zip(grads.blocks())
                .zip(state.vel.blocks_mut())
            {
                sgd_update(&mut p.w, &g.w, &mut v.w, lr, momentum);
                sgd_update(&mut p.b, &g.b, &mut v.b, lr, momentum);
            }
            for grp in 0..2 {
                sgd_update(
                    &mut protos.mu[grp],
                    &proto_grads[grp],
                    &mut state.vel_protos[grp],
                    lr,
                    momentum,
                );
            }
        }
        Optimizer::Adam { beta1, beta2, eps } => {
            let step = state.step;
            let sq = state.sq.as_mut().unwrap();
            for (((p, g), m), v) in params
                .blocks_mut()
                .zip(grads.blocks())
                .zip(state.vel.blocks_mut())
                .zip(sq.blocks_mut())
            {
                adam_update(&mut p.w, &g.w, &mut m.w, &mut v.w, lr, beta1, beta2, eps, step);
                adam_update(&mut p.b, &g.b, &mut m.b, &mut v.b, lr, beta1, beta2, eps, step);
            }
            let sqp = state.sq_protos.as_mut().unwrap();
            for grp in 0..2 {
                adam_update(
                    &mut protos.mu[grp],
                    &proto_grads[grp],
                    &mut state.vel_protos[grp],
                    &mut sqp[grp],
                    lr,
                    beta1,
                    beta2,
                    eps,
                    step,
                );
            }
        }
    }
}

/// Mini-batch index plan for one epoch.
fn plan_batches(
    t: &[u8],
    batch_size: usize,
    stratified: bool,
    rng: &mut RngStream,
) -> Vec<Vec<usize>> {
    let n = t.len();
    if !stratified {
        let mut idx: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut idx);
        return idx
            .chunks(batch_size)
            .filter(|c| c.len() >= 2)
            .map(<[usize]>::to_vec)
            .collect();
    }
    let mut treated: Vec<usize> = (0..n).filter(|&i| t[i] == 1).collect();
    let mut control: Vec<usize> = (0..n).filter(|&i| t[i] == 0).collect();
    rng.shuffle(&mut treated);
    rng.shuffle(&mut control);
    let batches = n.div_ceil(batch_size).max(1);
    let mut out = vec![Vec::new(); batches];
    for (slot, &i) in treated.iter().enumerate() {
        out[slot % batches].push(i);
    }
    for (slot, &i) in control.iter().enumerate() {
        out[slot % batches].push(i);
    }
    out.retain(|b| b.len() >= 2);
    out
}

/// Builds a batch-local assignment table from frozen per-sample indices.
fn table_from_frozen(assigned: &[usize], rows: &[usize], t: &[u8], k: usize) -> AssignmentTable {
    let mut members = [vec![Vec::new(); k], vec![Vec::new(); k]];
    let mut local = Vec::with_capacity(rows.len());
    for (slot, &row) in rows.iter().enumerate() {
        let cluster = assigned[row];
        local.push(cluster);
        members[t[row] as usize][cluster].push(slot);
    }
    AssignmentTable {
        assigned: local,
        members,
    }
}

/// Trains the encoder, heads, and prototypes; returns the best-validation
/// snapshot plus per-epoch loss history.
pub fn fit(
    train: &CausalDataset,
    valid: &CausalDataset,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<FitResult> {
    mcfg.validate()?;
    tcfg.validate()?;
    for ds in [train, valid] {
        let (n0, n1) = ds.group_sizes();
        if n0 == 0 || n1 == 0 {
            return Err(Error::SingleGroup(format!(
                "dataset '{}' needs both groups to train (control={n0}, treated={n1})",
                ds.name
            )));
        }
    }
    if mcfg.input_dim != train.dim() {
        return Err(Error::Config(format!(
            "model input_dim {} does not match data dimension {}",
            mcfg.input_dim,
            train.dim()
        )));
    }
    let kind = tcfg.loss.resolve(train);
    if tcfg.k == 1 && tcfg.gamma_div > 0.0 {
        eprintln!("notice: K=1 leaves the diversity term empty; it contributes 0");
    }

    let mut init_rng = RngStream::new(tcfg.seed);
    let mut proto_rng = RngStream::new(tcfg.proto_stream_seed());
    let mut batch_rng = RngStream::new(tcfg.batch_stream_seed());

    let mut params = init_params(mcfg, &mut init_rng)?;
    let phi0 = encode(&params, mcfg, &train.x)?;
    let mut protos = init_prototypes(&phi0, &train.t, tcfg.k, &mut proto_rng)?;
    let mut pairing: Vec<usize> = (0..tcfg.k).collect();

    let mut opt_state = OptimizerState::new(&params, &protos, tcfg.optimizer);

    let mut history: Vec<EpochRecord> = Vec::new();
    let mut best: Option<(usize, f64, ModelParams, PrototypeSet, Vec<usize>)> = None;
    let mut since_best = 0usize;

    for epoch in 0..tcfg.max_epochs {
        let fail = |msg: String| Error::Training { epoch, msg };

        // Frozen per-epoch assignments when requested.
        let epoch_assigned = if tcfg.refresh == AssignmentRefresh::PerEpoch {
            let phi = encode(&params, mcfg, &train.x)?;
            Some(assign(&phi, &train.t, &protos).assigned)
        } else {
            None
        };

        for batch in plan_batches(&train.t, tcfg.batch_size, tcfg.stratified_batches, &mut batch_rng)
        {
            let xb = train.x.gather_rows(&batch);
            let tb: Vec<u8> = batch.iter().map(|&i| train.t[i]).collect();
            let yb: Vec<f64> = batch.iter().map(|&i| train.y[i]).collect();

            let fwd = forward(&params, mcfg, &xb, &tb)?;
            let dl_dyhat =
                factual_loss_grad(&fwd.yhat, &tb, &yb, kind).map_err(|e| fail(e.to_string()))?;

            let table = match &epoch_assigned {
                Some(assigned) => table_from_frozen(assigned, &batch, &train.t, tcfg.k),
                None => assign(&fwd.phi, &tb, &protos),
            };

            let dl_dphi = if tcfg.alpha > 0.0 {
                Some(cluster_loss_grad_phi(&fwd.phi, &table, &protos).scale(tcfg.alpha))
            } else {
                None
            };
            let mut grads = backward(&params, mcfg, &xb, &fwd, &dl_dyhat, dl_dphi.as_ref())?;
            l2_reg_grads(&params, &mut grads, tcfg.lambda);

            let mut proto_grads =
                proto_loss_grad_mu(&fwd.phi, &table, &protos, &pairing, tcfg.beta, tcfg.gamma_div);
            for g in &mut proto_grads {
                *g = g.scale(tcfg.alpha);
            }

            apply_updates(
                &mut params,
                &mut protos,
                &grads,
                &proto_grads,
                &mut opt_state,
                tcfg.optimizer,
                tcfg.learning_rate,
            );
        }

        if !params.is_finite() || !protos.is_finite() {
            return Err(fail("non-finite parameters after update".to_string()));
        }

        // Epoch maintenance: refresh pairing, rescue empty clusters.
        pairing = rematch_prototypes(&protos, tcfg.rematch)?;
        let phi_train = encode(&params, mcfg, &train.x)?;
        let table_full = assign(&phi_train, &train.t, &protos);
        let table_full = if table_full.has_empty_cluster() {
            let (fixed, table) = handle_empty_cluster(&protos, &table_full, &phi_train, &train.t);
            protos = fixed;
            table
        } else {
            table_full
        };

        let train_loss = {
            let pred = factual_loss(
                &{
                    let fwd = forward(&params, mcfg, &train.x, &train.t)?;
                    fwd.yhat
                },
                &train.t,
                &train.y,
                kind,
            )
            .map_err(|e| fail(e.to_string()))?;
            let proto =
                proto_loss(&phi_train, &table_full, &protos, &pairing, tcfg.beta, tcfg.gamma_div);
            LossBreakdown::compose(
                pred,
                proto.cluster,
                proto.align,
                proto.diversity,
                l2_reg(&params),
                tcfg,
            )
        };
        let phi_valid = encode(&params, mcfg, &valid.x)?;
        let valid_loss = prediction_loss(&params, mcfg, &phi_valid, &valid.t, &valid.y, kind)
            .map_err(|e| fail(e.to_string()))?;

        if !train_loss.is_finite() || !valid_loss.is_finite() {
            return Err(fail(format!(
                "non-finite loss (train {}, valid {valid_loss})",
                train_loss.l_total
            )));
        }

        history.push(EpochRecord {
            epoch,
            train: train_loss,
            valid_loss,
        });

        let improved = best.as_ref().is_none_or(|(_, b, ..)| valid_loss < *b);
        if improved {
            best = Some((epoch, valid_loss, params.clone(), protos.clone(), pairing.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= tcfg.patience {
                break;
            }
        }
    }

    let (best_epoch, _, params, protos, pairing) = best.expect("at least one epoch runs");
    Ok(FitResult {
        params,
        protos,
        pairing,
        history,
        best_epoch,
        loss_kind: kind,
    })
}

/// Estimated per-unit effect: head-1 output minus head-0 output.
pub fn estimate_ite(params: &ModelParams, cfg: &ModelConfig, x: &Matrix) -> Result<Vec<f64>> {
    let phi = encode(params, cfg, x)?;
    let y1 = predict(params, cfg, &phi, 1)?;
    let y0 = predict(params, cfg, &phi, 0)?;
    Ok(y1.iter().zip(y0.iter()).map(|(a, b)| a - b).collect())
}

/// Predicted potential outcomes on the outcome scale: raw head outputs for
/// squared loss, probabilities for logistic loss.
pub fn predict_outcomes(
    params: &ModelParams,
    cfg: &ModelConfig,
    x: &Matrix,
    kind: LossKind,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let phi = encode(params, cfg, x)?;
    let mut y0 = predict(params, cfg, &phi, 0)?;
    let mut y1 = predict(params, cfg, &phi, 1)?;
    if kind == LossKind::Logistic {
        for v in y0.iter_mut().chain(y1.iter_mut()) {
            *v = sigmoid(*v);
        }
    }
    Ok((y0, y1))
}

/// Everything needed to reload and re-evaluate a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub loss_kind: LossKind,
    pub best_epoch: usize,
    pub params: ModelParams,
    pub protos: PrototypeSet,
    pub pairing: Vec<usize>,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn from_fit(mcfg: &ModelConfig, tcfg: &TrainConfig, fit: &FitResult) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            model: mcfg.clone(),
            train: tcfg.clone(),
            loss_kind: fit.loss_kind,
            best_epoch: fit.best_epoch,
            params: fit.params.clone(),
            protos: fit.protos.clone(),
            pairing: fit.pairing.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Numeric(format!("checkpoint serialization failed: {e}")))?;
        fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            column: "<json>".to_string(),
            msg: e.to_string(),
        })?;
        if ck.format_version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint format {} unsupported (expected {})",
                ck.format_version, CHECKPOINT_VERSION
            )));
        }
        Ok(ck)
    }
}

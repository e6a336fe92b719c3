//! Symmetric hyperbolic InfoNCE alignment between visual and brain embeddings.
//!
//! Visual embeddings are lifted with `exp_O(alpha_v W_v z)`, brain embeddings
//! with `exp_O(alpha_b z_b)`. Targets optionally interpolate along the
//! geodesic towards a perceptual embedding. Logits are `lambda * s(u, v)` with
//! `s = -d^2`, and the loss averages the vision-to-brain and brain-to-vision
//! cross-entropies over the batch.
//!
//! Positive scalars are optimised through their logarithms.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::lorentz::{
    geodesic_coefficient_derivs, geodesic_coefficients, matvec, LorentzManifold,
    LorentzPoint,
};

#[derive(Debug, Clone, PartialEq)]
pub struct AlignParams {
    /// `n x d` projection of the visual embeddings into the tangent space.
    pub w_v: EmbeddingMatrix,
    pub log_alpha_v: f64,
    pub log_alpha_b: f64,
    pub log_lambda: f64,
}

impl AlignParams {
    /// Identity-padded `n x d` projection scaled by `1/sqrt(d)`; unit scalars.
    pub fn init(n: usize, d: usize) -> Self {
        let scale = 1.0 / (d as f64).sqrt();
        let mut data = vec![0.0; n * d];
        for i in 0..n.min(d) {
            data[i * d + i] = scale;
        }
        Self {
            w_v: EmbeddingMatrix::new(n, d, data).expect("finite"),
            log_alpha_v: 0.0,
            log_alpha_b: 0.0,
            log_lambda: 0.0,
        }
    }

    pub fn alpha_v(&self) -> f64 {
        self.log_alpha_v.exp()
    }

    pub fn alpha_b(&self) -> f64 {
        self.log_alpha_b.exp()
    }

    pub fn lambda(&self) -> f64 {
        self.log_lambda.exp()
    }

    /// Tangent dimension `n`.
    pub fn manifold_dim(&self) -> usize {
        self.w_v.rows()
    }

    /// Visual input dimension `d`.
    pub fn input_dim(&self) -> usize {
        self.w_v.dim()
    }

    /// `w_v` rows followed by a trailer row `(alpha_v, alpha_b, lambda, 0, ...)`.
    pub fn to_matrix(&self) -> Result<EmbeddingMatrix> {
        let d = self.input_dim();
        if d < 3 {
            return Err(Error::Format(format!(
                "parameter files need an input dimension of at least 3, got {d}"
            )));
        }
        let mut data = self.w_v.data().to_vec();
        let mut trailer = vec![0.0; d];
        trailer[..3].copy_from_slice(&[self.alpha_v(), self.alpha_b(), self.lambda()]);
        data.extend(trailer);
        EmbeddingMatrix::new(self.manifold_dim() + 1, d, data)
    }

    pub fn from_matrix(m: &EmbeddingMatrix) -> Result<Self> {
        if m.rows() < 2 || m.dim() < 3 {
            return Err(Error::Format("parameter matrix is too small".into()));
        }
        let n = m.rows() - 1;
        let trailer = m.row(n);
        if trailer[..3].iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Format("parameter trailer must hold positive scalars".into()));
        }
        Ok(Self {
            w_v: EmbeddingMatrix::new(n, m.dim(), m.data()[..n * m.dim()].to_vec())?,
            log_alpha_v: trailer[0].ln(),
            log_alpha_b: trailer[1].ln(),
            log_lambda: trailer[2].ln(),
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_matrix()?.write(path)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_matrix(&EmbeddingMatrix::read(path)?)
    }
}

/// Gradients with respect to `(W_v, log alpha_v, log alpha_b, log lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignGrad {
    pub w_v: Vec<f64>,
    pub log_alpha_v: f64,
    pub log_alpha_b: f64,
    pub log_lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignBatch {
    pub z_semantic: EmbeddingMatrix,
    pub z_perceptual: Option<EmbeddingMatrix>,
    pub z_brain: EmbeddingMatrix,
    pub t: f64,
}

impl AlignBatch {
    pub fn new(
        z_semantic: EmbeddingMatrix,
        z_perceptual: Option<EmbeddingMatrix>,
        z_brain: EmbeddingMatrix,
        t: f64,
    ) -> Result<Self> {
        let b = z_semantic.rows();
        if b == 0 {
            return Err(Error::Argument("alignment batch is empty".into()));
        }
        if z_brain.rows() != b {
            return Err(Error::dims(format!("{b} brain rows"), z_brain.rows()));
        }
        if let Some(p) = &z_perceptual {
            if p.rows() != b || p.dim() != z_semantic.dim() {
                return Err(Error::dims(
                    format!("{b}x{} perceptual", z_semantic.dim()),
                    format!("{}x{}", p.rows(), p.dim()),
                ));
            }
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Argument(format!("interpolation weight {t} outside [0, 1]")));
        }
        if t > 0.0 && z_perceptual.is_none() {
            return Err(Error::Config(
                "t > 0 requires perceptual embeddings".into(),
            ));
        }
        Ok(Self {
            z_semantic,
            z_perceptual,
            z_brain,
            t,
        })
    }

    pub fn len(&self) -> usize {
        self.z_semantic.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, idx: &[usize]) -> AlignBatch {
        AlignBatch {
            z_semantic: self.z_semantic.select(idx),
            z_perceptual: self.z_perceptual.as_ref().map(|p| p.select(idx)),
            z_brain: self.z_brain.select(idx),
            t: self.t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
    pub t: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            weight_decay: 1e-4,
            epochs: 50,
            batch_size: 1024,
            rng_seed: 0,
            t: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("train.learning_rate must be > 0".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("train.weight_decay must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.t) {
            return Err(Error::Config("train.t must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// `s(u, v) = -d(u, v)^2`.
pub fn similarity(m: &LorentzManifold, u: &LorentzPoint, v: &LorentzPoint) -> Result<f64> {
    let d = m.dist(u, v)?;
    Ok(-d * d)
}

fn check_params(batch: &AlignBatch, params: &AlignParams, m: &LorentzManifold) -> Result<()> {
    if batch.z_semantic.dim() != params.input_dim() {
        return Err(Error::dims(
            format!("visual dim {}", params.input_dim()),
            batch.z_semantic.dim(),
        ));
    }
    if batch.z_brain.dim() != params.manifold_dim() || m.dim() != params.manifold_dim() {
        return Err(Error::dims(
            format!("manifold dim {}", params.manifold_dim()),
            format!("brain dim {}, manifold {}", batch.z_brain.dim(), m.dim()),
        ));
    }
    Ok(())
}

fn tangent(params: &AlignParams, z: &[f64]) -> Vec<f64> {
    let alpha = params.alpha_v();
    matvec(&params.w_v, z).into_iter().map(|v| alpha * v).collect()
}

/// Interpolated visual targets, one per batch row.
pub fn build_targets(batch: &AlignBatch, params: &AlignParams, m: &LorentzManifold) -> Result<Vec<LorentzPoint>> {
    check_params(batch, params, m)?;
    Ok(Forward::run(batch, params, m)?.targets)
}

/// Symmetric InfoNCE over a `b x b` logit matrix with positives on the diagonal.
pub fn symmetric_infonce(logits: &[f64], b: usize) -> f64 {
    let (row_lse, col_lse) = log_sum_exps(logits, b);
    let mut total = 0.0;
    for i in 0..b {
        let pos = logits[i * b + i];
        total += (row_lse[i] - pos) + (col_lse[i] - pos);
    }
    total / (2 * b) as f64
}

fn log_sum_exps(logits: &[f64], b: usize) -> (Vec<f64>, Vec<f64>) {
    let lse = |values: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = values.collect();
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
    };
    let rows = (0..b).map(|i| lse(&mut (0..b).map(|j| logits[i * b + j]))).collect();
    let cols = (0..b).map(|j| lse(&mut (0..b).map(|i| logits[i * b + j]))).collect();
    (rows, cols)
}

pub fn infonce_loss(batch: &AlignBatch, params: &AlignParams, m: &LorentzManifold) -> Result<f64> {
    check_params(batch, params, m)?;
    let fwd = Forward::run(batch, params, m)?;
    Ok(symmetric_infonce(&fwd.logits, batch.len()))
}

/// Cached forward pass.
struct Forward {
    u_sem: Vec<Vec<f64>>,
    u_per: Option<Vec<Vec<f64>>>,
    h_sem: Vec<LorentzPoint>,
    h_per: Option<Vec<LorentzPoint>>,
    /// Per-row geodesic angle between semantic and perceptual lifts.
    theta_sp: Vec<f64>,
    targets: Vec<LorentzPoint>,
    u_brain: Vec<Vec<f64>>,
    h_brain: Vec<LorentzPoint>,
    dists: Vec<f64>,
    logits: Vec<f64>,
}

impl Forward {
    fn run(batch: &AlignBatch, params: &AlignParams, m: &LorentzManifold) -> Result<Self> {
        let b = batch.len();
        let sqrt_c = m.curvature().sqrt();
        let u_sem: Vec<Vec<f64>> = batch.z_semantic.iter_rows().map(|z| tangent(params, z)).collect();
        let h_sem: Vec<LorentzPoint> = u_sem.iter().map(|u| m.exp_unchecked(u)).collect();

        let (u_per, h_per, theta_sp, targets) = match &batch.z_perceptual {
            Some(p) => {
                let u_per: Vec<Vec<f64>> = p.iter_rows().map(|z| tangent(params, z)).collect();
                let h_per: Vec<LorentzPoint> = u_per.iter().map(|u| m.exp_unchecked(u)).collect();
                let theta: Vec<f64> = h_sem
                    .iter()
                    .zip(&h_per)
                    .map(|(s, p)| sqrt_c * m.dist_unchecked(&s.coords, &p.coords))
                    .collect();
                let targets = h_sem
                    .iter()
                    .zip(&h_per)
                    .map(|(s, p)| m.geodesic_unchecked(&s.coords, &p.coords, batch.t))
                    .collect();
                (Some(u_per), Some(h_per), theta, targets)
            }
            None => (None, None, Vec::new(), h_sem.clone()),
        };

        let alpha_b = params.alpha_b();
        let u_brain: Vec<Vec<f64>> = batch
            .z_brain
            .iter_rows()
            .map(|z| z.iter().map(|v| alpha_b * v).collect())
            .collect();
        let h_brain: Vec<LorentzPoint> = u_brain.iter().map(|u| m.exp_unchecked(u)).collect();

        for (i, p) in targets.iter().chain(&h_brain).enumerate() {
            if p.coords.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric {
                    what: "lifted embedding",
                    index: i % b,
                });
            }
        }

        let lambda = params.lambda();
        let mut dists = Vec::with_capacity(b * b);
        let mut logits = Vec::with_capacity(b * b);
        for v in &targets {
            for h in &h_brain {
                let d = m.dist_unchecked(&v.coords, &h.coords);
                dists.push(d);
                logits.push(-lambda * d * d);
            }
        }
        if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                what: "logit",
                index: i,
            });
        }
        Ok(Self {
            u_sem,
            u_per,
            h_sem,
            h_per,
            theta_sp,
            targets,
            u_brain,
            h_brain,
            dists,
            logits,
        })
    }
}

/// Loss and analytic gradients.
pub fn loss_grad(batch: &AlignBatch, params: &AlignParams, m: &LorentzManifold) -> Result<(f64, AlignGrad)> {
    check_params(batch, params, m)?;
    let fwd = Forward::run(batch, params, m)?;
    let b = batch.len();
    let n = params.manifold_dim();
    let d = params.input_dim();
    let c = m.curvature();
    let lambda = params.lambda();
    let loss = symmetric_infonce(&fwd.logits, b);

    // dLoss/dlogit_ij = (P_ij + Q_ij - 2 delta_ij) / 2B with P the row and Q
    // the column softmax.
    let (row_lse, col_lse) = log_sum_exps(&fwd.logits, b);
    let mut g_logit = vec![0.0; b * b];
    for i in 0..b {
        for j in 0..b {
            let l = fwd.logits[i * b + j];
            let p = (l - row_lse[i]).exp();
            let q = (l - col_lse[j]).exp();
            let delta = if i == j { 2.0 } else { 0.0 };
            g_logit[i * b + j] = (p + q - delta) / (2 * b) as f64;
        }
    }

    let log_lambda: f64 = g_logit.iter().zip(&fwd.logits).map(|(g, l)| g * l).sum();

    // logit = -lambda d^2 with c d^2 = arcosh(x)^2, x = -c <v, h>.
    // d(d^2)/dx = (2/c) theta / sinh(theta).
    let mut g_target = vec![vec![0.0; n + 1]; b];
    let mut g_brain = vec![vec![0.0; n + 1]; b];
    for i in 0..b {
        for j in 0..b {
            let theta = c.sqrt() * fwd.dists[i * b + j];
            let ratio = if theta < 1e-6 { 1.0 - theta * theta / 6.0 } else { theta / theta.sinh() };
            let coef = g_logit[i * b + j] * (-lambda) * (2.0 / c) * ratio * c;
            let v = &fwd.targets[i].coords;
            let h = &fwd.h_brain[j].coords;
            // dx/dv = c (h0, -h_s), dx/dh = c (v0, -v_s); c folded into coef.
            g_target[i][0] += coef * h[0];
            g_brain[j][0] += coef * v[0];
            for k in 1..=n {
                g_target[i][k] -= coef * h[k];
                g_brain[j][k] -= coef * v[k];
            }
        }
    }

    let mut log_alpha_b = 0.0;
    for j in 0..b {
        let gu = m.exp_origin_vjp(&fwd.u_brain[j], &g_brain[j]);
        log_alpha_b += gu.iter().zip(&fwd.u_brain[j]).map(|(a, b)| a * b).sum::<f64>();
    }

    let mut grad_w = vec![0.0; n * d];
    let mut log_alpha_v = 0.0;
    let alpha_v = params.alpha_v();
    let mut push_visual = |u: &[f64], g_h: &[f64], z: &[f64]| {
        let gu = m.exp_origin_vjp(u, g_h);
        log_alpha_v += gu.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
        for (r, gr) in gu.iter().enumerate() {
            let row = &mut grad_w[r * d..(r + 1) * d];
            for (w, zk) in row.iter_mut().zip(z) {
                *w += alpha_v * gr * zk;
            }
        }
    };

    match (&fwd.u_per, &fwd.h_per, &batch.z_perceptual) {
        (Some(u_per), Some(h_per), Some(z_per)) => {
            for i in 0..b {
                let (hs, hp) = (&fwd.h_sem[i].coords, &h_per[i].coords);
                let target = &fwd.targets[i].coords;
                let e = &g_target[i];
                // Target = project(A hs_s + B hp_s): only the spatial blend is free.
                let g_blend: Vec<f64> = (1..=n).map(|k| e[k] + e[0] * target[k] / target[0]).collect();
                let theta = fwd.theta_sp[i];
                let (a, bb) = geodesic_coefficients(theta, batch.t);
                let (da, db) = geodesic_coefficient_derivs(theta, batch.t);
                let mut g_hs = vec![0.0; n + 1];
                let mut g_hp = vec![0.0; n + 1];
                let mut q = 0.0;
                for k in 1..=n {
                    g_hs[k] += a * g_blend[k - 1];
                    g_hp[k] += bb * g_blend[k - 1];
                    q += g_blend[k - 1] * (da * hs[k] + db * hp[k]);
                }
                if theta >= 1e-8 {
                    // theta = arcosh(y), y = -c <hs, hp>.
                    let s = q / theta.sinh() * c;
                    g_hs[0] += s * hp[0];
                    g_hp[0] += s * hs[0];
                    for k in 1..=n {
                        g_hs[k] -= s * hp[k];
                        g_hp[k] -= s * hs[k];
                    }
                }
                push_visual(&fwd.u_sem[i], &g_hs, batch.z_semantic.row(i));
                push_visual(&u_per[i], &g_hp, z_per.row(i));
            }
        }
        _ => {
            for i in 0..b {
                push_visual(&fwd.u_sem[i], &g_target[i], batch.z_semantic.row(i));
            }
        }
    }

    Ok((
        loss,
        AlignGrad {
            w_v: grad_w,
            log_alpha_v,
            log_alpha_b,
            log_lambda,
        },
    ))
}

/// AdamW with decoupled weight decay on a masked subset of the parameters.
#[derive(Debug, Clone)]
pub struct AdamW {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    decay_mask: Vec<bool>,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64, decay_mask: Vec<bool>) -> Self {
        let n = decay_mask.len();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            decay_mask,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for i in 0..params.len() {
            if self.decay_mask[i] {
                params[i] -= self.lr * self.weight_decay * params[i];
            }
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

fn flatten(params: &AlignParams) -> Vec<f64> {
    let mut flat = params.w_v.data().to_vec();
    flat.extend([params.log_alpha_v, params.log_alpha_b, params.log_lambda]);
    flat
}

fn unflatten(flat: &[f64], n: usize, d: usize) -> Result<AlignParams> {
    let k = n * d;
    Ok(AlignParams {
        w_v: EmbeddingMatrix::new(n, d, flat[..k].to_vec())?,
        log_alpha_v: flat[k],
        log_alpha_b: flat[k + 1],
        log_lambda: flat[k + 2],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: AlignParams,
    /// Entry 0 is the mean batch loss at initialisation; entry `e` the mean
    /// loss over the mini-batches of epoch `e`.
    pub history: Vec<f64>,
}

impl TrainOutcome {
    pub fn write_history(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("epoch,mean_loss\n");
        for (e, l) in self.history.iter().enumerate() {
            out.push_str(&format!("{e},{l:?}\n"));
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Mean loss over consecutive mini-batches in dataset order.
pub fn mean_batch_loss(
    data: &AlignBatch,
    params: &AlignParams,
    m: &LorentzManifold,
    batch_size: usize,
) -> Result<f64> {
    let order: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in order.chunks(batch_size.max(1)) {
        total += infonce_loss(&data.select(chunk), params, m)?;
        count += 1;
    }
    Ok(total / count as f64)
}

/// Trains `(W_v, alpha_v, alpha_b, lambda)` with AdamW over shuffled
/// mini-batches. Weight decay applies to `W_v` only.
pub fn train_align(data: &AlignBatch, cfg: &TrainConfig, curvature: f64) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Argument("empty training set".into()));
    }
    let n = data.z_brain.dim();
    let d = data.z_semantic.dim();
    let m = LorentzManifold::new(curvature, n)?;
    let batch_size = cfg.batch_size.min(data.len());
    let mut params = AlignParams::init(n, d);

    let mut history = vec![mean_batch_loss(data, &params, &m, batch_size)?];
    let mut flat = flatten(&params);
    let mut mask = vec![true; n * d];
    mask.extend([false; 3]);
    let mut opt = AdamW::new(cfg.learning_rate, cfg.weight_decay, mask);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch_size) {
            let batch = data.select(chunk);
            let (loss, grad) = loss_grad(&batch, &params, &m)?;
            let mut g = grad.w_v;
            g.extend([grad.log_alpha_v, grad.log_alpha_b, grad.log_lambda]);
            opt.step(&mut flat, &g);
            params = unflatten(&flat, n, d)?;
            total += loss;
            batches += 1;
        }
        let mean = total / batches as f64;
        log::debug!("epoch {epoch}: mean loss {mean:.6}");
        history.push(mean);
    }
    Ok(TrainOutcome { params, history })
}

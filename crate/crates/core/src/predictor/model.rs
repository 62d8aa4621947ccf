//! Two-layer transformer encoder over angle-bin tokens.
//!
//! Each of the 120 tokens is the 12-cell radial occupancy row of one bearing.
//! Tokens are embedded linearly, a learned positional encoding is added, and
//! post-norm encoder layers (multi-head self-attention, then a ReLU
//! feed-forward block, each followed by residual + LayerNorm) mix information
//! across bearings. A linear head maps every token back to 12 logits.
//!
//! Forward and backward passes are written out by hand so the model has no
//! autodiff dependency; the gradient is checked against finite differences
//! in the tests.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Heatmap;
use crate::error::{Error, Result};
use crate::obstacle::ObstacleMap;
use crate::radial::RadialGrid;

const LN_EPS: f64 = 1e-5;
const PARAMS_PER_LAYER: usize = 16;
const CHECKPOINT_FORMAT: &str = "vlnce-waypoint-predictor";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub num_heads: usize,
    pub ff_dim: usize,
    pub num_layers: usize,
    /// Initialisation seed.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            num_heads: 4,
            ff_dim: 128,
            num_layers: 2,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.num_heads == 0 || self.ff_dim == 0 || self.num_layers == 0 {
            return Err(Error::InvalidConfig("model dimensions must be positive".into()));
        }
        if self.d_model % self.num_heads != 0 {
            return Err(Error::InvalidConfig(format!(
                "d_model {} is not divisible by {} heads",
                self.d_model, self.num_heads
            )));
        }
        Ok(())
    }
}

// Offsets inside a layer's parameter block.
const WQ: usize = 0;
const BQ: usize = 1;
const WK: usize = 2;
const BK: usize = 3;
const WV: usize = 4;
const BV: usize = 5;
const WO: usize = 6;
const BO: usize = 7;
const LN1_G: usize = 8;
const LN1_B: usize = 9;
const W1: usize = 10;
const B1: usize = 11;
const W2: usize = 12;
const B2: usize = 13;
const LN2_G: usize = 14;
const LN2_B: usize = 15;

const LAYER_NAMES: [&str; PARAMS_PER_LAYER] = [
    "attn.wq", "attn.bq", "attn.wk", "attn.bk", "attn.wv", "attn.bv", "attn.wo", "attn.bo",
    "ln1.gamma", "ln1.beta", "ff.w1", "ff.b1", "ff.w2", "ff.b2", "ln2.gamma", "ln2.beta",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel {
    config: ModelConfig,
    grid: RadialGrid,
    params: Vec<Array2<f64>>,
}

struct LayerCache {
    x_in: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Vec<Array2<f64>>,
    o: Array2<f64>,
    xhat1: Array2<f64>,
    inv1: Array1<f64>,
    y: Array2<f64>,
    hpre: Array2<f64>,
    h: Array2<f64>,
    xhat2: Array2<f64>,
    inv2: Array1<f64>,
}

struct Cache {
    input: Array2<f64>,
    batch: usize,
    layers: Vec<LayerCache>,
    last: Array2<f64>,
}

fn add_row(m: &mut Array2<f64>, row: &Array2<f64>) {
    *m += &row.row(0);
}

fn col_sums(m: &Array2<f64>) -> Array2<f64> {
    m.sum_axis(Axis(0)).insert_axis(Axis(0))
}

fn layer_norm(x: &Array2<f64>, gamma: &Array2<f64>, beta: &Array2<f64>) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv = Array1::zeros(x.nrows());
    for (mut row, inv_r) in xhat.axis_iter_mut(Axis(0)).zip(inv.iter_mut()) {
        let mu = row.sum() / d;
        let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d;
        let is = 1.0 / (var + LN_EPS).sqrt();
        row.mapv_inplace(|v| (v - mu) * is);
        *inv_r = is;
    }
    let mut y = &xhat * &gamma.row(0);
    add_row(&mut y, beta);
    (y, xhat, inv)
}

/// Returns (dx, dgamma, dbeta).
fn layer_norm_backward(
    dy: &Array2<f64>,
    xhat: &Array2<f64>,
    inv: &Array1<f64>,
    gamma: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let dgamma = col_sums(&(dy * xhat));
    let dbeta = col_sums(dy);
    let dxhat = dy * &gamma.row(0);
    let d = dy.ncols() as f64;
    let mut dx = Array2::zeros(dy.raw_dim());
    for r in 0..dy.nrows() {
        let dxh = dxhat.row(r);
        let xh = xhat.row(r);
        let mean_dxh = dxh.sum() / d;
        let mean_dxh_xh = dxh.dot(&xh) / d;
        let is = inv[r];
        let mut out = dx.row_mut(r);
        for c in 0..dxh.len() {
            out[c] = is * (dxh[c] - mean_dxh - xh[c] * mean_dxh_xh);
        }
    }
    (dx, dgamma, dbeta)
}

fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

impl PredictorModel {
    /// Randomly initialised model: linear weights uniform in
    /// `±1/sqrt(fan_in)`, biases zero, LayerNorm identity, positional
    /// encoding uniform in `±0.1`.
    pub fn new(grid: RadialGrid, config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut model = Self::zeroed(grid, config)?;
        for (idx, p) in model.params.iter_mut().enumerate() {
            let name = model_param_name(&config, idx);
            if name.ends_with("gamma") {
                p.fill(1.0);
            } else if name == "embed.pos" {
                p.mapv_inplace(|_| rng.random_range(-0.1..0.1));
            } else if p.nrows() > 1 {
                let bound = 1.0 / (p.nrows() as f64).sqrt();
                p.mapv_inplace(|_| rng.random_range(-bound..bound));
            }
        }
        Ok(model)
    }

    /// Model with every parameter set to zero.
    pub fn zeroed(grid: RadialGrid, config: ModelConfig) -> Result<Self> {
        config.validate()?;
        grid.validate()?;
        let shapes = param_shapes(&grid, &config);
        Ok(Self {
            config,
            grid,
            params: shapes.into_iter().map(Array2::zeros).collect(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn params(&self) -> &[Array2<f64>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    pub fn param_name(&self, idx: usize) -> String {
        model_param_name(&self.config, idx)
    }

    fn head(&self) -> usize {
        3 + self.config.num_layers * PARAMS_PER_LAYER
    }

    fn lp(&self, layer: usize, off: usize) -> &Array2<f64> {
        &self.params[3 + layer * PARAMS_PER_LAYER + off]
    }

    /// Sets the output bias, mainly useful for tests.
    pub fn set_head_bias(&mut self, value: f64) {
        let h = self.head();
        self.params[h + 1].fill(value);
    }

    fn forward(&self, input: ArrayView2<f64>, batch: usize) -> (Array2<f64>, Cache) {
        let t = self.grid.num_angles;
        let d = self.config.d_model;
        let nh = self.config.num_heads;
        let dh = d / nh;
        let scale = 1.0 / (dh as f64).sqrt();

        let mut x = input.dot(&self.params[0]);
        add_row(&mut x, &self.params[1]);
        for b in 0..batch {
            let mut block = x.slice_mut(s![b * t..(b + 1) * t, ..]);
            block += &self.params[2];
        }

        let mut layers = Vec::with_capacity(self.config.num_layers);
        for l in 0..self.config.num_layers {
            let mut q = x.dot(self.lp(l, WQ));
            add_row(&mut q, self.lp(l, BQ));
            let mut k = x.dot(self.lp(l, WK));
            add_row(&mut k, self.lp(l, BK));
            let mut v = x.dot(self.lp(l, WV));
            add_row(&mut v, self.lp(l, BV));

            let mut o = Array2::zeros((batch * t, d));
            let mut attn = Vec::with_capacity(batch * nh);
            for b in 0..batch {
                let rows = b * t..(b + 1) * t;
                for h in 0..nh {
                    let cols = h * dh..(h + 1) * dh;
                    let qh = q.slice(s![rows.clone(), cols.clone()]);
                    let kh = k.slice(s![rows.clone(), cols.clone()]);
                    let vh = v.slice(s![rows.clone(), cols.clone()]);
                    let mut sc = qh.dot(&kh.t());
                    sc *= scale;
                    softmax_rows(&mut sc);
                    o.slice_mut(s![rows.clone(), cols]).assign(&sc.dot(&vh));
                    attn.push(sc);
                }
            }
            let mut att = o.dot(self.lp(l, WO));
            add_row(&mut att, self.lp(l, BO));
            let r1 = &x + &att;
            let (y, xhat1, inv1) = layer_norm(&r1, self.lp(l, LN1_G), self.lp(l, LN1_B));

            let mut hpre = y.dot(self.lp(l, W1));
            add_row(&mut hpre, self.lp(l, B1));
            let h = hpre.mapv(|v| v.max(0.0));
            let mut f = h.dot(self.lp(l, W2));
            add_row(&mut f, self.lp(l, B2));
            let r2 = &y + &f;
            let (x_next, xhat2, inv2) = layer_norm(&r2, self.lp(l, LN2_G), self.lp(l, LN2_B));

            layers.push(LayerCache {
                x_in: std::mem::replace(&mut x, x_next),
                q,
                k,
                v,
                attn,
                o,
                xhat1,
                inv1,
                y,
                hpre,
                h,
                xhat2,
                inv2,
            });
        }

        let hd = self.head();
        let mut logits = x.dot(&self.params[hd]);
        add_row(&mut logits, &self.params[hd + 1]);
        (
            logits,
            Cache {
                input: input.to_owned(),
                batch,
                layers,
                last: x,
            },
        )
    }

    fn backward(&self, cache: &Cache, dlogits: &Array2<f64>) -> Vec<Array2<f64>> {
        let t = self.grid.num_angles;
        let d = self.config.d_model;
        let nh = self.config.num_heads;
        let dh = d / nh;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut grads: Vec<Array2<f64>> = self.params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();

        let hd = self.head();
        grads[hd] = cache.last.t().dot(dlogits);
        grads[hd + 1] = col_sums(dlogits);
        let mut dx = dlogits.dot(&self.params[hd].t());

        for l in (0..self.config.num_layers).rev() {
            let c = &cache.layers[l];
            let base = 3 + l * PARAMS_PER_LAYER;

            let (dr2, dg2, db2) = layer_norm_backward(&dx, &c.xhat2, &c.inv2, self.lp(l, LN2_G));
            grads[base + LN2_G] = dg2;
            grads[base + LN2_B] = db2;
            grads[base + W2] = c.h.t().dot(&dr2);
            grads[base + B2] = col_sums(&dr2);
            let mut dhpre = dr2.dot(&self.lp(l, W2).t());
            ndarray::Zip::from(&mut dhpre).and(&c.hpre).for_each(|g, &p| {
                if p <= 0.0 {
                    *g = 0.0;
                }
            });
            grads[base + W1] = c.y.t().dot(&dhpre);
            grads[base + B1] = col_sums(&dhpre);
            let dy = dr2 + dhpre.dot(&self.lp(l, W1).t());

            let (dr1, dg1, db1) = layer_norm_backward(&dy, &c.xhat1, &c.inv1, self.lp(l, LN1_G));
            grads[base + LN1_G] = dg1;
            grads[base + LN1_B] = db1;
            grads[base + WO] = c.o.t().dot(&dr1);
            grads[base + BO] = col_sums(&dr1);
            let dout = dr1.dot(&self.lp(l, WO).t());

            let mut dq = Array2::zeros((cache.batch * t, d));
            let mut dk = Array2::zeros((cache.batch * t, d));
            let mut dv = Array2::zeros((cache.batch * t, d));
            for b in 0..cache.batch {
                let rows = b * t..(b + 1) * t;
                for h in 0..nh {
                    let cols = h * dh..(h + 1) * dh;
                    let a = &c.attn[b * nh + h];
                    let doh = dout.slice(s![rows.clone(), cols.clone()]);
                    let qh = c.q.slice(s![rows.clone(), cols.clone()]);
                    let kh = c.k.slice(s![rows.clone(), cols.clone()]);
                    let vh = c.v.slice(s![rows.clone(), cols.clone()]);
                    dv.slice_mut(s![rows.clone(), cols.clone()]).assign(&a.t().dot(&doh));
                    let da = doh.dot(&vh.t());
                    let mut ds = &da * a;
                    for (mut row, arow) in ds.axis_iter_mut(Axis(0)).zip(a.axis_iter(Axis(0))) {
                        let dot: f64 = row.sum();
                        row.zip_mut_with(&arow, |g, &p| *g -= p * dot);
                    }
                    ds *= scale;
                    dq.slice_mut(s![rows.clone(), cols.clone()]).assign(&ds.dot(&kh));
                    dk.slice_mut(s![rows.clone(), cols]).assign(&ds.t().dot(&qh));
                }
            }
            grads[base + WQ] = c.x_in.t().dot(&dq);
            grads[base + BQ] = col_sums(&dq);
            grads[base + WK] = c.x_in.t().dot(&dk);
            grads[base + BK] = col_sums(&dk);
            grads[base + WV] = c.x_in.t().dot(&dv);
            grads[base + BV] = col_sums(&dv);

            dx = dr1
                + dq.dot(&self.lp(l, WQ).t())
                + dk.dot(&self.lp(l, WK).t())
                + dv.dot(&self.lp(l, WV).t());
        }

        grads[0] = cache.input.t().dot(&dx);
        grads[1] = col_sums(&dx);
        let mut dpos = Array2::zeros((t, d));
        for b in 0..cache.batch {
            dpos += &dx.slice(s![b * t..(b + 1) * t, ..]);
        }
        grads[2] = dpos;
        grads
    }

    fn stack_inputs(&self, maps: &[&ObstacleMap]) -> Array2<f64> {
        let t = self.grid.num_angles;
        let r = self.grid.num_radii;
        let mut data = Vec::with_capacity(maps.len() * t * r);
        for m in maps {
            data.extend(m.as_features());
        }
        Array2::from_shape_vec((maps.len() * t, r), data).expect("feature length matches grid")
    }

    /// Raw 120×12 logits for one obstacle map.
    pub fn predict(&self, map: &ObstacleMap) -> Result<Heatmap> {
        if map.grid != self.grid {
            return Err(Error::GridMismatch("obstacle map grid differs from the model's".into()));
        }
        let input = self.stack_inputs(&[map]);
        let (logits, _) = self.forward(input.view(), 1);
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteOutput);
        }
        Heatmap::from_values(self.grid, logits.into_iter().collect())
    }

    /// Mean squared error over a batch and its gradient with respect to every
    /// parameter (same order as [`Self::params`]).
    pub fn loss_and_grad(&self, maps: &[&ObstacleMap], targets: &[&Heatmap]) -> (f64, Vec<Array2<f64>>) {
        let (loss, dlogits, cache) = self.loss_forward(maps, targets);
        (loss, self.backward(&cache, &dlogits))
    }

    pub fn loss(&self, maps: &[&ObstacleMap], targets: &[&Heatmap]) -> f64 {
        self.loss_forward(maps, targets).0
    }

    fn loss_forward(&self, maps: &[&ObstacleMap], targets: &[&Heatmap]) -> (f64, Array2<f64>, Cache) {
        let input = self.stack_inputs(maps);
        let (logits, cache) = self.forward(input.view(), maps.len());
        let target_data: Vec<f64> = targets.iter().flat_map(|h| h.values.iter().copied()).collect();
        let target = Array2::from_shape_vec(logits.raw_dim(), target_data).expect("target size matches grid");
        let diff = &logits - &target;
        let n = diff.len() as f64;
        let loss = diff.iter().map(|v| v * v).sum::<f64>() / n;
        let dlogits = diff * (2.0 / n);
        (loss, dlogits, cache)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config,
            grid: self.grid,
            tensors: self
                .params
                .iter()
                .enumerate()
                .map(|(i, p)| Tensor {
                    name: self.param_name(i),
                    shape: [p.nrows(), p.ncols()],
                    data: p.iter().copied().collect(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unexpected format {:?}", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        let mut model = Self::zeroed(ck.grid, ck.config)?;
        if ck.tensors.len() != model.params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                model.params.len(),
                ck.tensors.len()
            )));
        }
        for (i, t) in ck.tensors.into_iter().enumerate() {
            let expected = model.param_name(i);
            let p = &mut model.params[i];
            if t.name != expected || t.shape != [p.nrows(), p.ncols()] {
                return Err(Error::Checkpoint(format!(
                    "tensor {i}: expected {expected} {:?}, found {} {:?}",
                    [p.nrows(), p.ncols()],
                    t.name,
                    t.shape
                )));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Checkpoint(format!("tensor {} holds non-finite values", t.name)));
            }
            *p = Array2::from_shape_vec((t.shape[0], t.shape[1]), t.data)
                .map_err(|e| Error::Checkpoint(e.to_string()))?;
        }
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, &self.to_checkpoint())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::from_checkpoint(serde_json::from_reader(f)?)
    }
}

fn param_shapes(grid: &RadialGrid, cfg: &ModelConfig) -> Vec<(usize, usize)> {
    let d = cfg.d_model;
    let r = grid.num_radii;
    let mut shapes = vec![(r, d), (1, d), (grid.num_angles, d)];
    for _ in 0..cfg.num_layers {
        shapes.extend([
            (d, d),
            (1, d),
            (d, d),
            (1, d),
            (d, d),
            (1, d),
            (d, d),
            (1, d),
            (1, d),
            (1, d),
            (d, cfg.ff_dim),
            (1, cfg.ff_dim),
            (cfg.ff_dim, d),
            (1, d),
            (1, d),
            (1, d),
        ]);
    }
    shapes.extend([(d, r), (1, r)]);
    shapes
}

fn model_param_name(cfg: &ModelConfig, idx: usize) -> String {
    match idx {
        0 => "embed.weight".into(),
        1 => "embed.bias".into(),
        2 => "embed.pos".into(),
        i if i < 3 + cfg.num_layers * PARAMS_PER_LAYER => {
            let l = (i - 3) / PARAMS_PER_LAYER;
            format!("layer{l}.{}", LAYER_NAMES[(i - 3) % PARAMS_PER_LAYER])
        }
        i if i == 3 + cfg.num_layers * PARAMS_PER_LAYER => "head.weight".into(),
        _ => "head.bias".into(),
    }
}

/// Versioned on-disk form of a [`PredictorModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub grid: RadialGrid,
    pub tensors: Vec<Tensor>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::Cell;

    fn small_cfg() -> ModelConfig {
        ModelConfig {
            d_model: 8,
            num_heads: 2,
            ff_dim: 16,
            num_layers: 2,
            seed: 3,
        }
    }

    fn random_map(seed: u64, p: f64) -> ObstacleMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = RadialGrid::default();
        ObstacleMap::from_flags(grid, (0..grid.len()).map(|_| rng.random_bool(p)).collect()).unwrap()
    }

    #[test]
    fn zero_model_outputs_head_bias() {
        let mut m = PredictorModel::zeroed(RadialGrid::default(), ModelConfig::default()).unwrap();
        m.set_head_bias(0.37);
        let h = m.predict(&random_map(1, 0.2)).unwrap();
        assert!(h.values.iter().all(|&v| (v - 0.37).abs() < 1e-15));
    }

    #[test]
    fn prediction_is_deterministic() {
        let m = PredictorModel::new(RadialGrid::default(), ModelConfig::default()).unwrap();
        let map = random_map(2, 0.1);
        assert_eq!(m.predict(&map).unwrap(), m.predict(&map).unwrap());
        assert_eq!(m.predict(&map).unwrap().values.len(), 1440);
    }

    #[test]
    fn position_matters() {
        let m = PredictorModel::new(RadialGrid::default(), ModelConfig::default()).unwrap();
        let map = random_map(4, 0.1);
        let base = m.predict(&map).unwrap();
        let rot = m.predict(&map.rotated(1)).unwrap();
        let grid = RadialGrid::default();
        let max_diff = grid
            .cells()
            .map(|c| (rot.get(Cell::new((c.a + 1) % 120, c.j)) - base.get(c)).abs())
            .fold(0.0, f64::max);
        assert!(max_diff > 1e-6, "rotating the input only rotated the output");
    }

    #[test]
    fn corrupt_weights_detected() {
        let mut m = PredictorModel::new(RadialGrid::default(), small_cfg()).unwrap();
        let h = m.head();
        m.params_mut()[h][[0, 0]] = f64::NAN;
        assert!(matches!(m.predict(&random_map(5, 0.1)), Err(Error::NonFiniteOutput)));
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = ModelConfig {
            d_model: 10,
            num_heads: 4,
            ..ModelConfig::default()
        };
        assert!(PredictorModel::new(RadialGrid::default(), cfg).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = PredictorModel::new(RadialGrid::default(), small_cfg()).unwrap();
        let json = serde_json::to_string(&m.to_checkpoint()).unwrap();
        let back = PredictorModel::from_checkpoint(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, m);

        let mut ck = m.to_checkpoint();
        ck.tensors[3].shape = [1, 1];
        assert!(PredictorModel::from_checkpoint(ck).is_err());
        let mut ck = m.to_checkpoint();
        ck.version = 99;
        assert!(PredictorModel::from_checkpoint(ck).is_err());
    }

    /// Central finite differences on every parameter of a reduced model.
    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let grid = RadialGrid::default();
        let mut model = PredictorModel::new(grid, small_cfg()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in model.params_mut() {
            p.mapv_inplace(|v| v + rng.random_range(-0.05..0.05));
        }
        let maps = [random_map(7, 0.15), random_map(8, 0.3)];
        let targets: Vec<Heatmap> = (0..2)
            .map(|_| Heatmap::from_values(grid, (0..1440).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap())
            .collect();
        let mrefs: Vec<&ObstacleMap> = maps.iter().collect();
        let trefs: Vec<&Heatmap> = targets.iter().collect();

        let (_, grads) = model.loss_and_grad(&mrefs, &trefs);
        let step = 1e-5;
        let mut worst: f64 = 0.0;
        for pi in 0..model.params.len() {
            for ei in 0..model.params[pi].len() {
                let orig = model.params[pi].as_slice().unwrap()[ei];
                model.params[pi].as_slice_mut().unwrap()[ei] = orig + step;
                let up = model.loss(&mrefs, &trefs);
                model.params[pi].as_slice_mut().unwrap()[ei] = orig - step;
                let down = model.loss(&mrefs, &trefs);
                model.params[pi].as_slice_mut().unwrap()[ei] = orig;
                let numeric = (up - down) / (2.0 * step);
                let analytic = grads[pi].as_slice().unwrap()[ei];
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-7);
                worst = worst.max(rel);
                assert!(
                    rel < 1e-4,
                    "{}[{ei}]: analytic {analytic:e} vs numeric {numeric:e} (rel {rel:e})",
                    model.param_name(pi)
                );
            }
        }
        eprintln!("worst relative gradient error: {worst:e}");
    }
}

//! Named parameter storage, per-pass binding to a tape, and Adam.

use std::collections::HashMap;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tape::{BatchStats, Gradients, Mat, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BufferId(pub(crate) usize);

/// Trainable tensors plus non-trainable buffers (batch-norm running
/// statistics), each with a unique name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Mat>,
    buffer_names: Vec<String>,
    buffers: Vec<Mat>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Mat) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn add_buffer(&mut self, name: impl Into<String>, value: Mat) -> BufferId {
        self.buffer_names.push(name.into());
        self.buffers.push(value);
        BufferId(self.buffers.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.values[id.0]
    }

    pub fn buffer(&self, id: BufferId) -> &Mat {
        &self.buffers[id.0]
    }

    pub fn buffer_mut(&mut self, id: BufferId) -> &mut Mat {
        &mut self.buffers[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn named(&self) -> impl Iterator<Item = (&str, &Mat)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn named_buffers(&self) -> impl Iterator<Item = (&str, &Mat)> {
        self.buffer_names.iter().map(String::as_str).zip(&self.buffers)
    }

    /// Total number of trainable scalars.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Mat::len).sum()
    }

    /// Replaces every value with the same-named value from `other`.
    pub fn load_from(&mut self, other: &ParamStore) -> Result<(), String> {
        if other.names != self.names || other.buffer_names != self.buffer_names {
            return Err("parameter layout differs".to_string());
        }
        for (dst, src) in self.values.iter_mut().zip(&other.values) {
            if dst.dim() != src.dim() {
                return Err(format!("shape mismatch {:?} vs {:?}", dst.dim(), src.dim()));
            }
        }
        self.values.clone_from(&other.values);
        self.buffers.clone_from(&other.buffers);
        Ok(())
    }

    pub(crate) fn set_all(&mut self, values: Vec<Mat>, buffers: Vec<Mat>) {
        self.values = values;
        self.buffers = buffers;
    }

    pub(crate) fn buffer_names(&self) -> &[String] {
        &self.buffer_names
    }
}

/// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` initialization.
pub fn fan_in_uniform<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, fan_in: usize) -> Mat {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Mat::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..=bound))
}

/// One forward pass: a tape, the parameters bound as leaves on first use,
/// and the batch-norm statistics observed in training mode.
pub struct Pass<'s> {
    pub tape: Tape,
    store: &'s ParamStore,
    leaves: Vec<Option<Var>>,
    pub training: bool,
    dropout_rng: ChaCha8Rng,
    bn_stats: Vec<(BufferId, BufferId, BatchStats)>,
}

impl<'s> Pass<'s> {
    pub fn new(store: &'s ParamStore, training: bool, seed: u64) -> Self {
        Self {
            tape: Tape::new(),
            store,
            leaves: vec![None; store.len()],
            training,
            dropout_rng: ChaCha8Rng::seed_from_u64(seed),
            bn_stats: Vec::new(),
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.leaves[id.0] {
            return v;
        }
        let v = self.tape.leaf(self.store.get(id).clone());
        self.leaves[id.0] = Some(v);
        v
    }

    /// Inverted dropout with drop probability `p`; identity outside training.
    pub fn dropout(&mut self, x: Var, p: f64) -> Var {
        if !self.training || p <= 0.0 {
            return x;
        }
        let keep = 1.0 - p;
        let dim = self.tape.shape(x);
        let rng = &mut self.dropout_rng;
        let mask = Mat::from_shape_fn(dim, |_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 });
        self.tape.mul_const(x, Rc::new(mask))
    }

    pub(crate) fn record_bn(&mut self, mean: BufferId, var: BufferId, stats: BatchStats) {
        self.bn_stats.push((mean, var, stats));
    }

    /// Gradients per parameter, zero for parameters not on the path.
    pub fn param_grads(&self, grads: &Gradients) -> Vec<Mat> {
        (0..self.store.len())
            .map(|i| match self.leaves[i] {
                Some(v) => grads.get_or_zeros(v, self.store.get(ParamId(i)).dim()),
                None => Mat::zeros(self.store.get(ParamId(i)).dim()),
            })
            .collect()
    }

    /// Batch statistics to fold into running averages.
    pub fn take_bn_stats(&mut self) -> Vec<(BufferId, BufferId, BatchStats)> {
        std::mem::take(&mut self.bn_stats)
    }
}

/// `running = momentum * running + (1 - momentum) * batch`.
pub fn apply_bn_stats(store: &mut ParamStore, stats: &[(BufferId, BufferId, BatchStats)], momentum: f64) {
    for (mean_id, var_id, s) in stats {
        for (r, b) in store.buffer_mut(*mean_id).iter_mut().zip(&s.mean) {
            *r = momentum * *r + (1.0 - momentum) * b;
        }
        for (r, b) in store.buffer_mut(*var_id).iter_mut().zip(&s.var) {
            *r = momentum * *r + (1.0 - momentum) * b;
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Mat>,
    v: Vec<Mat>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<Mat> = store.named().map(|(_, m)| Mat::zeros(m.dim())).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &[Mat]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (i, g) in grads.iter().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let p = store.get_mut(ParamId(i));
            ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let update = self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
                if update != 0.0 {
                    *p -= update;
                }
            });
        }
    }
}

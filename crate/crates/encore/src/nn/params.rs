use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use candle_core::{DType, Device, Tensor, Var};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::stream;

/// Initialization for a freshly created parameter tensor.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    Normal(f64),
    Zeros,
    Ones,
}

enum Mode {
    Fresh(ChaCha12Rng),
    Loaded(BTreeMap<String, Tensor>),
}

struct Store {
    mode: Mode,
    vars: BTreeMap<String, Var>,
}

/// Collects named trainable parameters for one model.
///
/// Fresh mode samples f64 weights from a dedicated ChaCha stream, so a model
/// built in a fixed construction order from the same seed is bit-identical.
/// Loaded mode resolves each request against a checkpoint's tensors instead.
/// All parameters live on CPU in f64.
#[derive(Clone)]
pub struct ParamBuilder {
    store: Rc<RefCell<Store>>,
    prefix: String,
}

impl ParamBuilder {
    pub fn fresh(seed: u64, tag: &str) -> Self {
        ParamBuilder {
            store: Rc::new(RefCell::new(Store {
                mode: Mode::Fresh(stream(seed, tag)),
                vars: BTreeMap::new(),
            })),
            prefix: String::new(),
        }
    }

    pub fn from_tensors(tensors: BTreeMap<String, Tensor>) -> Self {
        ParamBuilder {
            store: Rc::new(RefCell::new(Store {
                mode: Mode::Loaded(tensors),
                vars: BTreeMap::new(),
            })),
            prefix: String::new(),
        }
    }

    /// Sub-builder with `seg` appended to the name prefix.
    pub fn pp(&self, seg: &str) -> Self {
        let prefix = if self.prefix.is_empty() {
            seg.to_string()
        } else {
            format!("{}.{seg}", self.prefix)
        };
        ParamBuilder {
            store: Rc::clone(&self.store),
            prefix,
        }
    }

    /// Fetches or creates the parameter `prefix.name` with the given shape.
    pub fn get(&self, name: &str, dims: &[usize], init: Init) -> Result<Tensor> {
        let full = if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        };
        let mut store = self.store.borrow_mut();
        if let Some(var) = store.vars.get(&full) {
            return Ok(var.as_tensor().clone());
        }
        let n: usize = dims.iter().product();
        let tensor = match &mut store.mode {
            Mode::Fresh(rng) => {
                let data: Vec<f64> = match init {
                    Init::Normal(std) => {
                        let dist = Normal::new(0.0, std).expect("finite std");
                        (0..n).map(|_| dist.sample(rng)).collect()
                    }
                    Init::Zeros => vec![0.0; n],
                    Init::Ones => vec![1.0; n],
                };
                Tensor::from_vec(data, dims, &Device::Cpu)?
            }
            Mode::Loaded(tensors) => {
                let t = tensors.get(&full).ok_or_else(|| {
                    Error::CheckpointIncompatible(format!("missing tensor {full}"))
                })?;
                if t.dims() != dims {
                    return Err(Error::CheckpointIncompatible(format!(
                        "tensor {full}: shape {:?}, expected {dims:?}",
                        t.dims()
                    )));
                }
                t.to_dtype(DType::F64)?.to_device(&Device::Cpu)?
            }
        };
        let var = Var::from_tensor(&tensor)?;
        let out = var.as_tensor().clone();
        store.vars.insert(full, var);
        Ok(out)
    }

    /// All parameter variables in name order, for the optimizer.
    pub fn vars(&self) -> Vec<Var> {
        self.store.borrow().vars.values().cloned().collect()
    }

    /// Snapshot of current parameter values keyed by full name.
    pub fn named_tensors(&self) -> BTreeMap<String, Tensor> {
        self.store
            .borrow()
            .vars
            .iter()
            .map(|(k, v)| (k.clone(), v.as_tensor().clone()))
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.store
            .borrow()
            .vars
            .values()
            .map(|v| v.as_tensor().elem_count())
            .sum()
    }
}

/// Standard-normal tensor drawn from a caller-owned ChaCha stream, the
/// only sampling path used at train and inference time.
pub fn randn_tensor(rng: &mut ChaCha12Rng, dims: &[usize]) -> Result<Tensor> {
    let n: usize = dims.iter().product();
    let dist = Normal::new(0.0, 1.0).expect("unit normal");
    let data: Vec<f64> = (0..n).map(|_| dist.sample(rng)).collect();
    Ok(Tensor::from_vec(data, dims, &Device::Cpu)?)
}

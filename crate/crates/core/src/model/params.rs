use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use candle_core::{DType, Device, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};

/// Named parameter set. Initial values are drawn from a generator seeded by
/// `(seed, name)`, so a parameter's initial value does not depend on the
/// order in which layers are built.
#[derive(Debug, Clone)]
pub struct ParamStore {
    seed: u64,
    vars: BTreeMap<String, Var>,
}

#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    Ones,
    /// Normal with std `sqrt(2 / fan_in)`.
    HeNormal { fan_in: usize },
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    GlorotUniform { fan_in: usize, fan_out: usize },
}

/// Names containing this marker hold running statistics, not learnable weights.
pub const STATISTIC_MARKER: &str = "running_";

fn name_hash(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            vars: BTreeMap::new(),
        }
    }

    pub fn get(&mut self, name: &str, shape: &[usize], init: Init) -> Result<Var> {
        if let Some(var) = self.vars.get(name) {
            return Ok(var.clone());
        }
        let n: usize = shape.iter().product();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ name_hash(name));
        let values: Vec<f32> = match init {
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::HeNormal { fan_in } => {
                let dist = Normal::new(0.0, (2.0 / fan_in.max(1) as f64).sqrt())
                    .expect("finite std");
                (0..n).map(|_| dist.sample(&mut rng) as f32).collect()
            }
            Init::GlorotUniform { fan_in, fan_out } => {
                let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit);
                (0..n).map(|_| dist.sample(&mut rng) as f32).collect()
            }
        };
        let var = Var::from_tensor(&Tensor::from_vec(values, shape, &Device::Cpu)?)?;
        self.vars.insert(name.to_string(), var.clone());
        Ok(var)
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.keys().map(String::as_str)
    }

    pub fn var(&self, name: &str) -> Option<&Var> {
        self.vars.get(name)
    }

    /// Learnable variables whose name starts with `prefix`, in name order.
    pub fn trainable(&self, prefix: &str) -> Vec<Var> {
        self.vars
            .iter()
            .filter(|(k, _)| k.starts_with(prefix) && !k.contains(STATISTIC_MARKER))
            .map(|(_, v)| v.clone())
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.vars.values().map(|v| v.elem_count()).sum()
    }

    /// Deep copy of every tensor, for best-epoch restoration.
    pub fn snapshot(&self) -> Result<BTreeMap<String, Tensor>> {
        self.vars
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.as_tensor().copy()?)))
            .collect()
    }

    pub fn restore(&self, snapshot: &BTreeMap<String, Tensor>) -> Result<()> {
        for (name, var) in &self.vars {
            let t = snapshot.get(name).ok_or_else(|| {
                Error::InvalidConfig(format!("snapshot is missing parameter {name}"))
            })?;
            var.set(t)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let tensors: HashMap<String, Tensor> = self
            .vars
            .iter()
            .map(|(k, v)| (k.clone(), v.as_tensor().clone()))
            .collect();
        candle_core::safetensors::save(&tensors, path)?;
        Ok(())
    }

    /// Overwrites the values of every parameter named in the file. With
    /// `strict`, the file must cover every parameter of this store.
    pub fn load(&self, path: impl AsRef<Path>, strict: bool) -> Result<usize> {
        let path = path.as_ref();
        let artifact_err = |reason: String| Error::Artifact {
            path: path.to_path_buf(),
            reason,
        };
        let tensors = candle_core::safetensors::load(path, &Device::Cpu)
            .map_err(|e| artifact_err(format!("unreadable weights: {e}")))?;
        let mut loaded = 0;
        for (name, var) in &self.vars {
            match tensors.get(name) {
                Some(t) => {
                    if t.dims() != var.dims() {
                        return Err(artifact_err(format!(
                            "{name} has shape {:?}, expected {:?}",
                            t.dims(),
                            var.dims()
                        )));
                    }
                    var.set(&t.to_dtype(DType::F32)?)?;
                    loaded += 1;
                }
                None if strict => return Err(artifact_err(format!("missing tensor {name}"))),
                None => {}
            }
        }
        Ok(loaded)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_order_independent() {
        let mut a = ParamStore::new(7);
        let mut b = ParamStore::new(7);
        let x1 = a.get("x", &[4], Init::HeNormal { fan_in: 4 }).unwrap();
        a.get("y", &[4], Init::HeNormal { fan_in: 4 }).unwrap();
        b.get("y", &[4], Init::HeNormal { fan_in: 4 }).unwrap();
        let x2 = b.get("x", &[4], Init::HeNormal { fan_in: 4 }).unwrap();
        assert_eq!(
            x1.as_tensor().to_vec1::<f32>().unwrap(),
            x2.as_tensor().to_vec1::<f32>().unwrap()
        );
    }

    #[test]
    fn statistics_are_not_trainable() {
        let mut s = ParamStore::new(0);
        s.get("bn.gamma", &[2], Init::Ones).unwrap();
        s.get("bn.running_mean", &[2], Init::Zeros).unwrap();
        assert_eq!(s.trainable("").len(), 1);
    }

    #[test]
    fn snapshot_restore() {
        let mut s = ParamStore::new(0);
        let v = s.get("w", &[3], Init::Zeros).unwrap();
        let snap = s.snapshot().unwrap();
        v.set(&Tensor::new(&[1f32, 2., 3.], &Device::Cpu).unwrap()).unwrap();
        s.restore(&snap).unwrap();
        assert_eq!(v.as_tensor().to_vec1::<f32>().unwrap(), vec![0.0; 3]);
    }
}

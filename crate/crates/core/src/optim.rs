use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::ParamStore;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdMomentum {
    pub lr: f64,
    pub momentum: f64,
    /// Rescale the joint gradient to at most this L2 norm before stepping.
    pub clip_norm: Option<f64>,
}

impl Default for SgdMomentum {
    fn default() -> Self {
        SgdMomentum {
            lr: 0.1,
            momentum: 0.9,
            clip_norm: None,
        }
    }
}

impl SgdMomentum {
    /// `v ← μ·v − η·g; θ ← θ + v`, then zero all gradients.
    ///
    /// A non-finite gradient entry leaves every parameter untouched and
    /// returns [`Error::Divergence`]. Gradients are zeroed in both cases.
    pub fn step(&self, params: &mut ParamStore) -> Result<()> {
        let bad = params
            .iter()
            .find(|p| !p.grad.is_finite())
            .map(|p| p.name.clone());
        if let Some(name) = bad {
            params.zero_grads();
            return Err(Error::Divergence(name));
        }
        let scale = match self.clip_norm {
            Some(c) => {
                let n = params.grad_norm();
                if n > c {
                    c / n
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        for p in params.iter_mut() {
            let g = p.grad.data();
            let v = p.velocity.data_mut();
            for (vi, gi) in v.iter_mut().zip(g) {
                *vi = self.momentum * *vi - self.lr * scale * gi;
            }
            let v = p.velocity.data();
            p.value
                .data_mut()
                .iter_mut()
                .zip(v)
                .for_each(|(x, vi)| *x += vi);
        }
        params.zero_grads();
        Ok(())
    }
}

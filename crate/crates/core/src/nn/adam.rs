use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |b: f64| b > 0.0 && b < 1.0;
        if !(in_unit(self.beta1) && in_unit(self.beta2)) {
            return Err(Error::Config(format!(
                "adam betas must lie in (0, 1), got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(self.eps > 0.0) {
            return Err(Error::Config(format!(
                "adam needs lr >= 0 and eps > 0, got lr={} eps={}",
                self.lr, self.eps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Moments {
    first: Vec<f64>,
    second: Vec<f64>,
}

/// Adam optimizer state over a fixed list of parameter slots.
///
/// Slots that are not passed to [`AdamState::step`] keep their moments
/// untouched, which is how frozen blocks are excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    config: AdamConfig,
    step_count: u64,
    slots: Vec<Moments>,
}

/// One parameter tensor and its gradient for a single optimizer step.
pub struct SlotUpdate<'a> {
    pub slot: usize,
    pub name: &'a str,
    pub params: &'a mut [f64],
    pub grads: &'a [f64],
}

impl AdamState {
    pub fn new(config: AdamConfig, slot_sizes: &[usize]) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            step_count: 0,
            slots: slot_sizes
                .iter()
                .map(|&n| Moments {
                    first: vec![0.0; n],
                    second: vec![0.0; n],
                })
                .collect(),
        })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self, slot: usize) -> &[f64] {
        &self.slots[slot].first
    }

    pub fn second_moment(&self, slot: usize) -> &[f64] {
        &self.slots[slot].second
    }

    /// Applies one bias-corrected Adam update to every given slot.
    ///
    /// All gradients are validated before any parameter is written, so a
    /// non-finite gradient leaves the parameters and moments unchanged.
    pub fn step(&mut self, updates: &mut [SlotUpdate<'_>]) -> Result<()> {
        for u in updates.iter() {
            let Some(m) = self.slots.get(u.slot) else {
                return Err(Error::Dimension(format!("unknown optimizer slot {}", u.slot)));
            };
            if u.params.len() != m.first.len() || u.grads.len() != m.first.len() {
                return Err(Error::Dimension(format!(
                    "slot `{}`: {} params / {} grads, optimizer holds {}",
                    u.name,
                    u.params.len(),
                    u.grads.len(),
                    m.first.len()
                )));
            }
            if u.grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    block: u.name.to_string(),
                });
            }
        }

        self.step_count += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step_count as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for u in updates.iter_mut() {
            let m = &mut self.slots[u.slot];
            for i in 0..u.params.len() {
                let g = u.grads[i];
                m.first[i] = beta1 * m.first[i] + (1.0 - beta1) * g;
                m.second[i] = beta2 * m.second[i] + (1.0 - beta2) * g * g;
                let m_hat = m.first[i] / c1;
                let v_hat = m.second[i] / c2;
                u.params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

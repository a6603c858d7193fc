use crate::{Error, Result};

pub const PAPER_PEAK_LR: f64 = 2e-4;
pub const PAPER_WARMUP_FRACTION: f64 = 0.1;

/// Linear warmup from zero to `peak_lr`, then linear decay to `floor_lr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub peak_lr: f64,
    pub total_steps: usize,
    pub warmup_fraction: f64,
    pub floor_lr: f64,
}

impl Schedule {
    pub fn new(peak_lr: f64, total_steps: usize, warmup_fraction: f64, floor_lr: f64) -> Result<Self> {
        let s = Schedule {
            peak_lr,
            total_steps,
            warmup_fraction,
            floor_lr,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn paper(total_steps: usize) -> Self {
        Schedule {
            peak_lr: PAPER_PEAK_LR,
            total_steps,
            warmup_fraction: PAPER_WARMUP_FRACTION,
            floor_lr: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return Err(Error::Config(format!(
                "warmup_fraction must lie in (0, 1), got {}",
                self.warmup_fraction
            )));
        }
        if !(self.floor_lr >= 0.0 && self.peak_lr >= self.floor_lr) {
            return Err(Error::Config(format!(
                "need 0 <= floor_lr <= peak_lr, got floor {} peak {}",
                self.floor_lr, self.peak_lr
            )));
        }
        if self.total_steps == 0 {
            return Err(Error::Config("total_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn warmup_steps(&self) -> usize {
        ((self.total_steps as f64 * self.warmup_fraction).round() as usize).clamp(1, self.total_steps)
    }

    pub fn lr_at(&self, step: usize) -> Result<f64> {
        if step > self.total_steps {
            return Err(Error::Contract(format!(
                "step {step} outside schedule of {} steps",
                self.total_steps
            )));
        }
        let warm = self.warmup_steps();
        if step <= warm {
            return Ok(self.peak_lr * (step as f64 / warm as f64));
        }
        let frac = (self.total_steps - step) as f64 / (self.total_steps - warm) as f64;
        Ok(self.floor_lr + (self.peak_lr - self.floor_lr) * frac)
    }
}

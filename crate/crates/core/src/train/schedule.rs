/// Linear warmup from 0 to `base_lr` over `warmup` steps, then linear decay
/// reaching 0 at `total`.
pub fn lr_at(step: usize, base_lr: f64, warmup: usize, total: usize) -> f64 {
    if step < warmup {
        return base_lr * step as f64 / warmup as f64;
    }
    if step >= total {
        return 0.0;
    }
    base_lr * (total - step) as f64 / (total - warmup) as f64
}

/// Counts epochs without improvement of a maximized score.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    stale: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience: patience.max(1),
            best: None,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Records the score of `epoch`. Ties with the best score count as no
    /// improvement.
    pub fn observe(&mut self, epoch: usize, score: f64) -> Verdict {
        match self.best {
            Some(b) if score <= b => {
                self.stale += 1;
                if self.stale >= self.patience {
                    Verdict::Stop
                } else {
                    Verdict::Continue
                }
            }
            _ => {
                self.best = Some(score);
                self.best_epoch = epoch;
                self.stale = 0;
                Verdict::Improved
            }
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best.map(|b| (self.best_epoch, b))
    }
}

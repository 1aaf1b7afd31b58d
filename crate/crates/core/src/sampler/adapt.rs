use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Gaussian random-walk proposal with a Robbins–Monro scale and, for blocks,
/// a shape learned from the burn-in history.
#[derive(Debug, Clone)]
pub(crate) struct Proposal {
    dim: usize,
    log_scale: f64,
    target: f64,
    shape: Vec<f64>,
    learned_shape: bool,
    window_tried: usize,
    window_accepted: usize,
    windows: usize,
    kept_tried: usize,
    kept_accepted: usize,
    count: usize,
    mean: Vec<f64>,
    comoment: Vec<f64>,
}

impl Proposal {
    pub fn new(dim: usize, initial_sd: f64, target: f64) -> Self {
        let mut shape = vec![0.0; dim * dim];
        for i in 0..dim {
            shape[i * dim + i] = 1.0;
        }
        Proposal {
            dim,
            log_scale: initial_sd.ln(),
            target,
            shape,
            learned_shape: false,
            window_tried: 0,
            window_accepted: 0,
            windows: 0,
            kept_tried: 0,
            kept_accepted: 0,
            count: 0,
            mean: vec![0.0; dim],
            comoment: vec![0.0; dim * dim],
        }
    }

    pub fn step<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let xi: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(rng)).collect();
        let scale = self.log_scale.exp();
        (0..self.dim)
            .map(|i| scale * (0..=i).map(|j| self.shape[i * self.dim + j] * xi[j]).sum::<f64>())
            .collect()
    }

    pub fn record(&mut self, accepted: bool, burn_in: bool) {
        if burn_in {
            self.window_tried += 1;
            self.window_accepted += accepted as usize;
        } else {
            self.kept_tried += 1;
            self.kept_accepted += accepted as usize;
        }
    }

    /// Adds the current block value to the running covariance (burn-in only).
    pub fn observe(&mut self, x: &[f64]) {
        if self.dim < 2 {
            return;
        }
        self.count += 1;
        let n = self.count as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / n;
        }
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.comoment[i * self.dim + j] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    /// Closes an adaptation window once `window` proposals have been made.
    pub fn adapt(&mut self, window: usize) {
        if self.window_tried < window {
            return;
        }
        self.windows += 1;
        let rate = self.window_accepted as f64 / self.window_tried as f64;
        let gain = (1.0 / (self.windows as f64).sqrt()).min(1.0);
        self.log_scale += gain * (rate - self.target);
        self.log_scale = self.log_scale.clamp(-25.0, 10.0);
        self.window_tried = 0;
        self.window_accepted = 0;
        if self.dim >= 2 && self.count >= 20 * self.dim.max(5) {
            self.update_shape();
        }
    }

    fn update_shape(&mut self) {
        let d = self.dim;
        let n = (self.count - 1) as f64;
        let mut cov: Vec<f64> = self.comoment.iter().map(|v| v / n).collect();
        let trace = (0..d).map(|i| cov[i * d + i]).sum::<f64>() / d as f64;
        if !(trace > 0.0) || !trace.is_finite() {
            return;
        }
        for i in 0..d {
            cov[i * d + i] += 1e-6 * trace;
        }
        if let Some(l) = cholesky(&cov, d) {
            self.shape = l;
            if !self.learned_shape {
                self.learned_shape = true;
                self.log_scale = (2.38 / (d as f64).sqrt()).ln();
            }
        }
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        (self.kept_tried > 0).then(|| self.kept_accepted as f64 / self.kept_tried as f64)
    }

    #[cfg(test)]
    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }
}

fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = a[i * d + j] - (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum::<f64>();
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

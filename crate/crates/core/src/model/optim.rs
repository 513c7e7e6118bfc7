use super::transformer::ParamSpec;

/// AdamW with decoupled weight decay applied to matrices only.
#[derive(Debug, Clone)]
pub struct AdamW {
    lr: f64,
    betas: [f64; 2],
    eps: f64,
    weight_decay: f64,
    decay: Vec<bool>,
    m: Vec<f32>,
    v: Vec<f32>,
    step: i32,
}

impl AdamW {
    pub fn new(specs: &[ParamSpec], n_params: usize, lr: f64, betas: [f64; 2], eps: f64, weight_decay: f64) -> Self {
        let mut decay = vec![false; n_params];
        for s in specs.iter().filter(|s| s.shape.len() == 2) {
            decay[s.offset..s.offset + s.len()].fill(true);
        }
        AdamW {
            lr,
            betas,
            eps,
            weight_decay,
            decay,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    pub fn step(&mut self, params: &mut [f32], grad: &[f32]) {
        self.step += 1;
        let [b1, b2] = self.betas;
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let shrink = (1.0 - self.lr * self.weight_decay) as f32;
        let (b1f, b2f) = (b1 as f32, b2 as f32);
        let step_size = (self.lr / c1) as f32;
        let c2_sqrt = c2.sqrt() as f32;
        let eps = self.eps as f32;
        for i in 0..params.len() {
            let g = grad[i];
            if self.decay[i] {
                params[i] *= shrink;
            }
            self.m[i] = b1f * self.m[i] + (1.0 - b1f) * g;
            self.v[i] = b2f * self.v[i] + (1.0 - b2f) * g * g;
            let denom = self.v[i].sqrt() / c2_sqrt + eps;
            params[i] -= step_size * self.m[i] / denom;
        }
    }
}

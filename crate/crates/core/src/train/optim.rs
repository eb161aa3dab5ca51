use super::objective::{BatchGrad, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(format!("unknown optimizer `{other}`")),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone, Default)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    fn zeros(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// SGD or Adam. Adam updates embedding moments lazily: only rows touched by
/// the batch advance, with bias correction from the global step.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: i32,
    rows: Moments,
    centers: Moments,
    decay: Moments,
}

fn adam_update(param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], lr_t: f64) {
    for (((p, &g), m), v) in param.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        *p -= lr_t * *m / (v.sqrt() + EPS);
    }
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, params: &Params) -> Self {
        let sized = |n| match kind {
            OptimizerKind::Sgd => Moments::default(),
            OptimizerKind::Adam => Moments::zeros(n),
        };
        Self {
            kind,
            lr,
            step: 0,
            rows: sized(params.embeddings.as_slice().len()),
            centers: sized(params.model.centers.as_slice().len()),
            decay: sized(1),
        }
    }

    pub fn step(&mut self, params: &mut Params, grad: &BatchGrad) {
        let dim = params.embeddings.dim();
        match self.kind {
            OptimizerKind::Sgd => {
                for (i, &node) in grad.nodes.iter().enumerate() {
                    let g = &grad.rows[i * dim..(i + 1) * dim];
                    for (p, g) in params.embeddings.row_mut(node).iter_mut().zip(g) {
                        *p -= self.lr * g;
                    }
                }
                for (p, g) in params.model.centers.as_mut_slice().iter_mut().zip(&grad.centers) {
                    *p -= self.lr * g;
                }
                params.hawkes.log_decay -= self.lr * grad.log_decay;
            }
            OptimizerKind::Adam => {
                self.step += 1;
                let lr_t = self.lr * (1.0 - BETA2.powi(self.step)).sqrt() / (1.0 - BETA1.powi(self.step));
                for (i, &node) in grad.nodes.iter().enumerate() {
                    let range = node * dim..(node + 1) * dim;
                    adam_update(
                        params.embeddings.row_mut(node),
                        &grad.rows[i * dim..(i + 1) * dim],
                        &mut self.rows.m[range.clone()],
                        &mut self.rows.v[range],
                        lr_t,
                    );
                }
                adam_update(
                    params.model.centers.as_mut_slice(),
                    &grad.centers,
                    &mut self.centers.m,
                    &mut self.centers.v,
                    lr_t,
                );
                let mut d = [params.hawkes.log_decay];
                adam_update(&mut d, &[grad.log_decay], &mut self.decay.m, &mut self.decay.v, lr_t);
                params.hawkes.log_decay = d[0];
            }
        }
    }
}

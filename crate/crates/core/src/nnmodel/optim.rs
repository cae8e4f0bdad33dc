use ndarray::Array2;

use super::model::TensorSet;

/// Scales all gradients jointly so their global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm<T: TensorSet>(grads: &mut T, max_norm: f64) -> f64 {
    let norm = grads
        .tensors()
        .iter()
        .map(|(_, g)| g.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for (_, g) in grads.tensors_mut() {
            g.mapv_inplace(|v| v * scale);
        }
    }
    norm
}

/// Adam as implemented by TensorFlow/Keras: bias correction folded into the
/// step size, epsilon added to `sqrt(v)`.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64, epsilon: f64) -> Adam {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step<T: TensorSet>(&mut self, params: &mut T, grads: &T) {
        let grads = grads.tensors();
        let mut params = params.tensors_mut();
        assert_eq!(params.len(), grads.len(), "parameter/gradient sets differ");
        if self.m.is_empty() {
            self.m = grads.iter().map(|(_, g)| Array2::zeros(g.raw_dim())).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let t = self.step as i32;
        let lr_t = self.learning_rate * (1.0 - self.beta2.powi(t)).sqrt() / (1.0 - self.beta1.powi(t));
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        for (k, ((_, p), (_, g))) in params.iter_mut().zip(grads.iter()).enumerate() {
            let m = &mut self.m[k];
            let v = &mut self.v[k];
            ndarray::Zip::from(&mut **p)
                .and(&**g)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr_t * *m / (v.sqrt() + eps);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone)]
    struct One(Array2<f64>);

    impl TensorSet for One {
        fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
            vec![("w".into(), &self.0)]
        }
        fn tensors_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
            vec![("w".into(), &mut self.0)]
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With bias correction the first update is lr * g / (|g| + eps').
        let mut p = One(Array2::from_elem((1, 2), 1.0));
        let g = One(Array2::from_shape_vec((1, 2), vec![0.5, -2.0]).unwrap());
        let mut adam = Adam::new(0.1, 1e-8);
        adam.step(&mut p, &g);
        assert!((p.0[[0, 0]] - 0.9).abs() < 1e-6);
        assert!((p.0[[0, 1]] - 1.1).abs() < 1e-6);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut p = One(Array2::from_elem((1, 1), 3.0));
        let mut adam = Adam::new(0.05, 1e-8);
        for _ in 0..2000 {
            let g = One(p.0.mapv(|x| 2.0 * (x - 1.0)));
            adam.step(&mut p, &g);
        }
        assert!((p.0[[0, 0]] - 1.0).abs() < 1e-2);
    }

    #[test]
    fn global_clip() {
        let mut g = One(Array2::from_shape_vec((1, 2), vec![3.0, 4.0]).unwrap());
        let norm = clip_global_norm(&mut g, 1.0);
        assert_eq!(norm, 5.0);
        assert!((g.0[[0, 0]] - 0.6).abs() < 1e-12 && (g.0[[0, 1]] - 0.8).abs() < 1e-12);
        let mut small = One(Array2::from_shape_vec((1, 2), vec![0.3, 0.4]).unwrap());
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small.0[[0, 1]], 0.4);
    }
}

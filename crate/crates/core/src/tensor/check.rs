//! Central finite-difference gradient checking, used by tests and the
//! `validate` command.

use super::optim::ParameterStore;
use super::tape::{Tape, Value};

pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst: Option<(String, usize)>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Compare analytic gradients of `f` (a scalar-valued taped function of the
/// store) against central finite differences. `coords_per_param` limits how
/// many coordinates of each parameter are probed (`usize::MAX` for all);
/// probed coordinates are spread evenly across each tensor.
pub fn gradcheck<F>(store: &ParameterStore, coords_per_param: usize, mut f: F) -> GradCheckReport
where
    F: FnMut(&mut Tape, &ParameterStore) -> Value,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, store);
    let analytic = tape.backward(loss);

    let mut report = GradCheckReport {
        checked: 0,
        max_rel_err: 0.0,
        worst: None,
    };
    let names: Vec<String> = store.names().map(str::to_string).collect();
    for name in names {
        let len = store.get(&name).len();
        let probes = coords_per_param.min(len);
        let zero;
        let ga = match analytic.by_name.get(&name) {
            Some(g) => g,
            None => {
                zero = super::Tensor::zeros(store.get(&name).shape());
                &zero
            }
        };
        for p in 0..probes {
            let i = if probes == len {
                p
            } else {
                p * len / probes
            };
            let mut plus = store.clone();
            plus.get_mut(&name).data_mut()[i] += FD_STEP;
            let mut tape_p = Tape::new();
            let lp = f(&mut tape_p, &plus);
            let fp = tape_p.value(lp).item();

            let mut minus = store.clone();
            minus.get_mut(&name).data_mut()[i] -= FD_STEP;
            let mut tape_m = Tape::new();
            let lm = f(&mut tape_m, &minus);
            let fm = tape_m.value(lm).item();

            let fd = (fp - fm) / (2.0 * FD_STEP);
            let a = ga.data()[i];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
            report.checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some((name.clone(), i));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use std::rc::Rc;

    fn random_store(rng: &mut ChaCha20Rng, entries: &[(&str, Vec<usize>)]) -> ParameterStore {
        let mut store = ParameterStore::new();
        for (name, shape) in entries {
            let len = shape.iter().product();
            let data = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            store.insert(*name, Tensor::new(shape.clone(), data));
        }
        store
    }

    #[test]
    fn three_layer_mlp_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let store = random_store(
            &mut rng,
            &[
                ("w0", vec![4, 8]),
                ("b0", vec![8]),
                ("w1", vec![8, 8]),
                ("b1", vec![8]),
                ("w2", vec![8, 1]),
                ("b2", vec![1]),
            ],
        );
        let x: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let report = gradcheck(&store, usize::MAX, |tape, store| {
            let input = tape.leaf(Tensor::new(vec![3, 4], x.clone()));
            let w0 = tape.param(store, "w0");
            let b0 = tape.param(store, "b0");
            let w1 = tape.param(store, "w1");
            let b1 = tape.param(store, "b1");
            let w2 = tape.param(store, "w2");
            let b2 = tape.param(store, "b2");
            let h = tape.matmul(input, w0);
            let h = tape.add_bias(h, b0);
            let h = tape.tanh(h);
            let h = tape.matmul(h, w1);
            let h = tape.add_bias(h, b1);
            let h = tape.tanh(h);
            let h = tape.matmul(h, w2);
            let h = tape.add_bias(h, b2);
            tape.sum(h)
        });
        assert!(report.passes(1e-4), "{report:?}");
        assert!(report.checked > 100);
    }

    #[test]
    fn every_primitive_matches_finite_differences() {
        // one composite touching each differentiable primitive
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let store = random_store(
            &mut rng,
            &[
                ("x", vec![2, 3, 4]),
                ("y", vec![2, 3, 4]),
                ("w", vec![4, 4]),
                ("a", vec![4]),
                ("bias", vec![4]),
            ],
        );
        let mask = Rc::new(Tensor::new(
            vec![3, 3],
            vec![1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0],
        ));
        let cmat = Rc::new(Tensor::new(
            vec![3, 3],
            (0..9).map(|i| (i as f64) * 0.1 - 0.3).collect(),
        ));
        let rows = Rc::new(vec![0usize, 2]);
        let report = gradcheck(&store, usize::MAX, |tape, store| {
            let x = tape.param(store, "x");
            let y = tape.param(store, "y");
            let w = tape.param(store, "w");
            let a = tape.param(store, "a");
            let bias = tape.param(store, "bias");
            // linear over last axis
            let xf = tape.reshape(x, vec![6, 4]);
            let lin = tape.matmul(xf, w);
            let lin = tape.add_bias(lin, bias);
            let lin3 = tape.reshape(lin, vec![2, 3, 4]);
            let act = tape.leaky_relu(lin3, 0.2);
            let act = tape.const_matmul(cmat.clone(), act);
            // attention-style block
            let scores = tape.gat_pair_scores(act, y, a, 0.2);
            let alpha = tape.masked_softmax_rows(scores, mask.clone());
            let mixed = tape.batch_matmul(alpha, y);
            // pooling and heads
            let pooled = tape.mean_rows(mixed);
            let gathered = tape.gather_rows(mixed, rows.clone());
            let gsum = tape.mean_rows(gathered);
            let cat = tape.concat_last(pooled, gsum);
            let th = tape.tanh(cat);
            let rl = tape.relu(th);
            let sq = tape.square(rl);
            let scaled = tape.scalar_mul(sq, 0.7);
            let halves = tape.reshape(scaled, vec![2, 2, 4]);
            let m1 = tape.mean_rows(halves);
            let m2 = tape.scalar_mul(m1, -1.3);
            let mn = tape.min_elem(m1, m2);
            let pairs = tape.reshape(mn, vec![4, 2]);
            let first = tape.scatter_rows(pairs, Rc::new(vec![1usize, 3]), 5);
            let s = tape.sum(first);
            let extra = tape.sum(act);
            let both = tape.add(s, extra);
            tape.mean_all(both)
        });
        assert!(report.passes(1e-4), "{report:?}");
    }

    #[test]
    fn gradients_are_bitwise_deterministic() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let store = random_store(&mut rng, &[("w", vec![6, 6])]);
        let x: Vec<f64> = (0..36).map(|_| rng.random_range(-1.0..1.0)).collect();
        let run = |store: &ParameterStore| {
            let mut tape = Tape::new();
            let w = tape.param(store, "w");
            let inp = tape.leaf(Tensor::new(vec![6, 6], x.clone()));
            let h = tape.matmul(inp, w);
            let h = tape.tanh(h);
            let loss = tape.mean_all(h);
            tape.backward(loss).by_name["w"].clone()
        };
        let g1 = run(&store);
        let g2 = run(&store);
        assert_eq!(g1.data(), g2.data());
    }
}

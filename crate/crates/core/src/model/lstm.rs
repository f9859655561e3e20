use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::{ParamId, ParamStore, Tensor};

pub const INIT_RANGE: f64 = 0.08;
pub const FORGET_BIAS: f64 = 1.0;

/// Parameter handles of one LSTM cell. Gates are stacked in the order
/// input, forget, candidate, output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmCell {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

pub(crate) fn uniform<R: Rng>(rng: &mut R, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen_range(-INIT_RANGE..INIT_RANGE)).collect(),
    )
    .expect("shape/data agree")
}

impl LstmCell {
    pub fn register<R: Rng>(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let w_ih = store.add(format!("{prefix}.w_ih"), uniform(rng, &[4 * hidden, input]));
        let w_hh = store.add(format!("{prefix}.w_hh"), uniform(rng, &[4 * hidden, hidden]));
        let mut b = uniform(rng, &[4 * hidden]);
        b.data_mut()[hidden..2 * hidden].iter_mut().for_each(|v| *v = FORGET_BIAS);
        let bias = store.add(format!("{prefix}.bias"), b);
        LstmCell { w_ih, w_hh, bias, hidden }
    }

    pub fn zero_state(&self, g: &mut Graph) -> LstmState {
        LstmState {
            h: g.constant(Tensor::zeros(&[self.hidden])),
            c: g.constant(Tensor::zeros(&[self.hidden])),
        }
    }

    /// One recurrence step: `c' = f∘c + i∘g`, `h' = o∘tanh(c')`.
    pub fn step(&self, g: &mut Graph, input: Var, state: LstmState) -> Result<LstmState> {
        let d = self.hidden;
        if g.value(state.h).shape() != [d] || g.value(state.c).shape() != [d] {
            return Err(Error::dim(
                "lstm_step",
                format!(
                    "state shapes {:?}/{:?} do not match hidden size {d}",
                    g.value(state.h).shape(),
                    g.value(state.c).shape()
                ),
            ));
        }
        let (w_ih, w_hh, b) = (g.param(self.w_ih), g.param(self.w_hh), g.param(self.bias));
        let xi = g.matmul(w_ih, input)?;
        let hh = g.matmul(w_hh, state.h)?;
        let z = g.add(xi, hh)?;
        let z = g.add(z, b)?;
        let zi = g.slice(z, 0, d)?;
        let zf = g.slice(z, d, d)?;
        let zg = g.slice(z, 2 * d, d)?;
        let zo = g.slice(z, 3 * d, d)?;
        let i = g.sigmoid(zi);
        let f = g.sigmoid(zf);
        let cand = g.tanh(zg);
        let o = g.sigmoid(zo);
        let keep = g.mul(f, state.c)?;
        let write = g.mul(i, cand)?;
        let c = g.add(keep, write)?;
        let tc = g.tanh(c);
        let h = g.mul(o, tc)?;
        Ok(LstmState { h, c })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::check_gradients;
    use crate::rng::{stream, Stream};

    fn zero_cell(store: &mut ParamStore, e: usize, d: usize) -> LstmCell {
        let w_ih = store.add("w_ih", Tensor::zeros(&[4 * d, e]));
        let w_hh = store.add("w_hh", Tensor::zeros(&[4 * d, d]));
        let bias = store.add("bias", Tensor::zeros(&[4 * d]));
        LstmCell { w_ih, w_hh, bias, hidden: d }
    }

    #[test]
    fn zero_weights_halve_the_cell() {
        let mut store = ParamStore::new();
        let cell = zero_cell(&mut store, 3, 2);
        let mut g = Graph::new(&store);
        let x = g.constant(Tensor::vector(vec![0.3, -2.0, 5.0]));
        let s0 = cell.zero_state(&mut g);
        let s1 = cell.step(&mut g, x, s0).unwrap();
        assert_eq!(g.value(s1.h).data(), &[0.0, 0.0]);
        assert_eq!(g.value(s1.c).data(), &[0.0, 0.0]);

        // Nonzero prior cell: gates are 0.5, candidate 0, so c' = 0.5c, h' = 0.5 tanh(0.5c).
        let h = g.constant(Tensor::vector(vec![0.7, 0.1]));
        let c = g.constant(Tensor::vector(vec![1.0, -0.4]));
        let s2 = cell.step(&mut g, x, LstmState { h, c }).unwrap();
        assert_eq!(g.value(s2.c).data(), &[0.5, -0.2]);
        let expected: Vec<f64> = [0.5f64, -0.2].iter().map(|c| 0.5 * c.tanh()).collect();
        assert_eq!(g.value(s2.h).data(), expected.as_slice());
    }

    #[test]
    fn zero_input_zero_state() {
        let mut store = ParamStore::new();
        let cell = zero_cell(&mut store, 2, 2);
        let mut g = Graph::new(&store);
        let x = g.constant(Tensor::zeros(&[2]));
        let s0 = cell.zero_state(&mut g);
        let s1 = cell.step(&mut g, x, s0).unwrap();
        assert_eq!(g.value(s1.h).data(), &[0.0, 0.0]);
        assert_eq!(g.value(s1.c).data(), &[0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut store = ParamStore::new();
        let cell = zero_cell(&mut store, 2, 3);
        let mut g = Graph::new(&store);
        let x = g.constant(Tensor::zeros(&[2]));
        let bad = LstmState {
            h: g.constant(Tensor::zeros(&[2])),
            c: g.constant(Tensor::zeros(&[3])),
        };
        assert!(cell.step(&mut g, x, bad).is_err());
        let wrong_input = g.constant(Tensor::zeros(&[5]));
        let s0 = cell.zero_state(&mut g);
        assert!(cell.step(&mut g, wrong_input, s0).is_err());
    }

    #[test]
    fn step_gradients_match_finite_differences() {
        let mut rng = stream(1, Stream::Init);
        let mut store = ParamStore::new();
        let cell = LstmCell::register(&mut store, "cell", 3, 4, &mut rng);
        // Scale up so the gates leave their linear regime.
        for id in store.ids().collect::<Vec<_>>() {
            store.get_mut(id).data_mut().iter_mut().for_each(|v| *v *= 10.0);
        }
        let x = uniform(&mut rng, &[3]);
        let h0 = uniform(&mut rng, &[4]);
        let c0 = uniform(&mut rng, &[4]);
        let report = check_gradients(&mut store, 1e-5, None, |g| {
            let xv = g.constant(x.clone());
            let h = g.constant(h0.clone());
            let c = g.constant(c0.clone());
            let s = cell.step(g, xv, LstmState { h, c })?;
            let s = cell.step(g, xv, s)?;
            Ok(g.sum(s.h))
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}

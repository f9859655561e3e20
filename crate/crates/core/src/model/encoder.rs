use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::model::lstm::{LstmCell, LstmState};
use crate::model::{Dropout, Model};

/// Encoder output: the context memory and the summed final directional states.
#[derive(Clone, Debug)]
pub struct ContextMemory {
    /// `h_t = forward_t + backward_t`, one `[d]` vector per source token.
    pub states: Vec<Var>,
    /// The same states as the columns of a `[d, L]` matrix.
    pub matrix: Var,
    pub forward: Vec<Var>,
    pub backward: Vec<Var>,
    /// Forward state after the last token plus backward state after the first.
    pub final_state: LstmState,
}

impl ContextMemory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Runs `cell` over `inputs`; outputs are aligned to input positions either way.
pub fn run_direction(g: &mut Graph, cell: &LstmCell, inputs: &[Var], reverse: bool) -> Result<(Vec<Var>, LstmState)> {
    let mut state = cell.zero_state(g);
    let mut out = vec![state.h; inputs.len()];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..inputs.len()).rev())
    } else {
        Box::new(0..inputs.len())
    };
    for t in order {
        state = cell.step(g, inputs[t], state)?;
        out[t] = state.h;
    }
    Ok((out, state))
}

pub(crate) fn embed(model: &Model, g: &mut Graph, ids: &[usize], mut dropout: Option<&mut Dropout>) -> Result<Vec<Var>> {
    let table = g.param(model.ids.embedding);
    ids.iter()
        .map(|&id| {
            let e = g.row(table, id)?;
            match dropout.as_deref_mut() {
                Some(d) => d.apply(g, e),
                None => Ok(e),
            }
        })
        .collect()
}

pub fn encode(model: &Model, g: &mut Graph, source: &[usize], dropout: Option<&mut Dropout>) -> Result<ContextMemory> {
    if source.is_empty() {
        return Err(Error::dim("encode", "empty source sequence"));
    }
    let inputs = embed(model, g, source, dropout)?;
    let (forward, fwd_final) = run_direction(g, &model.ids.encoder_forward, &inputs, false)?;
    let (backward, bwd_final) = run_direction(g, &model.ids.encoder_backward, &inputs, true)?;
    let states = forward
        .iter()
        .zip(&backward)
        .map(|(&f, &b)| g.add(f, b))
        .collect::<Result<Vec<_>>>()?;
    let matrix = g.concat_seq(&states)?;
    let final_state = LstmState {
        h: g.add(fwd_final.h, bwd_final.h)?,
        c: g.add(fwd_final.c, bwd_final.c)?,
    };
    Ok(ContextMemory {
        states,
        matrix,
        forward,
        backward,
        final_state,
    })
}

impl ContextMemory {
    /// Memory over externally supplied `[d]` states, with a zero final state.
    pub fn from_states(g: &mut Graph, states: Vec<Var>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::dim("context_memory", "empty state sequence"));
        }
        let matrix = g.concat_seq(&states)?;
        let d = g.value(states[0]).len();
        let zero = g.constant(crate::tensor::Tensor::zeros(&[d]));
        Ok(ContextMemory {
            forward: states.clone(),
            backward: vec![zero; states.len()],
            states,
            matrix,
            final_state: LstmState { h: zero, c: zero },
        })
    }
}

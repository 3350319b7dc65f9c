//! Recurrent policy predictor and policy banks.
//!
//! The predictor maps an agent's local observation history to a
//! distribution over its policy bank: a ReLU dense layer feeds one LSTM
//! layer whose hidden state is projected to one logit per policy. At
//! execution time the most probable policy acts on the current observation.

use rand::Rng;

use crate::algo::{select_action, ACTION_DIM};
use crate::error::{Error, Result};
use crate::nn::{optimizer_step, softmax_rows, Adam, Dense, Grads, LstmCell, Mlp, ParamVars, Params, Tape, Tensor, HIDDEN_UNITS};
use crate::replay::EpisodeLabel;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorNet {
    pub input: Dense,
    pub cell: LstmCell,
    pub head: Dense,
}

impl PredictorNet {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, policies: usize, rng: &mut R) -> Self {
        PredictorNet {
            input: Dense::init(obs_dim, HIDDEN_UNITS, rng),
            cell: LstmCell::init(HIDDEN_UNITS, HIDDEN_UNITS, rng),
            head: Dense::init(HIDDEN_UNITS, policies, rng),
        }
    }

    pub fn zeros(obs_dim: usize, policies: usize) -> Self {
        Self::zeros_with_hidden(obs_dim, HIDDEN_UNITS, policies)
    }

    pub fn zeros_with_hidden(obs_dim: usize, hidden: usize, policies: usize) -> Self {
        PredictorNet {
            input: Dense::zeros(obs_dim, hidden),
            cell: LstmCell::zeros(hidden, hidden),
            head: Dense::zeros(hidden, policies),
        }
    }

    pub fn with_hidden<R: Rng + ?Sized>(obs_dim: usize, hidden: usize, policies: usize, rng: &mut R) -> Self {
        PredictorNet {
            input: Dense::init(obs_dim, hidden, rng),
            cell: LstmCell::init(hidden, hidden, rng),
            head: Dense::init(hidden, policies, rng),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.input.input_dim()
    }

    pub fn num_policies(&self) -> usize {
        self.head.output_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.cell.hidden_dim()
    }

    /// Fresh carry for a new episode.
    pub fn start(&self) -> Carry {
        Carry { h: vec![0.0; self.hidden_dim()], c: vec![0.0; self.hidden_dim()], t: 0 }
    }

    /// Distribution over the bank after observing `obs`; advances `carry`.
    pub fn predict(&self, carry: &mut Carry, obs: &[f64]) -> Result<Vec<f64>> {
        if obs.len() != self.obs_dim() {
            return Err(Error::contract(format!("observation of {} values, predictor expects {}", obs.len(), self.obs_dim())));
        }
        if carry.h.len() != self.hidden_dim() {
            return Err(Error::contract("carry does not belong to this predictor"));
        }
        if obs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite predictor input".into()));
        }
        let mut z = self.input.forward_one(obs);
        z.iter_mut().for_each(|v| *v = v.max(0.0));
        let (h, c) = self.cell.step_one(&z, &carry.h, &carry.c)?;
        let logits = self.head.forward_one(&h);
        carry.h = h;
        carry.c = c;
        carry.t += 1;
        Ok(softmax_rows(&Tensor::row(&logits)).into_data())
    }

    /// Per-step distributions for a whole history from a fresh carry.
    pub fn predict_sequence(&self, history: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut carry = self.start();
        history.iter().map(|o| self.predict(&mut carry, o)).collect()
    }

    /// Records the summed cross-entropy over all steps of equally long
    /// `sequences`, each labeled by `labels`.
    fn record_loss(&self, tape: &mut Tape, vars: &ParamVars, sequences: &[&EpisodeLabel]) -> Result<crate::nn::Var> {
        let b = sequences.len();
        let steps = sequences[0].history.len();
        let hd = self.hidden_dim();
        let labels: Vec<usize> = sequences.iter().map(|e| e.label).collect();
        let input_vars = ParamVars(vars.0[0..2].to_vec());
        let cell_vars = ParamVars(vars.0[2..5].to_vec());
        let (hw, hb) = (vars.0[5], vars.0[6]);
        let mut h = tape.leaf(Tensor::zeros(&[b, hd]))?;
        let mut c = tape.leaf(Tensor::zeros(&[b, hd]))?;
        let mut total = None;
        for t in 0..steps {
            let rows: Vec<&[f64]> = sequences.iter().map(|e| e.history[t].as_slice()).collect();
            let x = tape.leaf(Tensor::from_rows(&rows)?)?;
            let z = self.input.record_with(tape, x, input_vars.0[0], input_vars.0[1])?;
            let z = tape.relu(z);
            let (h_next, c_next) = self.cell.record_step(tape, &cell_vars, z, h, c)?;
            h = h_next;
            c = c_next;
            let logits = self.head.record_with(tape, h, hw, hb)?;
            let ce = tape.softmax_xent(logits, &labels)?;
            total = Some(match total {
                None => ce,
                Some(acc) => tape.add(acc, ce)?,
            });
        }
        total.ok_or_else(|| Error::contract("empty observation history"))
    }

    /// Mean over `batch` of the summed per-step cross-entropy, with its
    /// gradient through time.
    pub fn loss_and_grads(&self, batch: &[&EpisodeLabel]) -> Result<(f64, Grads)> {
        if batch.is_empty() {
            return Err(Error::contract("empty predictor minibatch"));
        }
        let k = self.num_policies();
        for e in batch {
            if e.label >= k {
                return Err(Error::contract(format!("label {} outside a bank of {k} policies", e.label)));
            }
            if e.history.is_empty() {
                return Err(Error::contract("empty observation history"));
            }
            if e.history.iter().any(|o| o.len() != self.obs_dim()) {
                return Err(Error::contract("history observation width does not match the predictor"));
            }
        }
        // equal-length histories share one batched unroll
        let mut lengths: Vec<usize> = batch.iter().map(|e| e.history.len()).collect();
        lengths.sort_unstable();
        lengths.dedup();
        let mut tape = Tape::new();
        let vars = Params::record(self, &mut tape)?;
        let mut total = None;
        for len in lengths {
            let group: Vec<&EpisodeLabel> = batch.iter().copied().filter(|e| e.history.len() == len).collect();
            let loss = self.record_loss(&mut tape, &vars, &group)?;
            total = Some(match total {
                None => loss,
                Some(acc) => tape.add(acc, loss)?,
            });
        }
        let loss = tape.scale(total.expect("non-empty batch"), 1.0 / batch.len() as f64);
        let value = tape.value(loss).item();
        if !value.is_finite() {
            return Err(Error::Numeric("predictor loss is not finite".into()));
        }
        let grads = vars.grads(&tape.backward(loss)?);
        Ok((value, grads))
    }
}

impl Params for PredictorNet {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut out = self.input.tensors();
        out.extend(self.cell.tensors());
        out.extend(self.head.tensors());
        out
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.input.tensors_mut();
        out.extend(self.cell.tensors_mut());
        out.extend(self.head.tensors_mut());
        out
    }
}

/// Recurrent state of one agent's predictor within one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Carry {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub t: usize,
}

/// One optimizer step on the mean summed cross-entropy. Returns the pre-step
/// loss.
pub fn predictor_update(
    net: &mut PredictorNet,
    opt: &mut Adam,
    batch: &[&EpisodeLabel],
    grad_clip: Option<f64>,
) -> Result<f64> {
    let (loss, grads) = net.loss_and_grads(batch)?;
    optimizer_step(opt, net, grads, grad_clip)?;
    Ok(loss)
}

/// Index of the largest probability; the lowest index wins ties.
pub fn select(p: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = k;
        }
    }
    best
}

/// One candidate policy of a bank.
#[derive(Debug, Clone, PartialEq)]
pub struct BankEntry {
    pub id: usize,
    pub scenario: usize,
    pub actor: Mlp,
}

/// The candidate policies of one agent, in predictor-logit order.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyBank {
    pub agent: usize,
    entries: Vec<BankEntry>,
}

impl PolicyBank {
    pub fn new(agent: usize, entries: Vec<BankEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::contract("a policy bank needs at least one policy"));
        }
        let mut ids: Vec<usize> = entries.iter().map(|e| e.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != entries.len() {
            return Err(Error::contract("policy identifiers must be unique"));
        }
        Ok(PolicyBank { agent, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[BankEntry] {
        &self.entries
    }

    pub fn get(&self, k: usize) -> Option<&BankEntry> {
        self.entries.get(k)
    }
}

/// One execution step of a predictor-driven agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub distribution: Vec<f64>,
    pub policy: usize,
    pub action: [f64; ACTION_DIM],
}

/// Execution-time policy selection for one agent. Sees only the agent's own
/// observations.
#[derive(Debug, Clone)]
pub struct Selector<'a> {
    bank: &'a PolicyBank,
    net: &'a PredictorNet,
    carry: Carry,
}

impl<'a> Selector<'a> {
    pub fn new(bank: &'a PolicyBank, net: &'a PredictorNet) -> Result<Self> {
        if net.num_policies() != bank.len() {
            return Err(Error::contract(format!(
                "predictor has {} outputs for a bank of {}",
                net.num_policies(),
                bank.len()
            )));
        }
        Ok(Selector { bank, net, carry: net.start() })
    }

    pub fn step(&mut self, obs: &[f64]) -> Result<Selection> {
        let distribution = self.net.predict(&mut self.carry, obs)?;
        let policy = select(&distribution);
        let action = select_action(&self.bank.entries[policy].actor, obs, None)?;
        Ok(Selection { distribution, policy, action })
    }
}

/// Runs the selector over a fixed observation stream from a fresh carry.
pub fn execute_episode_selection(bank: &PolicyBank, net: &PredictorNet, stream: &[Vec<f64>]) -> Result<Vec<Selection>> {
    let mut sel = Selector::new(bank, net)?;
    stream.iter().map(|o| sel.step(o)).collect()
}

/// Fraction of steps at index `>= from` where the argmax equals the label.
pub fn selection_accuracy(net: &PredictorNet, episodes: &[&EpisodeLabel], from: usize) -> Result<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for e in episodes {
        for (t, p) in net.predict_sequence(&e.history)?.iter().enumerate() {
            if t >= from {
                total += 1;
                hit += (select(p) == e.label) as usize;
            }
        }
    }
    Ok(if total == 0 { 0.0 } else { hit as f64 / total as f64 })
}

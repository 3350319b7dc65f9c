//! Experience storage.
//!
//! [`TransitionBuffer`] holds joint transitions for one scenario;
//! [`PredictorBuffer`] holds labeled observation histories for one agent.
//! Both are fixed-capacity rings with FIFO eviction and uniform sampling
//! with replacement.

use rand::Rng;

use crate::codec::{Decoder, Encoder};
use crate::error::{Error, FormatError, Result};

/// Joint experience `(x, a, r, x', done)` of all agents.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<[f64; 2]>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<Vec<f64>>,
    pub done: bool,
}

/// Fixed-capacity ring with FIFO eviction. Index 0 is the oldest entry.
#[derive(Debug, Clone, PartialEq)]
struct Ring<T> {
    capacity: usize,
    items: Vec<T>,
    head: usize,
}

impl<T> Ring<T> {
    fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "ring capacity must be positive");
        Ring { capacity, items: Vec::new(), head: 0 }
    }

    fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.head] = item;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    fn get(&self, i: usize) -> Option<&T> {
        if i >= self.items.len() {
            return None;
        }
        Some(&self.items[(self.head + i) % self.items.len()])
    }

    fn iter(&self) -> impl Iterator<Item = &T> {
        (0..self.len()).map(move |i| self.get(i).expect("in range"))
    }

    fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<&T>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..count).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionBuffer {
    scenario: usize,
    obs_dims: Vec<usize>,
    ring: Ring<Transition>,
}

impl TransitionBuffer {
    pub fn new(capacity: usize, scenario: usize, obs_dims: Vec<usize>) -> Self {
        TransitionBuffer { scenario, obs_dims, ring: Ring::new(capacity) }
    }

    pub fn scenario(&self) -> usize {
        self.scenario
    }

    pub fn capacity(&self) -> usize {
        self.ring.capacity
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.len() == 0
    }

    /// Entry `i`, counting from the oldest.
    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.ring.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.ring.iter()
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        let n = self.obs_dims.len();
        let dims_ok = t.obs.len() == n
            && t.next_obs.len() == n
            && t.actions.len() == n
            && t.rewards.len() == n
            && t.obs.iter().zip(&self.obs_dims).all(|(o, &d)| o.len() == d)
            && t.next_obs.iter().zip(&self.obs_dims).all(|(o, &d)| o.len() == d);
        if !dims_ok {
            return Err(Error::contract("transition dimensions do not match the buffer"));
        }
        self.ring.push(t);
        Ok(())
    }

    /// `count` entries drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        self.ring.sample(count, rng)
    }

    pub(crate) fn encode(&self, enc: &mut Encoder) {
        enc.u64(self.ring.capacity as u64);
        enc.u64(self.scenario as u64);
        enc.u64(self.obs_dims.len() as u64);
        for &d in &self.obs_dims {
            enc.u64(d as u64);
        }
        enc.u64(self.len() as u64);
        for t in self.iter() {
            for o in t.obs.iter().chain(&t.next_obs) {
                for &v in o {
                    enc.f64(v);
                }
            }
            for a in &t.actions {
                enc.f64(a[0]);
                enc.f64(a[1]);
            }
            for &r in &t.rewards {
                enc.f64(r);
            }
            enc.u8(t.done as u8);
        }
    }

    pub(crate) fn decode(dec: &mut Decoder<'_>) -> std::result::Result<Self, FormatError> {
        let capacity = dec.usize()?;
        let scenario = dec.usize()?;
        let n = dec.usize()?;
        if capacity == 0 || n > 1024 {
            return Err(FormatError::Malformed("bad transition buffer header".into()));
        }
        let obs_dims = (0..n).map(|_| dec.usize()).collect::<std::result::Result<Vec<_>, _>>()?;
        let len = dec.usize()?;
        let mut buf = TransitionBuffer::new(capacity, scenario, obs_dims.clone());
        let read_obs = |dec: &mut Decoder<'_>| -> std::result::Result<Vec<Vec<f64>>, FormatError> {
            obs_dims.iter().map(|&d| (0..d).map(|_| dec.f64()).collect()).collect()
        };
        for _ in 0..len {
            let obs = read_obs(dec)?;
            let next_obs = read_obs(dec)?;
            let actions = (0..n).map(|_| Ok([dec.f64()?, dec.f64()?])).collect::<std::result::Result<_, FormatError>>()?;
            let rewards = (0..n).map(|_| dec.f64()).collect::<std::result::Result<_, _>>()?;
            let done = dec.u8()? != 0;
            buf.push(Transition { obs, actions, rewards, next_obs, done })
                .map_err(|e| FormatError::Malformed(e.to_string()))?;
        }
        Ok(buf)
    }
}

/// An agent's observation history for one episode and the policy that was
/// being trained while it was collected.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLabel {
    pub history: Vec<Vec<f64>>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorBuffer {
    agent: usize,
    ring: Ring<EpisodeLabel>,
}

impl PredictorBuffer {
    pub fn new(capacity: usize, agent: usize) -> Self {
        PredictorBuffer { agent, ring: Ring::new(capacity) }
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn capacity(&self) -> usize {
        self.ring.capacity
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.len() == 0
    }

    pub fn get(&self, i: usize) -> Option<&EpisodeLabel> {
        self.ring.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &EpisodeLabel> {
        self.ring.iter()
    }

    pub fn push(&mut self, e: EpisodeLabel) {
        self.ring.push(e);
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<&EpisodeLabel>> {
        self.ring.sample(count, rng)
    }

    pub(crate) fn encode(&self, enc: &mut Encoder) {
        enc.u64(self.ring.capacity as u64);
        enc.u64(self.agent as u64);
        enc.u64(self.len() as u64);
        for e in self.iter() {
            enc.u64(e.label as u64);
            enc.u64(e.history.len() as u64);
            for o in &e.history {
                enc.f64s(o);
            }
        }
    }

    pub(crate) fn decode(dec: &mut Decoder<'_>) -> std::result::Result<Self, FormatError> {
        let capacity = dec.usize()?;
        let agent = dec.usize()?;
        if capacity == 0 {
            return Err(FormatError::Malformed("zero-capacity predictor buffer".into()));
        }
        let len = dec.usize()?;
        let mut buf = PredictorBuffer::new(capacity, agent);
        for _ in 0..len {
            let label = dec.usize()?;
            let steps = dec.usize()?;
            let history = (0..steps).map(|_| dec.f64s()).collect::<std::result::Result<_, _>>()?;
            buf.push(EpisodeLabel { history, label });
        }
        Ok(buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn tr(k: f64) -> Transition {
        Transition {
            obs: vec![vec![k, k], vec![k]],
            actions: vec![[k, 0.0], [0.0, k]],
            rewards: vec![k, -k],
            next_obs: vec![vec![k + 1.0, k], vec![k + 1.0]],
            done: false,
        }
    }

    fn buffer(cap: usize) -> TransitionBuffer {
        TransitionBuffer::new(cap, 0, vec![2, 1])
    }

    #[test]
    fn fifo_eviction() {
        let mut b = buffer(2);
        for k in 1..=3 {
            b.push(tr(k as f64)).unwrap();
        }
        assert_eq!(b.len(), 2);
        assert_eq!(b.get(0), Some(&tr(2.0)));
        assert_eq!(b.get(1), Some(&tr(3.0)));
    }

    #[test]
    fn capacity_bound() {
        let mut b = buffer(1000);
        for k in 0..10_000 {
            b.push(tr(k as f64)).unwrap();
        }
        assert_eq!(b.len(), 1000);
        assert_eq!(b.get(0), Some(&tr(9000.0)));
    }

    #[test]
    fn singleton_sampling() {
        let mut b = buffer(5);
        b.push(tr(7.0)).unwrap();
        let mut rng = seeded(0, 0);
        let got = b.sample(4, &mut rng).unwrap();
        assert_eq!(got.len(), 4);
        assert!(got.iter().all(|t| **t == tr(7.0)));
        assert_eq!(b.sample(1, &mut rng).unwrap()[0], &tr(7.0));
    }

    #[test]
    fn empty_buffer_errors() {
        let b = buffer(3);
        assert!(matches!(b.sample(1, &mut seeded(0, 0)), Err(Error::EmptyBuffer)));
        let p = PredictorBuffer::new(3, 0);
        assert!(matches!(p.sample(1, &mut seeded(0, 0)), Err(Error::EmptyBuffer)));
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let mut b = buffer(50);
        for k in 0..50 {
            b.push(tr(k as f64)).unwrap();
        }
        let a: Vec<_> = b.sample(16, &mut seeded(3, 0)).unwrap().into_iter().cloned().collect();
        let c: Vec<_> = b.sample(16, &mut seeded(3, 0)).unwrap().into_iter().cloned().collect();
        assert_eq!(a, c);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut b = buffer(3);
        let mut bad = tr(1.0);
        bad.obs[0].push(0.0);
        assert!(matches!(b.push(bad), Err(Error::Contract(_))));
    }

    #[test]
    fn episode_labels_round_trip_and_evict() {
        let mut p = PredictorBuffer::new(3, 1);
        for k in 0..5 {
            p.push(EpisodeLabel { history: vec![vec![k as f64; 2]; 3], label: k % 3 });
        }
        let labels: Vec<usize> = p.iter().map(|e| e.label).collect();
        assert_eq!(labels, vec![2, 0, 1]);
        assert_eq!(p.get(0).unwrap().history[0], vec![2.0, 2.0]);
        let mut one = PredictorBuffer::new(2, 0);
        let ep = EpisodeLabel { history: vec![vec![0.5]], label: 4 };
        one.push(ep.clone());
        assert_eq!(one.sample(1, &mut seeded(1, 1)).unwrap()[0], &ep);
    }

    #[test]
    fn buffers_encode_round_trip() {
        let mut b = buffer(3);
        for k in 0..5 {
            b.push(tr(k as f64)).unwrap();
        }
        let mut enc = Encoder::new();
        b.encode(&mut enc);
        let bytes = enc.into_bytes();
        let back = TransitionBuffer::decode(&mut Decoder::new(&bytes)).unwrap();
        assert_eq!(back.iter().cloned().collect::<Vec<_>>(), b.iter().cloned().collect::<Vec<_>>());
    }
}

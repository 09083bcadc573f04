use std::collections::VecDeque;

use super::{AlgorithmId, AlgorithmSpec, Batch, PROB_FLOOR};
use crate::candidate::CandidateSet;
use crate::error::{PllError, Result};
use crate::nn::argmax;

/// Row-stochastic label confidences, supported on each example's candidates.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceMatrix {
    q: usize,
    data: Vec<f64>,
}

impl ConfidenceMatrix {
    /// Uniform weight `1/|S_i|` on every candidate.
    pub fn uniform(candidates: &[&CandidateSet]) -> Self {
        let q = candidates.first().map_or(0, |s| s.num_classes());
        let mut data = vec![0.0; candidates.len() * q];
        for (i, s) in candidates.iter().enumerate() {
            let w = 1.0 / s.len() as f64;
            for j in s.iter() {
                data[i * q + j] = w;
            }
        }
        ConfidenceMatrix { q, data }
    }

    pub fn num_rows(&self) -> usize {
        if self.q == 0 {
            0
        } else {
            self.data.len() / self.q
        }
    }

    pub fn num_classes(&self) -> usize {
        self.q
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.q..(i + 1) * self.q]
    }

    /// Sets row `i` to `p` restricted to `support`, renormalized. Falls back to
    /// uniform over `support` when the restricted mass is below the floor.
    fn set_renormalized(&mut self, i: usize, p: &[f64], support: &CandidateSet) {
        let mass: f64 = support.iter().map(|j| p[j]).sum();
        let n = support.len() as f64;
        let row = self.row_mut(i);
        for (j, w) in row.iter_mut().enumerate() {
            *w = if !support.contains(j) {
                0.0
            } else if mass < PROB_FLOOR {
                1.0 / n
            } else {
                p[j] / mass
            };
        }
    }

    fn set_one_hot(&mut self, i: usize, label: usize) {
        let row = self.row_mut(i);
        row.fill(0.0);
        row[label] = 1.0;
    }

    /// Checks row sums (within `1e-9`) and support against `candidates`.
    pub fn check(&self, candidates: &[&CandidateSet]) -> Result<()> {
        if candidates.len() != self.num_rows() {
            return Err(PllError::InvalidState("confidence rows != training examples".into()));
        }
        for (i, s) in candidates.iter().enumerate() {
            let row = self.row(i);
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(PllError::InvalidState(format!("row {i} sums to {sum}")));
            }
            if row.iter().enumerate().any(|(j, w)| *w != 0.0 && !s.contains(j)) || row.iter().any(|w| *w < 0.0) {
                return Err(PllError::InvalidState(format!("row {i} leaves its candidate set")));
            }
        }
        Ok(())
    }
}

/// POP's shrinking candidate mask, PRODEN-style confidences and the rolling
/// window of per-epoch confidence snapshots used for elimination.
#[derive(Clone, Debug, PartialEq)]
pub struct PopState {
    pub confidence: ConfidenceMatrix,
    pub mask: Vec<CandidateSet>,
    window: VecDeque<Vec<f64>>,
    window_size: usize,
    warm_up: usize,
    pub threshold: f64,
    step: f64,
}

impl PopState {
    pub fn window_len(&self) -> usize {
        self.window.len()
    }
}

/// LWS weights: a distribution over the candidates and, once updated, a
/// second distribution over the non-candidates.
#[derive(Clone, Debug, PartialEq)]
pub struct LwsWeights {
    q: usize,
    data: Vec<f64>,
}

impl LwsWeights {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AlgorithmState {
    Stateless,
    Confidence(ConfidenceMatrix),
    Pop(PopState),
    Lws(LwsWeights),
}

impl AlgorithmState {
    pub fn is_stateless(&self) -> bool {
        matches!(self, AlgorithmState::Stateless)
    }

    /// Label weights used by the weighted log-loss (PRODEN, CAVL, POP).
    pub fn confidence(&self) -> Option<&ConfidenceMatrix> {
        match self {
            AlgorithmState::Confidence(c) => Some(c),
            AlgorithmState::Pop(p) => Some(&p.confidence),
            _ => None,
        }
    }
}

pub(super) fn initial(spec: &AlgorithmSpec, candidates: &[&CandidateSet]) -> AlgorithmState {
    match spec.id() {
        AlgorithmId::Proden | AlgorithmId::Cavl => AlgorithmState::Confidence(ConfidenceMatrix::uniform(candidates)),
        AlgorithmId::Pop => AlgorithmState::Pop(PopState {
            confidence: ConfidenceMatrix::uniform(candidates),
            mask: candidates.iter().map(|s| (*s).clone()).collect(),
            window: VecDeque::new(),
            window_size: spec.get("window") as usize,
            warm_up: spec.get("warm_up") as usize,
            threshold: spec.get("threshold"),
            step: spec.get("step"),
        }),
        AlgorithmId::Lws => {
            let c = ConfidenceMatrix::uniform(candidates);
            AlgorithmState::Lws(LwsWeights { q: c.q, data: c.data })
        }
        _ => AlgorithmState::Stateless,
    }
}

fn check_index(i: usize, rows: usize) -> Result<()> {
    if i >= rows {
        return Err(PllError::InvalidState(format!("example index {i} beyond {rows} state rows")));
    }
    Ok(())
}

pub(super) fn update(spec: &AlgorithmSpec, batch: &Batch<'_>, state: &mut AlgorithmState) -> Result<()> {
    match (spec.id(), state) {
        (AlgorithmId::Proden, AlgorithmState::Confidence(conf)) => {
            for (r, (&i, s)) in batch.indices.iter().zip(batch.candidates).enumerate() {
                check_index(i, conf.num_rows())?;
                conf.set_renormalized(i, batch.probs.row(r), s);
            }
            Ok(())
        }
        (AlgorithmId::Cavl, AlgorithmState::Confidence(conf)) => {
            // Class activation value v·|1 - v| on the raw network outputs,
            // arg-maxed over the candidates (lowest index on ties).
            for (r, (&i, s)) in batch.indices.iter().zip(batch.candidates).enumerate() {
                check_index(i, conf.num_rows())?;
                let out = batch.logits.row(r);
                let mut best: Option<(usize, f64)> = None;
                for j in s.iter() {
                    let cav = out[j] * (1.0 - out[j]).abs();
                    if best.is_none_or(|(_, b)| cav > b) {
                        best = Some((j, cav));
                    }
                }
                let (label, _) = best.ok_or(PllError::EmptyCandidateSet { index: i })?;
                conf.set_one_hot(i, label);
            }
            Ok(())
        }
        (AlgorithmId::Pop, AlgorithmState::Pop(pop)) => {
            for (r, &i) in batch.indices.iter().enumerate() {
                check_index(i, pop.mask.len())?;
                let mask = pop.mask[i].clone();
                pop.confidence.set_renormalized(i, batch.probs.row(r), &mask);
            }
            Ok(())
        }
        (AlgorithmId::Lws, AlgorithmState::Lws(w)) => {
            let q = w.q;
            for (r, (&i, s)) in batch.indices.iter().zip(batch.candidates).enumerate() {
                if i * q >= w.data.len() {
                    return Err(PllError::InvalidState(format!("example index {i} beyond state")));
                }
                let p = batch.probs.row(r);
                let cand: f64 = s.iter().map(|j| p[j]).sum();
                let non: f64 = s.complement().map(|j| p[j]).sum();
                let row = &mut w.data[i * q..(i + 1) * q];
                for (j, v) in row.iter_mut().enumerate() {
                    *v = if s.contains(j) {
                        if cand < PROB_FLOOR {
                            1.0 / s.len() as f64
                        } else {
                            p[j] / cand
                        }
                    } else if non < PROB_FLOOR {
                        0.0
                    } else {
                        p[j] / non
                    };
                }
            }
            Ok(())
        }
        (id, st) if !id.has_state() && st.is_stateless() => Ok(()),
        (id, _) => Err(PllError::InvalidState(format!("state does not belong to {id}"))),
    }
}

pub(super) fn end_epoch(spec: &AlgorithmSpec, state: &mut AlgorithmState, epochs_completed: usize) -> Result<()> {
    let AlgorithmState::Pop(pop) = state else {
        return Ok(());
    };
    if spec.id() != AlgorithmId::Pop {
        return Err(PllError::InvalidState("POP state outside POP".into()));
    }
    pop.window.push_back(pop.confidence.data.clone());
    while pop.window.len() > pop.window_size {
        pop.window.pop_front();
    }
    if epochs_completed < pop.warm_up {
        return Ok(());
    }
    let q = pop.confidence.q;
    for i in 0..pop.mask.len() {
        let current = pop.confidence.row(i).to_vec();
        let kept: Vec<usize> = pop.mask[i]
            .iter()
            .filter(|&j| {
                let peak = pop.window.iter().map(|snap| snap[i * q + j]).fold(f64::NEG_INFINITY, f64::max);
                peak >= pop.threshold
            })
            .collect();
        let new_mask = if kept.is_empty() {
            // Keep the most confident surviving label.
            let masked: Vec<f64> = (0..q)
                .map(|j| if pop.mask[i].contains(j) { current[j] } else { f64::NEG_INFINITY })
                .collect();
            CandidateSet::singleton(q, argmax(&masked))
        } else {
            CandidateSet::from_indices(q, kept).expect("subset of mask")
        };
        pop.confidence.set_renormalized(i, &current, &new_mask);
        pop.mask[i] = new_mask;
    }
    pop.threshold += pop.step;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Matrix;

    fn set(q: usize, s: &[usize]) -> CandidateSet {
        CandidateSet::from_indices(q, s.iter().copied()).unwrap()
    }

    fn apply(id: AlgorithmId, cands: &[&CandidateSet], outputs: Vec<f64>, state: &mut AlgorithmState) {
        let q = cands[0].num_classes();
        let m = Matrix::from_vec(cands.len(), q, outputs).unwrap();
        let idx: Vec<usize> = (0..cands.len()).collect();
        let batch = Batch {
            logits: &m,
            probs: &m,
            candidates: cands,
            indices: &idx,
        };
        update(&AlgorithmSpec::with_defaults(id), &batch, state).unwrap();
    }

    #[test]
    fn uniform_initialization() {
        let s = set(4, &[1, 3]);
        let one = set(4, &[2]);
        let st = initial(&AlgorithmSpec::with_defaults(AlgorithmId::Proden), &[&s, &one]);
        let c = st.confidence().unwrap();
        assert_eq!(c.row(0), &[0.0, 0.5, 0.0, 0.5]);
        assert_eq!(c.row(1), &[0.0, 0.0, 1.0, 0.0]);
        assert!(initial(&AlgorithmSpec::with_defaults(AlgorithmId::Cc), &[&s]).is_stateless());
    }

    #[test]
    fn proden_renormalizes_over_candidates() {
        let s = set(3, &[0, 1]);
        let mut st = initial(&AlgorithmSpec::with_defaults(AlgorithmId::Proden), &[&s]);
        apply(AlgorithmId::Proden, &[&s], vec![0.2, 0.6, 0.2], &mut st);
        let row = st.confidence().unwrap().row(0).to_vec();
        assert!((row[0] - 0.25).abs() < 1e-15 && (row[1] - 0.75).abs() < 1e-15 && row[2] == 0.0);
    }

    #[test]
    fn cavl_activation_rule() {
        // 0.2·0.8 = 0.16 vs 0.6·0.4 = 0.24 -> label 1.
        let s = set(3, &[0, 1]);
        let mut st = initial(&AlgorithmSpec::with_defaults(AlgorithmId::Cavl), &[&s]);
        apply(AlgorithmId::Cavl, &[&s], vec![0.2, 0.6, 0.2], &mut st);
        assert_eq!(st.confidence().unwrap().row(0), &[0.0, 1.0, 0.0]);
        let full = set(3, &[0, 1, 2]);
        let mut st = initial(&AlgorithmSpec::with_defaults(AlgorithmId::Cavl), &[&full]);
        apply(AlgorithmId::Cavl, &[&full], vec![1.0 / 3.0; 3], &mut st);
        assert_eq!(st.confidence().unwrap().row(0), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn pop_elimination_keeps_a_label() {
        let mut h = std::collections::BTreeMap::new();
        h.insert("window".to_string(), 3.0);
        h.insert("warm_up".to_string(), 1.0);
        h.insert("threshold".to_string(), 0.3);
        h.insert("step".to_string(), 0.5);
        let spec = AlgorithmSpec::new(AlgorithmId::Pop, h).unwrap();
        let s = set(4, &[0, 1, 2]);
        let cands = [&s];
        let mut st = initial(&spec, &cands);
        let m = Matrix::from_vec(1, 4, vec![0.1, 0.7, 0.15, 0.05]).unwrap();
        let batch = Batch {
            logits: &m,
            probs: &m,
            candidates: &cands,
            indices: &[0],
        };
        update(&spec, &batch, &mut st).unwrap();
        end_epoch(&spec, &mut st, 1).unwrap();
        let AlgorithmState::Pop(pop) = &st else { unreachable!() };
        // Window peaks: label 0 -> 0.1/0.95, label 2 -> 0.15/0.95, both < 0.3.
        assert_eq!(pop.mask[0].to_vec(), vec![1]);
        assert!((pop.threshold - 0.8).abs() < 1e-15);
        pop.confidence.check(&[&pop.mask[0]]).unwrap();
        // Threshold above every confidence: the top label survives.
        end_epoch(&spec, &mut st, 2).unwrap();
        end_epoch(&spec, &mut st, 3).unwrap();
        let AlgorithmState::Pop(pop) = &st else { unreachable!() };
        assert_eq!(pop.mask[0].to_vec(), vec![1]);
    }

    #[test]
    fn pop_waits_for_warm_up() {
        let spec = AlgorithmSpec::with_defaults(AlgorithmId::Pop);
        let s = set(3, &[0, 1]);
        let mut st = initial(&spec, &[&s]);
        for e in 1..20 {
            end_epoch(&spec, &mut st, e).unwrap();
        }
        let AlgorithmState::Pop(pop) = &st else { unreachable!() };
        assert_eq!(pop.mask[0].len(), 2);
        assert_eq!(pop.window_len(), 5);
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let s = set(3, &[0, 1]);
        let mut st = AlgorithmState::Stateless;
        let m = Matrix::from_vec(1, 3, vec![0.2, 0.3, 0.5]).unwrap();
        let cands = [&s];
        let batch = Batch {
            logits: &m,
            probs: &m,
            candidates: &cands,
            indices: &[0],
        };
        assert!(update(&AlgorithmSpec::with_defaults(AlgorithmId::Proden), &batch, &mut st).is_err());
        assert!(update(&AlgorithmSpec::with_defaults(AlgorithmId::Cc), &batch, &mut st).is_ok());
    }
}

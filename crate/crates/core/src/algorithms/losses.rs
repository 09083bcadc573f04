use super::{AlgorithmId, AlgorithmSpec, AlgorithmState, Batch, PROB_FLOOR};
use crate::candidate::CandidateSet;
use crate::error::{PllError, Result};
use crate::nn::{log_sum_exp, softmax, Matrix};

/// `-ln max(p, floor)` and its derivative (zero below the floor).
fn nl(p: f64) -> (f64, f64) {
    if p >= PROB_FLOOR {
        (-p.ln(), -1.0 / p)
    } else {
        (-PROB_FLOOR.ln(), 0.0)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Pulls a gradient with respect to the probabilities back through softmax.
fn softmax_backward(p: &[f64], dp: &[f64], out: &mut [f64]) {
    let inner: f64 = p.iter().zip(dp).map(|(a, b)| a * b).sum();
    for ((o, pj), dj) in out.iter_mut().zip(p).zip(dp) {
        *o = pj * (dj - inner);
    }
}

pub(super) fn loss_and_grad(spec: &AlgorithmSpec, batch: &Batch<'_>, state: &AlgorithmState) -> Result<(f64, Matrix)> {
    let (b, q) = batch.logits.shape();
    let mut grad = Matrix::zeros(b, q);
    if b == 0 {
        return Err(PllError::Empty("batch"));
    }
    let id = spec.id();
    if matches!(id, AlgorithmId::Nn | AlgorithmId::Ga) {
        return corrected_risk(id == AlgorithmId::Ga, batch);
    }
    let confidence = match id {
        AlgorithmId::Proden | AlgorithmId::Cavl | AlgorithmId::Pop => {
            Some(state.confidence().ok_or_else(|| PllError::InvalidState(format!("{id} needs label confidences")))?)
        }
        _ => None,
    };
    let lws = match (id, state) {
        (AlgorithmId::Lws, AlgorithmState::Lws(w)) => Some(w),
        (AlgorithmId::Lws, _) => return Err(PllError::InvalidState("lws needs leveraged weights".into())),
        _ => None,
    };
    let mut total = 0.0;
    let mut dp = vec![0.0; q];
    for r in 0..b {
        let p = batch.probs.row(r);
        let g = batch.logits.row(r);
        let s = batch.candidates[r];
        let i = batch.indices[r];
        let out = grad.row_mut(r);
        dp.fill(0.0);
        let loss = match id {
            AlgorithmId::Proden | AlgorithmId::Cavl | AlgorithmId::Pop => {
                let conf = confidence.expect("checked above");
                if i >= conf.num_rows() {
                    return Err(PllError::InvalidState(format!("example index {i} beyond state")));
                }
                let w = conf.row(i);
                let mut l = 0.0;
                for j in 0..q {
                    if w[j] != 0.0 {
                        let (v, d) = nl(p[j]);
                        l += w[j] * v;
                        dp[j] = w[j] * d;
                    }
                }
                softmax_backward(p, &dp, out);
                l
            }
            AlgorithmId::AbsMae | AlgorithmId::AbsGce => {
                let m = s.len() as f64;
                let rho = spec.hparams().get("rho").copied().unwrap_or(1.0);
                let mut l = 0.0;
                for j in s.iter() {
                    if id == AlgorithmId::AbsMae {
                        l += 2.0 * (1.0 - p[j]);
                        dp[j] = -2.0 / m;
                    } else {
                        let pf = p[j].max(PROB_FLOOR);
                        l += (1.0 - pf.powf(rho)) / rho;
                        dp[j] = if p[j] >= PROB_FLOOR { -pf.powf(rho - 1.0) / m } else { 0.0 };
                    }
                }
                softmax_backward(p, &dp, out);
                l / m
            }
            AlgorithmId::Cc => {
                let mass: f64 = s.iter().map(|j| p[j]).sum();
                let (l, d) = nl(mass);
                for j in s.iter() {
                    dp[j] = d;
                }
                softmax_backward(p, &dp, out);
                l
            }
            AlgorithmId::Exp => {
                let mass: f64 = s.iter().map(|j| p[j]).sum();
                let scale = (q as f64 - 1.0) / ((q - s.len()).max(1)) as f64;
                let l = scale * (-mass).exp();
                for j in s.iter() {
                    dp[j] = -l;
                }
                softmax_backward(p, &dp, out);
                l
            }
            AlgorithmId::MclGce | AlgorithmId::MclMse => {
                let rho = spec.hparams().get("rho").copied().unwrap_or(1.0);
                let nbar = q - s.len();
                let coef = if nbar == 0 { 0.0 } else { (q as f64 - nbar as f64 - 1.0) / nbar as f64 };
                let sq: f64 = p.iter().map(|v| v * v).sum();
                let mut l = 0.0;
                for j in 0..q {
                    let weight = if s.contains(j) { 1.0 } else { -coef };
                    if weight == 0.0 {
                        continue;
                    }
                    if id == AlgorithmId::MclGce {
                        let pf = p[j].max(PROB_FLOOR);
                        l += weight * (1.0 - pf.powf(rho)) / rho;
                        if p[j] >= PROB_FLOOR {
                            dp[j] -= weight * pf.powf(rho - 1.0);
                        }
                    } else {
                        l += weight * (sq - 2.0 * p[j] + 1.0);
                        for c in 0..q {
                            dp[c] += weight * 2.0 * p[c];
                        }
                        dp[j] -= weight * 2.0;
                    }
                }
                softmax_backward(p, &dp, out);
                l
            }
            AlgorithmId::Lws => {
                let w = lws.expect("checked above").row(i);
                let beta = spec.hparams()["leverage"];
                let mut l = 0.0;
                for j in 0..q {
                    if w[j] == 0.0 {
                        continue;
                    }
                    let (sp, sn) = (sigmoid(g[j]), sigmoid(-g[j]));
                    if s.contains(j) {
                        l += w[j] * sn;
                        out[j] = -w[j] * sp * sn;
                    } else {
                        l += beta * w[j] * sp;
                        out[j] = beta * w[j] * sp * sn;
                    }
                }
                l
            }
            _ => complementary(id, p, g, s, out),
        };
        total += loss;
    }
    let inv = 1.0 / b as f64;
    for v in grad.as_mut_slice() {
        *v *= inv;
    }
    Ok((total * inv, grad))
}

/// Per-example complementary-label loss averaged over every label outside `S`.
fn complementary(id: AlgorithmId, p: &[f64], g: &[f64], s: &CandidateSet, out: &mut [f64]) -> f64 {
    let q = p.len();
    let k = q as f64;
    let nbar = q - s.len();
    if nbar == 0 {
        return 0.0;
    }
    let mut dp = vec![0.0; q];
    let mut dg = vec![0.0; q];
    let mut l = 0.0;
    for y in s.complement() {
        match id {
            AlgorithmId::Pc => {
                for c in 0..q {
                    let sg = sigmoid(g[y] - g[c]);
                    let d = (k - 1.0) * sg * (1.0 - sg);
                    l += (k - 1.0) * sg;
                    dg[y] += d;
                    dg[c] -= d;
                }
                l += -k * (k - 1.0) / 2.0 + (k - 1.0);
            }
            AlgorithmId::Forward => {
                let (v, d) = nl((1.0 - p[y]) / (k - 1.0));
                l += v;
                dp[y] -= d / (k - 1.0);
            }
            AlgorithmId::SclExp => {
                let e = p[y].exp();
                l += e;
                dp[y] += e;
            }
            AlgorithmId::SclNl => {
                let (v, d) = nl(1.0 - p[y]);
                l += v;
                dp[y] -= d;
            }
            AlgorithmId::LW => {
                // -ln(1 - p_ȳ) plus a cross-entropy over the remaining labels
                // weighted by their renormalized predictions.
                let t: f64 = (0..q).filter(|&c| c != y).map(|c| p[c]).sum();
                let (v, d) = nl(t);
                l += v;
                for c in 0..q {
                    if c != y {
                        dp[c] += d;
                    }
                }
                if t >= PROB_FLOOR {
                    let mut a = 0.0;
                    for c in 0..q {
                        if c != y {
                            let (vc, dc) = nl(p[c]);
                            a += p[c] * vc;
                            dp[c] += (vc + p[c] * dc) / t;
                        }
                    }
                    l += a / t;
                    for c in 0..q {
                        if c != y {
                            dp[c] -= a / (t * t);
                        }
                    }
                } else {
                    let tf = PROB_FLOOR;
                    for c in 0..q {
                        if c != y {
                            let (vc, dc) = nl(p[c]);
                            l += p[c] * vc / tf;
                            dp[c] += (vc + p[c] * dc) / tf;
                        }
                    }
                }
            }
            AlgorithmId::OpW => {
                // -log softmax(-g)_ȳ
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                l += g[y] + log_sum_exp(&neg);
                let sm = softmax(&neg);
                dg[y] += 1.0;
                for c in 0..q {
                    dg[c] -= sm[c];
                }
            }
            _ => unreachable!("not a complementary-label loss"),
        }
    }
    softmax_backward(p, &dp, out);
    let inv = 1.0 / nbar as f64;
    for (o, d) in out.iter_mut().zip(&dg) {
        *o = (*o + d) * inv;
    }
    l * inv
}

/// Batch-level corrected risk shared by NN and GA. Per-class partial risks
/// `r_j` use the empirical complementary-label distribution of the batch;
/// examples with `S` equal to the full set carry no complementary label and
/// are skipped.
fn corrected_risk(ascent: bool, batch: &Batch<'_>) -> Result<(f64, Matrix)> {
    let (b, q) = batch.logits.shape();
    let k = q as f64;
    let active: Vec<usize> = (0..b).filter(|&r| !batch.candidates[r].is_full()).collect();
    let mut grad = Matrix::zeros(b, q);
    if active.is_empty() {
        return Ok((0.0, grad));
    }
    let n = active.len() as f64;
    let coef = |r: usize, j: usize| {
        let s = batch.candidates[r];
        if s.contains(j) {
            1.0
        } else {
            1.0 - (k - 1.0) / (q - s.len()) as f64
        }
    };
    let mut risk = vec![0.0; q];
    for &r in &active {
        let p = batch.probs.row(r);
        for (j, rj) in risk.iter_mut().enumerate() {
            *rj += nl(p[j]).0 * coef(r, j) / n;
        }
    }
    let (loss, outer): (f64, Vec<f64>) = if ascent && risk.iter().any(|&v| v < 0.0) {
        let loss = -risk.iter().map(|v| v.min(0.0)).sum::<f64>();
        (loss, risk.iter().map(|&v| if v < 0.0 { -1.0 } else { 0.0 }).collect())
    } else if ascent {
        (risk.iter().sum(), vec![1.0; q])
    } else {
        let loss = risk.iter().map(|v| v.max(0.0)).sum();
        (loss, risk.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect())
    };
    let mut dp = vec![0.0; q];
    for &r in &active {
        let p = batch.probs.row(r);
        for j in 0..q {
            dp[j] = outer[j] * coef(r, j) * nl(p[j]).1 / n;
        }
        softmax_backward(p, &dp, grad.row_mut(r));
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{loss_and_grad, make_initial_state};
    use crate::nn::softmax_rows;

    fn set(q: usize, s: &[usize]) -> CandidateSet {
        CandidateSet::from_indices(q, s.iter().copied()).unwrap()
    }

    fn eval_probs(id: AlgorithmId, probs: Vec<f64>, sets: &[CandidateSet]) -> f64 {
        let q = sets[0].num_classes();
        let logits: Vec<f64> = probs.iter().map(|v| v.ln()).collect();
        let logits = Matrix::from_vec(sets.len(), q, logits).unwrap();
        let probs = softmax_rows(&logits);
        let cands: Vec<&CandidateSet> = sets.iter().collect();
        let idx: Vec<usize> = (0..sets.len()).collect();
        let spec = AlgorithmSpec::with_defaults(id);
        let state = make_initial_state(&spec, &cands);
        let batch = Batch {
            logits: &logits,
            probs: &probs,
            candidates: &cands,
            indices: &idx,
        };
        loss_and_grad(&spec, &batch, &state).unwrap().0
    }

    #[test]
    fn closed_form_values() {
        let ln2 = std::f64::consts::LN_2;
        assert!((eval_probs(AlgorithmId::Cc, vec![0.25; 4], &[set(4, &[0, 2])]) - ln2).abs() < 1e-12);
        assert!((eval_probs(AlgorithmId::Proden, vec![0.5, 0.25, 0.25], &[set(3, &[0])]) - ln2).abs() < 1e-12);
        let mae = eval_probs(AlgorithmId::AbsMae, vec![0.3, 0.4, 0.3], &[set(3, &[0, 1])]);
        assert!((mae - 1.3).abs() < 1e-12);
        let fwd = eval_probs(AlgorithmId::Forward, vec![0.5, 0.3, 0.2], &[set(3, &[0, 1])]);
        assert!((fwd + 0.4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn full_candidate_sets_give_no_complementary_signal() {
        for id in [AlgorithmId::Pc, AlgorithmId::SclNl, AlgorithmId::OpW, AlgorithmId::Nn] {
            assert_eq!(eval_probs(id, vec![0.2, 0.3, 0.5], &[set(3, &[0, 1, 2])]), 0.0);
        }
    }

    #[test]
    fn nn_is_non_negative() {
        let sets = [set(3, &[0]), set(3, &[1]), set(3, &[0, 2])];
        let l = eval_probs(AlgorithmId::Nn, vec![0.9, 0.05, 0.05, 0.1, 0.8, 0.1, 0.1, 0.1, 0.8], &sets);
        assert!(l >= 0.0);
    }
}

//! Straight-line programs over abstract qubit ids.
//!
//! Cones and schedules are lowered to a list of preparations, gates and
//! discards. Executors only need to follow the list; the order decides the
//! largest simultaneously live register and therefore the cost.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{CausalCone, DmeraCircuit};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    /// Fresh qubit `q` in the state of preparation `prep` (circuit prep order).
    Prep { q: usize, prep: usize },
    /// Gate `gate` (circuit gate order) on `(a, b)`, `a` as the high bit.
    Gate { a: usize, b: usize, gate: usize },
    /// Trace out qubit `q`.
    Discard { q: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub n_ids: usize,
    /// Ids live before the first op.
    pub inputs: Vec<usize>,
    pub ops: Vec<Op>,
    /// Ids kept at the end, in output order.
    pub outputs: Vec<usize>,
}

impl Program {
    /// Program of a causal cone with worldline ids, discards inserted and
    /// ops reordered to keep the live register small.
    pub fn from_cone(circuit: &DmeraCircuit, cone: &CausalCone) -> Result<Self> {
        // A cone that records top preparations starts from nothing; any
        // other cone starts from its window at `stop`.
        let inputs: Vec<usize> = if cone.preps.iter().any(|p| p.0 == 0) {
            Vec::new()
        } else {
            cone.windows[cone.stop].clone()
        };
        let p = worldlines(
            circuit,
            cone.stop,
            cone.scale,
            &cone.gates,
            &cone.preps,
            &inputs,
            &cone.target,
        )?;
        Ok(p.with_discards().reordered())
    }

    /// Program of the whole circuit, keeping `target` bottom sites. Every
    /// gate is kept; only the order is optimized.
    pub fn global(circuit: &DmeraCircuit, target: &[usize]) -> Result<Self> {
        let spec = circuit.spec();
        let gates: Vec<usize> = (0..circuit.gates().len()).collect();
        let preps: Vec<(usize, usize)> = circuit
            .preps()
            .iter()
            .map(|r| (r.scale, r.sites[0]))
            .collect();
        let p = worldlines(circuit, 0, spec.n_scales, &gates, &preps, &[], target)?;
        Ok(p.with_discards().reordered())
    }

    /// Inserts a discard right after the last use of every non-output id.
    pub fn with_discards(&self) -> Program {
        let mut last: HashMap<usize, usize> = HashMap::new();
        let mut ops: Vec<Op> = self
            .ops
            .iter()
            .copied()
            .filter(|op| !matches!(op, Op::Discard { .. }))
            .collect();
        for (i, op) in ops.iter().enumerate() {
            match *op {
                Op::Prep { q, .. } => {
                    last.insert(q, i);
                }
                Op::Gate { a, b, .. } => {
                    last.insert(a, i);
                    last.insert(b, i);
                }
                Op::Discard { .. } => {}
            }
        }
        let mut after: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut unused_inputs = Vec::new();
        for &q in &self.inputs {
            if !last.contains_key(&q) && !self.outputs.contains(&q) {
                unused_inputs.push(q);
            }
        }
        for (&q, &i) in &last {
            if !self.outputs.contains(&q) {
                after.entry(i).or_default().push(q);
            }
        }
        let mut out: Vec<Op> = unused_inputs.into_iter().map(|q| Op::Discard { q }).collect();
        for (i, op) in ops.drain(..).enumerate() {
            // A prep whose qubit is never used again and is not an output is dropped.
            if let Op::Prep { q, .. } = op {
                if last.get(&q) == Some(&i) && !self.outputs.contains(&q) {
                    continue;
                }
            }
            out.push(op);
            if let Some(qs) = after.get_mut(&i) {
                qs.sort_unstable();
                out.extend(qs.iter().map(|&q| Op::Discard { q }));
            }
        }
        Program {
            n_ids: self.n_ids,
            inputs: self.inputs.clone(),
            ops: out,
            outputs: self.outputs.clone(),
        }
    }

    /// Largest number of simultaneously live ids.
    pub fn peak_live(&self) -> usize {
        let mut live = self.inputs.len();
        let mut peak = live;
        for op in &self.ops {
            match op {
                Op::Prep { .. } => {
                    live += 1;
                    peak = peak.max(live);
                }
                Op::Discard { .. } => live -= 1,
                Op::Gate { .. } => {}
            }
        }
        peak
    }

    /// Sum over gates of `4^live`, the dominant density-matrix cost.
    pub fn cost(&self) -> f64 {
        let mut live = self.inputs.len() as i32;
        let mut c = 0.0;
        for op in &self.ops {
            match op {
                Op::Prep { .. } => live += 1,
                Op::Discard { .. } => live -= 1,
                Op::Gate { .. } => c += 4f64.powi(live),
            }
        }
        c
    }

    pub fn gate_count(&self) -> usize {
        self.ops.iter().filter(|o| matches!(o, Op::Gate { .. })).count()
    }

    /// Checks that every op references live ids and the outputs survive.
    pub fn validate(&self) -> Result<()> {
        let mut live: Vec<bool> = vec![false; self.n_ids];
        for &q in &self.inputs {
            live[q] = true;
        }
        for op in &self.ops {
            match *op {
                Op::Prep { q, .. } => {
                    if live[q] {
                        return Err(Error::InvalidSpec(format!("qubit {q} prepared twice")));
                    }
                    live[q] = true;
                }
                Op::Gate { a, b, .. } => {
                    for q in [a, b] {
                        if !live[q] {
                            return Err(Error::DeadQubit(q));
                        }
                    }
                }
                Op::Discard { q } => {
                    if !live[q] {
                        return Err(Error::DeadQubit(q));
                    }
                    live[q] = false;
                }
            }
        }
        for &q in &self.outputs {
            if !live[q] {
                return Err(Error::DeadQubit(q));
            }
        }
        Ok(())
    }

    /// Greedy reordering: preparations are delayed until a gate needs them,
    /// discards happen as early as possible, and among ready gates the one
    /// adding the fewest live qubits goes first. A few randomized tie-breaks
    /// are tried and the cheapest order is kept.
    pub fn reordered(&self) -> Program {
        let mut best = self.with_discards();
        let mut best_cost = best.cost();
        for attempt in 0..8u64 {
            if let Some(p) = self.greedy(attempt) {
                let c = p.cost();
                if c < best_cost {
                    best_cost = c;
                    best = p;
                }
            }
        }
        best
    }

    fn greedy(&self, attempt: u64) -> Option<Program> {
        let base = self.with_discards();
        let mut prep_of: HashMap<usize, usize> = HashMap::new();
        let mut gates: Vec<(usize, usize, usize)> = Vec::new();
        for op in &base.ops {
            match *op {
                Op::Prep { q, prep } => {
                    prep_of.insert(q, prep);
                }
                Op::Gate { a, b, gate } => gates.push((a, b, gate)),
                Op::Discard { .. } => {}
            }
        }
        // Per-qubit gate sequences.
        let mut seq: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, &(a, b, _)) in gates.iter().enumerate() {
            seq.entry(a).or_default().push(i);
            seq.entry(b).or_default().push(i);
        }
        let mut next: HashMap<usize, usize> = HashMap::new();
        let mut live: Vec<bool> = vec![false; self.n_ids];
        for &q in &self.inputs {
            live[q] = true;
        }
        let is_output = |q: usize| self.outputs.contains(&q);
        let mut rng = ChaCha8Rng::seed_from_u64(attempt);
        let mut priority: Vec<u64> = (0..gates.len() as u64).collect();
        if attempt > 0 {
            priority.shuffle(&mut rng);
        }
        let mut out = Vec::with_capacity(base.ops.len());
        for &q in &self.inputs {
            if !seq.contains_key(&q) && !is_output(q) {
                out.push(Op::Discard { q });
                live[q] = false;
            }
        }
        let mut done = vec![false; gates.len()];
        for _ in 0..gates.len() {
            let mut pick: Option<(i32, u64, usize)> = None;
            for (i, &(a, b, _)) in gates.iter().enumerate() {
                if done[i] {
                    continue;
                }
                let ready = [a, b]
                    .iter()
                    .all(|q| seq[q][*next.get(q).unwrap_or(&0)] == i);
                if !ready {
                    continue;
                }
                let mut delta = 0i32;
                for q in [a, b] {
                    if !live[q] {
                        delta += 1;
                    }
                    let k = *next.get(&q).unwrap_or(&0);
                    if k + 1 == seq[&q].len() && !is_output(q) {
                        delta -= 1;
                    }
                }
                let key = (delta, priority[i], i);
                if pick.is_none_or(|p| (key.0, key.1) < (p.0, p.1)) {
                    pick = Some(key);
                }
            }
            let (_, _, i) = pick?;
            let (a, b, gate) = gates[i];
            for q in [a, b] {
                if !live[q] {
                    out.push(Op::Prep {
                        q,
                        prep: *prep_of.get(&q)?,
                    });
                    live[q] = true;
                }
            }
            out.push(Op::Gate { a, b, gate });
            done[i] = true;
            let mut qs = [a, b];
            qs.sort_unstable();
            for q in qs {
                let k = next.entry(q).or_insert(0);
                *k += 1;
                if *k == seq[&q].len() && !is_output(q) {
                    out.push(Op::Discard { q });
                    live[q] = false;
                }
            }
        }
        // Outputs that no gate touched are prepared at the end.
        for &q in &self.outputs {
            if !live[q] {
                out.push(Op::Prep {
                    q,
                    prep: *prep_of.get(&q)?,
                });
                live[q] = true;
            }
        }
        Some(Program {
            n_ids: self.n_ids,
            inputs: self.inputs.clone(),
            ops: out,
            outputs: self.outputs.clone(),
        })
    }
}

/// Lowers a gate subset to worldline ids. A site `x` of scale `s-1` keeps
/// its id when it becomes site `2x` of scale `s`.
fn worldlines(
    circuit: &DmeraCircuit,
    lo: usize,
    hi: usize,
    gates: &[usize],
    preps: &[(usize, usize)],
    inputs: &[usize],
    outputs: &[usize],
) -> Result<Program> {
    let spec = circuit.spec();
    let mut ids: HashMap<usize, usize> = HashMap::new();
    let mut n_ids = 0;
    let mut input_ids = Vec::new();
    let mut ops = Vec::new();
    if lo == 0 && inputs.is_empty() {
        for &(s, x) in preps.iter().filter(|p| p.0 == 0) {
            ids.insert(x, n_ids);
            ops.push(Op::Prep {
                q: n_ids,
                prep: spec.prep_index(s, x),
            });
            n_ids += 1;
        }
    } else {
        for &x in inputs {
            ids.insert(x, n_ids);
            input_ids.push(n_ids);
            n_ids += 1;
        }
    }
    let mut gi = 0;
    for s in lo + 1..=hi {
        ids = ids.into_iter().map(|(x, q)| (2 * x, q)).collect();
        for &(ps, x) in preps.iter().filter(|p| p.0 == s) {
            ids.insert(x, n_ids);
            ops.push(Op::Prep {
                q: n_ids,
                prep: spec.prep_index(ps, x),
            });
            n_ids += 1;
        }
        while gi < gates.len() && circuit.gates()[gates[gi]].scale == s {
            let g = gates[gi];
            let sites = &circuit.gates()[g].sites;
            let a = *ids.get(&sites[0]).ok_or(Error::DeadQubit(sites[0]))?;
            let b = *ids.get(&sites[1]).ok_or(Error::DeadQubit(sites[1]))?;
            ops.push(Op::Gate { a, b, gate: g });
            gi += 1;
        }
    }
    let outputs = outputs
        .iter()
        .map(|x| ids.get(x).copied().ok_or(Error::DeadQubit(*x)))
        .collect::<Result<Vec<_>>>()?;
    let p = Program {
        n_ids,
        inputs: input_ids,
        ops,
        outputs,
    };
    p.validate()?;
    Ok(p)
}

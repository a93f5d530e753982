//! Physical-qubit assignment and executable gate schedules.
//!
//! Layer `i` of a lattice with `(2 l0 + 1)^d` top qubits has side
//! `2^(i-1) (2 l0 + 1)`. Layer 1 enumerates the top hypercube row-major and
//! layer `i + 1` inherits ids through `a(2x + u) = a(F_u(x))` with
//! `F_u(x) = (x + (l0 + 1) u) mod (2 l0 + 1)`. Circuit scale `s` is layer
//! `s + 1`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::circuit::{CausalCone, DmeraCircuit, GateParams};
use crate::engine::{Op, Program};
use crate::error::{Error, Result};

/// Largest table the enumerators build.
const MAX_ENTRIES: usize = 1 << 24;

/// `(x + (l0 + 1) u) mod (2 l0 + 1)` componentwise.
pub fn f_shift(x: &[usize], u: &[usize], ell0: usize) -> Vec<usize> {
    let m = 2 * ell0 + 1;
    x.iter()
        .zip(u)
        .map(|(&xi, &ui)| (xi + (ell0 + 1) * ui) % m)
        .collect()
}

/// Whether `x - y` is a multiple of `2 l0 + 1` in every coordinate.
pub fn same_residue(x: &[usize], y: &[usize], ell0: usize) -> bool {
    let m = 2 * ell0 + 1;
    x.iter().zip(y).all(|(&a, &b)| a % m == b % m)
}

/// Physical ids of one layer, stored row-major (first coordinate slowest).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentTable {
    pub layer: usize,
    pub ell0: usize,
    pub d: usize,
    /// Side length of the layer.
    pub extent: usize,
    pub ids: Vec<usize>,
}

impl AssignmentTable {
    pub fn period(&self) -> usize {
        2 * self.ell0 + 1
    }

    /// Number of physical qubits, `(2 l0 + 1)^d`.
    pub fn n_physical(&self) -> usize {
        self.period().pow(self.d as u32)
    }

    pub fn index(&self, x: &[usize]) -> Result<usize> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch(x.len(), self.d));
        }
        let mut i = 0;
        for &c in x {
            if c >= self.extent {
                return Err(Error::CoordinateRange {
                    coord: x.to_vec(),
                    extent: self.extent,
                });
            }
            i = i * self.extent + c;
        }
        Ok(i)
    }

    pub fn coords(&self, mut i: usize) -> Vec<usize> {
        let mut x = vec![0; self.d];
        for k in (0..self.d).rev() {
            x[k] = i % self.extent;
            i /= self.extent;
        }
        x
    }

    pub fn id(&self, x: &[usize]) -> Result<usize> {
        Ok(self.ids[self.index(x)?])
    }
}

/// Assignment of layer `layer` (1-based) by the recursion above.
pub fn assign_layer(layer: usize, ell0: usize, d: usize) -> Result<AssignmentTable> {
    if layer == 0 || d == 0 {
        return Err(Error::InvalidSpec("layer and dimension start at 1".into()));
    }
    let m = 2 * ell0 + 1;
    let extent = u32::try_from(layer - 1)
        .ok()
        .and_then(|e| 1usize.checked_shl(e))
        .and_then(|f| f.checked_mul(m))
        .ok_or_else(|| Error::InvalidSpec(format!("layer {layer} overflows")))?;
    let entries = (0..d).try_fold(1usize, |acc, _| acc.checked_mul(extent));
    if entries.is_none_or(|e| e > MAX_ENTRIES) {
        return Err(Error::InvalidSpec(format!(
            "layer {layer} with side {extent} in d={d} exceeds {MAX_ENTRIES} entries"
        )));
    }
    let mut table = AssignmentTable {
        layer: 1,
        ell0,
        d,
        extent: m,
        ids: (0..m.pow(d as u32)).collect(),
    };
    for i in 2..=layer {
        let prev = table;
        let ext = prev.extent * 2;
        let mut next = AssignmentTable {
            layer: i,
            ell0,
            d,
            extent: ext,
            ids: vec![0; ext.pow(d as u32)],
        };
        for k in 0..next.ids.len() {
            let y = next.coords(k);
            let x: Vec<usize> = y.iter().map(|c| c / 2).collect();
            let u: Vec<usize> = y.iter().map(|c| c % 2).collect();
            next.ids[k] = prev.id(&f_shift(&x, &u, ell0))?;
        }
        table = next;
    }
    Ok(table)
}

/// `a(x) = a(x + (2 l0 + 1) e_n)` wherever both positions lie in the layer.
pub fn verify_shift_invariance(table: &AssignmentTable) -> bool {
    let m = table.period();
    (0..table.ids.len()).all(|k| {
        let x = table.coords(k);
        (0..table.d).all(|n| {
            if x[n] + m >= table.extent {
                return true;
            }
            let mut y = x.clone();
            y[n] += m;
            table.id(&y).is_ok_and(|id| id == table.ids[k])
        })
    })
}

/// Exactly `(2 l0 + 1)^d` distinct ids appear.
pub fn verify_counting(table: &AssignmentTable) -> bool {
    let distinct: BTreeSet<usize> = table.ids.iter().copied().collect();
    distinct.len() == table.n_physical()
}

/// `a(x) = a(y)` iff `x - y` is a multiple of `2 l0 + 1` componentwise.
///
/// Equivalent to: the id is a function of the residue class of the position
/// and distinct classes carry distinct ids. Checking that bijection visits
/// every position once yet decides the statement for all pairs.
pub fn verify_collision_theorem(table: &AssignmentTable) -> bool {
    let m = table.period();
    let mut class_id: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut id_class: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, &id) in table.ids.iter().enumerate() {
        let r: Vec<usize> = table.coords(k).iter().map(|c| c % m).collect();
        if *class_id.entry(r.clone()).or_insert(id) != id {
            return false;
        }
        if *id_class.entry(id).or_insert(r.clone()) != r {
            return false;
        }
    }
    true
}

/// Whether `x` and `y` share a physical qubit.
pub fn collision_check(x: &[usize], y: &[usize], table: &AssignmentTable) -> Result<bool> {
    Ok(table.id(x)? == table.id(y)?)
}

/// One step of a schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Instruction {
    /// Re-prepare physical qubits; `preps[k]` is the circuit preparation
    /// placed on `ids[k]`.
    Reset {
        scale: usize,
        ids: Vec<usize>,
        preps: Vec<usize>,
    },
    /// Gate `gate` of the circuit on physical qubits `(a, b)`.
    Gate {
        scale: usize,
        layer: usize,
        gate: usize,
        a: usize,
        b: usize,
        params: GateParams,
    },
}

/// Sites of one scale seen by a schedule, all at that scale's lattice.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleRecord {
    pub scale: usize,
    /// Sites kept for the next scale (the target at the bottom).
    pub kept: Vec<usize>,
    /// Every site the scale touches.
    pub touched: Vec<usize>,
    /// `touched \ kept`: traced out during the scale.
    pub traced: Vec<usize>,
    /// Sites prepared at this scale.
    pub fresh: Vec<usize>,
    /// Physical ids of `fresh`.
    pub fresh_ids: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSchedule {
    pub ell0: usize,
    pub n_physical: usize,
    /// Bottom sites, ascending.
    pub target: Vec<usize>,
    /// Physical ids holding `target` at the end.
    pub target_ids: Vec<usize>,
    pub instructions: Vec<Instruction>,
    pub records: Vec<ScaleRecord>,
}

/// Smallest cyclic interval length covering `sites` on a ring of `n`.
fn cyclic_span(sites: &BTreeSet<usize>, n: usize) -> usize {
    let v: Vec<usize> = sites.iter().copied().collect();
    let k = v.len();
    if k <= 1 {
        return k;
    }
    let mut gap = n - v[k - 1] + v[0];
    for w in v.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    n - gap + 1
}

/// Schedule of the past causal cone of `target` on `(2 l0 + 1)` physical
/// qubits.
///
/// Gates run scale by scale and layer by layer. A reset is issued right
/// before the first gate that needs the fresh qubit and a qubit is released
/// after its last use, so the live register never holds two circuit qubits
/// with the same physical id. Within a layer the lexicographically first
/// gate whose fresh qubits are free goes next; on a ring barely wider than
/// the register this is what lets the top scales fit. If no gate can go the
/// function fails instead of emitting a wrong schedule.
pub fn plan_schedule(circuit: &DmeraCircuit, target: &[usize], ell0: usize) -> Result<GateSchedule> {
    let spec = circuit.spec();
    let depth = spec.depth;
    let period = 2 * ell0 + 1;
    if spec.d != 1 {
        return Err(Error::InvalidSpec("schedules are built for d = 1".into()));
    }
    if ell0 + 1 < 2 * depth {
        return Err(Error::AssignmentCollision {
            ell0,
            reason: format!(
                "needs l0 >= 2D - 1 = {} so a cone layer fits in 2 l0 + 1 qubits",
                2 * depth - 1
            ),
        });
    }
    if spec.top_width != period {
        return Err(Error::InvalidSpec(format!(
            "top layer must hold 2 l0 + 1 = {period} qubits, not {}",
            spec.top_width
        )));
    }
    let set: BTreeSet<usize> = target.iter().copied().collect();
    if set.is_empty() {
        return Err(Error::EmptyTarget);
    }
    let span = cyclic_span(&set, spec.n_sites());
    if span > 2 * depth {
        return Err(Error::TargetTooLarge(format!(
            "target spans {span} sites; the box side is 2D = {}",
            2 * depth
        )));
    }
    let n = spec.n_scales;
    let cone = CausalCone::new(circuit, target)?;
    let tables = (1..=n + 1)
        .map(|i| assign_layer(i, ell0, 1))
        .collect::<Result<Vec<_>>>()?;
    let phys = |s: usize, x: usize| tables[s].ids[x];
    let collision = |s: usize, x: usize, p: usize| Error::AssignmentCollision {
        ell0,
        reason: format!("fresh site {x} of scale {s} needs physical qubit {p}, which is still in use"),
    };

    let mut instructions = Vec::new();
    let mut records = Vec::new();
    // Physical id -> site at the current scale.
    let mut live: BTreeMap<usize, usize> = BTreeMap::new();

    let top = cone.windows[0].clone();
    let mut ids = Vec::new();
    for &x in &top {
        let p = phys(0, x);
        if live.insert(p, x).is_some() {
            return Err(collision(0, x, p));
        }
        ids.push(p);
    }
    instructions.push(Instruction::Reset {
        scale: 0,
        ids: ids.clone(),
        preps: top.iter().map(|&x| spec.prep_index(0, x)).collect(),
    });
    records.push(ScaleRecord {
        scale: 0,
        kept: top.clone(),
        touched: top.clone(),
        traced: Vec::new(),
        fresh: top,
        fresh_ids: ids,
    });

    for s in 1..=n {
        // Old site x becomes 2x and keeps its physical qubit.
        live = live.into_iter().map(|(p, x)| (p, 2 * x)).collect();
        debug_assert!(live.iter().all(|(&p, &x)| phys(s, x) == p));
        let gates: Vec<usize> = cone.gates_of_scale(circuit, s).collect();
        let kept: BTreeSet<usize> = cone.windows[s].iter().copied().collect();
        let mut uses: HashMap<usize, usize> = HashMap::new();
        for &g in &gates {
            for &x in &circuit.gates()[g].sites {
                *uses.entry(x).or_default() += 1;
            }
        }
        let mut fresh = Vec::new();
        let mut prepared: BTreeSet<usize> = BTreeSet::new();
        for y in 1..=depth {
            let mut pending: Vec<usize> = gates
                .iter()
                .copied()
                .filter(|&g| circuit.gates()[g].layer == y)
                .collect();
            while !pending.is_empty() {
                // Gates of one layer commute: run the first one whose fresh
                // qubits are free.
                let needs = |g: usize| -> Vec<(usize, usize)> {
                    circuit.gates()[g]
                        .sites
                        .iter()
                        .filter(|&&x| x % 2 == 1 && !prepared.contains(&x))
                        .map(|&x| (x, phys(s, x)))
                        .collect()
                };
                let Some(k) = pending
                    .iter()
                    .position(|&g| needs(g).iter().all(|(_, p)| !live.contains_key(p)))
                else {
                    let (x, p) = needs(pending[0])
                        .into_iter()
                        .find(|(_, p)| live.contains_key(p))
                        .expect("a blocked gate has a busy fresh qubit");
                    return Err(collision(s, x, p));
                };
                let g = pending.remove(k);
                let r = &circuit.gates()[g];
                let (a, b) = (r.sites[0], r.sites[1]);
                let new = needs(g);
                if !new.is_empty() {
                    for &(x, p) in &new {
                        prepared.insert(x);
                        live.insert(p, x);
                        fresh.push(x);
                    }
                    instructions.push(Instruction::Reset {
                        scale: s,
                        ids: new.iter().map(|&(_, p)| p).collect(),
                        preps: new.iter().map(|&(x, _)| spec.prep_index(s, x)).collect(),
                    });
                }
                instructions.push(Instruction::Gate {
                    scale: s,
                    layer: y,
                    gate: g,
                    a: phys(s, a),
                    b: phys(s, b),
                    params: circuit.gate_params(g).clone(),
                });
                for x in [a, b] {
                    let u = uses.get_mut(&x).expect("site of a cone gate");
                    *u -= 1;
                    if *u == 0 && !kept.contains(&x) {
                        live.remove(&phys(s, x));
                    }
                }
            }
        }
        let touched: Vec<usize> = cone.entry[s].clone();
        fresh.sort_unstable();
        records.push(ScaleRecord {
            scale: s,
            kept: kept.iter().copied().collect(),
            traced: touched.iter().copied().filter(|x| !kept.contains(x)).collect(),
            touched,
            fresh_ids: fresh.iter().map(|&x| phys(s, x)).collect(),
            fresh,
        });
    }
    let target: Vec<usize> = set.into_iter().collect();
    Ok(GateSchedule {
        ell0,
        n_physical: period,
        target_ids: target.iter().map(|&x| phys(n, x)).collect(),
        target,
        instructions,
        records,
    })
}

impl GateSchedule {
    /// Lowers the schedule to a program over physical ids. A reset of a
    /// qubit that still holds an abandoned circuit qubit traces it out first.
    pub fn to_program(&self) -> Program {
        let mut live = vec![false; self.n_physical];
        let mut ops = Vec::new();
        for ins in &self.instructions {
            match ins {
                Instruction::Reset { ids, preps, .. } => {
                    for (&q, &prep) in ids.iter().zip(preps) {
                        if live[q] {
                            ops.push(Op::Discard { q });
                        }
                        ops.push(Op::Prep { q, prep });
                        live[q] = true;
                    }
                }
                Instruction::Gate { a, b, gate, .. } => ops.push(Op::Gate {
                    a: *a,
                    b: *b,
                    gate: *gate,
                }),
            }
        }
        for q in 0..self.n_physical {
            if live[q] && !self.target_ids.contains(&q) {
                ops.push(Op::Discard { q });
            }
        }
        Program {
            n_ids: self.n_physical,
            inputs: Vec::new(),
            ops,
            outputs: self.target_ids.clone(),
        }
    }

    /// Physical ids referenced anywhere in the schedule.
    pub fn used_ids(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for ins in &self.instructions {
            match ins {
                Instruction::Reset { ids, .. } => out.extend(ids.iter().copied()),
                Instruction::Gate { a, b, .. } => {
                    out.insert(*a);
                    out.insert(*b);
                }
            }
        }
        out
    }

    /// Line-oriented export: `RESET p ...` and `GATE s y p_a p_b theta_0..theta_14`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for ins in &self.instructions {
            match ins {
                Instruction::Reset { ids, .. } => {
                    out.push_str("RESET");
                    for p in ids {
                        let _ = write!(out, " {p}");
                    }
                }
                Instruction::Gate {
                    scale,
                    layer,
                    a,
                    b,
                    params,
                    ..
                } => {
                    let _ = write!(out, "GATE {scale} {layer} {a} {b}");
                    for t in params.0 {
                        let _ = write!(out, " {t:?}");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Parsed line of an exported schedule.
#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleLine {
    Reset(Vec<usize>),
    Gate {
        scale: usize,
        layer: usize,
        a: usize,
        b: usize,
        params: GateParams,
    },
}

pub fn parse_schedule(text: &str) -> Result<Vec<ScheduleLine>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| Error::Parse {
            line: i + 1,
            msg: msg.to_string(),
        };
        let mut tok = line.split_whitespace();
        let kind = tok.next().unwrap_or_default();
        let rest: Vec<&str> = tok.collect();
        match kind {
            "RESET" => {
                let ids = rest
                    .iter()
                    .map(|t| t.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| err("RESET expects qubit ids"))?;
                out.push(ScheduleLine::Reset(ids));
            }
            "GATE" => {
                if rest.len() != 4 + 15 {
                    return Err(err("GATE expects s y p_a p_b and 15 angles"));
                }
                let ints = rest[..4]
                    .iter()
                    .map(|t| t.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| err("bad GATE header"))?;
                let angles = rest[4..]
                    .iter()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| err("bad GATE angle"))?;
                out.push(ScheduleLine::Gate {
                    scale: ints[0],
                    layer: ints[1],
                    a: ints[2],
                    b: ints[3],
                    params: GateParams::from_slice(&angles)?,
                });
            }
            _ => return Err(err("unknown instruction")),
        }
    }
    Ok(out)
}

/// Checks an exported schedule on `n_physical` qubits and names the first
/// violated invariant.
pub fn verify_schedule_lines(lines: &[ScheduleLine], n_physical: usize) -> std::result::Result<(), String> {
    let mut prepared = vec![false; n_physical];
    let mut layer_ids: HashMap<(usize, usize), BTreeSet<usize>> = HashMap::new();
    let mut last = (0usize, 0usize);
    for (k, l) in lines.iter().enumerate() {
        match l {
            ScheduleLine::Reset(ids) => {
                for &p in ids {
                    if p >= n_physical {
                        return Err(format!("instruction {k}: physical id {p} out of range 0..{n_physical}"));
                    }
                    prepared[p] = true;
                }
            }
            ScheduleLine::Gate {
                scale, layer, a, b, ..
            } => {
                for p in [*a, *b] {
                    if p >= n_physical {
                        return Err(format!("instruction {k}: physical id {p} out of range 0..{n_physical}"));
                    }
                    if !prepared[p] {
                        return Err(format!("instruction {k}: gate on qubit {p} before any reset"));
                    }
                }
                if a == b {
                    return Err(format!("instruction {k}: gate acts twice on qubit {a}"));
                }
                if (*scale, *layer) < last {
                    return Err(format!(
                        "instruction {k}: layer order violated, ({scale}, {layer}) after {last:?}"
                    ));
                }
                last = (*scale, *layer);
                let seen = layer_ids.entry((*scale, *layer)).or_default();
                for p in [*a, *b] {
                    if !seen.insert(p) {
                        return Err(format!(
                            "instruction {k}: distinct-ids invariant violated, qubit {p} used twice in scale {scale} layer {layer}"
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::DmeraSpec;
    use crate::engine::{run_exact, trace_distance, Channels, NoiseModel};

    #[test]
    fn shift_examples() {
        assert_eq!(f_shift(&[3], &[1], 3), vec![0]);
        assert_eq!(f_shift(&[12], &[0], 3), vec![5]);
        assert_eq!(f_shift(&[2, 1], &[1, 0], 1), vec![1, 1]);
    }

    #[test]
    fn layer_two_sequence_matches_figure() {
        let t = assign_layer(2, 3, 1).unwrap();
        let one_based: Vec<usize> = t.ids.iter().map(|i| i + 1).collect();
        assert_eq!(one_based, vec![1, 5, 2, 6, 3, 7, 4, 1, 5, 2, 6, 3, 7, 4]);
    }

    #[test]
    fn layer_one_is_identity_enumeration() {
        for d in 1..=2 {
            for l0 in 0..=3 {
                let t = assign_layer(1, l0, d).unwrap();
                assert_eq!(t.ids, (0..t.n_physical()).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn layer_three_even_positions_inherit() {
        let t2 = assign_layer(2, 3, 1).unwrap();
        let t3 = assign_layer(3, 3, 1).unwrap();
        for x in 0..t2.extent {
            assert_eq!(t3.ids[2 * x], t2.ids[x]);
        }
    }

    #[test]
    fn degenerate_radius_and_counts() {
        let t = assign_layer(4, 0, 2).unwrap();
        assert!(t.ids.iter().all(|&i| i == 0));
        assert_eq!(assign_layer(4, 2, 2).unwrap().ids.iter().collect::<BTreeSet<_>>().len(), 25);
        assert_eq!(assign_layer(3, 3, 1).unwrap().ids.iter().collect::<BTreeSet<_>>().len(), 7);
    }

    #[test]
    fn verifiers_catch_a_mutation() {
        let mut t = assign_layer(3, 2, 1).unwrap();
        assert!(verify_shift_invariance(&t) && verify_counting(&t) && verify_collision_theorem(&t));
        t.ids[3] = (t.ids[3] + 1) % 5;
        assert!(!verify_shift_invariance(&t));
        assert!(!verify_collision_theorem(&t));
    }

    #[test]
    fn collision_examples_and_range() {
        let t = assign_layer(2, 3, 1).unwrap();
        assert!(collision_check(&[0], &[7], &t).unwrap());
        assert!(!collision_check(&[0], &[3], &t).unwrap());
        assert!(matches!(
            collision_check(&[14], &[0], &t),
            Err(Error::CoordinateRange { extent: 14, .. })
        ));
        assert!(assign_layer(0, 1, 1).is_err());
        assert!(assign_layer(40, 3, 2).is_err());
    }

    #[test]
    fn windows_of_one_period_are_distinct() {
        for l0 in 1..=3 {
            let t = assign_layer(4, l0, 1).unwrap();
            let m = t.period();
            for start in 0..=t.extent - m {
                let w: BTreeSet<usize> = t.ids[start..start + m].iter().copied().collect();
                assert_eq!(w.len(), m);
            }
        }
    }

    #[test]
    fn schedule_uses_seven_qubits_for_depth_two() {
        let c = DmeraCircuit::random(DmeraSpec::new(3, 2).with_top_width(7), 4).unwrap();
        let s = plan_schedule(&c, &[20, 21], 3).unwrap();
        assert_eq!(s.n_physical, 7);
        assert_eq!(s.used_ids().len(), 7);
        s.to_program().validate().unwrap();
        for r in &s.records {
            let from_resets: BTreeSet<usize> = s
                .instructions
                .iter()
                .filter_map(|i| match i {
                    Instruction::Reset { scale, ids, .. } if *scale == r.scale => Some(ids.clone()),
                    _ => None,
                })
                .flatten()
                .collect();
            assert_eq!(from_resets, r.fresh_ids.iter().copied().collect());
        }
    }

    #[test]
    fn schedule_matches_global_state() {
        let c = DmeraCircuit::random(DmeraSpec::new(2, 1).with_top_width(3), 9).unwrap();
        let ch = Channels::<f64>::from_circuit(&c);
        let noise = NoiseModel::ideal();
        for x in 0..12 {
            for target in [vec![x], vec![x, (x + 1) % 12]] {
                let s = plan_schedule(&c, &target, 1).unwrap();
                let a = run_exact(&s.to_program(), &ch, &noise).unwrap();
                let mut t = target.clone();
                t.sort_unstable();
                let g = run_exact(&Program::global(&c, &t).unwrap(), &ch, &noise).unwrap();
                assert!(trace_distance(&a, &g).unwrap() < 1e-12, "{target:?}");
            }
        }
    }

    #[test]
    fn schedule_preconditions() {
        let c = DmeraCircuit::random(DmeraSpec::new(2, 2).with_top_width(5), 1).unwrap();
        assert!(matches!(
            plan_schedule(&c, &[0], 2),
            Err(Error::AssignmentCollision { ell0: 2, .. })
        ));
        let c = DmeraCircuit::random(DmeraSpec::new(2, 2).with_top_width(7), 1).unwrap();
        assert!(matches!(plan_schedule(&c, &[0, 4], 3), Err(Error::TargetTooLarge(_))));
        assert!(plan_schedule(&c, &[27, 0], 3).is_ok());
        assert!(matches!(plan_schedule(&c, &[1], 4), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn text_roundtrip_and_tamper_detection() {
        let c = DmeraCircuit::random(DmeraSpec::new(2, 2).with_top_width(7), 2).unwrap();
        let s = plan_schedule(&c, &[10, 11], 3).unwrap();
        let text = s.to_text();
        let lines = parse_schedule(&text).unwrap();
        assert_eq!(lines.len(), s.instructions.len());
        verify_schedule_lines(&lines, 7).unwrap();
        if let Instruction::Gate { params, .. } = &s.instructions[1] {
            match &lines[1] {
                ScheduleLine::Gate { params: p, .. } => assert_eq!(p, params),
                _ => panic!("expected a gate"),
            }
        }
        // Point two gates of one layer at the same qubit.
        let mut bad = lines.clone();
        let pos: Vec<usize> = bad
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, ScheduleLine::Gate { scale: 2, layer: 1, .. }))
            .map(|(i, _)| i)
            .collect();
        let first_a = match &bad[pos[0]] {
            ScheduleLine::Gate { a, .. } => *a,
            _ => unreachable!(),
        };
        if let ScheduleLine::Gate { b, .. } = &mut bad[pos[1]] {
            *b = first_a;
        }
        let err = verify_schedule_lines(&bad, 7).unwrap_err();
        assert!(err.contains("distinct-ids"), "{err}");
        assert!(parse_schedule("GATE 1 1 0").is_err());
        assert!(parse_schedule("MEASURE 0").is_err());
    }
}

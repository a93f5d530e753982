//! Ansatz geometry, gate parametrization and causal cones.
//!
//! A circuit with `n_scales` scales acts on `top_width * 2^n_scales` qubits.
//! Scale 0 is the top lattice of `top_width` qubits in `|0>`. Scale `s`
//! doubles the lattice: site `x` of scale `s-1` becomes site `2x`, fresh
//! `|0>` qubits are prepared on the odd sites (layer 0), and then `depth`
//! brick-wall layers of two-qubit gates act with periodic boundaries.
//! Odd layers pair `(2j, 2j+1)`, even layers pair `(2j+1, 2j+2 mod N)`.

mod cone;
mod params;

pub use cone::{cone_width_bound, CausalCone, WidthBound};
pub use params::{gate_unitary, GateParams, N_GENERATORS};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DmeraSpec {
    pub d: usize,
    pub n_scales: usize,
    pub depth: usize,
    pub top_width: usize,
    #[serde(default = "periodic")]
    pub boundary: Boundary,
}

fn periodic() -> Boundary {
    Boundary::Periodic
}

impl DmeraSpec {
    pub fn new(n_scales: usize, depth: usize) -> Self {
        DmeraSpec {
            d: 1,
            n_scales,
            depth,
            top_width: 1,
            boundary: Boundary::Periodic,
        }
    }

    pub fn with_top_width(mut self, top_width: usize) -> Self {
        self.top_width = top_width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d != 1 {
            return Err(Error::InvalidSpec(format!(
                "circuits are one-dimensional, got d={}",
                self.d
            )));
        }
        if self.n_scales == 0 || self.depth == 0 || self.top_width == 0 {
            return Err(Error::InvalidSpec(
                "n_scales, depth and top_width must be positive".into(),
            ));
        }
        if self.n_scales > 40 {
            return Err(Error::InvalidSpec(format!("{} scales overflow", self.n_scales)));
        }
        Ok(())
    }

    /// Number of sites of the lattice at `scale` (0 is the top).
    pub fn width(&self, scale: usize) -> usize {
        self.top_width << scale
    }

    /// Number of sites of the bottom lattice.
    pub fn n_sites(&self) -> usize {
        self.width(self.n_scales)
    }

    pub fn gates_per_layer(&self, scale: usize) -> usize {
        self.width(scale) / 2
    }

    pub fn n_gates(&self) -> usize {
        (1..=self.n_scales)
            .map(|s| self.depth * self.gates_per_layer(s))
            .sum()
    }

    pub fn n_preps(&self) -> usize {
        self.top_width + (1..=self.n_scales).map(|s| self.width(s) / 2).sum::<usize>()
    }

    /// Index of the first gate of `scale` in the global gate order.
    pub fn scale_offset(&self, scale: usize) -> usize {
        (1..scale)
            .map(|s| self.depth * self.gates_per_layer(s))
            .sum()
    }

    /// Pair index within a layer of the gate touching `site`.
    pub fn pair_index(&self, scale: usize, layer: usize, site: usize) -> usize {
        let n = self.width(scale);
        if layer % 2 == 1 {
            site / 2
        } else {
            ((site + n - 1) % n) / 2
        }
    }

    /// Ordered sites of pair `j` in `layer` of `scale`.
    pub fn pair_sites(&self, scale: usize, layer: usize, j: usize) -> (usize, usize) {
        let n = self.width(scale);
        if layer % 2 == 1 {
            (2 * j, 2 * j + 1)
        } else {
            (2 * j + 1, (2 * j + 2) % n)
        }
    }

    /// Global index of the gate touching `site` in `(scale, layer)`.
    pub fn gate_index(&self, scale: usize, layer: usize, site: usize) -> usize {
        self.scale_offset(scale)
            + (layer - 1) * self.gates_per_layer(scale)
            + self.pair_index(scale, layer, site)
    }

    /// Index of a preparation in [`DmeraCircuit::preps`] order.
    pub fn prep_index(&self, scale: usize, site: usize) -> usize {
        if scale == 0 {
            return site;
        }
        self.top_width + (1..scale).map(|s| self.width(s) / 2).sum::<usize>() + site / 2
    }

    /// Number of independent parameter sets.
    pub fn n_param_sets(&self, sharing: bool) -> usize {
        if sharing {
            self.n_scales * self.depth
        } else {
            self.n_gates()
        }
    }
}

/// Location of one circuit element. Layer 0 holds single-site preparations.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateRef {
    pub scale: usize,
    pub layer: usize,
    pub sites: Vec<usize>,
}

/// How gate parameters are initialized.
#[derive(Clone, Debug)]
pub enum Init {
    /// Haar-random SU(4) gates from a seed.
    Haar(u64),
    /// Gaussian generator angles with the given standard deviation.
    Gaussian { seed: u64, sigma: f64 },
    /// Every gate is the identity.
    Identity,
    /// Explicit parameter sets, one per gate or one per layer with sharing.
    Params(Vec<GateParams>),
}

#[derive(Clone, Debug)]
pub struct DmeraCircuit {
    spec: DmeraSpec,
    sharing: bool,
    gates: Vec<GateRef>,
    params: Vec<GateParams>,
    unitaries: Vec<Mat4<f64>>,
}

impl DmeraCircuit {
    pub fn build(spec: DmeraSpec, sharing: bool, init: Init) -> Result<Self> {
        spec.validate()?;
        let n_sets = spec.n_param_sets(sharing);
        let params = match init {
            Init::Haar(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n_sets).map(|_| GateParams::haar(&mut rng)).collect()
            }
            Init::Gaussian { seed, sigma } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n_sets)
                    .map(|_| GateParams::gaussian(&mut rng, sigma))
                    .collect()
            }
            Init::Identity => vec![GateParams::zero(); n_sets],
            Init::Params(p) => {
                if p.len() != n_sets {
                    return Err(Error::ParamCount {
                        expected: n_sets,
                        got: p.len(),
                    });
                }
                p
            }
        };
        let mut gates = Vec::with_capacity(spec.n_gates());
        for s in 1..=spec.n_scales {
            for y in 1..=spec.depth {
                for j in 0..spec.gates_per_layer(s) {
                    let (a, b) = spec.pair_sites(s, y, j);
                    gates.push(GateRef {
                        scale: s,
                        layer: y,
                        sites: vec![a, b],
                    });
                }
            }
        }
        let unitaries = params.iter().map(gate_unitary).collect::<Result<Vec<_>>>()?;
        Ok(DmeraCircuit {
            spec,
            sharing,
            gates,
            params,
            unitaries,
        })
    }

    pub fn random(spec: DmeraSpec, seed: u64) -> Result<Self> {
        Self::build(spec, false, Init::Haar(seed))
    }

    pub fn identity(spec: DmeraSpec) -> Result<Self> {
        Self::build(spec, false, Init::Identity)
    }

    pub fn spec(&self) -> &DmeraSpec {
        &self.spec
    }

    pub fn sharing(&self) -> bool {
        self.sharing
    }

    /// Two-qubit gates in causal order.
    pub fn gates(&self) -> &[GateRef] {
        &self.gates
    }

    /// Preparation (reset) elements of every scale; the top layer is scale 0.
    pub fn preps(&self) -> Vec<GateRef> {
        let mut out: Vec<GateRef> = (0..self.spec.top_width)
            .map(|x| GateRef {
                scale: 0,
                layer: 0,
                sites: vec![x],
            })
            .collect();
        for s in 1..=self.spec.n_scales {
            for x in (1..self.spec.width(s)).step_by(2) {
                out.push(GateRef {
                    scale: s,
                    layer: 0,
                    sites: vec![x],
                });
            }
        }
        out
    }

    pub fn param_sets(&self) -> &[GateParams] {
        &self.params
    }

    /// Parameter-set index used by gate `g`.
    pub fn param_index(&self, g: usize) -> usize {
        if self.sharing {
            let r = &self.gates[g];
            (r.scale - 1) * self.spec.depth + (r.layer - 1)
        } else {
            g
        }
    }

    pub fn gate_params(&self, g: usize) -> &GateParams {
        &self.params[self.param_index(g)]
    }

    pub fn unitary(&self, g: usize) -> &Mat4<f64> {
        &self.unitaries[self.param_index(g)]
    }

    /// Replaces one parameter set, returning a new circuit.
    pub fn with_param_set(&self, set: usize, p: GateParams) -> Result<Self> {
        let mut c = self.clone();
        c.unitaries[set] = gate_unitary(&p)?;
        c.params[set] = p;
        Ok(c)
    }

    /// Replaces one parameter set in place.
    pub fn set_param_set(&mut self, set: usize, p: GateParams) -> Result<()> {
        self.unitaries[set] = gate_unitary(&p)?;
        self.params[set] = p;
        Ok(())
    }

    /// Gate indices belonging to parameter set `set`.
    pub fn gates_of_set(&self, set: usize) -> Vec<usize> {
        if self.sharing {
            (0..self.gates.len())
                .filter(|&g| self.param_index(g) == set)
                .collect()
        } else {
            vec![set]
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn to_document(&self) -> CircuitDocument {
        CircuitDocument {
            spec: self.spec.clone(),
            sharing: self.sharing,
            gates: self
                .gates
                .iter()
                .enumerate()
                .map(|(g, r)| GateRecord {
                    scale: r.scale,
                    layer: r.layer,
                    sites: r.sites.clone(),
                    params: *self.gate_params(g),
                })
                .collect(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: CircuitDocument = serde_json::from_str(s)?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: CircuitDocument) -> Result<Self> {
        doc.spec.validate()?;
        let template = Self::build(doc.spec.clone(), doc.sharing, Init::Identity)?;
        if doc.gates.len() != template.gates.len() {
            return Err(Error::ParamCount {
                expected: template.gates.len(),
                got: doc.gates.len(),
            });
        }
        let mut sets: Vec<Option<GateParams>> = vec![None; template.params.len()];
        for (g, rec) in doc.gates.iter().enumerate() {
            let r = &template.gates[g];
            if rec.scale != r.scale || rec.layer != r.layer || rec.sites != r.sites {
                return Err(Error::InvalidSpec(format!(
                    "gate {g} at ({}, {}, {:?}) does not match the brick-wall layout",
                    rec.scale, rec.layer, rec.sites
                )));
            }
            let k = template.param_index(g);
            match &sets[k] {
                Some(p) if p != &rec.params => {
                    return Err(Error::InvalidSpec(format!(
                        "gate {g} breaks parameter sharing of its layer"
                    )))
                }
                _ => sets[k] = Some(rec.params),
            }
        }
        let params = sets.into_iter().map(|p| p.unwrap_or_default()).collect();
        Self::build(doc.spec, doc.sharing, Init::Params(params))
    }
}

/// Serialized form of a circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitDocument {
    pub spec: DmeraSpec,
    pub sharing: bool,
    pub gates: Vec<GateRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub scale: usize,
    pub layer: usize,
    pub sites: Vec<usize>,
    pub params: GateParams,
}

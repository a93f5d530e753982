use std::collections::BTreeSet;

use serde::Serialize;

use super::DmeraCircuit;
use crate::error::{Error, Result};

/// Past causal cone of a bottom-lattice target region.
#[derive(Clone, Debug, Serialize)]
pub struct CausalCone {
    /// Region sites, ascending.
    pub target: Vec<usize>,
    /// Lattice scale of the region; `n_scales` for bottom-lattice targets.
    pub scale: usize,
    /// Lowest lattice scale reached.
    pub stop: usize,
    /// `windows[s]`: sites of scale `s` that feed the target, after the gates
    /// of scale `s` have acted. `windows[n]` is the target.
    pub windows: Vec<Vec<usize>>,
    /// `entry[s]` for `s >= 1`: sites of scale `s` live before its first
    /// layer (old sites plus freshly prepared ones). `entry[0]` is empty.
    pub entry: Vec<Vec<usize>>,
    /// Global gate indices in causal order.
    pub gates: Vec<usize>,
    /// Preparations `(scale, site)`; scale 0 marks the top-layer qubits.
    pub preps: Vec<(usize, usize)>,
}

impl CausalCone {
    pub fn new(circuit: &DmeraCircuit, target: &[usize]) -> Result<Self> {
        Self::region(circuit, circuit.spec().n_scales, target, 0)
    }

    /// Cone of `sites` at lattice `scale`, followed down to lattice `stop`.
    ///
    /// With `stop > 0` the cone ends at the sites of scale `stop` that feed the
    /// region (`windows[stop]`) and no top-layer preparations are recorded.
    pub fn region(
        circuit: &DmeraCircuit,
        scale: usize,
        sites: &[usize],
        stop: usize,
    ) -> Result<Self> {
        let spec = circuit.spec();
        if sites.is_empty() {
            return Err(Error::EmptyTarget);
        }
        let n = scale;
        let target = sites;
        if scale > spec.n_scales || stop > scale {
            return Err(Error::InvalidSpec(format!(
                "scales {stop}..{scale} outside 0..{}",
                spec.n_scales
            )));
        }
        let size = spec.width(scale);
        if let Some(&site) = target.iter().find(|&&x| x >= size) {
            return Err(Error::SiteOutOfRange { site, size });
        }
        let mut live: BTreeSet<usize> = target.iter().copied().collect();
        let mut windows = vec![Vec::new(); n + 1];
        let mut entry = vec![Vec::new(); n + 1];
        let mut gates = Vec::new();
        let mut preps = Vec::new();
        windows[n] = live.iter().copied().collect();
        for s in (stop + 1..=n).rev() {
            for y in (1..=spec.depth).rev() {
                let touched: BTreeSet<usize> =
                    live.iter().map(|&x| spec.gate_index(s, y, x)).collect();
                for g in touched {
                    for &x in &circuit.gates()[g].sites {
                        live.insert(x);
                    }
                    gates.push(g);
                }
            }
            entry[s] = live.iter().copied().collect();
            let mut below = BTreeSet::new();
            for &x in &live {
                if x % 2 == 1 {
                    preps.push((s, x));
                } else {
                    below.insert(x / 2);
                }
            }
            live = below;
            windows[s - 1] = live.iter().copied().collect();
        }
        if stop == 0 {
            for &x in &live {
                preps.push((0, x));
            }
        }
        gates.sort_unstable();
        preps.sort_unstable();
        Ok(CausalCone {
            target: windows[n].clone(),
            scale,
            stop,
            windows,
            entry,
            gates,
            preps,
        })
    }

    /// Largest number of sites simultaneously in the cone at any scale boundary.
    pub fn max_entry_width(&self) -> usize {
        self.entry.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Gates of one scale, in causal order.
    pub fn gates_of_scale<'a>(
        &'a self,
        circuit: &'a DmeraCircuit,
        scale: usize,
    ) -> impl Iterator<Item = usize> + 'a {
        self.gates
            .iter()
            .copied()
            .filter(move |&g| circuit.gates()[g].scale == scale)
    }
}

/// Window-width bounds at `i` scales above the target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WidthBound {
    /// `s_{k+1} = (s_k + 2D) / 2` iterated `i` times from `s_0 = l`.
    pub recursive: f64,
    /// `l / 2^i + 2D`.
    pub closed: f64,
}

pub fn cone_width_bound(ell: usize, depth: usize, i: usize) -> WidthBound {
    let two_d = 2.0 * depth as f64;
    let mut s = ell as f64;
    for _ in 0..i {
        s = (s + two_d) / 2.0;
    }
    WidthBound {
        recursive: s,
        closed: ell as f64 / 2f64.powi(i as i32) + two_d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::DmeraSpec;

    #[test]
    fn bound_examples() {
        let b = cone_width_bound(2, 2, 1);
        assert_eq!((b.recursive, b.closed), (3.0, 5.0));
        let b = cone_width_bound(4, 3, 2);
        assert_eq!((b.recursive, b.closed), (5.5, 7.0));
        let b = cone_width_bound(4, 3, 60);
        assert!((b.recursive - 6.0).abs() < 1e-9 && (b.closed - 6.0).abs() < 1e-9);
    }

    #[test]
    fn empty_and_out_of_range_targets() {
        let c = DmeraCircuit::identity(DmeraSpec::new(3, 2)).unwrap();
        assert!(matches!(CausalCone::new(&c, &[]), Err(Error::EmptyTarget)));
        assert!(matches!(
            CausalCone::new(&c, &[8]),
            Err(Error::SiteOutOfRange { site: 8, size: 8 })
        ));
    }

    #[test]
    fn table_point_fits_eight_qubits() {
        let c = DmeraCircuit::identity(DmeraSpec::new(9, 2)).unwrap();
        for start in [0usize, 1, 255, 510] {
            let cone = CausalCone::new(&c, &[start, (start + 1) % 512]).unwrap();
            assert!(cone.max_entry_width() <= 8, "start {start}");
            for i in 0..=9 {
                let w = cone.windows[9 - i].len() as f64;
                assert!(w <= cone_width_bound(2, 2, i).closed);
            }
        }
    }

    #[test]
    fn ceil_recursion_bounds_windows() {
        let c = DmeraCircuit::identity(DmeraSpec::new(6, 2)).unwrap();
        let cone = CausalCone::new(&c, &[10, 11]).unwrap();
        let mut s = 2usize;
        for i in 1..=6 {
            s = (s + 4).div_ceil(2);
            assert!(cone.windows[6 - i].len() <= s);
        }
    }

    #[test]
    fn every_cone_gate_touches_live_sites() {
        let c = DmeraCircuit::identity(DmeraSpec::new(4, 3)).unwrap();
        let cone = CausalCone::new(&c, &[5]).unwrap();
        for &g in &cone.gates {
            let r = &c.gates()[g];
            assert!(r.sites.iter().all(|x| cone.entry[r.scale].contains(x)));
        }
    }
}

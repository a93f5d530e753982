//! Transfer superoperators of single scales and the noise bounds built on
//! their spectra.
//!
//! The transfer matrix of scale `s` on an `m`-site window acts on the Pauli
//! basis: `T[k][j] = Tr(P_k Phi(P_j)) / 2^m`, where `Phi` maps operators on
//! the window of scale `s` to operators on a window of scale `s - 1`. The
//! two windows are identified position by position, so powers of `T`
//! compose scales of a translation-invariant circuit.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{CausalCone, DmeraCircuit};
use crate::engine::{
    noisy_zero, pauli_matrix, run_exact, run_heisenberg, trace_distance, Channels,
    DensityMatrix, NoiseModel, Program,
};
use crate::error::{Error, Result};
use crate::linalg::{mul4, Mat4};
use crate::pauli::{two_qubit_matrix, Pauli, PauliString};

/// Largest window of a transfer matrix (operator space `4^7`).
pub const TRANSFER_LIMIT: usize = 7;

#[derive(Clone, Debug)]
pub struct TransferOperator {
    pub scale: usize,
    /// Output window at `scale`, in position order.
    pub window: Vec<usize>,
    /// Input window at `scale - 1`, identified with `window` by position.
    pub input: Vec<usize>,
    /// `4^m x 4^m`, Pauli index `sum_k p_k 4^(m-1-k)`.
    pub matrix: DMatrix<f64>,
}

impl TransferOperator {
    pub fn n_sites(&self) -> usize {
        self.window.len()
    }
}

/// Pauli string of index `j` on `sites` (first site most significant).
pub fn pauli_of_index(j: usize, sites: &[usize]) -> PauliString {
    let m = sites.len();
    let letters = (0..m).map(|k| (sites[k], Pauli::from_index((j >> (2 * (m - 1 - k))) & 3)));
    PauliString::new(1.0, letters).expect("distinct sites")
}

/// Coefficients `Tr(P M) / 2^m` of a row-major `2^m x 2^m` matrix.
pub fn pauli_coefficients(data: &[Complex64], m: usize) -> Vec<Complex64> {
    if m == 0 {
        return vec![data[0]];
    }
    let d = 1usize << m;
    let h = d / 2;
    // Blocks M_ab of the first qubit, each a (2^(m-1))^2 matrix.
    let block = |a: usize, b: usize| -> Vec<Complex64> {
        let mut out = Vec::with_capacity(h * h);
        for r in 0..h {
            for c in 0..h {
                out.push(data[(a * h + r) * d + b * h + c]);
            }
        }
        out
    };
    let sub = [
        pauli_coefficients(&block(0, 0), m - 1),
        pauli_coefficients(&block(0, 1), m - 1),
        pauli_coefficients(&block(1, 0), m - 1),
        pauli_coefficients(&block(1, 1), m - 1),
    ];
    let n = sub[0].len();
    let mut out = vec![Complex64::new(0.0, 0.0); 4 * n];
    let i = Complex64::new(0.0, 1.0);
    for q in 0..n {
        let (m00, m01, m10, m11) = (sub[0][q], sub[1][q], sub[2][q], sub[3][q]);
        // c_{P (x) Q} = (1/2) sum_ab P_ba c_Q(M_ab).
        out[q] = (m00 + m11) * 0.5;
        out[n + q] = (m01 + m10) * 0.5;
        out[2 * n + q] = (m01 - m10) * i * 0.5;
        out[3 * n + q] = (m00 - m11) * 0.5;
    }
    out
}

/// Cyclic window of `m` sites on a ring of `width` containing `sites`,
/// preferring starts with the parity of `parity_of` and then the most
/// centered placement.
fn enclosing_window(sites: &[usize], m: usize, width: usize, parity_of: usize) -> Option<Vec<usize>> {
    if m > width {
        return None;
    }
    let mut best: Option<(usize, usize, usize)> = None;
    for b in 0..width {
        let offs: Vec<usize> = sites.iter().map(|&x| (x + width - b) % width).collect();
        if offs.iter().any(|&o| o >= m) {
            continue;
        }
        let lo = offs.iter().copied().min().unwrap_or(0);
        let hi = offs.iter().copied().max().unwrap_or(0);
        let skew = (lo as isize - (m - 1 - hi) as isize).unsigned_abs();
        let key = (usize::from(b % 2 != parity_of % 2), skew, b);
        if best.is_none_or(|k| key < k) {
            best = Some(key);
        }
    }
    best.map(|(_, _, b)| (0..m).map(|k| (b + k) % width).collect())
}

/// Transfer operator of the ideal circuit at `scale` on `window` (sites of
/// `scale`, in position order).
pub fn build_transfer(circuit: &DmeraCircuit, scale: usize, window: &[usize]) -> Result<TransferOperator> {
    build_transfer_noisy(circuit, scale, window, &NoiseModel::ideal())
}

/// As [`build_transfer`] with gate and preparation noise in the scale.
pub fn build_transfer_noisy(
    circuit: &DmeraCircuit,
    scale: usize,
    window: &[usize],
    noise: &NoiseModel,
) -> Result<TransferOperator> {
    let m = window.len();
    if m > TRANSFER_LIMIT {
        return Err(Error::WindowTooLarge {
            engine: "transfer",
            needed: m,
            limit: TRANSFER_LIMIT,
        });
    }
    let spec = circuit.spec();
    if scale == 0 || scale > spec.n_scales {
        return Err(Error::InvalidSpec(format!("scale {scale} outside 1..={}", spec.n_scales)));
    }
    let noise = NoiseModel {
        p_meas: 0.0,
        ..*noise
    };
    let mut cone = CausalCone::region(circuit, scale, window, scale - 1)?;
    // The map starts from operators on the scale below, never from the top
    // preparations.
    cone.preps.retain(|p| p.0 > 0);
    let program = Program::from_cone(circuit, &cone)?;
    let parity = window.first().copied().unwrap_or(0);
    let in_sites_sorted = &cone.windows[scale - 1];
    let input = enclosing_window(in_sites_sorted, m, spec.width(scale - 1), parity).ok_or_else(|| {
        Error::WindowNotClosed(format!(
            "scale {scale}: inputs {in_sites_sorted:?} do not fit {m} sites of a {}-site lattice",
            spec.width(scale - 1)
        ))
    })?;
    let channels = Channels::<f64>::from_circuit(circuit);
    // Worldline ids of the cone keep their lattice site only at the window
    // ends; map window and input positions to ids.
    let out_ids: Vec<usize> = window
        .iter()
        .map(|x| {
            let k = cone.target.iter().position(|t| t == x).expect("window site");
            program.outputs[k]
        })
        .collect();
    let mut next_id = program.n_ids;
    let in_ids: Vec<usize> = input
        .iter()
        .map(|x| match in_sites_sorted.iter().position(|t| t == x) {
            Some(k) => program.inputs[k],
            None => {
                next_id += 1;
                next_id - 1
            }
        })
        .collect();
    let dim = 1usize << (2 * m);
    let identity = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
    ];
    let mut matrix = DMatrix::<f64>::zeros(dim, dim);
    for j in 0..dim {
        let p = pauli_of_index(j, window);
        let op = DensityMatrix::from_data(out_ids.clone(), pauli_matrix(&p, window)?)?;
        let mut back = run_heisenberg(&program, &channels, &noise, op)?;
        for &q in &in_ids {
            if back.position(q).is_err() {
                back.add_qubit(q, &identity);
            }
        }
        let back = back.reorder(&in_ids)?;
        for (k, c) in pauli_coefficients(back.data(), m).iter().enumerate() {
            matrix[(k, j)] = c.re;
        }
    }
    Ok(TransferOperator {
        scale,
        window: window.to_vec(),
        input,
        matrix,
    })
}

/// `m` consecutive sites of `scale` starting at an even site near the middle.
pub fn default_window(circuit: &DmeraCircuit, scale: usize, m: usize) -> Vec<usize> {
    let w = circuit.spec().width(scale);
    let start = (w / 2) & !1;
    (0..m).map(|k| (start + k) % w).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Largest eigenvalue modulus; 1 for a valid transfer matrix.
    pub leading: f64,
    /// Largest modulus on the traceless block.
    pub lambda: f64,
}

/// Leading and second eigenvalue moduli.
///
/// Unitality makes the identity column the first unit vector, so the
/// spectrum is `{1}` plus that of the traceless block; `lambda` is the
/// spectral radius of the block. A value of 1 flags a non-mixing scale.
pub fn second_eigenvalue(t: &TransferOperator) -> Result<Spectrum> {
    let n = t.matrix.nrows();
    let col0_defect = (0..n)
        .map(|k| (t.matrix[(k, 0)] - if k == 0 { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    if col0_defect > 1e-9 {
        return Err(Error::BrokenTransfer(1.0 + col0_defect));
    }
    let lambda = if n > 1 {
        let block = t.matrix.view((1, 1), (n - 1, n - 1)).into_owned();
        block.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    } else {
        0.0
    };
    let leading = lambda.max(1.0);
    if leading > 1.0 + 1e-6 {
        return Err(Error::BrokenTransfer(leading));
    }
    Ok(Spectrum { leading, lambda })
}

/// Gate locations per scale used when no explicit count is given: `4 D^2`.
pub fn default_locations(depth: usize) -> usize {
    4 * depth * depth
}

/// `eps * L / (1 - lambda)`, the bound for any number of scales.
pub fn noise_error_bound(eps: f64, lambda: f64, locations_per_scale: usize) -> Result<f64> {
    if !(lambda.abs() < 1.0) {
        return Err(Error::Divergent(lambda));
    }
    Ok(eps * locations_per_scale as f64 / (1.0 - lambda.abs()))
}

/// `sum_{k<s} eps * L * lambda^(s-1-k)` in closed form.
pub fn noise_error_bound_scales(eps: f64, lambda: f64, locations_per_scale: usize, s: usize) -> Result<f64> {
    let l = lambda.abs();
    if !(l < 1.0) {
        return Err(Error::Divergent(lambda));
    }
    Ok(eps * locations_per_scale as f64 * (1.0 - l.powi(s as i32)) / (1.0 - l))
}

/// Telescoping bound with per-scale data, bottom scale last:
/// `sum_k eps L_k prod_{j>k} lambda_j`. Scales without a measured
/// contraction should pass `lambda_j = 1`.
pub fn telescoping_bound(eps: f64, locations: &[usize], lambdas: &[f64]) -> Result<f64> {
    if locations.len() != lambdas.len() {
        return Err(Error::DimensionMismatch(locations.len(), lambdas.len()));
    }
    let mut total = 0.0;
    let mut damp = 1.0;
    for k in (0..locations.len()).rev() {
        total += eps * locations[k] as f64 * damp;
        damp *= lambdas[k].abs().min(1.0);
    }
    Ok(total)
}

/// Transfer operator on the smallest closed window containing `sites`.
pub fn transfer_for_region(circuit: &DmeraCircuit, scale: usize, sites: &[usize]) -> Result<TransferOperator> {
    let width = circuit.spec().width(scale);
    let parity = sites.first().copied().unwrap_or(0);
    let mut last = Error::WindowNotClosed(format!("no window of at most {TRANSFER_LIMIT} sites"));
    for m in sites.len().max(1)..=TRANSFER_LIMIT.min(width) {
        let Some(window) = enclosing_window(sites, m, width, parity) else {
            continue;
        };
        match build_transfer(circuit, scale, &window) {
            Ok(t) => return Ok(t),
            Err(e @ Error::WindowNotClosed(_)) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

/// Telescoping bound for one target region with explicit location counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeBound {
    /// Noisy locations per scale; index 0 holds the top preparations.
    pub locations: Vec<usize>,
    /// Per-scale error weight `sum over locations of 2 p`.
    pub scale_errors: Vec<f64>,
    /// Second eigenvalue per scale (index 0 unused, 1 where no closed
    /// window exists).
    pub lambdas: Vec<f64>,
    /// Readout contribution, not damped by any scale.
    pub readout: f64,
    /// Bound on `|<h>_noisy - <h>_ideal|` for `||h|| <= 1` on the target.
    pub bound: f64,
}

/// Bound for `target` under `noise`, each location contributing `2p`
/// (the diamond distance of a depolarizing channel of strength `p` from
/// the identity is at most `2p`) damped by the scales below it.
pub fn cone_noise_bound(circuit: &DmeraCircuit, target: &[usize], noise: &NoiseModel) -> Result<ConeBound> {
    noise.validate()?;
    let n = circuit.spec().n_scales;
    let cone = CausalCone::new(circuit, target)?;
    let mut locations = vec![0usize; n + 1];
    let mut scale_errors = vec![0.0; n + 1];
    for &(s, _) in &cone.preps {
        locations[s] += usize::from(noise.p_prep > 0.0);
        scale_errors[s] += 2.0 * noise.p_prep;
    }
    for s in 1..=n {
        let g = cone.gates_of_scale(circuit, s).count();
        locations[s] += if noise.p_gate > 0.0 { g } else { 0 };
        scale_errors[s] += 2.0 * noise.p_gate * g as f64;
    }
    let mut lambdas = vec![1.0; n + 1];
    for s in 1..=n {
        if let Ok(t) = transfer_for_region(circuit, s, &cone.windows[s]) {
            lambdas[s] = second_eigenvalue(&t)?.lambda.min(1.0);
        }
    }
    let mut bound = 0.0;
    let mut damp = 1.0;
    for s in (0..=n).rev() {
        bound += scale_errors[s] * damp;
        damp *= lambdas[s];
    }
    let readout = 2.0 * noise.p_meas * cone.target.len() as f64;
    Ok(ConeBound {
        locations,
        scale_errors,
        lambdas,
        readout,
        bound: bound + readout,
    })
}

/// Identity terms removed: `h - Tr(h) I / dim`.
pub fn nonunital_part(terms: &[PauliString]) -> Vec<PauliString> {
    terms.iter().filter(|t| !t.is_identity()).cloned().collect()
}

/// Kraus form of `depolarize2(p) . U`.
pub fn noisy_gate_kraus(u: &Mat4<f64>, p: f64) -> Vec<Mat4<f64>> {
    let mut out = Vec::with_capacity(16);
    for k in 0..16 {
        let w = if k == 0 { 1.0 - p } else { p / 15.0 };
        if w == 0.0 {
            continue;
        }
        let pk = two_qubit_matrix::<f64>(k);
        out.push(mul4(&pk, u).map(|z| z * w.sqrt()));
    }
    out
}

/// Channels with gate and preparation noise only on scales in `noisy`.
pub fn channels_with_noisy_scales(
    circuit: &DmeraCircuit,
    noise: &NoiseModel,
    noisy: impl Fn(usize) -> bool,
) -> Channels<f64> {
    let mut ch = Channels::<f64>::from_circuit(circuit);
    for (g, r) in circuit.gates().iter().enumerate() {
        if noisy(r.scale) && noise.p_gate > 0.0 {
            ch.replace_gate(g, &noisy_gate_kraus(circuit.unitary(g), noise.p_gate));
        }
    }
    if noise.p_prep > 0.0 {
        for (i, r) in circuit.preps().iter().enumerate() {
            if noisy(r.scale) {
                ch.replace_prep(i, &noisy_zero(noise.p_prep));
            }
        }
    }
    ch
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationCurve {
    pub s_values: Vec<usize>,
    /// Trace distance between ideal and noisy target states.
    pub delta: Vec<f64>,
    /// `delta[k + 1] - delta[k]`.
    pub differences: Vec<f64>,
}

/// `Delta(s)`: noise acts on the bottom `s` scales of `circuit`, the scales
/// above stay ideal, and the target state is compared with the ideal one.
pub fn scale_saturation_curve(
    circuit: &DmeraCircuit,
    target: &[usize],
    noise: &NoiseModel,
    s_values: &[usize],
) -> Result<SaturationCurve> {
    let n = circuit.spec().n_scales;
    if let Some(&s) = s_values.iter().find(|&&s| s > n) {
        return Err(Error::InvalidSpec(format!("s = {s} exceeds {n} scales")));
    }
    let cone = CausalCone::new(circuit, target)?;
    let program = Program::from_cone(circuit, &cone)?;
    let ideal = run_exact(&program, &Channels::from_circuit(circuit), &NoiseModel::ideal())?;
    let mut delta = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let ch = channels_with_noisy_scales(circuit, noise, |sc| sc + s > n);
        let meas = NoiseModel {
            p_meas: if s > 0 { noise.p_meas } else { 0.0 },
            ..NoiseModel::ideal()
        };
        let rho = run_exact(&program, &ch, &meas)?;
        delta.push(trace_distance(&ideal, &rho)?);
    }
    let differences = delta.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(SaturationCurve {
        s_values: s_values.to_vec(),
        delta,
        differences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{DmeraSpec, GateParams, Init};
    use crate::engine::expectation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense(data: &[Complex64], d: usize) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(d, d, data)
    }

    #[test]
    fn pauli_coefficients_invert_pauli_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = 3;
        let sites = [0, 1, 2];
        let coeffs: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut op = vec![Complex64::new(0.0, 0.0); 64];
        for (j, &c) in coeffs.iter().enumerate() {
            for (o, v) in op.iter_mut().zip(pauli_matrix(&pauli_of_index(j, &sites), &sites).unwrap()) {
                *o += v * c;
            }
        }
        let back = pauli_coefficients(&op, m);
        for j in 0..64 {
            assert!((back[j].re - coeffs[j]).abs() < 1e-13 && back[j].im.abs() < 1e-13);
        }
    }

    #[test]
    fn identity_scale_matches_analytic_map() {
        let c = DmeraCircuit::identity(DmeraSpec::new(3, 2)).unwrap();
        let w = vec![2, 3, 4, 5];
        let t = build_transfer(&c, 3, &w).unwrap();
        // Odd sites are projected on |0>, even site x moves to x/2.
        let zero_exp = |p: usize| if p == 0 || p == 3 { 1.0 } else { 0.0 };
        for j in 0..256 {
            let ps: Vec<usize> = (0..4).map(|k| (j >> (2 * (3 - k))) & 3).collect();
            let weight = zero_exp(ps[1]) * zero_exp(ps[3]);
            // Sites 2 and 4 land on 1 and 2 of scale 2.
            let pos = |x: usize| t.input.iter().position(|&y| y == x).unwrap();
            let mut img = vec![0usize; 4];
            img[pos(1)] = ps[0];
            img[pos(2)] = ps[2];
            let k = img.iter().fold(0, |acc, &p| 4 * acc + p);
            for r in 0..256 {
                let want = if r == k { weight } else { 0.0 };
                assert!((t.matrix[(r, j)] - want).abs() < 1e-12, "{j} {r}");
            }
        }
        let c1 = DmeraCircuit::identity(DmeraSpec::new(3, 1)).unwrap();
        let single = build_transfer(&c1, 3, &[5]).unwrap();
        assert!(second_eigenvalue(&single).unwrap().lambda.abs() < 1e-12);
    }

    #[test]
    fn swap_lines_do_not_mix() {
        let mut th = [0.0; 15];
        for k in [4, 9, 14] {
            th[k] = std::f64::consts::FRAC_PI_4;
        }
        let swap = GateParams(th);
        let c = DmeraCircuit::build(DmeraSpec::new(3, 2), true, Init::Params(vec![swap; 6])).unwrap();
        let t = build_transfer(&c, 3, &default_window(&c, 3, 4)).unwrap();
        let sp = second_eigenvalue(&t).unwrap();
        assert!((sp.lambda - 1.0).abs() < 1e-9);
        assert!(matches!(noise_error_bound(1e-3, sp.lambda, 16), Err(Error::Divergent(_))));
    }

    #[test]
    fn unital_and_matches_heisenberg_runs() {
        for seed in 0..50 {
            let c = DmeraCircuit::random(DmeraSpec::new(3, 1), seed).unwrap();
            let t = build_transfer(&c, 3, &[2, 3]).unwrap();
            for k in 0..16 {
                let want = if k == 0 { 1.0 } else { 0.0 };
                assert!((t.matrix[(k, 0)] - want).abs() < 1e-10);
            }
        }
        // Tr(rho Phi(O)) equals <O> after one coarse-graining.
        let c = DmeraCircuit::random(DmeraSpec::new(3, 2), 3).unwrap();
        let w = default_window(&c, 3, 4);
        let t = build_transfer(&c, 3, &w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let o: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
        let full = CausalCone::region(&c, 2, &t.input, 0).unwrap();
        let mut sorted = t.input.clone();
        sorted.sort_unstable();
        let upper = run_exact::<f64>(
            &Program::from_cone(&c, &full).unwrap(),
            &Channels::from_circuit(&c),
            &NoiseModel::ideal(),
        )
        .unwrap();
        let phi_o = &t.matrix * nalgebra::DVector::from_vec(o.clone());
        let lhs: f64 = (0..256)
            .map(|k| {
                let p = pauli_of_index(k, &t.input);
                phi_o[k] * expectation(&upper, &sorted, &[p]).unwrap()
            })
            .sum();
        let rho = crate::engine::contract_exact::<f64>(&c, &{
            let mut v = w.clone();
            v.sort_unstable();
            v
        }, &NoiseModel::ideal())
        .unwrap();
        let mut ws = w.clone();
        ws.sort_unstable();
        let rhs: f64 = (0..256).map(|k| o[k] * expectation(&rho, &ws, &[pauli_of_index(k, &w)]).unwrap()).sum();
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} {rhs}");
    }

    #[test]
    fn random_depth_two_scales_mix() {
        for seed in 0..20 {
            let c = DmeraCircuit::random(DmeraSpec::new(3, 2), seed).unwrap();
            let t = build_transfer(&c, 3, &default_window(&c, 3, 4)).unwrap();
            let sp = second_eigenvalue(&t).unwrap();
            assert!(sp.lambda < 1.0 - 1e-6 && (sp.leading - 1.0).abs() < 1e-12, "{sp:?}");
        }
    }

    #[test]
    fn operator_norm_does_not_grow() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = DmeraCircuit::random(DmeraSpec::new(3, 1), 11).unwrap();
        let t = build_transfer(&c, 3, &[2, 3]).unwrap();
        let sites = [0, 1];
        let opnorm = |v: &[f64]| {
            let mut m = vec![Complex64::new(0.0, 0.0); 16];
            for (j, &c) in v.iter().enumerate() {
                for (o, x) in m.iter_mut().zip(pauli_matrix(&pauli_of_index(j, &sites), &sites).unwrap()) {
                    *o += x * c;
                }
            }
            dense(&m, 4).symmetric_eigenvalues().iter().map(|x| x.abs()).fold(0.0, f64::max)
        };
        for _ in 0..100 {
            let v: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w = &t.matrix * nalgebra::DVector::from_vec(v.clone());
            assert!(opnorm(w.as_slice()) <= opnorm(&v) + 1e-9);
        }
    }

    #[test]
    fn traceless_part_contracts_with_lambda() {
        let c = DmeraCircuit::build(DmeraSpec::new(4, 1), true, Init::Haar(5)).unwrap();
        let t = build_transfer(&c, 4, &[2, 3]).unwrap();
        let lam = second_eigenvalue(&t).unwrap().lambda;
        let block = t.matrix.view((1, 1), (15, 15)).into_owned();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v0 = nalgebra::DVector::from_fn(15, |_, _| rng.random_range(-1.0..1.0));
        let mut v = v0.clone();
        let mut c_fit: f64 = 1.0;
        for k in 1..=8 {
            v = &block * v;
            c_fit = c_fit.max(v.norm() / (lam.powi(k) * v0.norm()));
        }
        assert!(c_fit <= 16.0, "{c_fit}");
    }

    #[test]
    fn bound_arithmetic() {
        assert!((noise_error_bound(1e-3, 0.5, 16).unwrap() - 3.2e-2).abs() < 1e-15);
        assert!((noise_error_bound(1e-3, 0.0, 16).unwrap() - 1.6e-2).abs() < 1e-15);
        assert!((noise_error_bound_scales(1e-3, 0.5, 16, 1).unwrap() - 1.6e-2).abs() < 1e-15);
        let b = noise_error_bound_scales(1e-3, 0.5, 16, 60).unwrap();
        assert!((b - 3.2e-2).abs() < 1e-12);
        let tb = telescoping_bound(1e-3, &[16, 16, 16], &[0.5, 0.5, 0.5]).unwrap();
        assert!((tb - noise_error_bound_scales(1e-3, 0.5, 16, 3).unwrap()).abs() < 1e-15);
        assert!(noise_error_bound(1e-3, 1.0, 16).is_err());
        assert_eq!(default_locations(2), 16);
    }

    #[test]
    fn nonunital_examples() {
        assert!(nonunital_part(&[PauliString::identity(1.0)]).is_empty());
        let z = PauliString::single(1.0, 0, Pauli::Z);
        assert_eq!(nonunital_part(&[z.clone(), PauliString::identity(3.0)]), vec![z]);
    }

    #[test]
    fn saturation_of_noiseless_and_noisy_runs() {
        let c = DmeraCircuit::random(DmeraSpec::new(5, 2), 1).unwrap();
        let zero = scale_saturation_curve(&c, &[16, 17], &NoiseModel::ideal(), &[1, 3, 5]).unwrap();
        assert!(zero.delta.iter().all(|&d| d < 1e-12));
        let noisy = scale_saturation_curve(&c, &[16, 17], &NoiseModel::depolarizing(1e-2), &[0, 5]).unwrap();
        assert!(noisy.delta[0] < 1e-12);
        let full = crate::engine::contract_exact::<f64>(&c, &[16, 17], &NoiseModel::depolarizing(1e-2)).unwrap();
        let ideal = crate::engine::contract_exact::<f64>(&c, &[16, 17], &NoiseModel::ideal()).unwrap();
        assert!((noisy.delta[1] - trace_distance(&ideal, &full).unwrap()).abs() < 1e-12);
        assert_eq!(noisy.differences.len(), 1);
    }

    #[test]
    fn first_scale_maps_onto_the_top_lattice() {
        let c = DmeraCircuit::identity(DmeraSpec::new(3, 1).with_top_width(2)).unwrap();
        let t = transfer_for_region(&c, 1, &[1]).unwrap();
        assert!(second_eigenvalue(&t).unwrap().lambda.abs() < 1e-12);
        let c = DmeraCircuit::random(DmeraSpec::new(3, 2).with_top_width(4), 2).unwrap();
        let t = transfer_for_region(&c, 1, &[0, 1]).unwrap();
        let sp = second_eigenvalue(&t).unwrap();
        assert!(sp.lambda > 0.0 && sp.lambda < 1.0);
    }

    #[test]
    fn guard_on_window_size() {
        let c = DmeraCircuit::random(DmeraSpec::new(5, 1), 1).unwrap();
        let w: Vec<usize> = (0..8).collect();
        assert!(matches!(
            build_transfer(&c, 5, &w),
            Err(Error::WindowTooLarge { limit: 7, .. })
        ));
        assert!(matches!(build_transfer(&c, 1, &[0, 1]), Err(Error::WindowNotClosed(_))));
    }

    #[test]
    fn cone_bound_holds_on_random_circuits() {
        use crate::pauli::two_qubit_pauli;
        let noise = NoiseModel::depolarizing(1e-3).with_prep(1e-3);
        for seed in 0..5 {
            let c = DmeraCircuit::random(DmeraSpec::new(4, 2), seed).unwrap();
            let b = cone_noise_bound(&c, &[8, 9], &noise).unwrap();
            assert_eq!(b.locations.len(), 5);
            assert!(b.lambdas[3] < 1.0 && b.lambdas[4] < 1.0, "{:?}", b.lambdas);
            let ideal = crate::engine::contract_exact::<f64>(&c, &[8, 9], &NoiseModel::ideal()).unwrap();
            let noisy = crate::engine::contract_exact::<f64>(&c, &[8, 9], &noise).unwrap();
            // Every two-qubit Pauli has unit norm.
            for k in 1..16 {
                let (a, bb) = two_qubit_pauli(k);
                let t = [PauliString::new(1.0, [(8, a), (9, bb)]).unwrap()];
                let dev = (expectation(&ideal, &[8, 9], &t).unwrap() - expectation(&noisy, &[8, 9], &t).unwrap()).abs();
                assert!(dev <= b.bound, "{dev} > {}", b.bound);
            }
        }
    }
}

//! `spectral`: per-scale transfer spectra, noise bounds and the scale
//! saturation curve of one circuit.
//!
//! Config keys (all optional):
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `n_scales` | 6 | scales of the circuit |
//! | `depth` | 2 | circuit depth |
//! | `top_width` | 1 | top sites |
//! | `init` | `"haar"` | `haar`, `gaussian` or `identity` |
//! | `sigma` | 0.1 | angle spread for `gaussian` |
//! | `target` | two sites left of the centre | bottom sites |
//! | `window` | causal cone | fixed sites used at every scale for the spectra |
//! | `s_values` | `1..=n_scales` | noisy bottom scales of the saturation curve |
//! | `[noise]` | `p_gate = 1e-3` | `p_gate`, `p_prep`, `p_meas` |
//!
//! Sub-stream: `spectral/circuit` seeds the gates.

use dmera::circuit::{CausalCone, DmeraCircuit, DmeraSpec};
use dmera::spectral::{
    cone_noise_bound, default_locations, noise_error_bound, scale_saturation_curve, second_eigenvalue,
    transfer_for_region,
};
use serde::{Deserialize, Serialize};

use crate::config::{load, substream, CliError, InitKind, NoiseSection};
use crate::output::{meta, num, opt, Csv, OutDir};
use crate::Common;

/// Spectral radius treated as non-mixing.
const DIVERGENCE: f64 = 1.0 - 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    pub n_scales: usize,
    pub depth: usize,
    pub top_width: usize,
    pub init: InitKind,
    pub sigma: f64,
    pub target: Option<Vec<usize>>,
    pub window: Option<Vec<usize>>,
    pub s_values: Option<Vec<usize>>,
    pub noise: NoiseSection,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            n_scales: 6,
            depth: 2,
            top_width: 1,
            init: InitKind::Haar,
            sigma: 0.1,
            target: None,
            window: None,
            s_values: None,
            noise: NoiseSection::default(),
        }
    }
}

#[derive(Serialize)]
struct ScaleEntry {
    scale: usize,
    window: Vec<usize>,
    /// Second eigenvalue modulus; absent when no closed window fits.
    lambda: Option<f64>,
    note: Option<String>,
    locations: usize,
    scale_error: f64,
}

#[derive(Serialize)]
struct SaturationRow {
    s: usize,
    delta: f64,
    difference: Option<f64>,
    /// Telescoping bound for noise on the bottom `s` scales.
    bound: f64,
}

#[derive(Serialize)]
struct Report<M: Serialize> {
    meta: M,
    target: Vec<usize>,
    scales: Vec<ScaleEntry>,
    lambda_max: Option<f64>,
    /// `eps L / (1 - lambda_max)` with `eps = 2 p_gate` and `L = 4 D^2`;
    /// omitted when the spectra do not mix.
    asymptotic_bound: Option<f64>,
    cone_bound: f64,
    saturation: Vec<SaturationRow>,
    /// `Delta(s_max) - Delta(s_max - 2) <= 0.2 Delta(s_max - 2)`.
    saturated: Option<bool>,
    warnings: Vec<String>,
}

pub fn run(common: &Common) -> Result<(), CliError> {
    let exp = load::<SpectralConfig>("spectral", common)?;
    let cfg = &exp.config;
    let noise = cfg.noise.model()?;
    let spec = DmeraSpec::new(cfg.n_scales, cfg.depth).with_top_width(cfg.top_width);
    spec.validate()?;
    let n = cfg.n_scales;
    let w = spec.n_sites();
    let target = match &cfg.target {
        Some(t) => t.clone(),
        None if w >= 4 => vec![w / 2 - 2, w / 2 - 1],
        None => vec![0],
    };
    let s_values = cfg.s_values.clone().unwrap_or_else(|| (1..=n).collect());
    if let Some(&s) = s_values.iter().find(|&&s| s > n) {
        return Err(CliError::config(format!("s = {s} exceeds the {n} scales")));
    }
    let circuit = DmeraCircuit::build(spec.clone(), false, cfg.init.init(substream(exp.seed, "spectral/circuit", &[]), cfg.sigma))?;
    let cone = CausalCone::new(&circuit, &target)?;
    let bound = cone_noise_bound(&circuit, &target, &noise)?;
    let out = OutDir::create(&common.out_dir)?;
    let meta = meta(&out, &exp, common.workers)?;
    let mut warnings = Vec::new();

    let mut scales = Vec::with_capacity(n);
    for s in 1..=n {
        let window = match &cfg.window {
            Some(win) => win.clone(),
            None => cone.windows[s].clone(),
        };
        let (lambda, note) = if window.iter().any(|&x| x >= spec.width(s)) {
            (None, Some(format!("window exceeds the {} sites of scale {s}", spec.width(s))))
        } else {
            match transfer_for_region(&circuit, s, &window) {
                Ok(t) => (Some(second_eigenvalue(&t)?.lambda), None),
                Err(e @ (dmera::Error::WindowNotClosed(_) | dmera::Error::WindowTooLarge { .. })) => {
                    (None, Some(e.to_string()))
                }
                Err(e) => return Err(e.into()),
            }
        };
        scales.push(ScaleEntry {
            scale: s,
            window,
            lambda,
            note,
            locations: bound.locations[s],
            scale_error: bound.scale_errors[s],
        });
    }
    let lambda_max = scales.iter().filter_map(|e| e.lambda).reduce(f64::max);
    let asymptotic_bound = match lambda_max {
        Some(l) if l < DIVERGENCE => Some(noise_error_bound(2.0 * noise.p_gate, l, default_locations(cfg.depth))?),
        Some(l) => {
            warnings.push(format!("lambda = {l} is not below 1: the bound over all scales diverges and is omitted"));
            None
        }
        None => {
            warnings.push("no scale admits a closed transfer window; the asymptotic bound is omitted".into());
            None
        }
    };
    for wmsg in &warnings {
        eprintln!("warning: {wmsg}");
    }

    let curve = scale_saturation_curve(&circuit, &target, &noise, &s_values)?;
    let mut saturation = Vec::with_capacity(s_values.len());
    let mut csv = Csv::new(&["s", "delta", "difference", "bound"]);
    for (k, &s) in s_values.iter().enumerate() {
        let row = SaturationRow {
            s,
            delta: curve.delta[k],
            difference: k.checked_sub(1).map(|j| curve.differences[j]),
            bound: partial_bound(&bound, n, s),
        };
        csv.row(&[s.to_string(), num(row.delta), opt(row.difference), num(row.bound)]);
        saturation.push(row);
    }
    let saturated = (s_values.len() >= 3).then(|| {
        let k = s_values.len() - 1;
        curve.delta[k] - curve.delta[k - 2] <= 0.2 * curve.delta[k - 2]
    });
    out.write("saturation.csv", &csv.finish())?;
    for e in &scales {
        println!("scale {}: lambda {}", e.scale, e.lambda.map_or("n/a".to_string(), |l| format!("{l:.6}")));
    }
    println!(
        "cone bound {:.4e}; saturated {}",
        bound.bound,
        saturated.map_or("n/a", |b| if b { "yes" } else { "no" })
    );
    out.write_json(
        "spectral.json",
        &Report {
            meta,
            target,
            scales,
            lambda_max,
            asymptotic_bound,
            cone_bound: bound.bound,
            saturation,
            saturated,
            warnings,
        },
    )?;
    Ok(())
}

/// Cone bound restricted to noise on the bottom `s` scales.
fn partial_bound(b: &dmera::spectral::ConeBound, n: usize, s: usize) -> f64 {
    let mut total = if s > 0 { b.readout } else { 0.0 };
    let mut damp = 1.0;
    for sc in (0..=n).rev() {
        if sc + s > n {
            total += b.scale_errors[sc] * damp;
        }
        damp *= b.lambdas[sc];
    }
    total
}

//! Paired two-node synthetic data with shared latent structure.
//!
//! Every die carries a global latent `z ~ N(0, I_p)`. Process-monitor
//! features are noisy node-specific linear views of `z`; each feature group
//! loads mainly on its own pair of latent axes, so a two-wide fusion per group
//! can recover the latent. Target-node dies additionally carry one local
//! latent per odometer site, observed through that site's frequency.
//!
//! V_min of pattern `r` is
//!
//! ```text
//! offset + s_r·T_r + κ·(l_r·z + γ·a_r·tanh(W z + b)) + u·max_j zl_j + σ_y·ε
//! ```
//!
//! where `W, b` are shared between the nodes up to the mixing coefficient
//! `ρ` and the readouts `l_r, a_r` are drawn per pattern from a few shared
//! prototypes. Every `l_r` also loads on the odometer speed direction `v`,
//! since slow silicon raises V_min across all patterns.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    write_dataset, Dataset, FeatureGroup, FeatureMatrix, GroupKind, GroupSpec, NodeLabel, TargetMatrix,
};
use crate::nn::Matrix;
use crate::rng::{derive_seed, stream_rng, tags};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub n_dies: usize,
    pub group_sizes: Vec<usize>,
    #[serde(default)]
    pub n_odometers: usize,
    pub n_patterns: usize,
    pub temperatures: Vec<i32>,
    /// Mean V_min level of the node in mV.
    pub offset_mv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub base: NodeSpec,
    pub target: NodeSpec,
    /// Global latent dimension `p`.
    pub latent_dim: usize,
    /// Local latent dimension `q` per odometer site.
    pub local_dim: usize,
    pub local_sigma: f64,
    /// Share of each local latent's variance that is common to all sites of
    /// a die; the marginal stays `N(0, local_sigma²)`.
    pub local_shared: f64,
    /// Feature noise, relative to the unit-variance latent signal.
    pub feature_noise: f64,
    /// V_min measurement noise in mV.
    pub target_noise_mv: f64,
    /// Overall latent-driven V_min scale `κ` in mV.
    pub amplitude_mv: f64,
    /// Weight `γ` of the nonlinear part.
    pub nonlinearity: f64,
    /// Width of the hidden tanh layer of the shared map.
    pub nonlinear_units: usize,
    /// Pre-activation scale of the shared map.
    pub sharpness: f64,
    /// Number of readout prototypes the patterns are mixed from.
    pub prototypes: usize,
    /// Cross-node share `ρ` of the nonlinear map and readout prototypes.
    pub rho: f64,
    /// Loading of every pattern on the odometer speed direction `v·z`.
    pub speed_loading: f64,
    /// Odometer coupling `u` of the worst local corner into V_min, in mV.
    pub odometer_coupling_mv: f64,
    /// Log-frequency sensitivity to the global latent.
    pub odometer_global: f64,
    /// Log-frequency sensitivity to the site's local latent.
    pub odometer_local: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            base: NodeSpec {
                n_dies: 5239,
                group_sizes: vec![5, 19, 21],
                n_odometers: 0,
                n_patterns: 63,
                temperatures: vec![-40, 25, 125],
                offset_mv: 705.0,
            },
            target: NodeSpec {
                n_dies: 415,
                group_sizes: vec![12, 7, 18],
                n_odometers: 124,
                n_patterns: 27,
                temperatures: vec![-45, 25, 80, 125],
                offset_mv: 690.0,
            },
            latent_dim: 6,
            local_dim: 1,
            local_sigma: 1.0,
            local_shared: 0.7,
            feature_noise: 0.1,
            target_noise_mv: 10.0,
            amplitude_mv: 20.0,
            nonlinearity: 1.0,
            nonlinear_units: 12,
            sharpness: 1.5,
            prototypes: 3,
            rho: 0.9,
            speed_loading: 1.5,
            odometer_coupling_mv: 10.0,
            odometer_global: 0.05,
            odometer_local: 0.03,
            seed: 7,
        }
    }
}

impl NodeSpec {
    fn validate(&self, label: &str) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("{label} node: {m}")));
        if self.n_dies == 0 || self.n_patterns == 0 {
            return bad("dies and patterns must be >= 1".into());
        }
        if self.group_sizes.is_empty() || self.group_sizes.contains(&0) {
            return bad(format!("group sizes must be non-empty and >= 1, got {:?}", self.group_sizes));
        }
        if self.temperatures.is_empty() {
            return bad("temperature list is empty".into());
        }
        if !self.offset_mv.is_finite() {
            return bad("offset must be finite".into());
        }
        Ok(())
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate("base")?;
        self.target.validate("target")?;
        if self.target.n_odometers == 0 {
            return Err(Error::Config("target node needs at least one odometer".into()));
        }
        if self.latent_dim == 0 || self.local_dim == 0 || self.nonlinear_units == 0 || self.prototypes == 0 {
            return Err(Error::Config("latent dims, tanh units and prototypes must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.local_shared) {
            return Err(Error::Config(format!("local_shared must lie in [0, 1], got {}", self.local_shared)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        let scales = [
            ("local_sigma", self.local_sigma),
            ("feature_noise", self.feature_noise),
            ("target_noise_mv", self.target_noise_mv),
            ("amplitude_mv", self.amplitude_mv),
            ("nonlinearity", self.nonlinearity),
            ("sharpness", self.sharpness),
            ("speed_loading", self.speed_loading),
            ("odometer_coupling_mv", self.odometer_coupling_mv),
            ("odometer_global", self.odometer_global),
            ("odometer_local", self.odometer_local),
        ];
        for (name, v) in scales {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn node(&self, node: NodeLabel) -> &NodeSpec {
        match node {
            NodeLabel::Base => &self.base,
            NodeLabel::Target => &self.target,
        }
    }
}

/// Coefficients of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeModel {
    /// Latent loadings of every process-monitor feature (`p` each).
    pub loadings: Vec<Vec<f64>>,
    pub feature_scale: Vec<f64>,
    pub feature_offset: Vec<f64>,
    /// Time-zero frequency of each odometer site.
    pub odometer_f0: Vec<f64>,
    /// Unit latent direction that speeds up every odometer.
    pub odometer_direction: Vec<f64>,
    /// Hidden map `W` (`H × p`) and bias `b`.
    pub nl_weight: Vec<Vec<f64>>,
    pub nl_bias: Vec<f64>,
    /// Per-pattern linear readout `l_r` (`p`) and nonlinear readout `a_r` (`H`).
    pub linear_readout: Vec<Vec<f64>>,
    pub nonlinear_readout: Vec<Vec<f64>>,
    pub temperature_slope: Vec<f64>,
    pub pattern_temperature: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentModel {
    pub spec: SyntheticSpec,
    pub base: NodeModel,
    pub target: NodeModel,
}

/// Latents of one die.
#[derive(Debug, Clone, PartialEq)]
pub struct DieLatents {
    pub global: Vec<f64>,
    /// `q` values per odometer site.
    pub local: Vec<Vec<f64>>,
}

/// One generated die: raw feature row (process monitors then odometers) and
/// V_min per pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct DieRow {
    pub latents: DieLatents,
    pub features: Vec<f64>,
    pub vmin: Vec<f64>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn normals(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * normal(rng)).collect()
}

fn node_index(node: NodeLabel) -> u64 {
    match node {
        NodeLabel::Base => 0,
        NodeLabel::Target => 1,
    }
}

fn mix(rho: f64, shared: &[f64], own: &[f64]) -> Vec<f64> {
    let c = (1.0 - rho * rho).max(0.0).sqrt();
    shared.iter().zip(own).map(|(s, o)| rho * s + c * o).collect()
}

impl LatentModel {
    pub fn build(spec: &SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        let p = spec.latent_dim;
        let h = spec.nonlinear_units;
        let k = spec.prototypes;

        // Shared pieces: the base node uses them as-is, the target mixes them
        // with independent draws according to rho.
        let mut shared_rng = stream_rng(spec.seed, &[tags::SYNTH_MODEL, 0]);
        let w_shared: Vec<Vec<f64>> = (0..h)
            .map(|_| normals(&mut shared_rng, p, spec.sharpness / (p as f64).sqrt()))
            .collect();
        let b_shared = normals(&mut shared_rng, h, 0.5);
        let lin_proto: Vec<Vec<f64>> = (0..k).map(|_| normals(&mut shared_rng, p, 1.0 / (p as f64).sqrt())).collect();
        let nl_proto: Vec<Vec<f64>> = (0..k).map(|_| normals(&mut shared_rng, h, 1.0 / (h as f64).sqrt())).collect();
        let speed_shared = normals(&mut shared_rng, p, 1.0);

        let node_model = |node: NodeLabel| -> NodeModel {
            let ns = spec.node(node);
            let mut rng = stream_rng(spec.seed, &[tags::SYNTH_MODEL, 1 + node_index(node)]);
            let rho = if node == NodeLabel::Base { 1.0 } else { spec.rho };

            let mut loadings = Vec::new();
            for (g, &size) in ns.group_sizes.iter().enumerate() {
                let axes = [(2 * g) % p, (2 * g + 1) % p];
                for _ in 0..size {
                    let mut row = normals(&mut rng, p, 0.1);
                    for &a in &axes {
                        row[a] += normal(&mut rng);
                    }
                    loadings.push(row);
                }
            }
            let n_post = loadings.len();
            let feature_scale = (0..n_post).map(|_| 10f64.powf(rng.gen_range(-2.0..2.0))).collect();
            let feature_offset = (0..n_post).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let odometer_f0 = (0..ns.n_odometers).map(|_| rng.gen_range(800.0..1200.0)).collect();
            let dir = mix(rho, &speed_shared, &normals(&mut rng, p, 1.0));
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let odometer_direction: Vec<f64> = dir.iter().map(|v| v / norm).collect();

            let nl_weight = w_shared
                .iter()
                .map(|row| mix(rho, row, &normals(&mut rng, p, spec.sharpness / (p as f64).sqrt())))
                .collect();
            let nl_bias = mix(rho, &b_shared, &normals(&mut rng, h, 0.5));
            let lin_own: Vec<Vec<f64>> = (0..k).map(|_| normals(&mut rng, p, 1.0 / (p as f64).sqrt())).collect();
            let nl_own: Vec<Vec<f64>> = (0..k).map(|_| normals(&mut rng, h, 1.0 / (h as f64).sqrt())).collect();
            let lin_p: Vec<Vec<f64>> = lin_proto.iter().zip(&lin_own).map(|(s, o)| mix(rho, s, o)).collect();
            let nl_p: Vec<Vec<f64>> = nl_proto.iter().zip(&nl_own).map(|(s, o)| mix(rho, s, o)).collect();

            let mut linear_readout = Vec::new();
            let mut nonlinear_readout = Vec::new();
            for _ in 0..ns.n_patterns {
                let c = normals(&mut rng, k, 1.0 / (k as f64).sqrt());
                let combine = |protos: &[Vec<f64>], dim: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
                    let jitter = normals(rng, dim, 0.1 / (dim as f64).sqrt());
                    (0..dim)
                        .map(|i| jitter[i] + protos.iter().zip(&c).map(|(pr, w)| w * pr[i]).sum::<f64>())
                        .collect()
                };
                let mut lin = combine(&lin_p, p, &mut rng);
                for (l, v) in lin.iter_mut().zip(&odometer_direction) {
                    *l += spec.speed_loading * v;
                }
                linear_readout.push(lin);
                nonlinear_readout.push(combine(&nl_p, h, &mut rng));
            }
            let temperature_slope = (0..ns.n_patterns).map(|_| -rng.gen_range(0.05..0.3)).collect();
            let pattern_temperature = (0..ns.n_patterns)
                .map(|r| ns.temperatures[r % ns.temperatures.len()])
                .collect();
            NodeModel {
                loadings,
                feature_scale,
                feature_offset,
                odometer_f0,
                odometer_direction,
                nl_weight,
                nl_bias,
                linear_readout,
                nonlinear_readout,
                temperature_slope,
                pattern_temperature,
            }
        };
        let base = node_model(NodeLabel::Base);
        let target = node_model(NodeLabel::Target);
        Ok(Self {
            spec: spec.clone(),
            base,
            target,
        })
    }

    pub fn node(&self, node: NodeLabel) -> &NodeModel {
        match node {
            NodeLabel::Base => &self.base,
            NodeLabel::Target => &self.target,
        }
    }

    fn die_rng(&self, node: NodeLabel, die: usize) -> ChaCha8Rng {
        rand::SeedableRng::seed_from_u64(derive_seed(
            self.spec.seed,
            &[tags::SYNTH_DIE, node_index(node), die as u64],
        ))
    }

    /// Noise-free V_min of every pattern given the die latents.
    pub fn vmin_clean(&self, node: NodeLabel, latents: &DieLatents) -> Vec<f64> {
        let s = &self.spec;
        let m = self.node(node);
        let z = &latents.global;
        let hidden: Vec<f64> = m
            .nl_weight
            .iter()
            .zip(&m.nl_bias)
            .map(|(w, b)| (dot(w, z) + b).tanh())
            .collect();
        let local = worst_local(&latents.local);
        (0..m.linear_readout.len())
            .map(|r| {
                s.node(node).offset_mv
                    + m.temperature_slope[r] * f64::from(m.pattern_temperature[r])
                    + s.amplitude_mv
                        * (dot(&m.linear_readout[r], z) + s.nonlinearity * dot(&m.nonlinear_readout[r], &hidden))
                    + s.odometer_coupling_mv * local
            })
            .collect()
    }

    /// Regenerates one die from its own seed.
    pub fn generate_die(&self, node: NodeLabel, die: usize) -> DieRow {
        let s = &self.spec;
        let m = self.node(node);
        let mut rng = self.die_rng(node, die);
        let global = normals(&mut rng, s.latent_dim, 1.0);
        let common = normals(&mut rng, s.local_dim, s.local_sigma * s.local_shared.sqrt());
        let site_sigma = s.local_sigma * (1.0 - s.local_shared).sqrt();
        let local: Vec<Vec<f64>> = (0..m.odometer_f0.len())
            .map(|_| {
                let own = normals(&mut rng, s.local_dim, site_sigma);
                common.iter().zip(own).map(|(c, o)| c + o).collect()
            })
            .collect();
        let latents = DieLatents { global, local };

        let mut features = Vec::with_capacity(m.loadings.len() + m.odometer_f0.len());
        for ((load, scale), offset) in m.loadings.iter().zip(&m.feature_scale).zip(&m.feature_offset) {
            let signal = dot(load, &latents.global) + s.feature_noise * normal(&mut rng);
            features.push(offset + scale * signal);
        }
        let speed = dot(&m.odometer_direction, &latents.global);
        for (f0, zl) in m.odometer_f0.iter().zip(&latents.local) {
            let expo = s.odometer_global * speed + s.odometer_local * mean(zl);
            features.push(f0 * (expo.exp() + s.feature_noise * s.odometer_global * normal(&mut rng)));
        }
        let vmin = self
            .vmin_clean(node, &latents)
            .into_iter()
            .map(|v| v + s.target_noise_mv * normal(&mut rng))
            .collect();
        DieRow {
            latents,
            features,
            vmin,
        }
    }

    pub fn group_spec(&self, node: NodeLabel) -> GroupSpec {
        let ns = self.spec.node(node);
        let mut groups: Vec<FeatureGroup> = ns
            .group_sizes
            .iter()
            .enumerate()
            .scan(0usize, |start, (g, &size)| {
                let columns = (*start..*start + size).map(|i| format!("post{g}_{i:03}")).collect();
                *start += size;
                Some(FeatureGroup {
                    name: format!("post{g}"),
                    kind: GroupKind::Common,
                    columns,
                })
            })
            .collect();
        if ns.n_odometers > 0 {
            groups.push(FeatureGroup {
                name: "odometer".into(),
                kind: GroupKind::Odometer,
                columns: (0..ns.n_odometers).map(|j| format!("odo_{j:03}")).collect(),
            });
        }
        GroupSpec { groups }
    }

    pub fn pattern_names(&self, node: NodeLabel) -> Vec<String> {
        self.node(node)
            .pattern_temperature
            .iter()
            .enumerate()
            .map(|(r, t)| format!("pat{r:02}_t{t}"))
            .collect()
    }

    pub fn generate_node(&self, node: NodeLabel) -> Result<Dataset> {
        let ns = self.spec.node(node);
        let groups = self.group_spec(node);
        let column_names: Vec<String> = groups.groups.iter().flat_map(|g| g.columns.clone()).collect();
        let prefix = match node {
            NodeLabel::Base => 'B',
            NodeLabel::Target => 'T',
        };
        let row_ids: Vec<String> = (0..ns.n_dies).map(|d| format!("{prefix}{d:05}")).collect();
        let mut feats = Vec::with_capacity(ns.n_dies * column_names.len());
        let mut targs = Vec::with_capacity(ns.n_dies * ns.n_patterns);
        for die in 0..ns.n_dies {
            let row = self.generate_die(node, die);
            feats.extend(row.features);
            targs.extend(row.vmin);
        }
        Ok(Dataset {
            features: FeatureMatrix {
                values: Matrix::from_vec(ns.n_dies, column_names.len(), feats)?,
                column_names,
                row_ids: row_ids.clone(),
            },
            targets: TargetMatrix {
                values: Matrix::from_vec(ns.n_dies, ns.n_patterns, targs)?,
                column_names: self.pattern_names(node),
                row_ids,
            },
            groups,
            node_label: node,
            temperatures: ns.temperatures.clone(),
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Worst local corner: the largest site mean. Zero without sites.
fn worst_local(local: &[Vec<f64>]) -> f64 {
    local.iter().map(|v| mean(v)).reduce(f64::max).unwrap_or(0.0)
}

#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub model: LatentModel,
    pub base: Dataset,
    pub target: Dataset,
}

/// Generates both nodes in memory.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticPair> {
    let model = LatentModel::build(spec)?;
    let base = model.generate_node(NodeLabel::Base)?;
    let target = model.generate_node(NodeLabel::Target)?;
    Ok(SyntheticPair { model, base, target })
}

/// File name of the coefficient echo written next to the two node dirs.
pub const SPEC_ECHO_FILE: &str = "synthetic_model.json";

/// Writes `base/` and `target/` dataset directories plus the coefficient echo
/// under `out_dir`; returns the two manifest paths.
pub fn gen_pair(spec: &SyntheticSpec, out_dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let out = out_dir.as_ref();
    let pair = generate(spec)?;
    let base = write_dataset(&pair.base, out.join("base"))?;
    let target = write_dataset(&pair.target, out.join("target"))?;
    crate::dataset::write_json(&out.join(SPEC_ECHO_FILE), &pair.model)?;
    Ok((base, target))
}

pub fn read_spec(path: impl AsRef<Path>) -> Result<SyntheticSpec> {
    let spec: SyntheticSpec = crate::dataset::read_json(path.as_ref())?;
    spec.validate()?;
    Ok(spec)
}

/// Human-readable summary of the shapes and coefficients of a spec.
pub fn describe(spec: &SyntheticSpec) -> String {
    let mut s = String::new();
    let join = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join("/");
    for (label, n) in [("base", &spec.base), ("target", &spec.target)] {
        let n_post: usize = n.group_sizes.iter().sum();
        let _ = write!(
            s,
            "{label:<6} dies={} groups={} ({} features)",
            n.n_dies,
            join(&n.group_sizes),
            n_post
        );
        if n.n_odometers > 0 {
            let _ = write!(s, " + {} odometers", n.n_odometers);
        }
        let temps: Vec<String> = n.temperatures.iter().map(ToString::to_string).collect();
        let _ = writeln!(
            s,
            " patterns={} temperatures=[{}] offset={} mV",
            n.n_patterns,
            temps.join(", "),
            n.offset_mv
        );
    }
    let _ = writeln!(
        s,
        "latent p={} q={} local_sigma={} local_shared={} tanh_units={} sharpness={} prototypes={}",
        spec.latent_dim,
        spec.local_dim,
        spec.local_sigma,
        spec.local_shared,
        spec.nonlinear_units,
        spec.sharpness,
        spec.prototypes
    );
    let _ = writeln!(
        s,
        "amplitude={} mV gamma={} rho={} sigma_f={} sigma_y={} mV",
        spec.amplitude_mv, spec.nonlinearity, spec.rho, spec.feature_noise, spec.target_noise_mv
    );
    let _ = writeln!(
        s,
        "odometer u={} mV c={} d={} speed_loading={} seed={}",
        spec.odometer_coupling_mv, spec.odometer_global, spec.odometer_local, spec.speed_loading, spec.seed
    );
    s
}

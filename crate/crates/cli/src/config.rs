//! Run configuration: a TOML document with `grid`, `species`, `kernel`, `run` and
//! `checks` sections.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use mskinetic::kernel::{Angular, KernelSet, PairKernel, Radial};
use mskinetic::solver::{Bump, InitialCondition, Integrator, SimConfig};
use mskinetic::sphere::SphereQuadrature;
use mskinetic::{
    BoltzmannOperator, Field, Flavor, KineticError, LandauOperator, Operator, SpeciesSet, Statistics, VelocityGrid,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub grid: GridSection,
    pub species: Vec<SpeciesSection>,
    pub kernel: KernelSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub checks: ChecksSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
    /// Sphere quadrature resolution `K`.
    #[serde(default = "default_sphere_nodes")]
    pub sphere_nodes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSection {
    pub mass: f64,
    #[serde(default = "default_statistics")]
    pub statistics: String,
    pub initial: InitialSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSection {
    Gaussians { bumps: Vec<BumpSection> },
    Equilibrium { mu: f64, mean: Vec<f64>, temperature: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSection {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub temperature: f64,
}

/// Radial kind plus angular factor. Used for the default kernel and per-pair overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    /// `maxwell`, `power-law` or `tabulated`.
    pub kind: String,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Two-column `r alpha` table, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(default)]
    pub angular: AngularSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pair: Vec<PairSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSection {
    pub i: usize,
    pub j: usize,
    pub kind: String,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(default)]
    pub angular: AngularSection,
}

/// `b(theta) = c` or `c |cos theta|^p`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularSection {
    #[serde(default = "default_angular_kind")]
    pub kind: String,
    #[serde(default = "default_angular_c")]
    pub c: f64,
    #[serde(default)]
    pub p: f64,
}

impl Default for AngularSection {
    fn default() -> Self {
        Self {
            kind: default_angular_kind(),
            c: default_angular_c(),
            p: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_operator")]
    pub operator: String,
    #[serde(default = "default_integrator")]
    pub integrator: String,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "one")]
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "yes")]
    pub projection: bool,
    /// `none`, `final` or `all` (every recorded time).
    #[serde(default = "default_snapshots")]
    pub snapshots: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            operator: default_operator(),
            integrator: default_integrator(),
            dt: default_dt(),
            t_end: 1.0,
            stride: default_stride(),
            projection: true,
            snapshots: default_snapshots(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSection {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_generic_nx")]
    pub generic_nx: usize,
    #[serde(default = "default_generic_n")]
    pub generic_n: usize,
    #[serde(default = "default_generic_pairs")]
    pub generic_pairs: usize,
    #[serde(default = "default_refinement")]
    pub generic_refinement: Vec<usize>,
    #[serde(default = "default_refinement_nx")]
    pub generic_refinement_nx: usize,
    #[serde(default = "default_fisher_nodes")]
    pub fisher_sphere_nodes: usize,
    #[serde(default = "default_fisher_samples")]
    pub fisher_samples: usize,
    #[serde(default = "default_eps")]
    pub grazing_eps: Vec<f64>,
    #[serde(default = "default_k_per_eps")]
    pub grazing_k_per_eps: f64,
    #[serde(default = "default_grazing_base")]
    pub grazing_base: AngularSection,
    #[serde(default = "default_thetas")]
    pub lemma_thetas: Vec<f64>,
    #[serde(default = "default_oracle_n")]
    pub oracle_n: Vec<usize>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for ChecksSection {
    fn default() -> Self {
        toml::from_str("").expect("all check fields have defaults")
    }
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_dim() -> usize {
    2
}
fn default_sphere_nodes() -> usize {
    16
}
fn default_statistics() -> String {
    "maxwell".into()
}
fn default_angular_kind() -> String {
    "constant".into()
}
fn default_angular_c() -> f64 {
    1.0 / (2.0 * PI)
}
fn default_operator() -> String {
    "boltzmann".into()
}
fn default_integrator() -> String {
    "euler".into()
}
fn default_dt() -> f64 {
    1e-3
}
fn default_stride() -> usize {
    1
}
fn default_snapshots() -> String {
    "final".into()
}
fn default_seed() -> u64 {
    20_240_917
}
fn default_generic_nx() -> usize {
    4
}
fn default_generic_n() -> usize {
    8
}
fn default_generic_pairs() -> usize {
    20
}
fn default_refinement() -> Vec<usize> {
    vec![16, 24, 32]
}
fn default_refinement_nx() -> usize {
    16
}
fn default_fisher_nodes() -> usize {
    128
}
fn default_fisher_samples() -> usize {
    200
}
fn default_eps() -> Vec<f64> {
    vec![0.8, 0.4, 0.2, 0.1]
}
fn default_k_per_eps() -> f64 {
    128.0
}
fn default_grazing_base() -> AngularSection {
    AngularSection {
        kind: "cos-power".into(),
        c: 1.0,
        p: 4.0,
    }
}
fn default_thetas() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3]
}
fn default_oracle_n() -> Vec<usize> {
    vec![8, 12]
}

/// Pass/fail thresholds, overridable by name from the config or the command line.
pub const TOLERANCES: &[(&str, f64, &str)] = &[
    ("h_mismatch", 0.05, "max |dH/dt + D| / D between recorded steps"),
    ("mass_drift", 1e-12, "per-species relative mass change per step"),
    ("moment_drift", 1e-8, "relative momentum/energy drift per unit time"),
    ("generic_r2", 1e-12, "max |M dE|"),
    ("generic_antisymmetry", 1e-8, "L antisymmetry defect"),
    ("generic_symmetry", 1e-8, "M symmetry defect"),
    ("generic_psd", 1e-12, "allowed negative <xi, M xi>"),
    ("generic_order", 2.0, "minimal fitted order of ||L dS||"),
    ("oracle", 1e-9, "optimized vs direct-sum operator, relative to max|Q|"),
    ("weak_strong", 1e-8, "weak vs strong pairing, relative"),
    ("grazing_final", 0.05, "final relative weak-form gap"),
    ("grazing_order", 1.0, "minimal order of the lemma and perp residuals"),
    ("lemma_constant", 1e-3, "relative error of the fitted lemma constant"),
    ("perp_coefficient", 0.01, "relative error of the perp coefficient"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances(BTreeMap<String, f64>);

impl Tolerances {
    pub fn new(config: &BTreeMap<String, f64>, overrides: &[(String, f64)]) -> Result<Self, CliError> {
        let mut map: BTreeMap<String, f64> = TOLERANCES.iter().map(|(k, v, _)| (k.to_string(), *v)).collect();
        for (k, v) in config.iter().map(|(k, v)| (k.clone(), *v)).chain(overrides.iter().cloned()) {
            if !map.contains_key(&k) {
                let known: Vec<&str> = TOLERANCES.iter().map(|t| t.0).collect();
                return Err(CliError::Config(format!(
                    "unknown tolerance '{k}' (known: {})",
                    known.join(", ")
                )));
            }
            if !(v >= 0.0) {
                return Err(CliError::Config(format!("tolerance '{k}' must be nonnegative, got {v}")));
            }
            map.insert(k, v);
        }
        Ok(Self(map))
    }

    pub fn get(&self, name: &str) -> f64 {
        self.0[name]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &f64)> {
        self.0.iter()
    }
}

/// Parse `NAME=VALUE`.
pub fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got '{s}'"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("bad tolerance value in '{s}'"))?;
    Ok((k.trim().to_string(), v))
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.species.is_empty() {
            return Err(CliError::Config("species: at least one [[species]] entry is required".into()));
        }
        for (s, sp) in self.species.iter().enumerate() {
            parse_statistics(&sp.statistics).map_err(|m| CliError::Config(format!("species[{s}].statistics: {m}")))?;
        }
        parse_operator(&self.run.operator).map_err(|m| CliError::Config(format!("run.operator: {m}")))?;
        self.run
            .integrator
            .parse::<Integrator>()
            .map_err(|e| CliError::Config(format!("run.integrator: {e}")))?;
        if !["none", "final", "all"].contains(&self.run.snapshots.as_str()) {
            return Err(CliError::Config(format!(
                "run.snapshots: expected none, final or all, got '{}'",
                self.run.snapshots
            )));
        }
        for (i, p) in self.kernel.pair.iter().enumerate() {
            if p.i >= self.species.len() || p.j >= self.species.len() {
                return Err(CliError::Config(format!("kernel.pair[{i}]: species index out of range")));
            }
        }
        Ok(())
    }

    pub fn velocity_grid(&self) -> Result<VelocityGrid, CliError> {
        self.velocity_grid_with(self.grid.n)
    }

    pub fn velocity_grid_with(&self, n: usize) -> Result<VelocityGrid, CliError> {
        VelocityGrid::new(self.grid.dim, n, self.grid.half_width).map_err(|e| CliError::field("grid", e))
    }

    pub fn species_set(&self) -> Result<SpeciesSet, CliError> {
        let stats = self
            .species
            .iter()
            .map(|s| parse_statistics(&s.statistics).map_err(CliError::Config))
            .collect::<Result<Vec<_>, _>>()?;
        SpeciesSet::new(self.species.iter().map(|s| s.mass).collect(), stats).map_err(|e| CliError::field("species", e))
    }

    pub fn kernels(&self, base: &Path) -> Result<KernelSet, CliError> {
        let k = &self.kernel;
        let default = pair_kernel(&k.kind, k.c, k.gamma, k.table.as_deref(), &k.angular, base)
            .map_err(|m| CliError::Config(format!("kernel: {m}")))?;
        let mut set = KernelSet::uniform(self.species.len(), default);
        for (idx, p) in k.pair.iter().enumerate() {
            let pk = pair_kernel(&p.kind, p.c, p.gamma, p.table.as_deref(), &p.angular, base)
                .map_err(|m| CliError::Config(format!("kernel.pair[{idx}]: {m}")))?;
            set.set_pair(p.i, p.j, pk);
        }
        Ok(set)
    }

    pub fn sphere(&self) -> Result<SphereQuadrature, CliError> {
        SphereQuadrature::new(self.grid.dim, self.grid.sphere_nodes).map_err(|e| CliError::field("grid.sphere_nodes", e))
    }

    pub fn flavor(&self) -> Flavor {
        parse_operator(&self.run.operator).expect("validated")
    }

    /// Operator of `flavor` on `grid`.
    pub fn operator(&self, flavor: Flavor, grid: &VelocityGrid, base: &Path) -> Result<Operator, CliError> {
        let species = self.species_set()?;
        let kernels = self.kernels(base)?;
        let op = if flavor.is_landau() {
            Operator::landau(
                LandauOperator::new(species, kernels, grid.clone()).map_err(|e| CliError::field("kernel", e))?,
                flavor.is_linear(),
            )
        } else {
            Operator::boltzmann(
                BoltzmannOperator::new(species, kernels, grid.clone(), self.sphere()?)
                    .map_err(|e| CliError::field("kernel", e))?,
                flavor.is_linear(),
            )
        };
        Ok(op)
    }

    pub fn initial_fields(&self, grid: &VelocityGrid) -> Result<Vec<Field>, CliError> {
        let species = self.species_set()?;
        self.species
            .iter()
            .enumerate()
            .map(|(s, sp)| {
                let ic = match &sp.initial {
                    InitialSection::Gaussians { bumps } => InitialCondition::Gaussians(
                        bumps
                            .iter()
                            .map(|b| Bump {
                                weight: b.weight,
                                mean: b.mean.clone(),
                                temperature: b.temperature,
                            })
                            .collect(),
                    ),
                    InitialSection::Equilibrium { mu, mean, temperature } => InitialCondition::Equilibrium {
                        mu: *mu,
                        mean: mean.clone(),
                        temperature: *temperature,
                    },
                };
                ic.build(species.statistics(s), species.mass(s), grid, s)
                    .map_err(|e| CliError::field(&format!("species[{s}].initial"), e))
            })
            .collect()
    }

    pub fn sim_config(&self) -> Result<SimConfig, CliError> {
        Ok(SimConfig {
            integrator: self.run.integrator.parse().map_err(|e| CliError::field("run.integrator", e))?,
            dt: self.run.dt,
            t_end: self.run.t_end,
            stride: self.run.stride,
            projection: self.run.projection,
        })
    }

    /// `key: value` lines for every leaf of the resolved configuration.
    pub fn echo(&self) -> Vec<(String, String)> {
        let value = toml::Value::try_from(self).expect("config serializes");
        let mut out = Vec::new();
        flatten("config", &value, &mut out);
        out
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<(String, String)>) {
    match v {
        toml::Value::Table(t) => {
            for (k, x) in t {
                flatten(&format!("{prefix}.{k}"), x, out);
            }
        }
        toml::Value::Array(a) if a.iter().any(|x| x.is_table()) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

pub fn parse_statistics(s: &str) -> Result<Statistics, String> {
    match s {
        "maxwell" | "classical" => Ok(Statistics::Maxwell),
        "bose" => Ok(Statistics::Bose),
        "fermi" => Ok(Statistics::Fermi),
        _ => Err(format!("expected maxwell, bose or fermi, got '{s}'")),
    }
}

pub fn parse_operator(s: &str) -> Result<Flavor, String> {
    Flavor::ALL
        .into_iter()
        .find(|f| f.name() == s)
        .ok_or_else(|| format!("expected boltzmann, landau, boltzmann-linear or landau-linear, got '{s}'"))
}

pub fn angular(section: &AngularSection) -> Result<Angular, String> {
    match section.kind.as_str() {
        "constant" => Ok(Angular::Constant { c: section.c }),
        "cos-power" => Ok(Angular::CosPower { c: section.c, p: section.p }),
        other => Err(format!("angular.kind: expected constant or cos-power, got '{other}'")),
    }
}

fn pair_kernel(
    kind: &str,
    c: f64,
    gamma: Option<f64>,
    table: Option<&Path>,
    ang: &AngularSection,
    base: &Path,
) -> Result<PairKernel, String> {
    let radial = match kind {
        "maxwell" => Radial::Maxwell { c },
        "power-law" => Radial::PowerLaw {
            c,
            gamma: gamma.ok_or("power-law kernels need 'gamma'")?,
        },
        "tabulated" => {
            let rel = table.ok_or("tabulated kernels need 'table'")?;
            let path = base.join(rel);
            let text = std::fs::read_to_string(&path).map_err(|e| format!("table {}: {e}", path.display()))?;
            Radial::tabulated_from_str(&text).map_err(|e| format!("table {}: {e}", path.display()))?
        }
        other => return Err(format!("kind: expected maxwell, power-law or tabulated, got '{other}'")),
    };
    Ok(PairKernel::new(radial, angular(ang)?))
}

impl CliError {
    fn field(name: &str, e: KineticError) -> Self {
        CliError::Kinetic {
            context: name.to_string(),
            source: e,
        }
    }
}

//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{BandLimitedKernel, DualFunctional};
use crate::signals::Signal;
use crate::weights::{make_bandlimited_weight, ConvolutionOptions, Weight};
use crate::DilationMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Reconstruction,
    StrictRate,
    WeakRate,
    SamplingTail,
    SamplingMixed,
    Jackson,
    ModuliProps,
    WeightsAudit,
    CompatAudit,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Reconstruction,
        Experiment::StrictRate,
        Experiment::WeakRate,
        Experiment::SamplingTail,
        Experiment::SamplingMixed,
        Experiment::Jackson,
        Experiment::ModuliProps,
        Experiment::WeightsAudit,
        Experiment::CompatAudit,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Reconstruction => "reconstruction",
            Experiment::StrictRate => "strict_rate",
            Experiment::WeakRate => "weak_rate",
            Experiment::SamplingTail => "sampling_tail",
            Experiment::SamplingMixed => "sampling_mixed",
            Experiment::Jackson => "jackson",
            Experiment::ModuliProps => "moduli_props",
            Experiment::WeightsAudit => "weights_audit",
            Experiment::CompatAudit => "compat_audit",
        }
    }

    /// Experiments that produce an error curve.
    pub fn is_rate(&self) -> bool {
        matches!(
            self,
            Experiment::StrictRate
                | Experiment::WeakRate
                | Experiment::SamplingTail
                | Experiment::SamplingMixed
                | Experiment::Jackson
        )
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|e| e.name()).collect();
                Error::Parse(format!("unknown experiment `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "name",
    "dim",
    "kernel",
    "dual",
    "dilation.diag",
    "weight",
    "signal",
    "j_list",
    "p",
    "n",
    "gamma",
    "delta",
    "seed",
    "tol",
    "grid.halfwidth",
    "grid.points",
    "modulus.points",
    "modulus.dirs",
    "plot",
];

fn canonical_key(key: &str) -> String {
    match key.trim() {
        "δ" => "delta".into(),
        "γ" => "gamma".into(),
        "M" | "dilation" => "dilation.diag".into(),
        "j" => "j_list".into(),
        other => other.to_string(),
    }
}

/// Raw key/value pairs, in the order they take effect.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parse `key = value` lines; `#` starts a comment, `[section]` prefixes following keys.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = Self::default();
        let mut section = String::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`, got `{line}`", lineno + 1)))?;
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            raw.set(&key, v.trim())?;
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = canonical_key(key);
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Parse(format!("unknown config key `{key}`")));
        }
        self.entries.insert(key, value.trim().to_string());
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got `{pair}`")))?;
        self.set(k, v)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.trim()
        .parse::<T>()
        .map_err(|e| Error::Parse(format!("`{key}` = `{v}`: {e}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Parse(format!("`{key}` = `{v}`: expected a boolean"))),
    }
}

/// `1,2,5` or `1..6` (inclusive).
pub fn parse_j_list(v: &str) -> Result<Vec<u32>> {
    let v = v.trim();
    let js = if let Some((a, b)) = v.split_once("..") {
        let a: u32 = parse_num("j_list", a)?;
        let b: u32 = parse_num("j_list", b.trim_start_matches('='))?;
        (a..=b).collect()
    } else {
        v.split(',').map(|s| parse_num("j_list", s)).collect::<Result<Vec<u32>>>()?
    };
    if js.is_empty() || js.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parse(format!("j_list `{v}` must be nonempty and strictly increasing")));
    }
    Ok(js)
}

/// Weight description: `unit`, `poly:α`, or `bandlimited:α:b` (`poly:α` convolved with a
/// nonnegative mollifier whose spectrum lies in `[−b, b]^d`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum WeightSpec {
    Unit,
    Poly { alpha: f64 },
    BandLimited { alpha: f64, band: f64 },
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parse_num("weight", parts.get(i).ok_or_else(|| Error::Parse(format!("weight `{s}` is missing a field")))?)
        };
        match parts[0] {
            "unit" | "1" => Ok(Self::Unit),
            "poly" | "w" => Ok(Self::Poly { alpha: num(1)? }),
            "bandlimited" => Ok(Self::BandLimited {
                alpha: num(1)?,
                band: num(2)?,
            }),
            other => Err(Error::Parse(format!("unknown weight `{other}`"))),
        }
    }
}

impl WeightSpec {
    pub fn alpha(&self) -> f64 {
        match *self {
            WeightSpec::Unit => 0.0,
            WeightSpec::Poly { alpha } | WeightSpec::BandLimited { alpha, .. } => alpha,
        }
    }

    /// Builds the weight; band-limited weights are tabulated on `[−table, table]` in one dimension.
    pub fn build(&self, dim: usize, table: f64) -> Result<Weight> {
        match *self {
            WeightSpec::Unit => Ok(Weight::unit(dim)),
            WeightSpec::Poly { alpha } => Weight::polynomial(dim, alpha),
            WeightSpec::BandLimited { alpha, band } => {
                let base = Weight::polynomial(dim, alpha)?;
                let moll = BandLimitedKernel::squared_flat_top(dim, band)?;
                let opts = ConvolutionOptions {
                    table: Some((table, 1.0 / 16.0)),
                    ..Default::default()
                };
                make_bandlimited_weight(&base, &moll, &opts)
            }
        }
    }
}

/// Signal description: `gaussian[:s]`, `bandlimited:ρ[:seed]`, `matern:a` (unweighted base),
/// `matern_like:a` (base times the configured weight), or `zero`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SignalSpec {
    Gaussian { scale: f64 },
    BandLimited { radius: f64, seed: Option<u64> },
    Matern { a: f64 },
    MaternLike { a: f64 },
    Zero,
}

impl FromStr for SignalSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parse_num("signal", parts.get(i).ok_or_else(|| Error::Parse(format!("signal `{s}` is missing a field")))?)
        };
        match parts[0] {
            "gaussian" => Ok(Self::Gaussian {
                scale: if parts.len() > 1 { num(1)? } else { 1.0 },
            }),
            "bandlimited" => Ok(Self::BandLimited {
                radius: num(1)?,
                seed: match parts.get(2) {
                    Some(v) => Some(parse_num("signal", v)?),
                    None => None,
                },
            }),
            "matern" => Ok(Self::Matern { a: num(1)? }),
            "matern_like" => Ok(Self::MaternLike { a: num(1)? }),
            "zero" => Ok(Self::Zero),
            other => Err(Error::Parse(format!("unknown signal `{other}`"))),
        }
    }
}

impl SignalSpec {
    pub fn build(&self, dim: usize, w: &Weight, seed: u64) -> Result<Signal> {
        match *self {
            SignalSpec::Gaussian { scale } => Signal::gaussian(dim, scale),
            SignalSpec::BandLimited { radius, seed: s } => Signal::bandlimited(dim, radius, s.unwrap_or(seed)),
            SignalSpec::Matern { a } => Signal::matern_base(dim, a),
            SignalSpec::MaternLike { a } => Signal::matern_like(dim, a, w),
            SignalSpec::Zero => Ok(Signal::zero(dim)),
        }
    }

    /// Spectral decay exponent `a` of `F(f/w)`, when known.
    pub fn decay(&self) -> Option<f64> {
        match *self {
            SignalSpec::Matern { a } | SignalSpec::MaternLike { a } => Some(a),
            _ => None,
        }
    }
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub name: String,
    pub dim: usize,
    pub kernel: String,
    pub dual: String,
    pub dilation: Vec<f64>,
    pub weight: WeightSpec,
    pub signal: SignalSpec,
    pub j_list: Vec<u32>,
    pub p: f64,
    pub n: u32,
    pub gamma: f64,
    pub delta: Option<f64>,
    pub seed: u64,
    pub tol: f64,
    pub grid_halfwidth: f64,
    pub grid_points: usize,
    pub modulus_points: usize,
    pub modulus_dirs: usize,
    pub plot: bool,
}

impl ExperimentConfig {
    pub fn resolve(raw: &RawConfig) -> Result<Self> {
        let experiment: Experiment = raw
            .get("experiment")
            .ok_or_else(|| Error::Parse("missing `experiment`".into()))?
            .parse()?;
        let get = |k: &str| raw.get(k);
        let dim: usize = get("dim").map(|v| parse_num("dim", v)).transpose()?.unwrap_or(1);
        if !(1..=3).contains(&dim) {
            return Err(Error::Parse(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        let defaults = Defaults::for_experiment(experiment, dim);
        let dilation = match get("dilation.diag") {
            Some(v) => v
                .split(',')
                .map(|s| parse_num("dilation.diag", s))
                .collect::<Result<Vec<f64>>>()?,
            None => vec![2.0; dim],
        };
        if dilation.len() != dim {
            return Err(Error::Parse(format!(
                "dilation.diag has {} entries for dim {dim}",
                dilation.len()
            )));
        }
        let cfg = Self {
            experiment,
            name: get("name").unwrap_or(experiment.name()).to_string(),
            dim,
            kernel: get("kernel").unwrap_or(defaults.kernel).to_string(),
            dual: get("dual").unwrap_or("dirac").to_string(),
            dilation,
            weight: get("weight").unwrap_or(defaults.weight).parse()?,
            signal: get("signal").unwrap_or(defaults.signal).parse()?,
            j_list: parse_j_list(get("j_list").unwrap_or(defaults.j_list))?,
            p: get("p").map(|v| parse_num("p", v)).transpose()?.unwrap_or(2.0),
            n: get("n").map(|v| parse_num("n", v)).transpose()?.unwrap_or(defaults.n),
            gamma: get("gamma").map(|v| parse_num("gamma", v)).transpose()?.unwrap_or(1.0),
            delta: get("delta").map(|v| parse_num("delta", v)).transpose()?,
            seed: get("seed").map(|v| parse_num("seed", v)).transpose()?.unwrap_or(1),
            tol: get("tol").map(|v| parse_num("tol", v)).transpose()?.unwrap_or(1e-9),
            grid_halfwidth: get("grid.halfwidth")
                .map(|v| parse_num("grid.halfwidth", v))
                .transpose()?
                .unwrap_or(defaults.halfwidth),
            grid_points: get("grid.points")
                .map(|v| parse_num("grid.points", v))
                .transpose()?
                .unwrap_or(defaults.points),
            modulus_points: get("modulus.points")
                .map(|v| parse_num("modulus.points", v))
                .transpose()?
                .unwrap_or(defaults.modulus_points),
            modulus_dirs: get("modulus.dirs")
                .map(|v| parse_num("modulus.dirs", v))
                .transpose()?
                .unwrap_or(if dim == 1 { 16 } else { 64 }),
            plot: get("plot").map(|v| parse_bool("plot", v)).transpose()?.unwrap_or(true),
        };
        if !cfg.grid_points.is_power_of_two() || cfg.grid_points < 8 {
            return Err(Error::Parse(format!("grid.points must be a power of two ≥ 8, got {}", cfg.grid_points)));
        }
        if !cfg.modulus_points.is_power_of_two() || cfg.modulus_points < 8 {
            return Err(Error::Parse(format!(
                "modulus.points must be a power of two ≥ 8, got {}",
                cfg.modulus_points
            )));
        }
        if cfg.name.is_empty() || cfg.name.contains(['/', '\\']) {
            return Err(Error::Parse(format!("invalid output name `{}`", cfg.name)));
        }
        Ok(cfg)
    }

    pub fn kernel(&self) -> Result<BandLimitedKernel> {
        BandLimitedKernel::from_id(&self.kernel, self.dim)
    }

    pub fn dual(&self) -> Result<DualFunctional> {
        DualFunctional::from_id(&self.dual, self.dim)
    }

    pub fn dilation(&self) -> Result<DilationMatrix> {
        DilationMatrix::new(self.dilation.clone())
    }

    pub fn weight(&self) -> Result<Weight> {
        self.weight.build(self.dim, 2.0 * self.grid_halfwidth)
    }

    /// Smallest `|λ_i|`.
    pub fn lambda(&self) -> f64 {
        self.dilation.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
    }

    /// `q` with `1/p + 1/q = 1`.
    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }
}

struct Defaults {
    kernel: &'static str,
    weight: &'static str,
    signal: &'static str,
    j_list: &'static str,
    n: u32,
    halfwidth: f64,
    points: usize,
    modulus_points: usize,
}

impl Defaults {
    fn for_experiment(e: Experiment, dim: usize) -> Self {
        let (halfwidth, points, modulus_points) = match dim {
            1 => (16.0, 1 << 13, 2048),
            2 => (8.0, 512, 64),
            _ => (4.0, 64, 16),
        };
        let mut d = Self {
            kernel: "flat_top:0.25:0.45",
            weight: "poly:0.25",
            signal: "matern_like:1",
            j_list: "1..6",
            n: 2,
            halfwidth,
            points,
            modulus_points,
        };
        match e {
            Experiment::Reconstruction => {
                d.weight = "unit";
                d.signal = "bandlimited:0.2";
                d.j_list = "0..2";
            }
            Experiment::WeakRate | Experiment::SamplingMixed => {
                d.kernel = "weak:2:0.25:0.45";
                if e == Experiment::SamplingMixed {
                    d.j_list = "1..5";
                }
            }
            Experiment::SamplingTail => {
                d.weight = "bandlimited:0.25:0.125";
                d.j_list = "1..5";
            }
            Experiment::Jackson => {
                d.j_list = "0..5";
                d.halfwidth = if dim == 1 { 32.0 } else { halfwidth };
            }
            Experiment::ModuliProps => {
                d.j_list = "1..3";
            }
            _ => {}
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_aliases() {
        let raw = RawConfig::parse(
            "# sampling run\nexperiment = sampling_tail\n[grid]\npoints = 4096 # finer\n[dilation]\ndiag = 3\n",
        )
        .unwrap();
        let mut raw = raw;
        raw.set_pair("δ=0.25").unwrap();
        let cfg = ExperimentConfig::resolve(&raw).unwrap();
        assert_eq!(cfg.experiment, Experiment::SamplingTail);
        assert_eq!(cfg.grid_points, 4096);
        assert_eq!(cfg.dilation, vec![3.0]);
        assert_eq!(cfg.delta, Some(0.25));
        assert_eq!(cfg.j_list, vec![1, 2, 3, 4, 5]);
        assert_eq!(cfg.weight, WeightSpec::BandLimited { alpha: 0.25, band: 0.125 });
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(RawConfig::parse("experiment sampling_tail").is_err());
        assert!(RawConfig::parse("colour = blue").is_err());
        let raw = RawConfig::parse("experiment = nope").unwrap();
        assert!(ExperimentConfig::resolve(&raw).is_err());
        let raw = RawConfig::parse("experiment = jackson\ngrid.points = 1000").unwrap();
        assert!(ExperimentConfig::resolve(&raw).is_err());
        let raw = RawConfig::parse("experiment = jackson\ndim = 2\ndilation.diag = 2").unwrap();
        assert!(ExperimentConfig::resolve(&raw).is_err());
        assert!(parse_j_list("3,2").is_err());
        assert_eq!(parse_j_list("0..2").unwrap(), vec![0, 1, 2]);
        assert!("poly".parse::<WeightSpec>().is_err());
        assert!("bandlimited".parse::<SignalSpec>().is_err());
    }
}

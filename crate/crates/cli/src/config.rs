//! INI experiment configuration.
//!
//! ```ini
//! [experiment]
//! partitioner = rptree        # rptree | kd | dyadic
//! selector = cv               # cv | autostop
//! delta = 0.05
//! n_grid = 256, 512, 1024
//! D_grid = 8, 32
//! seeds = 0, 1, 2
//! diameter_mode = exact       # exact | approx2
//! noisy_median_scope = root   # root | cell
//! output_dir = results
//!
//! [generator]
//! family = subspace           # sparse_star | subspace | sphere_manifold | hilbert_curve
//! d = 2
//! rotation_seed = 7
//!
//! [function]
//! shape = linear              # linear | sine | constant
//! lambda = 1.0
//!
//! [noise]
//! y_diameter = 6.0
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use rpreg::regress::SelectionRule;
use rpreg::rptree::NoisyMedianScope;
use rpreg::synth::{Family, FunctionShape, GeneratorSpec, NoiseKind, NoiseSpec};
use rpreg::DiameterMode;

use crate::error::{CliError, Result};

pub const DEFAULT_ORACLE_POINTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionerKind {
    RpTree,
    Kd,
    Dyadic,
}

impl PartitionerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PartitionerKind::RpTree => "rptree",
            PartitionerKind::Kd => "kd",
            PartitionerKind::Dyadic => "dyadic",
        }
    }
}

impl FromStr for PartitionerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rptree" => Ok(PartitionerKind::RpTree),
            "kd" => Ok(PartitionerKind::Kd),
            "dyadic" => Ok(PartitionerKind::Dyadic),
            other => Err(format!("unknown partitioner '{other}'")),
        }
    }
}

/// One experiment: a generator swept over `n_grid x dims x seeds`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Generator template; `dim` is replaced by each entry of `dims`.
    pub generator: GeneratorSpec,
    pub partitioner: PartitionerKind,
    pub selector: SelectionRule,
    pub delta: f64,
    pub n_grid: Vec<usize>,
    pub dims: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Fixed repetition count for boosted builds; `None` uses the default.
    pub repetitions: Option<usize>,
    /// Height cap of the full tree; `None` uses `6 * ceil(log2 n)`.
    pub depth_cap: Option<usize>,
    pub diameter_mode: DiameterMode,
    pub noisy_median_scope: NoisyMedianScope,
    pub output_dir: PathBuf,
    /// Size of the fresh sample used for risk estimates.
    pub oracle_points: usize,
    pub autostop_squared: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut sections = Sections::new(&ini)?;
        let config = Self::from_sections(&mut sections)?;
        sections.reject_unknown()?;
        config.validate()?;
        Ok(config)
    }

    fn from_sections(s: &mut Sections) -> Result<Self> {
        let family = match s.required("generator", "family")?.as_str() {
            "sparse_star" => Family::SparseStar {
                epsilon: s.parsed_or("generator", "epsilon", 0.05)?,
            },
            "subspace" => Family::Subspace {
                d: s.parsed("generator", "d")?,
            },
            "sphere_manifold" => Family::SphereManifold {
                d: s.parsed("generator", "d")?,
            },
            "hilbert_curve" => Family::HilbertCurve {
                order: s.parsed_or("generator", "order", 4)?,
            },
            other => return Err(CliError::Config(format!("unknown generator family '{other}'"))),
        };
        let rotation_seed = match s.get("generator", "rotation_seed").as_deref() {
            None | Some("none") => None,
            Some(v) => Some(parse_value::<u64>("generator", "rotation_seed", v)?),
        };
        let shape = match s.optional("function", "shape").as_deref().unwrap_or("linear") {
            "linear" => FunctionShape::Linear,
            "sine" => FunctionShape::Sine {
                c: s.parsed_or("function", "c", 1.0)?,
            },
            "constant" => FunctionShape::Constant {
                value: s.parsed_or("function", "value", 0.0)?,
            },
            other => return Err(CliError::Config(format!("unknown function shape '{other}'"))),
        };
        let noise_kind = match s.optional("noise", "kind").as_deref().unwrap_or("uniform") {
            "uniform" => NoiseKind::Uniform,
            "gaussian_clipped" => NoiseKind::GaussianClipped,
            other => return Err(CliError::Config(format!("unknown noise kind '{other}'"))),
        };
        let dims: Vec<usize> = s.list("experiment", "D_grid")?;
        let generator = GeneratorSpec {
            family,
            dim: dims.first().copied().unwrap_or(0),
            rotation_seed,
            shape,
            lambda: s.parsed_or("function", "lambda", 1.0)?,
            function_seed: s.parsed_or("function", "seed", 0)?,
            noise: NoiseSpec {
                kind: noise_kind,
                y_diameter: s.parsed("noise", "y_diameter")?,
            },
        };
        let repetitions = match s.get("experiment", "repetitions").as_deref() {
            None | Some("auto") => None,
            Some(v) => Some(parse_value::<usize>("experiment", "repetitions", v)?),
        };
        Ok(Self {
            generator,
            partitioner: s.parsed_or("experiment", "partitioner", PartitionerKind::RpTree)?,
            selector: s.parsed_or("experiment", "selector", SelectionRule::CrossValidation)?,
            delta: s.parsed_or("experiment", "delta", 0.05)?,
            n_grid: s.list("experiment", "n_grid")?,
            dims,
            seeds: s.list("experiment", "seeds")?,
            repetitions,
            depth_cap: match s.get("experiment", "depth_cap") {
                None => None,
                Some(v) => Some(parse_value::<usize>("experiment", "depth_cap", &v)?),
            },
            diameter_mode: s.parsed_or("experiment", "diameter_mode", DiameterMode::Exact)?,
            noisy_median_scope: s.parsed_or("experiment", "noisy_median_scope", NoisyMedianScope::Root)?,
            output_dir: PathBuf::from(s.optional("experiment", "output_dir").unwrap_or_else(|| "results".into())),
            oracle_points: s.parsed_or("experiment", "oracle_points", DEFAULT_ORACLE_POINTS)?,
            autostop_squared: s.parsed_or("experiment", "autostop_squared", true)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        for (name, empty) in [
            ("n_grid", self.n_grid.is_empty()),
            ("D_grid", self.dims.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ] {
            if empty {
                return bad(format!("{name} must not be empty"));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} must lie in (0, 1)", self.delta));
        }
        if let Some(&n) = self.n_grid.iter().find(|&&n| n < 2) {
            return bad(format!("n_grid entry {n} is below 2"));
        }
        if self.repetitions == Some(0) {
            return bad("repetitions must be positive".into());
        }
        if self.oracle_points == 0 {
            return bad("oracle_points must be positive".into());
        }
        for &dim in &self.dims {
            self.generator_for(dim)
                .validate()
                .map_err(|e| CliError::Config(format!("D = {dim}: {e}")))?;
        }
        Ok(())
    }

    pub fn generator_for(&self, dim: usize) -> GeneratorSpec {
        GeneratorSpec {
            dim,
            ..self.generator.clone()
        }
    }
}

fn parse_value<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| CliError::Config(format!("[{section}] {key} = '{value}': {e}")))
}

/// Key lookups that remember which keys were read, so leftovers can be
/// reported as unknown.
struct Sections {
    values: BTreeMap<(String, String), String>,
    used: BTreeSet<(String, String)>,
}

const SECTIONS: [&str; 4] = ["experiment", "generator", "function", "noise"];

impl Sections {
    fn new(ini: &Ini) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((key, _)) = props.iter().next() {
                    return Err(CliError::Config(format!("key '{key}' is outside any section")));
                }
                continue;
            };
            if !SECTIONS.contains(&section) {
                return Err(CliError::Config(format!("unknown section [{section}]")));
            }
            for (key, value) in props.iter() {
                let value = value.split('#').next().unwrap_or("").trim().to_string();
                values.insert((section.to_string(), key.to_string()), value);
            }
        }
        Ok(Self {
            values,
            used: BTreeSet::new(),
        })
    }

    fn get(&mut self, section: &str, key: &str) -> Option<String> {
        let k = (section.to_string(), key.to_string());
        let v = self.values.get(&k).cloned().filter(|v| !v.is_empty());
        self.used.insert(k);
        v
    }

    fn optional(&mut self, section: &str, key: &str) -> Option<String> {
        self.get(section, key)
    }

    fn required(&mut self, section: &str, key: &str) -> Result<String> {
        self.get(section, key)
            .ok_or_else(|| CliError::Config(format!("missing [{section}] {key}")))
    }

    fn parsed<T: FromStr>(&mut self, section: &str, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.required(section, key)?;
        parse_value(section, key, &v)
    }

    fn parsed_or<T: FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(section, key) {
            Some(v) => parse_value(section, key, &v),
            None => Ok(default),
        }
    }

    /// Comma- or whitespace-separated list; a missing key is an empty list.
    fn list<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.get(section, key) else {
            return Ok(Vec::new());
        };
        v.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .map(|f| parse_value(section, key, f))
            .collect()
    }

    fn reject_unknown(&self) -> Result<()> {
        match self.values.keys().find(|k| !self.used.contains(*k)) {
            Some((section, key)) => Err(CliError::Config(format!("unknown key [{section}] {key}"))),
            None => Ok(()),
        }
    }
}

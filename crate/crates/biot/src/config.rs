//! Plain-text experiment descriptions.
//!
//! ```text
//! # comment
//! [experiment]
//! kind = stability-sweep
//! seed = 20240611
//!
//! [mesh]
//! type = unit-square
//! n = 8
//!
//! [grid]
//! lambda = 1, 1e2, 1e4, 1e8
//! ```
//!
//! Section and key names are case sensitive. Values are single tokens or
//! comma-separated lists.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use biot_core::problem::{BoundaryConfig, MaterialParams, SegmentTags, Tag};
use biot_core::verification::{default_sweep_bc, ParameterGrid};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing field `{key}` in section [{section}]")]
    Missing { section: String, key: String },
    #[error("missing section [{0}]")]
    MissingSection(String),
    #[error("line {line}: invalid value for `{key}`: {message}")]
    Invalid { line: usize, key: String, message: String },
    #[error("line {line}: unknown field `{key}` in section [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("{0}")]
    Semantic(String),
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed but untyped configuration file.
#[derive(Debug, Clone, Default)]
pub struct Document {
    sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
}

impl Document {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut doc = Document::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line,
                    message: format!("unterminated section header `{s}`"),
                })?;
                let name = name.trim();
                if name.is_empty() {
                    return Err(ConfigError::Syntax {
                        line,
                        message: "empty section name".into(),
                    });
                }
                if doc.sections.contains_key(name) {
                    return Err(ConfigError::Syntax {
                        line,
                        message: format!("section [{name}] appears twice"),
                    });
                }
                doc.sections.insert(name.to_string(), (line, BTreeMap::new()));
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = s.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, found `{s}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: "empty key".into(),
                });
            }
            let section = current.as_ref().ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("`{key}` appears before any section header"),
            })?;
            let entries = &mut doc.sections.get_mut(section).unwrap().1;
            if entries.contains_key(key) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("duplicate field `{key}`"),
                });
            }
            entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                },
            );
        }
        Ok(doc)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|(_, e)| e.get(key))
    }

    /// Rejects sections and keys outside the given schema.
    fn check_schema(&self, schema: &[(&str, &[&str])]) -> Result<(), ConfigError> {
        for (name, (_, entries)) in &self.sections {
            let Some((_, keys)) = schema.iter().find(|(s, _)| s == name) else {
                return Err(ConfigError::UnknownSection(name.clone()));
            };
            if keys.is_empty() {
                continue;
            }
            for (k, e) in entries {
                if !keys.contains(&k.as_str()) {
                    return Err(ConfigError::UnknownKey {
                        line: e.line,
                        section: name.clone(),
                        key: k.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|err| ConfigError::Invalid {
                line: e.line,
                key: key.to_string(),
                message: format!("`{}`: {err}", e.value),
            }),
        }
    }

    pub fn require<T: FromStr>(&self, section: &str, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(section, key)?.ok_or_else(|| ConfigError::Missing {
            section: section.to_string(),
            key: key.to_string(),
        })
    }

    pub fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(e) = self.entry(section, key) else {
            return Ok(None);
        };
        let items: Vec<&str> = e.value.split(',').map(str::trim).collect();
        if items.iter().any(|s| s.is_empty()) {
            return Err(ConfigError::Invalid {
                line: e.line,
                key: key.to_string(),
                message: "empty list item".into(),
            });
        }
        items
            .into_iter()
            .map(|s| {
                s.parse::<T>().map_err(|err| ConfigError::Invalid {
                    line: e.line,
                    key: key.to_string(),
                    message: format!("`{s}`: {err}"),
                })
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    fn line_of(&self, section: &str, key: &str) -> usize {
        self.entry(section, key).map_or(0, |e| e.line)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Solve,
    StabilitySweep,
    InfSup,
    Counterexample,
    Convergence,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Solve,
        ExperimentKind::StabilitySweep,
        ExperimentKind::InfSup,
        ExperimentKind::Counterexample,
        ExperimentKind::Convergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Solve => "solve",
            ExperimentKind::StabilitySweep => "stability-sweep",
            ExperimentKind::InfSup => "infsup",
            ExperimentKind::Counterexample => "counterexample",
            ExperimentKind::Convergence => "convergence",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::Solve => "one trajectory with seeded random loads; fields and norm breakdown",
            ExperimentKind::StabilitySweep => "stability ratio and all bound checks over a material-parameter grid",
            ExperimentKind::InfSup => "divergence constants under refinement and the constructive inf-sup quotient",
            ExperimentKind::Counterexample => "closed-form rough trial functions along the Neumann eigenmodes",
            ExperimentKind::Convergence => "manufactured-solution errors under mesh and time-step refinement",
        }
    }

    /// Whether the experiment draws random loads and so needs a seed.
    pub fn randomized(self) -> bool {
        matches!(self, ExperimentKind::Solve | ExperimentKind::StabilitySweep | ExperimentKind::InfSup)
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment kind (expected one of {})", kind_list()))
    }
}

fn kind_list() -> String {
    ExperimentKind::ALL.map(|k| k.name()).join(", ")
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    UnitSquare { n: usize },
    /// Mesh file, uniformly refined `refinements` times after loading.
    File { path: PathBuf, refinements: usize },
}

/// Pass/fail thresholds of the asserted properties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Largest admissible max/min of the stability ratio.
    pub stability_spread: f64,
    /// Largest admissible max/min of the boundedness constant.
    pub boundedness_spread: f64,
    /// A bound-check ratio fails when it exceeds this multiple of the median.
    pub median_factor: f64,
    /// Relative variation of `c_h` across refinements.
    pub refinement_variation: f64,
    /// Upper bound on `C_h`.
    pub upper_divergence: f64,
    /// Relative distance of `rough` from `T/2` once `λ ≥ 250`.
    pub rough_limit: f64,
    /// Minimal quotient growth between `λ ≈ 10²` and `λ ≈ 10³`.
    pub quotient_growth: f64,
    pub min_spatial_order: f64,
    /// Admissible distance of the temporal order from 1.
    pub temporal_order_band: f64,
    /// Largest relative step residual.
    pub step_residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            stability_spread: 100.0,
            boundedness_spread: 10.0,
            median_factor: 10.0,
            refinement_variation: 0.1,
            upper_divergence: 2.0 + 1e-8,
            rough_limit: 0.01,
            quotient_growth: 5.0,
            min_spatial_order: 0.8,
            temporal_order_band: 0.2,
            step_residual: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSettings {
    pub meshes: Vec<usize>,
    pub steps: usize,
    pub temporal_mesh: usize,
    pub temporal_steps: Vec<usize>,
    pub reference_steps: usize,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        Self {
            meshes: vec![4, 8, 16],
            steps: 64,
            temporal_mesh: 8,
            temporal_steps: vec![4, 8, 16],
            reference_steps: 256,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: Option<u64>,
    pub mesh: MeshSpec,
    pub params: Option<MaterialParams>,
    pub grid: Option<ParameterGrid>,
    /// `None` selects the default configuration of the experiment.
    pub boundary: Option<BoundaryConfig>,
    pub steps: usize,
    pub pr_max_degree: usize,
    /// Meshes for the divergence-constant study: uniform unit-square
    /// resolutions, or refinement levels of a mesh file.
    pub refinements: Vec<usize>,
    pub modes: usize,
    pub convergence: ConvergenceSettings,
    pub tolerances: Tolerances,
    pub output_dir: Option<PathBuf>,
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("experiment", &["kind", "seed"]),
    ("mesh", &["type", "n", "path", "refinements"]),
    ("params", &["mu", "lambda", "alpha", "sigma", "kappa", "T"]),
    ("grid", &["mu", "lambda", "alpha", "sigma", "kappa", "T"]),
    ("boundary", &[]),
    ("time", &["steps"]),
    ("checks", &["pr_max_degree"]),
    ("infsup", &["refinements"]),
    ("counterexample", &["K"]),
    ("convergence", &["meshes", "steps", "temporal_mesh", "temporal_steps", "reference_steps"]),
    (
        "tolerances",
        &[
            "stability_spread",
            "boundedness_spread",
            "median_factor",
            "refinement_variation",
            "upper_divergence",
            "rough_limit",
            "quotient_growth",
            "min_spatial_order",
            "temporal_order_band",
            "step_residual",
        ],
    ),
    ("output", &["dir"]),
];

fn parse_tag(s: &str) -> Result<Tag, String> {
    match s {
        "essential" | "E" => Ok(Tag::Essential),
        "natural" | "N" => Ok(Tag::Natural),
        _ => Err(format!("`{s}` is neither `essential` nor `natural`")),
    }
}

/// Boundary labels of the generated unit-square meshes.
pub const UNIT_SQUARE_LABELS: [&str; 4] = ["bottom", "right", "top", "left"];

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        if let MeshSpec::File { path: p, .. } = &mut cfg.mesh {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let doc = Document::parse(text)?;
        doc.check_schema(SCHEMA)?;
        if !doc.has_section("experiment") {
            return Err(ConfigError::MissingSection("experiment".into()));
        }
        let kind: ExperimentKind = doc.require("experiment", "kind")?;
        let seed = doc.get::<u64>("experiment", "seed")?;

        let mesh = match doc.get::<String>("mesh", "type")?.as_deref() {
            None | Some("unit-square") => MeshSpec::UnitSquare {
                n: doc.get("mesh", "n")?.unwrap_or(8),
            },
            Some("file") => MeshSpec::File {
                path: PathBuf::from(doc.require::<String>("mesh", "path")?),
                refinements: doc.get("mesh", "refinements")?.unwrap_or(0),
            },
            Some(other) => {
                return Err(ConfigError::Invalid {
                    line: doc.line_of("mesh", "type"),
                    key: "type".into(),
                    message: format!("`{other}` (expected `unit-square` or `file`)"),
                })
            }
        };
        if let MeshSpec::UnitSquare { n: 0 } = mesh {
            return Err(ConfigError::Invalid {
                line: doc.line_of("mesh", "n"),
                key: "n".into(),
                message: "must be positive".into(),
            });
        }

        let params = if doc.has_section("params") {
            let s = "params";
            let p = MaterialParams::new(
                doc.require(s, "mu")?,
                doc.require(s, "lambda")?,
                doc.require(s, "alpha")?,
                doc.require(s, "sigma")?,
                doc.require(s, "kappa")?,
                doc.require(s, "T")?,
            )
            .map_err(|e| ConfigError::Semantic(format!("[params]: {e}")))?;
            Some(p)
        } else {
            None
        };

        let grid = if doc.has_section("grid") {
            let s = "grid";
            let d = ParameterGrid::default();
            let g = ParameterGrid {
                lambda: doc.list(s, "lambda")?.unwrap_or(d.lambda),
                sigma: doc.list(s, "sigma")?.unwrap_or(d.sigma),
                kappa: doc.list(s, "kappa")?.unwrap_or(d.kappa),
                alpha: doc.list(s, "alpha")?.unwrap_or(d.alpha),
                mu: doc.get(s, "mu")?.unwrap_or(d.mu),
                t_final: doc.require(s, "T")?,
            };
            g.points().map_err(|e| ConfigError::Semantic(format!("[grid]: {e}")))?;
            Some(g)
        } else {
            None
        };

        let boundary = match doc.sections.get("boundary") {
            None => None,
            Some((line, entries)) => {
                if entries.is_empty() {
                    return Err(ConfigError::Syntax {
                        line: *line,
                        message: "[boundary] lists no segments".into(),
                    });
                }
                let mut bc = BoundaryConfig::new();
                for (label, e) in entries {
                    let tags: Vec<&str> = e.value.split(',').map(str::trim).collect();
                    let invalid = |message: String| ConfigError::Invalid {
                        line: e.line,
                        key: label.clone(),
                        message,
                    };
                    if tags.len() != 2 {
                        return Err(invalid("expected `<displacement tag>, <pressure tag>`".into()));
                    }
                    let u = parse_tag(tags[0]).map_err(invalid)?;
                    let p = parse_tag(tags[1]).map_err(invalid)?;
                    bc.set(label, SegmentTags::new(u, p));
                }
                Some(bc)
            }
        };

        let cd = ConvergenceSettings::default();
        let convergence = ConvergenceSettings {
            meshes: doc.list("convergence", "meshes")?.unwrap_or(cd.meshes),
            steps: doc.get("convergence", "steps")?.unwrap_or(cd.steps),
            temporal_mesh: doc.get("convergence", "temporal_mesh")?.unwrap_or(cd.temporal_mesh),
            temporal_steps: doc.list("convergence", "temporal_steps")?.unwrap_or(cd.temporal_steps),
            reference_steps: doc.get("convergence", "reference_steps")?.unwrap_or(cd.reference_steps),
        };

        let td = Tolerances::default();
        let t = "tolerances";
        let tolerances = Tolerances {
            stability_spread: doc.get(t, "stability_spread")?.unwrap_or(td.stability_spread),
            boundedness_spread: doc.get(t, "boundedness_spread")?.unwrap_or(td.boundedness_spread),
            median_factor: doc.get(t, "median_factor")?.unwrap_or(td.median_factor),
            refinement_variation: doc.get(t, "refinement_variation")?.unwrap_or(td.refinement_variation),
            upper_divergence: doc.get(t, "upper_divergence")?.unwrap_or(td.upper_divergence),
            rough_limit: doc.get(t, "rough_limit")?.unwrap_or(td.rough_limit),
            quotient_growth: doc.get(t, "quotient_growth")?.unwrap_or(td.quotient_growth),
            min_spatial_order: doc.get(t, "min_spatial_order")?.unwrap_or(td.min_spatial_order),
            temporal_order_band: doc.get(t, "temporal_order_band")?.unwrap_or(td.temporal_order_band),
            step_residual: doc.get(t, "step_residual")?.unwrap_or(td.step_residual),
        };

        let cfg = ExperimentConfig {
            kind,
            seed,
            mesh,
            params,
            grid,
            boundary,
            steps: doc.get("time", "steps")?.unwrap_or(16),
            pr_max_degree: doc.get("checks", "pr_max_degree")?.unwrap_or(2),
            refinements: doc.list("infsup", "refinements")?.unwrap_or_else(|| vec![4, 8, 16]),
            modes: doc.get("counterexample", "K")?.unwrap_or(50),
            convergence,
            tolerances,
            output_dir: doc.get::<String>("output", "dir")?.map(PathBuf::from),
        };
        cfg.check_required()?;
        Ok(cfg)
    }

    /// Per-kind requirements that the schema cannot express.
    fn check_required(&self) -> Result<(), ConfigError> {
        let missing_section = |s: &str| Err(ConfigError::MissingSection(s.into()));
        match self.kind {
            ExperimentKind::StabilitySweep => {
                if self.grid.is_none() {
                    return missing_section("grid");
                }
            }
            ExperimentKind::Solve | ExperimentKind::InfSup | ExperimentKind::Counterexample => {
                if self.params.is_none() {
                    return missing_section("params");
                }
            }
            ExperimentKind::Convergence => {
                if self.params.is_none() {
                    return missing_section("params");
                }
                let c = &self.convergence;
                if c.meshes.len() < 2 || c.temporal_steps.len() < 2 {
                    return Err(ConfigError::Semantic(
                        "[convergence] needs at least two meshes and two step counts".into(),
                    ));
                }
            }
        }
        if let (Some(bc), MeshSpec::UnitSquare { .. }) = (&self.boundary, &self.mesh) {
            bc.validate_labels(UNIT_SQUARE_LABELS)
                .map_err(|e| ConfigError::Semantic(format!("[boundary]: {e}")))?;
        }
        if self.steps == 0 {
            return Err(ConfigError::Semantic("[time] steps must be positive".into()));
        }
        if self.pr_max_degree > 3 {
            return Err(ConfigError::Semantic("[checks] pr_max_degree is at most 3".into()));
        }
        if self.kind == ExperimentKind::Counterexample && self.modes == 0 {
            return Err(ConfigError::Semantic("[counterexample] K must be positive".into()));
        }
        if self.kind == ExperimentKind::InfSup && self.refinements.is_empty() {
            return Err(ConfigError::Semantic("[infsup] refinements is empty".into()));
        }
        Ok(())
    }

    /// Boundary configuration in effect: the configured one, or clamped
    /// displacement with pressure prescribed on `top`.
    pub fn boundary_or_default(&self) -> BoundaryConfig {
        self.boundary.clone().unwrap_or_else(default_sweep_bc)
    }

    /// Seed for randomized experiments, with an optional override.
    pub fn effective_seed(&self, overridden: Option<u64>) -> Result<Option<u64>, ConfigError> {
        let seed = overridden.or(self.seed);
        if self.kind.randomized() && seed.is_none() {
            return Err(ConfigError::Missing {
                section: "experiment".into(),
                key: "seed".into(),
            });
        }
        Ok(seed)
    }
}

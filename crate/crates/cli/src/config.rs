//! Strict INI-style experiment configuration.
//!
//! Sections are `[model] [discretization] [observable] [experiment]
//! [output]`; keys are lowercase snake-case; unknown keys are fatal in
//! strict mode so misspelled parameters cannot be silently ignored. The
//! only repeatable key is `map`, one occurrence per map symbol.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::Serialize;

use crate::error::CliError;

/// How one fiber map is specified.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MapSpec {
    Doubling,
    Tripling,
    /// Branch quadruples `(lo, hi, slope, intercept)`.
    Affine(Vec<[f64; 4]>),
}

/// How the driving system is specified.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DrivingSpec {
    /// `None` means uniform probabilities over the map list.
    Bernoulli(Option<Vec<f64>>),
    /// `None` means the golden rotation with one equal cell per map,
    /// starting at 0.
    Rotation(Option<(f64, Vec<f64>, f64)>),
}

/// How the observable is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ObsSpec {
    Cosine { k: u32 },
    Indicator { threshold: f64, offset: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentKind {
    Density,
    Lambda,
    Variance,
    Ldp,
    Clt,
    Lclt,
    Aperiodicity,
    Validate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Density => "density",
            ExperimentKind::Lambda => "lambda",
            ExperimentKind::Variance => "variance",
            ExperimentKind::Ldp => "ldp",
            ExperimentKind::Clt => "clt",
            ExperimentKind::Lclt => "lclt",
            ExperimentKind::Aperiodicity => "aperiodicity",
            ExperimentKind::Validate => "validate",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "density" => ExperimentKind::Density,
            "lambda" => ExperimentKind::Lambda,
            "variance" => ExperimentKind::Variance,
            "ldp" => ExperimentKind::Ldp,
            "clt" => ExperimentKind::Clt,
            "lclt" => ExperimentKind::Lclt,
            "aperiodicity" => ExperimentKind::Aperiodicity,
            "validate" => ExperimentKind::Validate,
            _ => return None,
        })
    }
}

/// `auto` (computed by the variance op) or a forced value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Sigma2Spec {
    Auto,
    Forced(f64),
}

/// Kind-specific parameters, defaults filled at parse time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum KindParams {
    Density { t: i64, theta_re: f64, theta_im: f64, tol: f64 },
    Lambda {
        theta_max: f64,
        theta_steps: usize,
        n_orbit: u32,
        n_burn: u32,
        fd_step: f64,
        tol_d1: f64,
        tol_lambda0: f64,
    },
    Variance { j_max: usize, n_orbit: u32, tol_agree: f64 },
    Ldp {
        epsilons: Vec<f64>,
        ns: Vec<usize>,
        count: usize,
        theta_max: f64,
        theta_steps: usize,
        n_orbit: u32,
        n_burn: u32,
        tol_gap: f64,
    },
    Clt {
        n: usize,
        count: usize,
        sigma2: Sigma2Spec,
        var_j_max: usize,
        var_orbit: u32,
        tol_ks: f64,
        tol_var: f64,
    },
    Lclt {
        n: usize,
        count: usize,
        j_lo: f64,
        j_hi: f64,
        s_points: usize,
        s_span: f64,
        sigma2: Sigma2Spec,
        var_j_max: usize,
        var_orbit: u32,
        tol_sup: f64,
        override_aperiodicity: bool,
    },
    Aperiodicity {
        t_min: f64,
        t_max: f64,
        t_points: usize,
        n_orbit: u32,
        n_burn: u32,
        fit_steps: u32,
        expect: Expectation,
    },
    Validate { horizon: usize, k_max: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Expectation {
    Any,
    Aperiodic,
    Periodic,
}

/// A fully resolved experiment: model, discretization, observable,
/// kind-specific parameters, and output options.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentPlan {
    pub maps: Vec<MapSpec>,
    pub driving: DrivingSpec,
    pub seed: u64,
    pub n_cells: usize,
    pub observable: ObsSpec,
    pub centered: bool,
    pub kind: ExperimentKind,
    pub params: KindParams,
    pub out_dir: String,
    pub workers: usize,
    pub plots: bool,
    pub dump_matrices: bool,
}

struct RawItem {
    line: usize,
    key: String,
    value: String,
}

struct Sections {
    model: Vec<RawItem>,
    discretization: Vec<RawItem>,
    observable: Vec<RawItem>,
    experiment: Vec<RawItem>,
    output: Vec<RawItem>,
}

fn split_sections(text: &str, strict: bool, warnings: &mut Vec<String>) -> Result<Sections, CliError> {
    let mut sections =
        Sections { model: vec![], discretization: vec![], observable: vec![], experiment: vec![], output: vec![] };
    let mut current: Option<&'static str> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or(CliError::ParseError {
                line: line_no,
                message: "unterminated section header".into(),
            })?;
            current = Some(match name {
                "model" => "model",
                "discretization" => "discretization",
                "observable" => "observable",
                "experiment" => "experiment",
                "output" => "output",
                other => {
                    return Err(CliError::ParseError {
                        line: line_no,
                        message: format!("unknown section `{other}`"),
                    })
                }
            });
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::ParseError {
                line: line_no,
                message: "expected `key = value`".into(),
            });
        };
        let item = RawItem { line: line_no, key: key.trim().to_string(), value: value.trim().to_string() };
        let bucket = match current {
            Some("model") => &mut sections.model,
            Some("discretization") => &mut sections.discretization,
            Some("observable") => &mut sections.observable,
            Some("experiment") => &mut sections.experiment,
            Some("output") => &mut sections.output,
            _ => {
                return Err(CliError::ParseError {
                    line: line_no,
                    message: "key outside any section".into(),
                })
            }
        };
        bucket.push(item);
    }
    let _ = (strict, warnings);
    Ok(sections)
}

struct KeyTable<'a> {
    items: &'a [RawItem],
    allowed: &'a [&'a str],
    strict: bool,
    used: BTreeSet<String>,
}

impl<'a> KeyTable<'a> {
    fn new(items: &'a [RawItem], allowed: &'a [&'a str], strict: bool) -> Self {
        KeyTable { items, allowed, strict, used: BTreeSet::new() }
    }

    fn check_unknown(&self, warnings: &mut Vec<String>) -> Result<(), CliError> {
        for item in self.items {
            if !self.allowed.contains(&item.key.as_str()) {
                if self.strict {
                    return Err(CliError::UnknownKey { line: item.line, key: item.key.clone() });
                }
                warnings.push(format!("ignoring unknown key `{}` at line {}", item.key, item.line));
            }
        }
        Ok(())
    }

    fn single(&mut self, key: &str) -> Result<Option<&'a RawItem>, CliError> {
        let mut found = None;
        for item in self.items.iter().filter(|i| i.key == key) {
            if found.is_some() {
                return Err(CliError::ParseError {
                    line: item.line,
                    message: format!("duplicate key `{key}`"),
                });
            }
            found = Some(item);
        }
        self.used.insert(key.to_string());
        Ok(found)
    }

    fn all(&mut self, key: &str) -> Vec<&'a RawItem> {
        self.used.insert(key.to_string());
        self.items.iter().filter(|i| i.key == key).collect()
    }
}

fn parse_f64(item: &RawItem) -> Result<f64, CliError> {
    item.value.parse::<f64>().map_err(|_| CliError::ParseError {
        line: item.line,
        message: format!("`{}` is not a number", item.value),
    })
}

fn parse_usize(item: &RawItem) -> Result<usize, CliError> {
    item.value.parse::<usize>().map_err(|_| CliError::ParseError {
        line: item.line,
        message: format!("`{}` is not a nonnegative integer", item.value),
    })
}

fn parse_u32(item: &RawItem) -> Result<u32, CliError> {
    item.value.parse::<u32>().map_err(|_| CliError::ParseError {
        line: item.line,
        message: format!("`{}` is not a 32-bit integer", item.value),
    })
}

fn parse_i64(item: &RawItem) -> Result<i64, CliError> {
    item.value.parse::<i64>().map_err(|_| CliError::ParseError {
        line: item.line,
        message: format!("`{}` is not an integer", item.value),
    })
}

fn parse_bool(item: &RawItem) -> Result<bool, CliError> {
    match item.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(CliError::ParseError {
            line: item.line,
            message: format!("`{other}` is not true/false"),
        }),
    }
}

fn parse_f64_list(item: &RawItem) -> Result<Vec<f64>, CliError> {
    item.value
        .split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| CliError::ParseError {
                line: item.line,
                message: format!("`{}` is not a number list", item.value),
            })
        })
        .collect()
}

fn parse_usize_list(item: &RawItem) -> Result<Vec<usize>, CliError> {
    item.value
        .split(',')
        .map(|s| {
            s.trim().parse::<usize>().map_err(|_| CliError::ParseError {
                line: item.line,
                message: format!("`{}` is not an integer list", item.value),
            })
        })
        .collect()
}

fn parse_map_spec(item: &RawItem) -> Result<MapSpec, CliError> {
    let v = item.value.as_str();
    match v {
        "doubling" => return Ok(MapSpec::Doubling),
        "tripling" => return Ok(MapSpec::Tripling),
        _ => {}
    }
    if let Some(rest) = v.strip_prefix("affine:") {
        let mut branches = Vec::new();
        for quad in rest.split(';') {
            let nums: Vec<f64> = quad
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| CliError::ParseError {
                        line: item.line,
                        message: format!("bad branch quadruple `{quad}`"),
                    })
                })
                .collect::<Result<_, _>>()?;
            if nums.len() != 4 {
                return Err(CliError::ParseError {
                    line: item.line,
                    message: format!("branch needs 4 numbers (lo, hi, slope, intercept), got {}", nums.len()),
                });
            }
            branches.push([nums[0], nums[1], nums[2], nums[3]]);
        }
        // Surface partition violations at parse time with the line number.
        crate::model::build_map(&MapSpec::Affine(branches.clone())).map_err(|e| {
            CliError::ParseError { line: item.line, message: e.to_string() }
        })?;
        return Ok(MapSpec::Affine(branches));
    }
    Err(CliError::ParseError {
        line: item.line,
        message: format!("unknown map spec `{v}` (doubling | tripling | affine: ...)"),
    })
}

fn parse_driving_spec(item: &RawItem) -> Result<DrivingSpec, CliError> {
    let v = item.value.as_str();
    if v == "bernoulli" {
        return Ok(DrivingSpec::Bernoulli(None));
    }
    if v == "rotation" {
        return Ok(DrivingSpec::Rotation(None));
    }
    if let Some(rest) = v.strip_prefix("bernoulli:") {
        let probs = parse_f64_list(&RawItem {
            line: item.line,
            key: item.key.clone(),
            value: rest.trim().to_string(),
        })?;
        return Ok(DrivingSpec::Bernoulli(Some(probs)));
    }
    if let Some(rest) = v.strip_prefix("rotation:") {
        let parts: Vec<&str> = rest.split(';').collect();
        if parts.len() != 3 {
            return Err(CliError::ParseError {
                line: item.line,
                message: "rotation needs `alpha; boundaries; start`".into(),
            });
        }
        let alpha = parts[0].trim().parse::<f64>().map_err(|_| CliError::ParseError {
            line: item.line,
            message: "bad rotation number".into(),
        })?;
        let boundaries = parse_f64_list(&RawItem {
            line: item.line,
            key: item.key.clone(),
            value: parts[1].trim().to_string(),
        })?;
        let start = parts[2].trim().parse::<f64>().map_err(|_| CliError::ParseError {
            line: item.line,
            message: "bad rotation start point".into(),
        })?;
        return Ok(DrivingSpec::Rotation(Some((alpha, boundaries, start))));
    }
    Err(CliError::ParseError {
        line: item.line,
        message: format!("unknown driving spec `{v}`"),
    })
}

fn parse_obs_spec(item: &RawItem) -> Result<ObsSpec, CliError> {
    let v = item.value.as_str();
    if v == "cosine" {
        return Ok(ObsSpec::Cosine { k: 1 });
    }
    if let Some(rest) = v.strip_prefix("cosine:") {
        let k = rest.trim().parse::<u32>().map_err(|_| CliError::ParseError {
            line: item.line,
            message: "bad cosine frequency".into(),
        })?;
        return Ok(ObsSpec::Cosine { k });
    }
    if let Some(rest) = v.strip_prefix("indicator:") {
        let nums = parse_f64_list(&RawItem {
            line: item.line,
            key: item.key.clone(),
            value: rest.trim().to_string(),
        })?;
        if nums.len() != 2 {
            return Err(CliError::ParseError {
                line: item.line,
                message: "indicator needs `threshold, offset`".into(),
            });
        }
        return Ok(ObsSpec::Indicator { threshold: nums[0], offset: nums[1] });
    }
    Err(CliError::ParseError {
        line: item.line,
        message: format!("unknown observable `{v}` (cosine: k | indicator: threshold, offset)"),
    })
}

/// Parse a config. `expected_kind` comes from the CLI subcommand; a `kind`
/// key in `[experiment]`, when present, must agree. Unknown keys are fatal
/// in strict mode and collected as warnings otherwise.
pub fn parse_config(
    text: &str,
    expected_kind: Option<ExperimentKind>,
    strict: bool,
) -> Result<(ExperimentPlan, Vec<String>), CliError> {
    let mut warnings = Vec::new();
    let sections = split_sections(text, strict, &mut warnings)?;

    // [model]
    let mut model = KeyTable::new(&sections.model, &["map", "driving", "seed"], strict);
    model.check_unknown(&mut warnings)?;
    let map_items = model.all("map");
    if map_items.is_empty() {
        return Err(CliError::MissingRequired("map"));
    }
    let maps: Vec<MapSpec> =
        map_items.iter().map(|i| parse_map_spec(i)).collect::<Result<_, _>>()?;
    let driving = match model.single("driving")? {
        Some(item) => parse_driving_spec(item)?,
        None => DrivingSpec::Bernoulli(None),
    };
    let seed = match model.single("seed")? {
        Some(item) => item.value.parse::<u64>().map_err(|_| CliError::ParseError {
            line: item.line,
            message: "seed must be a 64-bit unsigned integer".into(),
        })?,
        None => return Err(CliError::MissingRequired("seed")),
    };

    // [discretization]
    let mut disc = KeyTable::new(&sections.discretization, &["n_cells"], strict);
    disc.check_unknown(&mut warnings)?;
    let n_cells = match disc.single("n_cells")? {
        Some(item) => {
            let n = parse_usize(item)?;
            if n < 2 || !n.is_power_of_two() {
                return Err(CliError::ParseError {
                    line: item.line,
                    message: "n_cells must be a power of two >= 2".into(),
                });
            }
            n
        }
        None => 1024,
    };

    // [observable]
    let mut obs = KeyTable::new(&sections.observable, &["kind", "centered"], strict);
    obs.check_unknown(&mut warnings)?;
    let observable = match obs.single("kind")? {
        Some(item) => parse_obs_spec(item)?,
        None => ObsSpec::Cosine { k: 1 },
    };
    let centered = match obs.single("centered")? {
        Some(item) => parse_bool(item)?,
        None => true,
    };

    // [experiment] — resolve the kind first.
    let kind_item = sections.experiment.iter().find(|i| i.key == "kind");
    let config_kind = match kind_item {
        Some(item) => Some(ExperimentKind::from_name(&item.value).ok_or(CliError::ParseError {
            line: item.line,
            message: format!("unknown experiment kind `{}`", item.value),
        })?),
        None => None,
    };
    let kind = match (expected_kind, config_kind) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::ParseError {
                line: kind_item.unwrap().line,
                message: format!(
                    "config kind `{}` conflicts with subcommand `{}`",
                    b.name(),
                    a.name()
                ),
            })
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(CliError::MissingRequired("kind")),
    };
    let params = parse_kind_params(kind, &sections.experiment, strict, &mut warnings)?;

    // [output]
    let mut out = KeyTable::new(
        &sections.output,
        &["dir", "workers", "plots", "dump_matrices"],
        strict,
    );
    out.check_unknown(&mut warnings)?;
    let out_dir = out.single("dir")?.map(|i| i.value.clone()).unwrap_or_else(|| "out".into());
    let workers = match out.single("workers")? {
        Some(item) => parse_usize(item)?.max(1),
        None => 1,
    };
    let plots = match out.single("plots")? {
        Some(item) => parse_bool(item)?,
        None => false,
    };
    let dump_matrices = match out.single("dump_matrices")? {
        Some(item) => parse_bool(item)?,
        None => false,
    };

    Ok((
        ExperimentPlan {
            maps,
            driving,
            seed,
            n_cells,
            observable,
            centered,
            kind,
            params,
            out_dir,
            workers,
            plots,
            dump_matrices,
        },
        warnings,
    ))
}

fn parse_kind_params(
    kind: ExperimentKind,
    items: &[RawItem],
    strict: bool,
    warnings: &mut Vec<String>,
) -> Result<KindParams, CliError> {
    let allowed: &[&str] = match kind {
        ExperimentKind::Density => &["kind", "t", "theta_re", "theta_im", "tol"],
        ExperimentKind::Lambda => &[
            "kind", "theta_max", "theta_steps", "n_orbit", "n_burn", "fd_step", "tol_d1",
            "tol_lambda0",
        ],
        ExperimentKind::Variance => &["kind", "j_max", "n_orbit", "tol_agree"],
        ExperimentKind::Ldp => &[
            "kind", "epsilons", "ns", "count", "theta_max", "theta_steps", "n_orbit", "n_burn",
            "tol_gap",
        ],
        ExperimentKind::Clt => {
            &["kind", "n", "count", "sigma2", "var_j_max", "var_orbit", "tol_ks", "tol_var"]
        }
        ExperimentKind::Lclt => &[
            "kind", "n", "count", "j_lo", "j_hi", "s_points", "s_span", "sigma2", "var_j_max",
            "var_orbit", "tol_sup", "override_aperiodicity",
        ],
        ExperimentKind::Aperiodicity => &[
            "kind", "t_min", "t_max", "t_points", "n_orbit", "n_burn", "fit_steps", "expect",
        ],
        ExperimentKind::Validate => &["kind", "horizon", "k_max"],
    };
    let mut table = KeyTable::new(items, allowed, strict);
    table.check_unknown(warnings)?;

    macro_rules! get {
        ($key:literal, $parser:ident, $default:expr) => {
            match table.single($key)? {
                Some(item) => $parser(item)?,
                None => $default,
            }
        };
    }

    let sigma2_of = |table: &mut KeyTable| -> Result<Sigma2Spec, CliError> {
        match table.single("sigma2")? {
            None => Ok(Sigma2Spec::Auto),
            Some(item) if item.value == "auto" => Ok(Sigma2Spec::Auto),
            Some(item) => Ok(Sigma2Spec::Forced(parse_f64(item)?)),
        }
    };

    Ok(match kind {
        ExperimentKind::Density => KindParams::Density {
            t: get!("t", parse_i64, 0),
            theta_re: get!("theta_re", parse_f64, 0.0),
            theta_im: get!("theta_im", parse_f64, 0.0),
            tol: get!("tol", parse_f64, 1e-10),
        },
        ExperimentKind::Lambda => KindParams::Lambda {
            theta_max: get!("theta_max", parse_f64, 0.3),
            theta_steps: get!("theta_steps", parse_usize, 25),
            n_orbit: get!("n_orbit", parse_u32, 20_000),
            n_burn: get!("n_burn", parse_u32, 512),
            fd_step: get!("fd_step", parse_f64, 1e-2),
            tol_d1: get!("tol_d1", parse_f64, 1e-3),
            tol_lambda0: get!("tol_lambda0", parse_f64, 1e-10),
        },
        ExperimentKind::Variance => KindParams::Variance {
            j_max: get!("j_max", parse_usize, 48),
            n_orbit: get!("n_orbit", parse_u32, 20_000),
            tol_agree: get!("tol_agree", parse_f64, 0.05),
        },
        ExperimentKind::Ldp => KindParams::Ldp {
            epsilons: get!("epsilons", parse_f64_list, vec![0.05, 0.1]),
            ns: get!("ns", parse_usize_list, vec![200, 400]),
            count: get!("count", parse_usize, 1_000_000),
            theta_max: get!("theta_max", parse_f64, 0.3),
            theta_steps: get!("theta_steps", parse_usize, 25),
            n_orbit: get!("n_orbit", parse_u32, 20_000),
            n_burn: get!("n_burn", parse_u32, 512),
            tol_gap: get!("tol_gap", parse_f64, 0.25),
        },
        ExperimentKind::Clt => KindParams::Clt {
            n: get!("n", parse_usize, 2000),
            count: get!("count", parse_usize, 100_000),
            sigma2: sigma2_of(&mut table)?,
            var_j_max: get!("var_j_max", parse_usize, 48),
            var_orbit: get!("var_orbit", parse_u32, 2000),
            tol_ks: get!("tol_ks", parse_f64, 0.02),
            tol_var: get!("tol_var", parse_f64, 0.03),
        },
        ExperimentKind::Lclt => KindParams::Lclt {
            n: get!("n", parse_usize, 10_000),
            count: get!("count", parse_usize, 1_000_000),
            j_lo: get!("j_lo", parse_f64, -0.25),
            j_hi: get!("j_hi", parse_f64, 0.25),
            s_points: get!("s_points", parse_usize, 25),
            s_span: get!("s_span", parse_f64, 3.0),
            sigma2: sigma2_of(&mut table)?,
            var_j_max: get!("var_j_max", parse_usize, 48),
            var_orbit: get!("var_orbit", parse_u32, 2000),
            tol_sup: get!("tol_sup", parse_f64, 0.05),
            override_aperiodicity: get!("override_aperiodicity", parse_bool, false),
        },
        ExperimentKind::Aperiodicity => KindParams::Aperiodicity {
            t_min: get!("t_min", parse_f64, 0.5),
            t_max: get!("t_max", parse_f64, PI),
            t_points: get!("t_points", parse_usize, 20),
            n_orbit: get!("n_orbit", parse_u32, 20_000),
            n_burn: get!("n_burn", parse_u32, 512),
            fit_steps: get!("fit_steps", parse_u32, 48),
            expect: match table.single("expect")? {
                None => Expectation::Any,
                Some(item) => match item.value.as_str() {
                    "any" => Expectation::Any,
                    "aperiodic" => Expectation::Aperiodic,
                    "periodic" => Expectation::Periodic,
                    other => {
                        return Err(CliError::ParseError {
                            line: item.line,
                            message: format!("expect must be any|aperiodic|periodic, got `{other}`"),
                        })
                    }
                },
            },
        },
        ExperimentKind::Validate => KindParams::Validate {
            horizon: get!("horizon", parse_usize, 64),
            k_max: get!("k_max", parse_u32, 12),
        },
    })
}

/// Canonical INI serialization; `parse(serialize(plan))` reproduces the
/// plan field for field.
pub fn serialize_plan(plan: &ExperimentPlan) -> String {
    let mut s = String::new();
    s.push_str("[model]\n");
    for m in &plan.maps {
        match m {
            MapSpec::Doubling => s.push_str("map = doubling\n"),
            MapSpec::Tripling => s.push_str("map = tripling\n"),
            MapSpec::Affine(branches) => {
                let body = branches
                    .iter()
                    .map(|b| format!("{},{},{},{}", b[0], b[1], b[2], b[3]))
                    .collect::<Vec<_>>()
                    .join("; ");
                s.push_str(&format!("map = affine: {body}\n"));
            }
        }
    }
    match &plan.driving {
        DrivingSpec::Bernoulli(None) => s.push_str("driving = bernoulli\n"),
        DrivingSpec::Bernoulli(Some(p)) => {
            let body = p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
            s.push_str(&format!("driving = bernoulli: {body}\n"));
        }
        DrivingSpec::Rotation(None) => s.push_str("driving = rotation\n"),
        DrivingSpec::Rotation(Some((alpha, bounds, start))) => {
            let body = bounds.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
            s.push_str(&format!("driving = rotation: {alpha}; {body}; {start}\n"));
        }
    }
    s.push_str(&format!("seed = {}\n\n", plan.seed));

    s.push_str("[discretization]\n");
    s.push_str(&format!("n_cells = {}\n\n", plan.n_cells));

    s.push_str("[observable]\n");
    match plan.observable {
        ObsSpec::Cosine { k } => s.push_str(&format!("kind = cosine: {k}\n")),
        ObsSpec::Indicator { threshold, offset } => {
            s.push_str(&format!("kind = indicator: {threshold}, {offset}\n"))
        }
    }
    s.push_str(&format!("centered = {}\n\n", plan.centered));

    s.push_str("[experiment]\n");
    s.push_str(&format!("kind = {}\n", plan.kind.name()));
    match &plan.params {
        KindParams::Density { t, theta_re, theta_im, tol } => {
            s.push_str(&format!("t = {t}\ntheta_re = {theta_re}\ntheta_im = {theta_im}\ntol = {tol}\n"));
        }
        KindParams::Lambda { theta_max, theta_steps, n_orbit, n_burn, fd_step, tol_d1, tol_lambda0 } => {
            s.push_str(&format!(
                "theta_max = {theta_max}\ntheta_steps = {theta_steps}\nn_orbit = {n_orbit}\nn_burn = {n_burn}\nfd_step = {fd_step}\ntol_d1 = {tol_d1}\ntol_lambda0 = {tol_lambda0}\n"
            ));
        }
        KindParams::Variance { j_max, n_orbit, tol_agree } => {
            s.push_str(&format!("j_max = {j_max}\nn_orbit = {n_orbit}\ntol_agree = {tol_agree}\n"));
        }
        KindParams::Ldp { epsilons, ns, count, theta_max, theta_steps, n_orbit, n_burn, tol_gap } => {
            let eps = epsilons.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
            let nss = ns.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
            s.push_str(&format!(
                "epsilons = {eps}\nns = {nss}\ncount = {count}\ntheta_max = {theta_max}\ntheta_steps = {theta_steps}\nn_orbit = {n_orbit}\nn_burn = {n_burn}\ntol_gap = {tol_gap}\n"
            ));
        }
        KindParams::Clt { n, count, sigma2, var_j_max, var_orbit, tol_ks, tol_var } => {
            s.push_str(&format!("n = {n}\ncount = {count}\n"));
            match sigma2 {
                Sigma2Spec::Auto => s.push_str("sigma2 = auto\n"),
                Sigma2Spec::Forced(v) => s.push_str(&format!("sigma2 = {v}\n")),
            }
            s.push_str(&format!(
                "var_j_max = {var_j_max}\nvar_orbit = {var_orbit}\ntol_ks = {tol_ks}\ntol_var = {tol_var}\n"
            ));
        }
        KindParams::Lclt {
            n, count, j_lo, j_hi, s_points, s_span, sigma2, var_j_max, var_orbit, tol_sup,
            override_aperiodicity,
        } => {
            s.push_str(&format!(
                "n = {n}\ncount = {count}\nj_lo = {j_lo}\nj_hi = {j_hi}\ns_points = {s_points}\ns_span = {s_span}\n"
            ));
            match sigma2 {
                Sigma2Spec::Auto => s.push_str("sigma2 = auto\n"),
                Sigma2Spec::Forced(v) => s.push_str(&format!("sigma2 = {v}\n")),
            }
            s.push_str(&format!(
                "var_j_max = {var_j_max}\nvar_orbit = {var_orbit}\ntol_sup = {tol_sup}\noverride_aperiodicity = {override_aperiodicity}\n"
            ));
        }
        KindParams::Aperiodicity { t_min, t_max, t_points, n_orbit, n_burn, fit_steps, expect } => {
            let e = match expect {
                Expectation::Any => "any",
                Expectation::Aperiodic => "aperiodic",
                Expectation::Periodic => "periodic",
            };
            s.push_str(&format!(
                "t_min = {t_min}\nt_max = {t_max}\nt_points = {t_points}\nn_orbit = {n_orbit}\nn_burn = {n_burn}\nfit_steps = {fit_steps}\nexpect = {e}\n"
            ));
        }
        KindParams::Validate { horizon, k_max } => {
            s.push_str(&format!("horizon = {horizon}\nk_max = {k_max}\n"));
        }
    }
    s.push('\n');

    s.push_str("[output]\n");
    s.push_str(&format!("dir = {}\n", plan.out_dir));
    s.push_str(&format!("workers = {}\n", plan.workers));
    s.push_str(&format!("plots = {}\n", plan.plots));
    s.push_str(&format!("dump_matrices = {}\n", plan.dump_matrices));
    s
}

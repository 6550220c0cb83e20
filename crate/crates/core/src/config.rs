//! Run configuration in a plain `key = value` format.
//!
//! One key per line, `#` starts a comment. Absent keys take the defaults of
//! [`SolverConfig`]. Exactly one mesh source is required: either
//! `mesh.nx`/`mesh.ny` for a built-in rectangle or `mesh.msh_path`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mesh::{generate_rectangle, load_msh, Mesh, Point, Side, SideTags};
use crate::outer::{Epsilon, FrictionBound, LambdaStepMode, SolverConfig};

#[derive(Clone, Debug, PartialEq)]
pub enum MeshSource {
    Rectangle {
        nx: usize,
        ny: usize,
        width: f64,
        height: f64,
        friction_sides: Vec<Side>,
    },
    /// Relative paths are resolved against the config file's directory.
    Msh(PathBuf),
}

impl MeshSource {
    pub fn build(&self) -> Result<Mesh> {
        match self {
            MeshSource::Rectangle {
                nx,
                ny,
                width,
                height,
                friction_sides,
            } => generate_rectangle(*nx, *ny, *width, *height, SideTags::friction_on(friction_sides)),
            MeshSource::Msh(path) => load_msh(path),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ForcePreset {
    Zero,
    Constant([f64; 2]),
    /// Tangential to `side` with magnitude `c` on it, decaying linearly to
    /// zero at the opposite side.
    Shear {
        side: Side,
        magnitude: f64,
    },
}

impl ForcePreset {
    /// Body force on `mesh`; shear uses the mesh bounding box.
    pub fn field(&self, mesh: &Mesh) -> impl Fn(Point) -> [f64; 2] {
        let preset = *self;
        let (lo, hi) = mesh.bounding_box();
        move |x: Point| match preset {
            ForcePreset::Zero => [0.0, 0.0],
            ForcePreset::Constant(c) => c,
            ForcePreset::Shear { side, magnitude } => {
                let (d, extent, dir) = match side {
                    Side::Bottom => (x[1] - lo[1], hi[1] - lo[1], [1.0, 0.0]),
                    Side::Top => (hi[1] - x[1], hi[1] - lo[1], [1.0, 0.0]),
                    Side::Left => (x[0] - lo[0], hi[0] - lo[0], [0.0, 1.0]),
                    Side::Right => (hi[0] - x[0], hi[0] - lo[0], [0.0, 1.0]),
                };
                let s = magnitude * (1.0 - d / extent).max(0.0);
                [s * dir[0], s * dir[1]]
            }
        }
    }

    fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if s == "zero" {
            return Some(ForcePreset::Zero);
        }
        let args = |name: &str| -> Option<Vec<String>> {
            let inner = s.strip_prefix(name)?.trim().strip_prefix('(')?.strip_suffix(')')?;
            Some(inner.split(',').map(|a| a.trim().to_string()).collect())
        };
        if let Some(a) = args("constant") {
            if let [cx, cy] = a.as_slice() {
                return Some(ForcePreset::Constant([parse_f64(cx)?, parse_f64(cy)?]));
            }
        }
        if let Some(a) = args("shear") {
            if let [side, c] = a.as_slice() {
                return Some(ForcePreset::Shear {
                    side: Side::parse(side)?,
                    magnitude: parse_f64(c)?,
                });
            }
        }
        None
    }

    fn emit(&self) -> String {
        match self {
            ForcePreset::Zero => "zero".into(),
            ForcePreset::Constant([cx, cy]) => format!("constant({cx:e}, {cy:e})"),
            ForcePreset::Shear { side, magnitude } => format!("shear({}, {magnitude:e})", side.name()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutputFormats {
    pub vtk: bool,
    pub csv: bool,
}

impl Default for OutputFormats {
    fn default() -> Self {
        OutputFormats { vtk: true, csv: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub force: ForcePreset,
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
    pub formats: OutputFormats,
}

fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads and parses a config file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config_str(&text)?;
    if let MeshSource::Msh(p) = &mut cfg.mesh {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    Ok(cfg)
}

#[derive(Default)]
struct Partial {
    nx: Option<(usize, usize)>,
    ny: Option<(usize, usize)>,
    width: Option<f64>,
    height: Option<f64>,
    msh: Option<(usize, PathBuf)>,
    sides: Option<(usize, Vec<Side>)>,
    schedule: bool,
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut solver = SolverConfig::default();
    let mut force = ForcePreset::Zero;
    let mut output_dir = PathBuf::from("output");
    let mut formats = OutputFormats::default();
    let mut part = Partial::default();
    let mut eps_value = match solver.epsilon {
        Epsilon::Fixed(e) => e,
        Epsilon::Schedule { initial } => initial,
    };
    let mut seen: Vec<String> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |key: &str, message: String| Error::Config {
            line,
            key: key.to_string(),
            message,
        };
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(content, "expected `key = value`".into()))?;
        if seen.iter().any(|k| k == key) {
            return Err(err(key, "duplicate key".into()));
        }
        seen.push(key.to_string());

        let bad_value = || err(key, format!("cannot parse value `{value}`"));
        let float = || parse_f64(value).ok_or_else(bad_value);
        let count = || value.parse::<usize>().map_err(|_| bad_value());
        let positive = |v: f64| {
            if v > 0.0 {
                Ok(v)
            } else {
                Err(err(key, format!("{key} must be > 0, got {v}")))
            }
        };
        let non_negative = |v: f64| {
            if v >= 0.0 {
                Ok(v)
            } else {
                Err(err(key, format!("{key} must be >= 0, got {v}")))
            }
        };
        let at_least_one = |v: usize| {
            if v >= 1 {
                Ok(v)
            } else {
                Err(err(key, format!("{key} must be >= 1")))
            }
        };

        match key {
            "mesh.nx" => part.nx = Some((line, at_least_one(count()?)?)),
            "mesh.ny" => part.ny = Some((line, at_least_one(count()?)?)),
            "mesh.width" => part.width = Some(positive(float()?)?),
            "mesh.height" => part.height = Some(positive(float()?)?),
            "mesh.msh_path" => {
                if value.is_empty() {
                    return Err(bad_value());
                }
                part.msh = Some((line, PathBuf::from(value)));
            }
            "bc.friction_sides" => {
                let mut sides = Vec::new();
                if value != "none" {
                    for s in value.split(',') {
                        let side =
                            Side::parse(s.trim()).ok_or_else(|| err(key, format!("unknown side `{}`", s.trim())))?;
                        if !sides.contains(&side) {
                            sides.push(side);
                        }
                    }
                }
                part.sides = Some((line, sides));
            }
            "force.preset" => force = ForcePreset::parse(value).ok_or_else(bad_value)?,
            "nu" => solver.nu = positive(float()?)?,
            "rho" => solver.rho = positive(float()?)?,
            "epsilon" => eps_value = non_negative(float()?)?,
            "epsilon_schedule" => {
                part.schedule = match value {
                    "off" => false,
                    "on" => true,
                    _ => return Err(bad_value()),
                }
            }
            "xi" => solver.xi = FrictionBound::Constant(non_negative(float()?)?),
            "tau_p" => {
                let v = float()?;
                if v == 0.0 {
                    return Err(err(key, "tau_p must be nonzero".into()));
                }
                solver.tau_p = v;
            }
            "inner_tol" => solver.inner_tol = positive(float()?)?,
            "outer_tol" => solver.outer_tol = positive(float()?)?,
            "div_tol" => solver.div_tol = positive(float()?)?,
            "max_inner" => solver.max_inner = at_least_one(count()?)?,
            "max_outer" => solver.max_outer = at_least_one(count()?)?,
            "lambda_step_mode" => solver.lambda_step_mode = LambdaStepMode::parse(value).ok_or_else(bad_value)?,
            "warm_start" => solver.warm_start = value.parse::<bool>().map_err(|_| bad_value())?,
            "cg_tol" => {
                let v = float()?;
                if !(v > 0.0 && v < 1.0) {
                    return Err(err(key, format!("cg_tol must lie in (0, 1), got {v}")));
                }
                solver.cg_tol = v;
            }
            "cg_max_iter" => solver.cg_max_iter = Some(at_least_one(count()?)?),
            "output.dir" => {
                if value.is_empty() {
                    return Err(bad_value());
                }
                output_dir = PathBuf::from(value);
            }
            "output.formats" => {
                let mut f = OutputFormats { vtk: false, csv: false };
                if value != "none" {
                    for s in value.split(',') {
                        match s.trim() {
                            "vtk" => f.vtk = true,
                            "csv" => f.csv = true,
                            other => return Err(err(key, format!("unknown format `{other}`"))),
                        }
                    }
                }
                formats = f;
            }
            _ => return Err(err(key, "unknown key".into())),
        }
    }

    if part.schedule {
        if !(eps_value > 0.0) {
            let line = text
                .lines()
                .position(|l| l.trim_start().starts_with("epsilon"))
                .map_or(0, |i| i + 1);
            return Err(Error::Config {
                line,
                key: "epsilon".into(),
                message: "epsilon schedule needs epsilon > 0".into(),
            });
        }
        solver.epsilon = Epsilon::Schedule { initial: eps_value };
    } else {
        solver.epsilon = Epsilon::Fixed(eps_value);
    }

    let mesh = match (part.msh, part.nx, part.ny) {
        (Some((line, _)), Some(_), _) | (Some((line, _)), _, Some(_)) => {
            return Err(Error::Config {
                line,
                key: "mesh.msh_path".into(),
                message: "give either mesh.msh_path or mesh.nx/mesh.ny, not both".into(),
            })
        }
        (Some((line, path)), None, None) => {
            if let Some((sline, _)) = part.sides {
                return Err(Error::Config {
                    line: sline,
                    key: "bc.friction_sides".into(),
                    message: format!("boundary tags come from the msh file given on line {line}"),
                });
            }
            MeshSource::Msh(path)
        }
        (None, Some((_, nx)), Some((_, ny))) => MeshSource::Rectangle {
            nx,
            ny,
            width: part.width.unwrap_or(1.0),
            height: part.height.unwrap_or(1.0),
            friction_sides: part.sides.map(|s| s.1).unwrap_or_default(),
        },
        (None, Some((line, _)), None) => return Err(missing("mesh.ny", line)),
        (None, None, Some((line, _))) => return Err(missing("mesh.nx", line)),
        (None, None, None) => return Err(missing("mesh.nx", text.lines().count())),
    };

    let cfg = RunConfig {
        mesh,
        force,
        solver,
        output_dir,
        formats,
    };
    cfg.solver.validate()?;
    Ok(cfg)
}

fn missing(key: &str, line: usize) -> Error {
    Error::Config {
        line,
        key: key.into(),
        message: "missing mesh source (mesh.nx and mesh.ny, or mesh.msh_path)".into(),
    }
}

/// Writes every key; the output reparses to an equal config.
pub fn emit_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    match &cfg.mesh {
        MeshSource::Rectangle {
            nx,
            ny,
            width,
            height,
            friction_sides,
        } => {
            put("mesh.nx", nx.to_string());
            put("mesh.ny", ny.to_string());
            put("mesh.width", format!("{width:e}"));
            put("mesh.height", format!("{height:e}"));
            let sides = if friction_sides.is_empty() {
                "none".to_string()
            } else {
                friction_sides.iter().map(|s| s.name()).collect::<Vec<_>>().join(",")
            };
            put("bc.friction_sides", sides);
        }
        MeshSource::Msh(p) => put("mesh.msh_path", p.display().to_string()),
    }
    put("force.preset", cfg.force.emit());
    let sv = &cfg.solver;
    put("nu", format!("{:e}", sv.nu));
    put("rho", format!("{:e}", sv.rho));
    let (eps, sched) = match sv.epsilon {
        Epsilon::Fixed(e) => (e, "off"),
        Epsilon::Schedule { initial } => (initial, "on"),
    };
    put("epsilon", format!("{eps:e}"));
    put("epsilon_schedule", sched.into());
    // per-node bounds have no config syntax
    if let FrictionBound::Constant(xi) = sv.xi {
        put("xi", format!("{xi:e}"));
    }
    put("tau_p", format!("{:e}", sv.tau_p));
    put("inner_tol", format!("{:e}", sv.inner_tol));
    put("outer_tol", format!("{:e}", sv.outer_tol));
    put("div_tol", format!("{:e}", sv.div_tol));
    put("max_inner", sv.max_inner.to_string());
    put("max_outer", sv.max_outer.to_string());
    put("lambda_step_mode", sv.lambda_step_mode.name().into());
    put("warm_start", sv.warm_start.to_string());
    put("cg_tol", format!("{:e}", sv.cg_tol));
    if let Some(n) = sv.cg_max_iter {
        put("cg_max_iter", n.to_string());
    }
    put("output.dir", cfg.output_dir.display().to_string());
    let mut f = Vec::new();
    if cfg.formats.vtk {
        f.push("vtk");
    }
    if cfg.formats.csv {
        f.push("csv");
    }
    put("output.formats", if f.is_empty() { "none".into() } else { f.join(",") });
    s
}

impl RunConfig {
    /// Side tags of a built-in rectangle; `None` for msh input.
    pub fn side_tags(&self) -> Option<SideTags> {
        match &self.mesh {
            MeshSource::Rectangle { friction_sides, .. } => Some(SideTags::friction_on(friction_sides)),
            MeshSource::Msh(_) => None,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mesh: MeshSource::Rectangle {
                nx: 8,
                ny: 8,
                width: 1.0,
                height: 1.0,
                friction_sides: Vec::new(),
            },
            force: ForcePreset::Zero,
            solver: SolverConfig::default(),
            output_dir: PathBuf::from("output"),
            formats: OutputFormats::default(),
        }
    }
}

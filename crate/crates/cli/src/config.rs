//! Run configuration: a JSON file mirroring the flags, merged with the
//! flags (flags win), then resolved into concrete values per command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use surfspec::geometry::StandardSurface;
use surfspec::surgery::{AttachKind, BaseSurface};

use crate::CliError;

/// Either a JSON array of numbers or the flag syntax: a comma list
/// (`0.08,0.04,0.02`) or an inclusive range `start:end:count`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumList {
    List(Vec<f64>),
    Text(String),
}

impl NumList {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match self {
            NumList::List(v) => Ok(v.clone()),
            NumList::Text(s) => parse_numbers(s),
        }
    }
}

pub fn parse_numbers(s: &str) -> Result<Vec<f64>, CliError> {
    let num = |t: &str| -> Result<f64, CliError> {
        let x: f64 = t
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("`{t}` is not a number")))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(CliError::Usage(format!("`{t}` is not finite")))
        }
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.len() {
        1 => s.split(',').filter(|t| !t.trim().is_empty()).map(num).collect(),
        3 => {
            let (a, b) = (num(parts[0])?, num(parts[1])?);
            let n: usize = parts[2]
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("range count `{}` is not an integer", parts[2])))?;
            match n {
                0 => Err(CliError::Usage("range count must be positive".into())),
                1 => Ok(vec![a]),
                // rounded so that 0.1:0.5:9 gives 0.15, not 0.15000000000000002
                _ => Ok((0..n)
                    .map(|i| {
                        let x = a + (b - a) * i as f64 / (n - 1) as f64;
                        format!("{x:.12e}").parse().unwrap()
                    })
                    .collect()),
            }
        }
        _ => Err(CliError::Usage(format!("`{s}` is neither a list nor start:end:count"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OnError {
    /// Record failed sweep points and exit 0.
    Record,
    /// Exit 3 if any sweep point failed.
    Fail,
}

/// Everything a run can be told, all optional so that a file and the flags
/// can each supply a part.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub surface: Option<String>,
    pub attach: Option<AttachKind>,
    pub eps: Option<NumList>,
    pub h: Option<NumList>,
    pub k: Option<usize>,
    pub res: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub separation: Option<f64>,
    pub grid: Option<usize>,
    pub iterations: Option<usize>,
    pub suite: Option<String>,
    pub only: Option<Vec<usize>>,
    pub on_error: Option<OnError>,
    pub certificate: Option<bool>,
    pub resume: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Fields set in `flags` replace those in `self`.
    pub fn overridden_by(self, flags: RunConfig) -> RunConfig {
        RunConfig {
            command: flags.command.or(self.command),
            surface: flags.surface.or(self.surface),
            attach: flags.attach.or(self.attach),
            eps: flags.eps.or(self.eps),
            h: flags.h.or(self.h),
            k: flags.k.or(self.k),
            res: flags.res.or(self.res),
            tol: flags.tol.or(self.tol),
            seed: flags.seed.or(self.seed),
            out: flags.out.or(self.out),
            jobs: flags.jobs.or(self.jobs),
            separation: flags.separation.or(self.separation),
            grid: flags.grid.or(self.grid),
            iterations: flags.iterations.or(self.iterations),
            suite: flags.suite.or(self.suite),
            only: flags.only.or(self.only),
            on_error: flags.on_error.or(self.on_error),
            certificate: flags.certificate.or(self.certificate),
            resume: flags.resume.or(self.resume),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Mesh,
    Spectrum,
    Sweep,
    Heightscan,
    Maximize,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Mesh => "mesh",
            Command::Spectrum => "spectrum",
            Command::Sweep => "sweep",
            Command::Heightscan => "heightscan",
            Command::Maximize => "maximize",
            Command::Verify => "verify",
        }
    }

    fn parse(s: &str) -> Result<Command, CliError> {
        Ok(match s {
            "mesh" => Command::Mesh,
            "spectrum" => Command::Spectrum,
            "sweep" => Command::Sweep,
            "heightscan" => Command::Heightscan,
            "maximize" => Command::Maximize,
            "verify" => Command::Verify,
            _ => return Err(CliError::Usage(format!("unknown command `{s}`"))),
        })
    }
}

/// A parsed `--surface` value.
#[derive(Clone, Debug, PartialEq)]
pub enum SurfaceSpec {
    Standard(StandardSurface),
    File(PathBuf),
}

impl SurfaceSpec {
    /// `sphere`, `rp2`, `klein[:W,H]`, `flat-torus:equilateral[:AREA]`,
    /// `flat-torus:square[:SIDE]`, `flat-torus:A1,A2,B1,B2` or `file:PATH`
    /// (`.json` mesh document or `.off`).
    pub fn parse(s: &str) -> Result<SurfaceSpec, CliError> {
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let bad = || CliError::Usage(format!("unrecognized surface `{s}`"));
        let positive = |t: &str| -> Result<f64, CliError> {
            match t.trim().parse::<f64>() {
                Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
                _ => Err(CliError::Usage(format!("`{t}` in surface `{s}` is not a positive number"))),
            }
        };
        let surface = match (head, rest) {
            ("sphere" | "round-sphere", None) => StandardSurface::RoundSphere,
            ("rp2" | "projective-plane", None) => StandardSurface::ProjectivePlane,
            ("klein" | "klein-bottle", None) => StandardSurface::FlatKleinBottle { width: 1.0, height: 1.0 },
            ("klein" | "klein-bottle", Some(r)) => {
                let (w, h) = r.split_once(',').ok_or_else(bad)?;
                StandardSurface::FlatKleinBottle {
                    width: positive(w)?,
                    height: positive(h)?,
                }
            }
            ("flat-torus", Some(r)) => {
                let (shape, size) = match r.split_once(':') {
                    Some((a, b)) => (a, Some(b)),
                    None => (r, None),
                };
                match shape {
                    "equilateral" => StandardSurface::equilateral_torus(size.map_or(Ok(1.0), positive)?),
                    "square" => StandardSurface::square_torus(size.map_or(Ok(1.0), positive)?),
                    _ if size.is_none() => {
                        let v = parse_numbers(shape)?;
                        if v.len() != 4 {
                            return Err(bad());
                        }
                        let basis = [[v[0], v[1]], [v[2], v[3]]];
                        if (v[0] * v[3] - v[1] * v[2]).abs() < 1e-12 {
                            return Err(CliError::Usage(format!("lattice basis in `{s}` is degenerate")));
                        }
                        StandardSurface::FlatTorus { basis }
                    }
                    _ => return Err(bad()),
                }
            }
            ("file", Some(p)) => return Ok(SurfaceSpec::File(PathBuf::from(p))),
            _ => return Err(bad()),
        };
        Ok(SurfaceSpec::Standard(surface))
    }

    /// The surgery base, if this surface can be one.
    pub fn base(&self) -> Result<BaseSurface, CliError> {
        match self {
            SurfaceSpec::Standard(StandardSurface::RoundSphere) => Ok(BaseSurface::RoundSphere),
            SurfaceSpec::Standard(StandardSurface::FlatTorus { basis }) => Ok(BaseSurface::FlatTorus { basis: *basis }),
            _ => Err(CliError::Usage(
                "surgery needs a round sphere or a flat torus as the base surface".into(),
            )),
        }
    }

    fn is_sphere_like(&self) -> bool {
        matches!(
            self,
            SurfaceSpec::Standard(StandardSurface::RoundSphere | StandardSurface::ProjectivePlane)
        )
    }
}

/// The configuration actually run, with every default filled in. Its JSON
/// is a valid config file, and its hash identifies the results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub command: String,
    pub surface: String,
    pub attach: Option<AttachKind>,
    pub eps: Vec<f64>,
    pub h: Vec<f64>,
    pub k: usize,
    pub res: usize,
    pub tol: f64,
    pub seed: u64,
    pub separation: f64,
    pub grid: usize,
    pub iterations: usize,
    pub suite: String,
    pub only: Option<Vec<usize>>,
    pub on_error: OnError,
    pub certificate: bool,
    pub resume: bool,
    /// Where files go; not part of the hash.
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub jobs: Option<usize>,
}

impl Resolved {
    pub fn new(config: RunConfig) -> Result<Resolved, CliError> {
        let command = Command::parse(config.command.as_deref().unwrap_or(""))?;
        let surface = config.surface.unwrap_or_else(|| "flat-torus:equilateral".into());
        let parsed = SurfaceSpec::parse(&surface)?;
        let attach = config.attach;

        let default_eps: &[f64] = match command {
            Command::Sweep => &[0.08, 0.04, 0.02],
            _ => &[0.02],
        };
        let eps = match &config.eps {
            Some(l) => l.values()?,
            None => default_eps.to_vec(),
        };
        if eps.is_empty() || eps.iter().any(|&e| e <= 0.0) {
            return Err(CliError::Usage("--eps needs positive values".into()));
        }
        let h = match &config.h {
            Some(l) => l.values()?,
            None => match command {
                Command::Sweep => vec![0.15, 0.3, 0.45],
                // the bracket around the crossing height of the base value
                Command::Heightscan => {
                    let base = parsed.base()?;
                    let kind = attach.unwrap_or(AttachKind::CrossCap).model();
                    let hs = surfspec::analytic::crossing_height(kind, base.exact_lambda1());
                    vec![hs / 1.5f64.sqrt(), hs * 1.5f64.sqrt()]
                }
                _ => vec![0.3],
            },
        };
        if h.is_empty() || h.iter().any(|&x| x <= 0.0) {
            return Err(CliError::Usage("--h needs positive values".into()));
        }

        let k = config.k.unwrap_or(match command {
            Command::Spectrum => 6,
            Command::Sweep => 4,
            Command::Heightscan => 8,
            _ => 10,
        });
        let res = config.res.unwrap_or(match (attach, parsed.is_sphere_like()) {
            (Some(_), _) => 32,
            (None, true) => 16,
            (None, false) => 64,
        });
        let tol = config.tol.unwrap_or(1e-10);
        if !(tol > 0.0 && tol < 1.0) {
            return Err(CliError::Usage("--tol must lie in (0, 1)".into()));
        }
        let separation = config.separation.unwrap_or(0.5);
        if !(separation > 0.0 && separation < 1.0) {
            return Err(CliError::Usage("--separation must lie in (0, 1)".into()));
        }
        if config.jobs == Some(0) {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        // a range given to heightscan is the bracket plus the grid size
        let grid = config.grid.unwrap_or(match (&config.h, command) {
            (Some(NumList::Text(s)), Command::Heightscan) if s.contains(':') => h.len(),
            _ => 9,
        });
        Ok(Resolved {
            command: command.name().into(),
            surface,
            attach,
            eps,
            h,
            k,
            res,
            tol,
            seed: config.seed.unwrap_or(0x5eed),
            separation,
            grid,
            iterations: config.iterations.unwrap_or(50),
            suite: config.suite.unwrap_or_else(|| "paper".into()),
            only: config.only,
            on_error: config.on_error.unwrap_or(OnError::Record),
            certificate: config.certificate.unwrap_or(false),
            resume: config.resume.unwrap_or(false),
            out: config.out.unwrap_or_else(|| PathBuf::from("out")),
            jobs: config.jobs,
        })
    }

    pub fn command(&self) -> Command {
        Command::parse(&self.command).expect("resolved command is valid")
    }

    pub fn surface(&self) -> SurfaceSpec {
        SurfaceSpec::parse(&self.surface).expect("resolved surface is valid")
    }

    /// Hex SHA-256 of the canonical JSON of this config.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn eigen(&self) -> surfspec::spectral::EigenOptions {
        surfspec::spectral::EigenOptions {
            tolerance: self.tol,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_lists() {
        assert_eq!(parse_numbers("0.1:0.5:5").unwrap().len(), 5);
        assert_eq!(parse_numbers("0.08,0.04,0.02").unwrap(), vec![0.08, 0.04, 0.02]);
        assert!(parse_numbers("0.1:0.5").is_err());
        assert!(parse_numbers("a,b").is_err());
    }

    #[test]
    fn surfaces() {
        assert!(matches!(SurfaceSpec::parse("sphere").unwrap(), SurfaceSpec::Standard(StandardSurface::RoundSphere)));
        assert!(SurfaceSpec::parse("flat-torus:equilateral").is_ok());
        assert!(SurfaceSpec::parse("flat-torus:square:6.283").is_ok());
        assert!(SurfaceSpec::parse("flat-torus:1,0,0.5,0.9").is_ok());
        assert!(SurfaceSpec::parse("flat-torus:1,0,2,0").is_err());
        assert!(SurfaceSpec::parse("donut").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = RunConfig {
            k: Some(3),
            res: Some(10),
            ..Default::default()
        };
        let flags = RunConfig {
            k: Some(7),
            ..Default::default()
        };
        let merged = file.overridden_by(flags);
        assert_eq!((merged.k, merged.res), (Some(7), Some(10)));
    }
}

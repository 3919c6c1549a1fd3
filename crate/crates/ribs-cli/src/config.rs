//! Experiment configuration: defaults per experiment kind, overridden first
//! by a flat `key = value` config file, then by command-line flags.
//!
//! The resolved configuration is echoed into the output directory as
//! `manifest.txt`, in the same format the parser reads, so any run can be
//! repeated with `--config <dir>/manifest.txt`.

use std::fmt;
use std::path::{Path, PathBuf};

use ribs::hydro::{noise_tau, ReconMethod};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Toy,
    Schrodinger,
    Bounds,
    Hydro,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Toy => "toy",
            Kind::Schrodinger => "schrodinger",
            Kind::Bounds => "bounds",
            Kind::Hydro => "hydro",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        match s {
            "toy" => Some(Kind::Toy),
            "schrodinger" => Some(Kind::Schrodinger),
            "bounds" => Some(Kind::Bounds),
            "hydro" => Some(Kind::Hydro),
            _ => None,
        }
    }
}

/// Inversion method selector: `ibs-K` sums the truncated inverse series,
/// `gn` and `ch` are the order-1 and order-2 restarts, `ribs-K` restarts at
/// an arbitrary order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Ibs(usize),
    Gn,
    Ch,
    Ribs(usize),
}

impl Method {
    pub fn parse(s: &str) -> Result<Self, String> {
        if s == "gn" {
            return Ok(Method::Gn);
        }
        if s == "ch" {
            return Ok(Method::Ch);
        }
        let order = |rest: &str, what: &str| {
            rest.parse::<usize>()
                .ok()
                .filter(|&k| k >= 1)
                .ok_or_else(|| format!("{what} needs a positive order, got {s:?}"))
        };
        if let Some(rest) = s.strip_prefix("ibs-") {
            return Ok(Method::Ibs(order(rest, "ibs-K")?));
        }
        if let Some(rest) = s.strip_prefix("ribs-") {
            return Ok(Method::Ribs(order(rest, "ribs-K")?));
        }
        Err(format!("unknown method {s:?}; expected ibs-K, gn, ch, or ribs-K"))
    }

    pub fn to_recon(self, iterations: usize) -> ReconMethod {
        match self {
            Method::Ibs(order) => ReconMethod::InverseSeries { order },
            Method::Gn => ReconMethod::GaussNewton { iterations },
            Method::Ch => ReconMethod::ChebyshevHalley { iterations },
            Method::Ribs(order) => ReconMethod::Restarted { order, iterations },
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Ibs(k) => write!(f, "ibs-{k}"),
            Method::Gn => write!(f, "gn"),
            Method::Ch => write!(f, "ch"),
            Method::Ribs(k) => write!(f, "ribs-{k}"),
        }
    }
}

/// Fully resolved experiment configuration. Fields that do not apply to the
/// experiment kind hold their defaults and are neither validated nor echoed.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub fine: usize,
    pub coarse: usize,
    pub eps: f64,
    pub wells: String,
    pub method: Method,
    pub iterations: usize,
    pub tau: f64,
    pub noise: f64,
    pub seed: u64,
    pub omega1: f64,
    pub omega2: f64,
    pub stride: usize,
    pub b1_norm: f64,
    pub eps_list: Vec<f64>,
    pub out: PathBuf,
}

/// Keys each experiment kind accepts, which is also the manifest order.
fn keys_for(kind: Kind) -> &'static [&'static str] {
    match kind {
        Kind::Toy => &["experiment", "seed", "tau", "out"],
        Kind::Schrodinger => &[
            "experiment",
            "fine",
            "coarse",
            "eps",
            "wells",
            "method",
            "iterations",
            "tau",
            "noise",
            "seed",
            "full_scale",
            "out",
        ],
        Kind::Bounds => &["experiment", "fine", "stride", "b1_norm", "eps_list", "wells", "out"],
        Kind::Hydro => &[
            "experiment",
            "fine",
            "coarse",
            "eps",
            "wells",
            "method",
            "iterations",
            "tau",
            "noise",
            "seed",
            "omega1",
            "omega2",
            "full_scale",
            "out",
        ],
    }
}

/// Accumulates settings in override order; `finish` applies defaults and
/// validates.
pub struct Builder {
    kind: Kind,
    fine: Option<usize>,
    coarse: Option<usize>,
    eps: Option<f64>,
    wells: Option<String>,
    method: Option<Method>,
    iterations: Option<usize>,
    tau: Option<f64>,
    noise: Option<f64>,
    seed: Option<u64>,
    omega1: Option<f64>,
    omega2: Option<f64>,
    stride: Option<usize>,
    b1_norm: Option<f64>,
    eps_list: Option<Vec<f64>>,
    full_scale: bool,
    out: Option<PathBuf>,
}

fn bad<T>(msg: String) -> Result<T, CliError> {
    Err(CliError::Config(msg))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse::<T>().map_err(|_| CliError::Config(format!("cannot parse {key} = {value:?}")))
}

pub fn parse_eps_list(value: &str) -> Result<Vec<f64>, CliError> {
    let list: Result<Vec<f64>, _> =
        value.split(',').map(|p| p.trim().parse::<f64>()).collect();
    match list {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => bad(format!("cannot parse eps_list = {value:?}; expected comma-separated numbers")),
    }
}

impl Builder {
    pub fn new(kind: Kind) -> Self {
        Self {
            kind,
            fine: None,
            coarse: None,
            eps: None,
            wells: None,
            method: None,
            iterations: None,
            tau: None,
            noise: None,
            seed: None,
            omega1: None,
            omega2: None,
            stride: None,
            b1_norm: None,
            eps_list: None,
            full_scale: false,
            out: None,
        }
    }

    /// Applies one `key = value` setting. Keys outside the kind's accepted
    /// set are rejected rather than ignored so a stale config file fails
    /// loudly.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !keys_for(self.kind).contains(&key) {
            return bad(format!("key {key:?} does not apply to experiment {}", self.kind.name()));
        }
        match key {
            "experiment" => match Kind::from_name(value) {
                Some(k) if k == self.kind => {}
                Some(k) => {
                    return bad(format!(
                        "config file is for experiment {}, but the {} command was invoked",
                        k.name(),
                        self.kind.name()
                    ))
                }
                None => return bad(format!("unknown experiment {value:?}")),
            },
            "fine" => self.fine = Some(parse_num(key, value)?),
            "coarse" => self.coarse = Some(parse_num(key, value)?),
            "eps" => self.eps = Some(parse_num(key, value)?),
            "wells" => self.wells = Some(value.to_string()),
            "method" => self.method = Some(Method::parse(value).map_err(CliError::Config)?),
            "iterations" => self.iterations = Some(parse_num(key, value)?),
            "tau" => self.tau = Some(parse_num(key, value)?),
            "noise" => self.noise = Some(parse_num(key, value)?),
            "seed" => self.seed = Some(parse_num(key, value)?),
            "omega1" => self.omega1 = Some(parse_num(key, value)?),
            "omega2" => self.omega2 = Some(parse_num(key, value)?),
            "stride" => self.stride = Some(parse_num(key, value)?),
            "b1_norm" => self.b1_norm = Some(parse_num(key, value)?),
            "eps_list" => self.eps_list = Some(parse_eps_list(value)?),
            "full_scale" => self.full_scale = parse_num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            _ => unreachable!("key list and match arms agree"),
        }
        Ok(())
    }

    pub fn set_full_scale(&mut self) {
        self.full_scale = true;
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return bad(format!(
                    "{}:{}: expected `key = value`, got {line:?}",
                    path.display(),
                    lineno + 1
                ));
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<ExperimentConfig, CliError> {
        let kind = self.kind;
        // The published experiments run at 400/80; desk scale is the
        // default. Explicit sizes win over the flag.
        let (default_fine, default_coarse) = if self.full_scale { (400, 80) } else { (100, 20) };
        let noise = self.noise.unwrap_or(0.0);
        let default_tau = match kind {
            Kind::Toy => 1e-6,
            _ => noise_tau(noise),
        };
        let default_seed = match kind {
            Kind::Toy => 11,
            Kind::Schrodinger => 1,
            _ => 7,
        };
        let default_method = match kind {
            Kind::Hydro => Method::Ibs(4),
            _ => Method::Ibs(5),
        };
        let cfg = ExperimentConfig {
            kind,
            fine: self.fine.unwrap_or(default_fine),
            coarse: self.coarse.unwrap_or(default_coarse),
            eps: self.eps.unwrap_or(0.1),
            wells: self.wells.unwrap_or_else(|| "standard".to_string()),
            method: self.method.unwrap_or(default_method),
            iterations: self.iterations.unwrap_or(10),
            tau: self.tau.unwrap_or(default_tau),
            noise,
            seed: self.seed.unwrap_or(default_seed),
            omega1: self.omega1.unwrap_or(1.0),
            omega2: self.omega2.unwrap_or(10.0),
            stride: self.stride.unwrap_or(4),
            b1_norm: self.b1_norm.unwrap_or(1.0),
            eps_list: self
                .eps_list
                .unwrap_or_else(|| vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25]),
            out: self.out.unwrap_or_else(|| PathBuf::from(format!("runs/{}", kind.name()))),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), CliError> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        if self.noise < 0.0 {
            return bad(format!("noise must be nonnegative, got {}", self.noise));
        }
        if self.wells != "standard" {
            return bad(format!("unknown well layout {:?}; only \"standard\" exists", self.wells));
        }
        let grids = matches!(self.kind, Kind::Schrodinger | Kind::Hydro);
        if grids || self.kind == Kind::Bounds {
            if self.fine < 4 {
                return bad(format!("fine grid needs at least 4 cells, got {}", self.fine));
            }
        }
        if grids {
            if self.coarse < 2 {
                return bad(format!("coarse grid needs at least 2 cells, got {}", self.coarse));
            }
            if self.fine % self.coarse != 0 {
                return bad(format!(
                    "coarse cell count {} must divide fine cell count {}",
                    self.coarse, self.fine
                ));
            }
            if !(self.eps >= 0.0 && self.eps < 0.5) {
                return bad(format!("eps must lie in [0, 0.5), got {}", self.eps));
            }
            if self.iterations < 1 {
                return bad("iterations must be at least 1".to_string());
            }
        }
        if self.kind == Kind::Hydro && self.omega1 == self.omega2 {
            return bad(format!("frequencies must differ, both are {}", self.omega1));
        }
        if self.kind == Kind::Bounds {
            if self.stride < 1 {
                return bad("stride must be at least 1".to_string());
            }
            if self.b1_norm <= 0.0 {
                return bad(format!("b1_norm must be positive, got {}", self.b1_norm));
            }
            for &e in &self.eps_list {
                if !(0.0..0.5).contains(&e) {
                    return bad(format!("eps_list entries must lie in [0, 0.5), got {e}"));
                }
            }
        }
        Ok(())
    }

    /// The config echo: `key = value` lines in the same format `apply_file`
    /// reads, restricted to the keys that apply to this experiment.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        for &key in keys_for(self.kind) {
            let value = match key {
                "experiment" => self.kind.name().to_string(),
                "fine" => self.fine.to_string(),
                "coarse" => self.coarse.to_string(),
                "eps" => self.eps.to_string(),
                "wells" => self.wells.clone(),
                "method" => self.method.to_string(),
                "iterations" => self.iterations.to_string(),
                "tau" => self.tau.to_string(),
                "noise" => self.noise.to_string(),
                "seed" => self.seed.to_string(),
                "omega1" => self.omega1.to_string(),
                "omega2" => self.omega2.to_string(),
                "stride" => self.stride.to_string(),
                "b1_norm" => self.b1_norm.to_string(),
                "eps_list" => self
                    .eps_list
                    .iter()
                    .map(f64::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
                "full_scale" => continue,
                "out" => self.out.display().to_string(),
                _ => unreachable!("manifest covers every accepted key"),
            };
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn methods_round_trip_through_display() {
        for s in ["ibs-5", "gn", "ch", "ribs-3"] {
            assert_eq!(Method::parse(s).unwrap().to_string(), s);
        }
        assert!(Method::parse("ibs-0").is_err());
        assert!(Method::parse("newton").is_err());
    }

    #[test]
    fn defaults_give_desk_scale_and_noise_mapped_tau() {
        let cfg = Builder::new(Kind::Schrodinger).finish().unwrap();
        assert_eq!((cfg.fine, cfg.coarse), (100, 20));
        assert_eq!(cfg.tau, 0.01);

        let mut b = Builder::new(Kind::Schrodinger);
        b.set("noise", "0.05").unwrap();
        assert_eq!(b.finish().unwrap().tau, 0.06);
    }

    #[test]
    fn full_scale_flag_switches_to_published_sizes() {
        let mut b = Builder::new(Kind::Hydro);
        b.set_full_scale();
        let cfg = b.finish().unwrap();
        assert_eq!((cfg.fine, cfg.coarse), (400, 80));

        let mut b = Builder::new(Kind::Hydro);
        b.set_full_scale();
        b.set("fine", "200").unwrap();
        b.set("coarse", "40").unwrap();
        let cfg = b.finish().unwrap();
        assert_eq!((cfg.fine, cfg.coarse), (200, 40));
    }

    #[test]
    fn keys_outside_the_kind_are_rejected() {
        let mut b = Builder::new(Kind::Toy);
        let err = b.set("omega1", "2.0").unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn validation_catches_grid_and_threshold_mistakes() {
        let mut b = Builder::new(Kind::Hydro);
        b.set("fine", "50").unwrap();
        b.set("coarse", "20").unwrap();
        assert!(b.finish().is_err());

        let mut b = Builder::new(Kind::Schrodinger);
        b.set("tau", "1.5").unwrap();
        assert!(b.finish().is_err());
    }

    #[test]
    fn manifest_reparses_to_the_same_config() {
        let mut b = Builder::new(Kind::Hydro);
        b.set("noise", "0.01").unwrap();
        b.set("seed", "42").unwrap();
        b.set("method", "ribs-3").unwrap();
        let cfg = b.finish().unwrap();

        let mut again = Builder::new(Kind::Hydro);
        for line in cfg.manifest().lines() {
            let (k, v) = line.split_once('=').unwrap();
            again.set(k.trim(), v.trim()).unwrap();
        }
        let cfg2 = again.finish().unwrap();
        assert_eq!(cfg2.seed, 42);
        assert_eq!(cfg2.tau, cfg.tau);
        assert_eq!(cfg2.method, cfg.method);
        assert_eq!(cfg2.manifest(), cfg.manifest());
    }
}

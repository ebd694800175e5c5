//! Run configuration: command-line flags over a `key = value` file over
//! built-in defaults.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use udw_core::channels::{lambda_to_gamma, GateOrder};
use udw_core::fock_linalg::CutoffPolicy;
use udw_core::info_sweeps::{
    log_spaced, SweepOptions, Variant, DEFAULT_B_VALUES, DEFAULT_COUPLING_MAX, DEFAULT_COUPLING_MIN,
    DEFAULT_STEPS,
};
use udw_core::quadrature::DEFAULT_NODES;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

/// Flags shared by every subcommand. Everything is optional here so that
/// unset flags fall through to the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// baseline, env, noisy or noisy-mc
    #[arg(long)]
    pub variant: Option<String>,
    /// Smallest γ_φ on the log grid (λ_φ when --sigma is given)
    #[arg(long)]
    pub gamma_phi_min: Option<f64>,
    /// Largest γ_φ on the log grid (λ_φ when --sigma is given)
    #[arg(long)]
    pub gamma_phi_max: Option<f64>,
    #[arg(long)]
    pub gamma_phi_steps: Option<usize>,
    /// Cross-talk multiplier; repeat or comma-separate for several values
    #[arg(long = "b", value_delimiter = ',', allow_negative_numbers = true)]
    pub b: Vec<f64>,
    /// Coherent amplitude |α| of the field mode
    #[arg(long)]
    pub mode_amp: Option<f64>,
    /// Smearing width; switches the grid axis to λ_φ with γ = λ²/((2π)^{3/2} σ)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Environment dephasing rate for the env variant
    #[arg(long)]
    pub gamma_e: Option<f64>,
    /// Fixed γ_Π for every point; implies --strict-gamma false
    #[arg(long)]
    pub gamma_pi: Option<f64>,
    /// Enforce Γ_eff = π/4 at every point
    #[arg(long)]
    pub strict_gamma: Option<bool>,
    /// Pin the Fock cutoff instead of escalating it automatically
    #[arg(long)]
    pub fock_cutoff: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Gauss–Hermite nodes for the quadrature check
    #[arg(long)]
    pub quad_nodes: Option<usize>,
    /// a-first or b-first
    #[arg(long)]
    pub gate_order: Option<String>,
    /// Output file; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    pub format: Option<String>,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub variant: Variant,
    pub gamma_phi: Vec<f64>,
    pub b: Vec<f64>,
    pub mode_amp: f64,
    pub sigma: Option<f64>,
    pub gamma_e: f64,
    pub gamma_pi: Option<f64>,
    pub strict_gamma: bool,
    pub fock_cutoff: Option<usize>,
    pub samples: usize,
    pub seed: Option<u64>,
    pub quad_nodes: usize,
    pub gate_order: GateOrder,
    pub out: Option<PathBuf>,
    pub format: Format,
}

const KEYS: [&str; 17] = [
    "variant",
    "gamma-phi-min",
    "gamma-phi-max",
    "gamma-phi-steps",
    "b",
    "mode-amp",
    "sigma",
    "gamma-e",
    "gamma-pi",
    "strict-gamma",
    "fock-cutoff",
    "samples",
    "seed",
    "quad-nodes",
    "gate-order",
    "out",
    "format",
];

/// Parses `key = value` lines; `#` starts a comment. Keys may use `-` or `_`.
pub fn parse_config_file(text: &str) -> Result<HashMap<String, String>, ConfigError> {
    let mut map = HashMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return err(format!("config line {}: expected `key = value`, got `{line}`", n + 1));
        };
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return err(format!("config line {}: unknown key `{}`", n + 1, k.trim()));
        }
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return err(format!("config line {}: duplicate key `{key}`", n + 1));
        }
    }
    Ok(map)
}

pub fn load_config_file(path: &Path) -> Result<HashMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_file(&text)
}

struct Layers<'a> {
    file: &'a HashMap<String, String>,
}

impl Layers<'_> {
    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| ConfigError(format!("config key `{key}`: cannot parse `{v}`: {e}"))),
        }
    }

    fn list(&self, flag: Vec<f64>, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        if !flag.is_empty() {
            return Ok(Some(flag));
        }
        let Some(v) = self.file.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| ConfigError(format!("config key `{key}`: cannot parse `{s}`: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if !(v.is_finite() && v > 0.0) {
        return err(format!("{name} must be positive and finite, got {v}"));
    }
    Ok(())
}

fn check_non_negative(name: &str, v: f64) -> Result<(), ConfigError> {
    if !(v.is_finite() && v >= 0.0) {
        return err(format!("{name} must be non-negative and finite, got {v}"));
    }
    Ok(())
}

impl RunConfig {
    /// Resolves `args` over `file` over the defaults and validates the result.
    pub fn resolve(args: RunArgs, file: &HashMap<String, String>) -> Result<Self, ConfigError> {
        let l = Layers { file };
        let variant: Variant = match l.get(args.variant, "variant")? {
            None => Variant::Baseline,
            Some(s) => s.parse().map_err(|e: udw_core::UdwError| ConfigError(e.to_string()))?,
        };
        let mode_amp = l.get(args.mode_amp, "mode-amp")?.unwrap_or(1.0);
        check_positive("mode-amp", mode_amp)?;
        let sigma: Option<f64> = l.get(args.sigma, "sigma")?;
        if let Some(s) = sigma {
            check_positive("sigma", s)?;
        }

        let a2 = mode_amp * mode_amp;
        let to_gamma = |x: f64| sigma.map_or(x, |s| lambda_to_gamma(x, s));
        let min = l.get(args.gamma_phi_min, "gamma-phi-min")?;
        let max = l.get(args.gamma_phi_max, "gamma-phi-max")?;
        let steps = l.get(args.gamma_phi_steps, "gamma-phi-steps")?.unwrap_or(DEFAULT_STEPS);
        let (min, max) = match sigma {
            // the default grid is in γ_φ|α|², whatever the axis
            None => (
                min.unwrap_or(DEFAULT_COUPLING_MIN / a2),
                max.unwrap_or(DEFAULT_COUPLING_MAX / a2),
            ),
            Some(_) => match (min, max) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => return err("--sigma needs explicit gamma-phi-min and gamma-phi-max (as λ_φ values)"),
            },
        };
        check_positive("gamma-phi-min", min)?;
        check_positive("gamma-phi-max", max)?;
        if steps == 0 {
            return err("gamma-phi-steps must be at least 1");
        }
        if max < min {
            return err(format!("gamma-phi-max ({max}) is below gamma-phi-min ({min})"));
        }
        let gamma_phi = log_spaced(min, max, steps)
            .map_err(|e| ConfigError(e.to_string()))?
            .into_iter()
            .map(to_gamma)
            .collect();

        let b = l.list(args.b, "b")?.unwrap_or_else(|| DEFAULT_B_VALUES.to_vec());
        if b.is_empty() {
            return err("at least one b value is needed");
        }
        for &v in &b {
            check_non_negative("b", v)?;
        }

        let gamma_e = l.get(args.gamma_e, "gamma-e")?.unwrap_or(0.0);
        check_non_negative("gamma-e", gamma_e)?;
        if variant == Variant::Env && gamma_e == 0.0 {
            return err("the env variant needs gamma-e > 0");
        }

        let gamma_pi: Option<f64> = l.get(args.gamma_pi, "gamma-pi")?;
        let strict_gamma = l.get(args.strict_gamma, "strict-gamma")?.unwrap_or(gamma_pi.is_none());
        match (strict_gamma, gamma_pi) {
            (true, Some(_)) => return err("gamma-pi conflicts with strict-gamma = true"),
            (false, None) => return err("strict-gamma = false needs an explicit gamma-pi"),
            (false, Some(g)) => check_positive("gamma-pi", g)?,
            (true, None) => {}
        }

        let fock_cutoff = l.get(args.fock_cutoff, "fock-cutoff")?;
        if let Some(n) = fock_cutoff {
            if n < 2 {
                return err(format!("fock-cutoff must be at least 2, got {n}"));
            }
        }
        let samples = l.get(args.samples, "samples")?.unwrap_or(10_000);
        if samples == 0 {
            return err("samples must be at least 1");
        }
        let seed = l.get(args.seed, "seed")?;
        if variant == Variant::NoisyMc && seed.is_none() {
            return err("the noisy-mc variant needs an explicit seed");
        }
        let quad_nodes = l.get(args.quad_nodes, "quad-nodes")?.unwrap_or(DEFAULT_NODES);
        if quad_nodes == 0 {
            return err("quad-nodes must be at least 1");
        }
        let gate_order = match l.get(args.gate_order, "gate-order")?.as_deref() {
            None | Some("a-first") => GateOrder::AFirst,
            Some("b-first") => GateOrder::BFirst,
            Some(other) => return err(format!("unknown gate order `{other}` (expected a-first or b-first)")),
        };
        let out = l.get(args.out, "out")?;
        let format = match l.get::<String>(args.format, "format")? {
            None => Format::Csv,
            Some(s) => s.parse()?,
        };

        Ok(Self {
            variant,
            gamma_phi,
            b,
            mode_amp,
            sigma,
            gamma_e,
            gamma_pi,
            strict_gamma,
            fock_cutoff,
            samples,
            seed,
            quad_nodes,
            gate_order,
            out,
            format,
        })
    }

    pub fn cutoff(&self) -> CutoffPolicy {
        self.fock_cutoff.map_or_else(CutoffPolicy::default, CutoffPolicy::fixed)
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            gamma_pi: self.gamma_pi,
            env_gamma: self.gamma_e,
            cutoff: self.cutoff(),
            gate_order: self.gate_order,
            samples: self.samples,
            seed: self.seed.unwrap_or(0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(args: RunArgs, file: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::resolve(args, &parse_config_file(file).unwrap())
    }

    #[test]
    fn defaults() {
        let c = resolve(RunArgs::default(), "").unwrap();
        assert_eq!(c.variant, Variant::Baseline);
        assert_eq!(c.gamma_phi.len(), 40);
        assert_eq!(c.gamma_phi[0], 1e-3);
        assert_eq!(c.gamma_phi[39], 12.0);
        assert_eq!(c.b, DEFAULT_B_VALUES.to_vec());
        assert!(c.strict_gamma);
        assert_eq!(c.format, Format::Csv);
        assert_eq!(c.cutoff(), CutoffPolicy::default());
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let file = "mode_amp = 2\nsamples = 50 # comment\nb = 0, 1.5\n";
        let args = RunArgs {
            samples: Some(7),
            ..RunArgs::default()
        };
        let c = resolve(args, file).unwrap();
        assert_eq!(c.samples, 7);
        assert_eq!(c.mode_amp, 2.0);
        assert_eq!(c.b, vec![0.0, 1.5]);
        assert_eq!(c.gamma_phi[0], 1e-3 / 4.0);
    }

    #[test]
    fn file_errors() {
        assert!(parse_config_file("nonsense").is_err());
        assert!(parse_config_file("colour = red").is_err());
        assert!(parse_config_file("seed = 1\nseed = 2").is_err());
        assert!(resolve(RunArgs::default(), "samples = many").is_err());
    }

    #[test]
    fn inconsistent_settings_rejected() {
        for file in [
            "variant = noisy-mc",
            "variant = env",
            "variant = sideways",
            "gamma-pi = 0.5\nstrict-gamma = true",
            "strict-gamma = false",
            "mode-amp = -1",
            "b = -0.5",
            "gamma-phi-min = 2\ngamma-phi-max = 1",
            "fock-cutoff = 1",
            "gate-order = c-first",
            "format = xml",
            "sigma = 0.1",
        ] {
            assert!(resolve(RunArgs::default(), file).is_err(), "{file}");
        }
        assert!(resolve(RunArgs::default(), "strict-gamma = false\ngamma-pi = 0.5").is_ok());
        // a fixed γ_Π on its own implies non-strict
        assert!(!resolve(RunArgs::default(), "gamma-pi = 0.5").unwrap().strict_gamma);
    }

    #[test]
    fn sigma_converts_lambda_axis() {
        let c = resolve(RunArgs::default(), "sigma = 0.5\ngamma-phi-min = 1\ngamma-phi-max = 2\ngamma-phi-steps = 2").unwrap();
        assert!((c.gamma_phi[0] - lambda_to_gamma(1.0, 0.5)).abs() < 1e-15);
        assert!((c.gamma_phi[1] - lambda_to_gamma(2.0, 0.5)).abs() < 1e-15);
    }
}

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

/// How `simulate` builds its initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Random,
    Constant,
    SingleMode,
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Spatial dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Maximal total Hermite degree of the initial data.
    #[arg(long)]
    pub degree: Option<usize>,
    /// Gauss-Hermite points per axis.
    #[arg(long = "quad-order")]
    pub quad_order: Option<usize>,
    /// Moment order: coefficients with 0 < |k| < n vanish.
    #[arg(long)]
    pub n: Option<usize>,
    /// Entropy exponents, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    /// Admissible deviation |w − 1| ≤ ε.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Amplitude ladder, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub amps: Option<Vec<f64>>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub t1: Option<f64>,
    #[arg(long = "t-steps")]
    pub t_steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed list `1,2,3` or range `0..100`.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Number of consecutive seeds starting at `--seed`.
    #[arg(long)]
    pub sweeps: Option<usize>,
    /// `harmonic`, `double-well` or `poly:<expression in x, y>`.
    #[arg(long)]
    pub potential: Option<String>,
    /// Grid points per axis for general potentials.
    #[arg(long)]
    pub points: Option<usize>,
    /// Number of eigenpairs.
    #[arg(short = 'm', long = "modes")]
    pub modes: Option<usize>,
    /// Box half-width for general potentials.
    #[arg(long = "half-width")]
    pub half_width: Option<f64>,
    #[arg(long, value_enum)]
    pub init: Option<InitKind>,
    /// Multi-index, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Sharpness probe family: `bump` or `polynomial`.
    #[arg(long)]
    pub family: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with any of the above keys (snake_case).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Text(String),
}

/// Run parameters after merging the config file and the flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub d: Option<usize>,
    pub degree: Option<usize>,
    pub quad_order: Option<usize>,
    pub n: Option<usize>,
    pub p: Option<Vec<f64>>,
    pub eps: Option<f64>,
    pub amps: Option<Vec<f64>>,
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub t_steps: Option<usize>,
    pub seed: Option<u64>,
    pub seeds: Option<SeedSpec>,
    pub sweeps: Option<usize>,
    pub potential: Option<String>,
    pub points: Option<usize>,
    pub modes: Option<usize>,
    pub half_width: Option<f64>,
    pub init: Option<InitKind>,
    pub k: Option<Vec<usize>>,
    pub family: Option<String>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(flags: &Flags) -> Result<Self, String> {
        let base = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
                serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))?
            }
            None => RunConfig::default(),
        };
        Ok(base.overridden_by(flags))
    }

    fn overridden_by(self, f: &Flags) -> Self {
        Self {
            d: f.d.or(self.d),
            degree: f.degree.or(self.degree),
            quad_order: f.quad_order.or(self.quad_order),
            n: f.n.or(self.n),
            p: f.p.clone().or(self.p),
            eps: f.eps.or(self.eps),
            amps: f.amps.clone().or(self.amps),
            t0: f.t0.or(self.t0),
            t1: f.t1.or(self.t1),
            t_steps: f.t_steps.or(self.t_steps),
            seed: f.seed.or(self.seed),
            seeds: f.seeds.clone().map(SeedSpec::Text).or(self.seeds),
            sweeps: f.sweeps.or(self.sweeps),
            potential: f.potential.clone().or(self.potential),
            points: f.points.or(self.points),
            modes: f.modes.or(self.modes),
            half_width: f.half_width.or(self.half_width),
            init: f.init.or(self.init),
            k: f.k.clone().or(self.k),
            family: f.family.clone().or(self.family),
            out: f.out.clone().or(self.out),
        }
    }

    pub fn dim(&self) -> Result<usize, String> {
        match self.d.unwrap_or(1) {
            d @ 1..=3 => Ok(d),
            d => Err(format!("--d must be 1, 2 or 3, got {d}")),
        }
    }

    pub fn require_n(&self) -> Result<usize, String> {
        match self.n {
            Some(0) => Err("--n must be at least 1".into()),
            Some(n) => Ok(n),
            None => Err("missing required flag --n".into()),
        }
    }

    pub fn degree(&self, n: usize) -> usize {
        self.degree.unwrap_or(n + 2)
    }

    pub fn ps(&self) -> Result<Vec<f64>, String> {
        let ps = self.p.clone().unwrap_or_else(|| vec![1.0]);
        if ps.is_empty() || ps.iter().any(|p| !(1.0..=2.0).contains(p)) {
            return Err(format!("--p values must lie in [1, 2], got {ps:?}"));
        }
        Ok(ps)
    }

    pub fn eps(&self) -> Result<f64, String> {
        let e = self.eps.unwrap_or(0.3);
        if !(e > 0.0 && e < 1.0) {
            return Err(format!("--eps must lie in (0, 1), got {e}"));
        }
        Ok(e)
    }

    pub fn times(&self) -> Result<Vec<f64>, String> {
        let (t0, t1, steps) = (self.t0.unwrap_or(0.0), self.t1.unwrap_or(2.0), self.t_steps.unwrap_or(21));
        if steps < 8 {
            return Err(format!("--t-steps must be at least 8, got {steps}"));
        }
        entroflow::lab::time_grid(t0, t1, steps).map_err(|e| e.to_string())
    }

    /// `--seeds`, else `--sweeps` consecutive seeds from `--seed`, else `--seed`.
    pub fn seed_list(&self) -> Result<Vec<u64>, String> {
        let start = self.seed.unwrap_or(0);
        match (&self.seeds, self.sweeps) {
            (Some(SeedSpec::List(v)), _) => Ok(v.clone()),
            (Some(SeedSpec::Text(s)), _) => parse_seeds(s),
            (None, Some(0)) => Err("--sweeps must be at least 1".into()),
            (None, Some(k)) => Ok((start..start + k as u64).collect()),
            (None, None) => Ok(vec![start]),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| Path::new(".").to_path_buf())
    }
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let bad = || format!("--seeds expects `a,b,c` or `a..b`, got '{s}'");
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if b <= a {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_parse() {
        assert_eq!(parse_seeds("3..6").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_seeds("1, 9,2").unwrap(), vec![1, 9, 2]);
        assert!(parse_seeds("5..5").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file: RunConfig = serde_json::from_str(r#"{"n": 3, "p": [1.5], "seeds": [4, 5], "eps": 0.2}"#).unwrap();
        let flags = Flags { n: Some(2), seeds: Some("7..9".into()), ..Flags::default() };
        let c = file.overridden_by(&flags);
        assert_eq!(c.n, Some(2));
        assert_eq!(c.p, Some(vec![1.5]));
        assert_eq!(c.eps, Some(0.2));
        assert_eq!(c.seed_list().unwrap(), vec![7, 8]);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn seed_precedence() {
        let c = RunConfig { seed: Some(10), sweeps: Some(3), ..RunConfig::default() };
        assert_eq!(c.seed_list().unwrap(), vec![10, 11, 12]);
        let c = RunConfig { seed: Some(10), ..RunConfig::default() };
        assert_eq!(c.seed_list().unwrap(), vec![10]);
    }
}

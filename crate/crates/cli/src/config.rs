//! Flat key-value run configuration.
//!
//! A config file only lists the keys it wants to change; everything else comes
//! from the selected preset. The resolved config written next to a run's
//! outputs lists every key and reproduces the run when passed back in.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use wxo_core::crossover::{CrossoverConfig, CrossoverOperator};
use wxo_core::evolve::EvolveConfig;
use wxo_core::fem::{ElasticModel, LoadCase};
use wxo_core::grid::GridSpec;
use wxo_core::hf::HfConfig;
use wxo_core::ot::KernelMode;
use wxo_core::topopt::SeedRanges;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preset {
    Desk,
    #[default]
    Paper2d,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper2d" => Ok(Preset::Paper2d),
            other => Err(format!(
                "unknown preset `{other}` (expected desk or paper2d)"
            )),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Desk => "desk",
            Preset::Paper2d => "paper2d",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Run directory.
    pub out: PathBuf,
    /// Directory of seed fields read by `evolve`; empty means `<out>/seeds`.
    pub seeds_dir: PathBuf,
    pub rng_seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,

    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,

    pub e0: f64,
    pub e_min: f64,
    pub nu: f64,
    pub penal: f64,
    pub q_rel: f64,
    pub thickness: f64,

    pub n_s1: usize,
    pub n_s2: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub p_norm: f64,
    pub lf_max_iter: usize,

    pub r_h: f64,
    pub refine_factor: usize,
    pub threshold: f64,

    pub eps_min: f64,
    pub eps_max: f64,
    pub tau: f64,
    pub sinkhorn_max_iter: usize,
    /// `conv` or `dense`.
    pub kernel: String,
    pub floor: f64,

    pub n_pop: usize,
    pub n_xo: usize,
    pub t_max: usize,
    pub hv_rel_tol: f64,
    pub hv_window: usize,
    /// `wasserstein` or `linear`.
    pub operator: String,
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        let full = RunConfig {
            out: PathBuf::from("run"),
            seeds_dir: PathBuf::new(),
            rng_seed: 0,
            workers: 0,
            nx: 100,
            ny: 200,
            lx: 1.0,
            ly: 2.0,
            e0: 1.0,
            e_min: 1e-9,
            nu: 0.3,
            penal: 3.0,
            q_rel: 0.5,
            thickness: 1.0,
            n_s1: 4,
            n_s2: 25,
            r_min: 0.03,
            r_max: 0.12,
            v_min: 0.30,
            v_max: 0.60,
            p_norm: 8.0,
            lf_max_iter: 150,
            r_h: 0.01,
            refine_factor: 2,
            threshold: 0.5,
            eps_min: 4e-6,
            eps_max: 4e-4,
            tau: 1e-9,
            sinkhorn_max_iter: 10_000,
            kernel: "conv".into(),
            floor: 1e-12,
            n_pop: 100,
            n_xo: 100,
            t_max: 100,
            hv_rel_tol: 0.0,
            hv_window: 10,
            operator: "wasserstein".into(),
        };
        match p {
            Preset::Paper2d => full,
            Preset::Desk => RunConfig {
                nx: 50,
                ny: 100,
                n_s1: 4,
                n_s2: 6,
                r_h: 0.02,
                eps_min: 1.6e-5,
                eps_max: 1.6e-3,
                sinkhorn_max_iter: 300,
                n_pop: 20,
                n_xo: 20,
                t_max: 15,
                ..full
            },
        }
    }

    /// Preset values overlaid with the keys present in `text`.
    pub fn parse(text: &str, preset: Preset) -> CliResult<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let mut merged = toml::Table::try_from(Self::preset(preset))
            .map_err(|e| CliError::Internal(e.to_string()))?;
        for (key, value) in table {
            if !merged.contains_key(&key) {
                return Err(CliError::Config(format!(
                    "unknown key `{key}`{}",
                    line_of(text, &key)
                )));
            }
            merged.insert(key, value);
        }
        let cfg: RunConfig = merged
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, preset: Preset) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, preset).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn seeds_path(&self) -> PathBuf {
        if self.seeds_dir.as_os_str().is_empty() {
            self.out.join("seeds")
        } else {
            self.seeds_dir.clone()
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.kernel.parse::<KernelMode>().is_err() {
            return bad(format!(
                "kernel must be conv or dense, got `{}`",
                self.kernel
            ));
        }
        if self.operator.parse::<CrossoverOperator>().is_err() {
            return bad(format!(
                "operator must be wasserstein or linear, got `{}`",
                self.operator
            ));
        }
        if self.n_s1 == 0 || self.n_s2 == 0 {
            return bad("n_s1 and n_s2 must be >= 1".into());
        }
        if self.lf_max_iter == 0 {
            return bad("lf_max_iter must be >= 1".into());
        }
        if self.p_norm.is_nan() || self.p_norm < 1.0 {
            return bad(format!("p_norm must be >= 1, got {}", self.p_norm));
        }
        self.grid()?;
        self.model()?;
        self.seed_ranges()?;
        self.hf()?;
        self.evolve()?;
        Ok(())
    }

    pub fn grid(&self) -> CliResult<GridSpec> {
        GridSpec::new(self.nx, self.ny, self.lx, self.ly).map_err(config_err)
    }

    pub fn model(&self) -> CliResult<ElasticModel> {
        let mut m = ElasticModel::new(self.grid()?);
        m.e0 = self.e0;
        m.e_min = self.e_min;
        m.nu = self.nu;
        m.penal = self.penal;
        m.q_rel = self.q_rel;
        m.thickness = self.thickness;
        m.validate().map_err(config_err)?;
        Ok(m)
    }

    pub fn load_case(&self) -> LoadCase {
        LoadCase::cracked_plate()
    }

    pub fn seed_ranges(&self) -> CliResult<SeedRanges> {
        let r = SeedRanges {
            r_min: self.r_min,
            r_max: self.r_max,
            v_min: self.v_min,
            v_max: self.v_max,
        };
        r.validate().map_err(config_err)?;
        Ok(r)
    }

    pub fn hf(&self) -> CliResult<HfConfig> {
        let mut h = HfConfig::new(self.r_h).with_bands_from(&self.load_case());
        h.refine_factor = self.refine_factor;
        h.threshold = self.threshold;
        h.validate().map_err(config_err)?;
        Ok(h)
    }

    pub fn operator(&self) -> CliResult<CrossoverOperator> {
        self.operator.parse().map_err(config_err)
    }

    pub fn crossover(&self) -> CliResult<CrossoverConfig> {
        let mut c = CrossoverConfig::new(self.eps_min, self.eps_max).map_err(config_err)?;
        c.tau = self.tau;
        c.max_iter = self.sinkhorn_max_iter;
        c.mode = self.kernel.parse().map_err(config_err)?;
        c.floor = self.floor;
        c.rng_seed = self.rng_seed;
        c.validate().map_err(config_err)?;
        Ok(c)
    }

    pub fn evolve(&self) -> CliResult<EvolveConfig> {
        let e = EvolveConfig {
            n_pop: self.n_pop,
            n_xo: self.n_xo,
            t_max: self.t_max,
            hv_rel_tol: self.hv_rel_tol,
            hv_window: self.hv_window,
            crossover: self.crossover()?,
            operator: self.operator()?,
        };
        e.validate().map_err(config_err)?;
        Ok(e)
    }
}

fn config_err(e: wxo_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn line_of(text: &str, key: &str) -> String {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| format!(" at line {}", i + 1))
        .unwrap_or_default()
}

//! Command-line driver: load a run configuration, apply flag overrides, and
//! write CSV/JSON artifacts for eigenvalue sweeps, time evolution, and the
//! figure pipelines.
//!
//! Frequencies in the configuration file and on the command line are ordinary
//! frequencies (Hz, Hz/ms); conversion to angular units happens once, at the
//! boundary. Exit codes: 0 success, 1 usage/configuration error, 2 numerical
//! or I/O failure, 3 check failure under `--check`.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use zenopair::dynamics::{
    evolve_lindblad, evolve_nonhermitian, evolve_trajectories, ket_gg, pure_state_density,
    nonvacuum_trace, OmegaRampShape, RampProtocol,
};
use zenopair::experiment::{
    figure1_pipeline, figure3_pipeline, figure4_pipeline, EnsembleModel,
};
use zenopair::hamiltonian::{
    build_effective_two_level, derive_pq_as, PairParams, PqConvention,
};
use zenopair::ode::Tolerances;
use zenopair::spectrum::{linspace, perturbative_decay_rates, sweep_spectrum};
use zenopair::{hz, to_hz};

// ---------------------------------------------------------------------------
// Configuration

/// Collisional parameters, ordinary frequencies (Hz).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PhysicalConfig {
    u_gg: f64,
    u_eg: f64,
    u_ee: f64,
    gamma_ee: f64,
    omega: f64,
    pq_convention: PqConvention,
}

impl Default for PhysicalConfig {
    fn default() -> Self {
        PhysicalConfig {
            u_gg: 1400.0,
            u_eg: 0.905 * 1400.0,
            u_ee: 1.21 * 1400.0,
            gamma_ee: 1.02 * 1400.0,
            omega: 150.0,
            pq_convention: PqConvention::MainText,
        }
    }
}

/// Drive schedule: detunings in Hz, ramp speed in Hz/ms, durations in ms.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RampConfig {
    delta_i: f64,
    delta_f: f64,
    delta_dot: f64,
    /// Intensity-ramp duration, ms; negative means the t_omega = T_R/10
    /// convention.
    t_omega: f64,
    t_hold: f64,
    omega_ramp_shape: OmegaRampShape,
}

impl Default for RampConfig {
    fn default() -> Self {
        RampConfig {
            delta_i: 1500.0,
            delta_f: -1500.0,
            delta_dot: 11.1,
            t_omega: -1.0,
            t_hold: 0.0,
            omega_ramp_shape: OmegaRampShape::Field,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct NumericsConfig {
    rtol: f64,
    atol: f64,
    /// Grid/sample point count for sweeps and evolution output.
    n_points: usize,
    /// Lifetime grid size for the decay-rate figure.
    n_lifetimes: usize,
    n_traj: usize,
    seed: u64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            rtol: 1e-9,
            atol: 1e-12,
            n_points: 201,
            n_lifetimes: 13,
            n_traj: 1000,
            seed: 1,
        }
    }
}

/// Lattice occupation statistics for the ensemble figure.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct EnsembleConfig {
    n1: f64,
    n2: f64,
    eta_rp: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n1: 1000.0,
            n2: 1000.0,
            eta_rp: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
enum OutputFormat {
    /// CSV data files plus a JSON summary.
    Csv,
    /// All data embedded in the JSON summary.
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct OutputConfig {
    dir: PathBuf,
    format: OutputFormat,
    /// Decimal digits in scientific-notation output.
    precision: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
            precision: 12,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunConfig {
    physical: PhysicalConfig,
    ramp: RampConfig,
    numerics: NumericsConfig,
    ensemble: EnsembleConfig,
    output: OutputConfig,
}

impl RunConfig {
    /// Angular-unit pair parameters. Both (p, q) conventions are folded into
    /// equivalent interaction energies, so downstream code sees one
    /// convention only.
    fn pair_params(&self) -> PairParams {
        let raw = PairParams {
            u_gg: hz(self.physical.u_gg),
            u_eg: hz(self.physical.u_eg),
            u_ee: hz(self.physical.u_ee),
            gamma_ee: hz(self.physical.gamma_ee),
            omega: hz(self.physical.omega),
        };
        match self.physical.pq_convention {
            PqConvention::MainText => raw,
            PqConvention::Table1 => {
                // The Hamiltonian depends on the energies only through
                // (p, q); re-express them as main-text-convention energies.
                let (p, q) = derive_pq_as(&raw, PqConvention::Table1);
                PairParams {
                    u_gg: 0.0,
                    u_eg: q + p,
                    u_ee: 2.0 * p,
                    ..raw
                }
            }
        }
    }

    fn ramp(&self) -> Result<RampProtocol, Failure> {
        let speed = hz(self.ramp.delta_dot.abs()) * 1000.0;
        let mut ramp = RampProtocol::landau_zener(
            hz(self.ramp.delta_i),
            hz(self.ramp.delta_f),
            speed,
            hz(self.physical.omega),
            self.ramp.t_hold * 1e-3,
        )
        .map_err(Failure::usage)?
        .with_omega_ramp_shape(self.ramp.omega_ramp_shape);
        if self.ramp.t_omega >= 0.0 {
            ramp = ramp.with_t_omega(self.ramp.t_omega * 1e-3);
        }
        ramp.validate().map_err(Failure::usage)?;
        Ok(ramp)
    }

    fn tol(&self) -> Tolerances {
        Tolerances::new(self.numerics.rtol, self.numerics.atol)
    }

    fn ensemble(&self) -> EnsembleModel {
        EnsembleModel {
            n1: self.ensemble.n1,
            n2: self.ensemble.n2,
            eta_rp: self.ensemble.eta_rp,
        }
    }
}

// ---------------------------------------------------------------------------
// Command line

#[derive(Debug, Parser)]
#[command(
    name = "zenopair",
    version,
    about = "Dissipative atom-pair simulations: spectra, ramps, and figure pipelines"
)]
struct Cli {
    /// TOML run-configuration file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the fully resolved configuration as TOML and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    /// Output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// RNG seed for trajectory sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Drive Rabi frequency, Hz.
    #[arg(long, global = true)]
    omega: Option<f64>,
    /// Initial detuning, Hz.
    #[arg(long, global = true)]
    delta_i: Option<f64>,
    /// Final detuning, Hz.
    #[arg(long, global = true)]
    delta_f: Option<f64>,
    /// Detuning ramp speed magnitude, Hz/ms.
    #[arg(long, global = true)]
    delta_dot: Option<f64>,
    /// Hold time after the ramp, ms.
    #[arg(long, global = true)]
    t_hold: Option<f64>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalue sweeps over detuning in the strong-drive and Zeno regimes.
    Spectrum {
        /// Zeno-regime drive strength as a fraction of gamma_ee.
        #[arg(long, default_value_t = 0.1)]
        omega_ratio: f64,
        /// Sweep window start, Hz.
        #[arg(long, default_value_t = -1500.0)]
        delta_min: f64,
        /// Sweep window end, Hz.
        #[arg(long, default_value_t = 1500.0)]
        delta_max: f64,
        /// Grid point count.
        #[arg(long)]
        n_points: Option<usize>,
    },
    /// Propagate one pair through the configured ramp.
    Evolve {
        #[arg(long, value_enum, default_value_t = Method::Nh)]
        method: Method,
        /// Trajectory count for the Monte Carlo method.
        #[arg(long)]
        n_traj: Option<usize>,
    },
    /// Reproduce one of the benchmark figures as data files.
    Figures {
        #[arg(value_enum)]
        which: Figure,
        /// Run the associated consistency checks; nonzero exit on failure.
        #[arg(long)]
        check: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Deterministic non-Hermitian wavefunction.
    Nh,
    /// Master equation with the pair-loss jump operator.
    Lindblad,
    /// Quantum-trajectory Monte Carlo.
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Figure {
    /// Eigenvalue branches vs detuning with the reduced-model overlay.
    Fig1,
    /// Prepared-state decay rate vs final detuning.
    Fig3,
    /// Ensemble atom counts vs final detuning.
    Fig4,
}

// ---------------------------------------------------------------------------
// Failure plumbing

#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Failure {
            code: 1,
            msg: e.to_string(),
        }
    }

    fn numerical(e: impl std::fmt::Display) -> Self {
        Failure {
            code: 2,
            msg: e.to_string(),
        }
    }

    fn check(msg: impl Into<String>) -> Self {
        Failure {
            code: 3,
            msg: msg.into(),
        }
    }
}

fn num<T>(r: zenopair::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match e {
        zenopair::Error::InvalidParams(_) | zenopair::Error::BadGrid => Failure::usage(e),
        other => Failure::numerical(other),
    })
}

// ---------------------------------------------------------------------------
// Output helpers

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    pass: bool,
    value: f64,
    tolerance: f64,
}

impl Check {
    fn upper(name: &str, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            pass: value <= tolerance,
            value,
            tolerance,
        }
    }

    fn lower(name: &str, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            pass: value >= tolerance,
            value,
            tolerance,
        }
    }
}

struct Artifacts<'a> {
    config: &'a RunConfig,
    command: String,
    metrics: serde_json::Map<String, serde_json::Value>,
    checks: Vec<Check>,
    /// Tables embedded in the summary when the output format is json.
    tables: serde_json::Map<String, serde_json::Value>,
}

impl<'a> Artifacts<'a> {
    fn new(config: &'a RunConfig, command: &str) -> Result<Self, Failure> {
        fs::create_dir_all(&config.output.dir).map_err(|e| {
            Failure::numerical(format!(
                "cannot create output directory {}: {e}",
                config.output.dir.display()
            ))
        })?;
        Ok(Artifacts {
            config,
            command: command.to_string(),
            metrics: serde_json::Map::new(),
            checks: Vec::new(),
            tables: serde_json::Map::new(),
        })
    }

    fn metric(&mut self, name: &str, value: impl Into<serde_json::Value>) {
        self.metrics.insert(name.to_string(), value.into());
    }

    fn fmt(&self, v: f64) -> String {
        format!("{:.*e}", self.config.output.precision, v)
    }

    /// Write one table either as a CSV file (csv format) or into the summary
    /// (json format). Column lengths must match; every value must be finite.
    fn table(&mut self, name: &str, columns: &[(&str, &[f64])]) -> Result<(), Failure> {
        let rows = columns.first().map(|c| c.1.len()).unwrap_or(0);
        for (label, col) in columns {
            if col.len() != rows {
                return Err(Failure::numerical(format!(
                    "{name}: ragged column {label}"
                )));
            }
            if let Some(v) = col.iter().find(|v| !v.is_finite()) {
                return Err(Failure::numerical(format!(
                    "{name}: non-finite value {v} in column {label}"
                )));
            }
        }
        match self.config.output.format {
            OutputFormat::Csv => {
                let mut s = String::new();
                s.push_str(&format!("# command: {}\n", self.command));
                let toml = toml::to_string(self.config)
                    .map_err(|e| Failure::numerical(format!("config serialization: {e}")))?;
                for line in toml.lines() {
                    s.push_str("# ");
                    s.push_str(line);
                    s.push('\n');
                }
                s.push_str(
                    &columns
                        .iter()
                        .map(|(l, _)| l.to_string())
                        .collect::<Vec<_>>()
                        .join(","),
                );
                s.push('\n');
                for r in 0..rows {
                    s.push_str(
                        &columns
                            .iter()
                            .map(|(_, c)| self.fmt(c[r]))
                            .collect::<Vec<_>>()
                            .join(","),
                    );
                    s.push('\n');
                }
                let path = self.config.output.dir.join(format!("{name}.csv"));
                fs::write(&path, s)
                    .map_err(|e| Failure::numerical(format!("write {}: {e}", path.display())))?;
            }
            OutputFormat::Json => {
                let mut obj = serde_json::Map::new();
                for (label, col) in columns {
                    obj.insert(
                        label.to_string(),
                        serde_json::Value::from(col.to_vec()),
                    );
                }
                self.tables.insert(name.to_string(), obj.into());
            }
        }
        Ok(())
    }

    /// Write the JSON summary; fail with exit code 3 if `enforce_checks` and
    /// any check failed.
    fn finish(self, enforce_checks: bool) -> Result<(), Failure> {
        for (k, v) in &self.metrics {
            if let Some(f) = v.as_f64() {
                if !f.is_finite() {
                    return Err(Failure::numerical(format!("non-finite metric {k}")));
                }
            }
        }
        let failed: Vec<&str> = self
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        let summary = serde_json::json!({
            "command": self.command,
            "config": self.config,
            "metrics": self.metrics,
            "checks": self.checks,
            "tables": self.tables,
        });
        let path = self
            .config
            .output
            .dir
            .join(format!("{}_summary.json", self.command.replace(' ', "_")));
        let mut text = serde_json::to_string_pretty(&summary)
            .map_err(|e| Failure::numerical(format!("summary serialization: {e}")))?;
        text.push('\n');
        fs::write(&path, text)
            .map_err(|e| Failure::numerical(format!("write {}: {e}", path.display())))?;
        if enforce_checks && !failed.is_empty() {
            return Err(Failure::check(format!(
                "checks failed: {}",
                failed.join(", ")
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Commands

fn cmd_spectrum(
    config: &RunConfig,
    omega_ratio: f64,
    delta_min: f64,
    delta_max: f64,
    n_points: Option<usize>,
) -> Result<(), Failure> {
    let n = n_points.unwrap_or(config.numerics.n_points);
    if n < 2 || !(delta_max > delta_min) {
        return Err(Failure::usage("detuning grid needs n_points >= 2 and delta_max > delta_min"));
    }
    if !(omega_ratio > 0.0) {
        return Err(Failure::usage("omega-ratio must be positive"));
    }
    let params = config.pair_params();
    let deltas = linspace(hz(delta_min), hz(delta_max), n);
    let mut art = Artifacts::new(config, "spectrum")?;
    let delta_hz: Vec<f64> = deltas.iter().map(|&d| to_hz(d)).collect();
    for (tag, omega) in [
        ("strong", params.gamma_ee),
        ("zeno", omega_ratio * params.gamma_ee),
    ] {
        let p = PairParams { omega, ..params };
        let sweep = num(sweep_spectrum(&p, &deltas))?;
        if sweep.near_exceptional {
            eprintln!("warning: {tag} sweep passed near an exceptional point");
        }
        art.metric(&format!("{tag}_near_exceptional"), sweep.near_exceptional);
        art.metric(&format!("{tag}_omega_hz"), to_hz(omega));
        let eps: Vec<Vec<f64>> = (0..3)
            .map(|b| sweep.epsilons(b).iter().map(|&e| to_hz(e)).collect())
            .collect();
        let gam: Vec<Vec<f64>> = (0..3)
            .map(|b| sweep.gammas(b).iter().map(|&g| to_hz(g)).collect())
            .collect();
        art.table(
            &format!("spectrum_{tag}_re"),
            &[
                ("delta_hz", &delta_hz),
                ("epsilon0_hz", &eps[0]),
                ("epsilon1_hz", &eps[1]),
                ("epsilon2_hz", &eps[2]),
            ],
        )?;
        art.table(
            &format!("spectrum_{tag}_im"),
            &[
                ("delta_hz", &delta_hz),
                ("gamma0_hz", &gam[0]),
                ("gamma1_hz", &gam[1]),
                ("gamma2_hz", &gam[2]),
            ],
        )?;
    }
    art.finish(false)
}

fn cmd_evolve(config: &RunConfig, method: Method) -> Result<(), Failure> {
    let params = config.pair_params();
    num(params.validate())?;
    let ramp = config.ramp()?;
    let n = config.numerics.n_points.max(2);
    let times = linspace(0.0, ramp.total_time(), n);
    let tol = config.tol();
    let mut art = Artifacts::new(config, "evolve")?;
    match method {
        Method::Nh => {
            let res = num(evolve_nonhermitian(&params, &ramp, &ket_gg(), &times, &tol))?;
            let cols: Vec<Vec<f64>> =
                (0..3).map(|k| res.populations.iter().map(|p| p[k]).collect()).collect();
            art.metric("method", "nh");
            art.metric("final_norm2", *res.norm2.last().unwrap());
            art.table(
                "evolve_nh",
                &[
                    ("time_s", &times),
                    ("p_gg", &cols[0]),
                    ("p_eg", &cols[1]),
                    ("p_ee", &cols[2]),
                    ("norm2", &res.norm2),
                ],
            )?;
        }
        Method::Lindblad => {
            let rho0 = pure_state_density(&ket_gg());
            let res = num(evolve_lindblad(&params, &ramp, &rho0, &times, &tol))?;
            let diag = |k: usize| -> Vec<f64> {
                res.rhos.iter().map(|r| r[k][k].re).collect()
            };
            let surv: Vec<f64> = res.rhos.iter().map(nonvacuum_trace).collect();
            art.metric("method", "lindblad");
            art.metric("final_nonvacuum_trace", *surv.last().unwrap());
            art.table(
                "evolve_lindblad",
                &[
                    ("time_s", &times),
                    ("p_gg", &diag(0)),
                    ("p_eg", &diag(1)),
                    ("p_ee", &diag(2)),
                    ("nonvacuum_trace", &surv),
                ],
            )?;
        }
        Method::Mc => {
            let res = num(evolve_trajectories(
                &params,
                &ramp,
                &ket_gg(),
                config.numerics.n_traj,
                config.numerics.seed,
                &times,
                &tol,
            ))?;
            art.metric("method", "mc");
            art.metric("n_traj", config.numerics.n_traj);
            art.metric("seed", config.numerics.seed);
            art.metric("final_survival", *res.survival.last().unwrap());
            let pops: Vec<Vec<f64>> =
                (0..3).map(|k| res.populations.iter().map(|p| p[k]).collect()).collect();
            art.table(
                "evolve_mc",
                &[
                    ("time_s", &times),
                    ("survival", &res.survival),
                    ("survival_stderr", &res.survival_stderr),
                    ("p_gg", &pops[0]),
                    ("p_eg", &pops[1]),
                    ("p_ee", &pops[2]),
                ],
            )?;
        }
    }
    art.finish(false)
}

fn cmd_fig1(config: &RunConfig, check: bool) -> Result<(), Failure> {
    let params = config.pair_params();
    num(params.validate())?;
    let data = num(figure1_pipeline(&params, config.numerics.n_points.max(2)))?;
    let mut art = Artifacts::new(config, "figures fig1")?;
    let delta_hz: Vec<f64> = data.deltas.iter().map(|&d| to_hz(d)).collect();
    for (tag, sweep) in [("strong", &data.strong), ("zeno", &data.zeno)] {
        let eps: Vec<Vec<f64>> = (0..3)
            .map(|b| sweep.epsilons(b).iter().map(|&e| to_hz(e)).collect())
            .collect();
        let gam: Vec<Vec<f64>> = (0..3)
            .map(|b| sweep.gammas(b).iter().map(|&g| to_hz(g)).collect())
            .collect();
        art.table(
            &format!("fig1_{tag}"),
            &[
                ("delta_hz", &delta_hz),
                ("epsilon0_hz", &eps[0]),
                ("epsilon1_hz", &eps[1]),
                ("epsilon2_hz", &eps[2]),
                ("gamma0_hz", &gam[0]),
                ("gamma1_hz", &gam[1]),
                ("gamma2_hz", &gam[2]),
            ],
        )?;
    }
    let ov_re1: Vec<f64> = data.overlay.iter().map(|l| to_hz(l.lambda1.re)).collect();
    let ov_im1: Vec<f64> = data.overlay.iter().map(|l| to_hz(l.lambda1.im)).collect();
    let ov_re2: Vec<f64> = data.overlay.iter().map(|l| to_hz(l.lambda2.re)).collect();
    let ov_im2: Vec<f64> = data.overlay.iter().map(|l| to_hz(l.lambda2.im)).collect();
    art.table(
        "fig1_overlay",
        &[
            ("delta_hz", &delta_hz),
            ("lambda1_re_hz", &ov_re1),
            ("lambda1_im_hz", &ov_im1),
            ("lambda2_re_hz", &ov_re2),
            ("lambda2_im_hz", &ov_im2),
        ],
    )?;
    art.metric("omega_strong_hz", to_hz(data.omega_strong));
    art.metric("omega_zeno_hz", to_hz(data.omega_zeno));

    // Decay-rate sum rule on both sweeps.
    let mut sum_err = 0.0f64;
    for sweep in [&data.strong, &data.zeno] {
        for s in &sweep.states {
            let total: f64 = s.iter().map(|d| d.gamma()).sum();
            sum_err = sum_err.max((total - params.gamma_ee).abs() / params.gamma_ee);
        }
    }
    art.checks.push(Check::upper("sum_rule_rel_error", sum_err, 1e-10));

    // Reduced-model overlay on the local Zeno scale, |x| <= 5.
    let zeno_params = PairParams {
        omega: data.omega_zeno,
        ..params
    };
    let mut overlay_dev = 0.0f64;
    for (k, &d) in data.deltas.iter().enumerate() {
        let eff = num(build_effective_two_level(&zeno_params, d))?;
        if eff.x.abs() > 5.0 {
            continue;
        }
        let s = &data.zeno.states[k];
        let l = &data.overlay[k];
        let mut full: Vec<(f64, f64)> =
            (0..2).map(|b| (s[b].epsilon(), s[b].gamma())).collect();
        full.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut approx = [
            (l.lambda1.re, -2.0 * l.lambda1.im),
            (l.lambda2.re, -2.0 * l.lambda2.im),
        ];
        approx.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (f, a) in full.iter().zip(&approx) {
            overlay_dev = overlay_dev.max((f.1 - a.1).abs() / eff.gamma_eff);
        }
    }
    art.checks.push(Check::upper("overlay_dev_of_zeno_scale", overlay_dev, 0.1));

    // On-resonance effective rate against the closed-form oracle.
    let (p, q) = (zeno_params.p(), zeno_params.q());
    let eff0 = num(build_effective_two_level(&zeno_params, p - q))?;
    let oracle = 2.0 * zeno_params.omega * zeno_params.omega / zeno_params.gamma_ee;
    art.checks.push(Check::upper(
        "gamma_eff_oracle_rel_error",
        (eff0.gamma_eff - oracle).abs() / oracle,
        1e-12,
    ));
    art.finish(check)
}

fn cmd_fig3(config: &RunConfig, check: bool) -> Result<(), Failure> {
    let params = config.pair_params();
    num(params.validate())?;
    let delta_i = hz(config.ramp.delta_i);
    let speed = hz(config.ramp.delta_dot.abs()) * 1000.0;
    if !(speed > 0.0) {
        return Err(Failure::usage("delta_dot must be nonzero"));
    }
    let t_hold = if config.ramp.t_hold > 0.0 {
        config.ramp.t_hold * 1e-3
    } else {
        40e-3
    };
    let n = config.numerics.n_lifetimes.max(2);
    let delta_fs = linspace(hz(config.ramp.delta_i), hz(config.ramp.delta_f), n);
    let curve = num(figure3_pipeline(
        &params,
        delta_i,
        &delta_fs,
        speed,
        t_hold,
        &config.tol(),
    ))?;
    let mut art = Artifacts::new(config, "figures fig3")?;
    let delta_hz: Vec<f64> = curve.delta_f.iter().map(|&d| to_hz(d)).collect();
    let nonexp: Vec<f64> = curve
        .nonexponential
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    art.table(
        "fig3_rates",
        &[
            ("delta_f_hz", &delta_hz),
            ("gamma_sim", &curve.gamma_sim),
            ("gamma_branch", &curve.gamma_branch),
            ("gamma_pert", &curve.gamma_pert),
            ("nonexponential", &nonexp),
        ],
    )?;

    // Enhancement from a fine spectral sweep over the same window.
    let grid = linspace(hz(config.ramp.delta_i), hz(config.ramp.delta_f), 601);
    let sweep = num(sweep_spectrum(&params, &grid))?;
    let pert = num(perturbative_decay_rates(&params, &grid))?;
    let enhancement = (0..grid.len())
        .map(|k| pert[k][0] / sweep.states[k][0].gamma().max(1e-300))
        .fold(0.0f64, f64::max);
    art.metric("max_enhancement", enhancement);
    art.checks.push(Check::lower("zeno_enhancement", enhancement, 50.0));

    let mut sim_dev = 0.0f64;
    for k in 0..delta_fs.len() {
        // delta_f == delta_i degenerates to a sudden quench (zero-length
        // ramp), where no single branch is prepared.
        if delta_fs[k] == delta_i {
            continue;
        }
        if !curve.nonexponential[k] {
            sim_dev = sim_dev.max(
                (curve.gamma_sim[k] - curve.gamma_branch[k]).abs()
                    / curve.gamma_branch[k].max(1e-300),
            );
        }
    }
    art.checks.push(Check::upper("sim_vs_spectrum_rel", sim_dev, 0.05));
    art.finish(check)
}

fn cmd_fig4(config: &RunConfig, check: bool) -> Result<(), Failure> {
    let params = config.pair_params();
    num(params.validate())?;
    let model = config.ensemble();
    let speed = hz(config.ramp.delta_dot.abs()) * 1000.0;
    if !(speed > 0.0) {
        return Err(Failure::usage("delta_dot must be nonzero"));
    }
    let n = config.numerics.n_lifetimes.max(2);
    let delta_fs = linspace(hz(config.ramp.delta_i), hz(config.ramp.delta_f), n);
    let data = num(figure4_pipeline(
        &model,
        &params,
        hz(config.ramp.delta_i),
        &delta_fs,
        speed,
        &config.tol(),
    ))?;
    let mut art = Artifacts::new(config, "figures fig4")?;
    let delta_hz: Vec<f64> = data.delta_f.iter().map(|&d| to_hz(d)).collect();
    art.table("fig4_n_g", &[("delta_f_hz", &delta_hz), ("n_g", &data.n_g)])?;
    art.table(
        "fig4_n_total",
        &[("delta_f_hz", &delta_hz), ("n_total", &data.n_total)],
    )?;
    art.table(
        "fig4_n1",
        &[("delta_f_hz", &delta_hz), ("n1_atoms", &data.n1_atoms)],
    )?;
    art.table(
        "fig4_n2",
        &[
            ("delta_f_hz", &delta_hz),
            ("n2_atoms", &data.n2_atoms),
            ("n2_predicted", &data.n2_predicted),
        ],
    )?;
    art.metric("max_n2_mismatch", data.max_n2_mismatch);
    art.metric("max_n1_drift", data.max_n1_drift);
    art.checks.push(Check::upper("n2_adiabatic_mismatch", data.max_n2_mismatch, 0.02));
    art.checks.push(Check::upper("n1_drift", data.max_n1_drift, 0.01));
    art.finish(check)
}

// ---------------------------------------------------------------------------

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Failure::usage(format!("cannot read {}: {e}", path.display()))
            })?;
            toml::from_str(&text)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.out_dir {
        config.output.dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        config.numerics.seed = seed;
    }
    if let Some(omega) = cli.omega {
        config.physical.omega = omega;
    }
    if let Some(d) = cli.delta_i {
        config.ramp.delta_i = d;
    }
    if let Some(d) = cli.delta_f {
        config.ramp.delta_f = d;
    }
    if let Some(d) = cli.delta_dot {
        config.ramp.delta_dot = d;
    }
    if let Some(t) = cli.t_hold {
        config.ramp.t_hold = t;
    }
    num(config.pair_params().validate())?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut config = load_config(&cli)?;
    if let Some(Command::Evolve { n_traj, .. }) = &cli.command {
        if let Some(n) = n_traj {
            config.numerics.n_traj = *n;
        }
    }
    if cli.dump_config {
        let text = toml::to_string(&config)
            .map_err(|e| Failure::numerical(format!("config serialization: {e}")))?;
        print!("{text}");
        return Ok(());
    }
    match cli.command {
        None => Err(Failure::usage("no command given; see --help")),
        Some(Command::Spectrum {
            omega_ratio,
            delta_min,
            delta_max,
            n_points,
        }) => cmd_spectrum(&config, omega_ratio, delta_min, delta_max, n_points),
        Some(Command::Evolve { method, .. }) => cmd_evolve(&config, method),
        Some(Command::Figures { which, check }) => match which {
            Figure::Fig1 => cmd_fig1(&config, check),
            Figure::Fig3 => cmd_fig3(&config, check),
            Figure::Fig4 => cmd_fig4(&config, check),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

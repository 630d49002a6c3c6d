//! `dmf` — train, evaluate and sweep the deformable matched-filter receiver
//! against the simulated bandwidth-limited channel.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dmf_experiment::checkpoint::Checkpoint;
use dmf_experiment::config::{ExperimentConfig, Profile};
use dmf_experiment::export;
use dmf_experiment::harness::{
    self, evaluate_condition, reference_deformation, train_condition, ChainContext,
    TrainedCondition,
};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "dmf",
    about = "CAP modem simulator with a learned deformable matched-filter receiver",
    version
)]
struct Cli {
    /// TOML configuration overlaying the profile defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Parameter profile: `ci` (fast desk scale) or `paper` (full scale).
    #[arg(long, global = true, default_value = "ci")]
    profile: String,

    /// Master seed; every random stream derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Training granularity: `per-condition` or `pooled`.
    #[arg(long, global = true)]
    mode: Option<String>,

    /// Output directory for CSV artifacts and checkpoints.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConditionArgs {
    /// Normalized cutoff (fraction of the system bandwidth).
    #[arg(long)]
    omega_n: Option<f64>,

    /// Channel SNR in dB (overrides the power axis).
    #[arg(long, conflicts_with = "power_dbm")]
    snr_db: Option<f64>,

    /// Received power in dBm, mapped to SNR through the power map.
    #[arg(long)]
    power_dbm: Option<f64>,
}

impl ConditionArgs {
    fn resolve(&self, cfg: &ExperimentConfig) -> (f64, Option<f64>, f64) {
        let omega = self.omega_n.unwrap_or(cfg.omega_n[0]);
        match (self.snr_db, self.power_dbm) {
            (Some(snr), _) => (omega, None, snr),
            (None, Some(p)) => (
                omega,
                Some(p),
                dmf_core::channel::power_dbm_to_snr_db(p, &cfg.power_map),
            ),
            (None, None) => (omega, None, cfg.train_snr_db),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one condition and write its checkpoint and loss curve.
    Train(ConditionArgs),
    /// Evaluate a checkpoint on one condition and print the EVM report row.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        condition: ConditionArgs,
    },
    /// Train and evaluate the full cutoff x power grid, exporting all CSVs.
    Sweep,
    /// Export nominal and deformed filter taps for a checkpoint.
    ExportTaps {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        condition: ConditionArgs,
    },
    /// Run quick built-in self checks and exit nonzero on failure.
    Selftest,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let profile: Profile = cli.profile.parse()?;
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path, profile)?,
        None => ExperimentConfig::for_profile(profile),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = &cli.mode {
        cfg.mode = mode.parse()?;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = build_config(&cli)?;
    match cli.command {
        Command::Train(args) => {
            let (omega, _, snr) = args.resolve(&cfg);
            let ctx = ChainContext::new(&cfg)?;
            eprintln!(
                "training omega_n={omega} at snr={snr} dB ({} epochs, {} symbols/epoch)",
                cfg.train.epochs, cfg.train.symbols_per_epoch
            );
            let trained = train_condition(&cfg, &ctx, Some(omega), snr)?;
            let (ck, loss) = export::write_condition(&cfg, &trained, omega)?;
            let last = trained.losses.last().context("no epochs recorded")?;
            eprintln!(
                "final loss {:.6e} (evm {:.6e}); wrote {} and {}",
                last.total,
                last.evm,
                ck.display(),
                loss.display()
            );
        }
        Command::Evaluate {
            checkpoint,
            condition,
        } => {
            let (omega, power_dbm, snr) = condition.resolve(&cfg);
            let ck = Checkpoint::load(&checkpoint)?;
            if ck.params.filter_len() != cfg.system.filter_length {
                bail!(
                    "checkpoint filter length {} does not match the profile's {} (use --profile/--config accordingly)",
                    ck.params.filter_len(),
                    cfg.system.filter_length
                );
            }
            let ctx = ChainContext::new(&cfg)?;
            let trained = TrainedCondition::from_checkpoint(&ck, 0)?;
            let cell = evaluate_condition(&cfg, &ctx, &trained, omega, power_dbm, snr, 0, 0)?;
            println!("{}", dmf_core::receiver::EvmReport::csv_header());
            println!("{}", cell.report.to_csv_row());
            std::fs::create_dir_all(&cfg.out_dir)?;
            let path = cfg.out_dir.join(format!(
                "constellation_w{}_s{}.csv",
                export::compact(omega),
                export::compact(snr)
            ));
            std::fs::write(&path, export::constellation_csv(&cell.constellation))?;
            eprintln!("wrote {}", path.display());
        }
        Command::Sweep => {
            eprintln!(
                "sweep: {} cutoff values x {} power points, mode {}, seed {}",
                cfg.omega_n.len(),
                cfg.power_axis.len(),
                cfg.mode,
                cfg.seed
            );
            let result = harness::run_sweep(&cfg)?;
            let nominal = cfg.system.nominal_pair()?;
            let written = export::write_sweep(&cfg, &result, &nominal)?;
            eprintln!("wrote {} files under {}", written.len(), cfg.out_dir.display());
            for row in &result.cells {
                for cell in row {
                    println!("{}", cell.csv_row());
                }
            }
        }
        Command::ExportTaps {
            checkpoint,
            condition,
        } => {
            let (omega, _, _) = condition.resolve(&cfg);
            let ck = Checkpoint::load(&checkpoint)?;
            if ck.params.filter_len() != cfg.system.filter_length {
                bail!(
                    "checkpoint filter length {} does not match the profile's {}",
                    ck.params.filter_len(),
                    cfg.system.filter_length
                );
            }
            let ctx = ChainContext::new(&cfg)?;
            let trained = TrainedCondition::from_checkpoint(&ck, 0)?;
            let omega_index = cfg.omega_n.iter().position(|w| *w == omega).unwrap_or(0);
            let deformed = reference_deformation(&cfg, &ctx, &trained, omega, omega_index)?;
            let csv = export::taps_csv(&ctx.pair, &deformed)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            let path = cfg
                .out_dir
                .join(format!("taps_{}.csv", export::compact(omega)));
            std::fs::write(&path, csv)?;
            eprintln!("wrote {}", path.display());
        }
        Command::Selftest => selftest(&cfg)?,
    }
    Ok(())
}

/// Fast wiring checks; each prints one pass/fail line.
fn selftest(cfg: &ExperimentConfig) -> Result<()> {
    use dmf_core::dsp::{cap_modulate, normalize_unit_power};
    use dmf_core::neural::{hidden_dim, MlpParams};
    use dmf_core::receiver::{demodulate, evm_percent, qam_demap, qam_map};
    use rand::{Rng, SeedableRng};

    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{}  {name}  {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    check(
        "hidden-dim-rule",
        hidden_dim(192) == 256,
        format!("hidden_dim(192) = {}", hidden_dim(192)),
    );
    let params = MlpParams::zeros(191);
    check(
        "parameter-count",
        params.param_count() == 102_526,
        format!("count(L=191) = {}", params.param_count()),
    );

    let pair = cfg.system.nominal_pair()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = 2000;
    let bits: Vec<bool> = (0..2 * k).map(|_| rng.gen()).collect();
    let stream = qam_map(&bits, 4)?;
    let tx = normalize_unit_power(&cap_modulate(stream.symbols(), &pair)?)?;
    let (q, r) = pair.matched_taps();
    let symbols = demodulate(&tx, &q, &r, cfg.system.samples_per_symbol, 0, k)?;
    let evm = evm_percent(&symbols, stream.symbols())?;
    check(
        "loopback-evm",
        evm < 2.0,
        format!("noiseless loopback EVM {evm:.3}%"),
    );
    let back = qam_demap(&symbols, 4)?;
    check(
        "loopback-bits",
        back == bits,
        "noiseless loopback bit errors".into(),
    );

    let mut quick = cfg.clone();
    quick.omega_n = vec![0.6];
    quick.power_axis = dmf_experiment::PowerAxis::SnrDb(vec![25.0]);
    quick.train.epochs = 2;
    quick.train.standardizer_warmup = 3;
    quick.train.symbols_per_epoch = 500;
    let ctx = ChainContext::new(&quick)?;
    let a = train_condition(&quick, &ctx, Some(0.6), 25.0)?;
    let b = train_condition(&quick, &ctx, Some(0.6), 25.0)?;
    check(
        "determinism",
        a.losses == b.losses,
        "two identical short trainings".into(),
    );

    if failures > 0 {
        bail!("{failures} selftest check(s) failed");
    }
    Ok(())
}

//! Command-line front end: sweeps, noise calibration, bundled tables,
//! config validation. Exit codes: 0 ok, 2 bad input/config, 3 runtime
//! failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mgmsim_core::report::{format_sig, write_outputs};
use mgmsim_core::{
    calibrate_noise, config, fiber_only_xt, named_scenario, run_sweep, sensitivity_at_threshold,
    CalibrationTarget, CombinerMode, CrosstalkTable, Seed, SensitivityResult, SweepSpec,
};

#[derive(Parser)]
#[command(name = "mgmsim", version, about = "Mode-group IM-DD link simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a BER-vs-received-power sweep and write CSV outputs.
    Sweep(SweepArgs),
    /// Fit a group's signal-dependent noise coefficient to a target BER.
    Calibrate(CalibrateArgs),
    /// Print the bundled crosstalk tables and the fiber-only split.
    Tables,
    /// Parse a config file, resolve it, and print the canonical form.
    Validate {
        /// TOML config file.
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct SpecSource {
    /// TOML config file (named scenario plus overrides).
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Built-in scenario: table1_3mg or table2_2mg.
    #[arg(long)]
    scenario: Option<String>,
}

impl SpecSource {
    fn load(&self) -> Result<SweepSpec, String> {
        let spec = match (&self.config, &self.scenario) {
            (Some(path), None) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                config::resolve(&config::parse_toml(&text).map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())?
            }
            (None, Some(name)) => named_scenario(name).map_err(|e| e.to_string())?,
            _ => return Err("pass exactly one of --config or --scenario".into()),
        };
        Ok(spec)
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: SpecSource,
    /// Output directory for CSV files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 uses every core. Results are identical either way.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Override the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override frames per power point.
    #[arg(long)]
    frames: Option<usize>,
    /// Override power points: "start:step:count" or a comma list of dBm.
    #[arg(long)]
    rop: Option<String>,
    /// BER threshold used for the sensitivity readout.
    #[arg(long, default_value_t = 3.8e-3)]
    fec_ber: f64,
    /// Also write per-subcarrier SNR profiles (ratio combiner).
    #[arg(long)]
    subcarriers: bool,
    /// Also write equalized constellation scatters.
    #[arg(long)]
    constellations: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    source: SpecSource,
    /// Mode group to calibrate.
    #[arg(long)]
    group: usize,
    /// Combiner the target BER applies to.
    #[arg(long, default_value = "mrc")]
    combiner: String,
    /// Received power point, dBm.
    #[arg(long)]
    rop: f64,
    /// BER to hit.
    #[arg(long, default_value_t = 3.8e-3)]
    target_ber: f64,
    /// Relative BER tolerance to stop at.
    #[arg(long, default_value_t = 0.05)]
    tol: f64,
    /// Frames per evaluation.
    #[arg(long, default_value_t = 20)]
    frames: usize,
    /// Override the run seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_rop(text: &str) -> Result<Vec<f64>, String> {
    if let Some((start, rest)) = text.split_once(':') {
        let (step, count) = rest
            .split_once(':')
            .ok_or_else(|| format!("expected start:step:count, got `{text}`"))?;
        let start: f64 = start.trim().parse().map_err(|_| format!("bad start `{start}`"))?;
        let step: f64 = step.trim().parse().map_err(|_| format!("bad step `{step}`"))?;
        let count: usize = count.trim().parse().map_err(|_| format!("bad count `{count}`"))?;
        if count == 0 {
            return Err("count must be at least 1".into());
        }
        Ok((0..count).map(|i| start + step * i as f64).collect())
    } else {
        text.split(',')
            .map(|s| s.trim().parse().map_err(|_| format!("bad power `{s}`")))
            .collect()
    }
}

fn parse_combiner(text: &str) -> Result<CombinerMode, String> {
    CombinerMode::ALL
        .iter()
        .copied()
        .find(|m| m.as_str() == text)
        .ok_or_else(|| {
            let names: Vec<&str> = CombinerMode::ALL.iter().map(|m| m.as_str()).collect();
            format!("unknown combiner `{text}` (one of {})", names.join(", "))
        })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Calibrate(args) => cmd_calibrate(args),
        Cmd::Tables => cmd_tables(),
        Cmd::Validate { config } => cmd_validate(&config),
    }
}

fn usage_err(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn run_err(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(3)
}

fn cmd_sweep(args: SweepArgs) -> ExitCode {
    let mut spec = match args.source.load() {
        Ok(s) => s,
        Err(e) => return usage_err(&e),
    };
    if let Some(s) = args.seed {
        spec.seed = Seed(s);
    }
    if let Some(f) = args.frames {
        spec.frames_per_point = f;
    }
    if let Some(text) = &args.rop {
        match parse_rop(text) {
            Ok(v) => spec.rop_dbm = v,
            Err(e) => return usage_err(&e),
        }
    }
    if let Err(e) = spec.validate() {
        return usage_err(&e.to_string());
    }

    println!(
        "scenario {}  groups {:?}  {} frames/point  rop {} .. {} dBm ({} points)",
        spec.scenario.name,
        spec.scenario.groups.iter().map(|g| g.group).collect::<Vec<_>>(),
        spec.frames_per_point,
        format_sig(spec.rop_dbm[0]),
        format_sig(*spec.rop_dbm.last().unwrap()),
        spec.rop_dbm.len(),
    );

    let out = match run_sweep(&spec, args.jobs) {
        Ok(o) => o,
        Err(e) => return run_err(&e.to_string()),
    };

    // BER grid, one line per (power, group)
    for &rop in &spec.rop_dbm {
        for g in &spec.scenario.groups {
            let mut line = format!("rop {:+6.1}  mg{}  ", rop, g.group);
            for mode in CombinerMode::ALL {
                let r = out
                    .reports
                    .iter()
                    .find(|r| {
                        r.group == g.group && r.combiner == mode && r.rop_dbm == Some(rop)
                    })
                    .expect("report grid is dense");
                line.push_str(&format!("{} {:\u{a0}<9} ", mode.as_str(), format!("{:.2e}", r.ber)));
            }
            println!("{line}");
        }
    }

    // Sensitivity readout per group: each combiner's crossing plus the
    // diversity gain of the ratio combiner over the better single branch.
    println!("sensitivity at BER {:.1e} (dBm):", args.fec_ber);
    for g in &spec.scenario.groups {
        let mut sens = Vec::new();
        for mode in CombinerMode::ALL {
            let pts: Vec<(f64, f64)> = out
                .reports
                .iter()
                .filter(|r| r.group == g.group && r.combiner == mode)
                .map(|r| (r.rop_dbm.unwrap(), r.ber))
                .collect();
            let s = match sensitivity_at_threshold(&pts, args.fec_ber, true) {
                Ok(SensitivityResult::Crossing(p)) => Some(p),
                Ok(SensitivityResult::OutOfRange) => None,
                Err(e) => return run_err(&e.to_string()),
            };
            sens.push((mode, s));
        }
        let show = |s: Option<f64>| match s {
            Some(p) => format!("{p:+.2}"),
            None => "n/a".into(),
        };
        let mut line = format!("  mg{}  ", g.group);
        for (mode, s) in &sens {
            line.push_str(&format!("{} {}  ", mode.as_str(), show(*s)));
        }
        let single = [CombinerMode::Plus, CombinerMode::Minus]
            .iter()
            .filter_map(|m| sens.iter().find(|(mode, _)| mode == m).and_then(|(_, s)| *s))
            .fold(None::<f64>, |best, p| Some(best.map_or(p, |b| b.min(p))));
        let mrc = sens
            .iter()
            .find(|(m, _)| *m == CombinerMode::Mrc)
            .and_then(|(_, s)| *s);
        if let (Some(best), Some(mrc)) = (single, mrc) {
            line.push_str(&format!("gain {:+.2} dB", best - mrc));
        }
        println!("{line}");
    }

    let files = match write_outputs(
        &args.out,
        &out,
        spec.modem.payload_lo,
        args.subcarriers,
        args.constellations,
    ) {
        Ok(f) => f,
        Err(e) => return run_err(&e.to_string()),
    };
    for f in files {
        println!("wrote {}", f.display());
    }
    ExitCode::SUCCESS
}

fn cmd_calibrate(args: CalibrateArgs) -> ExitCode {
    let mut spec = match args.source.load() {
        Ok(s) => s,
        Err(e) => return usage_err(&e),
    };
    if let Some(s) = args.seed {
        spec.seed = Seed(s);
    }
    let combiner = match parse_combiner(&args.combiner) {
        Ok(c) => c,
        Err(e) => return usage_err(&e),
    };
    let target = CalibrationTarget {
        group: args.group,
        combiner,
        rop_dbm: args.rop,
        ber: args.target_ber,
        rel_tol: args.tol,
        frames: args.frames,
    };
    match calibrate_noise(&spec, &target) {
        Ok(kappa) => {
            println!(
                "group {} {} hits BER {:.2e} at {:+.1} dBm with kappa = {:.6e}",
                args.group, combiner.as_str(), args.target_ber, args.rop, kappa
            );
            ExitCode::SUCCESS
        }
        Err(e) => run_err(&e.to_string()),
    }
}

fn print_table(label: &str, t: &CrosstalkTable) {
    println!("{label} (span {} km), dB:", format_sig(t.span_km));
    let head: Vec<String> = t.groups.iter().map(|g| format!("{:>7}", format!("to mg{g}"))).collect();
    println!("  {:>8}  {}", "", head.join("  "));
    for (i, &src) in t.groups.iter().enumerate() {
        let row: Vec<String> = t.xt_db[i]
            .iter()
            .map(|&v| {
                if v.is_finite() {
                    format!("{v:>7.2}")
                } else {
                    format!("{:>7}", "-")
                }
            })
            .collect();
        println!("  from mg{src}  {}", row.join("  "));
    }
}

fn cmd_tables() -> ExitCode {
    let short = mgmsim_core::table_1km();
    let long = mgmsim_core::table_18km();
    print_table("short span", &short);
    println!();
    print_table("long span", &long);
    println!();
    println!("fiber-only crosstalk (splice/offset contribution removed):");
    for (a, b) in [(2usize, 3usize), (2, 4), (3, 4)] {
        match fiber_only_xt(&short, &long, a, b) {
            Ok(f) => println!(
                "  mg{a}<->mg{b}: {:.2} dB over {:.1} km extra fiber ({:.2} dB/km)",
                f.total_db, f.delta_km, f.per_km_db
            ),
            Err(e) => println!("  mg{a}<->mg{b}: {e}"),
        }
    }
    ExitCode::SUCCESS
}

fn cmd_validate(path: &PathBuf) -> ExitCode {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return usage_err(&format!("{}: {e}", path.display())),
    };
    let parsed = match config::parse_toml(&text) {
        Ok(p) => p,
        Err(e) => return usage_err(&e.to_string()),
    };
    // resolving proves the overrides produce a runnable spec
    let spec = match config::resolve(&parsed) {
        Ok(s) => s,
        Err(e) => return usage_err(&e.to_string()),
    };
    if let Err(e) = spec.validate() {
        return usage_err(&e.to_string());
    }
    let canon = match config::canonical(&parsed).and_then(|c| config::emit_toml(&c)) {
        Ok(t) => t,
        Err(e) => return usage_err(&e.to_string()),
    };
    print!("{canon}");
    ExitCode::SUCCESS
}

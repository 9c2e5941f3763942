use clap::Parser;
use ptcalc::cli::{dispatch, exit_code, Format, RunConfig, COMMANDS};
use ptcalc::{parallel, Error};
use std::path::PathBuf;
use std::process::ExitCode;

/// Spectral calculus and estimate checks for H = −d²/dx² − ν(ν+1)sech²x.
#[derive(Parser, Debug)]
#[command(name = "ptcalc", version)]
struct Args {
    /// One of: poly, wave, bound-states, transform-check, kernel, verify-decay, verify-weighted,
    /// scaling, hormander, weak11, lp, cz-demo, all
    command: String,

    /// JSON file with RunConfig fields; flags given here override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nu: Option<u32>,
    /// Grid half-width
    #[arg(long = "L")]
    half_width: Option<f64>,
    /// Grid points (power of two)
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    jmin: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    jmax: Option<i32>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    kmax: Option<f64>,
    /// Frequency nodes per band window
    #[arg(long)]
    nk: Option<usize>,
    /// one, mihlin, energy, heat:<t> or ipow:<beta>
    #[arg(long)]
    multiplier: Option<String>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
    /// Worker threads (0 = all cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

fn build_config(a: &Args) -> Result<RunConfig, Error> {
    let mut c = match &a.config {
        Some(p) => RunConfig::from_json_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = a.nu {
        c.nu = v;
    }
    if let Some(v) = a.half_width {
        c.half_width = v;
    }
    if let Some(v) = a.n {
        c.n_points = v;
    }
    if let Some(v) = a.jmin {
        c.j_min = v;
    }
    if let Some(v) = a.jmax {
        c.j_max = v;
    }
    if let Some(v) = a.eps {
        c.epsilon = v;
    }
    if let Some(v) = a.alpha {
        c.alpha = v;
    }
    if let Some(v) = a.kmax {
        c.k_max = v;
    }
    if a.nk.is_some() {
        c.n_k_per_band = a.nk;
    }
    if let Some(v) = &a.multiplier {
        c.multiplier_id = v.clone();
    }
    if let Some(v) = &a.format {
        c.format = v.parse::<Format>()?;
    }
    if let Some(v) = a.seed {
        c.seed = v;
    }
    Ok(c)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(j) = args.jobs {
        parallel::set_jobs(j);
    }
    let result = build_config(&args).and_then(|c| {
        if !COMMANDS.contains(&args.command.as_str()) {
            return Err(Error::Usage(format!("unknown command {:?}; expected one of {}", args.command, COMMANDS.join(", "))));
        }
        dispatch(&args.command, &c, &args.out)
    });
    match result {
        Ok(report) => {
            for r in &report.reports {
                println!("{:<32} {}", r.estimate_id, if r.pass { "pass" } else { "FAIL" });
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            eprintln!("{} finished in {:.1} s", report.command, report.elapsed_seconds);
            ExitCode::from(if report.pass() { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

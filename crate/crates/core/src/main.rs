use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chaoslab::harness::{run, Command, LambdaGrid, RunConfig};

#[derive(Parser)]
#[command(name = "chaoslab", version, about = "Monte-Carlo checks for multiple stochastic integrals")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct Shared {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Output CSV path (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Grid as min:max:count.
    #[arg(long, global = true, value_parser = parse_grid, allow_hyphen_values = true)]
    lambda: Option<LambdaGrid>,
}

#[derive(Args)]
struct Inputs {
    /// gaussian, cpoisson, or a JSON law file.
    #[arg(long)]
    law: Option<String>,
    #[arg(long)]
    kernel: Option<PathBuf>,
    #[arg(long)]
    partition: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Levy-Khinchine exponent of a first-order kernel.
    Lk(Inputs),
    /// Moments of the sampled increments.
    Simulate(Inputs),
    /// Isometry, Clark-Ocone and product-formula checks for a kernel.
    ChaosCheck(Inputs),
    /// Conditioning metrics for an adapted integrand.
    PocVerify {
        #[arg(long)]
        law: Option<String>,
        #[arg(long)]
        integrand: Option<PathBuf>,
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        head_cut: f64,
    },
    /// Fourth-moment conditions for double Poisson integrals.
    Clt {
        #[arg(long)]
        kernel: Option<PathBuf>,
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
    },
    /// Worked examples.
    #[command(subcommand)]
    Scenario(ScenarioCmd),
}

#[derive(Subcommand)]
enum ScenarioCmd {
    Block {
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
    },
    Switching {
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
    },
}

fn parse_grid(s: &str) -> Result<LambdaGrid, String> {
    s.parse().map_err(|e: chaoslab::error::Error| e.to_string())
}

fn config(cli: Cli) -> RunConfig {
    let inputs = |c: &mut RunConfig, i: Inputs| {
        c.law = i.law;
        c.kernel = i.kernel;
        c.partition = i.partition;
    };
    let mut c = match cli.command {
        Cmd::Lk(i) => {
            let mut c = RunConfig::new(Command::Lk);
            inputs(&mut c, i);
            c
        }
        Cmd::Simulate(i) => {
            let mut c = RunConfig::new(Command::Simulate);
            inputs(&mut c, i);
            c
        }
        Cmd::ChaosCheck(i) => {
            let mut c = RunConfig::new(Command::ChaosCheck);
            inputs(&mut c, i);
            c
        }
        Cmd::PocVerify { law, integrand, partition, head_cut } => {
            let mut c = RunConfig::new(Command::PocVerify);
            c.law = law;
            c.integrand = integrand;
            c.partition = partition;
            c.head_cut = head_cut;
            c
        }
        Cmd::Clt { kernel, partition, n_list } => {
            let mut c = RunConfig::new(Command::Clt);
            c.kernel = kernel;
            c.partition = partition;
            if let Some(n) = n_list {
                c.n_list = n;
            }
            c
        }
        Cmd::Scenario(ScenarioCmd::Block { n_list }) => {
            let mut c = RunConfig::new(Command::ScenarioBlock);
            if let Some(n) = n_list {
                c.n_list = n;
            }
            c
        }
        Cmd::Scenario(ScenarioCmd::Switching { n_list, steps }) => {
            let mut c = RunConfig::new(Command::ScenarioSwitching);
            if let Some(n) = n_list {
                c.n_list = n;
            }
            c.steps = steps;
            c
        }
    };
    c.seed = cli.shared.seed;
    c.trials = cli.shared.trials;
    c.workers = cli.shared.workers;
    c.out = cli.shared.out;
    if let Some(l) = cli.shared.lambda {
        c.lambda = l;
    }
    c
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(run(&config(cli)) as u8)
}

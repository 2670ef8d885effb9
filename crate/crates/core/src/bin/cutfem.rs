use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cutfem::app::{self, Overrides, Scenario};
use cutfem::geometry::{cut_pieces_rect, LevelSetGeometry, RigidMotion};
use cutfem::mesh::Rect;
use cutfem::quadrature::{cut_cell_rules, full_cell_quadrature};

#[derive(Parser)]
#[command(name = "cutfem", version, about = "Space-time CutFEM flow solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a TOML file or a builtin.
    Run(RunArgs),
    /// Print a builtin scenario as TOML.
    Scenario {
        name: String,
    },
    /// Dump a cell quadrature rule as CSV (x, y, w).
    Quadrature(QuadArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file.
    config: Option<PathBuf>,
    /// Builtin scenario name.
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
    #[arg(long)]
    refine: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    /// Final time.
    #[arg(long)]
    t_end: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Validate the configuration and the initial geometry only.
    #[arg(long)]
    dry_run: bool,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct QuadArgs {
    /// Cell as x_min x_max y_min y_max.
    #[arg(long, num_args = 4, value_names = ["X0", "X1", "Y0", "Y1"], allow_negative_numbers = true,
          default_values_t = [0.0, 1.0, 0.0, 1.0])]
    cell: Vec<f64>,
    /// Circular body as center_x center_y radius; without it the full cell rule is printed.
    #[arg(long, num_args = 3, value_names = ["CX", "CY", "R"], allow_negative_numbers = true)]
    circle: Option<Vec<f64>>,
    /// Points per direction.
    #[arg(long, default_value_t = 4)]
    order: usize,
    /// Print the rule on the embedded boundary instead of the fluid part.
    #[arg(long, requires = "circle")]
    boundary: bool,
}

fn run(args: RunArgs) -> cutfem::Result<()> {
    app::configure_threads(args.threads)?;
    let mut scenario = match (&args.config, &args.scenario) {
        (Some(path), None) => app::load_config(path)?,
        (None, Some(name)) => Scenario::builtin(name)?,
        _ => {
            return Err(cutfem::Error::Config(
                "give either a scenario file or --scenario <name>".into(),
            ))
        }
    };
    Overrides {
        refine: args.refine,
        k: args.k,
        r: args.r,
        tau: args.tau,
        t_end: args.t_end,
    }
    .apply(&mut scenario)?;
    if args.dry_run {
        print!("{}", app::dry_run(&scenario)?);
        return Ok(());
    }
    let summary = app::run(&scenario, args.out.as_deref())?;
    print!("{}", summary.text);
    Ok(())
}

fn quadrature(args: QuadArgs) -> cutfem::Result<()> {
    let rect = Rect::new(args.cell[0], args.cell[1], args.cell[2], args.cell[3]);
    let rule = match args.circle {
        None => full_cell_quadrature(&rect, args.order)?,
        Some(c) => {
            let geom = LevelSetGeometry::circle(RigidMotion::Fixed { center: [c[0], c[1]] }, c[2]);
            let h = rect.width().max(rect.height());
            let pieces = cut_pieces_rect(rect, h, 0, &geom, 0.0)?;
            let (volume, boundary) = cut_cell_rules(&pieces, args.order, args.order, args.order)?;
            if args.boundary {
                boundary.to_quadrature_rule()
            } else {
                volume
            }
        }
    };
    print!("{}", rule.to_csv());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Scenario { name } => Scenario::builtin(&name).and_then(|s| s.to_toml_string()).map(|t| print!("{t}")),
        Command::Quadrature(args) => quadrature(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

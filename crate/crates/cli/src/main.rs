mod args;
mod commands;
mod output;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "randcsp", version, about = "Random k-SAT, k-NAE and k-coloring experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random instance and print it in DIMACS form.
    Gen(args::GenArgs),
    /// Run a solver on one instance.
    Solve(args::SolveArgs),
    /// Decide satisfiability with the complete solver.
    Decide(args::DecideArgs),
    /// List all solutions of a small instance.
    Enumerate(args::EnumerateArgs),
    /// Solution-space geometry of one instance or across a density grid.
    Geometry(args::GeometryArgs),
    /// First and second moment bounds.
    Bounds(args::BoundsArgs),
    /// Satisfiability and solver success rates over a density grid.
    Sweep(args::SweepArgs),
    /// Empirical threshold density by bisection.
    Threshold(args::ThresholdArgs),
    /// Reshape a sweep CSV into plotting series.
    PlotData(args::PlotDataArgs),
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Gen(a) => commands::gen(a),
        Command::Solve(a) => commands::solve(a),
        Command::Decide(a) => commands::decide(a),
        Command::Enumerate(a) => commands::enumerate(a),
        Command::Geometry(a) => commands::geometry(a),
        Command::Bounds(a) => commands::bounds(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Threshold(a) => commands::threshold(a),
        Command::PlotData(a) => commands::plot_data(a),
    }
}

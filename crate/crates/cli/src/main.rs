mod cli;
mod commands;
mod output;

use clap::Parser;
use cli::{Cli, Command};
use poseval_core::assignment::AssignmentError;
use poseval_core::evaluation::EvaluationError;
use poseval_core::fieldcal::FieldcalError;
use poseval_core::geometry::GeometryError;
use poseval_core::io::IoError;
use poseval_core::metrics::MetricError;
use poseval_core::symmetry::SymmetryError;
use std::process::ExitCode;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_SEMANTIC: u8 = 3;

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn input(e: impl Into<anyhow::Error>) -> Failure {
        Failure {
            code: EXIT_INPUT,
            error: e.into(),
        }
    }

    pub fn semantic(e: impl Into<anyhow::Error>) -> Failure {
        Failure {
            code: EXIT_SEMANTIC,
            error: e.into(),
        }
    }
}

pub type CmdResult = Result<(), Failure>;

macro_rules! input_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::input(e)
            }
        }
    )*};
}

input_errors!(
    anyhow::Error,
    IoError,
    SymmetryError,
    AssignmentError,
    std::io::Error,
    serde_json::Error
);

impl From<EvaluationError> for Failure {
    fn from(e: EvaluationError) -> Self {
        match e {
            EvaluationError::InvalidThreshold(_) | EvaluationError::InvalidConfig(_) => Failure::input(e),
            _ => Failure::semantic(e),
        }
    }
}

impl From<FieldcalError> for Failure {
    fn from(e: FieldcalError) -> Self {
        use FieldcalError::*;
        match e {
            EmptyInput | LengthMismatch(..) | NonPositiveDepth(_) | NonPositiveSample(_) | InvalidParameter(_)
            | DuplicateObject(_) => Failure::input(e),
            _ => Failure::semantic(e),
        }
    }
}

impl From<MetricError> for Failure {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::UnknownMetric(_) => Failure::input(e),
            _ => Failure::semantic(e),
        }
    }
}

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        Failure::semantic(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let ctx = commands::Ctx {
        seed: cli.seed,
        parallel: pool.current_num_threads() > 1,
    };
    let result = pool.install(|| match &cli.command {
        Command::Eval(a) => commands::eval::eval(&ctx, a),
        Command::Curve(a) => commands::eval::curve(&ctx, a),
        Command::Simulate(a) => commands::eval::simulate(&ctx, a),
        Command::CalibrateDepth(a) => commands::field::calibrate_depth(&ctx, a),
        Command::RefineLs(a) => commands::field::refine_ls(&ctx, a),
        Command::ValidateViews(a) => commands::field::validate_views(&ctx, a),
        Command::Lap(a) => commands::tools::lap(&ctx, a),
        Command::Symmetries(a) => commands::tools::symmetries(&ctx, a),
        Command::SampleMesh(a) => commands::tools::sample_mesh(&ctx, a),
        Command::Metric(a) => commands::tools::metric(&ctx, a),
        Command::Assignments(a) => commands::tools::assignments(&ctx, a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

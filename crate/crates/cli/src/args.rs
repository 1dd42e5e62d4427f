use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Lowest working precision accepted by `--prec`.
pub const MIN_PRECISION: u32 = 16;
/// Largest `|n|` accepted by `fib` and `lucas`.
pub const MAX_FIB_INDEX: i64 = 1_000_000;

#[derive(Debug, Parser)]
#[command(name = "phibbp", version, about = "Golden-ratio arctangent identities and BBP-type series")]
pub struct Cli {
    /// Working precision in bits.
    #[arg(long, global = true, env = "PHIBBP_PREC", default_value_t = 128,
          value_parser = clap::value_parser!(u32).range(MIN_PRECISION as i64..))]
    pub prec: u32,

    #[arg(long, global = true, value_enum, default_value_t = OutputMode::Plain)]
    pub output: OutputMode,

    /// Identity catalog file replacing the built-in one.
    #[arg(long, global = true, value_name = "PATH")]
    pub identities: Option<PathBuf>,

    /// Formula catalog file replacing the built-in one.
    #[arg(long, global = true, value_name = "PATH")]
    pub formulas: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputMode {
    /// Human-readable text.
    Plain,
    /// One JSON object per line.
    Structured,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a catalog formula to the working precision.
    Eval { name: String },
    /// Extract radix digits of an integer-base formula at a position.
    Digits {
        name: String,
        /// Number of digits skipped after the radix point.
        #[arg(long, default_value_t = 0)]
        pos: u64,
        #[arg(long, default_value_t = 8)]
        count: usize,
    },
    /// Verify catalog identities.
    Verify(VerifyArgs),
    /// Golden-ratio base expansion of a formula or an expression.
    Phinary {
        /// Formula name, or an expression such as `2`, `3/7` or `sqrt(5)`.
        #[arg(allow_hyphen_values = true)]
        value: String,
        /// Fractional digits to emit.
        #[arg(long, default_value_t = 32)]
        digits: usize,
        /// Insert a space every this many fractional digits.
        #[arg(long)]
        group: Option<usize>,
    },
    /// Fibonacci number, any sign of index.
    Fib {
        #[arg(allow_negative_numbers = true)]
        n: i64,
    },
    /// Lucas number, any sign of index.
    Lucas {
        #[arg(allow_negative_numbers = true)]
        n: i64,
    },
    /// List identities and formulas.
    Catalog,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Identity to check; sweeps its domain unless parameter values are given.
    pub id: Option<String>,
    /// Sweep every identity in the catalog.
    #[arg(long, conflicts_with = "id")]
    pub all: bool,
    /// Largest |parameter| visited by a sweep.
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(i64).range(1..))]
    pub bound: i64,
    /// Terms kept from infinite sums.
    #[arg(long, default_value_t = 64)]
    pub terms: u64,
    #[arg(long, allow_negative_numbers = true)]
    pub k: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    pub n: Option<i64>,
    /// Further parameter bindings, `name=value`.
    #[arg(long = "set", value_name = "NAME=VALUE", value_parser = parse_binding)]
    pub set: Vec<(String, i64)>,
    /// Print every row, not only the per-record summary.
    #[arg(long)]
    pub rows: bool,
}

fn parse_binding(s: &str) -> Result<(String, i64), String> {
    let (name, value) = s.split_once('=').ok_or("expected NAME=VALUE")?;
    let value = value.trim().parse().map_err(|e| format!("bad value `{value}`: {e}"))?;
    Ok((name.trim().to_string(), value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn bindings() {
        assert_eq!(parse_binding("p=3"), Ok(("p".into(), 3)));
        assert_eq!(parse_binding(" n = -2"), Ok(("n".into(), -2)));
        assert!(parse_binding("n").is_err());
        assert!(parse_binding("n=x").is_err());
    }

    #[test]
    fn precision_floor() {
        assert!(Cli::try_parse_from(["phibbp", "--prec", "15", "catalog"]).is_err());
        let cli = Cli::try_parse_from(["phibbp", "fib", "-3", "--prec", "16"]).unwrap();
        assert_eq!(cli.prec, 16);
        assert!(matches!(cli.command, Command::Fib { n: -3 }));
    }
}

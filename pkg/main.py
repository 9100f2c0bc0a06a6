"""
Command-line entry point for SIMLab.
Runs analyze, flow, verify and sweep commands from JSON run configurations.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

# Add project root to path for imports
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

# Load environment variables from .env file
from dotenv import load_dotenv
load_dotenv(project_root / "Config" / ".env")

from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from Config.config import RunConfig, load_and_validate
from cli import (
    COMMANDS, EXIT_AMBIGUOUS, EXIT_CONFIG, EXIT_FAILED, EXIT_OK, cmd_activations,
)
from utils.errors import (
    AmbiguityError, BudgetError, ConfigError, NotFixedPointError, NotOnManifoldError,
    ShapeError, SimLabError, UnknownNameError,
)

console = Console()

CONFIG_ERRORS = (ConfigError, UnknownNameError, BudgetError, ShapeError, NotOnManifoldError, NotFixedPointError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simlab", description="Symmetry-induced manifold lab")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, entry in COMMANDS.items():
        p = sub.add_parser(name, help=entry["description"])
        p.add_argument("--config", required=name != "verify", help="Path to a JSON run configuration")
        p.add_argument("--out", help="Output file (directory for sweep)")
        if name == "verify":
            p.add_argument("--suite", help="Suite name; overrides verify.suite")
    sub.add_parser("list-activations", help="Show the registered activations")
    return parser


def setup_logging(level: str) -> None:
    logging.basicConfig(level=level, format="%(message)s", datefmt="[%X]",
                        handlers=[RichHandler(console=console, show_path=False)], force=True)


def print_activations() -> None:
    """Render the activation registry as a table."""
    table = Table(title="Activations")
    for column in ("name", "parity", "sigma(0)", "sigma'(0)", "class", "description"):
        table.add_column(column)
    for row in cmd_activations():
        table.add_row(row["name"], row["parity"], f"{row['value_at_zero']:g}", f"{row['deriv_at_zero']:g}",
                      row["classification"], row["description"])
    console.print(table)


def default_out(command: str, output_dir: str) -> str:
    if command == "sweep":
        return str(Path(output_dir) / "sweep")
    return str(Path(output_dir) / f"{command}.json")


def run(args: argparse.Namespace) -> int:
    """Load configuration, dispatch to the command and report the outcome."""
    run_config, system_config = load_and_validate(args.config)
    setup_logging(system_config.log_level)
    if run_config is None:
        run_config = RunConfig()
    console.print(f"✓ Configuration loaded ({args.config or 'defaults'})")

    if args.command == "verify" and args.suite:
        run_config.verify.suite = args.suite
    out = args.out or default_out(args.command, system_config.output_dir)

    result = COMMANDS[args.command]["function"](run_config, out, system_config)
    marker = "✓" if result.exit_code == EXIT_OK else "❌"
    console.print(f"{marker} {args.command}: {result.summary}")
    for path in result.outputs:
        console.print(f"  wrote {path}")
    return result.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    """Main execution function; returns the process exit code."""
    args = build_parser().parse_args(argv)
    if args.command == "list-activations":
        print_activations()
        return EXIT_OK
    try:
        return run(args)
    except CONFIG_ERRORS as e:
        console.print(f"❌ Configuration error: {e}")
        return EXIT_CONFIG
    except AmbiguityError as e:
        console.print(f"❌ Ambiguous classification: {e}")
        return EXIT_AMBIGUOUS
    except SimLabError as e:
        console.print(f"❌ {type(e).__name__}: {e}")
        return EXIT_FAILED
    except KeyboardInterrupt:
        console.print("\n⚠️  Execution interrupted by user")
        return EXIT_FAILED


if __name__ == "__main__":
    exit_code = main()
    sys.exit(exit_code)

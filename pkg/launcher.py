#!/usr/bin/env python3
"""
Helmholtz Stability Lab Launcher
Single command-line entry point for the pipeline stages and stability sweeps
"""
import argparse
import asyncio
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import dotenv

# Load environment variables
dotenv.load_dotenv()

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / "src"))

from src.harness.config import ExperimentConfig, load_experiment_config
from src.harness.experiment_manager import run_impedance_experiment, run_stability_experiment
from src.harness.fitting import Coordinates, fit_scaling
from src.harness.stages import run_cgo_stage, run_dtn_stage, run_forward_stage, run_reconstruct_stage, run_runge_stage
from src.harness.records import StabilityRecord, read_records_csv

SUBCOMMANDS = ["forward", "dtn", "cgo", "runge", "reconstruct", "stability", "impedance", "fit"]


class LabSettings:
    """Settings read from environment variables"""

    def __init__(self):
        self.config_path: Optional[str] = os.getenv("LAB_CONFIG")
        self.log_level: str = os.getenv("LAB_LOG_LEVEL", "INFO")


def _load(args: argparse.Namespace, settings: LabSettings) -> ExperimentConfig:
    overrides: Dict[str, Any] = {"seed": args.seed, "threads": args.threads, "output_dir": args.out}
    return load_experiment_config(args.config or settings.config_path, overrides)


def _summarize(records: List[StabilityRecord]) -> bool:
    failed = [r for r in records if not r.succeeded]
    print("=" * 50)
    for record in records:
        if record.succeeded:
            print(
                f"✅ λ={record.lam:g} level={record.level:g} [{record.status}] "
                f"δ={record.delta:.3e} H⁻¹ error={record.error_hm1:.3e} modulus={record.modulus:.3e}"
            )
        else:
            print(f"❌ λ={record.lam:g} level={record.level:g}: {record.error}")
    print("=" * 50)
    print(f"📊 {len(records) - len(failed)}/{len(records)} records succeeded")
    return not failed


def run_fit(args: argparse.Namespace) -> bool:
    if not args.records:
        print("❌ --records is required for fit")
        return False
    rows = read_records_csv(args.records)
    fit = fit_scaling(rows, args.x, args.y, Coordinates(args.coords))
    print(f"📈 {args.y} vs {args.x}: {fit}")
    return True


def run_command(args: argparse.Namespace, settings: LabSettings) -> bool:
    """Dispatch one subcommand; returns True when everything succeeded."""
    if args.command == "fit":
        return run_fit(args)

    config = _load(args, settings)
    print(f"🔬 Running '{args.command}' for experiment '{config.name}'")
    print(f"📁 Output directory: {config.output.directory}")
    print("=" * 50)

    if args.command == "forward":
        rows = run_forward_stage(config)
    elif args.command == "dtn":
        rows = run_dtn_stage(config)
    elif args.command == "cgo":
        rows = run_cgo_stage(config)
    elif args.command == "runge":
        rows = run_runge_stage(config)
    elif args.command == "reconstruct":
        return _summarize(list(run_reconstruct_stage(config)))
    elif args.command == "stability":
        return _summarize(asyncio.run(run_stability_experiment(config)))
    elif args.command == "impedance":
        return _summarize(asyncio.run(run_impedance_experiment(config)))
    else:
        raise ValueError(f"Unknown command: {args.command}")

    print(f"✅ {args.command}: {len(rows)} rows written to {config.output.directory}")
    return True


def main():
    """Main entry point with command line arguments"""
    parser = argparse.ArgumentParser(
        description="Helmholtz Stability Lab - inverse potential problem experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python launcher.py stability                                   # Dirichlet sweep from the default config
  python launcher.py stability --config my.toml --seed 3 --out results/run3
  python launcher.py impedance --threads 4                       # Robin-to-Dirichlet sweep
  python launcher.py cgo                                         # CGO remainder decay table
  python launcher.py fit --records results/records.csv --x delta --y error_hm1
        """,
    )

    parser.add_argument("command", choices=SUBCOMMANDS, help="Pipeline stage or experiment to run")
    parser.add_argument("--config", type=str, help="TOML or JSON experiment file (default: src/harness/experiment_config.toml)")
    parser.add_argument("--seed", type=int, help="Random seed for map perturbations")
    parser.add_argument("--out", type=str, help="Output directory")
    parser.add_argument("--threads", type=int, help="Worker threads for record evaluation")
    parser.add_argument("--records", type=str, help="Records CSV to fit (fit only)")
    parser.add_argument("--x", type=str, default="delta", help="x column for fit (default: delta)")
    parser.add_argument("--y", type=str, default="error_hm1", help="y column for fit (default: error_hm1)")
    parser.add_argument(
        "--coords",
        type=str,
        default="loglog",
        choices=[c.value for c in Coordinates],
        help="Fit coordinates (default: loglog)",
    )

    args = parser.parse_args()
    settings = LabSettings()

    # Set up logging
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    try:
        ok = run_command(args, settings)
    except KeyboardInterrupt:
        print("\n👋 Goodbye!")
        sys.exit(1)
    except Exception as e:
        print(f"❌ Error: {e}")
        sys.exit(1)
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()

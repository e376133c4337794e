import argparse
import logging
import os
import sys
from datetime import datetime

from configuration import load_config
from services.run_service import COMMANDS, RunService
from utilities.errors import ConfigurationError

os.makedirs("logs", exist_ok=True)

# Configure logging to output both to a file and the console.
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.FileHandler("logs/spectral_run.log"),  # Log file for persistent logs.
        logging.StreamHandler()                        # Stream logs to the console.
    ]
)

# Create a logger instance for this module.
logger = logging.getLogger(__name__)


def run_command(command, config_path, out_dir=None, threads=None, seed=None):
    """
    Run one toolkit command on a configuration file.

    Args:
        command (str): One of bands, gap, sweep, feshbach, kernel, verify.
        config_path (str): Path of the YAML run configuration.
        out_dir (str): Output directory overriding run.out_dir.
        threads (int): Thread count overriding SPECTRAL_THREADS and run.threads.
        seed (int): Seed overriding run.seed.

    Returns:
        int: Exit status, 1 when the verify suite reports a failed invariant.
    """
    config = load_config(config_path)
    service = RunService(config, out_dir=out_dir, threads=threads, seed=seed)
    logger.info(f"Running '{command}' with {service.threads} thread(s), output in {service.writer.out_dir}")

    result = service.run(command)
    if result.failed:
        logger.warning(f"Failed invariants: {', '.join(result.failed)}")
        return 1
    return 0


def build_parser():
    parser = argparse.ArgumentParser(description="Spectral gap toolkit for periodic Pauli-type Hamiltonians")
    parser.add_argument('command', choices=COMMANDS, help='Command to run')
    parser.add_argument('--config', required=True, help='Path of the YAML run configuration')
    parser.add_argument('--out', default=None, help='Output directory (overrides run.out_dir)')
    parser.add_argument('--threads', type=int, default=None, help='Worker threads (overrides SPECTRAL_THREADS)')
    parser.add_argument('--seed', type=int, default=None, help='Seed for randomized spot checks (overrides run.seed)')
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        start_time = datetime.now()
        logger.info(f"Command '{args.command}' started at {start_time}")

        status = run_command(args.command, args.config, out_dir=args.out, threads=args.threads, seed=args.seed)

        end_time = datetime.now()
        logger.info(f"Command '{args.command}' completed at {end_time}")
        logger.info(f"Total duration: {end_time - start_time}")
        return status
    except ConfigurationError as e:
        logger.error(f"Invalid configuration: {str(e)}")
        return 2
    except Exception as e:
        logger.error(f"Error during '{args.command}': {str(e)}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())

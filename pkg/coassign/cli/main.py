"""Command-line entry: argument parsing, logging setup and exit codes."""
import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from coassign import __version__
from coassign.cli.commands import COMMANDS
from coassign.cli.config import load_run_config
from coassign.errors import CoAssignError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2

LOG_ENV_VAR = 'CODETR_LOG'
LOG_LEVELS = {
    'error': logging.ERROR,
    'info': logging.INFO,
    'debug': logging.DEBUG,
}


def configure_logging() -> None:
    """Root logger on stderr at the level named by ``CODETR_LOG`` (default info)."""
    raw = os.getenv(LOG_ENV_VAR, 'info').strip().lower()
    level = LOG_LEVELS.get(raw, logging.INFO)
    logging.basicConfig(level=level, stream=sys.stderr, force=True,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    if raw not in LOG_LEVELS:
        logger.warning('Unknown %s=%r, logging at info', LOG_ENV_VAR, raw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='coassign',
        description='Collaborative hybrid label assignment: one-to-many assigners, '
                    'one-to-one matching, query targets and diagnostics',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py assign --input scenes.json --output out/
  python main.py targets --config run.json --threads 4
  python main.py diagnose --input scenes.json --output out/ --seed 7
        """
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)
    for name, help_text in (
        ('assign', 'run every auxiliary head\'s assigner and report positives'),
        ('match', 'one-to-one Hungarian matching of predictions to ground truth'),
        ('targets', 'query-group layout, positive-query seeds and target bundles'),
        ('diagnose', 'IoF-IoB curves and matching instability'),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument('--config', help='JSON run configuration')
        cmd.add_argument('--input', help='scene file (JSON)')
        cmd.add_argument('--output', help='output directory')
        cmd.add_argument('--seed', type=int, help='seed for synthetic proposals')
        cmd.add_argument('--threads', type=int, help='worker threads')
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv``, run the subcommand and return the exit code."""
    load_dotenv()
    configure_logging()
    args = build_parser().parse_args(argv)
    overrides = {'input': args.input, 'output': args.output, 'seed': args.seed, 'threads': args.threads}
    try:
        config = load_run_config(args.config, overrides)
        written = COMMANDS[args.command](config)
    except CoAssignError as exc:
        logger.error('%s failed: %s', args.command, exc)
        return EXIT_INVALID
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        logger.error('%s failed: %s', args.command, exc)
        return EXIT_IO
    for key, path in written.items():
        logger.info('%s -> %s', key, path)
    return EXIT_OK


def main() -> None:
    sys.exit(run())

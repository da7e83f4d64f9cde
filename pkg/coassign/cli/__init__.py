from coassign.cli.commands import (COMMANDS, OUTPUT_FILES, cmd_assign,
                                   cmd_diagnose, cmd_match, cmd_targets)
from coassign.cli.config import (RunConfig, SceneFile, SceneImage,
                                 load_run_config, load_scene, parse_scene)
from coassign.cli.main import (EXIT_INVALID, EXIT_IO, EXIT_OK, build_parser,
                               configure_logging, main, run)

__all__ = [
    'COMMANDS',
    'EXIT_INVALID',
    'EXIT_IO',
    'EXIT_OK',
    'OUTPUT_FILES',
    'RunConfig',
    'SceneFile',
    'SceneImage',
    'build_parser',
    'cmd_assign',
    'cmd_diagnose',
    'cmd_match',
    'cmd_targets',
    'configure_logging',
    'load_run_config',
    'load_scene',
    'main',
    'run',
]

# app/main.py
import logging
import sys
from typing import Optional, Sequence

from app.ui.cli_interface import CommandLineInterface

logger = logging.getLogger(__name__)


def main(argv: Optional[Sequence[str]] = None) -> int:
    # stdout carries command results, so logs go to stderr
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )
    try:
        return CommandLineInterface().run(argv)
    except KeyboardInterrupt:
        logger.warning("Interrupted.")
        return 130


if __name__ == '__main__':
    sys.exit(main())

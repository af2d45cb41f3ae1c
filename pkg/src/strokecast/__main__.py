"""Strokecast command-line entry point.

Forwards ``python -m strokecast`` to :func:`strokecast.cli.strokecast_cli.main`,
the same function the ``strokecast`` console script calls.

Examples:
    Run Strokecast as a module:

        $ python -m strokecast stats --n 242 --min-rate

    This is equivalent to using the installed console script:

        $ strokecast stats --n 242 --min-rate
"""

from strokecast.cli.strokecast_cli import main

if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())

"""Command-line interface for Strokecast.

The CLI is implemented in :mod:`strokecast.cli.strokecast_cli` and is exposed
through both the ``strokecast`` console script and ``python -m strokecast``.

Common examples:

.. code-block:: bash

    strokecast synth --out ./data --writers-per-gender 20 --seed 7
    strokecast experiment --data ./data --seed 7 --out ./results --trials 2
    python -m strokecast --version
"""

"""Entry point for `python -m emslab`."""

from emslab.cli import app

app()

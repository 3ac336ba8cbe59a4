"""Command line, file formats, exact oracle and Monte-Carlo experiments."""

from .mechanism import MechanismResult, run_mechanism

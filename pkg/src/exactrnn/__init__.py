"""Exact-arithmetic saturated-linear recurrent networks.

Subpackages cover, in dependency order: word/stream encodings
(``words``), the network simulator (``network``), symbolic machine
models (``machines``), the machine-to-network compiler (``compiler``),
augmented-network runners and cross-simulation procedures
(``augmented``), advice/compressibility tooling (``nonuniform``), a
small zoo of worked examples (``zoo``), and a command line front end
(``cli``).
"""

__version__ = "0.1.0"

"""Intra-SM register and scratchpad sharing between thread-block pairs.

Modules: ``occupancy`` (resident-block arithmetic, waste, hardware cost),
``asmreorder`` (register declaration reordering), ``workload`` (synthetic
kernels), ``sharing`` (pair-lock protocol), ``scheduler`` (LRR/GTO/OWF),
``engine`` (cycle-level simulator) and ``cli``.
"""

__version__ = "0.1.0"

"""Running maxima of phi-subgaussian double arrays.

Modules: :mod:`phimax.orlicz` (N-functions and conjugates),
:mod:`phimax.tails` (norm estimation and tail models),
:mod:`phimax.conditions` (finiteness checks), :mod:`phimax.simulate`,
:mod:`phimax.maxima`, :mod:`phimax.montecarlo` and :mod:`phimax.cli`.
"""

__version__ = "0.1.0"

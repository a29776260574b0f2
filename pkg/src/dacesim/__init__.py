"""Data-aided channel estimation for OFDM and MIMO-OFDM links.

Modules: :mod:`~dacesim.ofdm` (constellations, framing, transforms),
:mod:`~dacesim.nonlinear` (companding, PA model, PAPR statistics),
:mod:`~dacesim.channel` (fading and noise), :mod:`~dacesim.estimate`
(LS/LMMSE and reliable-tone selection), :mod:`~dacesim.detect` (MMSE
detection and error counts) and :mod:`~dacesim.harness` (simulation sweeps
and the ``dace-sim`` command).
"""

from .errors import ConfigError, InputShapeError, SingularSystemError, UndefinedMetricError

__version__ = "0.1.0"

__all__ = ["ConfigError", "InputShapeError", "SingularSystemError", "UndefinedMetricError",
           "__version__"]

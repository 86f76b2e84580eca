"""Geometry-based stochastic MIMO channel simulator for industrial IoT scenes.

Twin-bounce clusters carry specular (SMC) and dense (DMC) multipath; the
package draws environments, synthesizes time-variant channel coefficients,
and estimates correlation functions and RMS delay-spread statistics.
"""

__version__ = "0.1.0"

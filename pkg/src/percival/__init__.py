"""Perceptual ad blocking engine.

A compact SqueezeNet-style CNN classifies decoded images at the one point
every frame passes before display; ad frames are blocked or replaced. The
package also ships an EasyList-subset filter engine (for labeling and as a
baseline), corpus tooling, an evaluation harness, and an HTTP service/proxy.
"""

__version__ = "0.1.0"

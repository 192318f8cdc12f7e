"""Context-conditioned title text generation.

Given a text-free book cover, a target-location mask, and a plain
rendering of the desired title, generate a stylized title image whose
font shape and color fit the cover.
"""

__version__ = "0.1.0"

"""Environment-semantics aided beam prediction.

Synthetic indoor scenes, a first-order specular propagation oracle,
semantic feature / graph extraction, a from-scratch SMO support vector
machine for channel-quality evaluation and a from-scratch GIN for
maximum-power scatterer detection.
"""

__version__ = "0.1.0"

"""Dual-domain MRI classification pipeline.

A CNN classifier whose experimental arm sees each grayscale image together
with the real and imaginary planes of its 2D Fourier transform, compared
against a grayscale-only control arm, with confusion-matrix/specificity/AUC
evaluation at key epochs and a from-scratch UMAP projection of the latent
embeddings.
"""

__version__ = "0.1.0"

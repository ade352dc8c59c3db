"""Item-alignment experiment toolkit.

Submodules:

- ``corpus``: item records, two-level label scheme, splits, subsampling
- ``embeddings``: embedding file format, synthetic planted vectors
- ``classifiers``: nine from-scratch classifiers behind one registry
- ``metrics``: exact-rational classification metrics and report tables
- ``diagnostics``: cosine similarity, density KL, PCA/t-SNE/ISOMAP
- ``experiments``: ablation grids, model comparison, cross-corpus transfer
- ``cli``: the ``itemalign`` command-line pipeline
"""

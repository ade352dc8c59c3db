"""Sentence-encoder adapter for the itemalign pipeline.

Submodules:

- ``encoder``: composed-input reader, transformer encoder, token report
- ``cli``: the ``itemalign-encode`` command
"""

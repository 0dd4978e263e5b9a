"""Neural-network fitness evaluator for eegselect, packaged as a wire-protocol
plugin.

The host process talks to `eegnet-plugin serve` over stdio (newline-delimited
JSON, protocol v1) and hands it tensor files to train on; nothing here imports
the host package. See docs/evaluator-protocol-v1.md and
docs/tensor-format-v1.md in the host repository for both contracts.
"""

__version__ = "0.1.0"

"""Character-level Arabic diacritization toolkit.

Subpackages and modules:

- ``codec``: diacritized text to (base characters, label classes) and back
- ``corpus``: dataset cleaning, statistics, batching
- ``metrics``: DER/WER under the four counting variants, confusion matrices
- ``windows``: fixed context-window encodings for per-character models
- ``nn``: autodiff tensor kernel, LSTM/CRF layers, optimizers, checkpoints
- ``models``: the model families, training loops and the prediction path
- ``tod``: subword segmentation and parallel diacritic-stream preparation
- ``analysis``: class censuses, line ranking, embedding export
- ``cli``: command-line entry point
"""

__version__ = "0.1.0"

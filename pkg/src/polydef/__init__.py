"""polydef: multi-sense definition modeling toolkit.

Decomposes word embeddings into sparse sense atoms, matches dictionary
definitions to atoms (statically or jointly via Gumbel-Softmax), trains a
gated recurrent definition generator per (word, atom), merges redundant
outputs, and scores definition sets with precision- and recall-style BLEU
metrics.
"""

__version__ = "0.1.0"

FORMAT_VERSIONS = {
    "atoms": "polydef/atoms/1",
    "checkpoint": "polydef/checkpoint/1",
    "matches": "polydef/matches/1",
    "generations": "polydef/generations/1",
    "merged": "polydef/merged/1",
    "labels": "polydef/labels/1",
    "report": "polydef/report/1",
}

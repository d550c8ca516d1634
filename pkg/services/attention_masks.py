"""
Structure-aware attention masks for the linearized sequence.

lower tier: a cell token sees its own row plus every non-cell token
upper tier: additionally sees cells of its own column
Non-cell tokens (separators, question, paragraphs) see everything in both tiers.
"""

from dataclasses import dataclass

import numpy as np

from services.knowledge_model import LinearizedInput


@dataclass(frozen=True, eq=False)
class AttentionMasks:
    lower: np.ndarray
    upper: np.ndarray

    def to_dict(self) -> dict:
        return {
            "lower": self.lower.astype(np.uint8).tolist(),
            "upper": self.upper.astype(np.uint8).tolist(),
        }


def build_attention_masks(li: LinearizedInput) -> AttentionMasks:
    n = li.length
    rows = np.full(n, -1, dtype=np.int64)
    cols = np.full(n, -1, dtype=np.int64)
    for i, tok in enumerate(li.tokens):
        if tok.provenance.is_cell:
            rows[i] = tok.provenance.a
            cols[i] = tok.provenance.b

    is_cell = rows >= 0
    both_cells = is_cell[:, None] & is_cell[None, :]
    same_row = rows[:, None] == rows[None, :]
    same_col = cols[:, None] == cols[None, :]

    lower = ~both_cells | same_row
    upper = lower | (both_cells & same_col)
    return AttentionMasks(lower=lower, upper=upper)

"""Exception taxonomy shared by every stage of the solver.

Each error carries enough context (node id, tree level, stage) to locate the
failure in a tree that may contain thousands of boxes.
"""

from __future__ import annotations


class HPSError(Exception):
    """Base class. ``kind`` is the stable taxonomy name printed by the CLI."""

    kind = "hps-error"

    def __init__(self, message: str, *, node_id=None, level=None, stage=None):
        self.node_id = node_id
        self.level = level
        self.stage = stage
        ctx = []
        if stage is not None:
            ctx.append(f"stage={stage}")
        if node_id is not None:
            ctx.append(f"node={node_id}")
        if level is not None:
            ctx.append(f"level={level}")
        if ctx:
            message = f"{message} [{', '.join(ctx)}]"
        super().__init__(message)


class InvalidArgument(HPSError, ValueError):
    kind = "invalid-argument"


class LeafFactorizationError(HPSError):
    kind = "leaf-factorization-failure"


class MergeError(HPSError):
    kind = "merge-failure"


class PreconditionViolation(HPSError):
    kind = "precondition-violation"


class CorruptTree(HPSError):
    kind = "corrupt-tree"


class DepthExceeded(HPSError):
    kind = "depth-exceeded"


class EvaluationError(HPSError):
    kind = "evaluation-error"


class UnbuiltTree(HPSError):
    kind = "unbuilt-tree"


class DegenerateField(HPSError):
    kind = "degenerate-field"


class DegenerateReference(HPSError):
    kind = "degenerate-reference"


class ConfigError(HPSError):
    kind = "config-error"


class MismatchError(HPSError):
    kind = "mismatch"

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class SolverError(RuntimeError):
    """A solver failed; ``stage`` and ``iteration`` locate the failure."""

    def __init__(self, message, stage=None, iteration=None):
        self.stage = stage
        self.iteration = iteration
        where = []
        if stage is not None:
            where.append(f"stage={stage}")
        if iteration is not None:
            where.append(f"iteration={iteration}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.message = message


@dataclass
class SeparationResult:
    """Estimated mixing matrix and sources plus per-iteration diagnostics.

    ``thresholds`` holds the final per-source, per-scale thresholds; for GMCA
    these are the applied ``k * MAD`` values, for PALM the lambdas of the
    penalty (objective units). ``stages`` is filled by the two-step solver with
    the warm-up and refinement results.
    """

    A: np.ndarray
    S: np.ndarray
    method: str
    n_iter: int = 0
    objective_trace: list = field(default_factory=list)
    thresholds: Optional[np.ndarray] = None
    threshold_history: list = field(default_factory=list)
    k_history: list = field(default_factory=list)
    converged: bool = False
    diagnostics: dict = field(default_factory=dict)
    stages: dict = field(default_factory=dict)

    def summary(self):
        """JSON-friendly subset (no large arrays)."""
        out = {
            "method": self.method,
            "n_iter": self.n_iter,
            "converged": self.converged,
            "objective_trace": [float(v) for v in self.objective_trace],
            "thresholds": None if self.thresholds is None else np.asarray(self.thresholds).tolist(),
            "threshold_history": [np.asarray(t).tolist() for t in self.threshold_history],
            "k_history": [float(k) for k in self.k_history],
            "diagnostics": self.diagnostics,
        }
        if self.stages:
            out["stages"] = {name: r.summary() for name, r in self.stages.items()}
        return out

from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np

# Slack for inequalities evaluated in floating point.
RELATIVE_SLACK = 1e-12


def margins(lhs, rhs, floor: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised ``rhs - lhs`` and the pass flag shared by every check."""
    lhs = np.asarray(lhs, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    margin = rhs - lhs
    passed = margin >= -RELATIVE_SLACK * np.maximum(1.0, np.abs(rhs))
    if floor is not None:
        passed = passed & (lhs > floor)
    return margin, passed


@dataclass(frozen=True)
class BoundCheck:
    """One verified inequality ``lhs <= rhs``.

    Lower bounds are stated the same way, with the bound on the left. ``floor``
    marks two-sided statements ``floor < lhs <= rhs``.
    """

    name: str
    lhs: float
    rhs: float
    margin: float
    passed: bool
    n_index: Optional[int] = None

    @classmethod
    def evaluate(
        cls,
        name: str,
        lhs: float,
        rhs: float,
        n_index: Optional[int] = None,
        floor: Optional[float] = None,
    ) -> "BoundCheck":
        margin, passed = margins(lhs, rhs, floor)
        return cls(
            name=name,
            lhs=float(lhs),
            rhs=float(rhs),
            margin=float(margin),
            passed=bool(passed),
            n_index=None if n_index is None else int(n_index),
        )

    @property
    def family(self) -> str:
        return family_of(self.name)

    def to_dict(self) -> dict:
        return asdict(self)


def family_of(name: str) -> str:
    """``lem31b.lower`` and ``cal08:3,17`` belong to families ``lem31b`` and ``cal08``."""
    for sep in (".", ":"):
        name = name.split(sep, 1)[0]
    return name

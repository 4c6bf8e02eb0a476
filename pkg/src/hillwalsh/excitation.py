"""Hill problems ``x'' + (alpha + beta p(t)) x = 0`` and their excitations.

Every excitation is defined on the normalized phase ``s in [0, 1)`` and
evaluated as ``p(t) = f((t / tau) mod 1)``.  Step-shaped excitations are
right-continuous; :meth:`Excitation.cell_values` returns the value on the
cell that *ends* at each sample point, which for continuous ``p`` is just
``p(n tau / 2**k)``.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAX_SAMPLE_K = 20


class Excitation:
    """Base class; subclasses implement :meth:`phase` (vectorized)."""

    #: True if p is constant between consecutive :meth:`breakpoints`
    piecewise_constant = False

    def phase(self, s):
        raise NotImplementedError

    def phase_left(self, s):
        """Left limit of :meth:`phase` at ``s`` (equal to it for continuous p)."""
        return self.phase(s)

    def breakpoints(self) -> list:
        """Phases in ``[0, 1)`` where p may jump."""
        return []

    def label(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(Excitation):
    value: float = 1.0
    piecewise_constant = True

    def phase(self, s):
        return np.zeros_like(np.asarray(s, dtype=float)) + self.value

    def label(self):
        return f"const:{self.value!r}"


@dataclass(frozen=True)
class Cosine(Excitation):
    """``p = cos(2 pi s)``; the Mathieu equation when ``tau = 2 pi``."""

    def phase(self, s):
        return np.cos(2.0 * np.pi * np.asarray(s, dtype=float))

    def label(self):
        return "cos"


@dataclass(frozen=True)
class CosineSum(Excitation):
    """``p = sum a_i cos(2 pi n_i s)`` for ``terms = ((a_1, n_1), ...)``."""

    terms: tuple = ((1.0, 1), (1.0, 2))

    def __post_init__(self):
        terms = tuple((float(a), int(n)) for a, n in self.terms)
        if any(n < 0 for _, n in terms):
            raise ValueError("harmonic numbers must be non-negative")
        object.__setattr__(self, "terms", terms)

    def phase(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for a, n in self.terms:
            out = out + a * np.cos(2.0 * np.pi * n * s)
        return out

    def label(self):
        return "cossum:" + ",".join(f"{a!r}x{n}" for a, n in self.terms)


@dataclass(frozen=True)
class SquareWave(Excitation):
    """``hi`` on ``[0, duty)``, ``lo`` on ``[duty, 1)``; Meissner for ``hi = -lo``."""

    hi: float = 1.0
    lo: float = -1.0
    duty: float = 0.5
    piecewise_constant = True

    def __post_init__(self):
        if not 0.0 < self.duty < 1.0:
            raise ValueError(f"duty must lie in (0, 1), got {self.duty}")

    def phase(self, s):
        s = np.mod(np.asarray(s, dtype=float), 1.0)
        return np.where(s < self.duty, self.hi, self.lo)

    def phase_left(self, s):
        s = np.mod(np.asarray(s, dtype=float), 1.0)
        return np.where((s > 0.0) & (s <= self.duty), self.hi, self.lo)

    def breakpoints(self):
        return [0.0, self.duty]

    def levels(self):
        """``(value, phase_length)`` pieces in order, for exact propagators."""
        return [(self.hi, self.duty), (self.lo, 1.0 - self.duty)]

    def label(self):
        return f"square:{self.hi!r},{self.lo!r},{self.duty!r}"


@dataclass(frozen=True)
class SampledTable(Excitation):
    """Zero-order hold of ``values`` on a uniform grid of ``len(values)`` cells."""

    values: tuple = field(default=(1.0,))
    source: str = ""
    piecewise_constant = True

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        n = len(vals)
        if n == 0 or n & (n - 1):
            raise ValueError(f"table length must be a power of two, got {n}")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("table contains non-finite values")
        object.__setattr__(self, "values", vals)

    def _cells(self, s, left):
        n = len(self.values)
        x = np.asarray(s, dtype=float) * n
        idx = (np.ceil(x) - 1) if left else np.floor(x)
        return np.mod(idx.astype(np.int64), n)

    def phase(self, s):
        return np.asarray(self.values)[self._cells(s, left=False)]

    def phase_left(self, s):
        return np.asarray(self.values)[self._cells(s, left=True)]

    def breakpoints(self):
        n = len(self.values)
        return [j / n for j in range(n)]

    def levels(self):
        n = len(self.values)
        return [(v, 1.0 / n) for v in self.values]

    @classmethod
    def from_file(cls, path):
        text = Path(path).read_text()
        vals = [float(line) for line in text.split()]
        return cls(values=tuple(vals), source=str(path))

    def label(self):
        return f"table:{self.source}" if self.source else f"table[{len(self.values)}]"


BUILTINS = {
    "cos": Cosine(),
    "cossum": CosineSum(),
    "square": SquareWave(),
}


def parse_excitation(spec: str) -> Excitation:
    """Parse the CLI mini-language.

    ``cos`` | ``cossum[:1x1,1x2]`` | ``square:hi,lo,duty`` | ``const:c`` |
    ``table:<path>``
    """
    name, _, arg = spec.strip().partition(":")
    name = name.lower()
    try:
        if name == "cos" and not arg:
            return Cosine()
        if name == "cossum" and not arg:
            return CosineSum()
        if name == "cossum":
            terms = []
            for item in arg.split(","):
                a, _, n = item.strip().partition("x")
                terms.append((float(a), int(n)))
            return CosineSum(terms=tuple(terms))
        if name == "square":
            parts = [float(v) for v in arg.split(",")] if arg else [1.0, -1.0, 0.5]
            return SquareWave(*parts)
        if name == "const":
            return Constant(float(arg))
        if name == "table":
            return SampledTable.from_file(arg)
    except (ValueError, TypeError, OSError) as exc:
        raise ValueError(f"bad excitation {spec!r}: {exc}") from exc
    raise ValueError(f"unknown excitation {spec!r}")


@dataclass(frozen=True)
class HillProblem:
    alpha: float
    beta: float
    tau: float = 2.0 * math.pi
    excitation: Excitation = field(default_factory=Cosine)

    def __post_init__(self):
        if not self.tau > 0.0 or not math.isfinite(self.tau):
            raise ValueError(f"tau must be positive and finite, got {self.tau}")
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("alpha and beta must be finite")

    def with_params(self, alpha=None, beta=None):
        return HillProblem(
            self.alpha if alpha is None else alpha,
            self.beta if beta is None else beta,
            self.tau,
            self.excitation,
        )

    def q(self, t):
        return self.alpha + self.beta * eval_p(self, t)

    def describe(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "tau": self.tau,
            "excitation": self.excitation.label(),
        }


def eval_p(problem: HillProblem, t):
    """``p(t)`` with periodic extension (right-continuous steps)."""
    s = np.asarray(t, dtype=float) / problem.tau
    out = problem.excitation.phase(np.mod(s, 1.0))
    return float(out) if np.ndim(out) == 0 else out


def sample_p(problem: HillProblem, k: int) -> np.ndarray:
    """``[p_1, ..., p_{2**k}]`` with ``p_n`` the value on the cell ending at ``n tau / 2**k``."""
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= MAX_SAMPLE_K:
        raise ValueError(f"order exponent k={k!r} outside [1, {MAX_SAMPLE_K}]")
    return excitation_samples(problem.excitation, k)


def excitation_samples(excitation: Excitation, k: int) -> np.ndarray:
    n = 1 << k
    s = np.arange(1, n + 1, dtype=float) / n
    return np.asarray(excitation.phase_left(s), dtype=float)

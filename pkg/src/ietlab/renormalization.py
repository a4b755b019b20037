"""Rauzy-Veech induction, Zorich acceleration and the length cocycle.

Conventions (see docs/schemas.md for worked matrices).  Write the IET as two
rows of labels: the top row is ``1..d`` in order, the bottom row lists the
labels in the order of their images.  Let ``a`` be the last top label and
``b`` the last bottom label.

* type ``a`` (``len[a] > len[b]``): ``len[a] -= len[b]``, ``b`` moves in the
  bottom row to just after ``a``.
* type ``b`` (``len[b] > len[a]``): ``len[b] -= len[a]``, ``a`` moves in the
  top row to just after ``b``; labels are then renamed to top positions.

The step matrix ``Z`` satisfies ``old_lengths = Z @ new_lengths``.  Lengths
are never rescaled: the induced IET lives on ``[0, |lambda^(n)|)`` with exact
integer lengths, and normalization happens only on output.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath

from .errors import (
    IndexOutOfRange,
    NonPositiveInput,
    NonPositiveMatrix,
    PrecisionExhausted,
    ReduciblePermutation,
    RunTooLong,
    SingularMatrix,
    Tie,
    ZeroImage,
)
from .fixedpoint import hex_string, to_fraction, to_mpf
from .iet_core import Iet, Permutation, is_irreducible

DEFAULT_MAX_SUBSTEPS = 10**6
HILBERT_PREC = 128


@dataclass(frozen=True)
class CocycleMatrix:
    """Square integer matrix stored as a tuple of rows."""

    entries: tuple[tuple[int, ...], ...]

    @classmethod
    def identity(cls, d: int) -> "CocycleMatrix":
        return cls(tuple(tuple(int(i == j) for j in range(d)) for i in range(d)))

    @classmethod
    def of(cls, rows) -> "CocycleMatrix":
        return cls(tuple(tuple(int(x) for x in r) for r in rows))

    @property
    def d(self) -> int:
        return len(self.entries)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def __matmul__(self, other: "CocycleMatrix") -> "CocycleMatrix":
        cols = list(zip(*other.entries))
        return CocycleMatrix(
            tuple(tuple(sum(a * b for a, b in zip(row, c)) for c in cols) for row in self.entries)
        )

    def apply(self, v: Sequence) -> list:
        return [sum(a * x for a, x in zip(row, v)) for row in self.entries]

    @property
    def T(self) -> "CocycleMatrix":
        return CocycleMatrix(tuple(zip(*self.entries)))

    def norm(self) -> int:
        """Sum of absolute values of entries."""
        return sum(abs(x) for row in self.entries for x in row)

    def is_positive(self) -> bool:
        return all(x > 0 for row in self.entries for x in row)

    def is_nonnegative(self) -> bool:
        return all(x >= 0 for row in self.entries for x in row)

    def det(self) -> int:
        return _bareiss_det([list(r) for r in self.entries])

    def column(self, j: int) -> list[int]:
        return [row[j] for row in self.entries]

    def to_strings(self) -> list[list[str]]:
        return [[str(x) for x in row] for row in self.entries]


def _bareiss_det(m: list[list[int]]) -> int:
    n = len(m)
    sign, prev = 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if m[r][k] != 0), None)
            if swap is None:
                return 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def solve_exact(A: CocycleMatrix, b: Sequence) -> list[Fraction]:
    """Solve ``A x = b`` over the rationals by Gaussian elimination."""
    n = A.d
    m = [[Fraction(x) for x in row] + [to_fraction(bi)] for row, bi in zip(A.entries, b)]
    for k in range(n):
        piv = next((r for r in range(k, n) if m[r][k] != 0), None)
        if piv is None:
            raise SingularMatrix("cocycle matrix is singular")
        m[k], m[piv] = m[piv], m[k]
        for i in range(n):
            if i != k and m[i][k] != 0:
                f = m[i][k] / m[k][k]
                m[i] = [x - f * y for x, y in zip(m[i], m[k])]
    return [m[i][n] / m[i][i] for i in range(n)]


# -- combinatorics ---------------------------------------------------------

def _rows(perm: Permutation) -> tuple[list[int], list[int]]:
    d = perm.d
    return list(range(d)), [j - 1 for j in perm.inverse().images]


def _move(perm: Permutation, kind: str):
    """Apply a combinatorial Rauzy move.

    Returns ``(new_perm, relabel, winner, loser)`` where ``relabel[old] = new``
    (0-based) and winner/loser are old labels.
    """
    top, bot = _rows(perm)
    a, b = top[-1], bot[-1]
    if kind == "a":
        bot.remove(b)
        bot.insert(bot.index(a) + 1, b)
        winner, loser = a, b
    else:
        top.remove(a)
        top.insert(top.index(b) + 1, a)
        winner, loser = b, a
    relabel = [0] * perm.d
    for pos, lab in enumerate(top):
        relabel[lab] = pos
    images = [0] * perm.d
    for pos, lab in enumerate(bot):
        images[relabel[lab]] = pos + 1
    return Permutation(tuple(images)), relabel, winner, loser


def step_matrix(perm: Permutation, kind: str) -> CocycleMatrix:
    _, relabel, winner, loser = _move(perm, kind)
    d = perm.d
    z = [[0] * d for _ in range(d)]
    for old in range(d):
        z[old][relabel[old]] = 1
    z[winner][relabel[loser]] += 1
    return CocycleMatrix.of(z)


def rauzy_class(perm) -> set[Permutation]:
    perm = Permutation.parse(perm)
    if not is_irreducible(perm):
        raise ReduciblePermutation(f"{perm} is reducible")
    seen = {perm}
    queue = deque([perm])
    while queue:
        p = queue.popleft()
        for kind in "ab":
            q = _move(p, kind)[0]
            if q not in seen:
                seen.add(q)
                queue.append(q)
    return seen


# -- steps on IETs ---------------------------------------------------------

def step_type(T: Iet) -> str:
    top_last = T.d - 1
    bot_last = T.perm.inverse().images[-1] - 1
    la, lb = T.fixed[top_last], T.fixed[bot_last]
    if la == lb:
        if la.bit_length() <= T.precision_bits // 2:
            # equal only because both lengths are down to a handful of bits
            raise PrecisionExhausted(f"competing lengths equal below 2^-{T.precision_bits // 2}; "
                                     "the path needs more precision")
        raise Tie(f"last top and bottom intervals have equal length {hex_string(la, T.precision_bits)}")
    return "a" if la > lb else "b"


def rauzy_step(T: Iet) -> tuple[Iet, CocycleMatrix, str]:
    """One Rauzy-Veech step.  The returned IET is the induced map on
    ``[0, |lambda| - min(len_a, len_b))``, kept unscaled and exact."""
    kind = step_type(T)
    new_perm, relabel, winner, loser = _move(T.perm, kind)
    lam = list(T.fixed)
    lam[winner] -= lam[loser]
    new = [0] * T.d
    for old in range(T.d):
        new[relabel[old]] = lam[old]
    Z = step_matrix(T.perm, kind)
    return Iet(new_perm, tuple(new), T.precision_bits), Z, kind


def zorich_step(T: Iet, max_substeps: int = DEFAULT_MAX_SUBSTEPS) -> tuple[Iet, CocycleMatrix, int]:
    """A maximal run of same-type Rauzy steps."""
    T, Z, kind = rauzy_step(T)
    k = 1
    while step_type(T) == kind:
        if k >= max_substeps:
            raise RunTooLong(f"Zorich run exceeded {max_substeps} Rauzy steps")
        T, Z1, _ = rauzy_step(T)
        Z = Z @ Z1
        k += 1
    return T, Z, k


@dataclass(frozen=True)
class ZorichRecord:
    perm_before: Permutation
    perm_after: Permutation
    zorich_matrix: CocycleMatrix
    rauzy_substeps: int
    kind: str
    fixed_after: tuple[int, ...]

    @property
    def lambda_total(self) -> int:
        return sum(self.fixed_after)


@dataclass
class InductionPath:
    """Zorich-accelerated induction path of an IET.

    ``steps[n]`` carries ``Z_n`` with ``lambda^(n) = Z_n lambda^(n+1)``.
    """

    initial: Iet
    steps: list[ZorichRecord] = field(default_factory=list)
    stop_reason: str | None = None
    stopped_by: type | None = None  # exception class that ended the path early
    _prefix: list[CocycleMatrix] = field(default_factory=list, repr=False)

    def __len__(self):
        return len(self.steps)

    @property
    def d(self) -> int:
        return self.initial.d

    @property
    def precision_bits(self) -> int:
        return self.initial.precision_bits

    def iet_at(self, n: int) -> Iet:
        self._check(n)
        if n == 0:
            return self.initial
        rec = self.steps[n - 1]
        return Iet(rec.perm_after, rec.fixed_after, self.precision_bits)

    def matrix(self, n: int) -> CocycleMatrix:
        if not 0 <= n < len(self.steps):
            raise IndexOutOfRange(f"step {n} outside path of length {len(self.steps)}")
        return self.steps[n].zorich_matrix

    def prefix(self, n: int) -> CocycleMatrix:
        """``Z^(0,n)``, cached."""
        self._check(n)
        if not self._prefix:
            self._prefix.append(CocycleMatrix.identity(self.d))
        while len(self._prefix) <= n:
            k = len(self._prefix) - 1
            self._prefix.append(self._prefix[k] @ self.steps[k].zorich_matrix)
        return self._prefix[n]

    def lambda_norm(self, n: int) -> mpmath.mpf:
        return to_mpf(sum(self.iet_at(n).fixed), self.precision_bits)

    def _check(self, n: int):
        if not 0 <= n <= len(self.steps):
            raise IndexOutOfRange(f"time {n} outside path of length {len(self.steps)}")

    def to_jsonl(self) -> str:
        lines = []
        for n, rec in enumerate(self.steps):
            lines.append(
                json.dumps(
                    {
                        "n": n,
                        "perm": list(rec.perm_before.images),
                        "matrix": rec.zorich_matrix.to_strings(),
                        "substeps": rec.rauzy_substeps,
                        "lambda_norm_hex": hex_string(rec.lambda_total, self.precision_bits),
                    }
                )
            )
        return "\n".join(lines) + ("\n" if lines else "")


def induct(
    T: Iet,
    steps: int,
    max_substeps: int = DEFAULT_MAX_SUBSTEPS,
    on_tie: str = "raise",
) -> InductionPath:
    """Run ``steps`` Zorich steps.

    With ``on_tie="stop"`` a tie, an overlong run or exhausted precision ends
    the path early and ``stop_reason`` is set; with ``"raise"`` the exception
    carries the partial path.
    """
    path = InductionPath(T)
    cur = T
    for _ in range(steps):
        try:
            nxt, Z, k = zorich_step(cur, max_substeps)
        except Tie as exc:
            path.stop_reason = f"tie after {len(path)} Zorich steps"
            path.stopped_by = Tie
            if on_tie == "stop":
                return path
            raise Tie(str(exc), path=path) from None
        except (RunTooLong, PrecisionExhausted) as exc:
            path.stop_reason = f"{exc} (after {len(path)} Zorich steps)"
            path.stopped_by = type(exc)
            if on_tie == "stop":
                return path
            raise type(exc)(str(exc), path=path) from None
        kind = step_type(cur)
        path.steps.append(ZorichRecord(cur.perm, nxt.perm, Z, k, kind, nxt.fixed))
        cur = nxt
    return path


def cocycle_product(path: InductionPath, m: int, n: int) -> CocycleMatrix:
    """``Z^(m,n) = Z_m Z_{m+1} ... Z_{n-1}``."""
    if not 0 <= m <= n <= len(path):
        raise IndexOutOfRange(f"segment ({m}, {n}) outside path of length {len(path)}")
    if m == 0:
        return path.prefix(n)
    out = CocycleMatrix.identity(path.d)
    for k in range(m, n):
        out = out @ path.steps[k].zorich_matrix
    return out


def lengths_at_fixed(path: InductionPath, n: int) -> list[int]:
    """Unscaled lengths ``lambda^(n)`` (fixed point), re-solved from ``lambda^(0)``."""
    sol = solve_exact(path.prefix(n), path.initial.fixed)
    out = []
    for x in sol:
        if x.denominator != 1:
            raise SingularMatrix("non-integral length reconstruction: corrupted path")
        out.append(int(x))
    return out


def lengths_at(path: InductionPath, n: int, lambda0=None, normalized: bool = False) -> list:
    """``lambda^(n) = (Z^(0,n))^-1 lambda0`` as mpf.  ``lambda0`` defaults to the
    path's own lengths."""
    if lambda0 is None:
        vals = lengths_at_fixed(path, n)
        out = [to_mpf(v, path.precision_bits) for v in vals]
    else:
        sol = solve_exact(path.prefix(n), [to_fraction(x) for x in lambda0])
        with mpmath.workprec(path.precision_bits + 32):
            out = [mpmath.mpf(x.numerator) / x.denominator for x in sol]
    if normalized:
        s = mpmath.fsum(out)
        out = [x / s for x in out]
    return out


def heights_at(path: InductionPath, n: int) -> list[int]:
    """Return times ``h^(n) = (Z^(0,n))^T (1, ..., 1)``."""
    Z = path.prefix(n)
    return [sum(Z.column(j)) for j in range(path.d)]


# -- Hilbert metric ---------------------------------------------------------

def _positive_mpf(v, name):
    out = [mpmath.mpf(to_fraction(x).numerator) / to_fraction(x).denominator
           if not isinstance(x, mpmath.mpf) else x for x in v]
    if any(x <= 0 for x in out):
        raise NonPositiveInput(f"{name} must be strictly positive")
    return out


def hilbert_distance(a: Sequence, b: Sequence) -> mpmath.mpf:
    """``log(max(a/b) / min(a/b))``."""
    if len(a) != len(b):
        raise ValueError("vectors differ in length")
    with mpmath.workprec(max(mpmath.mp.prec, HILBERT_PREC)):
        a = _positive_mpf(a, "a")
        b = _positive_mpf(b, "b")
        r = [x / y for x, y in zip(a, b)]
        return +mpmath.log(max(r) / min(r))


def projective_action(A: CocycleMatrix, v: Sequence) -> list:
    """``A v / |A v|``."""
    with mpmath.workprec(max(mpmath.mp.prec, HILBERT_PREC)):
        v = [x if isinstance(x, mpmath.mpf) else mpmath.mpf(to_fraction(x).numerator) / to_fraction(x).denominator
             for x in v]
        w = A.apply(v)
        s = mpmath.fsum(w)
        if s <= 0:
            raise ZeroImage("A v vanishes")
        return [x / s for x in w]


def contraction_diameter(A: CocycleMatrix) -> mpmath.mpf:
    """Hilbert diameter of ``A`` applied to the simplex: the largest distance
    between two columns."""
    if not A.is_positive():
        raise NonPositiveMatrix("contraction diameter needs a strictly positive matrix")
    cols = [A.column(j) for j in range(A.d)]
    best = mpmath.mpf(0)
    for i in range(len(cols)):
        for j in range(i + 1, len(cols)):
            best = max(best, hilbert_distance(cols[i], cols[j]))
    return best


# -- growth-filtered times --------------------------------------------------

@dataclass(frozen=True)
class ExpBound:
    """``ln ||Z^(n, n_k)|| / (n_k - n) <= C1`` for all ``0 <= n < n_k``."""

    C1: float


@dataclass(frozen=True)
class SubexpBound:
    """``||Z_{m_k - n}|| <= C2 exp(eps n)`` for all ``0 <= n <= m_k``."""

    eps: float
    C2: float


def detect_growth_filtered_times(path: InductionPath, mode) -> list[int]:
    L = len(path)
    if L < 2:
        raise ValueError("path must have at least 2 steps")
    out = []
    if isinstance(mode, ExpBound):
        if math.isinf(mode.C1) and mode.C1 > 0:
            return list(range(1, L + 1))
        for nk in range(1, L + 1):
            M = CocycleMatrix.identity(path.d)
            ok = True
            for n in range(nk - 1, -1, -1):
                M = path.steps[n].zorich_matrix @ M
                if math.log(M.norm()) > mode.C1 * (nk - n):
                    ok = False
                    break
            if ok:
                out.append(nk)
        return out
    if isinstance(mode, SubexpBound):
        logs = [math.log(r.zorich_matrix.norm()) for r in path.steps]
        lc2 = math.log(mode.C2) if mode.C2 > 0 else -math.inf
        for mk in range(L):
            if all(logs[mk - n] <= lc2 + mode.eps * n for n in range(mk + 1)):
                out.append(mk)
        return out
    raise TypeError(f"unknown growth mode {mode!r}")

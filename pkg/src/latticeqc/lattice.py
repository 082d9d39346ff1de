"""Sparse second-quantized states on a periodic 1D lattice.

Every site carries three occupation numbers, one per internal level
(``a``, ``b`` and the pointer level ``p``).  A pure state is a sparse
complex superposition over classical occupation patterns.  Mixed states
are stored as weighted ensembles of pure states, which is exact here
because the only non-unitary elements (the emptying channels and the
pointer counter) decohere in the occupation basis.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np

DEFAULT_M_MAX = 6       # per-level occupation cutoff
NORM_TOL = 1e-10        # allowed drift of total probability
PRUNE_TOL = 1e-14       # amplitudes below this are dropped
BRANCH_MERGE_TOL = 1e-12

LEVELS = ("a", "b", "p")


class OccupationOverflowError(ValueError):
    """An occupation count would exceed the configured cutoff."""


class SiteOccupancy(NamedTuple):
    a: int
    b: int
    p: int


@dataclass(frozen=True, order=True)
class BasisConfig:
    """One classical occupation pattern, usable as a dictionary key.

    Equality and ordering are exact and component-wise; the ordering is
    what makes iteration over sparse maps reproducible.
    """

    sites: tuple[SiteOccupancy, ...]

    def __post_init__(self):
        if len(self.sites) < 1:
            raise ValueError("lattice needs at least one site")
        for s in self.sites:
            if min(s) < 0:
                raise ValueError(f"negative occupation in {s}")

    @classmethod
    def from_counts(cls, counts: Iterable[Iterable[int]]) -> "BasisConfig":
        return cls(tuple(SiteOccupancy(int(a), int(b), int(p)) for a, b, p in counts))

    @classmethod
    def from_array(cls, occ: np.ndarray) -> "BasisConfig":
        occ = np.asarray(occ)
        if occ.ndim != 2 or occ.shape[1] != 3:
            raise ValueError(f"expected shape (L, 3), got {occ.shape}")
        return cls.from_counts(occ.tolist())

    @property
    def L(self) -> int:
        return len(self.sites)

    def to_array(self) -> np.ndarray:
        return np.array(self.sites, dtype=np.int64)

    def max_count(self) -> int:
        return max(max(s) for s in self.sites)

    def level_total(self, level: int | str) -> int:
        idx = LEVELS.index(level) if isinstance(level, str) else level
        return sum(s[idx] for s in self.sites)

    def replace_site(self, k: int, site: SiteOccupancy) -> "BasisConfig":
        sites = list(self.sites)
        sites[k] = site
        return BasisConfig(tuple(sites))

    def translate(self, d: int) -> "BasisConfig":
        """Cyclically relabel sites: new site k holds the old site k-d."""
        L = self.L
        return BasisConfig(tuple(self.sites[(k - d) % L] for k in range(L)))

    def to_json_obj(self) -> list:
        return [[s.a, s.b, s.p] for s in self.sites]

    @classmethod
    def from_json_obj(cls, obj) -> "BasisConfig":
        return cls.from_counts(obj)


class PureState:
    """Normalized sparse superposition.  Treat instances as immutable.

    Terms are stored in canonical (sorted) key order so that every
    iteration over them, and everything derived from such iterations,
    is bit-reproducible.
    """

    __slots__ = ("terms", "m_max")

    def __init__(self, terms: dict, m_max: int = DEFAULT_M_MAX, check: bool = True):
        cleaned: dict[BasisConfig, complex] = {}
        for config in sorted(terms):
            amp = complex(terms[config])
            if abs(amp) >= PRUNE_TOL:
                cleaned[config] = amp
        if not cleaned:
            raise ValueError("state has no support")
        self.terms = cleaned
        self.m_max = int(m_max)
        if check:
            first = next(iter(cleaned))
            for config in cleaned:
                if config.L != first.L:
                    raise ValueError("terms live on different lattice sizes")
                if config.max_count() > self.m_max:
                    raise OccupationOverflowError(
                        f"occupation exceeds cutoff {self.m_max}: {config.sites}"
                    )
            nsq = self.norm_sq()
            if abs(nsq - 1.0) > NORM_TOL:
                raise ValueError(f"state norm^2 = {nsq!r} drifted from 1")

    @property
    def L(self) -> int:
        return next(iter(self.terms)).L

    def norm_sq(self) -> float:
        return sum(abs(a) ** 2 for a in self.terms.values())

    def amplitude(self, config: BasisConfig) -> complex:
        return self.terms.get(config, 0.0 + 0.0j)

    def inner(self, other: "PureState") -> complex:
        if len(self.terms) > len(other.terms):
            return other.inner(self).conjugate()
        return sum(a.conjugate() * other.terms.get(c, 0.0) for c, a in self.terms.items())

    def is_classical(self) -> bool:
        return len(self.terms) == 1

    def translate(self, d: int) -> "PureState":
        return PureState(
            {c.translate(d): a for c, a in self.terms.items()}, self.m_max, check=False
        )

    def __iter__(self) -> Iterator[tuple[BasisConfig, complex]]:
        return iter(self.terms.items())

    def __repr__(self):
        return f"PureState({len(self.terms)} terms, L={self.L})"


def _branch_signature(state: PureState) -> tuple:
    return tuple(state.terms.keys())


def _merge_branches(branches: list[tuple[float, PureState]]) -> list[tuple[float, PureState]]:
    # Branches whose term sets agree (amplitudes within BRANCH_MERGE_TOL)
    # describe the same pure state and are combined by summing weights.
    merged: list[tuple[float, PureState]] = []
    for w, st in branches:
        sig = _branch_signature(st)
        for i, (w0, st0) in enumerate(merged):
            if _branch_signature(st0) != sig:
                continue
            if all(abs(st.terms[c] - st0.terms[c]) <= BRANCH_MERGE_TOL for c in st.terms):
                merged[i] = (w0 + w, st0)
                break
        else:
            merged.append((w, st))
    return merged


class MixedState:
    """Weighted ensemble of pure states (a classical mixture)."""

    __slots__ = ("branches",)

    def __init__(
        self,
        branches: Iterable[tuple[float, PureState]],
        check: bool = True,
        merge: bool = True,
    ):
        kept = [(float(w), st) for w, st in branches if float(w) > 1e-15]
        if not kept:
            raise ValueError("mixture has no branches")
        kept.sort(key=lambda ws: (_branch_signature(ws[1]), ws[0]))
        if merge:
            kept = _merge_branches(kept)
        self.branches = tuple(kept)
        if check:
            L = self.L
            m_max = self.m_max
            for w, st in self.branches:
                if w <= 0.0:
                    raise ValueError("branch weights must be positive")
                if st.L != L or st.m_max != m_max:
                    raise ValueError("branches disagree on lattice size or cutoff")
            total = sum(w for w, _ in self.branches)
            if abs(total - 1.0) > NORM_TOL:
                raise ValueError(f"branch weights sum to {total!r}, expected 1")

    @property
    def L(self) -> int:
        return self.branches[0][1].L

    @property
    def m_max(self) -> int:
        return self.branches[0][1].m_max

    def is_classical(self) -> bool:
        """True when every branch is a single classical configuration."""
        return all(st.is_classical() for _, st in self.branches)

    def sole_config(self) -> BasisConfig:
        """The configuration of a one-branch, one-term state."""
        if len(self.branches) != 1 or not self.branches[0][1].is_classical():
            raise ValueError("state is not a single classical configuration")
        return next(iter(self.branches[0][1].terms))

    def translate(self, d: int) -> "MixedState":
        return MixedState(
            [(w, st.translate(d)) for w, st in self.branches], check=False, merge=False
        )

    def to_json_obj(self) -> dict:
        return {
            "branches": [
                {
                    "weight": w,
                    "terms": [
                        {"config": c.to_json_obj(), "re": a.real, "im": a.imag}
                        for c, a in st
                    ],
                }
                for w, st in self.branches
            ]
        }

    @classmethod
    def from_json_obj(cls, obj, m_max: int = DEFAULT_M_MAX) -> "MixedState":
        branches = []
        for b in obj["branches"]:
            terms = {
                BasisConfig.from_json_obj(t["config"]): complex(t["re"], t["im"])
                for t in b["terms"]
            }
            branches.append((b["weight"], PureState(terms, m_max)))
        return cls(branches)

    def __repr__(self):
        return f"MixedState({len(self.branches)} branches, L={self.L})"


def classical(config: BasisConfig | Iterable, m_max: int = DEFAULT_M_MAX) -> MixedState:
    """Wrap one classical configuration as a weight-1 single-term state."""
    if not isinstance(config, BasisConfig):
        config = BasisConfig.from_counts(config)
    return MixedState([(1.0, PureState({config: 1.0 + 0.0j}, m_max))])


def level_count(state: MixedState, level: str) -> tuple[float, bool]:
    """Total occupation of one level: (expectation, is_deterministic)."""
    idx = LEVELS.index(level)
    counts = set()
    expectation = 0.0
    for w, st in state.branches:
        for config, amp in st:
            c = config.level_total(idx)
            counts.add(c)
            expectation += w * abs(amp) ** 2 * c
    return expectation, len(counts) == 1


def fidelity(x: MixedState, y: MixedState, mode: str = "paired") -> float:
    """Overlap between two states.

    ``paired`` pairs branches positionally (requires matching branch
    counts and weights) and returns sum_b w_b |<x_b|y_b>|^2; for pure
    states this is the usual |<x|y>|^2.  ``strict`` returns 1.0 only if
    the two ensembles are identical term by term, else 0.0.
    """
    if x.L != y.L:
        raise ValueError(f"lattice size mismatch: {x.L} vs {y.L}")
    if mode == "paired":
        if len(x.branches) != len(y.branches):
            raise ValueError("branch counts differ; no positional pairing exists")
        total = 0.0
        for (wx, sx), (wy, sy) in zip(x.branches, y.branches):
            if abs(wx - wy) > NORM_TOL:
                raise ValueError("paired branches carry different weights")
            total += wx * abs(sx.inner(sy)) ** 2
        return total
    if mode == "strict":
        if len(x.branches) != len(y.branches):
            return 0.0
        for (wx, sx), (wy, sy) in zip(x.branches, y.branches):
            if abs(wx - wy) > BRANCH_MERGE_TOL:
                return 0.0
            if _branch_signature(sx) != _branch_signature(sy):
                return 0.0
            if any(abs(sx.terms[c] - sy.terms[c]) > BRANCH_MERGE_TOL for c in sx.terms):
                return 0.0
        return 1.0
    raise ValueError(f"unknown fidelity mode {mode!r}")

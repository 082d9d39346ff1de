"""Translation-invariant primitive operations and the script interpreter.

Every operation acts identically on all sites (there is no addressing);
computation is steered entirely through occupation patterns and global
cyclic shifts of the pointer level.  Unitaries act on :class:`MixedState`
branch by branch; the emptying channels and the pointer counter act on
the ensemble itself.

Scripts (ordered op sequences) serialize to a line-oriented text form:

    U m n x     pair transfer |m,0,n> <-> |m+x,0,n-x|  (b != 0 blocks)
    W           |1,0,1> <-> |0,1,1>
    V theta     a/b beam-splitter rotation, pointer spectator
    C phi       phase exp(i*phi*sum_k a_k*p_k)
    S x         cyclic pointer shift, x steps to the right
    EB / EP     empty level b / p (trace-out channel)
    SPLIT eps   rotation on span{(2,0,0),(1,1,0)} by angle asin(sqrt(eps))
    COUNTP      projective measurement of the total pointer count

Blank lines and ``#`` comments are ignored; parse(to_text(s)) == s.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Union

import numpy as np

from .lattice import (
    DEFAULT_M_MAX,
    PRUNE_TOL,
    BasisConfig,
    MixedState,
    OccupationOverflowError,
    PureState,
    SiteOccupancy,
)


class ScriptParseError(ValueError):
    """A script text line could not be parsed."""


@dataclass(frozen=True)
class PairTransfer:
    """Sitewise swap |m,0,n> <-> |m+x,0,n-x>; self-inverse, b != 0 blocks."""

    m: int
    n: int
    x: int

    def __post_init__(self):
        if self.m < 0 or self.n < 0:
            raise ValueError("occupations must be non-negative")
        if self.m + self.x < 0 or self.n - self.x < 0:
            raise ValueError(
                f"invalid transfer endpoints for (m={self.m}, n={self.n}, x={self.x})"
            )

    @property
    def src(self) -> SiteOccupancy:
        return SiteOccupancy(self.m, 0, self.n)

    @property
    def dst(self) -> SiteOccupancy:
        return SiteOccupancy(self.m + self.x, 0, self.n - self.x)


@dataclass(frozen=True)
class WSwap:
    """Sitewise swap |1,0,1> <-> |0,1,1>."""


@dataclass(frozen=True)
class ABRotation:
    """exp(-i*theta*(a^dag b + b^dag a)) per site; pointer is a spectator."""

    theta: float


@dataclass(frozen=True)
class Collide:
    """Diagonal phase exp(i*phi * sum_k a_k*p_k)."""

    phi: float


@dataclass(frozen=True)
class Shift:
    """Cyclic shift of the pointer level, x steps to the right."""

    x: int


@dataclass(frozen=True)
class EmptyB:
    """Channel: trace out and zero level b everywhere."""


@dataclass(frozen=True)
class EmptyP:
    """Channel: trace out and zero the pointer level everywhere."""


@dataclass(frozen=True)
class DefectSplit:
    """Sitewise rotation [[sqrt(1-eps), -sqrt(eps)], [sqrt(eps), sqrt(1-eps)]]
    on span{(2,0,0), (1,1,0)}; identity elsewhere."""

    eps: float

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError("eps must lie in [0, 1]")


@dataclass(frozen=True)
class CountP:
    """Projective measurement of the total pointer count."""


PrimitiveOp = Union[
    PairTransfer, WSwap, ABRotation, Collide, Shift, EmptyB, EmptyP, DefectSplit, CountP
]

# Ops that map classical configurations to classical configurations.
_BASIS_PRESERVING = (PairTransfer, WSwap, Collide, Shift, EmptyB, EmptyP)


class Script:
    """Ordered sequence of primitive operations; the unit of execution."""

    __slots__ = ("ops",)

    def __init__(self, ops: Iterable[PrimitiveOp] = ()):
        self.ops = tuple(ops)

    def __iter__(self) -> Iterator[PrimitiveOp]:
        return iter(self.ops)

    def __len__(self) -> int:
        return len(self.ops)

    def __add__(self, other: "Script") -> "Script":
        return Script(self.ops + tuple(other))

    def __eq__(self, other) -> bool:
        return isinstance(other, Script) and self.ops == other.ops

    def __hash__(self):
        return hash(self.ops)

    def __repr__(self):
        return f"Script({len(self.ops)} ops)"

    def is_basis_preserving(self) -> bool:
        return all(isinstance(op, _BASIS_PRESERVING) for op in self.ops)

    def to_text(self) -> str:
        return "".join(_op_to_text(op) + "\n" for op in self.ops)

    @classmethod
    def parse(cls, text: str) -> "Script":
        ops = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                ops.append(_op_from_tokens(line.split()))
            except (ValueError, IndexError) as exc:
                raise ScriptParseError(f"line {lineno}: {raw.strip()!r}: {exc}") from exc
        return cls(ops)


def _op_to_text(op: PrimitiveOp) -> str:
    if isinstance(op, PairTransfer):
        return f"U {op.m} {op.n} {op.x}"
    if isinstance(op, WSwap):
        return "W"
    if isinstance(op, ABRotation):
        return f"V {op.theta!r}"
    if isinstance(op, Collide):
        return f"C {op.phi!r}"
    if isinstance(op, Shift):
        return f"S {op.x}"
    if isinstance(op, EmptyB):
        return "EB"
    if isinstance(op, EmptyP):
        return "EP"
    if isinstance(op, DefectSplit):
        return f"SPLIT {op.eps!r}"
    if isinstance(op, CountP):
        return "COUNTP"
    raise TypeError(f"unknown op {op!r}")


def _op_from_tokens(tok: list[str]) -> PrimitiveOp:
    head = tok[0]
    if head == "U" and len(tok) == 4:
        return PairTransfer(int(tok[1]), int(tok[2]), int(tok[3]))
    if head == "W" and len(tok) == 1:
        return WSwap()
    if head == "V" and len(tok) == 2:
        return ABRotation(float(tok[1]))
    if head == "C" and len(tok) == 2:
        return Collide(float(tok[1]))
    if head == "S" and len(tok) == 2:
        return Shift(int(tok[1]))
    if head == "EB" and len(tok) == 1:
        return EmptyB()
    if head == "EP" and len(tok) == 1:
        return EmptyP()
    if head == "SPLIT" and len(tok) == 2:
        return DefectSplit(float(tok[1]))
    if head == "COUNTP" and len(tok) == 1:
        return CountP()
    raise ValueError("unrecognized operation")


# ---------------------------------------------------------------------------
# unitary kernels (per pure branch)


def _map_sites(terms: dict, site_map) -> dict:
    out: dict[BasisConfig, complex] = {}
    for config, amp in terms.items():
        new = BasisConfig(tuple(site_map(s) for s in config.sites))
        out[new] = out.get(new, 0.0) + amp
    return out


def _pair_transfer_terms(terms: dict, op: PairTransfer, m_max: int) -> dict:
    hi = max(op.m, op.n, op.m + op.x, op.n - op.x)
    if hi > m_max:
        raise OccupationOverflowError(
            f"transfer endpoint exceeds cutoff {m_max}: (m={op.m}, n={op.n}, x={op.x})"
        )
    src, dst = op.src, op.dst
    if src == dst:
        return dict(terms)

    def flip(s: SiteOccupancy) -> SiteOccupancy:
        if s == src:
            return dst
        if s == dst:
            return src
        return s

    return _map_sites(terms, flip)


_W_A = SiteOccupancy(1, 0, 1)
_W_B = SiteOccupancy(0, 1, 1)


def _w_swap_terms(terms: dict) -> dict:
    def flip(s: SiteOccupancy) -> SiteOccupancy:
        if s == _W_A:
            return _W_B
        if s == _W_B:
            return _W_A
        return s

    return _map_sites(terms, flip)


def _shift_terms(terms: dict, x: int) -> dict:
    out = {}
    for config, amp in terms.items():
        L = config.L
        sites = config.sites
        new = BasisConfig(
            tuple(
                SiteOccupancy(sites[k].a, sites[k].b, sites[(k - x) % L].p)
                for k in range(L)
            )
        )
        out[new] = out.get(new, 0.0) + amp
    return out


def _collide_terms(terms: dict, phi: float) -> dict:
    out = {}
    for config, amp in terms.items():
        weight = sum(s.a * s.p for s in config.sites)
        out[config] = amp * cmath.exp(1j * phi * weight)
    return out


@lru_cache(maxsize=None)
def _sector_unitary(T: int, theta: float) -> np.ndarray:
    """exp(-i*theta*H) on the (T+1)-dim sector with fixed a+b = T.

    Basis index i corresponds to (a=i, b=T-i); the hopping matrix has
    elements <i-1|H|i> = sqrt(i*(T-i+1)).  Computed by eigendecomposition
    of the real symmetric H, which keeps the result unitary to rounding.
    """
    dim = T + 1
    H = np.zeros((dim, dim))
    for i in range(1, dim):
        H[i - 1, i] = H[i, i - 1] = math.sqrt(i * (T - i + 1))
    vals, vecs = np.linalg.eigh(H)
    U = (vecs * np.exp(-1j * theta * vals)) @ vecs.T
    U.setflags(write=False)
    return U


def _ab_rotation_terms(terms: dict, theta: float, m_max: int, L: int) -> dict:
    for k in range(L):
        out: dict[BasisConfig, complex] = {}
        for config, amp in terms.items():
            site = config.sites[k]
            T = site.a + site.b
            if T == 0:
                out[config] = out.get(config, 0.0) + amp
                continue
            if T > m_max:
                raise OccupationOverflowError(
                    f"a+b = {T} at site {k} exceeds sector cutoff {m_max}"
                )
            col = _sector_unitary(T, theta)[:, site.a]
            for i in range(T + 1):
                u = col[i]
                if abs(u) < 1e-16:
                    continue
                new = config.replace_site(k, SiteOccupancy(i, T - i, site.p))
                out[new] = out.get(new, 0.0) + amp * u
        terms = {c: a for c, a in out.items() if abs(a) >= PRUNE_TOL}
    return terms


_SPLIT_X = SiteOccupancy(2, 0, 0)
_SPLIT_Y = SiteOccupancy(1, 1, 0)


def _defect_split_terms(terms: dict, eps: float, L: int) -> dict:
    c, s = math.sqrt(1.0 - eps), math.sqrt(eps)
    for k in range(L):
        out: dict[BasisConfig, complex] = {}
        for config, amp in terms.items():
            site = config.sites[k]
            if site == _SPLIT_X:
                out_x = config
                out_y = config.replace_site(k, _SPLIT_Y)
                out[out_x] = out.get(out_x, 0.0) + amp * c
                out[out_y] = out.get(out_y, 0.0) + amp * s
            elif site == _SPLIT_Y:
                out_x = config.replace_site(k, _SPLIT_X)
                out[out_x] = out.get(out_x, 0.0) - amp * s
                out[config] = out.get(config, 0.0) + amp * c
            else:
                out[config] = out.get(config, 0.0) + amp
        terms = {cfg: a for cfg, a in out.items() if abs(a) >= PRUNE_TOL}
    return terms


def _unitary_on_state(state: MixedState, kernel) -> MixedState:
    branches = [
        (w, PureState(kernel(st.terms), st.m_max, check=False))
        for w, st in state.branches
    ]
    return MixedState(branches, check=False, merge=False)


# ---------------------------------------------------------------------------
# channels


def _empty_level(state: MixedState, level_idx: int) -> MixedState:
    """Trace out one level: branch on its occupation pattern, then zero it."""
    new_branches: list[tuple[float, PureState]] = []
    for w, st in state.branches:
        groups: dict[tuple, dict[BasisConfig, complex]] = {}
        for config, amp in st:
            pattern = tuple(s[level_idx] for s in config.sites)
            zeroed = BasisConfig(
                tuple(
                    SiteOccupancy(*(0 if i == level_idx else s[i] for i in range(3)))
                    for s in config.sites
                )
            )
            grp = groups.setdefault(pattern, {})
            grp[zeroed] = grp.get(zeroed, 0.0) + amp
        for pattern in sorted(groups):
            terms = groups[pattern]
            weight = sum(abs(a) ** 2 for a in terms.values())
            if weight <= 1e-30:
                continue
            scale = 1.0 / math.sqrt(weight)
            new_branches.append(
                (
                    w * weight,
                    PureState(
                        {c: a * scale for c, a in terms.items()}, st.m_max, check=False
                    ),
                )
            )
    return MixedState(new_branches, check=False, merge=True)


def _count_distribution(state: MixedState) -> dict[int, float]:
    dist: dict[int, float] = {}
    for w, st in state.branches:
        for config, amp in st:
            c = config.level_total(2)
            dist[c] = dist.get(c, 0.0) + w * abs(amp) ** 2
    return dist


def count_p(
    state: MixedState, rng: np.random.Generator | None = None, mode: str = "sample"
) -> tuple[float, MixedState]:
    """Measure the total pointer count.

    ``sample`` draws one outcome (Born rule) and collapses; when a single
    outcome has all the probability no randomness is consumed, so runs on
    classical ensembles stay deterministic.  ``expect`` returns the
    expectation and leaves the state untouched.
    """
    dist = _count_distribution(state)
    if mode == "expect":
        return sum(c * p for c, p in dist.items()), state
    if mode != "sample":
        raise ValueError(f"unknown count mode {mode!r}")
    outcomes = sorted(dist)
    if len(outcomes) == 1:
        return float(outcomes[0]), state
    if rng is None:
        raise ValueError("sampling a non-deterministic count requires an rng")
    r = rng.random()
    acc = 0.0
    outcome = outcomes[-1]
    for c in outcomes:
        acc += dist[c]
        if r < acc:
            outcome = c
            break
    prob = dist[outcome]
    new_branches = []
    for w, st in state.branches:
        kept = {c: a for c, a in st if c.level_total(2) == outcome}
        if not kept:
            continue
        bw = sum(abs(a) ** 2 for a in kept.values())
        scale = 1.0 / math.sqrt(bw)
        new_branches.append(
            (
                w * bw / prob,
                PureState({c: a * scale for c, a in kept.items()}, st.m_max, check=False),
            )
        )
    return float(outcome), MixedState(new_branches, check=False, merge=True)


# ---------------------------------------------------------------------------
# classical fast path: vectorized kernels on occupation arrays


def _require_in_cutoff(occ: np.ndarray, m_max: int):
    if occ.size and occ.max() > m_max:
        raise OccupationOverflowError(f"occupation exceeds cutoff {m_max}")


def _classical_swap(occ: np.ndarray, pat1, pat2):
    m1 = np.all(occ == pat1, axis=-1)
    m2 = np.all(occ == pat2, axis=-1)
    occ[m1] = pat2
    occ[m2] = pat1


def apply_classical(occ: np.ndarray, script: Script, m_max: int = DEFAULT_M_MAX) -> np.ndarray:
    """Run a basis-preserving script on classical occupations.

    ``occ`` has shape (..., L, 3); leading axes are a batch, so a whole
    family of lattices runs in one vectorized pass.  Phases from Collide
    are physically inert on a classical configuration and are dropped
    here (the branch-level interpreter tracks them).
    """
    if not script.is_basis_preserving():
        raise ValueError("script contains non-classical operations")
    occ = np.array(occ, dtype=np.int64, copy=True)
    if occ.shape[-1] != 3:
        raise ValueError(f"expected trailing axis of size 3, got {occ.shape}")
    _require_in_cutoff(occ, m_max)
    for op in script:
        if isinstance(op, PairTransfer):
            hi = max(op.m, op.n, op.m + op.x, op.n - op.x)
            if hi > m_max:
                raise OccupationOverflowError(
                    f"transfer endpoint exceeds cutoff {m_max}"
                )
            if op.src != op.dst:
                _classical_swap(occ, op.src, op.dst)
        elif isinstance(op, WSwap):
            _classical_swap(occ, _W_A, _W_B)
        elif isinstance(op, Shift):
            occ[..., 2] = np.roll(occ[..., 2], op.x, axis=-1)
        elif isinstance(op, EmptyP):
            occ[..., 2] = 0
        elif isinstance(op, EmptyB):
            occ[..., 1] = 0
        elif isinstance(op, Collide):
            pass
        else:  # pragma: no cover - guarded by is_basis_preserving
            raise ValueError(f"op {op!r} is not basis-preserving")
    return occ


def _run_classical_branch(
    config: BasisConfig, script: Script, m_max: int
) -> tuple[BasisConfig, complex]:
    occ = config.to_array()
    _require_in_cutoff(occ, m_max)
    phase = 0.0
    for op in script:
        if isinstance(op, Collide):
            phase += op.phi * float(np.dot(occ[:, 0], occ[:, 2]))
        else:
            occ = apply_classical(occ, Script([op]), m_max)
    return BasisConfig.from_array(occ), cmath.exp(1j * phase)


# ---------------------------------------------------------------------------
# public op wrappers and the interpreter


def pair_transfer(state: MixedState, m: int, n: int, x: int) -> MixedState:
    op = PairTransfer(m, n, x)
    return _unitary_on_state(state, lambda t: _pair_transfer_terms(t, op, state.m_max))


def w_swap(state: MixedState) -> MixedState:
    return _unitary_on_state(state, _w_swap_terms)


def ab_rotation(state: MixedState, theta: float) -> MixedState:
    return _unitary_on_state(
        state, lambda t: _ab_rotation_terms(t, theta, state.m_max, state.L)
    )


def collide(state: MixedState, phi: float) -> MixedState:
    return _unitary_on_state(state, lambda t: _collide_terms(t, phi))


def shift_p(state: MixedState, x: int) -> MixedState:
    return _unitary_on_state(state, lambda t: _shift_terms(t, x))


def empty_p(state: MixedState) -> MixedState:
    return _empty_level(state, 2)


def empty_b(state: MixedState) -> MixedState:
    return _empty_level(state, 1)


def defect_split(state: MixedState, eps: float) -> MixedState:
    op = DefectSplit(eps)
    return _unitary_on_state(state, lambda t: _defect_split_terms(t, op.eps, state.L))


def execute(
    state: MixedState, script: Script, rng: np.random.Generator | None = None
) -> tuple[MixedState, list[float]]:
    """Run a script; returns the final state and any COUNTP outcomes.

    Classical states running basis-preserving scripts take a vectorized
    fast path per branch; the result is identical to the generic path,
    including Collide phases.
    """
    if state.is_classical() and script.is_basis_preserving():
        branches = []
        for w, st in state.branches:
            config, amp0 = next(iter(st.terms.items()))
            config2, phase = _run_classical_branch(config, script, st.m_max)
            branches.append(
                (w, PureState({config2: amp0 * phase}, st.m_max, check=False))
            )
        return MixedState(branches, check=False, merge=True), []

    counts: list[float] = []
    for op in script:
        if isinstance(op, PairTransfer):
            state = pair_transfer(state, op.m, op.n, op.x)
        elif isinstance(op, WSwap):
            state = w_swap(state)
        elif isinstance(op, ABRotation):
            state = ab_rotation(state, op.theta)
        elif isinstance(op, Collide):
            state = collide(state, op.phi)
        elif isinstance(op, Shift):
            state = shift_p(state, op.x)
        elif isinstance(op, EmptyP):
            state = empty_p(state)
        elif isinstance(op, EmptyB):
            state = empty_b(state)
        elif isinstance(op, DefectSplit):
            state = defect_split(state, op.eps)
        elif isinstance(op, CountP):
            value, state = count_p(state, rng, "sample")
            counts.append(value)
        else:
            raise TypeError(f"unknown op {op!r}")
    return state, counts


def apply(
    state: MixedState, script: Script, rng: np.random.Generator | None = None
) -> MixedState:
    """Like :func:`execute` but discards measurement outcomes."""
    return execute(state, script, rng)[0]

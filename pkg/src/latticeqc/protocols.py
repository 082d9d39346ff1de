"""Composite lattice protocols: depopulation, formatting, repair.

``format_script`` turns a depopulated random lattice into disjoint
"computers": a register of n single-atom qubit sites directly left of a
home site that holds one atom plus one pointer atom.  Which computers
survive is predicted combinatorially by ``oracle_computers``; the two
routes are checked against each other exhaustively in the tests.

``repair_round_script`` implements donor-assisted defect filling: a
four-atom site lends an atom pair through the pointer level, a shifted
deposit fills an empty (or single) site, and the leftover atom is thrown
away, so every corrected defect costs exactly one atom.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .lattice import (
    BasisConfig,
    MixedState,
    SiteOccupancy,
    classical,
)
from .primitives import (
    DefectSplit,
    EmptyB,
    EmptyP,
    PairTransfer,
    Script,
    Shift,
)

_QUBIT_SITE = SiteOccupancy(1, 0, 0)
_HOME_SITE = SiteOccupancy(1, 0, 1)
_EMPTY_SITE = SiteOccupancy(0, 0, 0)


class StrayAtomsError(ValueError):
    """A formatted lattice holds occupied sites outside any computer."""

    def __init__(self, sites):
        self.sites = tuple(sites)
        super().__init__(f"stray atoms at sites {self.sites}")


@dataclass(frozen=True)
class ComputerDescriptor:
    """One surviving computer: its home site and the qubit register.

    ``qubit_sites`` runs left to right, i.e. (home-n, ..., home-1) mod L;
    the qubit at pointer offset j is qubit_sites[n-j].
    """

    home: int
    n: int
    qubit_sites: tuple[int, ...]


def depopulate_script(cutoff: int, target: int = 2) -> Script:
    """Reduce every occupation in (target, cutoff] down to exactly target.

    Each step parks the surplus of an x-atom site in the pointer level
    and discards it; sites at or below the target are never touched.
    """
    if target not in (2, 4):
        raise ValueError("depopulation target must be 2 or 4")
    if cutoff < target:
        raise ValueError("cutoff must be >= target")
    ops = []
    for x in range(target + 1, cutoff + 1):
        ops.append(PairTransfer(x, 0, target - x))
        ops.append(EmptyP())
    return Script(ops)


def depopulate_classical(a: np.ndarray, target: int) -> np.ndarray:
    """Closed form of :func:`depopulate_script` on bare a-level counts."""
    return np.minimum(np.asarray(a, dtype=np.int64), target)


def format_script(n: int) -> Script:
    """Self-organize a depopulated lattice into computers with n qubits.

    Single-atom sites promote their atom to a pointer; each pointer then
    walks n steps left, surviving an emptying round per step only while
    it sits on a two-atom site.  Survivors convert their inspected window
    into single-atom qubit sites on the way back and finish as one atom
    plus one pointer on the original (home) site.  Everything else is
    emptied along the way.
    """
    if n < 1:
        raise ValueError("computers need at least one qubit site")
    ops = [PairTransfer(1, 0, -1)]
    walk_left = [Shift(-1), PairTransfer(2, 1, 1), EmptyP(), PairTransfer(2, 1, 1)]
    ops += walk_left * n
    ops.append(PairTransfer(2, 1, -1))
    walk_right = [Shift(1), PairTransfer(2, 2, 1), EmptyP(), PairTransfer(3, 0, -2)]
    ops += walk_right * (n - 1)
    ops += [Shift(1), PairTransfer(2, 0, -2), EmptyP(), PairTransfer(2, 0, -1)]
    return Script(ops)


def prepare_script(cutoff: int, n: int) -> Script:
    """Depopulate to two atoms per site, then format."""
    return depopulate_script(cutoff, 2) + format_script(n)


def oracle_homes(a_dep: np.ndarray, n: int) -> np.ndarray:
    """Boolean home mask for depopulated a-counts, batched over leading axes.

    Site k becomes a home iff a_k == 1 and the n sites to its left all
    hold exactly two atoms (cyclically).
    """
    a_dep = np.asarray(a_dep)
    if a_dep.max(initial=0) > 2:
        raise ValueError("oracle expects a depopulated lattice (counts <= 2)")
    two = a_dep == 2
    homes = a_dep == 1
    for j in range(1, n + 1):
        homes = homes & np.roll(two, j, axis=-1)
    return homes


def oracle_computers(config, n: int) -> list[ComputerDescriptor]:
    """Predict the computers format_script(n) will leave behind."""
    if isinstance(config, BasisConfig):
        occ = config.to_array()
        if occ[:, 1:].any():
            raise ValueError("oracle expects all atoms in level a")
        a = occ[:, 0]
    else:
        a = np.asarray(config, dtype=np.int64)
    homes = oracle_homes(a, n)
    L = a.shape[-1]
    out = []
    for k in np.nonzero(homes)[0]:
        sites = tuple(int((k - j) % L) for j in range(n, 0, -1))
        out.append(ComputerDescriptor(home=int(k), n=n, qubit_sites=sites))
    return out


def expected_formatted(a_dep: np.ndarray, n: int) -> np.ndarray:
    """Full (..., L, 3) occupation pattern the oracle predicts after format."""
    a_dep = np.asarray(a_dep)
    homes = oracle_homes(a_dep, n)
    window = np.zeros_like(homes)
    for j in range(1, n + 1):
        window = window | np.roll(homes, -j, axis=-1)
    occ = np.zeros(a_dep.shape + (3,), dtype=np.int64)
    occ[..., 0] = homes | window
    occ[..., 2] = homes
    return occ


def verify_formatted(state, n: int) -> list[ComputerDescriptor]:
    """Scan a classical formatted state and list its computers.

    Raises :class:`StrayAtomsError` if any occupied site lies outside a
    recognized computer (home pattern (1,0,1) preceded by n qubit sites
    (1,0,0)).
    """
    if isinstance(state, MixedState):
        config = state.sole_config()
    elif isinstance(state, BasisConfig):
        config = state
    else:
        config = BasisConfig.from_counts(state)
    L = config.L
    descriptors = []
    claimed: set[int] = set()
    for k, site in enumerate(config.sites):
        if site != _HOME_SITE:
            continue
        window = [(k - j) % L for j in range(n, 0, -1)]
        if all(config.sites[w] == _QUBIT_SITE for w in window):
            descriptors.append(
                ComputerDescriptor(home=k, n=n, qubit_sites=tuple(window))
            )
            claimed.add(k)
            claimed.update(window)
    if len(claimed) != len(descriptors) * (n + 1):
        raise AssertionError("computers overlap; formatting is broken")
    strays = [
        k for k, site in enumerate(config.sites)
        if site != _EMPTY_SITE and k not in claimed
    ]
    if strays:
        raise StrayAtomsError(strays)
    return descriptors


# ---------------------------------------------------------------------------
# repair


def repair_round_script(x: int, phase: str) -> Script:
    """One repair round at shift x.

    A donor (four-atom site) promotes an atom pair to the pointer level;
    the pair rides the shift x sites to the right, one atom is deposited
    if the site there is a matching defect (empty for ``fill_empty``, one
    atom for ``fill_single``), and after the return shift the donor is
    restored whenever nothing was deposited.  The emptying step discards
    the leftover atom of a spent pair.
    """
    if phase == "fill_empty":
        deposit = PairTransfer(0, 2, 1)
    elif phase == "fill_single":
        deposit = PairTransfer(1, 2, 1)
    else:
        raise ValueError(f"unknown repair phase {phase!r}")
    return Script(
        [
            PairTransfer(4, 0, -2),
            Shift(x),
            deposit,
            Shift(-x),
            PairTransfer(4, 0, -2),
            EmptyP(),
        ]
    )


@dataclass
class RepairReport:
    defects_fixed: int
    atoms_lost: int
    rounds: int
    residual_empty: int
    residual_single: int

    def to_json_obj(self) -> dict:
        return {
            "defects_fixed": self.defects_fixed,
            "atoms_lost": self.atoms_lost,
            "rounds": self.rounds,
        }


def repair_occupations(
    a: np.ndarray,
    schedule: str = "exhaustive",
    rng: np.random.Generator | None = None,
    rounds: int | None = None,
) -> tuple[np.ndarray, RepairReport]:
    """Run repair rounds directly on a-level counts (b and p empty).

    Equivalent to repeatedly applying :func:`repair_round_script`; per
    round at shift x, every defect whose site x steps to the left holds a
    donor gets one atom, and that donor drops to two atoms.  The
    ``exhaustive`` schedule sweeps x = 1 .. L-1 once per phase, which
    fixes every defect as long as donors remain; ``random`` draws shifts
    from ``rng`` for at most ``rounds`` rounds per phase.
    """
    a = np.array(a, dtype=np.int64, copy=True)
    if a.ndim != 1:
        raise ValueError("expected a 1-d array of a-level counts")
    if a.min(initial=0) < 0 or a.max(initial=0) > 4:
        raise ValueError("repair expects counts depopulated to <= 4")
    L = a.size
    if schedule == "exhaustive":
        schedules = [range(1, L), range(1, L)]
    elif schedule == "random":
        if rng is None or rounds is None:
            raise ValueError("random schedule needs rng and rounds")
        if L > 1:
            schedules = [rng.integers(1, L, size=rounds) for _ in range(2)]
        else:
            schedules = [(), ()]
    else:
        raise ValueError(f"unknown schedule {schedule!r}")

    fixed = 0
    executed = 0
    for defect_val, xs in zip((0, 1), schedules):
        for x in xs:
            if not (a == defect_val).any() or not (a == 4).any():
                break
            executed += 1
            mask = (a == defect_val) & (np.roll(a, x) == 4)
            hit = np.nonzero(mask)[0]
            if hit.size:
                a[hit] += 1
                a[(hit - x) % L] = 2
                fixed += hit.size

    report = RepairReport(
        defects_fixed=fixed,
        atoms_lost=fixed,
        rounds=executed,
        residual_empty=int((a == 0).sum()),
        residual_single=int((a == 1).sum()),
    )
    if report.residual_empty or report.residual_single:
        warnings.warn(
            f"insufficient donors: {report.residual_empty} empty and "
            f"{report.residual_single} single-atom sites remain",
            RuntimeWarning,
        )
    return a, report


def repair(
    state: MixedState,
    schedule: str = "exhaustive",
    rng: np.random.Generator | None = None,
    rounds: int | None = None,
) -> tuple[MixedState, RepairReport]:
    """Repair a classical lattice state; see :func:`repair_occupations`."""
    config = state.sole_config()
    occ = config.to_array()
    if occ[:, 1:].any():
        raise ValueError("repair expects levels b and p to be empty")
    a, report = repair_occupations(occ[:, 0], schedule, rng, rounds)
    out = np.zeros_like(occ)
    out[:, 0] = a
    return classical(BasisConfig.from_array(out), state.m_max), report


# ---------------------------------------------------------------------------
# controlled defect creation


def create_defects_script(eps: float, cutoff: int = 4) -> Script:
    """Depopulate to two atoms, then split each pair site into a
    two-atom/one-atom superposition and trace out level b, leaving an
    independent one-atom defect with probability eps per site."""
    return depopulate_script(cutoff, 2) + Script([DefectSplit(eps), EmptyB()])


def sample_defect_creation(
    a: np.ndarray, eps: float, rng: np.random.Generator
) -> np.ndarray:
    """Draw one classical branch of the defect-creation channel."""
    a2 = depopulate_classical(a, 2)
    mask = (a2 == 2) & (rng.random(a2.shape) < eps)
    a2[mask] = 1
    return a2

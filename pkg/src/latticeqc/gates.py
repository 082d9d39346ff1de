"""Pointer-steered logical gates on formatted computers.

A formatted computer stores one qubit per register site, encoded in
which level the single atom occupies (|down> = level a, |up> = level b).
The home site holds one atom plus the pointer atom.  Gates move the
pointer with global shifts, so every computer on the lattice executes
the same logical operation in lockstep; macros always return the pointer
home, so frames compose.

Conventions: qubit offsets are counted leftward from home (offset j is
site home - j), valid offsets are 1..n.  Gate matrices are written in
the (|down>, |up>) basis per qubit, first listed qubit most significant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Union

import numpy as np

from .lattice import (
    DEFAULT_M_MAX,
    BasisConfig,
    MixedState,
    SiteOccupancy,
    classical,
)
from .primitives import (
    ABRotation,
    Collide,
    CountP,
    EmptyP,
    PairTransfer,
    Script,
    Shift,
    WSwap,
    execute,
)

DOWN_SITE = SiteOccupancy(1, 0, 0)
UP_SITE = SiteOccupancy(0, 1, 0)
HOME_SITE = SiteOccupancy(1, 0, 1)
EMPTY_SITE = SiteOccupancy(0, 0, 0)

V_THETA = math.pi / 8


class GateLeakageError(RuntimeError):
    """Amplitude escaped the logical subspace beyond tolerance."""


@dataclass(frozen=True)
class PointerFrame:
    """Tracked pointer displacement left of home (0 = at home)."""

    offset: int = 0


@dataclass(frozen=True)
class PhaseGate:
    """diag(e^{i phi}, 1) on the qubit at offset q."""

    q: int
    phi: float


@dataclass(frozen=True)
class HadamardLike:
    """Unbiased single-qubit rotation at offset q; equals the Hadamard up
    to diagonal phase corrections on both sides."""

    q: int


@dataclass(frozen=True)
class ControlPhasePi:
    """Two-qubit entangling gate: a -1 phase on exactly one logical string."""

    q1: int
    q2: int


@dataclass(frozen=True)
class MeasureQubit:
    """Projective measurement of the qubit at offset q.

    ``rest`` names a reserved spectator qubit (held in |down>) whose site
    shelters the pointer while the lattice-wide pointer count is read
    off; it must differ from q.  With ``count_up_too`` the protocol is
    repeated after a W swap to count former |up> qubits as well.
    """

    q: int
    rest: int | None = None
    count_up_too: bool = False


GateMacro = Union[PhaseGate, HadamardLike, ControlPhasePi, MeasureQubit]


def _move(cur: int, tgt: int) -> list:
    return [] if cur == tgt else [Shift(cur - tgt)]


def _check_offset(label: str, value: int, n: int | None):
    if value < 1 or (n is not None and value > n):
        raise ValueError(f"{label} offset {value} outside register 1..{n}")


def _measure_ops(q: int, rest: int, start: int) -> list:
    ops = _move(start, q)
    ops.append(PairTransfer(1, 1, -1))
    ops += _move(q, rest)
    ops += [PairTransfer(1, 1, 1), PairTransfer(1, 2, 1), CountP(), EmptyP(),
            PairTransfer(2, 0, -1)]
    ops += _move(rest, 0)
    return ops


def _measure_continuation_ops(q: int, rest: int) -> list:
    ops = _move(0, q)
    ops.append(WSwap())
    ops.append(PairTransfer(1, 1, -1))
    ops += _move(q, rest)
    ops += [PairTransfer(1, 1, 1), PairTransfer(1, 2, 1), CountP(), EmptyP(),
            PairTransfer(2, 0, -1)]
    ops += _move(rest, 0)
    return ops


def resolve_rest(macro: MeasureQubit, n: int | None) -> int:
    """The rest offset, defaulting to n (the leftmost register site)."""
    if macro.rest is not None:
        return macro.rest
    if n is None:
        raise ValueError("rest offset unset and register size unknown")
    return n


def compile_macro(
    macro: GateMacro, n: int | None = None, frame: PointerFrame = PointerFrame(0)
) -> tuple[Script, PointerFrame]:
    """Expand a macro into primitives, threading the pointer frame.

    Every macro returns the pointer to home, so the returned frame always
    has offset 0 and macros can be concatenated freely.
    """
    start = frame.offset
    if isinstance(macro, PhaseGate):
        _check_offset("qubit", macro.q, n)
        ops = _move(start, macro.q) + [Collide(macro.phi)] + _move(macro.q, 0)
    elif isinstance(macro, HadamardLike):
        _check_offset("qubit", macro.q, n)
        ops = (
            _move(start, macro.q)
            + [ABRotation(V_THETA), Collide(math.pi), ABRotation(-V_THETA),
               Collide(math.pi / 2)]
            + _move(macro.q, 0)
        )
    elif isinstance(macro, ControlPhasePi):
        _check_offset("first qubit", macro.q1, n)
        _check_offset("second qubit", macro.q2, n)
        if macro.q1 == macro.q2:
            raise ValueError("control and target must differ")
        ops = (
            _move(start, macro.q1)
            + [PairTransfer(1, 1, 1)]
            + _move(macro.q1, macro.q2)
            + [Collide(math.pi)]
            + _move(macro.q2, macro.q1)
            + [PairTransfer(1, 1, 1)]
            + _move(macro.q1, 0)
        )
    elif isinstance(macro, MeasureQubit):
        rest = resolve_rest(macro, n)
        _check_offset("measured qubit", macro.q, n)
        _check_offset("rest", rest, n)
        if rest == macro.q:
            raise ValueError("rest site must differ from the measured qubit")
        ops = _measure_ops(macro.q, rest, start)
        if macro.count_up_too:
            ops += _measure_continuation_ops(macro.q, rest)
    else:
        raise TypeError(f"unknown macro {macro!r}")
    return Script(ops), PointerFrame(0)


def computer_config(
    n: int, L: int | None = None, up_offsets=(), home: int | None = None
) -> BasisConfig:
    """A lattice with one formatted computer in a logical basis state.

    Qubits sit at sites home-n .. home-1 (default home = n, so the
    register starts at site 0); offsets listed in ``up_offsets`` start in
    |up>, the rest in |down>.
    """
    if L is None:
        L = n + 2
    if home is None:
        home = n
    if L < n + 1:
        raise ValueError("lattice too small for the register")
    up = set(up_offsets)
    bad = [j for j in up if not 1 <= j <= n]
    if bad:
        raise ValueError(f"up offsets {bad} outside register 1..{n}")
    sites = [EMPTY_SITE] * L
    for j in range(1, n + 1):
        sites[(home - j) % L] = UP_SITE if j in up else DOWN_SITE
    sites[home % L] = HOME_SITE
    return BasisConfig(tuple(sites))


def involved_qubits(macro: GateMacro) -> tuple[int, ...]:
    if isinstance(macro, PhaseGate):
        return (macro.q,)
    if isinstance(macro, HadamardLike):
        return (macro.q,)
    if isinstance(macro, ControlPhasePi):
        return (macro.q1, macro.q2)
    raise ValueError(f"{type(macro).__name__} has no unitary logical action")


def extract_logical_unitary(
    macro: GateMacro,
    n: int,
    qubits: tuple[int, ...] | None = None,
    L: int | None = None,
    m_max: int = DEFAULT_M_MAX,
    leak_tol: float = 1e-6,
) -> tuple[np.ndarray, float]:
    """Simulate the macro on all logical basis inputs over ``qubits``.

    Returns the 2^k x 2^k matrix in the computational (|down>, |up>)
    ordering plus the worst-case leakage out of the logical subspace.
    Leakage above ``leak_tol`` raises :class:`GateLeakageError`.
    """
    if qubits is None:
        qubits = involved_qubits(macro)
    k = len(qubits)
    script, _ = compile_macro(macro, n)
    basis_bits = list(product((0, 1), repeat=k))
    configs = [
        computer_config(n, L, up_offsets=[q for q, b in zip(qubits, bits) if b])
        for bits in basis_bits
    ]
    index = {c: i for i, c in enumerate(configs)}
    U = np.zeros((2 ** k, 2 ** k), dtype=complex)
    leakage = 0.0
    for col, config in enumerate(configs):
        out, _ = execute(classical(config, m_max), script)
        if len(out.branches) != 1:
            raise GateLeakageError("gate macro produced a mixed state")
        _, st = out.branches[0]
        captured = 0.0
        for c, amp in st:
            row = index.get(c)
            if row is not None:
                U[row, col] = amp
                captured += abs(amp) ** 2
        leakage = max(leakage, 1.0 - captured)
    if leakage > leak_tol:
        raise GateLeakageError(f"leakage {leakage:.3e} exceeds {leak_tol:.1e}")
    return U, leakage


def hadamard_phase_correction(U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal phase vectors (d1, d2) with diag(d1) @ U @ diag(d2) = H.

    Solves the phase equations of an unbiased 2x2 unitary in closed form;
    unitarity guarantees the fourth equation is consistent.
    """
    theta = np.angle(U)
    a0 = -theta[0, 0]
    a1 = -theta[1, 0]
    b0 = 0.0
    b1 = theta[0, 0] - theta[0, 1]
    return np.exp(1j * np.array([a0, a1])), np.exp(1j * np.array([b0, b1]))


def measure_qubit(
    state: MixedState,
    macro: MeasureQubit,
    rng: np.random.Generator | None = None,
    n: int | None = None,
) -> tuple[int, int | None, MixedState]:
    """Measure one qubit on every computer of the lattice at once.

    Returns (down_count, up_count, state): the number of computers whose
    qubit collapsed to |down>, the |up> tally when ``count_up_too`` is
    set (else None), and the post-measurement state.  Measured sites end
    up emptied exactly where |down> was found; pointer and rest qubit
    survive on every computer.
    """
    rest = resolve_rest(macro, n)
    if rest == macro.q:
        raise ValueError("rest site must differ from the measured qubit")
    state, counts = execute(state, Script(_measure_ops(macro.q, rest, 0)), rng)
    down = int(counts[0])
    up = None
    if macro.count_up_too:
        state, counts = execute(
            state, Script(_measure_continuation_ops(macro.q, rest)), rng
        )
        up = int(counts[0])
    return down, up, state


def run_circuit(
    state: MixedState,
    macros,
    n: int | None = None,
    rng: np.random.Generator | None = None,
    counts: list | None = None,
) -> MixedState:
    """Apply a macro sequence; measurement outcomes go to ``counts``."""
    frame = PointerFrame(0)
    for macro in macros:
        script, frame = compile_macro(macro, n, frame)
        state, outcomes = execute(state, script, rng)
        if counts is not None:
            counts.extend(outcomes)
    return state


# ---------------------------------------------------------------------------
# serialization


def macros_to_json_obj(macros) -> list:
    out = []
    for m in macros:
        if isinstance(m, ControlPhasePi):
            out.append({"op": "cz", "q1": m.q1, "q2": m.q2})
        elif isinstance(m, PhaseGate):
            out.append({"op": "phase", "q": m.q, "phi": m.phi})
        elif isinstance(m, HadamardLike):
            out.append({"op": "h", "q": m.q})
        elif isinstance(m, MeasureQubit):
            out.append({"op": "measure", "q": m.q, "rest": m.rest, "up": m.count_up_too})
        else:
            raise TypeError(f"unknown macro {m!r}")
    return out


def macros_from_json_obj(obj) -> list:
    macros = []
    for item in obj:
        op = item["op"]
        if op == "cz":
            macros.append(ControlPhasePi(int(item["q1"]), int(item["q2"])))
        elif op == "phase":
            macros.append(PhaseGate(int(item["q"]), float(item["phi"])))
        elif op == "h":
            macros.append(HadamardLike(int(item["q"])))
        elif op == "measure":
            rest = item.get("rest")
            macros.append(
                MeasureQubit(
                    int(item["q"]),
                    None if rest is None else int(rest),
                    bool(item.get("up", False)),
                )
            )
        else:
            raise ValueError(f"unknown macro op {op!r}")
    return macros


def matrix_to_json_obj(U: np.ndarray) -> list:
    return [[{"re": z.real, "im": z.imag} for z in row] for row in np.asarray(U)]

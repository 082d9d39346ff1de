"""Shared test utilities: dense one-site spaces and random states."""
import numpy as np

from latticeqc import BasisConfig, MixedState, PureState, SiteOccupancy, classical


def dense_site_configs(m_max=6):
    """All one-site configurations with a+b <= m_max and p <= m_max.

    On this space every non-channel primitive closes, so unitarity can be
    checked as an honest matrix identity.
    """
    out = []
    for a in range(m_max + 1):
        for b in range(m_max + 1 - a):
            for p in range(m_max + 1):
                out.append(BasisConfig((SiteOccupancy(a, b, p),)))
    return out


def op_matrix(op_fn, configs):
    """Matrix of a state-to-state map in the given basis."""
    index = {c: i for i, c in enumerate(configs)}
    M = np.zeros((len(configs), len(configs)), dtype=complex)
    for j, c in enumerate(configs):
        out = op_fn(classical(c))
        ((w, st),) = out.branches
        for cfg, amp in st:
            M[index[cfg], j] = amp
    return M


def random_config(rng, L, max_count=2):
    return BasisConfig.from_array(rng.integers(0, max_count + 1, size=(L, 3)))


def random_state(rng, L, nterms=4, max_count=2):
    configs = set()
    while len(configs) < nterms:
        configs.add(random_config(rng, L, max_count))
    amps = rng.normal(size=nterms) + 1j * rng.normal(size=nterms)
    amps /= np.linalg.norm(amps)
    terms = dict(zip(sorted(configs), amps))
    return MixedState([(1.0, PureState(terms))])

import itertools
import math

import numpy as np
import pytest


def pauli_collective(n):
    """Dense S_z, S_x over the 2^n qubit space built from single-site Pauli sums."""
    sz1 = np.array([[0.5, 0.0], [0.0, -0.5]])  # |up> first
    sx1 = np.array([[0.0, 0.5], [0.5, 0.0]])
    eye = np.eye(2)

    def site(op, i):
        out = np.array([[1.0]])
        for j in range(n):
            out = np.kron(out, op if j == i else eye)
        return out

    sz = sum(site(sz1, i) for i in range(n))
    sx = sum(site(sx1, i) for i in range(n))
    return sz, sx


def dicke_states(n):
    """Columns |s=n/2, m> for m = -s..s as explicit symmetric qubit states."""
    dim = 2 ** n
    cols = []
    for ups in range(n + 1):  # m = ups - n/2
        v = np.zeros(dim)
        for pos in itertools.combinations(range(n), ups):
            idx = 0
            for j in range(n):
                bit = 0 if j in pos else 1  # 0 = up in the kron ordering above
                idx = 2 * idx + bit
            v[idx] = 1.0
        cols.append(v / math.sqrt(math.comb(n, ups)))
    return np.array(cols).T


@pytest.fixture(scope="session")
def pauli_oracle():
    cache = {}

    def get(n):
        if n not in cache:
            sz, sx = pauli_collective(n)
            d = dicke_states(n)
            cache[n] = {"sz": d.T @ sz @ d, "sx": d.T @ sx @ d, "sx2": d.T @ sx @ sx @ d,
                        "full_sz": sz, "full_sx": sx, "dicke": d}
        return cache[n]

    return get


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def criterion(request):
    """record(label, ok, detail): log one acceptance result for the end-of-run summary."""
    log = request.config.stash[_ACCEPTANCE_KEY]

    def record(label, ok, detail):
        log.append((label, bool(ok), detail))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_ACCEPTANCE_KEY, [])
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in sorted(log, key=lambda r: _criterion_order(r[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {label}: {detail}")


def _criterion_order(label):
    head = label.split(" ", 1)[0]
    digits = "".join(ch for ch in head if ch.isdigit())
    return (int(digits) if digits else 0, head)

import numpy as np
import pytest
from hypothesis import settings

from opws.model import BSpline, GroundTruthOperator, RaisedCosine, SpreadingAtom

settings.register_profile("opws", deadline=None, max_examples=40)
settings.load_profile("opws")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rect_atom(coeff=1.0, T=1.0, Omega=0.8):
    """Single raised-cosine atom filling [0, T) x [-Omega/2, Omega/2)."""
    return SpreadingAtom(coeff, RaisedCosine(T / 2, T), RaisedCosine(0.0, Omega))


def random_rect_operator(rng, T=1.0, Omega=0.8, n_atoms=None):
    """Random atoms whose supports stay inside [0, T) x [-Omega/2, Omega/2)."""
    n = int(rng.integers(1, 4)) if n_atoms is None else n_atoms
    atoms = []
    for _ in range(n):
        wt = rng.uniform(0.3, 1.0) * T
        ct = rng.uniform(wt / 2, T - wt / 2)
        wn = rng.uniform(0.3, 1.0) * Omega
        cn = rng.uniform(-Omega / 2 + wn / 2, Omega / 2 - wn / 2)
        coeff = rng.standard_normal() + 1j * rng.standard_normal()
        tp = RaisedCosine(ct, wt) if rng.random() < 0.5 else BSpline(ct, wt, int(rng.integers(2, 5)))
        atoms.append(SpreadingAtom(coeff, tp, RaisedCosine(cn, wn)))
    return GroundTruthOperator(tuple(atoms))


# acceptance reporting: one PASS/FAIL line per criterion, repeated in the summary
_ACCEPTANCE = []


@pytest.fixture
def criterion():
    def record(cid, ok, detail):
        line = f"{cid} {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)

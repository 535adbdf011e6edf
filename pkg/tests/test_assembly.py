import json
import math
import pickle
from fractions import Fraction

import pytest

from assembly_lab import assembly as A
from assembly_lab.errors import (ConfigurationError, DivergenceError, InconsistentInputError,
                                 InvalidInputError, UnsupportedError)

SP, PM, MP, GR = A.SET_PARTITIONS, A.PERMUTATIONS, A.MAPPINGS, A.GRAPHS


def test_m_examples():
    assert A.m(MP, 3) == 17
    assert A.m(SP, 10) == 1
    assert A.m(PM, 5) == 24
    assert [A.m(MP, i) for i in (1, 2)] == [1, 3]
    assert [A.m(GR, i) for i in range(1, 5)] == [1, 1, 4, 38]


def test_m_permutations_is_factorial():
    assert all(A.m(PM, i) == math.factorial(i - 1) for i in range(1, 30))


def test_m_from_p_examples():
    assert A.m_from_p([1, 1, 2, 8]) == [1, 1, 4]
    assert A.m_from_p([math.factorial(n) for n in range(8)]) == [math.factorial(i - 1) for i in range(1, 8)]
    assert A.m_from_p([1, 1]) == [1]


def test_m_from_p_mappings_roundtrip():
    assert A.m_from_p([n**n for n in range(9)]) == [A.m(MP, i) for i in range(1, 9)]


def test_m_from_p_errors():
    with pytest.raises(InvalidInputError):
        A.m_from_p([2, 1])
    with pytest.raises(InconsistentInputError):
        A.m_from_p([1, 1, 0])  # would need m_2 = -1
    with pytest.raises(InvalidInputError):
        A.m_from_p([1, Fraction(1, 2)])


def test_builtin_lookup_and_unknown():
    assert A.builtin("set-partitions") is SP
    assert A.builtin("Permutations") is PM
    with pytest.raises(ConfigurationError):
        A.builtin("trees")


def test_from_json_list_and_rule(tmp_path):
    spec = A.from_json({"name": "toy", "m": [1, 1, 6]})
    assert spec.m(3) == 6 and spec.m(4) == 0
    path = tmp_path / "a.json"
    path.write_text(json.dumps({"name": "g", "m": {"rule": "graphs"}}))
    g = A.load_assembly_file(path)
    assert g.m(3) == 4 and not g.radius_positive
    with pytest.raises(ConfigurationError):
        A.from_json({"name": "bad"})
    with pytest.raises(ConfigurationError):
        A.from_json({"name": "bad", "m": [1, -1]})


def test_spec_pickles_for_workers():
    spec = A.from_json({"name": "toy", "m": [1, 2, 3]})
    clone = pickle.loads(pickle.dumps(spec))
    assert clone == spec and clone.m(2) == 2


def test_egf_M_examples():
    assert A.egf_M(SP, 1.0).value == pytest.approx(math.e - 1, rel=1e-14)
    assert A.egf_M(PM, 0.5).value == pytest.approx(math.log(2), rel=1e-14)
    assert A.egf_M(SP, 1e-12).value < 1e-11


def test_egf_M_errors():
    with pytest.raises(DivergenceError):
        A.egf_M(PM, 1.0)
    with pytest.raises(DivergenceError):
        A.egf_M(MP, 0.4)
    with pytest.raises(UnsupportedError):
        A.egf_M(GR, 0.1)


def test_lambda_examples():
    assert A.lambda_i(SP, 1.0, 1) == 1
    assert A.lambda_i(PM, 0.3, 4) == pytest.approx(0.3**4 / 4)
    assert A.lambda_i(MP, 0.1, 3) == pytest.approx(17 * 0.001 / 6)
    assert A.lambda_i(PM, Fraction(1, 2), 3) == Fraction(1, 24)


def test_lambda_increasing_in_x():
    for spec in (SP, PM, MP):
        for i in range(1, 8):
            vals = [A.lambda_i(spec, x, i) for x in (0.01, 0.1, 0.2, 0.3)]
            assert all(a < b for a, b in zip(vals, vals[1:]))


def test_rho_examples():
    assert A.rho(SP) == pytest.approx(6 ** (-1 / 3), rel=1e-12)
    assert A.rho(PM) == pytest.approx(1.0)  # sup over i >= 3 of (1/i)^(1/i) tends to 1
    assert A.rho(A.from_json({"name": "c", "m": [1, 1, 6]})) == pytest.approx(1.0)
    with pytest.raises(UnsupportedError):
        A.rho(GR)


def test_radius_values():
    assert A.radius(SP) == math.inf
    assert A.radius(PM) == 1.0
    assert A.radius(MP) == pytest.approx(1 / math.e)
    assert A.radius(GR) == 0.0

import math
from pathlib import Path

import pytest

import econoport as ep

ROOT = Path(__file__).resolve().parents[2]

RC = """
FSRC F 1 0 STEP(0,1) AC(1)
FRICTION R 1 0 b=1
STORAGE C 1 0 k=1
.TRAN 0.01 2 ic=zero
.PROBE V(1) I(C)
"""

TRADER = """
.SUBCKT trader u c d c
  DEMAND L1 u d eps=2
  FRICTION R1 d m b=0.5
  STORAGE C1 m c k=4
.ENDS
"""


def test_rational_functions():
    s = ep.RationalFunction.s()
    f = (s + ep.RationalFunction(1.0)) / (s * s + ep.RationalFunction(2.0))
    assert f(0j) == pytest.approx(0.5)
    assert f * ep.RationalFunction(1.0) == f


def test_trader_conversions_round_trip():
    z = ep.trader(2.0, 2.0, 0.25)
    assert z.kind == "Z"
    assert z.convert("Y").convert("Z") == z
    assert z.convert("T").convert("Z") == z


def test_run_rc_step():
    results = dict(ep.run(RC))
    tran = results["tran"]
    assert "V(1)" in str(tran)


def test_extract_matches_symbolic_trader():
    model = ep.extract(TRADER, "trader", "Z", "log:5:0.1:10")
    z = ep.trader(2.0, 2.0, 0.25)
    assert len(model["points"]) == 5 and not model["gaps"]
    for point in model["points"]:
        s = 2j * math.pi * point["f"]
        for k, (re, im) in enumerate(point["m"]):
            assert complex(re, im) == pytest.approx(z.entry(k // 2, k % 2)(s), rel=1e-9)


def test_bode_svg():
    svg = ep.bode_svg(RC, "F", "V(1)", "log:20:0.01:100")
    assert svg.startswith("<svg") and "<polyline" in svg


def test_parse_error_carries_location():
    with pytest.raises(ep.ParseError) as info:
        ep.normalize_netlist("FRICTION R1 a 0 b=1\nRESISTOR R2 a 0 r=1\n")
    assert info.value.kind == "unknown-element"
    assert info.value.line == 2
    assert isinstance(info.value, ep.Error)


def test_elaboration_error():
    with pytest.raises(ep.ElaborationError):
        ep.run("FRICTION R a 0 b=1\nXbad a 0 nosuch\n")


def test_metrics():
    t = [0.0, 1.0, 2.0]
    assert ep.gdp(t, [1, 1, 1], [2, 2, 2], [3, 3, 3], [0, 0, 0]) == [6.0, 6.0, 6.0]
    infl = ep.inflation(t, [1.0, math.e, math.e ** 2])
    assert infl == pytest.approx([1.0, 1.0, 1.0])


def test_scenario_corpus():
    results = ep.check_scenarios(str(ROOT / "scenarios"), ["robinson_static"])
    assert results and all(passed for _, _, passed, _ in results)

from fractions import Fraction as F

import pytest

from src.auction.errors import IndifferenceError, UnsupportedDimension, ValidationFailure
from src.auction.lattice import AuctionInstance, Valuation
from src.auction.lp import affine_dimension, irredundant_rows, max_margin, maximize, polytope_vertices
from src.auction.tropical import (
    aggregated_demand_violations,
    classify_vector,
    complex_segments,
    complex_to_dict,
    demand,
    demand_form,
    enumerate_cells,
    facet_vectors,
    on_indifference_locus,
    substitutes_check,
)

INST = AuctionInstance(M=2, m=(1, 1), p_min=("1/8", "3/16"), eps=("1/4", "1/4"))
V_SUB = Valuation(table={"0,0": 0, "1,0": 4, "0,1": 3, "1,1": 6}, name="sub")
V_EX = Valuation(table={"0,0": 0, "1,0": 1, "0,1": 2, "1,1": 5}, name="ex")


def test_exact_simplex():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6
    res = maximize([1, 1], [[1, 2], [3, 1]], [4, 6])
    assert res.optimal
    assert res.value == F(14, 5)
    assert res.x == (F(8, 5), F(6, 5))
    assert maximize([1], [[-1]], [-2], [[1]], [1]).status == "infeasible"
    assert maximize([1], [[-1]], [0]).status == "unbounded"


def test_margin_lp_detects_empty_interior():
    # 0 < x < 1 has room, x <= 0 and x >= 0 does not
    assert max_margin([((F(1),), F(1)), ((F(-1),), F(0))], dim=1).value > 0
    assert max_margin([((F(1),), F(0)), ((F(-1),), F(0))], dim=1).value <= 0


def test_square_vertices():
    rows = [((F(1), F(0)), F(1)), ((F(0), F(1)), F(1)), ((F(-1), F(0)), F(0)), ((F(0), F(-1)), F(0))]
    assert set(polytope_vertices(rows, [], 2)) == {(0, 0), (0, 1), (1, 0), (1, 1)}


def test_redundant_rows_are_pruned():
    rows = [
        ((F(-1), F(0)), F(0)),
        ((F(0), F(-1)), F(0)),
        ((F(1), F(0)), F(1)),
        ((F(0), F(1)), F(1)),
        ((F(1), F(1)), F(3)),
        ((F(2), F(0)), F(2)),
    ]
    kept = {tuple(a) + (b,) for a, b in irredundant_rows(rows, 2)}
    assert kept == {(-1, 0, 0), (0, -1, 0), (1, 0, 1), (0, 1, 1)}
    assert affine_dimension(rows, [], 2) == 2
    assert affine_dimension(rows, [((F(1), F(-1)), F(0))], 2) == 1
    assert affine_dimension(rows + [((F(1), F(1)), F(-1))], [], 2) == -1


def test_demand_singleton_and_ties():
    ds = demand(V_SUB, (1, 1))
    assert ds.bundles == ((1, 1),) and ds.single() == (1, 1)
    tied = demand(V_SUB, (3, 1))
    assert set(tied) == {(0, 1), (1, 1)}
    assert on_indifference_locus(V_SUB, (3, 1))
    with pytest.raises(IndifferenceError) as exc:
        tied.single()
    assert exc.value.exit_code == 3
    assert exc.value.details()["ties"] == [[0, 1], [1, 1]]


def test_demand_rejects_negative_price():
    with pytest.raises(ValidationFailure):
        demand(V_SUB, (-1, 0))


def test_demand_forms_at_vertex():
    # (3, 2) is where the three cells (1,1), (1,0) and (0,1) meet
    ds = demand(V_SUB, (3, 2))
    assert set(ds) == {(1, 1), (1, 0), (0, 1)}
    assert demand_form(ds) == ("below", (1, 1))
    assert demand_form(demand(V_SUB, (5, 5))) is not None


def _separable_with_total_penalty():
    c1, c2, g = [0, 9, 16], [0, 8, 14], [0, 0, -1, -3, -6]
    return Valuation(table={f"{a},{b}": c1[a] + c2[b] + g[a + b] for a in range(3) for b in range(3)}, name="two-by-two")


def test_demand_form_on_every_vertex_and_edge():
    inst22 = AuctionInstance(M=2, m=(2, 2), p_min=("1/8", "3/16"), eps=("1/4", "1/4"))
    for v, inst in ((V_SUB, INST), (_separable_with_total_penalty(), inst22)):
        assert substitutes_check(v, inst).ok
        cc = enumerate_cells(v, inst)
        assert cc.vertices
        for vertex in cc.vertices:
            assert demand_form(demand(v, vertex.interior)) is not None, vertex.interior
        for f in cc.facets:
            assert demand_form(demand(v, f.point)) is not None, f.point


def test_gross_substitutes_monotonicity():
    prices = [(F(a, 2), F(b, 2)) for a in range(0, 12) for b in range(0, 12)]
    assert aggregated_demand_violations(V_SUB, prices) == []


def test_classify():
    assert classify_vector((1, 0)) == "e1"
    assert classify_vector((0, -1)) == "-e2"
    assert classify_vector((1, -1)) == "e1-e2"
    assert classify_vector((1, 1)) == "other"
    assert classify_vector((2, 0)) == "other"


def test_substitutes_complex():
    cc = enumerate_cells(V_SUB, INST)
    assert set(cc.cells) == {(0, 0), (1, 0), (0, 1), (1, 1)}
    kinds = {(plus, minus): kind for plus, minus, _, kind in facet_vectors(cc)}
    assert kinds[((1, 0), (0, 1))] == "e1-e2"
    assert kinds[((1, 1), (0, 1))] == "e1"
    assert kinds[((1, 1), (1, 0))] == "e2"
    assert ((1, 1), (0, 0)) not in kinds
    assert cc.cell_of((1, 1)).label == ((1, 1),)
    assert cc.cell_of((3, 1)) is None
    assert cc.facet((0, 1), (1, 0)) is not None
    assert substitutes_check(V_SUB, INST).ok


def test_complementary_opponent_is_not_substitutes():
    res = substitutes_check(V_EX, INST)
    assert not res.ok
    assert (res.facet.plus, res.facet.minus) == ((1, 1), (0, 0))
    assert res.facet.kind == "other"
    p, p_hat, j = res.witness
    # raising one price strictly lowers demand for the other category
    assert demand(V_EX, p).single()[j] > demand(V_EX, p_hat).single()[j]
    out = res.as_dict()
    assert out["substitutes"] is False and "witness" in out


def test_cell_complex_needs_strict_concavity():
    flat = Valuation(table={"0,0": 0, "1,0": 4, "0,1": 3, "1,1": 4})
    with pytest.raises(ValidationFailure):
        enumerate_cells(flat, INST)


def test_single_category_is_always_substitutes():
    inst = AuctionInstance(M=1, m=(3,), p_min=("1/4",), eps=("1/2",))
    v = Valuation(table={"0": 0, "1": 10, "2": 18, "3": 24})
    assert substitutes_check(v, inst).ok
    assert demand(v, (F(7),)).single() == (2,)
    with pytest.raises(UnsupportedDimension):
        complex_segments(enumerate_cells(v, inst), inst)


def test_complex_export():
    cc = enumerate_cells(V_SUB, INST)
    doc = complex_to_dict(cc)
    assert doc["M"] == 2 and len(doc["cells"]) == 4
    assert len(doc["facets"]) == len(cc.facets)
    segs = {(plus, minus): {a, b} for a, b, plus, minus in complex_segments(cc, INST)}
    assert segs[((1, 0), (0, 1))] == {(3, 2), (4, 3)}


def _demand_drops(v, step=F(1, 4), n=28):
    """Grid pairs where raising one price lowers demand for the other good."""
    drops = []
    for a in range(n):
        for b in range(n):
            p = (a * step + F(1, 7), b * step + F(1, 11))
            d = demand(v, p)
            for i in range(2):
                q = tuple(x + (2 * step if j == i else 0) for j, x in enumerate(p))
                e = demand(v, q)
                if d.is_singleton and e.is_singleton and e.single()[1 - i] < d.single()[1 - i]:
                    drops.append((p, q))
    return drops


def test_facet_criterion_agrees_with_demand_scan():
    assert substitutes_check(V_SUB, INST).ok and _demand_drops(V_SUB) == []
    assert not substitutes_check(V_EX, INST).ok
    assert ((F(2) + F(1, 7), F(5, 2) + F(1, 11)), (F(5, 2) + F(1, 7), F(5, 2) + F(1, 11))) in _demand_drops(V_EX)

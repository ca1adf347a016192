from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqcentre.errors import ConfigurationError, EvaluationError, FittingError, SearchError
from eqcentre.kepler import centre_coefficient_c1, centre_exact, invert_c1
from eqcentre.sregress.config import FULL, TRIG, OperatorVocabulary, SearchConfig, experiment_preset
from eqcentre.sregress.enumerate import enumerate_skeletons, enumerate_with_text
from eqcentre.sregress.expr import (
    Binary,
    Const,
    Unary,
    Var,
    canonical_form,
    eval_expression,
    evaluate,
    infix_form,
    is_out_of_domain,
    parse_prefix,
)
from eqcentre.sregress.fitting import fit_constants
from eqcentre.sregress.measures import fit_bits, fit_measure, parsimony_measure
from eqcentre.sregress.pareto import (
    ScoredCandidate,
    pareto_front,
    pareto_front_naive,
    read_frontier,
    write_frontier,
)
from eqcentre.sregress.search import (
    augment_harmonics,
    discover,
    first_harmonic_candidate,
    is_constant_valued,
    simplify,
    sin_coefficient,
)

from oracles import closed_form_line, naive_front, naive_skeleton_texts

M_ = Var("M")
SIN_M = Unary("sin", M_)
FIRST_HARMONIC = Binary("mul", Const(0.1095), SIN_M)

# ---------------------------------------------------------------- evaluation


def test_eval_constant_and_first_harmonic():
    assert eval_expression(Const(2.5), {"M": 0.3}) == 2.5
    assert eval_expression(FIRST_HARMONIC, {"M": math.pi / 2}) == pytest.approx(0.1095, abs=1e-15)


def test_eval_out_of_domain_markers():
    assert is_out_of_domain(eval_expression(Binary("div", Const(1.0), Var("x")), {"x": 0.0}))
    assert is_out_of_domain(eval_expression(Unary("log", Var("x")), {"x": -1.0}))
    assert is_out_of_domain(eval_expression(Unary("sqrt", Var("x")), {"x": -1.0}))
    assert is_out_of_domain(eval_expression(Unary("exp", Var("x")), {"x": 1e6}))


def test_eval_unbound_variable_is_an_error():
    with pytest.raises(EvaluationError):
        eval_expression(Var("q"), {"M": 1.0})


def test_canonical_form_commutative_and_stable():
    a = Binary("mul", SIN_M, Const(0.1095))
    assert canonical_form(a) == canonical_form(FIRST_HARMONIC)
    assert canonical_form(M_) == "(var M)"
    two_harmonics = parse_prefix("(add (mul (const 0.1147) (var sin_1)) (mul (const 0.0113) (var sin_2)))")
    assert canonical_form(two_harmonics) == canonical_form(two_harmonics)
    assert canonical_form(two_harmonics) == "(add (mul (const 0.0113) (var sin_2)) (mul (const 0.1147) (var sin_1)))"


def test_infix_form_uses_explicit_parentheses():
    assert infix_form(FIRST_HARMONIC) == "(0.1095 * sin(M))"
    expr = parse_prefix("(div (neg (var M)) (square (inv (var x))))")
    assert infix_form(expr) == "((-M) / ((1/x)^2))"


_exprs = st.recursive(
    st.one_of(
        st.builds(Var, st.sampled_from(["M", "sin_1", "x"])),
        st.builds(Const, st.floats(-1e3, 1e3, allow_nan=False).map(lambda v: float(format(v, ".9g")))),
    ),
    lambda inner: st.one_of(
        st.builds(Unary, st.sampled_from(["neg", "sin", "cos", "log", "inv"]), inner),
        st.builds(Binary, st.sampled_from(["add", "sub", "mul", "div"]), inner, inner),
    ),
    max_leaves=8,
)


@given(_exprs)
def test_prefix_round_trip(expr):
    text = canonical_form(expr)
    assert canonical_form(parse_prefix(text)) == text


# --------------------------------------------------------------- enumeration


def test_enumerate_single_node():
    cfg = SearchConfig(TRIG, 1, ("M",))
    assert {canonical_form(e) for e in enumerate_skeletons(cfg)} == {"(var M)", "(const ?)"}


def test_enumerate_two_nodes_excludes_variable_free():
    vocab = OperatorVocabulary("sin-only", frozenset(), frozenset({"sin"}))
    texts = {canonical_form(e) for e in enumerate_skeletons(SearchConfig(vocab, 2, ("M",)))}
    assert texts == {"(var M)", "(const ?)", "(sin (var M))"}


@pytest.mark.parametrize("max_nodes", [4, 5, 6])
def test_enumeration_matches_brute_force_oracle(max_nodes):
    cfg = SearchConfig(TRIG, max_nodes, ("M",))
    got = [text for _, text in enumerate_with_text(cfg)]
    assert len(got) == len(set(got))
    expected = naive_skeleton_texts(max_nodes, ["M"], sorted(TRIG.unary), sorted(TRIG.binary))
    assert set(got) == expected
    if max_nodes == 4:
        assert len(got) == 94


def test_enumeration_order_and_bias_containment():
    cfg = experiment_preset(3).with_overrides(max_nodes=5)
    sizes = []
    for expr in enumerate_skeletons(cfg):
        sizes.append(expr.size())
        ops = {n.op for n in expr.walk() if isinstance(n, (Unary, Binary))}
        assert not ops & {"exp", "log", "sqrt", "div"}
    assert sizes == sorted(sizes)


def test_enumeration_respects_constant_cap():
    cfg = SearchConfig(TRIG, 6, ("M",), max_constants=1)
    for expr in enumerate_skeletons(cfg):
        assert sum(isinstance(n, Const) for n in expr.walk()) <= 1


# ------------------------------------------------------------------- fitting

GRID = np.linspace(0.0, 2 * math.pi, 2000)


def test_fit_linear_planted_coefficient():
    data = {"M": GRID}
    fitted = fit_constants(Binary("mul", Const(), SIN_M), data, 0.1098 * np.sin(GRID))
    assert fitted.left.value == pytest.approx(0.1098, abs=1e-9)


def test_fit_on_exact_centre_matches_first_order_coefficient():
    data = {"M": GRID}
    fitted = fit_constants(Binary("mul", Const(), SIN_M), data, centre_exact(GRID, 0.0549))
    assert abs(fitted.left.value - centre_coefficient_c1(0.0549)) < 2e-4


def test_fit_line_matches_normal_equations():
    rng = np.random.default_rng(3)
    M = rng.uniform(0, 2 * math.pi, 500)
    y = centre_exact(M, 0.0549) + 0.01 * rng.standard_normal(500)
    skeleton = Binary("add", Const(), Binary("mul", Const(), M_))
    fitted = fit_constants(skeleton, {"M": M}, y)
    slope, intercept = closed_form_line(M, y)
    assert fitted.left.value == pytest.approx(intercept, abs=1e-10)
    assert fitted.right.left.value == pytest.approx(slope, abs=1e-10)


def test_fit_nonlinear_constant_by_grid_and_pattern():
    data = {"M": GRID}
    fitted = fit_constants(Unary("sin", Binary("mul", Const(), M_)), data, np.sin(1.7 * GRID))
    assert fitted.arg.left.value == pytest.approx(1.7, abs=1e-8)


def test_fit_all_rows_out_of_domain():
    skeleton = Binary("mul", Const(), Unary("log", M_))
    with pytest.raises(FittingError):
        fit_constants(skeleton, {"M": -np.ones(10)}, np.zeros(10))


# ------------------------------------------------------------------ measures


def test_fit_measure_reference_points():
    y = np.sin(GRID)
    assert fit_measure(SIN_M, {"M": GRID, "y": y}, "y") == 0.0
    assert fit_bits(2.0**-30, 2.0**-30) == pytest.approx(1.0)
    assert fit_bits(0.003, 2.0**-30) == pytest.approx(21.619178663930487, abs=1e-12)


def test_fit_measure_caps_out_of_domain_rows():
    data = {"x": np.array([0.0, 1.0]), "y": np.array([0.0, 1.0])}
    expr = Unary("inv", Var("x"))
    assert fit_measure(expr, data, "y", 1.0) == pytest.approx(math.log2(1 + (1e3 + 0.0) / 2))


def test_parsimony_reference_points():
    cfg = SearchConfig(TRIG, 7, ("M",))
    assert parsimony_measure(M_, cfg) == 1.0
    assert parsimony_measure(Const(0.0), cfg) == 0.0
    assert parsimony_measure(FIRST_HARMONIC, cfg) == pytest.approx(13.43652208489448, abs=1e-12)


@given(_exprs, st.sampled_from(["neg", "sin", "cos"]))
def test_parsimony_strictly_increases_with_any_node(expr, op):
    cfg = SearchConfig(TRIG, 25, ("M", "sin_1", "x"))
    base = parsimony_measure(expr, cfg)
    assert parsimony_measure(Unary(op, expr), cfg) > base
    assert parsimony_measure(Binary("add", expr, Var("x")), cfg) > base


@given(st.floats(0, 1e3), st.floats(0, 1e3))
def test_fit_bits_monotone(a, b):
    a, b = min(a, b), max(a, b)
    assert fit_bits(a, 2.0**-30) <= fit_bits(b, 2.0**-30)
    if b > a * (1 + 1e-12):
        assert fit_bits(a, 2.0**-30) < fit_bits(b, 2.0**-30)


# -------------------------------------------------------------------- pareto


def _cand(fit, pars, text="(var M)", tag=None):
    return ScoredCandidate(parse_prefix(text), fit, pars, tag)


def test_pareto_small_cases():
    front = pareto_front([_cand(1, 2, "(var a)"), _cand(2, 1, "(var b)"), _cand(2, 2, "(var c)")])
    assert [(c.fit, c.parsimony) for c in front] == [(2, 1), (1, 2)]
    single = _cand(3, 3)
    assert pareto_front([single]) == [single]


def test_pareto_ties_resolved_by_text():
    front = pareto_front([_cand(1, 1, "(var b)"), _cand(1 + 1e-10, 1, "(var a)")])
    assert [c.prefix for c in front] == ["(var a)"]


@pytest.mark.parametrize("seed", range(5))
def test_pareto_matches_naive_oracle(seed):
    rng = np.random.default_rng(seed)
    pts = rng.integers(0, 40, size=(300, 2)).astype(float)
    cands = [_cand(f, p, f"(var v{i})") for i, (f, p) in enumerate(pts)]
    front = pareto_front(cands)
    assert front == pareto_front_naive(cands)
    expected = {(pts[i][0], pts[i][1]) for i in naive_front([tuple(p) for p in pts])}
    assert {(c.fit, c.parsimony) for c in front} == expected
    for member in front:
        assert not any(o.dominates(member) for o in cands)
    assert [c.parsimony for c in front] == sorted(c.parsimony for c in front)


def test_pareto_merge_is_order_independent():
    rng = np.random.default_rng(11)
    cands = [_cand(f, p, f"(var v{i})") for i, (f, p) in enumerate(rng.random((200, 2)))]
    whole = pareto_front(cands)
    halves = pareto_front(pareto_front(cands[:77]) + pareto_front(cands[77:]))
    assert halves == whole
    assert pareto_front(list(reversed(cands))) == whole


def test_frontier_csv_round_trip(tmp_path):
    front = pareto_front([_cand(2.5, 1.0, "(var M)"), ScoredCandidate(FIRST_HARMONIC, 0.25, 13.4, "body:E/ecliptic")])
    path = tmp_path / "front.csv"
    write_frontier(front, path, ["note"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# note"
    assert lines[1] == "rank,expression_prefix,expression_infix,fit_bits,parsimony_bits,frame_tag"
    assert read_frontier(path) == front


# -------------------------------------------------------------------- search


def test_augment_harmonics():
    data = augment_harmonics({"M": np.array([math.pi / 2, 0.0])}, "M", 3)
    assert np.allclose(data["sin_1"], [1, 0]) and np.allclose(data["sin_2"], [0, 0], atol=1e-15)
    assert np.allclose(data["sin_3"], [-1, 0])
    assert augment_harmonics({"M": np.zeros(4)}, "M", 1)["sin_1"].tolist() == [0, 0, 0, 0]
    with pytest.raises(ConfigurationError):
        augment_harmonics({"x": np.zeros(2)}, "M", 2)


def test_simplify_rounds_and_drops_identities():
    expr = Binary("add", Binary("mul", Const(1.0), M_), Const(0.12345678912345))
    assert canonical_form(simplify(expr)) == "(add (const 0.123456789) (var M))"
    assert simplify(Binary("add", M_, Const(0.0))) == M_


def test_constant_valued_detection():
    data = {"M": GRID}
    assert is_constant_valued(Const(3.0), data)
    assert is_constant_valued(Binary("sub", M_, M_), data)
    assert is_constant_valued(Binary("add", Unary("square", Unary("sin", M_)), Unary("square", Unary("cos", M_))), data)
    assert not is_constant_valued(SIN_M, data)


def _small_cfg():
    return SearchConfig(TRIG, 4, ("sin_1", "sin_2", "sin_3"), harmonics=3, harmonic_source="M", name="small")


def test_discover_planted_signal():
    M = np.linspace(0, 6 * math.pi, 3000)
    front = discover({"M": M, "residual": 0.1098 * np.sin(M)}, _small_cfg())
    best = first_harmonic_candidate(front)
    assert best is not None and sin_coefficient(best.expression) == pytest.approx(0.1098, abs=1e-6)
    assert best.fit == 0.0


@pytest.mark.parametrize("e", [0.02, 0.0549, 0.1])
def test_discover_recovers_eccentricity_from_oracle_data(e):
    M = np.linspace(0, 2 * math.pi, 2000, endpoint=False)
    front = discover({"M": M, "residual": centre_exact(M, e)}, _small_cfg())
    c = sin_coefficient(first_harmonic_candidate(front).expression)
    assert abs(invert_c1(c) / e - 1) < 0.005


def test_discover_deterministic_across_workers():
    M = np.linspace(0, 2 * math.pi, 400, endpoint=False)
    data = {"M": M, "residual": centre_exact(M, 0.0549)}
    cfg = _small_cfg()
    one = discover(data, cfg, workers=1, chunk_size=37)
    two = discover(data, cfg, workers=2, chunk_size=11)
    assert one == two


def test_discover_empty_frontier_is_search_error():
    cfg = SearchConfig(TRIG, 1, ("M",))
    with pytest.raises(SearchError):
        discover({"M": np.zeros(5), "residual": np.zeros(5)}, cfg)


def test_presets_match_experiment_table():
    one, two, three = (experiment_preset(n) for n in (1, 2, 3))
    assert one.vocabulary is FULL and one.inputs == ("M",)
    assert two.vocabulary is TRIG and two.inputs == ("M",)
    assert three.vocabulary is TRIG and three.inputs == ("sin_1", "sin_2", "sin_3")
    assert "M" not in three.inputs
    with pytest.raises(ConfigurationError):
        experiment_preset(4)
    with pytest.raises(ConfigurationError):
        SearchConfig(TRIG, 26, ("M",))

import numpy as np
import pytest

from pubmobo.benchmarks import dtlz2, reference_front
from pubmobo.errors import InputError
from pubmobo.pduf import (
    PdufSpec,
    UtilityOracle,
    l1_utility,
    make_centers,
    pduf_eval,
    pduf_eval_batch,
    simulated_user,
)


def test_value_at_center_single():
    spec = PdufSpec(np.array([[1.0, 2.0]]), beta=10.0)
    assert pduf_eval(spec, [1.0, 2.0]) == pytest.approx(0.25)


def test_logistic_arithmetic():
    spec = PdufSpec(np.zeros((1, 2)), beta=10.0)
    low = pduf_eval(spec, [-0.1, -0.1])
    high = pduf_eval(spec, [0.1, 0.1])
    assert low == pytest.approx((1.0 / (1.0 + np.exp(-1.0))) ** 2, abs=1e-5)
    assert low == pytest.approx(0.53445, abs=1e-5)
    assert high == pytest.approx((1.0 / (1.0 + np.e)) ** 2, abs=1e-5)
    assert high == pytest.approx(0.07232, abs=1e-5)
    assert low > high


def test_limits():
    spec = PdufSpec(np.zeros((1, 3)), beta=5.0)
    assert pduf_eval(spec, [-1e6] * 3) == pytest.approx(1.0, abs=1e-12)
    assert pduf_eval(spec, [1e6] * 3) == pytest.approx(0.0, abs=1e-12)
    v = pduf_eval(spec, [0.3, -0.2, 0.1])
    assert 0.0 < v < 1.0


def test_make_centers_single_is_anchor():
    c = make_centers([1.0, 2.0], [0.0, 1.0], 1, 0.5)
    assert np.allclose(c, [[1.0, 2.0]])


def test_make_centers_diagonal_spacing():
    c = make_centers([0.0, 0.0], [1.0, 1.0], 3, 1.0)
    r2 = np.sqrt(2.0) / 2.0
    assert np.allclose(c, [[0, 0], [r2, r2], [2 * r2, 2 * r2]])


def test_make_centers_collinear():
    anchor = np.array([0.3, -0.4, 1.0])
    direction = np.array([2.0, 1.0, -1.0])
    c = make_centers(anchor, direction, 7, 0.25)
    u = direction / np.linalg.norm(direction)
    t = (c - anchor) @ u
    recon = anchor + t[:, None] * u
    assert np.max(np.abs(c - recon)) < 1e-12


def test_make_centers_zero_direction_rejected():
    with pytest.raises(InputError):
        make_centers([0.0], [0.0], 2, 0.1)


def test_l1_examples():
    assert l1_utility([0.0, 0.0], [0.0, 0.0]) == 0.0
    assert l1_utility([0.0, 0.0], [1.0, -1.0]) == -2.0
    assert l1_utility([0.0, 0.0], [-1.0, 1.0]) == -2.0
    assert l1_utility([0.0, 0.0], [0.5, 0.5]) == -1.0


def test_l1_sphere_indistinguishability_preserved():
    # distinct points on the same l1 sphere score identically
    oracle = UtilityOracle("neg_l1", ref=np.zeros(2))
    assert oracle.utility([1.0, -1.0]) == oracle.utility([-1.0, 1.0])


def dominated_pairs(rng, n, nf=2):
    """y1 dominates y2: componentwise no worse, at least one strictly better."""
    y2 = rng.uniform(0, 1, size=(n, nf))
    shift = rng.uniform(0.0, 0.3, size=(n, nf))
    strict = rng.integers(0, nf, size=n)
    for i in range(n):
        shift[i, strict[i]] = max(shift[i, strict[i]], 1e-3)
    return y2 - shift, y2


def test_simulated_user_dominance_and_antisymmetry():
    spec = PdufSpec(make_centers([0.4, 0.4], [1.0, 1.0], 5, 0.1), beta=10.0)
    oracle = UtilityOracle("pduf", pduf=spec)
    assert simulated_user(oracle, [0.1, 0.1], [0.2, 0.2]) == 0
    assert simulated_user(oracle, [0.2, 0.2], [0.1, 0.1]) == 1


def test_dominated_pairs_sweep_1000():
    rng = np.random.default_rng(0)
    specs = [
        PdufSpec(make_centers(rng.uniform(0, 1, 2), rng.uniform(0.1, 1, 2), 10, 0.1), beta=10.0)
        for _ in range(5)
    ]
    y1, y2 = dominated_pairs(rng, 1000)
    for spec in specs:
        oracle = UtilityOracle("pduf", pduf=spec)
        answers = [simulated_user(oracle, a, b) for a, b in zip(y1, y2)]
        assert all(r == 0 for r in answers)


def test_dominance_preservation_strict_10000():
    rng = np.random.default_rng(7)
    for _ in range(4):
        spec = PdufSpec(
            make_centers(rng.uniform(0, 1, 2), rng.uniform(0.1, 1.0, 2), 10, 0.1), beta=10.0
        )
        y1, y2 = dominated_pairs(rng, 2500)
        u1 = pduf_eval_batch(spec, y1)
        u2 = pduf_eval_batch(spec, y2)
        assert np.all(u1 > u2)


def _steepness_for_front_point(theta, step):
    """Steepness making the along-front argmax drift well below the grid step.

    The drift of the anchor-corner term along the front scales like
    |log(tan(theta))| / (beta * max(cos, sin)); solving for an eighth of the
    grid step gives a per-anchor beta, capped away from overflow.
    """
    t = np.tan(theta)
    if t <= 0 or not np.isfinite(t):
        return 1e6
    beta = 8.0 * abs(np.log(t)) / (step * max(np.cos(theta), np.sin(theta)))
    return float(np.clip(beta, 1000.0, 1e6))


def test_preference_integration_on_quarter_circle_front():
    # each front point is the exact argmax of some centers-on-outward-normal
    # configuration (steepness chosen per anchor)
    res = 2001
    front = reference_front(dtlz2(), res).points
    theta = np.linspace(0, np.pi / 2, res)
    step = (np.pi / 2) / (res - 1)
    rng = np.random.default_rng(3)
    picks = list(rng.choice(np.arange(2, res - 2), size=10, replace=False))
    for idx in picks:
        anchor = front[idx]
        normal = anchor / np.linalg.norm(anchor)  # outward (dominated) direction
        beta = _steepness_for_front_point(theta[idx], step)
        spec = PdufSpec(make_centers(anchor, normal, 10, 0.1), beta=beta)
        u = pduf_eval_batch(spec, front)
        assert int(np.argmax(u)) == int(idx)


def test_preference_integration_endpoints():
    res = 2001
    front = reference_front(dtlz2(), res).points
    for idx in (0, res - 1):
        anchor = front[idx]
        normal = anchor / np.linalg.norm(anchor)
        spec = PdufSpec(make_centers(anchor, normal, 10, 0.1), beta=1e6)
        u = pduf_eval_batch(spec, front)
        assert int(np.argmax(u)) == int(idx)


def test_oracle_normalization_box():
    spec = PdufSpec(np.array([[0.5, 0.5]]), beta=10.0)
    oracle = UtilityOracle(
        "pduf", pduf=spec, norm_lo=np.array([0.0, 0.0]), norm_hi=np.array([10.0, 10.0])
    )
    assert oracle.utility([5.0, 5.0]) == pytest.approx(0.25)


def test_batch_matches_scalar():
    rng = np.random.default_rng(1)
    spec = PdufSpec(rng.uniform(0, 1, size=(4, 3)), beta=7.0)
    Y = rng.uniform(-1, 2, size=(20, 3))
    batch = pduf_eval_batch(spec, Y)
    for i in range(20):
        assert batch[i] == pytest.approx(pduf_eval(spec, Y[i]), rel=1e-12)

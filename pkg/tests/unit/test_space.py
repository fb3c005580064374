"""Unit tests for the unconstrained parameter layout."""

import math

import jax
import jax.numpy as jnp
import numpy as np
import pytest

from pgxselect.model.space import (
    Block,
    ModelSpace,
    Transform,
    log_stick_breaking_weights,
)


@pytest.fixture
def space() -> ModelSpace:
    return ModelSpace(
        [
            Block("a", 2),
            Block("s", 1, Transform.EXP, center=math.log(0.1)),
            Block("p", 1, Transform.LOGISTIC),
            Block("w", 3, Transform.STICK_BREAKING),
        ]
    )


class TestModelSpace:
    """Tests for ModelSpace."""

    def test_layout_and_dimension(self, space: ModelSpace) -> None:
        assert space.total_dim == 7
        assert space.layout == [
            ("a", 2, "identity"),
            ("s", 1, "exp"),
            ("p", 1, "logistic"),
            ("w", 3, "stick_breaking"),
        ]
        assert "w" in space
        assert "missing" not in space

    def test_duplicate_block_names_rejected(self) -> None:
        with pytest.raises(ValueError):
            ModelSpace([Block("a", 1), Block("a", 2)])

    def test_unknown_block_raises_key_error(self, space: ModelSpace) -> None:
        with pytest.raises(KeyError):
            space.block("missing")

    def test_pack_inverts_unpack(
        self, space: ModelSpace, rng: np.random.Generator
    ) -> None:
        position = rng.normal(size=space.total_dim)
        np.testing.assert_array_equal(space.pack(space.unpack(position)), position)

    def test_constrain_applies_transforms(self, space: ModelSpace) -> None:
        """exp, sigmoid and stick-breaking land in their supports."""
        raw = space.unpack(jnp.array([0.5, -0.5, 0.0, 0.0, 0.3, -1.0, 2.0]))
        values = space.constrain(raw)
        np.testing.assert_allclose(values["a"], [0.5, -0.5])
        assert float(values["s"][0]) == pytest.approx(1.0)
        assert float(values["p"][0]) == pytest.approx(0.5)
        weights = np.asarray(values["w"])
        assert weights.shape == (4,)
        assert weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(weights > 0)

    def test_log_jacobian_of_scalar_transforms(self) -> None:
        """Compare with log |f'(x)| from automatic differentiation."""
        pairs = ((Transform.EXP, jnp.exp), (Transform.LOGISTIC, jax.nn.sigmoid))
        for transform, f in pairs:
            single = ModelSpace([Block("x", 1, transform)])
            x = 0.7
            expected = math.log(abs(float(jax.grad(f)(x))))
            value = float(single.log_jacobian(single.unpack(jnp.array([x]))))
            assert value == pytest.approx(expected, rel=1e-12)

    def test_identity_blocks_have_no_jacobian(self) -> None:
        single = ModelSpace([Block("x", 4)])
        assert float(single.log_jacobian(single.unpack(jnp.ones(4)))) == 0.0

    def test_initial_position_within_jitter_box(
        self, space: ModelSpace, rng: np.random.Generator
    ) -> None:
        for _ in range(50):
            raw = space.unpack(space.initial_position(rng))
            assert np.all(np.abs(raw["a"]) <= 0.5)
            assert abs(raw["s"][0] - math.log(0.1)) <= 0.5 + 1e-12

    def test_constrained_names(self, space: ModelSpace) -> None:
        """Scalar blocks keep their bare name; stick blocks gain one entry."""
        assert space.constrained_names() == [
            "a[0]",
            "a[1]",
            "s",
            "p",
            "w[0]",
            "w[1]",
            "w[2]",
            "w[3]",
        ]


class TestStickBreaking:
    """Tests for log_stick_breaking_weights."""

    def test_zero_logits_halve_the_stick(self) -> None:
        weights = np.exp(np.asarray(log_stick_breaking_weights(jnp.zeros(2))))
        np.testing.assert_allclose(weights, [0.5, 0.25, 0.25], rtol=1e-12)

    def test_large_logits_stay_finite(self) -> None:
        logs = np.asarray(log_stick_breaking_weights(jnp.array([40.0, -40.0, 40.0])))
        assert np.all(np.isfinite(logs))
        assert np.exp(logs).sum() == pytest.approx(1.0, abs=1e-12)

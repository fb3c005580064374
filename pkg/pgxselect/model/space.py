"""Unconstrained parameter layout with transforms and log-Jacobians."""

from dataclasses import dataclass
from enum import Enum
from typing import Any

import jax
import jax.numpy as jnp
import numpy as np
from jax import Array
from numpy.typing import NDArray


class Transform(str, Enum):
    """Map from an unconstrained block to its constrained value."""

    IDENTITY = "identity"
    EXP = "exp"
    LOGISTIC = "logistic"
    STICK_BREAKING = "stick_breaking"


@dataclass(frozen=True)
class Block:
    """A named slice of the unconstrained vector.

    ``center`` and ``jitter`` describe the unconstrained region used for
    chain initialization.
    """

    name: str
    length: int
    transform: Transform = Transform.IDENTITY
    center: float | tuple[float, ...] = 0.0
    jitter: float = 0.5

    @property
    def constrained_length(self) -> int:
        if self.transform is Transform.STICK_BREAKING:
            return self.length + 1
        return self.length


def log_stick_breaking_weights(logits: Array) -> Array:
    """Log simplex weights from p-1 stick logits.

    Weight k is v_k * prod_{l<k} (1 - v_l) with v = sigmoid(logits); the
    last weight takes the remaining stick.
    """
    log_v = jax.nn.log_sigmoid(logits)
    log_rest = jax.nn.log_sigmoid(-logits)
    consumed = jnp.concatenate([jnp.zeros(1), jnp.cumsum(log_rest)])
    return jnp.concatenate([log_v, jnp.zeros(1)]) + consumed


class ModelSpace:
    """Ordered layout of blocks in the unconstrained position vector."""

    def __init__(self, blocks: list[Block]):
        names = [block.name for block in blocks]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate block names in {names}")
        self.blocks = list(blocks)
        self._slices: dict[str, slice] = {}
        offset = 0
        for block in self.blocks:
            self._slices[block.name] = slice(offset, offset + block.length)
            offset += block.length
        self.total_dim = offset

    @property
    def layout(self) -> list[tuple[str, int, str]]:
        return [(b.name, b.length, b.transform.value) for b in self.blocks]

    def block(self, name: str) -> Block:
        for block in self.blocks:
            if block.name == name:
                return block
        raise KeyError(name)

    def __contains__(self, name: object) -> bool:
        return name in self._slices

    def unpack(self, position: Any) -> dict[str, Any]:
        """Split a position vector into raw (unconstrained) blocks."""
        return {name: position[part] for name, part in self._slices.items()}

    def pack(self, raw: dict[str, Any]) -> NDArray[np.float64]:
        """Inverse of ``unpack`` for numpy inputs."""
        position = np.zeros(self.total_dim)
        for name, part in self._slices.items():
            position[part] = np.asarray(raw[name], dtype=float).reshape(-1)
        return position

    def constrain(self, raw: dict[str, Any]) -> dict[str, Array]:
        """Apply each block's transform."""
        values: dict[str, Array] = {}
        for block in self.blocks:
            x = raw[block.name]
            if block.transform is Transform.IDENTITY:
                values[block.name] = x
            elif block.transform is Transform.EXP:
                values[block.name] = jnp.exp(x)
            elif block.transform is Transform.LOGISTIC:
                values[block.name] = jax.nn.sigmoid(x)
            else:
                values[block.name] = jnp.exp(log_stick_breaking_weights(x))
        return values

    def log_jacobian(self, raw: dict[str, Any]) -> Array:
        """Sum of log |d constrained / d unconstrained| over all blocks.

        Stick-breaking blocks carry the Jacobian of the logistic map onto
        the stick fractions, whose prior is stated on those fractions.
        """
        total = jnp.zeros(())
        for block in self.blocks:
            x = raw[block.name]
            if block.transform is Transform.EXP:
                total = total + jnp.sum(x)
            elif block.transform in (Transform.LOGISTIC, Transform.STICK_BREAKING):
                total = total + jnp.sum(jax.nn.log_sigmoid(x) + jax.nn.log_sigmoid(-x))
        return total

    def initial_position(self, rng: np.random.Generator) -> NDArray[np.float64]:
        """Draw a starting point uniformly around each block's center."""
        position = np.empty(self.total_dim)
        for block in self.blocks:
            center = np.broadcast_to(
                np.asarray(block.center, dtype=float), (block.length,)
            )
            position[self._slices[block.name]] = center + rng.uniform(
                -block.jitter, block.jitter, size=block.length
            )
        return position

    def constrained_names(self) -> list[str]:
        """Flat parameter names of the constrained blocks, e.g. ``omega[1]``."""
        names: list[str] = []
        for block in self.blocks:
            if block.constrained_length == 1 and block.length == 1:
                names.append(block.name)
            else:
                names.extend(
                    f"{block.name}[{i}]" for i in range(block.constrained_length)
                )
        return names

"""Multinomial No-U-Turn sampler with a diagonal Euclidean metric.

Trajectories are grown by repeated doubling in a random direction. Within
each subtree the proposal is drawn uniformly by weight; when a new subtree
is merged at the top level the proposal moves to it with probability
min(1, w_new / w_old). Doubling stops on the generalized U-turn criterion,
checked across the merged tree and across the seam between its halves.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

Vector = NDArray[np.float64]
GradFn = Callable[[Vector], Vector]
ValueAndGradFn = Callable[[Vector], tuple[float, Vector]]


@dataclass(frozen=True)
class NutsState:
    """Position with its cached log-density and gradient."""

    position: Vector
    log_density: float
    grad: Vector


@dataclass(frozen=True)
class NutsInfo:
    """Sampler statistics of one transition."""

    accept_stat: float
    tree_depth: int
    n_leapfrog: int
    divergent: bool
    energy: float
    step_size: float


@dataclass
class _Point:
    q: Vector
    p: Vector
    log_density: float
    grad: Vector


@dataclass
class _Subtree:
    edge: _Point
    proposal: _Point
    log_weight: float
    rho: Vector
    p_beg: Vector
    p_end: Vector
    p_sharp_beg: Vector
    p_sharp_end: Vector


def leapfrog_step(
    position: Vector,
    momentum: Vector,
    grad: Vector,
    step_size: float,
    inv_mass_diag: Vector,
    value_and_grad: ValueAndGradFn,
) -> tuple[Vector, Vector, float, Vector]:
    """Leapfrog step that reuses the gradient at the starting position.

    Returns:
        Position, momentum, log-density and gradient after the step
    """
    momentum = momentum + 0.5 * step_size * grad
    position = position + step_size * inv_mass_diag * momentum
    log_density, grad = value_and_grad(position)
    momentum = momentum + 0.5 * step_size * grad
    return position, momentum, log_density, grad


def leapfrog(
    position: Vector,
    momentum: Vector,
    step_size: float,
    inv_mass_diag: Vector,
    grad_fn: GradFn,
) -> tuple[Vector, Vector]:
    """One half-kick, drift, half-kick step of the leapfrog integrator.

    Args:
        position: Current position
        momentum: Current momentum
        step_size: Signed step size
        inv_mass_diag: Diagonal of the inverse mass matrix
        grad_fn: Gradient of the log-density

    Returns:
        Position and momentum after one step; non-finite gradients propagate
        as non-finite values
    """
    position, momentum, _, _ = leapfrog_step(
        position,
        momentum,
        grad_fn(position),
        step_size,
        inv_mass_diag,
        lambda x: (0.0, grad_fn(x)),
    )
    return position, momentum


def _log_add_exp(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    high = max(a, b)
    return high + math.log1p(math.exp(-abs(a - b)))


def _u_turn_free(p_sharp_minus: Vector, p_sharp_plus: Vector, rho: Vector) -> bool:
    return bool(p_sharp_plus @ rho > 0 and p_sharp_minus @ rho > 0)


class _Trajectory:
    """Mutable bookkeeping of one NUTS transition."""

    def __init__(
        self,
        value_and_grad: ValueAndGradFn,
        step_size: float,
        inv_mass_diag: Vector,
        initial_energy: float,
        max_energy_error: float,
        rng: np.random.Generator,
    ):
        self.value_and_grad = value_and_grad
        self.step_size = step_size
        self.inv_mass_diag = inv_mass_diag
        self.initial_energy = initial_energy
        self.max_energy_error = max_energy_error
        self.rng = rng
        self.n_leapfrog = 0
        self.sum_accept = 0.0
        self.divergent = False

    def hamiltonian(self, point: _Point) -> float:
        kinetic = 0.5 * float(point.p @ (self.inv_mass_diag * point.p))
        energy = -point.log_density + kinetic
        return math.inf if math.isnan(energy) else energy

    def step(self, point: _Point, direction: int) -> _Point:
        q, p, log_density, grad = leapfrog_step(
            point.q,
            point.p,
            point.grad,
            direction * self.step_size,
            self.inv_mass_diag,
            self.value_and_grad,
        )
        if not np.all(np.isfinite(grad)):
            log_density = -math.inf
            grad = np.zeros_like(q)
        return _Point(q, p, log_density, grad)

    def build(self, edge: _Point, depth: int, direction: int) -> _Subtree | None:
        """Grow 2**depth leapfrog steps from ``edge``; None if invalid."""
        if depth == 0:
            point = self.step(edge, direction)
            self.n_leapfrog += 1
            delta = self.initial_energy - self.hamiltonian(point)
            if -delta > self.max_energy_error:
                self.divergent = True
            self.sum_accept += 1.0 if delta > 0 else math.exp(delta)
            if self.divergent:
                return None
            p_sharp = self.inv_mass_diag * point.p
            return _Subtree(
                edge=point,
                proposal=point,
                log_weight=delta,
                rho=point.p.copy(),
                p_beg=point.p,
                p_end=point.p,
                p_sharp_beg=p_sharp,
                p_sharp_end=p_sharp,
            )

        inner = self.build(edge, depth - 1, direction)
        if inner is None:
            return None
        outer = self.build(inner.edge, depth - 1, direction)
        if outer is None:
            return None

        log_weight = _log_add_exp(inner.log_weight, outer.log_weight)
        proposal = inner.proposal
        if outer.log_weight > log_weight or self.rng.uniform() < math.exp(
            outer.log_weight - log_weight
        ):
            proposal = outer.proposal

        rho = inner.rho + outer.rho
        valid = (
            _u_turn_free(inner.p_sharp_beg, outer.p_sharp_end, rho)
            and _u_turn_free(
                inner.p_sharp_beg, outer.p_sharp_beg, inner.rho + outer.p_beg
            )
            and _u_turn_free(
                inner.p_sharp_end, outer.p_sharp_end, outer.rho + inner.p_end
            )
        )
        if not valid:
            return None
        return _Subtree(
            edge=outer.edge,
            proposal=proposal,
            log_weight=log_weight,
            rho=rho,
            p_beg=inner.p_beg,
            p_end=outer.p_end,
            p_sharp_beg=inner.p_sharp_beg,
            p_sharp_end=outer.p_sharp_end,
        )


def nuts_draw(
    state: NutsState,
    value_and_grad: ValueAndGradFn,
    step_size: float,
    inv_mass_diag: Vector,
    max_depth: int,
    rng: np.random.Generator,
    max_energy_error: float = 1000.0,
) -> tuple[NutsState, NutsInfo]:
    """One multinomial NUTS transition.

    Args:
        state: Current state
        value_and_grad: Log-density and gradient of the target
        step_size: Leapfrog step size
        inv_mass_diag: Diagonal inverse mass matrix
        max_depth: Maximum number of trajectory doublings
        rng: Generator of this chain
        max_energy_error: Energy error that marks a divergence

    Returns:
        The next state and the transition statistics
    """
    momentum = rng.standard_normal(state.position.shape[0]) / np.sqrt(inv_mass_diag)
    start = _Point(state.position, momentum, state.log_density, state.grad)
    trajectory = _Trajectory(
        value_and_grad, step_size, inv_mass_diag, 0.0, max_energy_error, rng
    )
    trajectory.initial_energy = trajectory.hamiltonian(start)

    forward_edge = backward_edge = start
    p_sharp_start = inv_mass_diag * momentum
    # (backward end, forward end) of the whole tree and their sharp momenta
    p_bck_bck, p_fwd_fwd = momentum, momentum
    p_sharp_bck_bck, p_sharp_fwd_fwd = p_sharp_start, p_sharp_start
    # momenta at the inner ends of the two halves joined at the last merge
    p_bck_fwd, p_fwd_bck = momentum, momentum
    p_sharp_bck_fwd, p_sharp_fwd_bck = p_sharp_start, p_sharp_start
    rho = momentum.copy()
    log_weight = 0.0
    sample = start
    depth = 0

    while depth < max_depth:
        if rng.uniform() > 0.5:
            rho_old = rho
            p_bck_fwd, p_sharp_bck_fwd = p_fwd_fwd, p_sharp_fwd_fwd
            subtree = trajectory.build(forward_edge, depth, 1)
            if subtree is None:
                break
            forward_edge = subtree.edge
            p_fwd_bck, p_sharp_fwd_bck = subtree.p_beg, subtree.p_sharp_beg
            p_fwd_fwd, p_sharp_fwd_fwd = subtree.p_end, subtree.p_sharp_end
            rho_bck, rho_fwd = rho_old, subtree.rho
        else:
            rho_old = rho
            p_fwd_bck, p_sharp_fwd_bck = p_bck_bck, p_sharp_bck_bck
            subtree = trajectory.build(backward_edge, depth, -1)
            if subtree is None:
                break
            backward_edge = subtree.edge
            p_bck_fwd, p_sharp_bck_fwd = subtree.p_beg, subtree.p_sharp_beg
            p_bck_bck, p_sharp_bck_bck = subtree.p_end, subtree.p_sharp_end
            rho_bck, rho_fwd = subtree.rho, rho_old

        depth += 1
        if subtree.log_weight > log_weight or rng.uniform() < math.exp(
            subtree.log_weight - log_weight
        ):
            sample = subtree.proposal
        log_weight = _log_add_exp(log_weight, subtree.log_weight)

        rho = rho_bck + rho_fwd
        if not (
            _u_turn_free(p_sharp_bck_bck, p_sharp_fwd_fwd, rho)
            and _u_turn_free(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck)
            and _u_turn_free(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd)
        ):
            break

    n_leapfrog = max(trajectory.n_leapfrog, 1)
    info = NutsInfo(
        accept_stat=trajectory.sum_accept / n_leapfrog,
        tree_depth=depth,
        n_leapfrog=trajectory.n_leapfrog,
        divergent=trajectory.divergent,
        energy=trajectory.hamiltonian(sample),
        step_size=step_size,
    )
    return NutsState(sample.q, sample.log_density, sample.grad), info


def find_reasonable_step_size(
    state: NutsState,
    value_and_grad: ValueAndGradFn,
    step_size: float,
    inv_mass_diag: Vector,
    rng: np.random.Generator,
) -> float:
    """Double or halve the step size until one leapfrog step crosses acceptance 0.8."""
    threshold = math.log(0.8)

    def energy_change(eps: float) -> float:
        momentum = rng.standard_normal(state.position.shape[0]) / np.sqrt(inv_mass_diag)
        trajectory = _Trajectory(value_and_grad, eps, inv_mass_diag, 0.0, math.inf, rng)
        point = _Point(state.position, momentum, state.log_density, state.grad)
        before = trajectory.hamiltonian(point)
        return before - trajectory.hamiltonian(trajectory.step(point, 1))

    direction = 1 if energy_change(step_size) > threshold else -1
    for _ in range(100):
        delta = energy_change(step_size)
        if direction == 1 and not delta > threshold:
            break
        if direction == -1 and not delta < threshold:
            break
        step_size = step_size * 2.0 if direction == 1 else step_size * 0.5
        if step_size > 1e7 or step_size < 1e-12:
            break
    return step_size

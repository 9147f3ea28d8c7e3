"""Recombining multiple-jump binomial trees for the variance and rate factors.

Both trees share the same construction: a recombining lattice of node values,
and for every node the "up"/"down" successor indices are the closest lattice
points bracketing the drifted value ``y + mu(y) h``, searched over the next
slice (so successors need not be adjacent).  The up probability matches the
local first moment exactly whenever the [0,1] clamp is inactive.

Variance (CIR) lattice:  y[n][k] = (sqrt(Y0) + sigma_y/2 (2k-n) sqrt(h))^2,
truncated at zero.  Rate-factor (OU) lattice: r[n][j] = (2j-n) sqrt(h).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .model import MarketModel

__all__ = [
    "FactorTree",
    "JointTransition",
    "build_cir_tree",
    "build_ou_tree",
    "joint_transition",
    "sample_joint_path",
    "sample_factor_paths",
    "local_moments",
    "forward_expectation",
]


@dataclass
class FactorTree:
    """Ragged triangular lattice with jump targets and up probabilities.

    ``values[n][k]`` for 0 <= k <= n <= n_steps; ``ku[n][k]``/``kd[n][k]``
    are the successor indices in slice n+1 and ``pu[n][k]`` the probability
    of the up target.  ``clamped[n][k]`` flags nodes where the raw
    probability fell outside [0,1] (there the first-moment identity is not
    guaranteed).
    """

    kind: str
    n_steps: int
    dt: float
    values: List[np.ndarray]
    ku: List[np.ndarray] = field(repr=False, default_factory=list)
    kd: List[np.ndarray] = field(repr=False, default_factory=list)
    pu: List[np.ndarray] = field(repr=False, default_factory=list)
    clamped: List[np.ndarray] = field(repr=False, default_factory=list)

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt


def _attach_jumps(tree: FactorTree, drift) -> None:
    """Fill ku/kd/pu per slice for a lattice with nondecreasing slice values."""
    for n in range(tree.n_steps):
        v = tree.values[n]
        vnext = tree.values[n + 1]
        k = np.arange(n + 1)
        target = v + drift(v) * tree.dt
        # smallest k* >= k+1 with vnext[k*] >= target; n+1 when the set is empty
        ku = np.searchsorted(vnext, target, side="left")
        ku = np.clip(np.maximum(ku, k + 1), 1, n + 1)
        # largest k* <= k with vnext[k*] <= target; 0 when the set is empty
        kd = np.searchsorted(vnext, target, side="right") - 1
        kd = np.clip(np.minimum(kd, k), 0, n)
        den = vnext[ku] - vnext[kd]
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = (target - vnext[kd]) / den
        raw = np.where(den > 0.0, raw, 0.5)
        pu = np.clip(raw, 0.0, 1.0)
        tree.ku.append(ku)
        tree.kd.append(kd)
        tree.pu.append(pu)
        tree.clamped.append((raw != pu) | (den <= 0.0))


def build_cir_tree(model: MarketModel, n_steps: int, horizon: float) -> FactorTree:
    """Binomial lattice for the CIR variance factor over [0, horizon]."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    h = horizon / n_steps
    sq = np.sqrt(model.y0)
    half_sig = 0.5 * model.sigma_y
    values = []
    for n in range(n_steps + 1):
        g = sq + half_sig * (2.0 * np.arange(n + 1) - n) * np.sqrt(h)
        values.append(np.where(g > 0.0, g * g, 0.0))
    tree = FactorTree("cir", n_steps, h, values)
    _attach_jumps(tree, lambda y: model.kappa_y * (model.theta_y - y))
    return tree


def build_ou_tree(model: MarketModel, n_steps: int, horizon: float) -> FactorTree:
    """Binomial lattice for the unit-volatility OU rate factor R (R0=0)."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    h = horizon / n_steps
    values = [(2.0 * np.arange(n + 1) - n) * np.sqrt(h) for n in range(n_steps + 1)]
    tree = FactorTree("ou", n_steps, h, values)
    _attach_jumps(tree, lambda r: -model.kappa_r * r)
    return tree


@dataclass(frozen=True)
class JointTransition:
    """Four successors of a joint (variance, rate) node with product probabilities."""

    nodes: tuple  # ((ku,ju), (ku,jd), (kd,ju), (kd,jd))
    probs: tuple  # (p_uu, p_ud, p_du, p_dd)


def joint_transition(cir_tree: FactorTree, ou_tree: FactorTree, n: int, k: int, j: int) -> JointTransition:
    """Joint one-step transition from node (n, k, j); probabilities factorize."""
    if not (0 <= n < cir_tree.n_steps and 0 <= k <= n and 0 <= j <= n):
        raise IndexError(f"invalid tree node (n={n}, k={k}, j={j})")
    ku, kd, py = cir_tree.ku[n][k], cir_tree.kd[n][k], cir_tree.pu[n][k]
    ju, jd, pr = ou_tree.ku[n][j], ou_tree.kd[n][j], ou_tree.pu[n][j]
    nodes = ((ku, ju), (ku, jd), (kd, ju), (kd, jd))
    probs = (py * pr, py * (1 - pr), (1 - py) * pr, (1 - py) * (1 - pr))
    return JointTransition(nodes, probs)


def sample_factor_paths(tree: FactorTree, n_paths: int, rng: np.random.Generator) -> np.ndarray:
    """Index paths (n_paths, n_steps+1) drawn from the tree's transition law."""
    idx = np.zeros((n_paths, tree.n_steps + 1), dtype=np.int64)
    cur = np.zeros(n_paths, dtype=np.int64)
    for n in range(tree.n_steps):
        u = rng.random(n_paths)
        up = u < tree.pu[n][cur]
        cur = np.where(up, tree.ku[n][cur], tree.kd[n][cur])
        idx[:, n + 1] = cur
    return idx


def sample_joint_path(cir_tree: FactorTree, ou_tree: Optional[FactorTree],
                      rng: np.random.Generator) -> np.ndarray:
    """One joint index path ((k_n, j_n)) of shape (n_steps+1, 2).

    With ``ou_tree=None`` the rate column is identically zero.  Deterministic
    given the generator state.
    """
    kpath = sample_factor_paths(cir_tree, 1, rng)[0]
    if ou_tree is None:
        jpath = np.zeros_like(kpath)
    else:
        jpath = sample_factor_paths(ou_tree, 1, rng)[0]
    return np.column_stack([kpath, jpath])


def local_moments(tree: FactorTree, n: int, k: int, order: int = 1) -> float:
    """Exact conditional moment E[(V_{n+1}-V_n)^order | node (n,k)].

    Check ``tree.clamped[n][k]`` before relying on the moment identities:
    where the probability clamp fired the first moment no longer equals
    mu(v) h.
    """
    if order < 1 or order > 3:
        raise ValueError("order must be 1, 2 or 3")
    v = tree.values[n][k]
    du = tree.values[n + 1][tree.ku[n][k]] - v
    dd = tree.values[n + 1][tree.kd[n][k]] - v
    p = tree.pu[n][k]
    return float(p * du**order + (1.0 - p) * dd**order)


def forward_expectation(tree: FactorTree, f, step: Optional[int] = None) -> float:
    """Exact E[f(V_step)] by forward induction of the node probabilities."""
    if step is None:
        step = tree.n_steps
    w = np.array([1.0])
    for n in range(step):
        wn = np.zeros(n + 2)
        flow = w * tree.pu[n]
        np.add.at(wn, tree.ku[n], flow)
        np.add.at(wn, tree.kd[n], w - flow)
        w = wn
    return float(np.sum(w * f(tree.values[step])))

"""Estimator-style wrapper around scheme solving, plan compilation and simulation.

``fit`` solves the parameters of one instance, ``transform`` compiles a plan per
demand set and ``score`` reports the fraction of demand sets decoded exactly.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .compiler import build_plan
from .params import ProblemInstance, bu_baseline, lower_bound, solve_scheme, upper_bound
from .protocol import FieldSpec, simulate
from .validation import check_demand_set

SCHEMES = ("optimal", "baseline")


class ABPIRScheme(BaseEstimator):
    """Private multi-message retrieval scheme for one (N, K, D) instance.

    Parameters
    ----------
    n_servers, n_messages, n_demands : int
        The instance (N, K, D).
    scheme : {"optimal", "baseline"}
        Optimal parameter choice or the fixed-tail baseline.
    seed : int
        Seed for the per-message subpacket permutations.
    field_size : int
        Field used by ``score`` and ``simulate`` when none is given.
    """

    def __init__(self, n_servers=2, n_messages=5, n_demands=2, scheme="optimal",
                 seed=0, field_size=2):
        self.n_servers = n_servers
        self.n_messages = n_messages
        self.n_demands = n_demands
        self.scheme = scheme
        self.seed = seed
        self.field_size = field_size

    def fit(self, X=None, y=None):
        """Solve the parameters. ``X`` and ``y`` are ignored."""
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        FieldSpec(self.field_size)
        inst = ProblemInstance(self.n_servers, self.n_messages, self.n_demands)
        self.instance_ = inst
        self.params_ = solve_scheme(inst) if self.scheme == "optimal" else bu_baseline(inst)
        self.rate_ = self.params_.rate
        self.lower_bound_ = lower_bound(inst)
        self.upper_bound_ = upper_bound(inst)
        return self

    def _demand_sets(self, X):
        if isinstance(X, str):
            X = [X]
        inst = self.instance_
        return [check_demand_set(W, inst.K, inst.D) for W in X]

    def transform(self, X):
        """Compile one query plan per demand set (1-based indices)."""
        check_is_fitted(self, "params_")
        return [build_plan(self.params_, W, self.seed) for W in self._demand_sets(X)]

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform(X)

    def simulate(self, W, field_size=None, seed=None):
        """Full round trip for one demand set; returns a ``SimulationResult``."""
        check_is_fitted(self, "params_")
        (W,) = self._demand_sets([W])
        field = FieldSpec(self.field_size if field_size is None else field_size)
        plan = build_plan(self.params_, W, self.seed)
        return simulate(plan, field, self.seed if seed is None else seed)

    def score(self, X, y=None):
        """Fraction of demand sets in ``X`` whose messages are recovered exactly."""
        check_is_fitted(self, "params_")
        sets = self._demand_sets(X)
        if not sets:
            raise ValueError("score needs at least one demand set")
        return sum(self.simulate(W).ok for W in sets) / len(sets)

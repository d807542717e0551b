"""Flat ``key = value`` experiment configuration.

Example file::

    # two-state chain, flip probability 1/4
    kind = markov_fn
    flip_prob = 0.25
    tau = 0.5
    n_schedule = 1,2,4,8,16,32,64,128,256
    mc_count = 20000
    seed = 7
    tol.quadrature = 1e-6
    out_dir = out/markov

Blank lines and ``#`` comments are ignored.  ``transition`` is written as
rows separated by ``;`` (``0.9,0.1;0.2,0.8``).  Unknown keys are an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import DomainError
from .processes import MIN_WINDOW_COUNT, ProcessSpec

DEFAULT_SCHEDULE = tuple(2 ** k for k in range(9))

DEFAULT_TOLERANCES = {
    "quadrature": 1e-6,
    "identity": 1e-6,
    "pointwise": 1e-10,
    "debruijn": 1e-3,
    "jst_threshold": 0.05,
    "gaussian": 0.01,
}

PROCESS_KEYS = ("kind", "innovation", "theta", "flip_prob", "transition",
                "states", "seed")
SUITE_KEYS = ("suite.betas", "suite.block_size", "suite.gaps", "suite.eps_grid",
              "suite.windows", "suite.fit_eps", "suite.cells")


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


@dataclass(frozen=True)
class SuiteOptions:
    betas: tuple = (0.1, 0.25, 0.5, 0.75, 0.9)
    block_size: int = 8
    gaps: tuple = (0, 1, 2, 4, 8, 16)
    eps_grid: tuple = (0.5, 0.1, 0.02)
    windows: tuple = (1.5, 2.0, 4.0)
    fit_eps: float = 0.05
    cells: int = 16


@dataclass(frozen=True)
class ExperimentConfig:
    process: ProcessSpec = field(default_factory=lambda: ProcessSpec("markov_fn"))
    tau: float = 0.5
    n_schedule: tuple = DEFAULT_SCHEDULE
    mc_count: int = 20000
    tolerances: dict = field(default_factory=dict)
    out_dir: str | None = None
    suite: SuiteOptions = field(default_factory=SuiteOptions)

    def __post_init__(self):
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise DomainError("tau must be a positive real")
        sched = tuple(int(n) for n in self.n_schedule)
        if any(n < 1 for n in sched) or any(b <= a for a, b in zip(sched, sched[1:])):
            raise DomainError("n_schedule must be strictly increasing positive integers")
        object.__setattr__(self, "n_schedule", sched)
        if self.mc_count < MIN_WINDOW_COUNT:
            raise DomainError(f"mc_count must be >= {MIN_WINDOW_COUNT}")
        tol = dict(DEFAULT_TOLERANCES)
        tol["mc"] = 3.0 / math.sqrt(self.mc_count)
        tol.update(self.tolerances)
        for k, v in tol.items():
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"tolerance {k!r} must be positive")
        object.__setattr__(self, "tolerances", tol)

    @property
    def noise_budget(self):
        """Combined Monte Carlo and quadrature budget for convergence checks."""
        return self.tolerances["mc"] + self.tolerances["quadrature"]

    def with_seed(self, seed):
        return replace(self, process=self.process.with_seed(seed))

    def with_out_dir(self, out_dir):
        return replace(self, out_dir=str(out_dir))

    def as_dict(self):
        p = self.process
        return {
            "kind": p.kind, "innovation": p.innovation, "theta": list(p.theta),
            "flip_prob": p.flip_prob,
            "transition": None if p.transition is None else [list(r) for r in p.transition],
            "states": list(p.states), "seed": p.seed, "tau": self.tau,
            "n_schedule": list(self.n_schedule), "mc_count": self.mc_count,
            "tolerances": dict(self.tolerances),
        }


def parse_config(text):
    """Parse the flat config format into an :class:`ExperimentConfig`."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in raw:
            raise DomainError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    proc = {}
    kw = {}
    tol = {}
    suite = {}
    for key, value in raw.items():
        try:
            if key in ("kind", "innovation"):
                proc[key] = value
            elif key in ("theta", "states"):
                proc[key] = _floats(value)
            elif key == "flip_prob":
                proc[key] = float(value)
            elif key == "transition":
                proc[key] = tuple(_floats(r) for r in value.split(";") if r.strip())
            elif key == "seed":
                proc[key] = int(value)
            elif key == "tau":
                kw["tau"] = float(value)
            elif key == "n_schedule":
                kw["n_schedule"] = _ints(value)
            elif key == "mc_count":
                kw["mc_count"] = int(value)
            elif key == "out_dir":
                kw["out_dir"] = value
            elif key.startswith("tol."):
                tol[key[4:]] = float(value)
            elif key in SUITE_KEYS:
                name = key[6:]
                if name in ("block_size", "cells"):
                    suite[name] = int(value)
                elif name == "gaps":
                    suite[name] = _ints(value)
                elif name == "fit_eps":
                    suite[name] = float(value)
                else:
                    suite[name] = _floats(value)
            else:
                raise DomainError(f"unknown config key {key!r}")
        except ValueError as exc:
            if isinstance(exc, DomainError):
                raise
            raise DomainError(f"bad value for {key!r}: {value!r}") from exc
    if "kind" not in proc:
        proc["kind"] = "markov_fn"
    return ExperimentConfig(process=ProcessSpec(**proc), tolerances=tol,
                            suite=SuiteOptions(**suite), **kw)


def load_config(path):
    return parse_config(Path(path).read_text())

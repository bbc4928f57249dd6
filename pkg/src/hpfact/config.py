"""Experiment configuration: a versioned JSON document with every default spelled out."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .factorization import ExponentSystem, required_half_width
from .grid import GridSpec
from .kernels import get_kernel, available_kernels

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """A configuration violates one of its cross-field invariants."""


@dataclass
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    dim: int = 1
    kernel: str = "riesz"
    kernel_params: dict = field(default_factory=lambda: {"j": 1})
    epsilon: float | None = None  # override of the kernel smoothness exponent
    p: float = 0.75
    q: float | None = None  # None: balanced q = r1 = r2 = 3p
    r1: float | None = None
    r2: float | None = None
    alpha: float | None = None  # Lip exponent; must equal n(1/p - 1)
    slot: int = 2
    N: int = 32
    rounds: int = 3
    stop_tol: float = 0.0
    points_per_radius: int | None = None
    atom_half_width: float = 2.0
    verify_N: list = field(default_factory=lambda: [16, 32])
    samples: int = 10_000
    seed: int = 0
    commutator_half_width: float = 2.0
    commutator_spacing: float | None = None
    trials: int = 256
    b_family: list = field(default_factory=lambda: ["power", "shifted_power", "smoothed_step"])
    duality_triples: int = 10
    decay_N: list = field(default_factory=lambda: [8, 16, 32, 64])
    out_dir: str = "results"

    # -- derived ----------------------------------------------------------
    def exponents(self) -> ExponentSystem:
        if self.q is None and self.r1 is None and self.r2 is None:
            return ExponentSystem.balanced(self.p)
        if None in (self.q, self.r1, self.r2):
            raise ConfigError("give all of q, r1, r2 or none of them")
        return ExponentSystem(self.p, self.q, self.r1, self.r2)

    def kernel_spec(self):
        params = dict(self.kernel_params)
        if self.kernel == "riesz":
            params.setdefault("n", self.dim)
        K = get_kernel(self.kernel, **params)
        if self.epsilon is not None:
            K = K.with_constants(epsilon=self.epsilon)
        return K

    def commutator_grid(self) -> GridSpec:
        h = self.commutator_spacing or (1 / 64 if self.dim == 1 else 1 / 8)
        return GridSpec(self.dim, self.commutator_half_width, h)

    def lip_alpha(self) -> float:
        return self.exponents().lip_alpha(self.dim)

    # -- validation ----------------------------------------------------------
    def validate(self) -> "ExperimentConfig":
        """Raise :class:`ConfigError` naming the first violated invariant."""
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version {self.schema_version} is not supported (expected {SCHEMA_VERSION})")
        if self.dim not in (1, 2):
            raise ConfigError(f"dim must be 1 or 2, got {self.dim}")
        if not self.kernel:
            raise ConfigError("kernel name is missing")
        if self.kernel not in available_kernels():
            raise ConfigError(f"unknown kernel {self.kernel!r}; known: {available_kernels()}")
        n = self.dim
        if not (n / (n + 1) < self.p < 1):
            raise ConfigError(f"p = {self.p} violates n/(n+1) < p < 1")
        try:
            exps = self.exponents()
        except ValueError as exc:
            raise ConfigError(f"exponent identity: {exc}") from None
        try:
            K = self.kernel_spec()
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"kernel parameters: {exc}") from None
        if not (n / (n + 1) < K.epsilon < 1):
            raise ConfigError(f"kernel smoothness epsilon = {K.epsilon} violates n/(n+1) < epsilon < 1")
        if K.epsilon * self.p - n * (1 - self.p) <= 0:
            raise ConfigError("epsilon*p - n(1-p) must be positive")
        want = exps.lip_alpha(n)
        if self.alpha is not None and abs(self.alpha - want) > 1e-12:
            raise ConfigError(f"alpha = {self.alpha} violates alpha = n(1/p - 1) = {want}")
        if self.slot not in (1, 2):
            raise ConfigError(f"slot must be 1 or 2, got {self.slot}")
        if int(self.N) != self.N or self.N < 4:
            raise ConfigError(f"N must be an integer >= 4, got {self.N}")
        if int(self.rounds) != self.rounds or self.rounds < 0:
            raise ConfigError(f"rounds must be a nonnegative integer, got {self.rounds}")
        for N in list(self.verify_N) + list(self.decay_N):
            if int(N) != N or N < 4:
                raise ConfigError(f"separations must be integers >= 4, got {N}")
        if self.samples < 1 or self.trials < 1 or self.duality_triples < 0:
            raise ConfigError("samples and trials must be positive")
        ppr = self.points_per_radius or (32 if n == 1 else 6)
        if ppr < 2:
            raise ConfigError("points_per_radius must be >= 2 (balls need r >= 2h)")
        try:
            GridSpec(n, self.atom_half_width, 1.0 / ppr)
            cg = self.commutator_grid()
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from None
        if self.atom_half_width < 1 + 2.0 / ppr:
            raise ConfigError("grid-contains-balls: atom grid must hold the unit ball")
        if cg.half_width < 12 * cg.spacing:
            raise ConfigError("grid-contains-balls: commutator grid too small for the trial bumps")
        # the enlarged construction grid is built on demand; make sure it is finite and sane
        if not math.isfinite(required_half_width(self.N, 1.0, n)):
            raise ConfigError("N too large")
        known = {"power", "shifted_power", "smoothed_step", "zero"}
        bad = [b for b in self.b_family if b not in known]
        if bad:
            raise ConfigError(f"unknown b-family members {bad}; known: {sorted(known)}")
        return self

    # -- io ---------------------------------------------------------------------
    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

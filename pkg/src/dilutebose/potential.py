"""Interaction potentials and model parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SOFT_SPHERE = "soft_sphere"
TABULATED = "tabulated"


class ParameterError(ValueError):
    """Raised for physically invalid inputs."""


def _simpson_weights(n, h):
    """Composite Simpson weights for ``n`` (even) intervals of width ``h``."""
    if n % 2:
        raise ValueError("Simpson rule needs an even number of intervals")
    w = np.full(n + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (h / 3.0)


def sinc(x):
    """sin(x)/x with a short series near zero."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-4
    x2 = x[small] ** 2
    out[small] = 1.0 - x2 / 6.0 + x2 * x2 / 120.0
    xl = x[~small]
    out[~small] = np.sin(xl) / xl
    return out


# (sin x - x cos x)/x^3 = sum_n (-1)^n (2n + 2) x^(2n) / (2n + 3)!
_BALL_SERIES = np.array([(-1) ** n * (2 * n + 2) / math.factorial(2 * n + 3) for n in range(12)])


def ball_kernel(x):
    """(sin x - x cos x)/x^3, using its Taylor series for |x| < 1."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    small = np.abs(x) < 1.0
    out[small] = np.polynomial.polynomial.polyval(x[small] ** 2, _BALL_SERIES)
    xl = x[~small]
    out[~small] = (np.sin(xl) - xl * np.cos(xl)) / xl ** 3
    return out


@dataclass(frozen=True)
class Potential:
    """Radial, nonnegative, compactly supported interaction.

    Parameters
    ----------
    kind : {"soft_sphere", "tabulated"}
    V0 : float
        Height of the soft sphere. For tabulated input this is the sample
        maximum and is filled in automatically.
    R : float
        Support radius. For tabulated input this is the last sample radius.
    samples : tuple of (r, V) pairs, optional
        Radial samples for the tabulated kind, linearly interpolated and
        zero beyond the last sample.
    """

    kind: str = SOFT_SPHERE
    V0: float = 2.0
    R: float = 1.0
    samples: tuple | None = None

    def __post_init__(self):
        if self.kind == SOFT_SPHERE:
            if not (math.isfinite(self.V0) and math.isfinite(self.R)):
                raise ParameterError("V0 and R must be finite")
            if self.R <= 0:
                raise ParameterError(f"support radius must be positive, got R={self.R}")
            if self.V0 < 0:
                raise ParameterError(f"potential must be nonnegative, got V0={self.V0}")
            object.__setattr__(self, "samples", None)
        elif self.kind == TABULATED:
            if not self.samples:
                raise ParameterError("tabulated potential needs samples")
            pts = tuple((float(r), float(v)) for r, v in self.samples)
            r = np.array([p[0] for p in pts])
            v = np.array([p[1] for p in pts])
            if len(pts) < 2:
                raise ParameterError("tabulated potential needs at least two samples")
            if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
                raise ParameterError("samples must be finite")
            if r[0] != 0.0:
                raise ParameterError("first sample must sit at r = 0")
            if np.any(np.diff(r) <= 0):
                raise ParameterError("sample radii must be strictly increasing")
            if np.any(v < 0):
                raise ParameterError("potential must be nonnegative at every sample")
            object.__setattr__(self, "samples", pts)
            object.__setattr__(self, "R", float(r[-1]))
            object.__setattr__(self, "V0", float(v.max()))
        else:
            raise ParameterError(f"unknown potential kind {self.kind!r}")

    @property
    def is_zero(self):
        return self.V0 == 0.0

    def __call__(self, r):
        """Evaluate V at radii ``r`` (array-like)."""
        r = np.asarray(r, dtype=np.float64)
        if self.kind == SOFT_SPHERE:
            return np.where(r <= self.R, self.V0, 0.0)
        rs = np.array([p[0] for p in self.samples])
        vs = np.array([p[1] for p in self.samples])
        return np.where(r <= self.R, np.interp(r, rs, vs), 0.0)

    def fourier(self, k, n_nodes=4096):
        """Radial Fourier transform 4 pi int V(r) sinc(k r) r^2 dr."""
        k = np.asarray(k, dtype=np.float64)
        if self.kind == SOFT_SPHERE:
            return 4 * math.pi * self.V0 * self.R ** 3 * ball_kernel(k * self.R)
        r = np.linspace(0.0, self.R, n_nodes + 1)
        wg = _simpson_weights(n_nodes, self.R / n_nodes) * self(r) * r * r * 4 * math.pi
        from . import kernels

        flat = np.ascontiguousarray(k.ravel())
        return kernels.radial_transform(flat, r, wg).reshape(k.shape)

    def to_dict(self):
        d = {"kind": self.kind, "V0": self.V0, "R": self.R}
        if self.kind == TABULATED:
            d["samples"] = [list(p) for p in self.samples]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind", SOFT_SPHERE)
        if kind == TABULATED:
            allowed = {"samples", "V0", "R"}
        else:
            allowed = {"V0", "R"}
        extra = set(d) - allowed
        if extra:
            raise ParameterError(f"unknown potential keys: {sorted(extra)}")
        if kind == TABULATED:
            return cls(kind=kind, samples=tuple(tuple(p) for p in d["samples"]))
        return cls(kind=kind, V0=float(d.get("V0", 2.0)), R=float(d.get("R", 1.0)))


@dataclass(frozen=True)
class ModelParams:
    """Particle number, scaling exponent and momentum cutoffs.

    ``conditions_ok`` and ``strong_regime_ok`` are advisory flags; nothing
    refuses to run when they are false.
    """

    N: int = 10_000
    kappa: float = 0.0
    ell: float = 0.25
    alpha: float = 0.3
    beta: float = 0.1
    mu: float = 0.3

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 2:
            raise ParameterError(f"N must be an integer >= 2, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        for name in ("kappa", "ell", "alpha", "beta", "mu"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ParameterError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if not 0.0 <= self.kappa < 2.0 / 3.0:
            raise ParameterError(f"kappa must lie in [0, 2/3), got {self.kappa}")
        if not 0.0 < self.ell < 0.5:
            raise ParameterError(f"ell must lie in (0, 1/2), got {self.ell}")
        if self.mu < 0:
            raise ParameterError(f"mu must be nonnegative, got {self.mu}")

    @property
    def scale(self):
        """Length scale N^(1-kappa) of the rescaled potential."""
        return float(self.N) ** (1.0 - self.kappa)

    @property
    def Rb(self):
        """Radius of the Neumann ball in rescaled units."""
        return self.ell * self.scale

    @property
    def nk(self):
        """N^kappa."""
        return float(self.N) ** self.kappa

    @property
    def conditions_ok(self):
        k, a, b = self.kappa, self.alpha, self.beta
        return bool(2 * k < b < a < 0.5 - 2 * k and 4 * k < a and 3 * b + 4 * k - 1 < a)

    @property
    def strong_regime_ok(self):
        k, a = self.kappa, self.alpha
        return bool(6 * k < a < 0.5 - 1.5 * k and k < 1.0 / 44.0)

    def validity(self):
        return {"params_valid": self.conditions_ok, "strong_regime_valid": self.strong_regime_ok}

    def check_support(self, pot: Potential):
        if self.Rb < pot.R:
            raise ParameterError(
                f"Neumann radius ell*N^(1-kappa)={self.Rb:.6g} is smaller than the "
                f"support radius R={pot.R:.6g}")

    def to_dict(self):
        return {"N": self.N, "kappa": self.kappa, "ell": self.ell,
                "alpha": self.alpha, "beta": self.beta, "mu": self.mu}

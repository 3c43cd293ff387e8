"""Toroidal state arithmetic and the irrational rotation clock.

States live on the 16-torus: coordinates in [0, 1) with wraparound. The
clock is a block-diagonal operator made of 8 planar rotors whose angles are
pi * sqrt(p) for distinct primes p.

Each rotor is realized as three shears on a fixed-point grid (a lifting
rotation). Every shear adds a grid-quantized multiple of the other
coordinate, so the step is exactly reversible in floating point and has
determinant one. A plain ``c*x - s*y`` rotation in float32 picks up a fixed
scale error from ``cos^2 + sin^2 != 1`` on every step, which after 1e5 steps
swamps the rounding floor by four orders of magnitude.

A :class:`TorusState` carries its unreduced lift in R^16 alongside the
reduced coordinates. :func:`apply` and :func:`apply_inverse` move the lift,
so the clock can be run backwards; :func:`evolve` and :func:`invert_step`
implement the mod-1 memory recurrence and operate on reduced coordinates.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

DIM = 16
N_ROTORS = DIM // 2
DEFAULT_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19)


class Precision(str, enum.Enum):
    SINGLE = "single"
    DOUBLE = "double"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.float32 if self is Precision.SINGLE else np.float64)

    @property
    def eps(self) -> float:
        return float(np.finfo(self.dtype).eps)

    @property
    def code(self) -> int:
        return 0 if self is Precision.SINGLE else 1

    @classmethod
    def from_code(cls, code: int) -> "Precision":
        return {0: cls.SINGLE, 1: cls.DOUBLE}[code]

    @property
    def grid_bits(self) -> int:
        # Multiples of 2**-bits with magnitude < 4 are exact in the dtype,
        # so shear additions never round.
        return 22 if self is Precision.SINGLE else 50


def _precision(p) -> Precision:
    return p if isinstance(p, Precision) else Precision(p)


def mod1(x: np.ndarray) -> np.ndarray:
    """Reduce to [0, 1) unconditionally."""
    r = x - np.floor(x)
    r[r >= 1] = 0
    return r


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    return all(n % k for k in range(3, math.isqrt(n) + 1, 2))


@dataclass(frozen=True, eq=False)
class TorusState:
    """A point on the 16-torus.

    ``lift`` is a representative in R^16; ``coords`` is its reduction mod 1.
    States built from coordinates have ``lift == coords``.
    """

    lift: np.ndarray
    precision: Precision = Precision.SINGLE
    coords: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        precision = _precision(self.precision)
        lift = np.array(self.lift, dtype=precision.dtype).reshape(-1)
        if lift.shape != (DIM,):
            raise ValueError(f"torus state must have {DIM} coordinates, got {lift.shape[0]}")
        if not np.all(np.isfinite(lift)):
            raise ValueError("torus state coordinates must be finite")
        coords = mod1(lift.copy())
        lift.setflags(write=False)
        coords.setflags(write=False)
        object.__setattr__(self, "precision", precision)
        object.__setattr__(self, "lift", lift)
        object.__setattr__(self, "coords", coords)

    @classmethod
    def zero(cls, precision=Precision.SINGLE) -> "TorusState":
        return cls(np.zeros(DIM), precision)

    @classmethod
    def from_coords(cls, coords, precision=Precision.SINGLE) -> "TorusState":
        precision = _precision(precision)
        return cls(mod1(np.array(coords, dtype=precision.dtype).reshape(-1)), precision)

    def reduced(self) -> "TorusState":
        return TorusState(self.coords, self.precision)

    def __eq__(self, other):
        if not isinstance(other, TorusState):
            return NotImplemented
        return self.precision is other.precision and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash((self.precision, self.coords.tobytes()))


@dataclass(frozen=True, eq=False)
class RotationOperator:
    """Eight planar rotors. Block k rotates coordinates (2k, 2k+1)."""

    primes: tuple
    angles: np.ndarray
    cos_sin: np.ndarray
    precision: Precision
    # lifting form: optional half-turn, then shears with coefficients a, b, a
    flip: np.ndarray = field(repr=False)
    shear_a: np.ndarray = field(repr=False)
    shear_b: np.ndarray = field(repr=False)

    @classmethod
    def _build(cls, angles, primes, precision) -> "RotationOperator":
        precision = _precision(precision)
        dt = precision.dtype
        angles = np.mod(np.asarray(angles, dtype=np.float64), 2 * np.pi)
        if angles.shape != (N_ROTORS,):
            raise ValueError(f"need {N_ROTORS} rotor angles")
        cos_sin = np.stack([np.cos(angles), np.sin(angles)], axis=1).astype(dt)
        flip = np.cos(angles) < 0
        residual = np.where(flip, angles - np.pi, angles)
        residual = np.mod(residual + np.pi, 2 * np.pi) - np.pi
        sign = np.where(flip, -1.0, 1.0).astype(dt)
        shear_a = (-np.tan(residual / 2)).astype(dt)
        shear_b = np.sin(residual).astype(dt)
        for arr in (angles, cos_sin, sign, shear_a, shear_b):
            arr.setflags(write=False)
        return cls(tuple(primes), angles, cos_sin, precision, sign, shear_a, shear_b)

    @classmethod
    def from_angles(cls, angles, precision=Precision.SINGLE, *, testing: bool = False):
        """Operator with arbitrary angles. Test-only: bypasses the prime construction."""
        if not testing:
            raise PermissionError("arbitrary-angle rotations are for tests only; pass testing=True")
        return cls._build(angles, (), precision)

    @property
    def dtype(self) -> np.dtype:
        return self.precision.dtype


def make_rotation(primes=DEFAULT_PRIMES, precision=Precision.SINGLE) -> RotationOperator:
    primes = tuple(int(p) for p in primes)
    if len(primes) != N_ROTORS:
        raise ValueError(f"need exactly {N_ROTORS} primes, got {len(primes)}")
    bad = [p for p in primes if not is_prime(p)]
    if bad:
        raise ValueError(f"not prime: {bad}")
    if len(set(primes)) != len(primes):
        dupes = sorted({p for p in primes if primes.count(p) > 1})
        raise ValueError(f"duplicate primes: {dupes}")
    angles = np.pi * np.sqrt(np.array(primes, dtype=np.float64))
    return RotationOperator._build(angles, primes, precision)


def _grid(precision: Precision):
    dt = precision.dtype
    return dt.type(2.0**precision.grid_bits), dt.type(2.0**-precision.grid_bits)


# The shears run in grid units: every intermediate is an integer below 2^(grid_bits + 1),
# exactly representable, and scaling by a power of two is exact, so this is bit-identical
# to snapping each product back onto the 2^-grid_bits lattice.


def rotate(R: RotationOperator, x: np.ndarray) -> np.ndarray:
    """Linear part of the clock on a lifted vector (no mod reduction).

    The input is first snapped to the shear grid; magnitudes must stay
    below 2 per coordinate for the shears to be exact. Leading batch
    dimensions are allowed.
    """
    up, down = _grid(R.precision)
    v = np.rint(np.asarray(x, dtype=R.dtype) * up)
    u = v[..., 0::2] * R.flip
    w = v[..., 1::2] * R.flip
    u += np.rint(R.shear_a * w)
    w += np.rint(R.shear_b * u)
    u += np.rint(R.shear_a * w)
    out = np.empty_like(v)
    out[..., 0::2] = u
    out[..., 1::2] = w
    out *= down
    return out


def rotate_inverse(R: RotationOperator, x: np.ndarray) -> np.ndarray:
    up, down = _grid(R.precision)
    v = np.rint(np.asarray(x, dtype=R.dtype) * up)
    u = v[..., 0::2].copy()
    w = v[..., 1::2].copy()
    u -= np.rint(R.shear_a * w)
    w -= np.rint(R.shear_b * u)
    u -= np.rint(R.shear_a * w)
    out = np.empty_like(v)
    out[..., 0::2] = u * R.flip
    out[..., 1::2] = w * R.flip
    out *= down
    return out


def apply(R: RotationOperator, S: TorusState) -> TorusState:
    return TorusState(rotate(R, S.lift), R.precision)


def apply_inverse(R: RotationOperator, S: TorusState) -> TorusState:
    return TorusState(rotate_inverse(R, S.lift), R.precision)


def evolve(R: RotationOperator, S_prev: TorusState, V) -> TorusState:
    """One memory step: rotate, add the force vector, reduce mod 1."""
    rotated = rotate(R, S_prev.coords)
    return TorusState(mod1(rotated + np.asarray(V, dtype=R.dtype)), R.precision)


def invert_step(R: RotationOperator, S_t: TorusState, S_prev: TorusState) -> np.ndarray:
    """Recover the force vector injected between two consecutive states, in [0, 1)."""
    return mod1(S_t.coords - rotate(R, S_prev.coords))


def wrap_distance(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Toroidal distance between rows of ``u`` and ``v`` (broadcasting)."""
    d = np.abs(np.asarray(u, dtype=np.float64) - np.asarray(v, dtype=np.float64))
    d = np.minimum(d, 1.0 - d)
    return np.sqrt(np.sum(d * d, axis=-1))


def torus_distance(u: TorusState, v: TorusState) -> float:
    return float(wrap_distance(u.coords, v.coords))


@dataclass(frozen=True)
class DriftReport:
    steps: int
    precision: Precision
    checkpoints: list
    errors: list

    @property
    def max_error(self) -> float:
        return max(self.errors)

    @property
    def per_checkpoint_errors(self) -> dict:
        return dict(zip(self.checkpoints, self.errors))


def log_checkpoints(steps: int) -> list:
    points = {steps}
    k = 1
    while k < steps:
        points.add(k)
        if 3 * k < steps:
            points.add(3 * k)
        k *= 10
    return sorted(points)


def drift_stress(R: RotationOperator, steps: int, *, seed: int = 0, checkpoints=None) -> DriftReport:
    """Run the clock forward ``t`` steps then backward ``t`` steps for each checkpoint ``t``.

    Each checkpoint is an independent iterated run from the same seeded start,
    so the reported error is the real accumulated rounding, not a closed form.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    rng = np.random.default_rng(seed)
    start = TorusState(rng.random(DIM), R.precision)
    checkpoints = sorted(set(checkpoints or log_checkpoints(steps)))
    errors = []
    for t in checkpoints:
        x = start.lift
        for _ in range(t):
            x = rotate(R, x)
        for _ in range(t):
            x = rotate_inverse(R, x)
        errors.append(float(wrap_distance(mod1(x.copy()), start.coords)))
    return DriftReport(steps, R.precision, checkpoints, errors)


def orbit_min_return(R: RotationOperator, start: TorusState, horizon: int, skip: int = 1) -> float:
    """Closest approach of the orbit ``apply^t(start)`` to ``start`` for ``skip <= t <= horizon``."""
    if skip < 1 or horizon < skip:
        raise ValueError(f"need horizon >= skip >= 1, got horizon={horizon}, skip={skip}")
    x = start.lift
    best = math.inf
    for t in range(1, horizon + 1):
        x = rotate(R, x)
        if t >= skip:
            best = min(best, float(wrap_distance(mod1(x.copy()), start.coords)))
    return best


def min_block_gap(R: RotationOperator) -> float:
    """min over rotors of |exp(i*theta) - 1|; zero would mean R - I is singular."""
    return float(np.min(2 * np.abs(np.sin(R.angles / 2))))

"""Phase-space descriptors and discrete field states.

Two arenas are supported: the canonical k-contact space built on k copies of
a cotangent bundle times R^k, and the two-contactification of an adapted
exact two-symplectic cotangent structure.  Descriptors are immutable; all
geometry downstream is expressed through their coordinate vocabularies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from . import expr as ex


class SpaceError(ValueError):
    pass


def _check_names(names):
    for name in names:
        if not name or not (name[0].isalpha() and all(c.isalnum() or c == "_" for c in name)):
            raise SpaceError(f"'{name}' is not a valid coordinate name")
        if name in ex.FUNCTIONS:
            raise SpaceError(f"coordinate name '{name}' clashes with a function name")
    if len(set(names)) != len(names):
        dups = sorted({n for n in names if list(names).count(n) > 1})
        raise SpaceError(f"duplicate coordinate names: {dups}")


# ---------------------------------------------------------------------------
# Grids and states


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    num: int
    spacing: float
    periodic: bool = True

    def points(self) -> np.ndarray:
        return self.start + self.spacing * np.arange(self.num)


@dataclass(frozen=True)
class Grid:
    axes: tuple

    @property
    def shape(self):
        return tuple(ax.num for ax in self.axes)

    @property
    def names(self):
        return tuple(ax.name for ax in self.axes)

    def axis(self, name: str) -> Axis:
        for ax in self.axes:
            if ax.name == name:
                return ax
        raise SpaceError(f"grid has no axis '{name}'")

    def index(self, name: str) -> int:
        for i, ax in enumerate(self.axes):
            if ax.name == name:
                return i
        raise SpaceError(f"grid has no axis '{name}'")

    def mesh(self) -> dict:
        """Axis coordinate arrays broadcast to the full grid shape."""
        arrays = np.meshgrid(*[ax.points() for ax in self.axes], indexing="ij")
        return {ax.name: arr for ax, arr in zip(self.axes, arrays)}


@dataclass
class FieldState:
    """Sampled phase-space coordinates on a structured grid."""

    grid: Grid
    values: dict
    time: float = 0.0

    def __post_init__(self):
        shape = self.grid.shape
        for name, arr in self.values.items():
            if np.shape(arr) != shape:
                raise SpaceError(
                    f"array for '{name}' has shape {np.shape(arr)}, grid is {shape}"
                )

    def check_finite(self):
        for name, arr in self.values.items():
            if not np.all(np.isfinite(arr)):
                raise SpaceError(f"non-finite values in field '{name}'")
        return True


# ---------------------------------------------------------------------------
# Canonical k-contact space


@dataclass(frozen=True, eq=False)
class CanonicalSpace:
    """Canonical k-contact phase space with Darboux coordinates.

    The contact structure is implied by the coordinate layout: Reeb
    directions are the z axes, and the momentum conjugate to field i along
    independent variable alpha is ``momenta[i][alpha]``.
    """

    fields: tuple
    tvars: tuple
    momenta: tuple
    zvars: tuple
    params: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.fields)

    @property
    def k(self) -> int:
        return len(self.tvars)

    @property
    def coordinates(self) -> tuple:
        flat = tuple(p for row in self.momenta for p in row)
        return self.fields + flat + self.zvars

    @property
    def vocabulary(self) -> tuple:
        return self.coordinates + tuple(self.params)

    @property
    def momentum_block(self) -> tuple:
        """Momentum names flattened in (field-major, tvar-minor) order."""
        return tuple(p for row in self.momenta for p in row)

    def momentum(self, i: int, alpha: int) -> str:
        return self.momenta[i][alpha]

    def parse(self, source: str) -> ex.Expr:
        return ex.parse(source, self.vocabulary)


def make_canonical(
    n: int,
    k: int,
    *,
    fields: Sequence[str] | None = None,
    tvars: Sequence[str] | None = None,
    momenta: Sequence[Sequence[str]] | None = None,
    zvars: Sequence[str] | None = None,
    params: Mapping[str, float] | None = None,
) -> CanonicalSpace:
    """Build a canonical space with n fields and k independent variables.

    Default naming follows the worked models: single field ``u`` with
    momenta ``p_t, p_x`` and dissipative variables ``z_t, z_x`` when k=2.
    The first independent variable is time-like by convention.
    """
    if n < 1 or k < 1:
        raise SpaceError("need n >= 1 and k >= 1")
    if tvars is None:
        tvars = ("t", "x") if k == 2 else ("t",) + tuple(f"x{j}" for j in range(1, k))
    if fields is None:
        fields = ("u",) if n == 1 else tuple(f"q{i + 1}" for i in range(n))
    if momenta is None:
        if n == 1:
            momenta = (tuple(f"p_{tv}" for tv in tvars),)
        else:
            momenta = tuple(tuple(f"p_{f}_{tv}" for tv in tvars) for f in fields)
    if zvars is None:
        zvars = tuple(f"z_{tv}" for tv in tvars)
    fields = tuple(fields)
    tvars = tuple(tvars)
    momenta = tuple(tuple(row) for row in momenta)
    zvars = tuple(zvars)
    params = dict(params or {})
    if len(fields) != n or len(tvars) != k or len(zvars) != k:
        raise SpaceError("coordinate name counts do not match n, k")
    if len(momenta) != n or any(len(row) != k for row in momenta):
        raise SpaceError("momentum names must form an n-by-k table")
    names = fields + tuple(p for row in momenta for p in row) + zvars + tuple(params)
    _check_names(names)
    space = CanonicalSpace(fields, tvars, momenta, zvars, params)
    assert len(space.coordinates) == n + n * k + k
    return space


# ---------------------------------------------------------------------------
# Adapted two-contactification


@dataclass(frozen=True, eq=False)
class AdaptedContactification:
    """Two-contactification of an adapted exact two-symplectic cotangent space.

    ``theta_e`` holds the basic one-form components over the base
    coordinates; ``momenta[i]`` is the fibre momentum conjugate to
    ``base[i]``.  Independent variables are (t, x).
    """

    base: tuple
    momenta: tuple
    theta_e: tuple
    theta_e_source: tuple
    zvars: tuple = ("z_t", "z_x")
    params: dict = field(default_factory=dict)
    tvars: tuple = ("t", "x")

    @property
    def n(self) -> int:
        return len(self.base)

    @property
    def k(self) -> int:
        return 2

    @property
    def coordinates(self) -> tuple:
        return self.base + self.momenta + self.zvars

    @property
    def vocabulary(self) -> tuple:
        return self.coordinates + tuple(self.params)

    @property
    def momentum_block(self) -> tuple:
        return self.momenta

    def parse(self, source: str) -> ex.Expr:
        return ex.parse(source, self.vocabulary)

    def theta_at(self, bindings: Mapping[str, ex.Value]) -> np.ndarray:
        """Values of the theta_e components, stacked on the last axis."""
        vals = [np.asarray(ex.evaluate(th, bindings), dtype=float) for th in self.theta_e]
        return np.stack(np.broadcast_arrays(*vals), axis=-1) if len(vals) > 1 else np.asarray(vals[0])[..., None]


def make_adapted(
    base: Sequence[str],
    theta_e: Sequence[Union[str, ex.Expr]],
    *,
    momenta: Sequence[str] | None = None,
    zvars: Sequence[str] = ("z_t", "z_x"),
    params: Mapping[str, float] | None = None,
) -> AdaptedContactification:
    """Build an adapted two-contactification from its basic one-form.

    Each theta_e component may reference only base coordinates and
    parameters; referencing a momentum or dissipative coordinate violates
    the basic-form condition and is rejected.
    """
    base = tuple(base)
    params = dict(params or {})
    if momenta is None:
        momenta = tuple(f"pi_{y}" for y in base)
    momenta = tuple(momenta)
    zvars = tuple(zvars)
    if len(momenta) != len(base):
        raise SpaceError("need one fibre momentum per base coordinate")
    if len(zvars) != 2:
        raise SpaceError("adapted contactifications are two-contact: need two z names")
    if len(theta_e) != len(base):
        raise SpaceError("theta_e needs one component per base coordinate")
    names = base + momenta + zvars + tuple(params)
    _check_names(names)
    allowed = set(base) | set(params)
    parsed = []
    sources = []
    full_vocab = tuple(names)
    for comp in theta_e:
        tree = ex.parse(comp, full_vocab) if isinstance(comp, str) else comp
        bad = sorted(ex.variables(tree) - allowed)
        if bad:
            raise SpaceError(
                f"theta_e component '{ex.to_source(tree)}' references non-base "
                f"coordinates {bad}; the form must be basic"
            )
        parsed.append(tree)
        sources.append(ex.to_source(tree))
    return AdaptedContactification(
        base, momenta, tuple(parsed), tuple(sources), zvars, params
    )


def omega_at(space: AdaptedContactification, point) -> np.ndarray:
    """Antisymmetric structure matrix O_ij = d_j(theta_e)_i - d_i(theta_e)_j.

    ``point`` is either a sequence of base-coordinate values or a bindings
    mapping (which may carry grid arrays).  Exactly antisymmetric since it
    is assembled as J - J^T.
    """
    if isinstance(point, Mapping):
        bindings = dict(point)
    else:
        point = list(point)
        if len(point) != space.n:
            raise SpaceError(f"point has {len(point)} entries, base has {space.n}")
        bindings = dict(zip(space.base, map(float, point)))
    for name, val in space.params.items():
        bindings.setdefault(name, val)
    rows = [ex.gradient(th, space.base, bindings) for th in space.theta_e]
    jac = np.stack(np.broadcast_arrays(*rows), axis=-2)  # (..., i, j) = d_j (theta_e)_i
    return jac - np.swapaxes(jac, -1, -2)

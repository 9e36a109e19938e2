"""Borehole array geometry under drilling deviations.

A layout fixes the collar positions on the surface plane, a shared unit
reference direction for deviations, and the drilled length.  A deviation
assigns each borehole an azimuth (rotation of the reference direction,
positive clockwise when looking down on the x-east, y-north plane) and
an inclination (tilt from the vertical).  Realized boreholes are
straight segments from the collar to

    bottom = collar + L * (sin(incl) * dir_x, sin(incl) * dir_y, -cos(incl))

Boreholes that end up closer than a minimum separation are repaired by
rotating the azimuth of the higher-indexed, inclined member of each
conflicting pair; the repair never moves collars or inclinations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import UnrepairableGeometryError

DEFAULT_MIN_SEPARATION = 0.5


@dataclass(frozen=True)
class ArrayLayout:
    """Collar positions, reference deviation direction and drilled length."""

    collars: np.ndarray
    ref_direction: np.ndarray
    length: float
    name: str = ""

    def __post_init__(self):
        collars = np.atleast_2d(np.asarray(self.collars, dtype=float))
        if collars.ndim != 2 or collars.shape[1] != 2:
            raise ValueError(f"collars must have shape (n, 2), got {collars.shape}")
        if not np.isfinite(collars).all():
            raise ValueError("collar coordinates must be finite")
        n = collars.shape[0]
        for i in range(n):
            for j in range(i + 1, n):
                if np.linalg.norm(collars[i] - collars[j]) == 0.0:
                    raise ValueError(f"collars {i} and {j} coincide")
        direction = np.asarray(self.ref_direction, dtype=float).reshape(-1)
        if direction.shape != (2,):
            raise ValueError("ref_direction must be a 2-vector")
        norm = float(np.linalg.norm(direction))
        if norm == 0.0 or not np.isfinite(norm):
            raise ValueError("ref_direction must be a nonzero vector")
        if not self.length > 0.0:
            raise ValueError(f"length must be positive, got {self.length}")
        collars.setflags(write=False)
        direction = direction / norm
        direction.setflags(write=False)
        object.__setattr__(self, "collars", collars)
        object.__setattr__(self, "ref_direction", direction)
        object.__setattr__(self, "length", float(self.length))

    @property
    def n_boreholes(self) -> int:
        return self.collars.shape[0]


def grid_layout(nx: int, ny: int, extent: float, length: float,
                direction_deg: float = 40.0, name: str = "") -> ArrayLayout:
    """Rectangular collar grid spanning ``extent`` meters in each axis.

    Collars sit at ``nx`` x ``ny`` points of a centered square grid; an
    extent of 20 with a 3 x 3 grid gives 10 m spacing.  The reference
    deviation direction is given as degrees counterclockwise from east.
    """
    if nx < 1 or ny < 1:
        raise ValueError("grid must have at least one collar per axis")
    if nx * ny > 1 and not extent > 0.0:
        raise ValueError("extent must be positive for more than one collar")
    xs = np.linspace(-extent / 2.0, extent / 2.0, nx) if nx > 1 else np.zeros(1)
    ys = np.linspace(-extent / 2.0, extent / 2.0, ny) if ny > 1 else np.zeros(1)
    collars = [(x, y) for y in ys for x in xs]
    rad = np.radians(direction_deg)
    return ArrayLayout(
        collars=np.asarray(collars),
        ref_direction=np.array([np.cos(rad), np.sin(rad)]),
        length=length,
        name=name or f"{nx}x{ny}-{extent:g}m",
    )


@dataclass(frozen=True)
class DeviationParams:
    """Azimuth and inclination per borehole, both in degrees."""

    azimuth_deg: np.ndarray
    inclination_deg: np.ndarray

    def __post_init__(self):
        az = np.asarray(self.azimuth_deg, dtype=float).reshape(-1)
        inc = np.asarray(self.inclination_deg, dtype=float).reshape(-1)
        if az.shape != inc.shape:
            raise ValueError("azimuth and inclination counts differ")
        if not (np.isfinite(az).all() and np.isfinite(inc).all()):
            raise ValueError("deviation angles must be finite")
        if (inc < 0.0).any() or (inc >= 90.0).any():
            raise ValueError("inclinations must lie in [0, 90) degrees")
        az.setflags(write=False)
        inc.setflags(write=False)
        object.__setattr__(self, "azimuth_deg", az)
        object.__setattr__(self, "inclination_deg", inc)

    @property
    def n_boreholes(self) -> int:
        return self.azimuth_deg.size

    @classmethod
    def from_vector(cls, y, n_boreholes: int) -> "DeviationParams":
        """Unpack the flat parameter vector used by the collocation engine.

        The first ``n_boreholes`` entries are azimuths, the remaining
        ones inclinations, matching the axis order of study interpolants.
        """
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.size != 2 * n_boreholes:
            raise ValueError(f"expected {2 * n_boreholes} entries, got {y.size}")
        return cls(y[:n_boreholes], y[n_boreholes:])


@dataclass(frozen=True)
class BoreholeSegment:
    """Straight borehole axis from collar to bottom, in meters."""

    top: np.ndarray
    bottom: np.ndarray

    def __post_init__(self):
        top = np.asarray(self.top, dtype=float).reshape(3)
        bottom = np.asarray(self.bottom, dtype=float).reshape(3)
        top.setflags(write=False)
        bottom.setflags(write=False)
        object.__setattr__(self, "top", top)
        object.__setattr__(self, "bottom", bottom)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.bottom - self.top))

    @property
    def direction(self) -> np.ndarray:
        return (self.bottom - self.top) / self.length


def _deviation_direction(ref_direction: np.ndarray, azimuth_deg: float) -> np.ndarray:
    """Reference direction rotated clockwise by the azimuth."""
    a = np.radians(azimuth_deg)
    c, s = np.cos(a), np.sin(a)
    dx, dy = ref_direction
    return np.array([c * dx + s * dy, -s * dx + c * dy])


def _segment_for(layout: ArrayLayout, azimuth_deg: float, inclination_deg: float,
                 i: int) -> BoreholeSegment:
    beta = np.radians(inclination_deg)
    d = _deviation_direction(layout.ref_direction, azimuth_deg)
    top = np.array([layout.collars[i, 0], layout.collars[i, 1], 0.0])
    step = layout.length * np.array(
        [np.sin(beta) * d[0], np.sin(beta) * d[1], -np.cos(beta)])
    return BoreholeSegment(top=top, bottom=top + step)


def realize_geometry(layout: ArrayLayout, params: DeviationParams) -> list[BoreholeSegment]:
    """Realize every borehole axis for one deviation draw."""
    if params.n_boreholes != layout.n_boreholes:
        raise ValueError(
            f"layout has {layout.n_boreholes} boreholes, "
            f"deviation has {params.n_boreholes}"
        )
    return [
        _segment_for(layout, params.azimuth_deg[i], params.inclination_deg[i], i)
        for i in range(layout.n_boreholes)
    ]


def segment_min_distance(a: BoreholeSegment, b: BoreholeSegment) -> float:
    """Minimum distance between two borehole axes.

    Closest-point computation between segments with clamping of both
    parameters, robust for parallel and touching configurations.
    """
    d1 = a.bottom - a.top
    d2 = b.bottom - b.top
    r = a.top - b.top
    aa = float(d1 @ d1)
    ee = float(d2 @ d2)
    ff = float(d2 @ r)
    bb = float(d1 @ d2)
    cc = float(d1 @ r)
    den = aa * ee - bb * bb
    if den > 1e-12 * aa * ee:
        s = min(max((bb * ff - cc * ee) / den, 0.0), 1.0)
    else:
        s = 0.0
    t = (bb * s + ff) / ee
    if t < 0.0:
        t = 0.0
        s = min(max(-cc / aa, 0.0), 1.0)
    elif t > 1.0:
        t = 1.0
        s = min(max((bb - cc) / aa, 0.0), 1.0)
    closest = a.top + s * d1 - (b.top + t * d2)
    return float(np.linalg.norm(closest))


def min_pairwise_distance(segments) -> tuple[float, tuple[int, int]]:
    """Smallest axis-to-axis distance and the pair achieving it."""
    if len(segments) < 2:
        return float("inf"), (-1, -1)
    best = float("inf")
    pair = (-1, -1)
    for i in range(len(segments)):
        for j in range(i + 1, len(segments)):
            d = segment_min_distance(segments[i], segments[j])
            if d < best:
                best = d
                pair = (i, j)
    return best, pair


@dataclass(frozen=True)
class CorrectionRecord:
    """One applied azimuth repair."""

    borehole: int
    original_azimuth_deg: float
    corrected_azimuth_deg: float

    @property
    def change_deg(self) -> float:
        return self.corrected_azimuth_deg - self.original_azimuth_deg


def correct_geometry(layout: ArrayLayout, params: DeviationParams,
                     min_separation: float = DEFAULT_MIN_SEPARATION):
    """Repair a realized geometry so no two axes come closer than allowed.

    Boreholes are visited in index order, and each conflicting pair is
    resolved by rotating its higher-indexed member: at its turn, a
    borehole rotates its own azimuth by the smallest whole-degree
    change (trying +1, -1, +2, -2, ... up to half a turn either way)
    that puts it clear of every lower-indexed borehole and of every
    vertical one, which can never rotate itself.  Conflicts with
    higher-indexed inclined boreholes are left to those boreholes'
    turns, so a nearly vertical path is never forced to escape an
    intruder that can move out of the way cheaply itself.

    Returns
    -------
    (segments, params, report)
        The viable segments, the possibly adjusted deviation parameters
        and a list of :class:`CorrectionRecord`, empty when the input
        was already conflict-free.

    Raises
    ------
    UnrepairableGeometryError
        If a conflict cannot be removed by any azimuth change, for
        example between two vertical boreholes.
    """
    if not min_separation > 0.0:
        raise ValueError(f"min_separation must be positive, got {min_separation}")
    segments = realize_geometry(layout, params)
    azimuth = params.azimuth_deg.copy()
    n = layout.n_boreholes
    report: list[CorrectionRecord] = []

    for i in range(n):
        # pairs this borehole is responsible for: every lower-indexed
        # one, plus vertical ones that cannot move themselves
        owned = [j for j in range(n) if j != i
                 and (j < i or params.inclination_deg[j] == 0.0)]
        conflicts = [j for j in owned
                     if segment_min_distance(segments[i], segments[j]) < min_separation]
        if not conflicts:
            continue
        if params.inclination_deg[i] == 0.0:
            raise UnrepairableGeometryError(
                f"boreholes {conflicts[0]} and {i} conflict and neither "
                f"can rotate clear of the other"
            )
        chosen = None
        for magnitude in range(1, 181):
            for sign in (1.0, -1.0):
                cand_az = azimuth[i] + sign * magnitude
                cand = _segment_for(layout, cand_az, params.inclination_deg[i], i)
                if all(segment_min_distance(cand, segments[j]) >= min_separation
                       for j in owned):
                    chosen = (cand_az, cand)
                    break
            if chosen is not None:
                break
        if chosen is None:
            raise UnrepairableGeometryError(
                f"no azimuth rotation separates borehole {i} from the "
                f"boreholes it must stay clear of"
            )
        report.append(CorrectionRecord(
            borehole=i,
            original_azimuth_deg=float(azimuth[i]),
            corrected_azimuth_deg=float(chosen[0]),
        ))
        azimuth[i] = chosen[0]
        segments[i] = chosen[1]

    worst, pair = min_pairwise_distance(segments)
    if worst < min_separation:
        raise UnrepairableGeometryError(
            f"boreholes {pair[0]} and {pair[1]} remain {worst:.3f} m apart "
            f"after correction"
        )
    new_params = DeviationParams(azimuth, params.inclination_deg)
    return segments, new_params, report

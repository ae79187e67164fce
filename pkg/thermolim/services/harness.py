"""Convergence experiments: energies per unit volume on growing domains.

The reference experiment evaluates e_ell(g) = E(g ell S) / |ell S| for a
reference set S at sampled placements g; the general experiment follows an
arbitrary regular domain sequence. Both return a LimitCurve whose records
can be persisted and replayed.
"""

import logging
import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from ..config import get_settings
from ..errors import GuardViolation, ModelError, RegularityError
from .audits import EXACT_TOL, reference_shape
from .geom import (
    AUDIT_SIGMA,
    ConvexDomain,
    Domain,
    EtaClass,
    ball,
    box,
    diameter,
    eta_regularity_audit,
    lshape,
    reference_volume,
)
from .models import EnergyModel, Quality, decompose
from .motion import sample_motion_in_cell
from .records import ExperimentRecord
from .sampling import STREAM_VOLUME, integrate_over_box, map_ordered, mean_and_stderr
from .tiling import enumerate_intersecting, interior_reference_simplex, sample_frames

logger = logging.getLogger(__name__)

# Scale-free sausage thicknesses checked before a domain enters a sequence
DEFAULT_T_GRID = (0.02, 0.05, 0.1)


def default_eta() -> EtaClass:
    settings = get_settings()
    return EtaClass(a=settings.eta_a, b=settings.eta_b, c=settings.eta_c)


def standard_suite() -> list[Domain]:
    """Balls of radius 2, 5 and 10, a box and an L-shape."""
    return [
        ball(2.0),
        ball(5.0),
        ball(10.0),
        box((-0.5, -0.5, -0.5), (5.5, 5.5, 5.5)),
        lshape(6.0, 3.0),
    ]


def _timed(fn: Callable[[], ExperimentRecord]) -> ExperimentRecord:
    if not get_settings().record_wall_time:
        return fn()
    start = time.perf_counter()
    record = fn()
    return record.model_copy(update={"wall_time": time.perf_counter() - start})


def make_record(
    experiment: str,
    model: EnergyModel,
    domain: Domain,
    param: float,
    value: float,
    stderr: float,
    volume: float,
    seed: int,
) -> ExperimentRecord:
    return ExperimentRecord(
        experiment=experiment,
        model=model.name,
        params=model.params(),
        domain=domain.describe(),
        param=param,
        value=value,
        stderr=stderr,
        volume=volume,
        normalized=value / volume if volume > 0 else 0.0,
        seed=seed,
        translation_radius=get_settings().translation_radius,
    )


@dataclass
class LimitCurve:
    """Normalized energies grouped by ell (or sequence index n)."""

    experiment: str
    records: list[ExperimentRecord]
    params: list[float] = field(default_factory=list)
    means: list[float] = field(default_factory=list)
    stderrs: list[float] = field(default_factory=list)
    spreads: list[float] = field(default_factory=list)  # sup - inf over sampled g
    minima: list[float] = field(default_factory=list)  # e_ell^m
    e_bar: float = math.nan
    reference_e_bar: float | None = None
    diameter_ratios: list[float] = field(default_factory=list)

    @classmethod
    def from_records(cls, experiment: str, records: list[ExperimentRecord]) -> "LimitCurve":
        curve = cls(experiment=experiment, records=records)
        for param in sorted({r.param for r in records}):
            values = [r.normalized for r in records if r.param == param]
            mean, stderr = mean_and_stderr(values)
            if len(values) == 1:
                stderr = next(r.stderr / r.volume for r in records if r.param == param)
            curve.params.append(param)
            curve.means.append(mean)
            curve.stderrs.append(stderr)
            curve.spreads.append(max(values) - min(values))
            curve.minima.append(min(values))
        curve.e_bar = curve.means[-1] if curve.means else math.nan
        return curve

    @property
    def residuals(self) -> list[float]:
        """|mean(ell) - e_bar| per ell."""
        return [abs(m - self.e_bar) for m in self.means]

    def record_residuals(self) -> list[float]:
        return [r.normalized - self.e_bar for r in self.records]

    @property
    def terminal(self) -> float:
        return self.means[-1]

    @property
    def gap(self) -> float | None:
        """|terminal - reference e_bar|, when a reference value is known."""
        if self.reference_e_bar is None:
            return None
        return abs(self.terminal - self.reference_e_bar)

    @property
    def relative_gap(self) -> float | None:
        gap = self.gap
        if gap is None or self.reference_e_bar is None:
            return None
        return gap / max(abs(self.reference_e_bar), EXACT_TOL)


def reference_limit_experiment(
    model: EnergyModel,
    ell_grid: Sequence[float],
    g_samples: int,
    quality: Quality,
    seed: int,
    reference: str = "simplex",
    experiment: str = "limit-ref",
) -> LimitCurve:
    """
    Evaluate e_ell(g) = E(g ell S) / |ell S| on a grid of scales.

    Args:
        model: Energy model
        ell_grid: Increasing scales
        g_samples: Placements per scale, uniform on the fundamental cell of G / Gamma
        quality: Monte Carlo budget of each energy evaluation
        seed: Seed of the placement sampler
        reference: "simplex" or "cube"
        experiment: Experiment id written to the records

    Returns:
        LimitCurve with e_bar the mean at the largest scale
    """
    ells = list(ell_grid)
    if not ells or any(b <= a for a, b in zip(ells, ells[1:], strict=False)):
        raise ValueError(f"ell grid must be nonempty and increasing, got {ells}")
    if g_samples < 1:
        raise ValueError(f"g_samples must be at least 1, got {g_samples}")
    shape = reference_shape(reference)
    motions = [sample_motion_in_cell(seed, k) for k in range(g_samples)]

    def evaluate(item: tuple[int, int]) -> ExperimentRecord:
        i, k = item
        g = motions[k]
        placed = shape.transformed(g.rot.matrix, ells[i], g.translation)
        domain = ConvexDomain(placed, label=reference)

        def run() -> ExperimentRecord:
            est = model.energy(domain, quality.derive(i, k))
            return make_record(
                experiment, model, domain, ells[i], est.value, est.stderr,
                domain.polytope.exact_volume, seed,
            )

        return _timed(run)

    items = [(i, k) for i in range(len(ells)) for k in range(g_samples)]
    records = map_ordered(evaluate, items)
    curve = LimitCurve.from_records(experiment, records)
    for ell, mean, spread in zip(curve.params, curve.means, curve.spreads, strict=True):
        logger.info(f"{experiment} ell={ell:g}: mean {mean:.8g}, spread {spread:.4g}")
    return curve


def general_limit_experiment(
    model: EnergyModel,
    domains: Sequence[Domain],
    quality: Quality,
    seed: int,
    eta: EtaClass | None = None,
    t_grid: Sequence[float] = DEFAULT_T_GRID,
    e_bar: float | None = None,
    experiment: str = "limit-general",
) -> LimitCurve:
    """
    E(Omega_n) / |Omega_n| along a regular domain sequence.

    Every domain must pass the eta regularity audit and keep
    diam(Omega_n) |Omega_n|^(-1/3) below Settings.diameter_ratio_max.

    Raises:
        RegularityError: A domain fails either precondition
    """
    if not domains:
        raise ValueError("domain sequence must not be empty")
    settings = get_settings()
    eta = eta or default_eta()

    def evaluate(item: tuple[int, Domain]) -> tuple[ExperimentRecord, float]:
        n, domain = item
        audit = eta_regularity_audit(domain, eta, list(t_grid), quality.samples, seed)
        if not audit.passed:
            worst = audit.worst
            raise RegularityError(
                f"sequence not in the regular class: {domain.describe()} fails at t={worst.t if worst else math.nan}"
            )
        vol = reference_volume(domain, quality.samples, seed)
        ratio = diameter(domain) / vol ** (1.0 / 3.0)
        if ratio > settings.diameter_ratio_max:
            raise RegularityError(
                f"sequence not in the regular class: diameter ratio {ratio:.3f} of "
                f"{domain.describe()} exceeds {settings.diameter_ratio_max}"
            )

        def run() -> ExperimentRecord:
            est = model.energy(domain, quality.derive(n))
            return make_record(
                experiment, model, domain, float(n), est.value, est.stderr, vol, seed
            )

        return _timed(run), ratio

    results = map_ordered(evaluate, list(enumerate(domains)))
    curve = LimitCurve.from_records(experiment, [r for r, _ in results])
    curve.diameter_ratios = [ratio for _, ratio in results]
    curve.reference_e_bar = e_bar if e_bar is not None else model.exact_limit
    logger.info(f"{experiment}: terminal {curve.terminal:.8g}, reference {curve.reference_e_bar}")
    return curve


@dataclass(frozen=True)
class LowerBoundReport:
    """E(Omega)/|Omega| against the rotation-translation average e_ell^av."""

    normalized_energy: float
    energy_stderr: float
    e_av: float
    e_av_stderr: float
    shell_fraction: float
    budget: float

    @property
    def margin(self) -> float:
        return self.normalized_energy - self.e_av

    @property
    def stderr(self) -> float:
        return math.hypot(self.energy_stderr, self.e_av_stderr)

    @property
    def passed(self) -> bool:
        return self.margin >= -(self.shell_fraction + self.budget + AUDIT_SIGMA * self.stderr)


def shell_fraction(omega: Domain, width: float, samples: int, seed: int) -> float:
    """|{x in Omega : d(x, boundary) <= width}| / |Omega|."""
    vol = reference_volume(omega, samples, seed)
    if vol <= 0:
        return 0.0
    bbox = omega.bbox
    value, _ = integrate_over_box(
        lambda pts: (omega.contains(pts) & (omega.boundary_distance(pts, cap=width) <= width)).astype(
            float
        ),
        bbox.lower,
        bbox.upper,
        samples,
        seed,
        STREAM_VOLUME,
        1,
    )
    return min(value / vol, 1.0)


def lower_bound_diagnostic(
    model: EnergyModel,
    omega: Domain,
    ell: float,
    samples: int,
    seed: int,
    budget: float = 0.0,
    radius: float | None = None,
) -> LowerBoundReport:
    """
    Lower bound of E(Omega)/|Omega| by the average over rotations and
    translations of the energy per volume of moved reference simplices.

    Args:
        model: Energy model
        omega: Domain
        ell: Simplex scale; ell |Omega|^(-1/3) must stay below Settings.lower_bound_guard
        samples: Monte Carlo samples for each estimate
        seed: Experiment seed
        budget: Extra allowance on top of the boundary-shell fraction
        radius: Translation ball radius (defaults to Settings.translation_radius)

    Returns:
        LowerBoundReport; passes when the margin is above minus the shell fraction
    """
    settings = get_settings()
    vol = reference_volume(omega, samples, seed)
    if vol <= 0:
        raise GuardViolation("lower-bound guard needs a domain of positive volume")
    scaled = ell * vol ** (-1.0 / 3.0)
    if scaled >= settings.lower_bound_guard:
        raise GuardViolation(
            f"lower-bound guard violated: ell |Omega|^(-1/3) = {scaled:.4g} "
            f">= {settings.lower_bound_guard}"
        )

    simplex = interior_reference_simplex()
    shape = simplex.transformed(np.eye(3), ell, np.zeros(3))
    e_av = model.moved_average(shape, radius or settings.translation_radius, samples, seed)
    est = model.energy(omega, Quality(samples=samples, seed=seed))
    reach = float(np.max(np.linalg.norm(simplex.vertices, axis=1)))
    report = LowerBoundReport(
        normalized_energy=est.value / vol,
        energy_stderr=est.stderr / vol,
        e_av=e_av.value,
        e_av_stderr=e_av.stderr,
        shell_fraction=shell_fraction(omega, reach * ell, samples, seed),
        budget=budget,
    )
    logger.info(
        f"Lower bound on {omega.describe()} at ell={ell}: margin {report.margin:.6g}, "
        f"shell {report.shell_fraction:.4g}"
    )
    return report


@dataclass(frozen=True)
class ConsistencyReport:
    """Both sides of the subaverage inequality assembled from the local decomposition."""

    a5_rhs: float
    a5_stderr: float
    a6_value: float
    a6_stderr: float
    energy: float
    margin: float
    margin_stderr: float
    frames: int

    @property
    def passed(self) -> bool:
        slack = AUDIT_SIGMA * self.margin_stderr + EXACT_TOL * max(1.0, abs(self.energy))
        return self.margin >= -slack


def a6_implies_a5_diagnostic(
    model: EnergyModel,
    omega: Domain,
    ell: float,
    samples: int,
    seed: int,
    frames: int = 16,
) -> ConsistencyReport:
    """
    Average over frames on the fundamental cell of the tile energy sum (the
    subaverage right-hand side) and of the full decomposition.
    """
    decomposer = model.decomposer
    if decomposer is None:
        raise ModelError(f"model not decomposable: {model.name}")
    energy = model.energy(omega, Quality(samples=samples, seed=seed))
    if omega.bbox.is_degenerate:
        return ConsistencyReport(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, frames)

    tau = decomposer.tau(ell)
    a5_values, a6_values = [], []
    for frame in sample_frames(seed, frames, ell, tau):
        dec = decompose(model, omega, frame, enumerate_intersecting(frame, omega.bbox))
        a5_values.append(dec.tile_total)
        a6_values.append(dec.total)
    a5, a5_se = mean_and_stderr(a5_values)
    a6, a6_se = mean_and_stderr(a6_values)
    margin, margin_se = mean_and_stderr(np.array(a6_values) - np.array(a5_values))
    return ConsistencyReport(
        a5_rhs=a5,
        a5_stderr=a5_se,
        a6_value=a6,
        a6_stderr=a6_se,
        energy=energy.value,
        margin=margin,
        margin_stderr=margin_se,
        frames=frames,
    )


def format_curve(curve: LimitCurve) -> str:
    """Human-readable table of a limit curve."""
    header = f"{'param':>8} {'mean':>14} {'stderr':>10} {'spread':>10} {'min':>14}"
    lines = [f"{curve.experiment}: e_bar = {curve.e_bar:.8g}", header, "-" * len(header)]
    for row in zip(curve.params, curve.means, curve.stderrs, curve.spreads, curve.minima, strict=True):
        param, mean, stderr, spread, minimum = row
        lines.append(f"{param:>8g} {mean:>14.8g} {stderr:>10.3g} {spread:>10.3g} {minimum:>14.8g}")
    if curve.gap is not None:
        lines.append(f"gap to {curve.reference_e_bar:.8g}: {curve.gap:.4g} ({curve.relative_gap:.2%})")
    return "\n".join(lines)

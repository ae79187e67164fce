"""Executable checks of the energy assumptions: normalization, stability,
translation invariance in average, continuity, the subaverage property and
local decomposition.

Audits falsify or corroborate at the configured scales; a passing report
is a measurement, not a proof. Monte Carlo comparisons are one-sided at
AUDIT_SIGMA standard errors.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from ..config import get_settings
from ..errors import ContainmentError, GeometryError, ModelError
from .geom import (
    AUDIT_SIGMA,
    Domain,
    EmptyDomain,
    Polytope,
    reference_volume,
    regularized_volume,
    volume,
)
from .models import Decomposition, EnergyModel, Quality, decompose
from .sampling import STREAM_SUBSET, STREAM_TRANSLATION, generator, mean_and_stderr
from .tiling import (
    TilingFrame,
    enumerate_intersecting,
    reference_cube,
    reference_simplex,
    sample_frames,
    tile_vertices,
)

logger = logging.getLogger(__name__)

# Tolerance for exact (deterministic) comparisons, relative to the compared magnitudes
EXACT_TOL = 1e-9

# Points used to check that a subdomain keeps its distance to the parent boundary
CONTAINMENT_SAMPLES = 20_000


@dataclass(frozen=True)
class AuditRow:
    """One inequality check: margin >= 0 means the inequality holds."""

    label: str
    margin: float
    stderr: float
    passed: bool
    lhs: float = 0.0
    rhs: float = 0.0
    detail: str = ""

    @property
    def sigma(self) -> float:
        if self.stderr > 0:
            return self.margin / self.stderr
        return math.inf if self.margin >= 0 else -math.inf


@dataclass
class AuditReport:
    check: str
    domain_class: str = ""
    rows: list[AuditRow] = field(default_factory=list)
    witness: object | None = None

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    @property
    def worst(self) -> AuditRow | None:
        failing = [row for row in self.rows if not row.passed]
        candidates = failing or self.rows
        return min(candidates, key=lambda r: (r.sigma, r.margin), default=None)

    @property
    def violations(self) -> int:
        return sum(not row.passed for row in self.rows)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [f"{self.check} [{self.domain_class}]: {status}, {self.violations} violations"]
        worst = self.worst
        if worst is not None:
            lines.append(
                f"  worst: {worst.label} margin={worst.margin:.6g} stderr={worst.stderr:.3g}"
                + (f" ({worst.detail})" if worst.detail else "")
            )
        if self.witness is not None:
            lines.append(f"  witness: {self.witness}")
        return "\n".join(lines)


def check_margin(
    label: str,
    margin: float,
    stderr: float,
    *,
    scale: float = 1.0,
    lhs: float = 0.0,
    rhs: float = 0.0,
    detail: str = "",
) -> AuditRow:
    """Row that passes when margin >= -(AUDIT_SIGMA * stderr + EXACT_TOL * scale)."""
    passed = margin >= -(AUDIT_SIGMA * stderr + EXACT_TOL * max(1.0, abs(scale)))
    if not passed:
        logger.warning(f"Audit row {label} failed: margin {margin:.6g} (stderr {stderr:.3g})")
    return AuditRow(
        label=label, margin=margin, stderr=stderr, passed=passed, lhs=lhs, rhs=rhs, detail=detail
    )


def reference_shape(name: str) -> Polytope:
    """The reference set by name: "simplex" or "cube"."""
    if name == "simplex":
        return reference_simplex()
    if name == "cube":
        return reference_cube()
    raise ValueError(f"unknown reference set: {name}")


def audit_A1_normalization(model: EnergyModel) -> AuditReport:  # noqa: N802
    """E of the empty domain must be exactly zero."""
    value = model.energy(EmptyDomain(), Quality(samples=1, seed=0)).value
    row = AuditRow(
        label="E(empty)",
        margin=-abs(value),
        stderr=0.0,
        passed=value == 0.0,
        lhs=value,
        detail="exact zero required",
    )
    return AuditReport(check="A1", domain_class="empty", rows=[row])


def audit_A2_stability(  # noqa: N802
    model: EnergyModel, suite: Sequence[Domain], quality: Quality | None = None
) -> AuditReport:
    """
    Check E(Omega) >= -kappa |Omega| on every domain of the suite.

    Args:
        model: Energy model with its declared kappa
        suite: Nonempty list of domains
        quality: Monte Carlo budget

    Returns:
        AuditReport with one row per domain; the detail carries the weak
        margin E + kappa |Omega|_r against the regularized volume
    """
    if not suite:
        raise ValueError("stability audit needs at least one domain")
    quality = quality or Quality.default()
    report = AuditReport(check="A2", domain_class="M")
    for k, domain in enumerate(suite):
        est = model.energy(domain, quality.derive(k))
        vol = volume(domain, quality.samples, quality.seed)
        margin = est.value + model.kappa * vol.value
        stderr = math.hypot(est.stderr, model.kappa * vol.stderr)
        weak = est.value + model.kappa * regularized_volume(domain)
        report.rows.append(
            check_margin(
                domain.describe(),
                margin,
                stderr,
                scale=est.value,
                lhs=est.value,
                rhs=-model.kappa * vol.value,
                detail=f"weak margin {weak:.6g}",
            )
        )
    return report


@dataclass(frozen=True)
class TranslationRow:
    radius: float
    average: float
    stderr: float
    deviation: float


@dataclass
class TranslationAverage:
    """Ball averages of E(Omega + u) / |Omega| for growing radii."""

    domain: str
    rows: list[TranslationRow] = field(default_factory=list)

    @property
    def deviations(self) -> list[float]:
        return [row.deviation for row in self.rows]

    @property
    def terminal(self) -> TranslationRow:
        return self.rows[-1]


def audit_A3_translation_average(  # noqa: N802
    model: EnergyModel,
    omega: Domain,
    L_grid: Sequence[float],  # noqa: N803
    samples: int,
    seed: int,
    translations: int = 64,
) -> TranslationAverage:
    """
    Average E(Omega + u) / |Omega| over u uniform in B(0, L) for each L.

    The same unit-ball draws are scaled to every radius, so deviations between
    radii are not inflated by independent noise.
    """
    radii = list(L_grid)
    if not radii or any(b <= a for a, b in zip(radii, radii[1:], strict=False)):
        raise ValueError(f"L grid must be nonempty and increasing, got {radii}")
    vol = reference_volume(omega, samples, seed)
    if vol <= 0:
        raise GeometryError(f"translation average needs a domain of positive volume, got {vol}")

    rng = generator(seed, STREAM_TRANSLATION, 1)
    directions = rng.standard_normal((translations, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    unit = np.cbrt(rng.random(translations))[:, None] * directions
    inner = Quality(samples=max(1, samples // translations), seed=seed)

    result = TranslationAverage(domain=omega.describe())
    averages = []
    for radius in radii:
        values = [
            model.energy(omega.moved(np.eye(3), 1.0, radius * u), inner.derive(k)).value / vol
            for k, u in enumerate(unit)
        ]
        averages.append(mean_and_stderr(values))
        logger.info(f"A3 average at L={radius}: {averages[-1][0]:.6g}")

    final = averages[-1][0]
    for radius, (avg, se) in zip(radii, averages, strict=True):
        result.rows.append(TranslationRow(radius=radius, average=avg, stderr=se, deviation=abs(avg - final)))
    return result


def _check_containment(omega: Domain, omega_sub: Domain, delta: float, seed: int) -> None:
    """Raise unless sampled points of omega_sub stay farther than delta from the boundary of omega."""
    bbox = omega_sub.bbox
    if bbox.is_degenerate:
        return
    rng = generator(seed, STREAM_SUBSET, 0)
    points = bbox.lower + bbox.extent * rng.random((CONTAINMENT_SAMPLES, 3))
    inside = points[omega_sub.contains(points)]
    if len(inside) == 0:
        return
    sd = omega.signed_distance(inside)
    if np.any(sd >= -delta):
        worst = float(np.max(sd))
        raise ContainmentError(
            f"{omega_sub.describe()} is not inside {omega.describe()} with margin {delta} "
            f"(a point sits at signed distance {worst:.4g})"
        )


def audit_A4_continuity(  # noqa: N802
    model: EnergyModel,
    omega: Domain,
    omega_sub: Domain,
    kappa: float,
    alpha_budget: float,
    quality: Quality | None = None,
    delta: float | None = None,
) -> AuditReport:
    """
    Check E(Omega) <= E(Omega') + kappa |Omega \\ Omega'| + |Omega| alpha_budget.

    Omega' must lie inside Omega at boundary distance greater than delta;
    Omega' = Omega is accepted as the tight case.
    """
    quality = quality or Quality.default()
    margin_delta = get_settings().delta if delta is None else delta
    if omega_sub is not omega:
        _check_containment(omega, omega_sub, margin_delta, quality.seed)

    same = omega_sub is omega
    full = model.energy(omega, quality.derive(0))
    sub = full if same else model.energy(omega_sub, quality.derive(1))
    vol = volume(omega, quality.samples, quality.seed)
    vol_sub = vol if same else volume(omega_sub, quality.samples, quality.seed)
    removed = max(vol.value - vol_sub.value, 0.0)

    rhs = sub.value + kappa * removed + vol.value * alpha_budget
    margin = rhs - full.value
    if same:
        stderr = 0.0
    else:
        stderr = math.sqrt(
            full.stderr**2 + sub.stderr**2 + (kappa * vol.stderr) ** 2 + (kappa * vol_sub.stderr) ** 2
        )
    row = check_margin(
        f"{omega.describe()} vs {omega_sub.describe()}",
        margin,
        stderr,
        scale=full.value,
        lhs=full.value,
        rhs=rhs,
        detail=f"|removed|={removed:.6g}",
    )
    return AuditReport(check="A4", domain_class="R x R'", rows=[row])


def audit_A5_subaverage(  # noqa: N802
    model: EnergyModel,
    omega: Domain,
    ell: float,
    samples: int,
    seed: int,
    alpha: float = 0.0,
    reference: str = "simplex",
) -> AuditReport:
    """
    Compare E(Omega) with the G-average of E(Omega ∩ g(ell S)) / |ell S|.

    Local functionals must give an equality; other models an inequality whose
    measured slack is reported.

    Args:
        model: Energy model
        omega: Domain
        ell: Scale of the reference set (>= 1)
        samples: Monte Carlo samples for each side
        seed: Experiment seed
        alpha: Error budget alpha(ell) applied as in the subaverage inequality
        reference: "simplex" or "cube"

    Returns:
        AuditReport with a single row; margin = E(Omega) - right-hand side
    """
    if ell < 1:
        raise ValueError(f"subaverage audit needs ell >= 1, got {ell}")
    shape = reference_shape(reference).transformed(np.eye(3), ell, np.zeros(3))
    lhs = model.energy(omega, Quality(samples=samples, seed=seed))
    average = model.sliding_average(omega, shape, samples, seed)
    r_volume = regularized_volume(omega) if alpha else 0.0
    rhs = (1.0 - alpha) * average.value - r_volume * alpha
    rhs_se = (1.0 - alpha) * average.stderr
    stderr = math.hypot(lhs.stderr, rhs_se)
    slack = lhs.value - rhs
    report = AuditReport(check="A5", domain_class="M5")
    detail = f"ell={ell:g}, reference={reference}, slack={slack:.6g}"
    report.rows.append(
        check_margin("E >= average", slack, stderr, scale=lhs.value, lhs=lhs.value, rhs=rhs, detail=detail)
    )
    if model.is_local:
        report.rows.append(
            check_margin(
                "E <= average", -slack, stderr, scale=lhs.value, lhs=lhs.value, rhs=rhs, detail=detail
            )
        )
    return report


def _outside_tiles(omega: Domain, frame: TilingFrame, dec: Decomposition) -> np.ndarray:
    """Mask of tiles that certainly miss Omega, by the Lipschitz bound at their centroid."""
    if not dec.tiles:
        return np.zeros(0, dtype=bool)
    cells = np.array([t.cell for t in dec.tiles])
    rots = np.array([t.rot for t in dec.tiles])
    verts = tile_vertices(frame, cells, rots)
    centroids = verts.mean(axis=1)
    radii = np.max(np.linalg.norm(verts - centroids[:, None, :], axis=2), axis=1)
    return omega.signed_distance(centroids) > radii


def audit_A6(  # noqa: N802
    model: EnergyModel,
    omega: Domain,
    frame: TilingFrame,
    samples: int,
    seed: int,
    frames: int = 8,
    budget: float = 0.0,
) -> AuditReport:
    """
    Audit the local decomposition of E over the tiles of a frame.

    Checks that tile energies plus half the pair sum minus s bracket E(Omega),
    that the pair sum averaged over the fundamental cell is not too negative,
    and that tiles missing Omega carry no interaction.
    """
    if model.decomposer is None:
        raise ModelError(f"model not decomposable: {model.name}")
    quality = Quality(samples=samples, seed=seed)
    energy = model.energy(omega, quality)
    vol = reference_volume(omega, samples, seed) if not omega.bbox.is_degenerate else 0.0
    allowance = budget * vol

    tiles = enumerate_intersecting(frame, omega.bbox.inflated(frame.ell))
    dec = decompose(model, omega, frame, tiles)
    total = dec.total
    report = AuditReport(check="A6", domain_class="M6")
    report.rows.append(
        check_margin(
            "lower bound", energy.value - total + allowance, energy.stderr, scale=energy.value,
            lhs=energy.value, rhs=total,
        )
    )
    report.rows.append(
        check_margin(
            "upper bound", total + allowance - energy.value, energy.stderr, scale=energy.value,
            lhs=energy.value, rhs=total,
        )
    )

    pair_totals = []
    tau = model.decomposer.tau(frame.ell)
    for k, moved in enumerate(sample_frames(seed, frames, frame.ell, tau)):
        moved_tiles = enumerate_intersecting(moved, omega.bbox.inflated(moved.ell))
        pair_totals.append(decompose(model, omega, moved, moved_tiles).pair_total)
        logger.debug(f"A6 frame {k}: pair total {pair_totals[-1]:.6g}")
    mean, stderr = mean_and_stderr(pair_totals)
    report.rows.append(
        check_margin(
            "interaction average", mean + allowance, stderr, scale=mean,
            lhs=mean, rhs=-allowance, detail=f"{frames} frames",
        )
    )

    outside = _outside_tiles(omega, frame, dec)
    if np.any(outside):
        rows = dec.tile_rows()[outside]
        energies = np.abs(dec.tile_energies[outside])
        worst = float(max(rows.max(), energies.max()))
        report.rows.append(
            AuditRow(
                label="interaction support",
                margin=-worst,
                stderr=0.0,
                passed=worst == 0.0,
                detail=f"{int(outside.sum())} tiles outside",
            )
        )
    return report

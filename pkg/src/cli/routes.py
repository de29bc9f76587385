# fsforge/src/cli/routes.py
import logging
from typing import Any, Callable, Dict, List, Tuple

import numpy as np

from core.config import Settings
from core.exceptions import FsforgeError, PreconditionFailed, ProblemFileError
from core.io import version_string, write_atomic, write_json
from core.models import StandardReport, pair_key, to_jsonable
from category.models import category_report
from category.service import CategoryService
from category.wallcrossing import WallCrossingService
from floer.models import field_report
from floer.service import FloerService
from flow.models import ConnectionResult, connection_report
from flow.service import FlowService
from landscape.models import CriticalDatum
from landscape.service import LandscapeService
from transport.service import GRADING_CONVENTION, TransportService
from .export import flows_svg, write_heatmap
from .models import FamilyFile, Problem, RunConfig, load_m1_counts, load_m2_tensors

logger = logging.getLogger(__name__)

Payload = Tuple[Dict[str, Any], str]


# ==================== Helpers ====================

def _alpha(config: RunConfig, problem: Problem) -> float:
    return config.alpha if config.alpha is not None else problem.alpha


def _ordered_pairs(order: Tuple[int, ...]) -> List[Tuple[int, int]]:
    """Pairs (x, y) with x before y in the clockwise order."""
    return [(order[a], order[b]) for a in range(len(order)) for b in range(a + 1, len(order))]


def _critical_report(crit: List[CriticalDatum]) -> List[Dict[str, Any]]:
    return [c.model_dump() for c in crit]


def _sample_points(crit: List[CriticalDatum], margin: float, n: int = 15) -> np.ndarray:
    points = np.array([c.point for c in crit])
    radius = 1.5 * (1.0 + float(np.max(np.abs(points))))
    axis = np.linspace(-radius, radius, n)
    grid = (axis[:, None] + 1j * axis[None, :]).ravel()
    distance = np.min(np.abs(grid[:, None] - points[None, :]), axis=1)
    return grid[distance > 10.0 * margin]


# ==================== Commands ====================

def cmd_crit(config: RunConfig, settings: Settings) -> Payload:
    problem = Problem.load(config.problem)
    landscape = LandscapeService(settings)
    crit = landscape.critical_points(problem.function)
    samples = _sample_points(crit, settings.SAMPLE_MARGIN)
    check = landscape.check_gradient_like(problem.function, problem.theta, samples)
    data = {
        "degree": problem.function.degree,
        "critical_points": _critical_report(crit),
        "gradient_like": check.model_dump(),
    }
    return data, f"{len(crit)} critical points"


def cmd_order(config: RunConfig, settings: Settings) -> Payload:
    problem = Problem.load(config.problem)
    landscape = LandscapeService(settings)
    crit = landscape.critical_points(problem.function)
    geometry = landscape.phase_geometry(crit, _alpha(config, problem))
    angles = CategoryService(settings).exceptional_angles([c.value for c in crit])
    data = {
        "critical_points": _critical_report(crit),
        "geometry": geometry.model_dump(),
        "exceptional_angles": [a.model_dump() for a in angles],
    }
    return data, f"order {list(geometry.order)}"


def cmd_flows(config: RunConfig, settings: Settings) -> Payload:
    problem = Problem.load(config.problem)
    F = problem.function
    landscape = LandscapeService(settings)
    flow = FlowService(settings)
    crit = landscape.critical_points(F)
    geometry = landscape.phase_geometry(crit, _alpha(config, problem))
    pairs = _ordered_pairs(geometry.order)

    connections: Dict[str, Any] = {}
    images = []
    total = 0
    for (x, y), outcome in flow.connection_table(F, pairs):
        if isinstance(outcome, ConnectionResult):
            report = connection_report(outcome)
            report["straightness"] = [flow.straightness(f) for f in outcome.flowlines]
            connections[pair_key(x, y)] = report
            images.extend(F.value(f.points) for f in outcome.flowlines)
            total += outcome.count
        else:
            logger.warning(f"connections {x}->{y} failed: {outcome['error']}")
            connections[pair_key(x, y)] = {"source": x, "target": y, "error": outcome}

    svg = flows_svg([c.value for c in crit], pairs, images)
    write_atomic(config.output / "flows.svg", svg)
    data = {
        "critical_points": _critical_report(crit),
        "order": list(geometry.order),
        "connections": connections,
    }
    return data, f"{total} connections over {len(pairs)} pairs"


def cmd_grade(config: RunConfig, settings: Settings) -> Payload:
    problem = Problem.load(config.problem)
    F = problem.function
    landscape = LandscapeService(settings)
    flow = FlowService(settings)
    transport = TransportService(settings)
    crit = landscape.critical_points(F)
    geometry = landscape.phase_geometry(crit, _alpha(config, problem))

    table = []
    for x, y in _ordered_pairs(geometry.order):
        basis = flow.hom_basis(F, geometry.alpha, x, y, crit=crit)
        generators = []
        gradings = []
        for label, flowline in zip(basis.generators, basis.flowlines):
            nondegeneracy = transport.nondegenerate(flowline)
            grading = transport.absolute_grading(flowline, problem.lifts)
            gradings.append(grading)
            generators.append(
                {
                    "label": label,
                    "grading": grading.grading,
                    "action": flowline.action,
                    "nondegenerate": nondegeneracy.nondegenerate,
                    "kernel_dim": nondegeneracy.kernel_dim,
                }
            )
        relative = {
            f"{a},{b}": transport.relative_grading(gradings[a], gradings[b])
            for a in range(len(gradings))
            for b in range(len(gradings))
            if a != b
        }
        table.append({"pair": [x, y], "generators": generators, "relative": relative})

    return {"gradings": table, "convention": GRADING_CONVENTION}, f"graded {len(table)} Hom spaces"


def cmd_floer(config: RunConfig, settings: Settings) -> Payload:
    problem = Problem.load(config.problem)
    F = problem.function
    landscape = LandscapeService(settings)
    flow = FlowService(settings)
    floer = FloerService(settings)
    crit = landscape.critical_points(F)
    geometry = landscape.phase_geometry(crit, _alpha(config, problem))

    pair = config.pair or problem.pair
    if pair is None:
        candidates = _ordered_pairs(geometry.order)
        if not candidates:
            raise PreconditionFailed("no ordered pair of critical points")
        pair = candidates[0]
    basis = flow.hom_basis(F, geometry.alpha, pair[0], pair[1], crit=crit)
    if not basis.flowlines:
        raise PreconditionFailed("Hom space has no flowline generators", pair=list(pair), kind=basis.kind.value)
    a, b = problem.generators or (0, 0)
    if max(a, b) >= len(basis.flowlines) or min(a, b) < 0:
        raise PreconditionFailed("generator index out of range", generators=[a, b], rank=len(basis.flowlines))
    grid = floer.default_grid()
    strip = floer.build_problem(F, basis.theta, basis.flowlines[a], basis.flowlines[b], grid)
    field = floer.solve(strip)

    residual = floer.residual(strip, field)
    write_json(config.output / "field.json", field_report(strip, field))
    write_heatmap(config.output / "residual.png", grid.s, grid.t, np.abs(residual), "|residual|")
    write_heatmap(config.output / "field.png", grid.s, grid.t, np.abs(F.value(field.values)), "|F(u)|")

    data = {
        "pair": list(pair),
        "generators": [a, b],
        "grid": grid.model_dump(),
        "residual_norm": field.residual_norm,
        "iterations": field.iterations,
        "energy": field.energy,
        "energy_identity": floer.energy_identity_check(strip, field).model_dump(),
        "holomorphy": floer.holomorphy_diagnostic(strip, field).model_dump(),
        "rotation": floer.rotation_covariance_check(strip, field).model_dump(),
        "witten_form": floer.witten_form_check(F, basis.theta, rng=np.random.default_rng(settings.SEED)).model_dump(),
        "gmw_energy": floer.gmw_energy(strip, field).model_dump(),
    }
    if problem.truncation:
        data["truncation"] = floer.truncation_study(strip)
    return data, f"solved {pair[0]}->{pair[1]} with |R|={field.residual_norm:.2e}"


def cmd_category(config: RunConfig, settings: Settings) -> Payload:
    problem = Problem.load(config.problem)
    F = problem.function
    landscape = LandscapeService(settings)
    flow = FlowService(settings)
    transport = TransportService(settings)
    floer = FloerService(settings)
    category = CategoryService(settings)
    crit = landscape.critical_points(F)
    geometry = landscape.phase_geometry(crit, _alpha(config, problem))

    supplied = load_m1_counts(config.m1_file) if config.m1_file else {}
    m2 = load_m2_tensors(config.m2_file) if config.m2_file else None

    homs, gradings, estimates, counts = {}, {}, {}, {}
    for x, y in _ordered_pairs(geometry.order):
        basis = flow.hom_basis(F, geometry.alpha, x, y, crit=crit)
        homs[(x, y)] = basis
        counts[(x, y)] = basis.rank
        grades = [transport.absolute_grading(f, problem.lifts).grading for f in basis.flowlines]
        gradings[(x, y)] = grades
        estimates[(x, y)] = floer.m1_estimate(
            F,
            geometry.alpha,
            x,
            y,
            hom=basis,
            gradings=grades,
            supplied_counts=supplied.get((x, y)),
            seed=settings.SEED,
        )

    data = category.assemble(geometry, homs, gradings, estimates, m2)
    verification = category.verify_a_infinity(data, 2 if m2 is not None else 1)
    lattice = category.lattice_from_counts(geometry.order, counts)
    payload = {
        "category": category_report(data),
        "verification": verification.model_dump(),
        "lattice": lattice.model_dump(),
        "exceptional_angles": [a.model_dump() for a in category.exceptional_angles([c.value for c in crit])],
    }
    return payload, f"{len(data.objects)} objects, relations verified"


def cmd_wallcross(config: RunConfig, settings: Settings) -> Payload:
    family_file = FamilyFile.load(config.problem)
    wallcross = WallCrossingService(settings)
    event = wallcross.deform_and_recount(family_file.family, family_file.pair, family_file.t_before, family_file.t_after, family_file.steps)

    def as_pairs(counts: Dict[str, int]) -> Dict[Tuple[int, int], int]:
        return {tuple(int(p) for p in k.split(",")): v for k, v in counts.items()}

    dimensions = CategoryService.hom_dimension_report(as_pairs(event.before_counts), as_pairs(event.recounted_counts))
    data = {"event": event.model_dump(), "passed": event.passed, "hom_dimensions": dimensions}
    return data, "prediction matches recount" if event.passed else "prediction differs from recount"


COMMANDS: Dict[str, Callable[[RunConfig, Settings], Payload]] = {
    "crit": cmd_crit,
    "order": cmd_order,
    "flows": cmd_flows,
    "grade": cmd_grade,
    "floer": cmd_floer,
    "category": cmd_category,
    "wallcross": cmd_wallcross,
}


def execute(config: RunConfig, settings: Settings) -> int:
    """Run one command; the report (or error.json) goes to the output directory."""
    version = version_string()
    try:
        data, message = COMMANDS[config.command](config, settings)
        report = StandardReport(
            success=True,
            message=message,
            data=to_jsonable(data),
            tolerances=settings.tolerance_set(),
            version=version,
        )
        path = write_json(config.output / f"{config.command}.json", report)
        logger.info(f"✅ {config.command}: {message} ({path})")
        return 0
    except FsforgeError as e:
        logger.error(f"❌ {config.command} failed with {e.code}: {e.detail}")
        _write_error(config, settings, version, e.detail, e.to_dict())
        return e.exit_code
    except Exception as e:
        logger.error(f"❌ {config.command} crashed: {e}", exc_info=True)
        error = {"error": type(e).__name__, "message": str(e), "context": {}}
        _write_error(config, settings, version, str(e), error)
        return 1


def _write_error(config: RunConfig, settings: Settings, version: str, message: str, error: Dict[str, Any]) -> None:
    report = StandardReport(
        success=False,
        message=message,
        tolerances=settings.tolerance_set(),
        version=version,
        error=error,
    )
    try:
        write_json(config.output / "error.json", report)
    except ProblemFileError as write_error:
        logger.error(f"❌ could not write error report: {write_error.detail}")

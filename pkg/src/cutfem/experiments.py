"""
Built-in studies for cutfem

Manufactured-solution convergence studies for every problem, the sliver
sweep for extension stability, and the extension property checks. Each case
returns a CaseResult; writing files is left to the CLI.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import sympy

from .analysis import eoc_table, error_norms, stability_ratios
from .extension import (ExtensionOperator, build_extension, default_averaging_rule, interpolate_pi_E,
                        uniform_averaging_rule)
from .femspace import ElementFamily, FESpace
from .fields import Field, X, Y, T
from .forms import (AssembledSystem, CutIntegration, FormParams, assemble_biharmonic, assemble_full_stiffness,
                    assemble_interface, assemble_mass, assemble_poisson, assemble_triharmonic)
from .geometry import LevelSetDomain
from .mesh import ActiveMesh, BackgroundGrid, ShMap, build_active_mesh, build_sh_map
from .solver import ConditionEstimate, estimate_condition, solve
from .timestep import backward_euler_run

logger = logging.getLogger(__name__)

NORMS = ('l2', 'h1', 'h2', 'energy')
# power iteration budget for the condition numbers written to results
CONDITION_ITERATIONS = 5000
CONDITION_RTOL = 1e-6


class ExperimentError(ValueError):
    """Raised for unknown cases or unusable options."""
    pass


@dataclass
class RunOptions:
    """Options of one run; None means the case default."""
    levels: Optional[int] = None
    beta: Optional[float] = None
    gamma: Optional[float] = None
    order: Optional[int] = None
    depth: Optional[int] = None
    eps: Optional[float] = None
    check: bool = False
    large_threshold: float = 0.0
    tau: Optional[float] = None
    final_time: Optional[float] = None
    seed: int = 2024


@dataclass
class LevelResult:
    """One row of results.csv."""
    level: int
    h: float
    nno: int
    dofs_full: int
    dofs_reduced: int
    errors: Dict[str, Optional[float]]
    cond_est: Optional[float] = None
    cond_converged: Optional[bool] = None
    energy_sq: Optional[float] = None
    area_error: Optional[float] = None


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class CaseResult:
    """Rows, EOCs, acceptance checks and extra tables of one case."""
    case: str
    rows: List[LevelResult]
    expected_rates: Dict[str, float]
    checks: List[Check] = field(default_factory=list)
    tables: Dict[str, Tuple[List[str], List[List]]] = field(default_factory=dict)
    metadata: Dict[str, object] = field(default_factory=dict)
    h_label: str = 'h'

    @property
    def eocs(self) -> Dict[str, List[Optional[float]]]:
        """EOC per norm aligned with rows (None on the first row)."""
        if len(self.rows) < 2 or any(b.h >= a.h for a, b in zip(self.rows, self.rows[1:])):
            return {name: [None] * len(self.rows) for name in NORMS}
        table = eoc_table([[row.h] + [row.errors.get(name) for name in NORMS] for row in self.rows])
        return {name: [None] + column for name, column in zip(NORMS, table)}

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)


# -- fields ------------------------------------------------------------------

def _radius(cx: float = 0.0, cy: float = 0.0):
    return sympy.sqrt((X - cx) ** 2 + (Y - cy) ** 2)


def poisson_solution() -> Field:
    return Field(sympy.cos(sympy.pi * _radius()))


def biharmonic_solution(r0: float = 0.5) -> Field:
    return Field(sympy.Float(1e3) * (r0 ** 2 - _radius(0.5, 0.5) ** 2) ** 2 / 64)


def interface_solutions(r0: float = 0.25) -> Tuple[Field, Field]:
    r2 = (X - 0.5) ** 2 + (Y - 0.5) ** 2
    inner = -r2 / 5
    outer = -(r2 / 2 - sympy.Float(r0 ** 2) / 2 + sympy.Float(r0 ** 2) / 5)
    return Field(inner), Field(outer)


def square_solution() -> Field:
    return Field(sympy.Float(1e4) * X ** 3 * Y ** 3 * (X - 1) ** 3 * (Y - 1) ** 3)


def heat_solution() -> Field:
    return Field(sympy.exp(-T) * sympy.cos(sympy.pi * _radius()))


# -- grids -------------------------------------------------------------------

def disc_grid(level: int) -> BackgroundGrid:
    """Grid over the origin-centred disc; the origin is neither a vertex nor a centre.

    Level 0 has 32 cells across so the band no longer dominates the corner
    count and 1/sqrt(NNO) roughly halves per level.
    """
    n = 32 * 2 ** level
    return BackgroundGrid((-0.6 + 0.0137, -0.6 + 0.0071), n, n, 1.2 / n)


def plate_grid(level: int) -> BackgroundGrid:
    n = 8 * 2 ** level
    return BackgroundGrid((-0.1237, -0.1173), n, n, 1.25 / n)


def unit_grid(level: int) -> BackgroundGrid:
    n = 8 * 2 ** level
    return BackgroundGrid((0.0, 0.0), n, n, 1.0 / n)


def square_grid(level: int) -> BackgroundGrid:
    """Grid over (-0.21, 1.1) x (-0.31, 1.1) containing the unit square."""
    return BackgroundGrid.covering((-0.21, -0.31), (1.1, 1.1), 1.41 / (8 * 2 ** level))


def sliver_grid() -> BackgroundGrid:
    """x = 0.5 is a grid line, so the disc r < 0.5 + eps cuts slivers there."""
    h = 1.0 / 20
    return BackgroundGrid((0.5 - 22 * h, -0.5 - 1.63 * h), 25, 24, h)


def family_for(order: int) -> ElementFamily:
    return ElementFamily.lagrange(order) if order <= 2 else ElementFamily.hermite(order)


# -- shared pipeline ---------------------------------------------------------

@dataclass
class Discretization:
    """Active mesh, space, extension and quadrature of one level."""
    active: ActiveMesh
    space: FESpace
    E: ExtensionOperator
    integration: CutIntegration
    sh_map: ShMap


def discretize(grid: BackgroundGrid, domain: LevelSetDomain, family: ElementFamily,
               depth: Optional[int] = None, large_threshold: float = 0.0) -> Discretization:
    active = build_active_mesh(grid, domain, large_threshold=large_threshold, depth=depth or 4)
    space = FESpace.build(active, family)
    sh_map = build_sh_map(active)
    E = build_extension(space, sh_map)
    return Discretization(active, space, E, CutIntegration(space, domain, depth=depth), sh_map)


def _estimate(K) -> ConditionEstimate:
    return estimate_condition(K, iterations=CONDITION_ITERATIONS, rtol=CONDITION_RTOL, strict=False)


def _condition(K) -> Dict[str, object]:
    """LevelResult fields of a condition estimate; unsettled estimates are left blank."""
    estimate = _estimate(K)
    return {'cond_est': estimate.cond if estimate.converged else None, 'cond_converged': estimate.converged}


def _energy_table(result: CaseResult) -> Tuple[List[str], List[List]]:
    """a(e, e) next to its square root per level."""
    eocs = result.eocs['energy']
    rows = [[row.level, row.h, row.energy_sq, row.errors.get('energy'), rate] for row, rate in zip(result.rows, eocs)]
    return ['level', result.h_label, 'energy_sq', 'err_energy', 'eoc_energy'], rows


def _condition_check(result: CaseResult) -> Check:
    unsettled = [row.level for row in result.rows if row.cond_converged is False]
    detail = 'all estimates converged' if not unsettled else f"no convergence at levels {unsettled}"
    return Check('cond_converged', not unsettled, detail)


def _mean_last(values: List[Optional[float]], count: int = 2) -> Optional[float]:
    tail = [v for v in values[1:] if v is not None][-count:]
    return sum(tail) / len(tail) if tail else None


def _rate_check(result: CaseResult, norm: str, target: float, tol: float) -> Check:
    mean = _mean_last(result.eocs[norm])
    ok = mean is not None and abs(mean - target) <= tol
    shown = 'n/a' if mean is None else f"{mean:.3f}"
    return Check(f"eoc_{norm}", ok, f"mean EOC {shown}, expected {target} +- {tol}")


def _monotone_check(result: CaseResult, norm: str) -> Check:
    values = [row.errors.get(norm) for row in result.rows]
    ok = all(a is not None and b is not None and b < a for a, b in zip(values, values[1:]))
    return Check(f"monotone_{norm}", ok, "errors " + ", ".join(f"{v:.3e}" for v in values if v is not None))


def _level_count(options: RunOptions, default: int) -> int:
    levels = default if options.levels is None else options.levels
    if levels < 2:
        raise ExperimentError("need >= 2 levels")
    return levels


def _timed(label: str, level: int, fn: Callable):
    start = time.perf_counter()
    out = fn()
    logger.info("%s level %d done in %.2f s", label, level, time.perf_counter() - start)
    return out


# -- elliptic studies --------------------------------------------------------

@dataclass
class EllipticProblem:
    """A single-domain manufactured-solution study."""
    name: str
    domain: LevelSetDomain
    grid: Callable[[int], BackgroundGrid]
    exact: Field
    load: Field
    assemble: Callable
    energy: str
    default_order: int
    default_levels: int
    default_beta: float
    expected: Callable[[int], Dict[str, float]]


def _solve_level(problem: EllipticProblem, level: int, family: ElementFamily, params: FormParams,
                 options: RunOptions) -> LevelResult:
    disc = discretize(problem.grid(level), problem.domain, family, options.depth, options.large_threshold)
    system = problem.assemble(disc.space, disc.E, problem.domain, params, problem.load, problem.exact,
                              integration=disc.integration)
    u_full = system.expand(solve(system.K, system.b))
    norms = error_norms(u_full, problem.exact, disc.space, problem.domain, energy=problem.energy,
                        integration=disc.integration)
    area = problem.domain.area()
    area_error = None if area is None else abs(disc.integration.measure() - area)
    return LevelResult(level=level, h=disc.active.h, nno=disc.active.nno, dofs_full=disc.space.n_dofs,
                       dofs_reduced=disc.E.n_reduced, errors=norms.as_dict(), energy_sq=norms.energy_squared,
                       area_error=area_error, **_condition(system.K))


def run_elliptic(problem: EllipticProblem, options: RunOptions) -> CaseResult:
    levels = _level_count(options, problem.default_levels)
    order = options.order or problem.default_order
    family = family_for(order)
    params = FormParams(beta=options.beta or problem.default_beta, gamma=options.gamma or 1.0)
    rows = [_timed(problem.name, level, lambda level=level: _solve_level(problem, level, family, params, options))
            for level in range(levels)]
    result = CaseResult(problem.name, rows, problem.expected(order))
    result.metadata.update(element=family.name, beta=params.beta, gamma=params.gamma)
    area_errors = [row.area_error for row in rows if row.area_error is not None]
    if area_errors:
        result.metadata['max_area_error'] = max(area_errors)
    result.tables['energy.csv'] = _energy_table(result)
    result.checks.append(_condition_check(result))
    return result


def _lagrange_rates(order: int) -> Dict[str, float]:
    return {'l2': order + 1.0, 'h1': float(order), 'energy': float(order)}


def _smooth_rates(order: int, energy_order: int) -> Dict[str, float]:
    return {'l2': order + 1.0, 'h1': float(order), 'h2': order - 1.0, 'energy': float(order + 1 - energy_order)}


def poisson_problem() -> EllipticProblem:
    exact = poisson_solution()
    return EllipticProblem('poisson', LevelSetDomain.circle((0.0, 0.0), 0.5), disc_grid, exact,
                           -exact.laplacian(), assemble_poisson, 'grad', 2, 4, 100.0,
                           lambda k: _smooth_rates(k, 1) if k > 2 else _lagrange_rates(k))


def biharmonic_problem() -> EllipticProblem:
    exact = biharmonic_solution()
    return EllipticProblem('biharmonic', LevelSetDomain.circle((0.5, 0.5), 0.5), plate_grid, exact,
                           Field.constant(1e3), assemble_biharmonic, 'lap', 3, 4, 100.0,
                           lambda k: _smooth_rates(k, 2))


def _square_problem(name: str, assemble, energy: str, energy_order: int, sign: int) -> EllipticProblem:
    exact = square_solution()
    load = exact
    for _ in range(energy_order):
        load = load.laplacian()
    return EllipticProblem(name, LevelSetDomain.axis_box((0.0, 0.0), (1.0, 1.0)), square_grid, exact,
                           sign * load, assemble, energy, 5, 3, 1e3,
                           lambda k: _smooth_rates(k, energy_order))


def triharmonic_problem() -> EllipticProblem:
    return _square_problem('triharmonic', assemble_triharmonic, 'grad_lap', 3, -1)


def square_poisson_problem() -> EllipticProblem:
    return _square_problem('square-poisson', assemble_poisson, 'grad', 1, -1)


def square_biharmonic_problem() -> EllipticProblem:
    return _square_problem('square-biharmonic', assemble_biharmonic, 'lap', 2, 1)


def run_poisson(options: RunOptions) -> CaseResult:
    result = run_elliptic(poisson_problem(), options)
    result.checks += [_rate_check(result, 'l2', 3.0, 0.4), _rate_check(result, 'h1', 2.0, 0.4)]
    return result


def run_biharmonic(options: RunOptions) -> CaseResult:
    result = run_elliptic(biharmonic_problem(), options)
    result.checks += [_rate_check(result, 'l2', 4.0, 0.5), _rate_check(result, 'h1', 3.0, 0.5),
                      _rate_check(result, 'h2', 2.0, 0.5)]
    return result


def _run_square(problem: EllipticProblem, options: RunOptions) -> CaseResult:
    result = run_elliptic(problem, options)
    energy = result.eocs['energy'][-1]
    result.checks += [
        Check('eoc_energy', energy is not None and energy >= 2.5,
              f"last energy EOC {'n/a' if energy is None else f'{energy:.3f}'}, expected >= 2.5"),
        _monotone_check(result, 'energy'),
        _monotone_check(result, 'l2'),
    ]
    return result


def run_triharmonic(options: RunOptions) -> CaseResult:
    return _run_square(triharmonic_problem(), options)


def run_square_poisson(options: RunOptions) -> CaseResult:
    return _run_square(square_poisson_problem(), options)


def run_square_biharmonic(options: RunOptions) -> CaseResult:
    return _run_square(square_biharmonic_problem(), options)


# -- interface ---------------------------------------------------------------

def interface_domains(r0: float = 0.25) -> Tuple[LevelSetDomain, LevelSetDomain]:
    inner = LevelSetDomain.circle((0.5, 0.5), r0)
    return inner, inner.complement()


def _interface_level(level: int, family: ElementFamily, params: FormParams, options: RunOptions) -> LevelResult:
    grid = unit_grid(level)
    domains = interface_domains()
    exact = interface_solutions()
    discs = [discretize(grid, d, family, options.depth) for d in domains]
    system = assemble_interface([d.space for d in discs], [d.E for d in discs], domains, params,
                                f=4.0, g=exact[1], integrations=[d.integration for d in discs])
    full = system.expand(solve(system.K, system.b))
    squares = {name: 0.0 for name in NORMS}
    for disc, domain, u, A, piece in zip(discs, domains, exact, (params.A1, params.A2), system.split(full)):
        norms = error_norms(piece, u, disc.space, domain, energy='grad', coefficient=A,
                            integration=disc.integration)
        for name, value in norms.as_dict().items():
            if value is not None:
                squares[name] += value ** 2
    errors = {name: math.sqrt(squares[name]) for name in ('l2', 'h1', 'energy')}
    errors['h2'] = None
    nno = len(np.unique(grid.corner_vertices(np.arange(grid.n_cells))))
    return LevelResult(level=level, h=1.0 / math.sqrt(nno), nno=nno,
                       dofs_full=sum(d.space.n_dofs for d in discs),
                       dofs_reduced=system.size, errors=errors, energy_sq=squares['energy'],
                       **_condition(system.K))


def run_interface(options: RunOptions) -> CaseResult:
    levels = _level_count(options, 4)
    order = options.order or 1
    family = family_for(order)
    params = FormParams(beta=options.beta or 10.0, A1=5.0 * np.eye(2), A2=2.0 * np.eye(2))
    rows = [_timed('interface', level, lambda level=level: _interface_level(level, family, params, options))
            for level in range(levels)]
    result = CaseResult('interface', rows, _lagrange_rates(order))
    result.metadata.update(element=family.name, beta=params.beta, kappa='area')
    result.checks += [_rate_check(result, 'l2', order + 1.0, 0.4), _rate_check(result, 'h1', float(order), 0.4)]
    result.tables['energy.csv'] = _energy_table(result)
    result.checks.append(_condition_check(result))
    return result


# -- heat --------------------------------------------------------------------

def run_heat(options: RunOptions) -> CaseResult:
    """Final-time errors under tau-halving on a fixed fine grid; the h column holds tau."""
    levels = _level_count(options, 4)
    family = family_for(options.order or 2)
    params = FormParams(beta=options.beta or 100.0)
    tau0 = options.tau or 0.1
    final_time = options.final_time or 0.4
    domain = LevelSetDomain.circle((0.0, 0.0), 0.5)
    exact = heat_solution()
    load = exact.diff(rt=1) - exact.laplacian()
    disc = discretize(disc_grid(0), domain, family, options.depth)
    rows = []
    for level in range(levels):
        tau = tau0 / 2 ** level
        trajectory = _timed('heat', level, lambda tau=tau: backward_euler_run(
            disc.space, disc.E, domain, params, load, exact, tau, final_time, g=exact,
            integration=disc.integration))
        u_full = disc.E.matrix @ trajectory.final
        norms = error_norms(u_full, exact.at(final_time), disc.space, domain, energy='grad',
                            integration=disc.integration)
        rows.append(LevelResult(level=level, h=tau, nno=disc.active.nno, dofs_full=disc.space.n_dofs,
                                dofs_reduced=disc.E.n_reduced, errors=norms.as_dict()))
    result = CaseResult('heat', rows, {'l2': 1.0, 'h1': 1.0}, h_label='tau')
    result.metadata.update(element=family.name, beta=params.beta, final_time=final_time, mesh_h=disc.active.h)
    last = result.eocs['l2'][-1]
    ratio = None if last is None else 2.0 ** last
    result.checks.append(Check('tau_halving', ratio is not None and 1.6 <= ratio <= 2.4,
                               f"last error ratio {'n/a' if ratio is None else f'{ratio:.3f}'}, expected 2 +- 20%"))
    return result


# -- sliver sweep ------------------------------------------------------------

def run_sliver(options: RunOptions) -> CaseResult:
    """Conditioning and extension stability on near-degenerate cuts."""
    smallest = options.eps if options.eps is not None else 1e-8
    sweep = [0.0, 1e-3, 1e-6, smallest]
    family = family_for(options.order or 2)
    params = FormParams(beta=options.beta or 100.0)
    exact = poisson_solution()
    grid = sliver_grid()
    rows = []
    table = []
    stability = []
    full_cond = []
    reduced_cond = []
    settled = []
    for index, eps in enumerate(sweep):
        domain = LevelSetDomain.circle((0.0, 0.0), 0.5 + eps)
        disc = discretize(grid, domain, family, options.depth)
        sh_map = disc.sh_map
        system = assemble_poisson(disc.space, disc.E, domain, params, -exact.laplacian(), exact,
                                  integration=disc.integration)
        u_full = system.expand(solve(system.K, system.b))
        norms = error_norms(u_full, exact, disc.space, domain, energy='grad', integration=disc.integration)
        reduced_estimate = _estimate(system.K)
        full_estimate = _estimate(assemble_full_stiffness(disc.space, domain, params, disc.integration))
        mass = _estimate(assemble_mass(disc.space, disc.E, domain, disc.integration))
        cond_reduced = reduced_estimate.cond
        cond_full = full_estimate.cond
        settled.append(reduced_estimate.converged and full_estimate.converged)
        ratios = stability_ratios(disc.space, disc.E, samples=50, seed=options.seed).max(axis=0)
        rows.append(LevelResult(level=index, h=disc.active.h, nno=disc.active.nno, dofs_full=disc.space.n_dofs,
                                dofs_reduced=disc.E.n_reduced, errors=norms.as_dict(),
                                cond_est=cond_reduced if reduced_estimate.converged else None,
                                cond_converged=reduced_estimate.converged, energy_sq=norms.energy_squared))
        table.append([eps, disc.E.n_reduced, cond_reduced, cond_full, mass.lambda_min if mass.converged else None,
                      sh_map.max_diameter_ratio] + list(ratios))
        stability.append(float(ratios.max()))
        full_cond.append(cond_full)
        reduced_cond.append(cond_reduced)
        logger.info("sliver eps=%g: cond reduced %.3e, cond full %.3e", eps, cond_reduced, cond_full)

    orders = len(table[0]) - 6
    header = ['eps', 'dofs_reduced', 'cond_reduced', 'cond_full', 'lambda_min_mass', 'max_diameter_ratio']
    header += [f'stability_j{j}' for j in range(orders)]
    result = CaseResult('sliver', rows, {})
    result.tables['sliver.csv'] = (header, table)
    result.metadata.update(element=family.name, beta=params.beta, sweep=' '.join(f'{e:g}' for e in sweep))

    spread = max(reduced_cond) / min(reduced_cond)
    result.checks.append(Check('cond_spread', spread < 10.0, f"cond(K_red) spread {spread:.3f}, expected < 10"))
    worst = max(stability[1:])
    result.checks.append(Check('stability', worst <= 2.0 * stability[0],
                               f"max sliver ratio {worst:.3f} vs generic {stability[0]:.3f}, expected <= 2x"))
    growth = max(full_cond[1:]) / full_cond[0]
    result.checks.append(Check('full_cond_growth', growth > 1e3,
                               f"unreduced cond growth {growth:.3e}, expected > 1e3"))
    result.checks.append(Check('cond_converged', all(settled),
                               f"estimates settled for {sum(settled)} of {len(settled)} sweep points"))
    return result


# -- extension properties ----------------------------------------------------

def reproduction_error(space: FESpace, E: ExtensionOperator, rng, trials: int = 20,
                       scale: float = 0.6) -> Tuple[float, float]:
    """Largest errors of E applied to the interior DOFs of random polynomials.

    Returns (relative, normwise): the max-norm error over max |dofs(p)|, and
    over ||E|| max |dofs_I(p)| + max |dofs(p)|, the size of the terms E sums.
    """
    k = space.family.degree
    norm_E = float(abs(E.matrix).sum(axis=1).max())
    relative = normwise = 0.0
    for _ in range(trials):
        p = Field.polynomial(rng.uniform(-1.0, 1.0, (k + 1, k + 1)), scale=scale)
        dofs = space.interpolate(p)
        interior = dofs[E.interior_dofs]
        error = float(np.abs(E.matrix @ interior - dofs).max())
        relative = max(relative, error / np.abs(dofs).max())
        normwise = max(normwise, error / (norm_E * np.abs(interior).max() + np.abs(dofs).max()))
    return relative, normwise


def run_extension_props(options: RunOptions) -> CaseResult:
    """Polynomial reproduction for every element and interpolation rates of pi_h^E."""
    levels = _level_count(options, 4)
    rng = np.random.default_rng(options.seed)
    domain = LevelSetDomain.circle((0.0, 0.0), 0.5)
    reproduction = []
    checks = []
    for family in (ElementFamily.lagrange(1), ElementFamily.lagrange(2),
                   ElementFamily.hermite(3), ElementFamily.hermite(5)):
        active = build_active_mesh(disc_grid(0), domain)
        space = FESpace.build(active, family)
        sh_map = build_sh_map(active)
        for rule in (default_averaging_rule(space, sh_map), uniform_averaging_rule(space)):
            E = build_extension(space, sh_map, rule)
            relative, normwise = reproduction_error(space, E, rng)
            reproduction.append([family.name, rule.name, 20, relative, normwise])
            checks.append(Check(f"reproduction_{family.name}_{rule.name}", normwise <= 1e-12,
                                f"normwise error {normwise:.3e}, relative {relative:.3e}"))

    exact = poisson_solution()
    families = [family_for(options.order)] if options.order else [ElementFamily.lagrange(2), ElementFamily.hermite(3)]
    interpolation = []
    primary = None
    for family in families:
        rows = []
        for level in range(levels):
            disc = discretize(disc_grid(level), domain, family, options.depth)
            _, full = interpolate_pi_E(exact, disc.space, disc.E)
            norms = error_norms(full, exact, disc.space, domain, integration=disc.integration)
            rows.append(LevelResult(level=level, h=disc.active.h, nno=disc.active.nno, dofs_full=disc.space.n_dofs,
                                    dofs_reduced=disc.E.n_reduced, errors=norms.as_dict()))
        study = CaseResult('extension-props', rows, {'l2': family.degree + 1.0, 'h1': float(family.degree)})
        checks += [_rate_check(study, 'l2', family.degree + 1.0, 0.4), _rate_check(study, 'h1', float(family.degree), 0.4)]
        checks[-2].name += f"_{family.name}"
        checks[-1].name += f"_{family.name}"
        for row, l2_rate, h1_rate in zip(rows, study.eocs['l2'], study.eocs['h1']):
            interpolation.append([family.name, row.level, row.h, row.errors['l2'], row.errors['h1'], l2_rate, h1_rate])
        if primary is None:
            primary = study

    primary.checks = checks
    primary.tables['reproduction.csv'] = (['element', 'rule', 'trials', 'max_rel_error', 'max_normwise_error'],
                                          reproduction)
    primary.tables['interpolation.csv'] = (['element', 'level', 'h', 'err_l2', 'err_h1', 'eoc_l2', 'eoc_h1'],
                                           interpolation)
    primary.metadata.update(elements=' '.join(f.name for f in families))
    return primary


CASES: Dict[str, Callable[[RunOptions], CaseResult]] = {
    'poisson': run_poisson,
    'interface': run_interface,
    'biharmonic': run_biharmonic,
    'triharmonic': run_triharmonic,
    'heat': run_heat,
    'sliver': run_sliver,
    'extension-props': run_extension_props,
    'square-poisson': run_square_poisson,
    'square-biharmonic': run_square_biharmonic,
}


def run_case(case: str, options: RunOptions) -> CaseResult:
    runner = CASES.get(case)
    if runner is None:
        raise ExperimentError(f"Unknown case '{case}' (choose from {', '.join(CASES)})")
    return runner(options)

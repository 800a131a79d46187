#!/usr/bin/env python3
"""
CLI for the Markov kernel information-geometry toolkit.
Every command prints a deterministic JSON (or CSV) result envelope.
"""
import asyncio
import functools
import logging
import sys
import time
from pathlib import Path

import click

from src.config import settings
from src.documents import dumps, file_digest, to_csv
from src.errors import InfoGeoError

INPUT = click.Path(exists=True, dir_okay=False, path_type=Path)


class NumberList(click.ParamType):
    """Comma-separated numbers, e.g. `0.5,-1,2`."""
    name = "numbers"

    def __init__(self, cast=float):
        self.cast = cast

    def convert(self, value, param, ctx):
        if isinstance(value, (list, tuple)):
            return [self.cast(v) for v in value]
        try:
            return [self.cast(part) for part in str(value).split(",") if part.strip()]
        except ValueError:
            self.fail(f"{value!r} is not a comma-separated list of numbers", param, ctx)


FLOATS = NumberList(float)
INTS = NumberList(int)
LOG_LEVELS = click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'], case_sensitive=False)


def emits_envelope(command):
    """
    Adds --output/--format/--timing and wraps the command result in an envelope.

    The wrapped function returns (inputs, result, diagnostics); domain errors
    are printed as {"error": {...}} with exit status 1.
    """
    @click.option('--timing', is_flag=True, help='Include wall-clock seconds in the envelope')
    @click.option('--format', 'fmt', type=click.Choice(['json', 'csv']), default='json', help='Output format')
    @click.option('--output', '-o', type=click.Path(dir_okay=False, path_type=Path), default=None,
                  help='Write to a file instead of stdout')
    @functools.wraps(command)
    def wrapper(output, fmt, timing, **kwargs):
        ctx = click.get_current_context()
        started = time.perf_counter()
        try:
            inputs, result, diagnostics = command(**kwargs)
            envelope = {
                "subcommand": ctx.info_name,
                "inputs": {name: file_digest(path) for name, path in inputs.items() if path is not None},
                "result": result,
                "diagnostics": diagnostics,
            }
        except InfoGeoError as exc:
            logging.getLogger(__name__).debug(f"{ctx.info_name} failed: {exc.code}")
            click.echo(dumps({"error": exc.to_dict()}), nl=False)
            ctx.exit(1)

        if timing:
            envelope["wall_clock_seconds"] = time.perf_counter() - started
        text = dumps(envelope) if fmt == 'json' else to_csv(envelope)
        if output is None:
            click.echo(text, nl=False)
        else:
            output.write_text(text, encoding="utf-8")

        if isinstance(result, dict) and result.get("passed") is False:
            ctx.exit(1)

    return wrapper


def _potential(graph, values) -> dict:
    return {state: float(v) for state, v in zip(graph.states, values)}


@click.group()
@click.option('--log-level', type=LOG_LEVELS, default=None, help='Logging level (defaults to settings.log_level)')
def cli(log_level):
    """Information geometry of Markov kernels on strongly connected graphs."""
    logging.basicConfig(
        level=(log_level or settings.log_level).upper(),
        format='%(asctime)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )


@cli.command()
@emits_envelope
@click.argument('function_file', type=INPUT)
@click.option('--map', 'mapping', type=click.Choice(['gamma', 'delta']), default='gamma',
              help='gamma: positive f -> kernel; delta: exp then gamma')
def normalize(function_file, mapping):
    """Normalize an edge function into a Markov kernel."""
    from src.documents import EdgeFunctionDocument, kernel_document, load_document
    from src.pf_normalizer import delta_map, gamma_normalize

    f = load_document(function_file, EdgeFunctionDocument).to_edge_function()
    normalized = gamma_normalize(f) if mapping == 'gamma' else delta_map(f)
    result = {
        "map": mapping,
        "kernel": kernel_document(normalized.kernel),
        "log_perron": normalized.log_perron,
        "perron_root": normalized.perron_root,
        "potential": _potential(f.graph, normalized.potential.values),
    }
    diagnostics = {"iterations": normalized.iterations, "residual": normalized.residual}
    return {"function": function_file}, result, diagnostics


@cli.command()
@emits_envelope
@click.argument('kernel_file', type=INPUT)
def stationary(kernel_file):
    """Stationary distribution of a kernel."""
    import numpy as np
    from src.documents import KernelDocument, distribution_document, load_document
    from src.kernel_graph import stationary_distribution

    w = load_document(kernel_file, KernelDocument).to_kernel()
    p = stationary_distribution(w)
    residual = float(np.max(np.abs(p.probs @ w.matrix - p.probs)))
    return {"kernel": kernel_file}, distribution_document(w.graph, p), {"residual": residual}


@cli.command('edge-measure')
@emits_envelope
@click.argument('kernel_file', type=INPUT)
def edge_measure_command(kernel_file):
    """Stationary edge measure p(x) w(y|x)."""
    from src.documents import KernelDocument, load_document, measure_document
    from src.kernel_graph import edge_measure

    w = load_document(kernel_file, KernelDocument).to_kernel()
    p2 = edge_measure(w)
    return {"kernel": kernel_file}, measure_document(p2), {"shift_residual": p2.shift_residual()}


@cli.command()
@emits_envelope
@click.argument('function_file', type=INPUT)
def decompose(function_file):
    """Split an edge function into shift- and anti-shift-invariant parts."""
    from src.documents import EdgeFunctionDocument, function_document, load_document
    from src.function_space import decompose as split, shift_residual, subspace_dimensions

    f = load_document(function_file, EdgeFunctionDocument).to_edge_function()
    parts = split(f)
    dims = subspace_dimensions(f.graph)
    result = {
        "shift_part": function_document(parts.shift_part),
        "anti_part": function_document(parts.anti_part),
        "potential": _potential(f.graph, parts.potential.values),
        "dimensions": {"dim_fs": dims.dim_fs, "dim_fa": dims.dim_fa},
    }
    return {"function": function_file}, result, {"shift_residual": shift_residual(parts.shift_part)}


@cli.command()
@emits_envelope
@click.argument('graph_file', type=INPUT)
@click.option('--kind', type=click.Choice(['full', 'indicator']), default='full',
              help='full: W(X, E) itself; indicator: closed-form family of a complete graph')
def family(graph_file, kind):
    """Build a family document for a graph."""
    from src.documents import GraphDocument, family_document, load_document
    from src.exp_family import complete_graph_family, effective_dimension, full_family

    graph = load_document(graph_file, GraphDocument).to_graph()
    built = full_family(graph) if kind == 'full' else complete_graph_family(graph)
    diagnostics = {"dimension": built.dim, "effective_dimension": effective_dimension(built)}
    return {"graph": graph_file}, family_document(built), diagnostics


@cli.command('eval-family')
@emits_envelope
@click.argument('family_file', type=INPUT)
@click.option('--theta', type=FLOATS, required=True, help='Natural parameter, comma-separated')
def eval_family(family_file, theta):
    """Evaluate w_theta, psi(theta) and K_theta."""
    from src.documents import FamilyDocument, kernel_document, load_document
    from src.exp_family import effective_dimension, kernel_at

    family = load_document(family_file, FamilyDocument).to_family()
    point = kernel_at(family, theta)
    result = {
        "theta": point.theta,
        "kernel": kernel_document(point.kernel),
        "psi": point.psi,
        "potential": _potential(family.graph, point.kappa.values),
    }
    diagnostics = {"dimension": family.dim, "effective_dimension": effective_dimension(family)}
    return {"family": family_file}, result, diagnostics


@cli.command()
@emits_envelope
@click.argument('family_file', type=INPUT)
@click.option('--theta', type=FLOATS, required=True, help='Natural parameter, comma-separated')
def fisher(family_file, theta):
    """Fisher metric by the score form and by the Hessian of psi."""
    import numpy as np
    from src.documents import FamilyDocument, load_document
    from src.dual_geometry import fisher_direct, fisher_hessian

    family = load_document(family_file, FamilyDocument).to_family()
    direct = fisher_direct(family, theta)
    hessian = fisher_hessian(family, theta)
    discrepancy = float(np.max(np.abs(direct.g - hessian.g))) if direct.g.size else 0.0
    result = {"direct": direct.g, "hessian": hessian.g, "discrepancy": discrepancy}
    diagnostics = {
        "min_eigenvalue": direct.min_eigenvalue,
        "degenerate": direct.is_degenerate,
    }
    return {"family": family_file}, result, diagnostics


@cli.command()
@emits_envelope
@click.argument('family_file', type=INPUT)
@click.option('--theta', type=FLOATS, default=None, help='Map theta to eta')
@click.option('--eta', type=FLOATS, default=None, help='Map eta to theta (Newton)')
@click.option('--theta0', type=FLOATS, default=None, help='Newton initial guess (default 0)')
@click.option('--tol', type=float, default=None, help='Newton moment tolerance')
def coords(family_file, theta, eta, theta0, tol):
    """Convert between natural (theta) and expectation (eta) coordinates."""
    from src.documents import FamilyDocument, load_document
    from src.dual_geometry import dual_potential, expectation_param, solve_theta
    from src.exp_family import log_partition

    if (theta is None) == (eta is None):
        raise click.UsageError("give exactly one of --theta or --eta")

    family = load_document(family_file, FamilyDocument).to_family()
    diagnostics = {}
    if eta is not None:
        solved = solve_theta(family, eta, theta0=theta0, tol=tol)
        theta = solved.theta
        diagnostics = {"iterations": solved.iterations, "residual": solved.residual}
    result = {
        "theta": theta,
        "eta": expectation_param(family, theta),
        "psi": log_partition(family, theta),
        "phi": dual_potential(family, theta),
    }
    return {"family": family_file}, result, diagnostics


@cli.command()
@emits_envelope
@click.argument('w0_file', type=INPUT)
@click.argument('w1_file', type=INPUT)
@click.option('--kind', type=click.Choice(['e', 'm']), required=True, help='e- or m-geodesic')
@click.option('--t', 't', type=float, required=True, help='Geodesic parameter')
def geodesic(w0_file, w1_file, kind, t):
    """Point at parameter t on the e- or m-geodesic from w0 to w1."""
    from src.documents import KernelDocument, kernel_document, load_document
    from src.geodesy import GeodesicSpec

    w0 = load_document(w0_file, KernelDocument).to_kernel()
    w1 = load_document(w1_file, KernelDocument).to_kernel()
    point = GeodesicSpec(w0, w1, kind).point(t)
    return {"w0": w0_file, "w1": w1_file}, {"kind": kind, "t": t, "kernel": kernel_document(point)}, {}


@cli.command()
@emits_envelope
@click.argument('w1_file', type=INPUT)
@click.argument('w2_file', type=INPUT)
@click.option('--family', 'family_file', type=INPUT, default=None, help='Family for the Bregman cross-check')
@click.option('--form', type=click.Choice(['direct', 'bregman']), default='direct', help='Reported form')
def divergence(w1_file, w2_file, family_file, form):
    """Canonical divergence D(w1 | w2) (the KL divergence rate)."""
    from src.documents import FamilyDocument, KernelDocument, load_document
    from src.geodesy import divergence as canonical_divergence

    w1 = load_document(w1_file, KernelDocument).to_kernel()
    w2 = load_document(w2_file, KernelDocument).to_kernel()
    family = load_document(family_file, FamilyDocument).to_family() if family_file else None
    report = canonical_divergence(w1, w2, family=family, form=form)
    diagnostics = {} if report.residual is None else {"residual": report.residual}
    inputs = {"w1": w1_file, "w2": w2_file, "family": family_file}
    return inputs, {"value": report.value, "form": report.form}, diagnostics


@cli.command('kl-joint')
@emits_envelope
@click.argument('w1_file', type=INPUT)
@click.argument('w2_file', type=INPUT)
@click.option('--n', 'n', type=click.IntRange(min=1), required=True, help='Path length')
@click.option('--q1', 'q1_file', type=INPUT, default=None, help='Initial law of chain 1 (default uniform)')
@click.option('--q2', 'q2_file', type=INPUT, default=None, help='Initial law of chain 2 (default uniform)')
def kl_joint_command(w1_file, w2_file, n, q1_file, q2_file):
    """KL divergence between the n-step joint laws of two chains."""
    from src.documents import DistributionDocument, KernelDocument, load_document
    from src.geodesy import divergence_rate, kl_joint
    from src.kernel_graph import Distribution

    w1 = load_document(w1_file, KernelDocument).to_kernel()
    w2 = load_document(w2_file, KernelDocument).to_kernel()

    def initial(path):
        if path is None:
            return Distribution.uniform(w1.graph.n_states)
        return load_document(path, DistributionDocument).to_distribution(w1.graph)

    value = kl_joint(w1, w2, initial(q1_file), initial(q2_file), n)
    rate = divergence_rate(w1, w2)
    result = {"n": n, "value": value, "per_step": value / n, "rate": rate}
    inputs = {"w1": w1_file, "w2": w2_file, "q1": q1_file, "q2": q2_file}
    return inputs, result, {"rate_gap": abs(value / n - rate)}


@cli.command()
@emits_envelope
@click.argument('family_file', type=INPUT)
@click.option('--trajectory', 'trajectory_file', type=INPUT, default=None, help='One state per line')
@click.option('--edge-measure', 'measure_file', type=INPUT, default=None, help='Target edge measure document')
@click.option('--theta0', type=FLOATS, default=None, help='Newton initial guess (default 0)')
def fit(family_file, trajectory_file, measure_file, theta0):
    """Maximum-likelihood (moment-matching) fit of a family."""
    from src.documents import (
        FamilyDocument, KernelDocument, kernel_document, load_document, measure_document,
        read_trajectory,
    )
    from src.dual_geometry import expectation_param
    from src.exp_family import kernel_at
    from src.geodesy import empirical_edge_measure, fit_mle

    if (trajectory_file is None) == (measure_file is None):
        raise click.UsageError("give exactly one of --trajectory or --edge-measure")

    family = load_document(family_file, FamilyDocument).to_family()
    diagnostics = {}
    if trajectory_file is not None:
        trajectory = read_trajectory(trajectory_file)
        target = empirical_edge_measure(family.graph, trajectory)
        diagnostics["length"] = len(trajectory)
    else:
        target = load_document(measure_file, KernelDocument).to_edge_measure()
    diagnostics["shift_residual"] = target.shift_residual()

    theta = fit_mle(family, target, theta0=theta0)
    result = {
        "theta": theta,
        "eta": expectation_param(family, theta),
        "kernel": kernel_document(kernel_at(family, theta).kernel),
        "target": measure_document(target),
    }
    inputs = {"family": family_file, "trajectory": trajectory_file, "edge_measure": measure_file}
    return inputs, result, diagnostics


@cli.command()
@emits_envelope
@click.option('--seed', type=int, default=0, help='Seed for the random instances')
@click.option('--sizes', type=INTS, default='2,4,6', help='State counts, comma-separated')
@click.option('--workers', type=click.IntRange(min=1), default=None, help='Worker threads')
@click.option('--suite', 'suites', multiple=True, help='Run only these suites (repeatable)')
def verify(seed, sizes, workers, suites):
    """Run the invariant suites on seeded random instances."""
    from src.verification import run_verification

    report = asyncio.run(run_verification(seed, sizes, workers=workers, suites=suites or None))
    timing = click.get_current_context().params.get('timing', False)
    diagnostics = {
        "checks": sum(s.checks for s in report.suites),
        "failures": sum(s.failures for s in report.suites),
    }
    return {}, report.to_dict(timing=timing), diagnostics


if __name__ == "__main__":
    cli()

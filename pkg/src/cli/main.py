import logging
import os
import sys
import time
from typing import List, Optional, Tuple

import click
from pydantic import ValidationError

# Add the project root to the path so `python src/cli/main.py` works like the module form
current_dir = os.path.dirname(os.path.abspath(__file__))
project_root = os.path.join(current_dir, '..', '..')
if project_root not in sys.path:
    sys.path.append(project_root)

from config.settings import APP_NAME, PORTRAIT_DIR, PORTRAIT_SUFFIX, Config, get_log_level, load_config
from src.core.errors import TreemonoError
from src.core.model_group import ModelGroup
from src.core.notation import format_machine
from src.core.portrait import Role, disjoint_orbit_family, export_dot, export_json, parse_portrait, synthesize_model, validate_Y
from src.core.reports import ExperimentReport, ReportStore, report_to_text
from src.core import verify

logger = logging.getLogger(APP_NAME)

THEOREMS = (
    "invgen", "simconj", "branch", "torsion", "filtration", "conjugacy-oracle",
    "counterexample", "not-closed", "replication", "forms", "frame",
)
DEFAULT_LEVELS = {"counterexample": 1, "not-closed": 2, "conjugacy-oracle": 2, "forms": 2, "frame": 2}
DEFAULT_TRIALS = {"invgen": 100, "simconj": 25, "conjugacy-oracle": 200, "forms": 20, "frame": 20}


def setup_logging(verbose: bool) -> None:
    """Root logger on stderr so stdout only ever carries the report"""
    level = logging.DEBUG if verbose else getattr(logging, get_log_level(), logging.WARNING)
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def read_portrait_text(ref: str) -> str:
    """File path, '-' for stdin, or the name of a bundled portrait such as ``two-fixed``"""
    if ref == "-":
        return click.get_text_stream("stdin").read()
    bundled = os.path.join(PORTRAIT_DIR, ref + PORTRAIT_SUFFIX)
    path = ref if os.path.exists(ref) else bundled
    if not os.path.exists(path):
        raise click.BadParameter(f"no portrait file or bundled portrait named {ref!r}")
    with open(path, 'r', encoding='utf-8') as f:
        return f.read()


def parse_pairs(value: Optional[str]) -> Optional[List[Tuple[int, int]]]:
    """``S,M:S,M`` -> [(S, M), (S, M)]"""
    if value is None:
        return None
    try:
        pairs = [tuple(int(x) for x in chunk.split(",")) for chunk in value.split(":")]
    except ValueError:
        raise click.BadParameter(f"expected S,M:S,M, got {value!r}")
    if len(pairs) != 2 or any(len(p) != 2 for p in pairs):
        raise click.BadParameter(f"expected two S,M pairs, got {value!r}")
    return [(p[0], p[1]) for p in pairs]


def fail(e: Exception, code: int) -> None:
    click.echo(f"error: {e}", err=True)
    sys.exit(code)


@click.group()
def cli():
    """Finite-level experiments on iterated monodromy groups of cubic polynomials."""


@cli.group()
def portrait():
    """Parse, validate and export ramification portraits."""


@portrait.command("validate")
@click.argument("file")
@click.option("--format", "output_format", type=click.Choice(["json", "text"]), default=None)
def portrait_validate(file: str, output_format: Optional[str]):
    """Check assumption (Y); exit 0 iff it holds."""
    try:
        config = load_config(output_format=output_format)
        report = validate_Y(parse_portrait(read_portrait_text(file)))
    except (TreemonoError, ValidationError, ValueError) as e:
        fail(e, getattr(e, "exit_code", 2))
    if config.output_format == "json":
        click.echo(report.model_dump_json(indent=2))
    else:
        click.echo("valid" if report.valid else "invalid")
        for v in report.violations:
            click.echo(f"  {v.vertex}: {v.reason} ({v.multiplicity} incoming edges)")
        click.echo("  cases: " + ", ".join(f"{k}={c}" for k, c in report.cases.items()))
    sys.exit(0 if report.valid else 1)


@portrait.command("dot")
@click.argument("file")
def portrait_dot(file: str):
    """Graphviz export with the source text embedded as comments."""
    try:
        click.echo(export_dot(parse_portrait(read_portrait_text(file))), nl=False)
    except TreemonoError as e:
        fail(e, e.exit_code)


@portrait.command("json")
@click.argument("file")
def portrait_json(file: str):
    try:
        click.echo(export_json(parse_portrait(read_portrait_text(file))).model_dump_json(indent=2))
    except TreemonoError as e:
        fail(e, e.exit_code)


@cli.command()
@click.argument("file", required=False)
@click.option("--family", default=None, help="S,M,ROLE for one disjoint-orbit family, e.g. 1,1,a")
def model(file: Optional[str], family: Optional[str]):
    """Print the wreath recursions of a portrait's model group."""
    if (file is None) == (family is None):
        raise click.UsageError("give either FILE or --family")
    try:
        if family is not None:
            try:
                s, m, role = family.split(",")
                fam = disjoint_orbit_family(int(s), int(m), Role(role.strip()))
            except ValueError:
                raise click.BadParameter(f"expected S,M,ROLE with ROLE a or b, got {family!r}")
            click.echo(format_machine(fam.machine))
            return
        gens = synthesize_model(parse_portrait(read_portrait_text(file)))
    except TreemonoError as e:
        fail(e, e.exit_code)
    click.echo(f"{format_machine(gens.machine, gens.names)}; r={gens.r}")


def run_theorem(
    theorem: str, config: Config, portrait_ref: str, level: int, trials: int,
    m: int, n3: int, sub: Optional[List[Tuple[int, int]]], sup: Optional[List[Tuple[int, int]]], mode: str,
) -> ExperimentReport:
    seed = config.seed
    if theorem == "filtration":
        if sub is None or sup is None:
            raise click.UsageError("filtration needs --sub and --sup")
        return verify.check_filtration(sub, sup, level, config.group_level_cap)
    if theorem == "conjugacy-oracle":
        return verify.check_conjugacy_oracle(level, trials, seed, config.group_level_cap)
    G = ModelGroup.from_portrait(read_portrait_text(portrait_ref), config.group_level_cap)
    if theorem == "invgen":
        return verify.check_invariable_generation(G, level, trials, seed)
    if theorem == "simconj":
        return verify.check_simultaneous_conjugation(G, level, trials, seed, mode)
    if theorem == "branch":
        return verify.check_branch(G, level)
    if theorem == "torsion":
        return verify.check_torsion(G, [(m, n3)], config.level_cap)
    if theorem == "counterexample":
        return verify.check_counterexample(G, level)
    if theorem == "not-closed":
        return verify.check_class_not_closed(G, level, seed)
    if theorem == "replication":
        return verify.check_self_replication(G, level)
    if theorem == "forms":
        return verify.check_forms(G, level, trials, seed)
    return verify.check_commutator_frame(G, level, trials, seed)


@cli.command("verify")
@click.argument("theorem", type=click.Choice(THEOREMS))
@click.option("--portrait", "portrait_ref", default="two-fixed", help="Portrait file, '-' or bundled name")
@click.option("--level", "-n", type=int, default=None, help="Deepest level to check")
@click.option("--trials", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--format", "output_format", type=click.Choice(["json", "text"]), default=None)
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory to save the report in")
@click.option("--timings", is_flag=True, help="Include elapsed_ms in the report")
@click.option("--verbose", is_flag=True, help="Debug logging on stderr")
@click.option("--m", "m", type=int, default=0, help="Power of 2 in the torsion order")
@click.option("--n3", type=int, default=0, help="Power of 3 in the torsion order")
@click.option("--sub", default=None, help="Sub group families as S,M:S,M")
@click.option("--sup", default=None, help="Super group families as S,M:S,M")
@click.option("--mode", type=click.Choice(["independent", "coherent"]), default="independent")
def verify_cmd(theorem, portrait_ref, level, trials, seed, output_format, out, timings, verbose, m, n3, sub, sup, mode):
    """Run a finite-level check; exit 3 on a counterexample."""
    setup_logging(verbose)
    try:
        config = load_config(seed=seed, output_format=output_format, timings=timings or None)
    except (ValidationError, ValueError) as e:
        fail(e, 2)
    level = DEFAULT_LEVELS.get(theorem, 3) if level is None else level
    trials = DEFAULT_TRIALS.get(theorem, 0) if trials is None else trials
    if trials < 0:
        raise click.BadParameter("trials must be non-negative")

    started = time.perf_counter()
    try:
        report = run_theorem(
            theorem, config, portrait_ref, level, trials, m, n3, parse_pairs(sub), parse_pairs(sup), mode
        )
    except TreemonoError as e:
        fail(e, e.exit_code)
    if config.timings:
        report.elapsed_ms = int((time.perf_counter() - started) * 1000)

    if out is not None:
        path = ReportStore(out).save(report)
        logger.info("report saved to %s", path)
    click.echo(report.to_json() if config.output_format == "json" else report_to_text(report))
    sys.exit(3 if report.verdict == "counterexample" else 0)


def main():
    cli(prog_name=APP_NAME)


if __name__ == "__main__":
    main()

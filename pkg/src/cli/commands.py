"""
Command-line interface: one group, one subcommand per pipeline stage plus
evaluation, chat, transcript export and significance testing.
"""
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import click

from ..agents.factory import load_ds, make_user
from ..config.profiles import PROFILES, build_config
from ..config.settings import settings
from ..models.config_models import SIGMOID_ALIAS, DecodeMode, PolicyScheme, RewardSetting, RunConfig, SimulatorKind
from ..models.exceptions import DialoopError, StageFailure, TrainingDivergedError
from ..repositories.checkpoint_repository import CheckpointRepository
from ..repositories.corpus_repository import CorpusRepository
from ..services.chat_service import ChatSession
from ..services.evaluation_service import corpus_eval, cross_model_eval, interaction_eval
from ..services.pipeline_service import DS_SL, STAGES, USER_LABELS, Pipeline, ds_from_run, load_dialogs
from ..services.transcript_service import (
    SCORE_COLUMNS,
    TranscriptMode,
    compare_scoring_sheets,
    export_transcripts,
    read_scoring_sheet,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_STAGE_FAILURE = 2
EXIT_DIVERGED = 3


def configure_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=settings.LOG_FORMAT)


def nested(**flat: Any) -> Dict[str, Any]:
    """``rl__lr=1e-3`` -> ``{"rl": {"lr": 1e-3}}``; None and empty tuples are dropped."""
    out: Dict[str, Any] = {}
    for key, value in flat.items():
        if value is None or value == ():
            continue
        node = out
        *parents, leaf = key.split("__")
        for parent in parents:
            node = node.setdefault(parent, {})
        node[leaf] = list(value) if isinstance(value, tuple) else value
    return out


def run_options(func):
    """Options shared by every command that builds a ``RunConfig``."""
    options = [
        click.option("--profile", type=click.Choice(sorted(PROFILES)), default="desk", show_default=True),
        click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False, path_type=Path),
                     help="JSON file overriding the profile"),
        click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), help="Run directory"),
        click.option("--seed", type=int, envvar="DIALOOP_SEED", help="Run seed"),
        click.option("--threads", type=int, envvar="DIALOOP_THREADS", help="BLAS threads (pinned at startup)"),
        click.option("--force", is_flag=True, help="Rerun even when the stage artifacts exist"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def make_config(profile: str, config_file: Optional[Path], out_dir: Optional[Path], **overrides: Any) -> RunConfig:
    flat = dict(overrides)
    flat["out_dir"] = str(out_dir) if out_dir else None
    try:
        return build_config(profile, config_file, nested(**flat))
    except ValueError as e:
        raise click.UsageError(str(e))


def run_stage(ctx: click.Context, config: RunConfig, stage: str, force: bool) -> None:
    pipeline = Pipeline(config, progress=ctx.obj["progress"])
    pipeline.run_dir.mkdir(parents=True, exist_ok=True)
    config.save(pipeline.run_dir / "config.json")
    if not pipeline.run_stage(stage, force=force):
        click.echo(f"{stage}: artifacts already present in {pipeline.run_dir} (use --force to rerun)")
    else:
        click.echo(f"{stage}: done ({pipeline.run_dir})")


@click.group()
@click.option("--log-level", default=settings.LOG_LEVEL, show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.option("--quiet", is_flag=True, help="Disable progress bars and info logging")
@click.pass_context
def cli(ctx: click.Context, log_level: str, quiet: bool):
    """Generative user simulators and dialog systems trained by interaction."""
    configure_logging("WARNING" if quiet else log_level)
    ctx.ensure_object(dict)
    ctx.obj["progress"] = not quiet and sys.stderr.isatty()


# ============================================================================
# Pipeline stages
# ============================================================================

@cli.command("gen-world")
@run_options
@click.option("--world", "world_path", type=click.Path(exists=True, dir_okay=False), help="Use this world file")
@click.pass_context
def gen_world(ctx, profile, config_file, out_dir, seed, threads, force, world_path):
    """Write the synthetic world (ontology + entities) into the run directory."""
    config = make_config(profile, config_file, out_dir, seed=seed, threads=threads, world_path=world_path)
    run_stage(ctx, config, "gen-world", force)


@cli.command("gen-corpus")
@run_options
@click.option("--corpus-size", type=int)
@click.option("--test-corpus-size", type=int)
@click.option("--semantic-abus/--text-abus", default=None, help="ABUS reads system acts instead of text")
@click.option("--max-pops", type=int)
@click.pass_context
def gen_corpus(ctx, profile, config_file, out_dir, seed, threads, force, corpus_size, test_corpus_size,
               semantic_abus, max_pops):
    """Generate the training and test corpora with the wizard and ABUS."""
    config = make_config(
        profile, config_file, out_dir, seed=seed, threads=threads, corpus_size=corpus_size,
        test_corpus_size=test_corpus_size, semantic_abus=semantic_abus, max_pops=max_pops,
    )
    run_stage(ctx, config, "gen-corpus", force)


@cli.command("train-sl")
@run_options
@click.option("--epochs", "sl__epochs", type=int)
@click.option("--lr", "sl__lr", type=float)
@click.option("--batch-size", "sl__batch_size", type=int)
@click.option("--grad-accum", "sl__grad_accum", type=int)
@click.option("--ablations/--no-ablations", default=None, help="Also train the GUS without goal-state tracking")
@click.pass_context
def train_sl(ctx, profile, config_file, out_dir, seed, threads, force, ablations, **sl):
    """Supervised pretraining of the DS and the GUS."""
    config = make_config(profile, config_file, out_dir, seed=seed, threads=threads, ablations=ablations, **sl)
    run_stage(ctx, config, "train-sl", force)


@cli.command("train-rl")
@run_options
@click.option("--against", "--us", "train_against", multiple=True, type=click.Choice([k.value for k in SimulatorKind]))
@click.option("--rl-seed", "rl_seeds", multiple=True, type=int)
@click.option("--reward", "rl__reward_setting", type=click.Choice([r.value for r in RewardSetting] + [SIGMOID_ALIAS]))
@click.option("--scheme", "rl__policy_scheme", type=click.Choice([p.value for p in PolicyScheme]))
@click.option("--updates", "rl__updates", type=int)
@click.option("--episodes", "rl__episodes_per_update", type=int)
@click.option("--gamma", "rl__gamma", type=float)
@click.option("--lr", "rl__lr", type=float)
@click.option("--baseline", "rl__constant_baseline", type=float, help="Constant subtracted from every return")
@click.option("--ablations/--no-ablations", default=None)
@click.pass_context
def train_rl(ctx, profile, config_file, out_dir, seed, threads, force, train_against, rl_seeds, ablations, **rl):
    """Policy-gradient training of DS-SL against each training user and seed."""
    config = make_config(
        profile, config_file, out_dir, seed=seed, threads=threads, train_against=train_against,
        rl_seeds=rl_seeds, ablations=ablations, **rl,
    )
    run_stage(ctx, config, "train-rl", force)


@cli.command("cross-eval")
@run_options
@click.option("--n-goals", "eval__n_goals", type=int)
@click.option("--eval-seed", "eval__seed", type=int)
@click.pass_context
def cross_eval(ctx, profile, config_file, out_dir, seed, threads, force, **ev):
    """Every trained DS against every user simulator, plus corpus evaluation and the report."""
    config = make_config(profile, config_file, out_dir, seed=seed, threads=threads, **ev)
    run_stage(ctx, config, "eval", True)
    run_stage(ctx, config, "report", True)
    click.echo((Pipeline(config).run_dir / "report.txt").read_text(encoding="utf-8"))


@cli.command()
@run_options
@click.option("--stage", "stages", multiple=True, type=click.Choice(STAGES))
@click.option("--ablations/--no-ablations", default=None)
@click.pass_context
def pipeline(ctx, profile, config_file, out_dir, seed, threads, force, stages, ablations):
    """Run every stage in order, resuming from the artifacts already present."""
    config = make_config(profile, config_file, out_dir, seed=seed, threads=threads, ablations=ablations)
    runner = Pipeline(config, progress=ctx.obj["progress"])
    if force:
        for stage in stages or STAGES[:-1]:
            runner.run_stage(stage, force=True)
    report = runner.run(stages or None)
    if report.exists():
        click.echo(report.read_text(encoding="utf-8"))


# ============================================================================
# Evaluation on an existing run
# ============================================================================

@cli.command("eval")
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--mode", type=click.Choice(["interaction", "corpus", "cross"]), default="interaction", show_default=True)
@click.option("--ds", "ds_names", multiple=True, help="DS checkpoint names (default ds_sl)")
@click.option("--us", "us_kinds", multiple=True, type=click.Choice([k.value for k in SimulatorKind]))
@click.option("--n-goals", type=int)
@click.option("--seed", type=int, envvar="DIALOOP_SEED")
@click.option("--act-mode", type=click.Choice([m.value for m in DecodeMode]), help="Override act decoding")
@click.option("--save-dialogs", type=click.Path(dir_okay=False, path_type=Path), help="Write evaluated dialogs (JSONL)")
@click.option("--json", "as_json", is_flag=True, help="Print reports as JSON")
@click.pass_context
def evaluate(ctx, run_dir, mode, ds_names, us_kinds, n_goals, seed, act_mode, save_dialogs, as_json):
    """Evaluate trained dialog systems of a run."""
    config = RunConfig.load(run_dir / "config.json")
    decoding = config.decoding.model_copy(update={"act_mode": act_mode}) if act_mode else config.decoding
    runner = Pipeline(config, run_dir, progress=ctx.obj["progress"])
    repo = CheckpointRepository(run_dir / "checkpoints")
    n_goals = n_goals or config.eval.n_goals
    seed = config.eval.seed if seed is None else seed
    systems = [(name, load_ds(repo, name, runner.world, decoding)) for name in (ds_names or [DS_SL])]
    users = [
        (USER_LABELS[k], make_user(k, repo, runner.world, runner.templates, config.semantic_abus, config.max_pops))
        for k in (us_kinds or [SimulatorKind.GUS.value])
    ]
    reports, dialogs = [], []
    if mode == "cross":
        matrix = cross_model_eval(systems, users, runner.world, n_goals, seed, config.goal, config.eval.max_turns,
                                  ctx.obj["progress"])
        click.echo(matrix.format_text())
        return
    for name, ds in systems:
        if mode == "corpus":
            test = CorpusRepository(runner.test_corpus_path).read_corpus()
            report = corpus_eval(ds, test[:config.eval.corpus_dialogs] if config.eval.corpus_dialogs else test,
                                 runner.world, seed, name, ctx.obj["progress"])
            reports.append(report)
            dialogs.extend(report.dialogs)
            continue
        for us_label, us in users:
            report = interaction_eval(
                ds, us, runner.world, n_goals=n_goals, seed=seed, goal_config=config.goal,
                max_turns=config.eval.max_turns, name=f"{name}/{us_label}", progress=ctx.obj["progress"],
                keep_dialogs=save_dialogs is not None,
            )
            reports.append(report)
            dialogs.extend(report.dialogs)
    if save_dialogs is not None:
        CorpusRepository(save_dialogs).write_corpus(dialogs)
    if as_json:
        click.echo(json.dumps([r.summary() for r in reports], indent=2))
        return
    for report in reports:
        line = f"{report.name}: Inform {100 * report.inform:.2f}  Success {100 * report.success:.2f}"
        if report.bleu is not None:
            line += f"  BLEU {report.bleu:.2f}  Combined {report.combined:.2f}"
        click.echo(line)


# ============================================================================
# Human interaction and grading
# ============================================================================

@cli.command()
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--ds", "ds_name", default=DS_SL, show_default=True)
@click.option("--seed", type=int, default=0, envvar="DIALOOP_SEED")
@click.option("--max-turns", type=int, default=20, show_default=True)
@click.option("--save", type=click.Path(dir_okay=False, path_type=Path), help="Append the session to this JSONL file")
@click.option("--session-id", default="chat-00000", show_default=True)
def chat(run_dir, ds_name, seed, max_turns, save, session_id):
    """Talk to a trained DS; type /quit to stop."""
    ds, _ = ds_from_run(run_dir, ds_name)
    session = ChatSession(ds, seed=seed, max_turns=max_turns, dialog_id=session_id)
    click.echo("Type your request; /quit ends the session.")

    def read() -> str:
        return click.prompt("you", prompt_suffix="> ", default="", show_default=False)

    dialog = session.run(read, lambda text: click.echo(f"system> {text}"))
    click.echo(f"session ended: {dialog.termination_reason} after {dialog.num_turns} turns")
    if save is not None:
        CorpusRepository(save).append([dialog])
        click.echo(f"saved to {save}")


@cli.command()
@click.option("--dialogs", "dialogs_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--mode", type=click.Choice([m.value for m in TranscriptMode]), default=TranscriptMode.LEXICALIZED.value,
              show_default=True)
@click.option("--name", default="transcripts", show_default=True)
@click.option("--limit", type=int, help="Export only the first N dialogs")
@click.option("--no-sheet", is_flag=True, help="Skip the blank scoring sheet")
def export(dialogs_path, out_dir, mode, name, limit, no_sheet):
    """Export dialogs as human-readable transcripts with a scoring sheet."""
    dialogs = load_dialogs(dialogs_path)
    if limit is not None:
        dialogs = dialogs[:limit]
    for path in export_transcripts(dialogs, out_dir, mode, with_scoring_sheet=not no_sheet, name=name):
        click.echo(f"wrote {path}")


@cli.command()
@click.argument("sheet_a", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("sheet_b", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def significance(sheet_a, sheet_b):
    """Matched-pairs test per metric between two graded scoring sheets."""
    results = compare_scoring_sheets(read_scoring_sheet(sheet_a), read_scoring_sheet(sheet_b))
    click.echo(f"{'metric':<8} {'n':>5} {'mean diff':>10} {'z':>8} {'p':>10}")
    for column in SCORE_COLUMNS:
        if column not in results:
            click.echo(f"{column:<8} {'-':>5}")
            continue
        r = results[column]
        click.echo(f"{column:<8} {r.n:>5} {r.mean_difference:>10.4f} {r.z:>8.3f} {r.p_value:>10.4g}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point mapping failures to exit codes."""
    try:
        result = cli.main(args=list(argv) if argv is not None else None, standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except TrainingDivergedError as e:
        logger.error(f"Divergence guard: {e}")
        return EXIT_DIVERGED
    except StageFailure as e:
        logger.error(f"{e} (artifacts: {e.artifacts})")
        return EXIT_STAGE_FAILURE
    except DialoopError as e:
        logger.error(f"{e}")
        return EXIT_STAGE_FAILURE
    return result if isinstance(result, int) else EXIT_OK

"""
End-to-end experiment pipeline.

Stages run in order and each one is skipped when its artifacts already exist in
the run directory, so an interrupted run resumes where it stopped:

    gen-world   world.json
    gen-corpus  corpus/train.jsonl, corpus/test.jsonl
    train-sl    checkpoints/ds_sl, checkpoints/gus (+ gus-nogst with ablations)
    train-rl    checkpoints/ds_<user>_s<seed> per training user and seed (+ ablations)
    eval        reports/*.csv
    report      report.txt, manifest.json

Reports carry no wall-clock data; rerunning with the same config and one thread
reproduces them byte for byte.
"""
import csv
import hashlib
import json
import logging
import platform
import shutil
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..agents.ds_agent import DSAgent
from ..agents.factory import load_ds, make_user, new_ds, new_gus, save_agent
from ..config.settings import settings
from ..models.config_models import PolicyScheme, RewardSetting, RunConfig, SimulatorKind
from ..models.domain_models import Dialog
from ..models.exceptions import DialoopError, StageFailure, TrainingDivergedError
from ..repositories.checkpoint_repository import CheckpointRepository
from ..repositories.corpus_repository import CorpusRepository
from ..repositories.world_repository import WorldRepository
from .corpus_service import CorpusService
from .evaluation_service import (
    CrossModelMatrix,
    EvalReport,
    corpus_eval,
    cross_model_eval,
    evaluation_goals,
    interaction_eval,
)
from .rl_training_service import train_rl
from .supervised_training_service import build_vocab, sl_train_ds, sl_train_us
from .template_service import TemplateService
from .training_monitor import TrainingMonitor
from .world_service import write_world

logger = logging.getLogger(__name__)

STAGES = ["gen-world", "gen-corpus", "train-sl", "train-rl", "eval", "report"]
MANIFEST_PACKAGES = ["numpy", "pydantic", "click", "nltk", "tqdm"]
DS_SL = "ds_sl"

USER_LABELS = {
    SimulatorKind.ABUS.value: "ABUS",
    SimulatorKind.GUS.value: "GUS",
    SimulatorKind.GUS_NOGST.value: "GUS-nogst",
}


@dataclass
class RLVariant:
    """One RL run: a training user, a seed and the RL settings that differ from the defaults."""
    name: str
    user: str
    seed: int
    group: str
    reward_setting: str
    policy_scheme: str


@dataclass
class Table:
    title: str
    headers: List[str]
    rows: List[List[str]] = field(default_factory=list)

    def format_text(self) -> str:
        widths = [max([len(h)] + [len(r[i]) for r in self.rows]) for i, h in enumerate(self.headers)]

        def line(cells: List[str]) -> str:
            return "  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(cells, widths)))

        out = [self.title, "=" * len(self.title), line(self.headers), line(["-" * w for w in widths])]
        out += [line(r) for r in self.rows]
        return "\n".join(out) + "\n"

    def write_csv(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(self.headers)
            writer.writerows(self.rows)
        return path


def pct(value: float) -> str:
    return f"{100 * value:.2f}"


def file_sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def package_versions() -> Dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in MANIFEST_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "not installed"
    return versions


def group_label(user: str) -> str:
    return f"DS-{USER_LABELS[user]}"


class Pipeline:
    """Stage runner bound to one run directory and its ``RunConfig``."""

    def __init__(self, config: RunConfig, run_dir: Optional[Path] = None, progress: bool = True):
        self.config = config
        self.run_dir = Path(run_dir or config.out_dir)
        self.progress = progress
        self.checkpoints = CheckpointRepository(self.run_dir / "checkpoints")
        self._world: Optional[WorldRepository] = None
        self._templates: Optional[TemplateService] = None

    # ------------------------------------------------------------------
    # paths and shared resources
    # ------------------------------------------------------------------

    @property
    def world_path(self) -> Path:
        return self.run_dir / "world.json"

    @property
    def train_corpus_path(self) -> Path:
        return self.run_dir / "corpus" / "train.jsonl"

    @property
    def test_corpus_path(self) -> Path:
        return self.run_dir / "corpus" / "test.jsonl"

    @property
    def reports_dir(self) -> Path:
        return self.run_dir / "reports"

    @property
    def curves_dir(self) -> Path:
        return self.run_dir / "curves"

    @property
    def world(self) -> WorldRepository:
        if self._world is None:
            self._world = WorldRepository(self.world_path)
        return self._world

    @property
    def templates(self) -> TemplateService:
        if self._templates is None:
            path = Path(self.config.templates_path) if self.config.templates_path else settings.TEMPLATES_PATH
            self._templates = TemplateService(path, self.world.ontology)
        return self._templates

    def user_kinds(self) -> List[str]:
        """Columns of the cross-model table: every training user, ABUS and GUS always included."""
        kinds = [SimulatorKind.ABUS.value, SimulatorKind.GUS.value]
        kinds += [k for k in self.config.train_against if k not in kinds]
        return kinds

    def needs_nogst(self) -> bool:
        return self.config.ablations or SimulatorKind.GUS_NOGST.value in self.config.train_against

    def rl_variants(self) -> List[RLVariant]:
        rl = self.config.rl
        variants = []
        for user in self.config.train_against:
            for seed in self.config.rl_seeds:
                variants.append(RLVariant(
                    f"ds_{user}_s{seed}", user, seed, group_label(user), rl.reward_setting, rl.policy_scheme,
                ))
        if not self.config.ablations:
            return variants
        gus = SimulatorKind.GUS.value
        for seed in self.config.rl_seeds:
            if SimulatorKind.GUS_NOGST.value not in self.config.train_against:
                nogst = SimulatorKind.GUS_NOGST.value
                variants.append(RLVariant(
                    f"ds_{nogst}_s{seed}", nogst, seed, group_label(nogst), rl.reward_setting, rl.policy_scheme,
                ))
            for setting in RewardSetting:
                if setting.value != rl.reward_setting:
                    variants.append(RLVariant(
                        f"ds_gus_reward-{setting.value}_s{seed}", gus, seed, f"reward {setting.value}",
                        setting.value, rl.policy_scheme,
                    ))
            for scheme in PolicyScheme:
                if scheme.value != rl.policy_scheme:
                    variants.append(RLVariant(
                        f"ds_gus_scheme-{scheme.value}_s{seed}", gus, seed, f"scheme {scheme.value}",
                        rl.reward_setting, scheme.value,
                    ))
        return variants

    def stage_artifacts(self, stage: str) -> List[Path]:
        if stage == "gen-world":
            return [self.world_path]
        if stage == "gen-corpus":
            return [self.train_corpus_path, self.test_corpus_path]
        if stage == "train-sl":
            names = [DS_SL, SimulatorKind.GUS.value] + ([SimulatorKind.GUS_NOGST.value] if self.needs_nogst() else [])
            return [p for n in names for p in self.checkpoints.paths(n)]
        if stage == "train-rl":
            return [p for v in self.rl_variants() for p in self.checkpoints.paths(v.name)]
        if stage == "eval":
            names = ["cross_model.csv", "corpus_eval.csv"]
            if self.config.ablations:
                names += ["ablation_gst.csv", "ablation_reward.csv", "ablation_scheme.csv"]
            return [self.reports_dir / n for n in names]
        if stage == "report":
            return [self.run_dir / "report.txt", self.run_dir / "manifest.json"]
        raise ValueError(f"unknown stage '{stage}', choose from {STAGES}")

    def is_done(self, stage: str) -> bool:
        return all(p.exists() for p in self.stage_artifacts(stage))

    # ------------------------------------------------------------------
    # stages
    # ------------------------------------------------------------------

    def gen_world(self) -> None:
        if self.config.world_path:
            self.world_path.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(self.config.world_path, self.world_path)
            logger.info(f"Copied world from {self.config.world_path}")
        else:
            write_world(self.world_path)
        self._world = None

    def gen_corpus(self) -> None:
        cfg = self.config
        service = CorpusService(
            self.world, self.templates, cfg.goal, cfg.eval.max_turns, cfg.max_pops, semantic=cfg.semantic_abus,
        )
        # the test split uses its own seed so its goals differ from the training goals
        for path, n, seed, prefix in (
            (self.train_corpus_path, cfg.corpus_size, cfg.seed, "train"),
            (self.test_corpus_path, cfg.test_corpus_size, cfg.seed + 1, "test"),
        ):
            CorpusRepository(path).write_corpus(service.generate_corpus(n, seed, prefix, self.progress))

    def train_sl(self) -> None:
        cfg = self.config
        dialogs = CorpusRepository(self.train_corpus_path).read_corpus()
        vocab = build_vocab(self.world, dialogs)
        logger.info(f"Vocabulary of {len(vocab)} tokens")

        if not self.checkpoints.exists(DS_SL):
            ds = new_ds(cfg.model, vocab, self.world, cfg.decoding, seed=cfg.seed, name=DS_SL)
            monitor = TrainingMonitor("sl_ds")
            result = sl_train_ds(ds, dialogs, cfg.sl, cfg.seed, monitor, self.progress)
            monitor.export_csv(self.curves_dir / "sl_ds_curve.csv")
            save_agent(self.checkpoints, DS_SL, ds)
            self._write_json(self.run_dir / "sl" / f"{DS_SL}.json", result.to_dict())

        variants = [True] + ([False] if self.needs_nogst() else [])
        for offset, with_gst in enumerate(variants, start=1):
            if self.checkpoints.exists(SimulatorKind.GUS.value if with_gst else SimulatorKind.GUS_NOGST.value):
                continue
            gus = new_gus(cfg.model, vocab, self.world, cfg.decoding, seed=cfg.seed + offset, with_gst=with_gst)
            monitor = TrainingMonitor(f"sl_{gus.name}")
            result = sl_train_us(gus, dialogs, cfg.sl, cfg.seed, monitor, self.progress)
            monitor.export_csv(self.curves_dir / f"sl_{gus.name}_curve.csv")
            save_agent(self.checkpoints, gus.name, gus)
            self._write_json(self.run_dir / "sl" / f"{gus.name}.json", result.to_dict())

    def train_variant(self, variant: RLVariant) -> None:
        cfg = self.config
        ds = load_ds(self.checkpoints, DS_SL, self.world, cfg.decoding)
        ds.name = variant.name
        us = make_user(variant.user, self.checkpoints, self.world, self.templates, cfg.semantic_abus, cfg.max_pops)
        rl_config = cfg.rl.model_copy(update={
            "seed": variant.seed, "reward_setting": variant.reward_setting, "policy_scheme": variant.policy_scheme,
        })
        episode_log = self.run_dir / "rl" / f"{variant.name}_episodes.jsonl"
        episode_log.unlink(missing_ok=True)
        monitor = TrainingMonitor(f"rl_{variant.name}")
        try:
            result = train_rl(ds, us, self.world, rl_config, cfg.goal, monitor, episode_log, self.progress)
        finally:
            monitor.export_csv(self.curves_dir / f"rl_{variant.name}_curve.csv")
            monitor.export_evaluations_csv(self.curves_dir / f"rl_{variant.name}_evals.csv")
        save_agent(self.checkpoints, variant.name, ds)
        self._write_json(self.run_dir / "rl" / f"{variant.name}.json", result.to_dict())

    def train_rl(self) -> None:
        for variant in self.rl_variants():
            if self.checkpoints.exists(variant.name):
                logger.info(f"RL variant {variant.name} already trained")
                continue
            logger.info(f"RL variant {variant.name}: against {variant.user}, seed {variant.seed}")
            self.train_variant(variant)

    def evaluate(self) -> None:
        cfg = self.config
        decoding = cfg.decoding
        variants = self.rl_variants()
        main = [v for v in variants if v.user in cfg.train_against and v.group == group_label(v.user)]
        users = [
            (USER_LABELS[k], make_user(k, self.checkpoints, self.world, self.templates, cfg.semantic_abus, cfg.max_pops))
            for k in self.user_kinds()
        ]
        systems = [("DS-SL", load_ds(self.checkpoints, DS_SL, self.world, decoding))]
        systems += [(f"{v.group} s{v.seed}", load_ds(self.checkpoints, v.name, self.world, decoding)) for v in main]

        matrix = cross_model_eval(
            systems, users, self.world, cfg.eval.n_goals, cfg.eval.seed, cfg.goal, cfg.eval.max_turns, self.progress,
        )
        for user in cfg.train_against:
            label = group_label(user)
            members = [f"{v.group} s{v.seed}" for v in main if v.group == label]
            matrix.aggregate(label, members, USER_LABELS[user])
        matrix.write_csv(self.reports_dir / "cross_model.csv")
        (self.reports_dir / "cross_model.txt").write_text(matrix.format_text(), encoding="utf-8")

        test_dialogs = CorpusRepository(self.test_corpus_path).read_corpus()
        if cfg.eval.corpus_dialogs:
            test_dialogs = test_dialogs[:cfg.eval.corpus_dialogs]
        corpus_table = Table("Corpus evaluation", ["model", "BLEU", "Inform", "Success", "Combined"])
        for name, ds in systems:
            report = corpus_eval(ds, test_dialogs, self.world, cfg.eval.seed, name, self.progress)
            corpus_table.rows.append([name, f"{report.bleu:.2f}", pct(report.inform), pct(report.success), f"{report.combined:.2f}"])
        corpus_table.write_csv(self.reports_dir / "corpus_eval.csv")

        if cfg.ablations:
            for key, table in self.ablation_tables(matrix, variants, dict(users)).items():
                table.write_csv(self.reports_dir / f"ablation_{key}.csv")

    def ablation_tables(
        self,
        matrix: CrossModelMatrix,
        variants: Sequence[RLVariant],
        users: Dict[str, object],
    ) -> Dict[str, Table]:
        """Inform/Success on GUS averaged over RL seeds, one table per ablation."""
        cfg = self.config
        gus_label = USER_LABELS[SimulatorKind.GUS.value]
        goals = evaluation_goals(self.world, cfg.eval.n_goals, cfg.eval.seed, cfg.goal)

        def on_gus(variant: RLVariant) -> EvalReport:
            label = f"{variant.group} s{variant.seed}"
            if label in matrix.ds_names:
                return matrix.cell(label, gus_label)
            ds = load_ds(self.checkpoints, variant.name, self.world, cfg.decoding)
            return interaction_eval(
                ds, users[gus_label], self.world, seed=cfg.eval.seed, goals=goals,
                max_turns=cfg.eval.max_turns, name=f"{variant.name}/{gus_label}", progress=self.progress,
            )

        def averaged(label: str, members: Sequence[RLVariant]) -> List[str]:
            if not members:
                return [label, "-", "-"]
            reports = [on_gus(v) for v in members]
            return [label, pct(float(np.mean([r.inform for r in reports]))), pct(float(np.mean([r.success for r in reports])))]

        sl = matrix.cell("DS-SL", gus_label)
        sl_row = ["DS-SL", pct(sl.inform), pct(sl.success)]
        headers = ["model", "Inform", "Success"]
        gus_group = group_label(SimulatorKind.GUS.value)
        default = [v for v in variants if v.group == gus_group]

        gst = Table("Goal-state tracking ablation (tested on GUS)", headers, [sl_row])
        gst.rows.append(averaged("DS trained on GUS", default))
        nogst_group = group_label(SimulatorKind.GUS_NOGST.value)
        gst.rows.append(averaged("DS trained on GUS-nogst", [v for v in variants if v.group == nogst_group]))

        reward = Table("Reward ablation (tested on GUS)", headers, [sl_row])
        scheme = Table("Policy scheme ablation (tested on GUS)", headers, [sl_row])
        for setting in RewardSetting:
            members = default if setting.value == cfg.rl.reward_setting else [
                v for v in variants if v.group == f"reward {setting.value}"
            ]
            reward.rows.append(averaged(f"reward {setting.value}", members))
        for policy in PolicyScheme:
            members = default if policy.value == cfg.rl.policy_scheme else [
                v for v in variants if v.group == f"scheme {policy.value}"
            ]
            scheme.rows.append(averaged(f"scheme {policy.value}", members))
        return {"gst": gst, "reward": reward, "scheme": scheme}

    def report(self) -> None:
        """Concatenate the evaluation tables into report.txt and write the run manifest."""
        sections = []
        cross_txt = self.reports_dir / "cross_model.txt"
        if cross_txt.exists():
            sections.append("Cross-model evaluation (Inform / Success %)\n" + cross_txt.read_text(encoding="utf-8"))
        for name in ["corpus_eval", "ablation_gst", "ablation_reward", "ablation_scheme"]:
            path = self.reports_dir / f"{name}.csv"
            if path.exists():
                sections.append(self._csv_as_table(path, name.replace("_", " ")).format_text())
        report_path = self.run_dir / "report.txt"
        report_path.write_text("\n".join(sections), encoding="utf-8")
        self._write_json(self.run_dir / "manifest.json", self.manifest())
        logger.info(f"Report written to {report_path}")

    # ------------------------------------------------------------------
    # bookkeeping
    # ------------------------------------------------------------------

    @staticmethod
    def _csv_as_table(path: Path, title: str) -> Table:
        with path.open(newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
        return Table(title, rows[0], rows[1:])

    @staticmethod
    def _write_json(path: Path, data) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def manifest(self) -> Dict[str, object]:
        hashes: Dict[str, str] = {}
        for label, path in (("world", self.world_path), ("train_corpus", self.train_corpus_path),
                            ("test_corpus", self.test_corpus_path), ("report", self.run_dir / "report.txt")):
            if path.exists():
                hashes[label] = file_sha256(path)
        checkpoints = {}
        for manifest_path in sorted(self.checkpoints.directory.glob("*.json")):
            data = json.loads(manifest_path.read_text(encoding="utf-8"))
            checkpoints[manifest_path.stem] = {
                "vocab_hash": data["vocab_hash"], "num_parameters": data["num_parameters"],
                "weights_sha256": file_sha256(manifest_path.with_suffix(".npz")),
            }
        return {
            "seed": self.config.seed,
            "profile": self.config.profile,
            "packages": package_versions(),
            "hashes": hashes,
            "checkpoints": checkpoints,
            "stages": [s for s in STAGES[:-1] if self.is_done(s)] + ["report"],
        }

    def run_stage(self, stage: str, force: bool = False) -> bool:
        """Run one stage; returns False when it was skipped because its artifacts exist."""
        if stage not in STAGES:
            raise ValueError(f"unknown stage '{stage}', choose from {STAGES}")
        if not force and self.is_done(stage):
            logger.info(f"Stage {stage}: artifacts present, skipping")
            return False
        handlers: Dict[str, Callable[[], None]] = {
            "gen-world": self.gen_world, "gen-corpus": self.gen_corpus, "train-sl": self.train_sl,
            "train-rl": self.train_rl, "eval": self.evaluate, "report": self.report,
        }
        logger.info(f"Stage {stage}: starting")
        try:
            handlers[stage]()
        except (TrainingDivergedError, StageFailure):
            raise
        except (DialoopError, OSError, ValueError, KeyError) as e:
            artifacts = [str(p) for p in self.stage_artifacts(stage) if p.exists()]
            logger.error(f"Stage {stage} failed: {e}")
            raise StageFailure(stage, str(e), artifacts) from e
        logger.info(f"Stage {stage}: done")
        return True

    def run(self, stages: Optional[Sequence[str]] = None) -> Path:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.config.save(self.run_dir / "config.json")
        for stage in stages or STAGES:
            self.run_stage(stage, force=(stage == "report"))
        return self.run_dir / "report.txt"


def run_pipeline(config: RunConfig, run_dir: Optional[Path] = None, progress: bool = True) -> Path:
    return Pipeline(config, run_dir, progress).run()


def load_dialogs(path: Path) -> List[Dialog]:
    return CorpusRepository(path).read_corpus()


def ds_from_run(run_dir: Path, name: str, decoding=None) -> Tuple[DSAgent, WorldRepository]:
    """A trained DS plus the world of the run it came from."""
    world = WorldRepository(Path(run_dir) / "world.json")
    return load_ds(CheckpointRepository(Path(run_dir) / "checkpoints"), name, world, decoding), world

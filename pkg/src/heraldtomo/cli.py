"""Command-line driver.

Each subcommand reads a run configuration (``--config`` JSON and/or
``--preset``) and exchanges files through the ``--out`` directory::

    prepare      -> prepared.json
    acquire      -> dataset.csv             (needs prepared.json)
    reconstruct  -> report.json             (needs dataset.csv)
    analyze      -> wigner.csv, wigner.json, fit.json, summary.txt
    pipeline     -> all of the above

Exit codes: 0 success, 1 configuration error, 2 runtime error or failed
threshold.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import pipeline as pl
from .config import PRESETS, ConfigError, RunConfig, load_config
from .homodyne import AcquisitionDataset
from .tomo import ReconstructionReport

log = logging.getLogger("heraldtomo")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

PREPARED, DATASET, REPORT = "prepared.json", "dataset.csv", "report.json"


class CommandError(RuntimeError):
    pass


def build_config(args) -> RunConfig:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: {args.config} is not valid JSON: {exc}") from exc
    if args.seed is not None:
        doc["seed"] = args.seed
    return load_config(doc, preset=args.preset)


def _read(path: Path, what: str) -> str:
    if not path.exists():
        raise CommandError(f"missing {what} file {path}")
    return path.read_text()


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_prepare(cfg: RunConfig, args) -> int:
    prep = pl.prepare(cfg)
    out = _out(args)
    (out / PREPARED).write_text(prep.to_json())
    (out / "config.json").write_text(cfg.to_json())
    print(f"success probability: ideal {prep.success_probability:.4e}, "
          f"imperfect {prep.success_probability_imperfect:.4e}")
    if prep.eq2_triple is not None:
        print("closed-form amplitudes a0, a1, a2:", np.round(np.array(prep.eq2_triple), 6).tolist())
    print(f"wrote {out / PREPARED}")
    return EXIT_OK


def cmd_acquire(cfg: RunConfig, args) -> int:
    out = _out(args)
    prep = pl.Prepared.from_json(_read(Path(args.state or out / PREPARED), "state"))
    ds = pl.acquire(cfg, prep, estimate=not args.skip_phase_estimation)
    ds.to_csv(out / DATASET)
    counts = {t: ds.count(t) for t in ("coincidence", "spcm1", "spcm2", "random") if ds.count(t)}
    print("records:", counts or 0)
    print(f"wrote {out / DATASET}")
    return EXIT_OK


def cmd_reconstruct(cfg: RunConfig, args) -> int:
    out = _out(args)
    path = Path(args.dataset or out / DATASET)
    ds = AcquisitionDataset.from_csv(_read(path, "dataset"), is_text=True)
    rep = pl.reconstruct(cfg, ds, oracle_phase=args.oracle_phase)
    (out / REPORT).write_text(rep.to_json())
    print(f"iterations {rep.iterations}, converged {rep.converged}, loglik {rep.final_loglik:.6f}")
    print("populations p0..p3:", np.round(np.real(np.diag(rep.rho))[:4], 4).tolist())
    print(f"wrote {out / REPORT}")
    return EXIT_OK


def _load_rho(path: Path) -> tuple[np.ndarray, str]:
    doc = json.loads(_read(path, "input"))
    if "rho" in doc:
        return ReconstructionReport.from_json(json.dumps(doc)).rho, "report"
    if "true_state" in doc:
        return pl.Prepared.from_json(json.dumps(doc)).true_state, "state"
    raise CommandError(f"{path} is neither a reconstruction report nor a state file")


def write_analysis(out: Path, an: pl.Analysis) -> None:
    an.wigner.to_csv(out / "wigner.csv")
    (out / "wigner.json").write_text(an.wigner.to_json())
    fit = an.fit.to_dict()
    fit.update(populations=an.populations.tolist(), mean_photons=an.mean_photons,
               fidelity_true=an.fidelity_true, fidelity_target=an.fidelity_target, kitten_fidelity=an.kitten)
    (out / "fit.json").write_text(json.dumps(fit, indent=2))
    (out / "summary.txt").write_text(an.summary() + "\n")


def cmd_analyze(cfg: RunConfig, args) -> int:
    out = _out(args)
    if args.fit_constraint:
        cfg = cfg.with_overrides(analysis={"fit_constraint": args.fit_constraint})
    rho, kind = _load_rho(Path(args.input or out / REPORT))
    prep_path = out / PREPARED
    prep = pl.Prepared.from_json(prep_path.read_text()) if kind == "report" and prep_path.exists() else None
    an = pl.analyze(cfg, rho, prep)
    write_analysis(out, an)
    print(an.summary())
    return EXIT_OK if an.passed else EXIT_RUNTIME


def cmd_pipeline(cfg: RunConfig, args) -> int:
    out = _out(args)
    prep, ds, rep, an = pl.run(cfg, oracle_phase=args.oracle_phase)
    (out / "config.json").write_text(cfg.to_json())
    (out / PREPARED).write_text(prep.to_json())
    ds.to_csv(out / DATASET)
    (out / REPORT).write_text(rep.to_json())
    write_analysis(out, an)
    print(an.summary())
    return EXIT_OK if an.passed else EXIT_RUNTIME


COMMANDS = {"prepare": cmd_prepare, "acquire": cmd_acquire, "reconstruct": cmd_reconstruct,
            "analyze": cmd_analyze, "pipeline": cmd_pipeline}


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--preset", choices=sorted(PRESETS), help="base configuration to start from")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", metavar="DIR", default=".", help="directory for inputs/outputs")
    common.add_argument("--dry-run", action="store_true", help="validate the configuration and exit")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="heraldtomo", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare", parents=[common], help="compute heralded states")
    a = sub.add_parser("acquire", parents=[common], help="simulate homodyne data")
    a.add_argument("--state", metavar="PATH", help=f"state file (default OUT/{PREPARED})")
    a.add_argument("--skip-phase-estimation", action="store_true")
    r = sub.add_parser("reconstruct", parents=[common], help="maximum-likelihood tomography")
    r.add_argument("--dataset", metavar="PATH", help=f"dataset CSV (default OUT/{DATASET})")
    r.add_argument("--oracle-phase", action="store_true", help="bin on the true LO phase")
    z = sub.add_parser("analyze", parents=[common], help="Wigner function, fits and fidelities")
    z.add_argument("--input", metavar="PATH", help=f"report or state JSON (default OUT/{REPORT})")
    z.add_argument("--fit-constraint", choices=["free", "a0_zero", "a1_zero", "a2_zero", "phases_equal"])
    f = sub.add_parser("pipeline", parents=[common], help="run every stage")
    f.add_argument("--oracle-phase", action="store_true", help="bin on the true LO phase")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.dry_run:
        print(f"configuration {cfg.name!r} (seed {cfg.seed}) is valid")
        return EXIT_OK
    try:
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CommandError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

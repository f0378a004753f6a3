"""Deterministic run/verify/export front end.

Configs and reports are JSON, traces are JSON-lines (one record per
construction step, preceded by a header carrying the config and its
hash), samples are CSV with 17-significant-digit decimals so every
binary64 value round-trips.  No file contains a timestamp: rerunning a
config byte-reproduces every artifact.

Exit codes: 0 all checks pass, 1 verification failure, 2 config/schema
error, 3 construction failure (enumeration exhausted, budget cap or
patch stage unreachable).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import birkhoff, franklin
from .approxkit import ApproxError
from .densesets import Enumeration, ExhaustedEnumeration, ScanCapExceeded
from .franklin import BudgetSchedule, ConstructionError
from .numkernel import RealPoly

EXIT_PASS = 0
EXIT_VERIFY_FAIL = 1
EXIT_SCHEMA = 2
EXIT_CONSTRUCTION = 3

TRACE_NAME = "trace.jsonl"
SAMPLES_NAME = "samples.csv"
REPORT_NAME = "report.json"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str                      # theorem1 | theorem2 | verify-only
    set_a: dict
    set_b: dict
    budget_base: float = 0.25
    budget_ratio: float = 0.25
    n_steps: int = 40
    window_half_width: float = 5.0
    grid_m: int = 2048
    sample_m: int = 256
    growth_samples: int = 1000
    chaplet_k: int = 6
    target_cycle: list = field(default_factory=lambda: [[1.0]])
    prefer_exact: bool = True
    literal_odd_factor: bool = False
    render_figures: bool = True

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        try:
            mode = d["mode"]
            cfg = RunConfig(
                mode=mode,
                set_a=dict(d["set_a"]),
                set_b=dict(d["set_b"]),
                budget_base=float(d.get("budget", {}).get("base", 0.25)),
                budget_ratio=float(d.get("budget", {}).get("ratio", 0.25)),
                n_steps=int(d.get("n_steps", 40)),
                window_half_width=float(d.get("window_half_width", 5.0)),
                grid_m=int(d.get("grid_m", 2048)),
                sample_m=int(d.get("sample_m", 256)),
                growth_samples=int(d.get("growth_samples", 1000)),
                chaplet_k=int(d.get("chaplet_k", 6)),
                target_cycle=[list(map(float, c))
                              for c in d.get("target_cycle",
                                             [[1.0], [0.5, 0.015625], [-0.75]])],
                prefer_exact=bool(d.get("prefer_exact", True)),
                literal_odd_factor=bool(d.get("literal_odd_factor", False)),
                render_figures=bool(d.get("render_figures", True)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.mode not in ("theorem1", "theorem2", "verify-only"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not (0.0 < self.budget_ratio < 1.0):
            raise ConfigError("budget ratio must lie in (0, 1)")
        for name in ("n_steps", "grid_m", "sample_m", "growth_samples",
                     "chaplet_k"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.window_half_width <= 0 or self.budget_base <= 0:
            raise ConfigError("window and budget base must be positive")
        if self.mode == "theorem2" and not self.target_cycle:
            raise ConfigError("theorem2 requires a target cycle")

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "set_a": self.set_a,
            "set_b": self.set_b,
            "budget": {"base": self.budget_base, "ratio": self.budget_ratio},
            "n_steps": self.n_steps,
            "window_half_width": self.window_half_width,
            "grid_m": self.grid_m,
            "sample_m": self.sample_m,
            "growth_samples": self.growth_samples,
            "chaplet_k": self.chaplet_k,
            "target_cycle": self.target_cycle,
            "prefer_exact": self.prefer_exact,
            "literal_odd_factor": self.literal_odd_factor,
            "render_figures": self.render_figures,
        }

    def hash(self) -> str:
        canon = json.dumps(self.as_dict(), sort_keys=True,
                           separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _json_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def write_trace(path: Path, cfg: RunConfig, state) -> None:
    lines = [_json_line({"record": "header", "config": cfg.as_dict(),
                         "config_hash": cfg.hash()})]
    for t in state.trace:
        rec = {"record": "step"}
        rec.update(t.as_record())
        lines.append(_json_line(rec))
    path.write_text("\n".join(lines) + "\n")


def cmd_export_samples(state, window: float, m: int, path: Path) -> None:
    """CSV rows "x,f,f_prime" on the uniform m-point window grid."""
    rows = ["x,f,f_prime"]
    for k in range(m):
        x = -window + 2.0 * window * k / (m - 1) if m > 1 else 0.0
        v, d = state.f_eval(float(x))
        rows.append(f"{_fmt(x)},{_fmt(v)},{_fmt(d)}")
    path.write_text("\n".join(rows) + "\n")


def _report_from(cfg: RunConfig, report, extra: Optional[dict] = None) -> dict:
    out = {
        "config_hash": cfg.hash(),
        "mode": cfg.mode,
        "overall_pass": bool(report.overall_pass),
        "checks": report.as_dict()["checks"],
    }
    if extra:
        out.update(extra)
    return out


def _render_figures(out_dir: Path, cfg: RunConfig, state) -> list:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    made = []
    w = cfg.window_half_width
    xs = np.linspace(-w, w, 512)
    pairs = [state.f_eval(float(x)) for x in xs]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 7), sharex=True)
    ax1.plot(xs, [p[0] for p in pairs], lw=1.2)
    ax1.set_ylabel("f(x)")
    ax1.grid(alpha=0.3)
    ax2.plot(xs, [p[1] for p in pairs], lw=1.2, color="tab:orange")
    ax2.set_ylabel("f'(x)")
    ax2.set_xlabel("x")
    ax2.grid(alpha=0.3)
    fig.suptitle("constructed function on the window")
    p1 = out_dir / "figure_function.png"
    fig.savefig(p1, dpi=110)
    plt.close(fig)
    made.append(p1.name)

    steps = [t for t in state.trace if t.kind != "seed"]
    if steps:
        fig, ax = plt.subplots(figsize=(7, 4))
        ns = [t.step for t in steps]
        lam = [abs(t.lam) if t.lam else None for t in steps]
        eta = [t.eta for t in steps]
        ax.plot(ns, [cfg.budget_base * cfg.budget_ratio ** n for n in ns],
                "k--", lw=1, label="budget")
        ax.plot([n for n, v in zip(ns, eta) if v], [v for v in eta if v],
                "o-", ms=3, label="eta cap")
        ax.plot([n for n, v in zip(ns, lam) if v], [v for v in lam if v],
                "s", ms=4, label="|lambda|")
        ax.set_yscale("log")
        ax.set_xlabel("step")
        ax.legend()
        ax.grid(alpha=0.3)
        fig.tight_layout()
        p2 = out_dir / "figure_trace.png"
        fig.savefig(p2, dpi=110)
        plt.close(fig)
        made.append(p2.name)
    return made


def _build_state(cfg: RunConfig):
    enum_a = Enumeration.from_descriptor(cfg.set_a)
    enum_b = Enumeration.from_descriptor(cfg.set_b)
    budgets = BudgetSchedule(cfg.budget_base, cfg.budget_ratio)
    if cfg.mode == "theorem2":
        chaplet = birkhoff.default_chaplet(cfg.chaplet_k)
        cycle = birkhoff.TargetCycle(tuple(RealPoly(tuple(c))
                                           for c in cfg.target_cycle))
        phi = birkhoff.build_phi(chaplet, cycle)
        design = birkhoff.design_epsilon_H(chaplet, phi)
        damper = birkhoff.build_H(chaplet, design)
        ustate = birkhoff.run_theorem2(
            enum_a, enum_b, phi, damper, budgets=budgets,
            n_steps=cfg.n_steps, literal_odd_factor=cfg.literal_odd_factor,
            prefer_exact=cfg.prefer_exact)
        return ustate.state, ustate
    state = franklin.run(enum_a, enum_b, budgets=budgets,
                         n_steps=cfg.n_steps, prefer_exact=cfg.prefer_exact)
    return state, None


def _verify_for(cfg: RunConfig, state, ustate):
    if ustate is not None:
        report = birkhoff.verify_universal(ustate)
        witnesses = [birkhoff.universality_witness(ustate, t)
                     for t in ustate.phi.cycle.targets]
        extra = {"witnesses": [
            {"target_index": w.target_index, "disc": w.disc,
             "error": w.error, "tol": w.tol, "passed": w.passed}
            for w in witnesses]}
        if not all(w.passed for w in witnesses):
            report.checks.append(franklin.CheckResult(
                "universality witnesses", False, -1.0,
                "a target missed its measured budget"))
        return report, extra
    window = (-cfg.window_half_width, cfg.window_half_width)
    return franklin.verify(state, window=window, grid_m=cfg.grid_m,
                           growth_samples=cfg.growth_samples), {}


def cmd_run(config_path: str, out_dir: str, seedless: bool = False) -> int:
    try:
        raw = json.loads(Path(config_path).read_text())
        cfg = RunConfig.from_dict(raw)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.mode == "verify-only":
        return cmd_verify(str(out / TRACE_NAME), out_dir)

    try:
        state, ustate = _build_state(cfg)
    except (ExhaustedEnumeration, ScanCapExceeded, ConstructionError,
            ApproxError) as exc:
        print(f"construction error: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION

    write_trace(out / TRACE_NAME, cfg, state)
    cmd_export_samples(state, cfg.window_half_width, cfg.sample_m,
                       out / SAMPLES_NAME)
    report, extra = _verify_for(cfg, state, ustate)
    report_dict = _report_from(cfg, report, extra)
    if cfg.render_figures:
        report_dict["figures"] = _render_figures(out, cfg, state)
    (out / REPORT_NAME).write_text(
        json.dumps(report_dict, sort_keys=True, indent=2) + "\n")
    if not report.overall_pass:
        print("verification failed", file=sys.stderr)
        return EXIT_VERIFY_FAIL
    return EXIT_PASS


def cmd_verify(trace_path: str, out_dir: Optional[str] = None) -> int:
    """Replay the trace invariants, rebuild the state, compare."""
    try:
        lines = Path(trace_path).read_text().splitlines()
        records = [json.loads(ln) for ln in lines if ln.strip()]
        if not records or records[0].get("record") != "header":
            raise ConfigError("trace missing header record")
        cfg = RunConfig.from_dict(records[0]["config"])
        if records[0].get("config_hash") != cfg.hash():
            raise ConfigError("config hash mismatch in trace header")
        steps = [r for r in records[1:] if r.get("record") == "step"]
        if len(steps) != cfg.n_steps:
            raise ConfigError(
                f"trace has {len(steps)} steps, config says {cfg.n_steps}")
    except (OSError, json.JSONDecodeError, KeyError, ConfigError) as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA

    # replayed invariants straight off the records
    budgets = BudgetSchedule(cfg.budget_base, cfg.budget_ratio)
    for r in steps:
        if r["kind"] == "seed" or r["lambda"] == 0.0:
            continue
        eps = budgets.epsilon(r["step"])
        if r["eta"] is not None and abs(r["lambda"]) > r["eta"]:
            print(f"step {r['step']}: lambda beyond eta", file=sys.stderr)
            return EXIT_VERIFY_FAIL
        for sup in (r["sup_disk"], r["sup_real"]):
            if sup is not None and abs(r["lambda"]) * sup >= eps:
                print(f"step {r['step']}: smallness margin violated",
                      file=sys.stderr)
                return EXIT_VERIFY_FAIL
        if (r["sup_growth"] is not None
                and abs(r["lambda"]) * r["sup_growth"] >= 2.0 ** (-r["step"])):
            print(f"step {r['step']}: growth margin violated",
                  file=sys.stderr)
            return EXIT_VERIFY_FAIL

    # fresh rebuild must reproduce the trace bit for bit
    try:
        state, ustate = _build_state(cfg)
    except (ExhaustedEnumeration, ScanCapExceeded, ConstructionError,
            ApproxError) as exc:
        print(f"construction error: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    fresh = [t.as_record() for t in state.trace]
    replayed = [{k: v for k, v in r.items() if k != "record"} for r in steps]
    if fresh != replayed:
        print("trace does not match a fresh rebuild", file=sys.stderr)
        return EXIT_VERIFY_FAIL
    report, _ = _verify_for(cfg, state, ustate)
    if not report.overall_pass:
        print("verification failed on the rebuilt state", file=sys.stderr)
        return EXIT_VERIFY_FAIL
    return EXIT_PASS


def _export_entry(config_path: str, out_dir: str) -> int:
    try:
        cfg = RunConfig.from_dict(json.loads(Path(config_path).read_text()))
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        state, _ = _build_state(cfg)
    except (ExhaustedEnumeration, ScanCapExceeded, ConstructionError,
            ApproxError) as exc:
        print(f"construction error: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cmd_export_samples(state, cfg.window_half_width, cfg.sample_m,
                       out / SAMPLES_NAME)
    return EXIT_PASS


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="orderiso",
        description="order-isomorphism constructions: run, verify, export")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a config end to end")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=".")
    p_run.add_argument("--seedless", action="store_true",
                       help="reject any nondeterministic option")

    p_ver = sub.add_parser("verify", help="replay and re-check a trace")
    p_ver.add_argument("trace")
    p_ver.add_argument("--out", default=None)

    p_exp = sub.add_parser("export-samples", help="write the samples CSV")
    p_exp.add_argument("--config", required=True)
    p_exp.add_argument("--out", default=".")

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out, args.seedless)
    if args.command == "verify":
        return cmd_verify(args.trace, args.out)
    return _export_entry(args.config, args.out)


if __name__ == "__main__":
    sys.exit(main())

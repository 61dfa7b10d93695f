"""File-based pipeline stages.

Each stage reads its upstream artifacts from the output directory and writes
its own, named ``{stage}-{hash}.*``.  The hash covers the config fields the
stage reads plus the hashes of its upstream stages, so editing e.g. the risk
tolerances only invalidates ``backtest`` and ``report``.  The ``.json`` file
of a stage is written last and marks it complete.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np
from filelock import FileLock

from . import plot
from .audit import leaky_vs_clean
from .config import PipelineConfig
from .features import IndicatorSpec, LabeledDataset, build_dataset, expand_features, feature_matrix
from .ingestion import CalendarFrame, Category, align_calendar, impute, load_manifest, load_sources, select_training_range, to_date
from .models import feature_importance, fit_classifier
from .reduce import ReducePipeline, fit_pipeline
from .trading import PricePath, optimal_threshold, summarize, tau_sweep
from .validation import CVReport, SearchSpace, nested_cv, time_series_folds
from .validation.cv import audit_entries

log = logging.getLogger(__name__)

STAGES = ("ingest", "featurize", "reduce", "tune", "evaluate", "backtest", "audit", "report")

# upstream stages, and the config fields (dotted paths) each stage reads
DEPENDS: dict[str, tuple[str, ...]] = {
    "ingest": (),
    "featurize": ("ingest",),
    "reduce": ("featurize",),
    "tune": ("featurize", "reduce"),
    "evaluate": ("featurize", "tune"),
    "backtest": ("ingest", "evaluate"),
    "audit": ("featurize", "tune"),
    "report": ("evaluate", "backtest", "audit"),
}
READS: dict[str, tuple[str, ...]] = {
    "ingest": ("manifest", "calendar", "imputation", "target_column", "trading.start"),
    "featurize": ("features", "target_column", "trading.start", "trading.end"),
    "reduce": ("reduce",),
    "tune": ("models", "validation", "seed", "audit.allow_leakage_for_demo"),
    "evaluate": ("seed",),
    "backtest": ("trading",),
    "audit": ("audit", "seed"),
    "report": (),
}


class DependencyError(RuntimeError):
    def __init__(self, stage: str, path: Path):
        super().__init__(f"missing upstream artifact {path.name}: run stage '{stage}' first")
        self.stage = stage
        self.path = path


class AuditViolation(RuntimeError):
    def __init__(self, report_path: Path, n: int):
        super().__init__(f"{n} fit-scope violation(s); see {report_path}")
        self.report_path = report_path


def _pick(doc: dict, dotted: str) -> Any:
    for part in dotted.split("."):
        doc = doc[part]
    return doc


def _digest(obj: Any) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def input_digests(cfg: PipelineConfig) -> dict[str, str]:
    """Content digests of the manifest and every source file it lists."""
    mpath = cfg.manifest_path()
    out = {"manifest": _file_digest(mpath)}
    for spec in load_manifest(mpath):
        out[spec.path.name] = _file_digest(spec.path)
    return out


def stage_hashes(cfg: PipelineConfig) -> dict[str, str]:
    fields = cfg.hashed_fields()
    hashes: dict[str, str] = {}
    for stage in STAGES:
        doc = {
            "stage": stage,
            "config": {f: _pick(fields, f) for f in READS[stage]},
            "upstream": {d: hashes[d] for d in DEPENDS[stage]},
        }
        if stage == "ingest":
            doc["inputs"] = input_digests(cfg)
        hashes[stage] = _digest(doc)[:12]
    return hashes


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, dict):
        return json.dumps(v, sort_keys=True)
    return str(v)


@dataclass
class Context:
    cfg: PipelineConfig
    out: Path
    hashes: dict[str, str]

    def path(self, stage: str, suffix: str = "", ext: str = "json") -> Path:
        return self.out / f"{stage}-{self.hashes[stage]}{suffix}.{ext}"

    def require(self, stage: str, suffix: str = "", ext: str = "json") -> Path:
        p = self.path(stage, suffix, ext)
        if not p.exists() or not self.path(stage).exists():
            raise DependencyError(stage, p)
        return p

    def manifest(self, stage: str) -> dict:
        return json.loads(self.require(stage).read_text())

    def finish(self, stage: str, payload: dict) -> Path:
        doc = {"stage": stage, "hash": self.hashes[stage], "upstream": {d: self.hashes[d] for d in DEPENDS[stage]}, **payload}
        p = self.path(stage)
        _write_text(p, _dumps(doc))
        return p


def _load_dataset(path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray | None, list[str]]:
    frame = CalendarFrame.from_csv(path)
    names = [n for n in frame.names if n != "y"]
    y = frame.columns["y"].astype(np.int8) if "y" in frame.columns else None
    return frame.dates, frame.matrix(names), y, names


def _dataset_csv(dates, X, names, y=None) -> str:
    header = ["date", *names] + (["y"] if y is not None else [])
    rows = []
    for i, d in enumerate(dates):
        row = [str(d), *(repr(float(v)) for v in X[i])]
        if y is not None:
            row.append(str(int(y[i])))
        rows.append(row)
    return _csv_text(header, rows)


# ---------------------------------------------------------------- stages


def stage_ingest(ctx: Context) -> dict:
    cfg = ctx.cfg
    series = load_sources(load_manifest(cfg.manifest_path()))
    frame = align_calendar(series, cfg.calendar.start, cfg.calendar.end)
    raw_missing = frame.n_missing()
    frame = impute(frame, cfg.imputation)
    if cfg.target_column not in frame.columns:
        raise KeyError(f"target column {cfg.target_column!r} is not among the sources")
    last_train = to_date(cfg.trading.start) - np.timedelta64(1, "D")
    start, end = select_training_range(frame.slice(None, last_train))
    frame.to_csv(ctx.path("ingest", "", "csv"))
    sel = frame.slice(start, end)
    return {
        "columns": {n: frame.categories[n].value for n in frame.names},
        "calendar": [str(frame.start), str(frame.end)],
        "training_range": [str(start), str(end)],
        "missing_before_impute": raw_missing,
        "missing_after_impute": frame.n_missing(),
        "missing_in_range": sel.n_missing(),
    }


def _feature_specs(cfg: PipelineConfig) -> list[IndicatorSpec]:
    return [IndicatorSpec(k, w) for k in cfg.features.kinds for w in cfg.features.windows]


def stage_featurize(ctx: Context) -> dict:
    cfg = ctx.cfg
    meta = ctx.manifest("ingest")
    frame = CalendarFrame.from_csv(ctx.require("ingest", "", "csv"), meta["columns"])
    base = cfg.features.base_columns
    if base == "internal":
        base = [n for n in frame.names if frame.categories[n] is Category.INTERNAL]
    expanded = expand_features(frame, base, _feature_specs(cfg))

    r0, r1 = (to_date(d) for d in meta["training_range"])
    t0, t1 = to_date(cfg.trading.start), to_date(cfg.trading.end)
    # indicator warm-ups can eat into the start of the raw range
    start, end = select_training_range(expanded.slice(r0, r1))
    train = build_dataset(expanded, cfg.target_column, cfg.features.lag, start, end)

    quarter = expanded.slice(t0, t1)
    if quarter.n_missing():
        bad = [n for n in quarter.names if np.isnan(quarter.columns[n]).any()]
        raise ValueError(f"trading range has missing feature values in {bad[:5]}")
    Xq, names = feature_matrix(quarter)
    _write_text(ctx.path("featurize", "", "csv"), _dataset_csv(train.dates, train.X, train.feature_names, train.y))
    _write_text(ctx.path("featurize", "-trade", "csv"), _dataset_csv(quarter.dates, Xq, names))
    return {
        "base_columns": list(base),
        "n_features": len(train.feature_names),
        "training_range": [str(train.dates[0]), str(train.dates[-1])],
        "n_rows": len(train),
        "positive_rate": float(np.mean(train.y)),
        "trading_range": [str(t0), str(t1)],
    }


def _train_data(ctx: Context) -> LabeledDataset:
    dates, X, y, names = _load_dataset(ctx.require("featurize", "", "csv"))
    return LabeledDataset(dates, X, y, names)


def stage_reduce(ctx: Context) -> dict:
    data = _train_data(ctx)
    rows = np.arange(len(data))
    pipes = {}
    for t in ctx.cfg.reduce.evr_targets:
        pipe = fit_pipeline(data.X, rows, t, tag=f"evr{t}")
        pipes[_key(t)] = pipe.to_dict()
        log.info("reduce: evr %.2f -> %d components", t, pipe.pca.k)
    return {"pipelines": pipes, "ks": {k: p["pca"]["k"] for k, p in pipes.items()}}


def _key(evr: float) -> str:
    return f"{evr:g}"


def _space(cfg: PipelineConfig, kind: str) -> SearchSpace:
    return SearchSpace.from_dict(cfg.models[kind].model_dump(mode="json", exclude_none=True))


def stage_tune(ctx: Context) -> dict:
    cfg, v = ctx.cfg, ctx.cfg.validation
    data = _train_data(ctx)
    reduce_meta = ctx.manifest("reduce")
    outer = time_series_folds(len(data), v.outer_k, v.min_train_fraction)
    leaky = cfg.audit.allow_leakage_for_demo
    rows = np.arange(len(data))
    reports = []
    for kind in cfg.models:
        space = _space(cfg, kind)
        for t in cfg.reduce.evr_targets:
            t0 = time.perf_counter()
            rep = nested_cv(
                kind, data, outer, space, v.budget, cfg.seed,
                inner_k=v.inner_k, min_train_fraction=v.min_train_fraction, evr_target=t,
                reduce_scope="all" if leaky else "train", allow_leakage_for_demo=leaky,
                fit_final=False, init_points=v.init_points, progress=log.info,
            )
            pipe = ReducePipeline.from_dict(reduce_meta["pipelines"][_key(t)])
            rep.final_pipeline = pipe
            rep.final_model = fit_classifier(kind, pipe.transform(data.X), data.y, rep.final_hp, seed=cfg.seed, rows=rows)
            log.info("tune %s evr=%s: mean acc %.3f (%.1fs)", kind, t, rep.mean.accuracy, time.perf_counter() - t0)
            reports.append(rep)
    rows_csv = [r for rep in reports for r in rep.csv_rows()]
    header = ["fold", "model", "evr_target", "hp", "accuracy", "precision", "recall", "f1", "auc"]
    _write_text(ctx.path("tune", "", "csv"), _csv_text(header, [[_cell(r[h]) for h in header] for r in rows_csv]))
    return {"outer_folds": outer.to_dict(), "reports": [rep.to_dict() for rep in reports]}


def _reports(ctx: Context) -> list[CVReport]:
    return [CVReport.from_dict(d) for d in ctx.manifest("tune")["reports"]]


TABLE_HEADER = [
    "model", "evr_target", "n_components", "accuracy", "f1", "precision", "recall", "auc",
    "positive_rate", "predicted_positive_rate", "all_long_folds", "degenerate_all_long", "t_star",
]


def stage_evaluate(ctx: Context) -> dict:
    dates_q, Xq, _, _ = _load_dataset(ctx.require("featurize", "-trade", "csv"))
    table, entries = [], {}
    for rep in _reports(ctx):
        p_oof, y_oof = rep.oof()
        try:
            t_star = optimal_threshold(p_oof, y_oof)
        except ValueError:
            t_star = 0.5
        probs = rep.final_model.predict_proba(rep.final_pipeline.transform(Xq))
        m = rep.mean
        row = {
            "model": rep.kind,
            "evr_target": rep.evr_target,
            "n_components": rep.final_pipeline.pca.k if rep.final_pipeline.pca is not None else Xq.shape[1],
            "accuracy": m.accuracy, "f1": m.f1, "precision": m.precision, "recall": m.recall, "auc": m.auc,
            "positive_rate": rep.pooled.positive_rate,
            "predicted_positive_rate": rep.pooled.predicted_positive_rate,
            "all_long_folds": sum(f.metrics.all_long for f in rep.folds),
            "degenerate_all_long": rep.degenerate_all_long,
            "t_star": t_star,
        }
        table.append(row)
        entries[f"{rep.kind}@{_key(rep.evr_target)}"] = {
            "model": rep.kind, "evr_target": rep.evr_target, "t_star": t_star,
            "probs": [float(p) for p in probs],
        }
    _write_text(ctx.path("evaluate", "", "csv"), _csv_text(TABLE_HEADER, [[_cell(r[h]) for h in TABLE_HEADER] for r in table]))
    importance = _importance(ctx)
    return {"table": table, "predictions": entries, "dates": [str(d) for d in dates_q], "importance": importance}


def _importance(ctx: Context) -> list[dict]:
    """Random-forest impurity importance over the standardized raw features."""
    data = _train_data(ctx)
    pipe = fit_pipeline(data.X, np.arange(len(data)), None, tag="importance")
    hp = {"n_trees": 50, "max_depth": 6, "max_features_fraction": 0.3}
    model = fit_classifier("RandomForest", pipe.transform(data.X), data.y, hp, seed=ctx.cfg.seed)
    imp = feature_importance(model)
    order = np.argsort(-imp, kind="stable")[:25]
    return [{"feature": data.feature_names[i], "importance": float(imp[i])} for i in order]


def _prices(ctx: Context) -> PricePath:
    cfg = ctx.cfg
    meta = ctx.manifest("ingest")
    frame = CalendarFrame.from_csv(ctx.require("ingest", "", "csv"), meta["columns"])
    q = frame.slice(cfg.trading.start, cfg.trading.end)
    return PricePath(q.dates, q.columns[cfg.target_column])


def _label(model: str, evr: float) -> str:
    return f"{model} evr{round(evr * 100):d}"


def stage_backtest(ctx: Context) -> dict:
    cfg = ctx.cfg
    prices = _prices(ctx)
    ev = ctx.manifest("evaluate")
    summary, ledger_rows = [], []
    headline: dict[float, dict] = {}
    for key, e in sorted(ev["predictions"].items()):
        sweep = tau_sweep(prices, e["probs"], e["t_star"], cfg.trading.taus)
        for s in summarize(sweep, prices):
            summary.append({"model": e["model"], "evr_target": e["evr_target"], "t_star": e["t_star"], **s})
        for tau, led in sorted(sweep.items()):
            for t, cum in zip(led.entries, led.cumulative_pnl):
                ledger_rows.append([e["model"], _cell(e["evr_target"]), repr(tau), str(t.date), t.side.value,
                                    repr(t.entry), repr(t.exit), repr(t.pnl), repr(float(cum)), repr(t.confidence)])
        head = tau_sweep(prices, e["probs"], e["t_star"], [cfg.trading.headline_tau])[cfg.trading.headline_tau]
        headline.setdefault(e["evr_target"], {})[e["model"]] = head
        plot.emit_plot(head, prices, ctx.path("backtest", f"-{e['model']}-evr{round(e['evr_target'] * 100)}", "svg"),
                       label=f"{_label(e['model'], e['evr_target'])} tau={cfg.trading.headline_tau:g}", with_buy_and_hold=True)
    for evr, ledgers in sorted(headline.items()):
        plot.emit_overlay(ledgers, prices, ctx.path("backtest", f"-overlay-evr{round(evr * 100)}", "svg"),
                          f"P&L at tau={cfg.trading.headline_tau:g}, explained variance {evr:.0%}")
    _write_text(ctx.path("backtest", "-ledgers", "csv"), _csv_text(
        ["model", "evr_target", "tau", "date", "side", "entry", "exit", "pnl", "cum_pnl", "confidence"], ledger_rows))
    header = ["model", "evr_target", "t_star", "tau", "pnl", "buy_and_hold_pnl", "relative_to_buy_and_hold", "n_long", "n_short", "n_abstain"]
    _write_text(ctx.path("backtest", "", "csv"), _csv_text(header, [[_cell(r[h]) for h in header] for r in summary]))
    bh = float(prices.close[-1] - prices.close[0])
    return {
        "buy_and_hold": {"pnl": bh, "return": float(prices.close[-1] / prices.close[0] - 1), "first": float(prices.close[0]), "last": float(prices.close[-1])},
        "summary": summary,
        "differs_from_buy_and_hold": sorted({r["tau"] for r in summary if r["pnl"] != bh}),
    }


def stage_audit(ctx: Context) -> dict:
    cfg = ctx.cfg
    tune = ctx.manifest("tune")
    data = _train_data(ctx)
    n = len(data)
    checks = []
    for d in tune["reports"]:
        label = _label(d["kind"], d["evr_target"])
        for f in d["folds"]:
            for r in audit_entries(f["fingerprints"]):
                checks.append({"where": f"{label} fold {f['index']}", **r.to_dict()})
        final = []
        if d.get("final_pipeline"):
            final += [{"fingerprint": fp, "allowed": [0, n]} for fp in
                      (d["final_pipeline"]["standardizer"]["fingerprint"], (d["final_pipeline"]["pca"] or {}).get("fingerprint")) if fp]
        if d.get("final_model"):
            final.append({"fingerprint": d["final_model"]["fingerprint"], "allowed": [0, n]})
        for r in audit_entries(final):
            checks.append({"where": f"{label} final", **r.to_dict()})
    violations = [c for c in checks if not c["passed"]]

    demo = cfg.audit.leak_demo
    runs = []
    for s in range(demo.seeds):
        cmp = leaky_vs_clean(data, demo.kind, demo.hp, seed=cfg.seed + s, test_fraction=demo.test_fraction, evr_target=demo.evr_target)
        runs.append({"seed": cfg.seed + s, **cmp.to_dict()})
    gains = [r["accuracy_gain"] for r in runs]
    log.info("audit: %d checks, %d violations; leak demo mean gain %.3f", len(checks), len(violations), float(np.mean(gains)))
    return {
        "n_checks": len(checks),
        "violations": violations,
        "passed": not violations,
        "leak_demo": {"kind": demo.kind, "hp": demo.hp, "runs": runs, "mean_accuracy_gain": float(np.mean(gains))},
    }


def _fmt(v: Any, digits: int = 3) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, float):
        return f"{v:.{digits}f}"
    return str(v)


def stage_report(ctx: Context) -> dict:
    cfg = ctx.cfg
    ev, bt, au = ctx.manifest("evaluate"), ctx.manifest("backtest"), ctx.manifest("audit")
    prices = _prices(ctx)
    bh = bt["buy_and_hold"]
    lines = [
        "# Bitcoin next-day direction: run report",
        "",
        f"Stage hashes: {', '.join(f'{s}={h}' for s, h in ctx.hashes.items())}",
        "",
        "## Cross-validated classification metrics",
        "",
        "| Model | Expl var (%) | k | Acc | F1 | Prec | Recall | AUC | Pos. rate | All-long folds | Degenerate all-long | t* |",
        "|---|---|---|---|---|---|---|---|---|---|---|---|",
    ]
    for r in ev["table"]:
        flag = "**YES**" if r["degenerate_all_long"] else "no"
        lines.append(
            f"| {r['model']} | {round(r['evr_target'] * 100)} | {r['n_components']} | {_fmt(r['accuracy'])} | {_fmt(r['f1'])} | "
            f"{_fmt(r['precision'])} | {_fmt(r['recall'])} | {_fmt(r['auc'])} | {_fmt(r['positive_rate'])} | "
            f"{r['all_long_folds']} | {flag} | {_fmt(r['t_star'])} |"
        )
    degenerate = [f"{r['model']} ({round(r['evr_target'] * 100)}%)" for r in ev["table"] if r["degenerate_all_long"]]
    lines += [
        "",
        "A row is flagged degenerate when every out-of-fold prediction is long: recall is 1 and precision equals the positive-class rate.",
        f"Flagged: {', '.join(degenerate) if degenerate else 'none'}.",
        "",
        "## Trading, " + f"{cfg.trading.start} to {cfg.trading.end}",
        "",
        f"Buy and hold one unit: {bh['first']:,.2f} -> {bh['last']:,.2f} USD, P&L {bh['pnl']:+,.2f} ({bh['return']:+.2%}).",
        "",
        f"P&L at the headline risk tolerance tau = {cfg.trading.headline_tau:g}:",
        "",
        "| Model | Expl var (%) | t* | P&L (USD) | vs buy and hold | long / short / abstain |",
        "|---|---|---|---|---|---|",
    ]
    tau_h = float(cfg.trading.headline_tau)
    for r in bt["summary"]:
        if r["tau"] != tau_h:
            continue
        lines.append(
            f"| {r['model']} | {round(r['evr_target'] * 100)} | {_fmt(r['t_star'])} | {r['pnl']:+,.2f} | "
            f"{r['relative_to_buy_and_hold']:+.1%} | {r['n_long']} / {r['n_short']} / {r['n_abstain']} |"
        )
    lines += ["", "Risk-tolerance sweep (P&L in USD):", ""]
    taus = sorted({r["tau"] for r in bt["summary"]})
    lines.append("| Model | Expl var (%) | " + " | ".join(f"tau={t:g}" for t in taus) + " |")
    lines.append("|---|---|" + "---|" * len(taus))
    by_key: dict[tuple, dict] = {}
    for r in bt["summary"]:
        by_key.setdefault((r["model"], r["evr_target"]), {})[r["tau"]] = r["pnl"]
    for (m, e), pnl in by_key.items():
        lines.append(f"| {m} | {round(e * 100)} | " + " | ".join(f"{pnl[t]:+,.0f}" for t in taus) + " |")

    overlays = []
    for evr in cfg.reduce.evr_targets:
        name = ctx.path("report", f"-overlay-evr{round(evr * 100)}", "svg")
        ledgers = {}
        for key, e in sorted(ev["predictions"].items()):
            if e["evr_target"] == evr:
                ledgers[e["model"]] = tau_sweep(prices, e["probs"], e["t_star"], [tau_h])[tau_h]
        if ledgers:
            plot.emit_overlay(ledgers, prices, name, f"P&L at tau={tau_h:g}, explained variance {evr:.0%}")
            overlays.append(name.name)
    lines += ["", "Overlays: " + ", ".join(overlays), ""]

    demo = au["leak_demo"]
    lines += [
        "## Leakage audit",
        "",
        f"Fit-scope checks: {au['n_checks']}, violations: {len(au['violations'])}.",
        "",
        f"Leaky vs clean {demo['kind']} over {len(demo['runs'])} seeds: mean accuracy gain from training on the test block "
        f"{demo['mean_accuracy_gain']:+.3f}.",
        "",
        "## Most important raw features (random forest, standardized inputs)",
        "",
    ]
    for i, f in enumerate(ev["importance"][:10], 1):
        lines.append(f"{i}. {f['feature']} ({f['importance']:.4f})")
    lines.append("")
    _write_text(ctx.path("report", "", "md"), "\n".join(lines))
    _write_text(ctx.path("report", "", "csv"), ctx.require("evaluate", "", "csv").read_text())
    return {"degenerate_all_long": degenerate, "overlays": overlays}


RUNNERS: dict[str, Callable[[Context], dict]] = {
    "ingest": stage_ingest,
    "featurize": stage_featurize,
    "reduce": stage_reduce,
    "tune": stage_tune,
    "evaluate": stage_evaluate,
    "backtest": stage_backtest,
    "audit": stage_audit,
    "report": stage_report,
}


def run_stage(stage: str, cfg: PipelineConfig, out: str | Path | None = None) -> Path:
    """Run one stage and return the path of its completion manifest.

    Raises :class:`DependencyError` if an upstream artifact for the current
    config is absent and :class:`AuditViolation` if the audit finds a
    fit-scope violation (its report is still written).
    """
    if stage not in RUNNERS:
        raise ValueError(f"unknown stage {stage!r}; choose from {', '.join(STAGES)}")
    out_dir = cfg.resolve_output_dir(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with FileLock(str(out_dir / ".btcdirection.lock")):
        ctx = Context(cfg, out_dir, stage_hashes(cfg))
        for dep in DEPENDS[stage]:
            ctx.require(dep)
        t0 = time.perf_counter()
        payload = RUNNERS[stage](ctx)
        path = ctx.finish(stage, payload)
        log.info("%s done in %.1fs -> %s", stage, time.perf_counter() - t0, path.name)
    if stage == "audit" and not payload["passed"]:
        raise AuditViolation(path, len(payload["violations"]))
    return path


def run_all(cfg: PipelineConfig, out: str | Path | None = None) -> list[Path]:
    return [run_stage(s, cfg, out) for s in STAGES]

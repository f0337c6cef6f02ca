"""Detection and correction precision/recall/F1, character and sentence level.

Detection scores finding the error positions (source != target); correction
additionally requires the predicted character to be right. At sentence level
a detection counts only when the predicted change-position set equals the
gold set exactly, and a correction only when the prediction equals the target
exactly.

Zero-denominator convention: a precision (or recall) whose denominator is
empty reports 1.0 when the opposite set is also empty (a no-op system on an
error-free set is perfect, not undefined) and 0.0 otherwise; raw counts are
always carried alongside so nothing is hidden.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .decoding import dual_predict
from .model import BaseCorrector, PluginModule, check_compatible, predict_greedy
from .text import ParallelPair

Triple = tuple[Sequence[int], Sequence[int], Sequence[int]]  # (source, target, prediction)


@dataclass(frozen=True)
class TaskScores:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class MetricsReport:
    granularity: str  # "character" | "sentence"
    detection: TaskScores
    correction: TaskScores
    meta: dict = field(default_factory=dict)


def _scores(tp: int, fp: int, fn: int) -> TaskScores:
    pred, gold = tp + fp, tp + fn
    if pred > 0:
        precision = tp / pred
    else:
        precision = 1.0 if gold == 0 else 0.0
    if gold > 0:
        recall = tp / gold
    else:
        recall = 1.0 if pred == 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return TaskScores(precision, recall, f1, tp, fp, fn)


def _check(triples: list[Triple]) -> None:
    for src, tgt, pred in triples:
        if not len(src) == len(tgt) == len(pred):
            raise ValueError("source/target/prediction length mismatch")


def detection_metrics(triples: list[Triple], granularity: str = "character") -> TaskScores:
    _check(triples)
    tp = fp = fn = 0
    if granularity == "character":
        for src, tgt, pred in triples:
            for s, t, p in zip(src, tgt, pred):
                gold_err = s != t
                pred_err = s != p
                tp += gold_err and pred_err
                fp += pred_err and not gold_err
                fn += gold_err and not pred_err
    elif granularity == "sentence":
        for src, tgt, pred in triples:
            gold = {i for i, (s, t) in enumerate(zip(src, tgt)) if s != t}
            hyp = {i for i, (s, p) in enumerate(zip(src, pred)) if s != p}
            hit = bool(hyp) and hyp == gold
            tp += hit
            fp += bool(hyp) and not hit
            fn += bool(gold) and not hit
    else:
        raise ValueError(f"unknown granularity {granularity!r}")
    return _scores(tp, fp, fn)


def correction_metrics(triples: list[Triple], granularity: str = "character") -> TaskScores:
    _check(triples)
    tp = fp = fn = 0
    if granularity == "character":
        for src, tgt, pred in triples:
            for s, t, p in zip(src, tgt, pred):
                gold_err = s != t
                pred_err = s != p
                good = pred_err and p == t
                tp += good
                fp += pred_err and not good
                fn += gold_err and not good
    elif granularity == "sentence":
        for src, tgt, pred in triples:
            changed = any(s != p for s, p in zip(src, pred))
            gold = any(s != t for s, t in zip(src, tgt))
            good = changed and tuple(pred) == tuple(tgt)
            tp += good
            fp += changed and not good
            fn += gold and not good
    else:
        raise ValueError(f"unknown granularity {granularity!r}")
    return _scores(tp, fp, fn)


def predictions_for(model: BaseCorrector, pairs: list[ParallelPair],
                    plugin: Optional[PluginModule] = None,
                    decode_mode: str = "greedy") -> list[Triple]:
    if decode_mode not in ("greedy", "dual"):
        raise ValueError(f"unknown decode_mode {decode_mode!r}")
    triples: list[Triple] = []
    for pair in pairs:
        src = pair.source.ids
        if decode_mode == "greedy":
            pred = predict_greedy(model, src, plugin)
        else:
            trace = dual_predict(lambda ids: predict_greedy(model, ids, plugin), src)
            pred = list(trace.y_final)
        triples.append((src, pair.target.ids, tuple(pred)))
    return triples


def evaluate_dataset(model: BaseCorrector, pairs: list[ParallelPair],
                     plugin: Optional[PluginModule] = None,
                     decode_mode: str = "greedy") -> dict[str, MetricsReport]:
    """Character- and sentence-level reports for one decoded test set."""
    if not pairs:
        raise ValueError("empty test set")
    meta = {"decode_mode": decode_mode, "plugin": plugin.name if plugin else None,
            "sentences": len(pairs)}
    if plugin is not None:
        meta["fingerprint_ok"] = check_compatible(model, plugin)
    triples = predictions_for(model, pairs, plugin, decode_mode)
    return {
        g: MetricsReport(g, detection_metrics(triples, g), correction_metrics(triples, g), dict(meta))
        for g in ("character", "sentence")
    }


def format_report(reports: dict[str, MetricsReport]) -> str:
    lines = []
    meta = next(iter(reports.values())).meta
    plugin = meta.get("plugin") or "-"
    lines.append(f"# decode={meta.get('decode_mode')} plugin={plugin} sentences={meta.get('sentences')}")
    lines.append("granularity\ttask\tprecision\trecall\tf1\ttp\tfp\tfn")
    for g, rep in reports.items():
        for task, s in (("detection", rep.detection), ("correction", rep.correction)):
            lines.append(f"{g}\t{task}\t{s.precision:.4f}\t{s.recall:.4f}\t{s.f1:.4f}"
                         f"\t{s.tp}\t{s.fp}\t{s.fn}")
    return "\n".join(lines)

"""Span evaluation in the four match modes and inter-annotator agreement"""
import json
import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Set, Tuple, Union

from sklearn.metrics import cohen_kappa_score

from app.core.errors import EvaluationError, OverlappingSpansError
from app.schemas.evaluation import EVAL_MODES, EvalMode, Metrics, Span
from app.schemas.tagging import TaggedDocument, bio_runs
from app.utils.files import write_text

logger = logging.getLogger(__name__)


def spans_from_tags(documents: Iterable[TaggedDocument]) -> List[Span]:
    return [
        Span(document.doc_id, tagged.sentence.index, start, end)
        for document in documents
        for tagged in document.sentences
        for start, end in bio_runs(tagged.tags)
    ]


def _by_sentence(spans: Sequence[Span], name: str) -> Dict[Tuple[str, int], List[Span]]:
    grouped: Dict[Tuple[str, int], List[Span]] = defaultdict(list)
    for span in spans:
        if span.start < 0 or span.end <= span.start:
            raise EvaluationError(f"{name} span {tuple(span)} is empty or negative")
        grouped[(span.doc_id, span.sentence_index)].append(span)
    for key, group in grouped.items():
        group.sort(key=lambda s: (s.start, s.end))
        for previous, current in zip(group, group[1:]):
            if current.start < previous.end:
                raise OverlappingSpansError(
                    f"overlapping {name} spans in sentence {key}: {tuple(previous)} and {tuple(current)}"
                )
    return grouped


def _inside_tokens(spans: Iterable[Span]) -> Set[Tuple[str, int, int]]:
    return {
        (span.doc_id, span.sentence_index, t)
        for span in spans
        for t in range(span.start + 1, span.end)
    }


def _partial_matches(pred: Dict, gold: Dict) -> int:
    """Greedy left-to-right one-to-one matching of overlapping spans"""
    matched = 0
    for key, predicted in pred.items():
        available = list(gold.get(key, []))
        for p in predicted:
            for k, g in enumerate(available):
                if p.start < g.end and g.start < p.end:
                    matched += 1
                    del available[k]
                    break
    return matched


def evaluate(pred: Sequence[Span], gold: Sequence[Span], mode: EvalMode) -> Metrics:
    mode = EvalMode(mode)
    pred_groups = _by_sentence(pred, "predicted")
    gold_groups = _by_sentence(gold, "gold")

    if mode == EvalMode.EXACT:
        tp = len(set(pred) & set(gold))
        return Metrics.from_counts(tp, len(pred) - tp, len(gold) - tp)
    if mode == EvalMode.B:
        pred_starts = {(s.doc_id, s.sentence_index, s.start) for s in pred}
        gold_starts = {(s.doc_id, s.sentence_index, s.start) for s in gold}
        tp = len(pred_starts & gold_starts)
        return Metrics.from_counts(tp, len(pred_starts) - tp, len(gold_starts) - tp)
    if mode == EvalMode.I:
        pred_tokens, gold_tokens = _inside_tokens(pred), _inside_tokens(gold)
        tp = len(pred_tokens & gold_tokens)
        return Metrics.from_counts(tp, len(pred_tokens) - tp, len(gold_tokens) - tp)
    tp = _partial_matches(pred_groups, gold_groups)
    return Metrics.from_counts(tp, len(pred) - tp, len(gold) - tp)


def evaluate_all(pred: Sequence[Span], gold: Sequence[Span]) -> Dict[EvalMode, Metrics]:
    return {mode: evaluate(pred, gold, mode) for mode in EVAL_MODES}


def cohen_kappa(a1: Sequence[str], a2: Sequence[str]) -> float:
    """Token-level agreement between two annotators"""
    if len(a1) != len(a2):
        raise EvaluationError(f"annotation lengths differ: {len(a1)} vs {len(a2)}")
    if not a1:
        raise EvaluationError("cannot compute agreement on empty annotations")
    if list(a1) == list(a2):
        return 1.0
    return float(cohen_kappa_score(list(a1), list(a2)))


def format_report(metrics: Dict[EvalMode, Metrics], title: str = "Training") -> str:
    """One row per evaluation mode with precision, recall and F-score"""
    lines = [f"{title}\tmode\tprecision\trecall\tf_score"]
    for mode in EVAL_MODES:
        if mode in metrics:
            m = metrics[mode]
            lines.append(f"\t{mode.value}\t{m.precision:.4f}\t{m.recall:.4f}\t{m.f_score:.4f}")
    return "".join(f"{line}\n" for line in lines)


def write_report(
    metrics: Dict[EvalMode, Metrics],
    tsv_path: Union[str, Path],
    json_path: Union[str, Path],
    title: str = "Training",
) -> None:
    write_text(tsv_path, format_report(metrics, title))
    summary = {mode.value: m.model_dump() for mode, m in metrics.items()}
    write_text(json_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for mode, m in metrics.items():
        logger.info("%s: P=%.4f R=%.4f F=%.4f", mode.value, m.precision, m.recall, m.f_score)

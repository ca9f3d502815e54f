"""Linear-chain CRF over the BIO label set: scoring, forward-backward and Viterbi

Training uses the unconstrained partition function. The BIO constraints
(start -> I-software, O -> I-software) are applied at decoding time only.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from app.core.errors import NumericalError, TrainingError
from app.schemas.tagging import LABEL_INDEX, LABELS, BioTag
from app.services.crf_features import TEMPLATE_ID
from app.utils.files import write_text

N_LABELS = len(LABELS)
O, B, I = (LABEL_INDEX[BioTag.O], LABEL_INDEX[BioTag.B], LABEL_INDEX[BioTag.I])
MODEL_HEADER = "#crf-model"
MODEL_FORMAT = "v1"

# One integer array of feature indices per token
EncodedSentence = List[np.ndarray]


@dataclass
class CrfModel:
    feature_index: Dict[str, int]
    feature_weights: np.ndarray
    transition_weights: np.ndarray
    start_weights: np.ndarray
    template_id: str = TEMPLATE_ID
    label_set: Tuple[BioTag, ...] = field(default=LABELS)

    def __post_init__(self):
        if self.feature_weights.shape != (len(self.feature_index), N_LABELS):
            raise TrainingError(
                f"feature weights have shape {self.feature_weights.shape}, "
                f"expected ({len(self.feature_index)}, {N_LABELS})"
            )
        if self.transition_weights.shape != (N_LABELS, N_LABELS) or self.start_weights.shape != (N_LABELS,):
            raise TrainingError("transition/start weights must cover exactly 3 labels")

    @classmethod
    def empty(cls, feature_names: Iterable[str] = (), template_id: str = TEMPLATE_ID) -> "CrfModel":
        names = sorted(set(feature_names))
        return cls(
            feature_index={name: i for i, name in enumerate(names)},
            feature_weights=np.zeros((len(names), N_LABELS)),
            transition_weights=np.zeros((N_LABELS, N_LABELS)),
            start_weights=np.zeros(N_LABELS),
            template_id=template_id,
        )

    def copy(self) -> "CrfModel":
        return CrfModel(
            feature_index=dict(self.feature_index),
            feature_weights=self.feature_weights.copy(),
            transition_weights=self.transition_weights.copy(),
            start_weights=self.start_weights.copy(),
            template_id=self.template_id,
        )

    def encode(self, features: Sequence[Sequence[str]]) -> EncodedSentence:
        """Feature names -> index arrays; features unknown to the model are dropped"""
        index = self.feature_index
        return [np.array([index[f] for f in token if f in index], dtype=np.int64) for token in features]

    def emissions(self, encoded: EncodedSentence, scales: Optional[List[np.ndarray]] = None) -> np.ndarray:
        out = np.zeros((len(encoded), N_LABELS))
        for t, idx in enumerate(encoded):
            if len(idx) == 0:
                continue
            rows = self.feature_weights[idx]
            out[t] = rows.sum(axis=0) if scales is None else scales[t] @ rows
        return out

    def weight_map(self) -> Dict[Tuple[str, BioTag], float]:
        return {
            (name, label): float(self.feature_weights[i, j])
            for name, i in self.feature_index.items()
            for j, label in enumerate(LABELS)
            if self.feature_weights[i, j] != 0.0
        }

    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.feature_weights).all()
            and np.isfinite(self.transition_weights).all()
            and np.isfinite(self.start_weights).all()
        )

    def dumps(self) -> str:
        lines = [f"{MODEL_HEADER}\t{MODEL_FORMAT}\t{self.template_id}"]
        for j, label in enumerate(LABELS):
            lines.append(f"S\t{label.value}\t{float(self.start_weights[j])!r}")
        for a, from_label in enumerate(LABELS):
            for b, to_label in enumerate(LABELS):
                lines.append(f"T\t{from_label.value}\t{to_label.value}\t{float(self.transition_weights[a, b])!r}")
        for name in sorted(self.feature_index):
            row = self.feature_weights[self.feature_index[name]]
            for j, label in enumerate(LABELS):
                lines.append(f"F\t{name}\t{label.value}\t{float(row[j])!r}")
        return "".join(f"{line}\n" for line in lines)

    @classmethod
    def loads(cls, text: str) -> "CrfModel":
        lines = text.splitlines()
        if not lines:
            raise TrainingError("empty model file")
        header = lines[0].split("\t")
        if len(header) != 3 or header[0] != MODEL_HEADER or header[1] != MODEL_FORMAT:
            raise TrainingError(f"not a {MODEL_FORMAT} CRF model file: {lines[0]!r}")
        start = np.zeros(N_LABELS)
        transitions = np.zeros((N_LABELS, N_LABELS))
        features: Dict[str, np.ndarray] = {}
        label_of = {label.value: LABEL_INDEX[label] for label in LABELS}
        try:
            for line in lines[1:]:
                fields = line.split("\t")
                if fields[0] == "S":
                    start[label_of[fields[1]]] = float(fields[2])
                elif fields[0] == "T":
                    transitions[label_of[fields[1]], label_of[fields[2]]] = float(fields[3])
                elif fields[0] == "F":
                    features.setdefault(fields[1], np.zeros(N_LABELS))[label_of[fields[2]]] = float(fields[3])
                elif line.strip():
                    raise ValueError(f"unknown row kind {fields[0]!r}")
        except (KeyError, IndexError, ValueError) as e:
            raise TrainingError(f"malformed model row {line!r}: {e}") from e
        names = sorted(features)
        weights = np.array([features[name] for name in names]).reshape(len(names), N_LABELS)
        return cls(
            feature_index={name: i for i, name in enumerate(names)},
            feature_weights=weights,
            transition_weights=transitions,
            start_weights=start,
            template_id=header[2],
        )


def sequence_score(emissions: np.ndarray, transitions: np.ndarray, start: np.ndarray, labels: Sequence[int]) -> float:
    score = start[labels[0]] + emissions[0, labels[0]]
    for t in range(1, len(labels)):
        score += transitions[labels[t - 1], labels[t]] + emissions[t, labels[t]]
    return float(score)


def forward(emissions: np.ndarray, transitions: np.ndarray, start: np.ndarray) -> Tuple[np.ndarray, float]:
    """Log-space forward variables and log partition"""
    n = emissions.shape[0]
    alpha = np.empty((n, N_LABELS))
    alpha[0] = start + emissions[0]
    for t in range(1, n):
        alpha[t] = logsumexp(alpha[t - 1][:, None] + transitions, axis=0) + emissions[t]
    return alpha, float(logsumexp(alpha[-1]))


def backward(emissions: np.ndarray, transitions: np.ndarray) -> np.ndarray:
    n = emissions.shape[0]
    beta = np.zeros((n, N_LABELS))
    for t in range(n - 2, -1, -1):
        beta[t] = logsumexp(transitions + (emissions[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def log_partition(emissions: np.ndarray, transitions: np.ndarray, start: np.ndarray) -> float:
    return forward(emissions, transitions, start)[1]


@dataclass
class SparseGradient:
    """Gradient with feature rows restricted to the features that fired"""

    rows: np.ndarray
    feature_values: np.ndarray
    transitions: np.ndarray
    start: np.ndarray

    def dense_features(self, n_features: int) -> np.ndarray:
        out = np.zeros((n_features, N_LABELS))
        out[self.rows] = self.feature_values
        return out


def token_weights(labels: Sequence[int], boost: float) -> np.ndarray:
    return np.where(np.asarray(labels) != O, 1.0 + boost, 1.0)


def loss_and_gradient(
    model: CrfModel,
    encoded: EncodedSentence,
    labels: Sequence[int],
    boost: float = 0.0,
    scales: Optional[List[np.ndarray]] = None,
) -> Tuple[float, SparseGradient]:
    """Weighted negative log-likelihood of the gold labels and its gradient

    The sentence NLL is scaled by the mean token weight, where tokens with a
    gold label other than O weigh 1 + boost.
    """
    n = len(encoded)
    if n == 0 or len(labels) != n:
        raise TrainingError(f"{len(labels)} labels for {n} tokens")
    T, S = model.transition_weights, model.start_weights
    E = model.emissions(encoded, scales)
    alpha, log_z = forward(E, T, S)
    beta = backward(E, T)
    nll = log_z - sequence_score(E, T, S, labels)
    if not np.isfinite(nll):
        raise NumericalError(f"non-finite loss {nll} in the forward pass")
    weight = float(token_weights(labels, boost).mean())

    unary = np.exp(alpha + beta - log_z)
    gold = np.zeros_like(unary)
    gold[np.arange(n), labels] = 1.0
    d_emissions = unary - gold

    d_transitions = np.zeros((N_LABELS, N_LABELS))
    for t in range(1, n):
        pair = alpha[t - 1][:, None] + T + (E[t] + beta[t])[None, :] - log_z
        d_transitions += np.exp(pair)
        d_transitions[labels[t - 1], labels[t]] -= 1.0
    d_start = d_emissions[0].copy()

    if any(len(idx) for idx in encoded):
        all_rows = np.concatenate(encoded)
        per_token = [
            np.repeat(d_emissions[t][None, :], len(idx), axis=0) if scales is None
            else scales[t][:, None] * d_emissions[t][None, :]
            for t, idx in enumerate(encoded)
        ]
        contributions = np.concatenate(per_token, axis=0)
        rows, inverse = np.unique(all_rows, return_inverse=True)
        values = np.zeros((len(rows), N_LABELS))
        np.add.at(values, inverse, contributions)
    else:
        rows = np.zeros(0, dtype=np.int64)
        values = np.zeros((0, N_LABELS))

    grad = SparseGradient(
        rows=rows,
        feature_values=weight * values,
        transitions=weight * d_transitions,
        start=weight * d_start,
    )
    if not (np.isfinite(grad.feature_values).all() and np.isfinite(grad.transitions).all()):
        raise NumericalError("non-finite gradient")
    return weight * nll, grad


def constrained_parameters(model: CrfModel) -> Tuple[np.ndarray, np.ndarray]:
    transitions = model.transition_weights.copy()
    start = model.start_weights.copy()
    transitions[O, I] = -np.inf
    start[I] = -np.inf
    return transitions, start


def viterbi(emissions: np.ndarray, transitions: np.ndarray, start: np.ndarray) -> List[int]:
    """Best label sequence; np.argmax keeps the lowest label index on ties"""
    n = emissions.shape[0]
    if n == 0:
        return []
    trellis = np.empty((n, N_LABELS))
    backpointers = np.zeros((n, N_LABELS), dtype=np.int64)
    trellis[0] = start + emissions[0]
    for t in range(1, n):
        scores = trellis[t - 1][:, None] + transitions
        backpointers[t] = np.argmax(scores, axis=0)
        trellis[t] = scores[backpointers[t], np.arange(N_LABELS)] + emissions[t]
    path = [int(np.argmax(trellis[-1]))]
    for t in range(n - 1, 0, -1):
        path.append(int(backpointers[t][path[-1]]))
    path.reverse()
    return path


def decode(model: CrfModel, encoded: EncodedSentence) -> List[int]:
    transitions, start = constrained_parameters(model)
    return viterbi(model.emissions(encoded), transitions, start)


def save_model(path: Union[str, Path], model: CrfModel) -> Path:
    return write_text(path, model.dumps())


def load_model(path: Union[str, Path]) -> CrfModel:
    return CrfModel.loads(Path(path).read_text(encoding="utf-8"))

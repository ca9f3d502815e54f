"""Generative label model over labeling-function votes, fit by EM

The true label is latent. Each group of correlated labeling functions votes with a
class-independent propensity, and a non-abstaining vote equals the latent label with
the group's accuracy.
"""
import logging
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import expit, logit

from app.core.errors import LabelModelError, NoSignalError, UnknownLabelingFunctionError
from app.schemas.weak_supervision import LabelingFunctionVote, LabelModel, Vote

logger = logging.getLogger(__name__)

PARAM_CLIP = 1e-6
JITTER = 1e-3
DEFAULT_TOLERANCE = 1e-6
DEFAULT_MAX_ITERATIONS = 500
DEFAULT_CORRELATION_THRESHOLD = 0.95


def _check_matrix(votes: np.ndarray, lf_ids: Sequence[str]) -> np.ndarray:
    votes = np.asarray(votes)
    if votes.ndim != 2:
        raise LabelModelError(f"vote matrix must be 2-dimensional, got shape {votes.shape}")
    if votes.shape[1] != len(lf_ids) or not lf_ids:
        raise LabelModelError(f"{votes.shape[1]} vote columns for {len(lf_ids)} labeling functions")
    if votes.shape[0] == 0:
        raise LabelModelError("vote matrix has no candidates")
    if not np.isin(votes, (Vote.ABSTAIN, Vote.NEGATIVE, Vote.POSITIVE)).all():
        raise LabelModelError("vote matrix may only contain -1, 0 and 1")
    return votes


def correlation_groups(
    votes: np.ndarray, threshold: float = DEFAULT_CORRELATION_THRESHOLD
) -> List[List[int]]:
    """Union LF columns whose votes agree on >= threshold of the rows where either votes"""
    m = votes.shape[1]
    parent = list(range(m))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    voted = votes != Vote.ABSTAIN
    for j in range(m):
        for k in range(j + 1, m):
            either = voted[:, j] | voted[:, k]
            if not either.any():
                continue
            agree = voted[:, j] & voted[:, k] & (votes[:, j] == votes[:, k])
            if agree.sum() / either.sum() >= threshold:
                parent[find(k)] = find(j)

    groups: dict = {}
    for j in range(m):
        groups.setdefault(find(j), []).append(j)
    return sorted(groups.values())


def group_votes(votes: np.ndarray, groups: Sequence[Sequence[int]]) -> np.ndarray:
    """One vote per group: the sign of the members' summed +1/-1 votes"""
    signed = np.where(votes == Vote.POSITIVE, 1, np.where(votes == Vote.NEGATIVE, -1, 0))
    out = np.full((votes.shape[0], len(groups)), Vote.ABSTAIN, dtype=np.int8)
    for g, members in enumerate(groups):
        total = signed[:, list(members)].sum(axis=1)
        out[total > 0, g] = Vote.POSITIVE
        out[total < 0, g] = Vote.NEGATIVE
    return out


class _GroupedEM:
    def __init__(self, grouped: np.ndarray):
        self.pos = (grouped == Vote.POSITIVE).astype(float)
        self.neg = (grouped == Vote.NEGATIVE).astype(float)
        self.voted = self.pos + self.neg
        self.propensity = self.voted.mean(axis=0)

    def evidence(self, accuracy: np.ndarray) -> np.ndarray:
        return (self.pos - self.neg) @ logit(accuracy)

    def posterior(self, prior: float, accuracy: np.ndarray) -> np.ndarray:
        return expit(logit(prior) + self.evidence(accuracy))

    def log_likelihood(self, prior: float, accuracy: np.ndarray) -> float:
        log_acc, log_err = np.log(accuracy), np.log1p(-accuracy)
        log_pos = np.log(prior) + self.pos @ log_acc + self.neg @ log_err
        log_neg = np.log1p(-prior) + self.pos @ log_err + self.neg @ log_acc
        # propensities do not depend on the latent label
        with np.errstate(divide="ignore"):
            log_prop = np.where(self.propensity > 0, np.log(self.propensity), 0.0)
            log_abst = np.where(self.propensity < 1, np.log1p(-self.propensity), 0.0)
        constant = self.voted @ log_prop + (1 - self.voted) @ log_abst
        return float(np.sum(np.logaddexp(log_pos, log_neg) + constant))

    def initial(self, seed: int):
        """Majority-vote initialisation with a seeded jitter on the accuracies"""
        majority = (self.pos - self.neg).sum(axis=1) > 0
        prior = np.clip(majority.mean(), PARAM_CLIP, 1 - PARAM_CLIP)
        agree = (self.pos * majority[:, None] + self.neg * ~majority[:, None]).sum(axis=0)
        counts = self.voted.sum(axis=0)
        accuracy = np.where(counts > 0, agree / np.maximum(counts, 1), 0.5)
        rng = np.random.default_rng(seed)
        accuracy = accuracy + rng.uniform(-JITTER, JITTER, size=accuracy.shape)
        return float(prior), np.clip(accuracy, PARAM_CLIP, 1 - PARAM_CLIP)

    def m_step(self, q: np.ndarray, accuracy: np.ndarray):
        prior = float(np.clip(q.mean(), PARAM_CLIP, 1 - PARAM_CLIP))
        counts = self.voted.sum(axis=0)
        correct = q @ self.pos + (1 - q) @ self.neg
        updated = np.where(counts > 0, correct / np.maximum(counts, 1), accuracy)
        return prior, np.clip(updated, PARAM_CLIP, 1 - PARAM_CLIP)


def fit_label_model(
    votes: np.ndarray,
    lf_ids: Sequence[str],
    seed: int = 42,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    tolerance: float = DEFAULT_TOLERANCE,
    correlation_threshold: Optional[float] = DEFAULT_CORRELATION_THRESHOLD,
) -> LabelModel:
    """Fit accuracies, propensities and the class prior by EM"""
    votes = _check_matrix(votes, lf_ids)
    if (votes == Vote.ABSTAIN).all():
        raise NoSignalError()

    if correlation_threshold is None:
        groups = [[j] for j in range(len(lf_ids))]
    else:
        groups = correlation_groups(votes, correlation_threshold)
    em = _GroupedEM(group_votes(votes, groups))

    prior, accuracy = em.initial(seed)
    ll = em.log_likelihood(prior, accuracy)
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        q = em.posterior(prior, accuracy)
        prior, accuracy = em.m_step(q, accuracy)
        new_ll = em.log_likelihood(prior, accuracy)
        if not np.isfinite(new_ll):
            raise LabelModelError(f"log-likelihood became {new_ll} at iteration {iterations}")
        if new_ll < ll - 1e-9 * max(1.0, abs(ll)):
            raise LabelModelError(
                f"log-likelihood decreased at iteration {iterations}: {ll:.6f} -> {new_ll:.6f}"
            )
        improvement, ll = new_ll - ll, new_ll
        if improvement < tolerance:
            break

    group_ids = [[lf_ids[j] for j in members] for members in groups]
    accuracies, propensities = {}, {}
    for g, members in enumerate(group_ids):
        for lf_id in members:
            accuracies[lf_id] = float(accuracy[g])
            propensities[lf_id] = float(em.propensity[g])
    merged = [members for members in group_ids if len(members) > 1]
    logger.info(
        "Label model: %d candidates, %d LFs, %d EM iterations, prior %.3f, correlated groups %s",
        votes.shape[0], len(lf_ids), iterations, prior, merged or "none",
    )
    return LabelModel(
        lf_ids=list(lf_ids),
        lf_accuracies=accuracies,
        lf_propensities=propensities,
        class_prior=prior,
        groups=group_ids,
        n_iterations=iterations,
        log_likelihood=ll,
    )


def _group_indices(model: LabelModel) -> List[List[int]]:
    position = {lf_id: j for j, lf_id in enumerate(model.lf_ids)}
    return [[position[lf_id] for lf_id in group] for group in model.resolved_groups]


def _group_accuracies(model: LabelModel) -> np.ndarray:
    return np.array([model.lf_accuracies[group[0]] for group in model.resolved_groups])


def predict_marginals(model: LabelModel, votes: np.ndarray) -> np.ndarray:
    """Posterior P(POSITIVE) per row; columns follow model.lf_ids"""
    votes = np.asarray(votes)
    if votes.ndim != 2 or votes.shape[1] != len(model.lf_ids):
        raise LabelModelError(f"vote matrix shape {votes.shape} does not match {len(model.lf_ids)} LFs")
    grouped = group_votes(votes, _group_indices(model))
    signs = (grouped == Vote.POSITIVE).astype(float) - (grouped == Vote.NEGATIVE)
    log_odds = logit(model.class_prior) + signs @ logit(_group_accuracies(model))
    no_evidence = (grouped == Vote.ABSTAIN).all(axis=1)
    return np.where(no_evidence, model.class_prior, expit(log_odds))


def predict_marginal(model: LabelModel, votes: Sequence[LabelingFunctionVote]) -> float:
    """Posterior P(POSITIVE) for one candidate; missing LFs count as abstaining"""
    row = np.full((1, len(model.lf_ids)), Vote.ABSTAIN, dtype=np.int8)
    position = {lf_id: j for j, lf_id in enumerate(model.lf_ids)}
    for vote in votes:
        if vote.lf_id not in position:
            raise UnknownLabelingFunctionError(vote.lf_id)
        row[0, position[vote.lf_id]] = vote.value
    return float(predict_marginals(model, row)[0])

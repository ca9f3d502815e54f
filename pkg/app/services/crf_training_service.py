"""Two-stage CRF training: silver-corpus pretraining, gold-corpus fine-tuning"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from app.core.errors import NumericalError, TrainingError
from app.schemas.evaluation import EvalMode, Metrics
from app.schemas.tagging import (
    LABEL_INDEX,
    BioTag,
    EpochRecord,
    TaggedDocument,
    TaggedSentence,
    TrainingConfig,
    TrainingHistory,
)
from app.schemas.weak_supervision import KbAliasDictionary
from app.services.corpus_io import corpus_sentences
from app.services.crf_features import sentence_features
from app.services.crf_model import CrfModel, EncodedSentence, SparseGradient, loss_and_gradient
from app.services.evaluation_service import evaluate_all, spans_from_tags
from app.services.tagging_service import TaggingService

logger = logging.getLogger(__name__)

STAGE_SSC = "ssc"
STAGE_GSC = "gsc"
_STAGE_SEED = {STAGE_SSC: 1, STAGE_GSC: 2}


@dataclass
class PreparedSentence:
    features: List[List[str]]
    labels: List[int]

    @property
    def is_positive(self) -> bool:
        return any(label != LABEL_INDEX[BioTag.O] for label in self.labels)


class NegativeSampler:
    """Draws negatives without replacement until the pool is exhausted, then reshuffles"""

    def __init__(self, pool: Sequence[int], rng: np.random.Generator):
        self.pool = list(pool)
        self.rng = rng
        self.order = self._shuffled()
        self.cursor = 0

    def _shuffled(self) -> List[int]:
        return [self.pool[i] for i in self.rng.permutation(len(self.pool))]

    def draw(self, k: int) -> List[int]:
        k = min(k, len(self.pool))
        taken = self.order[self.cursor:self.cursor + k]
        self.cursor += len(taken)
        if len(taken) < k:
            # keep this epoch's draws at the back of the new cycle
            seen = set(taken)
            fresh = self._shuffled()
            self.order = [i for i in fresh if i not in seen] + [i for i in fresh if i in seen]
            rest = self.order[:k - len(taken)]
            self.cursor = len(rest)
            taken = taken + rest
        return taken


class RmsProp:
    """RMSprop with lazily updated per-weight caches for the feature rows"""

    def __init__(self, model: CrfModel, decay: float, epsilon: float):
        self.model = model
        self.decay = decay
        self.epsilon = epsilon
        self.feature_cache = np.zeros_like(model.feature_weights)
        self.transition_cache = np.zeros_like(model.transition_weights)
        self.start_cache = np.zeros_like(model.start_weights)

    def _update(self, weights: np.ndarray, cache: np.ndarray, grad: np.ndarray, lr: float) -> None:
        cache[...] = self.decay * cache + (1 - self.decay) * grad ** 2
        weights -= lr * grad / (np.sqrt(cache) + self.epsilon)

    def step(self, grad: SparseGradient, lr: float) -> None:
        m = self.model
        if len(grad.rows):
            rows = grad.rows
            cache = self.decay * self.feature_cache[rows] + (1 - self.decay) * grad.feature_values ** 2
            self.feature_cache[rows] = cache
            m.feature_weights[rows] -= lr * grad.feature_values / (np.sqrt(cache) + self.epsilon)
        self._update(m.transition_weights, self.transition_cache, grad.transitions, lr)
        self._update(m.start_weights, self.start_cache, grad.start, lr)


def apply_dropout(
    encoded: EncodedSentence, rate: float, rng: np.random.Generator
) -> Tuple[EncodedSentence, Optional[List[np.ndarray]]]:
    """Inverted feature dropout: kept activations are scaled by 1 / (1 - rate)"""
    if rate <= 0.0:
        return encoded, None
    kept, scales = [], []
    for idx in encoded:
        mask = rng.random(len(idx)) >= rate
        kept.append(idx[mask])
        scales.append(np.full(int(mask.sum()), 1.0 / (1.0 - rate)))
    return kept, scales


class CrfTrainer:
    def __init__(self, dictionary: Optional[KbAliasDictionary] = None, show_progress: bool = False):
        self.dictionary = dictionary
        self.show_progress = show_progress

    def prepare(self, sentences: Sequence[TaggedSentence]) -> List[PreparedSentence]:
        return [
            PreparedSentence(
                features=sentence_features(ts.sentence, self.dictionary),
                labels=[LABEL_INDEX[tag] for tag in ts.tags],
            )
            for ts in sentences
            if ts.sentence.tokens
        ]

    def run_stage(
        self,
        model: CrfModel,
        prepared: Sequence[PreparedSentence],
        cfg: TrainingConfig,
        stage: str,
    ) -> List[EpochRecord]:
        """Train in place; the SSC stage draws negatives, the GSC stage uses every sentence"""
        rng = np.random.default_rng([cfg.seed, _STAGE_SEED[stage]])
        encoded = [model.encode(p.features) for p in prepared]
        optimizer = RmsProp(model, cfg.rms_decay, cfg.epsilon)

        sampler = None
        positives = list(range(len(prepared)))
        if stage == STAGE_SSC:
            positives = [i for i, p in enumerate(prepared) if p.is_positive]
            negatives = [i for i, p in enumerate(prepared) if not p.is_positive]
            sampler = NegativeSampler(negatives, rng)

        records = []
        for epoch in range(cfg.epochs):
            lr = cfg.learning_rate_at(epoch)
            batch = list(positives)
            if sampler is not None:
                batch += sampler.draw(int(round(cfg.negative_sampling_ratio * len(positives))))
            order = [batch[i] for i in rng.permutation(len(batch))]

            total = 0.0
            for i in tqdm(order, desc=f"{stage} epoch {epoch + 1}", disable=not self.show_progress, leave=False):
                idx, scales = apply_dropout(encoded[i], cfg.feature_dropout, rng)
                loss, grad = loss_and_gradient(
                    model, idx, prepared[i].labels, cfg.positive_class_weight_boost, scales
                )
                optimizer.step(grad, lr)
                total += loss
            if not model.is_finite():
                raise NumericalError(f"non-finite weights after {stage} epoch {epoch + 1}")
            mean_loss = total / len(order) if order else 0.0
            records.append(
                EpochRecord(stage=stage, epoch=epoch, learning_rate=lr, mean_loss=mean_loss, n_sentences=len(order))
            )
            logger.info("%s epoch %d/%d: lr %.6g, %d sentences, loss %.4f",
                        stage, epoch + 1, cfg.epochs, lr, len(order), mean_loss)
        return records

    def fit(
        self,
        ssc: Sequence[TaggedSentence],
        gsc: Sequence[TaggedSentence],
        ssc_cfg: TrainingConfig,
        gsc_cfg: TrainingConfig,
    ) -> Tuple[CrfModel, TrainingHistory]:
        """Either stage may be empty; used by train() and the regime comparison"""
        ssc_prepared, gsc_prepared = self.prepare(ssc), self.prepare(gsc)
        model = CrfModel.empty(
            f for p in (*ssc_prepared, *gsc_prepared) for token in p.features for f in token
        )
        records: List[EpochRecord] = []
        if ssc_prepared:
            records += self.run_stage(model, ssc_prepared, ssc_cfg, STAGE_SSC)
        if gsc_prepared:
            records += self.run_stage(model, gsc_prepared, gsc_cfg, STAGE_GSC)
        return model, TrainingHistory(epochs=records)

    def train(
        self,
        ssc: Sequence[TaggedDocument],
        gsc: Sequence[TaggedDocument],
        ssc_cfg: TrainingConfig,
        gsc_cfg: TrainingConfig,
    ) -> Tuple[CrfModel, TrainingHistory]:
        gsc_sentences = [ts for ts in corpus_sentences(gsc) if ts.sentence.tokens]
        if not gsc_sentences:
            raise TrainingError("the gold standard training corpus is empty")
        ssc_sentences = corpus_sentences(ssc)
        if not ssc_sentences:
            logger.info("No silver corpus given; training on the gold corpus only")
        return self.fit(ssc_sentences, gsc_sentences, ssc_cfg, gsc_cfg)


REGIME_SSC = "SSC"
REGIME_GSC = "GSC"
REGIME_TRANSFER = "SSC->GSC"


def compare_training_regimes(
    ssc: Sequence[TaggedDocument],
    gsc_train: Sequence[TaggedDocument],
    gsc_test: Sequence[TaggedDocument],
    ssc_cfg: TrainingConfig,
    gsc_cfg: TrainingConfig,
    dictionary: Optional[KbAliasDictionary] = None,
) -> Dict[str, Dict[EvalMode, Metrics]]:
    """Scores of silver-only, gold-only and silver-then-gold training on the test corpus"""
    trainer = CrfTrainer(dictionary)
    ssc_sentences, gsc_sentences = corpus_sentences(ssc), corpus_sentences(gsc_train)
    gold = spans_from_tags(gsc_test)
    regimes = {
        REGIME_SSC: (ssc_sentences, []),
        REGIME_GSC: ([], gsc_sentences),
        REGIME_TRANSFER: (ssc_sentences, gsc_sentences),
    }
    results = {}
    for name, (silver, gold_train) in regimes.items():
        if not silver and not gold_train:
            continue
        model, _ = trainer.fit(silver, gold_train, ssc_cfg, gsc_cfg)
        tagger = TaggingService(model, dictionary)
        predicted = [
            TaggedDocument(doc_id=d.doc_id, sentences=tagger.tag_sentences([ts.sentence for ts in d.sentences]))
            for d in gsc_test
        ]
        results[name] = evaluate_all(spans_from_tags(predicted), gold)
    return results

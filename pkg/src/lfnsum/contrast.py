"""A small trainable seq2seq model with contrastive objectives.

The model is a single-head attention encoder-decoder over token ids,
implemented in numpy with hand-derived gradients so training has no
framework dependency and stays deterministic:

    encoder   X = Eenc[ids] + Penc;  H = X + softmax(XWq (XWk)^T / sqrt(d)) XWv
    decoder   Q = Edec[shifted] + Pdec;
              Z = Q + softmax(QUq (H Uk)^T / sqrt(d)) H Uv
    logits    Z Wout + bout

Three loss terms combine per training pair:

    ce        token-level cross entropy of the gold summary sentence.
    encoder   a softmax contrast of pooled-encoding cosine similarity,
              gold summary against constructed negatives.
    decoder   a hinge on the likelihood margin between each negative and
              the gold, restricted to the replaced positions (or spread
              over all positions in "all" mode).

The decoder hinge only sees replaced positions: gradients at untouched
positions are structurally zero, which keeps the corruption signal from
washing out over the whole sentence.

Training is full-batch plain gradient descent.  With both auxiliary
weights at zero the computation reduces bit for bit to cross entropy
alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator

from .errors import EmptyCorpusError, FormatError
from .validation import (
    check_choice,
    check_non_negative,
    check_positive_int,
    ensure_rng,
    stable_seed,
)

MODEL_FORMAT = "lfnsum-seq2seq"


@dataclass(frozen=True)
class TrainingPair:
    """One article with its gold summary sentence and negatives.

    Negatives must match the gold length token for token outside their
    ``replaced_positions`` masks, which is exactly what the construction
    pipeline produces.
    """

    article: tuple[str, ...]
    gold: tuple[str, ...]
    negatives: tuple[tuple[str, ...], ...] = ()
    replaced_positions: tuple[tuple[int, ...], ...] = ()

    def validate(self):
        if not self.article or not self.gold:
            raise ValueError("article and gold must be non-empty")
        if len(self.negatives) != len(self.replaced_positions):
            raise ValueError("each negative needs a replaced-positions mask")
        for neg, mask in zip(self.negatives, self.replaced_positions):
            if len(neg) != len(self.gold):
                raise ValueError("negative length differs from gold")
            for pos in mask:
                if not 0 <= pos < len(self.gold):
                    raise ValueError(f"replaced position {pos} out of range")
        return self


@dataclass(frozen=True)
class LossBreakdown:
    """Per-step loss components; ``total`` is what gradients descend."""

    ce: float
    encoder: float
    decoder: float
    total: float


def encoder_contrastive_loss(pos_sim, neg_sims, temperature, mode="standard"):
    """Softmax contrast of a positive similarity against negatives.

    Returns ``(loss, dpos, dnegs)``.  In "standard" mode the positive
    competes inside the partition function; "literal" mode keeps the
    partition over negatives only, so the loss is unbounded below and
    rewards pushing the positive up without limit.
    """
    check_choice(mode, ("standard", "literal"), "mode")
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature!r}")
    negs = np.asarray(neg_sims, dtype=float)
    if negs.size == 0:
        raise ValueError("at least one negative similarity is required")
    z_pos = pos_sim / temperature
    z_neg = negs / temperature
    if mode == "standard":
        z = np.concatenate(([z_pos], z_neg))
        lse = logsumexp(z)
        probs = np.exp(z - lse)
        loss = lse - z_pos
        dpos = (probs[0] - 1.0) / temperature
        dnegs = probs[1:] / temperature
    else:
        lse = logsumexp(z_neg)
        probs = np.exp(z_neg - lse)
        loss = lse - z_pos
        dpos = -1.0 / temperature
        dnegs = probs / temperature
    return float(loss), float(dpos), dnegs


def masked_margin_loss(neg_logps, gold_logps, positions, margin):
    """Hinge on the mean likelihood margin over selected positions.

    loss = max(0, mean_{i in positions}(neg_logps[i] - gold_logps[i]) + margin)

    Returns ``(loss, dneg, dgold)`` where the gradient arrays are zero
    everywhere outside ``positions``, and zero everywhere when the hinge
    is inactive.
    """
    neg_logps = np.asarray(neg_logps, dtype=float)
    gold_logps = np.asarray(gold_logps, dtype=float)
    if neg_logps.shape != gold_logps.shape:
        raise ValueError("log probability arrays differ in shape")
    positions = sorted(set(positions))
    if not positions:
        raise ValueError("at least one position is required")
    for pos in positions:
        if not 0 <= pos < neg_logps.shape[0]:
            raise ValueError(f"position {pos} out of range")
    idx = np.array(positions, dtype=int)
    raw = float((neg_logps[idx] - gold_logps[idx]).mean() + margin)
    dneg = np.zeros_like(neg_logps)
    dgold = np.zeros_like(gold_logps)
    if raw > 0.0:
        dneg[idx] = 1.0 / idx.size
        dgold[idx] = -1.0 / idx.size
        return raw, dneg, dgold
    return 0.0, dneg, dgold


def _softmax(x):
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(x):
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _softmax_rows_backward(dA, A):
    return (dA - (dA * A).sum(axis=-1, keepdims=True)) * A


def _cosine(a, b):
    """Cosine similarity with gradients; near-zero vectors score zero."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < 1e-12 or nb < 1e-12:
        return 0.0, np.zeros_like(a), np.zeros_like(b)
    sim = float(a @ b / (na * nb))
    da = b / (na * nb) - sim * a / (na * na)
    db = a / (na * nb) - sim * b / (nb * nb)
    return sim, da, db


def _encode(params, ids):
    d = params["Wq"].shape[0]
    X = params["Eenc"][ids] + params["Penc"][: len(ids)]
    XQ = X @ params["Wq"]
    XK = X @ params["Wk"]
    XV = X @ params["Wv"]
    A = _softmax(XQ @ XK.T / math.sqrt(d))
    H = X + A @ XV
    return {
        "ids": ids,
        "X": X,
        "XQ": XQ,
        "XK": XK,
        "XV": XV,
        "A": A,
        "H": H,
        "pooled": H.mean(axis=0),
    }


def _encode_backward(params, cache, dH, dpooled, grads):
    d = params["Wq"].shape[0]
    X, A, XV = cache["X"], cache["A"], cache["XV"]
    n = X.shape[0]
    dH = dH + dpooled / n
    dX = dH.copy()
    dA = dH @ XV.T
    dXV = A.T @ dH
    grads["Wv"] += X.T @ dXV
    dX += dXV @ params["Wv"].T
    dS = _softmax_rows_backward(dA, A) / math.sqrt(d)
    dXQ = dS @ cache["XK"]
    dXK = dS.T @ cache["XQ"]
    grads["Wq"] += X.T @ dXQ
    dX += dXQ @ params["Wq"].T
    grads["Wk"] += X.T @ dXK
    dX += dXK @ params["Wk"].T
    np.add.at(grads["Eenc"], cache["ids"], dX)
    grads["Penc"][:n] += dX


def _decode(params, Henc, input_ids):
    d = params["Uq"].shape[0]
    Q = params["Edec"][input_ids] + params["Pdec"][: len(input_ids)]
    QU = Q @ params["Uq"]
    KU = Henc @ params["Uk"]
    VU = Henc @ params["Uv"]
    B = _softmax(QU @ KU.T / math.sqrt(d))
    Z = Q + B @ VU
    logits = Z @ params["Wout"] + params["bout"]
    return {
        "ids": input_ids,
        "Henc": Henc,
        "Q": Q,
        "QU": QU,
        "KU": KU,
        "VU": VU,
        "B": B,
        "Z": Z,
        "logits": logits,
    }


def _decode_backward(params, cache, dlogits, grads):
    """Backpropagate through one decode; returns the encoder-side gradient."""
    d = params["Uq"].shape[0]
    B = cache["B"]
    m = dlogits.shape[0]
    grads["Wout"] += cache["Z"].T @ dlogits
    grads["bout"] += dlogits.sum(axis=0)
    dZ = dlogits @ params["Wout"].T
    dQ = dZ.copy()
    dB = dZ @ cache["VU"].T
    dVU = B.T @ dZ
    grads["Uv"] += cache["Henc"].T @ dVU
    dHenc = dVU @ params["Uv"].T
    dT = _softmax_rows_backward(dB, B) / math.sqrt(d)
    dQU = dT @ cache["KU"]
    dKU = dT.T @ cache["QU"]
    grads["Uq"] += cache["Q"].T @ dQU
    dQ += dQU @ params["Uq"].T
    grads["Uk"] += cache["Henc"].T @ dKU
    dHenc += dKU @ params["Uk"].T
    np.add.at(grads["Edec"], cache["ids"], dQ)
    grads["Pdec"][:m] += dQ
    return dHenc


class ContrastiveSeq2Seq(BaseEstimator):
    """Attention seq2seq trained with contrastive auxiliary losses.

    Parameters
    ----------
    embed_dim : width of embeddings and attention projections.
    temperature : softmax temperature of the encoder contrast.
    n_negatives : cap on negatives consumed per pair.
    margin : hinge offset of the decoder likelihood contrast.
    encoder_loss_weight, decoder_loss_weight : auxiliary term weights;
        zero disables a term entirely (and skips its computation).
    decoder_mode : "masked" restricts the decoder contrast to replaced
        positions, "all" spreads it over every position.
    denominator_mode : "standard" or "literal" encoder contrast.
    learning_rate, steps, seed : plain gradient descent settings.
    """

    def __init__(
        self,
        embed_dim=32,
        temperature=0.1,
        n_negatives=4,
        margin=1.0,
        encoder_loss_weight=1.0,
        decoder_loss_weight=1.0,
        decoder_mode="masked",
        denominator_mode="standard",
        learning_rate=0.1,
        steps=200,
        seed=0,
    ):
        self.embed_dim = embed_dim
        self.temperature = temperature
        self.n_negatives = n_negatives
        self.margin = margin
        self.encoder_loss_weight = encoder_loss_weight
        self.decoder_loss_weight = decoder_loss_weight
        self.decoder_mode = decoder_mode
        self.denominator_mode = denominator_mode
        self.learning_rate = learning_rate
        self.steps = steps
        self.seed = seed

    def _validate_params(self):
        check_positive_int(self.embed_dim, "embed_dim")
        check_positive_int(self.n_negatives, "n_negatives")
        check_positive_int(self.steps, "steps")
        check_non_negative(self.margin, "margin")
        check_non_negative(self.encoder_loss_weight, "encoder_loss_weight")
        check_non_negative(self.decoder_loss_weight, "decoder_loss_weight")
        check_choice(self.decoder_mode, ("masked", "all"), "decoder_mode")
        check_choice(self.denominator_mode, ("standard", "literal"), "denominator_mode")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature!r}")
        if self.learning_rate <= 0:
            raise ValueError(
                f"learning_rate must be positive, got {self.learning_rate!r}"
            )

    def _prepare(self, pairs):
        data = []
        for pair in pairs:
            pair.validate()
            art = np.array([self.token_to_id_[t] for t in pair.article], dtype=int)
            gold = np.array([self.token_to_id_[t] for t in pair.gold], dtype=int)
            negs = []
            for neg, mask in list(zip(pair.negatives, pair.replaced_positions))[
                : self.n_negatives
            ]:
                ids = np.array([self.token_to_id_[t] for t in neg], dtype=int)
                positions = (
                    tuple(sorted(mask))
                    if self.decoder_mode == "masked"
                    else tuple(range(len(gold)))
                )
                if not positions:
                    continue
                negs.append((ids, positions))
            data.append((art, gold, negs))
        return data

    def _shift(self, target_ids):
        return np.concatenate(([self.bos_id_], target_ids[:-1]))

    def _batch(self, params, data):
        """Mean loss and gradients over prepared pairs."""
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return self._batch_inner(params, data)

    def _batch_inner(self, params, data):
        # Overflow is tolerated here: a diverging run produces non-finite
        # totals that the fit loop detects and rolls back.
        lam_e = self.encoder_loss_weight
        lam_d = self.decoder_loss_weight
        grads = {name: np.zeros_like(value) for name, value in params.items()}
        scale = 1.0 / len(data)
        ce_sum = 0.0
        enc_sum = 0.0
        dec_sum = 0.0
        gap_terms = []

        for art, gold, negs in data:
            enc_art = _encode(params, art)
            dH_art = np.zeros_like(enc_art["H"])
            dpooled_art = np.zeros(params["Wq"].shape[0])

            dec_gold = _decode(params, enc_art["H"], self._shift(gold))
            m = len(gold)
            probs = _softmax(dec_gold["logits"])
            logps = _log_softmax(dec_gold["logits"])
            rows = np.arange(m)
            gold_logps = logps[rows, gold]
            ce_sum += -float(gold_logps.mean())
            onehot = np.zeros_like(probs)
            onehot[rows, gold] = 1.0
            dlogits_gold = (probs - onehot) * (scale / m)

            if lam_d > 0 and negs:
                weight = lam_d * scale / len(negs)
                dec_pair = 0.0
                for neg_ids, positions in negs:
                    dec_neg = _decode(params, enc_art["H"], self._shift(neg_ids))
                    neg_probs = _softmax(dec_neg["logits"])
                    neg_logps_all = _log_softmax(dec_neg["logits"])
                    neg_logps = neg_logps_all[rows, neg_ids]
                    loss, dneg, dgold = masked_margin_loss(
                        neg_logps, gold_logps, positions, self.margin
                    )
                    dec_pair += loss / len(negs)
                    idx = np.array(positions, dtype=int)
                    gap_terms.append(float((gold_logps[idx] - neg_logps[idx]).mean()))
                    neg_onehot = np.zeros_like(neg_probs)
                    neg_onehot[rows, neg_ids] = 1.0
                    # d logp / d logits is onehot - softmax, applied row-wise
                    # only where the mask coefficients are non-zero.
                    dlogits_neg = (neg_onehot - neg_probs) * (weight * dneg)[:, None]
                    dlogits_gold += (onehot - probs) * (weight * dgold)[:, None]
                    dH_art += _decode_backward(params, dec_neg, dlogits_neg, grads)
                dec_sum += dec_pair

            dH_art += _decode_backward(params, dec_gold, dlogits_gold, grads)

            if lam_e > 0 and negs:
                enc_gold = _encode(params, gold)
                enc_negs = [_encode(params, neg_ids) for neg_ids, _ in negs]
                pos_sim, dpos_a, dpos_g = _cosine(enc_art["pooled"], enc_gold["pooled"])
                neg_parts = [
                    _cosine(enc_art["pooled"], cache["pooled"]) for cache in enc_negs
                ]
                loss, dpos, dnegs = encoder_contrastive_loss(
                    pos_sim,
                    [sim for sim, _, _ in neg_parts],
                    self.temperature,
                    self.denominator_mode,
                )
                enc_sum += loss
                coeff = lam_e * scale
                dpooled_art += coeff * dpos * dpos_a
                _encode_backward(
                    params,
                    enc_gold,
                    np.zeros_like(enc_gold["H"]),
                    coeff * dpos * dpos_g,
                    grads,
                )
                for dneg_coeff, cache, (_, dsim_a, dsim_n) in zip(
                    dnegs, enc_negs, neg_parts
                ):
                    dpooled_art += coeff * dneg_coeff * dsim_a
                    _encode_backward(
                        params,
                        cache,
                        np.zeros_like(cache["H"]),
                        coeff * dneg_coeff * dsim_n,
                        grads,
                    )

            _encode_backward(params, enc_art, dH_art, dpooled_art, grads)

        ce = ce_sum * scale
        enc = enc_sum * scale
        dec = dec_sum * scale
        total = ce
        if lam_e > 0:
            total = total + lam_e * enc
        if lam_d > 0:
            total = total + lam_d * dec
        breakdown = LossBreakdown(ce=ce, encoder=enc, decoder=dec, total=total)
        gap = float(np.mean(gap_terms)) if gap_terms else float("nan")
        return breakdown, grads, gap

    def _init_params(self, pairs):
        vocab = sorted(
            {
                tok
                for pair in pairs
                for seq in (pair.article, pair.gold, *pair.negatives)
                for tok in seq
            }
        )
        self.vocab_ = vocab
        self.token_to_id_ = {tok: i for i, tok in enumerate(vocab)}
        self.bos_id_ = len(vocab)
        lengths = [
            max(len(pair.article), len(pair.gold), *(len(n) for n in pair.negatives))
            if pair.negatives
            else max(len(pair.article), len(pair.gold))
            for pair in pairs
        ]
        self.max_len_ = max(lengths)
        d = self.embed_dim
        v = len(vocab)
        rng = np.random.default_rng(stable_seed("seq2seq", self.seed))
        def mat(*shape):
            return 0.1 * rng.standard_normal(shape)
        self.params_ = {
            "Eenc": mat(v, d),
            "Penc": mat(self.max_len_, d),
            "Wq": mat(d, d),
            "Wk": mat(d, d),
            "Wv": mat(d, d),
            "Edec": mat(v + 1, d),
            "Pdec": mat(self.max_len_, d),
            "Uq": mat(d, d),
            "Uk": mat(d, d),
            "Uv": mat(d, d),
            "Wout": mat(d, v),
            "bout": np.zeros(v),
        }

    def fit(self, X, y=None):
        """Train on a list of TrainingPair values by gradient descent."""
        self._validate_params()
        pairs = list(X)
        if not pairs:
            raise EmptyCorpusError("cannot train on an empty pair list")
        self._init_params(pairs)
        data = self._prepare(pairs)
        self.loss_curve_ = []
        self.margin_history_ = []
        self.diverged_ = False
        last_good = None
        for _ in range(self.steps):
            breakdown, grads, gap = self._batch(self.params_, data)
            if not math.isfinite(breakdown.total):
                self.diverged_ = True
                if last_good is not None:
                    self.params_ = last_good
                break
            self.loss_curve_.append(breakdown)
            if self.decoder_loss_weight > 0 and math.isfinite(gap):
                self.margin_history_.append(gap)
            last_good = {name: value.copy() for name, value in self.params_.items()}
            for name in self.params_:
                self.params_[name] = self.params_[name] - self.learning_rate * grads[name]
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise EmptyCorpusError("model is not fitted")

    def _ids(self, tokens, label):
        try:
            return np.array([self.token_to_id_[t] for t in tokens], dtype=int)
        except KeyError as exc:
            raise ValueError(f"unknown token in {label}: {exc.args[0]!r}") from exc

    def encode_pooled(self, tokens):
        """Mean-pooled encoder representation of a token sequence."""
        self._check_fitted()
        ids = self._ids(tuple(tokens), "sequence")
        if len(ids) > self.max_len_:
            raise ValueError(f"sequence longer than {self.max_len_} tokens")
        return _encode(self.params_, ids)["pooled"]

    def fact_score(self, article_tokens, summary_tokens):
        """Cosine similarity of pooled encodings; higher means more consistent."""
        sim, _, _ = _cosine(
            self.encode_pooled(article_tokens), self.encode_pooled(summary_tokens)
        )
        return sim

    def token_logprobs(self, article_tokens, target_tokens):
        """Per-position log probability of each target token."""
        self._check_fitted()
        art = self._ids(tuple(article_tokens), "article")
        target = self._ids(tuple(target_tokens), "target")
        enc = _encode(self.params_, art)
        dec = _decode(self.params_, enc["H"], self._shift(target))
        logps = _log_softmax(dec["logits"])
        return logps[np.arange(len(target)), target]

    def predict(self, article_tokens, length):
        """Greedy decode of ``length`` tokens conditioned on the article."""
        self._check_fitted()
        check_positive_int(length, "length")
        if length > self.max_len_:
            raise ValueError(f"length exceeds the trained maximum {self.max_len_}")
        art = self._ids(tuple(article_tokens), "article")
        enc = _encode(self.params_, art)
        ids = [self.bos_id_]
        out = []
        for _ in range(length):
            dec = _decode(self.params_, enc["H"], np.array(ids, dtype=int))
            nxt = int(np.argmax(dec["logits"][-1]))
            out.append(nxt)
            ids.append(nxt)
        return tuple(self.vocab_[i] for i in out)

    def save(self, path):
        """Serialize the fitted model as JSON."""
        self._check_fitted()
        payload = {
            "format": MODEL_FORMAT,
            "version": 1,
            "config": self.get_params(),
            "vocab": self.vocab_,
            "max_len": self.max_len_,
            "params": {name: value.tolist() for name, value in self.params_.items()},
        }
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(payload, handle)
            handle.write("\n")

    @classmethod
    def load(cls, path):
        """Restore a model serialized by ``save``."""
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
        if payload.get("format") != MODEL_FORMAT:
            raise FormatError(f"not a sequence model file: {path}")
        model = cls(**payload["config"])
        model.vocab_ = list(payload["vocab"])
        model.token_to_id_ = {tok: i for i, tok in enumerate(model.vocab_)}
        model.bos_id_ = len(model.vocab_)
        model.max_len_ = int(payload["max_len"])
        model.params_ = {
            name: np.asarray(value, dtype=float)
            for name, value in payload["params"].items()
        }
        model.loss_curve_ = []
        model.margin_history_ = []
        model.diverged_ = False
        return model


def token_accuracy(model, pairs):
    """Fraction of gold tokens reproduced by greedy decoding."""
    hits = 0
    total = 0
    for pair in pairs:
        got = model.predict(pair.article, len(pair.gold))
        hits += sum(1 for a, b in zip(got, pair.gold) if a == b)
        total += len(pair.gold)
    if total == 0:
        raise EmptyCorpusError("no tokens to score")
    return hits / total


def grad_check(model, pairs, n_entries=25, step=1e-5, seed=0):
    """Largest relative error between analytic and central-difference grads.

    Samples ``n_entries`` coordinates per parameter tensor.  The model
    must be fitted (or at least initialized by ``fit`` with steps run);
    its current parameters are restored on exit.

    The denominator is floored at 1e-5: where both gradients vanish the
    central difference is dominated by cancellation and truncation noise,
    so those coordinates are effectively compared absolutely, to about
    1e-9, instead of relatively.
    """
    model._check_fitted()
    data = model._prepare(list(pairs))
    _, grads, _ = model._batch(model.params_, data)
    rng = ensure_rng(stable_seed("gradcheck", seed))
    worst = 0.0
    for name, grad in grads.items():
        flat = model.params_[name].reshape(-1)
        flat_grad = grad.reshape(-1)
        count = min(n_entries, flat.size)
        for i in sorted(rng.sample(range(flat.size), count)):
            orig = flat[i]
            flat[i] = orig + step
            up = model._batch(model.params_, data)[0].total
            flat[i] = orig - step
            down = model._batch(model.params_, data)[0].total
            flat[i] = orig
            numeric = (up - down) / (2.0 * step)
            denom = max(1e-5, abs(numeric) + abs(flat_grad[i]))
            worst = max(worst, abs(numeric - flat_grad[i]) / denom)
    return worst

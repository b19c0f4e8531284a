"""Fidelity estimators and a-priori fidelity predictions."""
from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .circuits import Circuit
from .errors import CoverageError, FeasibilityError, MissingProbabilityError, ValidationError
from .samples import SampleSet

# averaged component error rates used by the averaged product formula
E1_AVERAGE = 0.0016
E2_AVERAGE = 0.0062
EQ_AVERAGE = 0.038


@dataclass
class FidelityReport:
    f_xeb: float
    std_error: float
    n_samples: int
    predicted_phi: float | None = None
    predicted_phi_averaged: float | None = None
    porter_thomas_ks: tuple | None = None
    circuit: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["porter_thomas_ks"] is not None:
            d["porter_thomas_ks"] = list(d["porter_thomas_ks"])
        return d


def lookup_probabilities(samples: SampleSet, prob_lookup) -> np.ndarray:
    """Probabilities of each sample under ``prob_lookup``.

    ``prob_lookup`` may be a dense array indexed by outcome, a mapping from
    bitstring to probability, an object with a ``probability(indices)``
    method (e.g. a factorized table) or a callable on index arrays.
    """
    if isinstance(prob_lookup, np.ndarray):
        if prob_lookup.size != 2**samples.n:
            raise ValidationError("probability array does not match the sample width")
        return prob_lookup[samples.indices]
    if isinstance(prob_lookup, Mapping):
        out = np.empty(len(samples))
        for i, s in enumerate(samples.bitstrings()):
            try:
                out[i] = prob_lookup[s]
            except KeyError:
                raise MissingProbabilityError(s) from None
        return out
    if hasattr(prob_lookup, "probability"):
        return np.asarray(prob_lookup.probability(samples.indices), dtype=float)
    return np.asarray(prob_lookup(samples.indices), dtype=float)


def f_xeb(samples: SampleSet, prob_lookup) -> tuple[float, float]:
    """Linear cross-entropy estimate mean(2^n P(x_i)) - 1 and its standard error."""
    if len(samples) < 1:
        raise ValidationError("F_XEB needs at least one sample")
    return xeb_from_probabilities(lookup_probabilities(samples, prob_lookup), samples.n)


def xeb_from_probabilities(sample_probs, n: int) -> tuple[float, float]:
    """F_XEB and standard error from the ideal probabilities of the drawn samples."""
    scaled = 2.0**n * np.asarray(sample_probs, dtype=float)
    if scaled.size < 1:
        raise ValidationError("F_XEB needs at least one sample")
    if len(scaled) < 2:
        return float(scaled[0] - 1.0), 0.0
    return float(scaled.mean() - 1.0), float(scaled.std(ddof=1) / math.sqrt(len(scaled)))


def ideal_xeb(probs: np.ndarray) -> float:
    """2^n sum p^2 - 1: the F_XEB of noiseless samples."""
    probs = np.asarray(probs, dtype=float)
    return float(probs.size * np.dot(probs, probs) - 1.0)


def _log_survival(rates) -> float:
    rates = np.asarray(list(rates), dtype=float)
    return float(np.log1p(-rates).sum())


def formula77(rates, circuit: Circuit) -> float:
    """Product of (1 - e) over 1-gates, 2-gates and readouts, evaluated in log space."""
    total = 0.0
    for i, g in circuit.one_qubit_gates():
        if (i, g.target) not in rates.e1:
            raise CoverageError(f"no error rate for 1-gate at moment {i} on {g.target}")
    for i, g in circuit.two_qubit_gates():
        if (i, g.edge) not in rates.e2:
            raise CoverageError(f"no error rate for 2-gate at moment {i} on {g.edge[0]}-{g.edge[1]}")
    for q in circuit.qubits:
        if q not in rates.eq:
            raise CoverageError(f"no readout rate for qubit {q}")
    total += _log_survival(rates.e1[(i, g.target)] for i, g in circuit.one_qubit_gates())
    total += _log_survival(rates.e2[(i, g.edge)] for i, g in circuit.two_qubit_gates())
    total += _log_survival(sum(rates.eq[q]) / 2 for q in circuit.qubits)
    return math.exp(total)


def formula77_averaged(n: int, g1: int, g2: int, e1: float = E1_AVERAGE, e2: float = E2_AVERAGE,
                       eq: float = EQ_AVERAGE) -> float:
    """(1 - e1)^g1 (1 - e2)^g2 (1 - eq)^n."""
    if min(n, g1, g2) < 0:
        raise ValidationError("counts must be non-negative")
    return math.exp(g1 * math.log1p(-e1) + g2 * math.log1p(-e2) + n * math.log1p(-eq))


def _check_normalized(probs: np.ndarray) -> int:
    n = int(round(math.log2(probs.size)))
    if 2**n != probs.size:
        raise ValidationError("probability array length is not a power of two")
    if abs(probs.sum() - 1.0) > 1e-8 or (probs < 0).any():
        raise ValidationError(f"probabilities not normalized (sum={probs.sum():.12g})")
    return n


def porter_thomas_check(probs) -> tuple[float, float]:
    """Kolmogorov-Smirnov test of {2^n p_x} against Exp(1)."""
    probs = np.asarray(probs, dtype=float)
    n = _check_normalized(probs)
    if n > 20:
        raise FeasibilityError("exhaustive Porter-Thomas check limited to n <= 20")
    res = stats.kstest(probs * probs.size, "expon")
    return float(res.statistic), float(res.pvalue)


def mixture_distribution(probs, phi: float) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    return phi * probs + (1.0 - phi) / probs.size


def empirical_model_distance(samples: SampleSet, probs, phi: float) -> float:
    """Total variation distance between the sample histogram and the mixture model."""
    if samples.n > 14:
        raise FeasibilityError("comparison to the full model distribution is limited to n <= 14")
    if len(samples) == 0:
        raise ValidationError("no samples")
    probs = np.asarray(probs, dtype=float)
    _check_normalized(probs)
    freq = np.bincount(samples.indices, minlength=probs.size) / len(samples)
    return float(0.5 * np.abs(freq - mixture_distribution(probs, phi)).sum())


def fidelity_report(samples: SampleSet, probs, *, circuit: Circuit | None = None, rates=None,
                    porter_thomas: bool = False, name: str | None = None) -> FidelityReport:
    est, se = f_xeb(samples, probs)
    report = FidelityReport(est, se, len(samples), circuit=name)
    if circuit is not None:
        g1, g2 = circuit.gate_counts()
        report.predicted_phi_averaged = formula77_averaged(circuit.n, g1, g2)
        if rates is not None:
            report.predicted_phi = formula77(rates, circuit)
    if porter_thomas and isinstance(probs, np.ndarray):
        report.porter_thomas_ks = porter_thomas_check(probs)
    return report

"""
Exact leakage of Alice's bit pairs to a passive Charlie.

Everything here is a finite enumeration with ``Fraction`` probabilities:
the pre-encoding Bell state (uniform over the four labels, which is what the
swapping step produces), Alice's operator (uniform message prior) and the
receiver's cover operator (uniform over the cover set). Charlie's view of a
pair is (Bell class of the pre-encoding state, announced final label).
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np

from .adversary import (
    ENCODING,
    MESSAGE_PAIRS,
    BellClass,
    Posterior,
    charlie_posterior,
    charlie_views,
    classify,
)
from .protocol import Mode, SessionConfig, bits_to_pairs, run_session
from .quantum_core import BELL_ORDER, BellLabel, PauliLabel, Side, pauli_action_on_bell
from .variants import MODIFIED, ORIGINAL, EncodingVariant, as_cover, format_cover

ViewKey = tuple[BellClass, BellLabel]
F1 = frozenset({PauliLabel.I, PauliLabel.Z})  # keep the Phi/Psi class
F2 = frozenset({PauliLabel.X, PauliLabel.IY})  # swap it
MESSAGE_ENTROPY_BITS = 2.0


@dataclass(frozen=True)
class JointDistribution:
    entries: Mapping[tuple[str, ViewKey], Fraction]

    def message_marginal(self) -> dict[str, Fraction]:
        out = {m: Fraction(0) for m in MESSAGE_PAIRS}
        for (m, _), p in self.entries.items():
            out[m] += p
        return out

    def view_marginal(self) -> dict[ViewKey, Fraction]:
        out: dict[ViewKey, Fraction] = {}
        for (_, v), p in self.entries.items():
            out[v] = out.get(v, Fraction(0)) + p
        return out

    def conditional(self, view: ViewKey) -> Posterior:
        pv = self.view_marginal()[view]
        return Posterior({m: self.entries.get((m, view), Fraction(0)) / pv for m in MESSAGE_PAIRS})


def enumerate_joint(cover: EncodingVariant | Sequence[PauliLabel]) -> JointDistribution:
    ops = as_cover(cover)
    weight = Fraction(1, len(BELL_ORDER) * len(MESSAGE_PAIRS) * len(ops))
    entries: dict[tuple[str, ViewKey], Fraction] = {}
    for pre, msg, bob_op in itertools.product(BELL_ORDER, MESSAGE_PAIRS, ops):
        post = pauli_action_on_bell(ENCODING[msg], Side.A, pauli_action_on_bell(bob_op, Side.B, pre))
        key = (msg, (classify(pre), post))
        entries[key] = entries.get(key, Fraction(0)) + weight
    return JointDistribution(entries)


def _plogp_ratio(p: Fraction, ratio: Fraction) -> float:
    return float(p) * math.log2(ratio)


def mutual_information(joint: JointDistribution) -> float:
    """I(M;C) in bits; ratios are exact before the logarithm is taken."""
    pm = joint.message_marginal()
    pc = joint.view_marginal()
    return sum(
        _plogp_ratio(p, p / (pm[m] * pc[v])) for (m, v), p in joint.entries.items() if p > 0
    )


def conditional_entropy(joint: JointDistribution) -> float:
    """H(M|C) in bits."""
    pc = joint.view_marginal()
    return -sum(_plogp_ratio(p, p / pc[v]) for (m, v), p in joint.entries.items() if p > 0)


@dataclass(frozen=True)
class LeakageReport:
    description: str
    cover: tuple[PauliLabel, ...]
    mutual_information_bits: float
    residual_entropy_bits: float
    posteriors: Mapping[ViewKey, Posterior]
    monte_carlo: Optional["MonteCarloEstimate"] = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "kind": "leakage",
            "variant": self.description,
            "cover": [op.value for op in self.cover],
            "mutual_information_bits": self.mutual_information_bits,
            "residual_entropy_bits": self.residual_entropy_bits,
            "posteriors": [
                {
                    "first_round_class": klass.value,
                    "second_round_outcome": outcome.value,
                    "probabilities": post.as_floats(),
                }
                for (klass, outcome), post in sorted(
                    self.posteriors.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)
                )
            ],
        }
        if self.monte_carlo is not None:
            out["monte_carlo"] = self.monte_carlo.to_dict(self.mutual_information_bits)
        return out


def leakage_report(variant: EncodingVariant | Sequence[PauliLabel]) -> LeakageReport:
    if isinstance(variant, EncodingVariant):
        description = variant.spec
    else:
        description = "cover=" + format_cover(variant)
    joint = enumerate_joint(variant)
    posteriors = {v: joint.conditional(v) for v in joint.view_marginal()}
    return LeakageReport(
        description=description,
        cover=as_cover(variant),
        mutual_information_bits=mutual_information(joint),
        residual_entropy_bits=conditional_entropy(joint),
        posteriors=posteriors,
    )


def posterior_by_enumeration(view: ViewKey, cover: EncodingVariant | Sequence[PauliLabel]) -> Posterior:
    return enumerate_joint(cover).conditional(view)


def analytic_matches_enumeration(cover: EncodingVariant | Sequence[PauliLabel]) -> bool:
    joint = enumerate_joint(cover)
    return all(
        charlie_posterior(v, cover).probabilities == joint.conditional(v).probabilities
        for v in joint.view_marginal()
    )


# ---------------------------------------------------------------- cover pairs

@dataclass(frozen=True)
class CoverPairVerdict:
    pair: tuple[PauliLabel, PauliLabel]
    leakage_bits: float

    @property
    def safe(self) -> bool:
        return self.leakage_bits < 1e-12

    def to_dict(self) -> dict[str, Any]:
        return {
            "pair": [op.value for op in self.pair],
            "leakage_bits": self.leakage_bits,
            "safe": self.safe,
        }


def structurally_safe(pair: Iterable[PauliLabel]) -> bool:
    """One operator keeps the Phi/Psi class and the other swaps it."""
    a, b = pair
    return (a in F1) != (b in F1)


def classify_cover_pairs() -> list[CoverPairVerdict]:
    return [
        CoverPairVerdict(pair, mutual_information(enumerate_joint(pair)))
        for pair in itertools.combinations(tuple(PauliLabel), 2)
    ]


EXPECTED_SAFE_PAIRS = frozenset(
    frozenset(p)
    for p in [
        (PauliLabel.I, PauliLabel.X),
        (PauliLabel.I, PauliLabel.IY),
        (PauliLabel.Z, PauliLabel.X),
        (PauliLabel.Z, PauliLabel.IY),
    ]
)


# ---------------------------------------------------------------- case tables

TABLE_COLUMNS = ("pre_state", "bits", "alice_op", "bob_op", "post_state")


@dataclass(frozen=True)
class CaseRow:
    pre_state: BellLabel
    bits: str
    alice_op: PauliLabel
    bob_op: PauliLabel
    post_state: BellLabel

    def as_tokens(self) -> tuple[str, str, str, str, str]:
        return (self.pre_state.value, self.bits, self.alice_op.value, self.bob_op.value, self.post_state.value)


def generate_case_table(variant: EncodingVariant) -> list[CaseRow]:
    """Every (pre-state, message, cover) case, in the printed table order."""
    rows = []
    for pre, bits, bob_op in itertools.product(BELL_ORDER, MESSAGE_PAIRS, variant.cover):
        alice_op = ENCODING[bits]
        post = pauli_action_on_bell(bob_op, Side.B, pauli_action_on_bell(alice_op, Side.A, pre))
        rows.append(CaseRow(pre, bits, alice_op, bob_op, post))
    return rows


def table_to_csv(rows: Sequence[CaseRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE_COLUMNS)
    writer.writerows(r.as_tokens() for r in rows)
    return buf.getvalue()


def parse_table_csv(text: str) -> list[CaseRow]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != TABLE_COLUMNS:
        raise ValueError(f"expected columns {','.join(TABLE_COLUMNS)}")
    return [
        CaseRow(
            BellLabel(r["pre_state"].strip()),
            r["bits"].strip(),
            PauliLabel(r["alice_op"].strip()),
            PauliLabel(r["bob_op"].strip()),
            BellLabel(r["post_state"].strip()),
        )
        for r in reader
    ]


def load_table(path: str | Path) -> list[CaseRow]:
    return parse_table_csv(Path(path).read_text(encoding="utf-8"))


def golden_table(variant: EncodingVariant) -> list[CaseRow]:
    """The embedded transcription: table1 for original, table2 for modified."""
    name = {ORIGINAL.spec: "table1.csv", MODIFIED.spec: "table2.csv"}.get(variant.spec)
    if name is None:
        raise ValueError(f"no golden table for variant {variant.spec}")
    text = resources.files(__package__).joinpath("golden", name).read_text(encoding="utf-8")
    return parse_table_csv(text)


def diff_tables(got: Sequence[CaseRow], want: Sequence[CaseRow]) -> list[tuple[int, Optional[CaseRow], Optional[CaseRow]]]:
    """Row-by-row mismatches as (row number, got, want); missing rows are ``None``."""
    mismatches = []
    for k in range(max(len(got), len(want))):
        g = got[k] if k < len(got) else None
        w = want[k] if k < len(want) else None
        if g != w:
            mismatches.append((k, g, w))
    return mismatches


# ---------------------------------------------------------------- Monte Carlo

@dataclass(frozen=True)
class MonteCarloEstimate:
    pairs: int
    seed: int
    mutual_information_bits: float

    def to_dict(self, exact: Optional[float] = None) -> dict[str, Any]:
        out = {"pairs": self.pairs, "seed": self.seed, "mutual_information_bits": self.mutual_information_bits}
        if exact is not None:
            out["absolute_gap_bits"] = abs(self.mutual_information_bits - exact)
        return out


def empirical_mutual_information(samples: Counter) -> float:
    """Plug-in estimate from counts keyed by (message, view)."""
    total = sum(samples.values())
    pm: Counter = Counter()
    pc: Counter = Counter()
    for (m, v), k in samples.items():
        pm[m] += k
        pc[v] += k
    return sum(
        (k / total) * math.log2(k * total / (pm[m] * pc[v])) for (m, v), k in samples.items() if k
    )


def simulate_views(
    variant: EncodingVariant,
    pairs: int,
    seed: int = 0,
    chunk: int = 2000,
    mode: Mode = Mode.QSDC,
) -> Counter:
    """
    Run honest sessions until ``pairs`` message pairs have been observed and
    count (Alice's bit pair, Charlie's view) from the public transcript.

    Session seeds are derived from ``seed`` so the partition into chunks is
    deterministic.
    """
    n_chunks = max(1, math.ceil(pairs / chunk))
    seeds = np.random.SeedSequence(seed).generate_state(n_chunks, dtype=np.uint64)
    counts: Counter = Counter()
    remaining = pairs
    for s in seeds:
        n = min(chunk, remaining)
        tr = run_session(
            SessionConfig(n=n, m=0, variant=variant, mode=mode, checking_bit_fraction=0.0, seed=int(s))
        )
        public = tr.public_projection()
        for k, d in enumerate(tr.directions):
            msg = dict(zip(d.pair_indices, bits_to_pairs(d.message)))
            for view in charlie_views(public, k):
                counts[(msg[view.index], view.key)] += 1
        remaining -= n
    return counts


def monte_carlo_leakage(variant: EncodingVariant, pairs: int = 100_000, seed: int = 0) -> MonteCarloEstimate:
    counts = simulate_views(variant, pairs, seed)
    return MonteCarloEstimate(pairs, seed, empirical_mutual_information(counts))

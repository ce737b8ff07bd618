"""Six-step single-photon direct-communication protocol.

Alice prepares 3r phase-encoded photons split into two checking sequences
(S1, S2) and a message sequence (S3), sends them to Bob, who stores,
checks round one, encodes the message, shuffles S2/S3 into the return
stream, and sends everything back; Alice checks round two and decodes.
Both checking rounds compare the theoretical outcome distribution on the
announced basis pairs against the observed one; no-click slots are
assigned the more likely ideal outcome, so loss itself shifts the
observed distribution.

The engine is vectorized over photons (columnar numpy state) and draws
every stochastic input from a named stream derived from the run seed, so
a transcript is reproducible bit-for-bit and an attack with p1=0 leaves
the physics draws untouched.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import seeding
from .adversary import AttackOutcomeStats, BlindingAttackParams, attack_stats
from .analysis import ideal_outcome_probability
from .devices import ChannelNoiseModel, LinkBudget, LossSite
from .qstate import BasisConfig


class ProtocolViolation(ValueError):
    """Raised when announced data is inconsistent with the protocol state."""


class BasisPolicyMode(enum.Enum):
    UNIFORM = "uniform"
    TARGET_P1 = "target-p1"


@dataclass(frozen=True)
class OffsetDistribution:
    """Distribution of the basis offset (prep index - measured index) mod n."""

    n: int
    deltas: tuple[int, ...]
    weights: tuple[float, ...]

    def expected_p_g0(self, theta: float = math.pi / 4) -> float:
        return math.fsum(
            w * ideal_outcome_probability(d, self.n, theta)
            for d, w in zip(self.deltas, self.weights)
        )

    def assigned_g0_fraction(self, theta: float = math.pi / 4) -> float:
        """Fraction of no-click slots the assignment rule maps to g=0."""
        return math.fsum(
            w
            for d, w in zip(self.deltas, self.weights)
            if ideal_outcome_probability(d, self.n, theta) > 0.5
        )

    def draw(self, size: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(len(self.deltas), size=size, p=self.weights)
        return np.asarray(self.deltas, dtype=np.int64)[idx]


@dataclass(frozen=True)
class BasisPolicy:
    """How measurement bases relate to preparation bases in the checks.

    UNIFORM draws the offset uniformly (expected first-round P(g=0) = 0.5
    for every n); TARGET_P1 mixes the two offsets whose ideal outcome
    probabilities bracket the requested target, hitting it exactly in
    expectation. A target of exactly 0.5 degenerates to the uniform
    distribution, which realizes it for every n.
    """

    mode: BasisPolicyMode = BasisPolicyMode.UNIFORM
    target: Optional[float] = None

    def __post_init__(self) -> None:
        if self.mode is BasisPolicyMode.TARGET_P1:
            if self.target is None or not 0.0 <= self.target <= 1.0:
                raise ValueError("target-p1 policy needs a target in [0, 1]")
        elif self.target is not None:
            raise ValueError("uniform policy takes no target")

    def offsets(self, config: BasisConfig) -> OffsetDistribution:
        n = config.n
        if self.mode is BasisPolicyMode.UNIFORM or self.target == 0.5:
            return OffsetDistribution(
                n=n, deltas=tuple(range(n)), weights=(1.0 / n,) * n
            )
        probs = [(ideal_outcome_probability(d, n, config.theta), d) for d in range(n)]
        lo = max(((p, d) for p, d in probs if p <= self.target + 1e-12), default=None)
        hi = min(((p, d) for p, d in probs if p >= self.target - 1e-12), default=None)
        if lo is None or hi is None:
            raise ValueError(
                f"target {self.target} is outside the reachable range for n={n}"
            )
        if abs(hi[0] - lo[0]) <= 1e-12:
            return OffsetDistribution(n=n, deltas=(lo[1],), weights=(1.0,))
        w_hi = (self.target - lo[0]) / (hi[0] - lo[0])
        return OffsetDistribution(
            n=n, deltas=(lo[1], hi[1]), weights=(1.0 - w_hi, w_hi)
        )


def hoeffding_tolerance(m: int, epsilon: float = 1e-6) -> float:
    """Two-sided deviation bound exceeded with probability <= epsilon."""
    if m < 1:
        raise ValueError("m must be positive")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    return math.sqrt(math.log(2.0 / epsilon) / (2.0 * m))


class Round2Mode(enum.Enum):
    # measurement bases drawn through the policy against the arriving
    # photon's preparation index, so both rounds target the same P(g=0)
    POLICY = "policy"
    # receiver reuses her original basis order against the shuffled stream
    ORIGINAL_ORDER = "original-order"


@dataclass(frozen=True)
class ProtocolParams:
    r: int
    config: BasisConfig
    policy: BasisPolicy
    link: LinkBudget = LinkBudget()
    noise: ChannelNoiseModel = ChannelNoiseModel()
    adversary: Optional[BlindingAttackParams] = None
    tolerance: Optional[float] = None  # None -> Hoeffding bound at epsilon
    epsilon: float = 1e-6
    round2_mode: Round2Mode = Round2Mode.POLICY
    continue_on_abort: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.r < 1:
            raise ValueError("r must be positive")
        if self.tolerance is not None and self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")

    def check_tolerance(self) -> float:
        if self.tolerance is not None:
            return self.tolerance
        return hoeffding_tolerance(self.r, self.epsilon)


@dataclass(frozen=True)
class SecurityCheckReport:
    round_index: int
    m: int
    theoretical_p_g0: float
    empirical_p_g0: float
    tolerance: float
    n_clicked: int
    n_clicked_g0: int
    n_assigned_g0: int

    @property
    def deviation(self) -> float:
        return abs(self.empirical_p_g0 - self.theoretical_p_g0)

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance


@dataclass(frozen=True)
class Announcements:
    """Everything disclosed over the public channel, and nothing else."""

    s1_positions: np.ndarray
    y1: np.ndarray
    round1_clicked: np.ndarray
    round1_g: np.ndarray            # -1 for no-click
    s2p_slots: np.ndarray           # return-stream slots holding check photons
    s2_original_positions: np.ndarray
    s3p_slots: np.ndarray
    s3_original_positions: np.ndarray
    round2_clicked: Optional[np.ndarray] = None
    round2_g: Optional[np.ndarray] = None


@dataclass(frozen=True)
class MessageFrame:
    payload: np.ndarray
    decoded: np.ndarray  # -1 where the carrier photon was lost

    def __post_init__(self) -> None:
        if self.payload.shape != self.decoded.shape:
            raise ValueError("payload and decoded lengths differ")

    @property
    def status(self) -> list[str]:
        out = []
        for want, got in zip(self.payload, self.decoded):
            if got < 0:
                out.append("lost")
            elif got == want:
                out.append("ok")
            else:
                out.append("flipped")
        return out

    @property
    def n_lost(self) -> int:
        return int(np.sum(self.decoded < 0))

    @property
    def n_flipped(self) -> int:
        ok = self.decoded >= 0
        return int(np.sum(self.decoded[ok] != self.payload[ok]))

    @property
    def n_ok(self) -> int:
        return len(self.payload) - self.n_lost - self.n_flipped


@dataclass(frozen=True)
class EstStat:
    """Point estimate with its standard error."""

    value: float
    stderr: float


def _est(values: np.ndarray) -> EstStat:
    n = len(values)
    mean = float(np.mean(values))
    stderr = float(np.std(values) / math.sqrt(n)) if n > 1 else 0.0
    return EstStat(mean, stderr)


@dataclass(frozen=True)
class TranscriptStats:
    """Event-count statistics in the same terms as the closed-form model."""

    q_ab: EstStat
    q_aba: EstStat
    q_aba_decode: EstStat
    p1_theoretical: float
    p2_theoretical: float
    p1_observed: EstStat           # clicked-or-assigned g=0 frequency
    p2_observed: EstStat
    p1_clicked: EstStat            # g=0 frequency among clicks only
    p2_clicked: EstStat
    e_ab_signed: EstStat           # gain-weighted theoretical-minus-observed shift
    e_ab_assign: EstStat
    e_aba_signed: EstStat
    e_aba_assign: EstStat
    loss_counts: dict

    @property
    def e_ab_total(self) -> float:
        return abs(self.e_ab_signed.value) + self.e_ab_assign.value

    @property
    def e_aba_total(self) -> float:
        return abs(self.e_aba_signed.value) + self.e_aba_assign.value


@dataclass
class SequenceLedger:
    """Index bookkeeping: preparation settings, sequence membership,
    measurement settings, and the return-stream shuffle."""

    n: int
    r: int
    prep: np.ndarray
    s1_pos: np.ndarray
    s2_pos: np.ndarray
    s3_pos: np.ndarray
    y1: Optional[np.ndarray] = None
    return_perm: Optional[np.ndarray] = None  # return slot -> combined index
    y2: Optional[np.ndarray] = None

    @property
    def x1(self) -> np.ndarray:
        return self.prep[self.s1_pos]

    @property
    def x2(self) -> np.ndarray:
        return self.prep[self.s2_pos]

    @property
    def x3(self) -> np.ndarray:
        return self.prep[self.s3_pos]

    def combined_positions(self) -> np.ndarray:
        return np.concatenate([self.s2_pos, self.s3_pos])

    @property
    def s2p_slots(self) -> np.ndarray:
        return np.nonzero(self.return_perm < self.r)[0]

    @property
    def s3p_slots(self) -> np.ndarray:
        return np.nonzero(self.return_perm >= self.r)[0]

    @property
    def s2_order(self) -> np.ndarray:
        """Original S2 index of each announced check slot."""
        return self.return_perm[self.s2p_slots]

    @property
    def s3_order(self) -> np.ndarray:
        return self.return_perm[self.s3p_slots] - self.r

    @property
    def x4(self) -> np.ndarray:
        """Preparation indices of the shuffled check photons, slot order."""
        return self.x2[self.s2_order]


@dataclass
class TranscriptColumns:
    """Per-photon record of the whole run, columnar."""

    sequence: np.ndarray       # 1, 2, 3
    prep: np.ndarray
    secret_flip: np.ndarray
    message_bit: np.ndarray    # -1 outside S3
    basis: np.ndarray          # measurement index used, -1 if none
    rotation: np.ndarray
    loss_site: np.ndarray      # LossSite codes
    loss_leg: np.ndarray
    clicked: np.ndarray
    g: np.ndarray              # -1 when no click
    assigned_g: np.ndarray     # -1 when not assigned
    attacked: np.ndarray

    def __len__(self) -> int:
        return len(self.prep)


_SITE_CODE = {
    LossSite.NONE: 0,
    LossSite.FIBER: 1,
    LossSite.COUPLING: 2,
    LossSite.MEMORY: 3,
    LossSite.DETECTOR: 4,
}
_SITE_NAME = {v: k.value for k, v in _SITE_CODE.items()}


@dataclass
class ProtocolResult:
    params: ProtocolParams
    ledger: SequenceLedger
    announcements: Optional[Announcements]
    check1: SecurityCheckReport
    check2: Optional[SecurityCheckReport]
    frame: Optional[MessageFrame]
    aborted_at_step: Optional[int]
    stats: Optional[TranscriptStats]
    photons: TranscriptColumns
    attack: Optional[AttackOutcomeStats] = None

    @property
    def completed(self) -> bool:
        return self.aborted_at_step is None


def _born_p(theta: float, angles: np.ndarray, phase_diff: np.ndarray) -> np.ndarray:
    """Born probability of g=0: |<basis|state>|^2 by direct complex arithmetic."""
    inner = math.cos(theta) * np.cos(angles) + np.exp(1j * phase_diff) * math.sin(
        theta
    ) * np.sin(angles)
    return np.clip(np.abs(inner) ** 2, 0.0, 1.0)


class ProtocolRun:
    """One protocol execution; call the step methods in order or use run()."""

    def __init__(self, params: ProtocolParams, message: Optional[Sequence[int]] = None):
        self.params = params
        self.cfg = params.config
        self.r = params.r
        self.n = params.config.n
        self.theta = params.config.theta
        self._streams: dict[str, np.random.Generator] = {}
        self.ledger: Optional[SequenceLedger] = None
        self._message_in = message
        self._stage = 0

    def _rng(self, purpose: str) -> np.random.Generator:
        if purpose not in self._streams:
            self._streams[purpose] = seeding.stream(self.params.seed, purpose)
        return self._streams[purpose]

    def _require_stage(self, stage: int) -> None:
        if self._stage != stage:
            raise ProtocolViolation(
                f"protocol step out of order: at stage {self._stage}, need {stage}"
            )

    # -- step 1: preparation ------------------------------------------------
    def step1_prepare(self) -> SequenceLedger:
        self._require_stage(0)
        r, n = self.r, self.n
        prep = self._rng("prep").integers(1, n + 1, size=3 * r)
        order = self._rng("partition").permutation(3 * r)
        self.ledger = SequenceLedger(
            n=n, r=r, prep=prep,
            s1_pos=order[:r], s2_pos=order[r : 2 * r], s3_pos=order[2 * r :],
        )
        self.secret_flip = np.zeros(3 * r, dtype=bool)
        self.secret_flip[self.ledger.s3_pos] = (
            self._rng("secret").integers(0, 2, size=r).astype(bool)
        )
        if self._message_in is None:
            self.payload = self._rng("message").integers(0, 2, size=r).astype(np.int8)
        else:
            self.payload = np.asarray(self._message_in, dtype=np.int8)
            if self.payload.shape != (r,):
                raise ProtocolViolation(f"message must hold exactly {r} bits")
            if not np.all((self.payload == 0) | (self.payload == 1)):
                raise ProtocolViolation("message bits must be 0 or 1")
        self._stage = 1
        return self.ledger

    # -- step 2: outbound transmission and storage at the encoder ------------
    def step2_transmit_to_bob(self) -> None:
        self._require_stage(1)
        r, link = self.r, self.params.link
        size = 3 * r
        self.dth1 = self.params.noise.draw(size, self._rng("noise-ab"))
        surv_f = self._rng("loss-fiber-ab").random(size) < link.eta_t
        surv_c = self._rng("loss-coupling-ab").random(size) < link.eta_c
        surv_m = self._rng("loss-memory-bob").random(size) < link.eta_m
        self.at_bob = surv_f & surv_c
        self.in_qm_bob = self.at_bob & surv_m

        self.site = np.zeros(size, dtype=np.int8)
        self.leg = np.zeros(size, dtype=np.int8)
        self.site[~surv_f] = _SITE_CODE[LossSite.FIBER]
        self.leg[~surv_f] = 1
        lost_c = surv_f & ~surv_c
        self.site[lost_c] = _SITE_CODE[LossSite.COUPLING]
        self.leg[lost_c] = 1
        lost_m = self.at_bob & ~surv_m
        self.site[lost_m] = _SITE_CODE[LossSite.MEMORY]
        self.leg[lost_m] = 1

        adv = self.params.adversary
        if adv is not None:
            self.attacked = self._rng("adv-attack").random(size) < adv.p1
            self.forced_g1 = np.where(
                self._rng("adv-close-1").random(size) < adv.p2, 0, 1
            ).astype(np.int8)
            self.eve_basis = self._rng("adv-basis").integers(1, self.n + 1, size=size)
        else:
            self.attacked = np.zeros(size, dtype=bool)
            self.forced_g1 = np.full(size, -1, dtype=np.int8)
            self.eve_basis = np.full(size, -1, dtype=np.int64)
        self._stage = 2

    # -- step 3: first checking round ----------------------------------------
    def step3_first_check(self) -> SecurityCheckReport:
        self._require_stage(2)
        r, led = self.r, self.ledger
        offs = self.params.policy.offsets(self.cfg)
        d1 = offs.draw(r, self._rng("check1-offsets"))
        a = led.prep[led.s1_pos]
        led.y1 = ((a - d1 - 1) % self.n) + 1
        if len(led.y1) != len(led.s1_pos):
            raise ProtocolViolation("announcement length mismatch in round 1")

        phase = 2.0 * math.pi * (a - led.y1) / self.n
        self.p1_ideal = _born_p(self.theta, np.full(r, self.theta), phase)
        p_noisy = _born_p(self.theta, self.theta + self.dth1[led.s1_pos], phase)

        alive = self.in_qm_bob[led.s1_pos]
        clicked = alive & (self._rng("check1-click").random(r) < self.params.link.eta_d)
        g = np.where(self._rng("check1-born").random(r) < p_noisy, 0, 1).astype(np.int8)
        att = self.attacked[led.s1_pos]
        clicked = clicked | att
        g = np.where(att, self.forced_g1[led.s1_pos], g)

        self.assigned1 = np.where(self.p1_ideal <= 0.5, 1, 0).astype(np.int8)
        self.clicked1, self.g1 = clicked, g
        n_g0_clicked = int(np.sum(clicked & (g == 0)))
        n_assigned_g0 = int(np.sum(~clicked & (self.assigned1 == 0)))
        report = SecurityCheckReport(
            round_index=1,
            m=r,
            theoretical_p_g0=float(np.mean(self.p1_ideal)),
            empirical_p_g0=(n_g0_clicked + n_assigned_g0) / r,
            tolerance=self.params.check_tolerance(),
            n_clicked=int(np.sum(clicked)),
            n_clicked_g0=n_g0_clicked,
            n_assigned_g0=n_assigned_g0,
        )
        # no-click at the measuring detector
        s1 = led.s1_pos
        no_click = alive & ~clicked
        self.site[s1[no_click]] = _SITE_CODE[LossSite.DETECTOR]
        self.site[s1[att]] = _SITE_CODE[LossSite.NONE]  # forged pulse clicked
        self.leg[s1[att]] = 0
        self.check1 = report
        self._stage = 3
        return report

    # -- step 4: encoding and shuffle -----------------------------------------
    def step4_encode_and_shuffle(self) -> None:
        self._require_stage(3)
        led = self.ledger
        self.message_bit = np.full(3 * self.r, -1, dtype=np.int8)
        self.message_bit[led.s3_pos] = self.payload
        led.return_perm = self._rng("shuffle").permutation(2 * self.r)
        self._stage = 4

    # -- step 5: return transmission and second checking round ----------------
    def step5_transmit_to_alice(self) -> None:
        self._require_stage(4)
        led, link = self.ledger, self.params.link
        size = 2 * self.r
        combined = led.combined_positions()
        self.return_pos = combined[led.return_perm]  # sent position per slot
        self.dth2 = self.params.noise.draw(size, self._rng("noise-ba"))
        surv_f = self._rng("loss-fiber-ba").random(size) < link.eta_t
        surv_c = self._rng("loss-coupling-ba").random(size) < link.eta_c
        surv_m = self._rng("loss-memory-alice").random(size) < link.eta_m
        alive_in = self.in_qm_bob[self.return_pos]
        self.alive_at_alice = alive_in & surv_f & surv_c & surv_m

        pos = self.return_pos
        lost_f = alive_in & ~surv_f
        lost_c = alive_in & surv_f & ~surv_c
        lost_m = alive_in & surv_f & surv_c & ~surv_m
        self.site[pos[lost_f]] = _SITE_CODE[LossSite.FIBER]
        self.leg[pos[lost_f]] = 2
        self.site[pos[lost_c]] = _SITE_CODE[LossSite.COUPLING]
        self.leg[pos[lost_c]] = 2
        self.site[pos[lost_m]] = _SITE_CODE[LossSite.MEMORY]
        self.leg[pos[lost_m]] = 2

        adv = self.params.adversary
        if adv is not None:
            self.forced_g2 = np.where(
                self._rng("adv-close-2").random(size) < adv.p2, 0, 1
            ).astype(np.int8)
        else:
            self.forced_g2 = np.full(size, -1, dtype=np.int8)
        self._stage = 5

    def step5_second_check(self) -> SecurityCheckReport:
        self._require_stage(5)
        r, led = self.r, self.ledger
        slots = led.s2p_slots
        if len(slots) != r:
            raise ProtocolViolation("announcement length mismatch in round 2")
        d = led.x4
        if self.params.round2_mode is Round2Mode.POLICY:
            offs = self.params.policy.offsets(self.cfg)
            d2 = offs.draw(r, self._rng("check2-offsets"))
            led.y2 = ((d - d2 - 1) % self.n) + 1
        else:
            led.y2 = led.x2.copy()  # original order against the shuffled stream

        phase = 2.0 * math.pi * (d - led.y2) / self.n
        self.p2_ideal = _born_p(self.theta, np.full(r, self.theta), phase)
        pos = self.return_pos[slots]
        rot = self.dth1[pos] + self.dth2[slots]
        p_noisy = _born_p(self.theta, self.theta + rot, phase)

        alive = self.alive_at_alice[slots]
        clicked = alive & (self._rng("check2-click").random(r) < self.params.link.eta_d)
        g = np.where(self._rng("check2-born").random(r) < p_noisy, 0, 1).astype(np.int8)
        att = self.attacked[pos]
        clicked = clicked | att
        g = np.where(att, self.forced_g2[slots], g)

        self.assigned2 = np.where(self.p2_ideal <= 0.5, 1, 0).astype(np.int8)
        self.clicked2, self.g2 = clicked, g
        n_g0_clicked = int(np.sum(clicked & (g == 0)))
        n_assigned_g0 = int(np.sum(~clicked & (self.assigned2 == 0)))
        report = SecurityCheckReport(
            round_index=2,
            m=r,
            theoretical_p_g0=float(np.mean(self.p2_ideal)),
            empirical_p_g0=(n_g0_clicked + n_assigned_g0) / r,
            tolerance=self.params.check_tolerance(),
            n_clicked=int(np.sum(clicked)),
            n_clicked_g0=n_g0_clicked,
            n_assigned_g0=n_assigned_g0,
        )
        no_click = alive & ~clicked
        self.site[pos[no_click]] = _SITE_CODE[LossSite.DETECTOR]
        self.site[pos[att]] = _SITE_CODE[LossSite.NONE]
        self.leg[pos[att]] = 0
        self.check2 = report
        self._stage = 6
        return report

    # -- step 6: decoding ------------------------------------------------------
    def step6_decode(self) -> MessageFrame:
        self._require_stage(6)
        r, led = self.r, self.ledger
        slots = led.s3p_slots
        order = led.s3_order              # original S3 index per slot
        pos = self.return_pos[slots]
        rot = self.dth1[pos] + self.dth2[slots]
        # measurement against the exact pre-send state: the secret flip
        # cancels, leaving only the message flip in the relative phase
        msg = self.payload[order]
        phase = math.pi * msg.astype(np.float64)
        p_g0 = _born_p(self.theta, self.theta + rot, phase)

        alive = self.alive_at_alice[slots]
        clicked = alive & (self._rng("decode-click").random(r) < self.params.link.eta_d)
        g = np.where(self._rng("decode-born").random(r) < p_g0, 0, 1).astype(np.int8)
        att = self.attacked[pos]
        clicked = clicked | att
        g = np.where(att, self.forced_g2[slots], g)

        decoded_by_slot = np.where(clicked, g, -1).astype(np.int8)
        decoded = np.full(r, -1, dtype=np.int8)
        decoded[order] = decoded_by_slot
        self.clicked3, self.g3 = clicked, g
        self.decode_slots = slots
        no_click = alive & ~clicked
        self.site[pos[no_click]] = _SITE_CODE[LossSite.DETECTOR]
        self.site[pos[att]] = _SITE_CODE[LossSite.NONE]
        self.leg[pos[att]] = 0
        self.frame = MessageFrame(payload=self.payload.copy(), decoded=decoded)
        self._stage = 7
        return self.frame

    # -- assembly ---------------------------------------------------------------
    def _stats(self) -> TranscriptStats:
        r, led = self.r, self.ledger
        clicked1 = self.clicked1.astype(np.float64)
        clicked2 = self.clicked2.astype(np.float64)
        clicked3 = self.clicked3.astype(np.float64)

        def assign_weight(p_ideal: np.ndarray) -> np.ndarray:
            return np.minimum(p_ideal, 1.0 - p_ideal)

        shift1 = clicked1 * (self.p1_ideal - (self.g1 == 0))
        shift2 = clicked2 * (self.p2_ideal - (self.g2 == 0))
        assign1 = (1.0 - clicked1) * assign_weight(self.p1_ideal)
        assign2 = (1.0 - clicked2) * assign_weight(self.p2_ideal)

        obs1 = clicked1 * (self.g1 == 0) + (1.0 - clicked1) * (self.assigned1 == 0)
        obs2 = clicked2 * (self.g2 == 0) + (1.0 - clicked2) * (self.assigned2 == 0)

        def clicked_g0(clicked: np.ndarray, g: np.ndarray) -> EstStat:
            sel = (g == 0)[clicked].astype(np.float64)
            if len(sel) == 0:
                return EstStat(0.0, 0.0)
            return EstStat(float(np.mean(sel)), float(np.std(sel) / math.sqrt(len(sel))))

        counts: dict[str, int] = {}
        for code, leg in zip(self.site, self.leg):
            name = _SITE_NAME[int(code)]
            key = name if code == 0 or leg == 0 else f"{name}-leg{int(leg)}"
            counts[key] = counts.get(key, 0) + 1

        return TranscriptStats(
            q_ab=_est(clicked1),
            q_aba=_est(clicked2),
            q_aba_decode=_est(clicked3),
            p1_theoretical=float(np.mean(self.p1_ideal)),
            p2_theoretical=float(np.mean(self.p2_ideal)),
            p1_observed=_est(obs1),
            p2_observed=_est(obs2),
            p1_clicked=clicked_g0(self.clicked1, self.g1),
            p2_clicked=clicked_g0(self.clicked2, self.g2),
            e_ab_signed=_est(shift1),
            e_ab_assign=_est(assign1),
            e_aba_signed=_est(shift2),
            e_aba_assign=_est(assign2),
            loss_counts=counts,
        )

    def _columns(self) -> TranscriptColumns:
        r, led = self.r, self.ledger
        size = 3 * r
        seq = np.zeros(size, dtype=np.int8)
        seq[led.s1_pos] = 1
        seq[led.s2_pos] = 2
        seq[led.s3_pos] = 3
        basis = np.full(size, -1, dtype=np.int64)
        clicked = np.zeros(size, dtype=bool)
        g = np.full(size, -1, dtype=np.int8)
        assigned = np.full(size, -1, dtype=np.int8)
        # rotation precedes loss sampling, so every sent photon carries the
        # outbound draw; returned photons add the second-leg draw
        rotation = self.dth1.copy()
        if self._stage >= 6:
            ret_mask = self.in_qm_bob[self.return_pos]
            rotation[self.return_pos[ret_mask]] += self.dth2[ret_mask]

        if self._stage >= 3:
            basis[led.s1_pos] = led.y1
            clicked[led.s1_pos] = self.clicked1
            g[led.s1_pos] = np.where(self.clicked1, self.g1, -1)
            assigned[led.s1_pos] = np.where(~self.clicked1, self.assigned1, -1)
        if self._stage >= 6:
            slots2 = led.s2p_slots
            pos2 = self.return_pos[slots2]
            basis[pos2] = led.y2
            clicked[pos2] = self.clicked2
            g[pos2] = np.where(self.clicked2, self.g2, -1)
            assigned[pos2] = np.where(~self.clicked2, self.assigned2, -1)
        if self._stage >= 7:
            slots3 = self.decode_slots
            pos3 = self.return_pos[slots3]
            basis[pos3] = led.prep[pos3]
            clicked[pos3] = self.clicked3
            g[pos3] = np.where(self.clicked3, self.g3, -1)
        return TranscriptColumns(
            sequence=seq,
            prep=led.prep,
            secret_flip=self.secret_flip,
            message_bit=getattr(self, "message_bit", np.full(size, -1, dtype=np.int8)),
            basis=basis,
            rotation=rotation,
            loss_site=self.site,
            loss_leg=self.leg,
            clicked=clicked,
            g=g,
            assigned_g=assigned,
            attacked=self.attacked,
        )

    def _announcements(self) -> Announcements:
        led = self.ledger
        done2 = self._stage >= 6
        return Announcements(
            s1_positions=led.s1_pos.copy(),
            y1=led.y1.copy(),
            round1_clicked=self.clicked1.copy(),
            round1_g=np.where(self.clicked1, self.g1, -1),
            s2p_slots=led.s2p_slots if led.return_perm is not None else np.array([], dtype=np.int64),
            s2_original_positions=led.s2_order if led.return_perm is not None else np.array([], dtype=np.int64),
            s3p_slots=led.s3p_slots if led.return_perm is not None else np.array([], dtype=np.int64),
            s3_original_positions=led.s3_order if led.return_perm is not None else np.array([], dtype=np.int64),
            round2_clicked=self.clicked2.copy() if done2 else None,
            round2_g=np.where(self.clicked2, self.g2, -1) if done2 else None,
        )

    def _attack_summary(self) -> Optional[AttackOutcomeStats]:
        adv = self.params.adversary
        if adv is None:
            return None
        led = self.ledger
        att3 = self.attacked[led.s3_pos]
        if att3.any():
            known = self.eve_basis[led.s3_pos] == led.prep[led.s3_pos]
            guess = self._rng("adv-guess").integers(0, 2, size=self.r).astype(np.int8)
            eve_bits = np.where(known, self.payload, guess)
            correct = float(np.mean(eve_bits[att3] == self.payload[att3]))
        else:
            correct = 0.0
        return attack_stats(
            self.check1.theoretical_p_g0, adv, self.check1.empirical_p_g0, correct
        )

    def run(self) -> ProtocolResult:
        self.step1_prepare()
        self.step2_transmit_to_bob()
        check1 = self.step3_first_check()
        enforce = not self.params.continue_on_abort
        if enforce and not check1.passed:
            return ProtocolResult(
                params=self.params, ledger=self.ledger,
                announcements=self._announcements(), check1=check1, check2=None,
                frame=None, aborted_at_step=3, stats=None, photons=self._columns(),
                attack=self._attack_summary(),
            )
        self.step4_encode_and_shuffle()
        self.step5_transmit_to_alice()
        check2 = self.step5_second_check()
        if enforce and not check2.passed:
            return ProtocolResult(
                params=self.params, ledger=self.ledger,
                announcements=self._announcements(), check1=check1, check2=check2,
                frame=None, aborted_at_step=5, stats=None, photons=self._columns(),
                attack=self._attack_summary(),
            )
        frame = self.step6_decode()
        return ProtocolResult(
            params=self.params, ledger=self.ledger,
            announcements=self._announcements(), check1=check1, check2=check2,
            frame=frame, aborted_at_step=None, stats=self._stats(),
            photons=self._columns(), attack=self._attack_summary(),
        )


def run_full_protocol(
    params: ProtocolParams, message: Optional[Sequence[int]] = None
) -> ProtocolResult:
    """Execute all six steps; check aborts terminate the run with a report,
    they are not errors."""
    return ProtocolRun(params, message).run()


def write_transcript(result: ProtocolResult, path) -> None:
    """Line-delimited per-photon records plus one trailing summary record.

    Field names are stable across versions; see README for the schema.
    """
    cols = result.photons
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(len(cols)):
            measured_at = ""
            if cols.basis[i] >= 0:
                measured_at = "bob" if cols.sequence[i] == 1 else "alice"
            rec = {
                "id": i,
                "seq": f"S{cols.sequence[i]}",
                "prep": int(cols.prep[i]),
                "secret_flip": bool(cols.secret_flip[i]),
                "message_bit": int(cols.message_bit[i]),
                "basis": int(cols.basis[i]),
                "measured_at": measured_at,
                "rotation": float(cols.rotation[i]),
                "loss_site": _SITE_NAME[int(cols.loss_site[i])],
                "loss_leg": int(cols.loss_leg[i]),
                "clicked": bool(cols.clicked[i]),
                "g": int(cols.g[i]),
                "assigned_g": int(cols.assigned_g[i]),
                "attacked": bool(cols.attacked[i]),
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        fh.write(json.dumps(summary_record(result), sort_keys=True) + "\n")


def summary_record(result: ProtocolResult) -> dict:
    out = {
        "record": "summary",
        "r": result.params.r,
        "n": result.params.config.n,
        "seed": result.params.seed,
        "aborted_at_step": result.aborted_at_step,
        "check1": _report_dict(result.check1),
        "check2": _report_dict(result.check2) if result.check2 else None,
    }
    if result.frame is not None:
        out["message"] = {
            "length": len(result.frame.payload),
            "ok": result.frame.n_ok,
            "lost": result.frame.n_lost,
            "flipped": result.frame.n_flipped,
        }
    if result.stats is not None:
        s = result.stats
        out["stats"] = {
            "q_ab": s.q_ab.value,
            "q_aba": s.q_aba.value,
            "e_ab": s.e_ab_total,
            "e_aba": s.e_aba_total,
            "p1_observed": s.p1_observed.value,
            "p2_observed": s.p2_observed.value,
            "loss_counts": s.loss_counts,
        }
    if result.attack is not None:
        out["attack"] = {
            "predicted_p_g0": result.attack.predicted_p_g0,
            "empirical_p_g0": result.attack.empirical_p_g0,
            "eve_correct_fraction": result.attack.eve_correct_fraction,
            "eve_info_per_bit": result.attack.eve_info_per_bit,
        }
    return out


def _report_dict(report: SecurityCheckReport) -> dict:
    return {
        "round": report.round_index,
        "m": report.m,
        "theoretical_p_g0": report.theoretical_p_g0,
        "empirical_p_g0": report.empirical_p_g0,
        "deviation": report.deviation,
        "tolerance": report.tolerance,
        "verdict": "pass" if report.passed else "abort",
    }

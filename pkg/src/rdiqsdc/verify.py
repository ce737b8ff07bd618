"""Acceptance battery: every release gate in one runnable module.

Each criterion returns CheckResult rows; `run_all` concatenates them.
Sources: "reference" rows compare against externally fixed target values,
"oracle" rows against independently derived frozen constants,
"simulation" rows cross-validate the Monte Carlo engine against the
closed-form model at 5-sigma, and "exact" rows are identities.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import analysis
from .adversary import BlindingAttackParams, detection_power, predict_attacked_distribution
from .devices import ChannelNoiseModel, LinkBudget
from .protocol import (
    BasisPolicy,
    BasisPolicyMode,
    ProtocolParams,
    ProtocolRun,
    hoeffding_tolerance,
    run_full_protocol,
)
from .qstate import BasisConfig, ChannelRotation, EncodeOp, apply_encode, apply_rotation, prepare

# ---------------------------------------------------------------------------
# reference operating points and their fixed target values
# ---------------------------------------------------------------------------
P1_LIST = (0.001, 0.1, 0.2, 0.3, 0.4, 0.5)

ETA_THRESHOLDS_NOISELESS = (0.0115, 0.4823, 0.6790, 0.7718, 0.8238, 0.8568)
ETA_THRESHOLDS_PI_40 = (0.0130, 0.4985, 0.6927, 0.7798, 0.8278, 0.8569)
# five published values for six operating points; emitted for comparison only
ETA_THRESHOLDS_PI_400 = (0.0120, 0.4825, 0.7728, 0.8238, 0.8569)

DTH_THRESHOLDS = {0.1: 0.2547, 0.2: 0.2988, 0.3: 0.3742, 0.4: 0.5912}
FIDELITY_TARGETS = {0.2547: 0.9365, 0.2988: 0.9133, 0.3742: 0.8664, 0.5912: 0.6894}

MAX_DISTANCE_KM = {"p1=0.1, dth=pi/400": 14.72, "p1=0.001, dth=0": 95.8}

# independently derived throughput at P1=0.1, L=0.5 km, R_rep=1e7 Hz, p_s=1
EFFICIENCY_ORACLE_BITS_PER_S = 1_782_849.887

# entanglement-based fully-device-independent benchmark, reporting only
DI_BENCHMARK = {"eta_threshold": 0.926, "max_distance_km": 0.561}


@dataclass
class CheckResult:
    criterion: str
    name: str
    expected: str
    obtained: str
    tolerance: str
    passed: bool
    source: str

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return (
            f"[{mark}] criterion {self.criterion} ({self.source}): {self.name}: "
            f"expected {self.expected} (tol {self.tolerance}), got {self.obtained}"
        )


def _check(criterion, name, want, got, tol, source) -> CheckResult:
    return CheckResult(
        criterion=criterion,
        name=name,
        expected=f"{want:.6g}",
        obtained=f"{got:.6g}",
        tolerance=f"{tol:.3g}",
        passed=abs(got - want) <= tol,
        source=source,
    )


# ---------------------------------------------------------------------------
# criteria 1-2: loss thresholds
# ---------------------------------------------------------------------------
def criterion1() -> list[CheckResult]:
    out = []
    for p1, want in zip(P1_LIST, ETA_THRESHOLDS_NOISELESS):
        got = analysis.eta_threshold(p1, 0.0)
        out.append(_check("1", f"eta* at p1={p1}, dth=0", want, got, 0.002, "reference"))
    return out


def criterion2() -> list[CheckResult]:
    out = []
    for p1, want in zip(P1_LIST, ETA_THRESHOLDS_PI_40):
        got = analysis.eta_threshold(p1, math.pi / 40)
        out.append(
            _check("2", f"eta* at p1={p1}, dth=pi/40", want, got, 0.003, "reference")
        )
    return out


# ---------------------------------------------------------------------------
# criterion 3: maximum secure distances
# ---------------------------------------------------------------------------
def criterion3() -> list[CheckResult]:
    got_a = analysis.max_distance(0.1, math.pi / 400, eta_c=0.95)
    got_b = analysis.max_distance(0.001, 0.0, eta_c=0.95)
    # the published 95.8 km figure matches the noiseless threshold; the
    # pi/400 evaluation is emitted alongside for comparison
    got_b_alt = analysis.max_distance(0.001, math.pi / 400, eta_c=0.95)
    return [
        _check("3", "L_max at p1=0.1, dth=pi/400", 14.72, got_a, 0.2, "reference"),
        _check("3", "L_max at p1=0.001, dth=0", 95.8, got_b, 0.5, "reference"),
        CheckResult(
            "3", "L_max at p1=0.001, dth=pi/400 (comparison)",
            "reported with dth=0 attribution", f"{got_b_alt:.4g} km", "n/a",
            True, "closed-form",
        ),
    ]


# ---------------------------------------------------------------------------
# criteria 4-5: noise thresholds and the fidelity mapping
# ---------------------------------------------------------------------------
def criterion4() -> list[CheckResult]:
    out = []
    for p1, want in DTH_THRESHOLDS.items():
        got = analysis.delta_theta_threshold(p1)
        out.append(
            _check("4", f"dth* at p1={p1}", want, got, 0.02 * want, "reference")
        )
    grid = np.linspace(1e-4, math.pi - 1e-4, 4001)
    c_min = min(
        analysis.secrecy_capacity(
            analysis.CapacityParams(p1=0.429, delta_theta=float(d), eta=1.0)
        ).c_s
        for d in grid
    )
    out.append(
        CheckResult(
            "4", "C_S stays positive on (0, pi) at p1=0.429",
            "> 0", f"min C_S = {c_min:.3e}", "n/a", c_min > 0.0, "reference",
        )
    )
    return out


def criterion5() -> list[CheckResult]:
    out = []
    for dth_star, want in FIDELITY_TARGETS.items():
        got = analysis.fidelity_threshold(dth_star)
        out.append(
            _check("5", f"fidelity at dth*={dth_star}", want, got, 5e-4, "reference")
        )
    return out


# ---------------------------------------------------------------------------
# criterion 6: practical efficiency
# ---------------------------------------------------------------------------
def criterion6() -> list[CheckResult]:
    link = LinkBudget(distance_km=0.5, alpha_db_per_km=0.2, eta_c=0.95)
    point = analysis.secrecy_capacity(
        analysis.CapacityParams(p1=0.1, delta_theta=math.pi / 400, link=link)
    )
    e_s = analysis.practical_efficiency(point.c_s, analysis.EfficiencyParams())
    want = EFFICIENCY_ORACLE_BITS_PER_S
    out = [
        _check(
            "6", "E_s at p1=0.1, L=0.5 km", want, e_s, 0.02 * want, "oracle"
        ),
        CheckResult(
            "6", "DI benchmark constants (reporting only)",
            "eta*=0.926, L_max=0.561 km",
            f"eta*={DI_BENCHMARK['eta_threshold']}, "
            f"L_max={DI_BENCHMARK['max_distance_km']} km",
            "n/a", True, "reference",
        ),
    ]
    return out


# ---------------------------------------------------------------------------
# criterion 7: Monte Carlo vs closed forms (keystone)
# ---------------------------------------------------------------------------
KEYSTONE_GRID = tuple(
    (eta, dth, p1)
    for eta in (0.3, 0.7, 1.0)
    for dth in (0.0, math.pi / 40)
    for p1 in (0.1, 0.4)
)


def _keystone_closed(eta: float, dth: float, p1: float, policy: BasisPolicy, config: BasisConfig) -> dict:
    offs = policy.offsets(config)
    q1, q2 = eta, eta * eta
    mean_cos = 2.0 * p1 - 1.0
    p1_clicked = 0.5 + math.cos(2.0 * dth) * mean_cos / 2.0
    p2_clicked = 0.5 + math.cos(4.0 * dth) * mean_cos / 2.0
    assign_w = math.fsum(
        w * min(p, 1.0 - p)
        for d, w in zip(offs.deltas, offs.weights)
        for p in (analysis.ideal_outcome_probability(d, offs.n, config.theta),)
    )
    assign0 = offs.assigned_g0_fraction(config.theta)
    return {
        "q_ab": q1,
        "q_aba": q2,
        "q_aba_decode": q2,
        "e_ab_signed": q1 * mean_cos * (1.0 - math.cos(2.0 * dth)) / 2.0,
        "e_ab_assign": (1.0 - q1) * assign_w,
        "e_aba_signed": q2 * mean_cos * (1.0 - math.cos(4.0 * dth)) / 2.0,
        "e_aba_assign": (1.0 - q2) * assign_w,
        "p1_clicked": p1_clicked,
        "p2_clicked": p2_clicked,
        "p1_observed": q1 * p1_clicked + (1.0 - q1) * assign0,
        "p2_observed": q2 * p2_clicked + (1.0 - q2) * assign0,
    }


def _criterion7_point(args: tuple) -> dict:
    index, eta, dth, p1, r = args
    config = BasisConfig(n=8)
    policy = BasisPolicy(mode=BasisPolicyMode.TARGET_P1, target=p1)
    params = ProtocolParams(
        r=r,
        config=config,
        policy=policy,
        link=LinkBudget(eta_c=eta),  # bare-efficiency realization
        noise=ChannelNoiseModel(delta_theta=dth),
        continue_on_abort=True,
        seed=7_000 + index,
    )
    result = run_full_protocol(params)
    closed = _keystone_closed(eta, dth, p1, policy, config)
    stats = result.stats
    rows = []
    for name, want in closed.items():
        est = getattr(stats, name)
        sigma = est.stderr
        diff = abs(est.value - want)
        z = diff / sigma if sigma > 0 else (0.0 if diff == 0.0 else math.inf)
        rows.append((name, want, est.value, z))
    return {"eta": eta, "dth": dth, "p1": p1, "rows": rows}


def criterion7(r: int = 1_000_000, workers: int = 1) -> list[CheckResult]:
    jobs = [
        (i, eta, dth, p1, r) for i, (eta, dth, p1) in enumerate(KEYSTONE_GRID)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_criterion7_point, jobs))
    else:
        results = [_criterion7_point(job) for job in jobs]
    out = []
    for res in results:
        worst = max(res["rows"], key=lambda row: row[3])
        name, want, got, z = worst
        out.append(
            CheckResult(
                "7",
                f"transcript vs closed forms at eta={res['eta']}, "
                f"dth={res['dth']:.4g}, p1={res['p1']} (r={r})",
                "all statistics within 5 sigma",
                f"worst {name}: want {want:.6g}, got {got:.6g}, z={z:.2f}",
                "5 sigma",
                all(row[3] <= 5.0 for row in res["rows"]),
                "simulation",
            )
        )
    return out


# ---------------------------------------------------------------------------
# criterion 8: protocol correctness
# ---------------------------------------------------------------------------
def criterion8() -> list[CheckResult]:
    config = BasisConfig(n=8)
    policy = BasisPolicy(mode=BasisPolicyMode.TARGET_P1, target=0.1)
    params = ProtocolParams(
        r=1000, config=config, policy=policy, link=LinkBudget(),
        noise=ChannelNoiseModel(), seed=42,
    )
    result = run_full_protocol(params)
    ok = (
        result.completed
        and result.frame.n_lost == 0
        and result.frame.n_flipped == 0
        and bool(np.all(result.frame.decoded == result.frame.payload))
    )
    out = [
        CheckResult(
            "8", "noiseless lossless run decodes 1000 bits exactly",
            "0 lost, 0 flipped",
            f"{result.frame.n_lost} lost, {result.frame.n_flipped} flipped",
            "exact", ok, "simulation",
        )
    ]
    bad = 0
    for seed in range(100):
        p = ProtocolParams(
            r=50, config=config, policy=policy, link=LinkBudget(),
            noise=ChannelNoiseModel(), seed=seed,
        )
        run = ProtocolRun(p)
        run.step1_prepare()
        run.step2_transmit_to_bob()
        run.step3_first_check()
        run.step4_encode_and_shuffle()
        led = run.ledger
        recon_x2 = np.empty(p.r, dtype=led.x4.dtype)
        recon_x2[led.s2_order] = led.x4
        x3_by_slot = led.prep[led.combined_positions()[led.return_perm[led.s3p_slots]]]
        recon_x3 = np.empty(p.r, dtype=x3_by_slot.dtype)
        recon_x3[led.s3_order] = x3_by_slot
        if not (np.array_equal(recon_x2, led.x2) and np.array_equal(recon_x3, led.x3)):
            bad += 1
    out.append(
        CheckResult(
            "8", "shuffle/announce round-trip restores order (100 seeds)",
            "100/100 exact", f"{100 - bad}/100 exact", "exact", bad == 0, "simulation",
        )
    )
    return out


# ---------------------------------------------------------------------------
# criterion 9: attack model
# ---------------------------------------------------------------------------
def _first_check(params: ProtocolParams):
    run = ProtocolRun(params)
    run.step1_prepare()
    run.step2_transmit_to_bob()
    return run.step3_first_check()


def _attack_params(r: int, p1a: float, p2a: float, target: float, seed: int) -> ProtocolParams:
    return ProtocolParams(
        r=r,
        config=BasisConfig(n=8),
        policy=BasisPolicy(mode=BasisPolicyMode.TARGET_P1, target=target),
        link=LinkBudget(),
        noise=ChannelNoiseModel(),
        adversary=BlindingAttackParams(p1=p1a, p2=p2a),
        continue_on_abort=True,
        seed=seed,
    )


def criterion9(r_grid: int = 100_000) -> list[CheckResult]:
    out = []
    target = 0.1
    worst_z, worst_at = 0.0, ""
    levels = (0.0, 0.25, 0.5, 0.75, 1.0)
    for i, p1a in enumerate(levels):
        for j, p2a in enumerate(levels):
            report = _first_check(
                _attack_params(r_grid, p1a, p2a, target, seed=900 + 10 * i + j)
            )
            q = predict_attacked_distribution(target, BlindingAttackParams(p1a, p2a))
            sigma = math.sqrt(q * (1.0 - q) / r_grid)
            diff = abs(report.empirical_p_g0 - q)
            z = diff / sigma if sigma > 0 else (0.0 if diff == 0.0 else math.inf)
            if z > worst_z:
                worst_z, worst_at = z, f"p1={p1a}, p2={p2a}"
    out.append(
        CheckResult(
            "9", f"attacked P(g=0) matches (1-p1)*P1 + p1*p2 on the 25-point grid (r={r_grid})",
            "all within 5 sigma", f"worst z={worst_z:.2f} at {worst_at}",
            "5 sigma", worst_z <= 5.0, "simulation",
        )
    )

    m = 10_000
    tol = hoeffding_tolerance(m)
    power = detection_power(0.1, BlindingAttackParams(0.5, 0.5), m, tol)
    out.append(
        CheckResult(
            "9", "abort probability under attack (p1=p2=0.5, P1=0.1, m=1e4)",
            "> 0.999", f"{power:.6f}", "n/a", power > 0.999, "closed-form",
        )
    )
    aborts = sum(
        not _first_check(_attack_params(m, 0.5, 0.5, 0.1, seed=2_000 + k)).passed
        for k in range(30)
    )
    out.append(
        CheckResult(
            "9", "check aborts in attacked runs (30 replicas)",
            "30/30 abort", f"{aborts}/30 abort", "exact", aborts == 30, "simulation",
        )
    )

    power_hidden = detection_power(0.5, BlindingAttackParams(0.5, 0.5), m, tol)
    out.append(
        CheckResult(
            "9", "attack at P1=0.5, p2=0.5 is undetectable",
            "abort probability <= 1e-06", f"{power_hidden:.3g}", "n/a",
            power_hidden <= 1e-6, "closed-form",
        )
    )
    false_aborts = sum(
        not _first_check(_attack_params(m, 0.5, 0.5, 0.5, seed=3_000 + k)).passed
        for k in range(30)
    )
    out.append(
        CheckResult(
            "9", "no aborts at the undetectable point (30 replicas)",
            "0/30 abort", f"{false_aborts}/30 abort", "exact",
            false_aborts == 0, "simulation",
        )
    )
    return out


# ---------------------------------------------------------------------------
# criterion 10: property suites
# ---------------------------------------------------------------------------
def criterion10(n_random_ops: int = 100_000) -> list[CheckResult]:
    out = []

    worst = 0.0
    for p1 in (0.05, 0.1, 0.25, 0.4, 0.45):
        for eta in (0.3, 0.7, 1.0):
            for dth in (0.0, math.pi / 40, 0.3):
                a = analysis.secrecy_capacity(
                    analysis.CapacityParams(p1=p1, delta_theta=dth, eta=eta)
                ).c_s
                b = analysis.secrecy_capacity(
                    analysis.CapacityParams(p1=1.0 - p1, delta_theta=dth, eta=eta)
                ).c_s
                worst = max(worst, abs(a - b))
    out.append(
        CheckResult(
            "10", "C_S symmetry about P1=0.5", "<= 1e-09", f"max diff {worst:.2e}",
            "1e-09", worst <= 1e-9, "exact",
        )
    )

    worst = 0.0
    for p1 in (0.1, 0.3):
        for dth in np.linspace(0.0, math.pi, 21):
            b0 = analysis.error_budget(
                analysis.CapacityParams(p1=p1, delta_theta=float(dth), eta=1.0)
            )
            b1 = analysis.error_budget(
                analysis.CapacityParams(p1=p1, delta_theta=float(dth) + math.pi, eta=1.0)
            )
            b2 = analysis.error_budget(
                analysis.CapacityParams(
                    p1=p1, delta_theta=float(dth) + math.pi / 2, eta=1.0
                )
            )
            worst = max(worst, abs(b0.e_ab - b1.e_ab), abs(b0.e_aba - b2.e_aba))
    out.append(
        CheckResult(
            "10", "error periodicity: e_ab period pi, e_aba period pi/2",
            "<= 1e-09", f"max diff {worst:.2e}", "1e-09", worst <= 1e-9, "exact",
        )
    )

    idents = (
        abs(analysis.binary_entropy(0.0)),
        abs(analysis.binary_entropy(1.0)),
        abs(analysis.binary_entropy(0.5) - 1.0),
    )
    out.append(
        CheckResult(
            "10", "entropy identities h(0)=h(1)=0, h(0.5)=1",
            "exact", f"max dev {max(idents):.2e}", "1e-12",
            max(idents) <= 1e-12, "exact",
        )
    )

    rng = np.random.default_rng(12345)
    config = BasisConfig(n=16)
    worst = 0.0
    state = prepare(1, config)
    for _ in range(n_random_ops):
        choice = rng.integers(0, 3)
        if choice == 0:
            state = prepare(int(rng.integers(1, 17)), config)
        elif choice == 1:
            state = apply_encode(state, EncodeOp.U1 if rng.random() < 0.5 else EncodeOp.U0)
        else:
            state = apply_rotation(state, ChannelRotation(float(rng.uniform(-1.5, 1.5))))
        worst = max(worst, abs(state.norm_sq() - 1.0))
    out.append(
        CheckResult(
            "10", f"normalization preserved over {n_random_ops} randomized ops",
            "<= 1e-12", f"max |norm-1| = {worst:.2e}", "1e-12",
            worst <= 1e-12, "exact",
        )
    )
    return out


def run_all(workers: int = 1, r_keystone: int = 1_000_000) -> list[CheckResult]:
    checks: list[CheckResult] = []
    checks += criterion1()
    checks += criterion2()
    checks += criterion3()
    checks += criterion4()
    checks += criterion5()
    checks += criterion6()
    checks += criterion7(r=r_keystone, workers=workers)
    checks += criterion8()
    checks += criterion9()
    checks += criterion10()
    return checks

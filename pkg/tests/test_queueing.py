"""Queue discipline, skill matching, idle-staff selection, refund path policy."""

import pytest

from retailsim.agents import CustomerAgent, CustomerGoal, StaffAgent, StaffRole
from retailsim.queueing import (
    AutonomousRefund,
    EmpowermentPolicy,
    QueueEntry,
    QueueKind,
    ReferredRefund,
    ServiceQueue,
    find_idle,
    resolve_refund_path,
)
from retailsim.sampling import TriangularParams


class ScriptedRng:
    """uniform() pops scripted values and counts the calls."""

    def __init__(self, values):
        self.values = list(values)
        self.calls = 0

    def uniform(self):
        self.calls += 1
        return self.values.pop(0)


def customer(cid, needs_expert=False):
    c = CustomerAgent(cid, CustomerGoal.PURCHASE, 0.0)
    c.needs_expert = needs_expert
    return c


def entry(cid, needs_expert=False):
    return QueueEntry(customer(cid), 0.0, needs_expert)


# -- FIFO and skill matching ----------------------------------------------------


def test_pop_head_is_fifo():
    q = ServiceQueue(QueueKind.PAY)
    entries = [entry(i) for i in range(3)]
    for e in entries:
        q.push(e)
    assert [q.pop_head() for _ in range(3)] == entries
    assert q.pop_head() is None


def test_normal_seller_skips_expert_only_entries():
    q = ServiceQueue(QueueKind.HELP)
    expert_only = entry(0, needs_expert=True)
    plain = entry(1)
    q.push(expert_only)
    q.push(plain)
    assert q.pop_first_servable(can_serve_expert=False) is plain
    assert list(q.entries) == [expert_only]  # head kept its position
    assert q.pop_first_servable(can_serve_expert=False) is None


def test_expert_takes_the_oldest_entry_outright():
    q = ServiceQueue(QueueKind.HELP)
    first = entry(0, needs_expert=True)
    second = entry(1)
    q.push(first)
    q.push(second)
    assert q.pop_first_servable(can_serve_expert=True) is first


def test_remove_present_and_absent():
    q = ServiceQueue(QueueKind.REFUND)
    e = entry(0)
    q.push(e)
    assert q.remove(e) is True
    assert q.remove(e) is False
    assert len(q) == 0


def test_drain_empties_queue():
    q = ServiceQueue(QueueKind.PAY)
    entries = [entry(i) for i in range(4)]
    for e in entries:
        q.push(e)
    assert q.drain() == entries
    assert len(q) == 0


def test_find_idle_prefers_lowest_id():
    staff = [StaffAgent(i, StaffRole.CASHIER) for i in range(3)]
    staff[0].begin(customer(0), 0.0)
    assert find_idle(staff) is staff[1]
    staff[1].begin(customer(1), 0.0)
    staff[2].begin(customer(2), 0.0)
    assert find_idle(staff) is None


# -- empowerment policy ----------------------------------------------------------


OVERHEAD = TriangularParams(1, 3, 6)


def test_policy_validates_probability_and_multiplier():
    EmpowermentPolicy(0.0, OVERHEAD)
    EmpowermentPolicy(1.0, OVERHEAD)
    with pytest.raises(ValueError, match="p_empowered"):
        EmpowermentPolicy(1.5, OVERHEAD)
    with pytest.raises(ValueError, match="multiplier"):
        EmpowermentPolicy(0.5, OVERHEAD, empowered_duration_multiplier=0.0)


def test_empowered_refund_scales_duration_and_skips_service_draw():
    policy = EmpowermentPolicy(1.0, OVERHEAD, empowered_duration_multiplier=2.0)
    decision = ScriptedRng([0.99])  # < 1.0, so still empowered
    service = ScriptedRng([])
    path = resolve_refund_path(policy, 5.0, [], decision, service)
    assert path == AutonomousRefund(duration=10.0)
    assert decision.calls == 1
    assert service.calls == 0  # no overhead draw on the autonomous branch


def test_referred_refund_draws_overhead_and_finds_idle_manager():
    policy = EmpowermentPolicy(0.0, TriangularParams.constant(3.0))
    managers = [StaffAgent(0, StaffRole.SECTION_MANAGER), StaffAgent(1, StaffRole.SECTION_MANAGER)]
    managers[0].begin(customer(0), 0.0)
    decision = ScriptedRng([0.4])
    service = ScriptedRng([0.7])
    path = resolve_refund_path(policy, 5.0, managers, decision, service)
    assert isinstance(path, ReferredRefund)
    assert path.manager is managers[1]
    assert path.overhead == 3.0
    assert path.duration == 5.0
    assert service.calls == 1


def test_referred_refund_with_all_managers_busy():
    policy = EmpowermentPolicy(0.0, TriangularParams.constant(2.0))
    manager = StaffAgent(0, StaffRole.SECTION_MANAGER)
    manager.begin(customer(0), 0.0)
    path = resolve_refund_path(policy, 4.0, [manager], ScriptedRng([0.0]), ScriptedRng([0.5]))
    assert isinstance(path, ReferredRefund)
    assert path.manager is None


def test_empowerment_split_binomial():
    from retailsim.kernel import rng_stream

    policy = EmpowermentPolicy(0.5, OVERHEAD)
    decision = rng_stream(17, "decisions")
    service = rng_stream(17, "service")
    n = 100_000
    autonomous = sum(
        isinstance(resolve_refund_path(policy, 1.0, [], decision, service), AutonomousRefund)
        for i in range(n)
    )
    assert abs(autonomous / n - 0.5) < 0.01

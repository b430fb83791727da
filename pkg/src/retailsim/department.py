"""The department model: one replication of customers moving through a store.

Event handlers drive CustomerAgents through the statechart over a horizon of
closed trading days. At each day close, customers in service are completed
through their current activity (purchase counted, help or refund credited)
and everyone else departs with the satisfaction already accumulated; staff
busy time never crosses a close, so utilization stays in [0, 1].

Handlers use plain-int event kinds and id-ordered staff lists; with buffered
RNG substreams this keeps a 10-week replication in the tens of milliseconds
per thousand customers, which the experiment harness relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .agents import (
    REFUND_IN_AUTH,
    REFUND_IN_SERVICE,
    REFUND_NONE,
    REFUND_WAIT_AUTH,
    CustomerGoal,
    CustomerState,
    SatisfactionEvent,
    SatisfactionLedger,
    StaffAgent,
    StaffRole,
    begin_service,
    spawn_customer,
)
from .kernel import EventCalendar, RngStream, SimulationFault
from .queueing import (
    AutonomousRefund,
    QueueEntry,
    QueueKind,
    ServiceQueue,
    find_idle,
    resolve_refund_path,
)
from .sampling import sample_interarrival, sample_triangular

EV_ARRIVAL = 0
EV_DAY_CLOSE = 1
EV_BROWSE_END = 2
EV_HELP_END = 3
EV_PAY_END = 4
EV_REFUND_END = 5
EV_REFUND_SERVICE_END = 6
EV_AUTH_END = 7
EV_RENEGE_HELP = 8
EV_RENEGE_PAY = 9
EV_RENEGE_REFUND = 10

EVENT_NAMES = (
    "arrival",
    "day_close",
    "browse_end",
    "help_end",
    "pay_end",
    "refund_end",
    "refund_service_end",
    "auth_end",
    "renege_help",
    "renege_pay",
    "renege_refund",
)


def utilization(busy_minutes, headcount, trading_minutes):
    """Busy fraction of total paid minutes; None when nobody holds the role."""
    if headcount == 0:
        return None
    return busy_minutes / (headcount * trading_minutes)


@dataclass(frozen=True)
class RunMetrics:
    """Aggregate outcome of one replication.

    Field order is the column order of result CSVs. Utilizations are None
    (empty CSV cell) when the staffing plan has nobody in the role, which is
    not the same thing as 0.0. overall_satisfaction equals the satisfaction
    ledger sum by construction; both are reported so the equality is
    checkable from the outside.
    """

    transactions: int
    satisfied_customers: int
    overall_satisfaction: int
    refund_satisfaction: int
    cashier_utilization: object
    seller_utilization: object
    manager_utilization: object
    customers_entered: int
    customers_left: int
    abandoned_help: int
    abandoned_pay: int
    abandoned_refund: int
    refunds_completed: int
    manager_authorizations: int
    autonomous_refunds: int
    satisfaction_ledger_sum: int


METRIC_FIELDS = tuple(f.name for f in fields(RunMetrics))

_REFUND_SAT_KINDS = (
    SatisfactionEvent.REFUND_GRANTED,
    SatisfactionEvent.REFUND_QUEUE_ABANDONED,
)


class DepartmentSim:
    """One seeded replication; build, optionally inject arrivals, then run()."""

    def __init__(self, config, staffing=None, seed=0, trace=None, strict=False):
        self.config = config
        self.staffing = staffing if staffing is not None else config.staffing
        self.seed = seed
        self.cal = EventCalendar()
        self.trace = trace
        self.strict = strict

        self.rng_arrivals = RngStream(seed, "arrivals")
        self.rng_decisions = RngStream(seed, "decisions")
        self.rng_service = RngStream(seed, "service")
        self.rng_patience = RngStream(seed, "patience")

        sid = 0
        self.cashiers = []
        self.normal_sellers = []
        self.expert_sellers = []
        self.managers = []
        for count, role, pool in (
            (self.staffing.cashiers, StaffRole.CASHIER, self.cashiers),
            (self.staffing.normal_sellers, StaffRole.NORMAL_SELLER, self.normal_sellers),
            (self.staffing.expert_sellers, StaffRole.EXPERT_SELLER, self.expert_sellers),
            (self.staffing.section_managers, StaffRole.SECTION_MANAGER, self.managers),
        ):
            for _ in range(count):
                pool.append(StaffAgent(sid, role))
                sid += 1

        self.help_q = ServiceQueue(QueueKind.HELP)
        self.pay_q = ServiceQueue(QueueKind.PAY)
        self.refund_q = ServiceQueue(QueueKind.REFUND)
        self._cashier_dispatch = tuple(
            (self.refund_q, self._start_refund)
            if name == "refund"
            else (self.pay_q, self._start_pay)
            for name in config.cashier_priority
        )
        self.auth_wait = []

        self.live = {}
        self.ledger = SatisfactionLedger()
        self.weights = config.weights

        # Hot-path copies of config values.
        p = config.probabilities
        self.p_refund_goal = p.refund_goal
        self.p_need_help = p.need_help
        self.p_buy_browse = p.browse_buy_conditional()
        self.p_buy_after_help = p.buy_after_help
        self.p_needs_expert = p.needs_expert
        self.p_repurchase = p.repurchase_after_refund
        d = config.durations
        self.d_browse = d.browse
        self.d_help = d.help
        self.d_pay = d.pay_service
        self.d_refund = d.refund_service
        self.d_patience_help = d.patience_help
        self.d_patience_pay = d.patience_pay
        self.d_patience_refund = d.patience_refund
        self.policy = config.empowerment
        self.hold_cashier = config.empowerment.hold_cashier_during_referral

        self.day_minutes = config.horizon.trading_day_minutes
        self.days = config.horizon.days
        self.day_index = 0
        self.day_end = self.day_minutes

        self.next_cid = 0
        self.entered = 0
        self.departed = 0
        self.satisfied = 0
        self.overall_satisfaction = 0
        self.refund_satisfaction = 0
        self.transactions = 0
        self.abandoned_help = 0
        self.abandoned_pay = 0
        self.abandoned_refund = 0
        self.refunds_completed = 0
        self.manager_authorizations = 0
        self.autonomous_refunds = 0

        self._handlers = (
            self._on_arrival,
            self._on_day_close,
            self._on_browse_end,
            self._on_help_end,
            self._on_pay_end,
            self._on_refund_end,
            self._on_refund_service_end,
            self._on_auth_end,
            self._on_renege_help,
            self._on_renege_pay,
            self._on_renege_refund,
        )

    # -- public API ---------------------------------------------------------

    def inject_arrival(self, at):
        """Force an arrival at an absolute time (scripted scenarios)."""
        return self.cal.schedule(at, EV_ARRIVAL)

    def run(self):
        cal = self.cal
        horizon = self.day_minutes * self.days
        for d in range(self.days):
            cal.schedule((d + 1) * self.day_minutes, EV_DAY_CLOSE)
        self._chain_arrival(0.0)
        cal.run_until(horizon, self._dispatch)
        if self.live:
            raise SimulationFault(f"{len(self.live)} customers still in store at horizon")
        for pool in (self.cashiers, self.normal_sellers, self.expert_sellers, self.managers):
            for staff in pool:
                if staff.busy:
                    raise SimulationFault(f"{staff!r} still busy at horizon")
        return self._metrics(horizon)

    # -- dispatch -----------------------------------------------------------

    def _dispatch(self, handle):
        if self.trace is not None:
            target = handle.target
            self.trace.append(
                (handle.fire_time, EVENT_NAMES[handle.kind], None if target is None else target.id)
            )
        self._handlers[handle.kind](handle.target)
        if self.strict:
            self._check_invariants()

    def _check_invariants(self):
        if self.entered - self.departed != len(self.live):
            raise SimulationFault(
                f"conservation broken: entered={self.entered} "
                f"departed={self.departed} live={len(self.live)}"
            )
        queued = set()
        for queue, state in (
            (self.help_q, CustomerState.IN_HELP_QUEUE),
            (self.pay_q, CustomerState.IN_PAY_QUEUE),
            (self.refund_q, CustomerState.IN_REFUND_QUEUE),
        ):
            for entry in queue.entries:
                c = entry.customer
                if c.id in queued:
                    raise SimulationFault(f"customer {c.id} present in two queues")
                queued.add(c.id)
                if c.state is not state:
                    raise SimulationFault(
                        f"customer {c.id} sits in the {queue.kind.value} queue "
                        f"but is in state {c.state.name}"
                    )
                if c.queue_entry is not entry:
                    raise SimulationFault(f"customer {c.id} queue_entry out of sync")
                h = entry.renege_handle
                if h is None or h.cancelled or h.fired:
                    raise SimulationFault(
                        f"queued customer {c.id} lacks a live renege timer"
                    )
        for c in self.live.values():
            if c.renege_handle is not None and c.id not in queued:
                raise SimulationFault(
                    f"customer {c.id} holds a renege timer outside any queue"
                )
        if (self.pay_q.entries or self.refund_q.entries) and find_idle(
            self.cashiers
        ) is not None:
            raise SimulationFault("idle cashier while pay/refund customers queue")
        if self.help_q.entries:
            if find_idle(self.expert_sellers) is not None:
                raise SimulationFault("idle expert seller while help customers queue")
            if find_idle(self.normal_sellers) is not None and any(
                not e.needs_expert for e in self.help_q.entries
            ):
                raise SimulationFault("idle normal seller while servable help entry queues")
        if self.auth_wait and find_idle(self.managers) is not None:
            raise SimulationFault("idle manager while refunds await authorization")

    # -- helpers ------------------------------------------------------------

    def _apply(self, customer, kind):
        w = self.weights[kind]
        customer.satisfaction += w
        self.ledger.record(kind, w)
        if kind in _REFUND_SAT_KINDS:
            self.refund_satisfaction += w

    def _depart(self, customer, trigger):
        customer.transition(CustomerState.LEAVING, trigger)
        self.departed += 1
        sat = customer.satisfaction
        self.overall_satisfaction += sat
        if sat > 0:
            self.satisfied += 1
        del self.live[customer.id]

    def _chain_arrival(self, now):
        gap = sample_interarrival(self.config.arrivals, self.rng_arrivals.uniform())
        at = now + gap
        if at < self.day_end:
            self.cal.schedule(at, EV_ARRIVAL)

    def _enqueue(self, customer, queue, patience, renege_kind, trigger, state):
        customer.transition(state, trigger)
        now = self.cal.now
        entry = QueueEntry(customer, now, customer.needs_expert)
        wait = sample_triangular(patience, self.rng_patience.uniform())
        handle = self.cal.schedule(now + wait, renege_kind, customer)
        entry.renege_handle = handle
        customer.renege_handle = handle
        customer.queue_entry = entry
        queue.push(entry)

    def _claim(self, entry):
        """Take a queued customer for service; kills the renege timer."""
        customer = entry.customer
        self.cal.cancel(entry.renege_handle)
        customer.renege_handle = None
        customer.queue_entry = None
        return customer

    def _staff_freed(self, staff):
        role = staff.role
        if role is StaffRole.CASHIER:
            for queue, starter in self._cashier_dispatch:
                entry = queue.pop_head()
                if entry is not None:
                    starter(self._claim(entry), staff)
                    return
        elif role is StaffRole.SECTION_MANAGER:
            if self.auth_wait:
                self._begin_auth(self.auth_wait.pop(0), staff)
        else:
            entry = self.help_q.pop_first_servable(role is StaffRole.EXPERT_SELLER)
            if entry is not None:
                self._start_help(self._claim(entry), staff)

    # -- customer flow ------------------------------------------------------

    def _on_arrival(self, _):
        now = self.cal.now
        cid = self.next_cid
        self.next_cid = cid + 1
        customer = spawn_customer(cid, now, self.p_refund_goal, self.rng_decisions.uniform())
        self.live[cid] = customer
        self.entered += 1
        if customer.goal is CustomerGoal.REFUND:
            customer.transition(CustomerState.SEEKING_REFUND, "arrival")
            self._request_refund(customer)
        else:
            customer.transition(CustomerState.BROWSING, "arrival")
            self._begin_browse(customer, now)
        self._chain_arrival(now)

    def _begin_browse(self, customer, now):
        duration = sample_triangular(self.d_browse, self.rng_service.uniform())
        customer.service_handle = self.cal.schedule(now + duration, EV_BROWSE_END, customer)

    def _on_browse_end(self, customer):
        customer.service_handle = None
        dec = self.rng_decisions
        if dec.uniform() < self.p_need_help:
            customer.transition(CustomerState.SEEKING_HELP, "browse_exit_help")
            customer.needs_expert = dec.uniform() < self.p_needs_expert
            self._request_help(customer)
        elif dec.uniform() < self.p_buy_browse:
            customer.transition(CustomerState.SEEKING_PAY, "browse_exit_buy")
            self._request_pay(customer)
        else:
            self._apply(customer, SatisfactionEvent.LEFT_WITHOUT_PURCHASE)
            self._depart(customer, "browse_exit_leave")

    def _request_help(self, customer):
        if customer.needs_expert:
            staff = find_idle(self.expert_sellers)
        else:
            staff = find_idle(self.normal_sellers) or find_idle(self.expert_sellers)
        if staff is not None:
            self._start_help(customer, staff)
        else:
            self._enqueue(
                customer,
                self.help_q,
                self.d_patience_help,
                EV_RENEGE_HELP,
                "help_enqueue",
                CustomerState.IN_HELP_QUEUE,
            )

    def _start_help(self, customer, staff):
        customer.transition(CustomerState.BEING_HELPED, "help_start")
        duration = sample_triangular(self.d_help, self.rng_service.uniform())
        begin_service(staff, customer, duration, self.cal, EV_HELP_END)

    def _on_help_end(self, customer):
        staff = customer.serving_staff
        staff.finish(self.cal.now)
        customer.serving_staff = None
        customer.service_handle = None
        self._apply(customer, SatisfactionEvent.HELP_RECEIVED)
        if self.rng_decisions.uniform() < self.p_buy_after_help:
            customer.transition(CustomerState.SEEKING_PAY, "help_exit_buy")
            self._request_pay(customer)
        else:
            self._depart(customer, "help_exit_leave")
        self._staff_freed(staff)

    def _request_pay(self, customer):
        cashier = find_idle(self.cashiers)
        if cashier is not None:
            self._start_pay(customer, cashier)
        else:
            self._enqueue(
                customer,
                self.pay_q,
                self.d_patience_pay,
                EV_RENEGE_PAY,
                "pay_enqueue",
                CustomerState.IN_PAY_QUEUE,
            )

    def _start_pay(self, customer, cashier):
        customer.transition(CustomerState.PAYING, "pay_start")
        duration = sample_triangular(self.d_pay, self.rng_service.uniform())
        begin_service(cashier, customer, duration, self.cal, EV_PAY_END)

    def _on_pay_end(self, customer):
        cashier = customer.serving_staff
        cashier.finish(self.cal.now)
        customer.serving_staff = None
        customer.service_handle = None
        self.transactions += 1
        self._apply(customer, SatisfactionEvent.PURCHASE_COMPLETED)
        self._depart(customer, "pay_done")
        self._staff_freed(cashier)

    # -- refunds ------------------------------------------------------------

    def _request_refund(self, customer):
        cashier = find_idle(self.cashiers)
        if cashier is not None:
            self._start_refund(customer, cashier)
        else:
            self._enqueue(
                customer,
                self.refund_q,
                self.d_patience_refund,
                EV_RENEGE_REFUND,
                "refund_enqueue",
                CustomerState.IN_REFUND_QUEUE,
            )

    def _start_refund(self, customer, cashier):
        customer.transition(CustomerState.REFUND_PROCESSING, "refund_start")
        now = self.cal.now
        cashier.begin(customer, now)
        customer.refund_cashier = cashier
        base = sample_triangular(self.d_refund, self.rng_service.uniform())
        path = resolve_refund_path(
            self.policy, base, self.managers, self.rng_decisions, self.rng_service
        )
        if isinstance(path, AutonomousRefund):
            self.autonomous_refunds += 1
            customer.refund_phase = REFUND_IN_SERVICE
            customer.service_handle = self.cal.schedule(
                now + path.duration, EV_REFUND_END, customer
            )
            return
        self.manager_authorizations += 1
        customer.refund_base = path.duration
        customer.refund_overhead = path.overhead
        if self.hold_cashier:
            if path.manager is not None:
                self._begin_auth(customer, path.manager)
            else:
                customer.refund_phase = REFUND_WAIT_AUTH
                self.auth_wait.append(customer)
        else:
            customer.refund_phase = REFUND_IN_SERVICE
            customer.service_handle = self.cal.schedule(
                now + path.duration, EV_REFUND_SERVICE_END, customer
            )

    def _begin_auth(self, customer, manager):
        manager.begin(customer, self.cal.now)
        customer.auth_manager = manager
        customer.refund_phase = REFUND_IN_AUTH
        customer.service_handle = self.cal.schedule(
            self.cal.now + customer.refund_overhead, EV_AUTH_END, customer
        )

    def _on_auth_end(self, customer):
        manager = customer.auth_manager
        manager.finish(self.cal.now)
        customer.auth_manager = None
        customer.service_handle = None
        if self.hold_cashier:
            customer.refund_phase = REFUND_IN_SERVICE
            customer.service_handle = self.cal.schedule(
                self.cal.now + customer.refund_base, EV_REFUND_END, customer
            )
        else:
            self._complete_refund(customer)
        self._staff_freed(manager)

    def _on_refund_service_end(self, customer):
        # hold_cashier_during_referral = false: cashier part done, manager next.
        cashier = customer.refund_cashier
        cashier.finish(self.cal.now)
        customer.refund_cashier = None
        customer.service_handle = None
        manager = find_idle(self.managers)
        if manager is not None:
            self._begin_auth(customer, manager)
        else:
            customer.refund_phase = REFUND_WAIT_AUTH
            self.auth_wait.append(customer)
        self._staff_freed(cashier)

    def _on_refund_end(self, customer):
        cashier = customer.refund_cashier
        cashier.finish(self.cal.now)
        customer.refund_cashier = None
        customer.service_handle = None
        self._complete_refund(customer)
        self._staff_freed(cashier)

    def _complete_refund(self, customer):
        customer.refund_phase = REFUND_NONE
        self.refunds_completed += 1
        self._apply(customer, SatisfactionEvent.REFUND_GRANTED)
        if self.rng_decisions.uniform() < self.p_repurchase:
            customer.goal = CustomerGoal.PURCHASE
            customer.transition(CustomerState.BROWSING, "refund_repurchase")
            self._begin_browse(customer, self.cal.now)
        else:
            self._depart(customer, "refund_done")

    # -- reneging -----------------------------------------------------------

    def _renege(self, customer, queue, counter_name, kind, trigger):
        queue.remove(customer.queue_entry)
        customer.queue_entry = None
        customer.renege_handle = None
        setattr(self, counter_name, getattr(self, counter_name) + 1)
        self._apply(customer, kind)
        self._depart(customer, trigger)

    def _on_renege_help(self, customer):
        self._renege(
            customer,
            self.help_q,
            "abandoned_help",
            SatisfactionEvent.HELP_QUEUE_ABANDONED,
            "help_renege",
        )

    def _on_renege_pay(self, customer):
        self._renege(
            customer,
            self.pay_q,
            "abandoned_pay",
            SatisfactionEvent.PAY_QUEUE_ABANDONED,
            "pay_renege",
        )

    def _on_renege_refund(self, customer):
        self._renege(
            customer,
            self.refund_q,
            "abandoned_refund",
            SatisfactionEvent.REFUND_QUEUE_ABANDONED,
            "refund_renege",
        )

    # -- day close ----------------------------------------------------------

    def _on_day_close(self, _):
        now = self.cal.now
        cal = self.cal
        for customer in list(self.live.values()):
            if customer.service_handle is not None:
                cal.cancel(customer.service_handle)
                customer.service_handle = None
            if customer.renege_handle is not None:
                cal.cancel(customer.renege_handle)
                customer.renege_handle = None
            state = customer.state
            if state is CustomerState.BROWSING:
                pass
            elif (
                state is CustomerState.IN_HELP_QUEUE
                or state is CustomerState.IN_PAY_QUEUE
                or state is CustomerState.IN_REFUND_QUEUE
            ):
                customer.queue_entry = None
            elif state is CustomerState.BEING_HELPED:
                customer.serving_staff.finish(now)
                customer.serving_staff = None
                self._apply(customer, SatisfactionEvent.HELP_RECEIVED)
            elif state is CustomerState.PAYING:
                customer.serving_staff.finish(now)
                customer.serving_staff = None
                self.transactions += 1
                self._apply(customer, SatisfactionEvent.PURCHASE_COMPLETED)
            elif state is CustomerState.REFUND_PROCESSING:
                if customer.refund_cashier is not None:
                    customer.refund_cashier.finish(now)
                    customer.refund_cashier = None
                if customer.auth_manager is not None:
                    customer.auth_manager.finish(now)
                    customer.auth_manager = None
                customer.refund_phase = REFUND_NONE
                self.refunds_completed += 1
                self._apply(customer, SatisfactionEvent.REFUND_GRANTED)
            else:
                raise SimulationFault(f"day close found customer in state {state.name}")
            self._depart(customer, "day_close")
        self.help_q.drain()
        self.pay_q.drain()
        self.refund_q.drain()
        self.auth_wait.clear()
        self.day_index += 1
        if self.day_index < self.days:
            self.day_end = (self.day_index + 1) * self.day_minutes
            self._chain_arrival(now)

    # -- metrics ------------------------------------------------------------

    def _metrics(self, horizon):
        cashier_busy = sum(s.busy_minutes for s in self.cashiers)
        seller_busy = sum(s.busy_minutes for s in self.normal_sellers) + sum(
            s.busy_minutes for s in self.expert_sellers
        )
        manager_busy = sum(s.busy_minutes for s in self.managers)
        sellers = len(self.normal_sellers) + len(self.expert_sellers)
        return RunMetrics(
            transactions=self.transactions,
            satisfied_customers=self.satisfied,
            overall_satisfaction=self.overall_satisfaction,
            refund_satisfaction=self.refund_satisfaction,
            cashier_utilization=utilization(cashier_busy, len(self.cashiers), horizon),
            seller_utilization=utilization(seller_busy, sellers, horizon),
            manager_utilization=utilization(manager_busy, len(self.managers), horizon),
            customers_entered=self.entered,
            customers_left=self.departed,
            abandoned_help=self.abandoned_help,
            abandoned_pay=self.abandoned_pay,
            abandoned_refund=self.abandoned_refund,
            refunds_completed=self.refunds_completed,
            manager_authorizations=self.manager_authorizations,
            autonomous_refunds=self.autonomous_refunds,
            satisfaction_ledger_sum=self.ledger.total,
        )


def run_replication(config, staffing=None, seed=0, trace=None, strict=False):
    """Run one deterministic replication; same arguments, same RunMetrics."""
    return DepartmentSim(config, staffing=staffing, seed=seed, trace=trace, strict=strict).run()

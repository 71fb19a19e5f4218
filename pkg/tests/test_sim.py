import pytest

from sessmon.presets import preset
from sessmon.protocol import CORPUS, parse_protocol
from sessmon.sim import (
    Conformant, Explicit, Injection, LinkFaults, Scenario, ScenarioError, SessionGroup, SessionManager,
    Timing, adopt_session_id, run_simulation, write_csv,
)
from sessmon.wire import SessionHeader

ONE_SEND = parse_protocol("""
protocol OneSend
initiator p
role p = q!a(int). end
role q = p&a(int). end
""")


def test_first_unseen_id_is_adopted():
    mgr = SessionManager(unbound=[0, 1])
    assert adopt_session_id(mgr, SessionHeader(session_id=7)) == 0
    assert adopt_session_id(mgr, SessionHeader(session_id=7)) == 0
    assert adopt_session_id(mgr, SessionHeader(session_id=9)) == 1
    assert mgr.bound == {7: 0, 9: 1}


def test_no_waiting_instance_means_no_owner():
    mgr = SessionManager(bound={7: 0})
    assert adopt_session_id(mgr, SessionHeader(session_id=8)) is None
    assert adopt_session_id(mgr, SessionHeader(session_id=7)) == 0


def test_single_send_protocol():
    rep = run_simulation(Scenario("onesend", [SessionGroup(1)]), ONE_SEND)
    assert (rep.accepted, rep.rejected, rep.retransmissions) == (1, 0, 0)
    assert rep.completed == 1


def test_bookinfo_correct_and_faulty_counts():
    good = run_simulation(preset("bookinfo"))
    assert (good.accepted, good.rejected, good.completed) == (800, 0, 100)
    bad = run_simulation(preset("bookinfo", variant="faulty"))
    assert (bad.accepted, bad.rejected) == (800, 100)


@pytest.mark.parametrize("name", CORPUS)
def test_monitors_are_transparent_to_correct_traffic(name):
    on = run_simulation(preset(name, monitored=True))
    off = run_simulation(preset(name, monitored=False))
    assert on.rejected == 0
    assert on.delivered == off.delivered
    assert on.completed == on.sessions


def test_runs_are_deterministic():
    a = run_simulation(preset("sip", "tcp-unreliable", "faulty", seed=3))
    b = run_simulation(preset("sip", "tcp-unreliable", "faulty", seed=3))
    assert a.event_log() == b.event_log() and write_csv([a]) == write_csv([b])
    c = run_simulation(preset("sip", "tcp-unreliable", "faulty", seed=4))
    assert c.event_log() != a.event_log()


def test_scenario_json_round_trip():
    s = preset("pop3", "tcp-unreliable", "faulty", seed=5)
    s.shared = (("Client", "Server"),)
    s.timing = Timing(rto_us=100_000)
    back = Scenario.from_json(s.to_json())
    assert back == s
    assert back.to_json() == s.to_json()


def test_explicit_script_round_trips_and_runs():
    steps = (("recv", "Client", "request"), ("send", "Details", "detail_request"),
             ("send", "Review", "review_request"), ("recv", "Details", None), ("recv", "Review", None),
             ("send", "Client", "response"))
    s = Scenario("bookinfo", [SessionGroup(3, {"Info": Explicit(steps)})])
    assert Scenario.from_json(s.to_json()) == s
    rep = run_simulation(s)
    # sending the detail request first is off-protocol and never passes Info's border
    assert rep.rejected >= 3
    assert rep.faulty_sessions == frozenset({1, 2, 3})


@pytest.mark.parametrize("change, fragment", [
    (dict(transport="quic"), "unknown transport"),
    (dict(faults=LinkFaults(loss_pct=1.0)), "tcp"),
    (dict(groups=[SessionGroup(0)]), "positive"),
    (dict(groups=[SessionGroup(1024)]), "10-bit"),
    (dict(unmonitored=("Nobody",)), "Nobody"),
    (dict(shared=(("Info", "Info"),)), "shared"),
    (dict(shared=(("Info", "Review"), ("Info", "Details"))), "twice"),
    (dict(groups=[SessionGroup(1, {"Ghost": Conformant()})]), "unknown role"),
    (dict(groups=[SessionGroup(1, {"Info": Conformant(injections=(Injection(0, "Review", "nope"),))})]), "nope"),
    (dict(groups=[SessionGroup(1, {"Info": Conformant(injections=(Injection(0, "Info", "request"),))})]), "recipient"),
    (dict(groups=[SessionGroup(1, {"Review": Explicit((("send", "Info", "review_response"),))})]), "send first"),
])
def test_scenario_validation(change, fragment):
    s = Scenario("bookinfo", [SessionGroup(1)])
    for k, v in change.items():
        setattr(s, k, v)
    with pytest.raises(ScenarioError, match=fragment):
        run_simulation(s)


def test_shared_entry_point_uses_a_joint_monitor():
    base = preset("bookinfo")
    shared = preset("bookinfo")
    shared.shared = (("Info", "Review"),)
    a, b = run_simulation(base), run_simulation(shared)
    assert b.rejected == 0 and b.completed == 100
    assert b.delivered == a.delivered
    # every message touching Info or Review is checked once by the joint monitor
    assert set(b.per_monitor) == {"sw:Client", "sw:Details", "sw:Info+Review", "sw:Ratings"}
    assert b.per_monitor["sw:Info+Review"]["accepted"] == 800
    faulty = preset("bookinfo", variant="faulty")
    faulty.shared = (("Info", "Review"),)
    assert run_simulation(faulty).rejected == 100


def test_unmonitored_roles_skip_their_switch():
    s = preset("cdn")
    rep = run_simulation(s)
    assert set(rep.per_monitor) == {"sw:IntServer", "sw:ExtServer"}
    assert rep.rejected == 0 and rep.accepted == 500


def test_csv_columns():
    text = write_csv([run_simulation(Scenario("onesend", [SessionGroup(1)]), ONE_SEND)])
    head, row = text.splitlines()
    assert head == "protocol,transport,variant,accepted,rejected,retransmissions,sessions,completed,stuck,closed"
    assert row == "OneSend,udp,correct,1,0,0,1,1,0,0"
